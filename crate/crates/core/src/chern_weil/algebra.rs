//! Differential forms at a single point of `R^d` with matrix or scalar coefficients.
//! A component is keyed by the bitmask of its increasing index set, so bit `i`
//! stands for `dx^i`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::linalg::CMat;

/// Sign of `dx^I ∧ dx^J` relative to `dx^{I∪J}`; zero when the sets overlap.
pub fn wedge_sign(a: u32, b: u32) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    // count pairs (i ∈ a, j ∈ b) with i > j
    let mut swaps = 0;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarForm {
    pub comps: BTreeMap<u32, Complex64>,
}

impl ScalarForm {
    pub fn one() -> Self {
        Self { comps: BTreeMap::from([(0, Complex64::new(1.0, 0.0))]) }
    }

    pub fn get(&self, mask: u32) -> Complex64 {
        self.comps.get(&mask).copied().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.comps {
            *out.comps.entry(*k).or_default() += v;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { comps: self.comps.iter().map(|(k, v)| (*k, v * s)).collect() }
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (a, x) in &self.comps {
            for (b, y) in &other.comps {
                let s = wedge_sign(*a, *b);
                if s != 0.0 {
                    *out.comps.entry(a | b).or_default() += x * y * s;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatForm {
    pub n: usize,
    pub comps: BTreeMap<u32, CMat>,
}

impl MatForm {
    pub fn zero(n: usize) -> Self {
        Self { n, comps: BTreeMap::new() }
    }

    /// The 1-form `Σ_i a_i dx^{offset + i}`.
    pub fn one_form(coeffs: &[CMat], offset: u32) -> Self {
        let n = coeffs.first().map_or(0, |m| m.nrows());
        Self { n, comps: coeffs.iter().enumerate().map(|(i, m)| (1 << (offset + i as u32), m.clone())).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.comps {
            out.comps.entry(*k).and_modify(|m| *m += v).or_insert_with(|| v.clone());
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { n: self.n, comps: self.comps.iter().map(|(k, v)| (*k, v * s)).collect() }
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n);
        for (a, x) in &self.comps {
            for (b, y) in &other.comps {
                let s = wedge_sign(*a, *b);
                if s != 0.0 {
                    let prod = x * y * Complex64::new(s, 0.0);
                    out.comps.entry(a | b).and_modify(|m| *m += &prod).or_insert(prod);
                }
            }
        }
        out
    }

    pub fn trace(&self) -> ScalarForm {
        ScalarForm { comps: self.comps.iter().map(|(k, v)| (*k, v.trace())).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs() {
        assert_eq!(wedge_sign(0b01, 0b10), 1.0);
        assert_eq!(wedge_sign(0b10, 0b01), -1.0);
        assert_eq!(wedge_sign(0b101, 0b010), -1.0);
        assert_eq!(wedge_sign(0b011, 0b100), 1.0);
        assert_eq!(wedge_sign(0b11, 0b01), 0.0);
    }

    #[test]
    fn scalar_one_forms_anticommute() {
        let a = ScalarForm { comps: BTreeMap::from([(1, Complex64::new(2.0, 0.0)), (2, Complex64::new(1.0, 1.0))]) };
        let b = ScalarForm { comps: BTreeMap::from([(1, Complex64::new(0.5, 0.0)), (4, Complex64::new(3.0, 0.0))]) };
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        assert_eq!(ab.add(&ba).comps.values().map(|v| v.norm()).fold(0.0, f64::max), 0.0);
        assert_eq!(a.wedge(&a).comps.values().map(|v| v.norm()).fold(0.0, f64::max), 0.0);
    }
}
