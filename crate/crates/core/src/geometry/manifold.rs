use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chern_weil::FormField;

/// Building blocks of a product parameter domain, each with a single chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    /// `θ ∈ [0, 2π]`
    Circle,
    /// `(ϑ, φ) ∈ [0, π] × [0, 2π]`, the polar chart; agrees with the complex orientation of `CP¹`
    Sphere2,
    /// Hopf chart `(η, ξ₁, ξ₂) ∈ [0, π/2] × [0, 2π]²`, `q = (cos η e^{iξ₁}, sin η e^{iξ₂})`
    Sphere3,
}

impl Factor {
    pub fn dim(self) -> usize {
        match self {
            Factor::Circle => 1,
            Factor::Sphere2 => 2,
            Factor::Sphere3 => 3,
        }
    }

    fn upper(self) -> &'static [f64] {
        match self {
            Factor::Circle => &[TAU],
            Factor::Sphere2 => &[PI, TAU],
            Factor::Sphere3 => &[FRAC_PI_2, TAU, TAU],
        }
    }

    /// Sign of the chart relative to the outward-normal orientation of the round sphere.
    pub fn orientation(self) -> f64 {
        match self {
            Factor::Circle | Factor::Sphere2 => 1.0,
            Factor::Sphere3 => -1.0,
        }
    }

    /// Riemannian volume density of the round metric in chart coordinates.
    fn density(self, p: &[f64]) -> f64 {
        match self {
            Factor::Circle => 1.0,
            Factor::Sphere2 => p[0].sin(),
            Factor::Sphere3 => p[0].sin() * p[0].cos(),
        }
    }

    fn volume(self) -> f64 {
        match self {
            Factor::Circle => TAU,
            Factor::Sphere2 => 4.0 * PI,
            Factor::Sphere3 => 2.0 * PI * PI,
        }
    }

    fn embed(self, p: &[f64], out: &mut Vec<f64>) {
        match self {
            Factor::Circle => out.extend([p[0].cos(), p[0].sin()]),
            Factor::Sphere2 => out.extend([p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()]),
            Factor::Sphere3 => {
                let (ce, se) = (p[0].cos(), p[0].sin());
                out.extend([ce * p[1].cos(), ce * p[1].sin(), se * p[2].cos(), se * p[2].sin()])
            }
        }
    }

    /// Move a point given by the chart formulas back into the chart box.
    fn canonicalize(self, p: &mut [f64]) {
        match self {
            Factor::Circle => p[0] = p[0].rem_euclid(TAU),
            Factor::Sphere2 => {
                let mut t = p[0].rem_euclid(TAU);
                if t > PI {
                    t = TAU - t;
                    p[1] += PI;
                }
                p[0] = t;
                p[1] = p[1].rem_euclid(TAU);
            }
            Factor::Sphere3 => {
                let mut e = p[0].rem_euclid(TAU);
                if e >= PI {
                    e -= PI;
                    p[1] += PI;
                    p[2] += PI;
                }
                if e > FRAC_PI_2 {
                    e = PI - e;
                    p[1] += PI;
                }
                p[0] = e;
                p[1] = p[1].rem_euclid(TAU);
                p[2] = p[2].rem_euclid(TAU);
            }
        }
    }
}

/// A compact product of spheres covered by one box-shaped chart (collapsed on a null set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamManifold {
    pub name: String,
    pub factors: Vec<Factor>,
}

impl ParamManifold {
    pub fn product(factors: Vec<Factor>) -> Self {
        let name = factors
            .iter()
            .map(|f| match f {
                Factor::Circle => "S1",
                Factor::Sphere2 => "S2",
                Factor::Sphere3 => "S3",
            })
            .collect::<Vec<_>>()
            .join("x");
        Self { name, factors }
    }

    pub fn circle() -> Self {
        Self::product(vec![Factor::Circle])
    }

    pub fn sphere2() -> Self {
        Self::product(vec![Factor::Sphere2])
    }

    pub fn sphere3() -> Self {
        Self::product(vec![Factor::Sphere3])
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    pub fn lower(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    pub fn upper(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| f.upper().iter().copied()).collect()
    }

    pub fn orientation(&self) -> f64 {
        self.factors.iter().map(|f| f.orientation()).product()
    }

    fn pieces(&self) -> impl Iterator<Item = (Factor, std::ops::Range<usize>)> + '_ {
        let mut start = 0;
        self.factors.iter().map(move |f| {
            let r = start..start + f.dim();
            start += f.dim();
            (*f, r)
        })
    }

    pub fn density(&self, p: &[f64]) -> f64 {
        self.pieces().map(|(f, r)| f.density(&p[r])).product()
    }

    pub fn volume(&self) -> f64 {
        self.factors.iter().map(|f| f.volume()).product()
    }

    /// Concatenated embeddings of the factors into `R²`, `R³`, `R⁴`.
    pub fn embed(&self, p: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for (f, r) in self.pieces() {
            f.embed(&p[r], &mut out);
        }
        out
    }

    pub fn embedded_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.embed(a).iter().zip(self.embed(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    pub fn canonicalize(&self, p: &mut [f64]) {
        let ranges: Vec<_> = self.pieces().collect();
        for (f, r) in ranges {
            f.canonicalize(&mut p[r]);
        }
    }

    /// The positively oriented Riemannian volume form, as a top-degree chart field.
    pub fn volume_form(&self) -> FormField {
        let m = self.clone();
        let s = self.orientation();
        FormField::top(self.dim(), Arc::new(move |p| Complex64::new(s * m.density(p), 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;

    /// `det[n, ∂_1 x, …, ∂_d x]` for a single sphere factor, with `n = x`.
    fn outward_det(m: &ParamManifold, p: &[f64]) -> f64 {
        let x = m.embed(p);
        let d = m.dim();
        let h = 1e-6;
        let mut cols = vec![x.clone()];
        for i in 0..d {
            let (mut a, mut b) = (p.to_vec(), p.to_vec());
            a[i] += h;
            b[i] -= h;
            cols.push(m.embed(&a).iter().zip(m.embed(&b)).map(|(u, v)| (u - v) / (2.0 * h)).collect());
        }
        RMat::from_fn(d + 1, d + 1, |r, c| cols[c][r]).determinant()
    }

    #[test]
    fn chart_orientations_match_outward_normal() {
        for (m, p) in [
            (ParamManifold::circle(), vec![0.4]),
            (ParamManifold::sphere2(), vec![1.1, 2.3]),
            (ParamManifold::sphere3(), vec![0.6, 1.9, 4.0]),
        ] {
            assert_eq!(outward_det(&m, &p).signum(), m.orientation(), "{}", m.name);
        }
    }

    #[test]
    fn canonical_points_embed_identically() {
        let m = ParamManifold::product(vec![Factor::Circle, Factor::Sphere2, Factor::Sphere3]);
        for p in [
            vec![-1.0, -0.3, 7.0, -0.2, 9.0, -3.0],
            vec![13.0, 4.0, 1.0, 2.0, 0.1, 0.2],
            vec![0.5, 3.5, -1.0, 5.0, 2.0, 3.0],
        ] {
            let mut q = p.clone();
            m.canonicalize(&mut q);
            let (lo, hi) = (m.lower(), m.upper());
            assert!(q.iter().zip(lo.iter().zip(&hi)).all(|(x, (a, b))| *x >= *a && *x <= *b), "{q:?}");
            assert!(m.embedded_distance(&p, &q) < 1e-12);
        }
    }

    #[test]
    fn shape_bookkeeping() {
        let m = ParamManifold::product(vec![Factor::Circle, Factor::Sphere2]);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.name, "S1xS2");
        assert_eq!(m.upper(), vec![TAU, PI, TAU]);
        assert!((m.volume() - 8.0 * PI * PI).abs() < 1e-12);
        assert_eq!(ParamManifold::sphere3().orientation(), -1.0);
    }
}
