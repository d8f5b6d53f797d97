use std::sync::Arc;

use num_complex::Complex64;

use super::manifold::{Factor, ParamManifold};
use super::{GeometryError, Result};
use crate::chern_weil::{wedge_trace_form, FormField, GaugeMap};
use crate::linalg::{c, CMat, CVec, I};
use crate::quadrature::{integrate_box, QuadratureSpec};
use crate::spectral::Flag;

/// `∫_M α` for a top-degree chart field, with the chart orientation applied.
pub fn integrate_form(manifold: &ParamManifold, field: &FormField, quad: &QuadratureSpec) -> Result<Complex64> {
    if field.degree() != manifold.dim() || field.dim() != manifold.dim() {
        return Err(GeometryError::DegreeMismatch { degree: field.degree(), dim: manifold.dim() });
    }
    quad.validate().map_err(GeometryError::InvalidQuadrature)?;
    let value = integrate_box(&manifold.lower(), &manifold.upper(), quad, |b| {
        field.top_coefficient(b).map_err(GeometryError::from)
    })?;
    Ok(value * manifold.orientation())
}

/// `(λ, L) ↦ λ id_L ⊕ id_{L⊥}` on `S¹ × P(W_k^⊥)` for `k ∈ {1, 2}`, embedded in `U(n)` through the
/// flag. `CP¹` is the polar chart of `S²` with `L = [cos(ϑ/2) e_1 + e^{iφ} sin(ϑ/2) e_2]`.
pub fn unstable_parametrization(k: usize, flag: &Flag) -> Result<(ParamManifold, GaugeMap)> {
    let n = flag.rank();
    if k > n {
        return Err(GeometryError::DimensionMismatch(format!("k = {k} exceeds rank {n}")));
    }
    let frame = flag.complement(k);
    match k {
        1 => {
            let e = frame.column(0).into_owned();
            let (e1, e2) = (e.clone(), e);
            let eval = move |b: &[f64]| rank_one_update(n, (I * b[0]).exp() - 1.0, &e1);
            let deriv = move |b: &[f64]| vec![&e2 * e2.adjoint() * (I * (I * b[0]).exp())];
            let g = GaugeMap::new("unstable(1)", 1, n, Arc::new(eval)).with_derivative(Arc::new(deriv));
            Ok((ParamManifold::circle(), g))
        }
        2 => {
            let (f1, f2) = (frame.clone(), frame);
            let line = move |f: &CMat, b: &[f64]| -> (CVec, CVec, CVec) {
                let (h, phi) = (0.5 * b[1], b[2]);
                let e = (I * phi).exp();
                let (u1, u2) = (c(h.cos(), 0.0), e * h.sin());
                let (a1, a2) = (c(-0.5 * h.sin(), 0.0), e * (0.5 * h.cos()));
                let (p1, p2) = (c(0.0, 0.0), I * e * h.sin());
                let col = |x: Complex64, y: Complex64| f.column(0) * x + f.column(1) * y;
                (col(u1, u2), col(a1, a2), col(p1, p2))
            };
            let eval = move |b: &[f64]| rank_one_update(n, (I * b[0]).exp() - 1.0, &line(&f1, b).0);
            let deriv = move |b: &[f64]| {
                let lam = (I * b[0]).exp();
                let (v, dv_t, dv_p) = line(&f2, b);
                let vv = &v * v.adjoint();
                let sym = |d: &CVec| (d * v.adjoint() + &v * d.adjoint()) * (lam - 1.0);
                vec![vv * (I * lam), sym(&dv_t), sym(&dv_p)]
            };
            let g = GaugeMap::new("unstable(2)", 3, n, Arc::new(eval)).with_derivative(Arc::new(deriv));
            Ok((ParamManifold::product(vec![Factor::Circle, Factor::Sphere2]), g))
        }
        _ => Err(GeometryError::UnsupportedDimension(format!(
            "unstable-manifold integral for k = {k} needs a chart atlas of CP^{}",
            k - 1
        ))),
    }
}

fn rank_one_update(n: usize, s: Complex64, v: &CVec) -> CMat {
    crate::linalg::identity(n) + v * v.adjoint() * s
}

/// `∫_{U(U_{k})} tr(∧^{2k−1} g⁻¹dg)`, pulled back along [`unstable_parametrization`], whose
/// orientation is reversed relative to the product orientation of `S¹ × CP^{k−1}`.
pub fn integrate_unstable(k: usize, quad: &QuadratureSpec, flag: &Flag) -> Result<Complex64> {
    let (manifold, g) = unstable_parametrization(k, flag)?;
    let field = wedge_trace_form(&g, k as u32);
    Ok(-integrate_form(&manifold, &field, quad)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chern_weil::{tc_constant, tc_form};
    use crate::maps;
    use std::f64::consts::PI;

    const GL16: QuadratureSpec = QuadratureSpec::GaussLegendre { order: 16 };

    #[test]
    fn volumes() {
        for m in [ParamManifold::circle(), ParamManifold::sphere2(), ParamManifold::sphere3()] {
            let v = integrate_form(&m, &m.volume_form(), &QuadratureSpec::GaussLegendre { order: 24 }).unwrap();
            assert!((v.re - m.volume()).abs() < 1e-10 && v.im == 0.0, "{} {v}", m.name);
        }
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let f = FormField::zero(3, 2);
        assert!(matches!(
            integrate_form(&ParamManifold::sphere3(), &f, &GL16),
            Err(GeometryError::DegreeMismatch { degree: 2, dim: 3 })
        ));
    }

    #[test]
    fn winding_integrals() {
        let v = maps::generic_unitary(2, 7);
        for m in -3..=3 {
            let val = integrate_form(&ParamManifold::circle(), &tc_form(&maps::winding(m, &v), 1), &GL16).unwrap();
            assert!((val - c(-m as f64, 0.0)).norm() < 1e-12, "{m}: {val}");
        }
    }

    #[test]
    fn unstable_integrals() {
        let flag = Flag::standard(3);
        let one = integrate_unstable(1, &GL16, &flag).unwrap();
        assert!((one - c(0.0, -2.0 * PI)).norm() < 1e-12);
        assert!((tc_constant(1) * one - 1.0).norm() < 1e-12);
        let two = integrate_unstable(2, &QuadratureSpec::GaussLegendre { order: 24 }, &flag).unwrap();
        assert!((two - c(-24.0 * PI * PI, 0.0)).norm() < 1e-6 * 24.0 * PI * PI, "{two}");
        assert!(matches!(integrate_unstable(3, &GL16, &flag), Err(GeometryError::UnsupportedDimension(_))));
    }

    #[test]
    fn unstable_integral_ignores_the_flag() {
        let flag = Flag::new(maps::generic_unitary(3, 11)).unwrap();
        let two = integrate_unstable(2, &QuadratureSpec::GaussLegendre { order: 24 }, &flag).unwrap();
        assert!((two - c(-24.0 * PI * PI, 0.0)).norm() < 1e-6 * 24.0 * PI * PI, "{two}");
    }

    #[test]
    fn s3_left_translation_has_unit_tc2() {
        let g = maps::s3_left(&maps::generic_unitary(2, 5));
        let val = integrate_form(&ParamManifold::sphere3(), &tc_form(&g, 2), &QuadratureSpec::GaussLegendre { order: 24 }).unwrap();
        assert!((val - 1.0).norm() < 1e-8, "{val}");
    }
}
