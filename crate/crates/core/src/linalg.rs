//! Small complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max-entry norm of `U U* - 1`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    let prod = u * u.adjoint() - identity(n);
    prod.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-entry norm of `M* M - 1` for a frame with orthonormal columns.
pub fn frame_residual(m: &CMat) -> f64 {
    let g = m.adjoint() * m - identity(m.ncols());
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values sorted ascending. Empty matrices have none; a matrix with a
/// non-finite entry gets all-NaN values (the SVD iteration never terminates on it).
pub fn singular_values_asc(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    if !is_finite(m) {
        return vec![f64::NAN; m.nrows().min(m.ncols())];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    singular_values_asc(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Orthonormal basis of the numerical null space: right singular vectors whose
/// singular value falls below `threshold`. Empty for a matrix with non-finite entries.
pub fn null_space(m: &CMat, threshold: f64) -> CMat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return identity(n);
    }
    if !is_finite(m) {
        return CMat::zeros(n, 0);
    }
    // pad to square so the SVD returns a full right basis
    let rows = m.nrows().max(n);
    let mut padded = CMat::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < threshold)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Orthonormal basis for the orthogonal complement of the column span of an
/// orthonormal frame. Greedy: at each step the standard basis vector with the largest
/// component outside the current span is projected (twice) and appended.
pub fn complement_basis(frame: &CMat) -> CMat {
    let n = frame.nrows();
    let mut basis: Vec<CVec> = frame.column_iter().map(|c| c.into_owned()).collect();
    let mut cols = Vec::new();
    while basis.len() < n {
        let best = (0..n)
            .map(|j| {
                let mut v = CVec::zeros(n);
                v[j] = Complex64::new(1.0, 0.0);
                for _ in 0..2 {
                    for q in &basis {
                        let proj = q.dotc(&v);
                        v.axpy(-proj, q, Complex64::new(1.0, 0.0));
                    }
                }
                v
            })
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("n > 0");
        let unit = best.unscale(best.norm());
        basis.push(unit.clone());
        cols.push(unit);
    }
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Modified Gram-Schmidt, in place, column by column. Column `j` of the result
/// only depends on input columns `0..=j`.
pub fn gram_schmidt(m: &mut CMat) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let qi = m.column(i).into_owned();
            let proj = qi.dotc(&m.column(j));
            let mut cj = m.column_mut(j);
            cj.axpy(-proj, &qi, Complex64::new(1.0, 0.0));
        }
        let norm = m.column(j).norm();
        m.column_mut(j).unscale_mut(norm);
    }
}

pub fn diag(entries: &[Complex64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(entries))
}

pub fn real_diag(entries: &[f64]) -> CMat {
    CMat::from_fn(entries.len(), entries.len(), |i, j| {
        if i == j {
            c(entries[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Haar-distributed random unitary (QR of a complex Ginibre matrix with the
/// phase correction on R's diagonal).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        let mut col = out.column_mut(j);
        col *= phase;
    }
    out
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let norm = v.norm();
    v.unscale(norm)
}

/// Real matrix exponential (Padé 13 with scaling and squaring, via nalgebra).
pub fn expm(m: &RMat) -> RMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

/// Complex matrix exponential.
pub fn expm_c(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

/// Unitary matrix `V diag(λ) V*`; caller guarantees the inputs.
pub fn from_spectrum(eigenvalues: &[Complex64], frame: &CMat) -> CMat {
    frame * diag(eigenvalues) * frame.adjoint()
}
