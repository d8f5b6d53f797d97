//! Flags, critical points of `Re Tr(AU)`, incidence-relation classification,
//! Morse indices and finite-dimensional symplectic reduction on `U(n)`.
//!
//! A complete flag `W_0 ⊃ W_1 ⊃ … ⊃ W_n = 0` is stored as an orthonormal basis
//! `e_1, …, e_n` with `W_m = span{e_{m+1}, …, e_n}`. The critical points of the
//! gradient flow are the reflections `U_I = -1` on `span{e_i : i ∈ I}` and `+1`
//! on the complement, and the stable stratum of `U_I` is cut out by the
//! dimensions of `ker(1+U) ∩ W_m`.

use std::fmt;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, CMat, RMat};

/// Relative rank threshold used for kernel dimensions unless a caller overrides it.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-7;
const UNITARY_TOL: f64 = 1e-9;
const FLAG_TOL: f64 = 1e-12;
const HESSIAN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("index set {entries:?} is invalid for rank {n}")]
    InvalidIndexSet { entries: Vec<usize>, n: usize },
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("flag basis is not orthonormal (residual {0:.3e})")]
    InvalidFlag(f64),
    #[error("eigenvector frame is not orthonormal (residual {0:.3e})")]
    InvalidFrame(f64),
    #[error("eigenvalue {0} does not lie on the unit circle")]
    NotUnitModulus(Complex64),
    #[error("Hessian has a near-zero eigenvalue {0:.3e}; diagonal weights must be distinct")]
    DegenerateHessian(f64),
    #[error("diagonal weights must be positive and strictly increasing")]
    InvalidWeights,
    #[error("1+X is singular (smallest singular value {0:.3e}); point lies outside the reduction domain")]
    NotInDomain(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// A complete flag in `C^n`, represented by an orthonormal basis stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    basis: CMat,
}

impl Flag {
    pub fn standard(n: usize) -> Self {
        Self { basis: linalg::identity(n) }
    }

    pub fn new(basis: CMat) -> Result<Self> {
        if basis.nrows() != basis.ncols() {
            return Err(SpectralError::DimensionMismatch(format!(
                "flag basis must be square, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let r = linalg::frame_residual(&basis);
        if r >= FLAG_TOL {
            return Err(SpectralError::InvalidFlag(r));
        }
        Ok(Self { basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// `e_i`, 1-based.
    pub fn vector(&self, i: usize) -> linalg::CVec {
        self.basis.column(i - 1).into_owned()
    }

    /// Orthonormal basis of `W_m = span{e_{m+1}, …, e_n}` (an `n × (n-m)` matrix).
    pub fn subspace(&self, m: usize) -> CMat {
        let n = self.rank();
        self.basis.columns(m, n - m).into_owned()
    }

    /// Orthonormal basis of `W_m^⊥ = span{e_1, …, e_m}`.
    pub fn complement(&self, m: usize) -> CMat {
        self.basis.columns(0, m).into_owned()
    }

    /// Express an operator in flag coordinates: `B* M B`.
    pub fn to_flag_coords(&self, m: &CMat) -> CMat {
        self.basis.adjoint() * m * &self.basis
    }

    pub fn from_flag_coords(&self, m: &CMat) -> CMat {
        &self.basis * m * self.basis.adjoint()
    }
}

/// A strictly increasing set of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    entries: Vec<usize>,
}

impl IndexSet {
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        let ok = entries.iter().all(|&i| (1..=n).contains(&i)) && entries.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { entries })
        } else {
            Err(SpectralError::InvalidIndexSet { entries, n })
        }
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn singleton(k: usize) -> Self {
        Self { entries: vec![k] }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.entries.binary_search(&i).is_ok()
    }

    pub fn max_entry(&self) -> Option<usize> {
        self.entries.last().copied()
    }

    /// All `2^n` subsets of `{1, …, n}`, ordered by bitmask.
    pub fn all(n: usize) -> Vec<IndexSet> {
        (0u32..(1 << n))
            .map(|mask| IndexSet { entries: (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect() })
            .collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSign {
    /// profiles `ker(1 + U)`
    Plus,
    /// profiles `ker(1 - U)`
    Minus,
}

impl KernelSign {
    fn factor(self) -> f64 {
        match self {
            KernelSign::Plus => 1.0,
            KernelSign::Minus => -1.0,
        }
    }
}

/// Dimensions `d_m = dim ker(1 ± U) ∩ W_m` for `m = 0..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub dims: Vec<usize>,
    pub sign: KernelSign,
}

impl KernelProfile {
    /// Steps `m` (1-based) at which the profile drops, with the drop size.
    pub fn drops(&self) -> Vec<(usize, usize)> {
        self.dims
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(m, w)| (m + 1, w[0].saturating_sub(w[1])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Stratum(IndexSet),
    /// The profile drops by two or more at a single step.
    Unclassifiable(KernelProfile),
}

impl Classification {
    pub fn index_set(&self) -> Option<&IndexSet> {
        match self {
            Classification::Stratum(i) => Some(i),
            Classification::Unclassifiable(_) => None,
        }
    }
}

pub fn ensure_unitary(u: &CMat) -> Result<()> {
    ensure_unitary_within(u, UNITARY_TOL)
}

pub fn ensure_unitary_within(u: &CMat, tol: f64) -> Result<()> {
    let r = linalg::unitarity_residual(u);
    if r < tol {
        Ok(())
    } else {
        Err(SpectralError::NotUnitary(r))
    }
}

fn check_index_set(set: &IndexSet, n: usize) -> Result<()> {
    IndexSet::new(set.entries.clone(), n).map(|_| ())
}

/// The reflection `U_I`.
pub fn critical_point(set: &IndexSet, flag: &Flag) -> Result<CMat> {
    let n = flag.rank();
    check_index_set(set, n)?;
    let mut u = linalg::identity(n);
    for &i in set.entries() {
        let e = flag.vector(i);
        u -= (&e * e.adjoint()) * c(2.0, 0.0);
    }
    Ok(u)
}

pub fn kernel_profile(u: &CMat, flag: &Flag, sign: KernelSign, tol: f64) -> Result<KernelProfile> {
    ensure_unitary(u)?;
    let n = flag.rank();
    if u.nrows() != n {
        return Err(SpectralError::DimensionMismatch(format!("operator is {}x{}, flag rank {n}", u.nrows(), u.ncols())));
    }
    let m_op = linalg::identity(n) + u * c(sign.factor(), 0.0);
    let scale = linalg::singular_values_asc(&m_op).last().copied().unwrap_or(0.0).max(1.0);
    let threshold = tol * scale;
    let dims = (0..=n)
        .map(|m| {
            let restricted = &m_op * flag.subspace(m);
            linalg::singular_values_asc(&restricted).iter().filter(|s| **s < threshold).count()
        })
        .collect();
    Ok(KernelProfile { dims, sign })
}

/// Read the index set off a `ker(1+U)` profile: `d_0 = |I|` and the profile drops
/// by one exactly at the steps `m ∈ I`.
pub fn classify_profile(profile: &KernelProfile) -> Classification {
    let mut entries = Vec::new();
    for (m, drop) in profile.drops() {
        if drop != 1 {
            return Classification::Unclassifiable(profile.clone());
        }
        entries.push(m);
    }
    // a rising profile cannot come from nested subspaces; treat it as noise
    if profile.dims.windows(2).any(|w| w[1] > w[0]) {
        return Classification::Unclassifiable(profile.clone());
    }
    Classification::Stratum(IndexSet { entries })
}

pub fn incidence_classify(u: &CMat, flag: &Flag, tol: f64) -> Result<Classification> {
    let profile = kernel_profile(u, flag, KernelSign::Plus, tol)?;
    Ok(classify_profile(&profile))
}

/// `dim U(U_I) = codim S(U_I) = Σ_{i∈I} (2i - 1)`.
pub fn unstable_dim(set: &IndexSet) -> usize {
    set.entries().iter().map(|i| 2 * i - 1).sum()
}

/// Diagonal weights `a_1 < … < a_n`, all positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        let ok = !a.is_empty() && a[0] > 0.0 && a.windows(2).all(|w| w[0] < w[1]) && a.iter().all(|x| x.is_finite());
        if ok {
            Ok(Self(a))
        } else {
            Err(SpectralError::InvalidWeights)
        }
    }

    /// `diag(1, …, n)`
    pub fn standard(n: usize) -> Self {
        Self((1..=n).map(|k| k as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The operator `A = Σ a_i e_i e_i*`.
    pub fn operator(&self, flag: &Flag) -> CMat {
        flag.from_flag_coords(&linalg::real_diag(&self.0))
    }
}

/// Real basis of the anti-hermitian `n × n` matrices: `i E_jj`, `E_jk - E_kj`,
/// `i (E_jk + E_kj)` for `j < k`.
pub fn anti_hermitian_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut m = CMat::zeros(n, n);
        m[(j, j)] = linalg::I;
        out.push(m);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut re = CMat::zeros(n, n);
            re[(j, k)] = c(1.0, 0.0);
            re[(k, j)] = c(-1.0, 0.0);
            out.push(re);
            let mut im = CMat::zeros(n, n);
            im[(j, k)] = linalg::I;
            im[(k, j)] = linalg::I;
            out.push(im);
        }
    }
    out
}

/// Number of ascending directions of `f(U) = Re Tr(AU)` at `U_I`, from the
/// Hessian form `Q(H) = Re Tr(A U_I H²)` on the anti-hermitian matrices.
pub fn morse_index(set: &IndexSet, flag: &Flag, weights: &Weights) -> Result<usize> {
    let n = flag.rank();
    if weights.len() != n {
        return Err(SpectralError::DimensionMismatch(format!("{} weights for rank {n}", weights.len())));
    }
    let u = critical_point(set, flag)?;
    let au = weights.operator(flag) * u;
    // H's are expressed in flag coordinates and moved back, so the form is basis-independent
    let basis: Vec<CMat> = anti_hermitian_basis(n).iter().map(|h| flag.from_flag_coords(h)).collect();
    let dim = basis.len();
    let mut q = RMat::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let sym = &basis[a] * &basis[b] + &basis[b] * &basis[a];
            let v = 0.5 * (&au * sym).trace().re;
            q[(a, b)] = v;
            q[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(q);
    if let Some(min_abs) = eig.eigenvalues.iter().map(|x| x.abs()).reduce(f64::min) {
        if min_abs < HESSIAN_TOL {
            return Err(SpectralError::DegenerateHessian(min_abs));
        }
    }
    Ok(eig.eigenvalues.iter().filter(|&&x| x > HESSIAN_TOL).count())
}

/// Orthogonal splitting `H = W ⊕ W^⊥` given by two orthonormal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSplit {
    w: CMat,
    complement: CMat,
}

impl ReductionSplit {
    pub fn new(w: CMat, complement: CMat) -> Result<Self> {
        if w.nrows() != complement.nrows() || w.ncols() + complement.ncols() != w.nrows() {
            return Err(SpectralError::DimensionMismatch(format!(
                "frames {}x{} and {}x{} do not split C^{}",
                w.nrows(),
                w.ncols(),
                complement.nrows(),
                complement.ncols(),
                w.nrows()
            )));
        }
        let all = CMat::from_columns(&w.column_iter().chain(complement.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
        let r = linalg::frame_residual(&all);
        if r >= FLAG_TOL.max(1e-10) {
            return Err(SpectralError::InvalidFrame(r));
        }
        Ok(Self { w, complement })
    }

    /// `W = W_m` of the flag, `W^⊥ = span{e_1, …, e_m}`.
    pub fn from_flag(flag: &Flag, m: usize) -> Self {
        Self { w: flag.subspace(m), complement: flag.complement(m) }
    }

    /// Split with a given `W` frame; the complement is computed.
    pub fn from_w(w: CMat) -> Result<Self> {
        let complement = linalg::complement_basis(&w);
        Self::new(w, complement)
    }

    pub fn w(&self) -> &CMat {
        &self.w
    }

    pub fn complement(&self) -> &CMat {
        &self.complement
    }

    /// The flag of `W_m^⊥` induced from `flag` when `W = W_m`: in complement
    /// coordinates it is the standard flag.
    pub fn induced_flag(&self) -> Flag {
        Flag::standard(self.complement.ncols())
    }
}

/// Blocks `(X, Y, Z, T)` of `U` relative to `W ⊕ W^⊥`.
pub fn reduction_blocks(u: &CMat, split: &ReductionSplit) -> (CMat, CMat, CMat, CMat) {
    let (w, wc) = (&split.w, &split.complement);
    let x = w.adjoint() * u * w;
    let y = w.adjoint() * u * wc;
    let z = wc.adjoint() * u * w;
    let t = wc.adjoint() * u * wc;
    (x, y, z, t)
}

/// `R^W(U) = T - Z (1+X)^{-1} Y`, a unitary on `W^⊥` written in the complement frame.
pub fn symplectic_reduce(u: &CMat, split: &ReductionSplit) -> Result<CMat> {
    ensure_unitary(u)?;
    let (x, y, z, t) = reduction_blocks(u, split);
    if x.nrows() == 0 {
        return Ok(t);
    }
    let one_plus_x = linalg::identity(x.nrows()) + &x;
    let smin = linalg::smallest_singular_value(&one_plus_x);
    if smin <= 1e-9 {
        return Err(SpectralError::NotInDomain(smin));
    }
    let solved = one_plus_x.lu().solve(&y).ok_or(SpectralError::NotInDomain(smin))?;
    Ok(t - z * solved)
}

/// `V diag(λ) V*` for unit-modulus `λ` and an orthonormal eigenvector frame (columns).
pub fn unitary_with_spectrum(eigenvalues: &[Complex64], eigenvectors: &CMat) -> Result<CMat> {
    if eigenvectors.ncols() != eigenvalues.len() || eigenvectors.nrows() != eigenvalues.len() {
        return Err(SpectralError::DimensionMismatch(format!(
            "{} eigenvalues for a {}x{} frame",
            eigenvalues.len(),
            eigenvectors.nrows(),
            eigenvectors.ncols()
        )));
    }
    if let Some(bad) = eigenvalues.iter().find(|z| (z.norm() - 1.0).abs() > 1e-12) {
        return Err(SpectralError::NotUnitModulus(*bad));
    }
    let r = linalg::frame_residual(eigenvectors);
    if r > 1e-12 {
        return Err(SpectralError::InvalidFrame(r));
    }
    Ok(linalg::from_spectrum(eigenvalues, eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unitary, real_diag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(e: &[usize], n: usize) -> IndexSet {
        IndexSet::new(e.to_vec(), n).unwrap()
    }

    #[test]
    fn critical_point_examples() {
        let f2 = Flag::standard(2);
        assert_eq!(critical_point(&IndexSet::empty(), &f2).unwrap(), linalg::identity(2));
        assert_eq!(critical_point(&set(&[1, 2], 2), &f2).unwrap(), -linalg::identity(2));
        let f3 = Flag::standard(3);
        assert_eq!(critical_point(&set(&[2], 3), &f3).unwrap(), real_diag(&[1.0, -1.0, 1.0]));
    }

    #[test]
    fn index_set_validation() {
        assert!(IndexSet::new(vec![0], 3).is_err());
        assert!(IndexSet::new(vec![4], 3).is_err());
        assert!(IndexSet::new(vec![2, 1], 3).is_err());
        assert!(IndexSet::new(vec![2, 2], 3).is_err());
        let bogus = IndexSet { entries: vec![5] };
        assert!(matches!(critical_point(&bogus, &Flag::standard(3)), Err(SpectralError::InvalidIndexSet { .. })));
    }

    #[test]
    fn flag_rejects_non_orthonormal_basis() {
        let b = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(Flag::new(b), Err(SpectralError::InvalidFlag(_))));
    }

    #[test]
    fn kernel_profile_examples() {
        let f = Flag::standard(2);
        let p = |u: CMat| kernel_profile(&u, &f, KernelSign::Plus, DEFAULT_KERNEL_TOL).unwrap().dims;
        assert_eq!(p(-linalg::identity(2)), vec![2, 1, 0]);
        assert_eq!(p(linalg::identity(2)), vec![0, 0, 0]);
        assert_eq!(p(real_diag(&[-1.0, 1.0])), vec![1, 0, 0]);
        let bad = real_diag(&[2.0, 1.0]);
        assert!(matches!(kernel_profile(&bad, &f, KernelSign::Plus, 1e-7), Err(SpectralError::NotUnitary(_))));
    }

    #[test]
    fn classify_examples() {
        let f = Flag::standard(2);
        let cl = |u: CMat| incidence_classify(&u, &f, DEFAULT_KERNEL_TOL).unwrap();
        // profile (1,0,0) drops at m=1; profile (1,1,0) drops at m=2
        assert_eq!(cl(real_diag(&[-1.0, 1.0])), Classification::Stratum(set(&[1], 2)));
        assert_eq!(cl(real_diag(&[1.0, -1.0])), Classification::Stratum(set(&[2], 2)));
    }

    #[test]
    fn generic_unitary_is_in_open_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Flag::standard(4);
        let mut checked = 0;
        while checked < 20 {
            let u = random_unitary(4, &mut rng);
            let eig_min = (linalg::identity(4) + &u).svd(false, false).singular_values.min();
            if eig_min < 1e-3 {
                continue;
            }
            assert_eq!(incidence_classify(&u, &f, DEFAULT_KERNEL_TOL).unwrap(), Classification::Stratum(IndexSet::empty()));
            checked += 1;
        }
    }

    #[test]
    fn double_drop_is_unclassifiable() {
        let profile = KernelProfile { dims: vec![2, 0, 0], sign: KernelSign::Plus };
        assert!(matches!(classify_profile(&profile), Classification::Unclassifiable(_)));
    }

    #[test]
    fn unstable_dim_examples() {
        assert_eq!(unstable_dim(&IndexSet::singleton(4)), 7);
        assert_eq!(unstable_dim(&IndexSet::empty()), 0);
        assert_eq!(unstable_dim(&set(&[1, 2, 3], 3)), 9);
    }

    #[test]
    fn morse_index_examples() {
        let f2 = Flag::standard(2);
        let w2 = Weights::standard(2);
        assert_eq!(morse_index(&IndexSet::empty(), &f2, &w2).unwrap(), 0);
        assert_eq!(morse_index(&set(&[1, 2], 2), &f2, &w2).unwrap(), 4);
        assert_eq!(morse_index(&set(&[2], 2), &f2, &w2).unwrap(), 3);
    }

    #[test]
    fn morse_index_rejects_repeated_weights() {
        let f = Flag::standard(2);
        assert!(Weights::new(vec![1.0, 1.0]).is_err());
        let flat = Weights(vec![1.0, 1.0]);
        assert!(matches!(morse_index(&IndexSet::singleton(1), &f, &flat), Err(SpectralError::DegenerateHessian(_))));
    }

    #[test]
    fn reduction_examples() {
        let f = Flag::standard(2);
        let split = ReductionSplit::from_flag(&f, 1);
        let r = symplectic_reduce(&linalg::identity(2), &split).unwrap();
        assert!(linalg::max_abs(&(r - linalg::identity(1))) < 1e-15);
        let swap = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let r = symplectic_reduce(&swap, &split).unwrap();
        assert!((r[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
        // 1+X singular
        let minus = -linalg::identity(2);
        assert!(matches!(symplectic_reduce(&minus, &split), Err(SpectralError::NotInDomain(_))));
    }

    #[test]
    fn unitary_with_spectrum_examples() {
        let s = 1.0 / 2f64.sqrt();
        let v = CMat::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        let u = unitary_with_spectrum(&[c(-1.0, 0.0), c(1.0, 0.0)], &v).unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(linalg::max_abs(&(u - expected)) < 1e-15);
        let one = unitary_with_spectrum(&[linalg::I], &linalg::identity(1)).unwrap();
        assert_eq!(one[(0, 0)], linalg::I);
        let skew = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(unitary_with_spectrum(&[c(1.0, 0.0), c(1.0, 0.0)], &skew), Err(SpectralError::InvalidFrame(_))));
    }
}
