use nalgebra::linalg::Schur;
use std::cmp::Ordering;

use super::{c, CMatrix, CVector, C64};
use crate::error::{Error, Result};

/// Two eigenvalues closer than this (relative to the spectral radius, floored at 1) make a
/// spectrum count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// Eigendecomposition `M = R diag(λ) R⁻¹` of a diagonalizable matrix with distinct
/// eigenvalues. Columns of `right` have unit norm; rows of `left` are the dual basis.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub values: Vec<C64>,
    pub right: CMatrix,
    pub left: CMatrix,
}

impl SpectralData {
    /// Builds the decomposition from eigenvalues and a full-rank right eigenbasis.
    pub fn from_basis(values: Vec<C64>, right: CMatrix) -> Result<Self> {
        if right.ncols() != values.len() || right.nrows() != values.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: right.ncols() });
        }
        let left = right.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(SpectralData { values, right, left })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Spectral projector `|r_j⟩⟨ℓ_j|`.
    pub fn projector(&self, j: usize) -> CMatrix {
        self.right.column(j) * self.left.row(j)
    }

    /// `Σ_j f(λ_j) P_j`.
    pub fn apply(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let diag = CVector::from_iterator(self.dim(), self.values.iter().map(|&z| f(z)));
        let mut scaled = self.right.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= diag[j];
        }
        scaled * &self.left
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|z| z)
    }
}

fn scale_of(values: &[C64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// Canonical eigenvalue order: real part descending, then imaginary part descending.
pub(crate) fn canonical_cmp(a: &C64, b: &C64, scale: f64) -> Ordering {
    let tol = 1e-12 * scale;
    if (a.re - b.re).abs() > tol {
        b.re.total_cmp(&a.re)
    } else {
        b.im.total_cmp(&a.im)
    }
}

fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(s.unpack())
}

/// Eigenvalues in canonical order, without any degeneracy check.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    let mut v: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    let scale = scale_of(&v);
    v.sort_by(|a, b| canonical_cmp(a, b, scale));
    Ok(v)
}

/// Full eigendecomposition of a matrix with pairwise distinct eigenvalues.
pub fn eig_full(m: &CMatrix) -> Result<SpectralData> {
    let (q, t) = schur(m)?;
    let n = t.nrows();
    let diag: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = scale_of(&diag);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (diag[i] - diag[j]).norm() / scale;
            if gap <= DEGENERACY_GAP {
                return Err(Error::DegenerateSpectrum { i, j, gap });
            }
        }
    }
    // Eigenvectors of the triangular factor by back substitution.
    let mut x = CMatrix::zeros(n, n);
    let tiny = f64::EPSILON * t.norm().max(1.0);
    for k in 0..n {
        x[(k, k)] = c(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = c(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut den = t[(i, i)] - t[(k, k)];
            if den.norm() < tiny {
                den = c(tiny, 0.0);
            }
            x[(i, k)] = -s / den;
        }
    }
    let vecs = q * x;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| canonical_cmp(&diag[a], &diag[b], scale));
    let values: Vec<C64> = order.iter().map(|&i| diag[i]).collect();
    let cols: Vec<CVector> = order.iter().map(|&i| normalize_phase(vecs.column(i).into_owned())).collect();
    SpectralData::from_basis(values, CMatrix::from_columns(&cols))
}

/// Unit norm, with the largest-magnitude entry real and positive.
pub(crate) fn normalize_phase(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].norm() > v[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let phase = v[best].conj() / v[best].norm();
    v *= phase / c(norm, 0.0);
    v
}

fn principal_ln(z: C64) -> Result<C64> {
    if z.norm() == 0.0 {
        return Err(Error::Singular);
    }
    if z.im == 0.0 && z.re < 0.0 {
        return Ok(c((-z.re).ln(), std::f64::consts::PI));
    }
    Ok(z.ln())
}

/// Principal logarithm `Σ_j log λ_j P_j` with arguments in `(-π, π]`.
pub fn matrix_log_principal(s: &SpectralData) -> Result<CMatrix> {
    let logs: Vec<C64> = s.values.iter().map(|&z| principal_ln(z)).collect::<Result<_>>()?;
    let sd = SpectralData { values: logs, right: s.right.clone(), left: s.left.clone() };
    Ok(sd.reconstruct())
}

/// Logarithm branch `L₀ + 2πi Σ_j m_j P_j`.
pub fn branch(l0: &CMatrix, s: &SpectralData, m: &[i64]) -> Result<CMatrix> {
    if m.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: m.len() });
    }
    let mut out = l0.clone();
    if m.iter().all(|&k| k == 0) {
        return Ok(out);
    }
    let shift = SpectralData {
        values: m.iter().map(|&k| c(0.0, 2.0 * std::f64::consts::PI * k as f64)).collect(),
        right: s.right.clone(),
        left: s.left.clone(),
    };
    out += shift.reconstruct();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{expm, unitary_transfer_matrix};
    use super::*;

    fn rand_matrix(n: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn reconstructs_random_matrices() {
        for seed in 0..20 {
            let m = rand_matrix(4, seed);
            let s = eig_full(&m).unwrap();
            assert!((s.reconstruct() - &m).norm() < 1e-12);
            let id = &s.left * &s.right;
            assert!((id - CMatrix::identity(4, 4)).norm() < 1e-12);
            let sum: CMatrix = (0..4).map(|j| s.projector(j)).fold(CMatrix::zeros(4, 4), |a, b| a + b);
            assert!((sum - CMatrix::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn canonical_order_is_real_then_imag_descending() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(-2.0, 0.0)]));
        let s = eig_full(&m).unwrap();
        assert_eq!(s.values, vec![c(1.0, 1.0), c(1.0, -1.0), c(0.5, 0.0), c(-2.0, 0.0)]);
    }

    #[test]
    fn identity_is_degenerate() {
        assert!(matches!(eig_full(&CMatrix::identity(4, 4)), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn principal_log_of_exponential_round_trips() {
        for seed in 0..10 {
            let a = rand_matrix(4, 100 + seed);
            let m = expm(&a);
            let s = eig_full(&m).unwrap();
            let l = matrix_log_principal(&s).unwrap();
            assert!((expm(&l) - &m).norm() < 1e-10);
            // Eigenvalues of a are small enough to lie in the principal strip.
            assert!((l - a).norm() < 1e-9);
        }
    }

    #[test]
    fn branches_exponentiate_to_the_same_matrix() {
        let m = expm(&rand_matrix(4, 7));
        let s = eig_full(&m).unwrap();
        let l0 = matrix_log_principal(&s).unwrap();
        let lm = branch(&l0, &s, &[1, -1, 0, 2]).unwrap();
        assert!((expm(&lm) - &m).norm() < 1e-9);
        assert!((lm - &l0).norm() > 1.0);
    }

    #[test]
    fn negative_real_eigenvalue_gets_plus_i_pi() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.0)]));
        let s = eig_full(&m).unwrap();
        let l = matrix_log_principal(&s).unwrap();
        assert!((l[(1, 1)] - c(0.5f64.ln(), std::f64::consts::PI)).norm() < 1e-15);
    }

    #[test]
    fn x_gate_spectrum_is_degenerate_but_eigenvalues_are_available() {
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let t = unitary_transfer_matrix(&x);
        assert!(eig_full(&t).is_err());
        let v = eigenvalues(&t).unwrap();
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (z, e) in v.iter().zip(expected) {
            assert!((z - c(e, 0.0)).norm() < 1e-14);
        }
    }
}
