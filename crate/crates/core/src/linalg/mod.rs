//! Dense complex linear algebra on transfer matrices.
//!
//! A transfer matrix acts on row-stacked `d × d` operators, so it is `d² × d²` with
//! composite indices `(j, k) ↦ j*d + k`.

mod eig;
mod expm;

pub use eig::{eig_full, eigenvalues, matrix_log_principal, branch, SpectralData, DEGENERACY_GAP};
pub use expm::expm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when a routine insists on hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Returns `d` such that `d * d == n`.
pub fn sqrt_dim(n: usize) -> Result<usize> {
    let d = (n as f64).sqrt().round() as usize;
    if d * d == n && d > 0 {
        Ok(d)
    } else {
        Err(Error::NotPerfectSquare(n))
    }
}

fn require_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    sqrt_dim(a.nrows())
}

/// Applies the Γ-involution `τ[(j,l),(k,m)] = A[(j,k),(l,m)]`, which maps a transfer
/// matrix to its Choi-like representation and back.
pub fn gamma(a: &CMatrix) -> Result<CMatrix> {
    let d = require_square(a)?;
    let n = d * d;
    let mut out = CMatrix::zeros(n, n);
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    out[(j * d + l, k * d + m)] = a[(j * d + k, l * d + m)];
                }
            }
        }
    }
    Ok(out)
}

/// Swap operator `F |e_j, e_k⟩ = |e_k, e_j⟩` on `C^d ⊗ C^d`.
pub fn flip(d: usize) -> CMatrix {
    let n = d * d;
    let mut f = CMatrix::zeros(n, n);
    for j in 0..d {
        for k in 0..d {
            f[(k * d + j, j * d + k)] = C64::new(1.0, 0.0);
        }
    }
    f
}

/// `vec(V) ↦ vec(V†)`, computed as `F conj(v)`.
pub fn vec_adjoint(v: &CVector) -> Result<CVector> {
    let d = sqrt_dim(v.len())?;
    let mut out = CVector::zeros(v.len());
    for j in 0..d {
        for k in 0..d {
            out[j * d + k] = v[k * d + j].conj();
        }
    }
    Ok(out)
}

/// Row-stacks a `d × d` operator.
pub fn vectorize(op: &CMatrix) -> CVector {
    let d = op.nrows();
    CVector::from_fn(d * op.ncols(), |i, _| op[(i / op.ncols(), i % op.ncols())])
}

pub fn unvectorize(v: &CVector) -> Result<CMatrix> {
    let d = sqrt_dim(v.len())?;
    Ok(CMatrix::from_fn(d, d, |j, k| v[j * d + k]))
}

/// `Tr₁[X]_{c,r} = Σ_j X[(j,c),(j,r)]`.
pub fn partial_trace_first(x: &CMatrix) -> Result<CMatrix> {
    let d = require_square(x)?;
    let mut out = CMatrix::zeros(d, d);
    for cc in 0..d {
        for r in 0..d {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..d {
                s += x[(j * d + cc, j * d + r)];
            }
            out[(cc, r)] = s;
        }
    }
    Ok(out)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

/// Sum of absolute values of all entries.
pub fn entrywise_one_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Smallest eigenvalue of a hermitian matrix.
pub fn min_eig_hermitian(a: &CMatrix) -> Result<f64> {
    let defect = hermiticity_defect(a);
    if defect > HERMITIAN_TOL * (1.0 + a.norm()) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(eigh_values(&hermitian_part(a)).iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn eigh_values(a: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub one_norm: f64,
    /// Present only for hermitian input.
    pub min_eig: Option<f64>,
}

pub fn norms(a: &CMatrix) -> Norms {
    Norms {
        frobenius: frobenius(a),
        one_norm: entrywise_one_norm(a),
        min_eig: min_eig_hermitian(a).ok(),
    }
}

/// The normalized maximally entangled vector `ω = Σ_j |jj⟩ / √d`, its orthogonal
/// projector complement and an orthonormal basis of that complement.
#[derive(Debug, Clone)]
pub struct MaxEntangled {
    pub d: usize,
    pub omega: CVector,
    pub omega_perp: CMatrix,
    /// `d² × (d² − 1)` matrix with orthonormal columns spanning `range(ω_⊥)`.
    pub complement: CMatrix,
}

impl MaxEntangled {
    pub fn new(d: usize) -> Self {
        let n = d * d;
        let s = 1.0 / (d as f64).sqrt();
        let omega = CVector::from_fn(n, |i, _| if i / d == i % d { c(s, 0.0) } else { c(0.0, 0.0) });
        let omega_perp = CMatrix::identity(n, n) - &omega * omega.adjoint();
        let complement = traceless_hermitian_basis(d);
        MaxEntangled { d, omega, omega_perp, complement }
    }

    /// `ω_⊥ X ω_⊥`.
    pub fn compress(&self, x: &CMatrix) -> CMatrix {
        &self.omega_perp * x * &self.omega_perp
    }

    /// `V† X V` in the orthonormal complement basis.
    pub fn restrict(&self, x: &CMatrix) -> CMatrix {
        self.complement.adjoint() * x * &self.complement
    }
}

/// Row-stacked generalized Gell-Mann matrices, normalized to unit Frobenius norm.
fn traceless_hermitian_basis(d: usize) -> CMatrix {
    let n = d * d;
    let mut cols: Vec<CVector> = Vec::with_capacity(n - 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut v = CVector::zeros(n);
            v[j * d + k] = c(r, 0.0);
            v[k * d + j] = c(r, 0.0);
            cols.push(v);
            let mut v = CVector::zeros(n);
            v[j * d + k] = c(0.0, -r);
            v[k * d + j] = c(0.0, r);
            cols.push(v);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut v = CVector::zeros(n);
        for j in 0..l {
            v[j * d + j] = c(1.0 / norm, 0.0);
        }
        v[l * d + l] = c(-(l as f64) / norm, 0.0);
        cols.push(v);
    }
    CMatrix::from_columns(&cols)
}

/// Transfer matrix of the unitary conjugation `ρ ↦ U ρ U†`.
pub fn unitary_transfer_matrix(u: &CMatrix) -> CMatrix {
    u.kronecker(&u.conjugate())
}

/// Transfer matrix of `ρ ↦ A ρ B`.
pub fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(&b.transpose())
}

/// Orthogonal projector onto the column span of `cols`, with rank cut at `tol`.
pub fn span_projector(cols: &CMatrix, tol: f64) -> CMatrix {
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("svd u");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut p = CMatrix::zeros(cols.nrows(), cols.nrows());
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > tol * smax.max(1e-300) {
            let col = u.column(i);
            p += &col * col.adjoint();
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_real(rows: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, data.len() / rows, &data.iter().map(|x| c(*x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn gamma_of_identity_is_scaled_omega_projector() {
        for d in 2..=3 {
            let n = d * d;
            let g = gamma(&CMatrix::identity(n, n)).unwrap();
            let w = MaxEntangled::new(d);
            let expected = &w.omega * w.omega.adjoint() * c(d as f64, 0.0);
            assert!((g - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn gamma_rejects_non_square_dimension() {
        assert!(matches!(gamma(&CMatrix::identity(3, 3)), Err(Error::NotPerfectSquare(3))));
    }

    #[test]
    fn vec_adjoint_examples() {
        let v = CVector::from_vec(vec![c(1.0, 0.0); 4]);
        assert_eq!(vec_adjoint(&v).unwrap(), v);
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]);
        let w = CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(vec_adjoint(&v).unwrap(), w);
    }

    #[test]
    fn partial_trace_of_identity_tensor() {
        let y = CMatrix::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let x = CMatrix::identity(2, 2).kronecker(&y);
        assert!((partial_trace_first(&x).unwrap() - y * c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn complement_basis_is_orthonormal_and_orthogonal_to_omega() {
        for d in 2..=4 {
            let w = MaxEntangled::new(d);
            let v = &w.complement;
            let gram = v.adjoint() * v;
            assert!((gram - CMatrix::identity(d * d - 1, d * d - 1)).norm() < 1e-13);
            assert!((v.adjoint() * &w.omega).norm() < 1e-13);
            assert!((v * v.adjoint() - &w.omega_perp).norm() < 1e-13);
        }
    }

    #[test]
    fn x_gate_transfer_matrix() {
        let x = from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let t = unitary_transfer_matrix(&x);
        let expected = from_real(4, &[
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        ]);
        assert_eq!(t, expected);
    }

    #[test]
    fn min_eig_requires_hermitian() {
        let a = from_real(2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(min_eig_hermitian(&a), Err(Error::NotHermitian(_))));
        let b = from_real(2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((min_eig_hermitian(&b).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn norms_of_small_matrix() {
        let a = from_real(2, &[3.0, -4.0, 0.0, 0.0]);
        let n = norms(&a);
        assert_eq!(n.frobenius, 5.0);
        assert_eq!(n.one_norm, 7.0);
        assert!(n.min_eig.is_none());
    }
}
