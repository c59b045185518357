//! Transfer matrices of benchmark channels and Lindblad generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MatrixFile;
use crate::rng::complex_gaussian_matrix;
use crate::linalg::{
    c, eigh_values, entrywise_one_norm, gamma, hermitian_part, hermiticity_defect, partial_trace_first, sandwich,
    sqrt_dim, unitary_transfer_matrix, CMatrix, MaxEntangled,
};

/// Transfer matrix of a (possibly estimated) channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub d: usize,
    pub mat: CMatrix,
    /// Set when the matrix is built exactly from a CPT map rather than estimated.
    pub exact_cpt: bool,
}

impl TransferMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        let d = sqrt_dim(mat.nrows())?;
        Ok(TransferMatrix { d, mat, exact_cpt: false })
    }

    fn exact(mat: CMatrix) -> Self {
        let d = sqrt_dim(mat.nrows()).expect("square transfer matrix");
        TransferMatrix { d, mat, exact_cpt: true }
    }

    pub fn identity(d: usize) -> Self {
        Self::exact(CMatrix::identity(d * d, d * d))
    }

    pub fn choi(&self) -> CMatrix {
        gamma(&self.mat).expect("square transfer matrix")
    }

    pub fn distance(&self, other: &CMatrix) -> f64 {
        (&self.mat - other).norm()
    }

    /// Applies the channel to a `d × d` operator.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = crate::linalg::vectorize(rho);
        crate::linalg::unvectorize(&(&self.mat * v)).expect("square transfer matrix")
    }
}

/// Residuals of the three Lindblad conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladResiduals {
    /// `‖L^Γ − (L^Γ)†‖_F`.
    pub hermiticity: f64,
    /// `max(0, −λ_min(ω_⊥ L^Γ ω_⊥))`.
    pub ccp: f64,
    /// `‖Tr₁ L^Γ‖₁` (entrywise).
    pub trace: f64,
}

impl LindbladResiduals {
    pub fn max(&self) -> f64 {
        self.hermiticity.max(self.ccp).max(self.trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladCheck {
    pub ok: bool,
    pub residuals: LindbladResiduals,
}

/// Checks hermiticity preservation, conditional complete positivity and trace annihilation.
pub fn is_lindbladian(l: &CMatrix, tol: f64) -> Result<LindbladCheck> {
    let lg = gamma(l)?;
    let d = sqrt_dim(l.nrows())?;
    let w = MaxEntangled::new(d);
    let hermiticity = hermiticity_defect(&lg);
    let restricted = w.restrict(&hermitian_part(&lg));
    let lam_min = eigh_values(&restricted).first().cloned().unwrap_or(0.0).min(0.0);
    let ccp = (-lam_min).max(0.0);
    let trace = entrywise_one_norm(&partial_trace_first(&lg)?);
    let residuals = LindbladResiduals { hermiticity, ccp, trace };
    Ok(LindbladCheck { ok: residuals.max() <= tol, residuals })
}

/// A Lindblad generator `L(ρ) = i[ρ, H] + Σ_α J_α ρ J_α† − ½{J_α† J_α, ρ}` in transfer form.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub d: usize,
    pub hamiltonian: CMatrix,
    pub jumps: Vec<CMatrix>,
    pub mat: CMatrix,
}

pub fn lindblad_generator(h: &CMatrix, jumps: &[CMatrix]) -> Result<LindbladGenerator> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: h.ncols() });
    }
    let defect = hermiticity_defect(h);
    if defect > 1e-12 * (1.0 + h.norm()) {
        return Err(Error::NotHermitian(defect));
    }
    let id = CMatrix::identity(d, d);
    let i = c(0.0, 1.0);
    let mut mat = (sandwich(&id, h) - sandwich(h, &id)) * i;
    for j in jumps {
        if j.nrows() != d || j.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: j.nrows() });
        }
        let jdj = j.adjoint() * j;
        mat += sandwich(j, &j.adjoint());
        mat -= (sandwich(&jdj, &id) + sandwich(&id, &jdj)) * c(0.5, 0.0);
    }
    Ok(LindbladGenerator { d, hamiltonian: h.clone(), jumps: jumps.to_vec(), mat })
}

/// Random generator: gaussian hermitian Hamiltonian and gaussian jump operators, scaled so
/// that their entries have standard deviation `h_scale` and `jump_scale`.
pub fn random_lindblad_generator(
    d: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    h_scale: f64,
    jump_scale: f64,
    n_jumps: usize,
) -> LindbladGenerator {
    let g = complex_gaussian_matrix(rng, d, d);
    let h = hermitian_part(&g) * c(h_scale, 0.0);
    let jumps: Vec<CMatrix> = (0..n_jumps).map(|_| complex_gaussian_matrix(rng, d, d) * c(jump_scale, 0.0)).collect();
    lindblad_generator(&h, &jumps).expect("hermitian by construction")
}

pub fn pauli(k: usize) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let data = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("pauli index {k} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &data)
}

pub fn cz_gate() -> CMatrix {
    let mut u = CMatrix::identity(4, 4);
    u[(3, 3)] = c(-1.0, 0.0);
    u
}

pub fn iswap_gate() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = c(1.0, 0.0);
    u[(1, 2)] = c(0.0, 1.0);
    u[(2, 1)] = c(0.0, 1.0);
    u[(3, 3)] = c(1.0, 0.0);
    u
}

pub fn unitary_transfer(u: &CMatrix) -> Result<TransferMatrix> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.ncols() });
    }
    let dev = (u.adjoint() * u - CMatrix::identity(n, n)).norm();
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(TransferMatrix::exact(unitary_transfer_matrix(u)))
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::OutOfRange(format!("{name} = {p} must lie in [0, 1]")));
    }
    Ok(())
}

/// `ρ ↦ (1 − p) ρ + (p/3)(XρX + YρY + ZρZ)`.
pub fn depolarizing_transfer(p: f64) -> Result<TransferMatrix> {
    check_probability("p", p)?;
    let mut mat = CMatrix::identity(4, 4) * c(1.0 - p, 0.0);
    for k in 1..4 {
        mat += unitary_transfer_matrix(&pauli(k)) * c(p / 3.0, 0.0);
    }
    Ok(TransferMatrix::exact(mat))
}

/// Eigenvalues `Γ_i = exp(−t(γ_j + γ_k))` of the Pauli-diagonal unital channel.
pub fn unital_gammas(gamma: [f64; 3], t: f64) -> [f64; 3] {
    [(-t * (gamma[1] + gamma[2])).exp(), (-t * (gamma[0] + gamma[2])).exp(), (-t * (gamma[0] + gamma[1])).exp()]
}

/// Whether the rates describe a Markovian (positive-rate) semigroup.
pub fn unital_is_markovian(gamma: [f64; 3]) -> bool {
    gamma.iter().all(|&g| g > 0.0)
}

/// Unital qubit channel with Kraus operators weighted by the Pauli eigenvalues `Γ_i`.
pub fn unital_transfer(gamma: [f64; 3], t: f64) -> Result<TransferMatrix> {
    let g = unital_gammas(gamma, t);
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        if g[i] + g[j] > 1.0 + g[k] + 1e-12 {
            return Err(Error::NotCompletelyPositive(format!(
                "Γ{} + Γ{} = {} exceeds 1 + Γ{} = {}",
                i + 1,
                j + 1,
                g[i] + g[j],
                k + 1,
                1.0 + g[k]
            )));
        }
    }
    let weights = [
        (1.0 + g[0] + g[1] + g[2]) / 4.0,
        (1.0 + g[0] - g[1] - g[2]) / 4.0,
        (1.0 - g[0] + g[1] - g[2]) / 4.0,
        (1.0 - g[0] - g[1] + g[2]) / 4.0,
    ];
    let mut mat = CMatrix::zeros(4, 4);
    for (k, w) in weights.iter().enumerate() {
        mat += unitary_transfer_matrix(&pauli(k)) * c(w.max(0.0), 0.0);
    }
    Ok(TransferMatrix::exact(mat))
}

/// Mixture of CZ, the Paulis X, Y, Z on the second qubit, and the identity.
///
/// The Pauli terms act as `I ⊗ P`; this is the reading whose spectrum has six two-fold
/// eigenvalues `{1, 0.93, 0.7, 0.67, 0.57, 0.47}` at `(0.1, 0.07, 0.08, 0.09)`.
pub fn depolarizing_cz_transfer(p_cz: f64, p_xx: f64, p_yy: f64, p_zz: f64) -> Result<TransferMatrix> {
    let ps = [p_cz, p_xx, p_yy, p_zz];
    for (name, p) in ["p_cz", "p_xx", "p_yy", "p_zz"].iter().zip(ps) {
        check_probability(name, p)?;
    }
    let total: f64 = ps.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::OutOfRange(format!("probabilities sum to {total} > 1")));
    }
    let id = pauli(0);
    let unitaries = [cz_gate(), id.kronecker(&pauli(1)), id.kronecker(&pauli(2)), id.kronecker(&pauli(3))];
    let mut mat = CMatrix::identity(16, 16) * c(1.0 - total, 0.0);
    for (u, p) in unitaries.iter().zip(ps) {
        mat += unitary_transfer_matrix(u) * c(p, 0.0);
    }
    Ok(TransferMatrix::exact(mat))
}

/// Serializable channel description used by the simulator and the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    Unitary { matrix: MatrixFile },
    XGate,
    Iswap,
    Depolarizing { p: f64 },
    UnitalPauli { gamma: [f64; 3], t: f64 },
    DepolarizingCz { p_cz: f64, p_xx: f64, p_yy: f64, p_zz: f64 },
    Identity { qubits: usize },
    Custom { matrix: MatrixFile },
}

impl ChannelSpec {
    pub fn transfer(&self) -> Result<TransferMatrix> {
        match self {
            ChannelSpec::Unitary { matrix } => unitary_transfer(&matrix.to_matrix()?),
            ChannelSpec::XGate => unitary_transfer(&pauli(1)),
            ChannelSpec::Iswap => unitary_transfer(&iswap_gate()),
            ChannelSpec::Depolarizing { p } => depolarizing_transfer(*p),
            ChannelSpec::UnitalPauli { gamma, t } => unital_transfer(*gamma, *t),
            ChannelSpec::DepolarizingCz { p_cz, p_xx, p_yy, p_zz } => {
                depolarizing_cz_transfer(*p_cz, *p_xx, *p_yy, *p_zz)
            }
            ChannelSpec::Identity { qubits } => {
                if *qubits == 0 || *qubits > 3 {
                    return Err(Error::OutOfRange(format!("qubits = {qubits}")));
                }
                Ok(TransferMatrix::identity(1 << qubits))
            }
            ChannelSpec::Custom { matrix } => TransferMatrix::new(matrix.to_matrix()?),
        }
    }
}

/// Choi-form CPT check: hermitian PSD `Γ(M)` with `Tr₁ Γ(M) = I`.
pub fn cpt_defect(t: &CMatrix) -> Result<f64> {
    let g = gamma(t)?;
    let d = sqrt_dim(t.nrows())?;
    let herm = hermiticity_defect(&g);
    let psd = (-eigh_values(&hermitian_part(&g))[0]).max(0.0);
    let tr = (partial_trace_first(&g)? - CMatrix::identity(d, d)).norm();
    Ok(herm.max(psd).max(tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, expm, C64};

    fn sorted_re(v: &[C64]) -> Vec<f64> {
        let mut r: Vec<f64> = v.iter().map(|z| z.re).collect();
        r.sort_by(|a, b| b.total_cmp(a));
        r
    }

    #[test]
    fn iswap_multiplicities() {
        let t = unitary_transfer(&iswap_gate()).unwrap();
        let ev = eigenvalues(&t.mat).unwrap();
        let count = |z: C64| ev.iter().filter(|e| (**e - z).norm() < 1e-9).count();
        assert_eq!(count(c(1.0, 0.0)), 6);
        assert_eq!(count(c(-1.0, 0.0)), 2);
        assert_eq!(count(c(0.0, 1.0)), 4);
        assert_eq!(count(c(0.0, -1.0)), 4);
    }

    #[test]
    fn depolarizing_spectra() {
        let ev = sorted_re(&eigenvalues(&depolarizing_transfer(0.3).unwrap().mat).unwrap());
        for (a, b) in ev.iter().zip([1.0, 0.6, 0.6, 0.6]) {
            assert!((a - b).abs() < 1e-12);
        }
        let ev = sorted_re(&eigenvalues(&depolarizing_transfer(0.75).unwrap().mat).unwrap());
        for (a, b) in ev.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(depolarizing_transfer(0.0).unwrap().mat, CMatrix::identity(4, 4));
        assert!(depolarizing_transfer(1.5).is_err());
    }

    #[test]
    fn unital_channel_eigenvalues_and_cp_boundary() {
        let g = [-200.0, 201.0, 200.5];
        let t = unital_transfer(g, 1.0).unwrap();
        let ev = sorted_re(&eigenvalues(&t.mat).unwrap());
        let expected = [1.0, (-0.5f64).exp(), (-1.0f64).exp(), (-401.5f64).exp()];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!unital_is_markovian(g));
        assert!(unital_is_markovian([200.0, 201.0, 200.5]));
        assert_eq!(unital_transfer([0.0; 3], 1.0).unwrap().mat, CMatrix::identity(4, 4));
        assert!(cpt_defect(&t.mat).unwrap() < 1e-10);
        // γ = (−a, a, 0) gives Γ = (e^{-a}, 1, 1): Γ₂ + Γ₃ = 2 > 1 + Γ₁.
        assert!(matches!(unital_transfer([-1.0, 1.0, 0.0], 1.0), Err(Error::NotCompletelyPositive(_))));
        // γ = (0, 0, a) sits on the boundary Γ₁ + Γ₂ = 1 + Γ₃.
        assert!(unital_transfer([0.0, 0.0, 0.7], 1.0).is_ok());
    }

    #[test]
    fn depolarizing_cz_spectrum() {
        let t = depolarizing_cz_transfer(0.1, 0.07, 0.08, 0.09).unwrap();
        let ev = sorted_re(&eigenvalues(&t.mat).unwrap());
        let mut expected: Vec<f64> = vec![1.0, 1.0, 0.7, 0.7, 0.93, 0.93, 0.57, 0.57, 0.67, 0.67, 0.47, 0.47, 0.68, 0.66, 0.48, 0.46];
        expected.sort_by(|a, b| b.total_cmp(a));
        // Reference values are quoted to two decimals.
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).abs() < 0.005, "{ev:?}");
        }
        assert!(cpt_defect(&t.mat).unwrap() < 1e-10);
    }

    #[test]
    fn dephasing_generator() {
        let gam: f64 = 0.3;
        let l = lindblad_generator(&CMatrix::zeros(2, 2), &[pauli(3) * c(gam.sqrt(), 0.0)]).unwrap();
        assert!(is_lindbladian(&l.mat, 1e-10).unwrap().ok);
        let ev = sorted_re(&eigenvalues(&expm(&l.mat)).unwrap());
        let e = (-2.0 * gam).exp();
        for (a, b) in ev.iter().zip([1.0, 1.0, e, e]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_generator_is_lindbladian() {
        let chk = is_lindbladian(&CMatrix::zeros(4, 4), 0.0).unwrap();
        assert!(chk.ok);
        assert_eq!(chk.residuals, LindbladResiduals { hermiticity: 0.0, ccp: 0.0, trace: 0.0 });
    }

    #[test]
    fn shifted_generator_violates_ccp() {
        let l = lindblad_generator(&CMatrix::zeros(2, 2), &[pauli(3) * c(0.5, 0.0)]).unwrap();
        let w = MaxEntangled::new(2);
        // Adding c·ω_⊥ lowers the restricted Choi spectrum by c/d.
        let bad = &l.mat + &w.omega_perp * c(3.0, 0.0);
        let chk = is_lindbladian(&bad, 1e-10).unwrap();
        assert!(!chk.ok);
        assert!(chk.residuals.ccp > 0.5);
        assert!(chk.residuals.trace < 1e-12);
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(lindblad_generator(&h, &[]), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn channel_spec_round_trips_through_json() {
        let spec = ChannelSpec::UnitalPauli { gamma: [-200.0, 201.0, 200.5], t: 1.0 };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"kind\":\"unital_pauli\""));
        assert_eq!(serde_json::from_str::<ChannelSpec>(&s).unwrap(), spec);
    }
}
