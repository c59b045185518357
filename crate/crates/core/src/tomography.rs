//! Simulated process tomography with finite measurement statistics.
//!
//! States are estimated by Pauli-basis measurements: for `n` qubits each of the `3^n`
//! settings measures every qubit in the X, Y or Z basis and draws `shots` outcomes from
//! the exact Born distribution. Pauli expectation values are averaged over all settings
//! compatible with a Pauli string and inverted linearly into a density matrix.
//!
//! Two process protocols are provided:
//! - `AncillaChoi` prepares a maximally entangled system-ancilla pair, applies the channel
//!   to the system half and reconstructs the `2n`-qubit Choi state. Shot noise leaves the
//!   estimate hermiticity preserving but only approximately trace preserving.
//! - `ProductStates` sends the `4^n` product inputs `{|0⟩, |1⟩, |+⟩, |+i⟩}^{⊗n}` through the
//!   channel, reconstructs each output and solves the linear system for the transfer
//!   matrix. The estimate is exactly trace and hermiticity preserving.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channel::{pauli, ChannelSpec, TransferMatrix};
use crate::error::{Error, Result};
use crate::linalg::{c, gamma, unvectorize, vectorize, CMatrix, CVector};
use crate::rng::{keyed, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    AncillaChoi,
    ProductStates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyConfig {
    /// Repetitions per measurement setting.
    pub shots: u64,
    pub seed: u64,
    #[serde(default)]
    pub protocol: Protocol,
}

impl TomographyConfig {
    pub fn new(shots: u64, seed: u64) -> Self {
        TomographyConfig { shots, seed, protocol: Protocol::default() }
    }
}

pub fn simulate_process_tomography(spec: &ChannelSpec, cfg: &TomographyConfig) -> Result<TransferMatrix> {
    simulate_from_transfer(&spec.transfer()?, cfg)
}

fn qubit_count(d: usize) -> Result<usize> {
    if d.is_power_of_two() && d >= 2 {
        Ok(d.trailing_zeros() as usize)
    } else {
        Err(Error::InvalidInput(format!("dimension {d} is not a qubit register")))
    }
}

pub fn simulate_from_transfer(exact: &TransferMatrix, cfg: &TomographyConfig) -> Result<TransferMatrix> {
    if cfg.shots == 0 {
        return Err(Error::OutOfRange("shots must be positive".into()));
    }
    let n = qubit_count(exact.d)?;
    let mat = match cfg.protocol {
        Protocol::AncillaChoi => {
            let d = exact.d as f64;
            let state = exact.choi() * c(1.0 / d, 0.0);
            let est = PauliTomography::new(2 * n).estimate(&state, cfg, 0);
            gamma(&(est * c(d, 0.0)))?
        }
        Protocol::ProductStates => {
            let tomo = PauliTomography::new(n);
            let inputs = product_inputs(n);
            let settings = tomo.settings as u64;
            let mut xs = Vec::with_capacity(inputs.len());
            let mut ys = Vec::with_capacity(inputs.len());
            for (k, rho) in inputs.iter().enumerate() {
                let out = exact.apply(rho);
                ys.push(vectorize(&tomo.estimate(&out, cfg, k as u64 * settings)));
                xs.push(vectorize(rho));
            }
            let x = CMatrix::from_columns(&xs);
            let y = CMatrix::from_columns(&ys);
            let x_inv = x.try_inverse().ok_or(Error::Singular)?;
            y * x_inv
        }
    };
    TransferMatrix::new(mat)
}

fn product_inputs(n: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets = [
        CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]),
        CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]),
        CVector::from_vec(vec![c(s, 0.0), c(0.0, s)]),
    ];
    let singles: Vec<CMatrix> = kets.iter().map(|k| k * k.adjoint()).collect();
    let mut out = Vec::with_capacity(4usize.pow(n as u32));
    for idx in 0..4usize.pow(n as u32) {
        let mut rho = CMatrix::identity(1, 1);
        for q in 0..n {
            let digit = (idx / 4usize.pow((n - 1 - q) as u32)) % 4;
            rho = rho.kronecker(&singles[digit]);
        }
        out.push(rho);
    }
    out
}

/// Pauli-basis state tomography on `n` qubits.
struct PauliTomography {
    n: usize,
    settings: usize,
    rotations: Vec<CMatrix>,
}

impl PauliTomography {
    fn new(n: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        let s_dag = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        let basis = [h.clone(), &h * s_dag, CMatrix::identity(2, 2)];
        let settings = 3usize.pow(n as u32);
        let rotations = (0..settings)
            .map(|sidx| {
                let mut u = CMatrix::identity(1, 1);
                for q in 0..n {
                    u = u.kronecker(&basis[digit(sidx, q, n, 3)]);
                }
                u
            })
            .collect();
        PauliTomography { n, settings, rotations }
    }

    /// Linear-inversion estimate of `rho` from sampled frequencies. Streams are keyed on
    /// `key_base + setting`.
    fn estimate(&self, rho: &CMatrix, cfg: &TomographyConfig, key_base: u64) -> CMatrix {
        let n = self.n;
        let dim = 1usize << n;
        // parity[s][mask] = Σ_o f_s(o) (−1)^{|o ∧ mask|}
        let mut parity = vec![vec![0.0; dim]; self.settings];
        for (sidx, u) in self.rotations.iter().enumerate() {
            let rotated = u * rho * u.adjoint();
            let probs: Vec<f64> = (0..dim).map(|o| rotated[(o, o)].re.max(0.0)).collect();
            let mut rng = keyed(cfg.seed, Domain::Tomography, key_base + sidx as u64);
            let counts = multinomial(&mut rng, cfg.shots, &probs);
            for (mask, slot) in parity[sidx].iter_mut().enumerate() {
                let mut acc = 0.0;
                for (o, &k) in counts.iter().enumerate() {
                    let sign = if (o & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * k as f64;
                }
                *slot = acc / cfg.shots as f64;
            }
        }
        let mut est = CMatrix::zeros(dim, dim);
        for pidx in 0..4usize.pow(n as u32) {
            let letters: Vec<usize> = (0..n).map(|q| digit(pidx, q, n, 4)).collect();
            let expectation = if pidx == 0 {
                1.0
            } else {
                let mut mask = 0usize;
                for (q, &l) in letters.iter().enumerate() {
                    if l != 0 {
                        mask |= 1 << (n - 1 - q);
                    }
                }
                let mut sum = 0.0;
                let mut count = 0usize;
                for sidx in 0..self.settings {
                    let compatible = (0..n).all(|q| letters[q] == 0 || digit(sidx, q, n, 3) == letters[q] - 1);
                    if compatible {
                        sum += parity[sidx][mask];
                        count += 1;
                    }
                }
                sum / count as f64
            };
            let mut op = CMatrix::identity(1, 1);
            for &l in &letters {
                op = op.kronecker(&pauli(l));
            }
            est += op * c(expectation / dim as f64, 0.0);
        }
        est
    }
}

fn digit(idx: usize, q: usize, n: usize, base: usize) -> usize {
    (idx / base.pow((n - 1 - q) as u32)) % base
}

fn multinomial(rng: &mut rand_chacha::ChaCha8Rng, shots: u64, probs: &[f64]) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = vec![0; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Output state of the channel for an input state, exposed for examples.
pub fn apply_channel(t: &TransferMatrix, rho: &CMatrix) -> Result<CMatrix> {
    unvectorize(&(&t.mat * vectorize(rho)))
}
