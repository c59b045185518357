//! Minimal isotropic noise `μ_min` needed to make a snapshot Markovian.
//!
//! For each branch `L_m` of `log R` and each radius `δ` on a grid, the minimal-noise program
//! finds the smallest `μ` such that some hermiticity- and trace-preserving `H′` within
//! `δ` of `L_m` makes `H′ − μ ω_⊥` a Lindbladian. Candidates whose exponential strays
//! `ε` or more from the raw snapshot are discarded. The grid starts at the `δ` solving
//! `ε = e^δ δ ‖L₀‖_F` and stops before ten times that value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{is_lindbladian, LindbladResiduals};
use crate::error::{Error, Result};
use crate::fit::{checked_log, enumerate_branches, BranchPolicy};
use crate::linalg::{branch, c, eig_full, expm, gamma, hermitian_part, vec_adjoint, CMatrix, CVector, SpectralData, C64};
use crate::solver::{solve_min_noise_with, Geometry, SolveStatus, SolverSettings};

/// Starting value of the running minimum.
pub const MU_INIT: f64 = 1e9;

/// Default spacing of the `δ` grid.
pub const DEFAULT_DELTA_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_step: f64,
}

impl DeltaSweep {
    /// Grid for error budget `eps` around a logarithm of norm `log_norm`.
    pub fn new(eps: f64, log_norm: f64, delta_step: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::OutOfRange(format!("epsilon = {eps}")));
        }
        if !(log_norm > 0.0) || !log_norm.is_finite() {
            return Err(Error::Precondition(format!("logarithm norm {log_norm} must be positive")));
        }
        if !(delta_step > 0.0) {
            return Err(Error::OutOfRange(format!("delta step = {delta_step}")));
        }
        let delta_min = solve_delta(eps / log_norm);
        Ok(DeltaSweep { delta_min, delta_max: 10.0 * delta_min, delta_step })
    }

    /// `δ_min + k δ_step` for every `k ≥ 0` below `δ_max`.
    pub fn grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0.. {
            let delta = self.delta_min + k as f64 * self.delta_step;
            if delta >= self.delta_max {
                break;
            }
            out.push(delta);
        }
        out
    }
}

/// Root of `δ e^δ = x` for `x ≥ 0`.
fn solve_delta(x: f64) -> f64 {
    let mut hi = 1.0f64;
    while hi * hi.exp() < x {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    hi
}

/// Markovianity score `exp((1 − d²) μ)`, equal to 1 for Lindbladian snapshots.
pub fn markovianity_score(mu: f64, d: usize) -> f64 {
    let d2 = (d * d) as f64;
    ((1.0 - d2) * mu.max(0.0)).exp()
}

#[derive(Debug, Clone)]
pub struct MuResult {
    /// Generator `H′` in transfer form.
    pub generator: CMatrix,
    pub mu_min: f64,
    pub delta: f64,
    pub branch: Vec<i64>,
    /// `‖M − exp H′‖_F`.
    pub distance: f64,
    /// Lindblad residuals of `H′ − μ ω_⊥`.
    pub residuals: LindbladResiduals,
    pub status: SolveStatus,
    pub sweep: DeltaSweep,
}

#[derive(Debug, Clone)]
struct MuCandidate {
    x: CMatrix,
    mu: f64,
    delta: f64,
    branch: usize,
    distance: f64,
    status: SolveStatus,
}

/// Smallest `μ` over all branches and grid radii whose generator stays within `eps` of
/// the snapshot `m`. `s` is the spectral data of the (possibly repaired) matrix whose
/// logarithm is searched.
pub fn non_markovianity(
    m: &CMatrix,
    s: &SpectralData,
    eps: f64,
    policy: &BranchPolicy,
    delta_step: f64,
    settings: &SolverSettings,
) -> Result<Option<MuResult>> {
    if !(eps > 0.0) {
        return Ok(None);
    }
    let geom = Geometry::for_target(m)?;
    let l0 = checked_log(s)?;
    let sweep = DeltaSweep::new(eps, l0.norm(), delta_step)?;
    let grid = sweep.grid();
    let reach = grid.last().copied().unwrap_or(sweep.delta_min);
    let branches = enumerate_branches(s.dim(), policy)?;
    // Targets that are farther than every grid radius from the hermitian, trace-free
    // matrices are infeasible throughout and are dropped up front.
    let targets: Vec<(usize, CMatrix)> = branches
        .par_iter()
        .enumerate()
        .map(|(k, mv)| {
            let t = gamma(&branch(&l0, s, mv)?)?;
            let gap = (&t - geom.project_affine(&t)).norm();
            Ok((gap <= reach * (1.0 + 1e-9) + 1e-12 * (1.0 + t.norm())).then_some((k, t)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..targets.len()).map(move |b| (g, b))).collect();
    let candidates: Vec<Option<MuCandidate>> = jobs
        .par_iter()
        .map(|&(g, b)| {
            let (k, t) = &targets[b];
            let report = solve_min_noise_with(&geom, t, grid[g], settings)?;
            if report.status == SolveStatus::Infeasible {
                return Ok(None);
            }
            let distance = (m - expm(&gamma(&report.x_opt)?)).norm();
            Ok(Some(MuCandidate {
                x: report.x_opt,
                mu: report.objective,
                delta: grid[g],
                branch: *k,
                distance,
                status: report.status,
            }))
        })
        .collect::<Result<_>>()?;
    // Jobs are ordered by δ, then branch order, so strict improvement realizes the
    // tie-break on smaller δ and earlier branch.
    let mut mu_min = MU_INIT;
    let mut best: Option<MuCandidate> = None;
    for cand in candidates.into_iter().flatten() {
        if cand.distance < eps && cand.mu < mu_min {
            mu_min = cand.mu;
            best = Some(cand);
        }
    }
    best.map(|b| {
        let generator = gamma(&b.x)?;
        let shifted = &generator - &geom.omega.omega_perp * c(b.mu, 0.0);
        let residuals = is_lindbladian(&shifted, 0.0)?.residuals;
        Ok(MuResult {
            generator,
            mu_min: b.mu,
            delta: b.delta,
            branch: branches[b.branch].clone(),
            distance: b.distance,
            residuals,
            status: b.status,
            sweep,
        })
    })
    .transpose()
}

/// Hand-constructed generator for a snapshot with a real, positive, simple spectrum.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub generator: CMatrix,
    pub mu: f64,
    pub epsilon: f64,
}

/// Smallest admissible gap between snapshot eigenvalues for the oracle.
const ORACLE_MIN_GAP: f64 = 1e-3;

/// Builds a hermiticity- and trace-preserving generator from the snapshot's spectrum:
/// the logarithm of the stationary eigenvalue is set to zero, the eigenvectors are
/// replaced by self-adjoint versions, and those of decaying modes are made traceless.
/// Returns the noise `μ` this generator needs and its distance `ε` to the snapshot.
pub fn analytical_mu_unital(m: &CMatrix) -> Result<OracleResult> {
    let geom = Geometry::for_target(m)?;
    let d = geom.d;
    let s = eig_full(m).map_err(|e| match e {
        Error::DegenerateSpectrum { .. } => Error::Precondition(e.to_string()),
        e => e,
    })?;
    let n = s.dim();
    let scale = m.norm().max(1.0);
    for (j, l) in s.values.iter().enumerate() {
        if l.im.abs() > 1e-9 * scale || l.re <= 0.0 {
            return Err(Error::Precondition(format!("eigenvalue {j} = {l} is not real positive")));
        }
    }
    for j in 1..n {
        let gap = (s.values[j - 1] - s.values[j]).norm();
        if gap < ORACLE_MIN_GAP {
            return Err(Error::Precondition(format!("eigenvalues {} and {j} are {gap:e} apart", j - 1)));
        }
    }
    // Stationary mode: left eigenvector most aligned with ⟨ω|.
    let omega = &geom.omega.omega;
    let overlap = |j: usize| {
        let row = s.left.row(j);
        (row * omega)[(0, 0)].norm() / row.norm()
    };
    let stationary = (0..n).max_by(|&a, &b| overlap(a).total_cmp(&overlap(b))).expect("nonempty");
    if (s.values[stationary].re - 1.0).abs() > 0.1 {
        return Err(Error::Precondition(format!("stationary eigenvalue {} is not near 1", s.values[stationary])));
    }
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = self_adjoint_part(&s.right.column(j).into_owned())?;
        if j != stationary {
            let mean = (0..d).map(|k| v[k * d + k]).sum::<C64>() / c(d as f64, 0.0);
            for k in 0..d {
                v[k * d + k] -= mean;
            }
        }
        cols.push(v);
    }
    let sm = CMatrix::from_columns(&cols);
    let inv = sm.clone().try_inverse().ok_or(Error::Singular)?;
    let logs = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        (0..n).map(|j| if j == stationary { c(0.0, 0.0) } else { c(s.values[j].re.ln(), 0.0) }),
    ));
    let generator = &sm * logs * inv;
    let x = hermitian_part(&gamma(&generator)?);
    let mu = d as f64 * (-geom.min_restricted_eig(&x)).max(0.0);
    let epsilon = (m - expm(&generator)).norm();
    Ok(OracleResult { generator, mu, epsilon })
}

/// `½(w + w†)` after rotating the phase of `w` to be as close to self-adjoint as possible.
fn self_adjoint_part(w: &CVector) -> Result<CVector> {
    let wa = vec_adjoint(w)?;
    let z = w.dotc(&wa);
    let w = if z.norm() > 1e-300 { w * (z / z.norm()).sqrt() } else { w.clone() };
    let wa = vec_adjoint(&w)?;
    Ok((&w + wa) * c(0.5, 0.0))
}
