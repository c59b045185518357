//! Convex projections onto the Choi-form Lindbladian cone.
//!
//! Every problem here lives on `d² × d²` Choi-form matrices `X`. The feasible set is the
//! intersection of the affine subspace `𝒜 = {X hermitian, Tr₁ X = 0}` with the cone
//! `𝒦_c = {X : V† X V ⪰ c I}`, where `V` spans the complement of the maximally entangled
//! vector. `c = 0` gives the Lindbladians; `c = −μ/d` admits generators that become
//! Lindbladians after mixing in depolarizing noise of strength `μ`.
//!
//! The closest-point problem is solved by over-relaxed ADMM, alternating the exact
//! projection onto `𝒜` with an eigenvalue-clipping projection onto `𝒦_c`. The minimal
//! noise problem is reduced to a one-dimensional root search over `μ`: the distance from
//! the target to the feasible set at level `μ` is convex and non-increasing in `μ`.

pub mod dykstra;
mod multi;

pub use multi::{solve_multi, MultiTarget};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, partial_trace_first, sqrt_dim, CMatrix, MaxEntangled};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub cone_tol: f64,
    pub max_iters: usize,
    pub over_relaxation: f64,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub rho: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { primal_tol: 1e-9, dual_tol: 1e-9, cone_tol: 1e-9, max_iters: 50_000, over_relaxation: 1.6, rho: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖X − X†‖_F + ‖Tr₁ X‖₁`.
    pub affine: f64,
    /// `max(0, c − λ_min(V† X V))`.
    pub cone: f64,
    /// `max(0, ‖X − T‖_F − δ)`; zero for problems without a ball.
    pub ball: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_opt: CMatrix,
    /// `‖X − T‖_F` for the closest-point problem, `μ` for the minimal-noise problem.
    pub objective: f64,
    pub residuals: Residuals,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SolveReport {
    fn infeasible(n: usize) -> Self {
        SolveReport {
            x_opt: CMatrix::zeros(n, n),
            objective: f64::INFINITY,
            residuals: Residuals::default(),
            status: SolveStatus::Infeasible,
            iterations: 0,
        }
    }
}

/// Projections shared by the solvers for a fixed dimension.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub d: usize,
    pub n: usize,
    pub omega: MaxEntangled,
    /// `Γ(ω_⊥)`: lies in `𝒜` and restricts to `−I/d` on the complement.
    pub shift_direction: CMatrix,
}

impl Geometry {
    pub fn new(d: usize) -> Self {
        let omega = MaxEntangled::new(d);
        let shift_direction = crate::linalg::gamma(&omega.omega_perp).expect("square");
        Geometry { d, n: d * d, omega, shift_direction }
    }

    pub fn for_target(t: &CMatrix) -> Result<Self> {
        if t.nrows() != t.ncols() {
            return Err(Error::DimensionMismatch { expected: t.nrows(), found: t.ncols() });
        }
        Ok(Self::new(sqrt_dim(t.nrows())?))
    }

    /// Orthogonal projection onto `𝒜`.
    pub fn project_affine(&self, x: &CMatrix) -> CMatrix {
        let mut h = hermitian_part(x);
        let tr = partial_trace_first(&h).expect("square");
        let d = self.d;
        let inv = c(1.0 / d as f64, 0.0);
        for j in 0..d {
            for a in 0..d {
                for b in 0..d {
                    h[(j * d + a, j * d + b)] -= tr[(a, b)] * inv;
                }
            }
        }
        h
    }

    /// Orthogonal projection of a hermitian matrix onto `𝒦_c`.
    pub fn project_cone(&self, x: &CMatrix, floor: f64) -> CMatrix {
        let v = &self.omega.complement;
        let y = v.adjoint() * x * v;
        let eig = SymmetricEigen::new(hermitian_part(&y));
        if eig.eigenvalues.iter().all(|&l| l >= floor) {
            return x.clone();
        }
        let q = &eig.eigenvectors;
        let mut qd = q.clone();
        for (k, mut col) in qd.column_iter_mut().enumerate() {
            let l = eig.eigenvalues[k];
            col *= c((floor - l).max(0.0), 0.0);
        }
        let delta = &qd * q.adjoint();
        x + v * delta * v.adjoint()
    }

    pub fn min_restricted_eig(&self, x: &CMatrix) -> f64 {
        let y = self.omega.restrict(&hermitian_part(x));
        y.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn residuals(&self, x: &CMatrix, floor: f64) -> Residuals {
        let herm = (x - x.adjoint()).norm();
        let tr = crate::linalg::entrywise_one_norm(&partial_trace_first(x).expect("square"));
        Residuals { affine: herm + tr, cone: (floor - self.min_restricted_eig(x)).max(0.0), ball: 0.0 }
    }
}

/// Iterates of the closest-point ADMM, reusable as a warm start.
#[derive(Debug, Clone)]
pub(crate) struct AdmmState {
    z: CMatrix,
    u: CMatrix,
    rho: f64,
}

pub(crate) struct Projection {
    pub x: CMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Projects the hermitian matrix `h` onto `𝒜 ∩ 𝒦_floor` by over-relaxed ADMM.
pub(crate) fn project_feasible(
    geom: &Geometry,
    h: &CMatrix,
    floor: f64,
    s: &SolverSettings,
    warm: Option<&mut AdmmState>,
) -> (Projection, AdmmState) {
    let ha = geom.project_affine(h);
    let mut state = match warm {
        Some(w) => w.clone(),
        None => AdmmState { z: geom.project_cone(&ha, floor), u: CMatrix::zeros(geom.n, geom.n), rho: s.rho },
    };
    // Already feasible: the projection is the affine projection itself.
    if geom.min_restricted_eig(&ha) >= floor {
        state.z = ha.clone();
        state.u.fill(c(0.0, 0.0));
        return (Projection { x: ha, iterations: 0, converged: true }, state);
    }
    let alpha = s.over_relaxation;
    let mut x = ha.clone();
    for it in 1..=s.max_iters {
        let rho = state.rho;
        // argmin ½‖X − h‖² + ρ/2 ‖X − Z + U‖² over 𝒜.
        x = (&ha + geom.project_affine(&(&state.z - &state.u)) * c(rho, 0.0)) * c(1.0 / (1.0 + rho), 0.0);
        let x_hat = &x * c(alpha, 0.0) + &state.z * c(1.0 - alpha, 0.0);
        let z_old = std::mem::replace(&mut state.z, geom.project_cone(&(&x_hat + &state.u), floor));
        state.u += &x_hat - &state.z;
        let r_pri = (&x - &state.z).norm();
        let r_dual = rho * (&state.z - &z_old).norm();
        let scale = 1.0 + x.norm().max(state.z.norm());
        if r_pri <= s.primal_tol * scale && r_dual <= s.dual_tol * (1.0 + rho * state.u.norm()) {
            return (Projection { x, iterations: it, converged: true }, state);
        }
        if it % 20 == 0 {
            let factor = if r_pri > 10.0 * r_dual {
                2.0
            } else if r_dual > 10.0 * r_pri {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                state.rho *= factor;
                state.u *= c(1.0 / factor, 0.0);
            }
        }
    }
    (Projection { x, iterations: s.max_iters, converged: false }, state)
}

/// Closest Choi-form Lindbladian to `target` in Frobenius norm.
pub fn solve_closest(target: &CMatrix, s: &SolverSettings) -> Result<SolveReport> {
    let geom = Geometry::for_target(target)?;
    solve_closest_with(&geom, target, s)
}

pub fn solve_closest_with(geom: &Geometry, target: &CMatrix, s: &SolverSettings) -> Result<SolveReport> {
    check_finite(target)?;
    let h = hermitian_part(target);
    let (p, _) = project_feasible(geom, &h, 0.0, s, None);
    let objective = (&p.x - target).norm();
    let residuals = geom.residuals(&p.x, 0.0);
    let status = if p.converged { SolveStatus::Optimal } else { SolveStatus::MaxIterations };
    Ok(SolveReport { x_opt: p.x, objective, residuals, status, iterations: p.iterations })
}

fn check_finite(t: &CMatrix) -> Result<()> {
    if t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite target".into()));
    }
    Ok(())
}

/// Smallest `μ` such that some `X ∈ 𝒜` within distance `delta` of `target` satisfies
/// `V† X V ⪰ −(μ/d) I`. The report's `objective` is `μ`.
pub fn solve_min_noise(target: &CMatrix, delta: f64, s: &SolverSettings) -> Result<SolveReport> {
    let geom = Geometry::for_target(target)?;
    solve_min_noise_with(&geom, target, delta, s)
}

pub fn solve_min_noise_with(geom: &Geometry, target: &CMatrix, delta: f64, s: &SolverSettings) -> Result<SolveReport> {
    check_finite(target)?;
    if !(delta >= 0.0) {
        return Err(Error::OutOfRange(format!("delta = {delta}")));
    }
    let h = hermitian_part(target);
    // Rounding slack so that targets lying exactly in 𝒜 stay feasible at δ = 0.
    let slack = 1e-12 * (1.0 + target.norm());
    let anti = (target - &h).norm();
    if anti > delta + slack {
        return Ok(SolveReport::infeasible(geom.n));
    }
    let radius = (delta * delta - anti * anti).max(0.0).sqrt() + slack;
    let ha = geom.project_affine(&h);
    let dist_affine = (&h - &ha).norm();
    if dist_affine > radius {
        return Ok(SolveReport::infeasible(geom.n));
    }
    let d = geom.d as f64;
    let mu_hi = d * (-geom.min_restricted_eig(&ha)).max(0.0);
    let finish = |x: CMatrix, mu: f64, iterations: usize, converged: bool| {
        let mut residuals = geom.residuals(&x, -mu / d);
        residuals.ball = ((&x - target).norm() - delta - slack).max(0.0);
        let status = if converged { SolveStatus::Optimal } else { SolveStatus::MaxIterations };
        SolveReport { x_opt: x, objective: mu, residuals, status, iterations }
    };
    if mu_hi == 0.0 {
        return Ok(finish(ha, 0.0, 0, true));
    }
    let mut total = 0;
    let mut warm: Option<AdmmState> = None;
    let mut eval = |mu: f64, total: &mut usize| {
        let (p, st) = project_feasible(geom, &h, -mu / d, s, warm.as_mut());
        warm = Some(st);
        *total += p.iterations;
        let g = (&p.x - &h).norm();
        (g, p)
    };
    let (g0, p0) = eval(0.0, &mut total);
    if g0 <= radius {
        return Ok(finish(p0.x, 0.0, total, p0.converged));
    }
    // Bracket [lo, hi] with g(lo) > radius >= g(hi); g(mu_hi) equals dist_affine.
    let (mut lo, mut g_lo) = (0.0, g0);
    let (mut hi, mut g_hi) = (mu_hi, dist_affine);
    let mut best = (ha, true);
    let tol = 1e-11 * mu_hi.max(1.0);
    let mut side = 0i32;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        // Illinois-modified regula falsi, falling back to bisection near the ends.
        let mut mu = hi - (g_hi - radius) * (hi - lo) / (g_hi - g_lo);
        let width = hi - lo;
        if !(mu > lo + 0.01 * width && mu < hi - 0.01 * width) {
            mu = 0.5 * (lo + hi);
        }
        let (g, p) = eval(mu, &mut total);
        if g <= radius {
            hi = mu;
            g_hi = g;
            best = (p.x, p.converged);
            if side == 1 {
                g_lo = radius + 0.5 * (g_lo - radius);
            }
            side = 1;
        } else {
            lo = mu;
            g_lo = g;
            if side == -1 {
                g_hi = radius + 0.5 * (g_hi - radius);
            }
            side = -1;
        }
        if (g - radius).abs() <= 1e-13 * (1.0 + radius) && g <= radius {
            break;
        }
    }
    Ok(finish(best.0, hi, total, best.1))
}
