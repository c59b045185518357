//! Joint fit of one generator to several scaled targets:
//! minimize `Σ_c ‖t_c X − T_c‖_F` subject to `‖t_c X − T_c‖_F ≤ δ` for every `c`
//! and `X ∈ 𝒜 ∩ 𝒦_0`.

use super::{check_finite, Geometry, Residuals, SolveReport, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, CMatrix};

#[derive(Debug, Clone)]
pub struct MultiTarget {
    pub time: f64,
    pub target: CMatrix,
}

/// `argmin_r sqrt(r² + a²) + (ρ/2)(r − r0)²` over `0 ≤ r ≤ r0`.
fn radial_prox(r0: f64, a: f64, rho: f64) -> f64 {
    if a == 0.0 {
        return (r0 - 1.0 / rho).max(0.0);
    }
    let grad = |r: f64| r / (r * r + a * a).sqrt() + rho * (r - r0);
    let (mut lo, mut hi) = (0.0, r0);
    if grad(lo) >= 0.0 {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 * (1.0 + r0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn solve_multi(targets: &[MultiTarget], delta: f64, s: &SolverSettings) -> Result<SolveReport> {
    let first = targets.first().ok_or_else(|| Error::InvalidInput("no targets".into()))?;
    let geom = Geometry::for_target(&first.target)?;
    for t in targets {
        check_finite(&t.target)?;
        if t.target.nrows() != geom.n {
            return Err(Error::DimensionMismatch { expected: geom.n, found: t.target.nrows() });
        }
        if !(t.time > 0.0) {
            return Err(Error::OutOfRange(format!("time {}", t.time)));
        }
    }
    let n = geom.n;
    let herm: Vec<CMatrix> = targets.iter().map(|t| hermitian_part(&t.target)).collect();
    let anti: Vec<f64> = targets.iter().zip(&herm).map(|(t, h)| (&t.target - h).norm()).collect();
    let mut radius = Vec::with_capacity(targets.len());
    for &a in &anti {
        if a > delta {
            return Ok(SolveReport::infeasible(n));
        }
        radius.push((delta * delta - a * a).sqrt());
    }
    let times: Vec<f64> = targets.iter().map(|t| t.time).collect();
    let denom = 1.0 + times.iter().map(|t| t * t).sum::<f64>();

    // Start from the least-squares generator projected onto the affine subspace.
    let mut x = geom.project_affine(&(herm.iter().zip(&times).fold(CMatrix::zeros(n, n), |acc, (h, &t)| acc + h * c(t, 0.0))
        * c(1.0 / (denom - 1.0), 0.0)));
    let mut ys: Vec<CMatrix> = times.iter().map(|&t| &x * c(t, 0.0)).collect();
    let mut us: Vec<CMatrix> = vec![CMatrix::zeros(n, n); targets.len()];
    let mut z = geom.project_cone(&x, 0.0);
    let mut uz = CMatrix::zeros(n, n);
    let mut rho = s.rho;
    let mut converged = false;
    let mut iterations = s.max_iters;
    for it in 1..=s.max_iters {
        let mut acc = &z - &uz;
        for ((y, u), &t) in ys.iter().zip(&us).zip(&times) {
            acc += (y - u) * c(t, 0.0);
        }
        x = geom.project_affine(&(acc * c(1.0 / denom, 0.0)));
        let mut r_pri2 = 0.0;
        let mut r_dual2 = 0.0;
        for k in 0..targets.len() {
            let v = &x * c(times[k], 0.0) + &us[k];
            let diff = &v - &herm[k];
            let r0 = diff.norm();
            let r = radial_prox(r0, anti[k], rho).min(radius[k]);
            let y_new = if r0 > 0.0 { &herm[k] + diff * c(r / r0, 0.0) } else { herm[k].clone() };
            r_dual2 += (&y_new - &ys[k]).norm_squared() * times[k] * times[k];
            ys[k] = y_new;
            let res = &x * c(times[k], 0.0) - &ys[k];
            r_pri2 += res.norm_squared();
            us[k] += res;
        }
        let z_new = geom.project_cone(&(&x + &uz), 0.0);
        r_dual2 += (&z_new - &z).norm_squared();
        z = z_new;
        let res = &x - &z;
        r_pri2 += res.norm_squared();
        uz += res;
        let r_pri = r_pri2.sqrt();
        let r_dual = rho * r_dual2.sqrt();
        let scale = 1.0 + x.norm() * denom.sqrt();
        let uscale = 1.0 + rho * (uz.norm() + us.iter().map(|u| u.norm()).sum::<f64>());
        if r_pri <= s.primal_tol * scale && r_dual <= s.dual_tol * uscale {
            converged = true;
            iterations = it;
            break;
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
                rho *= factor;
                for u in us.iter_mut() {
                    *u *= c(1.0 / factor, 0.0);
                }
                uz *= c(1.0 / factor, 0.0);
            }
        }
    }
    let dists: Vec<f64> = targets.iter().map(|t| (&x * c(t.time, 0.0) - &t.target).norm()).collect();
    let mut residuals: Residuals = geom.residuals(&x, 0.0);
    residuals.ball = dists.iter().map(|&dd| (dd - delta).max(0.0)).fold(0.0, f64::max);
    Ok(SolveReport {
        x_opt: x,
        objective: dists.iter().sum(),
        residuals,
        status: if converged { SolveStatus::Optimal } else { SolveStatus::MaxIterations },
        iterations,
    })
}
