//! Dykstra's alternating projections for the closest-Lindbladian problem.
//!
//! Slow but simple: it shares no code with the ADMM path beyond basic matrix arithmetic,
//! so it serves as a cross-check of the production solver.

use nalgebra::SymmetricEigen;

use crate::linalg::{c, sqrt_dim, CMatrix};

fn project_subspace(x: &CMatrix, d: usize) -> CMatrix {
    let n = d * d;
    let mut h = CMatrix::from_fn(n, n, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5);
    for a in 0..d {
        for b in 0..d {
            let mut tr = c(0.0, 0.0);
            for j in 0..d {
                tr += h[(j * d + a, j * d + b)];
            }
            for j in 0..d {
                h[(j * d + a, j * d + b)] -= tr / d as f64;
            }
        }
    }
    h
}

fn project_cone(x: &CMatrix, d: usize) -> CMatrix {
    let n = d * d;
    let s = 1.0 / d as f64;
    let perp = CMatrix::from_fn(n, n, |i, j| {
        let diag_i = i / d == i % d;
        let diag_j = j / d == j % d;
        let w = if diag_i && diag_j { s } else { 0.0 };
        c(if i == j { 1.0 - w } else { -w }, 0.0)
    });
    let k = &perp * x * &perp;
    let k = (&k + k.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(k.clone());
    let mut neg = CMatrix::zeros(n, n);
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l < 0.0 {
            let v = eig.eigenvectors.column(idx);
            neg += (&v * v.adjoint()) * c(l, 0.0);
        }
    }
    x - neg
}

/// Result of the alternating-projection oracle.
#[derive(Debug, Clone)]
pub struct DykstraResult {
    pub x: CMatrix,
    pub objective: f64,
    pub iterations: usize,
}

/// Projects `target` onto `{X hermitian, Tr₁ X = 0, ω_⊥ X ω_⊥ ⪰ 0}`.
pub fn closest_lindbladian_dykstra(target: &CMatrix, max_iters: usize, tol: f64) -> DykstraResult {
    let d = sqrt_dim(target.nrows()).expect("square dimension");
    let n = d * d;
    let mut x = target.clone();
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    let mut iterations = max_iters;
    for it in 1..=max_iters {
        let y = project_subspace(&(&x + &p), d);
        p = &x + &p - &y;
        let x_new = project_cone(&(&y + &q), d);
        q = &y + &q - &x_new;
        let step = (&x_new - &x).norm();
        x = x_new;
        if step < tol && it > 1 {
            iterations = it;
            break;
        }
    }
    // The last iterate lies in the cone; finish in the subspace, which the cone step has
    // perturbed by at most the final step length.
    let x = project_subspace(&x, d);
    let objective = (&x - target).norm();
    DykstraResult { x, objective, iterations }
}
