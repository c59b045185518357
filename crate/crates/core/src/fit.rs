//! Closest-Lindbladian search over branches of the matrix logarithm.
//!
//! Every branch `L_m = L₀ + 2πi Σ_j m_j P_j` exponentiates to the same matrix, but their
//! projections onto the Lindbladian cone differ. Branches are visited in order of
//! increasing `Σ|m_j|`, then lexicographically, and the first branch achieving the smallest
//! distance `‖M − exp(L′)‖` wins.
//!
//! The projection only sees the hermitian part of `Γ(L_m)`. Writing
//! `H_j = Herm Γ(2πi P_j)`, an index with `H_j = 0` (self-adjoint eigenvector) cannot change
//! the result, and a pair with `H_a = −H_b` (mutually adjoint eigenvectors) only depends
//! on `m_a − m_b`. The search solves one problem per distinct hermitian target, keeping
//! the earliest branch vector of each class in the visiting order; the outcome equals
//! that of the exhaustive loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{is_lindbladian, LindbladResiduals};
use crate::error::{Error, Result};
use crate::linalg::{branch, c, expm, gamma, hermitian_part, matrix_log_principal, CMatrix, SpectralData};
use crate::solver::{solve_closest_with, Geometry, SolveStatus, SolverSettings};

/// Largest number of branch vectors materialized by one search.
pub const MAX_BRANCHES: u128 = 20_000_000;

/// Exp/log round-trip error above which a reconstructed matrix is rejected.
pub const ROUND_TRIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPolicy {
    /// Each `m_j` ranges over `-m_max..=m_max`.
    pub m_max: u32,
    /// Optional cap on `Σ_j |m_j|`.
    #[serde(default)]
    pub max_weight: Option<u32>,
}

impl BranchPolicy {
    pub fn new(m_max: u32) -> Self {
        BranchPolicy { m_max, max_weight: None }
    }

    pub fn capped(m_max: u32, max_weight: u32) -> Self {
        BranchPolicy { m_max, max_weight: Some(max_weight) }
    }
}

impl Default for BranchPolicy {
    fn default() -> Self {
        BranchPolicy::new(1)
    }
}

fn weight(m: &[i64]) -> i64 {
    m.iter().map(|x| x.abs()).sum()
}

fn visit_order(a: &[i64], b: &[i64]) -> std::cmp::Ordering {
    weight(a).cmp(&weight(b)).then_with(|| a.cmp(b))
}

/// All branch vectors in visiting order: by `Σ|m_j|`, then lexicographically.
pub fn enumerate_branches(dim: usize, policy: &BranchPolicy) -> Result<Vec<Vec<i64>>> {
    let coords: Vec<Coord> = (0..dim).map(Coord::Free).collect();
    enumerate_reduced(dim, &coords, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Free(usize),
    Pair(usize, usize),
}

/// Branch classes for a spectral decomposition.
#[derive(Debug, Clone)]
pub struct BranchStructure {
    dim: usize,
    coords: Vec<Coord>,
    pub inert: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

impl BranchStructure {
    /// Classifies indices by their hermitian branch directions. Falls back to the full
    /// product space when no structure is detected.
    pub fn detect(s: &SpectralData) -> Result<Self> {
        let n = s.dim();
        let two_pi_i = c(0.0, 2.0 * std::f64::consts::PI);
        let dirs: Vec<CMatrix> =
            (0..n).map(|j| gamma(&(s.projector(j) * two_pi_i)).map(|g| hermitian_part(&g))).collect::<Result<_>>()?;
        let scale: Vec<f64> = (0..n).map(|j| s.projector(j).norm().max(1.0)).collect();
        let tol = 1e-8;
        let mut inert = Vec::new();
        let mut used = vec![false; n];
        for j in 0..n {
            if dirs[j].norm() <= tol * scale[j] {
                inert.push(j);
                used[j] = true;
            }
        }
        let mut pairs = Vec::new();
        let mut coords = Vec::new();
        for a in 0..n {
            if used[a] {
                continue;
            }
            let partner = ((a + 1)..n).find(|&b| !used[b] && (&dirs[a] + &dirs[b]).norm() <= tol * scale[a].max(scale[b]));
            match partner {
                Some(b) => {
                    used[a] = true;
                    used[b] = true;
                    pairs.push((a, b));
                    coords.push(Coord::Pair(a, b));
                }
                None => {
                    used[a] = true;
                    coords.push(Coord::Free(a));
                }
            }
        }
        Ok(BranchStructure { dim: n, coords, inert, pairs })
    }

    /// One representative per class of equivalent branches, in visiting order.
    pub fn representatives(&self, policy: &BranchPolicy) -> Result<Vec<Vec<i64>>> {
        enumerate_reduced(self.dim, &self.coords, policy)
    }
}

/// Options for one reduced coordinate: assignments to the touched indices with their weight.
fn coord_options(coord: Coord, m_max: i64) -> Vec<(Vec<(usize, i64)>, i64)> {
    match coord {
        Coord::Free(j) => (-m_max..=m_max).map(|v| (vec![(j, v)], v.abs())).collect(),
        Coord::Pair(a, b) => {
            let mut out = Vec::new();
            for k in -2 * m_max..=2 * m_max {
                let mut best: Option<(i64, i64, i64)> = None;
                for ma in -m_max..=m_max {
                    let mb = ma - k;
                    if mb.abs() > m_max {
                        continue;
                    }
                    let cand = (ma.abs() + mb.abs(), ma, mb);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
                if let Some((w, ma, mb)) = best {
                    out.push((vec![(a, ma), (b, mb)], w));
                }
            }
            out
        }
    }
}

fn enumerate_reduced(dim: usize, coords: &[Coord], policy: &BranchPolicy) -> Result<Vec<Vec<i64>>> {
    let m_max = policy.m_max as i64;
    let options: Vec<_> = coords.iter().map(|&co| coord_options(co, m_max)).collect();
    let budget = policy.max_weight.map(|w| w as i64).unwrap_or(i64::MAX);
    let count = count_within(&options, budget);
    if count > MAX_BRANCHES {
        return Err(Error::SearchTooLarge(count));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0i64; dim];
    fn dfs(
        k: usize,
        options: &[Vec<(Vec<(usize, i64)>, i64)>],
        budget: i64,
        current: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if k == options.len() {
            out.push(current.clone());
            return;
        }
        for (assign, w) in &options[k] {
            if *w > budget {
                continue;
            }
            for &(j, v) in assign {
                current[j] = v;
            }
            dfs(k + 1, options, budget - w, current, out);
            for &(j, _) in assign {
                current[j] = 0;
            }
        }
    }
    dfs(0, &options, budget, &mut current, &mut out);
    out.sort_by(|a, b| visit_order(a, b));
    Ok(out)
}

/// Number of option combinations with total weight within `budget`, saturating.
fn count_within(options: &[Vec<(Vec<(usize, i64)>, i64)>], budget: i64) -> u128 {
    let cap = budget.min(10_000) as usize;
    // ways[w] = combinations with exact weight w (weights beyond cap are dropped).
    let mut ways = vec![0u128; cap + 1];
    ways[0] = 1;
    for opts in options {
        let mut next = vec![0u128; cap + 1];
        for (w, &n) in ways.iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (_, ow) in opts {
                let t = w + *ow as usize;
                if t <= cap {
                    next[t] = next[t].saturating_add(n);
                }
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Outcome of a successful branch search.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Fitted generator `L′` in transfer form.
    pub generator: CMatrix,
    /// `‖M − exp(L′)‖_F`.
    pub distance: f64,
    pub branch: Vec<i64>,
    pub residuals: LindbladResiduals,
    pub status: SolveStatus,
}

/// Per-branch result, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct BranchCandidate {
    pub branch: Vec<i64>,
    pub distance: f64,
    pub generator: CMatrix,
    pub status: SolveStatus,
}

/// Principal logarithm of the reconstructed matrix, checked by round trip.
pub fn checked_log(s: &SpectralData) -> Result<CMatrix> {
    let l0 = matrix_log_principal(s)?;
    let r = s.reconstruct();
    let err = (expm(&l0) - &r).norm();
    if !(err <= ROUND_TRIP_TOL * r.norm().max(1.0)) {
        return Err(Error::Numerical(format!("exp/log round trip error {err:e}")));
    }
    Ok(l0)
}

/// Evaluates every branch class and returns the candidates in visiting order.
pub fn branch_candidates(
    m: &CMatrix,
    s: &SpectralData,
    policy: &BranchPolicy,
    settings: &SolverSettings,
) -> Result<Vec<BranchCandidate>> {
    let geom = Geometry::for_target(m)?;
    let l0 = checked_log(s)?;
    let reps = BranchStructure::detect(s)?.representatives(policy)?;
    reps.par_iter()
        .map(|mv| {
            let lm = branch(&l0, s, mv)?;
            let report = solve_closest_with(&geom, &gamma(&lm)?, settings)?;
            let generator = gamma(&report.x_opt)?;
            let distance = (m - expm(&generator)).norm();
            Ok(BranchCandidate { branch: mv.clone(), distance, generator, status: report.status })
        })
        .collect()
}

/// Closest Lindbladian over all branches of `log R`, measured against the raw snapshot
/// `m`. Returns `None` when no branch comes within `eps`.
pub fn best_fit_lindbladian(
    m: &CMatrix,
    s: &SpectralData,
    eps: f64,
    policy: &BranchPolicy,
    settings: &SolverSettings,
) -> Result<Option<FitResult>> {
    let candidates = branch_candidates(m, s, policy, settings)?;
    Ok(select_best(candidates, eps))
}

/// First candidate strictly improving on the running bound, starting from `eps`.
pub fn select_best(candidates: Vec<BranchCandidate>, eps: f64) -> Option<FitResult> {
    let mut xi = eps;
    let mut best: Option<BranchCandidate> = None;
    for cand in candidates {
        if cand.distance < xi {
            xi = cand.distance;
            best = Some(cand);
        }
    }
    best.map(|b| {
        let residuals = is_lindbladian(&b.generator, 0.0).map(|chk| chk.residuals).unwrap_or(LindbladResiduals {
            hermiticity: f64::NAN,
            ccp: f64::NAN,
            trace: f64::NAN,
        });
        FitResult { generator: b.generator, distance: b.distance, branch: b.branch, residuals, status: b.status }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{lindblad_generator, pauli, random_lindblad_generator};
    use crate::linalg::eig_full;
    use crate::rng::{keyed, Domain};
    use proptest::prelude::*;

    #[test]
    fn enumeration_order_and_size() {
        let all = enumerate_branches(4, &BranchPolicy::new(1)).unwrap();
        assert_eq!(all.len(), 81);
        assert_eq!(all[0], vec![0, 0, 0, 0]);
        assert_eq!(all[1], vec![-1, 0, 0, 0]);
        assert_eq!(all[8], vec![1, 0, 0, 0]);
        assert_eq!(all[5], vec![0, 0, 0, 1]);
        assert_eq!(all[9], vec![-1, -1, 0, 0]);
        assert_eq!(*all.last().unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(enumerate_branches(4, &BranchPolicy::new(2)).unwrap().len(), 625);
        assert_eq!(enumerate_branches(16, &BranchPolicy::capped(1, 1)).unwrap().len(), 33);
    }

    #[test]
    fn huge_search_is_refused() {
        assert!(matches!(enumerate_branches(16, &BranchPolicy::new(2)), Err(Error::SearchTooLarge(_))));
    }

    #[test]
    fn pair_representatives_are_minimal() {
        let opts = coord_options(Coord::Pair(0, 1), 1);
        let reps: Vec<_> = opts.iter().map(|(a, w)| (a[0].1, a[1].1, *w)).collect();
        assert_eq!(reps, vec![(-1, 1, 2), (-1, 0, 1), (0, 0, 0), (0, -1, 1), (1, -1, 2)]);
    }

    #[test]
    fn exact_lindbladian_is_recovered() {
        for seed in 0..10 {
            let mut rng = keyed(seed, Domain::Test, 21);
            let l = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2);
            let m = expm(&l.mat);
            let s = eig_full(&m).unwrap();
            let fit = best_fit_lindbladian(&m, &s, 1e-3, &BranchPolicy::new(1), &SolverSettings::default())
                .unwrap()
                .expect("fit");
            assert!(fit.distance < 1e-7, "seed {seed}: {}", fit.distance);
            assert!(fit.residuals.max() < 1e-7);
        }
    }

    #[test]
    fn deduplicated_search_matches_exhaustive_search() {
        // A hermiticity-preserving snapshot with a complex pair and real eigenvalues.
        let h = pauli(3) * c(1.3, 0.0);
        let l = lindblad_generator(&h, &[pauli(1) * c(0.3, 0.0), pauli(3) * c(0.2, 0.0)]).unwrap();
        let mut m = expm(&l.mat);
        m[(0, 3)] += c(0.02, 0.0);
        m[(3, 0)] += c(0.02, 0.0);
        let s = eig_full(&m).unwrap();
        let structure = BranchStructure::detect(&s).unwrap();
        assert!(!structure.inert.is_empty() || !structure.pairs.is_empty());
        let settings = SolverSettings::default();
        let policy = BranchPolicy::new(1);
        let fast = best_fit_lindbladian(&m, &s, 10.0, &policy, &settings).unwrap().unwrap();
        let geom = Geometry::new(2);
        let l0 = checked_log(&s).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for mv in enumerate_branches(4, &policy).unwrap() {
            let x = solve_closest_with(&geom, &gamma(&branch(&l0, &s, &mv).unwrap()).unwrap(), &settings).unwrap();
            let dist = (&m - expm(&gamma(&x.x_opt).unwrap())).norm();
            if dist < best.0 {
                best = (dist, mv);
            }
        }
        assert!((fast.distance - best.0).abs() < 1e-8);
        assert_eq!(fast.branch, best.1);
    }

    #[test]
    fn strict_improvement_keeps_the_earliest_tie() {
        let g = CMatrix::zeros(4, 4);
        let mk = |b: i64, dist: f64| BranchCandidate { branch: vec![b], distance: dist, generator: g.clone(), status: SolveStatus::Optimal };
        let best = select_best(vec![mk(0, 0.5), mk(1, 0.3), mk(2, 0.3), mk(3, 0.4)], 1.0).unwrap();
        assert_eq!(best.branch, vec![1]);
        assert!(select_best(vec![mk(0, 0.5)], 0.5).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn enumeration_is_sorted_and_complete(dim in 1usize..5, m_max in 0u32..3) {
            let all = enumerate_branches(dim, &BranchPolicy::new(m_max)).unwrap();
            prop_assert_eq!(all.len(), (2 * m_max as usize + 1).pow(dim as u32));
            for w in all.windows(2) {
                prop_assert_eq!(visit_order(&w[0], &w[1]), std::cmp::Ordering::Less);
            }
        }
    }
}
