//! Joint fit of one time-independent generator to snapshots `M_c` taken at times `t_c`.
//!
//! Every snapshot contributes the branches of its own logarithm. A joint branch assignment
//! is scored by the summed distance `Σ_c ‖t_c X − L^c‖_F` subject to a `δ`-ball around each
//! target, and accepted only if `‖M_c − exp(t_c L′)‖_F < ε` for every snapshot. When the
//! basis snapshot has clustered eigenvalues, one structured basis is drawn per sample and
//! shared by all snapshots, after checking that the clustered subspaces agree across the
//! series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{is_lindbladian, LindbladResiduals};
use crate::error::{Error, Result};
use crate::fit::{checked_log, BranchPolicy, BranchStructure, MAX_BRANCHES};
use crate::linalg::{branch, c, eig_full, expm, gamma, CMatrix, SpectralData};
use crate::mu::DeltaSweep;
use crate::preprocess::{
    cluster_bases, detect_clusters, perturb_to_nd2, BasisSampler, ClusterKind, ClusterPartition, PreprocessConfig,
};
use crate::solver::{solve_multi, MultiTarget, SolveStatus, SolverSettings};

#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    snapshots: Vec<CMatrix>,
    times: Vec<f64>,
}

impl SnapshotSeries {
    /// Validates equal dimensions and strictly increasing positive times. A single
    /// snapshot is accepted and reduces to the single-snapshot fit.
    pub fn new(snapshots: Vec<CMatrix>, times: Vec<f64>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidInput("empty snapshot series".into()));
        }
        if snapshots.len() != times.len() {
            return Err(Error::InvalidInput(format!("{} snapshots but {} times", snapshots.len(), times.len())));
        }
        let n = snapshots[0].nrows();
        crate::linalg::sqrt_dim(n)?;
        for m in &snapshots {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
            }
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::OutOfRange(format!("times must be positive and strictly increasing: {times:?}")));
        }
        Ok(SnapshotSeries { snapshots, times })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[CMatrix] {
        &self.snapshots
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// Which joint branch assignments are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointBranches {
    /// All snapshots on the principal branch, plus every single-snapshot deviation.
    #[default]
    OneAtATime,
    /// Full product of the per-snapshot branch sets.
    Product,
}

/// Tolerances on the summed projector mismatch of clustered subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityCheck {
    /// Bound for conjugate complex cluster pairs.
    pub complex_tol: f64,
    /// Bound for real clusters.
    pub real_tol: f64,
}

impl CompatibilityCheck {
    /// `0.5 · q · n · error` for a cluster of size `n` in a series of `q` snapshots.
    pub fn scaled(q: usize, cluster_size: usize, error: f64) -> Self {
        let tol = 0.5 * q as f64 * cluster_size as f64 * error;
        CompatibilityCheck { complex_tol: tol, real_tol: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    Complex,
    Real,
}

/// Projectors of one clustered subspace: `parts` holds one entry per conjugate half
/// (two for complex pairs, one for real clusters).
#[derive(Debug, Clone)]
pub struct SubspaceGroup {
    pub kind: SubspaceKind,
    pub size: usize,
    /// `snapshot[c][part]`.
    pub snapshot: Vec<Vec<CMatrix>>,
    /// Candidate basis projector per part.
    pub candidate: Vec<CMatrix>,
}

impl SubspaceGroup {
    /// `Σ_c Σ_part ‖Π_c − Π‖_F`.
    pub fn defect(&self) -> f64 {
        self.snapshot
            .iter()
            .map(|parts| parts.iter().zip(&self.candidate).map(|(p, q)| (p - q).norm()).sum::<f64>())
            .sum()
    }
}

/// Whether the clustered subspaces of every snapshot match the candidate basis.
pub fn subspace_compatibility(group: &SubspaceGroup, check: &CompatibilityCheck) -> bool {
    let tol = match group.kind {
        SubspaceKind::Complex => check.complex_tol,
        SubspaceKind::Real => check.real_tol,
    };
    group.defect() <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiConfig {
    pub epsilon: f64,
    pub policy: BranchPolicy,
    pub joint: JointBranches,
    pub preprocess: PreprocessConfig,
    pub solver: SolverSettings,
    /// Snapshot whose eigenbasis is repaired; defaults to the best-conditioned one.
    pub basis_snapshot: Option<usize>,
    /// Defaults to [`CompatibilityCheck::scaled`] with `ε` as the error estimate.
    pub compatibility: Option<CompatibilityCheck>,
}

impl MultiConfig {
    pub fn new(epsilon: f64, samples: u64, seed: u64) -> Self {
        MultiConfig {
            epsilon,
            policy: BranchPolicy::default(),
            joint: JointBranches::default(),
            preprocess: PreprocessConfig::new(epsilon, samples, seed),
            solver: SolverSettings::default(),
            basis_snapshot: None,
            compatibility: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiFitResult {
    pub generator: CMatrix,
    /// `‖M_c − exp(t_c L′)‖_F` per snapshot.
    pub distances: Vec<f64>,
    pub total_distance: f64,
    /// Branch vector per snapshot.
    pub branches: Vec<Vec<i64>>,
    /// Ball radius, computed from `ε` and the principal logarithm of the first snapshot.
    pub delta: f64,
    pub residuals: LindbladResiduals,
    pub status: SolveStatus,
    pub sample: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct MultiAnalysis {
    pub result: Option<MultiFitResult>,
    pub basis_snapshot: usize,
    pub partition: Option<ClusterPartition>,
    /// Projector mismatch per clustered subspace.
    pub compatibility_defects: Vec<f64>,
    pub compatible: bool,
}

struct Candidate {
    generator: CMatrix,
    distances: Vec<f64>,
    total: f64,
    branches: Vec<Vec<i64>>,
    status: SolveStatus,
}

fn condition(s: &SpectralData) -> f64 {
    let sv = s.right.singular_values();
    sv.max() / sv.min()
}

/// Joint branch assignments, in deterministic order.
fn joint_assignments(reps: &[Vec<Vec<i64>>], mode: JointBranches) -> Result<Vec<Vec<usize>>> {
    let q = reps.len();
    match mode {
        JointBranches::OneAtATime => {
            // Representatives are sorted by weight, so index 0 is the zero branch.
            let mut out = vec![vec![0; q]];
            for (c, r) in reps.iter().enumerate() {
                for k in 1..r.len() {
                    let mut a = vec![0; q];
                    a[c] = k;
                    out.push(a);
                }
            }
            Ok(out)
        }
        JointBranches::Product => {
            let total = reps.iter().fold(1u128, |acc, r| acc.saturating_mul(r.len() as u128));
            if total > MAX_BRANCHES {
                return Err(Error::SearchTooLarge(total));
            }
            let mut out: Vec<Vec<usize>> = vec![Vec::new()];
            for r in reps {
                out = out.into_iter().flat_map(|a| (0..r.len()).map(move |k| [a.clone(), vec![k]].concat())).collect();
            }
            Ok(out)
        }
    }
}

fn evaluate(
    series: &SnapshotSeries,
    spectra: &[SpectralData],
    delta: f64,
    cfg: &MultiConfig,
) -> Result<Vec<Candidate>> {
    let logs: Vec<CMatrix> = spectra.iter().map(checked_log).collect::<Result<_>>()?;
    let reps: Vec<Vec<Vec<i64>>> =
        spectra.iter().map(|s| BranchStructure::detect(s)?.representatives(&cfg.policy)).collect::<Result<_>>()?;
    let assignments = joint_assignments(&reps, cfg.joint)?;
    assignments
        .par_iter()
        .map(|a| {
            let branches: Vec<Vec<i64>> = a.iter().zip(&reps).map(|(&k, r)| r[k].clone()).collect();
            let targets: Vec<MultiTarget> = (0..series.len())
                .map(|c| {
                    let lm = branch(&logs[c], &spectra[c], &branches[c])?;
                    Ok(MultiTarget { time: series.times[c], target: gamma(&lm)? })
                })
                .collect::<Result<_>>()?;
            let report = solve_multi(&targets, delta, &cfg.solver)?;
            if report.status == SolveStatus::Infeasible {
                return Ok(None);
            }
            let generator = gamma(&report.x_opt)?;
            let distances: Vec<f64> = series
                .snapshots
                .iter()
                .zip(&series.times)
                .map(|(m, &t)| (m - expm(&(&generator * c(t, 0.0)))).norm())
                .collect();
            let total = distances.iter().sum();
            Ok(Some(Candidate { generator, distances, total, branches, status: report.status }))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Matches every cluster of the basis snapshot to a cluster of equal kind and size in each
/// snapshot, by smallest projector mismatch.
fn matched_projectors(
    spectra: &[SpectralData],
    reference: usize,
    partition: &ClusterPartition,
    precision: f64,
) -> Result<Vec<Vec<CMatrix>>> {
    let cluster_projector =
        |s: &SpectralData, idx: &[usize]| idx.iter().fold(CMatrix::zeros(s.dim(), s.dim()), |acc, &j| acc + s.projector(j));
    let reference_proj: Vec<CMatrix> =
        partition.clusters.iter().map(|cl| cluster_projector(&spectra[reference], &cl.indices)).collect();
    let mut out = Vec::with_capacity(spectra.len());
    for (ci, s) in spectra.iter().enumerate() {
        let own = detect_clusters(&s.values, precision);
        if own.clusters.len() != partition.clusters.len() {
            return Err(Error::InconsistentClusters(format!(
                "snapshot {ci} has {} clusters, basis snapshot has {}",
                own.clusters.len(),
                partition.clusters.len()
            )));
        }
        let own_proj: Vec<CMatrix> = own.clusters.iter().map(|cl| cluster_projector(s, &cl.indices)).collect();
        let mut used = vec![false; own.clusters.len()];
        let mut per = Vec::with_capacity(partition.clusters.len());
        for (id, cl) in partition.clusters.iter().enumerate() {
            let best = own
                .clusters
                .iter()
                .enumerate()
                .filter(|(k, o)| !used[*k] && o.kind == cl.kind && o.indices.len() == cl.indices.len())
                .map(|(k, _)| (k, (&own_proj[k] - &reference_proj[id]).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let Some((k, _)) = best else {
                return Err(Error::InconsistentClusters(format!(
                    "snapshot {ci} lacks a {:?} cluster of size {}",
                    cl.kind,
                    cl.indices.len()
                )));
            };
            used[k] = true;
            per.push(own_proj[k].clone());
        }
        out.push(per);
    }
    Ok(out)
}

/// Groups the matched projectors into conjugate pairs and real clusters.
fn subspace_groups(partition: &ClusterPartition, matched: &[Vec<CMatrix>], reference: usize) -> Vec<SubspaceGroup> {
    let mut groups = Vec::new();
    for (id, cl) in partition.clusters.iter().enumerate() {
        let parts: Vec<usize> = match cl.kind {
            ClusterKind::Complex => match partition.conjugate_pairs.iter().find(|(a, _)| *a == id) {
                Some(&(a, b)) => vec![a, b],
                None => continue,
            },
            _ => vec![id],
        };
        let kind = if cl.kind == ClusterKind::Complex { SubspaceKind::Complex } else { SubspaceKind::Real };
        groups.push(SubspaceGroup {
            kind,
            size: cl.indices.len(),
            snapshot: matched.iter().map(|per| parts.iter().map(|&p| per[p].clone()).collect()).collect(),
            candidate: parts.iter().map(|&p| matched[reference][p].clone()).collect(),
        });
    }
    groups
}

/// Spectral data of `M_c` in the shared basis `S`: eigenvalues read off `diag(S⁻¹ M_c S)`.
fn in_shared_basis(m: &CMatrix, shared: &SpectralData) -> Result<SpectralData> {
    let diag = (&shared.left * m * &shared.right).diagonal();
    SpectralData::from_basis(diag.iter().copied().collect(), shared.right.clone())
}

/// Best joint generator for `series`, or `None` when no assignment passes the `ε` gate on
/// every snapshot.
pub fn best_fit_multi(series: &SnapshotSeries, cfg: &MultiConfig) -> Result<MultiAnalysis> {
    let eps = cfg.epsilon;
    if !(eps > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon = {eps}")));
    }
    let q = series.len();
    let spectra: Vec<SpectralData> = series
        .snapshots
        .iter()
        .map(|m| eig_full(&perturb_to_nd2(m, cfg.preprocess.perturb_budget)?))
        .collect::<Result<_>>()?;
    let l0 = checked_log(&spectra[0])?;
    let delta = DeltaSweep::new(eps, l0.norm(), 1.0)?.delta_min;

    let reference = match cfg.basis_snapshot {
        Some(r) if r >= q => return Err(Error::OutOfRange(format!("basis snapshot {r} of {q}"))),
        Some(r) => r,
        None => (0..q).min_by(|&a, &b| condition(&spectra[a]).total_cmp(&condition(&spectra[b]))).unwrap_or(0),
    };
    let partition = detect_clusters(&spectra[reference].values, cfg.preprocess.precision);

    let reduce = |sets: Vec<(Option<u64>, Vec<Candidate>)>| {
        let mut xi = q as f64 * eps;
        let mut best: Option<(Candidate, Option<u64>)> = None;
        for (sample, cands) in sets {
            for cand in cands {
                if cand.total < xi && cand.distances.iter().all(|&d| d < eps) {
                    xi = cand.total;
                    best = Some((cand, sample));
                }
            }
        }
        best.map(|(b, sample)| {
            let residuals = is_lindbladian(&b.generator, 0.0).map(|chk| chk.residuals).unwrap_or(LindbladResiduals {
                hermiticity: f64::NAN,
                ccp: f64::NAN,
                trace: f64::NAN,
            });
            MultiFitResult {
                generator: b.generator,
                distances: b.distances,
                total_distance: b.total,
                branches: b.branches,
                delta,
                residuals,
                status: b.status,
                sample,
            }
        })
    };

    if partition.is_empty() {
        let cands = evaluate(series, &spectra, delta, cfg)?;
        return Ok(MultiAnalysis {
            result: reduce(vec![(None, cands)]),
            basis_snapshot: reference,
            partition: None,
            compatibility_defects: Vec::new(),
            compatible: true,
        });
    }

    let matched = matched_projectors(&spectra, reference, &partition, cfg.preprocess.precision)?;
    let groups = subspace_groups(&partition, &matched, reference);
    let defects: Vec<f64> = groups.iter().map(SubspaceGroup::defect).collect();
    let compatible = groups.iter().all(|g| {
        let check = cfg.compatibility.unwrap_or_else(|| CompatibilityCheck::scaled(q, g.size, eps));
        subspace_compatibility(g, &check)
    });
    if !compatible {
        return Ok(MultiAnalysis {
            result: None,
            basis_snapshot: reference,
            partition: Some(partition),
            compatibility_defects: defects,
            compatible,
        });
    }
    let bases = cluster_bases(&spectra[reference], &partition, cfg.preprocess.structure_tol)?;
    let sampler = BasisSampler::new(&spectra[reference], bases, cfg.preprocess.seed);
    let sets = (0..cfg.preprocess.samples.max(1))
        .map(|k| {
            let shared = sampler.sample(k)?;
            let per: Vec<SpectralData> =
                series.snapshots.iter().map(|m| in_shared_basis(m, &shared)).collect::<Result<_>>()?;
            Ok((Some(k), evaluate(series, &per, delta, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiAnalysis {
        result: reduce(sets),
        basis_snapshot: reference,
        partition: Some(partition),
        compatibility_defects: defects,
        compatible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{pauli, random_lindblad_generator, unitary_transfer};
    use crate::fit::best_fit_lindbladian;
    use crate::rng::{keyed, Domain};

    fn trajectory(seed: u64, times: &[f64]) -> (CMatrix, SnapshotSeries) {
        let mut rng = keyed(seed, Domain::Test, 70);
        let l = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2).mat;
        let ms = times.iter().map(|&t| expm(&(&l * c(t, 0.0)))).collect();
        (l, SnapshotSeries::new(ms, times.to_vec()).unwrap())
    }

    #[test]
    fn series_validation() {
        let m = CMatrix::identity(4, 4);
        assert!(SnapshotSeries::new(vec![m.clone(), m.clone()], vec![1.0, 1.0]).is_err());
        assert!(SnapshotSeries::new(vec![m.clone()], vec![1.0, 2.0]).is_err());
        assert!(SnapshotSeries::new(vec![m.clone(), CMatrix::identity(16, 16)], vec![1.0, 2.0]).is_err());
        assert!(SnapshotSeries::new(vec![m], vec![0.0]).is_err());
    }

    #[test]
    fn exact_trajectory_is_recovered() {
        for seed in 0..3 {
            let (l, series) = trajectory(seed, &[0.5, 1.0, 1.5]);
            let r = best_fit_multi(&series, &MultiConfig::new(1e-3, 1, 0)).unwrap().result.unwrap();
            assert!((&r.generator - &l).norm() <= 1e-5, "seed {seed}: {}", (&r.generator - &l).norm());
            assert!(r.total_distance <= 1e-5);
        }
    }

    #[test]
    fn inconsistent_series_is_rejected() {
        let (_, a) = trajectory(0, &[1.0]);
        let (_, b) = trajectory(1, &[2.0]);
        let series = SnapshotSeries::new(vec![a.snapshots()[0].clone(), b.snapshots()[0].clone()], vec![1.0, 2.0]).unwrap();
        assert!(best_fit_multi(&series, &MultiConfig::new(1e-2, 1, 0)).unwrap().result.is_none());
    }

    #[test]
    fn single_snapshot_matches_single_fit() {
        let mut rng = keyed(9, Domain::Test, 71);
        let l = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2).mat;
        let noise = crate::rng::complex_gaussian_matrix(&mut rng, 4, 4) * c(1e-3, 0.0);
        let m = expm(&l) + noise;
        let series = SnapshotSeries::new(vec![m.clone()], vec![1.0]).unwrap();
        let multi = best_fit_multi(&series, &MultiConfig::new(0.1, 1, 0)).unwrap().result.unwrap();
        let single = best_fit_lindbladian(&m, &eig_full(&m).unwrap(), 0.1, &BranchPolicy::default(), &SolverSettings::default())
            .unwrap()
            .unwrap();
        assert!((multi.total_distance - single.distance).abs() <= 1e-6);
        assert!((&multi.generator - &single.generator).norm() <= 1e-5);
    }

    #[test]
    fn product_mode_contains_one_at_a_time() {
        let reps = vec![vec![vec![0], vec![1]], vec![vec![0], vec![1], vec![-1]]];
        let one = joint_assignments(&reps, JointBranches::OneAtATime).unwrap();
        let all = joint_assignments(&reps, JointBranches::Product).unwrap();
        assert_eq!(one, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![0, 2]]);
        assert_eq!(all.len(), 6);
        assert!(one.iter().all(|a| all.contains(a)));
    }

    #[test]
    fn identical_snapshots_have_zero_defect() {
        let x = unitary_transfer(&pauli(1)).unwrap().mat;
        let series = SnapshotSeries::new(vec![x.clone(), x.clone()], vec![1.0, 2.0]).unwrap();
        let mut cfg = MultiConfig::new(1e-2, 1, 0);
        cfg.preprocess.precision = 1e-3;
        let a = best_fit_multi(&series, &cfg).unwrap();
        assert!(a.partition.is_some());
        assert!(a.compatibility_defects.iter().all(|&d| d <= 1e-8));
        assert!(a.compatible);
    }

    #[test]
    fn rotated_subspaces_grow_the_defect() {
        let mut last = -1.0;
        for k in 0..6 {
            let theta = 0.1 * k as f64;
            let rot = |a: f64| {
                let mut u = CMatrix::identity(4, 4);
                u[(0, 0)] = c(a.cos(), 0.0);
                u[(0, 2)] = c(-a.sin(), 0.0);
                u[(2, 0)] = c(a.sin(), 0.0);
                u[(2, 2)] = c(a.cos(), 0.0);
                u
            };
            let proj = |u: &CMatrix| {
                let cols = u.columns(0, 2).into_owned();
                &cols * cols.adjoint()
            };
            let group = SubspaceGroup {
                kind: SubspaceKind::Real,
                size: 2,
                snapshot: vec![vec![proj(&rot(0.0))], vec![proj(&rot(theta))]],
                candidate: vec![proj(&rot(0.0))],
            };
            let d = group.defect();
            assert!(d > last || (k == 0 && d == 0.0));
            assert_eq!(subspace_compatibility(&group, &CompatibilityCheck { complex_tol: 0.3, real_tol: 0.3 }), d <= 0.3);
            last = d;
        }
        assert!(last > 0.3);
    }

    #[test]
    fn mismatched_cluster_sizes_are_reported() {
        let x = unitary_transfer(&pauli(1)).unwrap().mat;
        let mut rng = keyed(3, Domain::Test, 72);
        let l = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2).mat;
        let series = SnapshotSeries::new(vec![x, expm(&l)], vec![1.0, 2.0]).unwrap();
        let mut cfg = MultiConfig::new(1e-2, 1, 0);
        cfg.preprocess.precision = 1e-3;
        cfg.basis_snapshot = Some(0);
        assert!(matches!(best_fit_multi(&series, &cfg), Err(Error::InconsistentClusters(_))));
    }
}
