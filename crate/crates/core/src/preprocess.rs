//! Repair of eigenbases that stem from perturbed degenerate eigenvalues.
//!
//! A Lindbladian's eigenvectors obey a hermiticity structure: a complex eigenvalue `λ` has
//! an eigenspace whose adjoint is the eigenspace of `λ*`, and a real eigenvalue admits a
//! basis of self-adjoint vectors and hermitian-related pairs `(v, v†)`. Noise splits a
//! degenerate eigenvalue into a cluster whose individual eigenvectors are arbitrary, and
//! the logarithm built from them can be far from any Lindbladian. The pipeline here
//!
//! 1. perturbs matrices with repeated eigenvalues into a simple spectrum,
//! 2. groups close eigenvalues into clusters,
//! 3. finds a structured description of each cluster's invariant subspace, and
//! 4. draws random structured bases `S`, giving repaired matrices `R = S Λ S⁻¹`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eig_full, flip, gamma, span_projector, vec_adjoint, CMatrix, CVector, SpectralData, C64};
use crate::rng::{gaussian, keyed, Domain};

/// Tolerance below which a cluster's structure counts as exact.
pub const EXACT_STRUCTURE_TOL: f64 = 1e-7;

/// Largest accepted condition number of a sampled basis.
const MAX_BASIS_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKind {
    Positive,
    Negative,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the canonical eigenvalue order, ascending.
    pub indices: Vec<usize>,
    pub kind: ClusterKind,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub clusters: Vec<Cluster>,
    /// `(upper, lower)` cluster ids of complex clusters with conjugate centers.
    pub conjugate_pairs: Vec<(usize, usize)>,
    /// Complex clusters without a conjugate partner.
    pub unpaired: Vec<usize>,
    /// All eigenvalues form a single positive cluster.
    pub identity: bool,
    pub precision: f64,
}

impl ClusterPartition {
    fn sets(&self, kind: ClusterKind) -> Vec<Vec<usize>> {
        self.clusters.iter().filter(|cl| cl.kind == kind).map(|cl| cl.indices.clone()).collect()
    }

    pub fn positive_sets(&self) -> Vec<Vec<usize>> {
        self.sets(ClusterKind::Positive)
    }

    pub fn negative_sets(&self) -> Vec<Vec<usize>> {
        self.sets(ClusterKind::Negative)
    }

    pub fn complex_sets(&self) -> Vec<Vec<usize>> {
        self.sets(ClusterKind::Complex)
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Groups eigenvalues into clusters: the transitive closure of `|λ_i − λ_j| < p`, keeping
/// sets of two or more.
pub fn detect_clusters(values: &[C64], p: f64) -> ClusterPartition {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < p {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = root(&mut parent, i);
        groups[r].push(i);
    }
    let clusters: Vec<Cluster> = groups
        .into_iter()
        .filter(|g| g.len() >= 2)
        .map(|indices| {
            let center = indices.iter().map(|&i| values[i]).sum::<C64>() / c(indices.len() as f64, 0.0);
            let kind = if center.im.abs() >= p {
                ClusterKind::Complex
            } else if center.re > 0.0 {
                ClusterKind::Positive
            } else {
                ClusterKind::Negative
            };
            Cluster { indices, kind, center: [center.re, center.im] }
        })
        .collect();
    let mut conjugate_pairs = Vec::new();
    let mut unpaired = Vec::new();
    let mut taken = vec![false; clusters.len()];
    for (a, ca) in clusters.iter().enumerate() {
        if ca.kind != ClusterKind::Complex || ca.center[1] < 0.0 {
            continue;
        }
        let partner = clusters
            .iter()
            .enumerate()
            .filter(|(b, cb)| {
                !taken[*b]
                    && cb.kind == ClusterKind::Complex
                    && cb.center[1] < 0.0
                    && cb.indices.len() == ca.indices.len()
                    && (C64::new(cb.center[0], cb.center[1]) - C64::new(ca.center[0], -ca.center[1])).norm() < p
            })
            .min_by(|x, y| {
                let dx = (C64::new(x.1.center[0], x.1.center[1]) - C64::new(ca.center[0], -ca.center[1])).norm();
                let dy = (C64::new(y.1.center[0], y.1.center[1]) - C64::new(ca.center[0], -ca.center[1])).norm();
                dx.total_cmp(&dy)
            })
            .map(|(b, _)| b);
        match partner {
            Some(b) => {
                taken[a] = true;
                taken[b] = true;
                conjugate_pairs.push((a, b));
            }
            None => unpaired.push(a),
        }
    }
    for (b, cb) in clusters.iter().enumerate() {
        if cb.kind == ClusterKind::Complex && cb.center[1] < 0.0 && !taken[b] {
            unpaired.push(b);
        }
    }
    unpaired.sort_unstable();
    let identity = clusters.len() == 1 && clusters[0].kind == ClusterKind::Positive && clusters[0].indices.len() == n;
    ClusterPartition { clusters, conjugate_pairs, unpaired, identity, precision: p }
}

/// Structured description of a cluster's invariant subspace.
#[derive(Debug, Clone)]
pub enum HpBasis {
    /// Real cluster. The columns of `frame` are self-adjoint and orthonormal; their real
    /// combinations are self-adjoint and `x + iy` with real `x, y` in the frame's span
    /// pairs with `x − iy`.
    SelfAdjointFrame { indices: Vec<usize>, frame: CMatrix, negative: bool, residual: f64 },
    /// Complex cluster pair. Vectors in the span of `vectors` have adjoints in the span of
    /// the partner cluster; `partner[i]` is matched to `lead[i]` by conjugate eigenvalue.
    Conjugate { lead: Vec<usize>, partner: Vec<usize>, vectors: CMatrix, residual: f64 },
}

impl HpBasis {
    /// Distance between the cluster's span and the structured span.
    pub fn residual(&self) -> f64 {
        match self {
            HpBasis::SelfAdjointFrame { residual, .. } | HpBasis::Conjugate { residual, .. } => *residual,
        }
    }
}

fn columns(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_columns(&idx.iter().map(|&i| m.column(i).into_owned()).collect::<Vec<_>>())
}

fn adjoint_columns(m: &CMatrix) -> Result<CMatrix> {
    let cols = (0..m.ncols()).map(|j| vec_adjoint(&m.column(j).into_owned())).collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_columns(&cols))
}

/// Basis of the lead cluster whose adjoints span the partner cluster. Returns `None` when
/// the two spans are further than `tol` apart (projector distance).
pub fn conjugate_basis(s: &SpectralData, set_a: &[usize], set_b: &[usize], tol: f64) -> Result<Option<HpBasis>> {
    if set_a.len() != set_b.len() {
        return Ok(None);
    }
    let wa = columns(&s.right, set_a);
    let wb = columns(&s.right, set_b);
    let residual = (span_projector(&adjoint_columns(&wa)?, 1e-10) - span_projector(&wb, 1e-10)).norm();
    if !(residual <= tol) {
        return Ok(None);
    }
    // Match each lead eigenvalue with the partner eigenvalue closest to its conjugate.
    let mut free: Vec<usize> = set_b.to_vec();
    let mut partner = Vec::with_capacity(set_a.len());
    for &a in set_a {
        let target = s.values[a].conj();
        let (k, _) = free
            .iter()
            .enumerate()
            .min_by(|x, y| (s.values[*x.1] - target).norm().total_cmp(&(s.values[*y.1] - target).norm()))
            .expect("sizes match");
        partner.push(free.remove(k));
    }
    Ok(Some(HpBasis::Conjugate { lead: set_a.to_vec(), partner, vectors: wa, residual }))
}

/// Self-adjoint frame of a real cluster's invariant subspace. Returns `None` when no
/// self-adjoint frame spans the cluster to within `tol`.
pub fn real_positive_basis(s: &SpectralData, set_a: &[usize], tol: f64) -> Result<Option<HpBasis>> {
    let n = set_a.len();
    let w = columns(&s.right, set_a);
    let dim = w.nrows();
    // Self-adjoint parts of w_j and i·w_j span the self-adjoint vectors of a span closed
    // under the adjoint; the dominant real singular subspace is the best frame otherwise.
    let mut real = DMatrix::<f64>::zeros(2 * dim, 2 * n);
    for j in 0..n {
        let wj = w.column(j).into_owned();
        for (k, v) in [wj.clone(), &wj * c(0.0, 1.0)].into_iter().enumerate() {
            let sa = (&v + vec_adjoint(&v)?) * c(0.5, 0.0);
            for r in 0..dim {
                real[(r, 2 * j + k)] = sa[r].re;
                real[(dim + r, 2 * j + k)] = sa[r].im;
            }
        }
    }
    let svd = real.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("svd failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if svd.singular_values[order[n - 1]] <= 1e-12 {
        return Ok(None);
    }
    let frame = CMatrix::from_fn(dim, n, |r, k| c(u[(r, order[k])], u[(dim + r, order[k])]));
    let residual = (span_projector(&frame, 1e-10) - span_projector(&w, 1e-10)).norm();
    if !(residual <= tol) {
        return Ok(None);
    }
    Ok(Some(HpBasis::SelfAdjointFrame { indices: set_a.to_vec(), frame, negative: false, residual }))
}

/// One random structured eigenbasis.
#[derive(Debug, Clone)]
pub struct BasisSample {
    pub basis: CMatrix,
    /// `true` for columns drawn at random, `false` for columns obtained by conjugation.
    pub conj_test: Vec<bool>,
    /// `(lead, partner)` column pairs with `partner = lead†`.
    pub pairs: Vec<(usize, usize)>,
    /// Columns drawn as self-adjoint vectors.
    pub self_adjoint: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomBasisConfig {
    pub samples: u64,
    pub seed: u64,
}

/// Draws random structured bases for a fixed spectral decomposition.
#[derive(Debug, Clone)]
pub struct BasisSampler {
    values: Vec<C64>,
    right: CMatrix,
    bases: Vec<HpBasis>,
    seed: u64,
}

impl BasisSampler {
    pub fn new(s: &SpectralData, bases: Vec<HpBasis>, seed: u64) -> Self {
        BasisSampler { values: s.values.clone(), right: s.right.clone(), bases, seed }
    }

    pub fn bases(&self) -> &[HpBasis] {
        &self.bases
    }

    /// Basis number `index`; depends only on the seed and the index.
    pub fn basis(&self, index: u64) -> Result<BasisSample> {
        let mut rng = keyed(self.seed, Domain::Basis, index);
        let n = self.right.nrows();
        for _ in 0..100 {
            let mut basis = self.right.clone();
            let mut conj_test = vec![true; n];
            let mut pairs = Vec::new();
            let mut self_adjoint = Vec::new();
            for hp in &self.bases {
                match hp {
                    HpBasis::SelfAdjointFrame { indices, frame, negative, .. } => {
                        let k = indices.len();
                        let q = if *negative { k / 2 } else { (rng.random_range(0..=(k / 2) as u64)) as usize };
                        let real_draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                            CVector::from_iterator(frame.ncols(), (0..frame.ncols()).map(|_| c(gaussian(rng), 0.0)))
                        };
                        for p in 0..q {
                            let (lead, partner) = (indices[2 * p], indices[2 * p + 1]);
                            let x = real_draw(&mut rng);
                            let y = real_draw(&mut rng);
                            let v = normalized(frame * (x + y * c(0.0, 1.0)));
                            basis.set_column(partner, &vec_adjoint(&v)?);
                            basis.set_column(lead, &v);
                            conj_test[partner] = false;
                            pairs.push((lead, partner));
                        }
                        for &col in &indices[2 * q..] {
                            let v = normalized(frame * real_draw(&mut rng));
                            basis.set_column(col, &v);
                            self_adjoint.push(col);
                        }
                    }
                    HpBasis::Conjugate { lead, partner, vectors, .. } => {
                        for (&a, &b) in lead.iter().zip(partner) {
                            let kappa = CVector::from_iterator(
                                vectors.ncols(),
                                (0..vectors.ncols()).map(|_| c(gaussian(&mut rng), gaussian(&mut rng))),
                            );
                            let v = normalized(vectors * kappa);
                            basis.set_column(b, &vec_adjoint(&v)?);
                            basis.set_column(a, &v);
                            conj_test[b] = false;
                            pairs.push((a, b));
                        }
                    }
                }
            }
            let sv = basis.singular_values();
            let (hi, lo) = (sv.max(), sv.min());
            if lo > 0.0 && hi / lo <= MAX_BASIS_CONDITION {
                return Ok(BasisSample { basis, conj_test, pairs, self_adjoint });
            }
        }
        Err(Error::Numerical(format!("no well-conditioned basis for sample {index}")))
    }

    /// Spectral data of the repaired matrix `R = S Λ S⁻¹` for basis number `index`.
    pub fn sample(&self, index: u64) -> Result<SpectralData> {
        SpectralData::from_basis(self.values.clone(), self.basis(index)?.basis)
    }
}

fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    v / c(n, 0.0)
}

/// Builds the structured bases of every cluster. Real clusters use a self-adjoint frame;
/// negative clusters must have even size since they can only hold hermitian-related pairs.
pub fn cluster_bases(s: &SpectralData, partition: &ClusterPartition, tol: f64) -> Result<Vec<HpBasis>> {
    if let Some(&u) = partition.unpaired.first() {
        return Err(Error::BasisUnavailable(u));
    }
    let mut out = Vec::new();
    for (id, cl) in partition.clusters.iter().enumerate() {
        match cl.kind {
            ClusterKind::Positive | ClusterKind::Negative => {
                let negative = cl.kind == ClusterKind::Negative;
                if negative && cl.indices.len() % 2 == 1 {
                    return Err(Error::BasisUnavailable(id));
                }
                match real_positive_basis(s, &cl.indices, tol)? {
                    Some(HpBasis::SelfAdjointFrame { indices, frame, residual, .. }) => {
                        out.push(HpBasis::SelfAdjointFrame { indices, frame, negative, residual })
                    }
                    _ => return Err(Error::BasisUnavailable(id)),
                }
            }
            ClusterKind::Complex => {
                let Some(&(a, b)) = partition.conjugate_pairs.iter().find(|(a, _)| *a == id) else {
                    continue;
                };
                match conjugate_basis(s, &partition.clusters[a].indices, &partition.clusters[b].indices, tol)? {
                    Some(hp) => out.push(hp),
                    None => return Err(Error::BasisUnavailable(id)),
                }
            }
        }
    }
    Ok(out)
}

/// Hermiticity-preserving matrix `D + F D* F` with a simple spectrum.
pub fn nd2_direction(n: usize) -> Result<CMatrix> {
    let d = crate::linalg::sqrt_dim(n)?;
    let scale = 1.0 / (n * n) as f64;
    // Quadratic real parts avoid the linear coincidences that leave unitary transfer
    // matrices degenerate to first order.
    let dmat = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        (0..n).map(|i| c(((i + 1) * (i + 1)) as f64 + std::f64::consts::SQRT_2 * i as f64, (i * i) as f64 * scale)),
    ));
    let f = flip(d);
    Ok(&dmat + &f * dmat.map(|z| z.conj()) * &f)
}

/// Moves `m` towards [`nd2_direction`] until its spectrum is simple, staying within
/// `budget` in Frobenius norm. Matrices with a simple spectrum are returned unchanged.
pub fn perturb_to_nd2(m: &CMatrix, budget: f64) -> Result<CMatrix> {
    match eig_full(m) {
        Ok(_) => return Ok(m.clone()),
        Err(Error::DegenerateSpectrum { .. }) => {}
        Err(e) => return Err(e),
    }
    if !(budget > 0.0) {
        return Err(Error::OutOfRange(format!("perturbation budget {budget}")));
    }
    let e = nd2_direction(m.nrows())?;
    let mut alpha = 0.9 * budget / (&e - m).norm();
    for _ in 0..60 {
        let cand = m * c(1.0 - alpha, 0.0) + &e * c(alpha, 0.0);
        match eig_full(&cand) {
            Ok(_) => return Ok(cand),
            Err(Error::DegenerateSpectrum { .. }) => alpha *= 0.5,
            Err(err) => return Err(err),
        }
    }
    Err(Error::Numerical("no simple spectrum found within the perturbation budget".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Cluster precision `p`.
    pub precision: f64,
    pub samples: u64,
    pub seed: u64,
    /// Largest Frobenius move allowed when forcing a simple spectrum.
    pub perturb_budget: f64,
    /// Largest span mismatch accepted for a nearly structured cluster.
    pub structure_tol: f64,
}

impl PreprocessConfig {
    /// Defaults for error budget `eps`: precision 0.1, span mismatch up to `eps`.
    pub fn new(eps: f64, samples: u64, seed: u64) -> Self {
        PreprocessConfig {
            precision: 0.1,
            samples,
            seed,
            perturb_budget: 1e-6,
            structure_tol: eps.clamp(EXACT_STRUCTURE_TOL, 0.5),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Preprocessed {
    /// All eigenvalues cluster around one positive value.
    Identity { spectral: SpectralData, partition: ClusterPartition },
    /// No clusters: the (possibly perturbed) eigenbasis is used as is.
    Passthrough { spectral: SpectralData },
    /// Random structured bases are to be drawn from `sampler`.
    Samples { spectral: SpectralData, partition: ClusterPartition, sampler: BasisSampler },
    /// Some cluster has no structured basis; the raw eigenbasis is used instead.
    Fallback { spectral: SpectralData, partition: ClusterPartition, reason: String },
}

impl Preprocessed {
    pub fn spectral(&self) -> &SpectralData {
        match self {
            Preprocessed::Identity { spectral, .. }
            | Preprocessed::Passthrough { spectral }
            | Preprocessed::Samples { spectral, .. }
            | Preprocessed::Fallback { spectral, .. } => spectral,
        }
    }
}

/// Simple-spectrum repair, cluster detection and basis construction for snapshot `m`.
pub fn preprocess_main(m: &CMatrix, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let repaired = perturb_to_nd2(m, cfg.perturb_budget)?;
    let spectral = eig_full(&repaired)?;
    let partition = detect_clusters(&spectral.values, cfg.precision);
    if partition.identity {
        return Ok(Preprocessed::Identity { spectral, partition });
    }
    if partition.is_empty() {
        return Ok(Preprocessed::Passthrough { spectral });
    }
    match cluster_bases(&spectral, &partition, cfg.structure_tol) {
        Ok(bases) => {
            let sampler = BasisSampler::new(&spectral, bases, cfg.seed);
            Ok(Preprocessed::Samples { spectral, partition, sampler })
        }
        Err(Error::BasisUnavailable(id)) => {
            Ok(Preprocessed::Fallback { spectral, partition, reason: format!("cluster {id} has no structured basis") })
        }
        Err(e) => Err(e),
    }
}

/// `‖Γ(A) − Γ(A)†‖_F`: zero exactly for hermiticity-preserving `A`.
pub fn hp_defect(a: &CMatrix) -> Result<f64> {
    let g = gamma(a)?;
    Ok((&g - g.adjoint()).norm())
}
