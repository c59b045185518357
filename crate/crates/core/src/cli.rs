//! Command-line front end: `simulate`, `fit`, `mu`, `sweep-epsilon` and `multifit`.
//!
//! Exit codes: 0 when a verdict is produced, 2 for no result, 3 for input errors and 4
//! for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::{ChannelSpec, LindbladResiduals};
use crate::error::{Error, Result};
use crate::fit::BranchPolicy;
use crate::io::MatrixFile;
use crate::linalg::{eig_full, CMatrix};
use crate::mu::{markovianity_score, non_markovianity, MuResult, DEFAULT_DELTA_STEP};
use crate::multi::{best_fit_multi, JointBranches, MultiConfig, SnapshotSeries};
use crate::pipeline::{analyze, AnalysisConfig, Analysis, Verdict};
use crate::preprocess::perturb_to_nd2;
use crate::solver::SolverSettings;
use crate::tomography::{simulate_process_tomography, Protocol, TomographyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_RESULT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Value written to the `mu_sentinel` column when no `μ` is found.
pub const MU_SENTINEL: f64 = 1000.0;

pub const CSV_HEADER: &str = "epsilon,mu,mu_sentinel,distance,samples,m_max";

#[derive(Debug, Parser)]
#[command(name = "lindfit", version, about = "Fit Lindbladians to process-tomography snapshots")]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate process tomography of a benchmark channel.
    Simulate(SimulateArgs),
    /// Full analysis: basis repair, closest Lindbladian, then minimal noise.
    Fit(FitArgs),
    /// Minimal isotropic noise on the snapshot's own eigenbasis.
    Mu(MuArgs),
    /// Run the full analysis over a range of error budgets and write CSV.
    SweepEpsilon(SweepArgs),
    /// Fit one generator to several snapshots taken at different times.
    Multifit(MultifitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelKind {
    Xgate,
    Iswap,
    Depolarizing,
    Unital,
    Depolcz,
    Identity,
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    AncillaChoi,
    ProductStates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JointArg {
    OneAtATime,
    Product,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub channel: ChannelKind,
    /// Depolarizing probability, or `p_cz,p_xx,p_yy,p_zz` for `depolcz`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<f64>,
    /// Pauli rates `γ1,γ2,γ3` for `unital`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1)]
    pub qubits: usize,
    /// Matrix file holding the unitary for `unitary`.
    #[arg(long)]
    pub unitary: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "ancilla-choi")]
    pub protocol: ProtocolArg,
    /// Write the exact transfer matrix instead of a noisy estimate.
    #[arg(long)]
    pub exact: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    #[arg(long, default_value_t = 1)]
    pub m_max: u32,
    /// Largest total `Σ|m_j|` searched.
    #[arg(long)]
    pub max_weight: Option<u32>,
}

impl BranchArgs {
    fn policy(&self) -> BranchPolicy {
        BranchPolicy { m_max: self.m_max, max_weight: self.max_weight }
    }
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Random structured bases drawn for clustered spectra.
    #[arg(long, default_value_t = 100)]
    pub samples: u64,
    /// Cluster precision.
    #[arg(long, default_value_t = 0.1)]
    pub precision: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[command(flatten)]
    pub branches: BranchArgs,
    #[command(flatten)]
    pub repair: RepairArgs,
    #[arg(long, default_value_t = DEFAULT_DELTA_STEP)]
    pub delta_step: f64,
    /// Use the snapshot's own eigenbasis without cluster repair.
    #[arg(long)]
    pub no_repair: bool,
    /// Skip the minimal-noise search when no Lindbladian is found.
    #[arg(long)]
    pub no_mu: bool,
    /// Include the per-sample distance trace.
    #[arg(long)]
    pub trace: bool,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MuArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA_STEP)]
    pub delta_step: f64,
    #[command(flatten)]
    pub branches: BranchArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA_STEP)]
    pub delta_step: f64,
    #[command(flatten)]
    pub branches: BranchArgs,
    #[command(flatten)]
    pub repair: RepairArgs,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MultifitArgs {
    /// Snapshot files, comma separated.
    #[arg(long = "in", value_delimiter = ',', required = true)]
    pub inputs: Vec<PathBuf>,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub epsilon: f64,
    #[command(flatten)]
    pub branches: BranchArgs,
    #[command(flatten)]
    pub repair: RepairArgs,
    #[arg(long, value_enum, default_value = "one-at-a-time")]
    pub joint: JointArg,
    /// Snapshot whose eigenbasis is repaired; best-conditioned when absent.
    #[arg(long)]
    pub basis_snapshot: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Verdict section of a report.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictReport {
    Markovian {
        generator: MatrixFile,
        distance: f64,
        /// Error budget the distance was checked against.
        epsilon: f64,
        branch: Vec<i64>,
        residuals: LindbladResiduals,
        sample: Option<u64>,
    },
    NonMarkovian {
        mu: f64,
        score: f64,
        generator: MatrixFile,
        delta: f64,
        distance: f64,
        epsilon: f64,
        branch: Vec<i64>,
        /// Residuals of `H′ − μ ω_⊥`.
        residuals: LindbladResiduals,
        sample: Option<u64>,
    },
    Identity {
        distance_to_identity: f64,
    },
    MultiMarkovian {
        generator: MatrixFile,
        distances: Vec<f64>,
        total_distance: f64,
        epsilon: f64,
        delta: f64,
        branches: Vec<Vec<i64>>,
        residuals: LindbladResiduals,
        sample: Option<u64>,
    },
    NoResult,
}

impl VerdictReport {
    pub fn is_result(&self) -> bool {
        !matches!(self, VerdictReport::NoResult)
    }

    fn from_mu(mu: &MuResult, d: usize, eps: f64, sample: Option<u64>) -> Self {
        VerdictReport::NonMarkovian {
            mu: mu.mu_min,
            score: markovianity_score(mu.mu_min, d),
            generator: MatrixFile::from_matrix(&mu.generator),
            delta: mu.delta,
            distance: mu.distance,
            epsilon: eps,
            branch: mu.branch.clone(),
            residuals: mu.residuals,
            sample,
        }
    }

    fn from_analysis(a: &Analysis, d: usize, eps: f64) -> Self {
        match &a.verdict {
            Verdict::Markovian { fit, sample } => VerdictReport::Markovian {
                generator: MatrixFile::from_matrix(&fit.generator),
                distance: fit.distance,
                epsilon: eps,
                branch: fit.branch.clone(),
                residuals: fit.residuals,
                sample: *sample,
            },
            Verdict::NonMarkovian { mu, sample, .. } => Self::from_mu(mu, d, eps, *sample),
            Verdict::Identity { distance_to_identity } => {
                VerdictReport::Identity { distance_to_identity: *distance_to_identity }
            }
            Verdict::NoResult => VerdictReport::NoResult,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    /// SHA-256 of each input matrix.
    pub input_digest: Vec<String>,
    pub settings: serde_json::Value,
    pub verdict: VerdictReport,
    /// Command-specific diagnostics.
    pub details: serde_json::Value,
    pub wall_time_s: f64,
}

/// One line of the ε-sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Empty when no `μ` is found; 0 when a Lindbladian is found.
    pub mu: Option<f64>,
    pub mu_sentinel: f64,
    pub distance: Option<f64>,
    pub samples: u64,
    pub m_max: u32,
}

impl SweepRow {
    pub fn new(epsilon: f64, verdict: &Verdict, samples: u64, m_max: u32) -> Self {
        let (mu, mu_sentinel, distance) = match verdict {
            Verdict::Markovian { fit, .. } => (Some(0.0), 0.0, Some(fit.distance)),
            Verdict::NonMarkovian { mu, .. } => (Some(mu.mu_min), mu.mu_min, Some(mu.distance)),
            Verdict::Identity { distance_to_identity } => (Some(0.0), 0.0, Some(*distance_to_identity)),
            Verdict::NoResult => (None, MU_SENTINEL, None),
        };
        SweepRow { epsilon, mu, mu_sentinel, distance, samples, m_max }
    }
}

/// Grid `from + k·step` up to and including `to` (with rounding slack).
pub fn epsilon_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() {
        return Err(Error::OutOfRange(format!("sweep from {from} to {to} step {step}")));
    }
    let mut out = Vec::new();
    let slack = 1e-9 * step;
    for k in 0u64.. {
        // Rounded so that decimal steps print cleanly.
        let e = ((from + k as f64 * step) * 1e12).round() / 1e12;
        if e > to + slack {
            break;
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::NotPerfectSquare(_)
        | Error::OutOfRange(_)
        | Error::NotUnitary(_)
        | Error::NotHermitian(_)
        | Error::NotCompletelyPositive(_)
        | Error::InconsistentClusters(_)
        | Error::SearchTooLarge(_) => EXIT_INPUT,
        _ => EXIT_NUMERICAL,
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<(CMatrix, String)> {
    let file = MatrixFile::read(path)?;
    let m = file.to_matrix()?;
    Ok((m, file.digest()))
}

fn channel_spec(a: &SimulateArgs) -> Result<ChannelSpec> {
    let need = |v: &[f64], n: usize, name: &str| {
        if v.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("--{name} needs {n} values, got {}", v.len())))
        }
    };
    Ok(match a.channel {
        ChannelKind::Xgate => ChannelSpec::XGate,
        ChannelKind::Iswap => ChannelSpec::Iswap,
        ChannelKind::Depolarizing => {
            need(&a.p, 1, "p")?;
            ChannelSpec::Depolarizing { p: a.p[0] }
        }
        ChannelKind::Unital => {
            need(&a.gamma, 3, "gamma")?;
            ChannelSpec::UnitalPauli { gamma: [a.gamma[0], a.gamma[1], a.gamma[2]], t: a.t }
        }
        ChannelKind::Depolcz => {
            need(&a.p, 4, "p")?;
            ChannelSpec::DepolarizingCz { p_cz: a.p[0], p_xx: a.p[1], p_yy: a.p[2], p_zz: a.p[3] }
        }
        ChannelKind::Identity => ChannelSpec::Identity { qubits: a.qubits },
        ChannelKind::Unitary => {
            let path = a.unitary.as_ref().ok_or_else(|| Error::InvalidInput("--unitary is required".into()))?;
            ChannelSpec::Unitary { matrix: MatrixFile::read(path)? }
        }
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let spec = channel_spec(a)?;
    let protocol = match a.protocol {
        ProtocolArg::AncillaChoi => Protocol::AncillaChoi,
        ProtocolArg::ProductStates => Protocol::ProductStates,
    };
    let t = if a.exact {
        spec.transfer()?
    } else {
        simulate_process_tomography(&spec, &TomographyConfig { shots: a.shots, seed: a.seed, protocol })?
    };
    emit(a.out.as_deref(), &serde_json::to_string(&MatrixFile::from_matrix(&t.mat))?)?;
    Ok(EXIT_OK)
}

fn analysis_config(eps: f64, b: &BranchArgs, r: &RepairArgs, delta_step: f64) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::new(eps, r.samples, r.seed);
    cfg.policy = b.policy();
    cfg.delta_step = delta_step;
    cfg.preprocess.precision = r.precision;
    cfg
}

fn finish(report: Report, path: Option<&Path>) -> Result<i32> {
    let code = if report.verdict.is_result() { EXIT_OK } else { EXIT_NO_RESULT };
    emit(path, &serde_json::to_string_pretty(&report)?)?;
    Ok(code)
}

fn cmd_fit(a: &FitArgs, start: Instant) -> Result<i32> {
    let (m, digest) = read_input(&a.input)?;
    let d = crate::linalg::sqrt_dim(m.nrows())?;
    let mut cfg = analysis_config(a.epsilon, &a.branches, &a.repair, a.delta_step);
    cfg.repair = !a.no_repair;
    cfg.measure_noise = !a.no_mu;
    let analysis = analyze(&m, &cfg)?;
    let mut details = serde_json::json!({
        "route": analysis.route,
        "partition": analysis.partition,
        "fallback_reason": analysis.fallback_reason,
        "verdict_name": analysis.verdict.name(),
        "skipped_samples": analysis.skipped_samples,
    });
    if a.trace {
        details["sample_distances"] = serde_json::to_value(&analysis.sample_distances)?;
        details["running_minimum"] = serde_json::to_value(analysis.running_minimum())?;
    }
    let report = Report {
        command: "fit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input_digest: vec![digest],
        settings: serde_json::to_value(cfg)?,
        verdict: VerdictReport::from_analysis(&analysis, d, a.epsilon),
        details,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    finish(report, a.report.as_deref())
}

fn cmd_mu(a: &MuArgs, start: Instant) -> Result<i32> {
    let (m, digest) = read_input(&a.input)?;
    let d = crate::linalg::sqrt_dim(m.nrows())?;
    let settings = SolverSettings::default();
    let policy = a.branches.policy();
    let budget = crate::preprocess::PreprocessConfig::new(a.epsilon, 1, 0).perturb_budget;
    let s = eig_full(&perturb_to_nd2(&m, budget)?)?;
    let mu = non_markovianity(&m, &s, a.epsilon, &policy, a.delta_step, &settings)?;
    let verdict = match &mu {
        Some(r) => VerdictReport::from_mu(r, d, a.epsilon, None),
        None => VerdictReport::NoResult,
    };
    let report = Report {
        command: "mu".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input_digest: vec![digest],
        settings: serde_json::json!({
            "epsilon": a.epsilon,
            "delta_step": a.delta_step,
            "policy": policy,
            "solver": settings,
        }),
        verdict,
        details: serde_json::json!({ "sweep": mu.as_ref().map(|r| r.sweep) }),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    finish(report, a.report.as_deref())
}

/// Runs the full analysis at every `ε` of the grid.
pub fn sweep_epsilon(m: &CMatrix, grid: &[f64], base: &AnalysisConfig) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&eps| {
            let mut cfg = *base;
            cfg.epsilon = eps;
            cfg.preprocess.structure_tol = crate::preprocess::PreprocessConfig::new(eps, 1, 0).structure_tol;
            let a = analyze(m, &cfg)?;
            Ok(SweepRow::new(eps, &a.verdict, cfg.preprocess.samples, cfg.policy.m_max))
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let (m, _) = read_input(&a.input)?;
    let grid = epsilon_grid(a.from, a.to, a.step)?;
    let base = analysis_config(a.from.max(0.0), &a.branches, &a.repair, a.delta_step);
    let rows = sweep_epsilon(&m, &grid, &base)?;
    match &a.csv {
        Some(p) => write_sweep_csv(std::fs::File::create(p)?, &rows)?,
        None => write_sweep_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(EXIT_OK)
}

fn cmd_multifit(a: &MultifitArgs, start: Instant) -> Result<i32> {
    let inputs: Vec<(CMatrix, String)> = a.inputs.iter().map(|p| read_input(p)).collect::<Result<_>>()?;
    let (ms, digests): (Vec<CMatrix>, Vec<String>) = inputs.into_iter().unzip();
    let series = SnapshotSeries::new(ms, a.times.clone())?;
    let mut cfg = MultiConfig::new(a.epsilon, a.repair.samples, a.repair.seed);
    cfg.policy = a.branches.policy();
    cfg.preprocess.precision = a.repair.precision;
    cfg.basis_snapshot = a.basis_snapshot;
    cfg.joint = match a.joint {
        JointArg::OneAtATime => JointBranches::OneAtATime,
        JointArg::Product => JointBranches::Product,
    };
    let analysis = best_fit_multi(&series, &cfg)?;
    let verdict = match &analysis.result {
        Some(r) => VerdictReport::MultiMarkovian {
            generator: MatrixFile::from_matrix(&r.generator),
            distances: r.distances.clone(),
            total_distance: r.total_distance,
            epsilon: a.epsilon,
            delta: r.delta,
            branches: r.branches.clone(),
            residuals: r.residuals,
            sample: r.sample,
        },
        None => VerdictReport::NoResult,
    };
    let report = Report {
        command: "multifit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input_digest: digests,
        settings: serde_json::json!({ "config": cfg, "times": a.times, "delta_from_snapshot": 0 }),
        verdict,
        details: serde_json::json!({
            "basis_snapshot": analysis.basis_snapshot,
            "partition": analysis.partition,
            "compatibility_defects": analysis.compatibility_defects,
            "compatible": analysis.compatible,
        }),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    finish(report, a.report.as_deref())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a, start),
        Command::Mu(a) => cmd_mu(a, start),
        Command::SweepEpsilon(a) => cmd_sweep(a),
        Command::Multifit(a) => cmd_multifit(a, start),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidInput(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
