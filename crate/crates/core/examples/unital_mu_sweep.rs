//! Non-Markovian unital channel: minimal noise μ as a function of the error budget ε,
//! written as CSV to stdout. μ is absent for tiny ε, decreases with ε and drops to 0 once
//! a Lindbladian is within reach.

use lindfit::channel::ChannelSpec;
use lindfit::cli::{epsilon_grid, sweep_epsilon, write_sweep_csv};
use lindfit::pipeline::AnalysisConfig;
use lindfit::tomography::{simulate_process_tomography, TomographyConfig};

fn main() -> lindfit::Result<()> {
    let spec = ChannelSpec::UnitalPauli { gamma: [-200.0, 201.0, 200.5], t: 1.0 };
    let m = simulate_process_tomography(&spec, &TomographyConfig::new(10_000, 0))?.mat;
    let rows = sweep_epsilon(&m, &epsilon_grid(0.0, 0.65, 0.05)?, &AnalysisConfig::new(0.0, 100, 0))?;
    write_sweep_csv(std::io::stdout().lock(), &rows)
}
