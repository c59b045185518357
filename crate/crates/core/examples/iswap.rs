//! Two-qubit ISWAP snapshot: several degenerate eigenspaces, including a conjugate pair of
//! four-fold clusters. The branch search is capped at total weight 1.

use lindfit::channel::ChannelSpec;
use lindfit::fit::BranchPolicy;
use lindfit::pipeline::{analyze, AnalysisConfig};
use lindfit::tomography::{simulate_process_tomography, TomographyConfig};

fn main() -> lindfit::Result<()> {
    let m = simulate_process_tomography(&ChannelSpec::Iswap, &TomographyConfig::new(100_000, 1))?.mat;
    let mut cfg = AnalysisConfig::new(1.0, 200, 0);
    cfg.policy = BranchPolicy::capped(1, 1);
    cfg.measure_noise = false;
    let a = analyze(&m, &cfg)?;
    if let Some(p) = &a.partition {
        for cl in &p.clusters {
            println!("cluster {:?} of size {} at {:.3}{:+.3}i", cl.kind, cl.indices.len(), cl.center[0], cl.center[1]);
        }
    }
    let trace = a.running_minimum();
    for n in [1, 10, 50, 100, 200] {
        println!("best distance after {n:>3} samples: {:.4}", trace[n - 1]);
    }
    println!("verdict: {}, skipped samples: {}", a.verdict.name(), a.skipped_samples);
    Ok(())
}
