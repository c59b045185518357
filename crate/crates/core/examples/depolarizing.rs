//! Depolarizing channel p = 0.3: a three-fold degenerate eigenvalue that still admits a
//! Markovian fit after basis repair.

use lindfit::channel::ChannelSpec;
use lindfit::pipeline::{analyze, AnalysisConfig, Verdict};
use lindfit::tomography::{simulate_process_tomography, TomographyConfig};

fn main() -> lindfit::Result<()> {
    let spec = ChannelSpec::Depolarizing { p: 0.3 };
    for seed in 0..5 {
        let m = simulate_process_tomography(&spec, &TomographyConfig::new(10_000, seed))?.mat;
        let a = analyze(&m, &AnalysisConfig::new(0.1, 100, seed))?;
        let clusters: Vec<usize> =
            a.partition.iter().flat_map(|p| p.clusters.iter().map(|c| c.indices.len())).collect();
        match a.verdict {
            Verdict::Markovian { fit, sample } => {
                println!("seed {seed}: clusters {clusters:?}, fit distance {:.4} (sample {sample:?})", fit.distance)
            }
            v => println!("seed {seed}: clusters {clusters:?}, verdict {}", v.name()),
        }
    }
    Ok(())
}
