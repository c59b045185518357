//! Closest Lindbladian to a noisy X-gate snapshot. The eigenvalues ±1 are doubly
//! degenerate, so random structured bases are sampled and the best fit kept.

use lindfit::channel::{pauli, unitary_transfer, ChannelSpec};
use lindfit::pipeline::{analyze, AnalysisConfig, Verdict};
use lindfit::tomography::{simulate_process_tomography, TomographyConfig};

fn main() -> lindfit::Result<()> {
    let m = simulate_process_tomography(&ChannelSpec::XGate, &TomographyConfig::new(10_000, 7))?.mat;
    let x = unitary_transfer(&pauli(1))?.mat;
    println!("snapshot distance to X⊗X: {:.4}", (&m - &x).norm());

    let a = analyze(&m, &AnalysisConfig::new(1.0, 2000, 0))?;
    println!("route: {:?}", a.route);
    let trace = a.running_minimum();
    for n in [1, 10, 100, 1000, 2000] {
        println!("best distance after {n:>4} samples: {:.4}", trace[n - 1]);
    }
    if let Verdict::Markovian { fit, sample } = a.verdict {
        println!("fit distance {:.4} from sample {:?}, branch {:?}", fit.distance, sample, fit.branch);
        println!("lindblad residuals {:?}", fit.residuals);
    }
    Ok(())
}
