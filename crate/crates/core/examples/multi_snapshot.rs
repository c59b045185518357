//! One generator fitted jointly to snapshots at three times, and a series made of two
//! unrelated generators that no single Lindbladian explains.

use lindfit::channel::random_lindblad_generator;
use lindfit::linalg::{c, expm};
use lindfit::multi::{best_fit_multi, MultiConfig, SnapshotSeries};
use lindfit::rng::{keyed, Domain};

fn main() -> lindfit::Result<()> {
    let mut rng = keyed(0, Domain::Test, 12);
    let l = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2).mat;
    let times = vec![0.5, 1.0, 1.5];
    let series = SnapshotSeries::new(times.iter().map(|&t| expm(&(&l * c(t, 0.0)))).collect(), times)?;
    let a = best_fit_multi(&series, &MultiConfig::new(1e-3, 1, 0))?;
    if let Some(r) = a.result {
        println!("recovered generator: ‖L̂ − L‖ = {:.2e}", (&r.generator - &l).norm());
        println!("per-snapshot distances {:?}, delta {:.3e}", r.distances, r.delta);
    }

    let other = random_lindblad_generator(2, &mut rng, 0.8, 0.4, 2).mat;
    let mixed = SnapshotSeries::new(vec![expm(&l), expm(&(&other * c(2.0, 0.0)))], vec![1.0, 2.0])?;
    let b = best_fit_multi(&mixed, &MultiConfig::new(1e-2, 1, 0))?;
    println!("inconsistent series fitted: {}", b.result.is_some());
    Ok(())
}
