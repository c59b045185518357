//! Simulated process tomography of the benchmark channels: error against the exact
//! transfer matrix and its decrease with the number of shots.

use lindfit::channel::ChannelSpec;
use lindfit::tomography::{simulate_process_tomography, TomographyConfig};

fn main() -> lindfit::Result<()> {
    let channels = [
        ("x gate", ChannelSpec::XGate),
        ("depolarizing p=0.3", ChannelSpec::Depolarizing { p: 0.3 }),
        ("unital pauli", ChannelSpec::UnitalPauli { gamma: [-200.0, 201.0, 200.5], t: 1.0 }),
        ("iswap", ChannelSpec::Iswap),
        ("depolarizing cz", ChannelSpec::DepolarizingCz { p_cz: 0.1, p_xx: 0.07, p_yy: 0.08, p_zz: 0.09 }),
    ];
    println!("{:<20} {:>12} {:>12} {:>12}", "channel", "1e4 shots", "1e5 shots", "1e6 shots");
    for (name, spec) in &channels {
        let exact = spec.transfer()?;
        let errors: Vec<f64> = [10_000, 100_000, 1_000_000]
            .iter()
            .map(|&shots| simulate_process_tomography(spec, &TomographyConfig::new(shots, 7)).map(|t| exact.distance(&t.mat)))
            .collect::<lindfit::Result<_>>()?;
        println!("{name:<20} {:>12.5} {:>12.5} {:>12.5}", errors[0], errors[1], errors[2]);
    }
    Ok(())
}
