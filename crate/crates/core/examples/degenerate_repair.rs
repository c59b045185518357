//! Exact X⊗X perturbed along self-adjoint directions. The raw eigenbasis leads to a
//! generator near the identity; sampled structured bases recover the X gate.

use lindfit::channel::{pauli, unitary_transfer};
use lindfit::linalg::{c, expm, CMatrix, CVector};
use lindfit::pipeline::{analyze, AnalysisConfig, Verdict};

fn main() -> lindfit::Result<()> {
    let eps = 1e-3;
    let x = unitary_transfer(&pauli(1))?.mat;
    let v = |a: [f64; 4], n: f64| CVector::from_iterator(4, a.iter().map(|&t| c(t / n, 0.0)));
    let w = [v([1., 1., 1., 1.], 2.), v([1., -1., -1., 1.], 2.), v([1., 0., 0., -1.], 2f64.sqrt()), v([0., 1., -1., 0.], 2f64.sqrt())];
    let mut m = x.clone();
    for (k, wk) in w.iter().enumerate() {
        m += wk * wk.adjoint() * c(if k % 2 == 0 { eps } else { -eps }, 0.0);
    }

    let mut cfg = AnalysisConfig::new(10.0, 5000, 0);
    cfg.preprocess.precision = 0.01;
    for repair in [false, true] {
        cfg.repair = repair;
        if let Verdict::Markovian { fit, .. } = analyze(&m, &cfg)?.verdict {
            let e = expm(&fit.generator);
            println!(
                "repair {repair:<5}: distance to identity {:.4}, to X⊗X {:.2e}",
                (&e - CMatrix::identity(4, 4)).norm(),
                (&e - &x).norm()
            );
        }
    }
    Ok(())
}
