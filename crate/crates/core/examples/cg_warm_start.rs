//! Warm starts shorten conjugate-gradient solves of (I + tau H^T H) x = b.

use nalgebra::DVector;

use hpe_core::operators::lsq_resolvent_exact;
use hpe_core::problems::{gen_illcond_matrix, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    let n = 200;
    let h = gen_illcond_matrix(n, n, SpectrumKind::Cosine, 4)?;
    let f = DVector::from_fn(n, |i, _| (i as f64 / 10.0).sin());
    let tau = 5.0;
    let mut rhs = DVector::from_fn(n, |i, _| (i as f64 / 7.0).cos());
    let mut warm = DVector::zeros(n);
    for k in 0..6 {
        let cold = lsq_resolvent_exact(&h, &f, tau, &rhs, &DVector::zeros(n), 1e-8)?;
        let hot = lsq_resolvent_exact(&h, &f, tau, &rhs, &warm, 1e-8)?;
        println!(
            "solve {k}: cold start {:3} CG steps, warm start {:3}",
            cold.iterations, hot.iterations
        );
        warm = hot.x.clone();
        // Nearby right-hand side, as in consecutive outer iterations.
        rhs += DVector::from_fn(n, |i, _| 1e-3 * ((i + k) as f64).sin());
    }
    Ok(())
}
