//! Inexact Douglas-Rachford on a lasso problem, with a scalar toy first.

use nalgebra::DVector;

use hpe_core::methods::{eckstein_yao_run, RunSettings};
use hpe_core::operators::{l1_resolvent, ClosedFormResolvent, LsqResolvent};
use hpe_core::problems::{gen_illcond_matrix, gen_signal_and_data, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    // min |x| + 2|x - 1|, unique minimiser x = 1.
    let abs = |p: &DVector<f64>, t: f64| p.map(|v| v.signum() * (v.abs() - t).max(0.0));
    let shifted = |p: &DVector<f64>, t: f64| {
        p.map(|v| 1.0 + (v - 1.0).signum() * ((v - 1.0).abs() - 2.0 * t).max(0.0))
    };
    let a1 = ClosedFormResolvent::new(1, 1.0, abs)?;
    let toy = eckstein_yao_run(
        a1,
        shifted,
        &DVector::from_element(1, -3.0),
        &RunSettings::new(0.5, 50),
        |x| x[0].abs() + 2.0 * (x[0] - 1.0).abs(),
    )?;
    println!("toy minimiser {:.12}", toy.final_x[0]);

    let n = 100;
    let h = gen_illcond_matrix(n, n, SpectrumKind::Cosine, 7)?;
    let signal = SignalOptions {
        sparsity: 0.7,
        ..SignalOptions::default()
    };
    let (_, f) = gen_signal_and_data(&h, 7, &signal)?;
    let lam = 1e-3;
    for sigma in [0.0, 0.5, 0.99] {
        let a1 = LsqResolvent::refinable(h.fresh_copy(), f.clone(), 1.0, DVector::zeros(n))?;
        let out = eckstein_yao_run(
            a1,
            l1_resolvent(lam),
            &DVector::zeros(n),
            &RunSettings::new(sigma, 200),
            |x| 0.5 * (h.apply_untracked(x) - &f).norm_squared() + lam * x.lp_norm(1),
        )?;
        let last = out.trace.last().unwrap();
        println!(
            "sigma {sigma:4}: objective {:.10e}, H apps {:6}, median inner {}, update mismatch {:.1e}",
            last.objective,
            last.h_applications,
            out.trace.median_inner_iterations().unwrap_or(0),
            out.update_mismatch.unwrap_or(0.0)
        );
    }
    Ok(())
}
