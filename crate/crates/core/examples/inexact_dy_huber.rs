//! Inexact Davis-Yin on least squares with l1 and Huber-TV penalties.

use nalgebra::DVector;

use hpe_core::methods::{inexact_dy_huber, DyParams, HuberL1Data, RunSettings};
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    let (lam1, lam2, delta) = (1e-3, 0.1, 0.1);
    let signal = SignalOptions {
        sparsity: 0.0,
        ..SignalOptions::default()
    };
    let inst = ProblemInstance::generate(
        120,
        120,
        SpectrumKind::Cosine,
        5,
        signal,
        RegParams::HuberL1 { lam1, lam2, delta },
    )?;
    let data = HuberL1Data {
        h: &inst.h,
        f: &inst.f,
        d: &inst.d,
        lam1,
        lam2,
        delta,
    };
    let params = DyParams::for_huber(lam2)?;
    println!(
        "gamma {} beta {} alpha {:.3e}",
        params.gamma, params.beta, params.alpha
    );
    for sigma in [0.5, 0.99] {
        let out = inexact_dy_huber(
            &data,
            &params,
            &DVector::zeros(120),
            &RunSettings::new(sigma, 300),
            None,
        )?;
        println!(
            "sigma {sigma}: objective {:.12e} after {} H applications, median inner {}",
            out.trace.last().unwrap().objective,
            out.trace.total_h_applications(),
            out.trace.median_inner_iterations().unwrap_or(0)
        );
    }
    Ok(())
}
