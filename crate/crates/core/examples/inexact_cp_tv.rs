//! Inexact Chambolle-Pock on 1-D TV-regularised deconvolution.

use nalgebra::DVector;

use hpe_core::methods::{inexact_cp_tv, CpParams, RunSettings, TvData};
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    let lam = 1.0;
    let inst = ProblemInstance::generate(
        100,
        100,
        SpectrumKind::Cosine,
        3,
        SignalOptions::default(),
        RegParams::Tv { lam },
    )?;
    let tv = TvData {
        h: &inst.h,
        f: &inst.f,
        d: &inst.d,
        lam,
    };
    let params = CpParams::from_kappa(0.1)?;
    let settings = RunSettings::new(0.95, 2000);
    let out = inexact_cp_tv(
        &tv,
        &params,
        &DVector::zeros(100),
        &DVector::zeros(99),
        &settings,
        None,
    )?;
    for r in out.trace.records.iter().step_by(250) {
        println!(
            "k {:5}  objective {:.8e}  lhs/rhs {:.3}  inner {}  H apps {}",
            r.k,
            r.objective,
            r.lhs.unwrap() / r.rhs.unwrap().max(f64::MIN_POSITIVE),
            r.inner_iterations,
            r.h_applications
        );
    }
    let err = (&out.final_x - &inst.x_true).norm() / inst.x_true.norm();
    println!("relative distance to the true signal {err:.3}");
    Ok(())
}
