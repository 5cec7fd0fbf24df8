//! All TV methods on one instance: objective after a fixed H budget.

use nalgebra::DVector;

use hpe_core::methods::{
    condat_vu_run, explicit_cp_run, implicit_cp_run, inexact_cp_tv, CondatVuParams, CpParams,
    ExplicitCpParams, RunSettings, TvData, DEFAULT_CG_TOL,
};
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    let (n, lam, kappa) = (80, 1.0, 0.1);
    let inst = ProblemInstance::generate(
        n,
        n,
        SpectrumKind::Cosine,
        11,
        SignalOptions::default(),
        RegParams::Tv { lam },
    )?;
    let tv = TvData {
        h: &inst.h,
        f: &inst.f,
        d: &inst.d,
        lam,
    };
    let (x0, y0) = (DVector::zeros(n), DVector::zeros(n - 1));
    let budget = 20_000;
    let s = RunSettings::new(0.95, usize::MAX).with_application_budget(budget);
    let cp = CpParams::from_kappa(kappa)?;
    let runs = [
        ("hpe-cp", inexact_cp_tv(&tv, &cp, &x0, &y0, &s, None)?),
        (
            "implicit-cp",
            implicit_cp_run(&tv, &cp, DEFAULT_CG_TOL, &x0, &y0, &s)?,
        ),
        (
            "explicit-cp",
            explicit_cp_run(
                &tv,
                &ExplicitCpParams::from_kappa(kappa, 1.0, 2.0)?,
                &x0,
                &x0,
                &y0,
                &s,
            )?,
        ),
        (
            "condat-vu",
            condat_vu_run(&tv, &CondatVuParams::default_for(1.0, 2.0)?, &x0, &y0, &s)?,
        ),
    ];
    println!("objective after {budget} applications of H or its adjoint");
    for (name, r) in &runs {
        println!(
            "  {name:12} {:.10e} ({} iterations)",
            r.trace.last().unwrap().objective,
            r.trace.len()
        );
    }
    Ok(())
}
