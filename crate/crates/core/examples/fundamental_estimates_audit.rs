//! Audits the fundamental estimates of an HPE trace against a reference point.

use nalgebra::DVector;

use hpe_core::hpe::{audit_prop1, AuditOptions};
use hpe_core::methods::{inexact_cp_tv, CpParams, RunSettings, TvData};
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    let lam = 0.5;
    let inst = ProblemInstance::generate(
        60,
        60,
        SpectrumKind::Cosine,
        2,
        SignalOptions::default(),
        RegParams::Tv { lam },
    )?;
    let tv = TvData {
        h: &inst.h,
        f: &inst.f,
        d: &inst.d,
        lam,
    };
    let params = CpParams::from_kappa(0.5)?;
    let (x0, y0) = (DVector::zeros(60), DVector::zeros(59));
    let sigma = 0.9;
    let reference = inexact_cp_tv(&tv, &params, &x0, &y0, &RunSettings::new(sigma, 5000), None)?;
    let settings = RunSettings::new(sigma, 500).with_reference(reference.state());
    let out = inexact_cp_tv(&tv, &params, &x0, &y0, &settings, None)?;
    let report = audit_prop1(&out.trace, sigma, None, &AuditOptions::default())?;
    println!(
        "{} iterations audited, Fejer checked: {}, smallest margins {:.2e} / {:.2e}",
        report.iterations,
        report.fejer_checked,
        report.min_margin_bounds,
        report.min_margin_fejer.unwrap_or(f64::NAN)
    );
    Ok(())
}
