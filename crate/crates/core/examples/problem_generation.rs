//! Generates an ill-conditioned instance, prints its spectrum and saves it.

use hpe_core::linalg::estimate_spectral_norm;
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind};

fn main() -> hpe_core::Result<()> {
    for kind in [SpectrumKind::Cosine, SpectrumKind::Power5] {
        let v = kind.values(200);
        let smallest_positive = v
            .iter()
            .copied()
            .filter(|&s| s > 0.0)
            .fold(f64::INFINITY, f64::min);
        println!(
            "{kind}: sigma_1 = {}, smallest positive {smallest_positive:.3e}, last {}",
            v[0], v[199]
        );
    }
    let inst = ProblemInstance::generate(
        100,
        400,
        SpectrumKind::Power5,
        1,
        SignalOptions::default(),
        RegParams::Tv { lam: 0.1 },
    )?;
    let est = estimate_spectral_norm(&inst.h, 1e-8, 5000)?;
    println!(
        "power iteration ||H|| = {:.8} in {} sweeps",
        est.value, est.iterations
    );
    let dir = std::env::temp_dir().join("hpe-problem-example");
    inst.save(&dir)?;
    let back = ProblemInstance::load(&dir)?;
    println!(
        "saved to {}; reload identical: {}",
        dir.display(),
        back.f == inst.f
    );
    Ok(())
}
