#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use hpe_core::linalg::LinearMap;
use hpe_core::problems::{ProblemInstance, RegParams, SignalOptions, SpectrumKind, DEFAULT_DELTA};

fn jumps_for(n: usize) -> usize {
    (n / 4).clamp(1, 10)
}

pub fn tv_instance(n: usize, seed: u64, lam: f64) -> ProblemInstance {
    let signal = SignalOptions {
        jumps: jumps_for(n),
        ..SignalOptions::default()
    };
    ProblemInstance::generate(
        n,
        n,
        SpectrumKind::Cosine,
        seed,
        signal,
        RegParams::Tv { lam },
    )
    .unwrap()
}

pub fn huber_instance(n: usize, seed: u64, lam1: f64, lam2: f64) -> ProblemInstance {
    let signal = SignalOptions {
        jumps: jumps_for(n),
        sparsity: 0.0,
        ..SignalOptions::default()
    };
    let params = RegParams::HuberL1 {
        lam1,
        lam2,
        delta: DEFAULT_DELTA,
    };
    ProblemInstance::generate(n, n, SpectrumKind::Cosine, seed, signal, params).unwrap()
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    (a - b).amax()
}

/// `(I + τHᵀH)⁻¹ rhs` by dense Cholesky, independent of the CG code.
pub fn dense_shifted_solve(h: &LinearMap, tau: f64, rhs: &DVector<f64>) -> DVector<f64> {
    let hd = h.to_dense();
    let n = hd.ncols();
    let a = DMatrix::<f64>::identity(n, n) + hd.transpose() * &hd * tau;
    a.cholesky()
        .expect("shifted normal matrix is SPD")
        .solve(rhs)
}

/// Data-term proximal map `prox_{τ·½‖H·-f‖²}(z)` by dense solve.
pub fn dense_lsq_prox(h: &LinearMap, f: &DVector<f64>, tau: f64, z: &DVector<f64>) -> DVector<f64> {
    let rhs = z + h.to_dense().transpose() * f * tau;
    dense_shifted_solve(h, tau, &rhs)
}

/// Scalar soft threshold written out case by case.
pub fn soft_scalar(t: f64, eta: f64) -> f64 {
    if t > eta {
        t - eta
    } else if t < -eta {
        t + eta
    } else {
        0.0
    }
}
