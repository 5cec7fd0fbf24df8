//! Dense linear algebra: counted linear maps, resumable conjugate gradients
//! and spectral-norm estimation.

mod cg;
mod map;

pub use cg::{cg_solve, CgOutcome, CgProgress, CgState, StopReason, StoppingRule};
pub use map::LinearMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seed of the Gaussian start vector used by power iteration.
pub const POWER_ITERATION_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Result of [`estimate_spectral_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates `‖op‖₂` by power iteration on `opᵀ op` from a seeded Gaussian start.
///
/// Stops once the estimate changes by at most `tol` relative between two
/// sweeps. Power iteration approaches the norm from below. When `max_iter` runs
/// out the best estimate is returned with `converged == false`.
pub fn estimate_spectral_norm(op: &LinearMap, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = DVector::from_fn(op.cols(), |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let u = op.apply(&v);
        let value = u.norm();
        if value == 0.0 {
            return Err(Error::invalid(
                "operator annihilates the start vector (zero map?)",
            ));
        }
        let w = op.apply_adjoint(&u);
        let w_norm = w.norm();
        let converged = (value - estimate).abs() <= tol * value;
        estimate = value;
        if converged {
            return Ok(NormEstimate {
                value,
                iterations: it,
                converged: true,
            });
        }
        v = w / w_norm;
    }
    Ok(NormEstimate {
        value: estimate,
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_norm_is_one() {
        let est = estimate_spectral_norm(&LinearMap::identity(10), 1e-6, 1000).unwrap();
        assert!(est.converged);
        assert!((est.value - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn diagonal_norm_is_largest_entry() {
        let op = LinearMap::dense(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0])));
        let est = estimate_spectral_norm(&op, 1e-6, 1000).unwrap();
        assert!((est.value - 3.0).abs() <= 3e-6);
    }

    #[test]
    fn zero_map_and_bad_arguments_are_rejected() {
        assert!(estimate_spectral_norm(&LinearMap::zeros(3, 3), 1e-6, 10).is_err());
        assert!(estimate_spectral_norm(&LinearMap::identity(3), 0.0, 10).is_err());
        assert!(estimate_spectral_norm(&LinearMap::identity(3), 1e-6, 0).is_err());
    }

    #[test]
    fn unconverged_estimate_is_flagged() {
        let op = LinearMap::first_difference(200);
        let est = estimate_spectral_norm(&op, 1e-15, 3).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.value > 0.0 && est.value <= 2.0);
    }
}
