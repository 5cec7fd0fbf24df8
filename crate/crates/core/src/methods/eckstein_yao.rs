use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::hpe::{reduced_hpe_run_with, ReducedHpeOracle, ReducedPair};
use crate::operators::InexactResolvent;

use super::{MethodResult, RunSettings};

/// Reduced HPE oracle of the inexact Douglas-Rachford splitting.
///
/// With `C = (I, -I, I)` the reduced quantities are `C*ũ = x̃₂ + τa₁` and
/// `z = x̃₁ - x̃₂`.
pub(crate) struct EyOracle<R, J> {
    pub(crate) a1: R,
    j_a2: J,
    pub(crate) x2: DVector<f64>,
    /// `τa₂ = x̃₁ - τa₁ - x̃₂`.
    pub(crate) scaled_a2: DVector<f64>,
    pub(crate) scaled_a1: DVector<f64>,
}

impl<R: InexactResolvent, J: Fn(&DVector<f64>, f64) -> DVector<f64>> EyOracle<R, J> {
    pub(crate) fn new(a1: R, j_a2: J) -> Self {
        let n = a1.dim();
        EyOracle {
            a1,
            j_a2,
            x2: DVector::zeros(n),
            scaled_a2: DVector::zeros(n),
            scaled_a1: DVector::zeros(n),
        }
    }

    fn pair(&mut self) -> ReducedPair {
        let tau = self.a1.scale();
        let x1 = self.a1.candidate();
        self.scaled_a1 = self.a1.scaled_witness();
        let p = x1 - &self.scaled_a1;
        self.x2 = (self.j_a2)(&p, tau);
        self.scaled_a2 = p - &self.x2;
        ReducedPair {
            c_adj_u_tilde: &self.x2 + &self.scaled_a1,
            z: x1 - &self.x2,
            exact: self.a1.is_exact(),
            inner_steps: self.a1.inner_steps(),
        }
    }
}

impl<R: InexactResolvent, J: Fn(&DVector<f64>, f64) -> DVector<f64>> ReducedHpeOracle
    for EyOracle<R, J>
{
    fn produce(&mut self, w: &DVector<f64>, _lambda: f64) -> Result<ReducedPair> {
        self.a1.propose(w)?;
        Ok(self.pair())
    }

    fn refine(&mut self, _w: &DVector<f64>, _lambda: f64) -> Result<Option<ReducedPair>> {
        if self.a1.refine()? || self.a1.is_exact() {
            Ok(Some(self.pair()))
        } else {
            Ok(None)
        }
    }

    fn operator_applications(&self) -> u64 {
        self.a1.operator_applications()
    }
}

/// Inexact Douglas-Rachford (Eckstein-Yao) for `0 ∈ A₁x + A₂x`.
///
/// `a1` provides inexact resolvents of `A₁` with scale `τ`; `j_a2(p, τ)`
/// evaluates `J_{τA₂}(p)` exactly. The objective is evaluated at `x̃₂`. Both
/// forms of the update, `w + x̃₂ - x̃₁` and `w - τ(a₁ + a₂)`, are computed and
/// their largest difference is reported in
/// [`update_mismatch`](MethodResult::update_mismatch).
pub fn eckstein_yao_run<R, J, F>(
    a1: R,
    j_a2: J,
    w0: &DVector<f64>,
    settings: &RunSettings,
    mut objective: F,
) -> Result<MethodResult>
where
    R: InexactResolvent,
    J: Fn(&DVector<f64>, f64) -> DVector<f64>,
    F: FnMut(&DVector<f64>) -> f64,
{
    check_dim("Eckstein-Yao initial point", a1.dim(), w0.len())?;
    let cfg = settings.hpe_config()?;
    let mut oracle = EyOracle::new(a1, j_a2);
    let mut iterates = Vec::new();
    let mut mismatch: f64 = 0.0;
    let mut w_prev = w0.clone();
    let run = reduced_hpe_run_with(
        &mut oracle,
        w0,
        &cfg,
        settings.iters,
        |o, step| {
            let alternative = &w_prev - &o.scaled_a1 - &o.scaled_a2;
            mismatch = mismatch.max((&alternative - &step.w_next).amax());
            w_prev = step.w_next.clone();
            if settings.keep_iterates {
                iterates.push(step.w_next.clone());
            }
            objective(&o.x2)
        },
        settings.reference.as_ref(),
    )?;
    let mut trace = run.trace;
    trace.method = super::Method::HpeEy.to_string();
    let final_x = if trace.is_empty() {
        w0.clone()
    } else {
        oracle.x2
    };
    Ok(MethodResult {
        trace,
        final_x,
        final_y: None,
        final_w: Some(run.state),
        iterates,
        update_mismatch: Some(mismatch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{l1_resolvent, ClosedFormResolvent};

    fn shifted_l1(c: f64) -> impl Fn(&DVector<f64>, f64) -> DVector<f64> + Clone {
        move |x, s| x.map(|t| c + (t - c).signum() * ((t - c).abs() - s).max(0.0))
    }

    #[test]
    fn exact_run_matches_classical_douglas_rachford() {
        let tau = 0.7;
        let j1 = l1_resolvent(1.0);
        let j2 = shifted_l1(1.0);
        let w0 = DVector::from_vec(vec![3.0, -2.0]);
        let a1 = ClosedFormResolvent::new(2, tau, j1.clone()).unwrap();
        let settings = RunSettings::new(0.0, 50).with_iterates();
        let out = eckstein_yao_run(a1, j2.clone(), &w0, &settings, |_| 0.0).unwrap();
        let mut w = w0.clone();
        for wk in &out.iterates {
            let x1 = j1(&w, tau);
            w = &w + j2(&(&x1 * 2.0 - &w), tau) - &x1;
            assert!((wk - &w).amax() <= 1e-12);
        }
        assert!(out.update_mismatch.unwrap() <= 1e-14);
    }

    #[test]
    fn zero_operators_keep_w_constant() {
        let zero = |x: &DVector<f64>, _s: f64| x.clone();
        let a1 = ClosedFormResolvent::new(3, 1.0, zero).unwrap();
        let w0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let out = eckstein_yao_run(a1, zero, &w0, &RunSettings::new(0.5, 5), |_| 0.0).unwrap();
        assert_eq!(out.final_w.unwrap(), w0);
        assert_eq!(out.trace.len(), 5);
    }
}
