use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::hpe::{hpe_run, stack, FullPair, HpeOracle, Preconditioner};
use crate::linalg::LinearMap;
use crate::operators::{l1_dual_resolvent, InexactResolvent, LsqResolvent};

use super::{split, CpParams, Method, MethodResult, RunSettings, TvData};

/// Full-form HPE oracle of the inexact Chambolle-Pock method on `u = (x, y)`.
///
/// The witness is `v = (τa + τK*y, y - ỹ)`, so that `u - v` is the usual
/// primal-dual update with the inexact primal resolvent.
struct CpOracle<R, J> {
    a1: R,
    k: LinearMap,
    j_dual: J,
    theta: f64,
    n: usize,
    kty: DVector<f64>,
}

impl<R: InexactResolvent, J: Fn(&DVector<f64>, f64) -> DVector<f64>> CpOracle<R, J> {
    fn pair(&self, y: &DVector<f64>) -> FullPair {
        let tau = self.a1.scale();
        let xt = self.a1.candidate();
        let v1 = self.a1.scaled_witness() + &self.kty * tau;
        let yt = (self.j_dual)(
            &(y + self.k.apply_untracked(&(xt - &v1)) * self.theta),
            self.theta,
        );
        let v2 = y - &yt;
        FullPair {
            u_tilde: stack(xt, &yt),
            v: stack(&v1, &v2),
            exact: self.a1.is_exact(),
            inner_steps: self.a1.inner_steps(),
        }
    }
}

impl<R: InexactResolvent, J: Fn(&DVector<f64>, f64) -> DVector<f64>> HpeOracle for CpOracle<R, J> {
    fn produce(&mut self, u: &DVector<f64>, _lambda: f64) -> Result<FullPair> {
        let (x, y) = split(u, self.n);
        self.kty = self.k.apply_adjoint_untracked(&y);
        self.a1.propose(&(x - &self.kty * self.a1.scale()))?;
        Ok(self.pair(&y))
    }

    fn refine(&mut self, u: &DVector<f64>, _lambda: f64) -> Result<Option<FullPair>> {
        if self.a1.refine()? || self.a1.is_exact() {
            let y = u.rows(self.n, u.len() - self.n).into_owned();
            Ok(Some(self.pair(&y)))
        } else {
            Ok(None)
        }
    }

    fn operator_applications(&self) -> u64 {
        self.a1.operator_applications()
    }
}

/// Inexact Chambolle-Pock for `0 ∈ A₁x + K*A₂Kx`.
///
/// `a1` provides inexact resolvents of `A₁` with scale `τ = params.tau`;
/// `j_dual(q, θ)` evaluates `J_{θA₂⁻¹}(q)`. The acceptance test uses the
/// M-seminorm of `M = [[I/τ, -K*], [-K, I/θ]]`. The objective is evaluated at
/// `x^{k+1}`. `‖K‖` is estimated by power iteration when `k_norm` is `None`.
#[allow(clippy::too_many_arguments)]
pub fn inexact_cp_run<R, J, F>(
    a1: R,
    k: &LinearMap,
    j_dual: J,
    params: &CpParams,
    k_norm: Option<f64>,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    settings: &RunSettings,
    mut objective: F,
) -> Result<MethodResult>
where
    R: InexactResolvent,
    J: Fn(&DVector<f64>, f64) -> DVector<f64>,
    F: FnMut(&DVector<f64>) -> f64,
{
    let n = k.cols();
    check_dim("CP primal start", n, x0.len())?;
    check_dim("CP dual start", k.rows(), y0.len())?;
    check_dim("CP primal resolvent", n, a1.dim())?;
    if (a1.scale() - params.tau).abs() > 1e-15 * params.tau {
        return Err(crate::error::Error::invalid(format!(
            "resolvent scale {} differs from tau = {}",
            a1.scale(),
            params.tau
        )));
    }
    let k_norm = match k_norm {
        Some(v) => v,
        None => crate::linalg::estimate_spectral_norm(&k.fresh_copy(), 1e-6, 1000)
            .map(|e| e.value)
            .unwrap_or(0.0),
    };
    params.validate(k_norm)?;
    let cfg = settings.hpe_config()?;
    let p = Preconditioner::chambolle_pock(k, params.tau, params.theta);
    let mut oracle = CpOracle {
        a1,
        k: k.fresh_copy(),
        j_dual,
        theta: params.theta,
        n,
        kty: DVector::zeros(n),
    };
    let mut iterates = Vec::new();
    let u0 = stack(x0, y0);
    let run = hpe_run(
        &mut oracle,
        &p,
        &u0,
        &cfg,
        settings.iters,
        |_, u| {
            if settings.keep_iterates {
                iterates.push(u.clone());
            }
            objective(&u.rows(0, n).into_owned())
        },
        settings.reference.as_ref(),
    )?;
    let mut trace = run.trace;
    trace.method = Method::HpeCp.to_string();
    let (x, y) = split(&run.state, n);
    Ok(MethodResult {
        trace,
        final_x: x,
        final_y: Some(y),
        final_w: None,
        iterates,
        update_mismatch: None,
    })
}

/// Inexact Chambolle-Pock on `½‖Hx - f‖² + lam ‖Dx‖₁` with a refinable CG
/// resolvent for the data term (one CG step per refinement, warm-started from
/// the previous candidate).
///
/// `exact_tol` overrides the relative residual at which the inner solve is
/// considered exact.
pub fn inexact_cp_tv(
    data: &TvData<'_>,
    params: &CpParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    settings: &RunSettings,
    exact_tol: Option<f64>,
) -> Result<MethodResult> {
    data.validate()?;
    let mut oracle =
        LsqResolvent::refinable(data.h.fresh_copy(), data.f.clone(), params.tau, x0.clone())?;
    if let Some(tol) = exact_tol {
        oracle = oracle.with_exact_tol(tol);
    }
    let d_norm = first_difference_norm_bound(data.d);
    inexact_cp_run(
        oracle,
        data.d,
        l1_dual_resolvent(data.lam),
        params,
        d_norm,
        x0,
        y0,
        settings,
        |x| data.objective(x),
    )
}

/// `2` for first-difference maps, otherwise `None` (estimate instead).
pub(crate) fn first_difference_norm_bound(d: &LinearMap) -> Option<f64> {
    d.is_first_difference().then_some(2.0)
}
