use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::hpe::{reduced_hpe_run_with, ReducedHpeOracle, ReducedPair};
use crate::operators::{l1_resolvent, InexactResolvent, LsqResolvent};

use super::{DyParams, HuberL1Data, Method, MethodResult, RunSettings};

/// Reduced oracle of the inexact Davis-Yin method in the scaled variable
/// `w̃ = w/(1+α)`. All reduced quantities are divided by `1+α`:
/// `C*ũ/(1+α) = (αx̃₁ + x̃₂)/(1+α) + γa₁` and `z/(1+α) = (x̃₁ - x̃₂)/(1+α)`.
struct DyOracle<R, J, B> {
    a1: R,
    j_a2: J,
    b: B,
    alpha: f64,
    x2: DVector<f64>,
}

impl<R, J, B> DyOracle<R, J, B>
where
    R: InexactResolvent,
    J: Fn(&DVector<f64>, f64) -> DVector<f64>,
    B: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn pair(&mut self) -> ReducedPair {
        let gamma = self.a1.scale();
        let x1 = self.a1.candidate();
        let ga1 = self.a1.scaled_witness();
        let p = x1 - &ga1 - (self.b)(x1) * gamma;
        self.x2 = (self.j_a2)(&p, gamma);
        let s = 1.0 + self.alpha;
        ReducedPair {
            c_adj_u_tilde: (x1 * self.alpha + &self.x2) / s + ga1,
            z: (x1 - &self.x2) / s,
            exact: self.a1.is_exact(),
            inner_steps: self.a1.inner_steps(),
        }
    }
}

impl<R, J, B> ReducedHpeOracle for DyOracle<R, J, B>
where
    R: InexactResolvent,
    J: Fn(&DVector<f64>, f64) -> DVector<f64>,
    B: Fn(&DVector<f64>) -> DVector<f64>,
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

/// Inexact Davis-Yin for `0 ∈ A₁x + A₂x + Bx` with `B` `1/β`-cocoercive.
///
/// Runs in the scaled variable `w̃`: `a1` supplies inexact resolvents of `A₁`
/// with scale `γ`, `j_a2(p, γ)` evaluates `J_{γA₂}(p)`, and the update is
/// `w̃ ← w̃ + (x̃₂ - x̃₁)/(1+α)`. The objective is evaluated at `x̃₂`.
pub fn inexact_dy_run<R, J, B, F>(
    a1: R,
    j_a2: J,
    b: B,
    params: &DyParams,
    w0: &DVector<f64>,
    settings: &RunSettings,
    mut objective: F,
) -> Result<MethodResult>
where
    R: InexactResolvent,
    J: Fn(&DVector<f64>, f64) -> DVector<f64>,
    B: Fn(&DVector<f64>) -> DVector<f64>,
    F: FnMut(&DVector<f64>) -> f64,
{
    check_dim("Davis-Yin initial point", a1.dim(), w0.len())?;
    if (a1.scale() - params.gamma).abs() > 1e-15 * params.gamma {
        return Err(crate::error::Error::invalid(format!(
            "resolvent scale {} differs from gamma = {}",
            a1.scale(),
            params.gamma
        )));
    }
    let cfg = settings.hpe_config()?;
    let n = w0.len();
    let mut oracle = DyOracle {
        a1,
        j_a2,
        b,
        alpha: params.alpha,
        x2: DVector::zeros(n),
    };
    let mut iterates = Vec::new();
    let run = reduced_hpe_run_with(
        &mut oracle,
        w0,
        &cfg,
        settings.iters,
        |o, step| {
            if settings.keep_iterates {
                iterates.push(step.w_next.clone());
            }
            objective(&o.x2)
        },
        settings.reference.as_ref(),
    )?;
    let mut trace = run.trace;
    trace.method = Method::HpeDy.to_string();
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
        update_mismatch: None,
    })
}

/// Inexact Davis-Yin on `½‖Hx - f‖² + lam1 ‖x‖₁ + lam2 L_δ(Dx)` with
/// `A₁ = Hᵀ(H· - f)` (refinable CG), `A₂ = lam1 ∂‖·‖₁` and
/// `B = lam2 Dᵀ∇L_δ(D·)`.
pub fn inexact_dy_huber(
    data: &HuberL1Data<'_>,
    params: &DyParams,
    w0: &DVector<f64>,
    settings: &RunSettings,
    exact_tol: Option<f64>,
) -> Result<MethodResult> {
    data.validate()?;
    let mut oracle = LsqResolvent::refinable(
        data.h.fresh_copy(),
        data.f.clone(),
        params.gamma,
        w0.clone(),
    )?;
    if let Some(tol) = exact_tol {
        oracle = oracle.with_exact_tol(tol);
    }
    let d = data.d.fresh_copy();
    let (lam2, delta) = (data.lam2, data.delta);
    inexact_dy_run(
        oracle,
        l1_resolvent(data.lam1),
        move |x: &DVector<f64>| super::huber_forward(&d, lam2, delta, x),
        params,
        w0,
        settings,
        |x| data.objective(x),
    )
}
