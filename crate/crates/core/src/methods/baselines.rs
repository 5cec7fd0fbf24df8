use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::hpe::{IterationRecord, RunTrace, StopRule, Stopwatch};
use crate::linalg::LinearMap;
use crate::operators::{clip, soft_threshold, solve_shifted_normal};

use super::{
    huber_forward, CpParams, DyParams, HuberL1Data, Method, MethodResult, RunSettings, TvData,
};

struct Recorder {
    trace: RunTrace,
    clock: Stopwatch,
    keep: bool,
    stop: StopRule,
    iterates: Vec<DVector<f64>>,
}

impl Recorder {
    fn new(method: Method, settings: &RunSettings) -> Self {
        Recorder {
            trace: RunTrace::new(method.as_str()),
            clock: Stopwatch::start(settings.record_wall_time),
            keep: settings.keep_iterates,
            stop: settings.stop,
            iterates: Vec::new(),
        }
    }

    /// Records one iteration; true when the stop rule fires.
    #[must_use]
    fn push(
        &mut self,
        objective: f64,
        inner: usize,
        h: &LinearMap,
        state: impl FnOnce() -> DVector<f64>,
    ) -> bool {
        let k = self.trace.len();
        self.trace.records.push(IterationRecord {
            k,
            objective,
            lhs: None,
            rhs: None,
            inner_iterations: inner,
            h_applications: h.applications(),
            seminorm_step: None,
            seminorm_residual: None,
            reference_distance: None,
            certified_exact: false,
            wall_ms: self.clock.elapsed_ms(),
        });
        if self.keep {
            self.iterates.push(state());
        }
        self.stop.fires(h.applications(), objective)
    }

    fn finish(
        self,
        x: DVector<f64>,
        y: Option<DVector<f64>>,
        w: Option<DVector<f64>>,
    ) -> MethodResult {
        MethodResult {
            trace: self.trace,
            final_x: x,
            final_y: y,
            final_w: w,
            iterates: self.iterates,
            update_mismatch: None,
        }
    }
}

/// Chambolle-Pock with the data-term resolvent solved by warm-started CG to
/// relative residual `cg_tol`:
///
/// ```text
/// x⁺ = (I + τHᵀH)⁻¹(x - τ(Dᵀy - Hᵀf))
/// y⁺ = clip(y + θD(2x⁺ - x), lam)
/// ```
pub fn implicit_cp_run(
    data: &TvData<'_>,
    params: &CpParams,
    cg_tol: f64,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    settings: &RunSettings,
) -> Result<MethodResult> {
    data.validate()?;
    check_dim("implicit CP primal start", data.h.cols(), x0.len())?;
    check_dim("implicit CP dual start", data.d.rows(), y0.len())?;
    if let Some(bound) = super::inexact_cp::first_difference_norm_bound(data.d) {
        params.validate(bound)?;
    }
    let h = data.h.fresh_copy();
    let (tau, theta) = (params.tau, params.theta);
    let htf = h.apply_adjoint(data.f) * tau;
    let mut rec = Recorder::new(Method::ImplicitCp, settings);
    let (mut x, mut y) = (x0.clone(), y0.clone());
    for _ in 0..settings.iters {
        let b = &x - data.d.apply_adjoint_untracked(&y) * tau + &htf;
        let solve = solve_shifted_normal(&h, tau, &b, &x, cg_tol)?;
        let bar = &solve.x * 2.0 - &x;
        y = clip(&(&y + data.d.apply_untracked(&bar) * theta), data.lam)?;
        x = solve.x;
        if rec.push(data.objective(&x), solve.iterations, &h, || {
            crate::hpe::stack(&x, &y)
        }) {
            break;
        }
    }
    Ok(rec.finish(x, Some(y), None))
}

/// Stepsizes of the fully explicit Chambolle-Pock method on `K̃ = [H; D]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitCpParams {
    pub tau: f64,
    pub theta: f64,
}

impl ExplicitCpParams {
    /// `τ = 1/(‖K̃‖κ)`, `θ = κ/‖K̃‖` with `‖K̃‖ = sqrt(h_norm² + d_norm²)`.
    pub fn from_kappa(kappa: f64, h_norm: f64, d_norm: f64) -> Result<Self> {
        if !(kappa > 0.0 && h_norm >= 0.0 && d_norm >= 0.0) || h_norm + d_norm == 0.0 {
            return Err(Error::invalid(
                "explicit CP needs kappa > 0 and a nonzero operator norm",
            ));
        }
        let k = h_norm.hypot(d_norm);
        Ok(ExplicitCpParams {
            tau: 1.0 / (k * kappa),
            theta: kappa / k,
        })
    }
}

/// Chambolle-Pock dualised over both `H` and `D` (no linear solves):
///
/// ```text
/// x⁺ = x - τ(Hᵀu + Dᵀv)
/// u⁺ = (u + θ(H(2x⁺ - x) - f)) / (1 + θ)
/// v⁺ = clip(v + θD(2x⁺ - x), lam)
/// ```
pub fn explicit_cp_run(
    data: &TvData<'_>,
    params: &ExplicitCpParams,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    settings: &RunSettings,
) -> Result<MethodResult> {
    data.validate()?;
    check_dim("explicit CP primal start", data.h.cols(), x0.len())?;
    check_dim("explicit CP data dual", data.h.rows(), u0.len())?;
    check_dim("explicit CP TV dual", data.d.rows(), v0.len())?;
    let h = data.h.fresh_copy();
    let (tau, theta) = (params.tau, params.theta);
    let mut rec = Recorder::new(Method::ExplicitCp, settings);
    let (mut x, mut u, mut v) = (x0.clone(), u0.clone(), v0.clone());
    for _ in 0..settings.iters {
        let x_next = &x - (h.apply_adjoint(&u) + data.d.apply_adjoint_untracked(&v)) * tau;
        let bar = &x_next * 2.0 - &x;
        u = (&u + (h.apply(&bar) - data.f) * theta) / (1.0 + theta);
        v = clip(&(&v + data.d.apply_untracked(&bar) * theta), data.lam)?;
        x = x_next;
        if rec.push(data.objective(&x), 0, &h, || {
            crate::hpe::stack(&crate::hpe::stack(&x, &u), &v)
        }) {
            break;
        }
    }
    let y = crate::hpe::stack(&u, &v);
    Ok(rec.finish(x, Some(y), None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondatVuParams {
    pub tau: f64,
    pub theta: f64,
    /// Use `x - τ(Hᵀ(Hx - f) - Dᵀy)` instead of the convergent `+ Dᵀy`.
    pub printed_sign: bool,
}

impl CondatVuParams {
    /// Checks `0 < τ < 2/‖H‖²` and `0 < θ < (1/τ - ‖H‖²/2)/‖D‖²`.
    pub fn new(tau: f64, theta: f64, h_norm: f64, d_norm: f64) -> Result<Self> {
        let l = h_norm * h_norm;
        if !(tau > 0.0) || tau * l >= 2.0 {
            return Err(Error::invalid(format!(
                "Condat-Vu needs 0 < tau < 2/|H|^2, got tau = {tau}"
            )));
        }
        let bound = (1.0 / tau - l / 2.0) / (d_norm * d_norm);
        if !(theta > 0.0) || theta >= bound {
            return Err(Error::invalid(format!(
                "Condat-Vu needs 0 < theta < {bound}, got theta = {theta}"
            )));
        }
        Ok(CondatVuParams {
            tau,
            theta,
            printed_sign: false,
        })
    }

    /// `τ = 1/‖H‖²` and `θ = 0.99 (1/τ - ‖H‖²/2)/‖D‖²`.
    pub fn default_for(h_norm: f64, d_norm: f64) -> Result<Self> {
        let l = h_norm * h_norm;
        if !(l > 0.0 && d_norm > 0.0) {
            return Err(Error::invalid(
                "Condat-Vu defaults need nonzero operator norms",
            ));
        }
        let tau = 1.0 / l;
        Self::new(
            tau,
            0.99 * (1.0 / tau - l / 2.0) / (d_norm * d_norm),
            h_norm,
            d_norm,
        )
    }
}

/// Condat-Vu with a forward step on `½‖Hx - f‖²`:
///
/// ```text
/// x⁺ = x - τ(Hᵀ(Hx - f) + Dᵀy)
/// y⁺ = clip(y + θD(2x⁺ - x), lam)
/// ```
pub fn condat_vu_run(
    data: &TvData<'_>,
    params: &CondatVuParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    settings: &RunSettings,
) -> Result<MethodResult> {
    data.validate()?;
    check_dim("Condat-Vu primal start", data.h.cols(), x0.len())?;
    check_dim("Condat-Vu dual start", data.d.rows(), y0.len())?;
    let h = data.h.fresh_copy();
    let (tau, theta) = (params.tau, params.theta);
    let dual_sign = if params.printed_sign { -1.0 } else { 1.0 };
    let mut rec = Recorder::new(Method::CondatVu, settings);
    let (mut x, mut y) = (x0.clone(), y0.clone());
    for _ in 0..settings.iters {
        let grad = h.apply_adjoint(&(h.apply(&x) - data.f));
        let x_next = &x - (grad + data.d.apply_adjoint_untracked(&y) * dual_sign) * tau;
        let bar = &x_next * 2.0 - &x;
        y = clip(&(&y + data.d.apply_untracked(&bar) * theta), data.lam)?;
        x = x_next;
        if rec.push(data.objective(&x), 0, &h, || crate::hpe::stack(&x, &y)) {
            break;
        }
    }
    Ok(rec.finish(x, Some(y), None))
}

/// Davis-Yin with the data-term resolvent solved by warm-started CG:
///
/// ```text
/// x₁ = (I + γHᵀH)⁻¹(w + γHᵀf)
/// x₂ = soft(2x₁ - w - γ lam2 Dᵀ∇L_δ(Dx₁), γ lam1)
/// w⁺ = w + (x₂ - x₁)/(1 + α)
/// ```
///
/// CG is warm-started from the previous `x₁`; the objective is taken at `x₂`.
pub fn implicit_dy_run(
    data: &HuberL1Data<'_>,
    params: &DyParams,
    cg_tol: f64,
    w0: &DVector<f64>,
    settings: &RunSettings,
) -> Result<MethodResult> {
    data.validate()?;
    check_dim("implicit DY start", data.h.cols(), w0.len())?;
    let h = data.h.fresh_copy();
    let gamma = params.gamma;
    let htf = h.apply_adjoint(data.f) * gamma;
    let mut rec = Recorder::new(Method::ImplicitDy, settings);
    let mut w = w0.clone();
    let mut x1 = w0.clone();
    let mut x2 = w0.clone();
    for _ in 0..settings.iters {
        let solve = solve_shifted_normal(&h, gamma, &(&w + &htf), &x1, cg_tol)?;
        x1 = solve.x;
        let p = &x1 * 2.0 - &w - data.huber_forward(&x1) * gamma;
        x2 = soft_threshold(&p, gamma * data.lam1)?;
        w += (&x2 - &x1) / (1.0 + params.alpha);
        if rec.push(data.objective(&x2), solve.iterations, &h, || w.clone()) {
            break;
        }
    }
    Ok(rec.finish(x2, None, Some(w)))
}

/// Forward-backward (proximal gradient) with `γ = 1/(h_norm² + 4 lam2)`:
///
/// ```text
/// x⁺ = soft(x - γ(Hᵀ(Hx - f) + lam2 Dᵀ∇L_δ(Dx)), γ lam1)
/// ```
pub fn fb_run(
    data: &HuberL1Data<'_>,
    h_norm: f64,
    x0: &DVector<f64>,
    settings: &RunSettings,
) -> Result<MethodResult> {
    data.validate()?;
    check_dim("FB start", data.h.cols(), x0.len())?;
    let beta = h_norm * h_norm + 4.0 * data.lam2;
    if !(beta > 0.0) {
        return Err(Error::invalid("FB needs a positive smoothness bound"));
    }
    let gamma = 1.0 / beta;
    let h = data.h.fresh_copy();
    let mut rec = Recorder::new(Method::Fb, settings);
    let mut x = x0.clone();
    for _ in 0..settings.iters {
        let grad = h.apply_adjoint(&(h.apply(&x) - data.f))
            + huber_forward(data.d, data.lam2, data.delta, &x);
        x = soft_threshold(&(&x - grad * gamma), gamma * data.lam1)?;
        if rec.push(data.objective(&x), 0, &h, || x.clone()) {
            break;
        }
    }
    Ok(rec.finish(x, None, None))
}
