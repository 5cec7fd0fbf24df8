//! Splitting methods built on the HPE core, and the exact/explicit baselines
//! they are compared against.
//!
//! The three HPE methods are generic over the inexact resolvent of `A₁`
//! ([`InexactResolvent`](crate::operators::InexactResolvent)) and take the
//! remaining resolvents as closures `(x, scale) -> J_{scale·A}(x)`. The
//! `*_tv` / `*_huber` wrappers and the baselines are specialised to the two
//! test problems in [`crate::problems`].

mod baselines;
mod eckstein_yao;
mod inexact_cp;
mod inexact_dy;

pub use baselines::{
    condat_vu_run, explicit_cp_run, fb_run, implicit_cp_run, implicit_dy_run, CondatVuParams,
    ExplicitCpParams,
};
pub use eckstein_yao::eckstein_yao_run;
pub use inexact_cp::{inexact_cp_run, inexact_cp_tv};
pub use inexact_dy::{inexact_dy_huber, inexact_dy_run};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hpe::{HpeConfig, RunTrace, StepSizes, StopRule, DEFAULT_INNER_CAP};
use crate::linalg::LinearMap;

/// Floor for `β` when the forward operator vanishes, so that `α` stays defined.
pub const BETA_FLOOR: f64 = 1e-12;

/// Default CG tolerance of the implicit baselines.
pub const DEFAULT_CG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    HpeEy,
    HpeCp,
    ImplicitCp,
    ExplicitCp,
    CondatVu,
    HpeDy,
    ImplicitDy,
    Fb,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::HpeEy,
        Method::HpeCp,
        Method::ImplicitCp,
        Method::ExplicitCp,
        Method::CondatVu,
        Method::HpeDy,
        Method::ImplicitDy,
        Method::Fb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::HpeEy => "hpe-ey",
            Method::HpeCp => "hpe-cp",
            Method::ImplicitCp => "implicit-cp",
            Method::ExplicitCp => "explicit-cp",
            Method::CondatVu => "condat-vu",
            Method::HpeDy => "hpe-dy",
            Method::ImplicitDy => "implicit-dy",
            Method::Fb => "fb",
        }
    }

    /// Uses the relative-error criterion (and so carries lhs/rhs columns).
    pub fn is_hpe(self) -> bool {
        matches!(self, Method::HpeEy | Method::HpeCp | Method::HpeDy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Stepsizes of the (inexact) Chambolle-Pock method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpParams {
    pub tau: f64,
    pub theta: f64,
}

impl CpParams {
    pub fn new(tau: f64, theta: f64) -> Result<Self> {
        if !(tau > 0.0 && theta > 0.0 && tau.is_finite() && theta.is_finite()) {
            return Err(Error::invalid(format!(
                "CP stepsizes must be positive (tau = {tau}, theta = {theta})"
            )));
        }
        Ok(CpParams { tau, theta })
    }

    /// `τ = 1/(2κ)`, `θ = κ/2`, admissible whenever `‖K‖ <= 2`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::invalid(format!("kappa must be > 0, got {kappa}")));
        }
        Self::new(1.0 / (2.0 * kappa), kappa / 2.0)
    }

    /// Checks `τθ‖K‖² <= 1` for a given bound on `‖K‖`.
    pub fn validate(&self, k_norm: f64) -> Result<()> {
        let product = self.tau * self.theta * k_norm * k_norm;
        if product > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "tau * theta * |K|^2 = {product} exceeds 1 (tau = {}, theta = {}, |K| = {k_norm})",
                self.tau, self.theta
            )));
        }
        Ok(())
    }
}

/// Parameters of the (inexact) Davis-Yin method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyParams {
    pub gamma: f64,
    /// Upper bound on the cocoercivity constant of `B`.
    pub beta: f64,
    /// `γβ / (4 - γβ)`.
    pub alpha: f64,
}

impl DyParams {
    /// Requires `γ ∈ (0, 2/β)`; `β = 0` means `B = 0` and gives `α = 0`.
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() || gamma * beta >= 2.0 {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 2/beta), got gamma = {gamma}, beta = {beta}"
            )));
        }
        let gb = gamma * beta;
        Ok(DyParams {
            gamma,
            beta,
            alpha: gb / (4.0 - gb),
        })
    }

    /// `β = 4 lam2` (floored at [`BETA_FLOOR`]) and `γ = 1/β`; with
    /// `lam2 = 0` the stepsize falls back to 1.
    pub fn for_huber(lam2: f64) -> Result<Self> {
        if !(lam2 >= 0.0) {
            return Err(Error::invalid(format!("lam2 must be >= 0, got {lam2}")));
        }
        let beta = (4.0 * lam2).max(BETA_FLOOR);
        let gamma = if lam2 > 0.0 { 1.0 / beta } else { 1.0 };
        Self::new(gamma, beta)
    }
}

/// Per-run options shared by all methods.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Relative-error tolerance; ignored by the baselines.
    pub sigma: f64,
    pub iters: usize,
    pub inner_cap: usize,
    pub record_invariants: bool,
    pub record_wall_time: bool,
    /// Keep the state after every iteration in [`MethodResult::iterates`].
    pub keep_iterates: bool,
    /// Reference state for the distance columns of HPE traces (`w*` for the
    /// reduced methods, stacked `(x*, y*)` for Chambolle-Pock).
    pub reference: Option<DVector<f64>>,
    pub stop: StopRule,
}

impl RunSettings {
    pub fn new(sigma: f64, iters: usize) -> Self {
        RunSettings {
            sigma,
            iters,
            inner_cap: DEFAULT_INNER_CAP,
            record_invariants: true,
            record_wall_time: false,
            keep_iterates: false,
            reference: None,
            stop: StopRule::default(),
        }
    }

    /// Stop once the cumulative H/Hᵀ application count reaches `budget`.
    pub fn with_application_budget(mut self, budget: u64) -> Self {
        self.stop.application_budget = Some(budget);
        self
    }

    /// Stop once the objective drops to `target` or below.
    pub fn with_objective_target(mut self, target: f64) -> Self {
        self.stop.objective_target = Some(target);
        self
    }

    pub fn with_reference(mut self, reference: DVector<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }

    pub fn with_wall_time(mut self) -> Self {
        self.record_wall_time = true;
        self
    }

    pub(crate) fn hpe_config(&self) -> Result<HpeConfig> {
        let cfg = HpeConfig {
            sigma: self.sigma,
            step_sizes: StepSizes::Constant(1.0),
            inner_cap: self.inner_cap,
            record_invariants: self.record_invariants,
            record_wall_time: self.record_wall_time,
            stop: self.stop,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub trace: RunTrace,
    /// Primal estimate at which the objective was evaluated last.
    pub final_x: DVector<f64>,
    pub final_y: Option<DVector<f64>>,
    pub final_w: Option<DVector<f64>>,
    /// State after each iteration when requested: `w`, stacked `(x, y)` or `x`.
    pub iterates: Vec<DVector<f64>>,
    /// Largest difference between the two equivalent Eckstein-Yao updates.
    pub update_mismatch: Option<f64>,
}

impl MethodResult {
    /// State the method would restart from (`w`, stacked `(x, y)` or `x`).
    pub fn state(&self) -> DVector<f64> {
        if let Some(w) = &self.final_w {
            return w.clone();
        }
        match &self.final_y {
            Some(y) => crate::hpe::stack(&self.final_x, y),
            None => self.final_x.clone(),
        }
    }
}

/// `½‖Hx - f‖² + lam ‖Dx‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct TvData<'a> {
    pub h: &'a LinearMap,
    pub f: &'a DVector<f64>,
    pub d: &'a LinearMap,
    pub lam: f64,
}

impl TvData<'_> {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        crate::problems::objective_cp(self.h, self.f, self.d, self.lam, x)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        crate::error::check_dim("TV data", self.h.rows(), self.f.len())?;
        crate::error::check_dim("difference operator", self.h.cols(), self.d.cols())?;
        if !(self.lam >= 0.0) {
            return Err(Error::invalid(format!(
                "lam must be >= 0, got {}",
                self.lam
            )));
        }
        Ok(())
    }
}

/// `½‖Hx - f‖² + lam1 ‖x‖₁ + lam2 L_δ(Dx)`.
#[derive(Debug, Clone, Copy)]
pub struct HuberL1Data<'a> {
    pub h: &'a LinearMap,
    pub f: &'a DVector<f64>,
    pub d: &'a LinearMap,
    pub lam1: f64,
    pub lam2: f64,
    pub delta: f64,
}

impl HuberL1Data<'_> {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        crate::problems::objective_dy(self.h, self.f, self.d, self.lam1, self.lam2, self.delta, x)
    }

    /// `lam2 Dᵀ ∇L_δ(Dx)`, using untracked applications of `D`.
    pub fn huber_forward(&self, x: &DVector<f64>) -> DVector<f64> {
        huber_forward(self.d, self.lam2, self.delta, x)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        crate::error::check_dim("Huber data", self.h.rows(), self.f.len())?;
        crate::error::check_dim("difference operator", self.h.cols(), self.d.cols())?;
        if !(self.lam1 >= 0.0 && self.lam2 >= 0.0) {
            return Err(Error::invalid("regularization parameters must be >= 0"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

pub(crate) fn huber_forward(
    d: &LinearMap,
    lam2: f64,
    delta: f64,
    x: &DVector<f64>,
) -> DVector<f64> {
    let dx = d.apply_untracked(x);
    let g = dx.map(|t| {
        if t.abs() <= delta {
            t
        } else {
            delta * t.signum()
        }
    });
    d.apply_adjoint_untracked(&g) * lam2
}

pub(crate) fn split(u: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (
        u.rows(0, n).into_owned(),
        u.rows(n, u.len() - n).into_owned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("pdhg".parse::<Method>().is_err());
    }

    #[test]
    fn cp_params_defaults_and_validation() {
        let p = CpParams::from_kappa(0.5).unwrap();
        assert_eq!((p.tau, p.theta), (1.0, 0.25));
        assert!(p.validate(2.0).is_ok());
        assert!(p.validate(2.1).is_err());
        assert!(CpParams::from_kappa(0.0).is_err());
    }

    #[test]
    fn dy_params() {
        let p = DyParams::for_huber(0.1).unwrap();
        assert!((p.beta - 0.4).abs() < 1e-15);
        assert!((p.gamma - 2.5).abs() < 1e-15);
        assert!((p.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!(DyParams::new(5.0, 0.4).is_err());
        assert_eq!(DyParams::new(3.0, 0.0).unwrap().alpha, 0.0);
        let floored = DyParams::for_huber(0.0).unwrap();
        assert_eq!(floored.beta, BETA_FLOOR);
        assert!(floored.alpha < 1e-12);
    }
}
