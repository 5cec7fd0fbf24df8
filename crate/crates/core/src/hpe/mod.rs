//! Degenerate preconditioned hybrid proximal extragradient (HPE) core.
//!
//! An HPE iteration for `0 ∈ 𝒜u` with a positive semidefinite preconditioner
//! `M` looks for a pair `(ũ, v)` with `M v ∈ 𝒜ũ` that passes the relative
//! error test
//!
//! ```text
//! ‖λ v + ũ - u‖_M <= σ ‖ũ - u‖_M
//! ```
//!
//! and then takes the extragradient step `u ← u - λ v`. With a factorization
//! `M = C C*` the same iteration can be run on `w = C* u` only (the reduced
//! form), which is how the Douglas-Rachford type methods are driven.
//!
//! Producing and improving pairs is delegated to an oracle ([`HpeOracle`],
//! [`ReducedHpeOracle`]); this module owns the acceptance loop, the update, the
//! trace and the audit of the fundamental estimates ([`audit_prop1`]).

mod audit;
mod trace;

pub use audit::{audit_prop1, AuditOptions, AuditReport};
pub(crate) use trace::Stopwatch;
pub use trace::{IterationRecord, RunTrace};

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg::LinearMap;

type VecMap = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;

/// Self-adjoint positive semidefinite `M`, optionally with a factor `C`,
/// `M = C C*`, in which case `‖u‖_M = ‖C* u‖`.
pub struct Preconditioner {
    dim: usize,
    apply: VecMap,
    factor: Option<LinearMap>,
}

impl std::fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preconditioner")
            .field("dim", &self.dim)
            .field("factor", &self.factor)
            .finish()
    }
}

impl Preconditioner {
    pub fn from_apply(dim: usize, apply: impl Fn(&DVector<f64>) -> DVector<f64> + 'static) -> Self {
        Preconditioner {
            dim,
            apply: Box::new(apply),
            factor: None,
        }
    }

    /// `M = C C*` for a factor `C` mapping the reduced space into the full one.
    pub fn from_factor(c: LinearMap) -> Self {
        let dim = c.rows();
        let inner = c.fresh_copy();
        Preconditioner {
            dim,
            apply: Box::new(move |u| inner.apply_untracked(&inner.apply_adjoint_untracked(u))),
            factor: Some(c),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_apply(dim, |u| u.clone())
    }

    /// `M = [[I/τ, -K*], [-K, I/θ]]` on stacked `(x, y)`.
    pub fn chambolle_pock(k: &LinearMap, tau: f64, theta: f64) -> Self {
        let k = k.fresh_copy();
        let (n, m) = (k.cols(), k.rows());
        Self::from_apply(n + m, move |u| {
            let x = u.rows(0, n).into_owned();
            let y = u.rows(n, m).into_owned();
            let top = &x / tau - k.apply_adjoint_untracked(&y);
            let bottom = &y / theta - k.apply_untracked(&x);
            stack(&top, &bottom)
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self) -> Option<&LinearMap> {
        self.factor.as_ref()
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.apply)(u)
    }

    /// `‖u‖_M`; via `‖C* u‖` when the factor is known, otherwise
    /// `sqrt(max(⟨u, M u⟩, 0))`.
    pub fn seminorm(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim("M-seminorm", self.dim, u.len())?;
        Ok(match &self.factor {
            Some(c) => c.apply_adjoint_untracked(u).norm(),
            None => u.dot(&(self.apply)(u)).max(0.0).sqrt(),
        })
    }
}

/// `‖u‖_M`.
pub fn m_seminorm(p: &Preconditioner, u: &DVector<f64>) -> Result<f64> {
    p.seminorm(u)
}

/// Stepsizes `λ_k`; a finite sequence repeats its last entry.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSizes {
    Constant(f64),
    Sequence(Vec<f64>),
}

impl StepSizes {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            StepSizes::Constant(l) => *l,
            StepSizes::Sequence(seq) => seq[k.min(seq.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            StepSizes::Constant(l) => *l > 0.0 && l.is_finite(),
            StepSizes::Sequence(seq) => {
                !seq.is_empty() && seq.iter().all(|l| *l > 0.0 && l.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("stepsizes must be finite and positive"))
        }
    }
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes::Constant(1.0)
    }
}

pub const DEFAULT_INNER_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct HpeConfig {
    pub sigma: f64,
    pub step_sizes: StepSizes,
    /// Maximum number of refinements per outer iteration.
    pub inner_cap: usize,
    /// Record seminorm quantities and reference distances.
    pub record_invariants: bool,
    pub record_wall_time: bool,
    pub stop: StopRule,
}

/// Early termination, checked after every recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopRule {
    /// Stop once the cumulative H/Hᵀ application count reaches this value.
    pub application_budget: Option<u64>,
    /// Stop once the objective is at or below this value.
    pub objective_target: Option<f64>,
}

impl StopRule {
    pub fn fires(&self, applications: u64, objective: f64) -> bool {
        self.application_budget.is_some_and(|b| applications >= b)
            || self.objective_target.is_some_and(|t| objective <= t)
    }
}

impl HpeConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        let cfg = HpeConfig {
            sigma,
            step_sizes: StepSizes::default(),
            inner_cap: DEFAULT_INNER_CAP,
            record_invariants: true,
            record_wall_time: false,
            stop: StopRule::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_step_sizes(mut self, step_sizes: StepSizes) -> Self {
        self.step_sizes = step_sizes;
        self
    }

    pub fn with_inner_cap(mut self, cap: usize) -> Self {
        self.inner_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::invalid(format!(
                "sigma must lie in [0, 1), got {}",
                self.sigma
            )));
        }
        self.step_sizes.validate()
    }
}

/// Outcome of the relative-error test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCheck {
    pub accepted: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl ErrorCheck {
    /// `lhs <= σ rhs`; `0 <= σ · 0` counts as accepted.
    pub fn evaluate(lhs: f64, rhs: f64, sigma: f64) -> Self {
        ErrorCheck {
            accepted: lhs <= sigma * rhs,
            lhs,
            rhs,
        }
    }
}

/// `lhs = ‖λv + ũ - u‖_M`, `rhs = ‖ũ - u‖_M`, accepted iff `lhs <= σ rhs`.
pub fn hpe_error_check(
    p: &Preconditioner,
    lam: f64,
    v: &DVector<f64>,
    u_tilde: &DVector<f64>,
    u: &DVector<f64>,
    sigma: f64,
) -> Result<ErrorCheck> {
    check_dim("hpe witness", p.dim(), v.len())?;
    check_dim("hpe candidate", p.dim(), u_tilde.len())?;
    let step = u_tilde - u;
    let rhs = p.seminorm(&step)?;
    let lhs = p.seminorm(&(v * lam + &step))?;
    Ok(ErrorCheck::evaluate(lhs, rhs, sigma))
}

/// The extragradient step `u - λ v`.
pub fn hpe_update(u: &DVector<f64>, lam: f64, v: &DVector<f64>) -> DVector<f64> {
    u - v * lam
}

/// Candidate pair in full form: `M v ∈ 𝒜ũ`.
#[derive(Debug, Clone)]
pub struct FullPair {
    pub u_tilde: DVector<f64>,
    pub v: DVector<f64>,
    /// The pair solves the proximal subproblem to working precision.
    pub exact: bool,
    /// Inner solver iterations spent on this pair so far.
    pub inner_steps: usize,
}

/// Candidate pair in reduced form: `C z ∈ 𝒜ũ`, represented through `C* ũ`.
#[derive(Debug, Clone)]
pub struct ReducedPair {
    pub c_adj_u_tilde: DVector<f64>,
    pub z: DVector<f64>,
    pub exact: bool,
    pub inner_steps: usize,
}

/// Produces and improves full-form pairs.
pub trait HpeOracle {
    fn produce(&mut self, u: &DVector<f64>, lambda: f64) -> Result<FullPair>;

    /// Improves the last pair; `Ok(None)` when no improvement is possible.
    fn refine(&mut self, u: &DVector<f64>, lambda: f64) -> Result<Option<FullPair>>;

    /// Cumulative applications of the expensive operator.
    fn operator_applications(&self) -> u64 {
        0
    }
}

/// Produces and improves reduced pairs.
pub trait ReducedHpeOracle {
    fn produce(&mut self, w: &DVector<f64>, lambda: f64) -> Result<ReducedPair>;

    fn refine(&mut self, w: &DVector<f64>, lambda: f64) -> Result<Option<ReducedPair>>;

    fn operator_applications(&self) -> u64 {
        0
    }
}

/// Accepted pair and its error-test data.
#[derive(Debug, Clone)]
pub struct CertifiedPair {
    pub u_tilde: DVector<f64>,
    /// `v` in full form, `z` in reduced form (the latter paired with `C* ũ`).
    pub witness: DVector<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub inner_iterations: usize,
    pub exact: bool,
}

/// Result of one full-form outer iteration.
#[derive(Debug, Clone)]
pub struct HpeStep {
    pub u_next: DVector<f64>,
    pub pair: CertifiedPair,
    pub lambda: f64,
}

fn certification_failure(k: usize, inner: usize, check: ErrorCheck, sigma: f64) -> Error {
    Error::CertificationFailure {
        iteration: k,
        inner_iterations: inner,
        lhs: check.lhs,
        bound: sigma * check.rhs,
    }
}

/// Runs the produce/refine loop until the pair is certified, then updates.
pub fn hpe_step<O: HpeOracle + ?Sized>(
    oracle: &mut O,
    p: &Preconditioner,
    u: &DVector<f64>,
    lambda: f64,
    sigma: f64,
    inner_cap: usize,
    k: usize,
) -> Result<HpeStep> {
    let mut pair = oracle.produce(u, lambda)?;
    let mut refinements = 0;
    let check = loop {
        let check = hpe_error_check(p, lambda, &pair.v, &pair.u_tilde, u, sigma)?;
        if check.accepted || pair.exact {
            break check;
        }
        if refinements >= inner_cap {
            return Err(certification_failure(k, pair.inner_steps, check, sigma));
        }
        match oracle.refine(u, lambda)? {
            Some(next) => pair = next,
            None => return Err(certification_failure(k, pair.inner_steps, check, sigma)),
        }
        refinements += 1;
    };
    let u_next = hpe_update(u, lambda, &pair.v);
    Ok(HpeStep {
        u_next,
        pair: CertifiedPair {
            u_tilde: pair.u_tilde,
            witness: pair.v,
            lhs: check.lhs,
            rhs: check.rhs,
            inner_iterations: pair.inner_steps,
            exact: pair.exact && !check.accepted,
        },
        lambda,
    })
}

/// Result of one reduced outer iteration.
#[derive(Debug, Clone)]
pub struct ReducedStep {
    pub w_next: DVector<f64>,
    pub c_adj_u_tilde: DVector<f64>,
    pub z: DVector<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub inner_iterations: usize,
    pub exact: bool,
    pub lambda: f64,
}

/// Reduced acceptance loop:
/// `‖λz + C*ũ - w‖ <= σ ‖C*ũ - w‖`, then `w ← w - λ z`.
pub fn reduced_hpe_step<O: ReducedHpeOracle + ?Sized>(
    oracle: &mut O,
    w: &DVector<f64>,
    lambda: f64,
    sigma: f64,
    inner_cap: usize,
    k: usize,
) -> Result<ReducedStep> {
    let mut pair = oracle.produce(w, lambda)?;
    let mut refinements = 0;
    let check = loop {
        check_dim("reduced candidate", w.len(), pair.c_adj_u_tilde.len())?;
        check_dim("reduced witness", w.len(), pair.z.len())?;
        let step = &pair.c_adj_u_tilde - w;
        let lhs = (&pair.z * lambda + &step).norm();
        let check = ErrorCheck::evaluate(lhs, step.norm(), sigma);
        if check.accepted || pair.exact {
            break check;
        }
        if refinements >= inner_cap {
            return Err(certification_failure(k, pair.inner_steps, check, sigma));
        }
        match oracle.refine(w, lambda)? {
            Some(next) => pair = next,
            None => return Err(certification_failure(k, pair.inner_steps, check, sigma)),
        }
        refinements += 1;
    };
    Ok(ReducedStep {
        w_next: w - &pair.z * lambda,
        c_adj_u_tilde: pair.c_adj_u_tilde,
        z: pair.z,
        lhs: check.lhs,
        rhs: check.rhs,
        inner_iterations: pair.inner_steps,
        exact: pair.exact && !check.accepted,
        lambda,
    })
}

/// Final state and trace of a core run.
#[derive(Debug, Clone)]
pub struct HpeRun {
    pub trace: RunTrace,
    /// `u` (full form) or `w` (reduced form) after the last iteration.
    pub state: DVector<f64>,
}

/// Full-form preconditioned HPE for `iters` outer iterations.
///
/// `objective` is evaluated after every iteration with the oracle and the new
/// iterate. When `reference` is given, `‖u^k - u*‖_M` is recorded as well.
pub fn hpe_run<O, F>(
    oracle: &mut O,
    p: &Preconditioner,
    u0: &DVector<f64>,
    cfg: &HpeConfig,
    iters: usize,
    mut objective: F,
    reference: Option<&DVector<f64>>,
) -> Result<HpeRun>
where
    O: HpeOracle + ?Sized,
    F: FnMut(&O, &DVector<f64>) -> f64,
{
    cfg.validate()?;
    check_dim("hpe initial point", p.dim(), u0.len())?;
    if let Some(r) = reference {
        check_dim("hpe reference point", p.dim(), r.len())?;
    }
    let clock = Stopwatch::start(cfg.record_wall_time);
    let mut trace = RunTrace {
        sigma: Some(cfg.sigma),
        ..RunTrace::default()
    };
    let record = cfg.record_invariants;
    if record {
        if let Some(r) = reference {
            trace.reference_distance0 = Some(p.seminorm(&(u0 - r))?);
        }
    }
    let mut u = u0.clone();
    for k in 0..iters {
        let lambda = cfg.step_sizes.get(k);
        let step = hpe_step(oracle, p, &u, lambda, cfg.sigma, cfg.inner_cap, k)?;
        let (seminorm_residual, reference_distance) = if record {
            let res = p.seminorm(&(&step.pair.witness * lambda))?;
            let dist = match reference {
                Some(r) => Some(p.seminorm(&(&step.u_next - r))?),
                None => None,
            };
            (Some(res), dist)
        } else {
            (None, None)
        };
        u = step.u_next;
        trace.records.push(IterationRecord {
            k,
            objective: objective(oracle, &u),
            lhs: Some(step.pair.lhs),
            rhs: Some(step.pair.rhs),
            inner_iterations: step.pair.inner_iterations,
            h_applications: oracle.operator_applications(),
            seminorm_step: record.then_some(step.pair.rhs),
            seminorm_residual,
            reference_distance,
            certified_exact: step.pair.exact,
            wall_ms: clock.elapsed_ms(),
        });
        let last = &trace.records[trace.records.len() - 1];
        if cfg.stop.fires(last.h_applications, last.objective) {
            break;
        }
    }
    Ok(HpeRun { trace, state: u })
}

/// Reduced HPE (iterating `w = C* u`) for `iters` outer iterations.
pub fn reduced_hpe_run<O, F>(
    oracle: &mut O,
    w0: &DVector<f64>,
    cfg: &HpeConfig,
    iters: usize,
    mut objective: F,
    reference: Option<&DVector<f64>>,
) -> Result<HpeRun>
where
    O: ReducedHpeOracle + ?Sized,
    F: FnMut(&O, &DVector<f64>) -> f64,
{
    reduced_hpe_run_with(
        oracle,
        w0,
        cfg,
        iters,
        |o, step| objective(o, &step.w_next),
        reference,
    )
}

/// [`reduced_hpe_run`] with access to the whole [`ReducedStep`] when
/// evaluating the objective.
pub(crate) fn reduced_hpe_run_with<O, F>(
    oracle: &mut O,
    w0: &DVector<f64>,
    cfg: &HpeConfig,
    iters: usize,
    mut observe: F,
    reference: Option<&DVector<f64>>,
) -> Result<HpeRun>
where
    O: ReducedHpeOracle + ?Sized,
    F: FnMut(&O, &ReducedStep) -> f64,
{
    cfg.validate()?;
    if let Some(r) = reference {
        check_dim("reduced reference point", w0.len(), r.len())?;
    }
    let clock = Stopwatch::start(cfg.record_wall_time);
    let record = cfg.record_invariants;
    let mut trace = RunTrace {
        sigma: Some(cfg.sigma),
        reference_distance0: reference.filter(|_| record).map(|r| (w0 - r).norm()),
        ..RunTrace::default()
    };
    let mut w = w0.clone();
    for k in 0..iters {
        let lambda = cfg.step_sizes.get(k);
        let step = reduced_hpe_step(oracle, &w, lambda, cfg.sigma, cfg.inner_cap, k)?;
        let objective = observe(oracle, &step);
        trace.records.push(IterationRecord {
            k,
            objective,
            lhs: Some(step.lhs),
            rhs: Some(step.rhs),
            inner_iterations: step.inner_iterations,
            h_applications: oracle.operator_applications(),
            seminorm_step: record.then_some(step.rhs),
            seminorm_residual: record.then(|| (&step.z * lambda).norm()),
            reference_distance: reference
                .filter(|_| record)
                .map(|r| (&step.w_next - r).norm()),
            certified_exact: step.exact,
            wall_ms: clock.elapsed_ms(),
        });
        w = step.w_next;
        if cfg.stop.fires(oracle.operator_applications(), objective) {
            break;
        }
    }
    Ok(HpeRun { trace, state: w })
}

pub(crate) fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}
