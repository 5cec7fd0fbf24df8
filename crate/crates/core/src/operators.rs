//! Proximal and resolvent building blocks.
//!
//! The refinable least-squares resolvent is the piece that makes the HPE
//! methods cheap: instead of solving `(I + τHᵀH) x = rhs + τHᵀf` to a fixed
//! tolerance it advances conjugate gradients one step at a time and always
//! reports the exact witness `a = Hᵀ(H x̃ - f)` of the current candidate.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cg_solve, CgState, LinearMap, StopReason, StoppingRule};

#[inline]
fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise `sign(x) max(|x| - eta, 0)`, the prox of `eta ‖·‖₁`.
pub fn soft_threshold(x: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!(
            "soft threshold needs eta >= 0, got {eta}"
        )));
    }
    Ok(x.map(|t| sign(t) * (t.abs() - eta).max(0.0)))
}

/// Componentwise projection onto `[-lam, lam]`.
pub fn clip(x: &DVector<f64>, lam: f64) -> Result<DVector<f64>> {
    if !(lam >= 0.0) {
        return Err(Error::invalid(format!("clip needs lam >= 0, got {lam}")));
    }
    Ok(x.map(|t| t.clamp(-lam, lam)))
}

/// `J_{θA⁻¹}` for `A = lam ∂‖·‖₁`: the clip onto `[-lam, lam]`, whatever `θ > 0` is.
pub fn l1_dual_resolvent(lam: f64) -> impl Fn(&DVector<f64>, f64) -> DVector<f64> + Clone {
    move |x, _theta| x.map(|t| t.clamp(-lam, lam))
}

/// `J_{γA}` for `A = lam ∂‖·‖₁`: soft thresholding at `γ lam`.
pub fn l1_resolvent(lam: f64) -> impl Fn(&DVector<f64>, f64) -> DVector<f64> + Clone {
    move |x, gamma| {
        let eta = gamma * lam;
        x.map(|t| sign(t) * (t.abs() - eta).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParams {
    pub delta: f64,
    pub lambda2: f64,
}

impl HuberParams {
    pub fn new(delta: f64, lambda2: f64) -> Result<Self> {
        if !(delta > 0.0) || !(lambda2 > 0.0) {
            return Err(Error::invalid(format!(
                "Huber parameters must be positive (delta = {delta}, lambda2 = {lambda2})"
            )));
        }
        Ok(HuberParams { delta, lambda2 })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "Huber delta must be > 0, got {delta}"
        )))
    }
}

/// `Σ h_δ(y_i)` with `h_δ(t) = t²/2` for `|t| <= δ` and `δ(|t| - δ/2)` otherwise.
pub fn huber_value(y: &DVector<f64>, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(y.iter()
        .map(|&t| {
            if t.abs() <= delta {
                0.5 * t * t
            } else {
                delta * (t.abs() - 0.5 * delta)
            }
        })
        .sum())
}

/// Gradient of [`huber_value`]; 1-Lipschitz.
pub fn huber_gradient(y: &DVector<f64>, delta: f64) -> Result<DVector<f64>> {
    check_delta(delta)?;
    Ok(y.map(|t| if t.abs() <= delta { t } else { delta * sign(t) }))
}

#[derive(Debug, Clone)]
pub struct LsqSolve {
    pub x: DVector<f64>,
    pub iterations: usize,
}

/// `J_{τA₁}(rhs) = (I + τHᵀH)⁻¹(rhs + τHᵀf)` by warm-started CG at a fixed
/// relative tolerance.
///
/// Fails with a numerical error when CG needs more than `10 n` steps.
pub fn lsq_resolvent_exact(
    h: &LinearMap,
    f: &DVector<f64>,
    tau: f64,
    rhs: &DVector<f64>,
    warm_start: &DVector<f64>,
    cg_tol: f64,
) -> Result<LsqSolve> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    check_dim("lsq resolvent rhs", h.cols(), rhs.len())?;
    check_dim("lsq resolvent data", h.rows(), f.len())?;
    let b = rhs + h.apply_adjoint(f) * tau;
    solve_shifted_normal(h, tau, &b, warm_start, cg_tol)
}

pub(crate) fn solve_shifted_normal(
    h: &LinearMap,
    tau: f64,
    b: &DVector<f64>,
    warm_start: &DVector<f64>,
    cg_tol: f64,
) -> Result<LsqSolve> {
    let n = h.cols();
    let cap = 10 * n;
    let out = cg_solve(
        |v| shifted_normal_apply(h, tau, v),
        b,
        warm_start,
        StoppingRule::relative_residual(cg_tol).or_max_iterations(cap),
    )?;
    if out.reason == StopReason::MaxIterations {
        return Err(Error::Numerical(format!(
            "CG did not reach relative residual {cg_tol:e} within {cap} steps (reached {:e})",
            out.relative_residual
        )));
    }
    Ok(LsqSolve {
        x: out.x,
        iterations: out.iterations,
    })
}

/// `v + τ Hᵀ H v`; two counted applications of `H`.
pub(crate) fn shifted_normal_apply(h: &LinearMap, tau: f64, v: &DVector<f64>) -> DVector<f64> {
    let hv = h.apply(v);
    let mut out = h.apply_adjoint(&hv);
    out *= tau;
    out += v;
    out
}

/// An (approximate) resolvent `J_{sA}` that can be tightened step by step.
///
/// After [`propose`](Self::propose) the oracle holds a pair `(x̃, a)` with
/// `a ∈ A x̃` and `s a + x̃ ≈ rhs`; every successful [`refine`](Self::refine)
/// reduces the error while keeping the inclusion exact.
pub trait InexactResolvent {
    /// The resolvent scale `s` (τ or γ in the splitting methods).
    fn scale(&self) -> f64;

    fn dim(&self) -> usize;

    /// Starts a new resolvent evaluation for `rhs`, warm-started from the
    /// previous candidate.
    fn propose(&mut self, rhs: &DVector<f64>) -> Result<()>;

    /// One improvement step. `Ok(false)` means no further progress is possible.
    fn refine(&mut self) -> Result<bool>;

    fn candidate(&self) -> &DVector<f64>;

    fn witness(&self) -> &DVector<f64>;

    /// `s · a`.
    fn scaled_witness(&self) -> DVector<f64> {
        self.witness() * self.scale()
    }

    /// True when the pair solves `s a + x̃ = rhs` to working precision, in
    /// which case any relative-error test is considered met.
    fn is_exact(&self) -> bool;

    /// Improvement steps since the last proposal.
    fn inner_steps(&self) -> usize;

    /// Cumulative applications of the expensive operator (`H` and `Hᵀ`).
    fn operator_applications(&self) -> u64 {
        0
    }
}

impl<T: InexactResolvent + ?Sized> InexactResolvent for &mut T {
    fn scale(&self) -> f64 {
        (**self).scale()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn propose(&mut self, rhs: &DVector<f64>) -> Result<()> {
        (**self).propose(rhs)
    }
    fn refine(&mut self) -> Result<bool> {
        (**self).refine()
    }
    fn candidate(&self) -> &DVector<f64> {
        (**self).candidate()
    }
    fn witness(&self) -> &DVector<f64> {
        (**self).witness()
    }
    fn scaled_witness(&self) -> DVector<f64> {
        (**self).scaled_witness()
    }
    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
    fn inner_steps(&self) -> usize {
        (**self).inner_steps()
    }
    fn operator_applications(&self) -> u64 {
        (**self).operator_applications()
    }
}

/// Exact resolvent given in closed form, `x̃ = J(rhs, s)` with witness `(rhs - x̃)/s`.
pub struct ClosedFormResolvent<F> {
    scale: f64,
    resolvent: F,
    x: DVector<f64>,
    a: DVector<f64>,
    scaled: DVector<f64>,
}

impl<F: Fn(&DVector<f64>, f64) -> DVector<f64>> ClosedFormResolvent<F> {
    pub fn new(dim: usize, scale: f64, resolvent: F) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid(format!(
                "resolvent scale must be > 0, got {scale}"
            )));
        }
        Ok(ClosedFormResolvent {
            scale,
            resolvent,
            x: DVector::zeros(dim),
            a: DVector::zeros(dim),
            scaled: DVector::zeros(dim),
        })
    }
}

impl<F: Fn(&DVector<f64>, f64) -> DVector<f64>> InexactResolvent for ClosedFormResolvent<F> {
    fn scale(&self) -> f64 {
        self.scale
    }
    fn dim(&self) -> usize {
        self.x.len()
    }
    fn propose(&mut self, rhs: &DVector<f64>) -> Result<()> {
        check_dim("closed-form resolvent", self.x.len(), rhs.len())?;
        self.x = (self.resolvent)(rhs, self.scale);
        self.scaled = rhs - &self.x;
        self.a = &self.scaled / self.scale;
        Ok(())
    }
    fn refine(&mut self) -> Result<bool> {
        Ok(false)
    }
    fn candidate(&self) -> &DVector<f64> {
        &self.x
    }
    fn witness(&self) -> &DVector<f64> {
        &self.a
    }
    fn scaled_witness(&self) -> DVector<f64> {
        self.scaled.clone()
    }
    fn is_exact(&self) -> bool {
        true
    }
    fn inner_steps(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LsqMode {
    Refinable,
    Exact { cg_tol: f64 },
}

/// Default relative residual below which a refinable candidate counts as exact.
pub const DEFAULT_EXACT_TOL: f64 = 1e-13;

/// Resolvent of `A₁x = Hᵀ(Hx - f)`, i.e. `x̃ ≈ (I + sHᵀH)⁻¹(rhs + sHᵀf)`.
///
/// In refinable mode each [`refine`](InexactResolvent::refine) is one CG step
/// (two applications of `H`) followed by recomputing the witness from the
/// candidate (two more). A proposal costs two applications: the witness of the
/// warm start, which also yields the exact CG residual `rhs - x̃ - s a`.
/// `Hᵀf` is computed once at construction.
#[derive(Debug, Clone)]
pub struct LsqResolvent {
    h: LinearMap,
    f: DVector<f64>,
    htf: DVector<f64>,
    scale: f64,
    mode: LsqMode,
    exact_tol: f64,
    x: DVector<f64>,
    a: DVector<f64>,
    rhs: DVector<f64>,
    cg: Option<CgState>,
    steps: usize,
    exact: bool,
}

impl LsqResolvent {
    /// Refinable oracle warm-started at `x0`. Takes ownership of `h`, so its
    /// counter measures exactly this oracle's work.
    pub fn refinable(h: LinearMap, f: DVector<f64>, scale: f64, x0: DVector<f64>) -> Result<Self> {
        Self::build(h, f, scale, x0, LsqMode::Refinable)
    }

    /// Oracle that solves every proposal to relative residual `cg_tol`.
    pub fn exact(
        h: LinearMap,
        f: DVector<f64>,
        scale: f64,
        cg_tol: f64,
        x0: DVector<f64>,
    ) -> Result<Self> {
        if !(cg_tol > 0.0) {
            return Err(Error::invalid(format!("cg_tol must be > 0, got {cg_tol}")));
        }
        Self::build(h, f, scale, x0, LsqMode::Exact { cg_tol })
    }

    fn build(
        h: LinearMap,
        f: DVector<f64>,
        scale: f64,
        x0: DVector<f64>,
        mode: LsqMode,
    ) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid(format!(
                "resolvent scale must be > 0, got {scale}"
            )));
        }
        check_dim("lsq oracle data", h.rows(), f.len())?;
        check_dim("lsq oracle warm start", h.cols(), x0.len())?;
        let htf = h.apply_adjoint(&f);
        let n = h.cols();
        Ok(LsqResolvent {
            h,
            f,
            htf,
            scale,
            mode,
            exact_tol: DEFAULT_EXACT_TOL,
            x: x0,
            a: DVector::zeros(n),
            rhs: DVector::zeros(n),
            cg: None,
            steps: 0,
            exact: false,
        })
    }

    /// Relative residual at which a refinable candidate is declared exact.
    pub fn with_exact_tol(mut self, tol: f64) -> Self {
        self.exact_tol = tol;
        self
    }

    pub fn operator(&self) -> &LinearMap {
        &self.h
    }

    /// Exact residual `rhs - x̃ - s a = b - (I + sHᵀH) x̃` of the current pair.
    pub fn residual(&self) -> DVector<f64> {
        &self.rhs - &self.x - &self.a * self.scale
    }

    /// `‖residual‖ / ‖rhs + sHᵀf‖`.
    pub fn relative_residual(&self) -> f64 {
        let b_norm = (&self.rhs + &self.htf * self.scale).norm();
        let r = self.residual().norm();
        if b_norm > 0.0 {
            r / b_norm
        } else {
            r
        }
    }

    fn refresh_witness(&mut self) {
        let r = self.h.apply(&self.x) - &self.f;
        self.a = self.h.apply_adjoint(&r);
    }
}

impl InexactResolvent for LsqResolvent {
    fn scale(&self) -> f64 {
        self.scale
    }

    fn dim(&self) -> usize {
        self.x.len()
    }

    fn propose(&mut self, rhs: &DVector<f64>) -> Result<()> {
        check_dim("lsq oracle rhs", self.x.len(), rhs.len())?;
        self.rhs = rhs.clone();
        self.steps = 0;
        match self.mode {
            LsqMode::Refinable => {
                self.refresh_witness();
                let r = self.residual();
                let b_norm = (&self.rhs + &self.htf * self.scale).norm();
                self.exact = relative(r.norm(), b_norm) <= self.exact_tol;
                self.cg = Some(CgState::from_residual(self.x.clone(), r, b_norm)?);
            }
            LsqMode::Exact { cg_tol } => {
                let b = &self.rhs + &self.htf * self.scale;
                let solve = solve_shifted_normal(&self.h, self.scale, &b, &self.x, cg_tol)?;
                self.x = solve.x;
                self.steps = solve.iterations;
                self.refresh_witness();
                self.exact = true;
            }
        }
        Ok(())
    }

    fn refine(&mut self) -> Result<bool> {
        if self.exact {
            return Ok(false);
        }
        let Some(cg) = self.cg.as_mut() else {
            return Err(Error::invalid("refine called before propose"));
        };
        let (h, scale) = (&self.h, self.scale);
        let progressed = cg.step(|v| shifted_normal_apply(h, scale, v))?;
        if !progressed {
            self.exact = true;
            return Ok(false);
        }
        self.x = cg.x().clone();
        self.steps += 1;
        self.refresh_witness();
        let b_norm = (&self.rhs + &self.htf * self.scale).norm();
        self.exact = relative(self.residual().norm(), b_norm) <= self.exact_tol;
        Ok(true)
    }

    fn candidate(&self) -> &DVector<f64> {
        &self.x
    }

    fn witness(&self) -> &DVector<f64> {
        &self.a
    }

    fn is_exact(&self) -> bool {
        self.exact
    }

    fn inner_steps(&self) -> usize {
        self.steps
    }

    fn operator_applications(&self) -> u64 {
        self.h.applications()
    }
}

fn relative(r: f64, b_norm: f64) -> f64 {
    if b_norm > 0.0 {
        r / b_norm
    } else {
        r
    }
}
