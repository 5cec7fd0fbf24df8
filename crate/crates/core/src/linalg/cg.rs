use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Snapshot handed to external stopping predicates after every CG step.
#[derive(Debug)]
pub struct CgProgress<'a> {
    pub iteration: usize,
    pub x: &'a DVector<f64>,
    /// Recursively updated residual `b - A x`.
    pub residual: &'a DVector<f64>,
    pub relative_residual: f64,
}

type Predicate<'a> = Box<dyn FnMut(&CgProgress<'_>) -> bool + 'a>;

enum Rule<'a> {
    RelativeResidual(f64),
    MaxIterations(usize),
    Predicate(Predicate<'a>),
}

/// Combination of CG stopping rules; the solve stops as soon as any rule fires.
///
/// The relative residual is `‖b - A x‖ / ‖b‖`, or the absolute residual when `b = 0`.
#[derive(Default)]
pub struct StoppingRule<'a> {
    rules: Vec<Rule<'a>>,
}

impl<'a> StoppingRule<'a> {
    pub fn relative_residual(tol: f64) -> Self {
        Self::default().or_relative_residual(tol)
    }

    pub fn max_iterations(cap: usize) -> Self {
        Self::default().or_max_iterations(cap)
    }

    pub fn predicate(f: impl FnMut(&CgProgress<'_>) -> bool + 'a) -> Self {
        Self::default().or_predicate(f)
    }

    pub fn or_relative_residual(mut self, tol: f64) -> Self {
        self.rules.push(Rule::RelativeResidual(tol));
        self
    }

    pub fn or_max_iterations(mut self, cap: usize) -> Self {
        self.rules.push(Rule::MaxIterations(cap));
        self
    }

    pub fn or_predicate(mut self, f: impl FnMut(&CgProgress<'_>) -> bool + 'a) -> Self {
        self.rules.push(Rule::Predicate(Box::new(f)));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::invalid("stopping rule has no criteria"));
        }
        for rule in &self.rules {
            match rule {
                Rule::RelativeResidual(tol) if !(*tol > 0.0) => {
                    return Err(Error::invalid(format!(
                        "CG tolerance must be > 0, got {tol}"
                    )))
                }
                Rule::MaxIterations(0) => {
                    return Err(Error::invalid("CG iteration cap must be >= 1"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn fires(&mut self, progress: &CgProgress<'_>) -> Option<StopReason> {
        for rule in &mut self.rules {
            match rule {
                Rule::RelativeResidual(tol) if progress.relative_residual <= *tol => {
                    return Some(StopReason::Tolerance)
                }
                Rule::MaxIterations(cap) if progress.iteration >= *cap => {
                    return Some(StopReason::MaxIterations)
                }
                Rule::Predicate(f) => {
                    if f(progress) {
                        return Some(StopReason::Predicate);
                    }
                }
                _ => {}
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    Predicate,
    /// The residual vanished (or the search direction lost positive curvature).
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub reason: StopReason,
}

/// Resumable conjugate-gradient state for `A x = b` with `A` symmetric PSD.
///
/// One call to [`step`](Self::step) performs one CG iteration and exactly one
/// application of `A`. Creating the state applies `A` once to the warm start.
#[derive(Debug, Clone)]
pub struct CgState {
    x: DVector<f64>,
    r: DVector<f64>,
    p: DVector<f64>,
    rr: f64,
    b_norm: f64,
    iterations: usize,
    exhausted: bool,
}

impl CgState {
    pub fn new(
        mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>,
        b: &DVector<f64>,
        x0: DVector<f64>,
    ) -> Result<Self> {
        check_dim("cg warm start", b.len(), x0.len())?;
        let ax = apply(&x0);
        check_dim("cg operator output", b.len(), ax.len())?;
        let r = b - ax;
        let rr = r.norm_squared();
        if !rr.is_finite() {
            return Err(Error::Numerical("non-finite initial CG residual".into()));
        }
        Ok(CgState {
            p: r.clone(),
            x: x0,
            r,
            rr,
            b_norm: b.norm(),
            iterations: 0,
            exhausted: rr == 0.0,
        })
    }

    /// State for a warm start whose residual `b - A x0` is already known,
    /// saving the initial application of `A`.
    pub fn from_residual(x0: DVector<f64>, r0: DVector<f64>, b_norm: f64) -> Result<Self> {
        check_dim("cg residual", x0.len(), r0.len())?;
        let rr = r0.norm_squared();
        if !rr.is_finite() {
            return Err(Error::Numerical("non-finite initial CG residual".into()));
        }
        Ok(CgState {
            p: r0.clone(),
            x: x0,
            r: r0,
            rr,
            b_norm,
            iterations: 0,
            exhausted: rr == 0.0,
        })
    }

    /// Advances one iteration. Returns `Ok(false)` without touching `A` when
    /// no further progress is possible.
    pub fn step(&mut self, mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>) -> Result<bool> {
        if self.exhausted {
            return Ok(false);
        }
        let ap = apply(&self.p);
        let pap = self.p.dot(&ap);
        if !pap.is_finite() {
            return Err(Error::Numerical("non-finite curvature in CG".into()));
        }
        if pap <= 0.0 {
            self.exhausted = true;
            return Ok(false);
        }
        let alpha = self.rr / pap;
        self.x.axpy(alpha, &self.p, 1.0);
        self.r.axpy(-alpha, &ap, 1.0);
        let rr_new = self.r.norm_squared();
        if !rr_new.is_finite() {
            return Err(Error::Numerical("non-finite CG residual".into()));
        }
        let beta = rr_new / self.rr;
        self.p *= beta;
        self.p += &self.r;
        self.rr = rr_new;
        self.iterations += 1;
        if rr_new == 0.0 {
            self.exhausted = true;
        }
        Ok(true)
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn into_x(self) -> DVector<f64> {
        self.x
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn relative_residual(&self) -> f64 {
        let r = self.rr.sqrt();
        if self.b_norm > 0.0 {
            r / self.b_norm
        } else {
            r
        }
    }

    fn progress(&self) -> CgProgress<'_> {
        CgProgress {
            iteration: self.iterations,
            x: &self.x,
            residual: &self.r,
            relative_residual: self.relative_residual(),
        }
    }
}

/// Conjugate gradients for `A x = b` from the warm start `x0`.
///
/// The rule is checked before the first step and after every step. Without an
/// explicit iteration cap the solve stops after `10 n` steps with
/// [`StopReason::MaxIterations`].
pub fn cg_solve(
    mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    mut stop: StoppingRule<'_>,
) -> Result<CgOutcome> {
    stop.validate()?;
    let safety_cap = 10 * b.len().max(1);
    let mut state = CgState::new(&mut apply, b, x0.clone())?;
    let reason = loop {
        if let Some(reason) = stop.fires(&state.progress()) {
            break reason;
        }
        if state.iterations >= safety_cap {
            break StopReason::MaxIterations;
        }
        if !state.step(&mut apply)? {
            break StopReason::Exhausted;
        }
    };
    let relative_residual = state.relative_residual();
    let iterations = state.iterations;
    Ok(CgOutcome {
        x: state.into_x(),
        iterations,
        relative_residual,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_solves_in_one_step() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 4.0]);
        let out = cg_solve(
            |v| v.clone(),
            &b,
            &DVector::zeros(5),
            StoppingRule::relative_residual(1e-14),
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.x - b).norm() < 1e-15);
    }

    #[test]
    fn diagonal_solve_within_two_steps() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let out = cg_solve(
            |v| &a * v,
            &b,
            &DVector::zeros(2),
            StoppingRule::relative_residual(1e-14).or_max_iterations(2),
        )
        .unwrap();
        assert!(out.iterations <= 2);
        assert!((out.x - DVector::from_element(2, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn warm_start_at_solution_takes_no_steps() {
        let b = DVector::from_vec(vec![2.0, 4.0]);
        let out = cg_solve(
            |v| v * 2.0,
            &b,
            &DVector::from_vec(vec![1.0, 2.0]),
            StoppingRule::relative_residual(1e-12),
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn predicate_is_consulted_after_each_step() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let b = DVector::from_element(4, 1.0);
        let mut seen = Vec::new();
        let out = cg_solve(
            |v| &a * v,
            &b,
            &DVector::zeros(4),
            StoppingRule::predicate(|p| {
                seen.push(p.iteration);
                p.iteration == 2
            }),
        )
        .unwrap();
        assert_eq!(out.reason, StopReason::Predicate);
        assert_eq!(out.iterations, 2);
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn invalid_rules_and_dimensions_are_rejected() {
        let b = DVector::from_element(3, 1.0);
        let x0 = DVector::zeros(3);
        assert!(matches!(
            cg_solve(|v| v.clone(), &b, &x0, StoppingRule::relative_residual(0.0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            cg_solve(|v| v.clone(), &b, &x0, StoppingRule::max_iterations(0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            cg_solve(
                |v| v.clone(),
                &b,
                &DVector::zeros(2),
                StoppingRule::max_iterations(3)
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_input_is_a_numerical_error() {
        let b = DVector::from_vec(vec![f64::NAN, 1.0]);
        let err = cg_solve(
            |v| v.clone(),
            &b,
            &DVector::zeros(2),
            StoppingRule::max_iterations(3),
        );
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_rhs_uses_absolute_residual() {
        let b = DVector::zeros(3);
        let out = cg_solve(
            |v| v * 3.0,
            &b,
            &DVector::from_element(3, 1.0),
            StoppingRule::relative_residual(1e-12),
        )
        .unwrap();
        assert!(out.x.norm() < 1e-12);
    }
}
