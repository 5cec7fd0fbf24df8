use crate::error::{Error, Result};

use super::RunTrace;

/// Tolerances for [`audit_prop1`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Slack relative to `‖u⁰ - u*‖_M` (squared for the squared inequalities),
    /// or to the largest recorded step when no reference is available.
    pub rel_tol: f64,
    /// When set, the last step seminorm must not exceed this value.
    pub step_floor: Option<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            rel_tol: 1e-10,
            step_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub iterations: usize,
    pub scale: f64,
    /// Smallest margin of the two-sided bound, relative to `scale`.
    pub min_margin_bounds: f64,
    /// Smallest margin of the Fejér inequality, relative to `scale²`.
    pub min_margin_fejer: Option<f64>,
    pub fejer_checked: bool,
}

/// Checks the fundamental estimates of an HPE trace:
///
/// 1. `(1-σ)‖ũ^{k+1}-u^k‖_M <= ‖λv^{k+1}‖_M <= (1+σ)‖ũ^{k+1}-u^k‖_M`,
/// 2. with a reference point, `‖u^{k+1}-u*‖² + (1-σ²)‖ũ^{k+1}-u^k‖² <= ‖u^k-u*‖²`,
/// 3. with a reference point, the summed form of 2,
/// 4. the step seminorm decreases over the run (and ends below the floor).
///
/// `reference_distances` are `‖u^k - u*‖_M` for `k = 0..=len`; when `None` the
/// distances recorded in the trace are used, if any.
pub fn audit_prop1(
    trace: &RunTrace,
    sigma: f64,
    reference_distances: Option<&[f64]>,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let mut violations = Vec::new();
    let mut steps = Vec::with_capacity(trace.len());
    let mut residuals = Vec::with_capacity(trace.len());
    for r in &trace.records {
        match (r.seminorm_step, r.seminorm_residual) {
            (Some(s), Some(v)) => {
                steps.push(s);
                residuals.push(v);
            }
            _ => {
                return Err(Error::invalid(format!(
                    "trace '{}' has no invariant data at k = {}; run with record_invariants",
                    trace.method, r.k
                )))
            }
        }
    }
    let recorded = trace.reference_distances();
    let dists: Option<&[f64]> = reference_distances.or(recorded.as_deref());
    if let Some(d) = dists {
        if d.len() != steps.len() + 1 {
            return Err(Error::invalid(format!(
                "expected {} reference distances, got {}",
                steps.len() + 1,
                d.len()
            )));
        }
    }
    let max_step = steps.iter().cloned().fold(0.0, f64::max);
    let scale = match dists {
        Some(d) if d[0] > 0.0 => d[0],
        _ => max_step,
    };
    let tol = opts.rel_tol * scale;
    let tol_sq = opts.rel_tol * scale * scale;

    let mut min_margin_bounds = f64::INFINITY;
    for (k, (&s, &v)) in steps.iter().zip(&residuals).enumerate() {
        let lower = (1.0 - sigma) * s;
        let upper = (1.0 + sigma) * s;
        if lower > v + tol {
            violations.push(format!(
                "k = {k}: (1-σ)·step = {lower:e} > residual = {v:e}"
            ));
        }
        if v > upper + tol {
            violations.push(format!(
                "k = {k}: residual = {v:e} > (1+σ)·step = {upper:e}"
            ));
        }
        if scale > 0.0 {
            min_margin_bounds = min_margin_bounds.min((v - lower).min(upper - v) / scale);
        }
    }

    let mut min_margin_fejer = None;
    if let Some(d) = dists {
        let mut worst = f64::INFINITY;
        let mut summed = 0.0;
        for (k, &s) in steps.iter().enumerate() {
            let left = d[k + 1] * d[k + 1] + (1.0 - sigma * sigma) * s * s;
            let right = d[k] * d[k];
            if left > right + tol_sq {
                violations.push(format!("k = {k}: Fejér {left:e} > {right:e}"));
            }
            if scale > 0.0 {
                worst = worst.min((right - left) / (scale * scale));
            }
            summed += s * s;
            let left_sum = d[k + 1] * d[k + 1] + (1.0 - sigma * sigma) * summed;
            if left_sum > d[0] * d[0] + tol_sq * (k + 1) as f64 {
                violations.push(format!(
                    "k = {k}: summed estimate {left_sum:e} > {:e}",
                    d[0] * d[0]
                ));
            }
        }
        min_margin_fejer = Some(worst);
    }

    if let (Some(first), Some(last)) = (steps.first(), steps.last()) {
        if steps.len() > 1 && last >= first && *first > 0.0 {
            violations.push(format!(
                "step seminorm did not decrease: first {first:e}, last {last:e}"
            ));
        }
        if let Some(floor) = opts.step_floor {
            if *last > floor {
                violations.push(format!(
                    "final step seminorm {last:e} above floor {floor:e}"
                ));
            }
        }
    }

    if violations.is_empty() {
        Ok(AuditReport {
            iterations: steps.len(),
            scale,
            min_margin_bounds,
            min_margin_fejer,
            fejer_checked: dists.is_some(),
        })
    } else {
        Err(Error::AuditFailure(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpe::IterationRecord;

    fn record(k: usize, step: f64, residual: f64, dist: f64) -> IterationRecord {
        IterationRecord {
            k,
            objective: 0.0,
            lhs: Some(0.0),
            rhs: Some(step),
            inner_iterations: 1,
            h_applications: 0,
            seminorm_step: Some(step),
            seminorm_residual: Some(residual),
            reference_distance: Some(dist),
            certified_exact: false,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn exact_proximal_trace_passes() {
        // Proximal point on 0 ∈ u with λ = 1: u_{k+1} = u_k / 2, ũ = u_{k+1}.
        let mut trace = RunTrace::new("toy");
        let mut u = 1.0;
        trace.reference_distance0 = Some(u);
        for k in 0..10 {
            let next = u / 2.0;
            trace.records.push(record(k, u - next, u - next, next));
            u = next;
        }
        let report = audit_prop1(&trace, 0.0, None, &AuditOptions::default()).unwrap();
        assert!(report.fejer_checked);
        assert_eq!(report.iterations, 10);
    }

    #[test]
    fn violations_are_listed() {
        let mut trace = RunTrace::new("bad");
        trace.reference_distance0 = Some(1.0);
        trace.records.push(record(0, 1.0, 0.2, 0.5));
        trace.records.push(record(1, 1.0, 1.0, 2.0));
        match audit_prop1(&trace, 0.5, None, &AuditOptions::default()) {
            Err(Error::AuditFailure(v)) => {
                assert!(v.iter().any(|s| s.contains("k = 0") && s.contains("(1-σ)")));
                assert!(v.iter().any(|s| s.contains("Fejér")));
                assert!(v.iter().any(|s| s.contains("did not decrease")));
            }
            other => panic!("expected audit failure, got {other:?}"),
        }
    }

    #[test]
    fn missing_invariants_are_an_argument_error() {
        let mut trace = RunTrace::new("plain");
        let mut r = record(0, 1.0, 1.0, 0.0);
        r.seminorm_step = None;
        trace.records.push(r);
        assert!(matches!(
            audit_prop1(&trace, 0.1, None, &AuditOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
