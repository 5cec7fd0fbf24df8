use std::time::Instant;

/// One outer iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Zero-based outer iteration; the record describes the step `k -> k + 1`.
    pub k: usize,
    pub objective: f64,
    /// Left side of the relative-error test at acceptance (HPE methods only).
    pub lhs: Option<f64>,
    /// Right side of the test, before multiplication by `σ`.
    pub rhs: Option<f64>,
    pub inner_iterations: usize,
    /// Cumulative applications of `H` and `Hᵀ` after this iteration.
    pub h_applications: u64,
    /// `‖ũ^{k+1} - u^k‖_M`.
    pub seminorm_step: Option<f64>,
    /// `‖λ_{k+1} v^{k+1}‖_M`.
    pub seminorm_residual: Option<f64>,
    /// `‖u^{k+1} - u*‖_M` against a supplied reference point.
    pub reference_distance: Option<f64>,
    /// Accepted because the inner solver reached working precision rather
    /// than through `lhs <= σ rhs`.
    pub certified_exact: bool,
    pub wall_ms: f64,
}

/// Per-iteration history of one method run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub method: String,
    /// Relative-error tolerance of HPE runs.
    pub sigma: Option<f64>,
    /// `‖u⁰ - u*‖_M` when a reference point was supplied.
    pub reference_distance0: Option<f64>,
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn new(method: impl Into<String>) -> Self {
        RunTrace {
            method: method.into(),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    /// `[‖u⁰ - u*‖, ‖u¹ - u*‖, ...]` when every record carries a distance.
    pub fn reference_distances(&self) -> Option<Vec<f64>> {
        let mut out = vec![self.reference_distance0?];
        for r in &self.records {
            out.push(r.reference_distance?);
        }
        Some(out)
    }

    pub fn total_h_applications(&self) -> u64 {
        self.records.last().map_or(0, |r| r.h_applications)
    }

    /// Median inner iteration count (lower median for even lengths).
    pub fn median_inner_iterations(&self) -> Option<usize> {
        median(self.records.iter().map(|r| r.inner_iterations).collect())
    }

    /// `H`/`Hᵀ` applications spent until the objective first came within
    /// `gap` of `optimum`.
    pub fn h_applications_to_gap(&self, optimum: f64, gap: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.objective - optimum <= gap)
            .map(|r| r.h_applications)
    }

    pub fn min_objective(&self) -> Option<f64> {
        self.objectives().reduce(f64::min)
    }
}

pub(crate) fn median(mut values: Vec<usize>) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

/// Wall clock that reads zero unless enabled, so traces stay reproducible.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch(Option<Instant>);

impl Stopwatch {
    pub(crate) fn start(enabled: bool) -> Self {
        Stopwatch(enabled.then(Instant::now))
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
    }
}
