use std::cell::Cell;
use std::fmt;

use nalgebra::{DMatrix, DVector};

#[derive(Clone)]
enum Repr {
    Dense(DMatrix<f64>),
    Identity(usize),
    Zero {
        rows: usize,
        cols: usize,
    },
    /// `(n-1) x n` forward differences, `(Dx)_i = x_{i+1} - x_i`.
    FirstDifference(usize),
}

/// A finite-dimensional linear operator with forward and adjoint application.
///
/// Every call to [`apply`](Self::apply) or [`apply_adjoint`](Self::apply_adjoint)
/// bumps a counter by one; the experiments use the counts of `H` and `Hᵀ` as
/// their cost metric. The `*_untracked` variants exist for diagnostics such as
/// objective evaluation, which must not be charged to an algorithm.
///
/// Counters use interior mutability, so a map is `Send` but not `Sync`: give
/// every concurrent run its own copy.
#[derive(Clone)]
pub struct LinearMap {
    repr: Repr,
    forward: Cell<u64>,
    adjoint: Cell<u64>,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Dense(_) => "dense",
            Repr::Identity(_) => "identity",
            Repr::Zero { .. } => "zero",
            Repr::FirstDifference(_) => "first-difference",
        };
        f.debug_struct("LinearMap")
            .field("kind", &kind)
            .field("rows", &self.rows())
            .field("cols", &self.cols())
            .field("forward_count", &self.forward.get())
            .field("adjoint_count", &self.adjoint.get())
            .finish()
    }
}

impl LinearMap {
    fn from_repr(repr: Repr) -> Self {
        LinearMap {
            repr,
            forward: Cell::new(0),
            adjoint: Cell::new(0),
        }
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Self::from_repr(Repr::Dense(matrix))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_repr(Repr::Identity(n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_repr(Repr::Zero { rows, cols })
    }

    /// The `(n-1) x n` first-difference matrix with rows `(..., -1, 1, ...)`.
    ///
    /// # Panics
    /// If `n < 2`; use [`crate::problems::gen_diff_matrix`] for a checked constructor.
    pub fn first_difference(n: usize) -> Self {
        assert!(n >= 2, "first-difference operator needs n >= 2");
        Self::from_repr(Repr::FirstDifference(n))
    }

    pub fn rows(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.nrows(),
            Repr::Identity(n) => *n,
            Repr::Zero { rows, .. } => *rows,
            Repr::FirstDifference(n) => n - 1,
        }
    }

    pub fn cols(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.ncols(),
            Repr::Identity(n) => *n,
            Repr::Zero { cols, .. } => *cols,
            Repr::FirstDifference(n) => *n,
        }
    }

    /// `A x`, counted.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.forward.set(self.forward.get() + 1);
        self.apply_untracked(x)
    }

    /// `Aᵀ y`, counted.
    pub fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.adjoint.set(self.adjoint.get() + 1);
        self.apply_adjoint_untracked(y)
    }

    pub fn apply_untracked(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.cols(), "LinearMap::apply: dimension mismatch");
        match &self.repr {
            Repr::Dense(m) => m * x,
            Repr::Identity(_) => x.clone(),
            Repr::Zero { rows, .. } => DVector::zeros(*rows),
            Repr::FirstDifference(n) => DVector::from_fn(n - 1, |i, _| x[i + 1] - x[i]),
        }
    }

    pub fn apply_adjoint_untracked(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(
            y.len(),
            self.rows(),
            "LinearMap::apply_adjoint: dimension mismatch"
        );
        match &self.repr {
            Repr::Dense(m) => m.tr_mul(y),
            Repr::Identity(_) => y.clone(),
            Repr::Zero { cols, .. } => DVector::zeros(*cols),
            Repr::FirstDifference(n) => {
                let k = n - 1;
                DVector::from_fn(*n, |j, _| {
                    let left = if j >= 1 { y[j - 1] } else { 0.0 };
                    let right = if j < k { y[j] } else { 0.0 };
                    left - right
                })
            }
        }
    }

    pub fn forward_count(&self) -> u64 {
        self.forward.get()
    }

    pub fn adjoint_count(&self) -> u64 {
        self.adjoint.get()
    }

    /// Forward plus adjoint applications.
    pub fn applications(&self) -> u64 {
        self.forward.get() + self.adjoint.get()
    }

    pub fn reset_counters(&self) {
        self.forward.set(0);
        self.adjoint.set(0);
    }

    /// A copy with zeroed counters, for handing to an independent run.
    pub fn fresh_copy(&self) -> Self {
        Self::from_repr(self.repr.clone())
    }

    /// Dense matrix representation (uncounted).
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Identity(n) => DMatrix::identity(*n, *n),
            Repr::Zero { rows, cols } => DMatrix::zeros(*rows, *cols),
            Repr::FirstDifference(n) => DMatrix::from_fn(n - 1, *n, |i, j| {
                if j == i {
                    -1.0
                } else if j == i + 1 {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }

    /// The dense matrix when this map is stored densely.
    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_first_difference(&self) -> bool {
        matches!(self.repr, Repr::FirstDifference(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    fn adjoint_gap(map: &LinearMap, rng: &mut ChaCha8Rng) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = gauss(rng, map.cols());
            let y = gauss(rng, map.rows());
            let ax = map.apply(&x);
            let aty = map.apply_adjoint(&y);
            let gap = (ax.dot(&y) - x.dot(&aty)).abs() / (ax.norm() * y.norm() + 1.0);
            worst = worst.max(gap);
        }
        worst
    }

    #[test]
    fn adjoint_consistency_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dense = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j) as f64).sin());
        let maps = [
            LinearMap::dense(dense),
            LinearMap::identity(6),
            LinearMap::zeros(3, 5),
            LinearMap::first_difference(9),
        ];
        for map in &maps {
            assert!(adjoint_gap(map, &mut rng) <= 1e-12, "{map:?}");
        }
    }

    #[test]
    fn structured_maps_match_their_dense_form() {
        let d = LinearMap::first_difference(6);
        let dense = LinearMap::dense(d.to_dense());
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 3.0, -1.0]);
        assert_eq!(d.apply(&x), dense.apply(&x));
        let y = DVector::from_vec(vec![0.3, 1.0, -1.0, 2.0, 0.0]);
        assert!((d.apply_adjoint(&y) - dense.apply_adjoint(&y)).norm() < 1e-15);
    }

    #[test]
    fn counters_track_each_application() {
        let map = LinearMap::first_difference(4);
        let x = DVector::from_element(4, 1.0);
        let y = DVector::from_element(3, 1.0);
        for _ in 0..5 {
            map.apply(&x);
        }
        map.apply_adjoint(&y);
        map.apply_untracked(&x);
        assert_eq!(map.forward_count(), 5);
        assert_eq!(map.adjoint_count(), 1);
        assert_eq!(map.applications(), 6);
        assert_eq!(map.fresh_copy().applications(), 0);
        map.reset_counters();
        assert_eq!(map.applications(), 0);
    }

    #[test]
    fn first_difference_definition() {
        let d = LinearMap::first_difference(3);
        let x = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert_eq!(d.apply(&x).as_slice(), &[1.0, 2.0]);
        assert_eq!(d.apply(&DVector::from_element(3, 2.5)).norm(), 0.0);
    }
}
