//! Property-based checks of the invariants listed for each module.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use hpe_core::harness::{emit_trace, read_trace, ExperimentConfig};
use hpe_core::hpe::{
    audit_prop1, hpe_error_check, hpe_update, AuditOptions, Preconditioner, StepSizes,
};
use hpe_core::linalg::{estimate_spectral_norm, LinearMap};
use hpe_core::methods::{
    eckstein_yao_run, inexact_cp_run, inexact_cp_tv, inexact_dy_run, CpParams, DyParams,
    RunSettings, TvData,
};
use hpe_core::operators::{
    clip, huber_gradient, l1_dual_resolvent, l1_resolvent, soft_threshold, LsqResolvent,
};
use hpe_core::problems::{gen_illcond_matrix, SpectrumKind};

use common::{huber_instance, tv_instance};

fn vec_strategy(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, n).prop_map(DVector::from_vec)
}

fn sized_vec(max: usize) -> impl Strategy<Value = DVector<f64>> {
    (1..=max).prop_flat_map(|n| vec_strategy(n, 5.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_threshold_satisfies_its_optimality_condition(x in sized_vec(20), eta in 0.0..2.0f64) {
        let s = soft_threshold(&x, eta).unwrap();
        for i in 0..x.len() {
            let r = x[i] - s[i];
            if s[i] != 0.0 {
                prop_assert!((r - eta * s[i].signum()).abs() <= 1e-12);
            } else {
                prop_assert!(r.abs() <= eta + 1e-12);
            }
        }
    }

    #[test]
    fn soft_threshold_and_clip_decompose_the_identity(x in sized_vec(20), lam in 0.0..2.0f64) {
        // Moreau: prox of lam‖·‖₁ plus projection onto the dual ball.
        let s = soft_threshold(&x, lam).unwrap();
        let c = clip(&x, lam).unwrap();
        prop_assert!((s + &c - &x).amax() <= 1e-12);
        prop_assert!(c.amax() <= lam);
        prop_assert_eq!(clip(&c, lam).unwrap(), c);
    }

    #[test]
    fn prox_maps_are_nonexpansive(pair in (1..15usize).prop_flat_map(|n| (vec_strategy(n, 4.0), vec_strategy(n, 4.0))), eta in 0.0..1.5f64) {
        let (a, b) = pair;
        let d = (&a - &b).norm();
        prop_assert!((soft_threshold(&a, eta).unwrap() - soft_threshold(&b, eta).unwrap()).norm() <= d + 1e-12);
        prop_assert!((clip(&a, eta).unwrap() - clip(&b, eta).unwrap()).norm() <= d + 1e-12);
        let delta = 0.1 + eta;
        let g = huber_gradient(&a, delta).unwrap() - huber_gradient(&b, delta).unwrap();
        prop_assert!(g.norm() <= d + 1e-12);
    }

    #[test]
    fn huber_gradient_is_bounded_by_delta(x in sized_vec(20), delta in 0.01..1.0f64) {
        prop_assert!(huber_gradient(&x, delta).unwrap().amax() <= delta);
    }

    #[test]
    fn first_difference_kills_constants_and_is_adjoint_consistent(n in 2..40usize, c in -5.0..5.0f64, seed in 0u64..1000) {
        let d = LinearMap::first_difference(n);
        prop_assert_eq!(d.apply(&DVector::from_element(n, c)).amax(), 0.0);
        let x = DVector::from_fn(n, |i, _| ((i as u64 * 31 + seed) as f64).sin());
        let y = DVector::from_fn(n - 1, |i, _| ((i as u64 * 17 + seed) as f64).cos());
        let gap = d.apply(&x).dot(&y) - x.dot(&d.apply_adjoint(&y));
        prop_assert!(gap.abs() <= 1e-12 * (1.0 + x.norm() * y.norm()));
    }

    #[test]
    fn spectra_decrease_from_one_to_zero(r in 2..300usize) {
        for kind in [SpectrumKind::Cosine, SpectrumKind::Power5] {
            let v = kind.values(r);
            prop_assert_eq!(v.len(), r);
            prop_assert_eq!(v[0], 1.0);
            prop_assert_eq!(v[r - 1], 0.0);
            prop_assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed(seed in 0u64..10_000) {
        let a = gen_illcond_matrix(6, 9, SpectrumKind::Power5, seed).unwrap().to_dense();
        let b = gen_illcond_matrix(6, 9, SpectrumKind::Power5, seed).unwrap().to_dense();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn chambolle_pock_metric_is_a_seminorm(seed in 0u64..1000, kappa in 0.05..5.0f64) {
        let k = LinearMap::dense(DMatrix::from_fn(4, 5, |i, j| (((i * 5 + j) as u64 + seed) as f64).sin()));
        let knorm = estimate_spectral_norm(&k, 1e-12, 10_000).unwrap().value * 1.001;
        let (tau, theta) = (1.0 / (knorm * kappa), kappa / knorm);
        let p = Preconditioner::chambolle_pock(&k, tau, theta);
        let u = DVector::from_fn(9, |i, _| ((i as u64 * 7 + seed) as f64).cos());
        let v = DVector::from_fn(9, |i, _| ((i as u64 * 13 + seed) as f64).sin());
        let (nu, nv, nuv) = (p.seminorm(&u).unwrap(), p.seminorm(&v).unwrap(), p.seminorm(&(&u + &v)).unwrap());
        prop_assert!(nu >= 0.0 && nv >= 0.0);
        prop_assert!(nuv <= nu + nv + 1e-10);
        // Explicit quadratic form.
        let (dx, dy) = (u.rows(0, 5).into_owned(), u.rows(5, 4).into_owned());
        let q = dx.norm_squared() / tau - 2.0 * k.apply_untracked(&dx).dot(&dy) + dy.norm_squared() / theta;
        prop_assert!((nu * nu - q).abs() <= 1e-9 * (1.0 + q.abs()));
    }

    #[test]
    fn error_check_acceptance_and_update(u in vec_strategy(6, 3.0), ut in vec_strategy(6, 3.0), v in vec_strategy(6, 3.0), lam in 0.1..3.0f64, sigma in 0.0..0.99f64) {
        let p = Preconditioner::identity(6);
        let c = hpe_error_check(&p, lam, &v, &ut, &u, sigma).unwrap();
        prop_assert!((c.lhs - (&v * lam + &ut - &u).norm()).abs() <= 1e-12);
        prop_assert!((c.rhs - (&ut - &u).norm()).abs() <= 1e-12);
        prop_assert_eq!(c.accepted, c.lhs <= sigma * c.rhs);
        prop_assert_eq!(hpe_update(&u, lam, &v), &u - &v * lam);
    }

    #[test]
    fn step_size_sequence_repeats_its_last_entry(seq in prop::collection::vec(0.1..5.0f64, 1..10), k in 0usize..50) {
        let s = StepSizes::Sequence(seq.clone());
        let want = if k < seq.len() { seq[k] } else { *seq.last().unwrap() };
        prop_assert_eq!(s.get(k), want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eckstein_yao_traces_pass_the_audit(seed in 0u64..500, sigma in 0.0..0.95f64, tau in 0.2..3.0f64) {
        let n = 12;
        let inst = huber_instance(n, seed, 0.05, 0.0);
        let run = |iters: usize, reference: Option<DVector<f64>>| {
            let a1 = LsqResolvent::refinable(inst.h.fresh_copy(), inst.f.clone(), tau, DVector::zeros(n)).unwrap();
            let mut s = RunSettings::new(sigma, iters);
            s.reference = reference;
            eckstein_yao_run(a1, l1_resolvent(0.05), &DVector::zeros(n), &s, |x| inst.objective(x)).unwrap()
        };
        let reference = run(2000, None).state();
        let out = run(60, Some(reference));
        let report = audit_prop1(&out.trace, sigma, None, &AuditOptions { rel_tol: 1e-9, step_floor: None });
        prop_assert!(report.is_ok(), "{:?}", report);
        prop_assert!(out.update_mismatch.unwrap() <= 1e-10);
        for r in &out.trace.records {
            prop_assert!(r.lhs.unwrap() <= sigma * r.rhs.unwrap() || r.certified_exact);
        }
    }

    #[test]
    fn reductions_to_eckstein_yao_hold(seed in 0u64..500, sigma in 0.0..0.95f64) {
        let n = 10;
        let lam = 0.1;
        let inst = huber_instance(n, seed, lam, 0.0);
        let a1 = || LsqResolvent::refinable(inst.h.fresh_copy(), inst.f.clone(), 1.0, DVector::zeros(n)).unwrap();
        let x0 = DVector::from_fn(n, |i, _| ((i as u64 + seed) as f64).sin());
        let y0 = DVector::from_fn(n, |i, _| 0.05 * ((i as u64 * 3 + seed) as f64).cos());
        let w0 = &x0 - &y0;
        let s = RunSettings::new(sigma, 40).with_iterates();
        let ey = eckstein_yao_run(a1(), l1_resolvent(lam), &w0, &s, |_| 0.0).unwrap();
        let cp = inexact_cp_run(a1(), &LinearMap::identity(n), l1_dual_resolvent(lam), &CpParams::new(1.0, 1.0).unwrap(), Some(1.0), &x0, &y0, &s, |_| 0.0).unwrap();
        let dy = inexact_dy_run(a1(), l1_resolvent(lam), |x: &DVector<f64>| DVector::zeros(x.len()), &DyParams::new(1.0, 0.0).unwrap(), &w0, &s, |_| 0.0).unwrap();
        for ((u, w), wd) in cp.iterates.iter().zip(&ey.iterates).zip(&dy.iterates) {
            let diff = u.rows(0, n) - u.rows(n, n) - w;
            prop_assert!(diff.amax() <= 1e-10);
            prop_assert!((wd - w).amax() <= 1e-10);
        }
    }

    #[test]
    fn application_counts_never_decrease(seed in 0u64..500, sigma in 0.0..0.99f64) {
        let inst = tv_instance(16, seed, 0.2);
        let tv = TvData { h: &inst.h, f: &inst.f, d: &inst.d, lam: 0.2 };
        let out = inexact_cp_tv(&tv, &CpParams::from_kappa(0.5).unwrap(), &DVector::zeros(16), &DVector::zeros(15), &RunSettings::new(sigma, 30), None).unwrap();
        prop_assert!(out.trace.records.windows(2).all(|w| w[1].h_applications > w[0].h_applications));
    }

    #[test]
    fn trace_csv_round_trips_exactly(seed in 0u64..500, optimum in -3.0..3.0f64) {
        let inst = tv_instance(12, seed, 0.3);
        let tv = TvData { h: &inst.h, f: &inst.f, d: &inst.d, lam: 0.3 };
        let out = inexact_cp_tv(&tv, &CpParams::from_kappa(0.5).unwrap(), &DVector::zeros(12), &DVector::zeros(11), &RunSettings::new(0.5, 10), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit_trace(&out.trace, optimum, &path).unwrap();
        let rows = read_trace(&path).unwrap();
        prop_assert_eq!(rows.len(), out.trace.len());
        for (row, rec) in rows.iter().zip(&out.trace.records) {
            prop_assert_eq!(row.objective_gap, rec.objective - optimum);
            prop_assert_eq!(row.lhs, rec.lhs);
            prop_assert_eq!(row.rhs, rec.rhs);
            prop_assert_eq!(row.h_apps, rec.h_applications);
        }
    }

    #[test]
    fn config_manifest_round_trips(m in 2..500usize, n in 20..500usize, seed in any::<u64>(), sigma in 0.0..0.99f64) {
        let mut c = ExperimentConfig::named("cp1-run1").unwrap();
        c.m = m;
        c.n = n;
        c.seed = seed;
        c.sigma = sigma;
        let text = c.manifest();
        let back = ExperimentConfig::from_str_with_path(&text, std::path::Path::new("manifest.txt")).unwrap();
        prop_assert_eq!(back, c);
    }
}
