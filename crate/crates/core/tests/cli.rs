//! End-to-end runs of the `hpe` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hpe(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hpe"));
    cmd.args(args);
    match env_out {
        Some(p) => cmd.env("HPE_OUT_DIR", p),
        None => cmd.env_remove("HPE_OUT_DIR"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn run_writes_traces_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp1");
    let o = hpe(
        &[
            "run",
            "cp1-run1",
            "--iters",
            "15",
            "--m",
            "40",
            "--n",
            "40",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for m in ["hpe-cp", "implicit-cp", "explicit-cp", "condat-vu"] {
        let text = fs::read_to_string(out.join(format!("{m}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,k,objective_gap,lhs,rhs,inner_iters,h_apps,wall_ms"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 15);
        let fields: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(fields[0], m);
        if m == "hpe-cp" {
            assert!(!fields[3].is_empty() && !fields[4].is_empty());
        } else {
            assert!(fields[3].is_empty() && fields[4].is_empty());
        }
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("m = 40") && manifest.contains("reference_optimum = "));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    let a = hpe(
        &[
            "audit",
            out.join("hpe-cp.csv").to_str().unwrap(),
            "--sigma",
            "0.01",
        ],
        None,
    );
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
}

#[test]
fn audit_flags_a_violated_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(
        &path,
        "method,k,objective_gap,lhs,rhs,inner_iters,h_apps,wall_ms\n\
         hpe-cp,0,1e0,1e-3,1e0,1,5,0e0\n\
         hpe-cp,1,5e-1,9e-1,1e0,1,9,0e0\n",
    )
    .unwrap();
    let o = hpe(&["audit", path.to_str().unwrap(), "--sigma", "0.5"], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("k = 1"));
    let o = hpe(&["audit", path.to_str().unwrap(), "--sigma", "0.95"], None);
    assert_eq!(code(&o), 0);
}

#[test]
fn certification_failure_is_recorded_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("strict.conf");
    // σ = 0 needs exact inner solves, which one refinement cannot deliver.
    fs::write(
        &conf,
        "experiment = cp1-run1\nm = 30\nn = 30\niters = 5\nsigma = 0\ninner_cap = 1\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = hpe(
        &[
            "run",
            conf.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("certification-failure"), "{summary}");
    // The baselines still ran.
    assert_eq!(
        fs::read_to_string(out.join("condat-vu.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}

#[test]
fn output_directory_defaults_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpe(
        &["run", "dy-run3", "--iters", "3", "--m", "20", "--n", "20"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("dy-run3").join("hpe-dy.csv").exists());
}

#[test]
fn argument_errors_exit_with_one() {
    assert_eq!(code(&hpe(&["run", "no-such-experiment"], None)), 1);
    assert_eq!(
        code(&hpe(
            &["run", "cp2", "--sigma", "1.5", "--iters", "1"],
            None
        )),
        1
    );
    assert_eq!(code(&hpe(&["run", "cp2", "--iters", "many"], None)), 1);
    assert_eq!(code(&hpe(&["frobnicate"], None)), 1);
    assert_eq!(
        code(&hpe(
            &["audit", "/nonexistent/trace.csv", "--sigma", "0.5"],
            None
        )),
        1
    );
    assert_eq!(code(&hpe(&["--help"], None)), 0);
}
