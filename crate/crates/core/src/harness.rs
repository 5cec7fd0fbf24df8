//! Experiment harness: named and custom configurations, reference optimum,
//! per-method CSV traces, summary, manifest and audits.
//!
//! Output layout of [`run_experiment`] inside the output directory:
//!
//! ```text
//! <method>.csv   method,k,objective_gap,lhs,rhs,inner_iters,h_apps,wall_ms
//! summary.csv    one row per method
//! manifest.txt   resolved configuration and reference optimum (key = value)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hpe::{audit_prop1, stack, AuditOptions, AuditReport, RunTrace};
use crate::linalg::estimate_spectral_norm;
use crate::methods::{
    condat_vu_run, explicit_cp_run, fb_run, implicit_cp_run, implicit_dy_run, inexact_cp_tv,
    inexact_dy_huber, CondatVuParams, CpParams, DyParams, ExplicitCpParams, HuberL1Data, Method,
    MethodResult, RunSettings, TvData, DEFAULT_CG_TOL,
};
use crate::problems::{
    NoiseLevel, ProblemInstance, RegParams, SignalOptions, SpectrumKind, DEFAULT_DELTA,
};

/// Environment variable naming the default parent output directory.
pub const OUT_DIR_ENV: &str = "HPE_OUT_DIR";

pub const TRACE_HEADER: [&str; 8] = [
    "method",
    "k",
    "objective_gap",
    "lhs",
    "rhs",
    "inner_iters",
    "h_apps",
    "wall_ms",
];

/// Safety factor applied to the power-iteration estimate of `‖H‖`.
const NORM_SAFETY: f64 = 1.01;

/// Bound on the norm of the first-difference operator.
const D_NORM_BOUND: f64 = 2.0;

pub const NAMED_EXPERIMENTS: [&str; 6] = [
    "cp1-run1", "cp1-run2", "cp2", "dy-run1", "dy-run2", "dy-run3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Tv,
    HuberL1,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Tv => "tv",
            Family::HuberL1 => "huber-l1",
        }
    }

    /// Methods run by default, HPE method first.
    pub fn methods(self) -> Vec<Method> {
        match self {
            Family::Tv => vec![
                Method::HpeCp,
                Method::ImplicitCp,
                Method::ExplicitCp,
                Method::CondatVu,
            ],
            Family::HuberL1 => vec![Method::HpeDy, Method::ImplicitDy, Method::Fb],
        }
    }

    pub fn hpe_method(self) -> Method {
        match self {
            Family::Tv => Method::HpeCp,
            Family::HuberL1 => Method::HpeDy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub spectrum: SpectrumKind,
    pub methods: Vec<Method>,
    pub lam: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub delta: f64,
    pub sigma: f64,
    pub kappa: f64,
    /// Davis-Yin stepsize; `1/β` with `β = 4 lam2` when unset.
    pub gamma: Option<f64>,
    pub cg_tol: f64,
    pub iters: usize,
    /// The reference run uses `reference_factor · iters` iterations.
    pub reference_factor: usize,
    pub inner_cap: usize,
    pub signal: SignalOptions,
    /// Gap at which H-application counts are compared in the summary.
    pub target_gap: f64,
    pub condat_vu_printed_sign: bool,
    pub wall_time: bool,
    pub parallel: bool,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    fn base(name: &str, family: Family) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            family,
            m: 200,
            n: 200,
            seed: 1,
            spectrum: SpectrumKind::Cosine,
            methods: family.methods(),
            lam: 1.0,
            lam1: 1e-3,
            lam2: 0.1,
            delta: DEFAULT_DELTA,
            sigma: 0.5,
            kappa: 0.5,
            gamma: None,
            cg_tol: DEFAULT_CG_TOL,
            iters: 300,
            reference_factor: 10,
            inner_cap: crate::hpe::DEFAULT_INNER_CAP,
            signal: SignalOptions {
                sparsity: if family == Family::Tv { 0.5 } else { 0.0 },
                ..SignalOptions::default()
            },
            target_gap: 1e-6,
            condat_vu_printed_sign: false,
            wall_time: false,
            parallel: true,
            out_dir: None,
        }
    }

    /// A named experiment at desk scale.
    pub fn named(name: &str) -> Result<Self> {
        let cfg = match name {
            "cp1-run1" => ExperimentConfig {
                lam: 20.0,
                sigma: 0.01,
                kappa: 0.5,
                ..Self::base(name, Family::Tv)
            },
            "cp1-run2" => ExperimentConfig {
                lam: 1.0,
                sigma: 0.95,
                kappa: 0.1,
                ..Self::base(name, Family::Tv)
            },
            "cp2" => ExperimentConfig {
                m: 100,
                n: 400,
                spectrum: SpectrumKind::Power5,
                lam: 0.1,
                sigma: 0.99,
                kappa: 0.5,
                ..Self::base(name, Family::Tv)
            },
            "dy-run1" => ExperimentConfig {
                lam1: 1e-3,
                lam2: 0.1,
                sigma: 0.99,
                ..Self::base(name, Family::HuberL1)
            },
            "dy-run2" => ExperimentConfig {
                lam1: 1e-4,
                lam2: 0.1,
                sigma: 0.99,
                ..Self::base(name, Family::HuberL1)
            },
            "dy-run3" => ExperimentConfig {
                lam1: 1e-4,
                lam2: 0.01,
                sigma: 0.99,
                ..Self::base(name, Family::HuberL1)
            },
            _ => {
                return Err(Error::invalid(format!(
                    "unknown experiment '{name}' (expected one of {})",
                    NAMED_EXPERIMENTS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// A named experiment or a `key = value` config file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if NAMED_EXPERIMENTS.contains(&name_or_path) {
            Self::named(name_or_path)
        } else {
            Self::from_file(Path::new(name_or_path))
        }
    }

    /// Reads a config file. `experiment = <name>` starts from a named
    /// experiment, otherwise `problem = tv|huber-l1` starts a custom one.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_with_path(&text, path)
    }

    pub fn from_str_with_path(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_key_values(text, path)?;
        let lookup = |key: &str| {
            kv.iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let mut cfg = match (lookup("experiment"), lookup("problem")) {
            (Some(name), _) if name != "custom" => Self::named(name)?,
            (_, Some(p)) => Self::base("custom", parse_family(p)?),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: "config needs 'experiment = <name>' or 'problem = tv|huber-l1'".into(),
                })
            }
        };
        for (k, v) in &kv {
            if k == "experiment" || k == "problem" {
                continue;
            }
            cfg.set(k, v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one configuration key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>()
                .map_err(|e| Error::invalid(format!("{key} = {v}: {e}")))
        }
        match key {
            "name" => self.name = value.to_string(),
            "m" => self.m = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "spectrum" => self.spectrum = value.parse()?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "lam" => self.lam = num(key, value)?,
            "lam1" => self.lam1 = num(key, value)?,
            "lam2" => self.lam2 = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "gamma" => self.gamma = Some(num(key, value)?),
            "cg_tol" => self.cg_tol = num(key, value)?,
            "iters" => self.iters = num(key, value)?,
            "reference_factor" => self.reference_factor = num(key, value)?,
            "inner_cap" => self.inner_cap = num(key, value)?,
            "jumps" => self.signal.jumps = num(key, value)?,
            "sparsity" => self.signal.sparsity = num(key, value)?,
            "noise_rel" => self.signal.noise = NoiseLevel::RelativeToPeak(num(key, value)?),
            "noise_abs" => self.signal.noise = NoiseLevel::Absolute(num(key, value)?),
            "target_gap" => self.target_gap = num(key, value)?,
            "condat_vu_sign" => {
                self.condat_vu_printed_sign = match value {
                    "standard" => false,
                    "printed" => true,
                    _ => {
                        return Err(Error::invalid(
                            "condat_vu_sign must be 'standard' or 'printed'",
                        ))
                    }
                }
            }
            "wall_time" => self.wall_time = num(key, value)?,
            "parallel" => self.parallel = num(key, value)?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::invalid(format!(
                "dimensions must be >= 2, got {}x{}",
                self.m, self.n
            )));
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::invalid(format!(
                "sigma must lie in [0, 1), got {}",
                self.sigma
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::invalid(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::invalid("cg_tol must be > 0"));
        }
        if self.reference_factor == 0 {
            return Err(Error::invalid("reference_factor must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        let allowed = self.family.methods();
        if let Some(m) = self.methods.iter().find(|m| !allowed.contains(m)) {
            return Err(Error::invalid(format!(
                "method {m} does not apply to the {} problem",
                self.family.as_str()
            )));
        }
        match self.family {
            Family::Tv if !(self.lam >= 0.0) => Err(Error::invalid("lam must be >= 0")),
            Family::HuberL1 if !(self.lam1 >= 0.0 && self.lam2 >= 0.0 && self.delta > 0.0) => {
                Err(Error::invalid("need lam1, lam2 >= 0 and delta > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn reg_params(&self) -> RegParams {
        match self.family {
            Family::Tv => RegParams::Tv { lam: self.lam },
            Family::HuberL1 => RegParams::HuberL1 {
                lam1: self.lam1,
                lam2: self.lam2,
                delta: self.delta,
            },
        }
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        ProblemInstance::generate(
            self.m,
            self.n,
            self.spectrum,
            self.seed,
            self.signal,
            self.reg_params(),
        )
    }

    pub fn dy_params(&self) -> Result<DyParams> {
        match self.gamma {
            Some(g) => DyParams::new(g, (4.0 * self.lam2).max(crate::methods::BETA_FLOOR)),
            None => DyParams::for_huber(self.lam2),
        }
    }

    /// Output directory: explicit setting, else `$HPE_OUT_DIR/<name>`, else
    /// `hpe-out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        let parent = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("hpe-out"));
        parent.join(&self.name)
    }

    /// Resolved configuration as `key = value` lines.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(s, "experiment = {}", self.name);
        let _ = writeln!(s, "problem = {}", self.family.as_str());
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "spectrum = {}", self.spectrum);
        let _ = writeln!(s, "methods = {}", methods.join(","));
        match self.family {
            Family::Tv => {
                let _ = writeln!(s, "lam = {}", self.lam);
                let _ = writeln!(s, "kappa = {}", self.kappa);
            }
            Family::HuberL1 => {
                let _ = writeln!(s, "lam1 = {}", self.lam1);
                let _ = writeln!(s, "lam2 = {}", self.lam2);
                let _ = writeln!(s, "delta = {}", self.delta);
                if let Some(g) = self.gamma {
                    let _ = writeln!(s, "gamma = {g}");
                }
            }
        }
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "cg_tol = {}", self.cg_tol);
        let _ = writeln!(s, "iters = {}", self.iters);
        let _ = writeln!(s, "reference_factor = {}", self.reference_factor);
        let _ = writeln!(s, "inner_cap = {}", self.inner_cap);
        let _ = writeln!(s, "jumps = {}", self.signal.jumps);
        let _ = writeln!(s, "sparsity = {}", self.signal.sparsity);
        match self.signal.noise {
            NoiseLevel::Absolute(v) => {
                let _ = writeln!(s, "noise_abs = {v}");
            }
            NoiseLevel::RelativeToPeak(v) => {
                let _ = writeln!(s, "noise_rel = {v}");
            }
        }
        let _ = writeln!(s, "target_gap = {}", self.target_gap);
        let sign = if self.condat_vu_printed_sign {
            "printed"
        } else {
            "standard"
        };
        let _ = writeln!(s, "condat_vu_sign = {sign}");
        s
    }
}

fn parse_family(s: &str) -> Result<Family> {
    match s {
        "tv" => Ok(Family::Tv),
        "huber-l1" => Ok(Family::HuberL1),
        _ => Err(Error::invalid(format!(
            "unknown problem '{s}' (tv|huber-l1)"
        ))),
    }
}

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: expected 'key = value'", i + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Norm bounds used for stepsizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBounds {
    pub h: f64,
    pub d: f64,
}

impl NormBounds {
    pub fn estimate(instance: &ProblemInstance) -> Result<Self> {
        let est = estimate_spectral_norm(&instance.h.fresh_copy(), 1e-6, 1000)?;
        Ok(NormBounds {
            h: est.value * NORM_SAFETY,
            d: D_NORM_BOUND,
        })
    }
}

/// Runs one method on an instance; `reference` is forwarded to HPE runs.
pub fn run_method(
    method: Method,
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
    norms: NormBounds,
    iters: usize,
    reference: Option<DVector<f64>>,
) -> Result<MethodResult> {
    let mut settings = RunSettings::new(cfg.sigma, iters);
    settings.inner_cap = cfg.inner_cap;
    settings.record_wall_time = cfg.wall_time;
    settings.reference = reference;
    let (n, p) = (instance.n(), instance.d.rows());
    let x0 = DVector::zeros(n);
    let y0 = DVector::zeros(p);
    let tv = TvData {
        h: &instance.h,
        f: &instance.f,
        d: &instance.d,
        lam: cfg.lam,
    };
    let hl = HuberL1Data {
        h: &instance.h,
        f: &instance.f,
        d: &instance.d,
        lam1: cfg.lam1,
        lam2: cfg.lam2,
        delta: cfg.delta,
    };
    match method {
        Method::HpeCp => inexact_cp_tv(
            &tv,
            &CpParams::from_kappa(cfg.kappa)?,
            &x0,
            &y0,
            &settings,
            None,
        ),
        Method::ImplicitCp => implicit_cp_run(
            &tv,
            &CpParams::from_kappa(cfg.kappa)?,
            cfg.cg_tol,
            &x0,
            &y0,
            &settings,
        ),
        Method::ExplicitCp => {
            let params = ExplicitCpParams::from_kappa(cfg.kappa, norms.h, norms.d)?;
            explicit_cp_run(
                &tv,
                &params,
                &x0,
                &DVector::zeros(instance.m()),
                &y0,
                &settings,
            )
        }
        Method::CondatVu => {
            let mut params = CondatVuParams::default_for(norms.h, norms.d)?;
            params.printed_sign = cfg.condat_vu_printed_sign;
            condat_vu_run(&tv, &params, &x0, &y0, &settings)
        }
        Method::HpeDy => inexact_dy_huber(&hl, &cfg.dy_params()?, &x0, &settings, None),
        Method::ImplicitDy => implicit_dy_run(&hl, &cfg.dy_params()?, cfg.cg_tol, &x0, &settings),
        Method::Fb => fb_run(&hl, norms.h, &x0, &settings),
        Method::HpeEy => Err(Error::invalid("hpe-ey has no experiment problem")),
    }
}

/// Result of one method within an experiment.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub result: std::result::Result<MethodResult, String>,
    pub certification_failure: bool,
    /// Audit of the fundamental estimates (HPE methods only).
    pub audit: Option<std::result::Result<AuditReport, String>>,
}

impl MethodOutcome {
    pub fn trace(&self) -> Option<&RunTrace> {
        self.result.as_ref().ok().map(|r| &r.trace)
    }

    pub fn failed(&self) -> bool {
        self.result.is_err() || matches!(self.audit, Some(Err(_)))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    /// Best objective value known (reference run and all method traces).
    pub optimum: f64,
    pub reference_iterations: usize,
    pub reference_error: Option<String>,
    pub outcomes: Vec<MethodOutcome>,
}

impl ExperimentReport {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    /// Some method failed certification or its audit.
    pub fn has_failures(&self) -> bool {
        self.outcomes.iter().any(MethodOutcome::failed)
    }

    pub fn trace_path(&self, method: Method) -> PathBuf {
        self.out_dir.join(format!("{method}.csv"))
    }
}

fn run_all(
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
    norms: NormBounds,
    reference: Option<&DVector<f64>>,
) -> Vec<(Method, Result<MethodResult>)> {
    if !cfg.parallel || cfg.methods.len() < 2 {
        return cfg
            .methods
            .iter()
            .map(|&m| {
                (
                    m,
                    run_method(m, cfg, instance, norms, cfg.iters, reference.cloned()),
                )
            })
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .methods
            .iter()
            .map(|&m| {
                // Each thread works on its own copy so the counters are private.
                let own = instance.clone();
                let reference = reference.cloned();
                scope.spawn(move || (m, run_method(m, cfg, &own, norms, cfg.iters, reference)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("method thread panicked"))
            .collect()
    })
}

/// Runs a full experiment and writes traces, summary and manifest.
///
/// A certification failure of one method is recorded and does not stop the
/// others. The reference optimum is the smallest objective seen in the
/// reference run (the family's HPE method with `reference_factor · iters`
/// iterations) and in all method traces.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out_dir = cfg.output_dir();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let instance = cfg.instance()?;
    let norms = NormBounds::estimate(&instance)?;

    let reference_iterations = cfg.iters * cfg.reference_factor;
    let mut ref_cfg = cfg.clone();
    ref_cfg.wall_time = false;
    let (reference_state, mut optimum, reference_error) = match run_method(
        cfg.family.hpe_method(),
        &ref_cfg,
        &instance,
        norms,
        reference_iterations,
        None,
    ) {
        Ok(r) => {
            let best = r.trace.min_objective().unwrap_or(f64::INFINITY);
            (Some(r.state()), best, None)
        }
        Err(e) => (None, f64::INFINITY, Some(e.to_string())),
    };

    let results = run_all(cfg, &instance, norms, reference_state.as_ref());
    for (_, r) in &results {
        if let Ok(r) = r {
            if let Some(v) = r.trace.min_objective() {
                optimum = optimum.min(v);
            }
        }
    }
    if !optimum.is_finite() {
        optimum = instance.objective(&DVector::zeros(instance.n()));
    }

    let audit_opts = AuditOptions {
        rel_tol: 1e-9,
        step_floor: None,
    };
    let mut outcomes = Vec::new();
    for (method, result) in results {
        let outcome = match result {
            Ok(r) => {
                emit_trace(&r.trace, optimum, &out_dir.join(format!("{method}.csv")))?;
                let audit = method.is_hpe().then(|| {
                    audit_prop1(&r.trace, cfg.sigma, None, &audit_opts).map_err(|e| e.to_string())
                });
                MethodOutcome {
                    method,
                    result: Ok(r),
                    certification_failure: false,
                    audit,
                }
            }
            Err(e) => {
                // Keep a header-only trace so every selected method has a file.
                emit_trace(
                    &RunTrace::new(method.as_str()),
                    optimum,
                    &out_dir.join(format!("{method}.csv")),
                )?;
                MethodOutcome {
                    method,
                    certification_failure: e.is_certification(),
                    result: Err(e.to_string()),
                    audit: None,
                }
            }
        };
        outcomes.push(outcome);
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        out_dir: out_dir.clone(),
        optimum,
        reference_iterations,
        reference_error,
        outcomes,
    };
    write_summary(&report)?;
    let mut manifest = cfg.manifest();
    let _ = writeln!(manifest, "reference_method = {}", cfg.family.hpe_method());
    let _ = writeln!(manifest, "reference_iterations = {reference_iterations}");
    let _ = writeln!(manifest, "reference_optimum = {optimum:.16e}");
    let _ = writeln!(manifest, "h_norm_bound = {:.16e}", norms.h);
    let _ = writeln!(manifest, "d_norm_bound = {:.16e}", norms.d);
    let path = out_dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes a trace as CSV with the gap `objective - optimum`.
pub fn emit_trace(trace: &RunTrace, optimum: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRACE_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in &trace.records {
        w.write_record([
            trace.method.clone(),
            r.k.to_string(),
            fmt_f(r.objective - optimum),
            r.lhs.map(fmt_f).unwrap_or_default(),
            r.rhs.map(fmt_f).unwrap_or_default(),
            r.inner_iterations.to_string(),
            r.h_applications.to_string(),
            fmt_f(r.wall_ms),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub method: String,
    pub k: usize,
    pub objective_gap: f64,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub inner_iters: usize,
    pub h_apps: u64,
    pub wall_ms: f64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!(
                "unexpected header '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let parse_err = |line: usize, field: &str, v: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("row {line}: bad {field} '{v}'"),
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let float = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .map_err(|_| parse_err(i + 1, TRACE_HEADER[j], field(j)))
        };
        let opt = |j: usize| -> Result<Option<f64>> {
            if field(j).is_empty() {
                Ok(None)
            } else {
                float(j).map(Some)
            }
        };
        rows.push(TraceRow {
            method: field(0).to_string(),
            k: field(1)
                .parse()
                .map_err(|_| parse_err(i + 1, "k", field(1)))?,
            objective_gap: float(2)?,
            lhs: opt(3)?,
            rhs: opt(4)?,
            inner_iters: field(5)
                .parse()
                .map_err(|_| parse_err(i + 1, "inner_iters", field(5)))?,
            h_apps: field(6)
                .parse()
                .map_err(|_| parse_err(i + 1, "h_apps", field(6)))?,
            wall_ms: float(7)?,
        });
    }
    Ok(rows)
}

/// Summary of a standalone trace audit.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceAudit {
    pub rows: usize,
    pub criterion_rows: usize,
    pub max_ratio: Option<f64>,
}

/// Checks a trace CSV: consecutive `k`, non-decreasing `h_apps`, and
/// `lhs <= σ·rhs` (up to `1e-10 · max rhs`) wherever both are present.
pub fn audit_trace_csv(path: &Path, sigma: f64) -> Result<TraceAudit> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::invalid(format!(
            "sigma must lie in [0, 1), got {sigma}"
        )));
    }
    let rows = read_trace(path)?;
    let scale = rows.iter().filter_map(|r| r.rhs).fold(0.0, f64::max);
    let mut violations = Vec::new();
    let mut criterion_rows = 0;
    let mut max_ratio: Option<f64> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.k != i {
            violations.push(format!("row {}: k = {} out of sequence", i + 1, r.k));
        }
        if i > 0 && r.h_apps < rows[i - 1].h_apps {
            violations.push(format!(
                "k = {}: h_apps decreased ({} < {})",
                r.k,
                r.h_apps,
                rows[i - 1].h_apps
            ));
        }
        if let (Some(l), Some(h)) = (r.lhs, r.rhs) {
            criterion_rows += 1;
            if l > sigma * h + 1e-10 * scale {
                violations.push(format!(
                    "k = {}: lhs = {l:e} > sigma * rhs = {:e}",
                    r.k,
                    sigma * h
                ));
            }
            if h > 0.0 {
                max_ratio = Some(max_ratio.map_or(l / h, |m: f64| m.max(l / h)));
            }
        }
    }
    if violations.is_empty() {
        Ok(TraceAudit {
            rows: rows.len(),
            criterion_rows,
            max_ratio,
        })
    } else {
        Err(Error::AuditFailure(violations))
    }
}

fn write_summary(report: &ExperimentReport) -> Result<()> {
    let path = report.out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    w.write_record([
        "method",
        "status",
        "iterations",
        "final_objective",
        "final_gap",
        "total_h_apps",
        "median_inner_iters",
        "h_apps_to_target_gap",
        "audit",
    ])
    .map_err(|e| csv_error(&path, e))?;
    for o in &report.outcomes {
        let row = match &o.result {
            Ok(r) => {
                let t = &r.trace;
                let last = t.last().map(|l| l.objective);
                [
                    o.method.to_string(),
                    "ok".to_string(),
                    t.len().to_string(),
                    last.map(fmt_f).unwrap_or_default(),
                    last.map(|v| fmt_f(v - report.optimum)).unwrap_or_default(),
                    t.total_h_applications().to_string(),
                    t.median_inner_iterations()
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                    t.h_applications_to_gap(report.optimum, report.config.target_gap)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                    match &o.audit {
                        None => "n/a".to_string(),
                        Some(Ok(_)) => "pass".to_string(),
                        Some(Err(e)) => format!("fail: {e}"),
                    },
                ]
            }
            Err(e) => {
                let status = if o.certification_failure {
                    format!("certification-failure: {e}")
                } else {
                    format!("error: {e}")
                };
                [
                    o.method.to_string(),
                    status,
                    "0".into(),
                    String::new(),
                    String::new(),
                    "0".into(),
                    String::new(),
                    String::new(),
                    "n/a".into(),
                ]
            }
        };
        w.write_record(row).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Stacked `(x, y)` helper for callers building Chambolle-Pock references.
pub fn stack_primal_dual(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    stack(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_experiments_pin_parameters() {
        let c = ExperimentConfig::named("cp1-run1").unwrap();
        assert_eq!((c.lam, c.sigma, c.kappa), (20.0, 0.01, 0.5));
        let c = ExperimentConfig::named("cp1-run2").unwrap();
        assert_eq!((c.lam, c.sigma, c.kappa), (1.0, 0.95, 0.1));
        let c = ExperimentConfig::named("cp2").unwrap();
        assert_eq!(
            (c.lam, c.sigma, c.kappa, c.m, c.n),
            (0.1, 0.99, 0.5, 100, 400)
        );
        assert_eq!(c.spectrum, SpectrumKind::Power5);
        let c = ExperimentConfig::named("dy-run1").unwrap();
        assert_eq!((c.lam1, c.lam2, c.sigma), (1e-3, 0.1, 0.99));
        let c = ExperimentConfig::named("dy-run2").unwrap();
        assert_eq!((c.lam1, c.lam2, c.sigma), (1e-4, 0.1, 0.99));
        let c = ExperimentConfig::named("dy-run3").unwrap();
        assert_eq!((c.lam1, c.lam2, c.sigma), (1e-4, 0.01, 0.99));
        assert!(ExperimentConfig::named("cp3").is_err());
    }

    #[test]
    fn config_text_overrides() {
        let text = "experiment = dy-run2  # base\nm = 40\nn = 40\nmethods = hpe-dy, fb\n\n";
        let c = ExperimentConfig::from_str_with_path(text, Path::new("x.conf")).unwrap();
        assert_eq!((c.m, c.n, c.lam1), (40, 40, 1e-4));
        assert_eq!(c.methods, vec![Method::HpeDy, Method::Fb]);
        let bad = "problem = tv\nmethods = hpe-dy\n";
        assert!(ExperimentConfig::from_str_with_path(bad, Path::new("x.conf")).is_err());
        assert!(ExperimentConfig::from_str_with_path("m = 3\n", Path::new("x.conf")).is_err());
        assert!(ExperimentConfig::from_str_with_path(
            "problem = tv\nfoo = 1\n",
            Path::new("x.conf")
        )
        .is_err());
    }

    #[test]
    fn manifest_round_trips_through_config_parser() {
        let mut c = ExperimentConfig::named("cp2").unwrap();
        c.seed = 77;
        let text = c
            .manifest()
            .replace("experiment = cp2", "experiment = cp2\nname = cp2");
        let back = ExperimentConfig::from_str_with_path(&text, Path::new("m.txt")).unwrap();
        assert_eq!(back, c);
    }
}
