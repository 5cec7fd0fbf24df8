//! Seeded generators for the two test problem families and their objectives.
//!
//! Both families recover a piecewise constant signal `x†` from `f = Hx† + η`
//! with an ill-conditioned `H = UΣVᵀ`:
//!
//! * TV: `½‖Hx - f‖² + lam ‖Dx‖₁`,
//! * Huber-ℓ₁: `½‖Hx - f‖² + lam1 ‖x‖₁ + lam2 L_δ(Dx)`.
//!
//! All randomness comes from `ChaCha8` seeded with the instance seed, with one
//! stream per purpose, so an instance is a pure function of its parameters.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::LinearMap;

const STREAM_U: u64 = 1;
const STREAM_V: u64 = 2;
const STREAM_SIGNAL: u64 = 3;
const STREAM_NOISE: u64 = 4;

/// Default Huber parameter.
pub const DEFAULT_DELTA: f64 = 0.1;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Singular value profile of the generated `H`, over `r = min(m, n)` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `σᵢ = ½ + ½cos(π(i-1)/(r-1))`.
    Cosine,
    /// `σᵢ = (1 - (i-1)/(r-1))⁵`.
    Power5,
}

impl SpectrumKind {
    pub fn values(self, r: usize) -> Vec<f64> {
        if r == 1 {
            return vec![1.0];
        }
        (0..r)
            .map(|i| {
                let t = i as f64 / (r - 1) as f64;
                match self {
                    SpectrumKind::Cosine => {
                        if i == r - 1 {
                            0.0
                        } else {
                            0.5 + 0.5 * (std::f64::consts::PI * t).cos()
                        }
                    }
                    SpectrumKind::Power5 => (1.0 - t).powi(5),
                }
            })
            .collect()
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumKind::Cosine => "cosine",
            SpectrumKind::Power5 => "power5",
        })
    }
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SpectrumKind::Cosine),
            "power5" => Ok(SpectrumKind::Power5),
            _ => Err(Error::invalid(format!(
                "unknown spectrum '{s}' (cosine|power5)"
            ))),
        }
    }
}

/// `U` (m×r), `σ` (r) and `V` (n×r) of a generated matrix.
#[derive(Debug, Clone)]
pub struct IllCondFactors {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl IllCondFactors {
    pub fn assemble(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn orthonormal_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Seeded factors of [`gen_illcond_matrix`].
pub fn gen_illcond_factors(
    m: usize,
    n: usize,
    kind: SpectrumKind,
    seed: u64,
) -> Result<IllCondFactors> {
    if m < 2 || n < 2 {
        return Err(Error::invalid(format!(
            "matrix dimensions must be >= 2, got {m}x{n}"
        )));
    }
    let r = m.min(n);
    Ok(IllCondFactors {
        u: orthonormal_columns(m, r, &mut rng(seed, STREAM_U)),
        sigma: DVector::from_vec(kind.values(r)),
        v: orthonormal_columns(n, r, &mut rng(seed, STREAM_V)),
    })
}

/// `H = UΣVᵀ` with orthonormal `U`, `V` from the thin QR of seeded Gaussian
/// matrices and the requested spectrum.
pub fn gen_illcond_matrix(m: usize, n: usize, kind: SpectrumKind, seed: u64) -> Result<LinearMap> {
    Ok(LinearMap::dense(
        gen_illcond_factors(m, n, kind, seed)?.assemble(),
    ))
}

/// `(n-1)×n` first differences, `(Dx)ᵢ = x_{i+1} - xᵢ`.
pub fn gen_diff_matrix(n: usize) -> Result<LinearMap> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "difference operator needs n >= 2, got {n}"
        )));
    }
    Ok(LinearMap::first_difference(n))
}

/// Standard deviation of the additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Absolute(f64),
    /// Multiple of `‖Hx†‖_∞`.
    RelativeToPeak(f64),
}

impl Default for NoiseLevel {
    fn default() -> Self {
        NoiseLevel::RelativeToPeak(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalOptions {
    pub jumps: usize,
    /// Fraction of constant segments set to zero.
    pub sparsity: f64,
    pub noise: NoiseLevel,
}

impl Default for SignalOptions {
    fn default() -> Self {
        SignalOptions {
            jumps: 10,
            sparsity: 0.5,
            noise: NoiseLevel::default(),
        }
    }
}

/// Piecewise constant `x†` with `jumps` breakpoints and data `f = Hx† + η`.
///
/// Segment values are standard normal; `round(sparsity · segments)` of them
/// are zeroed. Returns `(x†, f)`.
pub fn gen_signal_and_data(
    h: &LinearMap,
    seed: u64,
    opts: &SignalOptions,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = h.cols();
    if opts.jumps >= n {
        return Err(Error::invalid(format!(
            "{} jumps do not fit into n = {n}",
            opts.jumps
        )));
    }
    if !(0.0..=1.0).contains(&opts.sparsity) {
        return Err(Error::invalid(format!(
            "sparsity must lie in [0, 1], got {}",
            opts.sparsity
        )));
    }
    let std = match opts.noise {
        NoiseLevel::Absolute(s) | NoiseLevel::RelativeToPeak(s) if !(s >= 0.0) => {
            return Err(Error::invalid(format!("noise level must be >= 0, got {s}")))
        }
        NoiseLevel::Absolute(s) => Some(s),
        NoiseLevel::RelativeToPeak(_) => None,
    };

    let mut r = rng(seed, STREAM_SIGNAL);
    let mut breaks: Vec<usize> = index::sample(&mut r, n - 1, opts.jumps)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    breaks.sort_unstable();
    let segments = opts.jumps + 1;
    let mut values: Vec<f64> = (0..segments)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    let zeroed = (opts.sparsity * segments as f64).round() as usize;
    for i in index::sample(&mut r, segments, zeroed.min(segments)) {
        values[i] = 0.0;
    }
    let mut x = DVector::zeros(n);
    let mut seg = 0;
    for i in 0..n {
        while seg < breaks.len() && i >= breaks[seg] {
            seg += 1;
        }
        x[i] = values[seg];
    }

    let clean = h.apply_untracked(&x);
    let std = std.unwrap_or_else(|| match opts.noise {
        NoiseLevel::RelativeToPeak(s) => s * clean.amax(),
        NoiseLevel::Absolute(s) => s,
    });
    if std == 0.0 {
        return Ok((x, clean));
    }
    let mut rn = rng(seed, STREAM_NOISE);
    let f = clean.map(|t| t + std * Distribution::<f64>::sample(&StandardNormal, &mut rn));
    Ok((x, f))
}

/// `½‖Hx - f‖² + lam ‖Dx‖₁`; does not touch the application counters.
pub fn objective_cp(
    h: &LinearMap,
    f: &DVector<f64>,
    d: &LinearMap,
    lam: f64,
    x: &DVector<f64>,
) -> f64 {
    0.5 * (h.apply_untracked(x) - f).norm_squared() + lam * d.apply_untracked(x).lp_norm(1)
}

/// `½‖Hx - f‖² + lam1 ‖x‖₁ + lam2 L_δ(Dx)`; does not touch the counters.
pub fn objective_dy(
    h: &LinearMap,
    f: &DVector<f64>,
    d: &LinearMap,
    lam1: f64,
    lam2: f64,
    delta: f64,
    x: &DVector<f64>,
) -> f64 {
    let huber: f64 = d
        .apply_untracked(x)
        .iter()
        .map(|&t| {
            if t.abs() <= delta {
                0.5 * t * t
            } else {
                delta * (t.abs() - 0.5 * delta)
            }
        })
        .sum();
    0.5 * (h.apply_untracked(x) - f).norm_squared() + lam1 * x.lp_norm(1) + lam2 * huber
}

/// Regularisation of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegParams {
    Tv { lam: f64 },
    HuberL1 { lam1: f64, lam2: f64, delta: f64 },
}

/// A generated instance with everything needed to replay it.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub h: LinearMap,
    pub d: LinearMap,
    pub f: DVector<f64>,
    pub x_true: DVector<f64>,
    pub params: RegParams,
    pub seed: u64,
    pub spectrum: SpectrumKind,
    pub signal: SignalOptions,
}

impl ProblemInstance {
    pub fn generate(
        m: usize,
        n: usize,
        spectrum: SpectrumKind,
        seed: u64,
        signal: SignalOptions,
        params: RegParams,
    ) -> Result<Self> {
        let h = gen_illcond_matrix(m, n, spectrum, seed)?;
        let d = gen_diff_matrix(n)?;
        let (x_true, f) = gen_signal_and_data(&h, seed, &signal)?;
        Ok(ProblemInstance {
            h,
            d,
            f,
            x_true,
            params,
            seed,
            spectrum,
            signal,
        })
    }

    pub fn m(&self) -> usize {
        self.h.rows()
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        match self.params {
            RegParams::Tv { lam } => objective_cp(&self.h, &self.f, &self.d, lam, x),
            RegParams::HuberL1 { lam1, lam2, delta } => {
                objective_dy(&self.h, &self.f, &self.d, lam1, lam2, delta, x)
            }
        }
    }

    /// Writes `manifest.txt` plus little-endian `f64` arrays `H.bin`
    /// (row-major), `f.bin` and `x_true.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = format!(
            "m = {}\nn = {}\nseed = {}\nspectrum = {}\njumps = {}\nsparsity = {:.17e}\n",
            self.m(),
            self.n(),
            self.seed,
            self.spectrum,
            self.signal.jumps,
            self.signal.sparsity
        );
        match self.signal.noise {
            NoiseLevel::Absolute(s) => manifest += &format!("noise_abs = {s:.17e}\n"),
            NoiseLevel::RelativeToPeak(s) => manifest += &format!("noise_rel = {s:.17e}\n"),
        }
        match self.params {
            RegParams::Tv { lam } => manifest += &format!("problem = tv\nlam = {lam:.17e}\n"),
            RegParams::HuberL1 { lam1, lam2, delta } => {
                manifest += &format!(
                    "problem = huber-l1\nlam1 = {lam1:.17e}\nlam2 = {lam2:.17e}\ndelta = {delta:.17e}\n"
                )
            }
        }
        write_file(&dir.join("manifest.txt"), manifest.as_bytes())?;
        let h = self.h.to_dense();
        let row_major: Vec<f64> = (0..h.nrows())
            .flat_map(|i| h.row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        write_f64s(&dir.join("H.bin"), &row_major)?;
        write_f64s(&dir.join("f.bin"), self.f.as_slice())?;
        write_f64s(&dir.join("x_true.bin"), self.x_true.as_slice())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let kv = crate::harness::parse_key_values(&text, &manifest_path)?;
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse {
                    path: manifest_path.clone(),
                    message: format!("missing key '{key}'"),
                })
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse::<f64>().map_err(|e| Error::Parse {
                path: manifest_path.clone(),
                message: format!("{key}: {e}"),
            })
        };
        let int = |key: &str| -> Result<u64> {
            get(key)?.parse::<u64>().map_err(|e| Error::Parse {
                path: manifest_path.clone(),
                message: format!("{key}: {e}"),
            })
        };
        let (m, n) = (int("m")? as usize, int("n")? as usize);
        let noise = match get("noise_abs") {
            Ok(_) => NoiseLevel::Absolute(num("noise_abs")?),
            Err(_) => NoiseLevel::RelativeToPeak(num("noise_rel")?),
        };
        let params = match get("problem")? {
            "tv" => RegParams::Tv { lam: num("lam")? },
            "huber-l1" => RegParams::HuberL1 {
                lam1: num("lam1")?,
                lam2: num("lam2")?,
                delta: num("delta")?,
            },
            other => {
                return Err(Error::Parse {
                    path: manifest_path,
                    message: format!("unknown problem '{other}'"),
                })
            }
        };
        let h = read_f64s(&dir.join("H.bin"), m * n)?;
        Ok(ProblemInstance {
            h: LinearMap::dense(DMatrix::from_row_slice(m, n, &h)),
            d: gen_diff_matrix(n)?,
            f: DVector::from_vec(read_f64s(&dir.join("f.bin"), m)?),
            x_true: DVector::from_vec(read_f64s(&dir.join("x_true.bin"), n)?),
            params,
            seed: int("seed")?,
            spectrum: get("spectrum")?.parse()?,
            signal: SignalOptions {
                jumps: int("jumps")? as usize,
                sparsity: num("sparsity")?,
                noise,
            },
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_file(path, &bytes)
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "length is not a multiple of 8 bytes".into(),
        });
    }
    check_dim("stored array", expected, bytes.len() / 8)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_endpoints() {
        for kind in [SpectrumKind::Cosine, SpectrumKind::Power5] {
            let s = kind.values(7);
            assert_eq!(s[0], 1.0);
            assert_eq!(s[6], 0.0);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
        assert_eq!(SpectrumKind::Cosine.values(2), vec![1.0, 0.0]);
    }

    #[test]
    fn two_by_two_cosine_has_rank_one() {
        let h = gen_illcond_matrix(2, 2, SpectrumKind::Cosine, 3)
            .unwrap()
            .to_dense();
        assert!(h.determinant().abs() < 1e-15);
        assert!((h.norm() - 1.0).abs() < 1e-14);
        assert!(gen_illcond_matrix(1, 4, SpectrumKind::Cosine, 3).is_err());
    }

    #[test]
    fn difference_operator() {
        let d = gen_diff_matrix(3).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert_eq!(d.apply_untracked(&x), DVector::from_vec(vec![1.0, 2.0]));
        assert!(d.apply_untracked(&DVector::from_element(3, 5.0)).norm() == 0.0);
        assert!(gen_diff_matrix(1).is_err());
    }

    #[test]
    fn signal_cases() {
        let h = gen_illcond_matrix(20, 30, SpectrumKind::Cosine, 1).unwrap();
        let clean = SignalOptions {
            jumps: 0,
            sparsity: 0.0,
            noise: NoiseLevel::Absolute(0.0),
        };
        let (x, f) = gen_signal_and_data(&h, 9, &clean).unwrap();
        assert!(x.iter().all(|v| *v == x[0]));
        assert_eq!(f, h.apply_untracked(&x));
        let d = gen_diff_matrix(30).unwrap();
        assert_eq!(objective_cp(&h, &f, &d, 3.0, &x), 0.0);

        let opts = SignalOptions::default();
        let a = gen_signal_and_data(&h, 4, &opts).unwrap();
        let b = gen_signal_and_data(&h, 4, &opts).unwrap();
        assert_eq!(a, b);
        let jumps = d
            .apply_untracked(&a.0)
            .iter()
            .filter(|t| **t != 0.0)
            .count();
        assert!(jumps <= 10);
        assert!(gen_signal_and_data(&h, 4, &SignalOptions { jumps: 30, ..opts }).is_err());
    }

    #[test]
    fn objectives_at_zero_and_in_huber_region() {
        let h = gen_illcond_matrix(6, 5, SpectrumKind::Power5, 2).unwrap();
        let d = gen_diff_matrix(5).unwrap();
        let f = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]);
        let z = DVector::zeros(5);
        assert_eq!(objective_cp(&h, &f, &d, 2.0, &z), 0.5 * f.norm_squared());
        assert_eq!(
            objective_dy(&h, &f, &d, 1.0, 1.0, 0.1, &z),
            0.5 * f.norm_squared()
        );
        let x = DVector::from_vec(vec![0.0, 0.01, 0.0, -0.02, 0.0]);
        let base = objective_dy(&h, &f, &d, 0.0, 0.0, 0.1, &x);
        let with = objective_dy(&h, &f, &d, 0.0, 0.7, 0.1, &x);
        let dx = d.apply_untracked(&x);
        assert!((with - base - 0.35 * dx.norm_squared()).abs() < 1e-15);
    }
}
