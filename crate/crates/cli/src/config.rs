//! Run-configuration parsing and validation.
//!
//! The TOML tree mirrors the module configs one section per module. Every
//! field is validated by the owning module (or an explicit rule here) before
//! any computation starts, unknown keys are hard errors, and there are no
//! silent defaults for physics parameters: model coefficients and exponents
//! must be written out. Only numerical-policy fields (strides, sample
//! counts, sweep ranges) carry documented defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use kspec_core::experiments::{LambdaGridSpec, PROBE_WEIGHTS};
use kspec_core::grid::Grid;
use kspec_core::integrator::{IntegratorConfig, Scheme};
use kspec_core::model::{
    validate_exponents, validate_params, Exponent, ExponentError, ExponentSet, ModelError,
    ModelParams, PressureLaw,
};
use kspec_core::nonlinear::GForm;
use kspec_core::symbol::{ResolventConstants, Sector};

/// Configuration rejection, always citing the offending key path.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// File could not be read.
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Structural TOML failure (syntax, type mismatch, missing field).
    #[error("config parse error: {0}")]
    Parse(String),
    /// A key the schema does not know; never a warning.
    #[error("config rejects unknown key: {0}")]
    UnknownKey(String),
    /// A well-formed value that violates the owning module's rule.
    #[error("{key}: {reason}")]
    Validation { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl ToString) -> ConfigError {
        ConfigError::Validation {
            key: key.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// An exponent field: TOML number, or a string like `"24/11"` / `"inf"`.
#[derive(Debug, Clone, Copy)]
struct ExpValue(Exponent);

impl<'de> Deserialize<'de> for ExpValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = ExpValue;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or a string such as \"24/11\", \"8\", or \"inf\"")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ExpValue, E> {
                Ok(ExpValue(Exponent::rational(v, 1)))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ExpValue, E> {
                Ok(ExpValue(Exponent::rational(v as i64, 1)))
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<ExpValue, E> {
                Ok(ExpValue(Exponent::real(v)))
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<ExpValue, E> {
                s.parse::<Exponent>()
                    .map(ExpValue)
                    .map_err(serde::de::Error::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Canonical text form of an exponent: exact rationals as `n/d`, else the
/// shortest round-trip decimal (`inf` included).
fn exponent_str(e: &Exponent) -> String {
    match e.exact {
        Some(r) if *r.denom() == 1 => format!("{}", r.numer()),
        Some(r) => format!("{}/{}", r.numer(), r.denom()),
        None => format!("{}", e.value),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelSection,
    grid: GridSection,
    exponents: Option<ExponentsSection>,
    integrator: Option<IntegratorSection>,
    data: Option<DataSection>,
    decay: Option<DecaySection>,
    eigen: Option<EigenSection>,
    resolvent: Option<ResolventSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    mu_star: f64,
    nu_star: f64,
    kappa_star: f64,
    rho_star: f64,
    pressure: PressureSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PressureSection {
    kind: String,
    a: Option<f64>,
    gamma_exp: Option<f64>,
    coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    dim: usize,
    modes: usize,
    length: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentsSection {
    p: ExpValue,
    q1: ExpValue,
    q2: ExpValue,
    tau: ExpValue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorSection {
    dt: f64,
    t_end: f64,
    scheme: Option<String>,
    g_form: Option<String>,
    linear_only: Option<bool>,
    snapshot_stride: Option<usize>,
    norm_stride: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    kind: String,
    sigma: Option<f64>,
    q: Option<ExpValue>,
    k_cut: Option<f64>,
    k_max: Option<usize>,
    weights: Option<Vec<f64>>,
    amplitude: Option<f64>,
    scale_to_i: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecaySection {
    p: ExpValue,
    q: ExpValue,
    j: Option<usize>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EigenSection {
    xi_min: Option<f64>,
    xi_max: Option<f64>,
    per_decade: Option<usize>,
    low_range: Option<[f64; 2]>,
    high_range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolventSection {
    q: ExpValue,
    epsilon_angle: f64,
    lambda0: f64,
    gamma0: f64,
    gamma1: f64,
    gamma2: f64,
    angles: Option<usize>,
    radii_per_decade: Option<usize>,
    radius_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

/// Validated integrator policy; `to_config` builds the module config.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub g_form: GForm,
    pub linear_only: bool,
    pub snapshot_stride: usize,
    pub norm_stride: usize,
}

impl IntegratorSettings {
    /// Module-level configuration with the policy applied.
    pub fn to_config(&self) -> IntegratorConfig {
        let mut c = IntegratorConfig::new(self.dt, self.t_end);
        c.scheme = self.scheme;
        c.g_form = self.g_form;
        c.linear_only = self.linear_only;
        c.snapshot_stride = self.snapshot_stride;
        c.norm_stride = self.norm_stride;
        c
    }
}

/// Validated recipe for simulate's synthesized initial data. The linear
/// experiment commands use their fixed contract probes instead.
#[derive(Debug, Clone, PartialEq)]
pub enum DataConfig {
    /// Isotropic Gaussian pair; `sigma` defaults to L/20 at realization.
    Gaussian {
        sigma: Option<f64>,
        weights: [f64; 3],
        amplitude: f64,
        scale_to_i: Option<f64>,
    },
    /// Borderline-Lq radial spectral profile on 0 < |k| <= k_cut.
    LqProfile {
        q: Exponent,
        k_cut: f64,
        weights: [f64; 3],
        amplitude: f64,
        scale_to_i: Option<f64>,
    },
    /// Seeded band-limited random fields (max axis wavenumber k_max).
    Random {
        k_max: usize,
        amplitude: f64,
        scale_to_i: Option<f64>,
    },
}

/// Validated decay-experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySettings {
    pub p: Exponent,
    pub q: Exponent,
    pub j: usize,
    pub t_min: f64,
    /// None defers to the wrap-around fit cap at run time.
    pub t_max: Option<f64>,
    pub samples: usize,
}

/// Validated eigen-sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSettings {
    pub xi_min: f64,
    pub xi_max: f64,
    pub per_decade: usize,
    pub low: (f64, f64),
    pub high: (f64, f64),
}

impl Default for EigenSettings {
    fn default() -> EigenSettings {
        EigenSettings {
            xi_min: 1e-6,
            xi_max: 1e6,
            per_decade: 25,
            low: (1e-6, 1e-1),
            high: (1e1, 1e6),
        }
    }
}

/// Validated resolvent-sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSettings {
    pub q: Exponent,
    pub sector: Sector,
    pub consts: ResolventConstants,
    pub grid_spec: LambdaGridSpec,
}

/// The fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    pub exponents: Option<ExponentSet>,
    pub integrator: Option<IntegratorSettings>,
    pub data: Option<DataConfig>,
    pub decay: Option<DecaySettings>,
    pub eigen: EigenSettings,
    pub resolvent: Option<ResolventSettings>,
    pub out_dir: PathBuf,
}

/// Read, parse, and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

/// Parse and validate config text.
pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            ConfigError::UnknownKey(msg.replace('\n', " ").trim().to_string())
        } else {
            ConfigError::Parse(msg.replace('\n', " ").trim().to_string())
        }
    })?;
    validate(raw)
}

/// Map a model rejection onto the key that caused it.
fn model_key(err: &ModelError) -> String {
    match err {
        ModelError::ViolatesViscosity { mu, .. } if *mu <= 0.0 => "model.mu_star".into(),
        ModelError::ViolatesViscosity { .. } => "model.nu_star".into(),
        ModelError::ViolatesCapillarity { .. } => "model.kappa_star".into(),
        ModelError::ViolatesPressure { .. } => "model.pressure".into(),
        ModelError::DegenerateDiscriminant { .. } => "model.kappa_star".into(),
        ModelError::NonFinite { name, .. } => format!("model.{name}"),
        ModelError::RangeViolation { .. } => "model.rho_star".into(),
    }
}

/// Map an exponent rejection onto the key that caused it.
fn exponent_key(err: &ExponentError) -> String {
    match err {
        ExponentError::DimensionTooSmall(_) => "grid.dim".into(),
        ExponentError::POutOfRange(_) | ExponentError::IntegrabilityWindow(_) => {
            "exponents.p".into()
        }
        ExponentError::QOrdering { .. }
        | ExponentError::ScalingRelation { .. }
        | ExponentError::DataNormExponent(_) => "exponents.q1".into(),
        ExponentError::TauWindow { .. } => "exponents.tau".into(),
        ExponentError::NonFinite(name) => format!("exponents.{name}"),
    }
}

fn finite(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("must be positive and finite, got {v}")))
    }
}

/// Reject a key that is present but inapplicable to the chosen kind.
fn inapplicable<T>(section: &str, field: &str, opt: &Option<T>, kind: &str) -> Result<(), ConfigError> {
    if opt.is_some() {
        return Err(ConfigError::invalid(
            &format!("{section}.{field}"),
            format!("not applicable when kind = \"{kind}\""),
        ));
    }
    Ok(())
}

fn weights3(section: &str, w: Option<Vec<f64>>) -> Result<[f64; 3], ConfigError> {
    let key = format!("{section}.weights");
    match w {
        None => Ok(PROBE_WEIGHTS),
        Some(v) => {
            if v.len() != 3 {
                return Err(ConfigError::invalid(
                    &key,
                    format!("needs exactly 3 velocity weights, got {}", v.len()),
                ));
            }
            for x in &v {
                finite(&key, *x)?;
            }
            Ok([v[0], v[1], v[2]])
        }
    }
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    // Model: the (condi) admissibility rules, owned by the model module.
    let m = &raw.model;
    for (key, v) in [
        ("model.mu_star", m.mu_star),
        ("model.nu_star", m.nu_star),
        ("model.kappa_star", m.kappa_star),
        ("model.rho_star", m.rho_star),
    ] {
        finite(key, v)?;
    }
    let pressure = match m.pressure.kind.as_str() {
        "polytropic" => {
            inapplicable("model.pressure", "coeffs", &m.pressure.coeffs, "polytropic")?;
            let a = m
                .pressure
                .a
                .ok_or_else(|| ConfigError::invalid("model.pressure.a", "required for kind = \"polytropic\""))?;
            let g = m.pressure.gamma_exp.ok_or_else(|| {
                ConfigError::invalid("model.pressure.gamma_exp", "required for kind = \"polytropic\"")
            })?;
            PressureLaw::Polytropic {
                a: positive("model.pressure.a", a)?,
                gamma_exp: finite("model.pressure.gamma_exp", g)?,
            }
        }
        "polynomial" => {
            inapplicable("model.pressure", "a", &m.pressure.a, "polynomial")?;
            inapplicable("model.pressure", "gamma_exp", &m.pressure.gamma_exp, "polynomial")?;
            let coeffs = m.pressure.coeffs.clone().ok_or_else(|| {
                ConfigError::invalid("model.pressure.coeffs", "required for kind = \"polynomial\"")
            })?;
            if coeffs.is_empty() {
                return Err(ConfigError::invalid("model.pressure.coeffs", "must be nonempty"));
            }
            for c in &coeffs {
                finite("model.pressure.coeffs", *c)?;
            }
            PressureLaw::Polynomial { coeffs }
        }
        other => {
            return Err(ConfigError::invalid(
                "model.pressure.kind",
                format!("unknown pressure law \"{other}\" (expected \"polytropic\" or \"polynomial\")"),
            ))
        }
    };
    let params = validate_params(m.mu_star, m.nu_star, m.kappa_star, m.rho_star, pressure)
        .map_err(|e| ConfigError::Validation {
            key: model_key(&e),
            reason: e.to_string(),
        })?;

    // Lattice, owned by the grid module.
    let grid = Grid::new(raw.grid.dim, raw.grid.modes, raw.grid.length)
        .map_err(|e| ConfigError::invalid("grid", e))?;

    // Exponent quadruple, owned by the model module; dimension from the grid.
    let exponents = match &raw.exponents {
        None => None,
        Some(s) => Some(
            validate_exponents(s.p.0, s.q1.0, s.q2.0, s.tau.0, grid.dim()).map_err(|e| {
                ConfigError::Validation {
                    key: exponent_key(&e),
                    reason: e.to_string(),
                }
            })?,
        ),
    };

    let integrator = match &raw.integrator {
        None => None,
        Some(s) => {
            let dt = positive("integrator.dt", s.dt)?;
            let t_end = positive("integrator.t_end", s.t_end)?;
            if dt > t_end {
                return Err(ConfigError::invalid("integrator.dt", "must not exceed t_end"));
            }
            let scheme = match s.scheme.as_deref().unwrap_or("etd2rk") {
                "etd1" => Scheme::Etd1,
                "etd2rk" => Scheme::Etd2Rk,
                other => {
                    return Err(ConfigError::invalid(
                        "integrator.scheme",
                        format!("unknown scheme \"{other}\" (expected \"etd1\" or \"etd2rk\")"),
                    ))
                }
            };
            let g_form = match s.g_form.as_deref().unwrap_or("conservative") {
                "conservative" => GForm::Conservative,
                "divided" => GForm::Divided,
                other => {
                    return Err(ConfigError::invalid(
                        "integrator.g_form",
                        format!("unknown g form \"{other}\" (expected \"conservative\" or \"divided\")"),
                    ))
                }
            };
            let snapshot_stride = s.snapshot_stride.unwrap_or(1);
            let norm_stride = s.norm_stride.unwrap_or(1);
            if snapshot_stride == 0 {
                return Err(ConfigError::invalid("integrator.snapshot_stride", "must be at least 1"));
            }
            if norm_stride == 0 {
                return Err(ConfigError::invalid("integrator.norm_stride", "must be at least 1"));
            }
            Some(IntegratorSettings {
                dt,
                t_end,
                scheme,
                g_form,
                linear_only: s.linear_only.unwrap_or(false),
                snapshot_stride,
                norm_stride,
            })
        }
    };

    let data = match raw.data {
        None => None,
        Some(s) => {
            let amplitude = match s.amplitude {
                None => 1.0,
                Some(a) => {
                    finite("data.amplitude", a)?;
                    if a == 0.0 {
                        return Err(ConfigError::invalid("data.amplitude", "must be nonzero"));
                    }
                    a
                }
            };
            let scale_to_i = s.scale_to_i.map(|v| positive("data.scale_to_i", v)).transpose()?;
            Some(match s.kind.as_str() {
                "gaussian" => {
                    inapplicable("data", "q", &s.q, "gaussian")?;
                    inapplicable("data", "k_cut", &s.k_cut, "gaussian")?;
                    inapplicable("data", "k_max", &s.k_max, "gaussian")?;
                    DataConfig::Gaussian {
                        sigma: s.sigma.map(|v| positive("data.sigma", v)).transpose()?,
                        weights: weights3("data", s.weights)?,
                        amplitude,
                        scale_to_i,
                    }
                }
                "lq_profile" => {
                    inapplicable("data", "sigma", &s.sigma, "lq_profile")?;
                    inapplicable("data", "k_max", &s.k_max, "lq_profile")?;
                    let q = s
                        .q
                        .ok_or_else(|| ConfigError::invalid("data.q", "required for kind = \"lq_profile\""))?;
                    if !(q.0.value > 1.0) {
                        return Err(ConfigError::invalid("data.q", "profile exponent must exceed 1"));
                    }
                    DataConfig::LqProfile {
                        q: q.0,
                        k_cut: s.k_cut.map(|v| positive("data.k_cut", v)).transpose()?.unwrap_or(30.0),
                        weights: weights3("data", s.weights)?,
                        amplitude,
                        scale_to_i,
                    }
                }
                "random" => {
                    inapplicable("data", "sigma", &s.sigma, "random")?;
                    inapplicable("data", "q", &s.q, "random")?;
                    inapplicable("data", "k_cut", &s.k_cut, "random")?;
                    inapplicable("data", "weights", &s.weights, "random")?;
                    let k_max = s
                        .k_max
                        .ok_or_else(|| ConfigError::invalid("data.k_max", "required for kind = \"random\""))?;
                    if k_max == 0 {
                        return Err(ConfigError::invalid("data.k_max", "must be at least 1"));
                    }
                    DataConfig::Random {
                        k_max,
                        amplitude,
                        scale_to_i,
                    }
                }
                other => {
                    return Err(ConfigError::invalid(
                        "data.kind",
                        format!("unknown data kind \"{other}\" (expected \"gaussian\", \"lq_profile\", or \"random\")"),
                    ))
                }
            })
        }
    };

    let decay = match &raw.decay {
        None => None,
        Some(s) => {
            let t_min = s.t_min.map(|v| positive("decay.t_min", v)).transpose()?.unwrap_or(1.0);
            let t_max = s.t_max.map(|v| positive("decay.t_max", v)).transpose()?;
            if let Some(tm) = t_max {
                if tm <= t_min {
                    return Err(ConfigError::invalid("decay.t_max", "must exceed t_min"));
                }
            }
            let samples = s.samples.unwrap_or(25);
            if samples < 8 {
                return Err(ConfigError::invalid(
                    "decay.samples",
                    "slope fits need at least 8 samples",
                ));
            }
            let j = s.j.unwrap_or(0);
            if j > 4 {
                return Err(ConfigError::invalid("decay.j", "derivative order capped at 4"));
            }
            Some(DecaySettings {
                p: s.p.0,
                q: s.q.0,
                j,
                t_min,
                t_max,
                samples,
            })
        }
    };

    let eigen = match &raw.eigen {
        None => EigenSettings::default(),
        Some(s) => {
            let d = EigenSettings::default();
            let xi_min = s.xi_min.map(|v| positive("eigen.xi_min", v)).transpose()?.unwrap_or(d.xi_min);
            let xi_max = s.xi_max.map(|v| positive("eigen.xi_max", v)).transpose()?.unwrap_or(d.xi_max);
            if xi_min >= xi_max {
                return Err(ConfigError::invalid("eigen.xi_max", "must exceed xi_min"));
            }
            let per_decade = s.per_decade.unwrap_or(d.per_decade);
            if per_decade == 0 {
                return Err(ConfigError::invalid("eigen.per_decade", "must be at least 1"));
            }
            let range = |key: &str, r: Option<[f64; 2]>, dft: (f64, f64)| -> Result<(f64, f64), ConfigError> {
                match r {
                    None => Ok(dft),
                    Some([a, b]) => {
                        positive(key, a)?;
                        positive(key, b)?;
                        if a >= b {
                            return Err(ConfigError::invalid(key, "range must be increasing"));
                        }
                        Ok((a, b))
                    }
                }
            };
            EigenSettings {
                xi_min,
                xi_max,
                per_decade,
                low: range("eigen.low_range", s.low_range, d.low)?,
                high: range("eigen.high_range", s.high_range, d.high)?,
            }
        }
    };

    let resolvent = match &raw.resolvent {
        None => None,
        Some(s) => {
            let sector = Sector::new(s.epsilon_angle, s.lambda0)
                .map_err(|e| ConfigError::invalid("resolvent.epsilon_angle", e))?;
            for (key, v) in [
                ("resolvent.gamma0", s.gamma0),
                ("resolvent.gamma1", s.gamma1),
                ("resolvent.gamma2", s.gamma2),
            ] {
                finite(key, v)?;
            }
            if !(s.q.0.value > 1.0 && s.q.0.value.is_finite()) {
                return Err(ConfigError::invalid(
                    "resolvent.q",
                    "Lebesgue exponent must be finite and exceed 1",
                ));
            }
            let angles = s.angles.unwrap_or(16);
            let radii_per_decade = s.radii_per_decade.unwrap_or(25);
            if angles == 0 || radii_per_decade == 0 {
                return Err(ConfigError::invalid(
                    "resolvent.angles",
                    "grid counts must be at least 1",
                ));
            }
            let radius_max = s
                .radius_max
                .map(|v| positive("resolvent.radius_max", v))
                .transpose()?
                .unwrap_or(1e6);
            if radius_max < s.lambda0 {
                return Err(ConfigError::invalid("resolvent.radius_max", "must be at least lambda0"));
            }
            Some(ResolventSettings {
                q: s.q.0,
                sector,
                consts: ResolventConstants {
                    gamma0: s.gamma0,
                    gamma1: s.gamma1,
                    gamma2: s.gamma2,
                },
                grid_spec: LambdaGridSpec {
                    angles,
                    radii_per_decade,
                    radius_max,
                },
            })
        }
    };

    let out_dir = match &raw.output {
        Some(OutputSection { dir: Some(d) }) if !d.is_empty() => PathBuf::from(d),
        Some(OutputSection { dir: Some(_) }) => {
            return Err(ConfigError::invalid("output.dir", "must be nonempty"))
        }
        _ => PathBuf::from("out"),
    };

    Ok(RunConfig {
        params,
        grid,
        exponents,
        integrator,
        data,
        decay,
        eigen,
        resolvent,
        out_dir,
    })
}

/// Emit the canonical text form: fixed section order, every policy default
/// written out, shortest round-trip decimals. `emit_canonical(parse(x))` is
/// idempotent under re-parsing.
pub fn emit_canonical(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let p = &cfg.params;
    let _ = writeln!(s, "[model]");
    let _ = writeln!(s, "mu_star = {}", p.mu_star);
    let _ = writeln!(s, "nu_star = {}", p.nu_star);
    let _ = writeln!(s, "kappa_star = {}", p.kappa_star);
    let _ = writeln!(s, "rho_star = {}", p.rho_star);
    let _ = writeln!(s, "\n[model.pressure]");
    match &p.pressure {
        PressureLaw::Polytropic { a, gamma_exp } => {
            let _ = writeln!(s, "kind = \"polytropic\"");
            let _ = writeln!(s, "a = {a}");
            let _ = writeln!(s, "gamma_exp = {gamma_exp}");
        }
        PressureLaw::Polynomial { coeffs } => {
            let _ = writeln!(s, "kind = \"polynomial\"");
            let _ = writeln!(s, "coeffs = {}", float_array(coeffs));
        }
    }
    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "dim = {}", cfg.grid.dim());
    let _ = writeln!(s, "modes = {}", cfg.grid.modes());
    let _ = writeln!(s, "length = {}", cfg.grid.box_length());
    if let Some(e) = &cfg.exponents {
        let _ = writeln!(s, "\n[exponents]");
        let _ = writeln!(s, "p = \"{}\"", exponent_str(&e.p));
        let _ = writeln!(s, "q1 = \"{}\"", exponent_str(&e.q1));
        let _ = writeln!(s, "q2 = \"{}\"", exponent_str(&e.q2));
        let _ = writeln!(s, "tau = \"{}\"", exponent_str(&e.tau));
    }
    if let Some(i) = &cfg.integrator {
        let _ = writeln!(s, "\n[integrator]");
        let _ = writeln!(s, "dt = {}", i.dt);
        let _ = writeln!(s, "t_end = {}", i.t_end);
        let scheme = match i.scheme {
            Scheme::Etd1 => "etd1",
            Scheme::Etd2Rk => "etd2rk",
        };
        let _ = writeln!(s, "scheme = \"{scheme}\"");
        let g_form = match i.g_form {
            GForm::Conservative => "conservative",
            GForm::Divided => "divided",
        };
        let _ = writeln!(s, "g_form = \"{g_form}\"");
        let _ = writeln!(s, "linear_only = {}", i.linear_only);
        let _ = writeln!(s, "snapshot_stride = {}", i.snapshot_stride);
        let _ = writeln!(s, "norm_stride = {}", i.norm_stride);
    }
    if let Some(d) = &cfg.data {
        let _ = writeln!(s, "\n[data]");
        match d {
            DataConfig::Gaussian {
                sigma,
                weights,
                amplitude,
                scale_to_i,
            } => {
                let _ = writeln!(s, "kind = \"gaussian\"");
                if let Some(v) = sigma {
                    let _ = writeln!(s, "sigma = {v}");
                }
                let _ = writeln!(s, "weights = {}", float_array(weights));
                let _ = writeln!(s, "amplitude = {amplitude}");
                if let Some(v) = scale_to_i {
                    let _ = writeln!(s, "scale_to_i = {v}");
                }
            }
            DataConfig::LqProfile {
                q,
                k_cut,
                weights,
                amplitude,
                scale_to_i,
            } => {
                let _ = writeln!(s, "kind = \"lq_profile\"");
                let _ = writeln!(s, "q = \"{}\"", exponent_str(q));
                let _ = writeln!(s, "k_cut = {k_cut}");
                let _ = writeln!(s, "weights = {}", float_array(weights));
                let _ = writeln!(s, "amplitude = {amplitude}");
                if let Some(v) = scale_to_i {
                    let _ = writeln!(s, "scale_to_i = {v}");
                }
            }
            DataConfig::Random {
                k_max,
                amplitude,
                scale_to_i,
            } => {
                let _ = writeln!(s, "kind = \"random\"");
                let _ = writeln!(s, "k_max = {k_max}");
                let _ = writeln!(s, "amplitude = {amplitude}");
                if let Some(v) = scale_to_i {
                    let _ = writeln!(s, "scale_to_i = {v}");
                }
            }
        }
    }
    if let Some(d) = &cfg.decay {
        let _ = writeln!(s, "\n[decay]");
        let _ = writeln!(s, "p = \"{}\"", exponent_str(&d.p));
        let _ = writeln!(s, "q = \"{}\"", exponent_str(&d.q));
        let _ = writeln!(s, "j = {}", d.j);
        let _ = writeln!(s, "t_min = {}", d.t_min);
        if let Some(v) = d.t_max {
            let _ = writeln!(s, "t_max = {v}");
        }
        let _ = writeln!(s, "samples = {}", d.samples);
    }
    let e = &cfg.eigen;
    let _ = writeln!(s, "\n[eigen]");
    let _ = writeln!(s, "xi_min = {}", e.xi_min);
    let _ = writeln!(s, "xi_max = {}", e.xi_max);
    let _ = writeln!(s, "per_decade = {}", e.per_decade);
    let _ = writeln!(s, "low_range = [{}, {}]", e.low.0, e.low.1);
    let _ = writeln!(s, "high_range = [{}, {}]", e.high.0, e.high.1);
    if let Some(r) = &cfg.resolvent {
        let _ = writeln!(s, "\n[resolvent]");
        let _ = writeln!(s, "q = \"{}\"", exponent_str(&r.q));
        let _ = writeln!(s, "epsilon_angle = {}", r.sector.epsilon_angle);
        let _ = writeln!(s, "lambda0 = {}", r.sector.lambda0);
        let _ = writeln!(s, "gamma0 = {}", r.consts.gamma0);
        let _ = writeln!(s, "gamma1 = {}", r.consts.gamma1);
        let _ = writeln!(s, "gamma2 = {}", r.consts.gamma2);
        let _ = writeln!(s, "angles = {}", r.grid_spec.angles);
        let _ = writeln!(s, "radii_per_decade = {}", r.grid_spec.radii_per_decade);
        let _ = writeln!(s, "radius_max = {}", r.grid_spec.radius_max);
    }
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = \"{}\"", cfg.out_dir.display());
    s
}

/// `[a, b, c]` with shortest round-trip decimals. TOML needs homogeneous
/// arrays, so integral values keep an explicit `.0`.
fn float_array(vals: &[f64]) -> String {
    let items: Vec<String> = vals
        .iter()
        .map(|v| {
            let t = format!("{v}");
            if t.contains('.') || t.contains("inf") || t.contains("NaN") {
                t
            } else {
                format!("{t}.0")
            }
        })
        .collect();
    format!("[{}]", items.join(", "))
}
