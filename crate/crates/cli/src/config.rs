//! Flat sectioned `key = value` configuration.
//!
//! Sections: `[damping]`, `[problem]`, `[grid]`, `[controls]`, `[output]`. Every key
//! except the six physical parameters has a default; [`emit`] writes every effective
//! value so that a manifest re-parses to the same configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use critwave_core::energy::{default_delta0, MConvention};
use critwave_core::problem::{critical_exponent, DampingSpec, Profile, ProfileShape, ProblemSpec};
use critwave_core::solver::{Controls, RadialGrid, DEFAULT_BLOWUP_THRESHOLD, DEFAULT_CFL, MAX_CFL};
use thiserror::Error;
use toml::{Table, Value};

/// Fallback `delta0` when `p <= p_c` and no value is given.
pub const FALLBACK_DELTA0: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: expected {expected}")]
    TypeMismatch { key: String, expected: &'static str },
    #[error("`{key}`: {reason}")]
    ConstraintViolation { key: String, reason: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Syntax(_) => "syntax",
            ConfigError::UnknownKey(_) => "unknown_key",
            ConfigError::TypeMismatch { .. } => "type_mismatch",
            ConfigError::ConstraintViolation { .. } => "constraint_violation",
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax(_) => None,
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::TypeMismatch { key, .. } | ConfigError::ConstraintViolation { key, .. } => Some(key),
        }
    }

    pub fn violation(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::ConstraintViolation {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a0: f64,
    pub alpha: f64,
    pub beta: f64,

    pub dim: usize,
    pub p: f64,
    pub epsilon: f64,
    pub u0: Profile,
    pub u1: Profile,
    pub r0: f64,

    pub dr: f64,
    pub cfl: f64,

    pub t_max: f64,
    pub blowup_threshold: f64,
    pub record_every: usize,
    pub delta0: f64,
    pub m_convention: MConvention,
    pub eps_max: f64,
    pub eps_factor: f64,
    pub eps_count: usize,
    pub seed: u64,
    pub corpus_size: usize,
    pub probe_every: usize,

    pub output_dir: Option<PathBuf>,
}

const SECTIONS: [&str; 5] = ["damping", "problem", "grid", "controls", "output"];

struct Reader {
    section: &'static str,
    table: Table,
}

impl Reader {
    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.section, key)
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(x)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(_) => Err(ConfigError::TypeMismatch {
                key: self.path(key),
                expected: "a number",
            }),
        }
    }

    fn required_float(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.float(key)?
            .ok_or_else(|| ConfigError::violation(&self.path(key), "required key is missing"))
    }

    fn integer(&mut self, key: &str) -> Result<Option<i64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(i)),
            Some(_) => Err(ConfigError::TypeMismatch {
                key: self.path(key),
                expected: "an integer",
            }),
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        match self.integer(key)? {
            None => Ok(default),
            Some(i) if i >= min as i64 => Ok(i as usize),
            Some(i) => Err(ConfigError::violation(&self.path(key), format!("must be at least {min}, got {i}"))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(ConfigError::TypeMismatch {
                key: self.path(key),
                expected: "a string",
            }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.table.keys().next() {
            Some(k) => Err(ConfigError::UnknownKey(self.path(k))),
            None => Ok(()),
        }
    }
}

fn section(root: &mut Table, name: &'static str) -> Result<Reader, ConfigError> {
    let table = match root.remove(name) {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => {
            return Err(ConfigError::TypeMismatch {
                key: name.to_string(),
                expected: "a section",
            })
        }
    };
    Ok(Reader { section: name, table })
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::violation(key, format!("must be positive and finite, got {x}")))
    }
}

fn profile(r: &mut Reader, prefix: &str, default_shape: ProfileShape, default_amp: f64) -> Result<Profile, ConfigError> {
    let shape_key = format!("{prefix}_shape");
    let shape = match r.string(&shape_key)? {
        None => default_shape,
        Some(s) => ProfileShape::parse(&s).ok_or_else(|| {
            ConfigError::violation(
                &r.path(&shape_key),
                format!("unknown profile `{s}` (zero, bump, raised_cosine, quintic_plateau)"),
            )
        })?,
    };
    let amp_key = format!("{prefix}_amplitude");
    let amplitude = r.float(&amp_key)?.unwrap_or(default_amp);
    if !amplitude.is_finite() {
        return Err(ConfigError::violation(&r.path(&amp_key), "must be finite"));
    }
    let rad_key = format!("{prefix}_radius");
    let radius = positive(&r.path(&rad_key), r.float(&rad_key)?.unwrap_or(1.0))?;
    Ok(Profile::new(shape, amplitude, radius))
}

/// Map a core parameter name to its key path.
fn key_of(name: &str) -> String {
    let section = match name {
        "a0" | "alpha" | "beta" => "damping",
        "dim" | "p" | "epsilon" | "r0" | "u0_radius" | "u1_radius" => "problem",
        "dr" | "cfl" => "grid",
        _ => "controls",
    };
    format!("{section}.{name}")
}

pub(crate) fn core_violation(e: critwave_core::Error) -> ConfigError {
    match e {
        critwave_core::Error::InvalidParameter { name, reason } => ConfigError::violation(&key_of(name), reason),
        other => ConfigError::violation("config", other.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()));
    }

    let mut d = section(&mut root, "damping")?;
    let a0 = d.required_float("a0")?;
    let alpha = d.required_float("alpha")?;
    let beta = d.required_float("beta")?;
    d.finish()?;
    let spec = DampingSpec::new(a0, alpha, beta).map_err(core_violation)?;

    let mut pr = section(&mut root, "problem")?;
    let dim = match pr.integer("dim")? {
        None => return Err(ConfigError::violation("problem.dim", "required key is missing")),
        Some(n) if (1..=16).contains(&n) => n as usize,
        Some(n) => return Err(ConfigError::violation("problem.dim", format!("must lie in 1..=16, got {n}"))),
    };
    let p = pr.required_float("p")?;
    let epsilon = pr.required_float("epsilon")?;
    let u0 = profile(&mut pr, "u0", ProfileShape::Bump, 1.0)?;
    let u1 = profile(&mut pr, "u1", ProfileShape::Zero, 0.0)?;
    let support = [u0, u1]
        .iter()
        .filter(|q| !q.is_zero())
        .map(|q| q.radius)
        .fold(0.0, f64::max);
    let r0 = match pr.float("r0")? {
        Some(x) => positive("problem.r0", x)?,
        None if support > 0.0 => support,
        None => 1.0,
    };
    pr.finish()?;
    let prob = ProblemSpec::new(dim, p, epsilon, u0, u1, r0).map_err(core_violation)?;
    critical_exponent(dim, spec.alpha).map_err(core_violation)?;

    let mut g = section(&mut root, "grid")?;
    let dr = positive("grid.dr", g.float("dr")?.unwrap_or(1.0 / 128.0))?;
    let cfl = positive("grid.cfl", g.float("cfl")?.unwrap_or(DEFAULT_CFL))?;
    if cfl > MAX_CFL {
        return Err(ConfigError::violation("grid.cfl", format!("must not exceed {MAX_CFL}, got {cfl}")));
    }
    g.finish()?;

    let mut c = section(&mut root, "controls")?;
    let t_max = positive("controls.t_max", c.float("t_max")?.unwrap_or(200.0))?;
    let blowup_threshold = positive(
        "controls.blowup_threshold",
        c.float("blowup_threshold")?.unwrap_or(DEFAULT_BLOWUP_THRESHOLD),
    )?;
    let record_every = c.count("record_every", 64, 1)?;
    let delta0 = match c.float("delta0")? {
        Some(x) => positive("controls.delta0", x)?,
        None => default_delta0(dim, spec.alpha, p).unwrap_or(FALLBACK_DELTA0),
    };
    let m_convention = match c.string("m_convention")?.as_deref() {
        None | Some("printed") => MConvention::Printed,
        Some("consistent") => MConvention::Consistent,
        Some(other) => {
            return Err(ConfigError::violation(
                "controls.m_convention",
                format!("expected `printed` or `consistent`, got `{other}`"),
            ))
        }
    };
    let eps_max = positive("controls.eps_max", c.float("eps_max")?.unwrap_or(0.2))?;
    let eps_factor = c.float("eps_factor")?.unwrap_or(0.5);
    if !(eps_factor > 0.0 && eps_factor < 1.0) {
        return Err(ConfigError::violation("controls.eps_factor", format!("must lie in (0, 1), got {eps_factor}")));
    }
    let eps_count = c.count("eps_count", 6, 2)?;
    let seed = match c.integer("seed")? {
        None => 2024,
        Some(s) if s >= 0 => s as u64,
        Some(s) => return Err(ConfigError::violation("controls.seed", format!("must be non-negative, got {s}"))),
    };
    let corpus_size = c.count("corpus_size", 100, 1)?;
    let probe_every = c.count("probe_every", 2, 1)?;
    c.finish()?;

    let mut o = section(&mut root, "output")?;
    let output_dir = o.string("output_dir")?.map(PathBuf::from);
    o.finish()?;

    Ok(RunConfig {
        a0: spec.a0,
        alpha: spec.alpha,
        beta: spec.beta,
        dim,
        p: prob.p,
        epsilon: prob.epsilon,
        u0,
        u1,
        r0,
        dr,
        cfl,
        t_max,
        blowup_threshold,
        record_every,
        delta0,
        m_convention,
        eps_max,
        eps_factor,
        eps_count,
        seed,
        corpus_size,
        probe_every,
        output_dir,
    })
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn quoted(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Canonical text of every effective value.
pub fn emit(c: &RunConfig) -> String {
    let mut s = String::new();
    let f = fmt_f64;
    let _ = writeln!(s, "[damping]");
    let _ = writeln!(s, "a0 = {}", f(c.a0));
    let _ = writeln!(s, "alpha = {}", f(c.alpha));
    let _ = writeln!(s, "beta = {}", f(c.beta));
    let _ = writeln!(s, "\n[problem]");
    let _ = writeln!(s, "dim = {}", c.dim);
    let _ = writeln!(s, "p = {}", f(c.p));
    let _ = writeln!(s, "epsilon = {}", f(c.epsilon));
    for (name, q) in [("u0", &c.u0), ("u1", &c.u1)] {
        let _ = writeln!(s, "{name}_shape = {}", quoted(q.shape.name()));
        let _ = writeln!(s, "{name}_amplitude = {}", f(q.amplitude));
        let _ = writeln!(s, "{name}_radius = {}", f(q.radius));
    }
    let _ = writeln!(s, "r0 = {}", f(c.r0));
    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "dr = {}", f(c.dr));
    let _ = writeln!(s, "cfl = {}", f(c.cfl));
    let _ = writeln!(s, "\n[controls]");
    let _ = writeln!(s, "t_max = {}", f(c.t_max));
    let _ = writeln!(s, "blowup_threshold = {}", f(c.blowup_threshold));
    let _ = writeln!(s, "record_every = {}", c.record_every);
    let _ = writeln!(s, "delta0 = {}", f(c.delta0));
    let _ = writeln!(s, "m_convention = {}", quoted(c.m_convention.name()));
    let _ = writeln!(s, "eps_max = {}", f(c.eps_max));
    let _ = writeln!(s, "eps_factor = {}", f(c.eps_factor));
    let _ = writeln!(s, "eps_count = {}", c.eps_count);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "corpus_size = {}", c.corpus_size);
    let _ = writeln!(s, "probe_every = {}", c.probe_every);
    let _ = writeln!(s, "\n[output]");
    if let Some(dir) = &c.output_dir {
        let _ = writeln!(s, "output_dir = {}", quoted(&dir.to_string_lossy()));
    }
    s
}

impl RunConfig {
    pub fn damping(&self) -> DampingSpec {
        DampingSpec::new(self.a0, self.alpha, self.beta).expect("validated at parse time")
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec::new(self.dim, self.p, self.epsilon, self.u0, self.u1, self.r0).expect("validated at parse time")
    }

    pub fn controls(&self) -> Controls {
        Controls {
            t_max: self.t_max,
            blowup_threshold: self.blowup_threshold,
            record_every: self.record_every,
            cfl: self.cfl,
        }
    }

    pub fn grid(&self) -> Result<RadialGrid, ConfigError> {
        RadialGrid::covering(self.dim, self.dr, self.r0, self.t_max).map_err(core_violation)
    }

    /// `eps_max * eps_factor^j`, `j = 0..eps_count`.
    pub fn eps_list(&self) -> Vec<f64> {
        (0..self.eps_count)
            .map(|j| self.eps_max * self.eps_factor.powi(j as i32))
            .collect()
    }

    /// Preconditions for blow-up experiments: `alpha < 0`, `beta` in {0, 1}, `p <= p_c`.
    pub fn check_blowup_regime(&self) -> Result<(), ConfigError> {
        if !(self.alpha < 0.0) {
            return Err(ConfigError::violation(
                "damping.alpha",
                format!("blow-up experiments require alpha < 0, got {}", self.alpha),
            ));
        }
        if self.beta != 0.0 && self.beta != 1.0 {
            return Err(ConfigError::violation(
                "damping.beta",
                format!("blow-up experiments require beta = 0 or 1, got {}", self.beta),
            ));
        }
        let p_c = critical_exponent(self.dim, self.alpha).map_err(core_violation)?;
        if self.p > p_c && !critwave_core::problem::is_critical(self.p, p_c) {
            return Err(ConfigError::violation(
                "problem.p",
                format!("blow-up experiments require p <= p_c = {p_c}, got {}", self.p),
            ));
        }
        Ok(())
    }
}
