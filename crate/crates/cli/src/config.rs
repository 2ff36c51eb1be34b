//! Scenario configuration: a flat `key = value` text format (one key per
//! line, vectors as comma lists, `#` comments) chosen so any language can
//! parse it without a dependency. Unknown and duplicate keys are rejected;
//! validation names the offending field.

use std::fmt;
use std::path::Path;

use crate::emit::format_float;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse { line: usize, what: String },
    Validation { field: &'static str, what: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config i/o error: {e}"),
            ConfigError::Parse { line, what } => {
                write!(f, "config parse error, line {line}: {what}")
            }
            ConfigError::Validation { field, what } => {
                write!(f, "config validation error, field `{field}`: {what}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemId {
    PlanarS5,
    DisturbedS6,
    LtiCustom,
}

impl SystemId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemId::PlanarS5 => "planar_s5",
            SystemId::DisturbedS6 => "disturbed_s6",
            SystemId::LtiCustom => "lti_custom",
        }
    }

    /// `(n, l)` of the catalog entry behind this name.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            SystemId::PlanarS5 => (2, 2),
            SystemId::DisturbedS6 => (2, 1),
            SystemId::LtiCustom => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentifierChoice {
    /// Windowed symmetric double-integral identifier.
    Double,
    /// Windowed single-integral identifier.
    Single,
    /// Cumulative scalar block with excitation gate (robustness-study
    /// plant only).
    Scalar,
}

impl IdentifierChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            IdentifierChoice::Double => "double",
            IdentifierChoice::Single => "single",
            IdentifierChoice::Scalar => "scalar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComparatorChoice {
    /// The event-triggered adaptive loop itself.
    None,
    /// Known-parameter nominal feedback (no adaptation).
    Nominal,
    /// Classical continuous-tuning adaptive law with gain `gamma`.
    ExtendedMatching,
}

impl ComparatorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComparatorChoice::None => "none",
            ComparatorChoice::Nominal => "nominal",
            ComparatorChoice::ExtendedMatching => "extended_matching",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: SystemId,
    pub theta_true: Vec<f64>,
    pub theta_hat0: Vec<f64>,
    pub x0: Vec<f64>,
    /// Dwell cap `T`.
    pub t_dwell: f64,
    pub n_tilde: usize,
    /// Trigger offset scale: `a(x) = a_scale |x|^2`.
    pub a_scale: f64,
    /// Dead-zone constant (trigger threshold offset and scalar-identifier
    /// excitation gate).
    pub eps: f64,
    pub a1: f64,
    pub a2: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub identifier: IdentifierChoice,
    pub comparator: ComparatorChoice,
    /// Continuous-tuning comparator gain.
    pub gamma: f64,
    /// Relative eigenvalue truncation threshold of the min-norm update.
    pub rank_tol: f64,
    /// Norm-trigger constant of the linear catalog entry.
    pub lti_trigger_a: f64,
}

impl ScenarioConfig {
    /// Baseline with every optional key at its default; callers fill in the
    /// required fields.
    pub fn defaults(system: SystemId) -> Self {
        ScenarioConfig {
            system,
            theta_true: Vec::new(),
            theta_hat0: Vec::new(),
            x0: Vec::new(),
            t_dwell: 0.0,
            n_tilde: 0,
            a_scale: 0.05,
            eps: 0.0,
            a1: 0.0,
            a2: 0.0,
            t_end: 0.0,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            event_tol: 1e-9,
            identifier: IdentifierChoice::Double,
            comparator: ComparatorChoice::None,
            gamma: 5.0,
            rank_tol: 1e-9,
            lti_trigger_a: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn fail(field: &'static str, what: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Validation {
                field,
                what: what.into(),
            })
        }
        let (n, l) = self.system.dims();
        if self.theta_true.len() != l {
            return fail(
                "theta_true",
                format!("expected {l} entries for {}", self.system.as_str()),
            );
        }
        if self.theta_hat0.len() != l {
            return fail(
                "theta_hat0",
                format!("expected {l} entries for {}", self.system.as_str()),
            );
        }
        if self.x0.len() != n {
            return fail(
                "x0",
                format!("expected {n} entries for {}", self.system.as_str()),
            );
        }
        for (field, vs) in [
            ("theta_true", &self.theta_true),
            ("theta_hat0", &self.theta_hat0),
            ("x0", &self.x0),
        ] {
            if !vs.iter().all(|v| v.is_finite()) {
                return fail(field, "entries must be finite");
            }
        }
        if !self.t_dwell.is_finite() || self.t_dwell <= 0.0 {
            return fail("T", "must be positive");
        }
        if self.n_tilde < 1 {
            return fail("N_tilde", "must be at least 1");
        }
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return fail("t_end", "must be positive");
        }
        if !self.a_scale.is_finite() || self.a_scale <= 0.0 {
            return fail("a_scale", "must be positive");
        }
        if self.eps < 0.0 {
            return fail("eps", "must be non-negative");
        }
        if self.a1 < 0.0 || self.a2 < 0.0 {
            return fail("A1", "disturbance amplitudes must be non-negative");
        }
        for (field, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("rank_tol", self.rank_tol),
            ("lti_trigger_a", self.lti_trigger_a),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return fail(field, "must be positive");
            }
        }
        if self.event_tol > self.max_step {
            return fail("event_tol", "must not exceed max_step");
        }
        if (self.a1 != 0.0 || self.a2 != 0.0) && self.system != SystemId::DisturbedS6 {
            return fail("A1", "disturbances are wired to disturbed_s6 only");
        }
        if self.identifier == IdentifierChoice::Scalar {
            if self.system != SystemId::DisturbedS6 {
                return fail(
                    "identifier",
                    "the scalar identifier is specific to disturbed_s6",
                );
            }
            if self.t_end > self.n_tilde as f64 * self.t_dwell {
                return fail(
                    "identifier",
                    "the scalar identifier needs t_end <= N_tilde * T (window start pinned at zero)",
                );
            }
        }
        if self.comparator == ComparatorChoice::ExtendedMatching {
            if self.system != SystemId::DisturbedS6 {
                return fail("comparator", "extended_matching runs on disturbed_s6 only");
            }
            if !self.gamma.is_finite() || self.gamma <= 0.0 {
                return fail("gamma", "must be positive");
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces the config exactly.
    pub fn canonical_text(&self) -> String {
        let vec_text = |v: &[f64]| {
            v.iter()
                .map(|x| format_float(*x))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        s.push_str(&format!("system = {}\n", self.system.as_str()));
        s.push_str(&format!("theta_true = {}\n", vec_text(&self.theta_true)));
        s.push_str(&format!("theta_hat0 = {}\n", vec_text(&self.theta_hat0)));
        s.push_str(&format!("x0 = {}\n", vec_text(&self.x0)));
        s.push_str(&format!("T = {}\n", format_float(self.t_dwell)));
        s.push_str(&format!("N_tilde = {}\n", self.n_tilde));
        s.push_str(&format!("a_scale = {}\n", format_float(self.a_scale)));
        s.push_str(&format!("eps = {}\n", format_float(self.eps)));
        s.push_str(&format!("A1 = {}\n", format_float(self.a1)));
        s.push_str(&format!("A2 = {}\n", format_float(self.a2)));
        s.push_str(&format!("t_end = {}\n", format_float(self.t_end)));
        s.push_str(&format!("rel_tol = {}\n", format_float(self.rel_tol)));
        s.push_str(&format!("abs_tol = {}\n", format_float(self.abs_tol)));
        s.push_str(&format!("max_step = {}\n", format_float(self.max_step)));
        s.push_str(&format!("event_tol = {}\n", format_float(self.event_tol)));
        s.push_str(&format!("identifier = {}\n", self.identifier.as_str()));
        s.push_str(&format!("comparator = {}\n", self.comparator.as_str()));
        s.push_str(&format!("gamma = {}\n", format_float(self.gamma)));
        s.push_str(&format!("rank_tol = {}\n", format_float(self.rank_tol)));
        s.push_str(&format!(
            "lti_trigger_a = {}\n",
            format_float(self.lti_trigger_a)
        ));
        s
    }
}

fn parse_f64(line: usize, key: &str, raw: &str) -> Result<f64, ConfigError> {
    raw.trim().parse::<f64>().map_err(|e| ConfigError::Parse {
        line,
        what: format!("bad number for `{key}`: {e}"),
    })
}

fn parse_vec(line: usize, key: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',')
        .map(|part| parse_f64(line, key, part))
        .collect()
}

fn parse_usize(line: usize, key: &str, raw: &str) -> Result<usize, ConfigError> {
    raw.trim().parse::<usize>().map_err(|e| ConfigError::Parse {
        line,
        what: format!("bad integer for `{key}`: {e}"),
    })
}

/// Parses a config from text. Every unknown or duplicate key is an error;
/// missing required keys are reported by name.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::defaults(SystemId::DisturbedS6);
    let mut seen: Vec<String> = Vec::new();
    let mut required: Vec<&str> = vec![
        "system",
        "theta_true",
        "theta_hat0",
        "x0",
        "T",
        "N_tilde",
        "t_end",
    ];

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            what: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Parse {
                line,
                what: format!("duplicate key `{key}`"),
            });
        }
        seen.push(key.to_string());
        required.retain(|k| *k != key);

        match key {
            "system" => {
                cfg.system = match value {
                    "planar_s5" => SystemId::PlanarS5,
                    "disturbed_s6" => SystemId::DisturbedS6,
                    "lti_custom" => SystemId::LtiCustom,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            what: format!(
                                "unknown system `{other}` (expected planar_s5, disturbed_s6 or lti_custom)"
                            ),
                        })
                    }
                }
            }
            "theta_true" => cfg.theta_true = parse_vec(line, key, value)?,
            "theta_hat0" => cfg.theta_hat0 = parse_vec(line, key, value)?,
            "x0" => cfg.x0 = parse_vec(line, key, value)?,
            "T" => cfg.t_dwell = parse_f64(line, key, value)?,
            "N_tilde" => cfg.n_tilde = parse_usize(line, key, value)?,
            "a_scale" => cfg.a_scale = parse_f64(line, key, value)?,
            "eps" => cfg.eps = parse_f64(line, key, value)?,
            "A1" => cfg.a1 = parse_f64(line, key, value)?,
            "A2" => cfg.a2 = parse_f64(line, key, value)?,
            "t_end" => cfg.t_end = parse_f64(line, key, value)?,
            "rel_tol" => cfg.rel_tol = parse_f64(line, key, value)?,
            "abs_tol" => cfg.abs_tol = parse_f64(line, key, value)?,
            "max_step" => cfg.max_step = parse_f64(line, key, value)?,
            "event_tol" => cfg.event_tol = parse_f64(line, key, value)?,
            "identifier" => {
                cfg.identifier = match value {
                    "double" => IdentifierChoice::Double,
                    "single" => IdentifierChoice::Single,
                    "scalar" => IdentifierChoice::Scalar,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            what: format!(
                                "unknown identifier `{other}` (expected double, single or scalar)"
                            ),
                        })
                    }
                }
            }
            "comparator" => {
                cfg.comparator = match value {
                    "none" => ComparatorChoice::None,
                    "nominal" => ComparatorChoice::Nominal,
                    "extended_matching" => ComparatorChoice::ExtendedMatching,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            what: format!(
                                "unknown comparator `{other}` (expected none, nominal or extended_matching)"
                            ),
                        })
                    }
                }
            }
            "gamma" => cfg.gamma = parse_f64(line, key, value)?,
            "rank_tol" => cfg.rank_tol = parse_f64(line, key, value)?,
            "lti_trigger_a" => cfg.lti_trigger_a = parse_f64(line, key, value)?,
            other => {
                return Err(ConfigError::Parse { line, what: format!("unknown key `{other}`") })
            }
        }
    }

    if let Some(missing) = required.first() {
        return Err(ConfigError::Validation {
            field: match *missing {
                "system" => "system",
                "theta_true" => "theta_true",
                "theta_hat0" => "theta_hat0",
                "x0" => "x0",
                "T" => "T",
                "N_tilde" => "N_tilde",
                _ => "t_end",
            },
            what: "required key missing".into(),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
