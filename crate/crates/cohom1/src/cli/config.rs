//! Flat `key = value` run configuration.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::IntegratorConfig;
use crate::phase::ModelParams;
use crate::run::{self, RunSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: u32,
    pub k: u32,
    pub epsilon: u8,
    pub theta: f64,
    pub s4: f64,
    pub s5: f64,
    pub eta0: Option<f64>,
    pub eta_max: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub event_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 1,
            k: 1,
            epsilon: 0,
            theta: 0.0,
            s4: 0.0,
            s5: 0.0,
            eta0: None,
            eta_max: None,
            rtol: None,
            atol: None,
            event_tol: None,
            constraint_tol: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 13] = [
    "m",
    "k",
    "epsilon",
    "theta",
    "s4",
    "s5",
    "eta0",
    "eta_max",
    "rtol",
    "atol",
    "event_tol",
    "constraint_tol",
    "output_dir",
];

/// Parses an angle in radians: a number, `pi`, `pi/q`, `p*pi` or `p*pi/q`.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), Some(b.trim().parse::<f64>().ok()?)),
        None => (s, None),
    };
    let coef = if num == "pi" {
        1.0
    } else {
        let c = num.strip_suffix("pi")?.trim().trim_end_matches('*').trim();
        c.parse::<f64>().ok()?
    };
    let v = coef * PI / den.unwrap_or(1.0);
    v.is_finite().then_some(v)
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number, got `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value must be finite, got `{s}`"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("value must be positive, got `{s}`"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError::Line { line, msg };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let int = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
        };
        match key {
            "m" => self.m = int(value)?,
            "k" => self.k = int(value)?,
            "epsilon" => {
                self.epsilon = match value {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(format!("epsilon must be 0 or 1, got `{value}`")),
                }
            }
            "theta" => {
                self.theta =
                    parse_angle(value).ok_or_else(|| format!("cannot read angle `{value}`"))?
            }
            "s4" => self.s4 = finite(value)?,
            "s5" => self.s5 = finite(value)?,
            "eta0" => self.eta0 = Some(finite(value)?),
            "eta_max" => self.eta_max = Some(finite(value)?),
            "rtol" => self.rtol = Some(positive(value)?),
            "atol" => self.atol = Some(positive(value)?),
            "event_tol" => self.event_tol = Some(positive(value)?),
            "constraint_tol" => self.constraint_tol = Some(positive(value)?),
            "output_dir" => {
                if value.is_empty() {
                    return Err("output_dir is empty".into());
                }
                self.output_dir = PathBuf::from(value)
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(0.0..=PI).contains(&self.theta) {
            return bad(format!("theta must lie in [0, pi], got {}", self.theta));
        }
        if self.s4 < 0.0 || self.s5 < 0.0 {
            return bad("s4 and s5 must be nonnegative".into());
        }
        if let (Some(e0), Some(em)) = (self.eta0, self.eta_max) {
            if em <= e0 {
                return bad(format!("eta_max = {em} must exceed eta0 = {e0}"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelParams, ConfigError> {
        ModelParams::new(self.m, self.k, self.epsilon)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, ConfigError> {
        let mp = self.model()?;
        let mut c = run::default_config(&mp, self.s4, self.s5);
        if let Some(v) = self.eta_max {
            c.eta_max = v;
        }
        if let Some(v) = self.rtol {
            c.rtol = v;
        }
        if let Some(v) = self.atol {
            c.atol = v;
        }
        if let Some(v) = self.event_tol {
            c.event_tol = v;
        }
        if let Some(v) = self.constraint_tol {
            c.constraint_tol = v;
        }
        Ok(c)
    }

    pub fn run_spec(&self) -> Result<RunSpec, ConfigError> {
        self.validate()?;
        let mp = self.model()?;
        let mut spec = RunSpec::new(mp, self.theta, self.s4, self.s5);
        spec.cfg = self.integrator()?;
        spec.eta0 = self.eta0;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi"), Some(PI));
        assert_eq!(parse_angle("pi/2"), Some(PI / 2.0));
        assert_eq!(parse_angle("0.5"), Some(0.5));
        assert_eq!(parse_angle("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_angle("tau"), None);
    }

    #[test]
    fn parse_full() {
        let c = RunConfig::parse(
            "# comment\nm = 1\nk = 3\nepsilon = 1   # expanding\ntheta = pi/2\ns4 = 0.5\ns5 = 1\noutput_dir = runs/a\n",
        )
        .unwrap();
        assert_eq!((c.m, c.k, c.epsilon), (1, 3, 1));
        assert_eq!(c.theta, PI / 2.0);
        assert_eq!(c.output_dir, PathBuf::from("runs/a"));
    }

    #[test]
    fn unknown_key_has_line() {
        let e = RunConfig::parse("m = 1\n\nfoo = 2\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::Line {
                line: 3,
                msg: "unknown key `foo`".into()
            }
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            RunConfig::parse("s4 = inf\n"),
            Err(ConfigError::Line { line: 1, .. })
        ));
        assert!(RunConfig::parse("rtol = nan\n").is_err());
    }
}
