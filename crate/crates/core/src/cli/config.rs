//! Run configuration files.
//!
//! TOML, or JSON when the path ends in `.json`. Every section and key is
//! optional; command-line flags override whatever the file sets.
//!
//! ```toml
//! [system]
//! alpha = 1.0
//! beta = 8.0
//! sigma1_sq = 0.05
//! sigma2_sq = 1.0
//!
//! [request]
//! d1 = "max"          # number, "min", "max" or "frac:t" with t in [0, 1]
//! d2 = "frac:0.5"
//!
//! [sim]
//! n = 100000
//! seed = 1
//! directions = "both" # both | one_to_two | two_to_one | none
//!
//! [sweep]
//! target = "d2"       # d1 | d2
//! points = 101
//! range = [0.0, 1.0]  # fractions of [D_min, D_max]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::sim::Directions;

/// A distortion target, possibly relative to the feasible interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionSpec {
    Value(f64),
    Min,
    Max,
    /// `D_min + t·(D_max − D_min)`
    Frac(f64),
}

impl DistortionSpec {
    pub fn resolve(self, d_min: f64, d_max: f64) -> f64 {
        match self {
            DistortionSpec::Value(d) => d,
            DistortionSpec::Min => d_min,
            DistortionSpec::Max => d_max,
            DistortionSpec::Frac(1.0) => d_max,
            DistortionSpec::Frac(t) => d_min + t * (d_max - d_min),
        }
    }
}

impl FromStr for DistortionSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s {
            "min" => return Ok(DistortionSpec::Min),
            "max" => return Ok(DistortionSpec::Max),
            _ => {}
        }
        if let Some(t) = s.strip_prefix("frac:") {
            let t: f64 = t
                .parse()
                .map_err(|_| format!("invalid fraction in {s:?}"))?;
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("fraction in {s:?} must lie in [0, 1]"));
            }
            return Ok(DistortionSpec::Frac(t));
        }
        let d: f64 = s
            .parse()
            .map_err(|_| format!("expected a number, \"min\", \"max\" or \"frac:t\", got {s:?}"))?;
        if !d.is_finite() {
            return Err(format!("distortion must be finite, got {s:?}"));
        }
        Ok(DistortionSpec::Value(d))
    }
}

impl fmt::Display for DistortionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistortionSpec::Value(d) => write!(f, "{d}"),
            DistortionSpec::Min => f.write_str("min"),
            DistortionSpec::Max => f.write_str("max"),
            DistortionSpec::Frac(t) => write!(f, "frac:{t}"),
        }
    }
}

impl<'de> Deserialize<'de> for DistortionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) if x.is_finite() => Ok(DistortionSpec::Value(x)),
            Repr::Num(x) => Err(de::Error::custom(format!("distortion must be finite, got {x}"))),
            Repr::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepTarget {
    D1,
    #[default]
    D2,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub sigma2_sq: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSection {
    pub d1: Option<DistortionSpec>,
    pub d2: Option<DistortionSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub directions: Option<Directions>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub target: Option<SweepTarget>,
    pub points: Option<usize>,
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub request: RequestSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl RunConfigFile {
    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| e.to_string())?
        } else {
            toml::from_str(text).map_err(|e| e.to_string())?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        Self::parse(&text, json).map_err(|e| format!("config {}: {e}", path.display()))
    }

    fn validate(&self) -> Result<(), String> {
        let s = &self.system;
        for (name, v) in [
            ("system.alpha", s.alpha),
            ("system.beta", s.beta),
            ("system.sigma1_sq", s.sigma1_sq),
            ("system.sigma2_sq", s.sigma2_sq),
        ] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(format!("{name} must be finite"));
            }
        }
        if let Some(p) = self.sweep.points {
            if p < 2 {
                return Err(format!("sweep.points must be at least 2, got {p}"));
            }
        }
        if let Some(r) = self.sweep.range {
            check_range(r)?;
        }
        Ok(())
    }
}

pub fn check_range([lo, hi]: [f64; 2]) -> Result<(), String> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(format!("sweep range [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"));
    }
    Ok(())
}
