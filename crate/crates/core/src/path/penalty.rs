use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    #[default]
    Lasso,
    Mcp,
    Scad,
}

impl Penalty {
    /// `None` for the lasso, which has no concavity parameter.
    pub fn default_gamma(self) -> Option<f64> {
        match self {
            Penalty::Lasso => None,
            Penalty::Mcp => Some(3.0),
            Penalty::Scad => Some(3.7),
        }
    }

    pub fn validate_gamma(self, gamma: f64) -> Result<()> {
        let ok = match self {
            Penalty::Lasso => true,
            Penalty::Mcp => gamma > 1.0,
            Penalty::Scad => gamma > 2.0,
        };
        if ok && gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("gamma {gamma} is out of range for {self}")))
        }
    }

    /// Minimizer of `0.5 (b - z)^2 + P(|b|)` for a unit-scaled coordinate.
    pub fn threshold(self, z: f64, lam: f64, gamma: f64) -> f64 {
        match self {
            Penalty::Lasso => soft_threshold(z, lam),
            Penalty::Mcp => mcp_update(z, lam, gamma),
            Penalty::Scad => scad_update(z, lam, gamma),
        }
    }

    /// Penalty value `P(|b|)`.
    pub fn value(self, b: f64, lam: f64, gamma: f64) -> f64 {
        let t = b.abs();
        match self {
            Penalty::Lasso => lam * t,
            Penalty::Mcp if t <= gamma * lam => lam * t - t * t / (2.0 * gamma),
            Penalty::Mcp => gamma * lam * lam / 2.0,
            Penalty::Scad if t <= lam => lam * t,
            Penalty::Scad if t <= gamma * lam => (2.0 * gamma * lam * t - t * t - lam * lam) / (2.0 * (gamma - 1.0)),
            Penalty::Scad => lam * lam * (gamma + 1.0) / 2.0,
        }
    }

    /// Derivative `P'(t)` for `t > 0`.
    pub fn derivative(self, t: f64, lam: f64, gamma: f64) -> f64 {
        match self {
            Penalty::Lasso => lam,
            Penalty::Mcp => (lam - t / gamma).max(0.0),
            Penalty::Scad if t <= lam => lam,
            Penalty::Scad if t <= gamma * lam => (gamma * lam - t) / (gamma - 1.0),
            Penalty::Scad => 0.0,
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::Lasso => "lasso",
            Penalty::Mcp => "MCP",
            Penalty::Scad => "SCAD",
        })
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Penalty::Lasso),
            "mcp" => Ok(Penalty::Mcp),
            "scad" => Ok(Penalty::Scad),
            _ => Err(Error::Config(format!(
                "unknown penalty {s:?} (expected lasso, MCP or SCAD)"
            ))),
        }
    }
}

pub fn soft_threshold(z: f64, lam: f64) -> f64 {
    if z > lam {
        z - lam
    } else if z < -lam {
        z + lam
    } else {
        0.0
    }
}

pub fn mcp_update(z: f64, lam: f64, gamma: f64) -> f64 {
    if z.abs() <= gamma * lam {
        soft_threshold(z, lam) / (1.0 - 1.0 / gamma)
    } else {
        z
    }
}

pub fn scad_update(z: f64, lam: f64, gamma: f64) -> f64 {
    let t = z.abs();
    if t <= 2.0 * lam {
        soft_threshold(z, lam)
    } else if t <= gamma * lam {
        soft_threshold(z, gamma * lam / (gamma - 1.0)) / (1.0 - 1.0 / (gamma - 1.0))
    } else {
        z
    }
}
