use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial density profile `γ : 𝕋 → [l, r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialProfile {
    Constant {
        alpha: f64,
    },
    /// `mean + amplitude·cos(2π·mode·u)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// `high` on `[from, to)`, `low` elsewhere.
    Step {
        low: f64,
        high: f64,
        from: f64,
        to: f64,
    },
    /// Piecewise constant on `values.len()` equal cells.
    Values {
        values: Vec<f64>,
    },
    /// Whitespace-separated values read from a file; resolved by [`InitialProfile::resolve`].
    File {
        path: String,
    },
}

fn one() -> u32 {
    1
}

impl Default for InitialProfile {
    fn default() -> Self {
        InitialProfile::Cosine {
            mean: 0.5,
            amplitude: 0.3,
            mode: 1,
        }
    }
}

impl InitialProfile {
    /// Replaces a `File` variant by the values it contains.
    pub fn resolve(&self, base: Option<&Path>) -> Result<InitialProfile> {
        let InitialProfile::File { path } = self else {
            return Ok(self.clone());
        };
        let full = match base {
            Some(dir) => dir.join(path),
            None => Path::new(path).to_path_buf(),
        };
        let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
        let values = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad value {s:?} in {}", full.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::Config(format!("{} holds no values", full.display())));
        }
        Ok(InitialProfile::Values { values })
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u - u.floor();
        match self {
            InitialProfile::Constant { alpha } => *alpha,
            InitialProfile::Cosine {
                mean,
                amplitude,
                mode,
            } => mean + amplitude * (2.0 * PI * f64::from(*mode) * u).cos(),
            InitialProfile::Step {
                low,
                high,
                from,
                to,
            } => {
                if u >= *from && u < *to {
                    *high
                } else {
                    *low
                }
            }
            InitialProfile::Values { values } => {
                let k = ((u * values.len() as f64) as usize).min(values.len() - 1);
                values[k]
            }
            InitialProfile::File { .. } => f64::NAN,
        }
    }

    /// `γ(x/N)` for `x = 0..N`.
    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        if let InitialProfile::File { path } = self {
            return Err(Error::Config(format!("profile file {path} not resolved")));
        }
        Ok((0..n).map(|x| self.eval(x as f64 / n as f64)).collect())
    }

    /// Checks that `γ` maps into `[l, r]` on a fine grid.
    pub fn validate(&self, l: f64, r: f64) -> Result<()> {
        let values = self.sample(4096)?;
        if let Some((x, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= l && **v <= r))
        {
            return Err(Error::invalid(format!(
                "initial profile takes value {v} at u = {} outside [{l}, {r}]",
                x as f64 / 4096.0
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let c = InitialProfile::default();
        assert!((c.eval(0.0) - 0.8).abs() < 1e-15);
        assert!((c.eval(0.5) - 0.2).abs() < 1e-15);
        let s = InitialProfile::Step {
            low: 0.1,
            high: 0.9,
            from: 0.25,
            to: 0.5,
        };
        assert_eq!(s.sample(4).unwrap(), vec![0.1, 0.9, 0.1, 0.1]);
        let bad = InitialProfile::Constant { alpha: 1.2 };
        assert!(bad.validate(0.0, 1.0).is_err());
        assert!(c.validate(0.0, 1.0).is_ok());
    }

    #[test]
    fn toml_and_file() {
        let p: InitialProfile = toml::from_str("kind = \"cosine\"\nmean = 0.4\namplitude = 0.1").unwrap();
        assert_eq!(
            p,
            InitialProfile::Cosine {
                mean: 0.4,
                amplitude: 0.1,
                mode: 1
            }
        );
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0.1 0.2\n0.3, 0.4\n").unwrap();
        let f = InitialProfile::File { path: "g.txt".into() };
        assert!(f.sample(4).is_err());
        let r = f.resolve(Some(dir.path())).unwrap();
        assert_eq!(r.sample(4).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(r.sample(8).unwrap()[3], 0.2);
    }
}
