//! The conductance function `W`.
//!
//! `W` is strictly increasing, right continuous with left limits, and periodic
//! in the sense `W(u + 1) - W(u) = W(1) - W(0)`. We represent it on the torus
//! as a positive linear drift plus finitely many atoms, normalized so that
//! `W(0) = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Default drift used by [`WSpec::sample_jump`] to keep `W` strictly increasing
/// between atoms.
pub const DEFAULT_DRIFT_FLOOR: f64 = 1e-3;

/// Offset applied to an atom that sits exactly on a grid point `x/N`, in units of `1/N`.
pub const GRID_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// A strictly increasing càdlàg periodic function: `drift · u` plus jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct WSpec {
    drift: f64,
    atoms: Vec<Atom>,
    total: f64,
    offset: f64,
}

impl WSpec {
    pub fn new(drift: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !(drift.is_finite() && drift > 0.0) {
            return Err(Error::InvalidW(format!(
                "drift must be > 0 so that W is strictly increasing, got {drift}"
            )));
        }
        for (k, atom) in atoms.iter().enumerate() {
            if !(0.0..1.0).contains(&atom.location) {
                return Err(Error::InvalidW(format!(
                    "atom {k} location {} outside [0, 1)",
                    atom.location
                )));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::InvalidW(format!(
                    "atom {k} weight must be > 0, got {}",
                    atom.weight
                )));
            }
            if k > 0 && atoms[k - 1].location >= atom.location {
                return Err(Error::InvalidW(format!(
                    "atom locations must be strictly increasing (atom {} at {} then atom {k} at {})",
                    k - 1,
                    atoms[k - 1].location,
                    atom.location
                )));
            }
        }
        let total = drift + atoms.iter().map(|a| a.weight).sum::<f64>();
        // An atom at the origin would otherwise make W(0) = weight.
        let offset = atoms
            .iter()
            .filter(|a| a.location == 0.0)
            .map(|a| a.weight)
            .sum();
        Ok(WSpec {
            drift,
            atoms,
            total,
            offset,
        })
    }

    /// `W(u) = u`.
    pub fn identity() -> Self {
        WSpec::new(1.0, Vec::new()).expect("identity W is valid")
    }

    pub fn with_atoms(drift: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        WSpec::new(
            drift,
            atoms
                .iter()
                .map(|&(location, weight)| Atom { location, weight })
                .collect(),
        )
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `W(1) - W(0)`.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// `W(u)` for any real `u`, using the periodic extension.
    pub fn eval(&self, u: f64) -> f64 {
        let periods = u.floor();
        let frac = u - periods;
        let jumps: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= frac)
            .map(|a| a.weight)
            .sum();
        self.drift * frac + jumps + periods * self.total - self.offset
    }

    /// Left limit `W(u-)`.
    pub fn eval_left(&self, u: f64) -> f64 {
        let frac = u - u.floor();
        let here: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location == frac)
            .map(|a| a.weight)
            .sum();
        self.eval(u) - here
    }

    /// `W(b) - W(a)`, the `W`-measure of the half-open interval `(a, b]`.
    pub fn increment(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(Error::invalid(format!(
                "increment needs a < b, got ({a}, {b}]"
            )));
        }
        Ok(self.eval(b) - self.eval(a))
    }

    /// Finite-atom stand-in for a jump subordinator: `n_atoms` uniform
    /// locations carrying iid Pareto(`alpha`) weights with scale `min_weight`,
    /// normalized to sum to one, on top of `drift`.
    pub fn sample_jump(
        alpha: f64,
        n_atoms: usize,
        min_weight: f64,
        drift: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if n_atoms == 0 {
            return Err(Error::invalid("n_atoms must be >= 1"));
        }
        if !(min_weight.is_finite() && min_weight > 0.0) {
            return Err(Error::invalid(format!("min_weight must be > 0, got {min_weight}")));
        }
        let mut rng = rng::stream(seed, 0, Purpose::WSample);
        let mut atoms: Vec<Atom> = Vec::with_capacity(n_atoms);
        while atoms.len() < n_atoms {
            let location: f64 = rng.random();
            let u: f64 = 1.0 - rng.random::<f64>();
            let weight = min_weight * u.powf(-1.0 / alpha);
            if weight.is_finite() && atoms.iter().all(|a| a.location != location) {
                atoms.push(Atom { location, weight });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        for atom in &mut atoms {
            atom.weight /= sum;
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        WSpec::new(drift, atoms)
    }

    /// Moves atoms that fall exactly on a grid point `x/n` by `GRID_JITTER / n`
    /// to the right, so that they sit strictly inside bond `(x, x+1)`.
    /// Returns the adjusted spec and the indices of the atoms that moved.
    pub fn off_grid(&self, n: usize) -> (WSpec, Vec<usize>) {
        let nf = n as f64;
        let mut atoms = self.atoms.clone();
        let mut moved = Vec::new();
        for (k, atom) in atoms.iter_mut().enumerate() {
            let x = (atom.location * nf).round();
            if x / nf == atom.location {
                let shifted = atom.location + GRID_JITTER / nf;
                if shifted < 1.0 {
                    log::info!(
                        "atom {k} at grid point {}/{n}; shifted to {shifted:e}",
                        x as u64
                    );
                    atom.location = shifted;
                    moved.push(k);
                }
            }
        }
        if moved.is_empty() {
            return (self.clone(), moved);
        }
        match WSpec::new(self.drift, atoms) {
            Ok(w) => (w, moved),
            // Shifting would collide with a neighbouring atom; keep the original.
            Err(_) => (self.clone(), Vec::new()),
        }
    }
}

/// Plain-text form of a `W` specification, either explicit or sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WConfig {
    Sampled {
        alpha: f64,
        n_atoms: usize,
        seed: u64,
        #[serde(default = "default_min_weight")]
        min_weight: f64,
        #[serde(default = "default_drift_floor")]
        drift: f64,
    },
    Explicit {
        drift: f64,
        #[serde(default)]
        atoms: Vec<[f64; 2]>,
    },
}

fn default_min_weight() -> f64 {
    1e-3
}

fn default_drift_floor() -> f64 {
    DEFAULT_DRIFT_FLOOR
}

impl Default for WConfig {
    fn default() -> Self {
        WConfig::Explicit {
            drift: 1.0,
            atoms: vec![[0.5, 1.0]],
        }
    }
}

impl WConfig {
    pub fn build(&self) -> Result<WSpec> {
        match self {
            WConfig::Explicit { drift, atoms } => WSpec::new(
                *drift,
                atoms
                    .iter()
                    .map(|&[location, weight]| Atom { location, weight })
                    .collect(),
            ),
            WConfig::Sampled {
                alpha,
                n_atoms,
                seed,
                min_weight,
                drift,
            } => WSpec::sample_jump(*alpha, *n_atoms, *min_weight, *drift, *seed),
        }
    }
}

impl From<&WSpec> for WConfig {
    fn from(w: &WSpec) -> Self {
        WConfig::Explicit {
            drift: w.drift,
            atoms: w.atoms.iter().map(|a| [a.location, a.weight]).collect(),
        }
    }
}
