//! Exclusion process with conductances.
//!
//! At rate `ξ_x c_{x,x+1}(η)` the occupations of sites `x` and `x+1` are
//! exchanged, where `c_{x,x+1}(η) = 1 + a (η(x-1) + η(x+2))`. Time is speeded
//! up by `N²`. The Bernoulli product measures are reversible for every `a`.

mod exact;
mod process;
mod rate_tree;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::lattice::Conductances;
use crate::rng::{self, Purpose};
use crate::wfun::WSpec;

pub use exact::{
    bernoulli_measure, dirichlet_form_particles, dirichlet_form_via_generator, ConfigGenerator,
    MAX_EXACT_SITES,
};
pub use process::{Event, ExclusionProcess, REBUILD_INTERVAL};
pub use rate_tree::RateIndex;

/// Occupation variables `η ∈ {0,1}^N` with a cached particle count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    occupancy: Vec<u8>,
    particles: usize,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration {
            occupancy: vec![0; n],
            particles: 0,
        }
    }

    pub fn full(n: usize) -> Self {
        Configuration {
            occupancy: vec![1; n],
            particles: n,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let occupancy: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
        let particles = bits.iter().filter(|&&b| b).count();
        Configuration {
            occupancy,
            particles,
        }
    }

    /// Sites `0..n` read from the low bits of `index`.
    pub fn from_index(index: usize, n: usize) -> Self {
        let bits: Vec<bool> = (0..n).map(|x| index >> x & 1 == 1).collect();
        Configuration::from_bits(&bits)
    }

    pub fn index(&self) -> usize {
        self.occupancy
            .iter()
            .enumerate()
            .map(|(x, &v)| (v as usize) << x)
            .sum()
    }

    pub fn n(&self) -> usize {
        self.occupancy.len()
    }

    pub fn particle_count(&self) -> usize {
        self.particles
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    /// `η(x)` with `x` taken mod `N`.
    #[inline]
    pub fn get(&self, x: isize) -> u8 {
        let n = self.occupancy.len() as isize;
        self.occupancy[x.rem_euclid(n) as usize]
    }

    pub fn is_occupied(&self, x: usize) -> bool {
        self.occupancy[x] == 1
    }

    /// Exchanges `η(x)` and `η(x+1)`: the map `σ^{x,x+1}`.
    #[inline]
    pub fn exchange(&mut self, x: usize) {
        let y = if x + 1 == self.occupancy.len() { 0 } else { x + 1 };
        self.occupancy.swap(x, y);
    }

    /// `(1/N) Σ_x H(x/N) η(x)`, the pairing with the empirical measure.
    pub fn empirical_pair(&self, h: &[f64]) -> Result<f64> {
        check_len(self.n(), h.len())?;
        let sum: f64 = self
            .occupancy
            .iter()
            .zip(h)
            .filter(|(&o, _)| o == 1)
            .map(|(_, v)| v)
            .sum();
        Ok(sum / self.n() as f64)
    }

    /// `η^ℓ(x) = (1/ℓ) Σ_{y=x}^{x+ℓ-1} η(y)`.
    pub fn coarse_density(&self, x: usize, box_len: usize) -> Result<f64> {
        let n = self.n();
        if box_len == 0 || box_len > n {
            return Err(Error::invalid(format!(
                "box length must lie in 1..={n}, got {box_len}"
            )));
        }
        let count: usize = (0..box_len)
            .map(|k| self.occupancy[(x + k) % n] as usize)
            .sum();
        Ok(count as f64 / box_len as f64)
    }
}

/// Parameters of the speeded-up process.
#[derive(Debug, Clone)]
pub struct ProcessParams {
    a: f64,
    n: usize,
    seed: u64,
    wspec: WSpec,
    cond: Conductances,
}

impl ProcessParams {
    pub fn new(a: f64, wspec: WSpec, n: usize, seed: u64) -> Result<Self> {
        let cond = Conductances::build(&wspec, n)?;
        ProcessParams::with_conductances(a, wspec, cond, seed)
    }

    pub fn with_conductances(a: f64, wspec: WSpec, cond: Conductances, seed: u64) -> Result<Self> {
        validate_asymmetry(a)?;
        Ok(ProcessParams {
            a,
            n: cond.n(),
            seed,
            wspec,
            cond,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn wspec(&self) -> &WSpec {
        &self.wspec
    }

    pub fn conductances(&self) -> &Conductances {
        &self.cond
    }

    /// Diffusive time scale `N²`.
    pub fn time_scale(&self) -> f64 {
        (self.n * self.n) as f64
    }

    /// Lower bound `1 - 2a⁻` on every `c_{x,x+1}`.
    pub fn min_speed_factor(&self) -> f64 {
        1.0 - 2.0 * (-self.a).max(0.0)
    }

    /// `c_{x,x+1}(η) = 1 + a (η(x-1) + η(x+2))`.
    #[inline]
    pub fn speed_factor(&self, eta: &Configuration, x: usize) -> f64 {
        let x = x as isize;
        1.0 + self.a * f64::from(eta.get(x - 1) + eta.get(x + 2))
    }

    /// `ξ_x c_{x,x+1}(η)`, the unscaled exchange rate across bond `x`.
    pub fn exchange_rate(&self, eta: &Configuration, x: usize) -> f64 {
        self.cond.xi()[x] * self.speed_factor(eta, x)
    }
}

pub fn validate_asymmetry(a: f64) -> Result<()> {
    if !(a.is_finite() && a > -0.5) {
        return Err(Error::invalid(format!(
            "rate asymmetry a must satisfy a > -1/2 so that all exchange rates stay positive, got {a}"
        )));
    }
    Ok(())
}

/// Product measure with marginals `ρ₀(x/N)`, drawn from stream `(seed, replica)`.
pub fn sample_initial(
    profile: impl Fn(f64) -> f64,
    n: usize,
    seed: u64,
    replica: u64,
) -> Result<Configuration> {
    let mut rng = rng::stream(seed, replica, Purpose::Initial);
    let mut bits = Vec::with_capacity(n);
    for x in 0..n {
        let p = profile(x as f64 / n as f64);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "initial profile must take values in [0, 1], got {p} at x = {x}"
            )));
        }
        bits.push(rng.random::<f64>() < p);
    }
    Ok(Configuration::from_bits(&bits))
}
