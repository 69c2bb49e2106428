use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Configuration, ProcessParams, RateIndex};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Number of events between full rebuilds of the rate tree.
pub const REBUILD_INTERVAL: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub bond: usize,
}

/// Exact continuous-time simulation of the speeded-up exclusion process.
///
/// Waiting times are exponential at the total rate, the bond is chosen in
/// proportion to its rate from a [`RateIndex`], and after each exchange only
/// bonds `x-2..=x+2` are refreshed. Bonds with `η(x) = η(x+1)` carry rate zero.
#[derive(Debug, Clone)]
pub struct ExclusionProcess {
    a: f64,
    bond_scale: Vec<f64>,
    eta: Configuration,
    rates: RateIndex,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
}

impl ExclusionProcess {
    /// Starts from `eta` at time zero; the dynamics stream is `(params.seed, replica)`.
    pub fn new(params: &ProcessParams, eta: Configuration, replica: u64) -> Result<Self> {
        if eta.n() != params.n() {
            return Err(Error::LengthMismatch {
                expected: params.n(),
                got: eta.n(),
            });
        }
        let scale = params.time_scale();
        let bond_scale: Vec<f64> = params.conductances().xi().iter().map(|v| scale * v).collect();
        let mut process = ExclusionProcess {
            a: params.a(),
            bond_scale,
            eta,
            rates: RateIndex::new(&[]),
            time: 0.0,
            events: 0,
            rng: rng::stream(params.seed(), replica, Purpose::Dynamics),
        };
        let rates: Vec<f64> = (0..params.n()).map(|x| process.bond_rate(x)).collect();
        process.rates = RateIndex::new(&rates);
        Ok(process)
    }

    pub fn configuration(&self) -> &Configuration {
        &self.eta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn rate_index(&self) -> &RateIndex {
        &self.rates
    }

    /// `N² ξ_x c_{x,x+1}(η) 1{η(x) ≠ η(x+1)}` from the current state.
    #[inline]
    pub fn bond_rate(&self, x: usize) -> f64 {
        let n = self.bond_scale.len();
        let occ = self.eta.occupancy();
        let here = occ[x];
        let next = occ[if x + 1 == n { 0 } else { x + 1 }];
        if here == next {
            return 0.0;
        }
        let prev = occ[(x + n - 1) % n];
        let after = occ[(x + 2) % n];
        self.bond_scale[x] * (1.0 + self.a * f64::from(prev + after))
    }

    /// Runs the chain until `t_target`.
    pub fn advance(&mut self, t_target: f64) -> Result<()> {
        self.advance_with(t_target, |_| {})
    }

    /// Like [`advance`](Self::advance), reporting every event.
    pub fn advance_with(&mut self, t_target: f64, mut on_event: impl FnMut(Event)) -> Result<()> {
        if !(t_target >= self.time) {
            return Err(Error::invalid(format!(
                "target time {t_target} precedes current time {}",
                self.time
            )));
        }
        let n = self.bond_scale.len();
        loop {
            let total = self.rates.total();
            if total <= 0.0 {
                break;
            }
            let u: f64 = 1.0 - self.rng.random::<f64>();
            let wait = -u.ln() / total;
            if self.time + wait > t_target {
                break;
            }
            self.time += wait;
            let bond = loop {
                let target = self.rng.random::<f64>() * total;
                if let Some(b) = self.rates.select(target) {
                    break b;
                }
            };
            self.eta.exchange(bond);
            for k in 0..5.min(n) {
                let y = (bond + n + k - 2.min(n - 1)) % n;
                let rate = self.bond_rate(y);
                self.rates.set(y, rate);
            }
            self.events += 1;
            if self.events % REBUILD_INTERVAL == 0 {
                self.rates.rebuild();
            }
            on_event(Event {
                time: self.time,
                bond,
            });
        }
        self.time = t_target;
        Ok(())
    }

    /// Largest relative deviation between cached and recomputed rates, and
    /// between the root and the recomputed total.
    pub fn cache_coherence(&self) -> (f64, f64) {
        let n = self.bond_scale.len();
        let mut leaf_err = 0.0f64;
        let mut sum = 0.0;
        for x in 0..n {
            let fresh = self.bond_rate(x);
            sum += fresh;
            let cached = self.rates.rate(x);
            leaf_err = leaf_err.max((fresh - cached).abs() / fresh.abs().max(1.0));
        }
        let root_err = (self.rates.total() - sum).abs() / sum.abs().max(f64::MIN_POSITIVE);
        (leaf_err, if sum == 0.0 { self.rates.total().abs() } else { root_err })
    }
}
