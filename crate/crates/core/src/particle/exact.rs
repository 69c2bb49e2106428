//! Brute-force generator over `{0,1}^N` for small rings.
//!
//! States are indexed by the bit pattern of `η` (site `x` is bit `x`). These
//! routines serve as exactness oracles for the simulator and for the
//! invariance of the Bernoulli product measures.

use nalgebra::DMatrix;

use super::{Configuration, ProcessParams};
use crate::error::{check_len, Error, Result};

/// Largest ring handled by the brute-force routines.
pub const MAX_EXACT_SITES: usize = 12;

/// Rate matrix `Q` of `L_N` (not speeded up), stored by rows.
#[derive(Debug, Clone)]
pub struct ConfigGenerator {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl ConfigGenerator {
    pub fn build(params: &ProcessParams) -> Result<Self> {
        let n = params.n();
        if n > MAX_EXACT_SITES {
            return Err(Error::invalid(format!(
                "brute-force generator limited to N <= {MAX_EXACT_SITES}, got {n}"
            )));
        }
        let states = 1usize << n;
        let mut rows = Vec::with_capacity(states);
        let mut exit = Vec::with_capacity(states);
        for index in 0..states {
            let eta = Configuration::from_index(index, n);
            let mut row: Vec<(usize, f64)> = Vec::new();
            for x in 0..n {
                let y = (x + 1) % n;
                if eta.is_occupied(x) == eta.is_occupied(y) {
                    continue;
                }
                let target = index ^ (1 << x) ^ (1 << y);
                let rate = params.exchange_rate(&eta, x);
                match row.iter_mut().find(|(j, _)| *j == target) {
                    Some(entry) => entry.1 += rate,
                    None => row.push((target, rate)),
                }
            }
            row.sort_by_key(|e| e.0);
            exit.push(row.iter().map(|e| e.1).sum());
            rows.push(row);
        }
        Ok(ConfigGenerator { n, rows, exit })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    /// Off-diagonal rate `q(η, η')`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return -self.exit[from];
        }
        self.rows[from]
            .iter()
            .find(|(j, _)| *j == to)
            .map_or(0.0, |e| e.1)
    }

    pub fn row(&self, from: usize) -> &[(usize, f64)] {
        &self.rows[from]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.states();
        let mut q = DMatrix::zeros(m, m);
        for (i, row) in self.rows.iter().enumerate() {
            q[(i, i)] = -self.exit[i];
            for &(j, r) in row {
                q[(i, j)] = r;
            }
        }
        q
    }

    /// `Q f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.states(), f.len())?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, r)| r * (f[j] - f[i])).sum())
            .collect())
    }

    /// `p Q` for a row vector `p`.
    pub fn apply_left(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len(self.states(), p.len())?;
        let mut out: Vec<f64> = p.iter().zip(&self.exit).map(|(a, e)| -a * e).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                out[j] += p[i] * r;
            }
        }
        Ok(out)
    }

    /// `max |ν(η) q(η,η') - ν(η') q(η',η)|` over all pairs.
    pub fn detailed_balance_error(&self, nu: &[f64]) -> Result<f64> {
        check_len(self.states(), nu.len())?;
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                worst = worst.max((nu[i] * r - nu[j] * self.rate(j, i)).abs());
            }
        }
        Ok(worst)
    }

    /// Distribution at time `t` of the chain speeded up by `N²`, started from `p0`,
    /// computed by uniformization.
    pub fn evolve(&self, p0: &[f64], t: f64) -> Result<Vec<f64>> {
        check_len(self.states(), p0.len())?;
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("time must be >= 0, got {t}")));
        }
        let speed = (self.n * self.n) as f64;
        let lambda = speed * self.exit.iter().fold(0.0f64, |m, &v| m.max(v));
        if lambda == 0.0 || t == 0.0 {
            return Ok(p0.to_vec());
        }
        let mean = lambda * t;
        let last = (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize;
        // Poisson weights in log space.
        let mut log_weight = -mean;
        let mut term = p0.to_vec();
        let mut out = vec![0.0; p0.len()];
        for k in 0..=last {
            if k > 0 {
                log_weight += mean.ln() - (k as f64).ln();
                // term <- term (I + Q/Λ)
                let flow = self.apply_left(&term)?;
                for (a, f) in term.iter_mut().zip(flow) {
                    *a += speed * f / lambda;
                }
            }
            let weight = log_weight.exp();
            for (o, a) in out.iter_mut().zip(&term) {
                *o += weight * a;
            }
        }
        Ok(out)
    }
}

/// `ν_α(η) = α^{|η|} (1-α)^{N-|η|}` for every state.
pub fn bernoulli_measure(n: usize, alpha: f64) -> Vec<f64> {
    (0..1usize << n)
        .map(|i| {
            let k = i.count_ones() as i32;
            alpha.powi(k) * (1.0 - alpha).powi(n as i32 - k)
        })
        .collect()
}

fn validate_density(nu: &[f64], f: &[f64]) -> Result<()> {
    check_len(nu.len(), f.len())?;
    if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("density must be nonnegative, got {v}")));
    }
    let mass: f64 = nu.iter().zip(f).map(|(a, b)| a * b).sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "density must integrate to 1 against nu_alpha, got {mass}"
        )));
    }
    Ok(())
}

/// `Σ_x (1/2) ξ_x ∫ c_{x,x+1} (√f(σ^{x,x+1}η) - √f(η))² dν_α`, computed bond by bond.
pub fn dirichlet_form_particles(params: &ProcessParams, alpha: f64, f: &[f64]) -> Result<f64> {
    let n = params.n();
    if n > MAX_EXACT_SITES {
        return Err(Error::invalid(format!(
            "exact Dirichlet form limited to N <= {MAX_EXACT_SITES}, got {n}"
        )));
    }
    let nu = bernoulli_measure(n, alpha);
    validate_density(&nu, f)?;
    let xi = params.conductances().xi();
    let mut total = 0.0;
    for x in 0..n {
        let y = (x + 1) % n;
        let mut bond = 0.0;
        for (index, weight) in nu.iter().enumerate() {
            let eta = Configuration::from_index(index, n);
            let swapped = if eta.is_occupied(x) == eta.is_occupied(y) {
                index
            } else {
                index ^ (1 << x) ^ (1 << y)
            };
            let d = f[swapped].sqrt() - f[index].sqrt();
            bond += weight * params.speed_factor(&eta, x) * d * d;
        }
        total += 0.5 * xi[x] * bond;
    }
    Ok(total)
}

/// `⟨-L_N √f, √f⟩_{ν_α}` through the brute-force generator.
pub fn dirichlet_form_via_generator(gen: &ConfigGenerator, alpha: f64, f: &[f64]) -> Result<f64> {
    let nu = bernoulli_measure(gen.n(), alpha);
    validate_density(&nu, f)?;
    let root: Vec<f64> = f.iter().map(|v| v.sqrt()).collect();
    let lf = gen.apply(&root)?;
    Ok(-nu
        .iter()
        .zip(lf.iter().zip(&root))
        .map(|(w, (a, b))| w * a * b)
        .sum::<f64>())
}
