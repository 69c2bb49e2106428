//! Finite-volume solver for `∂_t ρ = ℒ_W Φ(ρ)` on the torus.
//!
//! The spatial discretization is `𝕃_N Φ(ρ)`, the same conductance operator
//! that drives the random walk and the particle system. Time stepping is
//! forward Euler (under a CFL bound), backward Euler or Crank–Nicolson; the
//! implicit schemes use full Newton with a cyclic tridiagonal Jacobian.

mod diagnostics;
mod initial;
mod phi;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lattice::LatticeOperator;
use crate::tridiag::CyclicTridiagonal;

pub use diagnostics::{contraction_check, energy, lyapunov, mass, weak_residual, ContractionResult};
pub use initial::InitialProfile;
pub use phi::{PhiConfig, PhiSpec, PHI_CHECK_POINTS};

/// Slack allowed outside `[l, r]` before a profile is rejected.
pub const RANGE_SLACK: f64 = 1e-9;

/// Grid function `ρ : 𝕋_N → [l, r]` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub values: Vec<f64>,
    pub t: f64,
}

impl DensityProfile {
    pub fn new(values: Vec<f64>, t: f64) -> Self {
        DensityProfile { values, t }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        DensityProfile::new(vec![c; n], 0.0)
    }

    /// `ρ[x] = f(x/N)` at time zero.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        DensityProfile::new((0..n).map(|x| f(x as f64 / n as f64)).collect(), 0.0)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mass(&self) -> f64 {
        mass(self)
    }

    /// Rejects values outside `[l - 1e-9, r + 1e-9]`.
    pub fn check_range(&self, phi: &PhiSpec) -> Result<()> {
        match self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !phi.contains(**v, RANGE_SLACK))
        {
            Some((site, &value)) => Err(Error::OutOfRange {
                site,
                value,
                lo: phi.l(),
                hi: phi.r(),
            }),
            None => Ok(()),
        }
    }

    /// `(1/N) Σ ρ[x] h(x/N)`.
    pub fn pair(&self, h: impl Fn(f64) -> f64) -> f64 {
        let n = self.n() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(x, v)| v * h(x as f64 / n))
            .sum::<f64>()
            / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    #[default]
    Implicit,
    CrankNicolson,
}

impl Scheme {
    /// Weight of the new time level.
    fn theta(self) -> f64 {
        match self {
            Scheme::Explicit => 0.0,
            Scheme::Implicit => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Time step. For the explicit scheme `None` means `cfl` times the stable bound.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Implicit,
            dt: Some(1e-5),
            cfl: 0.9,
            newton_tol: 1e-12,
            max_newton: 50,
        }
    }
}

impl SolverConfig {
    pub fn implicit(dt: f64) -> Self {
        SolverConfig {
            dt: Some(dt),
            ..Default::default()
        }
    }

    pub fn crank_nicolson(dt: f64) -> Self {
        SolverConfig {
            scheme: Scheme::CrankNicolson,
            dt: Some(dt),
            ..Default::default()
        }
    }

    pub fn explicit(dt: Option<f64>, cfl: f64) -> Self {
        SolverConfig {
            scheme: Scheme::Explicit,
            dt,
            cfl,
            ..Default::default()
        }
    }

    /// `cfl / (2 N² max_x(ξ_x + ξ_{x-1}) B)`.
    pub fn cfl_limit(&self, op: &LatticeOperator, phi: &PhiSpec) -> f64 {
        let n = op.n();
        let xi = op.xi();
        let worst = (0..n)
            .map(|x| xi[x] + xi[(x + n - 1) % n])
            .fold(0.0, f64::max);
        self.cfl / (2.0 * (n * n) as f64 * worst * phi.b())
    }

    /// Validates the configuration and returns the time step to use.
    pub fn time_step(&self, op: &LatticeOperator, phi: &PhiSpec) -> Result<f64> {
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return Err(Error::invalid("Newton tolerance and iteration cap must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
            }
        }
        match self.scheme {
            Scheme::Explicit => {
                if !(self.cfl > 0.0 && self.cfl <= 0.9) {
                    return Err(Error::invalid(format!(
                        "CFL safety factor must lie in (0, 0.9], got {}",
                        self.cfl
                    )));
                }
                let limit = self.cfl_limit(op, phi);
                match self.dt {
                    Some(dt) if dt > limit => Err(Error::CflViolation { dt, limit }),
                    Some(dt) => Ok(dt),
                    None => Ok(limit),
                }
            }
            _ => self
                .dt
                .ok_or_else(|| Error::invalid("implicit schemes need an explicit dt")),
        }
    }
}

/// `𝕃_N Φ(ρ)`; sums to zero up to rounding.
pub fn rhs(op: &LatticeOperator, phi: &PhiSpec, rho: &DensityProfile) -> Result<Vec<f64>> {
    check_len(op.n(), rho.n())?;
    rho.check_range(phi)?;
    let mut out = vec![0.0; rho.n()];
    apply_phi(op, phi, &rho.values, &mut out);
    Ok(out)
}

fn apply_phi(op: &LatticeOperator, phi: &PhiSpec, rho: &[f64], out: &mut [f64]) {
    let p: Vec<f64> = rho.iter().map(|&v| phi.phi(v)).collect();
    op.apply_into(&p, out);
}

/// One step of size `cfg.dt` (or the CFL step for explicit stepping without dt).
pub fn step(
    op: &LatticeOperator,
    phi: &PhiSpec,
    rho: &DensityProfile,
    cfg: &SolverConfig,
) -> Result<DensityProfile> {
    let dt = cfg.time_step(op, phi)?;
    check_len(op.n(), rho.n())?;
    rho.check_range(phi)?;
    step_with(op, phi, rho, cfg, dt)
}

fn step_with(
    op: &LatticeOperator,
    phi: &PhiSpec,
    rho: &DensityProfile,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<DensityProfile> {
    let n = rho.n();
    let mut work = vec![0.0; n];
    let values = match cfg.scheme {
        Scheme::Explicit => {
            apply_phi(op, phi, &rho.values, &mut work);
            rho.values.iter().zip(&work).map(|(r, l)| r + dt * l).collect()
        }
        scheme => newton(op, phi, &rho.values, dt, scheme.theta(), cfg)?,
    };
    let next = DensityProfile::new(values, rho.t + dt);
    next.check_range(phi)?;
    Ok(next)
}

/// Solves `v - ρ - dt(θ 𝕃Φ(v) + (1-θ) 𝕃Φ(ρ)) = 0` by Newton's method.
fn newton(
    op: &LatticeOperator,
    phi: &PhiSpec,
    rho: &[f64],
    dt: f64,
    theta: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = rho.len();
    let scale = (n * n) as f64;
    let xi = op.xi();
    let mut lphi = vec![0.0; n];

    // Explicit part, fixed during the iteration.
    let mut base = rho.to_vec();
    if theta < 1.0 {
        apply_phi(op, phi, rho, &mut lphi);
        for (b, l) in base.iter_mut().zip(&lphi) {
            *b += (1.0 - theta) * dt * l;
        }
    }

    // Residuals below this level are rounding noise in evaluating F.
    let phi_max = rho.iter().map(|&v| phi.phi(v).abs()).fold(0.0, f64::max);
    let rho_max = rho.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = 64.0 * f64::EPSILON * (1.0 + rho_max + dt * op.norm_inf() * phi_max);
    let tol = cfg.newton_tol.max(floor);

    let mut v = rho.to_vec();
    let mut trace = Vec::new();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut f = vec![0.0; n];
    for _ in 0..cfg.max_newton {
        apply_phi(op, phi, &v, &mut lphi);
        let mut res = 0.0f64;
        for x in 0..n {
            f[x] = v[x] - base[x] - theta * dt * lphi[x];
            res = res.max(f[x].abs());
        }
        trace.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(v);
        }
        let c = theta * dt * scale;
        for x in 0..n {
            let prev = (x + n - 1) % n;
            let next = if x + 1 == n { 0 } else { x + 1 };
            diag[x] = 1.0 + c * (xi[x] + xi[prev]) * phi.dphi(v[x]);
            upper[x] = -c * xi[x] * phi.dphi(v[next]);
            lower[x] = -c * xi[prev] * phi.dphi(v[prev]);
        }
        let jac = CyclicTridiagonal::new(lower.clone(), diag.clone(), upper.clone())?;
        let delta = jac.solve(&f)?;
        let mut change = 0.0f64;
        for (vx, d) in v.iter_mut().zip(&delta) {
            *vx -= d;
            change = change.max(d.abs());
        }
        // An update at the level of rounding cannot reduce F any further.
        if change <= 4.0 * f64::EPSILON * (1.0 + rho_max) && res <= 1e3 * tol {
            return Ok(v);
        }
    }
    Err(Error::NewtonDivergence {
        iterations: trace.len(),
        trace,
    })
}

/// Snapshots of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<DensityProfile>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &DensityProfile {
        self.snapshots.last().expect("trajectory is never empty")
    }
}

/// Evolves `gamma` and records it at each of `times` (increasing, `>= gamma.t`).
/// Each interval between snapshots is split into equal steps no longer than
/// the configured `dt`, so the internal step is decoupled from the output grid.
pub fn evolve(
    op: &LatticeOperator,
    phi: &PhiSpec,
    gamma: &DensityProfile,
    cfg: &SolverConfig,
    times: &[f64],
) -> Result<Trajectory> {
    let dt = cfg.time_step(op, phi)?;
    check_len(op.n(), gamma.n())?;
    gamma.check_range(phi)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < gamma.t) {
        return Err(Error::invalid("snapshot times must be increasing and not precede the start"));
    }
    let mut snapshots = Vec::with_capacity(times.len());
    let mut current = gamma.clone();
    for &target in times {
        let span = target - current.t;
        if span > 0.0 {
            let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let start = current.t;
            for k in 1..=steps {
                current = step_with(op, phi, &current, cfg, h)?;
                current.t = start + h * k as f64;
            }
            current.t = target;
        }
        snapshots.push(current.clone());
    }
    Ok(Trajectory { snapshots })
}

/// Snapshots at `0, Δ, 2Δ, ..., t_end` with `Δ = t_end / intervals`.
pub fn uniform_times(t0: f64, t_end: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| t0 + (t_end - t0) * k as f64 / intervals as f64)
        .collect()
}
