//! Monte Carlo versus PDE experiments and property suites.
//!
//! [`run_convergence`] runs `R` independent replicas of the exclusion process
//! at each grid size, pairs the empirical measure with a fixed set of Fourier
//! observables at the snapshot times, and compares against one PDE reference
//! computed on a fine grid. Replicas run in parallel; every aggregate is
//! reduced in replica order, so results do not depend on the worker count.

mod output;
mod suites;

use std::f64::consts::PI;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConvergeConfig, RunConfig};
use crate::error::{Error, Result};
use crate::lattice::LatticeOperator;
use crate::particle::{sample_initial, validate_asymmetry, ExclusionProcess, ProcessParams};
use crate::pde::{evolve, DensityProfile, InitialProfile, PhiConfig, PhiSpec, SolverConfig};
use crate::rng::derive_seed;
use crate::wfun::{WConfig, WSpec};

pub use output::{
    check_manifest_slot, fmt_f64, sha256_hex, write_convergence_csv, write_manifest, write_outputs,
    write_profile_csv, Manifest, MANIFEST_NAME,
};
pub use suites::{run_property_suites, SuiteReport, SuiteResult};

/// Slack, in combined standard errors, allowed when checking that gaps shrink.
pub const GAP_SLACK: f64 = 2.0;

/// Free parameters of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub w: WConfig,
    pub a: f64,
    pub phi: Option<PhiConfig>,
    pub initial: InitialProfile,
    pub seed: u64,
    pub converge: ConvergeConfig,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Where per-grid checkpoints are kept for resuming.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        ExperimentPlan {
            w: cfg.w.clone(),
            a: cfg.model.a,
            phi: cfg.phi.clone(),
            initial: cfg.initial.clone(),
            seed: cfg.model.seed,
            converge: cfg.converge.clone(),
            workers: None,
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_asymmetry(self.a)?;
        self.w.build()?;
        let phi = self.phi()?;
        self.initial.validate(phi.l(), phi.r())?;
        self.converge.validate()
    }

    pub fn wspec(&self) -> Result<WSpec> {
        self.w.build()
    }

    pub fn phi(&self) -> Result<PhiSpec> {
        match &self.phi {
            Some(p) => p.build(),
            None => PhiSpec::quadratic(self.a),
        }
    }

    /// `W` as used on a grid of `n` sites.
    pub fn wspec_for(&self, n: usize) -> Result<WSpec> {
        let w = self.wspec()?;
        Ok(if self.converge.jitter { w.off_grid(n).0 } else { w })
    }

    pub fn observables(&self) -> Vec<Observable> {
        observables(&self.converge.modes)
    }

    pub fn reference_size(&self) -> usize {
        self.converge.ref_factor * self.converge.grid_sizes.last().copied().unwrap_or(0)
    }

    /// Digest of the plan, used to match checkpoints.
    pub fn fingerprint(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("plan serializes").as_bytes())
    }
}

/// Test function `H` on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    Constant,
    Cos(u32),
    Sin(u32),
}

impl Observable {
    pub fn id(&self) -> String {
        match self {
            Observable::Constant => "mode0".into(),
            Observable::Cos(k) => format!("cos{k}"),
            Observable::Sin(k) => format!("sin{k}"),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Observable::Constant => 1.0,
            Observable::Cos(k) => (2.0 * PI * f64::from(k) * u).cos(),
            Observable::Sin(k) => (2.0 * PI * f64::from(k) * u).sin(),
        }
    }

    /// `H(x/N)` for `x = 0..N`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|x| self.eval(x as f64 / n as f64)).collect()
    }
}

/// Mode 0 is the constant; each `k >= 1` contributes a cosine and a sine.
pub fn observables(modes: &[u32]) -> Vec<Observable> {
    let mut out = Vec::new();
    for &k in modes {
        if k == 0 {
            out.push(Observable::Constant);
        } else {
            out.push(Observable::Cos(k));
            out.push(Observable::Sin(k));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub observable: String,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub pde_value: f64,
    pub abs_gap: f64,
}

/// The PDE solution on the reference grid at each snapshot time.
#[derive(Debug, Clone)]
pub struct PdeReference {
    pub n: usize,
    pub times: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    pub wspec: WSpec,
}

impl PdeReference {
    pub fn compute(plan: &ExperimentPlan, times: &[f64]) -> Result<Self> {
        let n = plan.reference_size();
        let wspec = plan.wspec_for(n)?;
        let op = LatticeOperator::from_w(&wspec, n)?;
        let phi = plan.phi()?;
        let gamma = DensityProfile::new(plan.initial.sample(n)?, 0.0);
        let cfg = SolverConfig::implicit(plan.converge.pde_dt);
        let traj = evolve(&op, &phi, &gamma, &cfg, times)?;
        Ok(PdeReference {
            n,
            times: times.to_vec(),
            profiles: traj.snapshots.into_iter().map(|s| s.values).collect(),
            wspec,
        })
    }

    /// `(1/N_ref) Σ ρ(x/N_ref) H(x/N_ref)`.
    pub fn pair(&self, t_index: usize, obs: &Observable) -> f64 {
        let rho = &self.profiles[t_index];
        let nf = self.n as f64;
        rho.iter()
            .enumerate()
            .map(|(x, r)| r * obs.eval(x as f64 / nf))
            .sum::<f64>()
            / nf
    }

    /// `ρ` at the reference node closest to `x/n`.
    pub fn at_site(&self, t_index: usize, n: usize, x: usize) -> f64 {
        let node = ((x * self.n + n / 2) / n) % self.n;
        self.profiles[t_index][node]
    }
}

/// Per-replica raw data of one grid size, reduced in replica order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub n: usize,
    pub times: Vec<f64>,
    /// `[t][observable][replica]`.
    pub obs_values: Vec<Vec<Vec<f64>>>,
    /// `[t][x]`: number of replicas with site `x` occupied.
    pub occupancy: Vec<Vec<u32>>,
    /// `[t][x]`: sum and sum of squares of the centered box density at `x`.
    pub box_sum: Vec<Vec<f64>>,
    pub box_sq: Vec<Vec<f64>>,
    /// Bond carrying the membrane, if `W` has atoms.
    pub membrane: Option<usize>,
    /// `[t][replica]`: box density right of the membrane minus left of it.
    pub jumps: Vec<Vec<f64>>,
    pub replicas: usize,
    pub events: u64,
}

/// Bond `j` of an `n`-site grid whose increment `(j/n, (j+1)/n]` contains `location`.
pub fn bond_of(location: f64, n: usize) -> usize {
    let j = (location * n as f64).ceil() as usize;
    (j + n - 1) % n
}

fn heaviest_atom(w: &WSpec) -> Option<f64> {
    w.atoms()
        .iter()
        .fold(None::<(f64, f64)>, |best, a| match best {
            Some((_, wt)) if wt >= a.weight => best,
            _ => Some((a.location, a.weight)),
        })
        .map(|(loc, _)| loc)
}

fn centered_start(x: usize, n: usize, box_len: usize) -> usize {
    (x + n - box_len / 2) % n
}

/// Runs `f` on a pool of `workers` threads, or on the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("worker count must be >= 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}"))),
    }
}

/// Occupancies of one replica at each snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub snapshots: Vec<Vec<u8>>,
    pub events: u64,
}

/// Runs replicas `0..replicas` from product measures with profile `initial`.
/// Replica `r` draws its initial state and dynamics from stream `(params.seed, r)`,
/// and the result is indexed by `r`, so it does not depend on `workers`.
pub fn run_replicas(
    params: &ProcessParams,
    initial: &InitialProfile,
    times: &[f64],
    replicas: usize,
    workers: Option<usize>,
) -> Result<Vec<ReplicaRun>> {
    let n = params.n();
    let seed = params.seed();
    let replica = |r: usize| -> Result<ReplicaRun> {
        let eta = sample_initial(|u| initial.eval(u), n, seed, r as u64)?;
        let mut process = ExclusionProcess::new(params, eta, r as u64)?;
        let mut snapshots = Vec::with_capacity(times.len());
        for &t in times {
            process.advance(t)?;
            snapshots.push(process.configuration().occupancy().to_vec());
        }
        Ok(ReplicaRun {
            snapshots,
            events: process.events(),
        })
    };
    with_workers(workers, || {
        (0..replicas)
            .into_par_iter()
            .map(replica)
            .collect::<Result<Vec<_>>>()
    })?
}

/// Runs all replicas at grid size `n` and records the snapshots.
pub fn simulate_grid(plan: &ExperimentPlan, n: usize, times: &[f64]) -> Result<GridRun> {
    let wspec = plan.wspec_for(n)?;
    let seed = derive_seed(plan.seed, n as u64);
    let params = ProcessParams::new(plan.a, wspec.clone(), n, seed)?;
    let obs = plan.observables();
    let hs: Vec<Vec<f64>> = obs.iter().map(|o| o.grid(n)).collect();
    let box_len = plan.converge.box_len;
    if box_len < 4 || box_len > n {
        return Err(Error::invalid(format!("box length must lie in 4..={n}, got {box_len}")));
    }
    let membrane = heaviest_atom(&wspec).map(|loc| bond_of(loc, n));
    let raw = run_replicas(&params, &plan.initial, times, plan.converge.replicas, plan.workers)?;

    let nt = times.len();
    let mut run = GridRun {
        n,
        times: times.to_vec(),
        obs_values: vec![vec![Vec::with_capacity(raw.len()); obs.len()]; nt],
        occupancy: vec![vec![0; n]; nt],
        box_sum: vec![vec![0.0; n]; nt],
        box_sq: vec![vec![0.0; n]; nt],
        membrane,
        jumps: vec![Vec::with_capacity(raw.len()); nt],
        replicas: raw.len(),
        events: raw.iter().map(|r| r.events).sum(),
    };
    let inv_box = 1.0 / box_len as f64;
    for rep in &raw {
        for (ti, occ) in rep.snapshots.iter().enumerate() {
            for (k, h) in hs.iter().enumerate() {
                let v: f64 = occ.iter().zip(h).filter(|(&o, _)| o == 1).map(|(_, h)| h).sum();
                run.obs_values[ti][k].push(v / n as f64);
            }
            // prefix sums give every box in O(N)
            let mut prefix = vec![0u32; 2 * n + 1];
            for i in 0..2 * n {
                prefix[i + 1] = prefix[i] + u32::from(occ[i % n]);
            }
            let box_at = |s: usize| f64::from(prefix[s + box_len] - prefix[s]) * inv_box;
            for x in 0..n {
                run.occupancy[ti][x] += u32::from(occ[x]);
                let b = box_at(centered_start(x, n, box_len));
                run.box_sum[ti][x] += b;
                run.box_sq[ti][x] += b * b;
            }
            if let Some(j) = membrane {
                let right = box_at((j + 1) % n);
                let left = box_at((j + 1 + n - box_len) % n);
                run.jumps[ti].push(right - left);
            }
        }
    }
    Ok(run)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub x: usize,
    pub u: f64,
    pub mc_occupancy: f64,
    pub mc_box: f64,
    pub mc_box_stderr: f64,
    pub pde_rho: f64,
    pub pde_box: f64,
}

/// Jump of the density across the heaviest atom of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneDiagnostic {
    pub location: f64,
    /// Bond of the Monte Carlo grid carrying the atom.
    pub bond: usize,
    /// `ρ` right of the atom minus left of it, on the reference grid.
    pub pde_jump: f64,
    /// Largest `|Δρ|` across reference bonds without atoms.
    pub max_free_jump: f64,
    /// Adjacent-box difference of the Monte Carlo density, and its standard error.
    pub mc_jump: f64,
    pub mc_stderr: f64,
    /// The same box difference applied to the reference profile.
    pub pde_box_jump: f64,
}

impl MembraneDiagnostic {
    /// The PDE jump dominates the smooth variation by the given factor.
    pub fn pde_visible(&self, factor: f64) -> bool {
        self.pde_jump.abs() > factor * self.max_free_jump
    }

    /// Same sign as the PDE box jump, and within `k` standard errors of it.
    pub fn mc_consistent(&self, k: f64) -> bool {
        self.mc_jump.signum() == self.pde_box_jump.signum()
            && (self.mc_jump - self.pde_box_jump).abs() <= k * self.mc_stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub n: usize,
    pub t: f64,
    pub box_len: usize,
    pub rows: Vec<ProfileRow>,
    pub membrane: Option<MembraneDiagnostic>,
}

fn profile_table(
    run: &GridRun,
    reference: &PdeReference,
    ti: usize,
    rti: usize,
    box_len: usize,
) -> ProfileTable {
    let n = run.n;
    let r = run.replicas as f64;
    let pde: Vec<f64> = (0..n).map(|x| reference.at_site(rti, n, x)).collect();
    let pde_box_at = |s: usize| (0..box_len).map(|k| pde[(s + k) % n]).sum::<f64>() / box_len as f64;
    let rows = (0..n)
        .map(|x| {
            let mean = run.box_sum[ti][x] / r;
            let var = if run.replicas > 1 {
                ((run.box_sq[ti][x] - r * mean * mean) / (r - 1.0)).max(0.0)
            } else {
                0.0
            };
            ProfileRow {
                x,
                u: x as f64 / n as f64,
                mc_occupancy: f64::from(run.occupancy[ti][x]) / r,
                mc_box: mean,
                mc_box_stderr: (var / r).sqrt(),
                pde_rho: pde[x],
                pde_box: pde_box_at(centered_start(x, n, box_len)),
            }
        })
        .collect();

    let membrane = run.membrane.map(|j| {
        let rho = &reference.profiles[rti];
        let m = reference.n;
        let location = heaviest_atom(&reference.wspec).unwrap_or(0.0);
        let jr = bond_of(location, m);
        let atom_bonds: Vec<usize> = reference
            .wspec
            .atoms()
            .iter()
            .map(|a| bond_of(a.location, m))
            .collect();
        let max_free_jump = (0..m)
            .filter(|x| !atom_bonds.contains(x))
            .map(|x| (rho[(x + 1) % m] - rho[x]).abs())
            .fold(0.0, f64::max);
        let (mc_jump, mc_stderr) = mean_stderr(&run.jumps[ti]);
        MembraneDiagnostic {
            location,
            bond: j,
            pde_jump: rho[(jr + 1) % m] - rho[jr],
            max_free_jump,
            mc_jump,
            mc_stderr,
            pde_box_jump: pde_box_at((j + 1) % n) - pde_box_at((j + 1 + n - box_len) % n),
        }
    });
    ProfileTable {
        n,
        t: run.times[ti],
        box_len,
        rows,
        membrane,
    }
}

/// One monotonicity comparison between consecutive grid sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub t: f64,
    pub observable: String,
    pub n_from: usize,
    pub n_to: usize,
    pub gap_from: f64,
    pub gap_to: f64,
    pub allowed: f64,
}

impl GapCheck {
    pub fn ok(&self) -> bool {
        self.gap_to <= self.allowed
    }
}

/// `gap(N_{i+1}) <= gap(N_i) + slack·sqrt(se_i² + se_{i+1}²)` for every cell.
pub fn gap_checks(rows: &[ConvergenceRow], slack: f64) -> Vec<GapCheck> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(t, o)| *t == r.t && *o == r.observable) {
            keys.push((r.t, r.observable.clone()));
        }
    }
    let mut out = Vec::new();
    for (t, obs) in keys {
        let mut cells: Vec<&ConvergenceRow> =
            rows.iter().filter(|r| r.t == t && r.observable == obs).collect();
        cells.sort_by_key(|r| r.n);
        for w in cells.windows(2) {
            let se = (w[0].mc_stderr.powi(2) + w[1].mc_stderr.powi(2)).sqrt();
            out.push(GapCheck {
                t,
                observable: obs.clone(),
                n_from: w[0].n,
                n_to: w[1].n,
                gap_from: w[0].abs_gap,
                gap_to: w[1].abs_gap,
                allowed: w[0].abs_gap + slack * se,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub plan: ExperimentPlan,
    pub reference_n: usize,
    pub rows: Vec<ConvergenceRow>,
    pub profiles: Vec<ProfileTable>,
    pub checks: Vec<GapCheck>,
    pub events: u64,
}

impl ConvergenceReport {
    pub fn monotone(&self) -> bool {
        self.checks.iter().all(GapCheck::ok)
    }

    /// Largest gap at the finest grid.
    pub fn finest_gap(&self) -> f64 {
        let n = self.rows.iter().map(|r| r.n).max().unwrap_or(0);
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.abs_gap)
            .fold(0.0, f64::max)
    }

    pub fn profile(&self, n: usize, t: f64) -> Option<&ProfileTable> {
        self.profiles.iter().find(|p| p.n == n && p.t == t)
    }

    /// Plain-text summary; one `key=value` record per line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("reference_n={}\n", self.reference_n));
        s.push_str(&format!("events={}\n", self.events));
        for c in &self.checks {
            s.push_str(&format!(
                "gap_check t={} observable={} n={}->{} gap={:.6e}->{:.6e} allowed={:.6e} status={}\n",
                c.t,
                c.observable,
                c.n_from,
                c.n_to,
                c.gap_from,
                c.gap_to,
                c.allowed,
                if c.ok() { "pass" } else { "fail" }
            ));
        }
        s.push_str(&format!(
            "monotone={}\nfinest_gap={:.6e}\n",
            if self.monotone() { "pass" } else { "fail" },
            self.finest_gap()
        ));
        for p in &self.profiles {
            if let Some(m) = &p.membrane {
                s.push_str(&format!(
                    "membrane n={} t={} location={} pde_jump={:.6e} max_free_jump={:.6e} \
                     mc_jump={:.6e} mc_stderr={:.6e} pde_box_jump={:.6e} pde_visible={} mc_consistent={}\n",
                    p.n,
                    p.t,
                    m.location,
                    m.pde_jump,
                    m.max_free_jump,
                    m.mc_jump,
                    m.mc_stderr,
                    m.pde_box_jump,
                    m.pde_visible(5.0),
                    m.mc_consistent(4.0)
                ));
            }
        }
        s
    }
}

fn rows_for(run: &GridRun, reference: &PdeReference, obs: &[Observable]) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for (ti, &t) in run.times.iter().enumerate() {
        for (k, o) in obs.iter().enumerate() {
            let (mc_mean, mc_stderr) = mean_stderr(&run.obs_values[ti][k]);
            let pde_value = reference.pair(ti, o);
            rows.push(ConvergenceRow {
                n: run.n,
                t,
                observable: o.id(),
                mc_mean,
                mc_stderr,
                pde_value,
                abs_gap: (mc_mean - pde_value).abs(),
            });
        }
    }
    rows
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    run: GridRun,
}

fn checkpoint_path(plan: &ExperimentPlan, n: usize) -> Option<PathBuf> {
    plan.checkpoint_dir
        .as_ref()
        .map(|d| d.join(format!("checkpoint_N{n}.json")))
}

fn load_checkpoint(plan: &ExperimentPlan, n: usize) -> Option<GridRun> {
    let path = checkpoint_path(plan, n)?;
    let text = std::fs::read_to_string(&path).ok()?;
    let cp: Checkpoint = serde_json::from_str(&text).ok()?;
    if cp.fingerprint == plan.fingerprint() && cp.run.n == n {
        log::info!("resuming N={n} from {}", path.display());
        Some(cp.run)
    } else {
        None
    }
}

fn save_checkpoint(plan: &ExperimentPlan, run: &GridRun) -> Result<()> {
    let Some(path) = checkpoint_path(plan, run.n) else {
        return Ok(());
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let cp = Checkpoint {
        fingerprint: plan.fingerprint(),
        run: run.clone(),
    };
    let text = serde_json::to_string(&cp).expect("checkpoint serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// The full convergence study: one row per `(N, t, observable)` and one
/// profile table per `(N, t)`.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let times = plan.converge.times.clone();
    let reference = PdeReference::compute(plan, &times)?;
    let obs = plan.observables();
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut events = 0;
    for &n in &plan.converge.grid_sizes {
        let run = match load_checkpoint(plan, n) {
            Some(run) => run,
            None => {
                let run = simulate_grid(plan, n, &times)?;
                save_checkpoint(plan, &run)?;
                run
            }
        };
        log::info!("N={n}: {} replicas, {} events", run.replicas, run.events);
        events += run.events;
        rows.extend(rows_for(&run, &reference, &obs));
        for ti in 0..times.len() {
            profiles.push(profile_table(&run, &reference, ti, ti, plan.converge.box_len));
        }
    }
    let checks = gap_checks(&rows, GAP_SLACK);
    Ok(ConvergenceReport {
        plan: plan.clone(),
        reference_n: reference.n,
        rows,
        profiles,
        checks,
        events,
    })
}

/// Coarse-grained Monte Carlo density against the PDE at a single `(N, t)`.
pub fn profile_snapshot(plan: &ExperimentPlan, n: usize, t: f64) -> Result<ProfileTable> {
    plan.validate()?;
    if plan.converge.box_len < 4 {
        return Err(Error::invalid("coarse boxes need at least 4 sites"));
    }
    let reference = PdeReference::compute(plan, &[t])?;
    let run = simulate_grid(plan, n, &[t])?;
    Ok(profile_table(&run, &reference, 0, 0, plan.converge.box_len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> ExperimentPlan {
        let mut cfg = RunConfig::default();
        cfg.converge.grid_sizes = vec![16, 32];
        cfg.converge.replicas = 8;
        cfg.converge.times = vec![0.0, 0.01];
        cfg.converge.box_len = 4;
        cfg.converge.pde_dt = 1e-4;
        ExperimentPlan::from_config(&cfg)
    }

    #[test]
    fn observable_ids() {
        let ids: Vec<String> = observables(&[0, 1, 2]).iter().map(Observable::id).collect();
        assert_eq!(ids, ["mode0", "cos1", "sin1", "cos2", "sin2"]);
        assert!((Observable::Sin(1).eval(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bonds_follow_half_open_convention() {
        assert_eq!(bond_of(0.5, 8), 3);
        assert_eq!(bond_of(0.5 + 1e-12, 8), 4);
        assert_eq!(bond_of(0.0, 8), 7);
        assert_eq!(bond_of(0.01, 8), 0);
    }

    #[test]
    fn plan_validation() {
        let mut plan = small_plan();
        plan.validate().unwrap();
        plan.a = -0.5;
        assert!(plan.validate().unwrap_err().to_string().contains("a > -1/2"));
        let mut plan = small_plan();
        plan.converge.grid_sizes = vec![32, 16];
        assert!(plan.validate().is_err());
        let mut plan = small_plan();
        plan.workers = Some(0);
        assert!(run_convergence(&plan).is_err());
    }

    #[test]
    fn rows_are_consistent_and_deterministic() {
        let plan = small_plan();
        let a = run_convergence(&plan).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 7);
        for r in &a.rows {
            assert!(r.mc_stderr >= 0.0);
            assert_eq!(r.abs_gap, (r.mc_mean - r.pde_value).abs());
        }
        let mut threaded = plan.clone();
        threaded.workers = Some(3);
        let b = run_convergence(&threaded).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.profiles, b.profiles);
    }

    #[test]
    fn time_zero_profiles_follow_initial_data() {
        let plan = small_plan();
        let p = profile_snapshot(&plan, 32, 0.0).unwrap();
        for row in &p.rows {
            assert!((row.pde_rho - plan.initial.eval(row.u)).abs() < 1e-12);
            assert!((row.mc_box - row.pde_box).abs() <= 4.0 * row.mc_box_stderr + 0.05);
        }
    }

    #[test]
    fn equilibrium_plan_is_centered() {
        let mut plan = small_plan();
        plan.initial = InitialProfile::Constant { alpha: 0.4 };
        plan.converge.replicas = 40;
        let report = run_convergence(&plan).unwrap();
        for r in &report.rows {
            let h_mean = if r.observable == "mode0" { 1.0 } else { 0.0 };
            assert!((r.pde_value - 0.4 * h_mean).abs() < 1e-12);
            assert!(r.abs_gap <= 4.0 * r.mc_stderr + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn membrane_jump_is_visible_for_asymmetric_data() {
        let mut plan = small_plan();
        plan.a = 0.0;
        plan.initial = InitialProfile::Step {
            low: 0.1,
            high: 0.9,
            from: 0.1,
            to: 0.5,
        };
        plan.converge.grid_sizes = vec![64];
        plan.converge.replicas = 40;
        plan.converge.box_len = 8;
        plan.converge.times = vec![0.01];
        let p = profile_snapshot(&plan, 64, 0.01).unwrap();
        let m = p.membrane.unwrap();
        assert_eq!(m.bond, 32);
        // mass piles up on the left of the atom
        assert!(m.pde_jump < 0.0);
        assert!(m.pde_visible(5.0), "{m:?}");
        assert!(m.mc_consistent(4.0), "{m:?}");
    }

    #[test]
    fn relaxed_profiles_are_flat() {
        let mut plan = small_plan();
        plan.converge.grid_sizes = vec![32];
        plan.converge.pde_dt = 1e-3;
        let p = profile_snapshot(&plan, 32, 3.0).unwrap();
        for row in &p.rows {
            assert!((row.pde_rho - 0.5).abs() < 1e-6);
        }
        // each replica keeps its particle count, so only the average is pinned
        let mean = p.rows.iter().map(|r| r.mc_box).sum::<f64>() / 32.0;
        assert!((mean - 0.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn checkpoints_resume() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = small_plan();
        plan.checkpoint_dir = Some(dir.path().to_path_buf());
        let a = run_convergence(&plan).unwrap();
        assert!(dir.path().join("checkpoint_N16.json").exists());
        let b = run_convergence(&plan).unwrap();
        assert_eq!(a.rows, b.rows);
        let mut other = plan.clone();
        other.seed += 1;
        let c = run_convergence(&other).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn gap_checks_use_slack() {
        let row = |n, gap, se| ConvergenceRow {
            n,
            t: 0.1,
            observable: "cos1".into(),
            mc_mean: gap,
            mc_stderr: se,
            pde_value: 0.0,
            abs_gap: gap,
        };
        let checks = gap_checks(&[row(8, 0.1, 0.01), row(16, 0.12, 0.01), row(32, 0.2, 0.01)], 2.0);
        assert_eq!(checks.len(), 2);
        assert!(checks[0].ok());
        assert!(!checks[1].ok());
    }
}
