//! `condex`: spectra, Green's functions, PDE runs, particle simulations,
//! convergence studies and property checks from one configuration file.
//!
//! Exit codes: 0 success, 1 rejected input, 2 numerical failure or a failed
//! property suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use condex::config::RunConfig;
use condex::harness::{
    check_manifest_slot, run_convergence, run_property_suites, run_replicas, write_manifest,
    fmt_f64 as f, write_outputs, ExperimentPlan, Manifest,
};
use condex::lattice::DirichletInterval;
use condex::pde::{evolve, InitialProfile, PhiConfig};
use condex::wfun::WConfig;
use condex::{Conductances, DensityProfile, Error, LatticeOperator, ProcessParams, Result, Scheme};

#[derive(Parser, Debug)]
#[command(name = "condex", version, about = "Exclusion process with conductances and its hydrodynamic equation")]
struct Cli {
    /// Configuration file (TOML), a manifest from an earlier run, or `default`.
    #[arg(long, global = true, default_value = "default")]
    config: PathBuf,
    /// Master seed; overrides `model.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for replica-parallel work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overwrite an existing manifest in the output directory.
    #[arg(long, global = true)]
    force: bool,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// File holding a `W` spec (`drift`, `atoms` or sampler fields).
    #[arg(long)]
    w: Option<PathBuf>,
    /// Grid size N.
    #[arg(long)]
    n: Option<usize>,
    /// Rate parameter a > -1/2.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Explicit,
    Implicit,
    CrankNicolson,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Explicit => Scheme::Explicit,
            SchemeArg::Implicit => Scheme::Implicit,
            SchemeArg::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Constant,
    Cosine,
    Step,
    File,
}

#[derive(Args, Debug, Default)]
struct InitialArgs {
    /// Initial profile preset.
    #[arg(long)]
    initial: Option<Preset>,
    /// Level of the constant profile, or mean of the cosine.
    #[arg(long)]
    alpha: Option<f64>,
    /// Values file for `--initial file`.
    #[arg(long)]
    initial_file: Option<PathBuf>,
    /// Snapshot times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues (and optionally eigenvectors) of -L_N.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        /// Also write `eigenvectors.csv`.
        #[arg(long)]
        eigenvectors: bool,
    },
    /// Dirichlet Green's function on [0, 1] against its closed form.
    Green {
        #[command(flatten)]
        model: ModelArgs,
        /// Source location in (0, 1).
        #[arg(long)]
        y: Option<f64>,
    },
    /// Solve the hydrodynamic equation.
    Pde {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        initial: InitialArgs,
        /// File with a `table = [[u, phi], ...]` nonlinearity.
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Run replicas of the exclusion process.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        initial: InitialArgs,
        #[arg(long)]
        replicas: Option<usize>,
        /// Write `replica,t,x,eta` instead of mean occupancies.
        #[arg(long)]
        per_replica: bool,
    },
    /// Monte Carlo versus PDE convergence study.
    Converge {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_sizes: Option<Vec<usize>>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Discard checkpoints instead of resuming from them.
        #[arg(long)]
        fresh: bool,
    },
    /// Run every property suite for the configured model.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Green { .. } => "green",
            Command::Pde { .. } => "pde",
            Command::Simulate { .. } => "simulate",
            Command::Converge { .. } => "converge",
            Command::Validate => "validate",
        }
    }
}

/// Files read during configuration, hashed into the manifest.
struct Session {
    cfg: RunConfig,
    inputs: Vec<PathBuf>,
}

impl Session {
    fn apply_model(&mut self, m: &ModelArgs) -> Result<()> {
        if let Some(path) = &m.w {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            self.cfg.w = toml::from_str::<WConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            self.inputs.push(path.clone());
        }
        if let Some(n) = m.n {
            self.cfg.grid.n = n;
        }
        if let Some(a) = m.a {
            self.cfg.model.a = a;
        }
        Ok(())
    }

    /// Returns the snapshot times, if given.
    fn apply_initial(&mut self, i: &InitialArgs) -> Result<Option<Vec<f64>>> {
        let mean = i.alpha.unwrap_or(0.5);
        match i.initial {
            None => {
                if let Some(alpha) = i.alpha {
                    self.cfg.initial = InitialProfile::Constant { alpha };
                }
            }
            Some(Preset::Constant) => self.cfg.initial = InitialProfile::Constant { alpha: mean },
            Some(Preset::Cosine) => {
                // amplitude shrinks with the distance to 0 or 1
                self.cfg.initial = InitialProfile::Cosine {
                    mean,
                    amplitude: 0.3 * mean.min(1.0 - mean) / 0.5,
                    mode: 1,
                }
            }
            Some(Preset::Step) => {
                self.cfg.initial = InitialProfile::Step {
                    low: 0.2,
                    high: 0.8,
                    from: 0.25,
                    to: 0.75,
                }
            }
            Some(Preset::File) => {
                let path = i
                    .initial_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("--initial file needs --initial-file".into()))?;
                self.cfg.initial = InitialProfile::File {
                    path: path.display().to_string(),
                }
                .resolve(None)?;
                self.inputs.push(path.clone());
            }
        }
        Ok(i.times.clone())
    }
}

fn write_out(dir: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut s = Session {
        cfg: RunConfig::load(&cli.config)?,
        inputs: Vec::new(),
    };
    if cli.config.exists() {
        s.inputs.push(cli.config.clone());
    }
    if let Some(seed) = cli.seed {
        s.cfg.model.seed = seed;
    }

    let out = cli.out.clone();
    let mut outputs: Vec<String> = Vec::new();
    let mut passed = true;
    // flag overrides first, so that validation sees the final configuration
    match &cli.command {
        Command::Spectrum { model, .. } | Command::Green { model, .. } => s.apply_model(model)?,
        Command::Pde {
            model,
            initial,
            phi,
            scheme,
            dt,
            cfl,
        } => {
            s.apply_model(model)?;
            if let Some(times) = s.apply_initial(initial)? {
                s.cfg.pde.times = times;
            }
            if let Some(path) = phi {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                s.cfg.phi = Some(
                    toml::from_str::<PhiConfig>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                );
                s.inputs.push(path.clone());
            }
            let solver = &mut s.cfg.pde.solver;
            if let Some(scheme) = scheme {
                solver.scheme = (*scheme).into();
            }
            if dt.is_some() {
                solver.dt = *dt;
            }
            if let Some(cfl) = cfl {
                solver.cfl = *cfl;
            }
        }
        Command::Simulate {
            model,
            initial,
            replicas,
            ..
        } => {
            s.apply_model(model)?;
            if let Some(times) = s.apply_initial(initial)? {
                s.cfg.simulate.times = times;
            }
            if let Some(r) = replicas {
                s.cfg.simulate.replicas = *r;
            }
        }
        Command::Converge {
            a,
            grid_sizes,
            replicas,
            times,
            ..
        } => {
            if let Some(a) = a {
                s.cfg.model.a = *a;
            }
            if let Some(g) = grid_sizes {
                s.cfg.converge.grid_sizes = g.clone();
            }
            if let Some(r) = replicas {
                s.cfg.converge.replicas = *r;
            }
            if let Some(t) = times {
                s.cfg.converge.times = t.clone();
            }
        }
        Command::Validate => {}
    }
    s.cfg.validate()?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    check_manifest_slot(&out, cli.force)?;

    let cfg = &s.cfg;
    let n = cfg.grid.n;
    match &cli.command {
        Command::Spectrum { eigenvectors, .. } => {
            let op = LatticeOperator::from_w(&cfg.wspec()?, n)?;
            let spec = op.spectrum()?;
            let mut text = String::from("k,lambda_k\n");
            for (k, v) in spec.eigenvalues().iter().enumerate() {
                writeln!(text, "{k},{}", f(*v)).unwrap();
            }
            write_out(&out, "spectrum.csv", &text, &mut outputs)?;
            if *eigenvectors {
                let mut text = String::from("x");
                for k in 0..n {
                    write!(text, ",v{k}").unwrap();
                }
                text.push('\n');
                let v = spec.vectors();
                for x in 0..n {
                    write!(text, "{x}").unwrap();
                    for k in 0..n {
                        write!(text, ",{}", f(v[(x, k)])).unwrap();
                    }
                    text.push('\n');
                }
                write_out(&out, "eigenvectors.csv", &text, &mut outputs)?;
            }
            println!("spectral gap {}", spec.spectral_gap());
        }
        Command::Green { y, .. } => {
            let w = cfg.wspec()?;
            let y = y.unwrap_or(cfg.grid.y);
            if !(y > 0.0 && y < 1.0) {
                return Err(Error::invalid(format!("y must lie in (0, 1), got {y}")));
            }
            let y_index = ((y * n as f64).round() as usize).clamp(1, n - 1);
            let cmp = DirichletInterval::new(&Conductances::build(&w, n)?).compare(&w, y_index)?;
            let mut text = String::from("x,G_formula,G_discrete,abs_err\n");
            for r in &cmp.rows {
                writeln!(text, "{},{},{},{}", f(r.x), f(r.formula), f(r.discrete), f(r.abs_err)).unwrap();
            }
            write_out(&out, "green.csv", &text, &mut outputs)?;
            println!("max error {} (N * error = {})", cmp.max_error, cmp.constant());
        }
        Command::Pde { .. } => {
            let op = LatticeOperator::from_w(&cfg.wspec()?, n)?;
            let phi = cfg.phi_spec()?;
            let gamma = DensityProfile::new(cfg.initial.sample(n)?, 0.0);
            let traj = evolve(&op, &phi, &gamma, &cfg.pde.solver, &cfg.pde.times)?;
            let mut text = String::from("t,x,rho\n");
            for snap in &traj.snapshots {
                for (x, v) in snap.values.iter().enumerate() {
                    writeln!(text, "{},{x},{}", f(snap.t), f(*v)).unwrap();
                }
            }
            write_out(&out, "pde.csv", &text, &mut outputs)?;
        }
        Command::Simulate { per_replica, .. } => {
            let params = ProcessParams::new(cfg.model.a, cfg.wspec()?, n, cfg.model.seed)?;
            let times = &cfg.simulate.times;
            let runs = run_replicas(&params, &cfg.initial, times, cfg.simulate.replicas, cli.workers)?;
            let mut text;
            if *per_replica {
                text = String::from("replica,t,x,eta\n");
                for (r, run) in runs.iter().enumerate() {
                    for (t, occ) in times.iter().zip(&run.snapshots) {
                        for (x, e) in occ.iter().enumerate() {
                            writeln!(text, "{r},{},{x},{e}", f(*t)).unwrap();
                        }
                    }
                }
            } else {
                text = String::from("t,x,mean_occupancy\n");
                let reps = runs.len() as f64;
                for (ti, t) in times.iter().enumerate() {
                    for x in 0..n {
                        let count: u32 = runs.iter().map(|r| u32::from(r.snapshots[ti][x])).sum();
                        writeln!(text, "{},{x},{}", f(*t), f(f64::from(count) / reps)).unwrap();
                    }
                }
            }
            write_out(&out, "simulate.csv", &text, &mut outputs)?;
        }
        Command::Converge { fresh, .. } => {
            let mut plan = ExperimentPlan::from_config(cfg);
            plan.workers = cli.workers;
            let checkpoints = out.join("checkpoints");
            if *fresh && checkpoints.exists() {
                fs::remove_dir_all(&checkpoints).map_err(|e| Error::io(&checkpoints, e))?;
            }
            plan.checkpoint_dir = Some(checkpoints);
            let report = run_convergence(&plan)?;
            outputs.extend(write_outputs(&report, &out)?);
            println!(
                "monotone gaps: {}; largest gap at N={}: {:.3e}",
                if report.monotone() { "pass" } else { "fail" },
                plan.converge.grid_sizes.last().unwrap(),
                report.finest_gap()
            );
        }
        Command::Validate => {
            let plan = ExperimentPlan::from_config(cfg);
            let report = run_property_suites(&plan, cfg.grid.y)?;
            let text = report.to_text();
            print!("{text}");
            write_out(&out, "report.txt", &text, &mut outputs)?;
            passed = report.all_passed();
        }
    }

    let mut manifest = Manifest::new("condex", env!("CARGO_PKG_VERSION"), cli.command.name(), cfg);
    for path in &s.inputs {
        manifest.add_input(path)?;
    }
    for name in &outputs {
        manifest.add_output(&out, name)?;
    }
    write_manifest(&out, &manifest, cli.force)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more property suites failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
