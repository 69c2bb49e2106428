use std::path::Path;
use std::process::{Command, Output};

fn condex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condex"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn validate_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = condex(dir.path(), &["validate", "--config", "default"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = read(dir.path(), "out/report.txt");
    assert!(report.contains("overall=pass"));
    assert!(report.lines().filter(|l| l.starts_with("suite=")).count() >= 10);
    assert!(dir.path().join("out/manifest.toml").exists());
}

#[test]
fn validate_near_critical_rates() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[model]\na = -0.49\n").unwrap();
    let o = condex(dir.path(), &["validate", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn rejected_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("w.toml"), "drift = 0.0\natoms = [[0.5, 1.0]]\n").unwrap();
    let o = condex(dir.path(), &["pde", "--w", "w.toml", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("strictly increasing"), "{}", stderr(&o));

    let o = condex(dir.path(), &["pde", "--scheme", "explicit", "--dt", "0.1", "--out", "b"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CFL"), "{}", stderr(&o));

    let o = condex(dir.path(), &["simulate", "--a", "-0.5", "--out", "c"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("a > -1/2"), "{}", stderr(&o));

    let o = condex(dir.path(), &["pde", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = condex(dir.path(), &["spectrum", "--n", "5000"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("cap"));
}

#[test]
fn manifest_guard_and_force() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--n", "8", "--out", "s"];
    assert_eq!(condex(dir.path(), &args).status.code(), Some(0));
    let o = condex(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(condex(dir.path(), &forced).status.code(), Some(0));
}

#[test]
fn spectrum_and_green_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = condex(dir.path(), &["spectrum", "--n", "16", "--eigenvectors", "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec = read(dir.path(), "s/spectrum.csv");
    assert!(spec.starts_with("k,lambda_k\n"));
    assert_eq!(spec.lines().count(), 17);
    let vecs = read(dir.path(), "s/eigenvectors.csv");
    assert_eq!(vecs.lines().count(), 17);
    assert!(!spec.contains("\r"));

    let o = condex(dir.path(), &["green", "--n", "64", "--y", "0.5", "--out", "g"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let green = read(dir.path(), "g/green.csv");
    assert!(green.starts_with("x,G_formula,G_discrete,abs_err\n"));
    assert_eq!(green.lines().count(), 66);
    let manifest = read(dir.path(), "g/manifest.toml");
    assert!(manifest.contains("subcommand = \"green\""));
    assert!(manifest.contains("\"green.csv\" = \""));
}

#[test]
fn manifest_reproduces_pde_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = condex(
        dir.path(),
        &["pde", "--n", "32", "--a", "0.5", "--initial", "step", "--times", "0,0.001,0.002", "--out", "a"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = read(dir.path(), "a/pde.csv");
    assert!(first.starts_with("t,x,rho\n"));
    assert_eq!(first.lines().count(), 1 + 3 * 32);
    let o = condex(dir.path(), &["pde", "--config", "a/manifest.toml", "--out", "b"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(first, read(dir.path(), "b/pde.csv"));
}

#[test]
fn simulate_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    for (workers, out) in [("1", "a"), ("3", "b")] {
        let o = condex(
            dir.path(),
            &[
                "simulate", "--n", "32", "--replicas", "6", "--times", "0,0.01", "--per-replica",
                "--seed", "9", "--workers", workers, "--out", out,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = read(dir.path(), "a/simulate.csv");
    assert!(a.starts_with("replica,t,x,eta\n"));
    assert_eq!(a.lines().count(), 1 + 6 * 2 * 32);
    assert_eq!(a, read(dir.path(), "b/simulate.csv"));
    assert_eq!(read(dir.path(), "a/manifest.toml"), read(dir.path(), "b/manifest.toml"));

    let o = condex(dir.path(), &["simulate", "--n", "16", "--replicas", "3", "--out", "c"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read(dir.path(), "c/simulate.csv").starts_with("t,x,mean_occupancy\n"));
}

#[test]
fn converge_writes_tables_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("plan.toml"),
        "[converge]\ngrid_sizes = [16, 32]\nreplicas = 4\ntimes = [0.005, 0.01]\nbox_len = 4\npde_dt = 1e-4\n",
    )
    .unwrap();
    let args = ["converge", "--config", "plan.toml", "--out", "c"];
    let o = condex(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = read(dir.path(), "c/convergence.csv");
    assert!(table.starts_with("N,t,observable,mc_mean,mc_stderr,pde_value,abs_gap\n"));
    // 2 grids x 2 times x (mode0 + cos/sin for k = 1, 2, 4)
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 7);
    for name in ["profiles_N16_t0.csv", "profiles_N32_t1.csv", "report.txt", "checkpoints/checkpoint_N32.json"] {
        assert!(dir.path().join("c").join(name).exists(), "{name}");
    }
    let manifest = read(dir.path(), "c/manifest.toml");
    assert!(manifest.contains("\"convergence.csv\" = \""));
    assert!(manifest.contains("plan.toml"));

    let mut again = args.to_vec();
    again.push("--force");
    let o = condex(dir.path(), &again);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(table, read(dir.path(), "c/convergence.csv"));
}
