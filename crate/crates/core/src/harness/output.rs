//! CSV tables, the text report and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConvergenceReport, ConvergenceRow, ProfileTable};
use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let v = v + 0.0; // no negative zero
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut s = String::from("N,t,observable,mc_mean,mc_stderr,pde_value,abs_gap\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.t),
            r.observable,
            fmt_f64(r.mc_mean),
            fmt_f64(r.mc_stderr),
            fmt_f64(r.pde_value),
            fmt_f64(r.abs_gap)
        )
        .unwrap();
    }
    write_file(path, &s)
}

pub fn write_profile_csv(path: &Path, table: &ProfileTable) -> Result<()> {
    let mut s = String::from("x,u,mc_occupancy,mc_box,mc_box_stderr,pde_rho,pde_box\n");
    for r in &table.rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.x,
            fmt_f64(r.u),
            fmt_f64(r.mc_occupancy),
            fmt_f64(r.mc_box),
            fmt_f64(r.mc_box_stderr),
            fmt_f64(r.pde_rho),
            fmt_f64(r.pde_box)
        )
        .unwrap();
    }
    write_file(path, &s)
}

/// Writes `convergence.csv`, one `profiles_N{n}_t{i}.csv` per snapshot and
/// `report.txt`; returns the file names relative to `dir`.
pub fn write_outputs(report: &ConvergenceReport, dir: &Path) -> Result<Vec<String>> {
    let mut names = vec!["convergence.csv".to_string()];
    write_convergence_csv(&dir.join(&names[0]), &report.rows)?;
    let times = &report.plan.converge.times;
    for p in &report.profiles {
        let ti = times.iter().position(|&t| t == p.t).unwrap_or(0);
        let name = format!("profiles_N{}_t{}.csv", p.n, ti);
        write_profile_csv(&dir.join(&name), p)?;
        names.push(name);
    }
    write_file(&dir.join("report.txt"), &report.summary())?;
    names.push("report.txt".into());
    Ok(names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
}

/// Record of one run: what went in, what came out (by SHA-256), and the
/// resolved configuration, which can be fed back in to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(tool: &str, version: &str, subcommand: &str, config: &RunConfig) -> Self {
        Manifest {
            run: RunInfo {
                tool: tool.into(),
                version: version.into(),
                subcommand: subcommand.into(),
                seed: config.model.seed,
            },
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: config.clone(),
        }
    }

    fn hash_file(path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let hash = Self::hash_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Hashes `dir/name` and records it under `name`.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let hash = Self::hash_file(&dir.join(name))?;
        self.outputs.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Fails with [`Error::ManifestExists`] when `dir` already holds a manifest
/// and `force` is off.
pub fn check_manifest_slot(dir: &Path, force: bool) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_NAME);
    if path.exists() && !force {
        return Err(Error::ManifestExists(path));
    }
    Ok(path)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest, force: bool) -> Result<PathBuf> {
    let path = check_manifest_slot(dir, force)?;
    write_file(&path, &manifest.to_toml())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(8.5e-14), "8.5e-14");
        assert_eq!(fmt_f64(-3e20), "-3e20");
        for v in [1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn manifest_round_trip_and_guard() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let cfg = RunConfig::default();
        let mut m = Manifest::new("condex", "0.1.0", "pde", &cfg);
        m.add_output(dir.path(), "a.csv").unwrap();
        write_manifest(dir.path(), &m, false).unwrap();
        let back = Manifest::load(&dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(back, m);
        // the manifest doubles as a configuration file
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert!(matches!(
            write_manifest(dir.path(), &m, false),
            Err(Error::ManifestExists(_))
        ));
        write_manifest(dir.path(), &m, true).unwrap();
    }
}
