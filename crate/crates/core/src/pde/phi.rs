use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points at which `Φ'` is sampled when validating the bound `B`.
pub const PHI_CHECK_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
enum PhiKind {
    /// `Φ(u) = u + a u²`.
    Quadratic { a: f64 },
    /// Piecewise linear interpolation of `(u, Φ(u))` nodes.
    Table { u: Vec<f64>, phi: Vec<f64> },
}

/// Nonlinearity `Φ` on `[l, r]` together with a constant `B` such that
/// `B⁻¹ <= Φ' <= B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    l: f64,
    r: f64,
    kind: PhiKind,
    b: f64,
}

impl PhiSpec {
    /// `Φ(α) = α + aα²` on `[0, 1]`, the rate function of the exclusion
    /// process with speed change `a`.
    pub fn quadratic(a: f64) -> Result<Self> {
        crate::particle::validate_asymmetry(a)?;
        PhiSpec::finish(0.0, 1.0, PhiKind::Quadratic { a })
    }

    pub fn linear() -> Self {
        PhiSpec::quadratic(0.0).expect("identity is a valid nonlinearity")
    }

    /// Piecewise linear `Φ` through `points`, which must have strictly
    /// increasing abscissae and slopes bounded away from zero.
    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a Phi table needs at least two points"));
        }
        let (u, phi): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if u.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::invalid("Phi table entries must be finite"));
        }
        if u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("Phi table abscissae must be strictly increasing"));
        }
        PhiSpec::finish(u[0], u[u.len() - 1], PhiKind::Table { u, phi })
    }

    fn finish(l: f64, r: f64, kind: PhiKind) -> Result<Self> {
        let mut spec = PhiSpec { l, r, kind, b: 1.0 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let m = PHI_CHECK_POINTS;
        for k in 0..m {
            let d = spec.dphi(l + (r - l) * k as f64 / (m - 1) as f64);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if let PhiKind::Table { u, phi } = &spec.kind {
            for (w, p) in u.windows(2).zip(phi.windows(2)) {
                let s = (p[1] - p[0]) / (w[1] - w[0]);
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        if !(lo > 0.0) {
            return Err(Error::invalid(format!(
                "Phi must be strictly increasing on [{l}, {r}]; min Phi' = {lo}"
            )));
        }
        spec.b = hi.max(1.0 / lo);
        Ok(spec)
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The constant `B = max(sup Φ', 1 / inf Φ')`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// The coefficient `a` when `Φ` is quadratic.
    pub fn quadratic_coefficient(&self) -> Option<f64> {
        match self.kind {
            PhiKind::Quadratic { a } => Some(a),
            PhiKind::Table { .. } => None,
        }
    }

    fn segment(u_nodes: &[f64], u: f64) -> usize {
        let k = u_nodes.partition_point(|&v| v <= u);
        k.clamp(1, u_nodes.len() - 1) - 1
    }

    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        match &self.kind {
            PhiKind::Quadratic { a } => u + a * u * u,
            PhiKind::Table { u: nodes, phi } => {
                let k = Self::segment(nodes, u);
                let s = (phi[k + 1] - phi[k]) / (nodes[k + 1] - nodes[k]);
                phi[k] + s * (u - nodes[k])
            }
        }
    }

    #[inline]
    pub fn dphi(&self, u: f64) -> f64 {
        match &self.kind {
            PhiKind::Quadratic { a } => 1.0 + 2.0 * a * u,
            PhiKind::Table { u: nodes, phi } => {
                let k = Self::segment(nodes, u);
                (phi[k + 1] - phi[k]) / (nodes[k + 1] - nodes[k])
            }
        }
    }

    /// Antiderivative `H` with `H' = Φ` and `H(0) = 0`.
    pub fn potential(&self, u: f64) -> f64 {
        match &self.kind {
            PhiKind::Quadratic { a } => u * u / 2.0 + a * u * u * u / 3.0,
            PhiKind::Table { .. } => self.table_integral(0.0, u),
        }
    }

    // Exact integral of the piecewise linear interpolant (extended linearly).
    fn table_integral(&self, from: f64, to: f64) -> f64 {
        let PhiKind::Table { u: nodes, .. } = &self.kind else {
            unreachable!()
        };
        let (lo, hi, sign) = if from <= to { (from, to, 1.0) } else { (to, from, -1.0) };
        let mut cuts = vec![lo];
        cuts.extend(nodes.iter().copied().filter(|&v| v > lo && v < hi));
        cuts.push(hi);
        let sum: f64 = cuts
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.phi(w[0]) + self.phi(w[1])))
            .sum();
        sign * sum
    }

    pub fn contains(&self, u: f64, slack: f64) -> bool {
        u >= self.l - slack && u <= self.r + slack
    }
}

/// Plain-text form of `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiConfig {
    Table { table: Vec<[f64; 2]> },
    Quadratic { a: f64 },
}

impl PhiConfig {
    pub fn build(&self) -> Result<PhiSpec> {
        match self {
            PhiConfig::Quadratic { a } => PhiSpec::quadratic(*a),
            PhiConfig::Table { table } => {
                let points: Vec<(f64, f64)> = table.iter().map(|p| (p[0], p[1])).collect();
                PhiSpec::table(&points)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bounds() {
        let p = PhiSpec::quadratic(0.3).unwrap();
        assert!((p.b() - 1.6).abs() < 1e-12);
        assert!((p.phi(0.5) - 0.575).abs() < 1e-15);
        let q = PhiSpec::quadratic(-0.4).unwrap();
        assert!((q.b() - 5.0).abs() < 1e-9);
        assert_eq!(PhiSpec::linear().b(), 1.0);
        assert!(PhiSpec::quadratic(-0.5).is_err());
    }

    #[test]
    fn potential_differentiates_to_phi() {
        let table = PhiSpec::table(&[(0.0, 0.0), (0.3, 0.2), (1.0, 1.5)]).unwrap();
        for p in [PhiSpec::quadratic(0.7).unwrap(), table] {
            for k in 1..20 {
                let u = k as f64 / 20.0;
                let h = 1e-6;
                let d = (p.potential(u + h) - p.potential(u - h)) / (2.0 * h);
                assert!((d - p.phi(u)).abs() < 1e-6, "{u}: {d} vs {}", p.phi(u));
            }
        }
    }

    #[test]
    fn table_validation() {
        let t = PhiSpec::table(&[(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert!((t.b() - 2.0).abs() < 1e-12);
        assert!((t.phi(0.75) - 0.625).abs() < 1e-15);
        assert_eq!(t.dphi(0.25), 0.5);
        assert!(PhiSpec::table(&[(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)]).is_err());
        assert!(PhiSpec::table(&[(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(PhiSpec::table(&[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn config_forms() {
        let q: PhiConfig = toml::from_str("a = 0.3").unwrap();
        assert_eq!(q.build().unwrap(), PhiSpec::quadratic(0.3).unwrap());
        let t: PhiConfig = toml::from_str("table = [[0.0, 0.0], [1.0, 2.0]]").unwrap();
        assert_eq!(t.build().unwrap().b(), 2.0);
    }
}
