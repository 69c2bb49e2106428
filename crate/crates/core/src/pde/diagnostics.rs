use super::{evolve, DensityProfile, PhiSpec, SolverConfig, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::lattice::LatticeOperator;

/// `(1/N) Σ ρ[x]`.
pub fn mass(rho: &DensityProfile) -> f64 {
    rho.values.iter().sum::<f64>() / rho.n() as f64
}

/// Discrete free energy `(1/N) Σ H(ρ[x])` with `H' = Φ`.
pub fn lyapunov(phi: &PhiSpec, rho: &DensityProfile) -> Result<f64> {
    rho.check_range(phi)?;
    Ok(rho.values.iter().map(|&v| phi.potential(v)).sum::<f64>() / rho.n() as f64)
}

/// `Σ_x N ξ_x (Φ(ρ[x+1]) - Φ(ρ[x]))²`, the discrete `∫ (dΦ(ρ)/dW)² dW`.
pub fn energy(op: &LatticeOperator, phi: &PhiSpec, rho: &DensityProfile) -> Result<f64> {
    check_len(op.n(), rho.n())?;
    rho.check_range(phi)?;
    let p: Vec<f64> = rho.values.iter().map(|&v| phi.phi(v)).collect();
    op.dirichlet_form(&p)
}

/// `|⟨ρ_T - ρ_0, g⟩ - ∫_0^T ⟨Φ(ρ_s), λg - h⟩ ds|` with `g = (λ - 𝕃_N)⁻¹ h`,
/// where `𝕃_N g = λg - h`. The time integral uses the trapezoidal rule over
/// the snapshots, which must be equally spaced.
pub fn weak_residual(
    op: &LatticeOperator,
    phi: &PhiSpec,
    trajectory: &Trajectory,
    h: &[f64],
    lambda: f64,
) -> Result<f64> {
    let snaps = &trajectory.snapshots;
    let n = op.n();
    check_len(n, h.len())?;
    if snaps.len() < 2 {
        return Err(Error::invalid("weak residual needs at least two snapshots"));
    }
    for s in snaps {
        check_len(n, s.n())?;
    }
    let dt = snaps[1].t - snaps[0].t;
    if !(dt > 0.0)
        || snaps
            .windows(2)
            .any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(w[1].t.abs()))
    {
        return Err(Error::invalid("weak residual needs uniformly spaced snapshots"));
    }
    let g = op.solve_resolvent(lambda, h)?;
    let lg: Vec<f64> = g.iter().zip(h).map(|(g, h)| lambda * g - h).collect();
    let first = &snaps[0];
    let last = &snaps[snaps.len() - 1];
    let diff: Vec<f64> = last
        .values
        .iter()
        .zip(&first.values)
        .map(|(a, b)| a - b)
        .collect();
    let lhs = op.inner(&diff, &g);
    let integrand: Vec<f64> = snaps
        .iter()
        .map(|s| {
            let p: Vec<f64> = s.values.iter().map(|&v| phi.phi(v)).collect();
            op.inner(&p, &lg)
        })
        .collect();
    let m = integrand.len() - 1;
    let rhs = dt * (0.5 * (integrand[0] + integrand[m]) + integrand[1..m].iter().sum::<f64>());
    Ok((lhs - rhs).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionResult {
    /// `⟨ρ¹_t - ρ²_t, G_λ(ρ¹_t - ρ²_t)⟩`.
    pub lhs: f64,
    /// `⟨γ¹ - γ², G_λ(γ¹ - γ²)⟩ e^{Bλt/2}`.
    pub bound: f64,
    pub initial: f64,
}

impl ContractionResult {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs <= self.bound * (1.0 + rel_tol)
    }
}

fn resolvent_form(op: &LatticeOperator, lambda: f64, d: &[f64]) -> Result<f64> {
    let g = op.solve_resolvent(lambda, d)?;
    Ok(op.inner(d, &g))
}

/// Evolves both initial profiles to `t` and compares the `G_λ`-weighted
/// distance against its exponential bound.
pub fn contraction_check(
    op: &LatticeOperator,
    phi: &PhiSpec,
    gamma1: &DensityProfile,
    gamma2: &DensityProfile,
    lambda: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<ContractionResult> {
    check_len(gamma1.n(), gamma2.n())?;
    gamma1.check_range(phi)?;
    gamma2.check_range(phi)?;
    let (r1, r2) = rayon::join(
        || evolve(op, phi, gamma1, cfg, &[t]),
        || evolve(op, phi, gamma2, cfg, &[t]),
    );
    let (r1, r2) = (r1?, r2?);
    let d0: Vec<f64> = gamma1.values.iter().zip(&gamma2.values).map(|(a, b)| a - b).collect();
    let dt: Vec<f64> = r1
        .last()
        .values
        .iter()
        .zip(&r2.last().values)
        .map(|(a, b)| a - b)
        .collect();
    let initial = resolvent_form(op, lambda, &d0)?;
    let lhs = resolvent_form(op, lambda, &dt)?;
    Ok(ContractionResult {
        lhs,
        bound: initial * (phi.b() * lambda * t / 2.0).exp(),
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{step, uniform_times, InitialProfile};
    use crate::wfun::WSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cosine(n: usize) -> DensityProfile {
        DensityProfile::from_fn(n, |u| 0.5 + 0.25 * (2.0 * PI * u).cos())
    }

    #[test]
    fn trivial_values() {
        let op = LatticeOperator::from_w(&WSpec::identity(), 16).unwrap();
        let phi = PhiSpec::quadratic(0.3).unwrap();
        let c = DensityProfile::constant(16, 0.4);
        assert!((mass(&c) - 0.4).abs() < 1e-15);
        assert!((lyapunov(&phi, &c).unwrap() - (0.08 + 0.1 * 0.064)).abs() < 1e-15);
        assert_eq!(energy(&op, &phi, &c).unwrap(), 0.0);
        assert!(energy(&op, &phi, &cosine(16)).unwrap() > 0.0);
    }

    #[test]
    fn energy_matches_bond_sum() {
        let w = WSpec::with_atoms(1.0, &[(0.5, 1.0)]).unwrap();
        let op = LatticeOperator::from_w(&w, 20).unwrap();
        let phi = PhiSpec::quadratic(0.3).unwrap();
        let rho = cosine(20);
        let p: Vec<f64> = rho.values.iter().map(|&v| phi.phi(v)).collect();
        let direct: f64 = (0..20)
            .map(|x| 20.0 * op.xi()[x] * (p[(x + 1) % 20] - p[x]).powi(2))
            .sum();
        assert!((energy(&op, &phi, &rho).unwrap() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn heat_energy_decays_like_fourier() {
        let n = 256;
        let op = LatticeOperator::from_w(&WSpec::identity(), n).unwrap();
        let phi = PhiSpec::linear();
        let e0 = energy(&op, &phi, &cosine(n)).unwrap();
        let t = 0.01;
        let traj = evolve(&op, &phi, &cosine(n), &SolverConfig::crank_nicolson(1e-5), &[t]).unwrap();
        let et = energy(&op, &phi, traj.last()).unwrap();
        // eigenvalue of the discrete mode, then the continuum one
        let mu = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        assert!((et / e0 - (-2.0 * mu * t).exp()).abs() < 1e-6);
        assert!((et / e0 / (-8.0 * PI * PI * t).exp() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lyapunov_dissipates_at_energy_rate() {
        let w = WSpec::with_atoms(1.0, &[(0.5, 1.0)]).unwrap();
        let n = 64;
        let op = LatticeOperator::from_w(&w, n).unwrap();
        let phi = PhiSpec::quadratic(0.3).unwrap();
        let mut worst = Vec::new();
        for dt in [2e-5, 1e-5] {
            let cfg = SolverConfig::implicit(dt);
            let mut rho = cosine(n);
            let mut f = lyapunov(&phi, &rho).unwrap();
            let mut err = 0.0f64;
            let mut cumulative = 0.0;
            for _ in 0..(2e-3 / dt) as usize {
                let next = step(&op, &phi, &rho, &cfg).unwrap();
                let g = lyapunov(&phi, &next).unwrap();
                assert!(g <= f + 1e-10);
                let e = energy(&op, &phi, &next).unwrap();
                err = err.max(((g - f) / dt + e).abs());
                cumulative += e * dt;
                f = g;
                rho = next;
            }
            assert!(cumulative.is_finite());
            worst.push(err);
        }
        // |ΔF/dt + energy| = O(dt)
        let ratio = worst[0] / worst[1];
        assert!((1.6..2.4).contains(&ratio), "{worst:?}");
    }

    #[test]
    fn energy_integral_grows_slower_over_later_windows() {
        let w = WSpec::with_atoms(1.0, &[(0.5, 1.0)]).unwrap();
        let n = 64;
        let op = LatticeOperator::from_w(&w, n).unwrap();
        let phi = PhiSpec::quadratic(0.3).unwrap();
        let times = uniform_times(0.0, 0.2, 40);
        let traj = evolve(&op, &phi, &cosine(n), &SolverConfig::implicit(1e-4), &times).unwrap();
        let e: Vec<f64> = traj.snapshots.iter().map(|s| energy(&op, &phi, s).unwrap()).collect();
        let window = |k: usize| (0.5 * (e[k] + e[k + 10]) + e[k + 1..k + 10].iter().sum::<f64>()) * 0.005;
        let w: Vec<f64> = (0..4).map(|j| window(10 * j)).collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]), "{w:?}");
    }

    #[test]
    fn weak_residual_of_constant_trajectory_vanishes() {
        let op = LatticeOperator::from_w(&WSpec::identity(), 32).unwrap();
        let phi = PhiSpec::quadratic(0.3).unwrap();
        let c = DensityProfile::constant(32, 0.6);
        let times = uniform_times(0.0, 0.01, 10);
        let traj = evolve(&op, &phi, &c, &SolverConfig::implicit(1e-3), &times).unwrap();
        let h: Vec<f64> = (0..32).map(|x| (2.0 * PI * x as f64 / 32.0).cos()).collect();
        assert!(weak_residual(&op, &phi, &traj, &h, 1.0).unwrap() < 1e-15);
        let uneven = Trajectory {
            snapshots: vec![c.clone(), DensityProfile::new(c.values.clone(), 0.1), DensityProfile::new(c.values.clone(), 0.3)],
        };
        assert!(weak_residual(&op, &phi, &uneven, &h, 1.0).is_err());
    }

    #[test]
    fn weak_residual_second_order_for_heat_equation() {
        let n = 128;
        let op = LatticeOperator::from_w(&WSpec::identity(), n).unwrap();
        let phi = PhiSpec::linear();
        let h: Vec<f64> = (0..n).map(|x| (2.0 * PI * x as f64 / n as f64).cos()).collect();
        let cfg = SolverConfig::crank_nicolson(1.25e-5);
        let coarse = evolve(&op, &phi, &cosine(n), &cfg, &uniform_times(0.0, 0.05, 500)).unwrap();
        let fine = evolve(&op, &phi, &cosine(n), &cfg, &uniform_times(0.0, 0.05, 1000)).unwrap();
        let r1 = weak_residual(&op, &phi, &coarse, &h, 1.0).unwrap();
        let r2 = weak_residual(&op, &phi, &fine, &h, 1.0).unwrap();
        assert!(r1 < 1e-6, "{r1}");
        assert!((3.0..5.5).contains(&(r1 / r2)), "{r1} {r2}");
    }

    #[test]
    fn contraction_examples() {
        let w = WSpec::with_atoms(1.0, &[(0.5, 1.0)]).unwrap();
        let n = 64;
        let op = LatticeOperator::from_w(&w, n).unwrap();
        let phi = PhiSpec::quadratic(0.8).unwrap();
        let cfg = SolverConfig::implicit(1e-4);
        let g = cosine(n);
        let same = contraction_check(&op, &phi, &g, &g, 1.0, 0.1, &cfg).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert_eq!(same.bound, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a = DensityProfile::new((0..n).map(|_| rng.random_range(0.2..0.8)).collect(), 0.0);
            let b = DensityProfile::new((0..n).map(|_| rng.random_range(0.2..0.8)).collect(), 0.0);
            let res = contraction_check(&op, &phi, &a, &b, 1.0, 0.1, &cfg).unwrap();
            assert!(res.holds(1e-6), "{res:?}");
        }

        // linear self-adjoint case: nonincreasing and below the bound
        let op = LatticeOperator::from_w(&WSpec::identity(), n).unwrap();
        let lin = PhiSpec::linear();
        let other = DensityProfile::new(InitialProfile::default().sample(n).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for t in [0.0, 0.01, 0.02, 0.05] {
            let res = contraction_check(&op, &lin, &g, &other, 2.0, t, &cfg).unwrap();
            assert!(res.lhs <= prev + 1e-15);
            if t > 0.0 {
                assert!(res.lhs < res.bound);
            }
            prev = res.lhs;
        }
    }
}
