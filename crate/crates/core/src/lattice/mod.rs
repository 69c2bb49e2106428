//! Conductances and the cyclic random-walk generator `𝕃_N`.
//!
//! For a grid of `N` sites the bond `(x, x+1)` carries the conductance
//! `ξ_x = 1 / (N·(W((x+1)/N) - W(x/N)))`, and
//!
//! ```text
//! (𝕃_N f)(x) = N²ξ_x (f(x+1) - f(x)) + N²ξ_{x-1} (f(x-1) - f(x)).
//! ```
//!
//! The operator is symmetric with respect to counting measure, has zero row
//! sums and is nonpositive. It is the discrete stand-in for `(d/dx)(d/dW)`
//! and is shared by the random walk, the particle system and the PDE solver.

mod green;
mod spectrum;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::tridiag::{CyclicFactor, CyclicTridiagonal};
use crate::wfun::WSpec;

pub use green::{green_formula, DirichletInterval, GreenComparison, GreenRow};
pub use spectrum::{SpectralDecomp, DEFAULT_EIGEN_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct Conductances {
    n: usize,
    xi: Vec<f64>,
    total_w: f64,
}

impl Conductances {
    /// `xi[x] = 1 / (n · (W((x+1)/n) - W(x/n)))`; the last bond uses `(1 - 1/n, 1]`.
    pub fn build(w: &WSpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid size must be >= 2, got {n}")));
        }
        let nf = n as f64;
        let xi = (0..n)
            .map(|x| {
                let a = x as f64 / nf;
                let b = if x + 1 == n { 1.0 } else { (x + 1) as f64 / nf };
                Ok(1.0 / (nf * w.increment(a, b)?))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Conductances {
            n,
            xi,
            total_w: w.total_mass(),
        })
    }

    /// Conductances given directly; `total_w` is recovered from the telescoping sum.
    pub fn from_values(xi: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::invalid("need at least two conductances"));
        }
        if let Some(bad) = xi.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("conductances must be positive, got {bad}")));
        }
        let n = xi.len();
        let total_w = xi.iter().map(|v| 1.0 / (n as f64 * v)).sum();
        Ok(Conductances { n, xi, total_w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `W(1) - W(0)` of the spec the conductances came from.
    pub fn total_w(&self) -> f64 {
        self.total_w
    }

    /// `Σ_x 1/(N ξ_x)`, which telescopes to `W(1) - W(0)`.
    pub fn telescoped_total(&self) -> f64 {
        let nf = self.n as f64;
        self.xi.iter().map(|v| 1.0 / (nf * v)).sum()
    }
}

/// The generator `𝕃_N` together with a cache of resolvent factorizations.
pub struct LatticeOperator {
    cond: Conductances,
    scale: f64,
    resolvents: Mutex<HashMap<u64, Arc<CyclicFactor>>>,
}

impl fmt::Debug for LatticeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeOperator")
            .field("n", &self.cond.n)
            .field("xi", &self.cond.xi)
            .finish()
    }
}

impl Clone for LatticeOperator {
    fn clone(&self) -> Self {
        LatticeOperator::new(self.cond.clone())
    }
}

impl LatticeOperator {
    pub fn new(cond: Conductances) -> Self {
        let n = cond.n as f64;
        LatticeOperator {
            cond,
            scale: n * n,
            resolvents: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_w(w: &WSpec, n: usize) -> Result<Self> {
        Ok(LatticeOperator::new(Conductances::build(w, n)?))
    }

    pub fn n(&self) -> usize {
        self.cond.n
    }

    pub fn conductances(&self) -> &Conductances {
        &self.cond
    }

    pub fn xi(&self) -> &[f64] {
        &self.cond.xi
    }

    /// Jump rate of the random walk across bond `x`, `N²ξ_x`.
    pub fn bond_rate(&self, x: usize) -> f64 {
        self.scale * self.cond.xi[x]
    }

    /// `𝕃_N h`.
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, h.len())?;
        let mut out = vec![0.0; n];
        self.apply_into(h, &mut out);
        Ok(out)
    }

    /// Writes `𝕃_N h` into `out` as a sum of antisymmetric bond currents,
    /// so the output sums to zero up to rounding.
    pub(crate) fn apply_into(&self, h: &[f64], out: &mut [f64]) {
        let n = self.n();
        out.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..n {
            let y = if x + 1 == n { 0 } else { x + 1 };
            let current = self.scale * self.cond.xi[x] * (h[y] - h[x]);
            out[x] += current;
            out[y] -= current;
        }
    }

    /// Largest absolute row sum of `𝕃_N`.
    pub fn norm_inf(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|x| 2.0 * self.scale * (self.cond.xi[x] + self.cond.xi[(x + n - 1) % n]))
            .fold(0.0, f64::max)
    }

    /// `λI - 𝕃_N` as a cyclic tridiagonal matrix.
    pub fn shifted(&self, lambda: f64) -> CyclicTridiagonal {
        let n = self.n();
        let xi = &self.cond.xi;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for x in 0..n {
            let prev = xi[(x + n - 1) % n];
            lower[x] = -self.scale * prev;
            upper[x] = -self.scale * xi[x];
            diag[x] = lambda + self.scale * (xi[x] + prev);
        }
        CyclicTridiagonal { lower, diag, upper }
    }

    fn resolvent_factor(&self, lambda: f64) -> Result<Arc<CyclicFactor>> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("resolvent needs lambda > 0, got {lambda}")));
        }
        let key = lambda.to_bits();
        if let Some(f) = self.resolvents.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(f));
        }
        let factor = Arc::new(self.shifted(lambda).factor()?);
        self.resolvents
            .lock()
            .expect("cache poisoned")
            .insert(key, Arc::clone(&factor));
        Ok(factor)
    }

    /// Solves `λ H_λ - 𝕃_N H_λ = h`.
    pub fn solve_resolvent(&self, lambda: f64, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), h.len())?;
        self.resolvent_factor(lambda)?.solve(h)
    }

    /// Same solve through a dense LU factorization; used for validation.
    pub fn solve_resolvent_dense(&self, lambda: f64, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), h.len())?;
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("resolvent needs lambda > 0, got {lambda}")));
        }
        let n = self.n();
        let a = DMatrix::<f64>::identity(n, n) * lambda - self.dense();
        let b = nalgebra::DVector::from_column_slice(h);
        a.lu()
            .solve(&b)
            .map(|x| x.as_slice().to_vec())
            .ok_or_else(|| Error::Singular("dense resolvent".into()))
    }

    /// `‖λ H_λ - 𝕃_N H_λ - h‖∞`.
    pub fn resolvent_residual(&self, lambda: f64, h_lambda: &[f64], h: &[f64]) -> Result<f64> {
        let lh = self.apply(h_lambda)?;
        check_len(self.n(), h.len())?;
        Ok(h_lambda
            .iter()
            .zip(&lh)
            .zip(h)
            .map(|((hl, l), h)| (lambda * hl - l - h).abs())
            .fold(0.0, f64::max))
    }

    /// `(1/N) Σ |λ H_λ - h|`, which vanishes as `λ → ∞` for continuous `h`.
    pub fn resolvent_l1_defect(&self, lambda: f64, h: &[f64]) -> Result<f64> {
        let hl = self.solve_resolvent(lambda, h)?;
        Ok(hl
            .iter()
            .zip(h)
            .map(|(a, b)| (lambda * a - b).abs())
            .sum::<f64>()
            / self.n() as f64)
    }

    /// Dense matrix of `𝕃_N`.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            let y = (x + 1) % n;
            let r = self.scale * self.cond.xi[x];
            m[(x, y)] += r;
            m[(y, x)] += r;
            m[(x, x)] -= r;
            m[(y, y)] -= r;
        }
        m
    }

    /// `(1/N) Σ_x ξ_x (∇_N h)(x)²` with `∇_N h(x) = N (h(x+1) - h(x))`.
    pub fn dirichlet_form(&self, h: &[f64]) -> Result<f64> {
        let n = self.n();
        check_len(n, h.len())?;
        let nf = n as f64;
        let sum: f64 = (0..n)
            .map(|x| {
                let grad = nf * (h[(x + 1) % n] - h[x]);
                self.cond.xi[x] * grad * grad
            })
            .sum();
        Ok(sum / nf)
    }

    /// Both sides of the Poincaré inequality with `C₀ = W(1) - W(0)`:
    /// `lhs = (1/N)Σh²`, `rhs = C₀·dirichlet_form(h) + ((1/N)Σh)²`.
    pub fn poincare_check(&self, h: &[f64]) -> Result<(f64, f64)> {
        let form = self.dirichlet_form(h)?;
        let nf = self.n() as f64;
        let lhs = h.iter().map(|v| v * v).sum::<f64>() / nf;
        let mean = h.iter().sum::<f64>() / nf;
        Ok((lhs, self.cond.total_w * form + mean * mean))
    }

    /// `(1/N) Σ f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / self.n() as f64
    }

    pub fn spectrum(&self) -> Result<SpectralDecomp> {
        SpectralDecomp::compute(self, DEFAULT_EIGEN_CAP)
    }

    pub fn spectrum_with_cap(&self, cap: usize) -> Result<SpectralDecomp> {
        SpectralDecomp::compute(self, cap)
    }

    /// `exp(t 𝕃_N)` through the spectral decomposition.
    pub fn heat_kernel(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.spectrum()?.semigroup(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn one_atom() -> WSpec {
        WSpec::with_atoms(1.0, &[(0.5, 1.0)]).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn three_atoms(rng: &mut ChaCha8Rng) -> WSpec {
        let mut locs: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        locs.sort_by(f64::total_cmp);
        let atoms: Vec<(f64, f64)> = locs
            .into_iter()
            .map(|u| (u, rng.random_range(0.05..2.0)))
            .collect();
        WSpec::with_atoms(rng.random_range(0.2..2.0), &atoms).unwrap()
    }

    #[test]
    fn conductance_examples() {
        let c = Conductances::build(&WSpec::identity(), 4).unwrap();
        assert!(c.xi().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let c = Conductances::build(&one_atom(), 2).unwrap();
        assert!((c.xi()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.xi()[1] - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let w = three_atoms(&mut rng);
            let c = Conductances::build(&w, 64).unwrap();
            assert!((c.telescoped_total() - w.eval(1.0)).abs() < 1e-12);
            assert!(c.xi().iter().all(|&v| v > 0.0));
        }
        assert!(Conductances::build(&w_identity(), 1).is_err());
    }

    fn w_identity() -> WSpec {
        WSpec::identity()
    }

    #[test]
    fn generator_examples() {
        let n = 32;
        let op = LatticeOperator::from_w(&WSpec::identity(), n).unwrap();
        let out = op.apply(&vec![3.0; n]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-9));

        let h: Vec<f64> = (0..n).map(|x| (2.0 * PI * x as f64 / n as f64).cos()).collect();
        let out = op.apply(&h).unwrap();
        let mu = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        for (o, v) in out.iter().zip(&h) {
            assert!((o + mu * v).abs() <= 1e-8 * mu);
        }
        assert!(op.apply(&[1.0; 3]).is_err());
    }

    #[test]
    fn symmetric_and_nonpositive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &n in &[4, 8, 16, 64] {
            for _ in 0..100 {
                let w = three_atoms(&mut rng);
                let op = LatticeOperator::from_w(&w, n).unwrap();
                let h = random_vec(&mut rng, n);
                let g = random_vec(&mut rng, n);
                let lh = op.apply(&h).unwrap();
                let lg = op.apply(&g).unwrap();
                let scale = op.norm_inf();
                let a: f64 = lh.iter().zip(&g).map(|(x, y)| x * y).sum();
                let b: f64 = h.iter().zip(&lg).map(|(x, y)| x * y).sum();
                assert!((a - b).abs() <= 1e-12 * scale * n as f64, "{a} vs {b}");
                let q: f64 = lh.iter().zip(&h).map(|(x, y)| x * y).sum();
                let norm2: f64 = h.iter().map(|v| v * v).sum();
                assert!(q <= 1e-10 * norm2);
                assert!(lh.iter().sum::<f64>().abs() <= 1e-12 * scale * n as f64);
            }
        }
    }

    #[test]
    fn dense_matches_apply_and_rows_sum_to_zero() {
        let op = LatticeOperator::from_w(&one_atom(), 10).unwrap();
        let m = op.dense();
        for i in 0..10 {
            assert!(m.row(i).sum().abs() < 1e-9);
            for j in 0..10 {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        let h: Vec<f64> = (0..10).map(|x| (x * x) as f64).collect();
        let a = op.apply(&h).unwrap();
        let b = &m * nalgebra::DVector::from_vec(h);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn resolvent_examples() {
        let n = 64;
        let op = LatticeOperator::from_w(&one_atom(), n).unwrap();
        let h = op.solve_resolvent(2.0, &vec![3.0; n]).unwrap();
        assert!(h.iter().all(|v| (v - 1.5).abs() < 1e-12));

        let spec = op.spectrum().unwrap();
        let k = 3;
        let f = spec.eigenvector(k);
        let mu = spec.eigenvalues()[k];
        let g = op.solve_resolvent(0.7, &f).unwrap();
        for (a, b) in g.iter().zip(&f) {
            assert!((a - b / (0.7 + mu)).abs() < 1e-10);
        }
        assert!(op.solve_resolvent(0.0, &f).is_err());
        assert!(op.solve_resolvent(-1.0, &f).is_err());
    }

    #[test]
    fn resolvent_residual_and_energy_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 128;
        for _ in 0..100 {
            let w = three_atoms(&mut rng);
            let op = LatticeOperator::from_w(&w, n).unwrap();
            let lambda = rng.random_range(0.05..10.0);
            let h = random_vec(&mut rng, n);
            let hl = op.solve_resolvent(lambda, &h).unwrap();
            let hnorm = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(op.resolvent_residual(lambda, &hl, &h).unwrap() <= 1e-10 * hnorm);
            let h2 = op.inner(&h, &h);
            assert!(op.inner(&hl, &hl) <= h2 / (lambda * lambda) * (1.0 + 1e-12));
            assert!(op.dirichlet_form(&hl).unwrap() <= h2 / lambda * (1.0 + 1e-12));
        }
    }

    #[test]
    fn resolvent_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let op = LatticeOperator::from_w(&three_atoms(&mut rng), 50).unwrap();
        for _ in 0..20 {
            let (lambda, mu) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
            let h = random_vec(&mut rng, 50);
            let gl = op.solve_resolvent(lambda, &h).unwrap();
            let gm = op.solve_resolvent(mu, &h).unwrap();
            let glgm = op.solve_resolvent(lambda, &gm).unwrap();
            for i in 0..50 {
                assert!((gl[i] - gm[i] - (mu - lambda) * glgm[i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cyclic_and_dense_resolvents_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &n in &[2, 3, 4, 17] {
            let op = LatticeOperator::from_w(&three_atoms(&mut rng), n).unwrap();
            let h = random_vec(&mut rng, n);
            let a = op.solve_resolvent(1.3, &h).unwrap();
            let b = op.solve_resolvent_dense(1.3, &h).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn dirichlet_form_examples() {
        let op = LatticeOperator::from_w(&WSpec::identity(), 2).unwrap();
        assert!((op.dirichlet_form(&[0.0, 1.0]).unwrap() - 4.0).abs() < 1e-14);
        let op = LatticeOperator::from_w(&one_atom(), 40).unwrap();
        assert_eq!(op.dirichlet_form(&[2.5; 40]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_vec(&mut rng, 40);
        let lh = op.apply(&h).unwrap();
        let by_parts = -op.inner(&lh, &h);
        let form = op.dirichlet_form(&h).unwrap();
        assert!((form - by_parts).abs() <= 1e-10 * form.max(1.0));
        assert!(op.dirichlet_form(&[1.0]).is_err());
    }

    #[test]
    fn poincare_examples() {
        let op = LatticeOperator::from_w(&one_atom(), 16).unwrap();
        let (lhs, rhs) = op.poincare_check(&[1.7; 16]).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);

        let n = 64;
        let op = LatticeOperator::from_w(&WSpec::identity(), n).unwrap();
        let h: Vec<f64> = (0..n).map(|x| (2.0 * PI * x as f64 / n as f64).cos()).collect();
        let (lhs, rhs) = op.poincare_check(&h).unwrap();
        let mu = 4.0 * (n * n) as f64 * (PI / n as f64).sin().powi(2);
        assert!((lhs - 0.5).abs() < 1e-12);
        assert!((rhs - 0.5 * mu).abs() < 1e-9 * mu);
        assert!((rhs - 2.0 * PI * PI).abs() < 0.05);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let op = LatticeOperator::from_w(&three_atoms(&mut rng), 48).unwrap();
        for _ in 0..1000 {
            let h = random_vec(&mut rng, 48);
            let (lhs, rhs) = op.poincare_check(&h).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-8));
        }
    }

    #[test]
    fn cache_is_shared_between_calls() {
        let op = LatticeOperator::from_w(&WSpec::identity(), 8).unwrap();
        op.solve_resolvent(1.0, &[1.0; 8]).unwrap();
        op.solve_resolvent(1.0, &[2.0; 8]).unwrap();
        op.solve_resolvent(2.0, &[2.0; 8]).unwrap();
        assert_eq!(op.resolvents.lock().unwrap().len(), 2);
    }
}
