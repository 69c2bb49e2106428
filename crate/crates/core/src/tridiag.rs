//! Cyclic tridiagonal systems.
//!
//! Row `i` of the matrix reads `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1]`
//! with indices taken mod `n`, so `lower[0]` and `upper[n-1]` are the corner
//! entries. For `n >= 3` the system is solved with the Thomas algorithm plus a
//! Sherman–Morrison correction for the corners; smaller systems are solved
//! directly.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("empty cyclic tridiagonal system"));
        }
        check_len(n, lower.len())?;
        check_len(n, upper.len())?;
        Ok(CyclicTridiagonal { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        check_len(n, x.len())?;
        Ok((0..n)
            .map(|i| {
                let prev = x[(i + n - 1) % n];
                let next = x[(i + 1) % n];
                self.lower[i] * prev + self.diag[i] * x[i] + self.upper[i] * next
            })
            .collect())
    }

    pub fn factor(&self) -> Result<CyclicFactor> {
        CyclicFactor::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }
}

/// Thomas factors of the corner-stripped matrix `T`, with the
/// Sherman–Morrison data for `A = T + u vᵀ`.
#[derive(Debug, Clone)]
pub struct CyclicFactor {
    kind: FactorKind,
}

#[derive(Debug, Clone)]
enum FactorKind {
    Scalar(f64),
    Pair([[f64; 2]; 2]),
    Cyclic {
        lower: Vec<f64>,
        // c'_i of the Thomas sweep and the reciprocal pivots.
        upper_mod: Vec<f64>,
        inv_pivot: Vec<f64>,
        // T⁻¹u and the scalars of the rank-one update.
        z: Vec<f64>,
        v_last: f64,
        denom: f64,
    },
}

impl CyclicFactor {
    fn new(m: &CyclicTridiagonal) -> Result<Self> {
        let n = m.len();
        let kind = match n {
            1 => {
                let a = m.lower[0] + m.diag[0] + m.upper[0];
                nonzero(a, "1x1 system")?;
                FactorKind::Scalar(a)
            }
            2 => {
                let a = [
                    [m.diag[0], m.lower[0] + m.upper[0]],
                    [m.lower[1] + m.upper[1], m.diag[1]],
                ];
                nonzero(a[0][0] * a[1][1] - a[0][1] * a[1][0], "2x2 system")?;
                FactorKind::Pair(a)
            }
            _ => {
                let alpha = m.lower[0];
                let beta = m.upper[n - 1];
                let gamma = -m.diag[0];
                nonzero(gamma, "leading diagonal")?;
                let mut diag = m.diag.clone();
                diag[0] -= gamma;
                diag[n - 1] -= alpha * beta / gamma;

                let mut upper_mod = vec![0.0; n];
                let mut inv_pivot = vec![0.0; n];
                let mut pivot = diag[0];
                nonzero(pivot, "pivot 0")?;
                inv_pivot[0] = 1.0 / pivot;
                upper_mod[0] = m.upper[0] * inv_pivot[0];
                for i in 1..n {
                    pivot = diag[i] - m.lower[i] * upper_mod[i - 1];
                    nonzero(pivot, "Thomas pivot")?;
                    inv_pivot[i] = 1.0 / pivot;
                    upper_mod[i] = if i + 1 < n { m.upper[i] * inv_pivot[i] } else { 0.0 };
                }
                let mut z = vec![0.0; n];
                z[0] = gamma;
                z[n - 1] = beta;
                thomas(&m.lower, &upper_mod, &inv_pivot, &mut z);
                let v_last = alpha / gamma;
                let correction = z[0] + v_last * z[n - 1];
                let denom = 1.0 + correction;
                if denom.abs() <= 64.0 * n as f64 * f64::EPSILON * (1.0 + correction.abs()) {
                    return Err(Error::Singular(format!(
                        "Sherman-Morrison denominator {denom:e} vanishes"
                    )));
                }
                FactorKind::Cyclic {
                    lower: m.lower.clone(),
                    upper_mod,
                    inv_pivot,
                    z,
                    v_last,
                    denom,
                }
            }
        };
        Ok(CyclicFactor { kind })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        match &self.kind {
            FactorKind::Scalar(a) => {
                check_len(1, x.len())?;
                x[0] /= a;
            }
            FactorKind::Pair(a) => {
                check_len(2, x.len())?;
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                let (b0, b1) = (x[0], x[1]);
                x[0] = (a[1][1] * b0 - a[0][1] * b1) / det;
                x[1] = (a[0][0] * b1 - a[1][0] * b0) / det;
            }
            FactorKind::Cyclic {
                lower,
                upper_mod,
                inv_pivot,
                z,
                v_last,
                denom,
            } => {
                let n = lower.len();
                check_len(n, x.len())?;
                thomas(lower, upper_mod, inv_pivot, x);
                let factor = (x[0] + v_last * x[n - 1]) / denom;
                for (xi, zi) in x.iter_mut().zip(z) {
                    *xi -= factor * zi;
                }
            }
        }
        Ok(())
    }
}

/// Solves a plain (non-cyclic) tridiagonal system; `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::invalid("empty tridiagonal system"));
    }
    check_len(n, lower.len())?;
    check_len(n, upper.len())?;
    check_len(n, rhs.len())?;
    let mut upper_mod = vec![0.0; n];
    let mut inv_pivot = vec![0.0; n];
    nonzero(diag[0], "pivot 0")?;
    inv_pivot[0] = 1.0 / diag[0];
    upper_mod[0] = upper[0] * inv_pivot[0];
    for i in 1..n {
        let pivot = diag[i] - lower[i] * upper_mod[i - 1];
        nonzero(pivot, "Thomas pivot")?;
        inv_pivot[i] = 1.0 / pivot;
        upper_mod[i] = if i + 1 < n { upper[i] * inv_pivot[i] } else { 0.0 };
    }
    let mut x = rhs.to_vec();
    thomas(lower, &upper_mod, &inv_pivot, &mut x);
    Ok(x)
}

fn thomas(lower: &[f64], upper_mod: &[f64], inv_pivot: &[f64], x: &mut [f64]) {
    let n = x.len();
    x[0] *= inv_pivot[0];
    for i in 1..n {
        x[i] = (x[i] - lower[i] * x[i - 1]) * inv_pivot[i];
    }
    for i in (0..n - 1).rev() {
        x[i] -= upper_mod[i] * x[i + 1];
    }
}

fn nonzero(value: f64, what: &str) -> Result<()> {
    if value == 0.0 || !value.is_finite() {
        return Err(Error::Singular(format!("{what} is {value}")));
    }
    Ok(())
}
