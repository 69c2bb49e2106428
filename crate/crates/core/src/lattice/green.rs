//! Green's function of `(d/dx)(d/dW)` on `[0, 1]` with killed boundary.
//!
//! This is an interval object, distinct from the torus operator: the nodes are
//! `x/N` for `0 <= x <= N`, the bonds carry the same conductances `ξ_x`, and
//! `u(0) = u(1) = 0`. The convention is `𝕃 G(·, y) = +δ_y`, which for the grid
//! means solving `𝕃_D u = N e_y`; the continuum kernel is
//!
//! ```text
//! G(x, y) = -W(y) (W(1) - W(x)) / W(1)     for y <= x,
//! G(x, y) = -(W(1) - W(y)) W(x) / W(1)     for x <= y,
//! ```
//!
//! with `W(0) = 0`. The grid solution coincides with `G` at the nodes; as a
//! step function `u(⌊Nx⌋/N)` it approximates `G(·, y)` in sup norm to first order.

use super::Conductances;
use crate::error::{Error, Result};
use crate::tridiag::solve_tridiagonal;
use crate::wfun::WSpec;

#[derive(Debug, Clone)]
pub struct DirichletInterval {
    n: usize,
    xi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenRow {
    pub x: f64,
    pub formula: f64,
    pub discrete: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone)]
pub struct GreenComparison {
    pub n: usize,
    pub y: f64,
    /// One row per node `x/N`, `0 <= x <= N`; `abs_err` is the nodal error.
    pub rows: Vec<GreenRow>,
    pub max_nodal_error: f64,
    /// `sup_{x in [0,1]} |G(x, y) - u(⌊Nx⌋/N)|`.
    pub max_error: f64,
}

impl GreenComparison {
    /// `N · max_error`, the constant in the `C/N` bound.
    pub fn constant(&self) -> f64 {
        self.n as f64 * self.max_error
    }
}

/// Closed-form kernel; `wx`, `wy` are values of `W`, `total = W(1)`.
fn kernel(wx: f64, wy: f64, total: f64, x_le_y: bool) -> f64 {
    if x_le_y {
        -(total - wy) * wx / total
    } else {
        -wy * (total - wx) / total
    }
}

/// `G(x, y)` for `x, y` in `[0, 1]`.
pub fn green_formula(w: &WSpec, x: f64, y: f64) -> f64 {
    let total = w.eval(1.0);
    let wx = if x >= 1.0 { total } else { w.eval(x) };
    let wy = if y >= 1.0 { total } else { w.eval(y) };
    kernel(wx, wy, total, x <= y)
}

impl DirichletInterval {
    pub fn new(cond: &Conductances) -> Self {
        DirichletInterval {
            n: cond.n(),
            xi: cond.xi().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid solution at nodes `0..=N` for a unit source at node `y_index`.
    pub fn solve(&self, y_index: usize) -> Result<Vec<f64>> {
        let n = self.n;
        if y_index == 0 || y_index >= n {
            return Err(Error::invalid(format!(
                "Green's function source must be interior (0 < y < {n}), got {y_index}"
            )));
        }
        let scale = (n * n) as f64;
        let m = n - 1;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            let node = i + 1;
            lower[i] = scale * self.xi[node - 1];
            upper[i] = scale * self.xi[node];
            diag[i] = -scale * (self.xi[node] + self.xi[node - 1]);
        }
        let mut rhs = vec![0.0; m];
        rhs[y_index - 1] = n as f64;
        let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        let mut u = Vec::with_capacity(n + 1);
        u.push(0.0);
        u.extend(interior);
        u.push(0.0);
        Ok(u)
    }

    /// Compares the grid solution with the closed form for `W = w`.
    pub fn compare(&self, w: &WSpec, y_index: usize) -> Result<GreenComparison> {
        let u = self.solve(y_index)?;
        let n = self.n;
        let nf = n as f64;
        let total = w.eval(1.0);
        let y = y_index as f64 / nf;
        let wy = w.eval(y);
        let node = |k: usize| if k == n { 1.0 } else { k as f64 / nf };
        let w_at = |k: usize| if k == n { total } else { w.eval(node(k)) };

        let rows: Vec<GreenRow> = (0..=n)
            .map(|k| {
                let formula = kernel(w_at(k), wy, total, k <= y_index);
                GreenRow {
                    x: node(k),
                    formula,
                    discrete: u[k],
                    abs_err: (formula - u[k]).abs(),
                }
            })
            .collect();
        let max_nodal_error = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);

        // G(·, y) is monotone on each cell, so the sup over [x_k, x_{k+1})
        // is attained at x_k or at the left limit x_{k+1}-.
        let mut max_error = max_nodal_error;
        for k in 0..n {
            let right = node(k + 1);
            let w_left_limit = w.eval_left(right);
            let g = kernel(w_left_limit, wy, total, k < y_index);
            max_error = max_error.max((g - u[k]).abs());
        }
        Ok(GreenComparison {
            n,
            y,
            rows,
            max_nodal_error,
            max_error,
        })
    }
}
