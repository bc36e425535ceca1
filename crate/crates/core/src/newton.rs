//! Damped Newton iteration for cell-local stencil residuals.
//!
//! Every residual handled here couples a cell only to its 3×3 (2D) or
//! 3-point (1D) neighbourhood, so the Jacobian is banded and can be built
//! column-group by column-group: cells sharing a colour `(ix mod 3, iy mod 3)`
//! never touch the same residual row, and one perturbed evaluation per colour
//! recovers all their columns at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::BandMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

/// One row of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonRecord {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub residual: f64,
    pub log: Vec<NewtonRecord>,
}

impl NewtonOutcome {
    pub fn iterations(&self) -> usize {
        self.log.len().saturating_sub(1)
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

/// Finite-difference Jacobian of a stencil residual via 3-colouring per axis.
pub(crate) fn stencil_jacobian<F>(grid: &Grid, x: &[f64], r0: &[f64], residual: &F) -> Result<BandMatrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = grid.len();
    let nx = grid.n(0);
    let two_d = grid.dim() == 2;
    let bw = if two_d { nx + 1 } else { 1 };
    let mut jac = BandMatrix::zeros(n, bw, bw);
    let colours = if two_d { 9 } else { 3 };
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut xp = x.to_vec();
    let mut steps = vec![0.0; n];
    for colour in 0..colours {
        let members: Vec<usize> = (0..n)
            .filter(|&j| {
                let (ix, iy) = grid.cell_indices(j);
                (ix % 3) + 3 * (iy % 3) == colour
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        for &j in &members {
            let step = sqrt_eps * x[j].abs().max(1.0);
            // exact representable increment
            let xj = x[j] + step;
            steps[j] = xj - x[j];
            xp[j] = xj;
        }
        let rp = residual(&xp)?;
        for &j in &members {
            let (ix, iy) = grid.cell_indices(j);
            let xs = ix.saturating_sub(1)..=(ix + 1).min(nx - 1);
            let ys = if two_d {
                iy.saturating_sub(1)..=(iy + 1).min(grid.n(1) - 1)
            } else {
                0..=0
            };
            for ry in ys {
                for rx in xs.clone() {
                    let i = grid.index(rx, ry);
                    jac.set(i, j, (rp[i] - r0[i]) / steps[j]);
                }
            }
            xp[j] = x[j];
        }
    }
    Ok(jac)
}

/// Damped Newton on a stencil residual. The step is halved until the
/// max-norm residual decreases (at most `max_halvings` times).
pub fn solve<F>(grid: &Grid, initial: Vec<f64>, residual: F, opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = initial;
    let mut r = residual(&x)?;
    let mut norm = max_norm(&r);
    let mut log = vec![NewtonRecord {
        iteration: 0,
        residual: norm,
        damping: 0.0,
    }];
    let history = |log: &[NewtonRecord]| log.iter().map(|l| l.residual).collect::<Vec<_>>();
    for iteration in 1..=opts.max_iter {
        if norm <= opts.tol {
            break;
        }
        let jac = stencil_jacobian(grid, &x, &r, &residual)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = jac.solve(&neg)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            if let Ok(rt) = residual(&trial) {
                let nt = max_norm(&rt);
                if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, rt, nt)) => {
                x = xt;
                r = rt;
                norm = nt;
                log.push(NewtonRecord {
                    iteration,
                    residual: norm,
                    damping: lambda,
                });
            }
            None => {
                return Err(Error::NewtonDiverged {
                    iterations: iteration,
                    residual: norm,
                    history: history(&log),
                })
            }
        }
    }
    if norm > opts.tol {
        return Err(Error::NewtonDiverged {
            iterations: opts.max_iter,
            residual: norm,
            history: history(&log),
        });
    }
    Ok(NewtonOutcome {
        solution: x,
        residual: norm,
        log,
    })
}
