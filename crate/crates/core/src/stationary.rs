//! Relativistically harmonic functions: Dirichlet problems for `Q w = 0`
//! and a 1D shooting oracle.
//!
//! Two discretizations are offered. [`Scheme::Conservative`] (the default)
//! drives the finite-volume divergence `div_h F_h(e^w)` to zero, so every
//! sub-collection of cells has exactly balanced boundary flux.
//! [`Scheme::Pointwise`] drives the central-difference `Q_h w` to zero. The
//! two agree to second order in `h`. The pointwise stencil is not monotone
//! at large `|Dw|`, and Newton may stall on steep data where the
//! conservative scheme still converges.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{self, BoundaryCondition, Grid, ScalarField};
use crate::newton::{self, NewtonOptions, NewtonRecord};
use crate::operators::ModelParams;
use crate::verify::CheckResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Conservative,
    Pointwise,
}

#[derive(Debug, Clone)]
pub struct StationaryProblem {
    pub grid: Grid,
    /// Dirichlet data in `w` variables.
    pub bc: BoundaryCondition,
    pub initial_guess: ScalarField,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub scheme: Scheme,
}

impl StationaryProblem {
    /// Problem with the discrete Laplace interpolant of `bc` as initial guess.
    pub fn new(grid: Grid, bc: BoundaryCondition) -> Result<Self> {
        let initial_guess = laplace_interpolant(&grid, &bc)?;
        Ok(Self {
            grid,
            bc,
            initial_guess,
            newton_tol: 1e-10,
            newton_max_iter: 100,
            scheme: Scheme::Conservative,
        })
    }

    pub fn with_initial_guess(mut self, guess: ScalarField) -> Self {
        self.initial_guess = guess;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bc.is_dirichlet() {
            return Err(Error::InvalidParameter {
                field: "bc",
                reason: "stationary problems need Dirichlet data".into(),
            });
        }
        self.bc.check_grid(&self.grid)?;
        if self.initial_guess.grid() != &self.grid {
            return Err(Error::Mismatch("initial guess lives on a different grid".into()));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter {
                field: "newton_tol",
                reason: format!("must be positive, got {}", self.newton_tol),
            });
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter {
                field: "newton_max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Solves the discrete Laplace equation with Dirichlet data `bc`, starting
/// from the mean boundary value (so constant data is reproduced exactly).
pub fn laplace_interpolant(grid: &Grid, bc: &BoundaryCondition) -> Result<ScalarField> {
    let BoundaryCondition::Dirichlet(data) = bc else {
        return Err(Error::InvalidParameter {
            field: "bc",
            reason: "stationary problems need Dirichlet data".into(),
        });
    };
    bc.check_grid(grid)?;
    let (sum, count) = data.values().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    let start = vec![sum / count as f64; grid.len()];
    let g = *grid;
    let residual = |w: &[f64]| -> Result<Vec<f64>> {
        let f = ScalarField::new(g, w.to_vec())?;
        Ok(grid::divergence(&grid::heat_face_flux(&f, bc)).into_values())
    };
    // linear problem: one exact solve, tolerance relative to the start
    let r0 = newton::max_norm(&residual(&start)?);
    let opts = NewtonOptions {
        tol: 1e-12 * r0.max(1.0),
        ..NewtonOptions::default()
    };
    let out = newton::solve(grid, start, residual, &opts)?;
    ScalarField::new(*grid, out.solution)
}

/// Discrete residual of `scheme` at `w` (Dirichlet data in `w` variables).
pub fn harmonic_residual(
    w: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
    scheme: Scheme,
) -> Result<ScalarField> {
    match scheme {
        Scheme::Conservative => {
            let u = w.map(f64::exp)?;
            let ubc = bc.map_values(f64::exp);
            Ok(grid::divergence(&grid::face_flux_unchecked(&u, &ubc, params)))
        }
        Scheme::Pointwise => grid::discrete_q(w, bc, params),
    }
}

/// Converged solution with its boundary data and Newton log.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub field: ScalarField,
    pub bc: BoundaryCondition,
    pub scheme: Scheme,
    pub residual: f64,
    /// Tolerance actually enforced.
    pub tolerance: f64,
    pub log: Vec<NewtonRecord>,
}

impl HarmonicSolution {
    pub fn iterations(&self) -> usize {
        self.log.len().saturating_sub(1)
    }

    pub fn log_json(&self) -> serde_json::Value {
        json!({
            "scheme": self.scheme,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "iterations": self.iterations(),
            "log": self.log,
        })
    }

    /// Writes `<stem>.csv` (field) and `<stem>_log.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        self.field.write_csv(&csv)?;
        let log = dir.join(format!("{stem}_log.json"));
        std::fs::write(&log, serde_json::to_string_pretty(&self.log_json())?)?;
        Ok(vec![csv, log])
    }
}

/// Smallest residual resolvable in floating point: the second differences
/// of `u = e^w` carry rounding errors of order `eps · max u / h²`. By the
/// maximum principle `max u` is the largest boundary value of `e^w`.
pub fn roundoff_floor(grid: &Grid, bc: &BoundaryCondition) -> f64 {
    let umax = bc.data_range().map(|(_, hi)| hi.exp()).unwrap_or(1.0).max(1.0);
    let h = grid.h_min();
    8.0 * grid.dim() as f64 * f64::EPSILON * umax / (h * h)
}

/// Damped Newton from the problem's initial guess. Converges when the
/// residual max-norm is at most `max(newton_tol, roundoff_floor)`.
pub fn solve_harmonic(problem: &StationaryProblem, params: &ModelParams) -> Result<HarmonicSolution> {
    problem.validate()?;
    let grid = problem.grid;
    let bc = &problem.bc;
    let scheme = problem.scheme;
    let residual = |w: &[f64]| -> Result<Vec<f64>> {
        let f = ScalarField::new(grid, w.to_vec())?;
        Ok(harmonic_residual(&f, bc, params, scheme)?.into_values())
    };
    let tolerance = problem.newton_tol.max(roundoff_floor(&grid, bc));
    let opts = NewtonOptions {
        tol: tolerance,
        max_iter: problem.newton_max_iter,
        ..NewtonOptions::default()
    };
    let out = newton::solve(&grid, problem.initial_guess.values().to_vec(), residual, &opts)?;
    Ok(HarmonicSolution {
        field: ScalarField::new(grid, out.solution)?,
        bc: bc.clone(),
        scheme,
        residual: out.residual,
        tolerance,
        log: out.log,
    })
}

/// Nodal solution of the 1D reduction `w'' = -p²(1 + p²/c²)`, `p = w'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Profile {
    pub fn initial_slope(&self) -> f64 {
        self.slope[0]
    }

    /// Cubic Hermite interpolation between nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len() - 1;
        let (a, b) = (self.x[0], self.x[n]);
        let h = (b - a) / n as f64;
        let k = (((x - a) / h).floor().max(0.0) as usize).min(n - 1);
        let t = (x - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.w[k]
            + (t3 - 2.0 * t2 + t) * h * self.slope[k]
            + (-2.0 * t3 + 3.0 * t2) * self.w[k + 1]
            + (t3 - t2) * h * self.slope[k + 1]
    }
}

/// RK4 from `(w_left, slope)`; `None` if the slope blows up (downward
/// vertical tangent) before the right end.
fn integrate(a: f64, b: f64, w_left: f64, slope: f64, k: f64, n: usize, keep: bool) -> Option<Profile> {
    let h = (b - a) / n as f64;
    let rhs = |p: f64| -p * p * (1.0 + k * p * p);
    let (mut w, mut p) = (w_left, slope);
    let cap = if keep { n + 1 } else { 1 };
    let mut prof = Profile {
        x: Vec::with_capacity(cap),
        w: Vec::with_capacity(cap),
        slope: Vec::with_capacity(cap),
    };
    let push = |prof: &mut Profile, i: usize, w: f64, p: f64| {
        if keep || i == n {
            prof.x.push(if i == n { b } else { a + i as f64 * h });
            prof.w.push(w);
            prof.slope.push(p);
        }
    };
    push(&mut prof, 0, w, p);
    for i in 1..=n {
        let k1w = p;
        let k1p = rhs(p);
        let k2w = p + 0.5 * h * k1p;
        let k2p = rhs(k2w);
        let k3w = p + 0.5 * h * k2p;
        let k3p = rhs(k3w);
        let k4w = p + h * k3p;
        let k4p = rhs(k4w);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if !(w.is_finite() && p.is_finite()) {
            return None;
        }
        push(&mut prof, i, w, p);
    }
    Some(prof)
}

/// Largest initial slope magnitude tried when bracketing.
pub const SLOPE_LIMIT: f64 = 1e4;

/// Shooting on `[a, b]`: bisection on the initial slope until the right
/// boundary value is hit to 1e-12.
pub fn shoot_1d_on(
    interval: (f64, f64),
    w_left: f64,
    w_right: f64,
    params: &ModelParams,
    n_steps: usize,
) -> Result<Profile> {
    let (a, b) = interval;
    if !(w_left.is_finite() && w_right.is_finite() && a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidParameter {
            field: "w_left/w_right",
            reason: "shooting data and interval must be finite".into(),
        });
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter {
            field: "n_steps",
            reason: "must be at least 1".into(),
        });
    }
    let k = params.inv_c2();
    if w_left == w_right {
        let n = n_steps;
        return Ok(Profile {
            x: (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect(),
            w: vec![w_left; n + 1],
            slope: vec![0.0; n + 1],
        });
    }
    // endpoint value minus target, monotone increasing in the slope; a profile
    // that blows up before b counts as ±inf in the direction of its slope
    let miss = |s: f64| -> f64 {
        integrate(a, b, w_left, s, k, n_steps, false)
            .map(|p| p.w[0] - w_right)
            .unwrap_or(s.signum() * f64::INFINITY)
    };
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    while miss(lo) > 0.0 {
        lo *= 2.0;
        if lo < -SLOPE_LIMIT {
            return Err(Error::Bracket { low: lo, high: hi });
        }
    }
    while miss(hi) < 0.0 {
        hi *= 2.0;
        if hi > SLOPE_LIMIT {
            return Err(Error::Bracket { low: lo, high: hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = miss(mid);
        if m.abs() <= 1e-14 {
            lo = mid;
            hi = mid;
            break;
        }
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if miss(lo).abs() <= miss(hi).abs() { lo } else { hi };
    let prof = integrate(a, b, w_left, best, k, n_steps, true).ok_or(Error::Bracket { low: lo, high: hi })?;
    let mismatch = (prof.w[n_steps] - w_right).abs();
    if mismatch > 1e-12 {
        return Err(Error::Bracket { low: lo, high: hi });
    }
    Ok(prof)
}

/// Shooting on `[0, 1]`.
pub fn shoot_1d(w_left: f64, w_right: f64, params: &ModelParams, n_steps: usize) -> Result<Profile> {
    shoot_1d_on((0.0, 1.0), w_left, w_right, params, n_steps)
}

fn ctx(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Passes if no value leaves the range of the boundary data by more than
/// `10 h²`, or if the field is constant to 1e-12.
pub fn verify_strong_max(w: &ScalarField, bc: &BoundaryCondition) -> CheckResult {
    let h = w.grid().h_min();
    let tolerance = 10.0 * h * h;
    let ex = grid::extrema(w);
    let Some((bmin, bmax)) = bc.data_range() else {
        // NoFlux: only constants qualify
        let spread = ex.max - ex.min;
        return CheckResult::new(
            "strong_max",
            if spread <= 1e-12 { 0.0 } else { spread },
            tolerance,
            ctx(&[("reason", json!("no Dirichlet data"))]),
        );
    };
    let constant = ex.max - ex.min <= 1e-12;
    let violation = if constant {
        0.0
    } else {
        (ex.max - bmax).max(bmin - ex.min).max(0.0)
    };
    CheckResult::new(
        "strong_max",
        violation,
        tolerance,
        ctx(&[
            ("constant", json!(constant)),
            ("field_max", json!(ex.max)),
            ("field_min", json!(ex.min)),
            ("boundary_max", json!(bmax)),
            ("boundary_min", json!(bmin)),
        ]),
    )
}

/// Elliptic comparison on a pair of solutions: if the boundary data are
/// ordered `w ≤ w'` and the residuals are within `residual_tol`, then
/// `w ≤ w'` everywhere up to `10 h² + residual_tol`. Vacuously passes when
/// the premise fails.
pub fn verify_comparison_elliptic(
    w: &HarmonicSolution,
    w_prime: &HarmonicSolution,
    params: &ModelParams,
    residual_tol: f64,
) -> Result<CheckResult> {
    let grid = *w.field.grid();
    if w_prime.field.grid() != &grid {
        return Err(Error::Mismatch("solutions live on different grids".into()));
    }
    let (BoundaryCondition::Dirichlet(a), BoundaryCondition::Dirichlet(b)) = (&w.bc, &w_prime.bc) else {
        return Err(Error::Mismatch("comparison needs Dirichlet data on both solutions".into()));
    };
    let boundary_ordered = a.values().zip(b.values()).all(|(x, y)| x <= y);
    let ra = harmonic_residual(&w.field, &w.bc, params, w.scheme)?;
    let rb = harmonic_residual(&w_prime.field, &w_prime.bc, params, w_prime.scheme)?;
    let residual_ordered = ra
        .values()
        .iter()
        .zip(rb.values())
        .all(|(x, y)| *x >= *y - residual_tol);
    let h = grid.h_min();
    let tolerance = 10.0 * h * h + residual_tol;
    let gap_min = w_prime
        .field
        .values()
        .iter()
        .zip(w.field.values())
        .map(|(p, q)| p - q)
        .fold(f64::INFINITY, f64::min);
    let premise = boundary_ordered && residual_ordered;
    let violation = if premise { (-gap_min).max(0.0) } else { 0.0 };
    Ok(CheckResult::new(
        "comparison_elliptic",
        violation,
        tolerance,
        ctx(&[
            ("premise", json!(premise)),
            ("boundary_ordered", json!(boundary_ordered)),
            ("residual_ordered", json!(residual_ordered)),
            ("min_gap", json!(gap_min)),
        ]),
    ))
}
