//! Time integration: the relativistic heat equation (explicit and implicit
//! Euler), plus classical heat and telegraph baselines.
//!
//! Every run uses a uniform step `dt = t_end / ceil(t_end / dt_max)` so that
//! runs with the same configuration visit identical time levels; snapshots
//! are taken at the completed step nearest to each requested time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, BoundaryCondition, Grid, ScalarField};
use crate::newton::{self, NewtonOptions};
use crate::operators::ModelParams;
use crate::report::{EquationTag, RunReport, Snapshot};

pub const DEFAULT_FRONT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ExplicitEuler,
    ImplicitEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStepConfig {
    pub method: Method,
    pub t_end: f64,
    pub cfl_parabolic: f64,
    pub cfl_hyperbolic: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub snapshot_times: Vec<f64>,
    /// Overrides the stable step (still subject to the CFL checks of explicit schemes).
    pub fixed_dt: Option<f64>,
    /// Series sampling stride in steps.
    pub record_every: usize,
    pub front_threshold: f64,
}

impl Default for TimeStepConfig {
    fn default() -> Self {
        Self {
            method: Method::ExplicitEuler,
            t_end: 0.1,
            cfl_parabolic: 0.25,
            cfl_hyperbolic: 0.5,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            snapshot_times: Vec::new(),
            fixed_dt: None,
            record_every: 1,
            front_threshold: DEFAULT_FRONT_THRESHOLD,
        }
    }
}

impl TimeStepConfig {
    pub fn new(method: Method, t_end: f64) -> Self {
        Self {
            method,
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(Error::InvalidParameter { field, reason });
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if !(self.cfl_parabolic > 0.0 && self.cfl_parabolic <= 0.5) {
            return bad("cfl_parabolic", format!("must lie in (0, 0.5], got {}", self.cfl_parabolic));
        }
        if !(self.cfl_hyperbolic > 0.0 && self.cfl_hyperbolic <= 1.0) {
            return bad("cfl_hyperbolic", format!("must lie in (0, 1], got {}", self.cfl_hyperbolic));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return bad("newton_tol", format!("must be positive, got {}", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter", "must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every", "must be at least 1".into());
        }
        if !(self.front_threshold.is_finite() && self.front_threshold > 0.0) {
            return bad("front_threshold", format!("must be positive, got {}", self.front_threshold));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("fixed_dt", format!("must be positive, got {dt}"));
            }
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t <= self.t_end))
        {
            return bad("snapshot_times", format!("{t} lies outside [0, t_end]"));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            ..NewtonOptions::default()
        }
    }
}

/// `min(cfl_p h² / dim, cfl_h h / c)`.
///
/// At fixed `u` the flux is 1-Lipschitz in the gradient, so the parabolic
/// limit uses a unit diffusivity; its `u`-derivative is bounded by `c`,
/// which gives the transport limit.
pub fn stable_dt(grid: &Grid, params: &ModelParams, config: &TimeStepConfig) -> f64 {
    let h = grid.h_min();
    let parabolic = config.cfl_parabolic * h * h / grid.dim() as f64;
    let hyperbolic = config.cfl_hyperbolic * h / params.c;
    parabolic.min(hyperbolic)
}

/// Result of a single step.
#[derive(Debug, Clone)]
pub struct Stepped {
    pub field: ScalarField,
    pub clipped: usize,
    pub worst_undershoot: f64,
    pub newton_iterations: usize,
}

fn clip_negative(values: &mut [f64]) -> (usize, f64) {
    let mut count = 0;
    let mut worst = 0.0f64;
    for v in values.iter_mut() {
        if *v < 0.0 {
            worst = worst.min(*v);
            *v = 0.0;
            count += 1;
        }
    }
    (count, worst)
}

/// Forward Euler: `u + dt · div F(u)`. Negative results are reset to zero
/// and counted.
pub fn step_explicit(
    field: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
    dt: f64,
) -> Result<Stepped> {
    let div = grid::divergence(&grid::face_flux(field, bc, params)?);
    let mut values: Vec<f64> = field
        .values()
        .iter()
        .zip(div.values())
        .map(|(u, d)| u + dt * d)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { time: f64::NAN });
    }
    let (clipped, worst_undershoot) = clip_negative(&mut values);
    Ok(Stepped {
        field: ScalarField::new(*field.grid(), values)?,
        clipped,
        worst_undershoot,
        newton_iterations: 0,
    })
}

/// Backward Euler solved by damped Newton in `w = log u`, so iterates stay
/// positive. Converges when `‖u_new - u - dt div F(u_new)‖_∞ ≤ tol`.
pub fn step_implicit(
    field: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
    dt: f64,
    opts: &NewtonOptions,
) -> Result<Stepped> {
    if let Some(v) = field.values().iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidState(format!(
            "implicit steps need strictly positive data, found {v}"
        )));
    }
    let grid = *field.grid();
    let old = field.values();
    let residual = |w: &[f64]| -> Result<Vec<f64>> {
        let u: Vec<f64> = w.iter().map(|v| v.exp()).collect();
        let uf = ScalarField::new(grid, u)?;
        let div = grid::divergence(&grid::face_flux(&uf, bc, params)?);
        Ok(uf
            .values()
            .iter()
            .zip(old)
            .zip(div.values())
            .map(|((un, uo), d)| un - uo - dt * d)
            .collect())
    };
    let w0: Vec<f64> = old.iter().map(|u| u.ln()).collect();
    let out = newton::solve(&grid, w0, residual, opts)?;
    // an already-converged start keeps the exact input (exp∘ln is not the identity)
    let values = if out.iterations() == 0 {
        old.to_vec()
    } else {
        out.solution.iter().map(|w| w.exp()).collect()
    };
    Ok(Stepped {
        field: ScalarField::new(grid, values)?,
        clipped: 0,
        worst_undershoot: 0.0,
        newton_iterations: out.iterations(),
    })
}

fn plan(t_end: f64, dt_max: f64) -> (usize, f64) {
    let n = ((t_end / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}

/// Rightmost cell center above `threshold` (1D), NaN if none.
pub(crate) fn front_position(field: &ScalarField, threshold: f64) -> f64 {
    let g = field.grid();
    field
        .values()
        .iter()
        .rposition(|v| v.abs() > threshold)
        .map(|i| g.axis_center(0, i))
        .unwrap_or(f64::NAN)
}

struct Recorder {
    report: RunReport,
    record_every: usize,
    snapshot_steps: Vec<usize>,
}

impl Recorder {
    fn new(
        equation: EquationTag,
        params: ModelParams,
        initial: &ScalarField,
        config: &TimeStepConfig,
        steps: usize,
        dt: f64,
    ) -> Self {
        let grid = *initial.grid();
        let mut snapshot_steps: Vec<usize> = config
            .snapshot_times
            .iter()
            .map(|t| ((t / dt).round() as usize).min(steps))
            .chain([0, steps])
            .collect();
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        let report = RunReport {
            equation,
            params,
            grid,
            dt,
            steps,
            times: Vec::new(),
            mass_series: Vec::new(),
            entropy_series: Vec::new(),
            max_series: Vec::new(),
            min_series: Vec::new(),
            front_position_series: (grid.dim() == 1).then(Vec::new),
            front_threshold: config.front_threshold,
            snapshots: Vec::new(),
            global_max: f64::NEG_INFINITY,
            global_min: f64::INFINITY,
            clip_count: 0,
            worst_undershoot: 0.0,
            newton_iterations: 0,
        };
        Self {
            report,
            record_every: config.record_every,
            snapshot_steps,
        }
    }

    fn observe(&mut self, step: usize, field: &ScalarField) {
        let r = &mut self.report;
        let t = step as f64 * r.dt;
        let ex = grid::extrema(field);
        r.global_max = r.global_max.max(ex.max);
        r.global_min = r.global_min.min(ex.min);
        if step.is_multiple_of(self.record_every) || step == r.steps {
            r.times.push(t);
            r.mass_series.push(grid::mass(field));
            r.entropy_series.push(grid::entropy(field).unwrap_or(f64::NAN));
            r.max_series.push(ex.max);
            r.min_series.push(ex.min);
            if let Some(front) = r.front_position_series.as_mut() {
                front.push(front_position(field, r.front_threshold));
            }
        }
        if self.snapshot_steps.binary_search(&step).is_ok() {
            r.snapshots.push(Snapshot {
                time: t,
                field: field.clone(),
            });
        }
    }

    fn absorb(&mut self, s: &Stepped) {
        self.report.clip_count += s.clipped;
        self.report.worst_undershoot = self.report.worst_undershoot.min(s.worst_undershoot);
        self.report.newton_iterations += s.newton_iterations;
    }

    fn finish(self) -> RunReport {
        self.report
    }
}

fn check_bc(initial: &ScalarField, bc: &BoundaryCondition) -> Result<()> {
    bc.check_grid(initial.grid())
}

fn with_time(err: Error, t: f64) -> Error {
    match err {
        Error::BlowUp { .. } => Error::BlowUp { time: t },
        other => other,
    }
}

/// Evolves the relativistic heat equation from `initial`.
pub fn evolve(
    initial: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
    config: &TimeStepConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_bc(initial, bc)?;
    let limit = stable_dt(initial.grid(), params, config);
    let dt_max = match (config.fixed_dt, config.method) {
        (Some(dt), Method::ExplicitEuler) if dt > limit * (1.0 + 1e-12) => {
            return Err(Error::Cfl { dt, limit })
        }
        (Some(dt), _) => dt,
        (None, _) => limit,
    };
    let (steps, dt) = plan(config.t_end, dt_max);
    let opts = config.newton();
    let mut rec = Recorder::new(EquationTag::Relativistic, *params, initial, config, steps, dt);
    let mut u = initial.clone();
    rec.observe(0, &u);
    for step in 1..=steps {
        let s = match config.method {
            Method::ExplicitEuler => step_explicit(&u, bc, params, dt),
            Method::ImplicitEuler => step_implicit(&u, bc, params, dt, &opts),
        }
        .map_err(|e| with_time(e, step as f64 * dt))?;
        rec.absorb(&s);
        u = s.field;
        rec.observe(step, &u);
    }
    Ok(rec.finish())
}

/// Classical heat equation `u_t = Δu` with the standard 3-point / 5-point
/// Laplacian (same ghost-cell boundary treatment).
pub fn evolve_classical_heat(
    initial: &ScalarField,
    bc: &BoundaryCondition,
    config: &TimeStepConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_bc(initial, bc)?;
    let grid = *initial.grid();
    let h = grid.h_min();
    let limit = config.cfl_parabolic * h * h / grid.dim() as f64;
    let dt_max = match (config.fixed_dt, config.method) {
        (Some(dt), Method::ExplicitEuler) if dt > limit * (1.0 + 1e-12) => {
            return Err(Error::Cfl { dt, limit })
        }
        (Some(dt), _) => dt,
        (None, _) => limit,
    };
    let (steps, dt) = plan(config.t_end, dt_max);
    let opts = config.newton();
    let mut rec = Recorder::new(
        EquationTag::ClassicalHeat,
        ModelParams::default(),
        initial,
        config,
        steps,
        dt,
    );
    let mut u = initial.clone();
    rec.observe(0, &u);
    for step in 1..=steps {
        let next = match config.method {
            Method::ExplicitEuler => {
                let div = grid::divergence(&grid::heat_face_flux(&u, bc));
                let values: Vec<f64> = u
                    .values()
                    .iter()
                    .zip(div.values())
                    .map(|(a, d)| a + dt * d)
                    .collect();
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { time: step as f64 * dt });
                }
                ScalarField::new(grid, values)?
            }
            Method::ImplicitEuler => {
                let old = u.values().to_vec();
                let residual = |x: &[f64]| -> Result<Vec<f64>> {
                    let f = ScalarField::new(grid, x.to_vec())?;
                    let div = grid::divergence(&grid::heat_face_flux(&f, bc));
                    Ok(x.iter()
                        .zip(&old)
                        .zip(div.values())
                        .map(|((a, b), d)| a - b - dt * d)
                        .collect())
                };
                let out = newton::solve(&grid, old.clone(), residual, &opts)?;
                rec.report.newton_iterations += out.iterations();
                ScalarField::new(grid, out.solution)?
            }
        };
        u = next;
        rec.observe(step, &u);
    }
    Ok(rec.finish())
}

/// Telegraph equation `c⁻² u_tt + u_t = Δu` by central differences in space
/// and time, with the damping term averaged over the two outer levels:
///
/// ```text
/// (u⁺ - 2u + u⁻)/(c² dt²) + (u⁺ - u⁻)/(2 dt) = Δ_h u
/// ```
///
/// Requires `c dt ≤ h / sqrt(dim)`.
pub fn evolve_telegraph(
    initial_u: &ScalarField,
    initial_ut: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
    config: &TimeStepConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_bc(initial_u, bc)?;
    let grid = *initial_u.grid();
    if initial_ut.grid() != &grid {
        return Err(Error::Mismatch("initial velocity lives on a different grid".into()));
    }
    let h = grid.h_min();
    let dims = (grid.dim() as f64).sqrt();
    let limit = h / (params.c * dims);
    let dt_max = match config.fixed_dt {
        Some(dt) if dt > limit * (1.0 + 1e-12) => return Err(Error::Cfl { dt, limit }),
        Some(dt) => dt,
        None => config.cfl_hyperbolic * limit,
    };
    let (steps, dt) = plan(config.t_end, dt_max);
    let c2 = params.c * params.c;
    let mut rec = Recorder::new(EquationTag::Telegraph, *params, initial_u, config, steps, dt);
    let lap = |f: &ScalarField| grid::divergence(&grid::heat_face_flux(f, bc));

    let mut prev = initial_u.clone();
    rec.observe(0, &prev);
    // Taylor start: u¹ = u⁰ + dt v + dt²/2 · c²(Δu⁰ - v)
    let l0 = lap(&prev);
    let first: Vec<f64> = prev
        .values()
        .iter()
        .zip(initial_ut.values())
        .zip(l0.values())
        .map(|((u, v), l)| u + dt * v + 0.5 * dt * dt * c2 * (l - v))
        .collect();
    let mut cur = ScalarField::new(grid, first).map_err(|_| Error::BlowUp { time: dt })?;
    rec.observe(1, &cur);

    let a = 1.0 / (c2 * dt * dt);
    let b = 1.0 / (2.0 * dt);
    for step in 2..=steps {
        let l = lap(&cur);
        let next: Vec<f64> = cur
            .values()
            .iter()
            .zip(prev.values())
            .zip(l.values())
            .map(|((u, um), lv)| (lv + a * (2.0 * u - um) + b * um) / (a + b))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: step as f64 * dt });
        }
        prev = std::mem::replace(&mut cur, ScalarField::new(grid, next)?);
        rec.observe(step, &cur);
    }
    Ok(rec.finish())
}
