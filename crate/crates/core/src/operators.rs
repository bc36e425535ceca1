//! Pointwise continuum operators of the relativistic heat equation.
//!
//! Everything here acts on supplied values and derivatives; nothing knows
//! about meshes. Callers provide gradients and Hessians (analytically in
//! tests, from stencils in [`crate::grid`]).
//!
//! With `s = 1 + |Dw|²/c²` and `w = log u` the main identities are
//!
//! ```text
//! F(u, Du)  = u Du / sqrt(u² + |Du|²/c²)
//! Q_c w     = Δw + |Dw|² - D²w(Dw, Dw) / (c² s)
//! div F(u)  = e^w s^(-1/2) Q_c w
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and numerical constants shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Speed of light, `c > 0`.
    pub c: f64,
    /// Denominator floor used only at the exact point `u = 0, Du = 0`.
    pub eps_guard: f64,
}

pub const DEFAULT_EPS_GUARD: f64 = 1e-300;

/// Default tolerance for [`classify_residual`].
pub const HARMONIC_TOL: f64 = 1e-8;

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps_guard: DEFAULT_EPS_GUARD,
        }
    }
}

impl ModelParams {
    pub fn new(c: f64) -> Result<Self> {
        Self::with_guard(c, DEFAULT_EPS_GUARD)
    }

    pub fn with_guard(c: f64, eps_guard: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                field: "c",
                reason: format!("light speed must be finite and positive, got {c}"),
            });
        }
        if !(eps_guard.is_finite() && (0.0..=1e-10).contains(&eps_guard)) {
            return Err(Error::InvalidParameter {
                field: "eps_guard",
                reason: format!("must lie in [0, 1e-10], got {eps_guard}"),
            });
        }
        Ok(Self { c, eps_guard })
    }

    /// `c⁻²`, which is all the operators actually need.
    #[inline]
    pub fn inv_c2(&self) -> f64 {
        1.0 / (self.c * self.c)
    }
}

/// Value, gradient and (optionally) Hessian of a scalar function at a point.
///
/// Used for both `u` and `w = log u`; the meaning of `value` depends on the
/// caller.
#[derive(Debug, Clone, PartialEq)]
pub struct PointState {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<DMatrix<f64>>,
}

impl PointState {
    pub fn new(value: f64, grad: Vec<f64>, hess: Option<DMatrix<f64>>) -> Result<Self> {
        let state = Self { value, grad, hess };
        state.validate()?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    fn validate(&self) -> Result<()> {
        if !self.value.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidState("non-finite value or gradient".into()));
        }
        if self.grad.is_empty() {
            return Err(Error::InvalidState("empty gradient".into()));
        }
        if let Some(h) = &self.hess {
            let n = self.grad.len();
            if h.nrows() != n || h.ncols() != n {
                return Err(Error::InvalidState(format!(
                    "hessian is {}x{}, gradient has length {n}",
                    h.nrows(),
                    h.ncols()
                )));
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidState("non-finite hessian".into()));
            }
            let scale = h.amax().max(1.0);
            for i in 0..n {
                for j in 0..i {
                    if (h[(i, j)] - h[(j, i)]).abs() > 1e-12 * scale {
                        return Err(Error::InvalidState("hessian is not symmetric".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn hessian(&self) -> Result<&DMatrix<f64>> {
        self.hess
            .as_ref()
            .ok_or_else(|| Error::InvalidState("operator needs a hessian".into()))
    }

    /// Maps a `w`-state to the corresponding `u = e^w` state by the chain rule:
    /// `Du = e^w Dw`, `D²u = e^w (D²w + Dw Dwᵀ)`.
    pub fn exp_of(w: &PointState) -> Result<PointState> {
        w.validate()?;
        let u = w.value.exp();
        let grad = w.grad.iter().map(|g| u * g).collect();
        let hess = w.hess.as_ref().map(|h| {
            let n = w.dim();
            DMatrix::from_fn(n, n, |i, j| u * (h[(i, j)] + w.grad[i] * w.grad[j]))
        });
        PointState::new(u, grad, hess)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidState("non-finite input".into()))
    }
}

/// Normal component of the flux for a face-normal gradient `g_normal` and a
/// full squared gradient `g_sq`. Zero at `u = 0`.
#[inline]
pub(crate) fn flux_kernel(u: f64, g_normal: f64, g_sq: f64, params: &ModelParams) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let den = (u * u + params.inv_c2() * g_sq).sqrt().max(params.eps_guard);
    if den == 0.0 {
        0.0
    } else {
        u * g_normal / den
    }
}

/// Relativistic heat flux `u Du / sqrt(u² + c⁻²|Du|²)`.
///
/// Returns the zero vector at `u = 0`. The magnitude never exceeds `c u`.
pub fn flux(u: f64, grad: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_finite(&[u])?;
    check_finite(grad)?;
    if u < 0.0 {
        return Err(Error::InvalidState(format!("flux needs u >= 0, got {u}")));
    }
    let g_sq: f64 = grad.iter().map(|g| g * g).sum();
    if !g_sq.is_finite() {
        return Err(Error::InvalidState("gradient overflow".into()));
    }
    Ok(grad
        .iter()
        .map(|&g| flux_kernel(u, g, g_sq, params))
        .collect())
}

/// `D²w(Dw, Dw)`, `Δw`, `|Dw|²` for a state with a hessian.
fn quadratic_parts(state: &PointState) -> Result<(f64, f64, f64)> {
    let h = state.hessian()?;
    let p = &state.grad;
    let n = p.len();
    let mut hpp = 0.0;
    let mut lap = 0.0;
    for i in 0..n {
        lap += h[(i, i)];
        for j in 0..n {
            hpp += h[(i, j)] * p[i] * p[j];
        }
    }
    let p_sq = p.iter().map(|v| v * v).sum();
    Ok((hpp, lap, p_sq))
}

/// The log-transformed operator
/// `Q_c w = Δw + |Dw|² - c⁻² D²w(Dw,Dw) / (1 + c⁻²|Dw|²)`.
///
/// Only the gradient and Hessian of `state` enter; its value is ignored.
pub fn q_operator(state: &PointState, params: &ModelParams) -> Result<f64> {
    state.validate()?;
    let (hpp, lap, p_sq) = quadratic_parts(state)?;
    Ok(q_kernel(lap, hpp, p_sq, params.inv_c2()))
}

#[inline]
pub(crate) fn q_kernel(lap: f64, hpp: f64, p_sq: f64, inv_c2: f64) -> f64 {
    lap + p_sq - inv_c2 * hpp / (1.0 + inv_c2 * p_sq)
}

/// Parabolic form: `Q_c w / sqrt(1 + c⁻²|Dw|²)`, so that solutions satisfy
/// `w_t = Q̃ w`.
pub fn qtilde_operator(state: &PointState, params: &ModelParams) -> Result<f64> {
    let q = q_operator(state, params)?;
    let p_sq: f64 = state.grad.iter().map(|v| v * v).sum();
    Ok(q / (1.0 + params.inv_c2() * p_sq).sqrt())
}

/// Pointwise divergence of the flux for a `u`-state, written out directly
/// in `u`, `Du`, `D²u` (no detour through `w`).
pub fn div_flux(state: &PointState, params: &ModelParams) -> Result<f64> {
    state.validate()?;
    let u = state.value;
    if u <= 0.0 {
        return Err(Error::InvalidState(format!(
            "pointwise divergence needs u > 0, got {u}"
        )));
    }
    let (hgg, lap, g_sq) = quadratic_parts(state)?;
    let k = params.inv_c2();
    let d = u * u + k * g_sq;
    // div(u Du) / sqrt(D) - u Du·∇D / (2 D^(3/2)),  ∇D = 2u Du + 2c⁻² D²u Du
    Ok((g_sq + u * lap) / d.sqrt() - u * (u * g_sq + k * hgg) / (d * d.sqrt()))
}

/// Principal-part coefficient matrix `a^{ij}(p) = δ^{ij} - c⁻² pⁱpʲ / (1 + c⁻²|p|²)`.
pub fn principal_coefficients(p: &[f64], params: &ModelParams) -> Result<DMatrix<f64>> {
    check_finite(p)?;
    let k = params.inv_c2();
    let p_sq: f64 = p.iter().map(|v| v * v).sum();
    let n = p.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - k * p[i] * p[j] / (1.0 + k * p_sq)
    }))
}

/// Eigenvalues `(λ_min, λ_max)` of the principal part of `Q_c`.
///
/// `λ_min = 1/(1 + c⁻²|p|²)` in the gradient direction, `λ_max = 1` across
/// it. In one dimension the matrix is the single value `λ_min`, so both
/// entries are equal.
pub fn ellipticity_eigenvalues(p: &[f64], params: &ModelParams) -> Result<(f64, f64)> {
    check_finite(p)?;
    if p.is_empty() {
        return Err(Error::InvalidState("empty gradient".into()));
    }
    let p_sq: f64 = p.iter().map(|v| v * v).sum();
    let lambda = 1.0 / (1.0 + params.inv_c2() * p_sq);
    if p.len() == 1 {
        Ok((lambda, lambda))
    } else {
        Ok((lambda, 1.0))
    }
}

pub fn u_to_w(u: f64) -> Result<f64> {
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::NonPositiveTransform(u));
    }
    Ok(u.ln())
}

pub fn w_to_u(w: f64) -> f64 {
    w.exp()
}

/// Sign class of a residual `div F(u)` or `Q w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Subharmonic,
    Superharmonic,
    Harmonic,
    Indeterminate,
}

/// `residual > tol` is subharmonic, `residual < -tol` superharmonic, and
/// anything in the band harmonic. NaN residuals or a bad tolerance give
/// `Indeterminate`.
pub fn classify_residual(residual: f64, tol: f64) -> Classification {
    if residual.is_nan() || !(tol >= 0.0) {
        return Classification::Indeterminate;
    }
    if residual > tol {
        Classification::Subharmonic
    } else if residual < -tol {
        Classification::Superharmonic
    } else {
        Classification::Harmonic
    }
}
