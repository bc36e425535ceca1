//! Uniform cell-centered meshes, conservative stencils and integral diagnostics.
//!
//! Cells are stored x-fastest: `idx = iy * nx + ix`. Faces normal to x are
//! stored as `iy * (nx + 1) + i` with `i = 0..=nx` (face `i` sits between
//! cells `i - 1` and `i`); faces normal to y as `j * nx + ix` with
//! `j = 0..=ny`.
//!
//! Boundary data enters through one layer of ghost cells. Dirichlet ghosts
//! are the linear extrapolation `2 g - u` through the face value `g`;
//! no-flux ghosts mirror the interior cell. Corner ghosts (2D) use bilinear
//! extrapolation from their three neighbours.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{flux_kernel, q_kernel, ModelParams};

pub const MIN_CELLS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    lower: [f64; 2],
    upper: [f64; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, extent: (f64, f64)) -> Result<Self> {
        Self::build(1, [n, 1], [extent.0, 0.0], [extent.1, 1.0])
    }

    pub fn new_2d(n: [usize; 2], x_extent: (f64, f64), y_extent: (f64, f64)) -> Result<Self> {
        Self::build(2, n, [x_extent.0, y_extent.0], [x_extent.1, y_extent.1])
    }

    /// Unit interval or unit square with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        match dim {
            1 => Self::new_1d(n, (0.0, 1.0)),
            2 => Self::new_2d([n, n], (0.0, 1.0), (0.0, 1.0)),
            _ => Err(Error::InvalidParameter {
                field: "dim",
                reason: format!("only 1 or 2 supported, got {dim}"),
            }),
        }
    }

    fn build(dim: usize, n: [usize; 2], lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        let mut h = [1.0; 2];
        for axis in 0..dim {
            if n[axis] < MIN_CELLS {
                return Err(Error::InvalidParameter {
                    field: "n",
                    reason: format!("need at least {MIN_CELLS} cells per axis, got {}", n[axis]),
                });
            }
            if !(lower[axis].is_finite() && upper[axis].is_finite() && upper[axis] > lower[axis])
            {
                return Err(Error::InvalidParameter {
                    field: "extent",
                    reason: format!("bad bounds [{}, {}]", lower[axis], upper[axis]),
                });
            }
            h[axis] = (upper[axis] - lower[axis]) / n[axis] as f64;
        }
        Ok(Self {
            dim,
            n,
            lower,
            upper,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    /// Smallest spacing over the active axes.
    pub fn h_min(&self) -> f64 {
        self.h[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n[0] + ix
    }

    #[inline]
    pub fn cell_indices(&self, idx: usize) -> (usize, usize) {
        (idx % self.n[0], idx / self.n[0])
    }

    /// Coordinate of cell center `i` along `axis`.
    #[inline]
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i as f64 + 0.5) * self.h[axis]
    }

    /// Cell center; the second component is meaningless in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.cell_indices(idx);
        [self.axis_center(0, ix), self.axis_center(1, iy)]
    }

    pub fn is_boundary_cell(&self, idx: usize) -> bool {
        let (ix, iy) = self.cell_indices(idx);
        let on_x = ix == 0 || ix + 1 == self.n[0];
        let on_y = self.dim == 2 && (iy == 0 || iy + 1 == self.n[1]);
        on_x || on_y
    }

    /// Index of the cell containing `point`, clamped to the grid.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let mut ij = [0usize; 2];
        for axis in 0..self.dim {
            let x = *point.get(axis)?;
            if !(x >= self.lower[axis] && x <= self.upper[axis]) {
                return None;
            }
            let k = ((x - self.lower[axis]) / self.h[axis]).floor() as usize;
            ij[axis] = k.min(self.n[axis] - 1);
        }
        Some(self.index(ij[0], ij[1]))
    }

    /// Number of faces normal to `axis`.
    pub fn face_count(&self, axis: usize) -> usize {
        if axis >= self.dim {
            return 0;
        }
        match axis {
            0 => (self.n[0] + 1) * self.n[1],
            _ => self.n[0] * (self.n[1] + 1),
        }
    }

    /// Number of boundary faces on each side, ordered x-low, x-high, y-low, y-high.
    pub fn side_lengths(&self) -> [usize; 4] {
        if self.dim == 1 {
            [1, 1, 0, 0]
        } else {
            [self.n[1], self.n[1], self.n[0], self.n[0]]
        }
    }

    /// Center of boundary face `k` on `side` (same ordering as [`Grid::side_lengths`]).
    pub fn boundary_face_center(&self, side: usize, k: usize) -> [f64; 2] {
        match side {
            0 => [self.lower[0], self.axis_center(1, k)],
            1 => [self.upper[0], self.axis_center(1, k)],
            2 => [self.axis_center(0, k), self.lower[1]],
            _ => [self.axis_center(0, k), self.upper[1]],
        }
    }
}

/// Cell-centered data on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite value in cell {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `max |a - b|` over cells.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes the snapshot CSV: header `x[,y],value`, one row per cell in
    /// storage order, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48);
        out.push_str(if self.grid.dim == 1 { "x,value\n" } else { "x,y,value\n" });
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.center(i);
            if self.grid.dim == 1 {
                let _ = writeln!(out, "{},{}", fmt17(c[0]), fmt17(*v));
            } else {
                let _ = writeln!(out, "{},{},{}", fmt17(c[0]), fmt17(c[1]), fmt17(*v));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Reads a snapshot CSV back onto `grid`. Coordinates are checked
    /// against the cell centers.
    pub fn from_csv(grid: Grid, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().trim();
        let expected = if grid.dim == 1 { "x,value" } else { "x,y,value" };
        if header != expected {
            return Err(Error::Mismatch(format!(
                "csv header `{header}`, expected `{expected}`"
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Mismatch(format!("csv row {row}: {e}")))?;
            if cols.len() != grid.dim + 1 || row >= grid.len() {
                return Err(Error::Mismatch(format!("csv row {row} has wrong shape")));
            }
            let c = grid.center(row);
            for axis in 0..grid.dim {
                if (cols[axis] - c[axis]).abs() > 1e-9 * grid.h[axis].max(1.0) {
                    return Err(Error::Mismatch(format!(
                        "csv row {row} coordinate {} does not match cell center {}",
                        cols[axis], c[axis]
                    )));
                }
            }
            values.push(cols[grid.dim]);
        }
        Self::new(grid, values)
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Dirichlet face values per boundary side (x-low, x-high, y-low, y-high).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletData {
    sides: [Vec<f64>; 4],
}

impl DirichletData {
    pub fn side(&self, side: usize) -> &[f64] {
        &self.sides[side]
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.sides.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    NoFlux,
    Dirichlet(DirichletData),
}

impl BoundaryCondition {
    /// Dirichlet data with explicit per-side values (lengths from
    /// [`Grid::side_lengths`]).
    pub fn dirichlet(grid: &Grid, sides: [Vec<f64>; 4]) -> Result<Self> {
        let lens = grid.side_lengths();
        for (s, side) in sides.iter().enumerate() {
            if side.len() != lens[s] {
                return Err(Error::Mismatch(format!(
                    "boundary side {s} has {} values, expected {}",
                    side.len(),
                    lens[s]
                )));
            }
            if side.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: "dirichlet",
                    reason: "boundary values must be finite".into(),
                });
            }
        }
        Ok(Self::Dirichlet(DirichletData { sides }))
    }

    pub fn dirichlet_uniform(grid: &Grid, value: f64) -> Result<Self> {
        Self::dirichlet_fn(grid, |_| value)
    }

    /// Dirichlet data sampled at boundary face centers.
    pub fn dirichlet_fn(grid: &Grid, g: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let lens = grid.side_lengths();
        let sides = std::array::from_fn(|s| {
            (0..lens[s])
                .map(|k| g(grid.boundary_face_center(s, k)))
                .collect()
        });
        Self::dirichlet(grid, sides)
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Self::Dirichlet(_))
    }

    /// `(min, max)` of the Dirichlet data, `None` for no-flux.
    pub fn data_range(&self) -> Option<(f64, f64)> {
        match self {
            Self::NoFlux => None,
            Self::Dirichlet(d) => Some(d.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })),
        }
    }

    /// Applies `f` to every Dirichlet value (e.g. `exp` to move data from w to u).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        match self {
            Self::NoFlux => Self::NoFlux,
            Self::Dirichlet(d) => Self::Dirichlet(DirichletData {
                sides: std::array::from_fn(|s| d.sides[s].iter().map(|&v| f(v)).collect()),
            }),
        }
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if let Self::Dirichlet(d) = self {
            let lens = grid.side_lengths();
            for s in 0..4 {
                if d.sides[s].len() != lens[s] {
                    return Err(Error::Mismatch(
                        "boundary data does not match the grid".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        if let Self::Dirichlet(d) = self {
            if let Some(v) = d.values().find(|v| *v <= 0.0) {
                return Err(Error::InvalidParameter {
                    field: "dirichlet",
                    reason: format!("density boundary values must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Field values with one ghost layer per active axis.
pub(crate) struct Padded {
    /// Padded width along x.
    pub wx: usize,
    pub data: Vec<f64>,
}

impl Padded {
    #[inline]
    pub fn at(&self, px: usize, py: usize) -> f64 {
        self.data[py * self.wx + px]
    }

    pub fn build(field: &ScalarField, bc: &BoundaryCondition) -> Self {
        let g = field.grid;
        let nx = g.n[0];
        let v = &field.values;
        if g.dim == 1 {
            let mut data = Vec::with_capacity(nx + 2);
            let (lo, hi) = match bc {
                BoundaryCondition::NoFlux => (v[0], v[nx - 1]),
                BoundaryCondition::Dirichlet(d) => {
                    (2.0 * d.sides[0][0] - v[0], 2.0 * d.sides[1][0] - v[nx - 1])
                }
            };
            data.push(lo);
            data.extend_from_slice(v);
            data.push(hi);
            return Self {
                wx: nx + 2,
                data,
            };
        }
        let ny = g.n[1];
        let wx = nx + 2;
        let mut data = vec![0.0; wx * (ny + 2)];
        for iy in 0..ny {
            let row = &v[iy * nx..(iy + 1) * nx];
            data[(iy + 1) * wx + 1..(iy + 1) * wx + 1 + nx].copy_from_slice(row);
        }
        let ghost = |side: usize, k: usize, inner: f64| match bc {
            BoundaryCondition::NoFlux => inner,
            BoundaryCondition::Dirichlet(d) => 2.0 * d.sides[side][k] - inner,
        };
        for iy in 0..ny {
            let py = iy + 1;
            data[py * wx] = ghost(0, iy, v[iy * nx]);
            data[py * wx + nx + 1] = ghost(1, iy, v[iy * nx + nx - 1]);
        }
        for ix in 0..nx {
            let px = ix + 1;
            data[px] = ghost(2, ix, v[ix]);
            data[(ny + 1) * wx + px] = ghost(3, ix, v[(ny - 1) * nx + ix]);
        }
        // bilinear corners
        let at = |d: &Vec<f64>, x: usize, y: usize| d[y * wx + x];
        let c00 = at(&data, 0, 1) + at(&data, 1, 0) - at(&data, 1, 1);
        let c10 = at(&data, nx + 1, 1) + at(&data, nx, 0) - at(&data, nx, 1);
        let c01 = at(&data, 0, ny) + at(&data, 1, ny + 1) - at(&data, 1, ny);
        let c11 = at(&data, nx + 1, ny) + at(&data, nx, ny + 1) - at(&data, nx, ny);
        data[0] = c00;
        data[nx + 1] = c10;
        data[(ny + 1) * wx] = c01;
        data[(ny + 1) * wx + nx + 1] = c11;
        Self { wx, data }
    }
}

/// Normal fluxes on every face, per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes {
    grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceFluxes {
    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.face_count(0) || y.len() != grid.face_count(1) {
            return Err(Error::Mismatch("face flux arrays have the wrong length".into()));
        }
        Ok(Self { grid, x, y })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    /// Net outward flux through the domain boundary (times face area).
    pub fn net_boundary_flux(&self) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.n[0], g.n[1]);
        let ax = if g.dim == 2 { g.h[1] } else { 1.0 };
        let mut total = 0.0;
        for iy in 0..ny {
            total += (self.x[iy * (nx + 1) + nx] - self.x[iy * (nx + 1)]) * ax;
        }
        if g.dim == 2 {
            for ix in 0..nx {
                total += (self.y[ny * nx + ix] - self.y[ix]) * g.h[0];
            }
        }
        total
    }
}

/// Normal gradient `(u_R - u_L) / h` on interior faces normal to `axis`.
///
/// In 1D this has `n - 1` entries; in 2D the faces are listed row by row,
/// skipping the two boundary faces of each row (or column).
pub fn face_gradient(field: &ScalarField, axis: usize) -> Vec<f64> {
    let g = field.grid;
    let (nx, ny) = (g.n[0], g.n[1]);
    let v = &field.values;
    let mut out = Vec::new();
    if axis == 0 {
        for iy in 0..ny {
            for i in 1..nx {
                out.push((v[iy * nx + i] - v[iy * nx + i - 1]) / g.h[0]);
            }
        }
    } else if g.dim == 2 {
        for j in 1..ny {
            for ix in 0..nx {
                out.push((v[j * nx + ix] - v[(j - 1) * nx + ix]) / g.h[1]);
            }
        }
    }
    out
}

fn check_density(field: &ScalarField) -> Result<()> {
    match field.values.iter().position(|&v| v < 0.0) {
        Some(cell) => Err(Error::NegativeDensity {
            cell,
            value: field.values[cell],
        }),
        None => Ok(()),
    }
}

/// Face fluxes of the relativistic heat flux with arithmetic-mean face
/// densities. No-flux boundary faces carry exactly zero.
pub fn face_flux(
    field: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<FaceFluxes> {
    check_density(field)?;
    bc.check_grid(&field.grid)?;
    bc.check_positive()?;
    Ok(face_flux_unchecked(field, bc, params))
}

/// Generic face assembly: `f(u_face, g_normal, g_sq)` on each face.
pub(crate) fn assemble_faces(
    field: &ScalarField,
    bc: &BoundaryCondition,
    f: impl Fn(f64, f64, f64) -> f64,
) -> FaceFluxes {
    let g = field.grid;
    let (nx, ny) = (g.n[0], g.n[1]);
    let p = Padded::build(field, bc);
    let no_flux = !bc.is_dirichlet();
    let (hx, hy) = (g.h[0], g.h[1]);
    let mut fx = vec![0.0; g.face_count(0)];
    let mut fy = vec![0.0; g.face_count(1)];
    if g.dim == 1 {
        for i in 0..=nx {
            if no_flux && (i == 0 || i == nx) {
                continue;
            }
            let (l, r) = (p.data[i], p.data[i + 1]);
            let gn = (r - l) / hx;
            fx[i] = f(0.5 * (l + r), gn, gn * gn);
        }
        return FaceFluxes {
            grid: g,
            x: fx,
            y: fy,
        };
    }
    for iy in 0..ny {
        let py = iy + 1;
        for i in 0..=nx {
            if no_flux && (i == 0 || i == nx) {
                continue;
            }
            let (l, r) = (p.at(i, py), p.at(i + 1, py));
            let gn = (r - l) / hx;
            let gt = (p.at(i, py + 1) - p.at(i, py - 1) + p.at(i + 1, py + 1) - p.at(i + 1, py - 1))
                / (4.0 * hy);
            fx[iy * (nx + 1) + i] = f(0.5 * (l + r), gn, gn * gn + gt * gt);
        }
    }
    for j in 0..=ny {
        if no_flux && (j == 0 || j == ny) {
            continue;
        }
        for ix in 0..nx {
            let px = ix + 1;
            let (l, r) = (p.at(px, j), p.at(px, j + 1));
            let gn = (r - l) / hy;
            let gt = (p.at(px + 1, j) - p.at(px - 1, j) + p.at(px + 1, j + 1) - p.at(px - 1, j + 1))
                / (4.0 * hx);
            fy[j * nx + ix] = f(0.5 * (l + r), gn, gn * gn + gt * gt);
        }
    }
    FaceFluxes {
        grid: g,
        x: fx,
        y: fy,
    }
}

pub(crate) fn face_flux_unchecked(
    field: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> FaceFluxes {
    assemble_faces(field, bc, |u, gn, gsq| flux_kernel(u.max(0.0), gn, gsq, params))
}

/// Classical heat flux `Du` on faces, same ghost treatment.
pub(crate) fn heat_face_flux(field: &ScalarField, bc: &BoundaryCondition) -> FaceFluxes {
    assemble_faces(field, bc, |_, gn, _| gn)
}

/// Per-cell discrete divergence `Σ_axes (F_out - F_in) / h`.
pub fn divergence(fluxes: &FaceFluxes) -> ScalarField {
    let g = fluxes.grid;
    let (nx, ny) = (g.n[0], g.n[1]);
    let mut out = vec![0.0; g.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let fxr = fluxes.x[iy * (nx + 1) + ix + 1];
            let fxl = fluxes.x[iy * (nx + 1) + ix];
            let mut d = (fxr - fxl) / g.h[0];
            if g.dim == 2 {
                d += (fluxes.y[(iy + 1) * nx + ix] - fluxes.y[iy * nx + ix]) / g.h[1];
            }
            out[iy * nx + ix] = d;
        }
    }
    ScalarField { grid: g, values: out }
}

/// Central-difference evaluation of `Q_c w` in every cell.
///
/// Boundary cells use the ghost layer; for Dirichlet data the ghost
/// extrapolation keeps linear functions exact.
pub fn discrete_q(
    w_field: &ScalarField,
    bc: &BoundaryCondition,
    params: &ModelParams,
) -> Result<ScalarField> {
    bc.check_grid(&w_field.grid)?;
    let g = w_field.grid;
    let p = Padded::build(w_field, bc);
    let k = params.inv_c2();
    let (nx, ny) = (g.n[0], g.n[1]);
    let (hx, hy) = (g.h[0], g.h[1]);
    let mut out = vec![0.0; g.len()];
    if g.dim == 1 {
        for i in 0..nx {
            let (l, c, r) = (p.data[i], p.data[i + 1], p.data[i + 2]);
            let px = (r - l) / (2.0 * hx);
            let wxx = (r - 2.0 * c + l) / (hx * hx);
            out[i] = q_kernel(wxx, wxx * px * px, px * px, k);
        }
    } else {
        for iy in 0..ny {
            for ix in 0..nx {
                let (cx, cy) = (ix + 1, iy + 1);
                let c = p.at(cx, cy);
                let (e, w) = (p.at(cx + 1, cy), p.at(cx - 1, cy));
                let (n, s) = (p.at(cx, cy + 1), p.at(cx, cy - 1));
                let px = (e - w) / (2.0 * hx);
                let py = (n - s) / (2.0 * hy);
                let wxx = (e - 2.0 * c + w) / (hx * hx);
                let wyy = (n - 2.0 * c + s) / (hy * hy);
                let wxy = (p.at(cx + 1, cy + 1) - p.at(cx + 1, cy - 1) - p.at(cx - 1, cy + 1)
                    + p.at(cx - 1, cy - 1))
                    / (4.0 * hx * hy);
                let hpp = wxx * px * px + 2.0 * wxy * px * py + wyy * py * py;
                out[iy * nx + ix] = q_kernel(wxx + wyy, hpp, px * px + py * py, k);
            }
        }
    }
    ScalarField::new(g, out)
}

pub fn mass(field: &ScalarField) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_volume()
}

/// Boltzmann entropy `Σ u log u · vol` with `0 log 0 = 0`.
pub fn entropy(field: &ScalarField) -> Result<f64> {
    check_density(field)?;
    Ok(field
        .values
        .iter()
        .map(|&u| if u > 0.0 { u * u.ln() } else { 0.0 })
        .sum::<f64>()
        * field.grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub argmin: usize,
    pub argmax: usize,
}

/// First occurrence wins on ties.
pub fn extrema(field: &ScalarField) -> Extrema {
    let mut e = Extrema {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: 0,
        argmax: 0,
    };
    for (i, &v) in field.values.iter().enumerate() {
        if v < e.min {
            e.min = v;
            e.argmin = i;
        }
        if v > e.max {
            e.max = v;
            e.argmax = i;
        }
    }
    e
}

/// Cells whose centers lie within `radius` of `center` (stair-step ball).
pub fn ball_cells(grid: &Grid, center: &[f64], radius: f64) -> Result<Vec<usize>> {
    if center.len() < grid.dim || !(radius > 0.0) {
        return Err(Error::InvalidParameter {
            field: "ball",
            reason: "center must match the grid dimension and radius must be positive".into(),
        });
    }
    for axis in 0..grid.dim {
        if center[axis] - radius < grid.lower[axis] || center[axis] + radius > grid.upper[axis] {
            return Err(Error::BallOutsideDomain);
        }
    }
    let cells: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let c = grid.center(i);
            let d2: f64 = (0..grid.dim).map(|a| (c[a] - center[a]).powi(2)).sum();
            d2 <= radius * radius
        })
        .collect();
    if cells.iter().any(|&i| grid.is_boundary_cell(i)) {
        return Err(Error::BallOutsideDomain);
    }
    Ok(cells)
}

/// Outward flux through the stair-step boundary of the discrete ball,
/// `Σ_{faces ∂B} F·ν · area`. Equal to the sum of the discrete divergence
/// over the ball times the cell volume.
pub fn flux_balance_sphere(
    field: &ScalarField,
    center: &[f64],
    radius: f64,
    params: &ModelParams,
) -> Result<f64> {
    let grid = field.grid;
    let cells = ball_cells(&grid, center, radius)?;
    check_density(field)?;
    // the ball avoids boundary cells, so the boundary treatment is irrelevant
    let fluxes = face_flux_unchecked(field, &BoundaryCondition::NoFlux, params);
    let mut inside = vec![false; grid.len()];
    for &i in &cells {
        inside[i] = true;
    }
    let (nx, _) = (grid.n[0], grid.n[1]);
    let area_x = if grid.dim == 2 { grid.h[1] } else { 1.0 };
    let area_y = grid.h[0];
    let mut total = 0.0;
    for &i in &cells {
        let (ix, iy) = grid.cell_indices(i);
        if !inside[i + 1] {
            total += fluxes.x[iy * (nx + 1) + ix + 1] * area_x;
        }
        if !inside[i - 1] {
            total -= fluxes.x[iy * (nx + 1) + ix] * area_x;
        }
        if grid.dim == 2 {
            if !inside[i + nx] {
                total += fluxes.y[(iy + 1) * nx + ix] * area_y;
            }
            if !inside[i - nx] {
                total -= fluxes.y[iy * nx + ix] * area_y;
            }
        }
    }
    Ok(total)
}
