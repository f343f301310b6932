//! Cell-centered rectangular grids, scalar and face fields, and the
//! zero-flux finite-volume operators built on them.
//!
//! Cells are stored row-major: cell `(i, j)` with `i` along x lives at
//! `j * nx + i` and has its center at `((i + ½) hx, (j + ½) hy)`.
//! Every operator treats the boundary through mirror ghosts, so the flux
//! through each boundary face is exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centered grid on `[0, lx] × [0, ly]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    pub area: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            area: lx * ly,
        })
    }

    /// Unit square with `n × n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }
}

/// One value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Mirror image across the vertical midline `x = lx / 2`.
    pub fn reflect_x(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.values[g.idx(i, j)] = self.values[g.idx(g.nx - 1 - i, j)];
            }
        }
        out
    }

    /// Mirror image across the horizontal midline `y = ly / 2`.
    pub fn reflect_y(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.values[g.idx(i, j)] = self.values[g.idx(i, g.ny - 1 - j)];
            }
        }
        out
    }
}

/// Values living on cell faces.
///
/// `x` holds the `(nx + 1) × ny` faces normal to x, `y` the `nx × (ny + 1)`
/// faces normal to y. Entries on the domain boundary are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FluxField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Face between cells `(i - 1, j)` and `(i, j)`, `i ∈ 0..=nx`.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx + 1) + i]
    }

    /// Face between cells `(i, j - 1)` and `(i, j)`, `j ∈ 0..=ny`.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx + i]
    }

    pub fn x_faces(&self) -> &[f64] {
        &self.x
    }

    pub fn y_faces(&self) -> &[f64] {
        &self.y
    }

    pub fn boundary_is_zero(&self) -> bool {
        let g = self.grid;
        (0..g.ny).all(|j| self.x_face(0, j) == 0.0 && self.x_face(g.nx, j) == 0.0)
            && (0..g.nx).all(|i| self.y_face(i, 0) == 0.0 && self.y_face(i, g.ny) == 0.0)
    }

    pub fn negate(&mut self) {
        self.x
            .iter_mut()
            .chain(self.y.iter_mut())
            .for_each(|v| *v = -*v);
    }

    /// Largest absolute face value.
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .fold(0.0, |m, v: &f64| m.max(v.abs()))
    }

    /// Applies `f(left, right, face)` to every interior face; boundary faces stay zero.
    fn build(grid: Grid, cells: &[f64], f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let (nx, ny) = (grid.nx, grid.ny);
        for j in 0..ny {
            let row = &cells[j * nx..(j + 1) * nx];
            let base = j * (nx + 1);
            for i in 1..nx {
                out.x[base + i] = f(row[i - 1], row[i], grid.hx);
            }
        }
        for j in 1..ny {
            let below = &cells[(j - 1) * nx..j * nx];
            let above = &cells[j * nx..(j + 1) * nx];
            let base = j * nx;
            for i in 0..nx {
                out.y[base + i] = f(below[i], above[i], grid.hy);
            }
        }
        out
    }
}

/// Averaging rule for the transported density on a face.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceAverage {
    /// Arithmetic mean of the two adjacent cells.
    #[default]
    Central,
    /// Donor-cell value chosen by the sign of the drift.
    Upwind,
}

/// Two-point difference across every interior face divided by the cell width.
pub fn face_gradient(f: &ScalarField) -> FluxField {
    FluxField::build(f.grid, &f.values, |l, r, h| (r - l) / h)
}

/// Face gradient of `log v`, computed as `(v_r - v_l) / (h · (v_l + v_r)/2)`.
///
/// This is the drift `∇v / v` of the original formulation evaluated with an
/// arithmetic-mean denominator.
pub fn face_log_gradient(v: &ScalarField) -> FluxField {
    FluxField::build(v.grid, &v.values, |l, r, h| 2.0 * (r - l) / (h * (l + r)))
}

/// Discrete divergence of a face field.
pub fn divergence(flux: &FluxField) -> ScalarField {
    let g = flux.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut out = Vec::with_capacity(g.len());
    for j in 0..ny {
        let xrow = &flux.x[j * (nx + 1)..(j + 1) * (nx + 1)];
        let ylow = &flux.y[j * nx..(j + 1) * nx];
        let yhigh = &flux.y[(j + 1) * nx..(j + 2) * nx];
        for i in 0..nx {
            out.push((xrow[i + 1] - xrow[i]) / g.hx + (yhigh[i] - ylow[i]) / g.hy);
        }
    }
    ScalarField {
        grid: g,
        values: out,
    }
}

/// Five-point Laplacian with zero-flux faces.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    divergence(&face_gradient(f))
}

/// `χ ∇·(u ∇w)` in conservative flux form with central face averages.
pub fn div_chemotaxis_flux(u: &ScalarField, w: &ScalarField, chi: f64) -> ScalarField {
    div_drift_flux(u, &face_gradient(w), chi, FaceAverage::Central)
}

/// `χ ∇·(ū g)` for a prescribed face field `g`.
///
/// The drift velocity of `u` is `-χ g`, so under [`FaceAverage::Upwind`] the
/// donor cell on a face with `g > 0` is the right/upper one.
pub fn div_drift_flux(u: &ScalarField, g: &FluxField, chi: f64, avg: FaceAverage) -> ScalarField {
    let grid = u.grid;
    debug_assert_eq!(grid, g.grid);
    let (nx, ny) = (grid.nx, grid.ny);
    let ubar = |l: f64, r: f64, gf: f64| match avg {
        FaceAverage::Central => 0.5 * (l + r),
        FaceAverage::Upwind => {
            if gf > 0.0 {
                r
            } else {
                l
            }
        }
    };
    let mut flux = FluxField::zeros(grid);
    for j in 0..ny {
        let row = &u.values[j * nx..(j + 1) * nx];
        let base = j * (nx + 1);
        for i in 1..nx {
            let gf = g.x[base + i];
            flux.x[base + i] = chi * ubar(row[i - 1], row[i], gf) * gf;
        }
    }
    for j in 1..ny {
        let below = &u.values[(j - 1) * nx..j * nx];
        let above = &u.values[j * nx..(j + 1) * nx];
        let base = j * nx;
        for i in 0..nx {
            let gf = g.y[base + i];
            flux.y[base + i] = chi * ubar(below[i], above[i], gf) * gf;
        }
    }
    divergence(&flux)
}

/// Compensated (Neumaier) sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Midpoint quadrature `Σ f_i · hx · hy`.
pub fn integrate(f: &ScalarField) -> f64 {
    compensated_sum(f.values.iter().copied()) * f.grid.cell_area()
}

/// Midpoint quadrature of `g(f_i)`.
pub fn integrate_with(f: &ScalarField, g: impl Fn(f64) -> f64) -> f64 {
    compensated_sum(f.values.iter().map(|&v| g(v))) * f.grid.cell_area()
}

/// Cell reconstruction of `|∇f|²` from squared face differences.
///
/// Each axis contributes the mean of the squared gradients on the cell's
/// interior faces. Boundary faces carry the Neumann ghost value, not
/// gradient information, so a cell touching a wall uses only its interior
/// face on that axis; linear fields are reproduced exactly.
pub fn grad_sq_cells(f: &ScalarField) -> ScalarField {
    let g = face_gradient(f);
    grad_sq_from_faces(&g)
}

pub(crate) fn grad_sq_from_faces(g: &FluxField) -> ScalarField {
    let grid = g.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let gx = axis_mean_sq(g.x_face(i, j), g.x_face(i + 1, j), i == 0, i + 1 == nx);
            let gy = axis_mean_sq(g.y_face(i, j), g.y_face(i, j + 1), j == 0, j + 1 == ny);
            out.push(gx + gy);
        }
    }
    ScalarField { grid, values: out }
}

#[inline]
fn axis_mean_sq(low: f64, high: f64, low_is_wall: bool, high_is_wall: bool) -> f64 {
    match (low_is_wall, high_is_wall) {
        (false, false) => 0.5 * (low * low + high * high),
        (true, false) => high * high,
        (false, true) => low * low,
        (true, true) => 0.0,
    }
}

/// `∫ (|∇f|²)^{p/2}` using [`grad_sq_cells`].
pub fn grad_lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::arg(
            "p",
            format!("exponent must be at least 1, got {p}"),
        ));
    }
    let sq = grad_sq_cells(f);
    let half = 0.5 * p;
    Ok(integrate_with(&sq, |s| {
        if half == 1.0 {
            s
        } else {
            s.powf(half)
        }
    }))
}
