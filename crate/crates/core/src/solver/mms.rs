//! Manufactured-solution convergence harness.
//!
//! The exact fields are
//! `u* = B + A e^{−t} cos(kx x) cos(ky y)` and
//! `w* = D + E (1+t) cos(2kx x) cos(ky y)` with `kx = π/lx`, `ky = π/ly`,
//! which satisfy the zero-flux conditions. Forcing terms make them exact
//! solutions of the forced equations; the scheme error is then measured in
//! the max norm at cell centres.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linsolve::{CgOptions, ShiftedLaplacianSolver};
use crate::model::Params;

use super::{Sources, State, StepConfig, Stepper};

const B: f64 = 1.0;
const A: f64 = 0.5;
const D: f64 = 1.0;
const E: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MmsCase {
    /// Heat equation for `u` alone.
    Diffusion,
    /// Full `(u, w)` system.
    Transformed,
    /// Full `(u, v)` system with `v* = e^{−w*}`.
    Original,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsOptions {
    /// Cells per side on the coarsest level.
    pub n0: usize,
    /// `dt = dt_coeff · h²` (rounded down so that `t_end` is hit exactly).
    pub dt_coeff: f64,
    pub t_end: f64,
    pub chi: f64,
    pub beta: f64,
}

impl Default for MmsOptions {
    fn default() -> Self {
        Self {
            n0: 16,
            dt_coeff: 0.25,
            t_end: 0.05,
            chi: 0.5,
            beta: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub error_u: f64,
    pub error_signal: f64,
    /// `max(error_u, error_signal)`.
    pub error: f64,
}

struct Exact {
    kx: f64,
    ky: f64,
    chi: f64,
    beta: f64,
}

/// Pointwise values of the manufactured solution and its derivatives.
struct Point {
    u: f64,
    u_t: f64,
    ux: f64,
    uy: f64,
    lap_u: f64,
    w: f64,
    w_t: f64,
    wx: f64,
    wy: f64,
    lap_w: f64,
}

impl Exact {
    fn at(&self, t: f64, x: f64, y: f64) -> Point {
        let (kx, ky) = (self.kx, self.ky);
        let (cx, sx) = ((kx * x).cos(), (kx * x).sin());
        let (cy, sy) = ((ky * y).cos(), (ky * y).sin());
        let (c2x, s2x) = ((2.0 * kx * x).cos(), (2.0 * kx * x).sin());
        let a = A * (-t).exp();
        let e = E * (1.0 + t);
        Point {
            u: B + a * cx * cy,
            u_t: -a * cx * cy,
            ux: -a * kx * sx * cy,
            uy: -a * ky * cx * sy,
            lap_u: -a * (kx * kx + ky * ky) * cx * cy,
            w: D + e * c2x * cy,
            w_t: E * c2x * cy,
            wx: -2.0 * kx * e * s2x * cy,
            wy: -ky * e * c2x * sy,
            lap_w: -e * (4.0 * kx * kx + ky * ky) * c2x * cy,
        }
    }

    fn source_u(&self, p: &Point) -> f64 {
        p.u_t - p.lap_u - self.chi * (p.ux * p.wx + p.uy * p.wy + p.u * p.lap_w)
    }

    fn source_w(&self, p: &Point) -> f64 {
        p.w_t - p.lap_w + p.wx * p.wx + p.wy * p.wy - p.u.powf(self.beta)
    }
}

fn sample(grid: Grid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
    ScalarField::from_fn(grid, f)
}

fn max_err(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn run_level(case: MmsCase, n: usize, opts: &MmsOptions) -> Result<MmsLevel> {
    let grid = Grid::unit_square(n)?;
    let ex = Exact {
        kx: PI / grid.lx,
        ky: PI / grid.ly,
        chi: opts.chi,
        beta: opts.beta,
    };
    let h = grid.hx;
    let steps = (opts.t_end / (opts.dt_coeff * h * h)).ceil().max(1.0) as usize;
    let dt = opts.t_end / steps as f64;
    let params = Params::new(opts.chi, opts.beta, 1.0, grid.area)?;

    let (error_u, error_signal) = match case {
        MmsCase::Diffusion => {
            let mut solver = ShiftedLaplacianSolver::new(grid, CgOptions::default());
            let mut u = sample(grid, |x, y| ex.at(0.0, x, y).u).into_values();
            for k in 1..=steps {
                let t = k as f64 * dt;
                let rhs: Vec<f64> = sample(grid, |x, y| {
                    let p = ex.at(t, x, y);
                    p.u_t - p.lap_u
                })
                .values()
                .iter()
                .zip(&u)
                .map(|(s, u)| u + dt * s)
                .collect();
                solver.solve(1.0, dt, &rhs, &mut u)?;
            }
            let exact = sample(grid, |x, y| ex.at(opts.t_end, x, y).u);
            (max_err(&ScalarField::from_vec(grid, u)?, &exact), 0.0)
        }
        MmsCase::Transformed | MmsCase::Original => {
            let original = case == MmsCase::Original;
            let mut stepper = Stepper::new(
                params,
                grid,
                StepConfig {
                    dt_max: dt,
                    ..StepConfig::default()
                },
            )?;
            let signal_at = |t: f64, x: f64, y: f64| {
                let w = ex.at(t, x, y).w;
                if original {
                    (-w).exp()
                } else {
                    w
                }
            };
            let u0 = sample(grid, |x, y| ex.at(0.0, x, y).u);
            let s0 = sample(grid, |x, y| signal_at(0.0, x, y));
            let mut state = if original {
                State::original(u0, s0, 0.0)?
            } else {
                State::transformed(u0, s0, 0.0)?
            };
            for k in 1..=steps {
                let t = k as f64 * dt;
                let su = sample(grid, |x, y| ex.source_u(&ex.at(t, x, y)));
                let ss = sample(grid, |x, y| {
                    let p = ex.at(t, x, y);
                    let sw = ex.source_w(&p);
                    if original {
                        -(-p.w).exp() * sw
                    } else {
                        sw
                    }
                });
                let (next, _) = stepper.step_with_sources(
                    &state,
                    dt,
                    Some(Sources {
                        u: &su,
                        signal: &ss,
                    }),
                )?;
                state = next;
            }
            let eu = sample(grid, |x, y| ex.at(opts.t_end, x, y).u);
            let es = sample(grid, |x, y| signal_at(opts.t_end, x, y));
            (max_err(&state.u, &eu), max_err(&state.signal, &es))
        }
    };
    Ok(MmsLevel {
        n,
        h,
        dt,
        steps,
        error_u,
        error_signal,
        error: error_u.max(error_signal),
    })
}

/// Runs `levels` grids `n0, 2n0, 4n0, …` and returns the max-norm errors per level.
pub fn mms_convergence(case: MmsCase, levels: usize, opts: &MmsOptions) -> Result<Vec<MmsLevel>> {
    if levels < 3 {
        return Err(Error::arg(
            "levels",
            format!("need at least 3 levels, got {levels}"),
        ));
    }
    if opts.n0 < 3 {
        return Err(Error::arg("n0", "coarsest grid needs at least 3 cells"));
    }
    (0..levels)
        .map(|l| run_level(case, opts.n0 << l, opts))
        .collect()
}

/// `log₂(e_l / e_{l+1})` for consecutive levels.
pub fn observed_orders(levels: &[MmsLevel]) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log2())
        .collect()
}
