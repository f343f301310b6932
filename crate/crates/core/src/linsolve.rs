//! Conjugate-gradient solves of `(α I − β Δ) x = b` with zero-flux Δ.
//!
//! The operator is symmetric positive (semi-)definite. For `α = 0` it is the
//! pure-Neumann Laplacian whose null space is the constants: the right-hand
//! side and every iterate are projected onto mean-zero fields.
//!
//! The default preconditioner diagonalises the constant-coefficient stencil
//! with type-II/III cosine transforms. The cell-centered mirror-ghost
//! stencil has eigenvectors `cos(πk(i + ½)/n)` with eigenvalues
//! `(4/h²) sin²(πk/2n)`, so the preconditioner is exact up to round-off.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, laplacian, Grid, ScalarField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Jacobi,
    #[default]
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Relative residual target `‖b − Ax‖₂ ≤ rtol · ‖b‖₂`.
    pub rtol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            max_iter: 2000,
            preconditioner: Preconditioner::Spectral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// One-dimensional DCT-II / DCT-III pair computed through a length-2n FFT.
struct Dct1 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Dct1 {
    fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let forward = planner.plan_fft_forward(2 * n);
        let inverse = planner.plan_fft_inverse(2 * n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let twiddle = (0..n)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / (2 * n) as f64;
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        Self {
            n,
            forward,
            inverse,
            twiddle,
            buf: vec![Complex::default(); 2 * n],
            scratch: vec![Complex::default(); scratch_len],
        }
    }

    /// `X_k = Σ_i x_i cos(πk(i + ½)/n)` over a strided line of `data`.
    fn dct2(&mut self, data: &mut [f64], start: usize, stride: usize) {
        let n = self.n;
        for i in 0..n {
            let v = data[start + i * stride];
            self.buf[i] = Complex::new(v, 0.0);
            self.buf[2 * n - 1 - i] = Complex::new(v, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 0..n {
            // Y_k = 2 e^{iπk/2n} X_k
            let y = self.buf[k] * self.twiddle[k].conj();
            data[start + k * stride] = 0.5 * y.re;
        }
    }

    /// Inverse of [`Dct1::dct2`].
    fn dct3(&mut self, data: &mut [f64], start: usize, stride: usize) {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        for k in 0..n {
            let c = if k == 0 { inv_n } else { 2.0 * inv_n };
            self.buf[k] = self.twiddle[k] * (c * data[start + k * stride]);
        }
        for z in &mut self.buf[n..] {
            *z = Complex::default();
        }
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for i in 0..n {
            data[start + i * stride] = self.buf[i].re;
        }
    }
}

/// Cached transforms and eigenvalues for one grid.
pub struct SpectralPlan {
    grid: Grid,
    along_x: Dct1,
    along_y: Dct1,
    lam_x: Vec<f64>,
    lam_y: Vec<f64>,
}

impl SpectralPlan {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let eig = |n: usize, h: f64| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / (2 * n) as f64).sin();
                    4.0 * s * s / (h * h)
                })
                .collect()
        };
        Self {
            grid,
            along_x: Dct1::new(grid.nx, &mut planner),
            along_y: Dct1::new(grid.ny, &mut planner),
            lam_x: eig(grid.nx, grid.hx),
            lam_y: eig(grid.ny, grid.hy),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `−Δ` along x, in transform order.
    pub fn eigenvalues_x(&self) -> &[f64] {
        &self.lam_x
    }

    /// Overwrites `r` with `(α − β Δ)⁺ r`; the null mode maps to zero.
    pub fn apply_inverse(&mut self, alpha: f64, beta: f64, r: &mut [f64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            self.along_x.dct2(r, j * nx, 1);
        }
        for i in 0..nx {
            self.along_y.dct2(r, i, nx);
        }
        for l in 0..ny {
            for k in 0..nx {
                let d = alpha + beta * (self.lam_x[k] + self.lam_y[l]);
                let idx = l * nx + k;
                r[idx] = if d.abs() > 0.0 { r[idx] / d } else { 0.0 };
            }
        }
        for i in 0..nx {
            self.along_y.dct3(r, i, nx);
        }
        for j in 0..ny {
            self.along_x.dct3(r, j * nx, 1);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = compensated_sum(v.iter().copied()) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Reusable conjugate-gradient workspace for one grid.
pub struct ShiftedLaplacianSolver {
    grid: Grid,
    plan: Option<SpectralPlan>,
    pub options: CgOptions,
}

impl ShiftedLaplacianSolver {
    pub fn new(grid: Grid, options: CgOptions) -> Self {
        let plan =
            (options.preconditioner == Preconditioner::Spectral).then(|| SpectralPlan::new(grid));
        Self {
            grid,
            plan,
            options,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, alpha: f64, beta: f64, x: &[f64]) -> Vec<f64> {
        let xf = ScalarField::from_vec(self.grid, x.to_vec()).expect("shape");
        let lx = laplacian(&xf);
        x.iter()
            .zip(lx.values())
            .map(|(&xi, &li)| alpha * xi - beta * li)
            .collect()
    }

    fn precondition(&mut self, alpha: f64, beta: f64, r: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend_from_slice(r);
        match self.options.preconditioner {
            Preconditioner::None => {}
            Preconditioner::Jacobi => {
                let g = self.grid;
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        let kx = [i > 0, i + 1 < g.nx].iter().filter(|b| **b).count() as f64;
                        let ky = [j > 0, j + 1 < g.ny].iter().filter(|b| **b).count() as f64;
                        let d = alpha + beta * (kx / (g.hx * g.hx) + ky / (g.hy * g.hy));
                        z[g.idx(i, j)] /= d;
                    }
                }
            }
            Preconditioner::Spectral => {
                let plan = self
                    .plan
                    .get_or_insert_with(|| SpectralPlan::new(self.grid));
                plan.apply_inverse(alpha, beta, z);
            }
        }
    }

    /// Solves `(α I − β Δ) x = b` starting from `x` (used as initial guess).
    ///
    /// For `α > 0` the result is corrected so that `Σ x = Σ b / α` holds to
    /// round-off, which is the exact discrete conservation law of the
    /// operator (`Σ Δx = 0`).
    pub fn solve(&mut self, alpha: f64, beta: f64, b: &[f64], x: &mut [f64]) -> Result<CgStats> {
        let n = self.grid.len();
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        let singular = alpha == 0.0;
        let mut rhs = b.to_vec();
        if singular {
            project_mean_zero(&mut rhs);
            project_mean_zero(x);
        }
        let bnorm = dot(&rhs, &rhs).sqrt();
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(CgStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let ax = self.apply(alpha, beta, x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut z = Vec::with_capacity(n);
        self.precondition(alpha, beta, &r, &mut z);
        if singular {
            project_mean_zero(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut res = dot(&r, &r).sqrt() / bnorm;
        let mut it = 0;
        while res > self.options.rtol {
            if it >= self.options.max_iter {
                return Err(Error::SolverDivergence {
                    iterations: it,
                    residual: res,
                });
            }
            let ap = self.apply(alpha, beta, &p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::SolverDivergence {
                    iterations: it,
                    residual: res,
                });
            }
            let step = rz / pap;
            for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
                *xi += step * pi;
                *ri -= step * api;
            }
            self.precondition(alpha, beta, &r, &mut z);
            if singular {
                project_mean_zero(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta_cg = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta_cg * *pi;
            }
            res = dot(&r, &r).sqrt() / bnorm;
            it += 1;
        }
        if singular {
            project_mean_zero(x);
        } else {
            let target = compensated_sum(b.iter().copied()) / alpha;
            let shift = (target - compensated_sum(x.iter().copied())) / n as f64;
            x.iter_mut().for_each(|v| *v += shift);
        }
        Ok(CgStats {
            iterations: it,
            relative_residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(grid: Grid, alpha: f64, beta: f64, b: &[f64], x: &[f64]) -> f64 {
        let s = ShiftedLaplacianSolver::new(grid, CgOptions::default());
        let ax = s.apply(alpha, beta, x);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum();
        r.sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn dct_round_trip() {
        let g = Grid::new(7, 5, 1.0, 1.0).unwrap();
        let mut plan = SpectralPlan::new(g);
        let orig: Vec<f64> = (0..g.len())
            .map(|k| ((k * 13 % 7) as f64 - 2.5) * 0.3)
            .collect();
        let mut v = orig.clone();
        // α = 1, β = 0 is the identity through both transforms.
        plan.apply_inverse(1.0, 0.0, &mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn dct_diagonalises_stencil() {
        // A single cosine mode is an eigenvector: solving returns it scaled.
        let g = Grid::new(8, 6, 2.0, 1.5).unwrap();
        let mut plan = SpectralPlan::new(g);
        let (k, l) = (3usize, 2usize);
        let f = ScalarField::from_fn(g, |x, y| {
            (std::f64::consts::PI * k as f64 * x / g.lx).cos()
                * (std::f64::consts::PI * l as f64 * y / g.ly).cos()
        });
        let lam = -laplacian(&f).values()[0] / f.values()[0];
        let mut v = f.values().to_vec();
        plan.apply_inverse(0.5, 2.0, &mut v);
        for (a, b) in v.iter().zip(f.values()) {
            assert!((a - b / (0.5 + 2.0 * lam)).abs() < 1e-12);
        }
    }

    #[test]
    fn all_preconditioners_agree() {
        let g = Grid::new(12, 9, 1.0, 0.8).unwrap();
        let b: Vec<f64> = (0..g.len())
            .map(|k| ((k as f64) * 0.7).sin() + 1.5)
            .collect();
        let mut results = Vec::new();
        for pc in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::Spectral,
        ] {
            let mut s = ShiftedLaplacianSolver::new(
                g,
                CgOptions {
                    preconditioner: pc,
                    ..CgOptions::default()
                },
            );
            let mut x = b.clone();
            let stats = s.solve(1.0, 0.01, &b, &mut x).unwrap();
            assert!(stats.relative_residual <= 1e-12);
            assert!(residual(g, 1.0, 0.01, &b, &x) < 1e-11);
            results.push(x);
        }
        for x in &results[1..] {
            for (a, b) in x.iter().zip(&results[0]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shifted_solve_conserves_sum() {
        let g = Grid::unit_square(16).unwrap();
        let b: Vec<f64> = (0..g.len())
            .map(|k| ((k as f64) * 0.31).cos().abs())
            .collect();
        let mut s = ShiftedLaplacianSolver::new(g, CgOptions::default());
        let mut x = vec![0.0; g.len()];
        s.solve(1.0, 0.05, &b, &mut x).unwrap();
        let sb = compensated_sum(b.iter().copied());
        let sx = compensated_sum(x.iter().copied());
        assert!((sb - sx).abs() <= 1e-14 * sb);
    }

    #[test]
    fn pure_neumann_poisson_with_mean_projection() {
        // −Δx = b for b = cos(πx)cos(πy) (mean zero) plus a constant offset,
        // which the projection removes.
        let g = Grid::unit_square(20).unwrap();
        let mode = ScalarField::from_fn(g, |x, y| {
            (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
        });
        let b: Vec<f64> = mode.values().iter().map(|v| v + 0.25).collect();
        let lam = -laplacian(&mode).values()[0] / mode.values()[0];
        for pc in [Preconditioner::Jacobi, Preconditioner::Spectral] {
            let mut s = ShiftedLaplacianSolver::new(
                g,
                CgOptions {
                    preconditioner: pc,
                    ..CgOptions::default()
                },
            );
            let mut x = vec![1.0; g.len()];
            s.solve(0.0, 1.0, &b, &mut x).unwrap();
            let mean: f64 = x.iter().sum::<f64>() / x.len() as f64;
            assert!(mean.abs() < 1e-13);
            for (a, m) in x.iter().zip(mode.values()) {
                assert!((a - m / lam).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let g = Grid::unit_square(32).unwrap();
        let b: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 101) as f64).collect();
        let mut s = ShiftedLaplacianSolver::new(
            g,
            CgOptions {
                rtol: 1e-14,
                max_iter: 2,
                preconditioner: Preconditioner::None,
            },
        );
        let mut x = vec![0.0; g.len()];
        assert!(matches!(
            s.solve(1.0, 1.0, &b, &mut x),
            Err(Error::SolverDivergence { .. })
        ));
    }
}
