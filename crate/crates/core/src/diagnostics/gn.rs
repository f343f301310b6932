//! Empirical lower bounds for Gagliardo–Nirenberg type constants.
//!
//! Trial functions are random band-limited Neumann cosine expansions
//! `f = c + Σ a_kl cos(kπx/lx) cos(lπy/ly)`. For each mode the probe records
//! the running maximum of the left side over the right side without the
//! constant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_sq_cells, integrate, integrate_with, laplacian, Grid, ScalarField};

/// Largest cosine index used by the trial functions.
const MAX_MODE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnMode {
    /// `‖f‖₄ / (‖∇f‖₂^{½} ‖f‖₂^{½} + ‖f‖₂)`
    #[serde(rename = "ineq_4_2_2")]
    Ineq422,
    /// `‖f‖₃ / (‖f‖₁^{⅓} ‖f‖_{W^{1,2}}^{⅔})`
    #[serde(rename = "ineq_L3")]
    IneqL3,
    /// `‖∇f‖₄⁴ / (‖∇f‖₂² ‖Δf‖₂²)`
    Ladyzhenskaya,
}

impl GnMode {
    pub const ALL: [GnMode; 3] = [GnMode::Ineq422, GnMode::IneqL3, GnMode::Ladyzhenskaya];

    pub fn name(self) -> &'static str {
        match self {
            GnMode::Ineq422 => "ineq_4_2_2",
            GnMode::IneqL3 => "ineq_L3",
            GnMode::Ladyzhenskaya => "ladyzhenskaya",
        }
    }
}

impl std::str::FromStr for GnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GnMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::arg("mode", format!("unknown mode `{s}`")))
    }
}

/// Ratio for one trial function, or `None` when a side degenerates (constants).
pub fn ratio(f: &ScalarField, mode: GnMode) -> Option<f64> {
    let gsq = grad_sq_cells(f);
    let grad2 = integrate(&gsq);
    if !(grad2 > 1e-300) {
        return None;
    }
    let r = match mode {
        GnMode::Ineq422 => {
            let l2 = integrate_with(f, |x| x * x).sqrt();
            let l4 = integrate_with(f, |x| x.powi(4)).powf(0.25);
            l4 / (grad2.sqrt().sqrt() * l2.sqrt() + l2)
        }
        GnMode::IneqL3 => {
            let l1 = integrate_with(f, f64::abs);
            let l3 = integrate_with(f, |x| x.abs().powi(3)).cbrt();
            let w12 = (integrate_with(f, |x| x * x) + grad2).sqrt();
            l3 / (l1.cbrt() * w12.powf(2.0 / 3.0))
        }
        GnMode::Ladyzhenskaya => {
            let grad4 = integrate_with(&gsq, |q| q * q);
            let lap2 = integrate_with(&laplacian(f), |x| x * x);
            if !(lap2 > 1e-300) {
                return None;
            }
            grad4 / (grad2 * lap2)
        }
    };
    r.is_finite().then_some(r)
}

struct Trial {
    offset: f64,
    coeffs: Vec<f64>,
    kmax: usize,
}

fn draw(rng: &mut ChaCha8Rng) -> Trial {
    let kmax = rng.random_range(1..=MAX_MODE);
    let decay: f64 = rng.random_range(0.0..3.0);
    let mut coeffs = vec![0.0; (MAX_MODE + 1) * (MAX_MODE + 1)];
    for l in 0..=kmax {
        for k in 0..=kmax {
            if k + l == 0 {
                continue;
            }
            let z: f64 = StandardNormal.sample(rng);
            coeffs[l * (MAX_MODE + 1) + k] = z * (1.0 + (k * k + l * l) as f64).powf(-0.5 * decay);
        }
    }
    let offset = if rng.random_bool(0.5) {
        let z: f64 = StandardNormal.sample(rng);
        2.0 * z
    } else {
        0.0
    };
    Trial {
        offset,
        coeffs,
        kmax,
    }
}

fn synthesize(grid: Grid, trial: &Trial) -> ScalarField {
    let (nx, ny) = (grid.nx, grid.ny);
    let cx: Vec<Vec<f64>> = (0..=trial.kmax)
        .map(|k| {
            (0..nx)
                .map(|i| (k as f64 * PI * (i as f64 + 0.5) / nx as f64).cos())
                .collect()
        })
        .collect();
    let cy: Vec<Vec<f64>> = (0..=trial.kmax)
        .map(|l| {
            (0..ny)
                .map(|j| (l as f64 * PI * (j as f64 + 0.5) / ny as f64).cos())
                .collect()
        })
        .collect();
    let mut values = vec![trial.offset; nx * ny];
    for j in 0..ny {
        // row profile Σ_k (Σ_l a_kl cy_l(j)) cx_k(i)
        let mut row_coeff = vec![0.0; trial.kmax + 1];
        for (l, cyl) in cy.iter().enumerate() {
            for (k, rc) in row_coeff.iter_mut().enumerate() {
                *rc += trial.coeffs[l * (MAX_MODE + 1) + k] * cyl[j];
            }
        }
        let row = &mut values[j * nx..(j + 1) * nx];
        for (k, cxk) in cx.iter().enumerate() {
            let a = row_coeff[k];
            if a != 0.0 {
                for (v, c) in row.iter_mut().zip(cxk) {
                    *v += a * c;
                }
            }
        }
    }
    ScalarField::from_vec(grid, values).expect("shape")
}

/// Running maximum of the ratio after each sample.
pub fn gn_probe_trace(grid: Grid, n_samples: usize, mode: GnMode, seed: u64) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::arg("n_samples", "need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut trace = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let trial = draw(&mut rng);
        if let Some(r) = ratio(&synthesize(grid, &trial), mode) {
            best = best.max(r);
        }
        trace.push(best);
    }
    Ok(trace)
}

/// Largest ratio over `n_samples` random trial functions.
pub fn gn_probe(grid: Grid, n_samples: usize, mode: GnMode, seed: u64) -> Result<f64> {
    Ok(*gn_probe_trace(grid, n_samples, mode, seed)?
        .last()
        .expect("nonempty"))
}

/// Ratio for the single mode `cos(πx/lx)`.
pub fn single_cosine_ratio(grid: Grid, mode: GnMode) -> Option<f64> {
    ratio(
        &ScalarField::from_fn(grid, |x, _| (PI * x / grid.lx).cos()),
        mode,
    )
}

/// Continuum Ladyzhenskaya ratio of `cos(πx/lx)`: `3 lx² / (2π² |Ω|)`.
pub fn ladyzhenskaya_continuum(lx: f64, ly: f64) -> f64 {
    3.0 * lx * lx / (2.0 * PI * PI * lx * ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_skipped() {
        let g = Grid::unit_square(8).unwrap();
        for m in GnMode::ALL {
            assert_eq!(ratio(&ScalarField::constant(g, 2.5), m), None);
        }
    }

    #[test]
    fn synthesis_matches_direct_evaluation() {
        let g = Grid::new(9, 7, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trial = draw(&mut rng);
        let f = synthesize(g, &trial);
        let direct = ScalarField::from_fn(g, |x, y| {
            let mut s = trial.offset;
            for l in 0..=trial.kmax {
                for k in 0..=trial.kmax {
                    s += trial.coeffs[l * (MAX_MODE + 1) + k]
                        * (k as f64 * PI * x / 2.0).cos()
                        * (l as f64 * PI * y).cos();
                }
            }
            s
        });
        for (a, b) in f.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_ratio_converges_to_continuum() {
        let exact = ladyzhenskaya_continuum(1.0, 1.0);
        assert!((exact - 0.151_981).abs() < 1e-6);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = Grid::unit_square(n).unwrap();
                (single_cosine_ratio(g, GnMode::Ladyzhenskaya).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn probe_is_nondecreasing_and_deterministic() {
        let g = Grid::unit_square(24).unwrap();
        let trace = gn_probe_trace(g, 30, GnMode::Ineq422, 7).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(trace[29] > 0.0);
        assert_eq!(gn_probe(g, 30, GnMode::Ineq422, 7).unwrap(), trace[29]);
        assert_eq!(gn_probe(g, 10, GnMode::Ineq422, 7).unwrap(), trace[9]);
        assert!(gn_probe(g, 0, GnMode::Ineq422, 7).is_err());
        assert_eq!("ineq_L3".parse::<GnMode>().unwrap(), GnMode::IneqL3);
    }
}
