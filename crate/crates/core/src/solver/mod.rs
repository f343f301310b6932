//! Time stepping for the original `(u, v)` and transformed `(u, w)` systems.
//!
//! Both steppers are IMEX: diffusion is backward Euler, while transport,
//! `|∇w|²` and consumption are explicit. The implicit solves are pure-Neumann
//! shifted Laplacians, so the discrete mass of `u` is conserved to round-off.

mod initial;
mod mms;

pub use initial::{initial_state, InitialData, SignalProfile};
pub use mms::{mms_convergence, observed_orders, MmsCase, MmsLevel, MmsOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    div_drift_flux, face_gradient, face_log_gradient, grad_sq_from_faces, integrate, laplacian,
    FaceAverage, FluxField, Grid, ScalarField,
};
use crate::linsolve::{CgOptions, ShiftedLaplacianSolver};
use crate::model::{v_to_w, w_to_v, Params};

/// Negative `u` below this is a positivity failure in strict mode.
pub const NEGATIVITY_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Original,
    #[default]
    Transformed,
}

/// Cell density `u` and the signal, which is `w` for the transformed
/// formulation and `v` for the original one.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub signal: ScalarField,
    pub t: f64,
    pub formulation: Formulation,
}

impl State {
    pub fn transformed(u: ScalarField, w: ScalarField, t: f64) -> Result<Self> {
        Self::build(u, w, t, Formulation::Transformed)
    }

    pub fn original(u: ScalarField, v: ScalarField, t: f64) -> Result<Self> {
        Self::build(u, v, t, Formulation::Original)
    }

    fn build(
        u: ScalarField,
        signal: ScalarField,
        t: f64,
        formulation: Formulation,
    ) -> Result<Self> {
        if u.grid() != signal.grid() {
            return Err(Error::arg("signal", "u and signal live on different grids"));
        }
        if !u.is_finite() || !signal.is_finite() {
            return Err(Error::arg("state", "fields must be finite"));
        }
        Ok(Self {
            u,
            signal,
            t,
            formulation,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u)
    }

    /// The transformed signal `w`, converting from `v` if necessary.
    pub fn w(&self, p: &Params) -> Result<ScalarField> {
        match self.formulation {
            Formulation::Transformed => Ok(self.signal.clone()),
            Formulation::Original => v_to_w(&self.signal, p),
        }
    }

    /// The original signal `v`, converting from `w` if necessary.
    pub fn v(&self, p: &Params) -> Result<ScalarField> {
        match self.formulation {
            Formulation::Original => Ok(self.signal.clone()),
            Formulation::Transformed => w_to_v(&self.signal, p),
        }
    }

    /// Same data expressed in the other formulation.
    pub fn convert(&self, p: &Params, to: Formulation) -> Result<Self> {
        let signal = match to {
            Formulation::Transformed => self.w(p)?,
            Formulation::Original => self.v(p)?,
        };
        Self::build(self.u.clone(), signal, self.t, to)
    }
}

/// What to do when `u` dips below `−1e−13`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositivityMode {
    /// Abort with a positivity error.
    #[default]
    Strict,
    /// Set negative cells to zero and report the mass added.
    Clip,
}

/// Treatment of the consumption term `−f(u) v` in the original formulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMode {
    /// `v ← v · exp(−f(u) dt)`.
    #[default]
    Exponential,
    /// `v ← v · (1 − f(u) dt)`.
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub face_average: FaceAverage,
    pub positivity: PositivityMode,
    pub decay: DecayMode,
    /// Forward Euler for the diffusion terms as well (for tests only; needs `dt ≲ h²/4`).
    pub explicit_diffusion: bool,
    pub safety: f64,
    pub dt_max: f64,
    pub v_floor: f64,
    pub cg: CgOptions,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            face_average: FaceAverage::Central,
            positivity: PositivityMode::Strict,
            decay: DecayMode::Exponential,
            explicit_diffusion: false,
            safety: 0.4,
            dt_max: 1e-2,
            v_floor: 1e-300,
            cg: CgOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    /// Mass added by clipping negative `u`; zero unless [`PositivityMode::Clip`] acted.
    pub positivity_clip_mass: f64,
    /// `dt · χ · max|drift| / min(hx, hy)` at the start of the step.
    pub max_cfl: f64,
    pub cg_iterations: usize,
}

/// Cell source terms added to the right-hand sides (used by the manufactured-solution harness).
pub struct Sources<'a> {
    pub u: &'a ScalarField,
    pub signal: &'a ScalarField,
}

pub struct Stepper {
    params: Params,
    config: StepConfig,
    solver: ShiftedLaplacianSolver,
}

impl Stepper {
    pub fn new(params: Params, grid: Grid, config: StepConfig) -> Result<Self> {
        params.validate()?;
        if !(config.safety > 0.0) {
            return Err(Error::arg(
                "safety",
                format!("must be positive, got {}", config.safety),
            ));
        }
        if !(config.dt_max > 0.0) {
            return Err(Error::arg(
                "dt_max",
                format!("must be positive, got {}", config.dt_max),
            ));
        }
        let solver = ShiftedLaplacianSolver::new(grid, config.cg);
        Ok(Self {
            params,
            config,
            solver,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn config(&self) -> &StepConfig {
        &self.config
    }

    /// Face drift field `g` such that the chemotactic flux is `χ ū g`.
    fn drift(&self, s: &State) -> FluxField {
        match s.formulation {
            Formulation::Transformed => face_gradient(&s.signal),
            Formulation::Original => {
                let mut g = face_log_gradient(&s.signal);
                g.negate();
                g
            }
        }
    }

    /// `safety · min(hx, hy) / max(χ max|g|, 1e−12)`, capped by `dt_max`.
    pub fn adaptive_dt(&self, s: &State) -> f64 {
        let speed = self.params.chi * self.drift(s).max_abs();
        self.dt_from_speed(s.grid(), speed)
    }

    fn dt_from_speed(&self, grid: &Grid, speed: f64) -> f64 {
        let dt = self.config.safety * grid.min_spacing() / speed.max(1e-12);
        dt.min(self.config.dt_max)
    }

    pub fn step(&mut self, s: &State, dt: f64) -> Result<(State, StepReport)> {
        self.step_with_sources(s, dt, None)
    }

    pub fn step_transformed(&mut self, s: &State, dt: f64) -> Result<(State, StepReport)> {
        if s.formulation != Formulation::Transformed {
            return Err(Error::arg(
                "formulation",
                "step_transformed needs a transformed state",
            ));
        }
        self.step_with_sources(s, dt, None)
    }

    pub fn step_original(&mut self, s: &State, dt: f64) -> Result<(State, StepReport)> {
        if s.formulation != Formulation::Original {
            return Err(Error::arg(
                "formulation",
                "step_original needs an original state",
            ));
        }
        self.step_with_sources(s, dt, None)
    }

    pub fn step_with_sources(
        &mut self,
        s: &State,
        dt: f64,
        sources: Option<Sources<'_>>,
    ) -> Result<(State, StepReport)> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg("dt", format!("must be positive, got {dt}")));
        }
        if s.grid() != self.solver.grid() {
            return Err(Error::arg("state", "grid differs from the stepper's grid"));
        }
        let grid = *s.grid();
        let chi = self.params.chi;
        let g = self.drift(s);
        let max_cfl = dt * chi * g.max_abs() / grid.min_spacing();
        let t_new = s.t + dt;
        let mut report = StepReport {
            dt_used: dt,
            max_cfl,
            ..StepReport::default()
        };

        // density
        let transport = div_drift_flux(&s.u, &g, chi, self.config.face_average);
        let mut rhs_u: Vec<f64> =
            s.u.values()
                .iter()
                .zip(transport.values())
                .map(|(u, d)| u + dt * d)
                .collect();
        if let Some(src) = &sources {
            add_scaled(&mut rhs_u, src.u.values(), dt);
        }
        let mut u_new = self.diffuse(&grid, &s.u, rhs_u, dt, &mut report)?;
        self.enforce_positivity(&mut u_new, s.t, &mut report)?;

        // signal; consumption uses the density at the start of the step
        let f_u: Vec<f64> = s.u.values().iter().map(|&x| self.params.f(x)).collect();
        let signal_new = match s.formulation {
            Formulation::Transformed => {
                let grad_sq = grad_sq_from_faces(&g);
                let mut rhs: Vec<f64> = s
                    .signal
                    .values()
                    .iter()
                    .zip(grad_sq.values())
                    .zip(&f_u)
                    .map(|((w, gs), f)| w + dt * (f - gs))
                    .collect();
                if let Some(src) = &sources {
                    add_scaled(&mut rhs, src.signal.values(), dt);
                }
                let w = self.diffuse(&grid, &s.signal, rhs, dt, &mut report)?;
                if self.config.positivity == PositivityMode::Strict {
                    let wmin = w.min();
                    if wmin < -NEGATIVITY_TOL {
                        return Err(Error::Positivity {
                            t: t_new,
                            message: format!("w reached {wmin:.3e}"),
                        });
                    }
                }
                w
            }
            Formulation::Original => {
                let mut rhs: Vec<f64> = s
                    .signal
                    .values()
                    .iter()
                    .zip(&f_u)
                    .map(|(v, f)| match self.config.decay {
                        DecayMode::Exponential => v * (-f * dt).exp(),
                        DecayMode::Explicit => v * (1.0 - f * dt),
                    })
                    .collect();
                if let Some(src) = &sources {
                    add_scaled(&mut rhs, src.signal.values(), dt);
                }
                let v = self.diffuse(&grid, &s.signal, rhs, dt, &mut report)?;
                self.check_signal_bounds(&v, t_new)?;
                v
            }
        };
        Ok((
            State {
                u: u_new,
                signal: signal_new,
                t: t_new,
                formulation: s.formulation,
            },
            report,
        ))
    }

    /// Backward Euler `(I − dt Δ) x = rhs`, or forward Euler `x = rhs + dt Δ old`.
    fn diffuse(
        &mut self,
        grid: &Grid,
        old: &ScalarField,
        mut rhs: Vec<f64>,
        dt: f64,
        report: &mut StepReport,
    ) -> Result<ScalarField> {
        if self.config.explicit_diffusion {
            add_scaled(&mut rhs, laplacian(old).values(), dt);
            return ScalarField::from_vec(*grid, rhs);
        }
        let mut x = old.values().to_vec();
        let stats = self.solver.solve(1.0, dt, &rhs, &mut x)?;
        report.cg_iterations += stats.iterations;
        rhs.clear();
        ScalarField::from_vec(*grid, x)
    }

    fn enforce_positivity(
        &self,
        u: &mut ScalarField,
        t: f64,
        report: &mut StepReport,
    ) -> Result<()> {
        let umin = u.min();
        if umin >= -NEGATIVITY_TOL {
            return Ok(());
        }
        match self.config.positivity {
            PositivityMode::Strict => Err(Error::Positivity {
                t,
                message: format!("u reached {umin:.3e}; reduce dt or use upwind fluxes"),
            }),
            PositivityMode::Clip => {
                let area = u.grid().cell_area();
                let mut added = 0.0;
                for x in u.values_mut().iter_mut().filter(|x| **x < 0.0) {
                    added -= *x * area;
                    *x = 0.0;
                }
                report.positivity_clip_mass += added;
                Ok(())
            }
        }
    }

    fn check_signal_bounds(&self, v: &ScalarField, t: f64) -> Result<()> {
        let (vmin, vmax) = (v.min(), v.max());
        if !(vmin > self.config.v_floor) {
            return Err(Error::Positivity {
                t,
                message: format!("v reached {vmin:.3e}"),
            });
        }
        let cap = self.params.v0_max + 1e-13 * self.params.v0_max.max(1.0);
        if vmax > cap {
            return Err(Error::Positivity {
                t,
                message: format!(
                    "v = {vmax} exceeds the initial maximum {}",
                    self.params.v0_max
                ),
            });
        }
        Ok(())
    }
}

fn add_scaled(dst: &mut [f64], src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(chi: f64, beta: f64) -> Params {
        Params::new(chi, beta, 1.0, 1.0).unwrap()
    }

    fn stepper(p: &Params, g: Grid, cfg: StepConfig) -> Stepper {
        Stepper::new(p.clone(), g, cfg).unwrap()
    }

    #[test]
    fn uniform_density_raises_w_uniformly() {
        let g = Grid::unit_square(8).unwrap();
        let p = params(0.5, 0.5);
        let c: f64 = 2.0;
        let s =
            State::transformed(ScalarField::constant(g, c), ScalarField::zeros(g), 0.0).unwrap();
        let mut st = stepper(&p, g, StepConfig::default());
        let dt = 1e-3;
        let (next, rep) = st.step_transformed(&s, dt).unwrap();
        assert!(next.u.values().iter().all(|&x| (x - c).abs() < 1e-14));
        // exact ODE: w(t) = f(c) t
        let exact = c.sqrt() * dt;
        assert!(next
            .signal
            .values()
            .iter()
            .all(|&w| (w - exact).abs() < dt * dt));
        assert_eq!(rep.positivity_clip_mass, 0.0);
        assert_eq!(rep.dt_used, dt);
    }

    #[test]
    fn empty_density_is_stationary() {
        let g = Grid::unit_square(6).unwrap();
        let p = params(0.5, 0.5);
        let s =
            State::transformed(ScalarField::zeros(g), ScalarField::constant(g, 0.7), 0.0).unwrap();
        let mut st = stepper(&p, g, StepConfig::default());
        let (next, _) = st.step(&s, 0.01).unwrap();
        assert!(next.u.values().iter().all(|&x| x == 0.0));
        assert!(next
            .signal
            .values()
            .iter()
            .all(|&w| (w - 0.7).abs() < 1e-15));
    }

    #[test]
    fn explicit_submode_matches_hand_stencil() {
        let g = Grid::new(3, 3, 3.0, 3.0).unwrap();
        let p = params(0.5, 0.5);
        let u = [1.0, 2.0, 0.5, 0.0, 3.0, 1.5, 2.5, 1.0, 0.25];
        let w = [0.0, 0.1, 0.3, 0.2, 0.4, 0.1, 0.5, 0.0, 0.2];
        let s = State::transformed(
            ScalarField::from_vec(g, u.to_vec()).unwrap(),
            ScalarField::from_vec(g, w.to_vec()).unwrap(),
            0.0,
        )
        .unwrap();
        let cfg = StepConfig {
            explicit_diffusion: true,
            ..StepConfig::default()
        };
        let dt = 0.01;
        let (next, _) = stepper(&p, g, cfg).step(&s, dt).unwrap();
        // hand oracle with h = 1 and mirror ghosts
        let at = |f: &[f64; 9], i: isize, j: isize| {
            let i = i.clamp(0, 2) as usize;
            let j = j.clamp(0, 2) as usize;
            f[j * 3 + i]
        };
        for j in 0..3isize {
            for i in 0..3isize {
                let lap = |f: &[f64; 9]| {
                    at(f, i - 1, j) + at(f, i + 1, j) + at(f, i, j - 1) + at(f, i, j + 1)
                        - 4.0 * at(f, i, j)
                };
                let face = |di: isize, dj: isize| {
                    let (ni, nj) = (i + di, j + dj);
                    if !(0..3).contains(&ni) || !(0..3).contains(&nj) {
                        return 0.0;
                    }
                    let ubar = 0.5 * (at(&u, i, j) + at(&u, ni, nj));
                    ubar * (at(&w, ni, nj) - at(&w, i, j))
                };
                let chemo = 0.5 * (face(1, 0) + face(-1, 0) + face(0, 1) + face(0, -1));
                let mut gsq = 0.0;
                for (a, b) in [((-1, 0), (1, 0)), ((0, -1), (0, 1))] {
                    let mut parts = Vec::new();
                    for (di, dj) in [a, b] {
                        let (ni, nj) = (i + di, j + dj);
                        if (0..3).contains(&ni) && (0..3).contains(&nj) {
                            parts.push((at(&w, ni, nj) - at(&w, i, j)).powi(2));
                        }
                    }
                    gsq += parts.iter().sum::<f64>() / parts.len() as f64;
                }
                let k = (j * 3 + i) as usize;
                let u_exp = u[k] + dt * (lap(&u) + chemo);
                let w_exp = w[k] + dt * (lap(&w) - gsq + u[k].sqrt());
                assert!((next.u.values()[k] - u_exp).abs() < 1e-15, "u cell {k}");
                assert!(
                    (next.signal.values()[k] - w_exp).abs() < 1e-15,
                    "w cell {k}"
                );
            }
        }
    }

    #[test]
    fn original_pure_heat_and_exact_decay() {
        let g = Grid::unit_square(8).unwrap();
        let p = Params::new(0.5, 0.5, 2.0, 1.0).unwrap();
        let s = State::original(ScalarField::zeros(g), ScalarField::constant(g, 2.0), 0.0).unwrap();
        let mut st = stepper(&p, g, StepConfig::default());
        let (next, _) = st.step_original(&s, 0.05).unwrap();
        assert!(next
            .signal
            .values()
            .iter()
            .all(|&v| (v - 2.0).abs() < 1e-15));

        let c: f64 = 0.81;
        let mut s = State::original(
            ScalarField::constant(g, c),
            ScalarField::constant(g, 2.0),
            0.0,
        )
        .unwrap();
        for _ in 0..10 {
            s = st.step_original(&s, 0.02).unwrap().0;
        }
        let exact = 2.0 * (-c.sqrt() * s.t).exp();
        assert!(s.signal.values().iter().all(|&v| (v - exact).abs() < 1e-14));
    }

    #[test]
    fn wrong_formulation_is_rejected() {
        let g = Grid::unit_square(4).unwrap();
        let p = params(0.5, 0.5);
        let s = State::transformed(ScalarField::zeros(g), ScalarField::zeros(g), 0.0).unwrap();
        let mut st = stepper(&p, g, StepConfig::default());
        assert!(st.step_original(&s, 0.1).is_err());
        assert!(st.step(&s, 0.0).is_err());
    }

    #[test]
    fn adaptive_dt_examples() {
        let g = Grid::unit_square(100).unwrap();
        let p = params(0.5, 0.5);
        let cfg = StepConfig {
            dt_max: 1.0,
            ..StepConfig::default()
        };
        let st = stepper(&p, g, cfg.clone());
        let flat =
            State::transformed(ScalarField::zeros(g), ScalarField::constant(g, 3.0), 0.0).unwrap();
        assert_eq!(st.adaptive_dt(&flat), 1.0);
        // w = 10 x has face gradient 10 everywhere
        let ramp = State::transformed(
            ScalarField::zeros(g),
            ScalarField::from_fn(g, |x, _| 10.0 * x),
            0.0,
        )
        .unwrap();
        assert!((st.adaptive_dt(&ramp) - 8e-4).abs() < 1e-15);
        let st2 = stepper(&params(0.25, 0.5), g, cfg);
        assert!((st2.adaptive_dt(&ramp) - 2.0 * st.adaptive_dt(&ramp)).abs() < 1e-15);
    }

    #[test]
    fn clip_mode_accounts_for_added_mass() {
        let g = Grid::unit_square(8).unwrap();
        let p = params(0.9, 0.5);
        let u = ScalarField::from_fn(g, |x, _| if x < 0.2 { 1.0 } else { 0.0 });
        let w = ScalarField::from_fn(g, |x, _| 40.0 * (1.0 - x));
        let s = State::transformed(u, w, 0.0).unwrap();
        let mut strict = stepper(&p, g, StepConfig::default());
        assert!(matches!(
            strict.step(&s, 0.05),
            Err(Error::Positivity { .. })
        ));
        let cfg = StepConfig {
            positivity: PositivityMode::Clip,
            ..StepConfig::default()
        };
        let mut clip = stepper(&p, g, cfg);
        let (next, rep) = clip.step(&s, 0.05).unwrap();
        assert!(rep.positivity_clip_mass > 0.0);
        assert!(next.u.min() >= 0.0);
        assert!((next.mass() - s.mass() - rep.positivity_clip_mass).abs() < 1e-12);
    }
}
