//! Browser bindings: an interactive simulation, the threshold calculator and
//! the interpolation-constant probe.

use wasm_bindgen::prelude::*;

use cplab::diagnostics::{gn_probe, record, GnMode};
use cplab::grid::Grid;
use cplab::model::{threshold_boundedness, Params};
use cplab::solver::{
    initial_state, Formulation, InitialData, SignalProfile, State, StepConfig, Stepper,
};

fn js_err(e: cplab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Simulation {
    params: Params,
    stepper: Stepper,
    state: State,
    a: f64,
    steps: u64,
}

#[wasm_bindgen]
impl Simulation {
    /// Bump of the given mass centred at `(cx, cy)` on an `n × n` unit square.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        chi: f64,
        beta: f64,
        mass: f64,
        cx: f64,
        cy: f64,
        width: f64,
        original: bool,
    ) -> Result<Simulation, JsError> {
        let grid = Grid::unit_square(n).map_err(js_err)?;
        let params = Params::new(chi, beta, 1.0, 1.0).map_err(js_err)?;
        let formulation = if original {
            Formulation::Original
        } else {
            Formulation::Transformed
        };
        let state = initial_state(
            grid,
            &InitialData::Bump {
                mass,
                center: (cx, cy),
                width,
            },
            &SignalProfile::Constant,
            1.0,
            formulation,
        )
        .map_err(js_err)?;
        let stepper = Stepper::new(params.clone(), grid, StepConfig::default()).map_err(js_err)?;
        Ok(Simulation {
            params,
            stepper,
            state,
            a: 0.5,
            steps: 0,
        })
    }

    /// Advances `k` adaptive steps and returns the new time.
    pub fn advance(&mut self, k: u32) -> Result<f64, JsError> {
        for _ in 0..k {
            let dt = self.stepper.adaptive_dt(&self.state);
            self.state = self.stepper.step(&self.state, dt).map_err(js_err)?.0;
            self.steps += 1;
        }
        Ok(self.state.t)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> f64 {
        self.steps as f64
    }

    pub fn n(&self) -> usize {
        self.state.grid().nx
    }

    /// Cell densities in row-major order (`j · n + i`).
    pub fn density(&self) -> Vec<f64> {
        self.state.u.values().to_vec()
    }

    /// `v` in row-major order.
    pub fn signal(&self) -> Result<Vec<f64>, JsError> {
        Ok(self.state.v(&self.params).map_err(js_err)?.into_values())
    }

    /// `[t, mass, F, G, ∫|∇w|², sup u, min v]`.
    pub fn diagnostics(&self) -> Result<Vec<f64>, JsError> {
        let r = record(&self.state, &self.params, self.a).map_err(js_err)?;
        Ok(vec![r.t, r.mass, r.f, r.g, r.gradw_l2, r.sup_u, r.min_v])
    }
}

/// Threshold report for the unit square as `key = value` lines.
#[wasm_bindgen]
pub fn thresholds(chi: f64, beta: f64, mass: f64, cgn: f64) -> Result<String, JsError> {
    let p = Params::new(chi, beta, 1.0, 1.0).map_err(js_err)?;
    let m_window = 0.5 * 9.0 / (17.0 * 32.0 * cgn);
    let r = threshold_boundedness(mass, &p, cgn, m_window, 0.5).map_err(js_err)?;
    let rows = [
        ("a window", format!("({:.6}, {:.6})", r.a_minus, r.a_plus)),
        ("c0 at a = 1/2", format!("{:.6}", r.c0)),
        ("G threshold", format!("{:.6e}", r.g_threshold)),
        ("M", format!("{:.6e}", r.m_window)),
        ("M upper limit", format!("{:.6e}", r.m_window_upper)),
        ("eps1", format!("{:.6}", r.eps1)),
        ("gamma", format!("{:.6e}", r.gamma)),
        ("m bar", format!("{:.6e}", r.m_bar)),
        ("m* bound", format!("{:.6e}", r.m_star_bound)),
        ("mass below m*", (mass < r.m_star_bound).to_string()),
    ];
    Ok(rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect())
}

/// Largest interpolation ratio over `samples` random trial functions on an `n × n` grid.
#[wasm_bindgen]
pub fn probe_gn(n: usize, samples: usize, mode: &str, seed: u64) -> Result<f64, JsError> {
    let grid = Grid::unit_square(n).map_err(js_err)?;
    let mode: GnMode = mode.parse().map_err(js_err)?;
    gn_probe(grid, samples, mode, seed).map_err(js_err)
}
