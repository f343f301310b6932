use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField};

use super::{Formulation, State};

/// Initial density presets.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `(m/Z) exp(−|x − c|²/σ²)` normalised to mass `m` by the discrete quadrature.
    Bump {
        mass: f64,
        center: (f64, f64),
        width: f64,
    },
    /// Constant density `m/|Ω|`.
    Uniform { mass: f64 },
}

impl InitialData {
    pub fn mass(&self) -> f64 {
        match *self {
            InitialData::Bump { mass, .. } | InitialData::Uniform { mass } => mass,
        }
    }

    pub fn density(&self, grid: Grid) -> Result<ScalarField> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::arg("mass", format!("must be positive, got {mass}")));
        }
        match *self {
            InitialData::Uniform { mass } => Ok(ScalarField::constant(grid, mass / grid.area)),
            InitialData::Bump {
                mass,
                center: (cx, cy),
                width,
            } => {
                if !(width > 0.0) {
                    return Err(Error::arg(
                        "width",
                        format!("must be positive, got {width}"),
                    ));
                }
                let shape = ScalarField::from_fn(grid, |x, y| {
                    (-((x - cx).powi(2) + (y - cy).powi(2)) / (width * width)).exp()
                });
                let z = integrate(&shape);
                if !(z > 0.0) {
                    return Err(Error::arg("width", "bump underflows on this grid"));
                }
                Ok(shape.map(|s| s * mass / z))
            }
        }
    }
}

/// Initial signal `v₀`. Its maximum is `v0_max` exactly, so `w₀ = −ln(v₀/v0_max)` has minimum 0.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum SignalProfile {
    #[default]
    Constant,
    /// `w₀ ∝ amplitude · (1 + cos(πx/lx) cos(πy/ly))/2`, shifted to minimum 0.
    Smooth { amplitude: f64 },
}

impl SignalProfile {
    pub fn w0(&self, grid: Grid) -> Result<ScalarField> {
        match *self {
            SignalProfile::Constant => Ok(ScalarField::zeros(grid)),
            SignalProfile::Smooth { amplitude } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(Error::arg(
                        "amplitude",
                        format!("must be nonnegative, got {amplitude}"),
                    ));
                }
                let raw = ScalarField::from_fn(grid, |x, y| {
                    0.5 * amplitude * (1.0 + (PI * x / grid.lx).cos() * (PI * y / grid.ly).cos())
                });
                let lo = raw.min();
                Ok(raw.map(|w| w - lo))
            }
        }
    }
}

pub fn initial_state(
    grid: Grid,
    data: &InitialData,
    profile: &SignalProfile,
    v0_max: f64,
    formulation: Formulation,
) -> Result<State> {
    if !(v0_max > 0.0) {
        return Err(Error::arg(
            "v0_max",
            format!("must be positive, got {v0_max}"),
        ));
    }
    let u = data.density(grid)?;
    let w = profile.w0(grid)?;
    match formulation {
        Formulation::Transformed => State::transformed(u, w, 0.0),
        Formulation::Original => State::original(u, w.map(|x| v0_max * (-x).exp()), 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_has_exact_mass() {
        let g = Grid::unit_square(32).unwrap();
        let d = InitialData::Bump {
            mass: 0.37,
            center: (0.35, 0.6),
            width: 0.1,
        };
        let u = d.density(g).unwrap();
        assert!((integrate(&u) - 0.37).abs() < 1e-15);
        assert!(u.min() > 0.0);
    }

    #[test]
    fn smooth_profile_attains_v0_max() {
        let g = Grid::new(10, 7, 2.0, 1.0).unwrap();
        let s = initial_state(
            g,
            &InitialData::Uniform { mass: 1.0 },
            &SignalProfile::Smooth { amplitude: 0.8 },
            3.0,
            Formulation::Original,
        )
        .unwrap();
        assert_eq!(s.signal.max(), 3.0);
        assert!(s.signal.min() > 0.0);
        assert!((s.u.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_presets() {
        let g = Grid::unit_square(8).unwrap();
        assert!(InitialData::Uniform { mass: 0.0 }.density(g).is_err());
        assert!(InitialData::Bump {
            mass: 1.0,
            center: (0.5, 0.5),
            width: 0.0
        }
        .density(g)
        .is_err());
        assert!(SignalProfile::Smooth { amplitude: -1.0 }.w0(g).is_err());
    }
}
