//! Functionals, norms and bound checks evaluated on simulator states.

mod audit;
mod csvio;
mod gn;

pub use audit::{inequality_audit, AuditRecord};
pub use csvio::{read_csv, write_csv, CsvSink};
pub use gn::{gn_probe, gn_probe_trace, ladyzhenskaya_continuum, single_cosine_ratio, GnMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_sq_cells, integrate, integrate_with, laplacian, ScalarField};
use crate::model::{g_threshold, Params};
use crate::solver::State;

/// Default regularisation of `u` in the Fisher-type integrand.
pub const DEFAULT_EPS_U: f64 = 1e-12;
/// Absolute tolerance on the hard invariants.
pub const INVARIANT_TOL: f64 = 1e-12;

/// One time sample of every monitored quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub entropy: f64,
    pub fisher: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub gradw_l2: f64,
    pub gradw_l4: f64,
    pub gradw_l6: f64,
    pub u_l2: f64,
    #[serde(rename = "int_H")]
    pub int_h: f64,
    pub sup_u: f64,
    pub min_v: f64,
    pub sup_w: f64,
}

/// Extra integrals needed by [`inequality_audit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditInputs {
    pub t: f64,
    /// `∫|∇u|²`
    pub grad_u_l2: f64,
    /// `∫u³`
    pub u_l3: f64,
    /// `∫|∇|∇w|²|²`
    pub grad_gradw_sq: f64,
    /// `∫(Δw)²`
    pub lap_w_l2: f64,
    /// `∫ f′(u)|∇u|²/(u + eps_u)`
    pub fprime_dissipation: f64,
}

fn entropy_density(s: f64) -> f64 {
    if s > 0.0 {
        s * s.ln()
    } else {
        0.0
    }
}

/// `∫|∇u|²/(u + eps_u)` with the cell reconstruction of `|∇u|²`.
pub fn fisher(u: &ScalarField, eps_u: f64) -> f64 {
    let gsq = grad_sq_cells(u);
    let field = gsq.zip_map(u, |g, x| {
        if g == 0.0 {
            0.0
        } else {
            g / (x.max(0.0) + eps_u)
        }
    });
    integrate(&field)
}

/// Diagnostics with the default Fisher regularisation.
pub fn record(s: &State, p: &Params, a: f64) -> Result<DiagnosticsRecord> {
    Ok(record_full(s, p, a, DEFAULT_EPS_U)?.0)
}

/// Diagnostics plus the audit integrals.
pub fn record_full(
    s: &State,
    p: &Params,
    a: f64,
    eps_u: f64,
) -> Result<(DiagnosticsRecord, AuditInputs)> {
    if !(a > 0.0) {
        return Err(Error::arg("a", format!("must be positive, got {a}")));
    }
    let u = &s.u;
    let w = s.w(p)?;
    let mass = integrate(u);
    let entropy = integrate_with(u, entropy_density);
    let uw = integrate(&u.zip_map(&w, |x, y| x * y));
    let gsq = grad_sq_cells(&w);
    let gradw_l2 = integrate(&gsq);
    let gradw_l4 = integrate_with(&gsq, |q| q * q);
    let gradw_l6 = integrate_with(&gsq, |q| q * q * q);
    let int_h = integrate_with(u, |x| p.h(x));
    let sup_w = w.max();
    let min_v = match s.formulation {
        crate::solver::Formulation::Original => s.signal.min(),
        crate::solver::Formulation::Transformed => p.v0_max * (-sup_w).exp(),
    };
    let rec = DiagnosticsRecord {
        t: s.t,
        mass,
        entropy,
        fisher: fisher(u, eps_u),
        f: entropy + a * uw,
        g: 0.5 * gradw_l2 + int_h,
        gradw_l2,
        gradw_l4,
        gradw_l6,
        u_l2: integrate_with(u, |x| x * x),
        int_h,
        sup_u: u.max(),
        min_v,
        sup_w,
    };
    let gsq_u = grad_sq_cells(u);
    let inputs = AuditInputs {
        t: s.t,
        grad_u_l2: integrate(&gsq_u),
        u_l3: integrate_with(u, |x| x.max(0.0).powi(3)),
        grad_gradw_sq: integrate(&grad_sq_cells(&gsq)),
        lap_w_l2: integrate_with(&laplacian(&w), |x| x * x),
        fprime_dissipation: integrate(&gsq_u.zip_map(u, |g, x| {
            if g == 0.0 {
                0.0
            } else {
                p.fprime(x).value * g / (x.max(0.0) + eps_u)
            }
        })),
    };
    Ok((rec, inputs))
}

/// Descriptions of every hard invariant the record violates.
pub fn invariant_violations(r: &DiagnosticsRecord, p: &Params) -> Vec<String> {
    let mut out = Vec::new();
    let f_floor = -p.domain_area / std::f64::consts::E - INVARIANT_TOL;
    if !(r.f >= f_floor) {
        out.push(format!("F = {} below -|Ω|/e", r.f));
    }
    if !(r.g <= 0.5 * r.gradw_l2 + INVARIANT_TOL) {
        out.push(format!(
            "G = {} exceeds ½∫|∇w|² = {}",
            r.g,
            0.5 * r.gradw_l2
        ));
    }
    let cap = 2.0 * r.g + 2.0 * p.h_mass_bound(r.mass.max(0.0)) + INVARIANT_TOL;
    if !(r.gradw_l2 <= cap) {
        out.push(format!(
            "∫|∇w|² = {} exceeds 2G + mass term = {cap}",
            r.gradw_l2
        ));
    }
    if !(r.int_h <= 0.0) {
        out.push(format!("∫H(u) = {} is positive", r.int_h));
    }
    out
}

pub fn check_invariants(r: &DiagnosticsRecord, p: &Params) -> Result<()> {
    let v = invariant_violations(r, p);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant {
            t: r.t,
            message: v.join("; "),
        })
    }
}

/// True iff `g_at_t0` lies strictly below the G-threshold for mass `m`.
pub fn smallness_check(g_at_t0: f64, m: f64, p: &Params, cgn: f64) -> Result<bool> {
    if !(cgn > 0.0) {
        return Err(Error::arg("cgn", format!("must be positive, got {cgn}")));
    }
    Ok(g_at_t0 < g_threshold(m, p, cgn))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub t0: f64,
    pub slack: f64,
    pub intervals_checked: usize,
    /// Largest `G(t_{i+1}) − G(t_i)` over the checked intervals (may be negative).
    pub max_increment: f64,
    /// Interval attaining `max_increment`.
    pub worst_interval: Option<(f64, f64)>,
    pub pass: bool,
}

/// Checks `G(t_{i+1}) − G(t_i) ≤ slack` for every pair of consecutive records with `t_i ≥ t0`.
pub fn check_g_monotone(records: &[DiagnosticsRecord], t0: f64, slack: f64) -> MonotonicityReport {
    let mut max_increment = f64::NEG_INFINITY;
    let mut worst_interval = None;
    let mut intervals_checked = 0;
    for w in records.windows(2) {
        if w[0].t < t0 {
            continue;
        }
        intervals_checked += 1;
        let inc = w[1].g - w[0].g;
        if inc > max_increment {
            max_increment = inc;
            worst_interval = Some((w[0].t, w[1].t));
        }
    }
    MonotonicityReport {
        t0,
        slack,
        intervals_checked,
        max_increment,
        worst_interval,
        pass: max_increment <= slack,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    /// Record time in `[t/2, t]` with the smallest `∫|∇w|²`.
    pub t_star: f64,
    pub min_value: f64,
    /// Trapezoidal mean of `∫|∇w|²` over the records in `[t/2, t]`.
    pub average: f64,
}

/// Locates the record minimising `∫|∇w|²` on `[t/2, t]` and the trapezoidal mean there.
///
/// The records must reach both ends of the window (up to `1e−9 t`) and
/// contain at least two samples inside it.
pub fn time_average_gradw(records: &[DiagnosticsRecord], t: f64) -> Result<TimeAverage> {
    if !(t > 0.0) {
        return Err(Error::Coverage(format!(
            "window end must be positive, got {t}"
        )));
    }
    let tol = 1e-9 * t;
    let (lo, hi) = (0.5 * t - tol, t + tol);
    let inside: Vec<&DiagnosticsRecord> =
        records.iter().filter(|r| r.t >= lo && r.t <= hi).collect();
    if inside.len() < 2 {
        return Err(Error::Coverage(format!(
            "{} records inside [{}, {t}]",
            inside.len(),
            0.5 * t
        )));
    }
    let (first, last) = (inside[0].t, inside[inside.len() - 1].t);
    if first > 0.5 * t + tol || last < t - tol {
        return Err(Error::Coverage(format!(
            "records span [{first}, {last}] but the window is [{}, {t}]",
            0.5 * t
        )));
    }
    let mut best = inside[0];
    let mut area = 0.0;
    for w in inside.windows(2) {
        area += 0.5 * (w[0].gradw_l2 + w[1].gradw_l2) * (w[1].t - w[0].t);
        if w[1].gradw_l2 <= best.gradw_l2 {
            best = w[1];
        }
    }
    Ok(TimeAverage {
        t_star: best.t,
        min_value: best.gradw_l2,
        average: area / (last - first),
    })
}
