//! Re-checks the hard invariants of a finished run from its CSV alone.
//!
//! This deliberately does not reuse the checks in `diagnostics`; the bounds
//! are evaluated again from the config and compared with the run summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{read_csv, DiagnosticsRecord};
use crate::error::Result;

use super::config::parse_config;
use super::run::{read_summary, InvariantFlags, MASS_DRIFT_TOL};

const TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: usize,
    pub flags: InvariantFlags,
    pub violations: Vec<String>,
    /// `None` when the run directory has no summary.
    pub summary_agrees: Option<bool>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.flags.all_pass && self.summary_agrees != Some(false)
    }
}

pub fn verify_run(dir: &Path) -> Result<VerifyReport> {
    let cfg = parse_config(&dir.join("config.toml"))?;
    let rows: Vec<DiagnosticsRecord> = read_csv(&dir.join("diagnostics.csv"))?;
    let (chi, beta) = (cfg.model.chi, cfg.model.beta);
    let area = cfg.grid.lx * cfg.grid.ly;
    let mut flags = InvariantFlags {
        f_lower_bound: true,
        g_upper_bound: true,
        gradw_bound: true,
        int_h_nonpositive: true,
        mass_conserved: true,
        min_v_positive: true,
        all_pass: true,
    };
    let mut violations = Vec::new();
    let m0 = rows.first().map_or(cfg.initial.mass, |r| r.mass);
    for r in &rows {
        let mut fail = |flag: &mut bool, what: String| {
            *flag = false;
            violations.push(format!("t = {}: {what}", r.t));
        };
        if r.f < -area * (-1.0f64).exp() - TOL || r.f.is_nan() {
            fail(&mut flags.f_lower_bound, format!("F = {}", r.f));
        }
        if r.g > 0.5 * r.gradw_l2 + TOL || r.g.is_nan() {
            fail(&mut flags.g_upper_bound, format!("G = {} > ½∫|∇w|²", r.g));
        }
        let m = r.mass.max(0.0);
        let cap =
            2.0 * r.g + 2.0 * m.powf(beta) * area.powf(1.0 - beta) / (chi * (1.0 - beta)) + TOL;
        if r.gradw_l2 > cap || r.gradw_l2.is_nan() {
            fail(
                &mut flags.gradw_bound,
                format!("∫|∇w|² = {} > {cap}", r.gradw_l2),
            );
        }
        if r.int_h > 0.0 || r.int_h.is_nan() {
            fail(&mut flags.int_h_nonpositive, format!("∫H(u) = {}", r.int_h));
        }
        if (r.mass - m0).abs() > MASS_DRIFT_TOL * m0 || r.mass.is_nan() {
            fail(
                &mut flags.mass_conserved,
                format!("mass {} drifted from {m0}", r.mass),
            );
        }
        if r.min_v <= 0.0 || r.min_v.is_nan() {
            fail(&mut flags.min_v_positive, format!("min v = {}", r.min_v));
        }
    }
    flags.all_pass = violations.is_empty();
    let summary_agrees = read_summary(dir).ok().map(|s| s.invariants == flags);
    Ok(VerifyReport {
        rows: rows.len(),
        flags,
        violations,
        summary_agrees,
    })
}
