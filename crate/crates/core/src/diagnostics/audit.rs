//! Signed margins of the differential inequalities along a recorded trajectory.
//!
//! A positive margin means the inequality holds for the discrete data. The
//! inequalities are statements about exact solutions, so small negative
//! margins can come from time and space discretisation and are only reported.

use serde::{Deserialize, Serialize};

use crate::model::{d1, d2, Params};

use super::{AuditInputs, DiagnosticsRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: f64,
    #[serde(rename = "dG_dt")]
    pub dg_dt: f64,
    /// `−[G′ + (1/χ)∫f′(u)|∇u|²/u + ½(1 − C_GN ∫|∇w|²)∫(Δw)²]`
    #[serde(rename = "margin_G")]
    pub margin_g: f64,
    /// `ε₁∫|∇w|⁶ + D₁∫u³ − [(∫u²)′ + ∫|∇u|²]`
    pub margin_u2: f64,
    /// `(16/9 + 96ε₂)∫|∇w|⁶ + 96βD₂∫u³ + 96(1−β)D₂|Ω| − [(∫|∇w|⁴)′ + 9/16 ∫|∇|∇w|²|²]`
    ///
    /// The boundary term is zero on rectangles.
    pub margin_gradw4: f64,
    /// Sum of the two previous margins.
    pub margin_combined: f64,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
}

/// Centred differences inside the series, one-sided at both ends.
fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i + 1 == n => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (y[b] - y[a]) / (t[b] - t[a])
        })
        .collect()
}

/// Audits every record; needs at least two records (returns an empty list otherwise).
pub fn inequality_audit(
    records: &[DiagnosticsRecord],
    inputs: &[AuditInputs],
    p: &Params,
    cgn: f64,
    eps1: f64,
    eps2: f64,
) -> Vec<AuditRecord> {
    let n = records.len().min(inputs.len());
    if n < 2 {
        return Vec::new();
    }
    let (records, inputs) = (&records[..n], &inputs[..n]);
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let dg = derivative(&t, &records.iter().map(|r| r.g).collect::<Vec<_>>());
    let du2 = derivative(&t, &records.iter().map(|r| r.u_l2).collect::<Vec<_>>());
    let dw4 = derivative(&t, &records.iter().map(|r| r.gradw_l4).collect::<Vec<_>>());
    let (c1, c2) = (d1(p.chi, eps1), d2(eps2));
    let beta = p.beta;
    (0..n)
        .map(|i| {
            let (r, x) = (&records[i], &inputs[i]);
            let margin_g = -(dg[i]
                + x.fprime_dissipation / p.chi
                + 0.5 * (1.0 - cgn * r.gradw_l2) * x.lap_w_l2);
            let margin_u2 = eps1 * r.gradw_l6 + c1 * x.u_l3 - (du2[i] + x.grad_u_l2);
            let margin_gradw4 = (16.0 / 9.0 + 96.0 * eps2) * r.gradw_l6
                + 96.0 * c2 * beta * x.u_l3
                + 96.0 * c2 * (1.0 - beta) * p.domain_area
                - (dw4[i] + 9.0 / 16.0 * x.grad_gradw_sq);
            AuditRecord {
                t: r.t,
                dg_dt: dg[i],
                margin_g,
                margin_u2,
                margin_gradw4,
                margin_combined: margin_u2 + margin_gradw4,
                eps1,
                eps2,
                d1: c1,
                d2: c2,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::record_full;
    use crate::grid::{Grid, ScalarField};
    use crate::solver::State;

    #[test]
    fn derivative_is_exact_for_quadratics_inside() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!(derivative(&t, &y).iter().all(|d| (d - 3.0).abs() < 1e-14));
    }

    #[test]
    fn stationary_state_margins_equal_sources() {
        let g = Grid::unit_square(8).unwrap();
        let p = Params::new(0.5, 0.5, 1.0, 1.0).unwrap();
        let s = State::transformed(
            ScalarField::constant(g, 2.0),
            ScalarField::constant(g, 0.3),
            0.0,
        )
        .unwrap();
        let (r0, x0) = record_full(&s, &p, 0.5, 1e-12).unwrap();
        let mut r1 = r0.clone();
        r1.t = 1.0;
        let mut x1 = x0.clone();
        x1.t = 1.0;
        let (eps1, eps2) = (1.0 / 6.0, 1.0 / 3.0);
        let a = inequality_audit(&[r0, r1], &[x0, x1], &p, 1.0, eps1, eps2);
        assert_eq!(a.len(), 2);
        for r in &a {
            assert_eq!(r.dg_dt, 0.0);
            assert_eq!(r.margin_g, 0.0);
            assert!((r.margin_u2 - 0.125 / 3.0 * 8.0).abs() < 1e-13);
            let expected = 96.0 * (2.0 / 3.0) * (0.5 * 8.0 + 0.5);
            assert!((r.margin_gradw4 - expected).abs() < 1e-11);
            assert!((r.d1 - 0.125 / 3.0).abs() < 1e-14);
            assert!((r.d2 - 2.0 / 3.0).abs() < 1e-14);
        }
        assert!(inequality_audit(&[], &[], &p, 1.0, eps1, eps2).is_empty());
    }
}
