//! Tabulated consumption laws.
//!
//! A table of `(s, f(s))` samples starting at `(0, 0)` is interpolated with a
//! shape-preserving piecewise cubic Hermite (PCHIP) curve. A cubic has a
//! finite slope at the origin and so cannot stay below `β s^{β−1}` there;
//! the first interval therefore uses `f_1 (s/s_1)^β` instead. Past the last
//! sample the law continues as `f_n + (d_n s_n / β)((s/s_n)^β − 1)`, which is
//! C¹ at `s_n` and keeps both envelopes `f ≤ s^β`, `f′ ≤ β s^{β−1}` whenever
//! they hold at `s_n`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per segment used when validating the envelopes.
const CHECK_SAMPLES: usize = 64;
const ENVELOPE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionTable {
    s: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    beta: f64,
}

impl ConsumptionTable {
    /// Builds and validates a table for exponent `beta`.
    pub fn new(s: Vec<f64>, f: Vec<f64>, beta: f64) -> Result<Self> {
        if s.len() != f.len() {
            return Err(Error::Table(format!(
                "{} abscissae but {} values",
                s.len(),
                f.len()
            )));
        }
        if s.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        if s[0] != 0.0 || f[0] != 0.0 {
            return Err(Error::Table(format!(
                "table must start at (0, 0), found ({}, {})",
                s[0], f[0]
            )));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Table(format!("beta must lie in (0,1), got {beta}")));
        }
        for k in 1..s.len() {
            if !(s[k] > s[k - 1]) || !s[k].is_finite() {
                return Err(Error::Table(format!(
                    "abscissae must be strictly increasing (row {k}: {} after {})",
                    s[k],
                    s[k - 1]
                )));
            }
            if !(f[k] >= f[k - 1]) || !f[k].is_finite() {
                return Err(Error::Table(format!(
                    "values must be nondecreasing (row {k}: {} after {})",
                    f[k],
                    f[k - 1]
                )));
            }
        }
        let mut slopes = pchip_slopes(&s, &f);
        // match the power-law head at s_1, staying inside the monotone region
        let head = beta * f[1] / s[1];
        slopes[1] = if s.len() == 2 {
            head
        } else {
            head.min(3.0 * (f[2] - f[1]) / (s[2] - s[1]))
        };
        for k in 2..s.len() {
            slopes[k] = slopes[k].min(beta * s[k].powf(beta - 1.0));
        }
        let table = Self { s, f, slopes, beta };
        table.check_envelopes()?;
        Ok(table)
    }

    /// Reads a two-column CSV `(s, f(s))`; a non-numeric first row is taken as a header.
    pub fn from_csv(path: &Path, beta: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        let (mut s, mut f) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::Table(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    row + 1,
                    rec.len()
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    s.push(a);
                    f.push(b);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Table(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        row + 1
                    )))
                }
            }
        }
        Self::new(s, f, beta)
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.f)
    }

    fn last(&self) -> (f64, f64, f64) {
        let n = self.s.len() - 1;
        (self.s[n], self.f[n], self.slopes[n])
    }

    /// Segment index `k` with `s_k ≤ x < s_{k+1}`; `None` past the last sample.
    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.s.len();
        if x >= self.s[n - 1] {
            return None;
        }
        let k = self.s.partition_point(|&v| v <= x);
        Some(k.saturating_sub(1))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(0) => self.f[1] * (x.max(0.0) / self.s[1]).powf(self.beta),
            Some(k) => {
                let h = self.s[k + 1] - self.s[k];
                let t = (x - self.s[k]) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * self.f[k]
                    + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
                    + (-2.0 * t3 + 3.0 * t2) * self.f[k + 1]
                    + (t3 - t2) * h * self.slopes[k + 1]
            }
            None => {
                let (sn, fnv, dn) = self.last();
                fnv + dn * sn / self.beta * ((x / sn).powf(self.beta) - 1.0)
            }
        }
    }

    /// Coefficients of `f′` on segment `k` as a quadratic in the local coordinate `t`.
    fn derivative_poly(&self, k: usize) -> [f64; 3] {
        let h = self.s[k + 1] - self.s[k];
        let delta = (self.f[k + 1] - self.f[k]) / h;
        let (dk, dk1) = (self.slopes[k], self.slopes[k + 1]);
        [
            dk,
            6.0 * delta - 4.0 * dk - 2.0 * dk1,
            -6.0 * delta + 3.0 * dk + 3.0 * dk1,
        ]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(0) => self.beta * self.f[1] / self.s[1] * (x / self.s[1]).powf(self.beta - 1.0),
            Some(k) => {
                let h = self.s[k + 1] - self.s[k];
                let t = (x - self.s[k]) / h;
                let [c0, c1, c2] = self.derivative_poly(k);
                c0 + c1 * t + c2 * t * t
            }
            None => {
                let (sn, _, dn) = self.last();
                dn * (x / sn).powf(self.beta - 1.0)
            }
        }
    }

    /// `∫_ξ^∞ f′(σ)/σ dσ` for `ξ > 0`, exact for the piecewise cubic.
    fn tail_integral(&self, xi: f64) -> f64 {
        let (sn, _, dn) = self.last();
        let beta = self.beta;
        let far = |from: f64| dn * sn.powf(1.0 - beta) * from.powf(beta - 1.0) / (1.0 - beta);
        let Some(first) = self.segment(xi) else {
            return far(xi);
        };
        let mut total = 0.0;
        let mut start = first;
        if first == 0 {
            let (s1, f1) = (self.s[1], self.f[1]);
            total += beta * f1 * s1.powf(-beta) * (xi.powf(beta - 1.0) - s1.powf(beta - 1.0))
                / (1.0 - beta);
            start = 1;
        }
        for k in start..self.s.len() - 1 {
            let h = self.s[k + 1] - self.s[k];
            let r = self.s[k] / h;
            let lo = xi.max(self.s[k]);
            let (ta, tb) = ((lo - self.s[k]) / h, 1.0);
            let [c0, c1, c2] = self.derivative_poly(k);
            // p(t)/(t + r) = c2 t + (c1 − c2 r) + p(−r)/(t + r)
            let q1 = c1 - c2 * r;
            let rem = c0 - r * q1;
            total +=
                0.5 * c2 * (tb * tb - ta * ta) + q1 * (tb - ta) + rem * (self.s[k + 1] / lo).ln();
        }
        total + far(sn)
    }

    /// Second primitive `H(ξ) = −(1/χ) ∫_0^ξ ∫_s^∞ f′(σ)/σ dσ ds`.
    ///
    /// Swapping the order of integration gives `−(f(ξ) + ξ ∫_ξ^∞ f′(σ)/σ dσ)/χ`.
    pub fn second_primitive(&self, xi: f64, chi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        -(self.value(xi) + xi * self.tail_integral(xi)) / chi
    }

    fn check_envelopes(&self) -> Result<()> {
        let beta = self.beta;
        for k in 0..self.s.len() - 1 {
            let h = self.s[k + 1] - self.s[k];
            for m in 0..=CHECK_SAMPLES {
                let x = self.s[k] + h * m as f64 / CHECK_SAMPLES as f64;
                if x <= 0.0 {
                    continue;
                }
                let (fv, dv) = (self.value(x), self.derivative(x));
                let fcap = x.powf(beta);
                let dcap = beta * x.powf(beta - 1.0);
                if fv < 0.0 || fv > fcap * (1.0 + ENVELOPE_RTOL) {
                    return Err(Error::Table(format!(
                        "f({x}) = {fv} violates 0 ≤ f(s) ≤ s^β = {fcap}"
                    )));
                }
                if dv < -ENVELOPE_RTOL * dcap || dv > dcap * (1.0 + ENVELOPE_RTOL) {
                    return Err(Error::Table(format!(
                        "f'({x}) = {dv} violates 0 ≤ f'(s) ≤ βs^(β-1) = {dcap}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fritsch–Butland derivative estimates with shape-preserving end conditions.
fn pchip_slopes(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (f[k + 1] - f[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let mut v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if v.signum() != d0.signum() || d0 == 0.0 {
            v = 0.0;
        } else if d0.signum() != d1.signum() && v.abs() > 3.0 * d0.abs() {
            v = 3.0 * d0;
        }
        v
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}
