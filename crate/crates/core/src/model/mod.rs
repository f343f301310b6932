//! Model constants, the consumption law, the second primitive `H`, the
//! `v ↔ w` change of variables and the closed-form smallness thresholds.

mod table;

pub use table::ConsumptionTable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Default lower clamp for the argument of `f′`.
pub const DEFAULT_S_MIN: f64 = 1e-12;

/// Consumption law `f`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Consumption {
    /// `f(s) = s^β`.
    #[default]
    Power,
    /// Monotone cubic interpolation of a table, validated against the envelopes.
    Tabulated(ConsumptionTable),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub chi: f64,
    pub beta: f64,
    pub consumption: Consumption,
    pub v0_max: f64,
    pub domain_area: f64,
    /// Arguments of `f′` below this are clamped (the derivative is singular at 0).
    pub s_min: f64,
}

/// Result of [`fprime_eval`]; `clamped` is set when `s < s_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FPrime {
    pub value: f64,
    pub clamped: bool,
}

impl Params {
    pub fn new(chi: f64, beta: f64, v0_max: f64, domain_area: f64) -> Result<Self> {
        let p = Self {
            chi,
            beta,
            consumption: Consumption::Power,
            v0_max,
            domain_area,
            s_min: DEFAULT_S_MIN,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_table(mut self, table: ConsumptionTable) -> Self {
        self.consumption = Consumption::Tabulated(table);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::arg(
                "chi",
                format!("must lie in (0,1), got {}", self.chi),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::arg(
                "beta",
                format!("must lie in (0,1), got {}", self.beta),
            ));
        }
        if !(self.v0_max > 0.0 && self.v0_max.is_finite()) {
            return Err(Error::arg(
                "v0_max",
                format!("must be positive, got {}", self.v0_max),
            ));
        }
        if !(self.domain_area > 0.0 && self.domain_area.is_finite()) {
            return Err(Error::arg(
                "domain_area",
                format!("must be positive, got {}", self.domain_area),
            ));
        }
        if !(self.s_min > 0.0) {
            return Err(Error::arg(
                "s_min",
                format!("must be positive, got {}", self.s_min),
            ));
        }
        Ok(())
    }

    /// `f(s)` with negative arguments treated as zero.
    pub fn f(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.consumption {
            Consumption::Power => s.powf(self.beta),
            Consumption::Tabulated(t) => t.value(s),
        }
    }

    /// `f′(s)` with the argument clamped to `s_min` from below.
    pub fn fprime(&self, s: f64) -> FPrime {
        let clamped = s < self.s_min;
        let s = s.max(self.s_min);
        let value = match &self.consumption {
            Consumption::Power => self.beta * s.powf(self.beta - 1.0),
            Consumption::Tabulated(t) => t.derivative(s),
        };
        FPrime { value, clamped }
    }

    /// `H(ξ)` with negative arguments treated as zero.
    pub fn h(&self, xi: f64) -> f64 {
        let xi = xi.max(0.0);
        match &self.consumption {
            Consumption::Power => -xi.powf(self.beta) / (self.chi * (1.0 - self.beta)),
            Consumption::Tabulated(t) => t.second_primitive(xi, self.chi),
        }
    }

    /// `m^β |Ω|^{1−β} / (χ(1−β))`, the bound on `−∫H(u)` for mass `m`.
    pub fn h_mass_bound(&self, m: f64) -> f64 {
        m.powf(self.beta) * self.domain_area.powf(1.0 - self.beta) / (self.chi * (1.0 - self.beta))
    }
}

pub fn f_eval(s: f64, p: &Params) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::arg("s", format!("must be nonnegative, got {s}")));
    }
    Ok(p.f(s))
}

pub fn fprime_eval(s: f64, p: &Params) -> Result<FPrime> {
    if !(s >= 0.0) {
        return Err(Error::arg("s", format!("must be nonnegative, got {s}")));
    }
    Ok(p.fprime(s))
}

pub fn h_eval(xi: f64, p: &Params) -> Result<f64> {
    if !(p.beta < 1.0) {
        return Err(Error::arg("beta", "second primitive requires beta < 1"));
    }
    if !(xi >= 0.0) {
        return Err(Error::arg("xi", format!("must be nonnegative, got {xi}")));
    }
    Ok(p.h(xi))
}

/// `w = −ln(v / v0_max)`.
pub fn v_to_w(v: &ScalarField, p: &Params) -> Result<ScalarField> {
    let cap = p.v0_max * (1.0 + 1e-12);
    for &x in v.values() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::SingularSignal(format!("v = {x} is not positive")));
        }
        if x > cap {
            return Err(Error::SingularSignal(format!(
                "v = {x} exceeds v0_max = {}",
                p.v0_max
            )));
        }
    }
    Ok(v.map(|x| -(x / p.v0_max).ln()))
}

/// `v = v0_max · e^{−w}`.
pub fn w_to_v(w: &ScalarField, p: &Params) -> Result<ScalarField> {
    for &x in w.values() {
        if !(x >= -1e-12) || !x.is_finite() {
            return Err(Error::arg("w", format!("must be nonnegative, got {x}")));
        }
    }
    Ok(w.map(|x| p.v0_max * (-x).exp()))
}

fn check_chi(chi: f64) -> Result<()> {
    if chi > 0.0 && chi < 1.0 {
        Ok(())
    } else {
        Err(Error::arg("chi", format!("must lie in (0,1), got {chi}")))
    }
}

/// Roots `a∓ = ½ ∓ ½√(1−χ²)` of `4a² − 4a + χ² = 0`.
pub fn a_window(chi: f64) -> Result<(f64, f64)> {
    check_chi(chi)?;
    let r = 0.5 * ((1.0 - chi) * (1.0 + chi)).sqrt();
    // the small root via the product a₋a₊ = χ²/4 avoids cancellation
    let a_plus = 0.5 + r;
    Ok((0.25 * chi * chi / a_plus, a_plus))
}

/// `c₀ = 1 − (χ+2a)² / (4a(χ+1))`.
pub fn c0_of(chi: f64, a: f64) -> Result<f64> {
    check_chi(chi)?;
    if !(a > 0.0) {
        return Err(Error::arg("a", format!("must be positive, got {a}")));
    }
    Ok(1.0 - (chi + 2.0 * a).powi(2) / (4.0 * a * (chi + 1.0)))
}

/// `D₁(ε) = χ³/3 · (6ε)^{−1/2}`.
pub fn d1(chi: f64, eps1: f64) -> f64 {
    chi.powi(3) / 3.0 / (6.0 * eps1).sqrt()
}

/// `D₂(ε) = ⅔ · (3ε)^{−1/2}`.
pub fn d2(eps2: f64) -> f64 {
    2.0 / 3.0 / (3.0 * eps2).sqrt()
}

/// `1/(4 C_GN) − m^β |Ω|^{1−β} / (χ(1−β))`.
pub fn g_threshold(m: f64, p: &Params, cgn: f64) -> f64 {
    1.0 / (4.0 * cgn) - p.h_mass_bound(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub chi: f64,
    pub beta: f64,
    pub mass: f64,
    pub domain_area: f64,
    pub a: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub c0: f64,
    pub g_threshold: f64,
    #[serde(rename = "M")]
    pub m_window: f64,
    #[serde(rename = "M_window_upper")]
    pub m_window_upper: f64,
    /// False when `M` lies outside `(0, M_window_upper)`; `m_star_bound` is then 0.
    pub m_window_ok: bool,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma: f64,
    pub m_bar: f64,
    pub m_star_bound: f64,
    pub cgn_used: f64,
}

/// Evaluates every closed-form smallness condition for mass `m`.
///
/// `a` is the entropy-functional weight used for `c0`.
pub fn threshold_boundedness(
    m: f64,
    p: &Params,
    cgn: f64,
    m_window: f64,
    a: f64,
) -> Result<ThresholdReport> {
    p.validate()?;
    if !(m > 0.0) {
        return Err(Error::arg("mass", format!("must be positive, got {m}")));
    }
    if !(cgn > 0.0) {
        return Err(Error::arg("cgn", format!("must be positive, got {cgn}")));
    }
    if !(m_window > 0.0) {
        return Err(Error::arg("M", format!("must be positive, got {m_window}")));
    }
    let (chi, beta, area) = (p.chi, p.beta, p.domain_area);
    let (a_minus, a_plus) = a_window(chi)?;
    let c0 = c0_of(chi, a)?;
    let g_threshold = g_threshold(m, p, cgn);
    let m_window_upper = 9.0 / (17.0 * 32.0 * cgn);
    let eps1 = 1.0 / (32.0 * m_window * cgn) - 17.0 / 9.0;
    let eps2 = 1.0 / 864.0;
    let m_window_ok = m_window < m_window_upper;
    let scale = chi * (1.0 - beta) / (4.0 * area.powf(1.0 - beta));
    let (gamma, m_bar, m_star_bound) = if m_window_ok {
        let gamma = d1(chi, eps1) + 96.0 * beta * d2(eps2);
        let m_bar = 1.0 / (16.0 * gamma * cgn.powi(3));
        let first = (scale / cgn).powf(1.0 / beta);
        let second = (m_window * scale).powf(1.0 / beta);
        (gamma, m_bar, first.min(second).min(m_bar))
    } else {
        (f64::NAN, f64::NAN, 0.0)
    };
    Ok(ThresholdReport {
        chi,
        beta,
        mass: m,
        domain_area: area,
        a,
        a_minus,
        a_plus,
        c0,
        g_threshold,
        m_window,
        m_window_upper,
        m_window_ok,
        eps1,
        eps2,
        gamma,
        m_bar,
        m_star_bound,
        cgn_used: cgn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn params(chi: f64, beta: f64) -> Params {
        Params::new(chi, beta, 1.0, 1.0).unwrap()
    }

    #[test]
    fn f_examples() {
        let p = params(0.5, 0.5);
        assert_eq!(f_eval(0.0, &p).unwrap(), 0.0);
        assert!((f_eval(4.0, &p).unwrap() - 2.0).abs() < 1e-15);
        let q = params(0.5, 0.3);
        let v = f_eval(10.0, &q).unwrap();
        assert!((v - (0.3 * 10f64.ln()).exp()).abs() < 1e-14);
        assert!((v - 1.9953).abs() < 1e-4);
        assert!(f_eval(-1.0, &p).is_err());
    }

    #[test]
    fn fprime_examples() {
        let p = params(0.5, 0.5);
        assert!((fprime_eval(1.0, &p).unwrap().value - 0.5).abs() < 1e-15);
        assert!((fprime_eval(4.0, &p).unwrap().value - 0.25).abs() < 1e-15);
        assert!((fprime_eval(0.01, &p).unwrap().value - 5.0).abs() < 1e-13);
        let z = fprime_eval(0.0, &p).unwrap();
        assert!(z.clamped);
        assert!((z.value - 0.5 * 1e6).abs() < 1e-6);
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_eval(0.0, &params(0.5, 0.5)).unwrap(), 0.0);
        assert!((h_eval(1.0, &params(0.5, 0.5)).unwrap() + 4.0).abs() < 1e-14);
        let v = h_eval(2.0, &params(0.8, 0.5)).unwrap();
        assert!((v + 2f64.sqrt() / 0.4).abs() < 1e-14);
        assert!((v + 3.5355).abs() < 1e-4);
    }

    #[test]
    fn transform_examples() {
        let g = Grid::unit_square(4).unwrap();
        let p = Params::new(0.5, 0.5, 3.0, 1.0).unwrap();
        let w = v_to_w(&ScalarField::constant(g, 3.0), &p).unwrap();
        assert!(w.values().iter().all(|&x| x == 0.0));
        let w = v_to_w(&ScalarField::constant(g, 3.0 / std::f64::consts::E), &p).unwrap();
        assert!(w.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(v_to_w(&ScalarField::constant(g, 0.0), &p).is_err());
        assert!(v_to_w(&ScalarField::constant(g, 3.1), &p).is_err());
        assert!(w_to_v(&ScalarField::constant(g, -0.5), &p).is_err());
    }

    #[test]
    fn window_examples() {
        let (lo, hi) = a_window(0.6).unwrap();
        assert!((lo - 0.1).abs() < 1e-15 && (hi - 0.9).abs() < 1e-15);
        assert!((c0_of(0.6, 0.5).unwrap() - 0.2).abs() < 1e-15);
        assert!((4.0 * 0.25 - 4.0 * 0.5 + 0.36 - (-0.64f64)).abs() < 1e-15);
        let (lo, hi) = a_window(1.0 - 1e-10).unwrap();
        assert!((lo - 0.5).abs() < 1e-4 && (hi - 0.5).abs() < 1e-4);
        let c = c0_of(1.0 - 1e-10, 0.5).unwrap();
        assert!(c > 0.0 && c < 1e-9);
        assert!(a_window(1.0).is_err() && a_window(0.0).is_err());
        assert!(c0_of(0.5, 0.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = params(0.5, 0.5);
        let r = threshold_boundedness(1e-12, &p, 1.0, 0.01, 0.5).unwrap();
        assert!((r.g_threshold - 0.25).abs() < 1e-5);
        assert!((r.m_window_upper - 9.0 / 544.0).abs() < 1e-15);
        assert!((r.m_window_upper - 0.016544).abs() < 1e-6);
        let r = threshold_boundedness(0.001, &p, 1.0, 0.01, 0.5).unwrap();
        assert!((r.g_threshold - (0.25 - 0.001f64.sqrt() / 0.25)).abs() < 1e-15);
        assert!((r.g_threshold - 0.12351).abs() < 1e-5);
        assert!(r.m_window_ok && r.m_star_bound > 0.0);
        let r = threshold_boundedness(1.0, &p, 1.0, 0.02, 0.5).unwrap();
        assert!((r.g_threshold + 3.75).abs() < 1e-15);
        assert!(!r.m_window_ok && r.m_star_bound == 0.0);
    }

    #[test]
    fn m_star_terms() {
        // hand evaluation for χ = β = ½, |Ω| = 1, C = 1, M = 0.01
        let p = params(0.5, 0.5);
        let r = threshold_boundedness(0.1, &p, 1.0, 0.01, 0.5).unwrap();
        let eps1: f64 = 1.0 / 0.32 - 17.0 / 9.0;
        let gamma =
            0.125 / 3.0 / (6.0 * eps1).sqrt() + 48.0 * (2.0 / 3.0) / (3.0f64 / 864.0).sqrt();
        let m_bar = 1.0 / (16.0 * gamma);
        let first = (0.25f64 / 4.0).powi(2);
        let second = (0.01f64 * 0.25 / 4.0).powi(2);
        assert!((r.gamma - gamma).abs() < 1e-12 * gamma);
        assert!((r.m_star_bound - first.min(second).min(m_bar)).abs() < 1e-18);
    }

    #[test]
    fn young_constants() {
        for chi in [0.1, 0.5, 0.9] {
            assert!((d1(chi, 1.0 / 6.0) - chi.powi(3) / 3.0).abs() < 1e-14);
        }
        assert!((d2(1.0 / 3.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    /// Tanh-sinh quadrature on `[a, b]`, with node distances to the nearer
    /// endpoint computed directly so that endpoint singularities are resolved.
    fn tanh_sinh(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (h, n) = (1.0 / 64.0, 64 * 6);
        let r = 0.5 * (b - a);
        let mut sum = 0.0;
        for k in -n..=n {
            let t = k as f64 * h;
            let s = std::f64::consts::FRAC_PI_2 * t.sinh();
            let w = std::f64::consts::FRAC_PI_2 * t.cosh() / s.cosh().powi(2);
            // 1 − tanh|s| = 2/(1 + e^{2|s|})
            let gap = r * 2.0 / (1.0 + (2.0 * s.abs()).exp());
            let x = if s < 0.0 { a + gap } else { b - gap };
            if gap > 0.0 && w > 0.0 {
                sum += w * f(x);
            }
        }
        sum * h * r
    }

    /// Double-integral oracle for H. Both integrations are split at `breaks`
    /// (where `f′` is only piecewise smooth). Each inner piece `[L, b]` is
    /// mapped by `σ = L/τ` onto `[L/b, 1]`, giving `∫ f′(L/τ)/τ dτ`; this keeps
    /// the integrand finite for tiny `L` and handles `b = ∞`.
    fn h_oracle(chi: f64, fp: &dyn Fn(f64) -> f64, xi: f64, breaks: &[f64]) -> f64 {
        let inner = |s: f64| {
            let mut lo = s;
            let mut sum = 0.0;
            for &b in breaks.iter().filter(|&&b| b > s) {
                sum += tanh_sinh(&|tau| fp(lo / tau) / tau, lo / b, 1.0);
                lo = b;
            }
            sum + tanh_sinh(&|tau| fp(lo / tau) / tau, 0.0, 1.0)
        };
        let mut lo = 0.0;
        let mut outer = 0.0;
        for &b in breaks.iter().filter(|&&b| b > 0.0 && b < xi) {
            outer += tanh_sinh(&inner, lo, b);
            lo = b;
        }
        -(outer + tanh_sinh(&inner, lo, xi)) / chi
    }

    #[test]
    fn h_matches_double_quadrature() {
        for (chi, beta, xi) in [(0.5, 0.5, 1.0), (0.8, 0.5, 2.0), (0.3, 0.7, 0.6)] {
            let p = params(chi, beta);
            let exact = p.h(xi);
            let fp = |x: f64| beta * x.powf(beta - 1.0);
            assert!(
                (h_oracle(chi, &fp, xi, &[]) - exact).abs() < 1e-6,
                "chi={chi} beta={beta}"
            );
        }
    }

    #[test]
    fn tabulated_h_matches_double_quadrature() {
        let beta = 0.6;
        let s: Vec<f64> = (0..10).map(|k| 0.5 * k as f64).collect();
        let f = s
            .iter()
            .map(|&x| 0.7 * x.powf(beta) / (1.0 + 0.05 * x))
            .collect();
        let table = ConsumptionTable::new(s, f, beta).unwrap();
        let p = params(0.4, beta).with_table(table.clone());
        let breaks = table.samples().0.to_vec();
        let fp = |x: f64| table.derivative(x);
        for xi in [0.2, 1.3, 4.5, 7.0] {
            let exact = p.h(xi);
            let oracle = h_oracle(0.4, &fp, xi, &breaks);
            assert!(
                (oracle - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                "xi={xi}: {exact} vs {oracle}"
            );
            assert!(exact <= 0.0 && -exact <= xi.powf(beta) / (0.4 * (1.0 - beta)) + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn vieta(chi in 1e-6f64..0.999_999) {
            let (lo, hi) = a_window(chi).unwrap();
            prop_assert!((lo + hi - 1.0).abs() <= 1e-12);
            prop_assert!((lo * hi - chi * chi / 4.0).abs() <= 1e-12);
        }

        #[test]
        fn c0_sign_matches_window(ci in 1usize..40, ai in 1usize..80) {
            let chi = ci as f64 / 40.0;
            let a = ai as f64 / 80.0 + 1.0 / 160.0;
            let (lo, hi) = a_window(chi).unwrap();
            let c0 = c0_of(chi, a).unwrap();
            prop_assert_eq!(c0 > 0.0, a > lo && a < hi);
        }

        #[test]
        fn h_is_monotone_and_exact(beta in 0.05f64..0.95, chi in 0.05f64..0.95, x in 0.0f64..50.0, dx in 0.0f64..5.0) {
            let p = params(chi, beta);
            prop_assert!(p.h(x + dx) <= p.h(x));
            let back = -p.h(x) * chi * (1.0 - beta);
            prop_assert!((back - x.powf(beta)).abs() <= 1e-14 * (1.0 + x.powf(beta)));
        }

        #[test]
        fn power_law_envelopes(beta in 0.05f64..0.95, s in 1e-8f64..1e4) {
            let p = params(0.5, beta);
            let f = p.f(s);
            let d = p.fprime(s).value;
            prop_assert!(f >= 0.0 && f <= s.powf(beta));
            prop_assert!(d >= 0.0 && d <= beta * s.powf(beta - 1.0) * (1.0 + 1e-15));
        }

        #[test]
        fn table_envelopes(beta in 0.3f64..0.9, scale in 0.1f64..0.8, s in 1e-6f64..100.0) {
            let xs: Vec<f64> = (0..8).map(|k| (k * k) as f64 * 0.3).collect();
            let fs = xs.iter().map(|&x| scale * x.powf(beta)).collect();
            let p = params(0.5, beta).with_table(ConsumptionTable::new(xs, fs, beta).unwrap());
            let f = p.f(s);
            let d = p.fprime(s).value;
            prop_assert!(f >= 0.0 && f <= s.powf(beta) * (1.0 + 1e-12));
            prop_assert!(d >= -1e-14 && d <= beta * s.powf(beta - 1.0) * (1.0 + 1e-12));
            prop_assert!(p.h(s) <= 0.0);
        }

        #[test]
        fn transform_round_trip(vals in proptest::collection::vec(1e-6f64..1.0, 16)) {
            let g = Grid::unit_square(4).unwrap();
            let p = Params::new(0.5, 0.5, 1.0, 1.0).unwrap();
            let v = ScalarField::from_vec(g, vals).unwrap();
            let back = w_to_v(&v_to_w(&v, &p).unwrap(), &p).unwrap();
            for (a, b) in back.values().iter().zip(v.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs());
            }
        }
    }
}
