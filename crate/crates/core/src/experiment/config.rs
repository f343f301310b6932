//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[grid]`, `[model]`,
//! `[initial]`, `[run]`, `[diagnostics]` and, for sweeps, `[sweep]`. Only
//! `grid.nx`, `model.chi`, `model.beta`, `initial.mass` and `run.t_end` are
//! required; every other key has a default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{FaceAverage, Grid};
use crate::model::{a_window, ConsumptionTable, Params, DEFAULT_S_MIN};
use crate::solver::{
    DecayMode, Formulation, InitialData, PositivityMode, SignalProfile, StepConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub initial: InitialSection,
    pub run: RunSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    /// Defaults to `nx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub chi: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub v0_max: f64,
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    /// Two-column CSV `(s, f(s))`; the power law `s^β` is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Bump,
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalPreset {
    #[default]
    Constant,
    Smooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub preset: Preset,
    pub mass: f64,
    #[serde(default = "default_center")]
    pub center: [f64; 2],
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub signal: SignalPreset,
    /// Amplitude of `w₀` for the smooth signal profile.
    #[serde(default)]
    pub signal_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Fixed step; the adaptive controller still caps it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Time between diagnostics records.
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub face_average: FaceAverage,
    #[serde(default)]
    pub positivity: PositivityMode,
    #[serde(default)]
    pub decay: DecayMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Weight of `∫uw` in the entropy functional; defaults to ½.
    #[serde(default = "half")]
    pub a: f64,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    #[serde(default)]
    pub cgn: CgnSetting,
    /// Multiplier applied to the probed constant.
    #[serde(default = "default_cgn_safety")]
    pub cgn_safety: f64,
    #[serde(default = "default_probe_samples")]
    pub probe_samples: usize,
    /// Window parameter `M` of the threshold report; defaults to half its upper limit.
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m_window: Option<f64>,
    #[serde(default = "default_eps_u")]
    pub eps_u: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            a: half(),
            eps1: default_eps1(),
            eps2: default_eps2(),
            cgn: CgnSetting::Probe,
            cgn_safety: default_cgn_safety(),
            probe_samples: default_probe_samples(),
            m_window: None,
            eps_u: default_eps_u(),
        }
    }
}

/// Axes of a parameter sweep; every combination becomes one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mass: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nx: Vec<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// `cgn = "probe"` or a positive number.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum CgnSetting {
    #[default]
    Probe,
    Value(f64),
}

impl Serialize for CgnSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CgnSetting::Probe => s.serialize_str("probe"),
            CgnSetting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for CgnSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = CgnSetting;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"probe\" or a positive number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<CgnSetting, E> {
                if v == "probe" {
                    Ok(CgnSetting::Probe)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<CgnSetting, E> {
                Ok(CgnSetting::Value(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<CgnSetting, E> {
                Ok(CgnSetting::Value(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<CgnSetting, E> {
                Ok(CgnSetting::Value(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_s_min() -> f64 {
    DEFAULT_S_MIN
}
fn default_center() -> [f64; 2] {
    [0.5, 0.5]
}
fn default_width() -> f64 {
    0.1
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_safety() -> f64 {
    0.4
}
fn default_record_every() -> f64 {
    1e-2
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_eps1() -> f64 {
    1.0 / 6.0
}
fn default_eps2() -> f64 {
    1.0 / 864.0
}
fn default_cgn_safety() -> f64 {
    1.5
}
fn default_probe_samples() -> usize {
    200
}
fn default_eps_u() -> f64 {
    crate::diagnostics::DEFAULT_EPS_U
}
fn default_workers() -> usize {
    1
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(
            key,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn unit_open(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(bad(
            key,
            format!("must lie in the open interval (0, 1), got {v}"),
        ))
    }
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn minimal(nx: usize, chi: f64, beta: f64, mass: f64, t_end: f64) -> Self {
        Self {
            grid: GridSection {
                nx,
                ny: None,
                lx: 1.0,
                ly: 1.0,
            },
            model: ModelSection {
                chi,
                beta,
                v0_max: 1.0,
                s_min: DEFAULT_S_MIN,
                table: None,
            },
            initial: InitialSection {
                preset: Preset::Bump,
                mass,
                center: default_center(),
                width: default_width(),
                signal: SignalPreset::Constant,
                signal_amplitude: 0.0,
            },
            run: RunSection {
                t_end,
                formulation: Formulation::Transformed,
                dt_max: default_dt_max(),
                safety: default_safety(),
                dt: None,
                record_every: default_record_every(),
                snapshot_times: Vec::new(),
                face_average: FaceAverage::Central,
                positivity: PositivityMode::Strict,
                decay: DecayMode::Exponential,
                seed: 0,
                output: default_output(),
            },
            diagnostics: DiagnosticsSection::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx < 2 {
            return Err(bad(
                "grid.nx",
                format!("need at least 2 cells, got {}", g.nx),
            ));
        }
        if let Some(ny) = g.ny {
            if ny < 2 {
                return Err(bad("grid.ny", format!("need at least 2 cells, got {ny}")));
            }
        }
        positive("grid.lx", g.lx)?;
        positive("grid.ly", g.ly)?;

        let m = &self.model;
        unit_open("model.chi", m.chi)?;
        unit_open("model.beta", m.beta)?;
        positive("model.v0_max", m.v0_max)?;
        positive("model.s_min", m.s_min)?;

        let i = &self.initial;
        positive("initial.mass", i.mass)?;
        positive("initial.width", i.width)?;
        if !(i.center[0] >= 0.0 && i.center[0] <= g.lx && i.center[1] >= 0.0 && i.center[1] <= g.ly)
        {
            return Err(bad(
                "initial.center",
                format!("{:?} lies outside the domain", i.center),
            ));
        }
        if !(i.signal_amplitude >= 0.0 && i.signal_amplitude.is_finite()) {
            return Err(bad(
                "initial.signal_amplitude",
                format!("must be nonnegative, got {}", i.signal_amplitude),
            ));
        }

        let r = &self.run;
        if !(r.t_end >= 0.0 && r.t_end.is_finite()) {
            return Err(bad(
                "run.t_end",
                format!("must be nonnegative, got {}", r.t_end),
            ));
        }
        positive("run.dt_max", r.dt_max)?;
        positive("run.safety", r.safety)?;
        if let Some(dt) = r.dt {
            positive("run.dt", dt)?;
        }
        positive("run.record_every", r.record_every)?;
        for &t in &r.snapshot_times {
            if !(t >= 0.0 && t <= r.t_end) {
                return Err(bad(
                    "run.snapshot_times",
                    format!("{t} lies outside [0, t_end]"),
                ));
            }
        }

        let d = &self.diagnostics;
        positive("diagnostics.a", d.a)?;
        positive("diagnostics.eps1", d.eps1)?;
        positive("diagnostics.eps2", d.eps2)?;
        if let CgnSetting::Value(c) = d.cgn {
            positive("diagnostics.cgn", c)?;
        }
        positive("diagnostics.cgn_safety", d.cgn_safety)?;
        if d.probe_samples == 0 {
            return Err(bad("diagnostics.probe_samples", "must be at least 1"));
        }
        if let Some(mw) = d.m_window {
            positive("diagnostics.M", mw)?;
        }
        positive("diagnostics.eps_u", d.eps_u)?;

        if let Some(s) = &self.sweep {
            if s.chi.is_empty() && s.beta.is_empty() && s.mass.is_empty() && s.nx.is_empty() {
                return Err(bad("sweep", "needs at least one nonempty axis"));
            }
            for &c in &s.chi {
                unit_open("sweep.chi", c)?;
            }
            for &b in &s.beta {
                unit_open("sweep.beta", b)?;
            }
            for &x in &s.mass {
                positive("sweep.mass", x)?;
            }
            for &n in &s.nx {
                if n < 2 {
                    return Err(bad("sweep.nx", format!("need at least 2 cells, got {n}")));
                }
            }
            if s.workers == 0 {
                return Err(bad("sweep.workers", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Non-fatal remarks, currently an entropy weight outside the admissible window.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok((lo, hi)) = a_window(self.model.chi) {
            let a = self.diagnostics.a;
            if !(a > lo && a < hi) {
                out.push(format!(
                    "diagnostics.a = {a} lies outside the admissible window ({lo}, {hi}); the lower bound on F does not apply"
                ));
            }
        }
        out
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny.unwrap_or(g.nx), g.lx, g.ly)
    }

    pub fn build_params(&self) -> Result<Params> {
        let m = &self.model;
        let mut p = Params::new(m.chi, m.beta, m.v0_max, self.grid.lx * self.grid.ly)?;
        p.s_min = m.s_min;
        if let Some(path) = &m.table {
            p = p.with_table(ConsumptionTable::from_csv(path, m.beta)?);
        }
        Ok(p)
    }

    pub fn initial_data(&self) -> InitialData {
        let i = &self.initial;
        match i.preset {
            Preset::Bump => InitialData::Bump {
                mass: i.mass,
                center: (i.center[0], i.center[1]),
                width: i.width,
            },
            Preset::Uniform => InitialData::Uniform { mass: i.mass },
        }
    }

    pub fn signal_profile(&self) -> SignalProfile {
        match self.initial.signal {
            SignalPreset::Constant => SignalProfile::Constant,
            SignalPreset::Smooth => SignalProfile::Smooth {
                amplitude: self.initial.signal_amplitude,
            },
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            face_average: self.run.face_average,
            positivity: self.run.positivity,
            decay: self.run.decay,
            safety: self.run.safety,
            dt_max: self
                .run
                .dt
                .map_or(self.run.dt_max, |dt| dt.min(self.run.dt_max)),
            ..StepConfig::default()
        }
    }
}

/// Parses and validates a config document. Relative table paths are
/// resolved against `base`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if let (Some(base), Some(table)) = (base, cfg.model.table.as_mut()) {
        if table.is_relative() {
            *table = base.join(&*table);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent())
}

pub fn config_to_string(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| bad("config", e.to_string()))
}

pub fn write_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::write(path, config_to_string(cfg)?).map_err(|e| Error::io(path, e))
}

/// Recovers the dotted key an error refers to from the message and the span.
fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    let named = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"));
    let (section, local) = match e.span() {
        // a missing key is reported on the header of the table that lacks it
        Some(sp) if text[sp.clone()].starts_with('[') => (
            text[sp].trim_matches(['[', ']']).trim().to_string(),
            named.map(str::to_string),
        ),
        Some(sp) => {
            let line_start = text[..sp.start].rfind('\n').map_or(0, |p| p + 1);
            let line = text[line_start..].lines().next().unwrap_or("");
            let local = named
                .map(str::to_string)
                .or_else(|| line.split_once('=').map(|(k, _)| k.trim().to_string()));
            (section_at(text, sp.start), local)
        }
        None => (String::new(), named.map(str::to_string)),
    };
    let key = match local {
        Some(l) if !section.is_empty() => format!("{section}.{l}"),
        Some(l) => l,
        None if !section.is_empty() => section,
        None => "config".to_string(),
    };
    Error::Config { key, message }
}

/// Name of the `[section]` in force at byte offset `pos`.
fn section_at(text: &str, pos: usize) -> String {
    text[..pos.min(text.len())]
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            (l.starts_with('[') && l.ends_with(']'))
                .then(|| l.trim_matches(['[', ']']).trim().to_string())
        })
        .next_back()
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "
[grid]
nx = 32
[model]
chi = 0.5
beta = 0.5
[initial]
mass = 0.2
[run]
t_end = 1.0
";

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL, None).unwrap();
        assert_eq!(c, ExperimentConfig::minimal(32, 0.5, 0.5, 0.2, 1.0));
        assert_eq!(c.diagnostics.a, 0.5);
        assert_eq!(c.diagnostics.cgn, CgnSetting::Probe);
        assert!(c.warnings().is_empty());
        assert_eq!(c.build_grid().unwrap().ny, 32);
    }

    #[test]
    fn chi_out_of_range_names_the_key() {
        let e = parse_config_str(&MINIMAL.replace("chi = 0.5", "chi = 1.2"), None).unwrap_err();
        let text = e.to_string();
        assert!(text.contains("chi") && text.contains("(0, 1)"), "{text}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let e = parse_config_str(
            &MINIMAL.replace("beta = 0.5", "beta = 0.5\ngamma = 2"),
            None,
        )
        .unwrap_err();
        assert_eq!(key_of(e), "model.gamma");
        let e = parse_config_str(&MINIMAL.replace("beta = 0.5", ""), None).unwrap_err();
        assert_eq!(key_of(e), "model.beta");
        let e =
            parse_config_str(&MINIMAL.replace("mass = 0.2", "mass = \"lots\""), None).unwrap_err();
        assert_eq!(key_of(e), "initial.mass");
        let e = parse_config_str(&format!("{MINIMAL}[diagnostics]\ncgn = \"guess\"\n"), None)
            .unwrap_err();
        assert_eq!(key_of(e), "diagnostics.cgn");
        let e = parse_config_str("[grid]\nnx = 4\n", None).unwrap_err();
        assert_eq!(key_of(e), "model");
    }

    #[test]
    fn a_outside_window_is_a_warning() {
        let c = parse_config_str(
            &format!(
                "{}[diagnostics]\na = 0.05\ncgn = 2\n",
                MINIMAL.replace("chi = 0.5", "chi = 0.9")
            ),
            None,
        )
        .unwrap();
        assert_eq!(c.diagnostics.cgn, CgnSetting::Value(2.0));
        let w = c.warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("diagnostics.a"));
    }

    #[test]
    fn sweep_section_is_validated() {
        let e =
            parse_config_str(&format!("{MINIMAL}[sweep]\nbeta = [0.5, 1.5]\n"), None).unwrap_err();
        assert_eq!(key_of(e), "sweep.beta");
        let e = parse_config_str(&format!("{MINIMAL}[sweep]\nworkers = 2\n"), None).unwrap_err();
        assert_eq!(key_of(e), "sweep");
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            (
                2usize..200,
                proptest::option::of(2usize..200),
                0.1f64..5.0,
                0.1f64..5.0,
            ),
            (0.01f64..0.99, 0.01f64..0.99, 0.1f64..10.0),
            (
                1e-6f64..100.0,
                0.0f64..1.0,
                0.0f64..1.0,
                0.01f64..1.0,
                any::<bool>(),
                0.0f64..3.0,
            ),
            (
                0.0f64..50.0,
                1e-6f64..1.0,
                proptest::option::of(1e-6f64..1e-2),
                any::<u64>(),
                any::<bool>(),
            ),
            (
                0.05f64..0.95,
                proptest::option::of(0.1f64..10.0),
                proptest::option::of(1e-4f64..1e-2),
            ),
            proptest::option::of((
                proptest::collection::vec(0.01f64..0.99, 0..3),
                proptest::collection::vec(2usize..100, 1..3),
                1usize..8,
            )),
        )
            .prop_map(|(g, m, i, r, d, s)| {
                let mut c = ExperimentConfig::minimal(g.0, m.0, m.1, i.0, r.0);
                c.grid.ny = g.1;
                c.grid.lx = g.2;
                c.grid.ly = g.3;
                c.model.v0_max = m.2;
                c.initial.center = [i.1 * g.2, i.2 * g.3];
                c.initial.width = i.3;
                if i.4 {
                    c.initial.preset = Preset::Uniform;
                    c.initial.signal = SignalPreset::Smooth;
                }
                c.initial.signal_amplitude = i.5;
                c.run.record_every = r.1;
                c.run.dt = r.2;
                c.run.seed = r.3;
                c.run.snapshot_times = vec![0.0, 0.5 * r.0, r.0];
                if r.4 {
                    c.run.formulation = Formulation::Original;
                    c.run.face_average = FaceAverage::Upwind;
                    c.run.positivity = PositivityMode::Clip;
                    c.run.decay = DecayMode::Explicit;
                }
                c.diagnostics.a = d.0;
                if let Some(v) = d.1 {
                    c.diagnostics.cgn = CgnSetting::Value(v);
                }
                c.diagnostics.m_window = d.2;
                c.sweep = s.map(|(chi, nx, workers)| SweepSection {
                    chi,
                    nx,
                    workers,
                    ..SweepSection::default()
                });
                c
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(c in arb_config()) {
            c.validate().unwrap();
            let text = config_to_string(&c).unwrap();
            prop_assert_eq!(parse_config_str(&text, None).unwrap(), c);
        }
    }
}
