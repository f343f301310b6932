//! Single-run driver with resumable, deterministic output.
//!
//! Output directory layout:
//!
//! ```text
//! config.toml          resolved configuration
//! thresholds.toml      threshold report and the constant C_GN in use
//! diagnostics.csv      one DiagnosticsRecord per record time
//! audit_inputs.csv     extra integrals for the inequality audit
//! audit.csv            inequality margins (written at the end)
//! snapshots/index.csv  time and file names of every snapshot
//! snapshots/*.cplf     CPLF1 fields
//! checkpoint/          resume marker plus the state it points to
//! summary.toml         invariant verdicts and run statistics
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_g_monotone, gn_probe, inequality_audit, invariant_violations, read_csv, record_full,
    smallness_check, write_csv, AuditInputs, CsvSink, DiagnosticsRecord, GnMode,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{g_threshold, threshold_boundedness, Params, ThresholdReport};
use crate::snapshot;
use crate::solver::{initial_state, Formulation, State, Stepper};

use super::config::{write_config, CgnSetting, ExperimentConfig};

/// Relative mass drift tolerated by the summary.
pub const MASS_DRIFT_TOL: f64 = 1e-12;
/// Waiting time between the detected `t*` and `t₀`.
pub const TAU: f64 = 1.0;

const MARKER: &str = "checkpoint/resume.toml";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Continue from the checkpoint marker when one exists.
    pub resume: bool,
    /// Stop (as if killed) after this many steps in this invocation.
    pub max_steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum RunStatus {
    Complete(Summary),
    Interrupted { t: f64, steps: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgnInfo {
    pub source: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_values: Vec<f64>,
    pub safety: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub cgn: CgnInfo,
    pub report: ThresholdReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantFlags {
    pub f_lower_bound: bool,
    pub g_upper_bound: bool,
    pub gradw_bound: bool,
    pub int_h_nonpositive: bool,
    pub mass_conserved: bool,
    pub min_v_positive: bool,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub pass: bool,
    pub from_t: f64,
    pub slack: f64,
    pub intervals: usize,
    pub max_increment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub t_final: f64,
    pub steps: u64,
    pub records: usize,
    pub max_mass_drift: f64,
    /// `sup_t sup_x u` over the records.
    pub sup_u_max: f64,
    pub sup_u_final: f64,
    pub clip_mass_total: f64,
    pub cg_iterations: u64,
    pub max_cfl: f64,
    pub cgn: f64,
    pub g_threshold: f64,
    /// First record time at which the smallness condition holds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_monotone: Option<MonotoneSummary>,
    pub warnings: Vec<String>,
    pub invariants: InvariantFlags,
}

/// Resume marker: where to pick the run up and the counters accumulated so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Marker {
    step: u64,
    t: f64,
    next_record: u64,
    next_snapshot: usize,
    u_path: String,
    signal_path: String,
    cgn: f64,
    clip_mass: f64,
    cg_iterations: u64,
    max_cfl: f64,
}

/// Time of record number `k`, computed without accumulation.
fn record_time(k: u64, every: f64, t_end: f64) -> f64 {
    (k as f64 * every).min(t_end)
}

fn record_count(every: f64, t_end: f64) -> u64 {
    // the final record is always at t_end
    let full = (t_end / every * (1.0 + 1e-12)).floor() as u64;
    if record_time(full, every, t_end) < t_end {
        full + 2
    } else {
        full + 1
    }
}

/// Resolves `cgn = "probe"` by probing every mode on the run grid.
pub fn resolve_cgn(cfg: &ExperimentConfig, grid: Grid) -> Result<CgnInfo> {
    let d = &cfg.diagnostics;
    match d.cgn {
        CgnSetting::Value(v) => Ok(CgnInfo {
            source: "config".into(),
            value: v,
            probe_modes: Vec::new(),
            probe_values: Vec::new(),
            safety: 1.0,
        }),
        CgnSetting::Probe => {
            let mut values = Vec::new();
            for m in GnMode::ALL {
                values.push(gn_probe(grid, d.probe_samples, m, cfg.run.seed)?);
            }
            let max = values.iter().copied().fold(0.0, f64::max);
            Ok(CgnInfo {
                source: "probe".into(),
                value: d.cgn_safety * max,
                probe_modes: GnMode::ALL.iter().map(|m| m.name().to_string()).collect(),
                probe_values: values,
                safety: d.cgn_safety,
            })
        }
    }
}

pub fn threshold_file(cfg: &ExperimentConfig, p: &Params, cgn: CgnInfo) -> Result<ThresholdFile> {
    let m_window = cfg
        .diagnostics
        .m_window
        .unwrap_or(0.5 * 9.0 / (17.0 * 32.0 * cgn.value));
    let report =
        threshold_boundedness(cfg.initial.mass, p, cgn.value, m_window, cfg.diagnostics.a)?;
    Ok(ThresholdFile { cgn, report })
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        toml::to_string(value).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let tmp = path.with_extension("toml.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    read_toml(&dir.join("summary.toml"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SnapshotRow {
    t: f64,
    index: usize,
    u_file: String,
    signal_file: String,
}

struct Sinks {
    diagnostics: CsvSink,
    inputs: CsvSink,
    snapshots: CsvSink,
}

struct Driver<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    params: Params,
    stepper: Stepper,
    sinks: Sinks,
    record_times: Vec<f64>,
    snapshot_times: Vec<f64>,
    marker: Marker,
    violations: Vec<String>,
}

impl Driver<'_> {
    fn next_event(&self) -> f64 {
        let mut t = self.cfg.run.t_end;
        if let Some(&r) = self.record_times.get(self.marker.next_record as usize) {
            t = t.min(r);
        }
        if let Some(&s) = self.snapshot_times.get(self.marker.next_snapshot) {
            t = t.min(s);
        }
        t
    }

    /// Emits every record and snapshot due at `s.t`, then checkpoints.
    fn emit(&mut self, s: &State) -> Result<()> {
        let mut due = false;
        while self.record_times.get(self.marker.next_record as usize) == Some(&s.t) {
            let (rec, inputs) = record_full(
                s,
                &self.params,
                self.cfg.diagnostics.a,
                self.cfg.diagnostics.eps_u,
            )?;
            for v in invariant_violations(&rec, &self.params) {
                self.violations.push(format!("t = {}: {v}", rec.t));
            }
            self.sinks.diagnostics.push(&rec)?;
            self.sinks.inputs.push(&inputs)?;
            self.marker.next_record += 1;
            due = true;
        }
        while self.snapshot_times.get(self.marker.next_snapshot) == Some(&s.t) {
            let k = self.marker.next_snapshot;
            let sig = match s.formulation {
                Formulation::Transformed => "w",
                Formulation::Original => "v",
            };
            let row = SnapshotRow {
                t: s.t,
                index: k,
                u_file: format!("u_{k:04}.cplf"),
                signal_file: format!("{sig}_{k:04}.cplf"),
            };
            let snaps = self.dir.join("snapshots");
            snapshot::write(&snaps.join(&row.u_file), &s.u)?;
            snapshot::write(&snaps.join(&row.signal_file), &s.signal)?;
            self.sinks.snapshots.push(&row)?;
            self.marker.next_snapshot += 1;
            due = true;
        }
        if due {
            self.checkpoint(s)?;
        }
        Ok(())
    }

    fn checkpoint(&mut self, s: &State) -> Result<()> {
        let dir = self.dir.join("checkpoint");
        let old = (self.marker.u_path.clone(), self.marker.signal_path.clone());
        self.marker.t = s.t;
        self.marker.u_path = format!("u_{:010}.cplf", self.marker.step);
        self.marker.signal_path = format!("signal_{:010}.cplf", self.marker.step);
        snapshot::write(&dir.join(&self.marker.u_path), &s.u)?;
        snapshot::write(&dir.join(&self.marker.signal_path), &s.signal)?;
        write_toml(&self.dir.join(MARKER), &self.marker)?;
        for f in [old.0, old.1] {
            if !f.is_empty() && f != self.marker.u_path && f != self.marker.signal_path {
                let _ = fs::remove_file(dir.join(f));
            }
        }
        Ok(())
    }
}

/// Runs (or resumes) the scenario described by `cfg` in `cfg.run.output`.
pub fn run_scenario(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunStatus> {
    cfg.validate()?;
    let dir = cfg.run.output.clone();
    let grid = cfg.build_grid()?;
    let params = cfg.build_params()?;
    let t_end = cfg.run.t_end;

    let marker_path = dir.join(MARKER);
    let resumed: Option<Marker> = if opts.resume && marker_path.exists() {
        Some(read_toml(&marker_path)?)
    } else {
        None
    };

    let (state, marker, sinks) = match resumed {
        Some(marker) => {
            let ck = dir.join("checkpoint");
            let u = snapshot::read(&ck.join(&marker.u_path))?;
            let signal = snapshot::read(&ck.join(&marker.signal_path))?;
            if *u.grid() != grid {
                return Err(Error::Config {
                    key: "grid".into(),
                    message: "checkpoint grid differs from the config".into(),
                });
            }
            let state = State {
                u,
                signal,
                t: marker.t,
                formulation: cfg.run.formulation,
            };
            let sinks = Sinks {
                diagnostics: CsvSink::resume(&dir.join("diagnostics.csv"), marker.t)?,
                inputs: CsvSink::resume(&dir.join("audit_inputs.csv"), marker.t)?,
                snapshots: CsvSink::resume(&dir.join("snapshots/index.csv"), marker.t)?,
            };
            (state, marker, sinks)
        }
        None => {
            for sub in ["checkpoint", "snapshots"] {
                let p = dir.join(sub);
                if p.exists() {
                    fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
                }
                fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
            for f in ["summary.toml", "audit.csv"] {
                let _ = fs::remove_file(dir.join(f));
            }
            write_config(&dir.join("config.toml"), cfg)?;
            let cgn = resolve_cgn(cfg, grid)?;
            let cgn_value = cgn.value;
            write_toml(
                &dir.join("thresholds.toml"),
                &threshold_file(cfg, &params, cgn)?,
            )?;
            let state = initial_state(
                grid,
                &cfg.initial_data(),
                &cfg.signal_profile(),
                cfg.model.v0_max,
                cfg.run.formulation,
            )?;
            let marker = Marker {
                step: 0,
                t: 0.0,
                next_record: 0,
                next_snapshot: 0,
                u_path: String::new(),
                signal_path: String::new(),
                cgn: cgn_value,
                clip_mass: 0.0,
                cg_iterations: 0,
                max_cfl: 0.0,
            };
            let sinks = Sinks {
                diagnostics: CsvSink::create(&dir.join("diagnostics.csv"))?,
                inputs: CsvSink::create(&dir.join("audit_inputs.csv"))?,
                snapshots: CsvSink::create(&dir.join("snapshots/index.csv"))?,
            };
            (state, marker, sinks)
        }
    };

    let mut snapshot_times = cfg.run.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let n_rec = record_count(cfg.run.record_every, t_end);
    let mut driver = Driver {
        cfg,
        dir: dir.clone(),
        stepper: Stepper::new(params.clone(), grid, cfg.step_config())?,
        params,
        sinks,
        record_times: (0..n_rec)
            .map(|k| record_time(k, cfg.run.record_every, t_end))
            .collect(),
        snapshot_times,
        marker,
        violations: Vec::new(),
    };

    let outcome = advance(&mut driver, state, opts);
    match outcome {
        Ok(Some((t, steps))) => Ok(RunStatus::Interrupted { t, steps }),
        Ok(None) => {
            let summary = finish(&driver, None)?;
            if summary.invariants.all_pass {
                Ok(RunStatus::Complete(summary))
            } else {
                Err(Error::Invariant {
                    t: summary.t_final,
                    message: first_failure(&driver, &summary),
                })
            }
        }
        Err(e) => {
            // keep partial outputs and record why the run stopped
            let _ = finish(&driver, Some(&e));
            Err(e)
        }
    }
}

fn first_failure(driver: &Driver<'_>, s: &Summary) -> String {
    driver.violations.first().cloned().unwrap_or_else(|| {
        format!(
            "mass drift {:.3e} exceeds {MASS_DRIFT_TOL:e}",
            s.max_mass_drift
        )
    })
}

/// Steps to `t_end`; returns `Some((t, steps))` when stopped by `max_steps`.
fn advance(
    driver: &mut Driver<'_>,
    mut state: State,
    opts: &RunOptions,
) -> Result<Option<(f64, u64)>> {
    let t_end = driver.cfg.run.t_end;
    if driver.marker.step == 0 && driver.marker.next_record == 0 {
        driver.emit(&state)?;
    }
    let mut taken = 0u64;
    while state.t < t_end {
        if opts.max_steps.is_some_and(|m| taken >= m) {
            return Ok(Some((state.t, driver.marker.step)));
        }
        let target = driver.next_event();
        let mut dt = driver.stepper.adaptive_dt(&state);
        let land = state.t + dt >= target - 1e-12 * target.abs().max(1.0);
        if land {
            dt = target - state.t;
        }
        let (mut next, report) = driver.stepper.step(&state, dt)?;
        if land {
            next.t = target;
        }
        state = next;
        taken += 1;
        driver.marker.step += 1;
        driver.marker.clip_mass += report.positivity_clip_mass;
        driver.marker.cg_iterations += report.cg_iterations as u64;
        driver.marker.max_cfl = driver.marker.max_cfl.max(report.max_cfl);
        if land {
            driver.emit(&state)?;
        }
    }
    Ok(None)
}

/// Reads the records back and writes the audit and the summary.
fn finish(driver: &Driver<'_>, error: Option<&Error>) -> Result<Summary> {
    let dir = &driver.dir;
    let cfg = driver.cfg;
    let p = &driver.params;
    let cgn = driver.marker.cgn;
    let records: Vec<DiagnosticsRecord> = read_csv(&dir.join("diagnostics.csv"))?;
    let inputs: Vec<AuditInputs> = read_csv(&dir.join("audit_inputs.csv"))?;
    let audit = inequality_audit(
        &records,
        &inputs,
        p,
        cgn,
        cfg.diagnostics.eps1,
        cfg.diagnostics.eps2,
    );
    write_csv(&dir.join("audit.csv"), &audit)?;

    let mut flags = InvariantFlags {
        f_lower_bound: true,
        g_upper_bound: true,
        gradw_bound: true,
        int_h_nonpositive: true,
        mass_conserved: true,
        min_v_positive: true,
        all_pass: true,
    };
    for r in &records {
        for v in invariant_violations(r, p) {
            if v.starts_with("F =") {
                flags.f_lower_bound = false;
            } else if v.starts_with("G =") {
                flags.g_upper_bound = false;
            } else if v.starts_with("∫|∇w|²") {
                flags.gradw_bound = false;
            } else {
                flags.int_h_nonpositive = false;
            }
        }
        if !(r.min_v > 0.0) {
            flags.min_v_positive = false;
        }
    }
    let m0 = records.first().map_or(cfg.initial.mass, |r| r.mass);
    let max_mass_drift = records
        .iter()
        .map(|r| ((r.mass - m0) / m0).abs())
        .fold(0.0, f64::max);
    flags.mass_conserved = max_mass_drift <= MASS_DRIFT_TOL;
    flags.all_pass = flags.f_lower_bound
        && flags.g_upper_bound
        && flags.gradw_bound
        && flags.int_h_nonpositive
        && flags.mass_conserved
        && flags.min_v_positive;

    let mut t_star = None;
    for r in &records {
        if smallness_check(r.g, m0, p, cgn)? {
            t_star = Some(r.t);
            break;
        }
    }
    let g_monotone = t_star.map(|ts| {
        let g_star = records.iter().find(|r| r.t == ts).map_or(0.0, |r| r.g);
        let slack = 1e-6 * g_star.abs() + 1e-10;
        let rep = check_g_monotone(&records, ts, slack);
        MonotoneSummary {
            pass: rep.pass,
            from_t: ts,
            slack,
            intervals: rep.intervals_checked,
            max_increment: if rep.intervals_checked == 0 {
                0.0
            } else {
                rep.max_increment
            },
        }
    });
    let status = match error {
        None if flags.all_pass => "complete",
        None => "invariant_violation",
        Some(Error::Invariant { .. }) => "invariant_violation",
        Some(_) => "numerical_failure",
    };
    let summary = Summary {
        status: status.into(),
        error: error.map(|e| e.to_string()),
        t_final: records.last().map_or(0.0, |r| r.t),
        steps: driver.marker.step,
        records: records.len(),
        max_mass_drift,
        sup_u_max: records
            .iter()
            .map(|r| r.sup_u)
            .fold(f64::NEG_INFINITY, f64::max),
        sup_u_final: records.last().map_or(f64::NAN, |r| r.sup_u),
        clip_mass_total: driver.marker.clip_mass,
        cg_iterations: driver.marker.cg_iterations,
        max_cfl: driver.marker.max_cfl,
        cgn,
        g_threshold: g_threshold(m0, p, cgn),
        t_star,
        t0: t_star.map(|t| t + TAU),
        tau: TAU,
        g_monotone,
        warnings: cfg.warnings(),
        invariants: flags,
    };
    write_toml(&dir.join("summary.toml"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_schedule_ends_at_t_end() {
        assert_eq!(record_count(0.1, 1.0), 11);
        assert_eq!(record_time(10, 0.1, 1.0), 1.0);
        assert_eq!(record_count(0.3, 1.0), 5);
        assert_eq!(record_time(4, 0.3, 1.0), 1.0);
        assert_eq!(record_count(0.5, 0.0), 1);
        assert_eq!(record_count(1e-2, 10.0), 1001);
    }
}
