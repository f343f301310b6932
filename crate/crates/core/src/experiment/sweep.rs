//! Cartesian parameter sweeps, one isolated output directory per cell.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::diagnostics::write_csv;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{run_scenario, RunOptions, RunStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepIndexRow {
    pub dir: String,
    pub chi: f64,
    pub beta: f64,
    pub mass: f64,
    pub nx: usize,
    pub status: String,
    pub exit_code: i32,
    pub sup_u_max: f64,
    pub all_invariants: bool,
}

/// Directory name of a sweep cell. Every axis appears with its shortest
/// round-trip decimal form, so distinct cells get distinct names.
pub fn cell_dir_name(chi: f64, beta: f64, mass: f64, nx: usize) -> String {
    format!("chi={chi}_beta={beta}_mass={mass}_nx={nx}")
}

/// One config per combination of the sweep axes, in row-major axis order
/// `chi`, `beta`, `mass`, `nx`; axes that are not swept keep the template value.
pub fn sweep_cells(template: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let axes = template.sweep.as_ref().ok_or_else(|| Error::Config {
        key: "sweep".into(),
        message: "the config has no [sweep] section".into(),
    })?;
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let chis = or(&axes.chi, template.model.chi);
    let betas = or(&axes.beta, template.model.beta);
    let masses = or(&axes.mass, template.initial.mass);
    let nxs = if axes.nx.is_empty() {
        vec![template.grid.nx]
    } else {
        axes.nx.clone()
    };
    let mut out = Vec::new();
    for &chi in &chis {
        for &beta in &betas {
            for &mass in &masses {
                for &nx in &nxs {
                    let mut c = template.clone();
                    c.sweep = None;
                    c.model.chi = chi;
                    c.model.beta = beta;
                    c.initial.mass = mass;
                    if template.grid.ny.is_none() || !axes.nx.is_empty() {
                        c.grid.ny = None;
                    }
                    c.grid.nx = nx;
                    c.run.output = template.run.output.join(cell_dir_name(chi, beta, mass, nx));
                    c.validate()?;
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

/// Runs every cell with `workers` threads and writes `sweep_index.csv`.
pub fn run_sweep(template: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<SweepIndexRow>> {
    let cells = sweep_cells(template)?;
    let workers = template
        .sweep
        .as_ref()
        .map_or(1, |s| s.workers)
        .min(cells.len())
        .max(1);
    std::fs::create_dir_all(&template.run.output).map_err(|e| Error::Io {
        path: template.run.output.clone(),
        source: e,
    })?;
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepIndexRow>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(c) = cells.get(k) else { break };
                let row = run_cell(c, opts);
                rows.lock().expect("no panics while holding the lock")[k] = Some(row);
            });
        }
    });
    let rows: Vec<SweepIndexRow> = rows
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();
    write_csv(&template.run.output.join("sweep_index.csv"), &rows)?;
    Ok(rows)
}

fn run_cell(c: &ExperimentConfig, opts: &RunOptions) -> SweepIndexRow {
    let mut row = SweepIndexRow {
        dir: c
            .run
            .output
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        chi: c.model.chi,
        beta: c.model.beta,
        mass: c.initial.mass,
        nx: c.grid.nx,
        status: String::new(),
        exit_code: 0,
        sup_u_max: f64::NAN,
        all_invariants: false,
    };
    match run_scenario(c, opts) {
        Ok(RunStatus::Complete(s)) => {
            row.status = s.status;
            row.sup_u_max = s.sup_u_max;
            row.all_invariants = s.invariants.all_pass;
        }
        Ok(RunStatus::Interrupted { .. }) => row.status = "interrupted".into(),
        Err(e) => {
            row.exit_code = e.exit_code();
            row.status = match e {
                Error::Invariant { .. } => "invariant_violation".into(),
                _ => "failed".into(),
            };
            if let Ok(s) = super::run::read_summary(&c.run.output) {
                row.sup_u_max = s.sup_u_max;
            }
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::SweepSection;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn cartesian_cells() {
        let mut t = ExperimentConfig::minimal(8, 0.5, 0.5, 1.0, 0.0);
        t.sweep = Some(SweepSection {
            beta: vec![0.25, 0.5, 0.75],
            mass: vec![0.01, 1.0],
            ..SweepSection::default()
        });
        let cells = sweep_cells(&t).unwrap();
        assert_eq!(cells.len(), 6);
        assert!(cells
            .iter()
            .all(|c| c.sweep.is_none() && c.model.chi == 0.5));
        assert_eq!(
            cells[1].run.output,
            t.run.output.join("chi=0.5_beta=0.25_mass=1_nx=8")
        );
    }

    proptest! {
        #[test]
        fn names_are_injective(
            a in proptest::collection::vec((0.01f64..0.99, 0.01f64..0.99, 1e-6f64..1e3, 2usize..1000), 2..20)
        ) {
            let distinct: HashSet<(u64, u64, u64, usize)> =
                a.iter().map(|&(c, b, m, n)| (c.to_bits(), b.to_bits(), m.to_bits(), n)).collect();
            let names: HashSet<String> = a.iter().map(|&(c, b, m, n)| cell_dir_name(c, b, m, n)).collect();
            prop_assert_eq!(names.len(), distinct.len());
        }
    }
}
