use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cplab::diagnostics::{gn_probe_trace, GnMode};
use cplab::experiment::{parse_config, run_scenario, run_sweep, verify_run, RunOptions, RunStatus};
use cplab::grid::Grid;
use cplab::model::{threshold_boundedness, Params};
use cplab::solver::{mms_convergence, observed_orders, MmsCase, MmsOptions};
use cplab::Result;

#[derive(Parser)]
#[command(
    name = "cplab",
    version,
    about = "Chemotaxis-consumption simulator and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario described by a config file
    Run {
        config: PathBuf,
        /// Continue from the checkpoint in the output directory
        #[arg(long)]
        resume: bool,
        /// Override `run.output`
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every cell of the `[sweep]` section
    Sweep {
        config: PathBuf,
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override `sweep.workers`
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Empirical lower bounds for the interpolation constants
    ProbeGn {
        #[arg(long, default_value_t = 64)]
        nx: usize,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        lx: f64,
        #[arg(long, default_value_t = 1.0)]
        ly: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// ineq_4_2_2, ineq_L3 or ladyzhenskaya; all modes when omitted
        #[arg(long)]
        mode: Option<String>,
        /// Print the running maximum after every sample
        #[arg(long)]
        trace: bool,
    },
    /// Re-check the hard invariants of a run directory from its CSV
    Verify { dir: PathBuf },
    /// Manufactured-solution convergence table
    Mms {
        #[arg(long, value_enum, default_value_t = CaseArg::All)]
        case: CaseArg,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 16)]
        n0: usize,
        #[arg(long, default_value_t = 0.05)]
        t_end: f64,
        #[arg(long, default_value_t = 0.25)]
        dt_coeff: f64,
    },
    /// Print the smallness thresholds for given parameters
    Thresholds {
        #[arg(long)]
        chi: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        cgn: f64,
        /// Window parameter M; half its upper limit when omitted
        #[arg(long = "M")]
        m_window: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        lx: f64,
        #[arg(long, default_value_t = 1.0)]
        ly: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Diffusion,
    Transformed,
    Original,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run {
            config,
            resume,
            output,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(o) = output {
                cfg.run.output = o;
            }
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let opts = RunOptions {
                resume,
                max_steps: None,
            };
            match run_scenario(&cfg, &opts)? {
                RunStatus::Complete(s) => {
                    println!(
                        "{}: {} after {} steps, t = {}, sup u = {}, invariants {}",
                        cfg.run.output.display(),
                        s.status,
                        s.steps,
                        s.t_final,
                        s.sup_u_max,
                        if s.invariants.all_pass {
                            "pass"
                        } else {
                            "FAIL"
                        }
                    );
                    Ok(0)
                }
                RunStatus::Interrupted { t, steps } => {
                    println!("interrupted at t = {t} after {steps} steps");
                    Ok(0)
                }
            }
        }
        Command::Sweep {
            config,
            resume,
            output,
            workers,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(o) = output {
                cfg.run.output = o;
            }
            if let (Some(w), Some(s)) = (workers, cfg.sweep.as_mut()) {
                s.workers = w.max(1);
            }
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let opts = RunOptions {
                resume,
                max_steps: None,
            };
            let rows = run_sweep(&cfg, &opts)?;
            for r in &rows {
                println!("{}\t{}\texit {}", r.dir, r.status, r.exit_code);
            }
            println!(
                "index: {}",
                cfg.run.output.join("sweep_index.csv").display()
            );
            Ok(rows.iter().map(|r| r.exit_code as u8).max().unwrap_or(0))
        }
        Command::ProbeGn {
            nx,
            ny,
            lx,
            ly,
            samples,
            seed,
            mode,
            trace,
        } => {
            let grid = Grid::new(nx, ny.unwrap_or(nx), lx, ly)?;
            let modes = match mode {
                Some(m) => vec![m.parse::<GnMode>()?],
                None => GnMode::ALL.to_vec(),
            };
            if trace {
                println!("mode,sample,running_max");
            } else {
                println!("mode,value");
            }
            for m in modes {
                let tr = gn_probe_trace(grid, samples, m, seed)?;
                if trace {
                    for (k, v) in tr.iter().enumerate() {
                        println!("{},{},{v}", m.name(), k + 1);
                    }
                } else {
                    println!("{},{}", m.name(), tr[tr.len() - 1]);
                }
            }
            Ok(0)
        }
        Command::Verify { dir } => {
            let r = verify_run(&dir)?;
            println!("{} records checked", r.rows);
            for v in &r.violations {
                println!("violation: {v}");
            }
            match r.summary_agrees {
                Some(true) => println!("summary agrees with the CSV"),
                Some(false) => println!("summary DISAGREES with the CSV"),
                None => println!("no summary to compare"),
            }
            Ok(if r.ok() { 0 } else { 4 })
        }
        Command::Mms {
            case,
            levels,
            n0,
            t_end,
            dt_coeff,
        } => {
            let opts = MmsOptions {
                n0,
                t_end,
                dt_coeff,
                ..MmsOptions::default()
            };
            let cases = match case {
                CaseArg::Diffusion => vec![MmsCase::Diffusion],
                CaseArg::Transformed => vec![MmsCase::Transformed],
                CaseArg::Original => vec![MmsCase::Original],
                CaseArg::All => vec![MmsCase::Diffusion, MmsCase::Transformed, MmsCase::Original],
            };
            println!("case,n,h,dt,steps,error,order");
            for c in cases {
                let table = mms_convergence(c, levels, &opts)?;
                let orders = observed_orders(&table);
                for (k, l) in table.iter().enumerate() {
                    let order = if k == 0 {
                        String::new()
                    } else {
                        format!("{:.4}", orders[k - 1])
                    };
                    println!(
                        "{c:?},{},{},{},{},{:e},{order}",
                        l.n, l.h, l.dt, l.steps, l.error
                    );
                }
            }
            Ok(0)
        }
        Command::Thresholds {
            chi,
            beta,
            mass,
            cgn,
            m_window,
            a,
            lx,
            ly,
        } => {
            let p = Params::new(chi, beta, 1.0, lx * ly)?;
            let m_window = m_window.unwrap_or(0.5 * 9.0 / (17.0 * 32.0 * cgn));
            let report = threshold_boundedness(mass, &p, cgn, m_window, a)?;
            let text = toml::to_string(&report).expect("threshold report serializes");
            print!("{text}");
            Ok(0)
        }
    }
}
