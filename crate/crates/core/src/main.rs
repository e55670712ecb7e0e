use clap::{Parser, Subcommand};
use saddleflow::dynamics::{fmt17, IntegratorConfig};
use saddleflow::experiments::{
    build_optimal_control_lp, control_cost, extract_controls, iss_counterexample, ownership, rollout,
    run_scenario, ExitKind, ExperimentError, OptimalControlSpec, OutputConfig, ScenarioConfig,
};
use saddleflow::oracle;
use saddleflow::StandardFormLp;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "saddleflow", version, about = "Saddle-point dynamics for linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dynamics on an LP file, or solve it exactly with --oracle.
    Solve {
        lp: PathBuf,
        /// Print the exact solution instead of integrating.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        /// Stop once the optimality residual is at most this.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file (disturbances, initial state, optional schedule).
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario over a communication graph with link failures.
    Rcg {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a finite-horizon optimal control problem through its LP.
    Optctrl {
        spec: PathBuf,
        /// Also run the dynamics on the LP for this many seconds.
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a constant disturbance whose equilibria are unbounded.
    Noiss {
        lp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitKind::InvalidInput as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_kind() as u8)
        }
    }
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(ExperimentError::io("writing stdout", e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: String) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, contents).map_err(|e| ExperimentError::io(format!("writing {}", path.display()), e))
}

fn run(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Solve {
            lp,
            oracle: exact,
            dt,
            tmax,
            tol,
            out,
        } => {
            let program = StandardFormLp::from_json_file(&lp)?;
            if exact {
                let sol = oracle::solve(&program)?;
                if let Some(dir) = out {
                    write_file(&dir.join("oracle.json"), serde_json::to_string_pretty(&sol)?)?;
                }
                return print_json(&sol);
            }
            let mut cfg = ScenarioConfig::for_lp(program);
            let defaults = IntegratorConfig::default();
            cfg.integrator = IntegratorConfig {
                dt: dt.unwrap_or(defaults.dt),
                t_max: tmax.unwrap_or(defaults.t_max),
                stop_tol: tol.unwrap_or(defaults.stop_tol),
                ..defaults
            };
            scenario(cfg, parent_dir(&lp), out)
        }
        Command::Simulate { scenario: path, out } => {
            let cfg = ScenarioConfig::from_file(&path)?;
            scenario(cfg, parent_dir(&path), out)
        }
        Command::Rcg { scenario: path, out } => {
            let cfg = ScenarioConfig::from_file(&path)?;
            if cfg.graph.is_none() || cfg.schedule.is_none() {
                return Err(ExperimentError::Invalid(
                    "rcg scenarios need both a graph and a schedule".into(),
                ));
            }
            scenario(cfg, parent_dir(&path), out)
        }
        Command::Optctrl { spec, tmax, dt, out } => optctrl(&spec, tmax, dt, out),
        Command::Noiss { lp, out } => {
            let program = StandardFormLp::from_json_file(&lp)?;
            let ce = iss_counterexample(&program)?;
            if let Some(path) = out {
                write_file(&path, serde_json::to_string_pretty(&ce)?)?;
            }
            print_json(&ce)
        }
    }
}

fn scenario(mut cfg: ScenarioConfig, base: &Path, out: Option<PathBuf>) -> Result<(), ExperimentError> {
    if out.is_some() {
        cfg.output.dir = out;
    }
    let outcome = run_scenario(&cfg, base)?;
    if let Some(dir) = &cfg.output.dir {
        outcome.write(dir, &cfg.output)?;
    }
    print_json(&outcome.metrics)
}

fn optctrl(path: &Path, tmax: Option<f64>, dt: f64, out: Option<PathBuf>) -> Result<(), ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(format!("reading {}", path.display()), e))?;
    let spec: OptimalControlSpec = serde_json::from_str(&text)?;
    let lp = build_optimal_control_lp(&spec)?;
    let sol = oracle::solve(&lp)?;
    let controls = extract_controls(&sol.x_star, &spec);
    let states = rollout(&spec, &controls)?;
    let mut summary = json!({
        "optimal_value": sol.optimal_value,
        "rollout_cost": control_cost(&states, &controls),
        "controls": controls,
        "states": states,
        "ownership": ownership(&spec),
    });
    if let Some(t_max) = tmax {
        let mut cfg = ScenarioConfig::for_lp(lp);
        cfg.integrator = IntegratorConfig {
            dt,
            t_max,
            record_every: usize::MAX,
            ..IntegratorConfig::default()
        };
        let outcome = run_scenario(&cfg, Path::new("."))?;
        summary["dynamics"] = serde_json::to_value(outcome.metrics)?;
        if let Some(dir) = &out {
            outcome.write(dir, &OutputConfig::default())?;
        }
    }
    if let Some(dir) = &out {
        write_file(&dir.join("controls.csv"), series_csv("u", &controls, 0))?;
        write_file(&dir.join("states.csv"), series_csv("x", &states, 1))?;
        write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    print_json(&summary)
}

/// `tau,<p>_1..<p>_N` with one row per step, numbered from `first`.
fn series_csv(prefix: &str, rows: &[Vec<f64>], first: usize) -> String {
    let width = rows.first().map_or(0, Vec::len);
    let mut s = String::from("tau");
    for i in 1..=width {
        s.push_str(&format!(",{prefix}_{i}"));
    }
    s.push('\n');
    for (tau, row) in rows.iter().enumerate() {
        s.push_str(&(tau + first).to_string());
        for v in row {
            s.push(',');
            s.push_str(&fmt17(*v));
        }
        s.push('\n');
    }
    s
}
