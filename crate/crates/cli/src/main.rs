//! `lyorad`: run scenarios, compute view factors, fit parameters, sweep
//! settings and run the reference checks.
//!
//! Exit codes: 0 on success, 1 when a run or a validation check fails,
//! 2 on configuration errors. `LYORAD_THREADS` caps the worker count.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use lyorad::config::{load_fit_problem, load_scenario, ConfigError, FitTask, LoadedScenario, ScenarioConfig};
use lyorad::estimation::{fit_scalar, train_hybrid, FitParameter};
use lyorad::export::{config_hash, export_results};
use lyorad::sim::simulate;
use lyorad::units::parse_quantity;
use lyorad::validation::run_validation_suite;
use lyorad::{Approach, Scenario, SimulationResult, VialLabel, HOUR};

#[derive(Parser)]
#[command(name = "lyorad", version, about = "Primary-drying simulation for vial arrays with radiation exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write summary.csv, series.csv and metadata.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the radiation approach of the scenario.
        #[arg(long)]
        approach: Option<Approach>,
        /// Output directory (default: the scenario's output.directory, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the completed view-factor matrix of a scenario as CSV.
    Viewfactors {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a scalar parameter or train a hybrid resistance map.
    Fit {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Run the reference checks; `--filter` takes a number or part of a name.
    Validate {
        #[arg(long)]
        filter: Option<String>,
    },
    /// Run a scenario once per parameter value and print one CSV row per vial.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// h, wall_temperature, sublimation_temperature, p1, p2 or p3.
        #[arg(long)]
        param: FitParameter,
        /// Comma-separated values, bare SI or with units ("10 C,20 C").
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Also write each run's bundle under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Success,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("LYORAD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Parse(format!("LYORAD_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate {
            config,
            approach,
            out,
        } => cmd_simulate(&config, approach, out),
        Command::Viewfactors { config, out } => cmd_viewfactors(&config, &out),
        Command::Fit { problem } => cmd_fit(&problem),
        Command::Validate { filter } => {
            let report = run_validation_suite(filter.as_deref());
            if report.criteria.is_empty() {
                return Err(ConfigError::Parse(format!(
                    "no criterion matches '{}'",
                    filter.unwrap_or_default()
                ))
                .into());
            }
            print!("{}", report.render());
            Ok(if report.passed() {
                Outcome::Success
            } else {
                Outcome::Failed
            })
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(&config, param, &values, out.as_deref()),
    }
}

fn load(config: &Path, approach: Option<Approach>) -> Result<LoadedScenario> {
    let mut loaded = load_scenario(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(a) = approach {
        loaded.scenario.approach = a;
        if a == Approach::Hybrid && loaded.scenario.hybrid.is_none() {
            return Err(ConfigError::Schema {
                path: "radiation.hybrid_map".into(),
                message: "the hybrid approach needs a resistance map in the scenario".into(),
            }
            .into());
        }
    }
    Ok(loaded)
}

/// Hash of the scenario's explicit form, so equivalent files hash alike.
fn scenario_hash(loaded: &LoadedScenario) -> Option<String> {
    let explicit = ScenarioConfig::from_scenario(loaded).ok()?.to_toml().ok()?;
    Some(config_hash(&explicit))
}

fn report(result: &SimulationResult) {
    let times = result.drying_times();
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let max = times.iter().copied().fold(0.0, f64::max);
    println!(
        "{} vials, approach {}: drying time {:.3} to {:.3} h ({:.1} s)",
        times.len(),
        result.approach,
        min / HOUR,
        max / HOUR,
        result.wall_clock_seconds
    );
    for label in [VialLabel::Corner, VialLabel::Edge, VialLabel::Inner] {
        if let Some(v) = result.first_with_label(label) {
            println!(
                "  first {label:<6} vial {:>4}: t_m {:.3} h, t_dry {:.3} h, absorbed {:.0} J",
                v.index,
                v.t_switch / HOUR,
                v.t_dry / HOUR,
                v.absorbed_energy
            );
        }
    }
}

fn cmd_simulate(config: &Path, approach: Option<Approach>, out: Option<PathBuf>) -> Result<Outcome> {
    let loaded = load(config, approach)?;
    let out = out
        .or_else(|| loaded.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = simulate(&loaded.scenario)?;
    report(&result);
    let bundle = export_results(&result, &out, scenario_hash(&loaded))?;
    println!("wrote {}", bundle.summary.display());
    if let Some(s) = &bundle.series {
        println!("wrote {}", s.display());
    }
    println!("wrote {}", bundle.metadata.display());
    Ok(Outcome::Success)
}

fn cmd_viewfactors(config: &Path, out: &Path) -> Result<Outcome> {
    let loaded = load(config, None)?;
    let matrix = loaded.scenario.resolve_view_factors()?;
    let file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    matrix.write_csv(std::io::BufWriter::new(file))?;
    let w = matrix.wall();
    let (lo, hi) = (0..loaded.scenario.scene.vial_count())
        .map(|i| matrix.get(i, w))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), f| (lo.min(f), hi.max(f)));
    println!(
        "{} surfaces, vial-to-wall view factor {lo:.4} to {hi:.4}; wrote {}",
        matrix.len(),
        out.display()
    );
    Ok(Outcome::Success)
}

fn cmd_fit(problem: &Path) -> Result<Outcome> {
    let task = load_fit_problem(problem).with_context(|| format!("loading {}", problem.display()))?;
    match task {
        FitTask::Scalar(p) => {
            let fit = fit_scalar(&p)?;
            println!(
                "{} = {:.6} (residual {:.3} s, {} evaluations)",
                p.parameter.name(),
                fit.value,
                fit.residual,
                fit.evaluations
            );
        }
        FitTask::Hybrid {
            mut scenario,
            reference,
            immune_tolerance,
            output,
        } => {
            scenario.approach = Approach::Network;
            scenario.cache_view_factors()?;
            let (reference, source) = match reference {
                Some(r) => (r, "reference file"),
                None => (simulate(&scenario)?.drying_times(), "network"),
            };
            let map = train_hybrid(&reference, &scenario, immune_tolerance, source)?;
            let layout = &scenario.scene.layout;
            let positions: Vec<(usize, usize)> = (0..layout.len()).map(|i| layout.position(i)).collect();
            map.save(&output, &positions)?;
            let (lo, hi) = map
                .r_rad
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
            println!(
                "trained {} resistances ({lo:.1} to {hi:.3e} 1/m2); wrote {}",
                map.r_rad.len(),
                output.display()
            );
        }
    }
    Ok(Outcome::Success)
}

fn cmd_sweep(config: &Path, param: FitParameter, values: &[String], out: Option<&Path>) -> Result<Outcome> {
    let loaded = load(config, None)?;
    let values = values
        .iter()
        .map(|v| {
            parse_quantity(v, param.dimension()).map_err(|source| ConfigError::Unit {
                path: format!("--values '{v}'"),
                source,
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(anyhow!(ConfigError::Parse("--values is empty".into())));
    }
    let mut base: Scenario = loaded.scenario.clone();
    base.cache_view_factors()?;
    let runs = values
        .par_iter()
        .map(|&v| {
            let mut s = base.clone();
            param.apply(&mut s, v);
            simulate(&s).map(|r| (v, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let stdout = std::io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record([param.name(), "vial_id", "row", "col", "label", "t_m_hours", "t_dry_hours"])?;
    for (v, r) in &runs {
        for o in &r.vials {
            w.write_record([
                v.to_string(),
                o.index.to_string(),
                o.row.to_string(),
                o.col.to_string(),
                o.label.to_string(),
                (o.t_switch / HOUR).to_string(),
                (o.t_dry / HOUR).to_string(),
            ])?;
        }
    }
    w.flush()?;
    if let Some(dir) = out {
        for (i, (_, r)) in runs.iter().enumerate() {
            export_results(r, &dir.join(format!("run_{i:03}")), None)?;
        }
        let mut index = csv::Writer::from_path(dir.join("sweep.csv"))?;
        index.write_record(["run", param.name()])?;
        for (i, (v, _)) in runs.iter().enumerate() {
            index.write_record([format!("run_{i:03}"), v.to_string()])?;
        }
        index.flush()?;
    }
    Ok(Outcome::Success)
}
