use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nodeflow::exec::with_threads;
use nodeflow::flow::integrate_flow;
use nodeflow::harness::{
    run_endpoint_experiment, run_trajectory_experiment, ExperimentConfig, ExperimentInputs, ExperimentOutcome,
    RunOptions,
};
use nodeflow::synthesis::{synthesize_controls, ControlSchedule};
use nodeflow::transport::{sup_w2_with, w2_exact};
use nodeflow::Error;

#[derive(Parser)]
#[command(name = "nodeflow", version, about = "Neural-ODE control synthesis for particle transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output_dir, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    parallel: Option<usize>,
    /// Keep rows already present in the output and compute the rest.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Clone)]
struct Point {
    /// Sweep point as n_avg,m,n_osc; defaults to the largest point of the sweep.
    #[arg(long, value_parser = parse_point)]
    point: Option<(usize, usize, usize)>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one schedule and write schedule.json and report.json.
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
    },
    /// Integrate the target field, or a saved schedule, from the initial measure.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Schedule to simulate instead of the target field.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Compare a saved schedule's trajectory with the reference trajectory.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Run the full sweep and write results.csv, manifest.json and rows/.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run an endpoint sweep towards a target measure.
    Endpoint {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_point(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, m, n] => Ok((a, m, n)),
        _ => Err("expected n_avg,m,n_osc".into()),
    }
}

struct Setup {
    cfg: ExperimentConfig,
    out: PathBuf,
    opts: RunOptions,
}

fn setup(common: &Common) -> Result<Setup, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    if common.parallel == Some(0) {
        return Err(Error::Config("--parallel must be at least 1".into()));
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions::new(&out)
        .with_resume(common.resume)
        .with_threads(common.parallel);
    Ok(Setup { cfg, out, opts })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    nodeflow::io::write_json(path, value)
}

fn synthesize(s: &Setup, point: Option<(usize, usize, usize)>) -> Result<i32, Error> {
    let (a, m, n) = match point {
        Some(p) => p,
        None => *s.cfg.sweep.points().last().expect("validated sweep is nonempty"),
    };
    let inputs = ExperimentInputs::build(&s.cfg)?;
    let params = s.cfg.synthesis_params(a, m, n, s.opts.execution());
    let syn = synthesize_controls(&inputs.spec, &inputs.mu0, &params)?;
    syn.schedule.save(&s.out.join("schedule.json"))?;
    nodeflow::io::write_json(&s.out.join("report.json"), &syn.report)?;
    println!(
        "{} pieces, max fit error {:.3e}{}; wrote {}",
        syn.schedule.len(),
        syn.report.max_fit_error,
        if syn.report.tolerance_miss { " (tolerance miss)" } else { "" },
        s.out.join("schedule.json").display()
    );
    Ok(0)
}

fn simulate(s: &Setup, schedule: Option<&Path>) -> Result<i32, Error> {
    let inputs = ExperimentInputs::build(&s.cfg)?;
    let icfg = s.cfg.integrator_config(s.opts.execution());
    let traj = match schedule {
        Some(path) => integrate_flow(&ControlSchedule::load(path)?, &inputs.mu0, &icfg)?.with_source("schedule"),
        None => integrate_flow(&inputs.spec, &inputs.mu0, &icfg)?.with_source("reference"),
    };
    let dir = s.out.join("trajectory");
    traj.save(&dir)?;
    println!("{} snapshots of {} particles in {}", traj.times().len(), traj.n_particles(), dir.display());
    Ok(0)
}

fn compare(s: &Setup, schedule: &Path) -> Result<i32, Error> {
    let exec = s.opts.execution();
    let inputs = ExperimentInputs::build(&s.cfg)?;
    let icfg = s.cfg.integrator_config(exec);
    let reference = integrate_flow(&inputs.spec, &inputs.mu0, &icfg)?;
    let traj = integrate_flow(&ControlSchedule::load(schedule)?, &inputs.mu0, &icfg)?;
    let sup = sup_w2_with(&reference, &traj, exec)?;
    let fin = w2_exact(traj.last(), inputs.target.as_ref().unwrap_or(reference.last()))?.distance;
    let summary = serde_json::json!({ "sup_w2": sup, "final_w2": fin });
    write_json(&s.out.join("compare.json"), &summary)?;
    println!("{summary}");
    Ok(0)
}

fn report(outcome: &ExperimentOutcome) -> i32 {
    for r in outcome.table.rows() {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        println!(
            "n_avg={} m={} n_osc={}: sup_w2={} final_w2={} fit={} [{:?}]",
            r.n_avg,
            r.m,
            r.n_osc,
            fmt(r.sup_w2),
            fmt(r.final_w2),
            fmt(r.max_fit_err),
            r.status
        );
    }
    println!("results in {}", outcome.out_dir.join("results.csv").display());
    outcome.exit_code()
}

fn run(cli: Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Synthesize { common, point } => {
            let s = setup(common)?;
            with_threads(common.parallel, || synthesize(&s, point.point))
        }
        Command::Simulate { common, schedule } => {
            let s = setup(common)?;
            with_threads(common.parallel, || simulate(&s, schedule.as_deref()))
        }
        Command::Compare { common, schedule } => {
            let s = setup(common)?;
            with_threads(common.parallel, || compare(&s, schedule))
        }
        Command::Sweep { common } => {
            let s = setup(common)?;
            let outcome = if s.cfg.target.is_endpoint() {
                run_endpoint_experiment(&s.cfg, &s.opts)?
            } else {
                run_trajectory_experiment(&s.cfg, &s.opts)?
            };
            Ok(report(&outcome))
        }
        Command::Endpoint { common } => {
            let s = setup(common)?;
            Ok(report(&run_endpoint_experiment(&s.cfg, &s.opts)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
