use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TargetSpec};
use super::plot::emit_plot_data;
use super::table::{row_key, ResultRow, ResultTable, RowStatus};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, with_threads, Execution};
use crate::fields::VectorFieldSpec;
use crate::flow::{integrate_flow, MeasureTrajectory};
use crate::io;
use crate::measures::{sample_measure, ParticleEnsemble, GENERATOR_ID};
use crate::synthesis::{displacement_target_field, synthesize_controls, ControlSchedule, SynthesisReport};
use crate::transport::{sup_w2_with, w2_exact};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Keep rows already present in `results.csv` and compute only the rest.
    pub resume: bool,
    /// Worker threads; `Some(1)` runs everything sequentially.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            resume: false,
            threads: None,
        }
    }

    pub fn with_resume(mut self, resume: bool) -> Self {
        self.resume = resume;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn execution(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

/// Sampled measures and the field the schedules are synthesized from.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub spec: VectorFieldSpec,
    pub mu0: ParticleEnsemble,
    /// Endpoint target measure, if the experiment has one.
    pub target: Option<ParticleEnsemble>,
}

impl ExperimentInputs {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let mu0 = sample_measure(&cfg.initial, cfg.n_particles, cfg.seed)?;
        let target = match &cfg.target {
            TargetSpec::Measure { measure, .. } => Some(sample_measure(measure, cfg.n_particles, cfg.target_seed())?),
            TargetSpec::TranslatedInitial { shift, .. } => Some(mu0.translate(shift)?),
            _ => None,
        };
        let spec = match (&cfg.target, &target) {
            (TargetSpec::Measure { bandwidth, .. } | TargetSpec::TranslatedInitial { bandwidth, .. }, Some(muf)) => {
                displacement_target_field(&mu0, muf, *bandwidth, cfg.horizon)?
            }
            _ => cfg
                .target
                .field_spec(cfg.horizon)
                .expect("field targets always produce a spec")?,
        };
        Ok(Self { spec, mu0, target })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowManifest {
    pub key: String,
    pub n_avg: usize,
    pub m: usize,
    pub n_osc: usize,
    pub status: RowStatus,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub kind: String,
    pub config: ExperimentConfig,
    /// What `final_w2` measures against: "target-measure" or "reference-trajectory".
    pub final_w2_against: String,
    /// W2 between the reference trajectory's endpoint and the target measure.
    pub reference_final_w2: Option<f64>,
    pub results: String,
    pub inputs: Vec<String>,
    pub reference: Vec<String>,
    pub rows: Vec<RowManifest>,
    pub plots: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub table: ResultTable,
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn exit_code(&self) -> i32 {
        self.table.exit_code()
    }
}

#[derive(Serialize, Deserialize)]
struct RowReport {
    status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    sup_w2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    final_w2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    synthesis: Option<SynthesisReport>,
}

fn prefixed(prefix: &str, files: Vec<String>) -> Vec<String> {
    files.into_iter().map(|f| format!("{prefix}/{f}")).collect()
}

fn row_files(status: RowStatus, snapshots: usize) -> Vec<String> {
    let mut files = vec!["report.json".to_string()];
    if status.completed() {
        files.push("schedule.json".into());
        files.push("trajectory/trajectory.json".into());
        files.extend((0..snapshots).map(|k| format!("trajectory/snap_{k}.csv")));
    }
    files
}

struct RowRun {
    row: ResultRow,
    schedule: ControlSchedule,
    report: SynthesisReport,
    trajectory: MeasureTrajectory,
}

fn run_row(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    reference: &MeasureTrajectory,
    coords: (usize, usize, usize),
    exec: Execution,
) -> Result<RowRun> {
    let start = Instant::now();
    let params = cfg.synthesis_params(coords.0, coords.1, coords.2, exec);
    let syn = synthesize_controls(&inputs.spec, &inputs.mu0, &params)?;
    if !syn.schedule.is_admissible() {
        return Err(Error::Construction("schedule has a piece that is not a single (A, W, theta)".into()));
    }
    let trajectory = integrate_flow(&syn.schedule, &inputs.mu0, &cfg.integrator_config(exec))?
        .with_source(format!("schedule {}", row_key(coords)));
    let sup = sup_w2_with(reference, &trajectory, exec)?;
    let endpoint = inputs.target.as_ref().unwrap_or(reference.last());
    let fin = w2_exact(trajectory.last(), endpoint)?.distance;
    let status = if syn.report.tolerance_miss {
        RowStatus::ToleranceMiss
    } else {
        RowStatus::Ok
    };
    let row = ResultRow {
        n_avg: coords.0,
        m: coords.1,
        n_osc: coords.2,
        sup_w2: Some(sup),
        final_w2: Some(fin),
        max_fit_err: Some(syn.report.max_fit_error),
        pieces: Some(syn.schedule.len()),
        wall_s: start.elapsed().as_secs_f64(),
        status,
    };
    Ok(RowRun {
        row,
        schedule: syn.schedule,
        report: syn.report,
        trajectory,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs one row and writes its artifacts; every failure becomes a failed row.
fn execute_row(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    reference: &MeasureTrajectory,
    coords: (usize, usize, usize),
    exec: Execution,
    dir: &Path,
) -> ResultRow {
    let start = Instant::now();
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<ResultRow> {
        let run = run_row(cfg, inputs, reference, coords, exec)?;
        run.schedule.save(&dir.join("schedule.json"))?;
        run.trajectory.save(&dir.join("trajectory"))?;
        io::write_json(
            &dir.join("report.json"),
            &RowReport {
                status: run.row.status,
                error: None,
                sup_w2: run.row.sup_w2,
                final_w2: run.row.final_w2,
                synthesis: Some(run.report),
            },
        )?;
        Ok(run.row)
    }));
    let error = match attempt {
        Ok(Ok(row)) => return row,
        Ok(Err(e)) => e.to_string(),
        Err(p) => panic_message(p),
    };
    let report = RowReport {
        status: RowStatus::Failed,
        error: Some(error),
        sup_w2: None,
        final_w2: None,
        synthesis: None,
    };
    // a failed row still leaves a report behind when the disk allows it
    let _ = io::write_json(&dir.join("report.json"), &report);
    ResultRow::failed(coords, start.elapsed().as_secs_f64())
}

fn resumable_rows(cfg: &ExperimentConfig, out: &Path) -> Result<ResultTable> {
    let results = out.join(RESULTS_FILE);
    if !results.exists() {
        return Ok(ResultTable::new());
    }
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let previous: Manifest = io::read_json(&manifest_path)?;
        let mut a = previous.config;
        let mut b = cfg.clone();
        a.output_dir = None;
        b.output_dir = None;
        if a != b {
            return Err(Error::Config(format!(
                "cannot resume in {}: it holds results of a different configuration",
                out.display()
            )));
        }
    }
    let sweep = cfg.sweep.points();
    let table = ResultTable::load(&results)?;
    Ok(ResultTable::from_rows(table.rows().iter().cloned().filter(|r| {
        sweep.contains(&r.coords())
            && row_files(r.status, cfg.integrator.snapshots)
                .iter()
                .all(|f| out.join("rows").join(r.key()).join(f).exists())
    })))
}

fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions, endpoint: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.target.is_endpoint() != endpoint {
        return Err(Error::Config(if endpoint {
            "endpoint experiments need a measure or translated-initial target".into()
        } else {
            "trajectory experiments need a field target; use the endpoint runner for measure targets".into()
        }));
    }
    let exec = opts.execution();
    with_threads(opts.threads, || {
        let out = opts.out_dir.as_path();
        let inputs = ExperimentInputs::build(cfg)?;
        let icfg = cfg.integrator_config(exec);
        let reference = integrate_flow(&inputs.spec, &inputs.mu0, &icfg)?.with_source("reference");

        let table = if opts.resume {
            resumable_rows(cfg, out)?
        } else {
            ResultTable::new()
        };
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut input_files = vec!["initial.csv".to_string()];
        inputs.mu0.save_csv(&out.join("initial.csv"))?;
        if let Some(target) = &inputs.target {
            target.save_csv(&out.join("target.csv"))?;
            input_files.push("target.csv".into());
        }
        let reference_files = prefixed("reference", reference.save(&out.join("reference"))?);
        table.save(&out.join(RESULTS_FILE))?;

        let pending: Vec<_> = cfg
            .sweep
            .points()
            .into_iter()
            .filter(|c| table.get(*c).is_none())
            .collect();
        let shared = Mutex::new(table);
        let results_path = out.join(RESULTS_FILE);
        let saves: Vec<Result<()>> = map_indexed(exec, pending.len(), |i| {
            let coords = pending[i];
            let dir = out.join("rows").join(row_key(coords));
            let row = execute_row(cfg, &inputs, &reference, coords, exec, &dir);
            let mut guard = shared.lock().unwrap_or_else(|p| p.into_inner());
            guard.insert(row);
            guard.save(&results_path)
        });
        let table = shared.into_inner().unwrap_or_else(|p| p.into_inner());
        saves.into_iter().collect::<Result<()>>()?;

        let plots = emit_plot_data(&table, &out.join("plots"))?
            .into_iter()
            .map(|p| {
                p.strip_prefix(out)
                    .map(|r| r.to_string_lossy().replace('\\', "/"))
                    .unwrap_or_else(|_| p.to_string_lossy().into_owned())
            })
            .collect();
        let rows = table
            .rows()
            .iter()
            .map(|r| RowManifest {
                key: r.key(),
                n_avg: r.n_avg,
                m: r.m,
                n_osc: r.n_osc,
                status: r.status,
                files: prefixed(&format!("rows/{}", r.key()), row_files(r.status, cfg.integrator.snapshots)),
            })
            .collect();
        let reference_final_w2 = match &inputs.target {
            Some(t) => Some(w2_exact(reference.last(), t)?.distance),
            None => None,
        };
        let manifest = Manifest {
            generator: GENERATOR_ID.into(),
            kind: if endpoint { "endpoint" } else { "trajectory" }.into(),
            config: cfg.clone(),
            final_w2_against: if endpoint {
                "target-measure"
            } else {
                "reference-trajectory"
            }
            .into(),
            reference_final_w2,
            results: RESULTS_FILE.into(),
            inputs: input_files,
            reference: reference_files,
            rows,
            plots,
        };
        io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
        Ok(ExperimentOutcome {
            table,
            manifest,
            out_dir: out.to_path_buf(),
        })
    })
}

/// Synthesizes and simulates every sweep point against the reference
/// trajectory of a field target. `final_w2` compares endpoints of the two
/// trajectories.
pub fn run_trajectory_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome> {
    run_experiment(cfg, opts, false)
}

/// Builds the displacement target field between the initial and target
/// measures, then runs the sweep against it. `final_w2` is the distance of
/// each synthesized endpoint to the target measure.
pub fn run_endpoint_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome> {
    run_experiment(cfg, opts, true)
}

/// Checks that every file the manifest references exists under `out`.
pub fn missing_manifest_files(manifest: &Manifest, out: &Path) -> Vec<String> {
    std::iter::once(&manifest.results)
        .chain(&manifest.inputs)
        .chain(&manifest.reference)
        .chain(manifest.rows.iter().flat_map(|r| &r.files))
        .chain(&manifest.plots)
        .filter(|f| !out.join(f).exists())
        .cloned()
        .collect()
}
