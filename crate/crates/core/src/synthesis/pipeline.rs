use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fit_superposition, oscillation_schedule, time_average, ControlSchedule, FitOptions, FitReport};
use crate::error::{ensure, Result};
use crate::exec::{map_indexed, Execution};
use crate::fields::{FieldDescriptor, NeuralField, StaticField, TimeField, VectorFieldSpec};
use crate::measures::{support_radius, ParticleEnsemble, Region};

/// Upper limit on N_osc · m · N_avg.
pub const MAX_PIECES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    pub n_avg: usize,
    pub m_width: usize,
    /// Sup-norm fit tolerance δ, held fixed across windows.
    pub fit_tolerance: f64,
    pub n_osc: usize,
    #[serde(default = "default_margin")]
    pub region_margin: f64,
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(skip)]
    pub execution: Execution,
}

fn default_margin() -> f64 {
    1.5
}

impl SynthesisParams {
    pub fn new(n_avg: usize, m_width: usize, fit_tolerance: f64, n_osc: usize, seed: u64) -> Self {
        Self {
            n_avg,
            m_width,
            fit_tolerance,
            n_osc,
            region_margin: default_margin(),
            seed,
            fit: FitOptions::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_fit(mut self, fit: FitOptions) -> Self {
        self.fit = fit;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n_avg >= 1 && self.m_width >= 1 && self.n_osc >= 1,
            Parameter,
            "n_avg, m_width and n_osc must all be >= 1 (got {}, {}, {})",
            self.n_avg,
            self.m_width,
            self.n_osc
        );
        ensure!(
            self.fit_tolerance.is_finite() && self.fit_tolerance > 0.0,
            Parameter,
            "fit tolerance must be positive, got {}",
            self.fit_tolerance
        );
        ensure!(
            self.region_margin.is_finite() && self.region_margin > 1.0,
            Parameter,
            "region margin must exceed 1, got {}",
            self.region_margin
        );
        Ok(())
    }

    pub fn piece_budget(&self) -> Option<usize> {
        self.n_osc.checked_mul(self.m_width)?.checked_mul(self.n_avg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    /// The target was already a superposition and was used verbatim.
    pub exact: bool,
    pub zero: bool,
    pub fit: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub omega: Region,
    pub r: f64,
    pub big_r: f64,
    pub horizon: f64,
    pub bound_c: f64,
    pub lipschitz_k: f64,
    pub params: SynthesisParams,
    pub windows: Vec<WindowReport>,
    pub pieces: usize,
    pub tolerance_miss: bool,
    pub max_fit_error: f64,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub schedule: ControlSchedule,
    pub report: SynthesisReport,
}

struct WindowFit {
    field: NeuralField,
    report: FitReport,
    exact: bool,
}

/// Target already in the superposition class with the requested activation.
fn admissible_target(spec: &VectorFieldSpec, params: &SynthesisParams) -> Option<NeuralField> {
    match spec.descriptor() {
        FieldDescriptor::Neural { field }
            if field.activation() == params.fit.activation && field.width() <= params.m_width =>
        {
            Some(field.clone())
        }
        _ => None,
    }
}

fn exact_report(tol: f64) -> FitReport {
    FitReport {
        sup_error: 0.0,
        train_sup_error: 0.0,
        rms_error: 0.0,
        tolerance: tol,
        within_tolerance: true,
        train_points: 0,
        validation_points: 0,
    }
}

/// Turns `spec` into a piecewise-constant one-term-per-piece schedule.
///
/// Ω = B_{R+r}(0) with r the support radius of `mu0` and
/// R = margin · T · (C + δ). Each of the `n_avg` windows is averaged, fitted
/// on Ω with `m_width` terms and expanded into `n_osc` oscillation periods.
/// Windows whose fit is identically zero become one A = 0 piece.
pub fn synthesize_controls(
    spec: &VectorFieldSpec,
    mu0: &ParticleEnsemble,
    params: &SynthesisParams,
) -> Result<Synthesis> {
    params.validate()?;
    let dim = spec.dim();
    ensure!(
        mu0.dim() == dim,
        Domain,
        "initial measure has dimension {} but the field has dimension {dim}",
        mu0.dim()
    );
    let pieces_requested = params.piece_budget().filter(|&p| p <= MAX_PIECES);
    ensure!(
        pieces_requested.is_some(),
        Size,
        "n_osc * m * n_avg = {} * {} * {} exceeds the limit of {MAX_PIECES} pieces",
        params.n_osc,
        params.m_width,
        params.n_avg
    );

    let horizon = spec.horizon();
    let r = support_radius(mu0, &vec![0.0; dim])?;
    let big_r = params.region_margin * horizon * (spec.bound_c() + params.fit_tolerance);
    let omega = Region::centered_ball(dim, big_r + r)?;

    let averaged = time_average(spec.field().clone(), params.n_avg)?;
    let breakpoints = averaged.breakpoints().to_vec();
    let admissible = admissible_target(spec, params);
    let autonomous = spec.time_structure() == crate::fields::TimeStructure::Autonomous;

    let fits: Vec<Result<WindowFit>> = map_indexed(params.execution, params.n_avg, |k| {
        if let (Some(field), true) = (&admissible, autonomous) {
            return Ok(WindowFit {
                field: field.clone(),
                report: exact_report(params.fit_tolerance),
                exact: true,
            });
        }
        let piece: &Arc<dyn StaticField> = &averaged.pieces()[k];
        let fitted = fit_superposition(
            piece.as_ref(),
            &omega,
            params.m_width,
            params.fit_tolerance,
            params.seed.wrapping_add(k as u64),
            &params.fit,
        )?;
        Ok(WindowFit {
            field: fitted.field,
            report: fitted.report,
            exact: false,
        })
    });

    let mut parts = Vec::with_capacity(params.n_avg);
    let mut windows = Vec::with_capacity(params.n_avg);
    for (k, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        let (start, end) = (breakpoints[k], breakpoints[k + 1]);
        let zero = fit.field.terms().iter().all(|t| t.a.is_zero());
        let part = if zero {
            ControlSchedule::zero(dim, fit.field.activation(), start, end)?
        } else {
            oscillation_schedule(&fit.field, (start, end), params.n_osc)?
        };
        parts.push(part);
        windows.push(WindowReport {
            index: k,
            start,
            end,
            exact: fit.exact,
            zero,
            fit: fit.report,
        });
    }
    let schedule = ControlSchedule::concat(parts)?;
    let max_fit_error = windows.iter().map(|w| w.fit.sup_error).fold(0.0, f64::max);
    let tolerance_miss = windows.iter().any(|w| !w.fit.within_tolerance);
    let report = SynthesisReport {
        omega,
        r,
        big_r,
        horizon,
        bound_c: spec.bound_c(),
        lipschitz_k: spec.lipschitz_k(),
        params: params.clone(),
        windows,
        pieces: schedule.len(),
        tolerance_miss,
        max_fit_error,
    };
    Ok(Synthesis { schedule, report })
}
