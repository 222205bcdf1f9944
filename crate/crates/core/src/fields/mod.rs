//! Evaluable vector fields: neural superpositions, benchmark flows,
//! piecewise-constant-in-time wrappers and bound estimation.

mod activation;
mod benchmark;
mod bounds;
mod neural;
mod piecewise;
mod spec;

use std::sync::Arc;

pub use activation::Activation;
pub use benchmark::BenchmarkField;
pub use bounds::{estimate_bounds, estimate_field_bounds, BoundsEstimate};
pub use neural::{NeuralField, NeuralTerm};
pub use piecewise::{piece_index, PiecewiseConstField};
pub use spec::{FieldDescriptor, VectorFieldSpec, BOUND_SLACK};

use crate::error::{ensure, Result};

/// Time-independent map x ↦ v(x).
pub trait StaticField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
}

/// How a field depends on time.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeStructure {
    Autonomous,
    /// Constant on each `[b_j, b_{j+1})`; the list spans `[0, T]`.
    PiecewiseConstant(Vec<f64>),
    Varying,
}

/// Time-varying field V_t(x) on `[0, horizon]`.
pub trait TimeField: Send + Sync {
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Evaluates the piece that is active at `anchor`, at time `t`.
    ///
    /// Integrators pass the midpoint of the current step as `anchor` so the
    /// last stage of a step ending on a switch time still sees the piece the
    /// step belongs to.
    fn eval_anchored(&self, anchor: f64, t: f64, x: &[f64], out: &mut [f64]) {
        let _ = anchor;
        self.eval_into(t, x, out);
    }

    fn time_structure(&self) -> TimeStructure {
        TimeStructure::Varying
    }
}

impl<F: StaticField + ?Sized> StaticField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
}

impl<F: TimeField + ?Sized> TimeField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(t, x, out)
    }
    fn eval_anchored(&self, anchor: f64, t: f64, x: &[f64], out: &mut [f64]) {
        (**self).eval_anchored(anchor, t, x, out)
    }
    fn time_structure(&self) -> TimeStructure {
        (**self).time_structure()
    }
}

/// A static field viewed as an autonomous field on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct Autonomous<F> {
    pub field: F,
    pub horizon: f64,
}

impl<F: StaticField> TimeField for Autonomous<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.field.eval_into(x, out)
    }
    fn time_structure(&self) -> TimeStructure {
        TimeStructure::Autonomous
    }
}

/// A time field frozen at one instant.
pub struct Frozen<F> {
    pub field: F,
    pub time: f64,
}

impl<F: TimeField> StaticField for Frozen<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.eval_into(self.time, x, out)
    }
}

/// Closure-backed static field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> StaticField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Closure-backed time-varying field.
pub struct FnTimeField<F> {
    dim: usize,
    horizon: f64,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> FnTimeField<F> {
    pub fn new(dim: usize, horizon: f64, f: F) -> Self {
        Self { dim, horizon, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> TimeField for FnTimeField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }
}

/// Checked evaluation of V_t(x).
pub fn eval_field(field: &dyn TimeField, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let horizon = field.horizon();
    ensure!(
        t.is_finite() && (0.0..=horizon).contains(&t),
        Domain,
        "t = {t} outside [0, {horizon}]"
    );
    ensure!(
        x.len() == field.dim(),
        Domain,
        "x has dimension {} but the field has {}",
        x.len(),
        field.dim()
    );
    let mut out = vec![0.0; field.dim()];
    field.eval_into(t, x, &mut out);
    Ok(out)
}
