use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fields::{piece_index, Activation, NeuralField, NeuralTerm, TimeField, TimeStructure};
use crate::io;

/// Piecewise-constant weights (A(t), W(t), θ(t)): on piece j the dynamics are
/// ẋ = A_j Σ(W_j x + θ_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleJson", into = "ScheduleJson")]
pub struct ControlSchedule {
    activation: Activation,
    breakpoints: Vec<f64>,
    pieces: Vec<NeuralTerm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleJson {
    activation: Activation,
    breakpoints: Vec<f64>,
    pieces: Vec<NeuralTerm>,
}

impl TryFrom<ScheduleJson> for ControlSchedule {
    type Error = Error;
    fn try_from(j: ScheduleJson) -> Result<Self> {
        ControlSchedule::new(j.activation, j.breakpoints, j.pieces)
    }
}

impl From<ControlSchedule> for ScheduleJson {
    fn from(s: ControlSchedule) -> Self {
        ScheduleJson {
            activation: s.activation,
            breakpoints: s.breakpoints,
            pieces: s.pieces,
        }
    }
}

impl ControlSchedule {
    pub fn new(activation: Activation, breakpoints: Vec<f64>, pieces: Vec<NeuralTerm>) -> Result<Self> {
        ensure!(!pieces.is_empty(), Domain, "a schedule needs at least one piece");
        ensure!(
            breakpoints.len() == pieces.len() + 1,
            Domain,
            "{} breakpoints for {} pieces",
            breakpoints.len(),
            pieces.len()
        );
        ensure!(
            breakpoints.iter().all(|b| b.is_finite()) && breakpoints.windows(2).all(|w| w[0] < w[1]),
            Domain,
            "schedule breakpoints must be finite and strictly increasing"
        );
        let dim = pieces[0].dim();
        for (j, p) in pieces.iter().enumerate() {
            p.validate()?;
            ensure!(p.dim() == dim, Domain, "piece {j} has dimension {} not {dim}", p.dim());
        }
        Ok(Self {
            activation,
            breakpoints,
            pieces,
        })
    }

    /// One zero-velocity piece on `[start, end)`.
    pub fn zero(dim: usize, activation: Activation, start: f64, end: f64) -> Result<Self> {
        Self::new(activation, vec![start, end], vec![NeuralTerm::zero(dim)])
    }

    /// Joins schedules whose windows abut exactly.
    pub fn concat(parts: Vec<ControlSchedule>) -> Result<Self> {
        ensure!(!parts.is_empty(), Domain, "nothing to concatenate");
        let activation = parts[0].activation;
        let mut breakpoints = vec![parts[0].breakpoints[0]];
        let mut pieces = Vec::new();
        for (k, p) in parts.into_iter().enumerate() {
            ensure!(p.activation == activation, Domain, "part {k} uses a different activation");
            ensure!(
                p.breakpoints[0] == *breakpoints.last().unwrap(),
                Domain,
                "part {k} starts at {} but the previous part ends at {}",
                p.breakpoints[0],
                breakpoints.last().unwrap()
            );
            breakpoints.extend_from_slice(&p.breakpoints[1..]);
            pieces.extend(p.pieces);
        }
        Self::new(activation, breakpoints, pieces)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[NeuralTerm] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn piece_at(&self, t: f64) -> &NeuralTerm {
        &self.pieces[piece_index(&self.breakpoints, t)]
    }

    /// Every piece is one admissible (A, W, θ) triple with matching shapes
    /// and finite entries.
    pub fn is_admissible(&self) -> bool {
        let d = self.dim();
        self.pieces.iter().all(|p| p.validate().is_ok() && p.dim() == d)
            && self.breakpoints.windows(2).all(|w| w[0] < w[1])
    }

    /// Exact integral of the schedule over `[a, b]` at `x`, divided by `b − a`.
    pub fn time_mean(&self, a: f64, b: f64, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut v = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        for (j, p) in self.pieces.iter().enumerate() {
            let lo = self.breakpoints[j].max(a);
            let hi = self.breakpoints[j + 1].min(b);
            if hi <= lo {
                continue;
            }
            v.iter_mut().for_each(|e| *e = 0.0);
            p.eval_add(self.activation, x, &mut scratch, &mut v);
            for (o, vi) in acc.iter_mut().zip(&v) {
                *o += (hi - lo) * vi;
            }
        }
        acc.iter_mut().for_each(|o| *o /= b - a);
        acc
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

impl TimeField for ControlSchedule {
    fn dim(&self) -> usize {
        ControlSchedule::dim(self)
    }

    fn horizon(&self) -> f64 {
        self.end()
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_anchored(t, t, x, out)
    }

    fn eval_anchored(&self, anchor: f64, _t: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut scratch = [0.0f64; 8];
        let p = self.piece_at(anchor);
        if out.len() <= scratch.len() {
            p.eval_add(self.activation, x, &mut scratch[..out.len()], out);
        } else {
            let mut s = vec![0.0; out.len()];
            p.eval_add(self.activation, x, &mut s, out);
        }
    }

    fn time_structure(&self) -> TimeStructure {
        TimeStructure::PiecewiseConstant(self.breakpoints.clone())
    }
}

/// Periodic switching schedule whose mean over each period is `field`.
///
/// The window is split into `n` periods, each period into `m` equal
/// subintervals; subinterval `i` carries the single term (m·A_i, W_i, θ_i).
pub fn oscillation_schedule(field: &NeuralField, window: (f64, f64), n: usize) -> Result<ControlSchedule> {
    let m = field.width();
    if m == 0 {
        return Err(Error::Degenerate(
            "the zero superposition has no oscillation representation; use a zero piece".into(),
        ));
    }
    ensure!(n >= 1, Parameter, "period count must be >= 1");
    let (a, b) = window;
    ensure!(
        a.is_finite() && b.is_finite() && a < b,
        Domain,
        "window [{a}, {b}) is empty"
    );
    let total = m * n;
    let len = b - a;
    let breakpoints: Vec<f64> = (0..=total)
        .map(|k| if k == total { b } else { a + len * k as f64 / total as f64 })
        .collect();
    let gain = m as f64;
    let scaled: Vec<NeuralTerm> = field.terms().iter().map(|t| t.scaled(gain)).collect();
    let pieces = (0..total).map(|k| scaled[k % m].clone()).collect();
    ControlSchedule::new(field.activation(), breakpoints, pieces)
}
