//! Particle pushforward: integrate every particle along a field and record
//! the resulting measure curve t ↦ μ_t.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::exec::{self, Execution};
use crate::fields::{TimeField, TimeStructure};
use crate::io;
use crate::measures::{support_radius, ParticleEnsemble};
use crate::transport::w2_exact;

/// Any coordinate beyond this magnitude aborts integration.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Relative slack of the Lipschitz-curve check.
pub const LIPSCHITZ_SLACK: f64 = 0.05;

/// Default number of steps per unit horizon when pieces are long.
const DEFAULT_STEPS_PER_HORIZON: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Largest step; `None` picks min(shortest piece, T/1000).
    pub base_step: Option<f64>,
    /// Output grid, starting at 0 and strictly increasing.
    pub snap_times: Vec<f64>,
    #[serde(default, skip_serializing)]
    pub execution: Execution,
}

impl IntegratorConfig {
    /// RK4 with `count` evenly spaced snapshots on [0, horizon] (endpoints included).
    pub fn uniform(horizon: f64, count: usize) -> Self {
        Self {
            method: Method::Rk4,
            base_step: None,
            snap_times: uniform_grid(horizon, count),
            execution: Execution::default(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.base_step = Some(step);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.snap_times.len() >= 1 && self.snap_times[0] == 0.0,
            Parameter,
            "snapshot grid must start at t = 0"
        );
        ensure!(
            self.snap_times.iter().all(|t| t.is_finite()) && self.snap_times.windows(2).all(|w| w[0] < w[1]),
            Parameter,
            "snapshot grid must be finite and strictly increasing"
        );
        if let Some(h) = self.base_step {
            ensure!(h.is_finite() && h > 0.0, Parameter, "base step must be positive, got {h}");
        }
        Ok(())
    }
}

/// `count` evenly spaced times on [0, horizon], both ends included.
pub fn uniform_grid(horizon: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|k| {
            if k == count - 1 {
                horizon
            } else {
                horizon * k as f64 / (count - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProvenance {
    /// What produced the trajectory (field or schedule identifier).
    pub source: String,
    pub method: Method,
    pub base_step: f64,
    pub steps: usize,
}

/// Time-stamped ensembles sharing particle count, order and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrajectory {
    times: Vec<f64>,
    snapshots: Vec<ParticleEnsemble>,
    provenance: TrajectoryProvenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryJson {
    times: Vec<f64>,
    n: usize,
    dim: usize,
    provenance: TrajectoryProvenance,
    snapshots: Vec<String>,
}

impl MeasureTrajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<ParticleEnsemble>, provenance: TrajectoryProvenance) -> Result<Self> {
        ensure!(!times.is_empty(), Domain, "trajectory needs at least one time");
        ensure!(
            times.len() == snapshots.len(),
            Domain,
            "{} times but {} snapshots",
            times.len(),
            snapshots.len()
        );
        ensure!(times[0] == 0.0, Domain, "trajectory grid must start at 0");
        ensure!(
            times.windows(2).all(|w| w[0] < w[1]),
            Domain,
            "trajectory grid must be strictly increasing"
        );
        let (n, d) = (snapshots[0].len(), snapshots[0].dim());
        ensure!(
            snapshots.iter().all(|s| s.len() == n && s.dim() == d),
            Domain,
            "all snapshots must have {n} particles in dimension {d}"
        );
        Ok(Self {
            times,
            snapshots,
            provenance,
        })
    }

    /// Trajectory that stays at `ens` on the given grid.
    pub fn constant(ens: &ParticleEnsemble, times: Vec<f64>) -> Result<Self> {
        let snaps = vec![ens.clone(); times.len()];
        Self::new(
            times,
            snaps,
            TrajectoryProvenance {
                source: "constant".into(),
                method: Method::Rk4,
                base_step: 0.0,
                steps: 0,
            },
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[ParticleEnsemble] {
        &self.snapshots
    }

    pub fn initial(&self) -> &ParticleEnsemble {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ParticleEnsemble {
        self.snapshots.last().unwrap()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_particles(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn dim(&self) -> usize {
        self.snapshots[0].dim()
    }

    pub fn provenance(&self) -> &TrajectoryProvenance {
        &self.provenance
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.provenance.source = source.into();
        self
    }

    /// Replaces the snapshot at `index`, keeping shape invariants.
    pub fn with_snapshot(mut self, index: usize, ens: ParticleEnsemble) -> Result<Self> {
        ensure!(index < self.snapshots.len(), Domain, "snapshot index {index} out of range");
        ensure!(
            ens.len() == self.n_particles() && ens.dim() == self.dim(),
            Domain,
            "replacement snapshot has the wrong shape"
        );
        self.snapshots[index] = ens;
        Ok(self)
    }

    /// Writes `trajectory.json` and one `snap_<k>.csv` per snapshot.
    pub fn save(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let names: Vec<String> = (0..self.snapshots.len()).map(|k| format!("snap_{k}.csv")).collect();
        for (snap, name) in self.snapshots.iter().zip(&names) {
            snap.save_csv(&dir.join(name))?;
        }
        io::write_json(
            &dir.join("trajectory.json"),
            &TrajectoryJson {
                times: self.times.clone(),
                n: self.n_particles(),
                dim: self.dim(),
                provenance: self.provenance.clone(),
                snapshots: names.clone(),
            },
        )?;
        let mut files = vec!["trajectory.json".to_string()];
        files.extend(names);
        Ok(files)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: TrajectoryJson = io::read_json(&dir.join("trajectory.json"))?;
        let snaps = meta
            .snapshots
            .iter()
            .map(|name| ParticleEnsemble::load_csv(&dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        let traj = Self::new(meta.times, snaps, meta.provenance)?;
        ensure!(
            traj.n_particles() == meta.n && traj.dim() == meta.dim,
            Domain,
            "trajectory.json header disagrees with snapshot files"
        );
        Ok(traj)
    }
}

/// One constant-piece interval of the global step grid.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    steps: usize,
    /// Snapshot index recorded at `end`, if any.
    snap: Option<usize>,
}

fn build_segments(field: &dyn TimeField, cfg: &IntegratorConfig) -> Result<(Vec<Segment>, f64)> {
    let end = *cfg.snap_times.last().unwrap();
    let horizon = field.horizon();
    ensure!(
        end <= horizon * (1.0 + 1e-12),
        Domain,
        "snapshot time {end} beyond the field horizon {horizon}"
    );
    let breaks = match field.time_structure() {
        TimeStructure::PiecewiseConstant(b) => b,
        _ => Vec::new(),
    };
    let shortest_piece = breaks
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let base_step = cfg
        .base_step
        .unwrap_or_else(|| shortest_piece.min(horizon / DEFAULT_STEPS_PER_HORIZON));

    // (time, snapshot index); snapshot times win ties against breakpoints
    let mut marks: Vec<(f64, Option<usize>)> = cfg
        .snap_times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, Some(k)))
        .chain(breaks.iter().filter(|&&b| b > 0.0 && b < end).map(|&b| (b, None)))
        .collect();
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));
    let tol = 1e-12 * end.max(1.0);
    let mut merged: Vec<(f64, Option<usize>)> = Vec::with_capacity(marks.len());
    for m in marks {
        match merged.last_mut() {
            Some(last) if m.0 - last.0 <= tol => {
                if last.1.is_none() && m.1.is_some() {
                    *last = m;
                }
            }
            _ => merged.push(m),
        }
    }

    let mut segments = Vec::with_capacity(merged.len());
    for w in merged.windows(2) {
        let (start, end) = (w[0].0, w[1].0);
        let len = end - start;
        let steps = ((len / base_step) - 1e-9).ceil().max(1.0) as usize;
        segments.push(Segment {
            start,
            end,
            steps,
            snap: w[1].1,
        });
    }
    Ok((segments, base_step))
}

struct Stepper<'a> {
    field: &'a dyn TimeField,
    method: Method,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a dyn TimeField, method: Method) -> Self {
        let d = field.dim();
        Self {
            field,
            method,
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
            tmp: vec![0.0; d],
        }
    }

    fn step(&mut self, t: f64, h: f64, x: &mut [f64]) {
        let anchor = t + 0.5 * h;
        let f = self.field;
        match self.method {
            Method::Euler => {
                f.eval_anchored(anchor, t, x, &mut self.k[0]);
                for (xi, ki) in x.iter_mut().zip(&self.k[0]) {
                    *xi += h * ki;
                }
            }
            Method::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                let tmp = &mut self.tmp;
                f.eval_anchored(anchor, t, x, k1);
                for ((o, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
                    *o = xi + 0.5 * h * ki;
                }
                f.eval_anchored(anchor, t + 0.5 * h, tmp, k2);
                for ((o, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
                    *o = xi + 0.5 * h * ki;
                }
                f.eval_anchored(anchor, t + 0.5 * h, tmp, k3);
                for ((o, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
                    *o = xi + h * ki;
                }
                f.eval_anchored(anchor, t + h, tmp, k4);
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
}

/// Integrates a single particle, returning its position at every snapshot.
fn integrate_particle(
    field: &dyn TimeField,
    method: Method,
    segments: &[Segment],
    snaps: usize,
    particle: usize,
    x0: &[f64],
) -> Result<Vec<f64>> {
    let d = x0.len();
    let mut out = Vec::with_capacity(snaps * d);
    out.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut stepper = Stepper::new(field, method);
    for seg in segments {
        let h = (seg.end - seg.start) / seg.steps as f64;
        for s in 0..seg.steps {
            let t = seg.start + s as f64 * h;
            stepper.step(t, h, &mut x);
            if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    particle,
                    time: t + h,
                });
            }
        }
        if seg.snap.is_some() {
            out.extend_from_slice(&x);
        }
    }
    debug_assert_eq!(out.len(), snaps * d);
    Ok(out)
}

/// Pushes `mu0` forward along `field`, recording snapshots at `cfg.snap_times`.
///
/// Steps never straddle a switch time of a piecewise-constant field, and
/// every snapshot time is hit exactly. Each particle is integrated
/// independently, so the result does not depend on the execution mode.
pub fn integrate_flow(
    field: &dyn TimeField,
    mu0: &ParticleEnsemble,
    cfg: &IntegratorConfig,
) -> Result<MeasureTrajectory> {
    cfg.validate()?;
    ensure!(
        mu0.dim() == field.dim(),
        Domain,
        "ensemble dimension {} differs from field dimension {}",
        mu0.dim(),
        field.dim()
    );
    let (segments, base_step) = build_segments(field, cfg)?;
    let snaps = cfg.snap_times.len();
    let n = mu0.len();
    let d = mu0.dim();
    let paths = exec::map_indexed(cfg.execution, n, |i| {
        integrate_particle(field, cfg.method, &segments, snaps, i, mu0.point(i))
    });
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;

    let mut snapshots = Vec::with_capacity(snaps);
    for k in 0..snaps {
        let mut coords = Vec::with_capacity(n * d);
        for p in &paths {
            coords.extend_from_slice(&p[k * d..(k + 1) * d]);
        }
        snapshots.push(ParticleEnsemble::from_flat(d, coords)?);
    }
    snapshots[0] = mu0.clone();
    MeasureTrajectory::new(
        cfg.snap_times.clone(),
        snapshots,
        TrajectoryProvenance {
            source: "field".into(),
            method: cfg.method,
            base_step,
            steps: segments.iter().map(|s| s.steps).sum(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportViolation {
    pub time: f64,
    pub snapshot: usize,
    pub particle: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// T < (R + r) / C.
    pub precondition_holds: bool,
    /// R + r.
    pub bound: f64,
    pub max_radius: f64,
    pub first_violation: Option<SupportViolation>,
    pub pass: bool,
}

/// Checks that every snapshot stays in the origin ball of radius R + r.
pub fn support_growth_check(traj: &MeasureTrajectory, r: f64, big_r: f64, c: f64) -> SupportReport {
    let bound = big_r + r;
    let precondition_holds = traj.horizon() < bound / c;
    let mut max_radius = 0.0f64;
    let mut first_violation = None;
    for (k, (snap, &t)) in traj.snapshots().iter().zip(traj.times()).enumerate() {
        for (i, p) in snap.iter().enumerate() {
            let rad = crate::linalg::norm(p);
            max_radius = max_radius.max(rad);
            if rad > bound && first_violation.is_none() {
                first_violation = Some(SupportViolation {
                    time: t,
                    snapshot: k,
                    particle: i,
                    radius: rad,
                });
            }
        }
    }
    SupportReport {
        precondition_holds,
        bound,
        max_radius,
        pass: precondition_holds && first_violation.is_none(),
        first_violation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_quotient: f64,
    /// C · (1 + slack).
    pub threshold: f64,
    /// Grid interval attaining the maximum.
    pub worst_interval: (f64, f64),
    pub pass: bool,
}

/// Max over adjacent grid pairs of W2(μ_{t+Δ}, μ_t) / Δ, compared with C.
pub fn lipschitz_curve_check(traj: &MeasureTrajectory, c: f64) -> Result<LipschitzReport> {
    lipschitz_curve_check_with(traj, c, Execution::default())
}

pub fn lipschitz_curve_check_with(traj: &MeasureTrajectory, c: f64, exec: Execution) -> Result<LipschitzReport> {
    ensure!(
        traj.times().len() >= 2,
        Domain,
        "Lipschitz check needs at least two snapshots"
    );
    let snaps = traj.snapshots();
    let times = traj.times();
    let quotients = exec::map_indexed(exec, snaps.len() - 1, |k| {
        w2_exact(&snaps[k + 1], &snaps[k]).map(|r| r.distance / (times[k + 1] - times[k]))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (worst, max_quotient) = quotients
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (k, q)| if q > acc.1 { (k, q) } else { acc });
    let threshold = c * (1.0 + LIPSCHITZ_SLACK);
    Ok(LipschitzReport {
        max_quotient,
        threshold,
        worst_interval: (times[worst], times[worst + 1]),
        pass: max_quotient <= threshold,
    })
}

/// Radius of the smallest origin ball containing every snapshot.
pub fn trajectory_support_radius(traj: &MeasureTrajectory) -> f64 {
    let origin = vec![0.0; traj.dim()];
    traj.snapshots()
        .iter()
        .map(|s| support_radius(s, &origin).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BenchmarkField, FnField, PiecewiseConstField, StaticField, VectorFieldSpec};
    use crate::measures::{sample_measure, MeasureSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn pts(p: &[Vec<f64>]) -> ParticleEnsemble {
        ParticleEnsemble::from_points(p).unwrap()
    }

    fn rotation(omega: f64) -> VectorFieldSpec {
        VectorFieldSpec::benchmark(
            BenchmarkField::Rotation {
                omega,
                dim: 2,
                radius: 1.0,
            },
            1.0,
        )
        .unwrap()
    }

    fn translation(v: Vec<f64>, horizon: f64) -> VectorFieldSpec {
        VectorFieldSpec::benchmark(BenchmarkField::Translation { velocity: v, radius: 1.0 }, horizon).unwrap()
    }

    #[test]
    fn zero_field_keeps_every_snapshot() {
        let mu0 = sample_measure(
            &MeasureSpec::UniformBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            20,
            1,
        )
        .unwrap();
        let traj = integrate_flow(&VectorFieldSpec::zero(2, 1.0).unwrap(), &mu0, &IntegratorConfig::uniform(1.0, 5)).unwrap();
        assert!(traj.snapshots().iter().all(|s| *s == mu0));
    }

    #[test]
    fn translation_is_exact() {
        let traj = integrate_flow(
            &translation(vec![1.0, 0.0], 2.0),
            &pts(&[vec![0.0, 0.0]]),
            &IntegratorConfig::uniform(2.0, 3),
        )
        .unwrap();
        let last = traj.last().point(0);
        assert!((last[0] - 2.0).abs() < 1e-12 && last[1] == 0.0);
    }

    #[test]
    fn rotation_quarter_turn_rk4() {
        let f = rotation(PI / 2.0);
        let cfg = IntegratorConfig::uniform(1.0, 2).with_step(1e-2);
        let traj = integrate_flow(&f, &pts(&[vec![1.0, 0.0]]), &cfg).unwrap();
        let p = traj.last().point(0);
        assert!(p[0].abs() < 1e-6 && (p[1] - 1.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn rk4_convergence_order() {
        let f = rotation(1.0);
        let err = |h: f64| {
            let cfg = IntegratorConfig::uniform(1.0, 2).with_step(h);
            let traj = integrate_flow(&f, &pts(&[vec![1.0, 0.0]]), &cfg).unwrap();
            let exact = f.exact_flow(1.0, &[1.0, 0.0]).unwrap();
            crate::linalg::dist(traj.last().point(0), &exact)
        };
        let (e1, e2, e3) = (err(1.0 / 50.0), err(1.0 / 100.0), err(1.0 / 200.0));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn euler_is_first_order() {
        let f = rotation(1.0);
        let err = |h: f64| {
            let cfg = IntegratorConfig::uniform(1.0, 2).with_step(h).with_method(Method::Euler);
            let traj = integrate_flow(&f, &pts(&[vec![1.0, 0.0]]), &cfg).unwrap();
            crate::linalg::dist(traj.last().point(0), &f.exact_flow(1.0, &[1.0, 0.0]).unwrap())
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn steps_split_at_breakpoints() {
        // +1 on [0, 0.3), -1 on [0.3, 1]; a single step would integrate the wrong piece
        let up: Arc<dyn StaticField> = Arc::new(FnField::new(1, |_x: &[f64], o: &mut [f64]| o[0] = 1.0));
        let down: Arc<dyn StaticField> = Arc::new(FnField::new(1, |_x: &[f64], o: &mut [f64]| o[0] = -1.0));
        let f = PiecewiseConstField::new(vec![0.0, 0.3, 1.0], vec![up, down]).unwrap();
        let cfg = IntegratorConfig::uniform(1.0, 2).with_step(1.0);
        let traj = integrate_flow(&f, &pts(&[vec![0.0]]), &cfg).unwrap();
        assert!((traj.last().point(0)[0] - (0.3 - 0.7)).abs() < 1e-15);
        assert_eq!(traj.provenance().steps, 2);
    }

    #[test]
    fn divergence_names_particle() {
        let blow: Arc<dyn StaticField> = Arc::new(FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0]));
        let f = PiecewiseConstField::new(vec![0.0, 2.0], vec![blow]).unwrap();
        let cfg = IntegratorConfig::uniform(2.0, 2).with_step(1e-3);
        let err = integrate_flow(&f, &pts(&[vec![0.1], vec![1.0]]), &cfg).unwrap_err();
        match err {
            Error::Divergence { particle, time } => {
                assert_eq!(particle, 1);
                assert!(time > 0.9 && time < 1.01, "{time}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn snapshot_beyond_horizon_rejected() {
        let cfg = IntegratorConfig::uniform(2.0, 3);
        assert!(integrate_flow(&rotation(1.0), &pts(&[vec![1.0, 0.0]]), &cfg).is_err());
    }

    #[test]
    fn time_reversal_returns_home() {
        let mu0 = sample_measure(
            &MeasureSpec::UniformBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            30,
            4,
        )
        .unwrap();
        let cfg = IntegratorConfig::uniform(1.0, 2).with_step(1e-2);
        let fwd = integrate_flow(&rotation(1.0), &mu0, &cfg).unwrap();
        let back = integrate_flow(&rotation(-1.0), fwd.last(), &cfg).unwrap();
        for (a, b) in back.last().iter().zip(mu0.iter()) {
            assert!(crate::linalg::dist(a, b) < 1e-6);
        }
    }

    #[test]
    fn support_check_examples() {
        let zero = VectorFieldSpec::zero(2, 1.0).unwrap();
        let mu0 = pts(&[vec![0.5, 0.0], vec![0.0, -1.0]]);
        let traj = integrate_flow(&zero, &mu0, &IntegratorConfig::uniform(1.0, 3)).unwrap();
        assert!(support_growth_check(&traj, 1.0, 1.0, 1e-3).pass);

        let unit = sample_measure(
            &MeasureSpec::UniformBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            100,
            2,
        )
        .unwrap();
        let tr = translation(vec![1.0, 0.0], 1.0);
        let traj = integrate_flow(&tr, &unit, &IntegratorConfig::uniform(1.0, 11)).unwrap();
        let rep = support_growth_check(&traj, 1.0, 1.5, 1.0);
        assert!(rep.pass && rep.max_radius <= 2.0 + 1e-12);

        let traj = integrate_flow(&tr, &pts(&[vec![1.0, 0.0]]), &IntegratorConfig::uniform(1.0, 3)).unwrap();
        let rep = support_growth_check(&traj, 1.0, 0.5, 1.0);
        assert!(rep.precondition_holds);
        assert!(!rep.pass);
        let v = rep.first_violation.unwrap();
        assert_eq!((v.time, v.particle, v.snapshot), (1.0, 0, 2));
        assert!((v.radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_check_examples() {
        let mu = pts(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let flat = MeasureTrajectory::constant(&mu, uniform_grid(1.0, 5)).unwrap();
        let rep = lipschitz_curve_check(&flat, 1.0).unwrap();
        assert_eq!(rep.max_quotient, 0.0);
        assert!(rep.pass);

        let traj = integrate_flow(&translation(vec![0.6, 0.8], 1.0), &mu, &IntegratorConfig::uniform(1.0, 11)).unwrap();
        let rep = lipschitz_curve_check(&traj, 1.0).unwrap();
        assert!((rep.max_quotient - 1.0).abs() < 1e-9, "{}", rep.max_quotient);
        assert!(rep.pass);

        let short = MeasureTrajectory::constant(&mu, vec![0.0]).unwrap();
        assert!(lipschitz_curve_check(&short, 1.0).is_err());
    }

    #[test]
    fn save_and_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mu0 = pts(&[vec![0.25, -1.0], vec![3.0, 0.125]]);
        let traj = integrate_flow(&rotation(1.0), &mu0, &IntegratorConfig::uniform(1.0, 4)).unwrap();
        let files = traj.save(dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.path().join("snap_3.csv").exists());
        let back = MeasureTrajectory::load(dir.path()).unwrap();
        assert_eq!(back, traj);
    }
}
