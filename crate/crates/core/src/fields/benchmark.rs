use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{StaticField, TimeField, TimeStructure};
use crate::error::{ensure, Result};
use crate::linalg;
use crate::measures::Region;

fn two() -> usize {
    2
}

fn unit() -> f64 {
    1.0
}

/// Analytic reference fields with exact bound and Lipschitz constants on
/// their declared region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BenchmarkField {
    /// V(x) = ω(−x₁, x₀, 0, …): rigid rotation in the first coordinate plane.
    Rotation {
        omega: f64,
        #[serde(default = "two")]
        dim: usize,
        /// Radius of the origin-centered ball the bounds are declared on.
        #[serde(default = "unit")]
        radius: f64,
    },
    /// V(x) = −λ (x − c).
    ContractionToPoint {
        lambda: f64,
        center: Vec<f64>,
        #[serde(default = "unit")]
        radius: f64,
    },
    /// V(x) = (γ x₁, 0, …).
    Shear {
        gamma: f64,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    /// Time-frozen double gyre on [0, 2] × [0, 1]:
    /// V = π a (−sin πx cos πy, cos πx sin πy).
    DoubleGyreStatic { amplitude: f64 },
    /// V(x) = v.
    Translation {
        velocity: Vec<f64>,
        #[serde(default = "unit")]
        radius: f64,
    },
}

impl BenchmarkField {
    /// Planar rotation declared on the unit ball.
    pub fn rotation(omega: f64) -> Self {
        BenchmarkField::Rotation { omega, dim: 2, radius: 1.0 }
    }

    pub fn shear(gamma: f64) -> Self {
        BenchmarkField::Shear { gamma, dim: 2, radius: 1.0 }
    }

    pub fn contraction(lambda: f64, center: Vec<f64>) -> Self {
        BenchmarkField::ContractionToPoint { lambda, center, radius: 1.0 }
    }

    pub fn translation(velocity: Vec<f64>) -> Self {
        BenchmarkField::Translation { velocity, radius: 1.0 }
    }

    pub fn parse(name: &str, params: serde_json::Value) -> Result<Self> {
        let v = serde_json::json!({ "name": name, "params": params });
        serde_json::from_value(v).map_err(|e| crate::Error::Parameter(format!("benchmark field {name:?}: {e}")))
    }

    pub fn dim(&self) -> usize {
        match self {
            BenchmarkField::Rotation { dim, .. } | BenchmarkField::Shear { dim, .. } => *dim,
            BenchmarkField::ContractionToPoint { center, .. } => center.len(),
            BenchmarkField::DoubleGyreStatic { .. } => 2,
            BenchmarkField::Translation { velocity, .. } => velocity.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match self {
            BenchmarkField::Rotation { omega, dim, radius } => {
                ensure!(*dim >= 2, Parameter, "rotation needs dim >= 2");
                ensure!(omega.is_finite(), Parameter, "omega must be finite");
                ensure!(finite_pos(*radius), Parameter, "radius must be positive");
            }
            BenchmarkField::ContractionToPoint { lambda, center, radius } => {
                ensure!(!center.is_empty(), Parameter, "contraction center must be non-empty");
                ensure!(finite_pos(*lambda), Parameter, "lambda must be positive");
                ensure!(center.iter().all(|c| c.is_finite()), Parameter, "center must be finite");
                ensure!(finite_pos(*radius), Parameter, "radius must be positive");
            }
            BenchmarkField::Shear { gamma, dim, radius } => {
                ensure!(*dim >= 2, Parameter, "shear needs dim >= 2");
                ensure!(gamma.is_finite(), Parameter, "gamma must be finite");
                ensure!(finite_pos(*radius), Parameter, "radius must be positive");
            }
            BenchmarkField::DoubleGyreStatic { amplitude } => {
                ensure!(amplitude.is_finite(), Parameter, "amplitude must be finite");
            }
            BenchmarkField::Translation { velocity, radius } => {
                ensure!(!velocity.is_empty(), Parameter, "velocity must be non-empty");
                ensure!(velocity.iter().all(|c| c.is_finite()), Parameter, "velocity must be finite");
                ensure!(finite_pos(*radius), Parameter, "radius must be positive");
            }
        }
        Ok(())
    }

    /// Region the declared constants refer to.
    pub fn region(&self) -> Region {
        let d = self.dim();
        match self {
            BenchmarkField::Rotation { radius, .. }
            | BenchmarkField::Shear { radius, .. }
            | BenchmarkField::ContractionToPoint { radius, .. }
            | BenchmarkField::Translation { radius, .. } => Region::Ball {
                center: vec![0.0; d],
                radius: *radius,
            },
            BenchmarkField::DoubleGyreStatic { .. } => Region::Box {
                center: vec![1.0, 0.5],
                halfwidths: vec![1.0, 0.5],
            },
        }
    }

    /// sup |V| over [`Self::region`].
    pub fn bound(&self) -> f64 {
        match self {
            BenchmarkField::Rotation { omega, radius, .. } => omega.abs() * radius,
            BenchmarkField::ContractionToPoint { lambda, center, radius } => {
                lambda * (radius + linalg::norm(center))
            }
            BenchmarkField::Shear { gamma, radius, .. } => gamma.abs() * radius,
            BenchmarkField::DoubleGyreStatic { amplitude } => PI * amplitude.abs(),
            BenchmarkField::Translation { velocity, .. } => linalg::norm(velocity),
        }
    }

    /// Global spatial Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            BenchmarkField::Rotation { omega, .. } => omega.abs(),
            BenchmarkField::ContractionToPoint { lambda, .. } => *lambda,
            BenchmarkField::Shear { gamma, .. } => gamma.abs(),
            BenchmarkField::DoubleGyreStatic { amplitude } => PI * PI * amplitude.abs(),
            BenchmarkField::Translation { .. } => 0.0,
        }
    }

    /// Closed-form flow map X_t(x), where one exists.
    pub fn exact_flow(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let mut y = x.to_vec();
        match self {
            BenchmarkField::Rotation { omega, .. } => {
                let (s, c) = (omega * t).sin_cos();
                y[0] = c * x[0] - s * x[1];
                y[1] = s * x[0] + c * x[1];
            }
            BenchmarkField::ContractionToPoint { lambda, center, .. } => {
                let decay = (-lambda * t).exp();
                for ((yi, xi), ci) in y.iter_mut().zip(x).zip(center) {
                    *yi = ci + (xi - ci) * decay;
                }
            }
            BenchmarkField::Shear { gamma, .. } => y[0] = x[0] + gamma * t * x[1],
            BenchmarkField::Translation { velocity, .. } => {
                for (yi, vi) in y.iter_mut().zip(velocity) {
                    *yi += t * vi;
                }
            }
            BenchmarkField::DoubleGyreStatic { .. } => return None,
        }
        Some(y)
    }
}

impl StaticField for BenchmarkField {
    fn dim(&self) -> usize {
        BenchmarkField::dim(self)
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            BenchmarkField::Rotation { omega, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = -omega * x[1];
                out[1] = omega * x[0];
            }
            BenchmarkField::ContractionToPoint { lambda, center, .. } => {
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = -lambda * (xi - ci);
                }
            }
            BenchmarkField::Shear { gamma, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = gamma * x[1];
            }
            BenchmarkField::DoubleGyreStatic { amplitude } => {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                out[0] = -PI * amplitude * sx * cy;
                out[1] = PI * amplitude * cx * sy;
            }
            BenchmarkField::Translation { velocity, .. } => out.copy_from_slice(velocity),
        }
    }
}

/// A benchmark field on a finite horizon.
#[derive(Debug, Clone)]
pub(crate) struct TimedBenchmark {
    pub field: BenchmarkField,
    pub horizon: f64,
}

impl TimeField for TimedBenchmark {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        StaticField::eval_into(&self.field, x, out)
    }
    fn time_structure(&self) -> TimeStructure {
        TimeStructure::Autonomous
    }
}
