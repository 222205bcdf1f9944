use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::benchmark::TimedBenchmark;
use super::{estimate_field_bounds, Activation, Autonomous, BenchmarkField, NeuralField, TimeField, TimeStructure};
use crate::error::{ensure, Error, Result};
use crate::measures::Region;

/// Relative slack allowed between declared constants and sampled estimates.
pub const BOUND_SLACK: f64 = 0.05;

const VALIDATION_T_SAMPLES: usize = 9;
const VALIDATION_X_SAMPLES: usize = 96;
const VALIDATION_SEED: u64 = 0x5eed_b0d5;

/// Serializable description of where a field came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum FieldDescriptor {
    Benchmark(BenchmarkField),
    Neural { field: NeuralField },
    Zero { dim: usize },
    Displacement { bandwidth: f64, particles: usize },
    Custom { label: String },
}

/// Time-varying field with declared sup bound `C` and Lipschitz constant `K`
/// on a declared region.
#[derive(Clone)]
pub struct VectorFieldSpec {
    field: Arc<dyn TimeField>,
    bound_c: f64,
    lipschitz_k: f64,
    region: Region,
    descriptor: FieldDescriptor,
}

impl std::fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldSpec")
            .field("descriptor", &self.descriptor)
            .field("bound_c", &self.bound_c)
            .field("lipschitz_k", &self.lipschitz_k)
            .field("horizon", &self.horizon())
            .field("region", &self.region)
            .finish()
    }
}

impl VectorFieldSpec {
    /// Validates the declared constants against sampled estimates on `region`.
    pub fn new(
        field: Arc<dyn TimeField>,
        bound_c: f64,
        lipschitz_k: f64,
        region: Region,
        descriptor: FieldDescriptor,
    ) -> Result<Self> {
        let horizon = field.horizon();
        ensure!(
            horizon.is_finite() && horizon > 0.0,
            Parameter,
            "horizon must be positive, got {horizon}"
        );
        region.validate()?;
        ensure!(
            region.dim() == field.dim(),
            Domain,
            "region dimension {} differs from field dimension {}",
            region.dim(),
            field.dim()
        );
        ensure!(
            bound_c.is_finite() && bound_c >= 0.0 && lipschitz_k.is_finite() && lipschitz_k >= 0.0,
            Parameter,
            "declared C and K must be finite and nonnegative"
        );
        let est = estimate_field_bounds(
            field.as_ref(),
            &region,
            VALIDATION_T_SAMPLES,
            VALIDATION_X_SAMPLES,
            VALIDATION_SEED,
        );
        if est.c_hat > bound_c * (1.0 + BOUND_SLACK) + 1e-12 {
            return Err(Error::Construction(format!(
                "declared bound C = {bound_c} is below the sampled sup {}",
                est.c_hat
            )));
        }
        // near-neighbour quotients carry rounding of order ε·C / (1e-4·radius)
        let rounding = 1e-9 * (1.0 + est.c_hat / region.circumradius());
        if est.k_hat > lipschitz_k * (1.0 + BOUND_SLACK) + rounding {
            return Err(Error::Construction(format!(
                "declared Lipschitz constant K = {lipschitz_k} is below the sampled quotient {}",
                est.k_hat
            )));
        }
        Ok(Self {
            field,
            bound_c,
            lipschitz_k,
            region,
            descriptor,
        })
    }

    pub fn benchmark(field: BenchmarkField, horizon: f64) -> Result<Self> {
        field.validate()?;
        let (c, k, region) = (field.bound(), field.lipschitz(), field.region());
        Self::new(
            Arc::new(TimedBenchmark {
                field: field.clone(),
                horizon,
            }),
            c,
            k,
            region,
            FieldDescriptor::Benchmark(field),
        )
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        ensure!(dim >= 1, Domain, "dimension must be >= 1");
        Self::new(
            Arc::new(Autonomous {
                field: NeuralField::zero(dim, Activation::Logistic),
                horizon,
            }),
            0.0,
            0.0,
            Region::centered_ball(dim, 1.0)?,
            FieldDescriptor::Zero { dim },
        )
    }

    /// Autonomous neural field with constants from its weights.
    pub fn neural(field: NeuralField, horizon: f64, region: Region) -> Result<Self> {
        let c = field.bound_on_ball(region.max_norm());
        let k = field.lipschitz_bound();
        Self::new(
            Arc::new(Autonomous {
                field: field.clone(),
                horizon,
            }),
            c,
            k,
            region,
            FieldDescriptor::Neural { field },
        )
    }

    pub fn field(&self) -> &Arc<dyn TimeField> {
        &self.field
    }

    pub fn bound_c(&self) -> f64 {
        self.bound_c
    }

    pub fn lipschitz_k(&self) -> f64 {
        self.lipschitz_k
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.descriptor
    }

    /// Analytic flow map for benchmark fields that have one.
    pub fn exact_flow(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        match &self.descriptor {
            FieldDescriptor::Benchmark(b) => b.exact_flow(t, x),
            FieldDescriptor::Zero { .. } => Some(x.to_vec()),
            _ => None,
        }
    }
}

impl TimeField for VectorFieldSpec {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn horizon(&self) -> f64 {
        self.field.horizon()
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.field.eval_into(t, x, out)
    }
    fn eval_anchored(&self, anchor: f64, t: f64, x: &[f64], out: &mut [f64]) {
        self.field.eval_anchored(anchor, t, x, out)
    }
    fn time_structure(&self) -> TimeStructure {
        self.field.time_structure()
    }
}
