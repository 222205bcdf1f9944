use serde::{Deserialize, Serialize};

use super::{Activation, StaticField};
use crate::error::{ensure, Result};
use crate::linalg::SquareMatrix;

/// One summand A Σ(W x + θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralTerm {
    #[serde(rename = "A")]
    pub a: SquareMatrix,
    #[serde(rename = "W")]
    pub w: SquareMatrix,
    pub theta: Vec<f64>,
}

impl NeuralTerm {
    pub fn new(a: SquareMatrix, w: SquareMatrix, theta: Vec<f64>) -> Result<Self> {
        let t = Self { a, w, theta };
        t.validate()?;
        Ok(t)
    }

    /// A = 0, W = I, θ = 0: the canonical admissible zero velocity.
    pub fn zero(dim: usize) -> Self {
        Self {
            a: SquareMatrix::zeros(dim),
            w: SquareMatrix::identity(dim),
            theta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.theta.len();
        ensure!(d >= 1, Domain, "neural term must have dimension >= 1");
        ensure!(
            self.a.dim() == d && self.w.dim() == d,
            Domain,
            "neural term shapes disagree: A {0}x{0}, W {1}x{1}, theta {2}",
            self.a.dim(),
            self.w.dim(),
            d
        );
        ensure!(
            self.a.is_finite() && self.w.is_finite() && self.theta.iter().all(|v| v.is_finite()),
            Domain,
            "neural term entries must be finite"
        );
        Ok(())
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            a: self.a.scaled(gain),
            w: self.w.clone(),
            theta: self.theta.clone(),
        }
    }

    /// `out += A Σ(W x + θ)`, using `scratch` (length d) for the hidden layer.
    #[inline]
    pub fn eval_add(&self, act: Activation, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.w.mul_vec_into(x, scratch);
        for (s, th) in scratch.iter_mut().zip(&self.theta) {
            *s = act.apply(*s + th);
        }
        self.a.mul_vec_add(scratch, out);
    }

    pub fn lipschitz_bound(&self, act: Activation) -> f64 {
        self.a.operator_norm() * self.w.operator_norm() * act.lipschitz()
    }
}

/// Finite superposition Σ_i A_i Σ(W_i x + θ_i). An empty term list is the zero field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NeuralFieldJson", into = "NeuralFieldJson")]
pub struct NeuralField {
    dim: usize,
    activation: Activation,
    terms: Vec<NeuralTerm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuralFieldJson {
    activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    terms: Vec<NeuralTerm>,
}

impl TryFrom<NeuralFieldJson> for NeuralField {
    type Error = crate::Error;

    fn try_from(j: NeuralFieldJson) -> Result<Self> {
        let dim = match (j.dim, j.terms.first()) {
            (Some(d), _) => d,
            (None, Some(t)) => t.dim(),
            (None, None) => {
                return Err(crate::Error::Domain(
                    "an empty neural field needs an explicit dim".into(),
                ))
            }
        };
        NeuralField::new(dim, j.activation, j.terms)
    }
}

impl From<NeuralField> for NeuralFieldJson {
    fn from(f: NeuralField) -> Self {
        NeuralFieldJson {
            activation: f.activation,
            dim: f.terms.is_empty().then_some(f.dim),
            terms: f.terms,
        }
    }
}

impl NeuralField {
    pub fn new(dim: usize, activation: Activation, terms: Vec<NeuralTerm>) -> Result<Self> {
        ensure!(dim >= 1, Domain, "field dimension must be >= 1");
        for (i, t) in terms.iter().enumerate() {
            t.validate()?;
            ensure!(t.dim() == dim, Domain, "term {i} has dimension {} not {dim}", t.dim());
        }
        Ok(Self {
            dim,
            activation,
            terms,
        })
    }

    pub fn zero(dim: usize, activation: Activation) -> Self {
        Self {
            dim,
            activation,
            terms: Vec::new(),
        }
    }

    pub fn single(activation: Activation, term: NeuralTerm) -> Result<Self> {
        Self::new(term.dim(), activation, vec![term])
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn terms(&self) -> &[NeuralTerm] {
        &self.terms
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    /// Superposition of both term lists.
    pub fn union(&self, other: &NeuralField) -> Result<Self> {
        ensure!(
            self.dim == other.dim && self.activation == other.activation,
            Domain,
            "cannot combine fields of different dimension or activation"
        );
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(self.dim, self.activation, terms)
    }

    /// Σ_i ‖A_i‖ ‖W_i‖ K_σ.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.lipschitz_bound(self.activation)).sum()
    }

    /// Upper bound on |F(x)| for |x| ≤ `max_norm`.
    pub fn bound_on_ball(&self, max_norm: f64) -> f64 {
        let sqrt_d = (self.dim as f64).sqrt();
        self.terms
            .iter()
            .map(|t| {
                let hidden = match self.activation.sup_abs() {
                    Some(s) => s * sqrt_d,
                    None => t.w.operator_norm() * max_norm + crate::linalg::norm(&t.theta),
                };
                t.a.operator_norm() * hidden
            })
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        StaticField::eval_into(self, x, &mut out);
        out
    }
}

impl StaticField for NeuralField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.terms.is_empty() {
            return;
        }
        let mut scratch = [0.0f64; 8];
        if self.dim <= scratch.len() {
            let s = &mut scratch[..self.dim];
            for t in &self.terms {
                t.eval_add(self.activation, x, s, out);
            }
        } else {
            let mut s = vec![0.0; self.dim];
            for t in &self.terms {
                t.eval_add(self.activation, x, &mut s, out);
            }
        }
    }
}
