use std::sync::Arc;

use super::{StaticField, TimeField, TimeStructure};
use crate::error::{ensure, Result};

/// Index of the piece governing time `t`: right-continuous, with `t = T`
/// assigned to the last piece.
pub fn piece_index(breakpoints: &[f64], t: f64) -> usize {
    let pieces = breakpoints.len() - 1;
    breakpoints.partition_point(|&b| b <= t).saturating_sub(1).min(pieces - 1)
}

pub(crate) fn validate_breakpoints(breakpoints: &[f64], pieces: usize) -> Result<()> {
    ensure!(pieces >= 1, Domain, "need at least one piece");
    ensure!(
        breakpoints.len() == pieces + 1,
        Domain,
        "{} breakpoints for {pieces} pieces",
        breakpoints.len()
    );
    ensure!(breakpoints[0] == 0.0, Domain, "breakpoints must start at 0");
    ensure!(
        breakpoints.iter().all(|b| b.is_finite()) && breakpoints.windows(2).all(|w| w[0] < w[1]),
        Domain,
        "breakpoints must be finite and strictly increasing"
    );
    Ok(())
}

/// Field that is constant in time on each `[t_j, t_{j+1})`.
#[derive(Clone)]
pub struct PiecewiseConstField {
    dim: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<Arc<dyn StaticField>>,
}

impl std::fmt::Debug for PiecewiseConstField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseConstField")
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl PiecewiseConstField {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Arc<dyn StaticField>>) -> Result<Self> {
        validate_breakpoints(&breakpoints, pieces.len())?;
        let dim = pieces[0].dim();
        ensure!(
            pieces.iter().all(|p| p.dim() == dim),
            Domain,
            "all pieces must share dimension {dim}"
        );
        Ok(Self {
            dim,
            breakpoints,
            pieces,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Arc<dyn StaticField>] {
        &self.pieces
    }

    pub fn piece_at(&self, t: f64) -> &Arc<dyn StaticField> {
        &self.pieces[piece_index(&self.breakpoints, t)]
    }
}

impl TimeField for PiecewiseConstField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.piece_at(t).eval_into(x, out)
    }

    fn eval_anchored(&self, anchor: f64, _t: f64, x: &[f64], out: &mut [f64]) {
        self.piece_at(anchor).eval_into(x, out)
    }

    fn time_structure(&self) -> TimeStructure {
        TimeStructure::PiecewiseConstant(self.breakpoints.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FnField;

    fn constant(v: f64) -> Arc<dyn StaticField> {
        Arc::new(FnField::new(1, move |_x: &[f64], out: &mut [f64]| out[0] = v))
    }

    #[test]
    fn right_continuous_and_last_piece_at_horizon() {
        let f = PiecewiseConstField::new(vec![0.0, 0.5, 1.0], vec![constant(1.0), constant(2.0)]).unwrap();
        let mut out = [0.0];
        f.eval_into(0.0, &[0.0], &mut out);
        assert_eq!(out[0], 1.0);
        f.eval_into(0.5, &[0.0], &mut out);
        assert_eq!(out[0], 2.0, "piece j governs t_j");
        f.eval_into(1.0, &[0.0], &mut out);
        assert_eq!(out[0], 2.0);
        f.eval_anchored(0.25, 0.5, &[0.0], &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewiseConstField::new(vec![0.0, 0.5], vec![constant(1.0), constant(2.0)]).is_err());
        assert!(PiecewiseConstField::new(vec![0.0, 0.5, 0.5], vec![constant(1.0), constant(2.0)]).is_err());
        assert!(PiecewiseConstField::new(vec![0.1, 0.5, 1.0], vec![constant(1.0), constant(2.0)]).is_err());
    }
}
