use std::sync::Arc;

use crate::error::{ensure, Result};
use crate::fields::{Frozen, PiecewiseConstField, StaticField, TimeField, TimeStructure};

/// Composite Simpson subintervals per smooth stretch of a window.
pub const SIMPSON_INTERVALS: usize = 64;

/// Window mean (1/|w|) ∫_w V_τ(x) dτ evaluated by a fixed quadrature rule.
struct WindowAverage {
    field: Arc<dyn TimeField>,
    /// (time, weight) with weights summing to one.
    nodes: Vec<(f64, f64)>,
}

impl StaticField for WindowAverage {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = out.len();
        let mut buf = [0.0f64; 8];
        let mut heap;
        let v: &mut [f64] = if d <= buf.len() {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(t, w) in &self.nodes {
            self.field.eval_into(t, x, v);
            for (o, vi) in out.iter_mut().zip(v.iter()) {
                *o += w * vi;
            }
        }
    }
}

fn simpson_nodes(start: f64, end: f64, scale: f64, nodes: &mut Vec<(f64, f64)>) {
    let n = SIMPSON_INTERVALS;
    let h = (end - start) / n as f64;
    for k in 0..=n {
        let t = if k == n { end } else { start + k as f64 * h };
        let c = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        nodes.push((t, c * h / 3.0 * scale));
    }
}

/// Replaces `field` by its averages over `n` equal windows of [0, T].
///
/// Autonomous fields are returned unchanged piece by piece. For
/// piecewise-constant fields each window is split at the field's switch
/// times and integrated exactly; otherwise composite Simpson with
/// [`SIMPSON_INTERVALS`] subintervals is applied between switch times.
pub fn time_average(field: Arc<dyn TimeField>, n: usize) -> Result<PiecewiseConstField> {
    ensure!(n >= 1, Parameter, "window count must be >= 1");
    let horizon = field.horizon();
    let structure = field.time_structure();
    let breakpoints: Vec<f64> = (0..=n)
        .map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 })
        .collect();
    let switches = match &structure {
        TimeStructure::PiecewiseConstant(b) => b.clone(),
        _ => Vec::new(),
    };

    let mut pieces: Vec<Arc<dyn StaticField>> = Vec::with_capacity(n);
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if structure == TimeStructure::Autonomous {
            pieces.push(Arc::new(Frozen {
                field: field.clone(),
                time: a,
            }));
            continue;
        }
        let mut cuts = vec![a];
        cuts.extend(switches.iter().copied().filter(|&s| s > a && s < b));
        cuts.push(b);
        let len = b - a;
        let mut nodes = Vec::new();
        for c in cuts.windows(2) {
            let frac = (c[1] - c[0]) / len;
            match structure {
                TimeStructure::PiecewiseConstant(_) => {
                    let weight = if cuts.len() == 2 { 1.0 } else { frac };
                    nodes.push((0.5 * (c[0] + c[1]), weight));
                }
                _ => simpson_nodes(c[0], c[1], 1.0 / len, &mut nodes),
            }
        }
        if nodes.len() == 1 {
            pieces.push(Arc::new(Frozen {
                field: field.clone(),
                time: nodes[0].0,
            }));
        } else {
            pieces.push(Arc::new(WindowAverage {
                field: field.clone(),
                nodes,
            }));
        }
    }
    PiecewiseConstField::new(breakpoints, pieces)
}
