use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TimeField, VectorFieldSpec};
use crate::linalg;
use crate::measures::{rng_from_seed, Region};

/// Sampled lower bounds on sup |V| and the spatial Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsEstimate {
    pub c_hat: f64,
    pub k_hat: f64,
}

pub fn estimate_bounds(
    spec: &VectorFieldSpec,
    region: &Region,
    t_samples: usize,
    x_samples: usize,
    seed: u64,
) -> BoundsEstimate {
    estimate_field_bounds(spec.field().as_ref(), region, t_samples, x_samples, seed)
}

/// Samples `t_samples` evenly spaced times on [0, T] and `x_samples` points
/// uniformly in `region`. The Lipschitz estimate maximizes difference
/// quotients over all sample pairs plus one close neighbour per sample.
pub fn estimate_field_bounds(
    field: &dyn TimeField,
    region: &Region,
    t_samples: usize,
    x_samples: usize,
    seed: u64,
) -> BoundsEstimate {
    let t_samples = t_samples.max(2);
    let x_samples = x_samples.max(2);
    let d = field.dim();
    let horizon = field.horizon();
    let mut rng = rng_from_seed(seed);
    let xs: Vec<Vec<f64>> = (0..x_samples).map(|_| region.sample_uniform(&mut rng)).collect();
    let step = 1e-4 * region.circumradius();
    let near: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = linalg::norm(&dir).max(f64::MIN_POSITIVE);
            x.iter().zip(&dir).map(|(a, b)| a + step * b / len).collect()
        })
        .collect();

    let mut c_hat = 0.0f64;
    let mut k_hat = 0.0f64;
    let mut vs = vec![0.0; x_samples * d];
    let mut w = vec![0.0; d];
    for k in 0..t_samples {
        let t = horizon * k as f64 / (t_samples - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            let v = &mut vs[i * d..(i + 1) * d];
            field.eval_into(t, x, v);
            c_hat = c_hat.max(linalg::norm(v));
            field.eval_into(t, &near[i], &mut w);
            let dx = linalg::dist(x, &near[i]);
            if dx > 0.0 {
                k_hat = k_hat.max(linalg::dist(v, &w) / dx);
            }
        }
        for i in 0..x_samples {
            for j in i + 1..x_samples {
                let dx = linalg::dist(&xs[i], &xs[j]);
                if dx > 0.0 {
                    let dv = linalg::dist(&vs[i * d..(i + 1) * d], &vs[j * d..(j + 1) * d]);
                    k_hat = k_hat.max(dv / dx);
                }
            }
        }
    }
    BoundsEstimate { c_hat, k_hat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BenchmarkField, VectorFieldSpec};

    #[test]
    fn zero_field_has_zero_bounds() {
        let spec = VectorFieldSpec::zero(2, 1.0).unwrap();
        let region = Region::centered_ball(2, 1.0).unwrap();
        let b = estimate_bounds(&spec, &region, 4, 50, 1);
        assert_eq!(b, BoundsEstimate { c_hat: 0.0, k_hat: 0.0 });
    }

    #[test]
    fn translation_bounds() {
        let spec = VectorFieldSpec::benchmark(
            BenchmarkField::Translation {
                velocity: vec![3.0, 4.0],
                radius: 1.0,
            },
            1.0,
        )
        .unwrap();
        let region = Region::cube(vec![1.0, -2.0], vec![3.0, 0.5]).unwrap();
        let b = estimate_bounds(&spec, &region, 3, 64, 2);
        assert_eq!(b.c_hat, 5.0);
        assert_eq!(b.k_hat, 0.0);
    }

    #[test]
    fn rotation_bounds_approach_exact_values() {
        let spec = VectorFieldSpec::benchmark(
            BenchmarkField::Rotation {
                omega: 1.0,
                dim: 2,
                radius: 2.0,
            },
            1.0,
        )
        .unwrap();
        let region = Region::centered_ball(2, 2.0).unwrap();
        let small = estimate_bounds(&spec, &region, 2, 20, 3);
        let large = estimate_bounds(&spec, &region, 2, 400, 3);
        assert!(small.c_hat <= 2.0 && large.c_hat <= 2.0);
        assert!(large.c_hat >= small.c_hat);
        assert!(large.c_hat > 1.98, "{}", large.c_hat);
        assert!(large.k_hat <= 1.0 + 1e-9 && large.k_hat > 0.999);
    }
}
