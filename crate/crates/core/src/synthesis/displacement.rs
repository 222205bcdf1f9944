//! Target field for endpoint control: kernel-smoothed velocities of the
//! straight-line interpolation along an optimal coupling.

use std::sync::Arc;

use crate::error::{ensure, Result};
use crate::fields::{FieldDescriptor, TimeField, VectorFieldSpec};
use crate::linalg;
use crate::measures::{ParticleEnsemble, Region};
use crate::transport::w2_exact;

struct DisplacementField {
    dim: usize,
    horizon: f64,
    inv_two_h2: f64,
    starts: Vec<f64>,
    /// (y_π(i) − x_i) / T
    velocities: Vec<f64>,
}

impl TimeField for DisplacementField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn eval_into(&self, t: f64, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let n = self.starts.len() / d;
        // log-weights shifted by their maximum so far-field points stay finite
        let mut best = f64::INFINITY;
        let sq: Vec<f64> = (0..n)
            .map(|i| {
                let x = &self.starts[i * d..(i + 1) * d];
                let v = &self.velocities[i * d..(i + 1) * d];
                let s: f64 = (0..d)
                    .map(|k| {
                        let p = x[k] + t * v[k];
                        (z[k] - p) * (z[k] - p)
                    })
                    .sum();
                best = best.min(s);
                s
            })
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut total = 0.0;
        for (i, s) in sq.iter().enumerate() {
            let w = (-(s - best) * self.inv_two_h2).exp();
            total += w;
            for (o, v) in out.iter_mut().zip(&self.velocities[i * d..(i + 1) * d]) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}

fn diameter(points: &[&[f64]]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.max(linalg::dist(points[i], points[j]));
        }
    }
    best
}

/// Builds a bounded Lipschitz field on [0, `horizon`] whose flow carries
/// `mu0` approximately onto `muf`.
///
/// Particles are matched by the exact W2 coupling π and moved on straight
/// lines x_i + (t/T)(y_π(i) − x_i). The field is the Gaussian
/// Nadaraya–Watson regression of the constant particle velocities onto the
/// interpolated positions. Since every value is a convex combination of
/// the velocities, C = max |v_i|. Its spatial Jacobian is a weighted
/// velocity/position covariance over h², so K ≤ spread(v) · diam(p) / h².
pub fn displacement_target_field(
    mu0: &ParticleEnsemble,
    muf: &ParticleEnsemble,
    bandwidth: f64,
    horizon: f64,
) -> Result<VectorFieldSpec> {
    ensure!(
        bandwidth.is_finite() && bandwidth > 0.0,
        Parameter,
        "bandwidth must be positive, got {bandwidth}"
    );
    ensure!(
        horizon.is_finite() && horizon > 0.0,
        Parameter,
        "horizon must be positive, got {horizon}"
    );
    let coupling = w2_exact(mu0, muf)?.coupling;
    let d = mu0.dim();
    let n = mu0.len();
    let mut velocities = Vec::with_capacity(n * d);
    for (i, &j) in coupling.assignment.iter().enumerate() {
        let (x, y) = (mu0.point(i), muf.point(j));
        velocities.extend(x.iter().zip(y).map(|(a, b)| (b - a) / horizon));
    }

    let vel_rows: Vec<&[f64]> = velocities.chunks_exact(d).collect();
    let bound_c = vel_rows.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max);
    let spread = diameter(&vel_rows);
    let xs: Vec<&[f64]> = mu0.iter().collect();
    let ys: Vec<&[f64]> = muf.iter().collect();
    let position_diam = diameter(&xs).max(diameter(&ys));
    let lipschitz_k = spread * position_diam / (bandwidth * bandwidth);

    let reach = mu0
        .iter()
        .chain(muf.iter())
        .map(linalg::norm)
        .fold(0.0, f64::max);
    let region = Region::centered_ball(d, reach + bandwidth)?;

    let field = DisplacementField {
        dim: d,
        horizon,
        inv_two_h2: 0.5 / (bandwidth * bandwidth),
        starts: mu0.as_flat().to_vec(),
        velocities,
    };
    VectorFieldSpec::new(
        Arc::new(field),
        bound_c,
        lipschitz_k,
        region,
        FieldDescriptor::Displacement {
            bandwidth,
            particles: n,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::flow::{integrate_flow, IntegratorConfig};
    use crate::measures::{sample_measure, MeasureSpec};

    fn blob(n: usize, seed: u64) -> ParticleEnsemble {
        sample_measure(
            &MeasureSpec::GaussianTruncated {
                mean: vec![0.0, 0.0],
                variance: vec![0.1, 0.1],
                truncation: Region::centered_ball(2, 1.0).unwrap(),
            },
            n,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn identical_measures_give_zero_field() {
        let mu = blob(40, 1);
        let spec = displacement_target_field(&mu, &mu, 0.5, 1.0).unwrap();
        assert_eq!(spec.bound_c(), 0.0);
        let mut out = [1.0; 2];
        spec.eval_into(0.3, &[0.2, -5.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn translation_gives_constant_field() {
        let mu = blob(60, 2);
        let target = mu.translate(&[2.0, 0.0]).unwrap();
        let spec = displacement_target_field(&mu, &target, 0.5, 1.0).unwrap();
        assert!((spec.bound_c() - 2.0).abs() < 1e-12);
        assert!(spec.lipschitz_k() < 1e-9);
        let mut out = [0.0; 2];
        for z in [[0.0, 0.0], [1.0, 0.5], [-3.0, 10.0]] {
            spec.eval_into(0.5, &z, &mut out);
            assert!((out[0] - 2.0).abs() < 1e-12 && out[1].abs() < 1e-12, "{out:?}");
        }
        let traj = integrate_flow(&spec, &mu, &IntegratorConfig::uniform(1.0, 2)).unwrap();
        let w = w2_exact(traj.last(), &target).unwrap().distance;
        assert!(w < 1e-9, "{w}");
    }

    #[test]
    fn nonrigid_transport_reaches_target() {
        let mu = blob(80, 3);
        let target = sample_measure(
            &MeasureSpec::UniformBall {
                center: vec![1.0, 1.0],
                radius: 0.5,
            },
            80,
            4,
        )
        .unwrap();
        let spec = displacement_target_field(&mu, &target, 0.1, 1.0).unwrap();
        let traj = integrate_flow(&spec, &mu, &IntegratorConfig::uniform(1.0, 2)).unwrap();
        let before = w2_exact(&mu, &target).unwrap().distance;
        let after = w2_exact(traj.last(), &target).unwrap().distance;
        assert!(after < 0.25 * before, "{after} vs {before}");
    }

    #[test]
    fn bad_inputs() {
        let mu = blob(10, 1);
        assert!(matches!(displacement_target_field(&mu, &mu, 0.0, 1.0), Err(Error::Parameter(_))));
        let other = blob(11, 1);
        assert!(matches!(displacement_target_field(&mu, &other, 0.5, 1.0), Err(Error::Domain(_))));
    }
}
