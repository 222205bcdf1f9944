//! Random-feature least squares for superpositions Σ A_i Σ(W_i x + θ_i).
//!
//! Hidden weights (W_i, θ_i) are drawn at random and scaled to the region;
//! the output matrices A_i then solve a ridge-regularized least squares
//! problem on a training grid. An optional Adam pass refines every
//! parameter. Accuracy is reported as the sup-norm error on a held-out
//! validation grid.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Activation, NeuralField, NeuralTerm, StaticField};
use crate::linalg::{self, SquareMatrix};
use crate::measures::{rng_from_seed, Region};

/// Total training points targeted when no per-axis resolution is given.
const DEFAULT_GRID_POINTS: f64 = 1024.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub activation: Activation,
    /// Tikhonov weight relative to the largest squared singular value.
    pub ridge: f64,
    /// Hidden-weight scale: W entries ~ N(0, (scale / radius)²).
    pub weight_scale: f64,
    /// Training grid resolution per axis (vertex grid over the bounding box).
    pub train_per_axis: Option<usize>,
    /// Validation grid resolution per axis (cell-centered, held out).
    pub validation_per_axis: Option<usize>,
    /// Adam iterations over all parameters after the least-squares solve.
    pub refine_iters: usize,
    pub learning_rate: f64,
    /// Hidden weights used verbatim for the first terms instead of random draws.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seed_terms: Vec<NeuralTerm>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            activation: Activation::Logistic,
            ridge: 1e-8,
            weight_scale: 4.0,
            train_per_axis: None,
            validation_per_axis: None,
            refine_iters: 0,
            learning_rate: 1e-2,
            seed_terms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// max |f − g| over the validation grid.
    pub sup_error: f64,
    pub train_sup_error: f64,
    pub rms_error: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub train_points: usize,
    pub validation_points: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub field: NeuralField,
    pub report: FitReport,
}

fn default_per_axis(dim: usize) -> usize {
    (DEFAULT_GRID_POINTS.powf(1.0 / dim as f64).round() as usize).max(3)
}

fn sample_values(target: &dyn StaticField, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let mut v = vec![0.0; target.dim()];
            target.eval_into(p, &mut v);
            v
        })
        .collect()
}

fn sup_and_rms(field: &NeuralField, points: &[Vec<f64>], values: &[Vec<f64>]) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut ss = 0.0;
    for (p, v) in points.iter().zip(values) {
        let e = linalg::dist(&field.eval(p), v);
        sup = sup.max(e);
        ss += e * e;
    }
    (sup, (ss / points.len().max(1) as f64).sqrt())
}

fn draw_hidden<R: Rng>(rng: &mut R, region: &Region, dim: usize, scale: f64) -> (SquareMatrix, Vec<f64>) {
    let std = scale / region.circumradius();
    let w: Vec<f64> = (0..dim * dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    let w = SquareMatrix::from_row_major(dim, w).expect("square by construction");
    // place every hidden unit's transition at a random point of the region
    let mut theta = vec![0.0; dim];
    for (j, th) in theta.iter_mut().enumerate() {
        let anchor = region.sample_uniform(rng);
        let row = &w.as_slice()[j * dim..(j + 1) * dim];
        *th = -row.iter().zip(&anchor).map(|(a, b)| a * b).sum::<f64>();
    }
    (w, theta)
}

/// Ridge solution of `features * coef ≈ targets` through the SVD.
fn ridge_solve(features: DMatrix<f64>, targets: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let svd = features.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let lambda = ridge * smax * smax;
    let ut_y = u.transpose() * targets;
    let mut scaled = ut_y;
    for (k, s) in svd.singular_values.iter().enumerate() {
        let f = if *s > 0.0 { s / (s * s + lambda) } else { 0.0 };
        scaled.row_mut(k).scale_mut(f);
    }
    v_t.transpose() * scaled
}

/// Fits an `m`-term superposition to `target` on `region`.
///
/// Misses of the tolerance are reported through `report.within_tolerance`;
/// only a degenerate region or zero width is an error.
pub fn fit_superposition(
    target: &dyn StaticField,
    region: &Region,
    m: usize,
    tol: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitResult> {
    region
        .validate()
        .map_err(|e| Error::Domain(format!("degenerate fitting region: {e}")))?;
    let dim = target.dim();
    if region.dim() != dim {
        return Err(Error::Domain(format!(
            "region dimension {} differs from target dimension {dim}",
            region.dim()
        )));
    }
    if m == 0 {
        return Err(Error::Parameter("superposition width m must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("fit tolerance must be positive, got {tol}")));
    }
    if opts.seed_terms.len() > m {
        return Err(Error::Parameter(format!(
            "{} seed terms exceed width {m}",
            opts.seed_terms.len()
        )));
    }

    let train_axis = opts.train_per_axis.unwrap_or_else(|| default_per_axis(dim));
    let val_axis = opts.validation_per_axis.unwrap_or(train_axis.saturating_sub(1).max(2));
    let train = region.grid(train_axis, false);
    let validation = region.grid(val_axis, true);
    if train.len() < 2 || validation.is_empty() {
        return Err(Error::Domain("fitting region contains no grid points".into()));
    }
    let train_y = sample_values(target, &train);
    let val_y = sample_values(target, &validation);

    let mut rng = rng_from_seed(seed);
    let mut hidden: Vec<(SquareMatrix, Vec<f64>)> = Vec::with_capacity(m);
    for t in &opts.seed_terms {
        if t.dim() != dim {
            return Err(Error::Domain("seed term dimension mismatch".into()));
        }
        hidden.push((t.w.clone(), t.theta.clone()));
    }
    while hidden.len() < m {
        hidden.push(draw_hidden(&mut rng, region, dim, opts.weight_scale));
    }

    let act = opts.activation;
    let p = m * dim;
    let mut phi = DMatrix::<f64>::zeros(train.len(), p);
    let mut z = vec![0.0; dim];
    for (r, x) in train.iter().enumerate() {
        for (i, (w, theta)) in hidden.iter().enumerate() {
            w.mul_vec_into(x, &mut z);
            for j in 0..dim {
                phi[(r, i * dim + j)] = act.apply(z[j] + theta[j]);
            }
        }
    }
    let y = DMatrix::from_fn(train.len(), dim, |r, k| train_y[r][k]);
    let all_zero = train_y.iter().flatten().all(|&v| v == 0.0);
    let coef = if all_zero {
        DMatrix::zeros(p, dim)
    } else {
        ridge_solve(phi, &y, opts.ridge)
    };

    let terms: Vec<NeuralTerm> = hidden
        .into_iter()
        .enumerate()
        .map(|(i, (w, theta))| {
            let mut a = SquareMatrix::zeros(dim);
            for k in 0..dim {
                for j in 0..dim {
                    a.set(k, j, coef[(i * dim + j, k)]);
                }
            }
            NeuralTerm { a, w, theta }
        })
        .collect();
    let mut field = NeuralField::new(dim, act, terms)?;

    if opts.refine_iters > 0 && !all_zero {
        let refined = refine(&field, &train, &train_y, opts.refine_iters, opts.learning_rate)?;
        let before = sup_and_rms(&field, &validation, &val_y).0;
        let after = sup_and_rms(&refined, &validation, &val_y).0;
        if after < before {
            field = refined;
        }
    }

    let (train_sup, _) = sup_and_rms(&field, &train, &train_y);
    let (sup_error, rms_error) = sup_and_rms(&field, &validation, &val_y);
    Ok(FitResult {
        report: FitReport {
            sup_error,
            train_sup_error: train_sup,
            rms_error,
            tolerance: tol,
            within_tolerance: sup_error <= tol,
            train_points: train.len(),
            validation_points: validation.len(),
        },
        field,
    })
}

/// Full-batch Adam on the mean squared error over every (A, W, θ).
fn refine(
    field: &NeuralField,
    points: &[Vec<f64>],
    targets: &[Vec<f64>],
    iters: usize,
    lr: f64,
) -> Result<NeuralField> {
    let act = field.activation();
    let d = field.dim();
    let m = field.width();
    let block = 2 * d * d + d;
    let mut params: Vec<f64> = Vec::with_capacity(m * block);
    for t in field.terms() {
        params.extend_from_slice(t.a.as_slice());
        params.extend_from_slice(t.w.as_slice());
        params.extend_from_slice(&t.theta);
    }
    let (b1, b2, eps) = (0.9, 0.999, 1e-12);
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; m * d];
    let mut h = vec![0.0; m * d];
    let mut y = vec![0.0; d];
    let scale = 1.0 / points.len() as f64;

    for it in 1..=iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, target) in points.iter().zip(targets) {
            y.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let base = i * block;
                let w = &params[base + d * d..base + 2 * d * d];
                let th = &params[base + 2 * d * d..base + block];
                for j in 0..d {
                    let zj: f64 = w[j * d..(j + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + th[j];
                    z[i * d + j] = zj;
                    h[i * d + j] = act.apply(zj);
                }
                let a = &params[base..base + d * d];
                for k in 0..d {
                    y[k] += a[k * d..(k + 1) * d].iter().zip(&h[i * d..(i + 1) * d]).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            // residual scaled for d/dparams of mean |y - target|²
            let r: Vec<f64> = y.iter().zip(target).map(|(a, b)| 2.0 * scale * (a - b)).collect();
            for i in 0..m {
                let base = i * block;
                for k in 0..d {
                    for j in 0..d {
                        grad[base + k * d + j] += r[k] * h[i * d + j];
                    }
                }
                for j in 0..d {
                    let back: f64 = (0..d).map(|k| params[base + k * d + j] * r[k]).sum();
                    let dz = back * act.derivative(z[i * d + j]);
                    for l in 0..d {
                        grad[base + d * d + j * d + l] += dz * x[l];
                    }
                    grad[base + 2 * d * d + j] += dz;
                }
            }
        }
        let c1 = 1.0 - f64::powi(b1, it as i32);
        let c2 = 1.0 - f64::powi(b2, it as i32);
        for k in 0..params.len() {
            m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
            m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
            params[k] -= lr * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
        }
    }

    let terms = params
        .chunks_exact(block)
        .map(|c| {
            NeuralTerm::new(
                SquareMatrix::from_row_major(d, c[..d * d].to_vec())?,
                SquareMatrix::from_row_major(d, c[d * d..2 * d * d].to_vec())?,
                c[2 * d * d..].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    NeuralField::new(d, act, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BenchmarkField, FnField};

    fn disk(r: f64) -> Region {
        Region::centered_ball(2, r).unwrap()
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let zero = FnField::new(2, |_: &[f64], o: &mut [f64]| o.iter_mut().for_each(|v| *v = 0.0));
        let fit = fit_superposition(&zero, &disk(1.0), 5, 1e-3, 1, &FitOptions::default()).unwrap();
        assert_eq!(fit.report.sup_error, 0.0);
        assert!(fit.field.terms().iter().all(|t| t.a.is_zero()));
    }

    #[test]
    fn self_representation_with_seeded_term() {
        let g_term = NeuralTerm::new(
            SquareMatrix::from_row_major(2, vec![1.5, -0.5, 0.25, 2.0]).unwrap(),
            SquareMatrix::from_row_major(2, vec![0.7, -1.2, 0.3, 0.9]).unwrap(),
            vec![0.1, -0.4],
        )
        .unwrap();
        for act in [Activation::Logistic, Activation::Tanh] {
            let g = NeuralField::single(act, g_term.clone()).unwrap();
            for m in [1, 6] {
                let opts = FitOptions {
                    activation: act,
                    ridge: 1e-14,
                    seed_terms: vec![g_term.clone()],
                    ..FitOptions::default()
                };
                let fit = fit_superposition(&g, &disk(2.0), m, 1e-6, 3, &opts).unwrap();
                assert!(fit.report.sup_error <= 1e-6, "{act:?} m={m}: {}", fit.report.sup_error);
                assert!(fit.report.within_tolerance);
            }
        }
    }

    #[test]
    fn rotation_on_disk_of_radius_two() {
        let rot = BenchmarkField::Rotation {
            omega: 1.0,
            dim: 2,
            radius: 2.0,
        };
        let opts = FitOptions {
            train_per_axis: Some(32),
            ..FitOptions::default()
        };
        let fit = fit_superposition(&rot, &disk(2.0), 64, 0.05, 11, &opts).unwrap();
        assert!(fit.report.sup_error < 0.05, "{:?}", fit.report);
        assert_eq!(fit.field.width(), 64);
    }

    #[test]
    fn tolerance_miss_is_flagged_not_fatal() {
        let rot = BenchmarkField::Rotation {
            omega: 1.0,
            dim: 2,
            radius: 2.0,
        };
        let fit = fit_superposition(&rot, &disk(2.0), 1, 1e-6, 11, &FitOptions::default()).unwrap();
        assert!(!fit.report.within_tolerance);
        assert!(fit.report.sup_error > 1e-6);
    }

    #[test]
    fn refinement_never_hurts_validation_error() {
        let rot = BenchmarkField::Rotation {
            omega: 1.0,
            dim: 2,
            radius: 1.0,
        };
        let base = FitOptions {
            train_per_axis: Some(12),
            ..FitOptions::default()
        };
        let plain = fit_superposition(&rot, &disk(1.0), 4, 1e-3, 2, &base).unwrap();
        let refined = fit_superposition(
            &rot,
            &disk(1.0),
            4,
            1e-3,
            2,
            &FitOptions {
                refine_iters: 50,
                ..base
            },
        )
        .unwrap();
        assert!(refined.report.sup_error <= plain.report.sup_error);
    }

    #[test]
    fn degenerate_region_is_domain_error() {
        let rot = BenchmarkField::Rotation {
            omega: 1.0,
            dim: 2,
            radius: 1.0,
        };
        let bad = Region::Ball {
            center: vec![0.0, 0.0],
            radius: 0.0,
        };
        assert!(matches!(
            fit_superposition(&rot, &bad, 3, 0.1, 0, &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn deterministic_in_seed() {
        let rot = BenchmarkField::Rotation {
            omega: 1.0,
            dim: 2,
            radius: 1.0,
        };
        let a = fit_superposition(&rot, &disk(1.0), 8, 0.1, 5, &FitOptions::default()).unwrap();
        let b = fit_superposition(&rot, &disk(1.0), 8, 0.1, 5, &FitOptions::default()).unwrap();
        assert_eq!(a.field, b.field);
    }
}
