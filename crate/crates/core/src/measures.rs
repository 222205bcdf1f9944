//! Equal-weight particle ensembles and the samplers that produce them.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg;

/// Identifier of the pseudo-random generator used by every sampler.
pub const GENERATOR_ID: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

/// Rejection sampling gives up after this many draws per requested point.
const MAX_REJECTION_RATIO: usize = 10_000;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Closed ball or axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, halfwidths: Vec<f64> },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let r = Region::Ball { center, radius };
        r.validate()?;
        Ok(r)
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn cube(center: Vec<f64>, halfwidths: Vec<f64>) -> Result<Self> {
        let r = Region::Box { center, halfwidths };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Ball { center, radius } => {
                ensure!(!center.is_empty(), Parameter, "region center must be non-empty");
                ensure!(
                    radius.is_finite() && *radius > 0.0,
                    Parameter,
                    "ball radius must be positive and finite, got {radius}"
                );
                ensure!(center.iter().all(|c| c.is_finite()), Parameter, "ball center must be finite");
            }
            Region::Box { center, halfwidths } => {
                ensure!(!center.is_empty(), Parameter, "region center must be non-empty");
                ensure!(
                    center.len() == halfwidths.len(),
                    Parameter,
                    "box center has {} coordinates but {} halfwidths",
                    center.len(),
                    halfwidths.len()
                );
                ensure!(
                    halfwidths.iter().all(|h| h.is_finite() && *h > 0.0),
                    Parameter,
                    "box halfwidths must be positive and finite"
                );
                ensure!(center.iter().all(|c| c.is_finite()), Parameter, "box center must be finite");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Region::Ball { center, .. } | Region::Box { center, .. } => center,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => linalg::dist_sq(x, center) <= radius * radius,
            Region::Box { center, halfwidths } => x
                .iter()
                .zip(center)
                .zip(halfwidths)
                .all(|((xi, ci), hi)| (xi - ci).abs() <= *hi),
        }
    }

    /// Radius of the smallest origin-centered ball containing the region.
    pub fn max_norm(&self) -> f64 {
        match self {
            Region::Ball { center, radius } => linalg::norm(center) + radius,
            Region::Box { center, halfwidths } => center
                .iter()
                .zip(halfwidths)
                .map(|(c, h)| {
                    let m = c.abs() + h;
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Largest distance from the center to the boundary.
    pub fn circumradius(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Box { halfwidths, .. } => linalg::norm(halfwidths),
        }
    }

    /// Per-axis (lower, upper) bounds of the bounding box.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Region::Ball { center, radius } => center.iter().map(|c| (c - radius, c + radius)).collect(),
            Region::Box { center, halfwidths } => center
                .iter()
                .zip(halfwidths)
                .map(|(c, h)| (c - h, c + h))
                .collect(),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::Ball { center, radius } => {
                let d = center.len();
                let mut dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let mut len = linalg::norm(&dir);
                while len == 0.0 {
                    dir = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    len = linalg::norm(&dir);
                }
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / d as f64);
                center.iter().zip(&dir).map(|(c, v)| c + r * v / len).collect()
            }
            Region::Box { center, halfwidths } => center
                .iter()
                .zip(halfwidths)
                .map(|(c, h)| c + h * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        }
    }

    /// Tensor grid over the bounding box, filtered to the region.
    ///
    /// With `cell_centered` the nodes sit at cell midpoints instead of on the
    /// box faces, which gives a grid disjoint from the vertex grid of any
    /// resolution with the same parity.
    pub fn grid(&self, per_axis: usize, cell_centered: bool) -> Vec<Vec<f64>> {
        let bounds = self.bounding_box();
        let per_axis = per_axis.max(2);
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                (0..per_axis)
                    .map(|k| {
                        let s = if cell_centered {
                            (k as f64 + 0.5) / per_axis as f64
                        } else {
                            k as f64 / (per_axis - 1) as f64
                        };
                        lo + s * (hi - lo)
                    })
                    .collect()
            })
            .collect();
        let d = axes.len();
        let total = per_axis.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let p: Vec<f64> = idx.iter().enumerate().map(|(a, &k)| axes[a][k]).collect();
            if self.contains(&p) {
                out.push(p);
            }
            for a in 0..d {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix.
    pub variance: Vec<f64>,
}

fn default_scale() -> f64 {
    1.0
}

/// Declarative description of an initial or target measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    UniformBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// Diagonal Gaussian conditioned on the truncation region.
    GaussianTruncated {
        mean: Vec<f64>,
        variance: Vec<f64>,
        truncation: Region,
    },
    GaussianMixtureTruncated {
        components: Vec<MixtureComponent>,
        truncation: Region,
    },
    /// Two interleaved half circles with Gaussian jitter, centered at `offset`.
    TwoMoons {
        noise: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        offset: Option<Vec<f64>>,
        truncation: Region,
    },
    ExplicitPoints {
        points: Vec<Vec<f64>>,
    },
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformBall { center, .. } => center.len(),
            MeasureSpec::GaussianTruncated { mean, .. } => mean.len(),
            MeasureSpec::GaussianMixtureTruncated { components, truncation } => components
                .first()
                .map(|c| c.mean.len())
                .unwrap_or_else(|| truncation.dim()),
            MeasureSpec::TwoMoons { .. } => 2,
            MeasureSpec::ExplicitPoints { points } => points.first().map_or(0, Vec::len),
        }
    }

    /// Region guaranteed to contain every sample, if the family is bounded.
    pub fn support_region(&self) -> Option<Region> {
        match self {
            MeasureSpec::UniformBall { center, radius } => Some(Region::Ball {
                center: center.clone(),
                radius: *radius,
            }),
            MeasureSpec::GaussianTruncated { truncation, .. }
            | MeasureSpec::GaussianMixtureTruncated { truncation, .. }
            | MeasureSpec::TwoMoons { truncation, .. } => Some(truncation.clone()),
            MeasureSpec::ExplicitPoints { .. } => None,
        }
    }

    /// Whether the family has a Lebesgue density.
    pub fn is_absolutely_continuous(&self) -> bool {
        match self {
            MeasureSpec::ExplicitPoints { .. } => false,
            MeasureSpec::TwoMoons { noise, .. } => *noise > 0.0,
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        ensure!(dim >= 1, Parameter, "measure dimension must be at least 1");
        match self {
            MeasureSpec::UniformBall { center, radius } => {
                Region::Ball {
                    center: center.clone(),
                    radius: *radius,
                }
                .validate()?;
            }
            MeasureSpec::GaussianTruncated {
                mean,
                variance,
                truncation,
            } => {
                truncation.validate()?;
                ensure!(
                    variance.len() == dim && truncation.dim() == dim,
                    Parameter,
                    "gaussian mean, variance and truncation must share dimension {dim}"
                );
                ensure!(
                    variance.iter().all(|v| v.is_finite() && *v > 0.0),
                    Parameter,
                    "gaussian variances must be positive"
                );
                ensure!(mean.iter().all(|m| m.is_finite()), Parameter, "gaussian mean must be finite");
            }
            MeasureSpec::GaussianMixtureTruncated { components, truncation } => {
                truncation.validate()?;
                ensure!(!components.is_empty(), Parameter, "mixture needs at least one component");
                ensure!(truncation.dim() == dim, Parameter, "truncation dimension mismatch");
                for (k, c) in components.iter().enumerate() {
                    ensure!(
                        c.mean.len() == dim && c.variance.len() == dim,
                        Parameter,
                        "mixture component {k} has wrong dimension"
                    );
                    ensure!(
                        c.weight.is_finite() && c.weight > 0.0,
                        Parameter,
                        "mixture component {k} weight must be positive"
                    );
                    ensure!(
                        c.variance.iter().all(|v| v.is_finite() && *v > 0.0),
                        Parameter,
                        "mixture component {k} variances must be positive"
                    );
                }
            }
            MeasureSpec::TwoMoons {
                noise,
                scale,
                offset,
                truncation,
            } => {
                truncation.validate()?;
                ensure!(truncation.dim() == 2, Parameter, "two-moons lives in d = 2");
                ensure!(noise.is_finite() && *noise >= 0.0, Parameter, "two-moons noise must be nonnegative");
                ensure!(scale.is_finite() && *scale > 0.0, Parameter, "two-moons scale must be positive");
                if let Some(o) = offset {
                    ensure!(o.len() == 2, Parameter, "two-moons offset must have 2 coordinates");
                }
            }
            MeasureSpec::ExplicitPoints { points } => {
                ensure!(!points.is_empty(), Parameter, "explicit-points needs at least one point");
                ensure!(
                    points.iter().all(|p| p.len() == dim),
                    Parameter,
                    "explicit points must share dimension {dim}"
                );
                ensure!(
                    points.iter().flatten().all(|v| v.is_finite()),
                    Parameter,
                    "explicit points must be finite"
                );
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: MeasureSpec,
    pub seed: u64,
    #[serde(default)]
    pub generator: String,
}

/// Equal-weight empirical measure: `n` points in R^d, each of mass 1/n.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    dim: usize,
    coords: Vec<f64>,
    provenance: Option<Provenance>,
}

impl PartialEq for ParticleEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords
    }
}

impl ParticleEnsemble {
    /// Builds from row-major coordinates (`n * dim` values).
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        ensure!(dim >= 1, Domain, "ensemble dimension must be at least 1");
        ensure!(
            !coords.is_empty() && coords.len() % dim == 0,
            Domain,
            "ensemble needs n >= 1 points of dimension {dim}, got {} coordinates",
            coords.len()
        );
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "particle {} has a non-finite coordinate",
                pos / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            provenance: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        ensure!(
            points.iter().all(|p| p.len() == dim),
            Domain,
            "all points must have dimension {dim}"
        );
        Self::from_flat(dim, points.iter().flatten().copied().collect())
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        ensure!(shift.len() == self.dim, Domain, "shift has dimension {} not {}", shift.len(), self.dim);
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        Self::from_flat(self.dim, coords)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::from_flat(self.dim, self.coords.iter().map(|v| v * factor).collect())
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.dim).map(|k| format!("x{k}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let dim = header.len();
        for (k, h) in header.iter().enumerate() {
            ensure!(h == format!("x{k}"), Domain, "unexpected csv header column {h:?}");
        }
        let mut coords = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse coordinate {field:?}")))?;
                coords.push(v);
            }
        }
        Self::from_flat(dim, coords)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EnsembleJson {
            dim: self.dim,
            n: self.len(),
            points: self.to_points(),
            provenance: self.provenance.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: EnsembleJson = serde_json::from_str(s)?;
        let ens = Self::from_points(&e.points)?;
        ensure!(
            ens.dim == e.dim && ens.len() == e.n,
            Domain,
            "ensemble json header (dim {}, n {}) disagrees with its points",
            e.dim,
            e.n
        );
        Ok(match e.provenance {
            Some(p) => ens.with_provenance(p),
            None => ens,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleJson {
    dim: usize,
    n: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

fn rejection<R: Rng>(
    rng: &mut R,
    n: usize,
    region: &Region,
    mut draw: impl FnMut(&mut R) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n * region.dim());
    let mut accepted = 0;
    let budget = n.saturating_mul(MAX_REJECTION_RATIO);
    for _ in 0..budget {
        let p = draw(rng);
        if region.contains(&p) {
            out.extend_from_slice(&p);
            accepted += 1;
            if accepted == n {
                return Ok(out);
            }
        }
    }
    Err(Error::Parameter(format!(
        "truncation region accepts too few samples ({accepted} of {n} after {budget} draws)"
    )))
}

fn gaussian<R: Rng>(rng: &mut R, mean: &[f64], variance: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(variance)
        .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Draws `n` points from `spec`; deterministic in `(spec, n, seed)`.
pub fn sample_measure(spec: &MeasureSpec, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    ensure!(n >= 1, Domain, "cannot sample an empty ensemble (n = 0)");
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let dim = spec.dim();
    let coords = match spec {
        MeasureSpec::UniformBall { center, radius } => {
            let region = Region::Ball {
                center: center.clone(),
                radius: *radius,
            };
            (0..n).flat_map(|_| region.sample_uniform(&mut rng)).collect()
        }
        MeasureSpec::GaussianTruncated {
            mean,
            variance,
            truncation,
        } => rejection(&mut rng, n, truncation, |r| gaussian(r, mean, variance))?,
        MeasureSpec::GaussianMixtureTruncated { components, truncation } => {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            rejection(&mut rng, n, truncation, |r| {
                let mut u = r.random::<f64>() * total;
                let mut pick = &components[components.len() - 1];
                for c in components {
                    if u < c.weight {
                        pick = c;
                        break;
                    }
                    u -= c.weight;
                }
                gaussian(r, &pick.mean, &pick.variance)
            })?
        }
        MeasureSpec::TwoMoons {
            noise,
            scale,
            offset,
            truncation,
        } => {
            let (ox, oy) = offset.as_ref().map_or((0.0, 0.0), |o| (o[0], o[1]));
            rejection(&mut rng, n, truncation, |r| {
                let angle = std::f64::consts::PI * r.random::<f64>();
                let upper = r.random::<bool>();
                // centered so the pair of moons has its bounding-box center at 0
                let (x, y) = if upper {
                    (angle.cos() - 0.5, angle.sin() - 0.25)
                } else {
                    (0.5 - angle.cos(), 0.25 - angle.sin())
                };
                let nx: f64 = r.sample(StandardNormal);
                let ny: f64 = r.sample(StandardNormal);
                vec![ox + scale * (x + noise * nx), oy + scale * (y + noise * ny)]
            })?
        }
        MeasureSpec::ExplicitPoints { points } => {
            ensure!(
                points.len() == n,
                Parameter,
                "explicit-points lists {} points but n = {n}",
                points.len()
            );
            points.iter().flatten().copied().collect()
        }
    };
    Ok(ParticleEnsemble::from_flat(dim, coords)?.with_provenance(Provenance {
        spec: spec.clone(),
        seed,
        generator: GENERATOR_ID.to_string(),
    }))
}

/// Largest distance from `center` to a particle.
pub fn support_radius(ens: &ParticleEnsemble, center: &[f64]) -> Result<f64> {
    ensure!(
        center.len() == ens.dim(),
        Domain,
        "center has dimension {} but ensemble has {}",
        center.len(),
        ens.dim()
    );
    Ok(ens
        .iter()
        .map(|p| linalg::dist(p, center))
        .fold(0.0, f64::max))
}

/// (1/n) Σ |x_i|².
pub fn second_moment(ens: &ParticleEnsemble) -> f64 {
    ens.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / ens.len() as f64
}
