//! Exact 2-Wasserstein distance between equal-size empirical measures.
//!
//! For two uniform measures on `n` atoms each, an optimal plan can be taken
//! to be a permutation, so W2 reduces to a linear assignment problem on the
//! squared-distance cost matrix.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::exec::{self, Execution};
use crate::flow::MeasureTrajectory;
use crate::linalg;
use crate::measures::ParticleEnsemble;

/// Largest `n` accepted by [`w2_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// Source particle `i` is matched to target particle `assignment[i]`.
    pub assignment: Vec<usize>,
    /// (1/n) Σ |x_i − y_{assignment[i]}|².
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2Result {
    pub distance: f64,
    pub coupling: Coupling,
}

#[derive(Serialize)]
struct W2Json<'a> {
    distance: f64,
    n: usize,
    cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    assignment: Option<&'a [usize]>,
}

impl W2Result {
    fn from_assignment(mu: &ParticleEnsemble, nu: &ParticleEnsemble, assignment: Vec<usize>) -> Self {
        let cost = coupling_cost(mu, nu, &assignment);
        Self {
            distance: cost.sqrt(),
            coupling: Coupling { assignment, cost },
        }
    }

    pub fn to_json(&self, with_coupling: bool) -> Result<String> {
        Ok(serde_json::to_string_pretty(&W2Json {
            distance: self.distance,
            n: self.coupling.assignment.len(),
            cost: self.coupling.cost,
            assignment: with_coupling.then_some(&self.coupling.assignment[..]),
        })?)
    }
}

/// Normalized squared transport cost of a permutation, summed in index order.
pub fn coupling_cost(mu: &ParticleEnsemble, nu: &ParticleEnsemble, assignment: &[usize]) -> f64 {
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| linalg::dist_sq(mu.point(i), nu.point(j)))
        .sum();
    total / assignment.len() as f64
}

fn check_pair(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<()> {
    ensure!(
        mu.dim() == nu.dim(),
        Domain,
        "dimension mismatch: {} vs {}",
        mu.dim(),
        nu.dim()
    );
    ensure!(
        mu.len() == nu.len(),
        Domain,
        "particle count mismatch: {} vs {}",
        mu.len(),
        nu.len()
    );
    Ok(())
}

fn cost_matrix(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Vec<f64> {
    let n = mu.len();
    let mut c = Vec::with_capacity(n * n);
    for x in mu.iter() {
        for y in nu.iter() {
            c.push(linalg::dist_sq(x, y));
        }
    }
    c
}

/// Minimum-cost perfect matching on a dense `n × n` row-major cost matrix.
///
/// Shortest augmenting path with potentials (Jonker–Volgenant style
/// Hungarian method), O(n³).
pub fn solve_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0, following the classical formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

/// Exact W2 between two equal-size uniform empirical measures.
pub fn w2_exact(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<W2Result> {
    check_pair(mu, nu)?;
    let n = mu.len();
    let assignment = solve_assignment(n, &cost_matrix(mu, nu));
    Ok(W2Result::from_assignment(mu, nu, assignment))
}

/// Exhaustive minimization over all n! permutations (n ≤ 8). Test oracle.
pub fn w2_bruteforce(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<W2Result> {
    check_pair(mu, nu)?;
    let n = mu.len();
    ensure!(
        n <= BRUTEFORCE_MAX_N,
        Size,
        "brute-force W2 enumerates n! permutations; n = {n} exceeds {BRUTEFORCE_MAX_N}"
    );
    let cost = cost_matrix(mu, nu);
    let total = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum() };

    // Heap's algorithm, iterative.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let cur = total(&perm);
            if cur < best_cost {
                best_cost = cur;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(W2Result::from_assignment(mu, nu, best))
}

/// Per-time W2 between two trajectories on the same grid.
pub fn w2_series(a: &MeasureTrajectory, b: &MeasureTrajectory, exec: Execution) -> Result<Vec<f64>> {
    ensure!(
        a.times().len() == b.times().len() && a.times().iter().zip(b.times()).all(|(s, t)| s == t),
        Domain,
        "trajectories must share an identical time grid"
    );
    ensure!(
        a.n_particles() == b.n_particles() && a.dim() == b.dim(),
        Domain,
        "trajectories must share particle count and dimension"
    );
    let snaps_a = a.snapshots();
    let snaps_b = b.snapshots();
    exec::map_indexed(exec, snaps_a.len(), |k| {
        w2_exact(&snaps_a[k], &snaps_b[k]).map(|r| r.distance)
    })
    .into_iter()
    .collect()
}

/// sup over the shared grid of W2(a_t, b_t).
pub fn sup_w2(a: &MeasureTrajectory, b: &MeasureTrajectory) -> Result<f64> {
    sup_w2_with(a, b, Execution::default())
}

pub fn sup_w2_with(a: &MeasureTrajectory, b: &MeasureTrajectory, exec: Execution) -> Result<f64> {
    Ok(w2_series(a, b, exec)?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn ens(points: &[Vec<f64>]) -> ParticleEnsemble {
        ParticleEnsemble::from_points(points).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let a = ens(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![-1.0, 0.5]]);
        let r = w2_exact(&a, &a).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.coupling.assignment, vec![0, 1, 2]);
    }

    #[test]
    fn single_pair_distance() {
        let r = w2_exact(&ens(&[vec![0.0, 0.0]]), &ens(&[vec![3.0, 4.0]])).unwrap();
        assert_eq!(r.distance, 5.0);
    }

    #[test]
    fn one_dimensional_monotone_matching() {
        let mu = ens(&[vec![0.0], vec![1.0]]);
        let nu = ens(&[vec![0.5], vec![2.0]]);
        // both permutations by hand: identity (0.25+1)/2, swap (4+0)/2
        let expected = ((0.25f64 + 1.0) / 2.0).sqrt();
        let r = w2_exact(&mu, &nu).unwrap();
        assert!((r.distance - expected).abs() < 1e-15);
        assert_eq!(r.coupling.assignment, vec![0, 1]);
        assert!((r.distance - 0.7906).abs() < 1e-4);
    }

    #[test]
    fn bruteforce_examples() {
        let p = ens(&[vec![1.5, -2.0]]);
        assert_eq!(w2_bruteforce(&p, &p).unwrap().distance, 0.0);
        let r = w2_bruteforce(&ens(&[vec![0.0], vec![1.0]]), &ens(&[vec![1.0], vec![0.0]])).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.coupling.assignment, vec![1, 0]);
    }

    #[test]
    fn bruteforce_rejects_large_n() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let e = ens(&pts);
        assert!(matches!(w2_bruteforce(&e, &e), Err(Error::Size(_))));
    }

    #[test]
    fn mismatches_are_domain_errors() {
        let a = ens(&[vec![0.0, 0.0]]);
        let b = ens(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let c = ens(&[vec![0.0]]);
        assert!(matches!(w2_exact(&a, &b), Err(Error::Domain(_))));
        assert!(matches!(w2_exact(&a, &c), Err(Error::Domain(_))));
        assert!(matches!(w2_bruteforce(&a, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn assignment_solver_small_integer_case() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = solve_assignment(3, &cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn json_shape() {
        let r = w2_exact(&ens(&[vec![0.0, 0.0]]), &ens(&[vec![3.0, 4.0]])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json(false).unwrap()).unwrap();
        assert_eq!(v["distance"], 5.0);
        assert_eq!(v["n"], 1);
        assert_eq!(v["cost"], 25.0);
        assert!(v.get("assignment").is_none());
        let v: serde_json::Value = serde_json::from_str(&r.to_json(true).unwrap()).unwrap();
        assert_eq!(v["assignment"], serde_json::json!([0]));
    }
}
