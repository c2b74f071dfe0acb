//! Shuffled random walks, the loop operator Φ, concatenation Ψ, the epoched
//! centred walk X̃ and the empirical covariance of the scaling limit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::epoched_noise::CovEntry;
use crate::exec::{try_map_replicas, Execution};
use crate::permutons::{perm_of, Copula, EmpiricalPermuton, JPermutation, PermutonMode};
use crate::rng::StreamKey;
use crate::stats;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncrementLaw {
    Gaussian,
    Rademacher,
}

impl IncrementLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementLaw::Gaussian => StandardNormal.sample(rng),
            IncrementLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShuffledWalk {
    pub n: usize,
    pub increments: Vec<f64>,
    pub jperm: JPermutation,
    /// values[j][k] = X^{N,σ^j}_{k/N}, k = 0..=N.
    pub values: Vec<Vec<f64>>,
}

/// Scaled partial sums of `z` visited in the order `order`; the endpoint is
/// the index-order total so all orders share it exactly.
fn scaled_partial_sums(z: &[f64], order: &[usize], total: f64) -> Vec<f64> {
    let n = z.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut s = 0.0;
    for (k, &i) in order.iter().enumerate() {
        s = if k + 1 == n { total } else { s + z[i] };
        out.push(s * scale);
    }
    out
}

pub fn build_shuffled_walk_from(increments: Vec<f64>, jperm: JPermutation) -> Result<ShuffledWalk> {
    if jperm.n != increments.len() {
        return Err(Error::Dimension { expected: jperm.n, got: increments.len() });
    }
    let total: f64 = increments.iter().sum();
    let values = jperm.perms.iter().map(|p| scaled_partial_sums(&increments, p, total)).collect();
    Ok(ShuffledWalk { n: jperm.n, increments, jperm, values })
}

/// Component j sums Z_{σ^j(0)}, Z_{σ^j(1)}, … scaled by 1/√N.
pub fn build_shuffled_walk<R: Rng + ?Sized>(law: IncrementLaw, jperm: JPermutation, rng: &mut R) -> Result<ShuffledWalk> {
    let z = law.draw(jperm.n, rng);
    build_shuffled_walk_from(z, jperm)
}

/// f minus the linear interpolant of its endpoints, on the uniform grid of
/// [0,1]; for f(0) = 0 this is f(t) − t f(1).
pub fn phi_loop(f: &[f64]) -> Vec<f64> {
    let n = f.len() - 1;
    let (f0, f1) = (f[0], f[n] - f[0]);
    let mut out: Vec<f64> = f.iter().enumerate().map(|(k, v)| v - f0 - (k as f64 / n as f64) * f1).collect();
    out[0] = 0.0;
    out[n] = 0.0;
    out
}

/// Concatenate loops on [0, J]; every loop must vanish at both ends.
pub fn psi_concat(loops: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = loops.first() else {
        return Ok(vec![0.0]);
    };
    let n = first.len() - 1;
    let mut out = Vec::with_capacity(loops.len() * n + 1);
    out.push(0.0);
    for (j, l) in loops.iter().enumerate() {
        if l.len() != n + 1 {
            return Err(Error::invalid("loops must share one grid"));
        }
        if l[0] != 0.0 || l[n] != 0.0 {
            return Err(Error::invalid(format!("loop {j} has nonzero endpoints")));
        }
        out.extend_from_slice(&l[1..]);
    }
    Ok(out)
}

/// X̃ on the grid k/N over [0, epochs], using the given per-epoch visit orders.
pub fn build_tilde_walk_from(z: &[f64], perms: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = z.len();
    let total: f64 = z.iter().sum();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(perms.len() * n + 1);
    out.push(0.0);
    for (j, p) in perms.iter().enumerate() {
        if p.len() != n || !crate::sgd::is_permutation(p) {
            return Err(Error::invalid(format!("epoch {j} permutation is not a bijection on 0..{n}")));
        }
        let part = scaled_partial_sums(z, p, total);
        let f1 = total * scale;
        for (r, v) in part.iter().enumerate().skip(1) {
            out.push(if r == n { 0.0 } else { v - (r as f64 / n as f64) * f1 });
        }
    }
    Ok(out)
}

pub fn build_tilde_walk<R: Rng + ?Sized>(law: IncrementLaw, n: usize, perms: &[Vec<usize>], rng: &mut R) -> Result<Vec<f64>> {
    let z = law.draw(n, rng);
    build_tilde_walk_from(&z, perms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PermSource {
    /// Fresh σ_N = Perm(U) per replica; the walk visits in rank order.
    Resample,
    /// A fixed σ; target is the exact finite-N covariance.
    Frozen { perm: JPermutation },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub n: usize,
    pub replicas: usize,
    pub entries: Vec<CovEntry>,
}

impl CovarianceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z_score().abs()).fold(0.0, f64::max)
    }
}

/// Walk values at the grid times for components i and j when the visit
/// order of component c is the rank order of σ^c: X_s = N^{-1/2} Σ_l Z_l 1{σ(l) < ⌊Ns⌋}.
fn rank_walk_at(z: &[f64], sigma: &[usize], caps: &[usize]) -> Vec<f64> {
    let n = z.len();
    let mut by_rank = vec![0.0; n];
    for (l, &r) in sigma.iter().enumerate() {
        by_rank[r] = z[l];
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut prefix = vec![0.0; n + 1];
    for r in 0..n {
        prefix[r + 1] = prefix[r] + by_rank[r];
    }
    caps.iter().map(|&c| prefix[c] * scale).collect()
}

/// Empirical Cov(X^{N,i}_s, X^{N,j}_t) against F^{ij}(s,t) (or the exact
/// finite-N value for a frozen σ).
#[allow(clippy::too_many_arguments)]
pub fn covariance_check(
    law: IncrementLaw,
    copula: &Copula,
    n: usize,
    replicas: usize,
    points: &[f64],
    pair: (usize, usize),
    source: &PermSource,
    key: &StreamKey,
    exec: Execution,
) -> Result<CovarianceReport> {
    if replicas < 2 || n == 0 {
        return Err(Error::invalid("need N >= 1 and at least 2 replicas"));
    }
    copula.validate()?;
    let j_dim = pair.0.max(pair.1) + 1;
    let caps: Vec<usize> = points.iter().map(|&s| (n as f64 * s).floor() as usize).collect();
    let samples = try_map_replicas(exec, replicas, |r| {
        let mut rng = key.child("replica").child(r).rng();
        let sigma = match source {
            PermSource::Resample => {
                let jp = crate::permutons::sample_jpermutation(copula, n, j_dim, &mut rng)?;
                jp.perms
            }
            PermSource::Frozen { perm } => perm.perms.clone(),
        };
        let z = law.draw(n, &mut rng);
        let xi = rank_walk_at(&z, &sigma[pair.0], &caps);
        let xj = if pair.0 == pair.1 { xi.clone() } else { rank_walk_at(&z, &sigma[pair.1], &caps) };
        Ok((xi, xj))
    })?;
    let frozen = match source {
        PermSource::Frozen { perm } => {
            if perm.n != n || perm.j() < j_dim {
                return Err(Error::invalid("frozen permutation does not match N or the pair"));
            }
            Some(EmpiricalPermuton::new(perm.clone(), PermutonMode::PointMass))
        }
        PermSource::Resample => None,
    };
    let mut entries = Vec::with_capacity(points.len() * points.len());
    for (a, &s) in points.iter().enumerate() {
        for (b, &t) in points.iter().enumerate() {
            let xs: Vec<f64> = samples.iter().map(|x| x.0[a]).collect();
            let ys: Vec<f64> = samples.iter().map(|x| x.1[b]).collect();
            let est = stats::covariance(&xs, &ys);
            let target = match &frozen {
                Some(p) => p.cdf(&[s, t], &[pair.0, pair.1])?,
                None => copula.eval_pair(pair.0, pair.1, s, t)?,
            };
            entries.push(CovEntry { s, t, i: pair.0, j: pair.1, cov: est.mean, target, stderr: est.stderr });
        }
    }
    Ok(CovarianceReport { n, replicas, entries })
}

/// σ = Perm(U) for a copula sample, returned with the visit orders σ^{-1}.
pub fn rank_orders<R: Rng + ?Sized>(copula: &Copula, n: usize, j: usize, rng: &mut R) -> Result<(JPermutation, JPermutation)> {
    let jp = crate::permutons::sample_jpermutation(copula, n, j, rng)?;
    let inv = jp.inverse();
    Ok((jp, inv))
}

/// Used by tests: Perm applied to each column of a row-major point cloud.
pub fn ranks_of_columns(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let j = points.first().map_or(0, Vec::len);
    (0..j).map(|c| perm_of(&points.iter().map(|p| p[c]).collect::<Vec<_>>())).collect()
}
