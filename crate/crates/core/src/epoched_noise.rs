//! Epoched Brownian bridges with copula cross-covariance and the epoched
//! Brownian motion Ŵ_t = √T X_{t/T} + (t/√T) V.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Mat};
use crate::permutons::Copula;
use crate::rng::{split, Stream};
use crate::stats::{self, Estimate};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BridgeScheme {
    SingleShuffle,
    RandomReshuffle,
    FlipflopSingle,
    FlipflopRandom,
    Copula { copula: Copula },
}

impl BridgeScheme {
    /// The permuton whose pair margins give C^{ij}.
    pub fn copula(&self) -> Copula {
        match self {
            BridgeScheme::SingleShuffle => Copula::Comonotone,
            BridgeScheme::RandomReshuffle => Copula::Independence,
            BridgeScheme::FlipflopSingle => Copula::FlipflopSingle,
            BridgeScheme::FlipflopRandom => Copula::FlipflopRandom,
            BridgeScheme::Copula { copula } => copula.clone(),
        }
    }

    /// Number of distinct epochs over an unbounded horizon, if finite.
    pub fn distinct_epochs(&self) -> Option<usize> {
        match self {
            BridgeScheme::SingleShuffle => Some(1),
            BridgeScheme::FlipflopSingle => Some(2),
            _ => None,
        }
    }
}

/// Uniform grid path t_k = k·dt, `dim` components per point, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub dim: usize,
    pub dt: f64,
    pub data: Vec<f64>,
}

impl GridPath {
    pub fn zeros(dim: usize, dt: f64, len: usize) -> Self {
        GridPath { dim, dt, data: vec![0.0; dim * len] }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.dim + i]
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.dim {
            s.push_str(&format!(",x{i}"));
        }
        s.push('\n');
        for k in 0..self.len() {
            s.push_str(&crate::experiment::fmt_f64(k as f64 * self.dt));
            for v in self.point(k) {
                s.push(',');
                s.push_str(&crate::experiment::fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeFamilySpec {
    pub scheme: BridgeScheme,
    pub epochs: usize,
    /// Grid points per unit epoch.
    pub m: usize,
}

pub const DEFAULT_GRID: usize = 1024;

/// Sampler with the covariance factor precomputed for copula schemes.
#[derive(Clone, Debug)]
pub struct BridgeSampler {
    spec: BridgeFamilySpec,
    factor: Option<Mat>,
}

/// Clamp for the dense bridge covariance eigenvalues.
pub const COV_CLAMP: f64 = 1e-10;

pub fn bridge_covariance(spec: &BridgeFamilySpec) -> Result<Mat> {
    let c = spec.scheme.copula();
    let (j, m) = (spec.epochs, spec.m);
    let n = j * (m - 1);
    let mut cov = Mat::zeros(n, n);
    for a in 0..n {
        let (ia, sa) = (a / (m - 1), ((a % (m - 1)) + 1) as f64 / m as f64);
        for b in a..n {
            let (ib, sb) = (b / (m - 1), ((b % (m - 1)) + 1) as f64 / m as f64);
            let v = c.eval_pair(ia, ib, sa, sb)? - sa * sb;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

impl BridgeSampler {
    pub fn new(spec: BridgeFamilySpec) -> Result<Self> {
        if spec.m < 2 || spec.epochs == 0 {
            return Err(Error::invalid("need m >= 2 and at least one epoch"));
        }
        let factor = match &spec.scheme {
            BridgeScheme::Copula { copula } => {
                copula.validate()?;
                Some(linalg::psd_factor(&bridge_covariance(&spec)?, COV_CLAMP).map_err(|e| {
                    Error::invalid(format!("copula does not define a valid bridge family: {e}"))
                })?)
            }
            _ => {
                if !spec.m.is_power_of_two() {
                    return Err(Error::invalid("named bridge schemes need m to be a power of two"));
                }
                None
            }
        };
        Ok(BridgeSampler { spec, factor })
    }

    pub fn spec(&self) -> &BridgeFamilySpec {
        &self.spec
    }

    /// Grid path X on [0, J] with spacing 1/m; each of the `dim` components
    /// is an independent copy.
    pub fn sample(&self, dim: usize, rng: &mut Stream) -> GridPath {
        let (j, m) = (self.spec.epochs, self.spec.m);
        let mut out = GridPath::zeros(dim, 1.0 / m as f64, j * m + 1);
        for i in 0..dim {
            let epochs = match &self.factor {
                Some(f) => {
                    let xi = nalgebra::DVector::from_fn(f.ncols(), |_, _| StandardNormal.sample(rng));
                    let v = f * xi;
                    (0..j)
                        .map(|e| {
                            let mut b = vec![0.0; m + 1];
                            b[1..m].copy_from_slice(&v.as_slice()[e * (m - 1)..(e + 1) * (m - 1)]);
                            b
                        })
                        .collect()
                }
                None => self.named_epochs(rng),
            };
            for (e, b) in epochs.iter().enumerate() {
                for (k, v) in b.iter().enumerate().take(m) {
                    out.data[(e * m + k) * dim + i] = *v;
                }
            }
        }
        out
    }

    fn named_epochs(&self, rng: &mut Stream) -> Vec<Vec<f64>> {
        let (j, m) = (self.spec.epochs, self.spec.m);
        let mut epochs: Vec<Vec<f64>> = Vec::with_capacity(j);
        for e in 0..j {
            let b = match self.spec.scheme {
                BridgeScheme::SingleShuffle if e > 0 => epochs[0].clone(),
                BridgeScheme::FlipflopSingle if e > 0 => {
                    if e % 2 == 1 {
                        reflect(&epochs[0])
                    } else {
                        epochs[0].clone()
                    }
                }
                BridgeScheme::FlipflopRandom if e % 2 == 1 => reflect(&epochs[e - 1]),
                _ => unit_bridge(m, &mut split(rng)),
            };
            epochs.push(b);
        }
        epochs
    }
}

/// B_t ↦ −B_{1−t} on the grid.
pub fn reflect(b: &[f64]) -> Vec<f64> {
    b.iter().rev().map(|v| -v).collect()
}

/// Brownian bridge on {k/m} by dyadic midpoint refinement; the draws for a
/// coarse grid are a prefix of those for any finer one.
pub fn unit_bridge<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    assert!(m.is_power_of_two());
    let mut v = vec![0.0; m + 1];
    let mut step = m;
    while step > 1 {
        let half = step / 2;
        let sd = (step as f64 / m as f64 / 4.0).sqrt();
        let mut k = half;
        while k < m {
            let z: f64 = StandardNormal.sample(rng);
            v[k] = 0.5 * (v[k - half] + v[k + half]) + sd * z;
            k += step;
        }
        step = half;
    }
    v
}

pub fn sample_epoched_bridge(spec: &BridgeFamilySpec, dim: usize, rng: &mut Stream) -> Result<GridPath> {
    Ok(BridgeSampler::new(spec.clone())?.sample(dim, rng))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochedPath {
    pub period: f64,
    pub epochs: usize,
    pub m: usize,
    /// Bridge concatenation on [0, J], spacing 1/m.
    pub x: GridPath,
    pub v: Vec<f64>,
    /// Ŵ on [0, JT], spacing T/m.
    pub w: GridPath,
}

impl EpochedPath {
    pub fn dim(&self) -> usize {
        self.x.dim
    }

    /// Ŵ_T = √T·V.
    pub fn w_period(&self) -> Vec<f64> {
        self.w.point(self.m).to_vec()
    }
}

/// Ŵ_t = √T X_{t/T} + (t/√T) V; V is drawn from `rng` when not supplied.
pub fn assemble_ebm<R: Rng + ?Sized>(
    bridge: GridPath,
    period: f64,
    v: Option<Vec<f64>>,
    rng: &mut R,
) -> Result<EpochedPath> {
    if !(period > 0.0) {
        return Err(Error::invalid("period T must be positive"));
    }
    let dim = bridge.dim;
    let m = (1.0 / bridge.dt).round() as usize;
    let len = bridge.len();
    if m == 0 || !(len - 1).is_multiple_of(m) {
        return Err(Error::invalid("bridge grid does not cover whole epochs"));
    }
    let v = match v {
        Some(v) => {
            crate::error::check_dim(dim, v.len())?;
            v
        }
        None => (0..dim).map(|_| StandardNormal.sample(rng)).collect(),
    };
    let st = period.sqrt();
    let sv: Vec<f64> = v.iter().map(|x| st * x).collect();
    let mut w = GridPath::zeros(dim, period / m as f64, len);
    for k in 0..len {
        let frac = k as f64 / m as f64;
        for (i, &svi) in sv.iter().enumerate().take(dim) {
            w.data[k * dim + i] = st * bridge.get(k, i) + frac * svi;
        }
    }
    Ok(EpochedPath { period, epochs: (len - 1) / m, m, x: bridge, v, w })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub s: f64,
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub cov: f64,
    pub target: f64,
    pub stderr: f64,
}

impl CovEntry {
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            (self.cov - self.target) / self.stderr
        } else if self.cov == self.target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// C^{ij}(s,t) − st.
pub fn target_cross_covariance(scheme: &BridgeScheme, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
    Ok(scheme.copula().eval_pair(i, j, s, t)? - s * t)
}

fn grid_index(x: f64, m: usize) -> Result<usize> {
    let k = (x * m as f64).round();
    if (k - x * m as f64).abs() > 1e-9 || !(0.0..=m as f64).contains(&k) {
        return Err(Error::invalid(format!("{x} is not a grid point of the 1/{m} grid")));
    }
    Ok(k as usize)
}

/// Sample covariance of (B^i_s, B^j_t) over bridge replicas (component 0).
pub fn empirical_cross_covariance(
    paths: &[GridPath],
    pair: (usize, usize),
    points: &[(f64, f64)],
    scheme: &BridgeScheme,
) -> Result<Vec<CovEntry>> {
    if paths.len() < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let m = (1.0 / paths[0].dt).round() as usize;
    let (i, j) = pair;
    points
        .iter()
        .map(|&(s, t)| {
            let ks = i * m + grid_index(s, m)?;
            let kt = j * m + grid_index(t, m)?;
            if ks >= paths[0].len() || kt >= paths[0].len() {
                return Err(Error::invalid("epoch index beyond the sampled horizon"));
            }
            let xs: Vec<f64> = paths.iter().map(|p| p.get(ks, 0)).collect();
            let ys: Vec<f64> = paths.iter().map(|p| p.get(kt, 0)).collect();
            let Estimate { mean, stderr, .. } = stats::covariance(&xs, &ys);
            Ok(CovEntry { s, t, i, j, cov: mean, target: target_cross_covariance(scheme, i, j, s, t)?, stderr })
        })
        .collect()
}
