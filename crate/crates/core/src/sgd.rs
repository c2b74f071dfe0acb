//! Discrete SGD: mini-batch with replacement (population or finite dataset)
//! and SGD without replacement driven by a shuffling scheme.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::Vector;
use crate::permutons::{self, Copula};
use crate::risk_models::{point_gradient, DataPoint, LinRegModel};
use crate::{Error, Result};

/// Learning-rate control u_t: constant 1 or (1 + c t)^{-β}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Schedule {
    Constant,
    Polynomial { c: f64, beta: f64 },
}

impl Schedule {
    pub fn polynomial(c: f64, beta: f64) -> Result<Self> {
        let s = Schedule::Polynomial { c, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Schedule::Polynomial { c, beta } = *self {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid("schedule c must be positive"));
            }
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::invalid("schedule beta must lie in (0,1)"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn u(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant => 1.0,
            Schedule::Polynomial { c, beta } => (1.0 + c * t).powf(-beta),
        }
    }

    /// U_t = ∫_0^t u_s ds.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant => t,
            Schedule::Polynomial { c, beta } => ((1.0 + c * t).powf(1.0 - beta) - 1.0) / (c * (1.0 - beta)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShufflingScheme {
    SingleShuffle,
    RandomReshuffle,
    FlipflopSingle,
    FlipflopRandom,
    PermutonDriven { copula: Copula },
    Explicit { perms: Vec<Vec<usize>> },
}

pub fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn reversal(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &v in p {
        if v >= p.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (k, &v) in p.iter().enumerate() {
        inv[v] = k;
    }
    inv
}

/// (a ∘ b)(k) = a(b(k)).
pub fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&k| a[k]).collect()
}

/// Per-epoch visit orders: entry j lists the data indices visited in epoch j.
pub fn make_permutation_sequence<R: Rng + ?Sized>(
    scheme: &ShufflingScheme,
    n: usize,
    epochs: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::invalid("permutation size must be at least 1"));
    }
    let mut out = Vec::with_capacity(epochs);
    match scheme {
        ShufflingScheme::SingleShuffle => out.resize(epochs, identity(n)),
        ShufflingScheme::RandomReshuffle => {
            for j in 0..epochs {
                let mut p = identity(n);
                if j > 0 {
                    p.shuffle(rng);
                }
                out.push(p);
            }
        }
        ShufflingScheme::FlipflopSingle => {
            for j in 0..epochs {
                out.push(if j % 2 == 0 { identity(n) } else { reversal(n) });
            }
        }
        ShufflingScheme::FlipflopRandom => {
            for j in 0..epochs {
                if j % 2 == 0 {
                    let mut p = identity(n);
                    if j > 0 {
                        p.shuffle(rng);
                    }
                    out.push(p);
                } else {
                    let prev: &Vec<usize> = &out[j - 1];
                    out.push(prev.iter().rev().copied().collect());
                }
            }
        }
        ShufflingScheme::PermutonDriven { copula } => {
            if epochs == 0 {
                return Ok(out);
            }
            let jp = permutons::sample_jpermutation(copula, n, epochs, rng)?;
            let s0 = &jp.perms[0];
            for s in &jp.perms {
                out.push(compose(s0, &invert(s)));
            }
        }
        ShufflingScheme::Explicit { perms } => {
            if perms.len() < epochs {
                return Err(Error::invalid(format!(
                    "explicit scheme lists {} permutations, {} epochs requested",
                    perms.len(),
                    epochs
                )));
            }
            for (j, p) in perms.iter().take(epochs).enumerate() {
                if p.len() != n || !is_permutation(p) {
                    return Err(Error::invalid(format!("explicit permutation {j} is not a bijection on 0..{n}")));
                }
                if j == 0 && *p != identity(n) {
                    return Err(Error::invalid("the first epoch must use the identity"));
                }
                out.push(p.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Dataset indices when sampling from a finite dataset.
    pub indices: Option<Vec<usize>>,
    pub points: Vec<DataPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<usize>,
    pub params: Vec<Vector>,
    pub h: f64,
    pub batch: usize,
    pub batches: Option<Vec<Batch>>,
}

impl Trajectory {
    pub fn last(&self) -> &Vector {
        self.params.last().expect("trajectory is never empty")
    }

    /// CSV rows: step, t, θ components.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,t");
        for i in 0..self.params[0].len() {
            s.push_str(&format!(",theta{i}"));
        }
        s.push('\n');
        for (n, p) in self.times.iter().zip(&self.params) {
            s.push_str(&format!("{n},{}", crate::experiment::fmt_f64(*n as f64 * self.h)));
            for v in p.iter() {
                s.push(',');
                s.push_str(&crate::experiment::fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub log_batches: bool,
}

fn check_step(h: f64, b: usize) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid("step size h must lie in (0,1)"));
    }
    if b == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    Ok(())
}

fn batch_step(theta: &Vector, points: &[DataPoint], scale: f64) -> Result<Vector> {
    let mut g = Vector::zeros(theta.len());
    for z in points {
        g += point_gradient(theta, z)?;
    }
    Ok(theta - g * scale)
}

/// χ_{n+1} = χ_n − u_{nh}(h/B)Σ_{k<B}∇R_{z(k+Bn)}(χ_n) with fresh population draws.
#[allow(clippy::too_many_arguments)]
pub fn run_sgd_replacement<R: Rng + ?Sized>(
    model: &LinRegModel,
    theta0: &Vector,
    h: f64,
    batch: usize,
    schedule: &Schedule,
    steps: usize,
    rng: &mut R,
    opts: RunOptions,
) -> Result<Trajectory> {
    check_step(h, batch)?;
    schedule.validate()?;
    check_dim(model.dim(), theta0.len())?;
    let mut params = Vec::with_capacity(steps + 1);
    params.push(theta0.clone());
    let mut log = opts.log_batches.then(Vec::new);
    for n in 0..steps {
        let points = model.sample_dataset(batch, rng)?;
        let scale = schedule.u(n as f64 * h) * h / batch as f64;
        let next = batch_step(&params[n], &points, scale)?;
        if let Some(l) = log.as_mut() {
            l.push(Batch { indices: None, points });
        }
        params.push(next);
    }
    Ok(Trajectory { times: (0..=steps).collect(), params, h, batch, batches: log })
}

/// Finite-dataset variant: batch members drawn uniformly with replacement.
#[allow(clippy::too_many_arguments)]
pub fn run_sgd_dataset<R: Rng + ?Sized>(
    dataset: &[DataPoint],
    theta0: &Vector,
    h: f64,
    batch: usize,
    schedule: &Schedule,
    steps: usize,
    rng: &mut R,
    opts: RunOptions,
) -> Result<Trajectory> {
    check_step(h, batch)?;
    schedule.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let mut params = Vec::with_capacity(steps + 1);
    params.push(theta0.clone());
    let mut log = opts.log_batches.then(Vec::new);
    for n in 0..steps {
        let idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..dataset.len())).collect();
        let points: Vec<DataPoint> = idx.iter().map(|&i| dataset[i].clone()).collect();
        let scale = schedule.u(n as f64 * h) * h / batch as f64;
        let next = batch_step(&params[n], &points, scale)?;
        if let Some(l) = log.as_mut() {
            l.push(Batch { indices: Some(idx), points });
        }
        params.push(next);
    }
    Ok(Trajectory { times: (0..=steps).collect(), params, h, batch, batches: log })
}

/// χ_{n+1} = χ_n − h u_{nh} ∇R_{z(π^{⌊n/N⌋}(n mod N))}(χ_n).
/// `rng` feeds the shuffling scheme only.
#[allow(clippy::too_many_arguments)]
pub fn run_sgdo<R: Rng + ?Sized>(
    dataset: &[DataPoint],
    theta0: &Vector,
    h: f64,
    schedule: &Schedule,
    scheme: &ShufflingScheme,
    epochs: usize,
    rng: &mut R,
    opts: RunOptions,
) -> Result<Trajectory> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let perms = make_permutation_sequence(scheme, dataset.len(), epochs, rng)?;
    run_sgdo_with(dataset, theta0, h, schedule, &perms, opts)
}

pub fn run_sgdo_with(
    dataset: &[DataPoint],
    theta0: &Vector,
    h: f64,
    schedule: &Schedule,
    perms: &[Vec<usize>],
    opts: RunOptions,
) -> Result<Trajectory> {
    check_step(h, 1)?;
    schedule.validate()?;
    let n_data = dataset.len();
    if n_data == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    check_dim(dataset[0].x.len(), theta0.len())?;
    let steps = perms.len() * n_data;
    let mut params = Vec::with_capacity(steps + 1);
    params.push(theta0.clone());
    let mut log = opts.log_batches.then(Vec::new);
    for n in 0..steps {
        let i = perms[n / n_data][n % n_data];
        let z = &dataset[i];
        let g = point_gradient(&params[n], z)?;
        let next = &params[n] - g * (h * schedule.u(n as f64 * h));
        if let Some(l) = log.as_mut() {
            l.push(Batch { indices: Some(vec![i]), points: vec![z.clone()] });
        }
        params.push(next);
    }
    Ok(Trajectory { times: (0..=steps).collect(), params, h, batch: 1, batches: log })
}

/// Final excess risk of d = 1 population SGD with constant schedule; same
/// stream consumption as `run_sgd_replacement`.
pub fn sgd_final_excess_risk_d1<R: Rng + ?Sized>(
    model: &crate::risk_models::ScalarModel,
    theta0: f64,
    h: f64,
    batch: usize,
    steps: usize,
    rng: &mut R,
) -> f64 {
    let mut theta = theta0;
    let scale = h / batch as f64;
    for _ in 0..steps {
        let mut g = 0.0;
        for _ in 0..batch {
            let (x, y) = model.sample_point(rng);
            g += (theta * x - y) * x;
        }
        theta -= g * scale;
    }
    let d = theta - model.theta_star;
    0.5 * d * (model.kappa * d)
}
