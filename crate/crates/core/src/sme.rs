//! Stochastic modified equations for linear-regression SGD: gradient flow,
//! constant-covariance (CC), state-dependent covariance (NCC) and the
//! second-order drift variant (SGF2).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::risk_models::{LinRegModel, QuadraticObjective};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmeKind {
    Gf,
    Cc,
    Ncc,
    Sgf2,
}

impl SmeKind {
    pub const ALL: [SmeKind; 4] = [SmeKind::Gf, SmeKind::Cc, SmeKind::Ncc, SmeKind::Sgf2];

    pub fn name(self) -> &'static str {
        match self {
            SmeKind::Gf => "GF",
            SmeKind::Cc => "CC",
            SmeKind::Ncc => "NCC",
            SmeKind::Sgf2 => "SGF2",
        }
    }
}

impl std::fmt::Display for SmeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// X_t^0 = e^{-tκ}(θ − θ*) + θ*.
pub fn gradient_flow_exact(q: &QuadraticObjective, theta0: &Vector, t: f64) -> Result<Vector> {
    check_dim(q.dim(), theta0.len())?;
    if t < 0.0 {
        return Err(Error::invalid("time must be nonnegative"));
    }
    let e = linalg::sym_fn(&q.kappa, |l| (-t * l).exp());
    Ok(e * (theta0 - &q.theta_star) + &q.theta_star)
}

/// −κ(I + (h/2)κ)(θ − θ*).
pub fn second_order_drift(q: &QuadraticObjective, h: f64, theta: &Vector) -> Result<Vector> {
    check_dim(q.dim(), theta.len())?;
    let g = &q.kappa * (theta - &q.theta_star);
    Ok(-(&g + &q.kappa * &g * (0.5 * h)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmeSpec {
    pub kind: SmeKind,
    pub model: LinRegModel,
    pub batch: f64,
    pub h: f64,
}

impl SmeSpec {
    pub fn new(kind: SmeKind, model: LinRegModel, batch: f64, h: f64) -> Result<Self> {
        if !(batch > 0.0) {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::invalid("h must be nonnegative"));
        }
        if kind != SmeKind::Gf {
            model.b_eq()?;
        }
        Ok(SmeSpec { kind, model, batch, h })
    }

    pub fn drift(&self, theta: &Vector) -> Result<Vector> {
        let q = self.model.objective();
        match self.kind {
            SmeKind::Sgf2 => second_order_drift(&q, self.h, theta),
            _ => Ok(-q.gradient(theta)?),
        }
    }

    /// √(h/B)·√S evaluated per kind; frozen at θ* for CC, zero for GF.
    pub fn diffusion(&self, theta: &Vector) -> Result<Mat> {
        let d = self.model.dim();
        let scale = (self.h / self.batch).sqrt();
        match self.kind {
            SmeKind::Gf => Ok(Mat::zeros(d, d)),
            SmeKind::Cc => Ok(self.model.sqrt_kappa() * (self.model.sigma_eps() * scale)),
            SmeKind::Ncc | SmeKind::Sgf2 => Ok(self.model.sqrt_gradient_covariance(theta)? * scale),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub values: Vec<Vector>,
    pub dt: f64,
}

impl SdePath {
    pub fn last(&self) -> &Vector {
        self.values.last().expect("path is never empty")
    }

    /// CSV rows: t, components.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.values[0].len() {
            s.push_str(&format!(",x{i}"));
        }
        s.push('\n');
        for (t, v) in self.times.iter().zip(&self.values) {
            s.push_str(&crate::experiment::fmt_f64(*t));
            for x in v.iter() {
                s.push(',');
                s.push_str(&crate::experiment::fmt_f64(*x));
            }
            s.push('\n');
        }
        s
    }
}

/// Number of steps and the uniform step that divides [0, T].
pub fn step_grid(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && t_end > 0.0 && dt <= t_end * (1.0 + 1e-12)) {
        return Err(Error::invalid("need 0 < dt <= T"));
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Explicit Euler–Maruyama on [0, T]; dt is shrunk so that it divides T.
pub fn euler_maruyama<R: Rng + ?Sized>(
    spec: &SmeSpec,
    theta0: &Vector,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SdePath> {
    check_dim(spec.model.dim(), theta0.len())?;
    let (n, dt) = step_grid(t_end, dt)?;
    let d = theta0.len();
    let sq = dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    values.push(theta0.clone());
    for k in 0..n {
        let x = &values[k];
        let drift = spec.drift(x)?;
        let sigma = spec.diffusion(x)?;
        let xi = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let next = x + drift * dt + sigma * xi * sq;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("Euler–Maruyama blew up at step {k} (t = {})", k as f64 * dt)));
        }
        values.push(next);
    }
    let times = (0..=n).map(|k| k as f64 * dt).collect();
    Ok(SdePath { times, values, dt })
}

/// d = 1 Euler–Maruyama returning the final excess risk; consumes the
/// stream like `euler_maruyama`.
pub fn em_terminal_excess_d1<R: Rng + ?Sized>(
    spec: &SmeSpec,
    theta0: f64,
    t_end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if spec.model.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: spec.model.dim() });
    }
    let (n, dt) = step_grid(t_end, dt)?;
    let kappa = spec.model.kappa()[(0, 0)];
    let ts = spec.model.theta_star()[0];
    let s2 = spec.model.sigma_eps().powi(2);
    let c = if spec.kind == SmeKind::Gf { 0.0 } else { 2.0 * spec.model.b_eq()? };
    let hb = spec.h / spec.batch;
    let drift_factor = match spec.kind {
        SmeKind::Sgf2 => kappa * (1.0 + 0.5 * spec.h * kappa),
        _ => kappa,
    };
    let cc_sigma = (hb * s2 * kappa).sqrt();
    let sq = dt.sqrt();
    let mut x = theta0;
    for _ in 0..n {
        let dev = x - ts;
        let sigma = match spec.kind {
            SmeKind::Gf => 0.0,
            SmeKind::Cc => cc_sigma,
            SmeKind::Ncc | SmeKind::Sgf2 => (hb * (c * kappa * kappa * dev * dev + s2 * kappa)).sqrt(),
        };
        let xi: f64 = StandardNormal.sample(rng);
        x += -drift_factor * dev * dt + sigma * xi * sq;
    }
    if !x.is_finite() {
        return Err(Error::numeric("Euler–Maruyama blew up"));
    }
    let dev = x - ts;
    Ok(0.5 * dev * (kappa * dev))
}

/// Exact CC sample at time t in d = 1: X_t^0 + √(hσ²/(2B))·W_{1−e^{−2κt}}.
pub fn cc_exact_sample_d1<R: Rng + ?Sized>(
    model: &LinRegModel,
    batch: f64,
    h: f64,
    theta0: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: model.dim() });
    }
    let kappa = model.kappa()[(0, 0)];
    let ts = model.theta_star()[0];
    let mean = (-kappa * t).exp() * (theta0 - ts) + ts;
    let var = -(-2.0 * kappa * t).exp_m1();
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + (h * model.sigma_eps().powi(2) / (2.0 * batch)).sqrt() * var.sqrt() * z)
}

/// d = 1 parameters of the closed-form expected excess risk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarParams {
    pub kappa: f64,
    pub sigma_eps: f64,
    pub batch: f64,
    pub kurt: f64,
}

impl ScalarParams {
    pub fn from_model(model: &LinRegModel, batch: f64) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: model.dim() });
        }
        Ok(ScalarParams {
            kappa: model.kappa()[(0, 0)],
            sigma_eps: model.sigma_eps(),
            batch,
            kurt: 2.0 * model.b_eq()? + 1.0,
        })
    }

    /// ζ^h = 1 − (h/2B)κ(Kurt − 1).
    pub fn zeta(&self, h: f64) -> f64 {
        1.0 - h / (2.0 * self.batch) * self.kappa * (self.kurt - 1.0)
    }

    /// ξ^h = ζ^h + hκ/2.
    pub fn xi(&self, h: f64) -> f64 {
        self.zeta(h) + 0.5 * h * self.kappa
    }

    /// Decay multiplier of the excess-risk ODE for each kind.
    pub fn rate(&self, kind: SmeKind, h: f64) -> f64 {
        match kind {
            SmeKind::Gf | SmeKind::Cc => 1.0,
            SmeKind::Ncc => self.zeta(h),
            SmeKind::Sgf2 => self.xi(h),
        }
    }
}

/// E[R^e(X_t)] in d = 1. Valid for any sign of ζ (resp. ξ); see
/// `stationary_excess_risk` for the t → ∞ value.
pub fn expected_excess_risk(kind: SmeKind, p: &ScalarParams, h: f64, t: f64, re0: f64) -> Result<f64> {
    if t < 0.0 || h < 0.0 {
        return Err(Error::invalid("t and h must be nonnegative"));
    }
    let noise = h * p.sigma_eps * p.sigma_eps / (4.0 * p.batch);
    let k = p.kappa;
    Ok(match kind {
        SmeKind::Gf => (-2.0 * k * t).exp() * re0,
        SmeKind::Cc => (-2.0 * k * t).exp() * re0 - noise * (-2.0 * k * t).exp_m1(),
        SmeKind::Ncc | SmeKind::Sgf2 => {
            let z = p.rate(kind, h);
            let decay = (-2.0 * k * z * t).exp();
            // (1 − e^{−2κζt})/ζ, continuous through ζ = 0
            let x = 2.0 * k * z * t;
            let ratio = if x.abs() < 1e-8 { 2.0 * k * t * (1.0 - 0.5 * x) } else { -(-x).exp_m1() / z };
            decay * re0 + noise * ratio
        }
    })
}

/// lim_{t→∞} E[R^e(X_t)].
pub fn stationary_excess_risk(kind: SmeKind, p: &ScalarParams, h: f64) -> Result<f64> {
    let noise = h * p.sigma_eps * p.sigma_eps / (4.0 * p.batch);
    match kind {
        SmeKind::Gf => Ok(0.0),
        SmeKind::Cc => Ok(noise),
        SmeKind::Ncc | SmeKind::Sgf2 => {
            let z = p.rate(kind, h);
            if z <= 0.0 {
                Err(Error::numeric(format!(
                    "{kind}: rate {z} <= 0, step size too large for a stationary law"
                )))
            } else {
                Ok(noise / z)
            }
        }
    }
}
