//! Young integrals against grid paths, an explicit YDE solver, the linear
//! variation-of-constants oracle, the rescaled bridge form and the
//! SGDo-SME convergence-rate experiment.

use serde::{Deserialize, Serialize};

use crate::epoched_noise::{assemble_ebm, BridgeFamilySpec, BridgeSampler, BridgeScheme, EpochedPath, GridPath};
use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::risk_models::LinRegModel;
use crate::rng::StreamKey;
use crate::sgd::Schedule;
use crate::sme::SdePath;
use crate::stats;
use crate::{Error, Result};

/// Solutions with a larger Euclidean norm count as diverged.
pub const BLOW_UP: f64 = 1e12;
/// Hölder exponent used for C_α.
pub const HOLDER_ALPHA: f64 = 0.42;

/// Left Riemann sum Σ σ_k (X_{k+1} − X_k) over grid cells lo..hi.
pub fn young_integral(sigma: &[f64], driver: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo > hi || hi >= driver.len() || hi > sigma.len() {
        return Err(Error::invalid(format!("interval [{lo}, {hi}] lies outside the grid")));
    }
    Ok((lo..hi).map(|k| sigma[k] * (driver[k + 1] - driver[k])).sum())
}

/// Vector version with a matrix integrand: Σ σ(k) (X_{k+1} − X_k).
pub fn young_integral_mat(sigma: impl Fn(usize) -> Mat, driver: &GridPath, lo: usize, hi: usize) -> Result<Vector> {
    if lo > hi || hi >= driver.len() {
        return Err(Error::invalid(format!("interval [{lo}, {hi}] lies outside the grid")));
    }
    let q = driver.dim;
    let mut acc: Option<Vector> = None;
    for k in lo..hi {
        let dx = Vector::from_fn(q, |i, _| driver.get(k + 1, i) - driver.get(k, i));
        let s = sigma(k);
        check_dim(q, s.ncols())?;
        let term = s * dx;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.unwrap_or_else(|| Vector::zeros(0)))
}

/// Gradient field of a strongly convex risk with recorded constants λ ≤ L.
pub trait Gradient: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    fn lambda(&self) -> f64;
    fn lipschitz(&self) -> f64;
}

/// ∇R(y) = K(y − θ*).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGradient {
    pub k: Mat,
    pub theta_star: Vector,
    lambda: f64,
    l: f64,
    rows: Vec<f64>,
}

impl QuadraticGradient {
    /// Symmetric positive definite K; λ and L are its extreme eigenvalues.
    pub fn new(k: Mat, theta_star: Vector) -> Result<Self> {
        if !linalg::is_symmetric(&k, 1e-12) {
            return Err(Error::invalid("quadratic gradient needs a symmetric matrix"));
        }
        let ev = linalg::eigen(&k).eigenvalues;
        let (lambda, l) = (ev.min(), ev.max());
        if !(lambda > 0.0) {
            return Err(Error::invalid("quadratic gradient must be strongly convex"));
        }
        Self::with_constants(k, theta_star, lambda, l)
    }

    /// For matrices similar to a symmetric one (σ⁻¹κσ) the constants are
    /// supplied by the caller.
    pub fn with_constants(k: Mat, theta_star: Vector, lambda: f64, l: f64) -> Result<Self> {
        check_dim(k.nrows(), k.ncols())?;
        check_dim(k.nrows(), theta_star.len())?;
        if !(lambda > 0.0 && lambda <= l) {
            return Err(Error::invalid("need 0 < lambda <= L"));
        }
        let d = k.nrows();
        let rows = (0..d * d).map(|idx| k[(idx / d, idx % d)]).collect();
        Ok(QuadraticGradient { k, theta_star, lambda, l, rows })
    }
}

impl Gradient for QuadraticGradient {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.rows[i * d..(i + 1) * d];
            *o = row.iter().zip(y).zip(self.theta_star.iter()).map(|((a, y), t)| a * (y - t)).sum();
        }
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn lipschitz(&self) -> f64 {
        self.l
    }
}

/// dY = −u_t ∇R(Y) dt + u_t σ dX on the driver's time axis.
#[derive(Clone, Debug)]
pub struct YdeProblem<G: Gradient = QuadraticGradient> {
    pub gradient: G,
    pub sigma: Mat,
    pub driver: GridPath,
    pub schedule: Schedule,
    pub y0: Vector,
}

impl<G: Gradient> YdeProblem<G> {
    pub fn validate(&self) -> Result<()> {
        let d = self.gradient.dim();
        check_dim(d, self.y0.len())?;
        check_dim(d, self.sigma.nrows())?;
        check_dim(self.driver.dim, self.sigma.ncols())?;
        self.schedule.validate()?;
        if self.driver.len() < 2 {
            return Err(Error::invalid("driver needs at least two grid points"));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.gradient.lambda()
    }

    pub fn lipschitz(&self) -> f64 {
        self.gradient.lipschitz()
    }
}

/// Explicit stepping on every `stride`-th driver point; `visit` sees each
/// solver index (in driver units) and state.
fn integrate<G: Gradient>(p: &YdeProblem<G>, stride: usize, mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
    p.validate()?;
    if stride == 0 || !(p.driver.len() - 1).is_multiple_of(stride) {
        return Err(Error::invalid("solver stride must divide the driver grid"));
    }
    let d = p.gradient.dim();
    let q = p.driver.dim;
    let sig: Vec<f64> = (0..d * q).map(|idx| p.sigma[(idx / q, idx % q)]).collect();
    let dt = p.driver.dt * stride as f64;
    let mut y: Vec<f64> = p.y0.iter().copied().collect();
    let mut g = vec![0.0; d];
    let mut dx = vec![0.0; q];
    visit(0, &y);
    let mut k = 0;
    while k + stride < p.driver.len() {
        let u = p.schedule.u(k as f64 * p.driver.dt);
        p.gradient.eval(&y, &mut g);
        let (a, b) = (p.driver.point(k), p.driver.point(k + stride));
        for j in 0..q {
            dx[j] = b[j] - a[j];
        }
        let mut norm2 = 0.0;
        for i in 0..d {
            let noise: f64 = sig[i * q..(i + 1) * q].iter().zip(&dx).map(|(s, x)| s * x).sum();
            y[i] += u * (noise - g[i] * dt);
            norm2 += y[i] * y[i];
        }
        if !(norm2.sqrt() <= BLOW_UP) {
            return Err(Error::numeric(format!("YDE solution blew up at t = {}", (k + stride) as f64 * p.driver.dt)));
        }
        k += stride;
        visit(k, &y);
    }
    Ok(())
}

pub fn solve_yde<G: Gradient>(p: &YdeProblem<G>, stride: usize) -> Result<SdePath> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    integrate(p, stride, |k, y| {
        times.push(k as f64 * p.driver.dt);
        values.push(Vector::from_column_slice(y));
    })?;
    Ok(SdePath { times, values, dt: p.driver.dt * stride as f64 })
}

/// States at the given driver indices only (each a multiple of `stride`).
pub fn solve_yde_observed<G: Gradient>(p: &YdeProblem<G>, stride: usize, obs: &[usize]) -> Result<Vec<Vector>> {
    if obs.iter().any(|&o| o % stride.max(1) != 0 || o >= p.driver.len()) || obs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("observation indices must be increasing multiples of the stride on the grid"));
    }
    let mut out = Vec::with_capacity(obs.len());
    let mut next = 0;
    integrate(p, stride, |k, y| {
        if next < obs.len() && obs[next] == k {
            out.push(Vector::from_column_slice(y));
            next += 1;
        }
    })?;
    Ok(out)
}

/// Variation of constants for dY = u_t(b − κY)dt + u_t σ dX on the driver
/// grid: φ_t = e^{−κU_t}, deterministic part by the trapezoid rule, driver
/// part by the left Young sum.
pub fn linear_yde_oracle(
    kappa: &Mat,
    b: &Vector,
    sigma: &Mat,
    driver: &GridPath,
    schedule: &Schedule,
    y0: &Vector,
) -> Result<SdePath> {
    let d = y0.len();
    check_dim(d, kappa.nrows())?;
    check_dim(d, b.len())?;
    check_dim(d, sigma.nrows())?;
    check_dim(driver.dim, sigma.ncols())?;
    if !linalg::is_symmetric(kappa, 1e-12) {
        return Err(Error::invalid("A_t = -u_t kappa must commute across times: kappa must be symmetric"));
    }
    let eig = linalg::eigen(kappa);
    let qt = eig.eigenvectors.transpose();
    let lam = eig.eigenvalues.clone();
    let beta = &qt * b;
    let s = &qt * sigma;
    let z0 = &qt * y0;
    let n = driver.len();
    let h = driver.dt;
    // inner integrals in the eigenbasis
    let mut det = Vector::zeros(d);
    let mut drv = Vector::zeros(d);
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let weight = |k: usize, i: usize| {
        let t = k as f64 * h;
        (lam[i] * schedule.integral(t)).exp() * schedule.u(t)
    };
    for k in 0..n {
        let t = k as f64 * h;
        if k > 0 {
            for i in 0..d {
                let (w0, w1) = (weight(k - 1, i), weight(k, i));
                det[i] += 0.5 * h * (w0 + w1) * beta[i];
                let sdx: f64 = (0..driver.dim).map(|j| s[(i, j)] * (driver.get(k, j) - driver.get(k - 1, j))).sum();
                drv[i] += w0 * sdx;
            }
        }
        let ut = schedule.integral(t);
        let z = Vector::from_fn(d, |i, _| (-lam[i] * ut).exp() * (z0[i] + det[i] + drv[i]));
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("oracle overflow: horizon too long for the direct formula"));
        }
        times.push(t);
        values.push(&eig.eigenvectors * z);
    }
    Ok(SdePath { times, values, dt: h })
}

/// max over dyadic lags 2^k ≤ hi − lo of |X_{a+lag} − X_a| / (lag·dt)^α,
/// pairs inside [lo, hi].
pub fn holder_norm(x: &GridPath, lo: usize, hi: usize, alpha: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut lag = 1;
    while lag <= hi - lo {
        let scale = (lag as f64 * x.dt).powf(alpha);
        for a in lo..=hi - lag {
            let (p, q) = (x.point(a), x.point(a + lag));
            let dist = p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            best = best.max(dist / scale);
        }
        lag *= 2;
    }
    best
}

/// C_α = max over the distinct epoch bridges of their α-Hölder norm; None
/// when the scheme has infinitely many distinct epochs.
pub fn c_alpha(x: &GridPath, m: usize, scheme: &BridgeScheme, alpha: f64) -> Option<f64> {
    let distinct = scheme.distinct_epochs()?;
    let epochs = (x.len() - 1) / m;
    Some((0..distinct.min(epochs)).map(|e| holder_norm(x, e * m, (e + 1) * m, alpha)).fold(0.0, f64::max))
}

/// dỸ = −ũ_t ∇R̃(Ỹ)dt + ũ_t dX on [0, J] with ∇R̃(y) = Tσ⁻¹κσ y and
/// ũ_t = u_{tT}; Ỹ_t = T^{-1/2} σ⁻¹ (Y_{tT} − Y_∞).
#[derive(Clone, Debug)]
pub struct BridgeForm {
    pub problem: YdeProblem<QuadraticGradient>,
    pub period: f64,
    pub sigma: Mat,
    pub sigma_inv: Mat,
    pub y_inf: Vector,
}

impl BridgeForm {
    pub fn to_bridge(&self, y: &Vector) -> Vector {
        &self.sigma_inv * (y - &self.y_inf) / self.period.sqrt()
    }

    pub fn to_original(&self, yt: &Vector) -> Vector {
        &self.y_inf + &self.sigma * yt * self.period.sqrt()
    }

    pub fn path_to_original(&self, p: &SdePath) -> SdePath {
        SdePath {
            times: p.times.iter().map(|t| t * self.period).collect(),
            values: p.values.iter().map(|v| self.to_original(v)).collect(),
            dt: p.dt * self.period,
        }
    }

    pub fn path_to_bridge(&self, p: &SdePath) -> SdePath {
        SdePath {
            times: p.times.iter().map(|t| t / self.period).collect(),
            values: p.values.iter().map(|v| self.to_bridge(v)).collect(),
            dt: p.dt / self.period,
        }
    }
}

/// Y_∞ = (∇R)^{-1}(T^{-1}σŴ_T) = θ* + κ⁻¹T⁻¹σŴ_T.
pub fn equilibrium(grad: &QuadraticGradient, sigma: &Mat, period: f64, w_period: &Vector) -> Result<Vector> {
    let kinv = grad.k.clone().try_inverse().ok_or_else(|| Error::numeric("singular kappa"))?;
    Ok(&grad.theta_star + kinv * (sigma * w_period) / period)
}

/// Rescale a quadratic problem driven by the epoched Brownian motion of
/// `path` (whose Ŵ must be the problem's driver).
pub fn reduce_to_bridge_form(p: &YdeProblem<QuadraticGradient>, path: &EpochedPath) -> Result<BridgeForm> {
    p.validate()?;
    if p.driver != path.w {
        return Err(Error::invalid("problem driver is not the epoched path's W"));
    }
    let sigma_inv = p
        .sigma
        .clone()
        .try_inverse()
        .filter(|_| p.sigma.is_square())
        .ok_or_else(|| Error::invalid("sigma must be invertible"))?;
    let t = path.period;
    let w_t = Vector::from_vec(path.w_period());
    let y_inf = equilibrium(&p.gradient, &p.sigma, t, &w_t)?;
    let k = &sigma_inv * &p.gradient.k * &p.sigma * t;
    let grad = QuadraticGradient::with_constants(
        k,
        Vector::zeros(p.gradient.dim()),
        t * p.gradient.lambda(),
        t * p.gradient.lipschitz(),
    )?;
    let schedule = match p.schedule {
        Schedule::Constant => Schedule::Constant,
        Schedule::Polynomial { c, beta } => Schedule::Polynomial { c: c * t, beta },
    };
    let y0 = &sigma_inv * (&p.y0 - &y_inf) / t.sqrt();
    let problem = YdeProblem { gradient: grad, sigma: Mat::identity(p.y0.len(), p.y0.len()), driver: path.x.clone(), schedule, y0 };
    Ok(BridgeForm { problem, period: t, sigma: p.sigma.clone(), sigma_inv, y_inf })
}

/// σ = √h (σ_ε²κ)^{1/2} for the SGDo SME of a linear-regression model.
pub fn sme_sigma(model: &LinRegModel, h: f64) -> Mat {
    model.sqrt_kappa() * (h.sqrt() * model.sigma_eps())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    pub c: f64,
    pub scheme: BridgeScheme,
    pub epochs: usize,
    pub m: usize,
    pub y0: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub factor: f64,
}

impl RateSpec {
    pub fn period(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("beta must lie in (0,1)"));
        }
        if self.epochs < 10 {
            return Err(Error::invalid("need at least 10 epochs"));
        }
        if self.n == 0 || !(self.h > 0.0) || !(self.c > 0.0) {
            return Err(Error::invalid("need N >= 1, h > 0, c > 0"));
        }
        if !(self.factor > 1.0 && self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(Error::invalid("sampling times need factor > 1 and 0 < t_min < t_max"));
        }
        Ok(())
    }

    /// Geometric times rounded to epoch ends, as driver indices.
    pub fn observation_indices(&self) -> Vec<usize> {
        let t = self.period();
        let mut out: Vec<usize> = Vec::new();
        let mut s = self.t_min;
        while s <= self.t_max * (1.0 + 1e-12) {
            let e = ((s / t).round() as usize).clamp(1, self.epochs);
            let idx = e * self.m;
            if out.last() != Some(&idx) {
                out.push(idx);
            }
            s *= self.factor;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub bound_log_rate: Vec<f64>,
    pub bound_holder: Option<Vec<f64>>,
    pub slope: f64,
    pub intercept: f64,
    pub c_alpha: Option<f64>,
    pub y_inf: Vec<f64>,
    pub period: f64,
    /// Schedule rate after rescaling to the bridge clock, cT.
    pub effective_c: f64,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        use crate::experiment::fmt_f64;
        let mut s = String::from("t,error,bound_log_rate,bound_holder\n");
        for k in 0..self.times.len() {
            let b2 = self.bound_holder.as_ref().map_or(String::new(), |b| fmt_f64(b[k]));
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(self.times[k]),
                fmt_f64(self.errors[k]),
                fmt_f64(self.bound_log_rate[k]),
                b2
            ));
        }
        s
    }
}

/// Ŵ for one replica: bridge from `key/bridge`, V from `key/drift`.
pub fn sample_ebm(spec: &RateSpec, dim: usize, key: &StreamKey) -> Result<EpochedPath> {
    let sampler = BridgeSampler::new(BridgeFamilySpec { scheme: spec.scheme.clone(), epochs: spec.epochs, m: spec.m })?;
    let x = sampler.sample(dim, &mut key.child("bridge").rng());
    let v = draw_v(dim, key);
    assemble_ebm(x, spec.period(), Some(v), &mut key.child("drift").rng())
}

fn draw_v(dim: usize, key: &StreamKey) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = key.child("drift").rng();
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Y_∞ − θ* for one replica; uses the same stream as `sample_ebm`.
pub fn limit_deviation(model: &LinRegModel, n: usize, h: f64, key: &StreamKey) -> Result<Vector> {
    let d = model.dim();
    let t = n as f64 * h;
    let grad = QuadraticGradient::new(model.kappa().clone(), model.theta_star().clone())?;
    let w_t = Vector::from_vec(draw_v(d, key)) * t.sqrt();
    Ok(equilibrium(&grad, &sme_sigma(model, h), t, &w_t)? - model.theta_star())
}

/// Sample covariance of Y_∞ − θ* over replicas against (σ_ε²/N)κ⁻¹.
pub fn limit_covariance(model: &LinRegModel, n: usize, h: f64, replicas: usize, key: &StreamKey) -> Result<(Mat, Mat)> {
    let d = model.dim();
    if replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let devs: Vec<Vector> = (0..replicas)
        .map(|r| limit_deviation(model, n, h, &key.child("replica").child(r)))
        .collect::<Result<_>>()?;
    let mut emp = Mat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let xs: Vec<f64> = devs.iter().map(|v| v[a]).collect();
            let ys: Vec<f64> = devs.iter().map(|v| v[b]).collect();
            emp[(a, b)] = stats::covariance(&xs, &ys).mean;
        }
    }
    let kinv = model.kappa().clone().try_inverse().ok_or_else(|| Error::numeric("singular kappa"))?;
    let target = kinv * (model.sigma_eps().powi(2) / n as f64);
    Ok((emp, target))
}

/// One path of the SGDo SME with polynomial schedule, errors |Y_t − Y_∞| at
/// geometric epoch ends and the log-rate and Hölder bounds.
pub fn sgdo_sme_experiment(model: &LinRegModel, spec: &RateSpec, key: &StreamKey) -> Result<RateReport> {
    spec.validate()?;
    let d = model.dim();
    check_dim(d, spec.y0.len())?;
    let t = spec.period();
    let path = sample_ebm(spec, d, key)?;
    let grad = QuadraticGradient::new(model.kappa().clone(), model.theta_star().clone())?;
    let sigma = sme_sigma(model, spec.h);
    let y_inf = equilibrium(&grad, &sigma, t, &Vector::from_vec(path.w_period()))?;
    let (lambda, l) = (grad.lambda(), grad.lipschitz());
    let problem = YdeProblem {
        gradient: grad,
        sigma: sigma.clone(),
        driver: path.w.clone(),
        schedule: Schedule::polynomial(spec.c, spec.beta)?,
        y0: Vector::from_vec(spec.y0.clone()),
    };
    let obs = spec.observation_indices();
    let states = solve_yde_observed(&problem, 1, &obs)?;
    let times: Vec<f64> = obs.iter().map(|&k| k as f64 * path.w.dt).collect();
    let errors: Vec<f64> = states.iter().map(|y| (y - &y_inf).norm()).collect();
    let sig_norm = linalg::eigen(&(&sigma * sigma.transpose())).eigenvalues.max().max(0.0).sqrt();
    let beta = spec.beta;
    let pre = t.powf(0.5 - beta) * sig_norm;
    let bound_log_rate = times
        .iter()
        .map(|&s| pre * (4.7 * l / lambda + 1.2) * spec.c.powf(-beta) * s.ln().max(0.0).sqrt() / s.powf(beta))
        .collect();
    let c_alpha = c_alpha(&path.x, spec.m, &spec.scheme, HOLDER_ALPHA);
    let bound_holder = c_alpha.map(|ca| {
        let k = l / lambda / (1.0 - 2f64.powf(-HOLDER_ALPHA)) + 1.0;
        times.iter().map(|&s| ca * pre * k / s.powf(beta)).collect()
    });
    let fit = stats::log_log_fit(&times, &errors).ok_or_else(|| Error::numeric("too few positive errors for a slope fit"))?;
    Ok(RateReport {
        times,
        errors,
        bound_log_rate,
        bound_holder,
        slope: fit.slope,
        intercept: fit.intercept,
        c_alpha,
        y_inf: y_inf.iter().copied().collect(),
        period: t,
        effective_c: spec.c * t,
    })
}
