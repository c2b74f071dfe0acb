//! Linear error terms, regime classification and Monte Carlo weak errors.

use serde::{Deserialize, Serialize};

use crate::exec::{map_replicas, Execution};
use crate::linalg::{self, Mat, Vector};
use crate::risk_models::{LinRegModel, QuadraticObjective};
use crate::rng::StreamKey;
use crate::sgd::sgd_final_excess_risk_d1;
use crate::sme::{expected_excess_risk, ScalarParams, SmeKind};
use crate::stats::{self, Estimate, LineFit};
use crate::{Error, Result};

/// Relative tolerance for regime boundaries and |LE| ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearErrorReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub le_ncc: f64,
    pub le_cc: f64,
    pub le_gf: f64,
    pub b_eq: f64,
    /// None when θ = θ* (a = 0).
    pub b_gf: Option<f64>,
    pub batch: f64,
}

impl LinearErrorReport {
    pub fn le(&self, kind: SmeKind) -> Option<f64> {
        match kind {
            SmeKind::Gf => Some(self.le_gf),
            SmeKind::Cc => Some(self.le_cc),
            SmeKind::Ncc => Some(self.le_ncc),
            SmeKind::Sgf2 => None,
        }
    }

    pub fn b_gf_minus_b_eq(&self) -> Option<f64> {
        self.b_gf.map(|g| g - self.b_eq)
    }

    /// Same terms for another batch size.
    pub fn with_batch(&self, batch: f64) -> Self {
        LinearErrorReport::from_abc(self.a, self.b, self.c, self.b_eq, batch)
    }

    fn from_abc(a: f64, b: f64, c: f64, b_eq: f64, batch: f64) -> Self {
        LinearErrorReport {
            a,
            b,
            c,
            le_ncc: -a,
            le_cc: -a + b / batch,
            le_gf: -a + b / batch + c / batch,
            b_eq,
            b_gf: (a > 0.0).then(|| (2.0 * b + c) / (2.0 * a)),
            batch,
        }
    }
}

/// a = ½T⟨κ³e^{−2Tκ}, (θ−θ*)⊗²⟩, b = 2aB^Eq, c = ¼σ_ε²⟨κ, I − e^{−2Tκ}⟩.
pub fn linear_error_terms(
    q: &QuadraticObjective,
    theta0: &Vector,
    t_end: f64,
    batch: f64,
    b_eq: f64,
    sigma_eps: f64,
) -> Result<LinearErrorReport> {
    crate::error::check_dim(q.dim(), theta0.len())?;
    if !(batch > 0.0) || !(t_end > 0.0) || b_eq < 0.0 {
        return Err(Error::invalid("need B > 0, T > 0, B^Eq >= 0"));
    }
    let d = theta0 - &q.theta_star;
    let k3 = linalg::sym_fn(&q.kappa, |l| l * l * l * (-2.0 * t_end * l).exp());
    let a = 0.5 * t_end * linalg::quad_form(&k3, &d);
    let b = 2.0 * a * b_eq;
    let n = q.dim();
    let rest = Mat::identity(n, n) - linalg::sym_fn(&q.kappa, |l| (-2.0 * t_end * l).exp());
    let c = 0.25 * sigma_eps * sigma_eps * linalg::frob_inner(&q.kappa, &rest);
    Ok(LinearErrorReport::from_abc(a, b, c, b_eq, batch))
}

/// B^GF = 2B^Eq + σ_ε²⟨κ, I − e^{−2Tκ}⟩ / (4T⟨κ³e^{−2Tκ}, (θ−θ*)⊗²⟩).
pub fn b_gf_direct(q: &QuadraticObjective, theta0: &Vector, t_end: f64, b_eq: f64, sigma_eps: f64) -> Option<f64> {
    let d = theta0 - &q.theta_star;
    let n = q.dim();
    let k3 = linalg::sym_fn(&q.kappa, |l| l * l * l * (-2.0 * t_end * l).exp());
    let den = 4.0 * t_end * linalg::quad_form(&k3, &d);
    if den <= 0.0 {
        return None;
    }
    let rest = Mat::identity(n, n) - linalg::sym_fn(&q.kappa, |l| (-2.0 * t_end * l).exp());
    Some(2.0 * b_eq + sigma_eps * sigma_eps * linalg::frob_inner(&q.kappa, &rest) / den)
}

pub const SIMPSON_PANELS: usize = 1024;

/// LE = ½∫_0^T ⟨κe^{−2(T−t)κ}, (Σ − D)(X_t^0)⟩dt − a, by composite Simpson.
pub fn linear_error_quadrature(
    q: &QuadraticObjective,
    theta0: &Vector,
    t_end: f64,
    sigma: impl Fn(&Vector) -> Mat,
    diffusion_cov: impl Fn(&Vector) -> Mat,
) -> Result<f64> {
    let report = linear_error_terms(q, theta0, t_end, 1.0, 0.0, 0.0)?;
    let e = linalg::eigen(&q.kappa);
    let n = SIMPSON_PANELS;
    let dt = t_end / n as f64;
    let f = |t: f64| {
        let flow = crate::sme::gradient_flow_exact(q, theta0, t).expect("dims checked");
        let w = e.eigenvalues.map(|l| l * (-2.0 * (t_end - t) * l).exp());
        let hess = &e.eigenvectors * Mat::from_diagonal(&w) * e.eigenvectors.transpose();
        linalg::frob_inner(&hess, &(sigma(&flow) - diffusion_cov(&flow)))
    };
    let mut acc = f(0.0) + f(t_end);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * dt);
    }
    Ok(0.5 * acc * dt / 3.0 - report.a)
}

/// Regime of the batch size relative to B^Eq, B^GF − B^Eq and B^GF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// (i) B < B^Eq
    BelowEq,
    /// (ii) B = B^Eq
    AtEq,
    /// (iii) B^Eq < B < B^GF − B^Eq
    Middle,
    /// B = B^GF − B^Eq
    AtGfMinusEq,
    /// (iv) B^GF − B^Eq < B < B^GF
    Upper,
    /// B = B^GF
    AtGf,
    /// (v) B > B^GF
    AboveGf,
    /// B^Eq = 0 (CC and NCC coincide), B below/at/above B^GF.
    NoKurtosisBelowGf,
    NoKurtosisAtGf,
    NoKurtosisAboveGf,
    /// θ = θ* or σ_ε = 0: ordering read off the |LE| values.
    Degenerate,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowEq => "(i)",
            Regime::AtEq => "(ii)",
            Regime::Middle => "(iii)",
            Regime::AtGfMinusEq => "(iii)/(iv) boundary",
            Regime::Upper => "(iv)",
            Regime::AtGf => "(iv)/(v) boundary",
            Regime::AboveGf => "(v)",
            Regime::NoKurtosisBelowGf => "B^Eq=0, B<B^GF",
            Regime::NoKurtosisAtGf => "B^Eq=0, B=B^GF",
            Regime::NoKurtosisAboveGf => "B^Eq=0, B>B^GF",
            Regime::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub regime: Regime,
    pub label: String,
    /// Tiers from worst to best; kinds inside a tier are equally good.
    pub ordering: Vec<Vec<SmeKind>>,
    /// (vi): LE(CC) = 0 at B = 2B^Eq.
    pub cc_second_order: bool,
    /// LE(GF) = 0 at B = 2(B^GF − B^Eq).
    pub gf_second_order: bool,
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= TIE_TOL * x.abs().max(y.abs())
}

fn cmp3(b: f64, thr: f64) -> std::cmp::Ordering {
    if close(b, thr) {
        std::cmp::Ordering::Equal
    } else {
        b.total_cmp(&thr)
    }
}

/// Tiers of {GF, CC, NCC} by |LE|, worst first, ties within TIE_TOL.
pub fn tiers_from_le(report: &LinearErrorReport) -> Vec<Vec<SmeKind>> {
    let mut v: Vec<(SmeKind, f64)> = [SmeKind::Gf, SmeKind::Cc, SmeKind::Ncc]
        .iter()
        .map(|&k| (k, report.le(k).unwrap().abs()))
        .collect();
    v.sort_by(|x, y| y.1.total_cmp(&x.1));
    let scale = v[0].1;
    let mut tiers: Vec<Vec<SmeKind>> = Vec::new();
    let mut last = f64::NAN;
    for (k, m) in v {
        if !tiers.is_empty() && (last - m).abs() <= TIE_TOL * scale {
            tiers.last_mut().unwrap().push(k);
        } else {
            tiers.push(vec![k]);
            last = m;
        }
    }
    tiers
}

pub fn classify_regime(batch: f64, report: &LinearErrorReport) -> RegimeClassification {
    use std::cmp::Ordering::*;
    use SmeKind::{Cc, Gf, Ncc};
    let r = report.with_batch(batch);
    let e = r.b_eq;
    let (regime, ordering) = match r.b_gf {
        Some(g) if r.c > 0.0 && e > 0.0 => {
            let g1 = g - e;
            match (cmp3(batch, e), cmp3(batch, g1), cmp3(batch, g)) {
                (Less, _, _) => (Regime::BelowEq, vec![vec![Gf], vec![Cc], vec![Ncc]]),
                (Equal, _, _) => (Regime::AtEq, vec![vec![Gf], vec![Cc, Ncc]]),
                (_, Less, _) => (Regime::Middle, vec![vec![Gf], vec![Ncc], vec![Cc]]),
                (_, Equal, _) => (Regime::AtGfMinusEq, vec![vec![Gf, Ncc], vec![Cc]]),
                (_, _, Less) => (Regime::Upper, vec![vec![Ncc], vec![Gf], vec![Cc]]),
                (_, _, Equal) => (Regime::AtGf, vec![vec![Ncc], vec![Gf, Cc]]),
                _ => (Regime::AboveGf, vec![vec![Ncc], vec![Cc], vec![Gf]]),
            }
        }
        Some(g) if r.c > 0.0 => match cmp3(batch, g) {
            Less => (Regime::NoKurtosisBelowGf, vec![vec![Gf], vec![Cc, Ncc]]),
            Equal => (Regime::NoKurtosisAtGf, vec![vec![Gf, Cc, Ncc]]),
            Greater => (Regime::NoKurtosisAboveGf, vec![vec![Cc, Ncc], vec![Gf]]),
        },
        _ => (Regime::Degenerate, tiers_from_le(&r)),
    };
    let cc_second_order = e > 0.0 && close(batch, 2.0 * e);
    let gf_second_order = r.b_gf.is_some_and(|g| close(batch, 2.0 * (g - e)));
    RegimeClassification { regime, label: regime.label().to_owned(), ordering, cc_second_order, gf_second_order }
}

/// Sign rule for b₁ < b₂: sgn(|−a + b₁/B| − |−a + b₂/B|) against sgn(B − (b₁ + b₂)/(2a)).
pub fn sign_rule(a: f64, b1: f64, b2: f64, batch: f64) -> (f64, f64) {
    let lhs = (-a + b1 / batch).abs() - (-a + b2 / batch).abs();
    let rhs = batch - (b1 + b2) / (2.0 * a);
    (sgn(lhs), sgn(rhs))
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact E[R^e(χ_n)] for d = 1 population SGD with constant schedule.
pub fn sgd_expected_excess_d1(p: &ScalarParams, h: f64, dev0: f64, steps: usize) -> f64 {
    let k = p.kappa;
    let mult = 1.0 - 2.0 * h * k + h * h * k * k * (p.kurt + p.batch - 1.0) / p.batch;
    let add = h * h * p.sigma_eps * p.sigma_eps * k / p.batch;
    let mut m = dev0 * dev0;
    for _ in 0..steps {
        m = m * mult + add;
    }
    0.5 * k * m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorPoint {
    pub h: f64,
    pub steps: usize,
    pub sgd_mean: f64,
    pub sgd_stderr: f64,
    pub sme_value: f64,
    /// (E R(χ) − E R(Y)) · scale.
    pub signed_error: f64,
    pub weak_error: f64,
    pub stderr: f64,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorCurve {
    pub kind: SmeKind,
    pub batch: usize,
    /// Errors are multiplied by this factor (1/κ).
    pub scale: f64,
    pub points: Vec<WeakErrorPoint>,
}

pub fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    let n = (t_end / h).round();
    if !(h > 0.0) || n < 1.0 || (n * h - t_end).abs() > 1e-9 * t_end {
        return Err(Error::invalid(format!("T/h is not a positive integer (T = {t_end}, h = {h})")));
    }
    Ok(n as usize)
}

/// Monte Carlo mean of R^e(χ_{T/h}) over `replicas` independent SGD runs
/// with fresh data; replica r uses stream key/"replica"/r.
#[allow(clippy::too_many_arguments)]
pub fn sgd_mean_excess_d1(
    model: &LinRegModel,
    batch: usize,
    t_end: f64,
    theta0: f64,
    h: f64,
    replicas: usize,
    key: &StreamKey,
    exec: Execution,
) -> Result<Estimate> {
    let sm = model.scalar_view()?;
    let steps = steps_for(t_end, h)?;
    if batch == 0 || replicas < 2 {
        return Err(Error::invalid("need B >= 1 and at least 2 replicas"));
    }
    let vals = map_replicas(exec, replicas, |r| {
        let mut rng = key.child("replica").child(r).rng();
        sgd_final_excess_risk_d1(&sm, theta0, h, batch, steps, &mut rng)
    });
    Ok(stats::batch_means(&vals, stats::DEFAULT_BATCHES))
}

/// Weak-error curves for several kinds sharing one SGD Monte Carlo per h.
#[allow(clippy::too_many_arguments)]
pub fn weak_error_curves(
    model: &LinRegModel,
    kinds: &[SmeKind],
    batch: usize,
    t_end: f64,
    theta0: f64,
    h_list: &[f64],
    replicas: usize,
    key: &StreamKey,
    exec: Execution,
) -> Result<Vec<WeakErrorCurve>> {
    let p = ScalarParams::from_model(model, batch as f64)?;
    let ts = model.theta_star()[0];
    let re0 = 0.5 * p.kappa * (theta0 - ts) * (theta0 - ts);
    let scale = 1.0 / p.kappa;
    let mut curves: Vec<WeakErrorCurve> =
        kinds.iter().map(|&kind| WeakErrorCurve { kind, batch, scale, points: Vec::new() }).collect();
    for (i, &h) in h_list.iter().enumerate() {
        let steps = steps_for(t_end, h)?;
        let est = sgd_mean_excess_d1(model, batch, t_end, theta0, h, replicas, &key.child("h").child(i), exec)?;
        for c in curves.iter_mut() {
            let sme = expected_excess_risk(c.kind, &p, h, t_end, re0)?;
            let signed = (est.mean - sme) * scale;
            c.points.push(WeakErrorPoint {
                h,
                steps,
                sgd_mean: est.mean,
                sgd_stderr: est.stderr,
                sme_value: sme,
                signed_error: signed,
                weak_error: signed.abs(),
                stderr: est.stderr * scale,
                replicas,
            });
        }
    }
    Ok(curves)
}

#[allow(clippy::too_many_arguments)]
pub fn weak_error_curve(
    model: &LinRegModel,
    kind: SmeKind,
    batch: usize,
    t_end: f64,
    theta0: f64,
    h_list: &[f64],
    replicas: usize,
    key: &StreamKey,
    exec: Execution,
) -> Result<WeakErrorCurve> {
    Ok(weak_error_curves(model, &[kind], batch, t_end, theta0, h_list, replicas, key, exec)?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: usize,
    /// h values dropped for nonpositive error.
    pub excluded: Vec<f64>,
}

pub fn slope_fit(curve: &WeakErrorCurve) -> Result<SlopeFit> {
    let hs: Vec<f64> = curve.points.iter().map(|p| p.h).collect();
    let es: Vec<f64> = curve.points.iter().map(|p| p.weak_error).collect();
    slope_fit_points(&hs, &es)
}

pub fn slope_fit_points(hs: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (&h, &e) in hs.iter().zip(errors) {
        if e > 0.0 && e.is_finite() {
            xs.push(h);
            ys.push(e);
        } else {
            eprintln!("warning: dropping h = {h} with error {e} from slope fit");
            excluded.push(h);
        }
    }
    if xs.len() < 3 {
        return Err(Error::invalid("slope fit needs at least 3 positive errors"));
    }
    let LineFit { slope, intercept } =
        stats::log_log_fit(&xs, &ys).ok_or_else(|| Error::numeric("degenerate slope fit"))?;
    Ok(SlopeFit { slope, intercept, used: xs.len(), excluded })
}
