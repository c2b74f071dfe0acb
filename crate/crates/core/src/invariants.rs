//! Structural checks shared by the property tests and the acceptance
//! runner. Each returns `Err(description)` on the first violation.

use crate::epoched_noise::{BridgeFamilySpec, BridgeSampler, BridgeScheme};
use crate::error_analysis::{linear_error_terms, sign_rule};
use crate::exec::{map_replicas, Execution};
use crate::linalg::{Mat, Vector};
use crate::permutons::{sample_jpermutation, Copula, EmpiricalPermuton, PermutonMode};
use crate::risk_models::{FeatureLaw, LinRegModel, QuadraticObjective};
use crate::rng::StreamKey;
use crate::sgd::{is_permutation, make_permutation_sequence, ShufflingScheme};
use crate::weak_limits::{build_shuffled_walk_from, build_tilde_walk_from, phi_loop, psi_concat, IncrementLaw};

pub type Check = std::result::Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Every epoch permutation is a bijection and epoch 0 is the identity.
pub fn permutation_sequence(scheme: &ShufflingScheme, n: usize, epochs: usize, seed: u64) -> Check {
    let perms = make_permutation_sequence(scheme, n, epochs, &mut StreamKey::new(seed).rng()).map_err(|e| e.to_string())?;
    ensure(perms.len() == epochs, || format!("{} permutations for {epochs} epochs", perms.len()))?;
    for (j, p) in perms.iter().enumerate() {
        ensure(p.len() == n && is_permutation(p), || format!("epoch {j} is not a bijection"))?;
    }
    if let Some(p0) = perms.first() {
        ensure(p0.iter().enumerate().all(|(k, &v)| k == v), || "epoch 0 is not the identity".into())?;
    }
    Ok(())
}

/// Uniform margins, Fréchet bounds and 2-increasingness of the (i, j)
/// margin on a res × res grid.
pub fn copula_pair(c: &Copula, i: usize, j: usize, res: usize) -> Check {
    let tol = 1e-12;
    let g = |a: usize| a as f64 / res as f64;
    let f = |s: f64, t: f64| c.eval_pair(i, j, s, t).map_err(|e| e.to_string());
    for a in 0..=res {
        let s = g(a);
        ensure((f(s, 1.0)? - s).abs() <= tol && (f(1.0, s)? - s).abs() <= tol, || format!("margin fails at {s}"))?;
        ensure(f(s, 0.0)?.abs() <= tol && f(0.0, s)?.abs() <= tol, || format!("groundedness fails at {s}"))?;
    }
    for a in 0..res {
        for b in 0..res {
            let (s0, s1, t0, t1) = (g(a), g(a + 1), g(b), g(b + 1));
            let v = f(s1, t1)?;
            let lo = (s1 + t1 - 1.0).max(0.0);
            ensure(v >= lo - tol && v <= s1.min(t1) + tol, || format!("Fréchet bounds fail at ({s1}, {t1}): {v}"))?;
            let vol = v - f(s0, t1)? - f(s1, t0)? + f(s0, t0)?;
            ensure(vol >= -tol, || format!("negative rectangle mass {vol} at ({s0}, {t0})"))?;
        }
    }
    Ok(())
}

/// Shared endpoint of the shuffled walk, integer zeros of X̃ and
/// (Ψ∘Φ)(X^N) = X̃^N samplewise.
pub fn walk_identities(law: IncrementLaw, n: usize, epochs: usize, seed: u64) -> Check {
    let key = StreamKey::new(seed);
    let perms = make_permutation_sequence(&ShufflingScheme::RandomReshuffle, n, epochs, &mut key.child("perm").rng())
        .map_err(|e| e.to_string())?;
    let z = law.draw(n, &mut key.child("z").rng());
    let jp = crate::permutons::JPermutation::new(perms.clone()).map_err(|e| e.to_string())?;
    let walk = build_shuffled_walk_from(z.clone(), jp).map_err(|e| e.to_string())?;
    let end = walk.values[0][n];
    ensure(walk.values.iter().all(|v| v[0] == 0.0 && v[n] == end), || "walk endpoints differ".into())?;
    let tilde = build_tilde_walk_from(&z, &perms).map_err(|e| e.to_string())?;
    for e in 0..=epochs {
        ensure(tilde[e * n].abs() <= 1e-9, || format!("X̃ at integer {e} is {}", tilde[e * n]))?;
    }
    let loops: Vec<Vec<f64>> = walk.values.iter().map(|v| phi_loop(v)).collect();
    let psi = psi_concat(&loops).map_err(|e| e.to_string())?;
    let gap = psi.iter().zip(&tilde).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(psi.len() == tilde.len() && gap <= 1e-10, || format!("Ψ∘Φ identity off by {gap}"))
}

/// ‖F_{μ_σ} − F_{μ̂_σ}‖∞ ≤ J/N on the cell-midpoint grid {(k + ½)/res}^J.
pub fn smoothing_bound(j: usize, n: usize, res: usize, seed: u64) -> Check {
    let jp = sample_jpermutation(&Copula::Independence, n, j, &mut StreamKey::new(seed).rng()).map_err(|e| e.to_string())?;
    let gap = smoothing_gap(&jp, res)?;
    ensure(gap <= j as f64 / n as f64 + 1e-12, || format!("smoothing gap {gap} > J/N = {}", j as f64 / n as f64))
}

pub fn smoothing_gap(jp: &crate::permutons::JPermutation, res: usize) -> std::result::Result<f64, String> {
    let j = jp.j();
    let smooth = EmpiricalPermuton::new(jp.clone(), PermutonMode::Smoothed);
    let point = EmpiricalPermuton::new(jp.clone(), PermutonMode::PointMass);
    let idx: Vec<usize> = (0..j).collect();
    let mut worst: f64 = 0.0;
    let total = (res as u64).pow(j as u32);
    let mut t = vec![0.0; j];
    for code in 0..total {
        let mut c = code;
        for v in t.iter_mut() {
            *v = ((c % res as u64) as f64 + 0.5) / res as f64;
            c /= res as u64;
        }
        let a = smooth.cdf(&t, &idx).map_err(|e| e.to_string())?;
        let b = point.cdf(&t, &idx).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Q·Q = S(θ) for the gradient-covariance square root.
pub fn sqrt_multiply_back(model: &LinRegModel, theta: &Vector) -> Check {
    let s = model.gradient_covariance(theta).map_err(|e| e.to_string())?;
    let q = model.sqrt_gradient_covariance(theta).map_err(|e| e.to_string())?;
    let err = (&q * &q - &s).amax();
    ensure(err <= 1e-9 * s.amax().max(1.0), || format!("√S·√S − S has entry {err}"))
}

/// SS epochs bitwise equal; flip-flop odd epochs are reflections.
pub fn bridge_structure(scheme: &BridgeScheme, m: usize, epochs: usize, seed: u64) -> Check {
    let sampler = BridgeSampler::new(BridgeFamilySpec { scheme: scheme.clone(), epochs, m }).map_err(|e| e.to_string())?;
    let x = sampler.sample(1, &mut StreamKey::new(seed).rng());
    let ep = |e: usize| -> Vec<f64> { (0..=m).map(|k| x.get(e * m + k, 0)).collect() };
    for e in 0..=epochs {
        ensure(x.get(e * m, 0) == 0.0, || format!("bridge not pinned at {e}"))?;
    }
    for e in 1..epochs {
        let (a, b) = (ep(e - 1), ep(e));
        let ok = match scheme {
            BridgeScheme::SingleShuffle => a == b,
            BridgeScheme::FlipflopSingle => b == crate::epoched_noise::reflect(&a),
            BridgeScheme::FlipflopRandom if e % 2 == 1 => b == crate::epoched_noise::reflect(&a),
            _ => true,
        };
        ensure(ok, || format!("epoch {e} breaks the {scheme:?} structure"))?;
    }
    Ok(())
}

/// sgn(|LE_1| − |LE_2|) = sgn(b_2 − b_1)·sgn(B − (b_1 + b_2)/(2a)) for
/// LE_k = −a + b_k/B, a > 0.
pub fn regime_sign_rule(a: f64, b1: f64, b2: f64, batch: f64) -> Check {
    if a <= 0.0 || b1 == b2 {
        return Ok(());
    }
    let (lhs, rhs) = sign_rule(a, b1, b2, batch);
    ensure(lhs == rhs * (b2 - b1).signum(), || format!("sign rule fails: {lhs} vs {rhs}"))
}

/// Linear error terms are finite, a, c ≥ 0 and LE_NCC = −a.
pub fn linear_error_shape(kappa: f64, theta0: f64, t_end: f64, b_eq: f64, sigma: f64) -> Check {
    let q = QuadraticObjective::new(Mat::from_element(1, 1, kappa), Vector::zeros(1), 0.0).map_err(|e| e.to_string())?;
    let r = linear_error_terms(&q, &Vector::from_element(1, theta0), t_end, 1.0, b_eq, sigma).map_err(|e| e.to_string())?;
    ensure(r.a >= 0.0 && r.c >= 0.0 && r.le_ncc == -r.a, || format!("bad linear error terms {r:?}"))
}

/// Same seed ⇒ same draws; sequential and parallel replica maps agree.
pub fn determinism(seed: u64) -> Check {
    let model = LinRegModel::scalar(1.0, -1.0, 1.0, FeatureLaw::Gaussian).map_err(|e| e.to_string())?;
    let key = StreamKey::new(seed);
    let f = |r: usize| {
        let sm = model.scalar_view().expect("scalar model");
        crate::sgd::sgd_final_excess_risk_d1(&sm, 0.0, 0.1, 2, 5, &mut key.child(r).rng())
    };
    let a = map_replicas(Execution::Sequential, 64, f);
    let b = map_replicas(Execution::Parallel, 64, f);
    let c = map_replicas(Execution::Parallel, 64, f);
    ensure(a == b && b == c, || "replica maps are not reproducible".into())
}
