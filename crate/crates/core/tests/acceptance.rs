//! Acceptance runner: one PASS/FAIL line per criterion, details indented.
//! Pass criterion numbers as arguments to run a subset.

use std::time::Instant;

use smelab::epoched_noise::{empirical_cross_covariance, BridgeFamilySpec, BridgeSampler, BridgeScheme, GridPath};
use smelab::error_analysis::{classify_regime, linear_error_terms, slope_fit, weak_error_curves, WeakErrorCurve};
use smelab::exec::map_replicas;
use smelab::experiment::{settings_table, SettingRow};
use smelab::invariants as inv;
use smelab::linalg::{Mat, Vector};
use smelab::permutons::{permuton_ks, sample_jpermutation, ArchimedeanFamily, Copula, EmpiricalPermuton, PermutonMode};
use smelab::risk_models::{FeatureLaw, LinRegModel};
use smelab::sgd::{Schedule, ShufflingScheme};
use smelab::sme::{em_terminal_excess_d1, expected_excess_risk, ScalarParams, SmeKind, SmeSpec};
use smelab::stats;
use smelab::weak_limits::{covariance_check, IncrementLaw, PermSource};
use smelab::young::{
    limit_covariance, linear_yde_oracle, reduce_to_bridge_form, sample_ebm, sgdo_sme_experiment, sme_sigma,
    solve_yde, QuadraticGradient, RateSpec, YdeProblem,
};
use smelab::{Execution, StreamKey};

const SEED: u64 = 20_240_917;
const Z_BAND: f64 = 3.0;
const EXEC: Execution = Execution::Parallel;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Verdict { pass, summary: summary.into(), details }
    }
}

type Criterion = (usize, &'static str, fn() -> Verdict);

fn fail(msg: String) -> Verdict {
    Verdict::new(false, msg, Vec::new())
}

fn setting_model(r: &SettingRow) -> LinRegModel {
    r.model().build().expect("table rows are valid models")
}

/// Equal after rounding both to `digits` significant digits.
fn same_sig(x: f64, paper: f64, digits: usize) -> bool {
    format!("{:.*e}", digits - 1, x) == format!("{:.*e}", digits - 1, paper)
}

// 1. regime thresholds ---------------------------------------------------

const C1_DIGITS: usize = 5;
const C1_SECONDS: f64 = 1.0;

fn c1() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for r in settings_table() {
        let m = setting_model(&r);
        let b_eq = m.b_eq().unwrap();
        let rep = linear_error_terms(&m.objective(), &Vector::from_element(1, r.theta0), r.t_end, r.batch as f64, b_eq, 1.0)
            .unwrap();
        let g = rep.b_gf.unwrap_or(f64::NAN);
        let row_ok = same_sig(b_eq, r.b_eq, C1_DIGITS)
            && same_sig(g - b_eq, r.b_gf_minus_b_eq, C1_DIGITS)
            && same_sig(g, r.b_gf, C1_DIGITS);
        ok &= row_ok;
        details.push(format!(
            "({}) B^Eq {b_eq:.6} / B^GF-B^Eq {:.6} / B^GF {g:.6}  table {} / {} / {}  {}",
            r.nr,
            g - b_eq,
            r.b_eq,
            r.b_gf_minus_b_eq,
            r.b_gf,
            if row_ok { "match" } else { "MISMATCH" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C1_SECONDS, format!("six rows to {C1_DIGITS} significant digits, {secs:.3}s"), details)
}

// 2. closed form vs Euler–Maruyama ----------------------------------------

const C2_REPLICAS: usize = 100_000;
const C2_DT: f64 = 2e-3;
const C2_H: f64 = 0.1;
const C2_T: f64 = 0.5;
const C2_SECONDS: f64 = 120.0;

fn c2() -> Verdict {
    let start = Instant::now();
    let row = settings_table()[1];
    let model = setting_model(&row);
    let batch = row.batch as f64;
    let p = ScalarParams::from_model(&model, batch).unwrap();
    let re0 = 0.5 * p.kappa * (row.theta0 + 1.0).powi(2);
    let key = StreamKey::new(SEED).child("c2");
    let mut ok = true;
    let mut details = Vec::new();
    for kind in [SmeKind::Cc, SmeKind::Ncc, SmeKind::Sgf2] {
        let spec = SmeSpec::new(kind, model.clone(), batch, C2_H).unwrap();
        let k = key.child(kind.name());
        let vals = map_replicas(EXEC, C2_REPLICAS, |r| {
            em_terminal_excess_d1(&spec, row.theta0, C2_T, C2_DT, &mut k.child(r).rng()).unwrap()
        });
        let mean = stats::mean(&vals);
        let se = (stats::variance(&vals) / vals.len() as f64).sqrt();
        let exact = expected_excess_risk(kind, &p, C2_H, C2_T, re0).unwrap();
        let z = (mean - exact) / se;
        ok &= z.abs() <= Z_BAND;
        details.push(format!("{kind}: MC {mean:.6} ± {se:.2e}  closed form {exact:.6}  z = {z:+.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C2_SECONDS, format!("CC/NCC/SGF2 within {Z_BAND} SE, {secs:.1}s"), details)
}

// 3. weak-error slopes ----------------------------------------------------

const C3_REPLICAS: usize = 1_000_000;
const C3_H: [f64; 4] = [0.5, 0.25, 0.1, 0.05];
const C3_SLOPE: (f64, f64) = (0.7, 1.3);
const C3_SECOND_ORDER: f64 = 1.6;
const C3_ORDER_H: f64 = 0.1;
const C3_SECONDS: f64 = 1800.0;

fn curve(curves: &[WeakErrorCurve], kind: SmeKind) -> &WeakErrorCurve {
    curves.iter().find(|c| c.kind == kind).unwrap()
}

fn c3() -> Verdict {
    let start = Instant::now();
    let key = StreamKey::new(SEED).child("c3");
    let kinds = [SmeKind::Gf, SmeKind::Cc, SmeKind::Ncc, SmeKind::Sgf2];
    let table = settings_table();
    let mut all = Vec::new();
    for r in &table {
        let model = setting_model(r);
        let curves =
            weak_error_curves(&model, &kinds, r.batch, r.t_end, r.theta0, &C3_H, C3_REPLICAS, &key.child(r.nr), EXEC).unwrap();
        all.push(curves);
    }
    let mut details = Vec::new();
    for (r, curves) in table.iter().zip(&all) {
        for c in curves {
            let errs: Vec<String> =
                c.points.iter().map(|p| format!("{:.2e}±{:.1e}", p.signed_error, p.stderr)).collect();
            details.push(format!("({}) {:<4} signed errors/κ at h={C3_H:?}: {}", r.nr, c.kind.name(), errs.join(" ")));
        }
    }

    // (a) setting 5 slopes
    let mut a_ok = true;
    for kind in [SmeKind::Gf, SmeKind::Cc, SmeKind::Ncc] {
        match slope_fit(curve(&all[4], kind)) {
            Ok(f) => {
                let ok = f.slope >= C3_SLOPE.0 && f.slope <= C3_SLOPE.1;
                a_ok &= ok;
                details.push(format!("(a) setting 5 {kind} slope {:.3} in {C3_SLOPE:?}: {}", f.slope, ok));
            }
            Err(e) => {
                a_ok = false;
                details.push(format!("(a) setting 5 {kind} slope unavailable: {e}"));
            }
        }
    }

    // (b) CC at B = 2B^Eq
    let mut b_ok = true;
    for idx in [3usize, 5] {
        let c = curve(&all[idx], SmeKind::Cc);
        let slope = slope_fit(c).map(|f| f.slope).unwrap_or(f64::NAN);
        let zero = c.points.iter().filter(|p| p.h <= 0.1 + 1e-12).all(|p| p.weak_error <= Z_BAND * p.stderr);
        let ok = slope >= C3_SECOND_ORDER || zero;
        b_ok &= ok;
        details.push(format!(
            "(b) setting {} CC slope {slope:.3} (>= {C3_SECOND_ORDER}) or zero within {Z_BAND} SE at h<=0.1: {zero} -> {ok}",
            table[idx].nr
        ));
    }

    // (c) ordering at h = 0.1
    let mut c_ok = true;
    for (r, curves) in table.iter().zip(&all).take(5) {
        let model = setting_model(r);
        let rep = linear_error_terms(
            &model.objective(),
            &Vector::from_element(1, r.theta0),
            r.t_end,
            r.batch as f64,
            model.b_eq().unwrap(),
            1.0,
        )
        .unwrap();
        let cls = classify_regime(r.batch as f64, &rep);
        let at = |k: SmeKind| {
            let p = curve(curves, k).points.iter().find(|p| (p.h - C3_ORDER_H).abs() < 1e-12).unwrap();
            (p.weak_error, p.stderr)
        };
        let mut ok = true;
        let mut violations = Vec::new();
        for (ti, tier) in cls.ordering.iter().enumerate() {
            for (tj, other) in cls.ordering.iter().enumerate().skip(ti) {
                for (xi, &x) in tier.iter().enumerate() {
                    for (yi, &y) in other.iter().enumerate() {
                        if x == y || (ti == tj && xi > yi) {
                            continue;
                        }
                        let ((ex, sx), (ey, sy)) = (at(x), at(y));
                        let band = Z_BAND * (sx * sx + sy * sy).sqrt();
                        let good = if ti == tj { (ex - ey).abs() <= band } else { ex > ey || (ex - ey).abs() <= band };
                        if !good {
                            ok = false;
                            let rel = if ti == tj { "≃" } else { "worse than" };
                            violations.push(format!("{x} {rel} {y}: {ex:.3e} vs {ey:.3e} (band {band:.1e})"));
                        }
                    }
                }
            }
        }
        c_ok &= ok;
        let tiers: Vec<String> = cls.ordering.iter().map(|t| format!("{t:?}")).collect();
        details.push(format!(
            "(c) setting {} regime {} worst->best {}: {}{}",
            r.nr,
            cls.label,
            tiers.join(" > "),
            if ok { "match" } else { "VIOLATED " },
            violations.join("; ")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        a_ok && b_ok && c_ok && secs < C3_SECONDS,
        format!("(a) {} (b) {} (c) {}, M = {C3_REPLICAS}, {secs:.0}s", pf(a_ok), pf(b_ok), pf(c_ok)),
        details,
    )
}

fn pf(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

// 4. permuton convergence -------------------------------------------------

const C4_N: [usize; 4] = [64, 256, 1024, 4096];
const C4_SEEDS: usize = 100;
const C4_MIN_WITHIN: usize = 95;
const C4_RES: usize = 64;
const C4_SECONDS: f64 = 300.0;

fn c4() -> Verdict {
    let start = Instant::now();
    let j = 2;
    let mut ok = true;
    let mut details = Vec::new();
    for family in [ArchimedeanFamily::Clayton, ArchimedeanFamily::Gumbel] {
        let c = Copula::Archimedean { family, theta: 2.0 };
        let key = StreamKey::new(SEED).child("c4").child(format!("{family:?}"));
        let mut medians = Vec::new();
        let mut within = 0;
        for &n in &C4_N {
            let ks = map_replicas(EXEC, C4_SEEDS, |s| {
                let jp = sample_jpermutation(&c, n, j, &mut key.child(n).child(s).rng()).unwrap();
                permuton_ks(&EmpiricalPermuton::new(jp, PermutonMode::Smoothed), &c, (0, 1), C4_RES).unwrap()
            });
            medians.push(stats::median(&ks));
            if n == 4096 {
                let bound = 4.0 * j as f64 * (n as f64).powf(-0.25);
                within = ks.iter().filter(|&&k| k <= bound).count();
            }
        }
        let mono = medians.windows(2).all(|w| w[1] < w[0]);
        let fam_ok = mono && within >= C4_MIN_WITHIN;
        ok &= fam_ok;
        details.push(format!(
            "{family:?}(2): median KS over N={C4_N:?}: {:.4?}, decreasing {mono}; {within}/{C4_SEEDS} within 4J·N^(-1/4) at N=4096",
            medians
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C4_SECONDS, format!("Clayton/Gumbel KS, {secs:.1}s"), details)
}

// 5. exact smoothing bound ------------------------------------------------

const C5_PERMS: usize = 100;
const C5_SECONDS: f64 = 60.0;

fn c5_res(j: usize) -> usize {
    match j {
        2 => 128,
        3 => 16,
        _ => 4,
    }
}

fn c5() -> Verdict {
    let start = Instant::now();
    let key = StreamKey::new(SEED).child("c5");
    let mut ok = true;
    let mut details = Vec::new();
    for j in [2usize, 3, 5] {
        for n in [4usize, 16, 128] {
            let gaps = map_replicas(EXEC, C5_PERMS, |r| {
                let jp = sample_jpermutation(&Copula::Independence, n, j, &mut key.child(j).child(n).child(r).rng()).unwrap();
                inv::smoothing_gap(&jp, c5_res(j)).unwrap()
            });
            let worst = gaps.iter().copied().fold(0.0, f64::max);
            let bound = j as f64 / n as f64;
            ok &= worst <= bound;
            details.push(format!("J={j} N={n:<3} midpoint grid {}^{j}: max gap {worst:.4} <= J/N = {bound:.4}", c5_res(j)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C5_SECONDS, format!("{C5_PERMS} permutations per (J, N), {secs:.1}s"), details)
}

// 6. scaling-limit covariance ---------------------------------------------

const C6_N: usize = 2048;
const C6_REPLICAS: usize = 20_000;
const C6_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const C6_SECONDS: f64 = 600.0;

fn c6() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for copula in [Copula::Comonotone, Copula::Independence, Copula::Countermonotone] {
        for law in [IncrementLaw::Gaussian, IncrementLaw::Rademacher] {
            let key = StreamKey::new(SEED).child("c6").child(format!("{copula:?}")).child(format!("{law:?}"));
            let rep =
                covariance_check(law, &copula, C6_N, C6_REPLICAS, &C6_GRID, (0, 1), &PermSource::Resample, &key, EXEC)
                    .unwrap();
            let z = rep.max_abs_z();
            ok &= z <= Z_BAND;
            details.push(format!("{copula:?} / {law:?}: max |z| over 25 points = {z:.2}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C6_SECONDS, format!("N = {C6_N}, M = {C6_REPLICAS}, {secs:.1}s"), details)
}

// 7. epoched-bridge covariance --------------------------------------------

const C7_REPLICAS: usize = 20_000;
const C7_EPOCHS: usize = 4;
const C7_M: usize = 16;
const C7_GRID: [usize; 5] = [2, 5, 8, 11, 14];
const C7_SECONDS: f64 = 300.0;

fn epoch(p: &GridPath, e: usize) -> Vec<f64> {
    (0..=C7_M).map(|k| p.get(e * C7_M + k, 0)).collect()
}

fn c7() -> Verdict {
    let start = Instant::now();
    let pts: Vec<(f64, f64)> = C7_GRID
        .iter()
        .flat_map(|&a| C7_GRID.iter().map(move |&b| (a as f64 / C7_M as f64, b as f64 / C7_M as f64)))
        .collect();
    let mut ok = true;
    let mut details = Vec::new();
    for scheme in [
        BridgeScheme::SingleShuffle,
        BridgeScheme::RandomReshuffle,
        BridgeScheme::FlipflopSingle,
        BridgeScheme::FlipflopRandom,
    ] {
        let sampler = BridgeSampler::new(BridgeFamilySpec { scheme: scheme.clone(), epochs: C7_EPOCHS, m: C7_M }).unwrap();
        let key = StreamKey::new(SEED).child("c7").child(format!("{scheme:?}"));
        let paths = map_replicas(EXEC, C7_REPLICAS, |r| sampler.sample(1, &mut key.child(r).rng()));
        let mut zmax: f64 = 0.0;
        for pair in [(0, 1), (1, 2)] {
            for e in empirical_cross_covariance(&paths, pair, &pts, &scheme).unwrap() {
                zmax = zmax.max(e.z_score().abs());
            }
        }
        let structure = paths.iter().all(|p| {
            (1..C7_EPOCHS).all(|e| {
                let (a, b) = (epoch(p, e - 1), epoch(p, e));
                let refl: Vec<f64> = a.iter().rev().map(|v| -v).collect();
                match scheme {
                    BridgeScheme::SingleShuffle => a == b,
                    BridgeScheme::FlipflopSingle => b == refl,
                    BridgeScheme::FlipflopRandom if e % 2 == 1 => b == refl,
                    _ => true,
                }
            })
        });
        let s_ok = zmax <= Z_BAND && structure;
        ok &= s_ok;
        details.push(format!(
            "{scheme:?}: max |z| over pairs (0,1),(1,2) x 25 points = {zmax:.2}; samplewise epoch structure {structure}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < C7_SECONDS, format!("M = {C7_REPLICAS}, J = {C7_EPOCHS}, m = {C7_M}, {secs:.1}s"), details)
}

// 8. Young solver vs variation of constants --------------------------------

const C8_M: usize = 4096;
const C8_EPOCHS: usize = 4;
const C8_TOL: f64 = 1e-3;
const C8_SECONDS: f64 = 60.0;

fn c8() -> Verdict {
    let start = Instant::now();
    let kappa = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 3.0]));
    let theta = Vector::from_vec(vec![0.5, 0.0]);
    let schedule = Schedule::polynomial(1.0, 0.75).unwrap();
    let sampler =
        BridgeSampler::new(BridgeFamilySpec { scheme: BridgeScheme::RandomReshuffle, epochs: C8_EPOCHS, m: C8_M }).unwrap();
    let driver = sampler.sample(2, &mut StreamKey::new(SEED).child("c8").rng());
    let p = YdeProblem {
        gradient: QuadraticGradient::new(kappa.clone(), theta.clone()).unwrap(),
        sigma: Mat::identity(2, 2),
        driver: driver.clone(),
        schedule,
        y0: Vector::from_vec(vec![1.0, -1.0]),
    };
    let oracle = linear_yde_oracle(&kappa, &(&kappa * &theta), &p.sigma, &driver, &schedule, &p.y0).unwrap();
    let mut errs = Vec::new();
    for stride in [1usize, 2, 4] {
        let sol = solve_yde(&p, stride).unwrap();
        let e = sol.values.iter().enumerate().map(|(k, v)| (v - &oracle.values[k * stride]).amax()).fold(0.0, f64::max);
        errs.push(e);
    }
    let ok = errs[0] <= C8_TOL && errs[2] > errs[1] && errs[1] > errs[0];
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        ok && secs < C8_SECONDS,
        format!("sup error at m = {C8_M}: {:.2e} (<= {C8_TOL:e}); {secs:.2}s", errs[0]),
        vec![format!("sup error at strides 1, 2, 4: {:.3e}, {:.3e}, {:.3e}", errs[0], errs[1], errs[2])],
    )
}

// 9. SGDo SME convergence rate -------------------------------------------

const C9_PATHS: usize = 10;
const C9_MIN_IN: usize = 8;
const C9_SLOPE: (f64, f64) = (-0.95, -0.55);
const C9_LIMIT_REPLICAS: usize = 1000;
const C9_LIMIT_REL: f64 = 0.10;
const C9_SECONDS: f64 = 900.0;

fn c9_spec() -> RateSpec {
    RateSpec {
        n: 1000,
        h: 1e-3,
        beta: 0.75,
        c: 1.0,
        scheme: BridgeScheme::SingleShuffle,
        epochs: 10_000,
        m: 1024,
        y0: vec![0.5],
        t_min: 100.0,
        t_max: 10_000.0,
        factor: 1.2,
    }
}

fn c9() -> Verdict {
    let start = Instant::now();
    let model = LinRegModel::scalar(2.0, 0.0, 1.0, FeatureLaw::Gaussian).unwrap();
    let spec = c9_spec();
    let key = StreamKey::new(SEED).child("c9");
    // paths are ~10^7 grid points each; solved one at a time to bound memory
    let reports = map_replicas(Execution::Sequential, C9_PATHS, |r| {
        sgdo_sme_experiment(&model, &spec, &key.child("replica").child(r)).unwrap()
    });
    let slopes: Vec<f64> = reports.iter().map(|r| r.slope).collect();
    let inside = slopes.iter().filter(|&&s| s >= C9_SLOPE.0 && s <= C9_SLOPE.1).count();
    let (emp, target) = limit_covariance(&model, spec.n, spec.h, C9_LIMIT_REPLICAS, &key.child("limit")).unwrap();
    let rel = emp[(0, 0)] / target[(0, 0)] - 1.0;
    let ok = inside >= C9_MIN_IN && rel.abs() <= C9_LIMIT_REL;
    let secs = start.elapsed().as_secs_f64();
    let last = &reports[0];
    Verdict::new(
        ok && secs < C9_SECONDS,
        format!("{inside}/{C9_PATHS} slopes in {C9_SLOPE:?}; limit variance off by {:+.1}%; {secs:.0}s", 100.0 * rel),
        vec![
            format!("slopes: {:.3?}", slopes),
            format!("limit variance {:.4e} vs (σ_ε²/N)/κ = {:.4e}", emp[(0, 0)], target[(0, 0)]),
            format!(
                "path 0: C_α = {:.3}, error at t = {:.0}: {:.3e}, bounds {:.3e} / {:.3e}",
                last.c_alpha.unwrap_or(f64::NAN),
                last.times.last().unwrap(),
                last.errors.last().unwrap(),
                last.bound_log_rate.last().unwrap(),
                last.bound_holder.as_ref().map_or(f64::NAN, |b| *b.last().unwrap())
            ),
        ],
    )
}

// 10. structural invariants ----------------------------------------------

const C10_SECONDS: f64 = 300.0;

fn c10() -> Verdict {
    let start = Instant::now();
    let key = StreamKey::new(SEED).child("c10");
    let mut checks: Vec<(String, inv::Check)> = Vec::new();
    let mut push = |name: String, r: inv::Check| checks.push((name, r));

    let schemes = [
        ShufflingScheme::SingleShuffle,
        ShufflingScheme::RandomReshuffle,
        ShufflingScheme::FlipflopSingle,
        ShufflingScheme::FlipflopRandom,
        ShufflingScheme::PermutonDriven { copula: Copula::Archimedean { family: ArchimedeanFamily::Clayton, theta: 2.0 } },
        ShufflingScheme::PermutonDriven { copula: Copula::Independence },
    ];
    for (si, s) in schemes.iter().enumerate() {
        for n in [1usize, 2, 7, 100] {
            push(format!("permutation bijectivity {s:?} N={n}"), inv::permutation_sequence(s, n, 6, (si * 1000 + n) as u64));
        }
    }

    let mut copulas = vec![Copula::Comonotone, Copula::Independence, Copula::FlipflopSingle, Copula::FlipflopRandom];
    for theta in [0.5, 2.0, 6.0] {
        copulas.push(Copula::Archimedean { family: ArchimedeanFamily::Clayton, theta });
        copulas.push(Copula::Archimedean { family: ArchimedeanFamily::Gumbel, theta: 1.0 + theta });
        copulas.push(Copula::Archimedean { family: ArchimedeanFamily::Frank, theta: 3.0 * theta });
    }
    for c in &copulas {
        for (i, j) in [(0, 1), (1, 2), (0, 3), (2, 2)] {
            push(format!("copula margins/Fréchet/2-increasing {c:?} ({i},{j})"), inv::copula_pair(c, i, j, 32));
        }
    }
    push("countermonotone pair".into(), inv::copula_pair(&Copula::Countermonotone, 0, 1, 32));

    for law in [IncrementLaw::Gaussian, IncrementLaw::Rademacher] {
        for (n, e) in [(1usize, 1usize), (10, 3), (257, 4), (2048, 2)] {
            push(format!("walk endpoints, X̃ zeros, Ψ∘Φ {law:?} N={n} J={e}"), inv::walk_identities(law, n, e, (n * 7 + e) as u64));
        }
    }

    for j in [2usize, 3] {
        for n in [3usize, 9, 32] {
            push(format!("smoothing bound J={j} N={n}"), inv::smoothing_bound(j, n, 8, (j * 100 + n) as u64));
        }
    }

    for (kappa, theta) in [(0.3, 2.0), (10.0, -1.0), (1.0, 0.0), (55.0, 0.7)] {
        let m = LinRegModel::scalar(kappa, -1.0, 1.0, FeatureLaw::Gaussian).unwrap();
        push(format!("√S multiply-back κ={kappa}"), inv::sqrt_multiply_back(&m, &Vector::from_element(1, theta)));
    }
    let k2 = Mat::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let m2 = LinRegModel::new(k2, Vector::from_vec(vec![0.2, -0.4]), 0.8, FeatureLaw::Gaussian).unwrap();
    push("√S multiply-back d=2".into(), inv::sqrt_multiply_back(&m2, &Vector::from_vec(vec![1.0, 1.5])));

    for s in [BridgeScheme::SingleShuffle, BridgeScheme::RandomReshuffle, BridgeScheme::FlipflopSingle, BridgeScheme::FlipflopRandom] {
        push(format!("bridge epoch structure {s:?}"), inv::bridge_structure(&s, 64, 5, 11));
    }

    for a in [0.1, 1.0, 4.0] {
        for (b1, b2) in [(0.5, 3.0), (7.0, 2.0), (0.0, 10.0)] {
            for batch in [0.5, 1.0, 2.0, 5.0, 40.0] {
                push(format!("regime sign rule a={a} b=({b1},{b2}) B={batch}"), inv::regime_sign_rule(a, b1, b2, batch));
            }
        }
    }

    for seed in 0..4u64 {
        push(format!("determinism seed {seed}"), inv::determinism(seed));
    }

    // rescaling round trip
    let model = LinRegModel::new(
        Mat::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.8]),
        Vector::from_vec(vec![0.4, -0.1]),
        1.0,
        FeatureLaw::Gaussian,
    )
    .unwrap();
    let rs = RateSpec { n: 8, h: 0.25, epochs: 10, m: 64, t_min: 2.0, t_max: 20.0, y0: vec![1.0, 0.0], ..c9_spec() };
    let path = sample_ebm(&rs, 2, &key.child("roundtrip")).unwrap();
    let p = YdeProblem {
        gradient: QuadraticGradient::new(model.kappa().clone(), model.theta_star().clone()).unwrap(),
        sigma: sme_sigma(&model, rs.h),
        driver: path.w.clone(),
        schedule: Schedule::polynomial(rs.c, rs.beta).unwrap(),
        y0: Vector::from_vec(rs.y0.clone()),
    };
    let bf = reduce_to_bridge_form(&p, &path).unwrap();
    let sol = solve_yde(&p, 1).unwrap();
    let back = bf.path_to_original(&bf.path_to_bridge(&sol));
    let gap = sol.values.iter().zip(&back.values).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    push(
        "bridge-form round trip".into(),
        if gap <= 1e-10 { Ok(()) } else { Err(format!("round trip off by {gap:e}")) },
    );

    let total = checks.len();
    let failed: Vec<String> = checks.into_iter().filter_map(|(n, r)| r.err().map(|e| format!("{n}: {e}"))).collect();
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        failed.is_empty() && secs < C10_SECONDS,
        format!("{}/{total} invariant checks hold, {secs:.1}s", total - failed.len()),
        failed,
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, "regime thresholds", c1),
        (2, "closed form vs simulation", c2),
        (3, "weak-error slopes", c3),
        (4, "permuton convergence", c4),
        (5, "exact smoothing bound", c5),
        (6, "scaling-limit covariance", c6),
        (7, "epoched-bridge covariance", c7),
        (8, "Young solver correctness", c8),
        (9, "SGDo SME convergence rate", c9),
        (10, "structural invariants", c10),
    ];
    let mut failures = 0;
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let v = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failures += 1;
        }
        println!("criterion {id:>2} {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.summary);
        for d in &v.details {
            println!("      {d}");
        }
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
