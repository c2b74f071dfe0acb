use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::epoched_noise::{empirical_cross_covariance, BridgeFamilySpec, BridgeSampler, CovEntry};
use crate::error_analysis::{classify_regime, linear_error_terms, slope_fit, weak_error_curves};
use crate::exec::{map_replicas, try_map_replicas};
use crate::linalg::Vector;
use crate::permutons::{permuton_ks, sample_jpermutation, EmpiricalPermuton, PermutonMode};
use crate::rng::StreamKey;
use crate::stats;
use crate::weak_limits::{covariance_check, PermSource};
use crate::young::{limit_covariance, sgdo_sme_experiment};
use crate::Result;

use super::*;

/// In-memory result of one run: named CSV/JSON files and a JSON summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn cov_csv(entries: &[CovEntry]) -> Vec<u8> {
    let mut s = String::from("s,t,i,j,empirical_cov,target,stderr\n");
    for e in entries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(e.s),
            fmt_f64(e.t),
            e.i,
            e.j,
            fmt_f64(e.cov),
            fmt_f64(e.target),
            fmt_f64(e.stderr)
        ));
    }
    s.into_bytes()
}

fn max_abs_z(entries: &[CovEntry]) -> f64 {
    entries.iter().map(|e| e.z_score().abs()).fold(0.0, f64::max)
}

fn json_bytes(v: &serde_json::Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Execute a validated spec; pure apart from CPU time.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.validate()?;
    let key = StreamKey::new(spec.seed).child(spec.task.kind());
    let exec = spec.execution;
    let (files, summary) = match &spec.task {
        Task::WeakError(t) => {
            let model = t.model.build()?;
            let curves =
                weak_error_curves(&model, &t.kinds, t.batch, t.t_end, t.theta0, &t.h_list, t.replicas, &key, exec)?;
            let mut csv = String::from("kind,h,steps,sgd_mean,sgd_stderr,sme_value,signed_error,weak_error,stderr,replicas\n");
            let mut slopes = serde_json::Map::new();
            for c in &curves {
                for p in &c.points {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        c.kind,
                        fmt_f64(p.h),
                        p.steps,
                        fmt_f64(p.sgd_mean),
                        fmt_f64(p.sgd_stderr),
                        fmt_f64(p.sme_value),
                        fmt_f64(p.signed_error),
                        fmt_f64(p.weak_error),
                        fmt_f64(p.stderr),
                        p.replicas
                    ));
                }
                let v = match slope_fit(c) {
                    Ok(f) => serde_json::to_value(f)?,
                    Err(e) => json!({ "error": e.to_string() }),
                };
                slopes.insert(c.kind.to_string(), v);
            }
            (vec![("weak_error.csv".to_owned(), csv.into_bytes())], json!({ "slopes": slopes }))
        }
        Task::Regimes(t) => {
            let model = t.model.build()?;
            let b_eq = model.b_eq()?;
            let theta0 = Vector::from_vec(t.theta0.to_vec());
            let report = linear_error_terms(&model.objective(), &theta0, t.t_end, t.batch, b_eq, model.sigma_eps())?;
            let cls = classify_regime(t.batch, &report);
            let ordering: Vec<Vec<String>> =
                cls.ordering.iter().map(|tier| tier.iter().map(|k| k.to_string()).collect()).collect();
            let v = json!({
                "b_eq": report.b_eq,
                "b_gf": report.b_gf,
                "b_gf_minus_b_eq": report.b_gf_minus_b_eq(),
                "a": report.a,
                "b": report.b,
                "c": report.c,
                "le_gf": report.le_gf,
                "le_cc": report.le_cc,
                "le_ncc": report.le_ncc,
                "batch": t.batch,
                "regime": cls.label,
                "ordering_worst_to_best": ordering,
                "cc_second_order": cls.cc_second_order,
                "gf_second_order": cls.gf_second_order,
            });
            (vec![("regimes.json".to_owned(), json_bytes(&v)?)], v)
        }
        Task::SgdoConverge(t) => {
            let model = t.model.build()?;
            let rs = rate_spec(t);
            let reports =
                try_map_replicas(exec, t.replicas, |r| sgdo_sme_experiment(&model, &rs, &key.child("replica").child(r)))?;
            let mut csv = String::from("replica,t,error,bound_log_rate,bound_holder\n");
            for (r, rep) in reports.iter().enumerate() {
                for line in rep.to_csv().lines().skip(1) {
                    csv.push_str(&format!("{r},{line}\n"));
                }
            }
            let (emp, target) = limit_covariance(&model, t.n, t.h, t.limit_replicas, &key)?;
            let rows = |m: &crate::linalg::Mat| -> Vec<Vec<f64>> {
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
            };
            let v = json!({
                "slopes": reports.iter().map(|r| r.slope).collect::<Vec<_>>(),
                "intercepts": reports.iter().map(|r| r.intercept).collect::<Vec<_>>(),
                "c_alpha": reports.iter().map(|r| r.c_alpha).collect::<Vec<_>>(),
                "period": rs.period(),
                "effective_c": rs.c * rs.period(),
                "limit_covariance": rows(&emp),
                "limit_covariance_target": rows(&target),
            });
            (vec![("rates.csv".to_owned(), csv.into_bytes()), ("rates.json".to_owned(), json_bytes(&v)?)], v)
        }
        Task::PermutonCheck(t) => {
            let mut csv = String::from("n,replica,ks\n");
            let mut per_n = Vec::new();
            for &n in &t.n_list {
                let kk = key.child("n").child(n);
                let ks = try_map_replicas(exec, t.replicas, |r| {
                    let jp = sample_jpermutation(&t.copula, n, t.j, &mut kk.child("replica").child(r).rng())?;
                    let p = EmpiricalPermuton::new(jp, PermutonMode::Smoothed);
                    let mut worst: f64 = 0.0;
                    for a in 0..t.j {
                        for b in a + 1..t.j {
                            worst = worst.max(permuton_ks(&p, &t.copula, (a, b), t.res)?);
                        }
                    }
                    Ok(worst)
                })?;
                for (r, k) in ks.iter().enumerate() {
                    csv.push_str(&format!("{n},{r},{}\n", fmt_f64(*k)));
                }
                let bound = 4.0 * t.j as f64 * (n as f64).powf(-0.25);
                per_n.push(json!({
                    "n": n,
                    "median_ks": stats::median(&ks),
                    "bound": bound,
                    "within_bound": ks.iter().filter(|&&k| k <= bound).count(),
                }));
            }
            let v = json!({ "per_n": per_n });
            (vec![("permuton_ks.csv".to_owned(), csv.into_bytes())], v)
        }
        Task::ShuffledWalk(t) => {
            let rep = covariance_check(t.law, &t.copula, t.n, t.replicas, &t.points, t.pair, &PermSource::Resample, &key, exec)?;
            let v = json!({ "max_abs_z": rep.max_abs_z(), "n": t.n, "replicas": t.replicas });
            (vec![("walk_cov.csv".to_owned(), cov_csv(&rep.entries))], v)
        }
        Task::BridgeCov(t) => {
            let sampler = BridgeSampler::new(BridgeFamilySpec { scheme: t.scheme.clone(), epochs: t.epochs, m: t.m })?;
            let paths = map_replicas(exec, t.replicas, |r| sampler.sample(1, &mut key.child("replica").child(r).rng()));
            let pts: Vec<(f64, f64)> = t.points.iter().flat_map(|&s| t.points.iter().map(move |&u| (s, u))).collect();
            let entries = empirical_cross_covariance(&paths, t.pair, &pts, &t.scheme)?;
            let v = json!({ "max_abs_z": max_abs_z(&entries), "replicas": t.replicas });
            (vec![("bridge_cov.csv".to_owned(), cov_csv(&entries))], v)
        }
    };
    Ok(RunOutput { files, summary })
}

/// Write every artifact plus `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, out: &RunOutput, wall_clock_seconds: f64) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = out.files.clone();
    files.push(("summary.json".to_owned(), json_bytes(&out.summary)?));
    let mut artifacts = Vec::new();
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
        artifacts.push(Artifact { file: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
    }
    let manifest = RunManifest {
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_clock_seconds,
        artifacts,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Run and persist; the output directory defaults to `out/<name>`.
pub fn run_to_dir(spec: &ExperimentSpec) -> Result<(PathBuf, RunManifest)> {
    let start = Instant::now();
    let out = run(spec)?;
    let dir = PathBuf::from(spec.out.clone().unwrap_or_else(|| format!("out/{}", spec.name)));
    let manifest = write_outputs(&dir, spec, &out, start.elapsed().as_secs_f64())?;
    Ok((dir, manifest))
}

/// Accept either a bare spec or a manifest (whose `spec` is re-run).
pub fn load_spec(text: &str) -> Result<ExperimentSpec> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let spec_v = match v.get("spec") {
        Some(s) if v.get("artifacts").is_some() => s.clone(),
        _ => v,
    };
    let spec: ExperimentSpec = serde_json::from_value(spec_v)?;
    spec.validate()?;
    Ok(spec)
}
