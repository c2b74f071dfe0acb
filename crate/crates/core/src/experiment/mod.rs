//! Experiment configuration, presets and the runner behind the CLI.

mod presets;
mod runner;

pub use presets::{preset, preset_names, settings_table, SettingRow};
pub use runner::{load_spec, run, run_to_dir, sha256_hex, write_outputs, Artifact, RunManifest, RunOutput};

use serde::{Deserialize, Serialize};

use crate::epoched_noise::BridgeScheme;
use crate::exec::Execution;
use crate::linalg::{Mat, Vector};
use crate::permutons::Copula;
use crate::risk_models::{FeatureLaw, LinRegModel};
use crate::sme::SmeKind;
use crate::weak_limits::IncrementLaw;
use crate::{Error, Result};

/// 17 significant digits, '.' decimal point.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A number or a list, for hand-written configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VecSpec {
    Scalar(f64),
    List(Vec<f64>),
}

impl VecSpec {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            VecSpec::Scalar(v) => vec![*v],
            VecSpec::List(v) => v.clone(),
        }
    }
}

/// A number (1×1) or a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatSpec {
    pub fn to_mat(&self) -> Result<Mat> {
        match self {
            MatSpec::Scalar(v) => Ok(Mat::from_element(1, 1, *v)),
            MatSpec::Rows(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("kappa must be a non-empty square list of rows".into()));
                }
                Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kappa: MatSpec,
    pub theta_star: VecSpec,
    pub sigma_eps: f64,
    pub feature_law: FeatureLaw,
}

impl ModelSpec {
    pub fn build(&self) -> Result<LinRegModel> {
        LinRegModel::new(self.kappa.to_mat()?, Vector::from_vec(self.theta_star.to_vec()), self.sigma_eps, self.feature_law)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorTask {
    pub model: ModelSpec,
    pub batch: usize,
    pub t_end: f64,
    pub theta0: f64,
    pub h_list: Vec<f64>,
    pub replicas: usize,
    pub kinds: Vec<SmeKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimesTask {
    pub model: ModelSpec,
    pub batch: f64,
    pub t_end: f64,
    pub theta0: VecSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdoTask {
    pub model: ModelSpec,
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    pub c: f64,
    pub scheme: BridgeScheme,
    pub epochs: usize,
    pub m: usize,
    pub y0: VecSpec,
    pub t_min: f64,
    pub t_max: f64,
    pub factor: f64,
    /// Solved paths.
    pub replicas: usize,
    /// Closed-form Y_∞ draws for the limit covariance.
    pub limit_replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutonTask {
    pub copula: Copula,
    pub j: usize,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub res: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkTask {
    pub law: IncrementLaw,
    pub copula: Copula,
    pub n: usize,
    pub replicas: usize,
    pub points: Vec<f64>,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeTask {
    pub scheme: BridgeScheme,
    pub epochs: usize,
    pub m: usize,
    pub replicas: usize,
    pub points: Vec<f64>,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    WeakError(WeakErrorTask),
    Regimes(RegimesTask),
    SgdoConverge(SgdoTask),
    PermutonCheck(PermutonTask),
    ShuffledWalk(WalkTask),
    BridgeCov(BridgeTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::WeakError(_) => "weak-error",
            Task::Regimes(_) => "regimes",
            Task::SgdoConverge(_) => "sgdo-converge",
            Task::PermutonCheck(_) => "permuton-check",
            Task::ShuffledWalk(_) => "shuffled-walk",
            Task::BridgeCov(_) => "bridge-cov",
        }
    }

    /// Overwrite the replica count; tasks without replicas ignore it.
    pub fn set_replicas(&mut self, m: usize) {
        match self {
            Task::WeakError(t) => t.replicas = m,
            Task::SgdoConverge(t) => t.replicas = m,
            Task::PermutonCheck(t) => t.replicas = m,
            Task::ShuffledWalk(t) => t.replicas = m,
            Task::BridgeCov(t) => t.replicas = m,
            Task::Regimes(_) => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub execution: Execution,
    #[serde(flatten)]
    pub task: Task,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

fn unit_points(name: &str, pts: &[f64]) -> Result<()> {
    if pts.is_empty() || pts.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config(format!("{name} must be a non-empty list in [0,1]")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        match &self.task {
            Task::WeakError(t) => {
                t.model.build()?;
                positive("t_end", t.t_end)?;
                at_least("batch", t.batch, 1)?;
                at_least("replicas", t.replicas, 2)?;
                if t.h_list.is_empty() || t.kinds.is_empty() {
                    return Err(Error::Config("h_list and kinds must be non-empty".into()));
                }
                for &h in &t.h_list {
                    positive("h", h)?;
                    crate::error_analysis::steps_for(t.t_end, h)
                        .map_err(|_| Error::Config(format!("h = {h} does not divide T = {}", t.t_end)))?;
                }
            }
            Task::Regimes(t) => {
                t.model.build()?;
                positive("t_end", t.t_end)?;
                positive("batch", t.batch)?;
            }
            Task::SgdoConverge(t) => {
                t.model.build()?;
                at_least("replicas", t.replicas, 1)?;
                at_least("limit_replicas", t.limit_replicas, 2)?;
                rate_spec(t).validate()?;
            }
            Task::PermutonCheck(t) => {
                t.copula.validate()?;
                at_least("j", t.j, 2)?;
                at_least("replicas", t.replicas, 1)?;
                at_least("res", t.res, 1)?;
                if t.n_list.is_empty() || t.n_list.contains(&0) {
                    return Err(Error::Config("n_list must be non-empty and positive".into()));
                }
            }
            Task::ShuffledWalk(t) => {
                t.copula.validate()?;
                at_least("n", t.n, 1)?;
                at_least("replicas", t.replicas, 2)?;
                unit_points("points", &t.points)?;
            }
            Task::BridgeCov(t) => {
                at_least("replicas", t.replicas, 2)?;
                unit_points("points", &t.points)?;
                if t.pair.0.max(t.pair.1) >= t.epochs {
                    return Err(Error::Config("pair indices must be below epochs".into()));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn rate_spec(t: &SgdoTask) -> crate::young::RateSpec {
    crate::young::RateSpec {
        n: t.n,
        h: t.h,
        beta: t.beta,
        c: t.c,
        scheme: t.scheme.clone(),
        epochs: t.epochs,
        m: t.m,
        y0: t.y0.to_vec(),
        t_min: t.t_min,
        t_max: t.t_max,
        factor: t.factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn preset_round_trip() {
        for name in preset_names() {
            let spec = preset(name).unwrap();
            let again = ExperimentSpec::from_json(&spec.to_json().unwrap()).unwrap();
            assert_eq!(spec, again, "{name}");
        }
    }

    #[test]
    fn bad_h_is_rejected() {
        let mut spec = preset("weak-error-5").unwrap();
        if let Task::WeakError(t) = &mut spec.task {
            t.h_list.push(0.3);
        }
        let e = spec.validate().unwrap_err();
        assert!(e.to_string().contains("0.3"));
        assert_eq!(e.exit_code(), 2);
    }
}
