use crate::epoched_noise::BridgeScheme;
use crate::exec::Execution;
use crate::permutons::{ArchimedeanFamily, Copula};
use crate::risk_models::{FeatureLaw, ScalarLaw};
use crate::sme::SmeKind;
use crate::weak_limits::IncrementLaw;
use crate::{Error, Result};

use super::*;

/// One row of the linear-regression settings table (y = −x + ε, θ* = −1,
/// σ_ε = 1, x centred with variance κ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SettingRow {
    pub nr: usize,
    pub t_end: f64,
    pub theta0: f64,
    pub law: FeatureLaw,
    pub kappa: f64,
    pub kurt: f64,
    pub batch: usize,
    pub b_eq: f64,
    pub b_gf_minus_b_eq: f64,
    pub b_gf: f64,
}

const EXP: FeatureLaw = FeatureLaw::ScalarIid { law: ScalarLaw::Exponential };
const GAUSS: FeatureLaw = FeatureLaw::Gaussian;

pub fn settings_table() -> [SettingRow; 6] {
    let row = |nr, t_end, theta0, law, kappa, kurt, batch, b_eq, b_gf_minus_b_eq, b_gf| SettingRow {
        nr,
        t_end,
        theta0,
        law,
        kappa,
        kurt,
        batch,
        b_eq,
        b_gf_minus_b_eq,
        b_gf,
    };
    [
        row(1, 0.5, 0.0, EXP, 10.0, 9.0, 1, 4.0, 114.127, 118.127),
        row(2, 0.5, 0.0, GAUSS, 1.0, 3.0, 1, 1.0, 1.85914, 2.85914),
        row(3, 2.0, 0.0, GAUSS, 1.0, 3.0, 4, 1.0, 7.69977, 8.69977),
        row(4, 0.5, 0.0, EXP, 1.0, 9.0, 8, 4.0, 4.85914, 8.85914),
        row(5, 0.5, 0.0, GAUSS, 1.0, 3.0, 4, 1.0, 1.85914, 2.85914),
        row(6, 0.5, -0.9, GAUSS, 1.0, 3.0, 2, 1.0, 86.9141, 87.9141),
    ]
}

impl SettingRow {
    pub fn model(&self) -> ModelSpec {
        ModelSpec { kappa: MatSpec::Scalar(self.kappa), theta_star: VecSpec::Scalar(-1.0), sigma_eps: 1.0, feature_law: self.law }
    }
}

const PRESETS: &[&str] = &[
    "setting-1",
    "setting-2",
    "setting-3",
    "setting-4",
    "setting-5",
    "setting-6",
    "weak-error-1",
    "weak-error-2",
    "weak-error-3",
    "weak-error-4",
    "weak-error-5",
    "weak-error-6",
    "sgdo-converge",
    "permuton-clayton",
    "permuton-gumbel",
    "shuffled-walk-comonotone",
    "shuffled-walk-independence",
    "shuffled-walk-countermonotone",
    "bridge-cov-ss",
    "bridge-cov-rr",
    "bridge-cov-ffs",
    "bridge-cov-ffr",
];

pub fn preset_names() -> &'static [&'static str] {
    PRESETS
}

fn spec(name: &str, task: Task) -> ExperimentSpec {
    ExperimentSpec { name: name.to_owned(), seed: 20240101, out: None, execution: Execution::Parallel, task }
}

fn setting(name: &str, prefix: &str) -> Option<SettingRow> {
    let nr: usize = name.strip_prefix(prefix)?.parse().ok()?;
    settings_table().into_iter().find(|r| r.nr == nr)
}

const GRID5: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const BRIDGE5: [f64; 5] = [2.0 / 16.0, 5.0 / 16.0, 8.0 / 16.0, 11.0 / 16.0, 14.0 / 16.0];

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    if let Some(r) = setting(name, "setting-") {
        return Ok(spec(
            name,
            Task::Regimes(RegimesTask { model: r.model(), batch: r.batch as f64, t_end: r.t_end, theta0: VecSpec::Scalar(r.theta0) }),
        ));
    }
    if let Some(r) = setting(name, "weak-error-") {
        return Ok(spec(
            name,
            Task::WeakError(WeakErrorTask {
                model: r.model(),
                batch: r.batch,
                t_end: r.t_end,
                theta0: r.theta0,
                h_list: vec![0.5, 0.25, 0.1, 0.05],
                replicas: 1_000_000,
                kinds: SmeKind::ALL.to_vec(),
            }),
        ));
    }
    let archimedean = |family| Copula::Archimedean { family, theta: 2.0 };
    let task = match name {
        "sgdo-converge" => Task::SgdoConverge(SgdoTask {
            model: ModelSpec { kappa: MatSpec::Scalar(2.0), theta_star: VecSpec::Scalar(0.0), sigma_eps: 1.0, feature_law: GAUSS },
            n: 1000,
            h: 1e-3,
            beta: 0.75,
            c: 1.0,
            scheme: BridgeScheme::SingleShuffle,
            epochs: 10_000,
            m: 1024,
            y0: VecSpec::Scalar(0.5),
            t_min: 100.0,
            t_max: 10_000.0,
            factor: 1.2,
            replicas: 10,
            limit_replicas: 1000,
        }),
        "permuton-clayton" | "permuton-gumbel" => Task::PermutonCheck(PermutonTask {
            copula: archimedean(if name.ends_with("clayton") { ArchimedeanFamily::Clayton } else { ArchimedeanFamily::Gumbel }),
            j: 2,
            n_list: vec![64, 256, 1024, 4096],
            replicas: 100,
            res: 64,
        }),
        "shuffled-walk-comonotone" | "shuffled-walk-independence" | "shuffled-walk-countermonotone" => {
            let copula = match name {
                "shuffled-walk-comonotone" => Copula::Comonotone,
                "shuffled-walk-independence" => Copula::Independence,
                _ => Copula::Countermonotone,
            };
            Task::ShuffledWalk(WalkTask {
                law: IncrementLaw::Gaussian,
                copula,
                n: 2048,
                replicas: 20_000,
                points: GRID5.to_vec(),
                pair: (0, 1),
            })
        }
        "bridge-cov-ss" | "bridge-cov-rr" | "bridge-cov-ffs" | "bridge-cov-ffr" => {
            let scheme = match name {
                "bridge-cov-ss" => BridgeScheme::SingleShuffle,
                "bridge-cov-rr" => BridgeScheme::RandomReshuffle,
                "bridge-cov-ffs" => BridgeScheme::FlipflopSingle,
                _ => BridgeScheme::FlipflopRandom,
            };
            Task::BridgeCov(BridgeTask { scheme, epochs: 4, m: 16, replicas: 20_000, points: BRIDGE5.to_vec(), pair: (0, 1) })
        }
        _ => {
            return Err(Error::Config(format!("unknown preset '{name}'; available: {}", PRESETS.join(", "))));
        }
    };
    Ok(spec(name, task))
}
