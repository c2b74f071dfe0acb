//! Order-fixed reductions and Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation; result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean with batch-means standard error. Falls back to the iid formula when
/// there are fewer samples than batches.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let m = mean(xs);
    if batches < 2 || n < 2 * batches {
        return Estimate { mean: m, stderr: (variance(xs) / n as f64).sqrt(), n };
    }
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| {
            let end = if b + 1 == batches { n } else { (b + 1) * size };
            mean(&xs[b * size..end])
        })
        .collect();
    Estimate { mean: m, stderr: (variance(&bm) / batches as f64).sqrt(), n }
}

pub const DEFAULT_BATCHES: usize = 32;

/// Sample covariance of paired draws with a delta-method standard error
/// (sd of centred products over sqrt(n)).
pub fn covariance(xs: &[f64], ys: &[f64]) -> Estimate {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mx = mean(xs);
    let my = mean(ys);
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = pairwise_sum(&prods) / (n as f64 - 1.0);
    let se = (variance(&prods) / n as f64).sqrt();
    Estimate { mean: cov, stderr: se, n }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares y = intercept + slope·x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let den = pairwise_sum(&sxx);
    if den <= 0.0 {
        return None;
    }
    let slope = pairwise_sum(&sxy) / den;
    Some(LineFit { slope, intercept: my - slope * mx })
}

/// Fit log y against log x over points with positive coordinates.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
