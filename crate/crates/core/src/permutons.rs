//! Copulas (permutons), the Perm ranking operator, permuton-driven random
//! J-permutations and empirical permuton distribution functions.
//!
//! Permutations are 0-based: a component maps {0,…,N−1} onto itself.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchimedeanFamily {
    Clayton,
    Gumbel,
    Frank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorDirection {
    Phi,
    PhiInverse,
}

fn check_theta(family: ArchimedeanFamily, theta: f64) -> Result<()> {
    let ok = match family {
        ArchimedeanFamily::Clayton | ArchimedeanFamily::Frank => theta > 0.0 && theta.is_finite(),
        ArchimedeanFamily::Gumbel => theta >= 1.0 && theta.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("theta = {theta} is outside the valid range for {family:?}")))
    }
}

fn phi(family: ArchimedeanFamily, theta: f64, v: f64) -> f64 {
    if v == f64::INFINITY {
        return 0.0;
    }
    match family {
        ArchimedeanFamily::Clayton => (1.0 + theta * v).powf(-1.0 / theta),
        ArchimedeanFamily::Gumbel => (-v.powf(1.0 / theta)).exp(),
        ArchimedeanFamily::Frank => {
            let x = (-theta).exp_m1() * (-v).exp();
            if x < -0.5 {
                // 1 + x = 1 − e^{−v} + e^{−θ−v} without cancellation
                -(-(-v).exp_m1() + (-theta - v).exp()).ln() / theta
            } else {
                -x.ln_1p() / theta
            }
        }
    }
}

fn phi_inv(family: ArchimedeanFamily, theta: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return f64::INFINITY;
    }
    match family {
        ArchimedeanFamily::Clayton => (u.powf(-theta) - 1.0) / theta,
        ArchimedeanFamily::Gumbel => (-u.ln()).powf(theta),
        ArchimedeanFamily::Frank => {
            if u >= 1.0 {
                return 0.0;
            }
            // ratio − 1 = −e^{−θu}(e^{−θ(1−u)} − 1)/(e^{−θ} − 1)
            let r1 = -(-theta * u).exp() * (-theta * (1.0 - u)).exp_m1() / (-theta).exp_m1();
            -r1.ln_1p()
        }
    }
}

/// Generator φ or its inverse for the Archimedean families.
pub fn archimedean_generator(
    family: ArchimedeanFamily,
    theta: f64,
    direction: GeneratorDirection,
    arg: f64,
) -> Result<f64> {
    check_theta(family, theta)?;
    Ok(match direction {
        GeneratorDirection::Phi => phi(family, theta, arg),
        GeneratorDirection::PhiInverse => phi_inv(family, theta, arg),
    })
}

/// A J-dimensional permutation of size N.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JPermutation {
    pub n: usize,
    pub perms: Vec<Vec<usize>>,
}

impl JPermutation {
    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        let n = perms.first().map_or(0, Vec::len);
        for (j, p) in perms.iter().enumerate() {
            if p.len() != n || !crate::sgd::is_permutation(p) {
                return Err(Error::invalid(format!("component {j} is not a permutation of size {n}")));
            }
        }
        Ok(JPermutation { n, perms })
    }

    pub fn j(&self) -> usize {
        self.perms.len()
    }

    pub fn inverse(&self) -> JPermutation {
        JPermutation { n: self.n, perms: self.perms.iter().map(|p| crate::sgd::invert(p)).collect() }
    }

    /// One-line notation, 1-based, one component per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for p in &self.perms {
            let row: Vec<String> = p.iter().map(|v| (v + 1).to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Copula {
    Comonotone,
    Independence,
    /// Two coordinates only: (U, 1 − U).
    Countermonotone,
    /// (U, 1 − U, U, 1 − U, …).
    FlipflopSingle,
    /// (U₀, 1 − U₀, U₁, 1 − U₁, …).
    FlipflopRandom,
    Archimedean { family: ArchimedeanFamily, theta: f64 },
    /// μ_τ of a fixed J-permutation τ.
    Finite { perm: JPermutation },
    /// A family given only through its bivariate margins. Accepted by the
    /// parser so configs can name it, refused everywhere else.
    Pairwise { family: String },
}

/// Merge repeated indices (F is monotone, so the smallest coordinate wins)
/// and drop coordinates equal to 1.
fn group(t: &[f64], idx: &[usize]) -> Result<Vec<(usize, f64)>> {
    if t.len() != idx.len() {
        return Err(Error::Dimension { expected: idx.len(), got: t.len() });
    }
    let mut g: Vec<(usize, f64)> = Vec::new();
    for (&i, &v) in idx.iter().zip(t) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("coordinate {v} outside [0,1]")));
        }
        match g.iter_mut().find(|(k, _)| *k == i) {
            Some(e) => e.1 = e.1.min(v),
            None => g.push((i, v)),
        }
    }
    g.sort_by_key(|e| e.0);
    Ok(g)
}

fn min_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
}

/// Joint CDF of (U, 1 − U): max(a + b − 1, 0), with either side optional.
fn counter(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a + b - 1.0).max(0.0),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 1.0,
    }
}

impl Copula {
    pub fn validate(&self) -> Result<()> {
        match self {
            Copula::Archimedean { family, theta } => check_theta(*family, *theta),
            Copula::Finite { perm } => JPermutation::new(perm.perms.clone()).map(|_| ()),
            Copula::Pairwise { family } => Err(Error::invalid(format!(
                "pairwise copula family '{family}' has no joint sampler; bivariate margins need not be compatible"
            ))),
            _ => Ok(()),
        }
    }

    /// Largest supported dimension; None for every finite J.
    pub fn max_dim(&self) -> Option<usize> {
        match self {
            Copula::Countermonotone => Some(2),
            Copula::Finite { perm } => Some(perm.j()),
            _ => None,
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        match self.max_dim() {
            Some(m) if i >= m => Err(Error::invalid(format!("index {i} unsupported by a {m}-dimensional copula"))),
            _ => Ok(()),
        }
    }

    /// F^a(t): the marginal CDF on index set `idx` at coordinates `t`.
    pub fn eval(&self, t: &[f64], idx: &[usize]) -> Result<f64> {
        self.validate()?;
        let g = group(t, idx)?;
        for &(i, _) in &g {
            self.check_index(i)?;
        }
        if g.is_empty() {
            return Ok(1.0);
        }
        let vals = g.iter().map(|e| e.1);
        Ok(match self {
            Copula::Comonotone => min_of(vals).unwrap(),
            Copula::Independence => vals.product(),
            Copula::Countermonotone => counter(
                g.iter().find(|e| e.0 == 0).map(|e| e.1),
                g.iter().find(|e| e.0 == 1).map(|e| e.1),
            ),
            Copula::FlipflopSingle => counter(
                min_of(g.iter().filter(|e| e.0 % 2 == 0).map(|e| e.1)),
                min_of(g.iter().filter(|e| e.0 % 2 == 1).map(|e| e.1)),
            ),
            Copula::FlipflopRandom => {
                let mut p = 1.0;
                let mut k = 0;
                while k < g.len() {
                    let pair = g[k].0 / 2;
                    let (mut a, mut b) = (None, None);
                    while k < g.len() && g[k].0 / 2 == pair {
                        if g[k].0 % 2 == 0 {
                            a = Some(g[k].1);
                        } else {
                            b = Some(g[k].1);
                        }
                        k += 1;
                    }
                    p *= counter(a, b);
                }
                p
            }
            Copula::Archimedean { family, theta } => {
                let s: f64 = vals.map(|v| phi_inv(*family, *theta, v)).sum();
                phi(*family, *theta, s)
            }
            Copula::Finite { perm } => {
                let n = perm.n as f64;
                let mut acc = 0.0;
                for k in 0..perm.n {
                    let mut p = 1.0;
                    for &(j, v) in &g {
                        p *= (n * v - perm.perms[j][k] as f64).clamp(0.0, 1.0);
                        if p == 0.0 {
                            break;
                        }
                    }
                    acc += p;
                }
                acc / n
            }
            Copula::Pairwise { .. } => unreachable!("rejected by validate"),
        })
    }

    pub fn eval_pair(&self, i: usize, j: usize, s: f64, t: f64) -> Result<f64> {
        self.eval(&[s, t], &[i, j])
    }

    /// One point of [0,1]^dim distributed as the permuton.
    pub fn sample_point<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(m) = self.max_dim() {
            if dim > m {
                return Err(Error::invalid(format!("copula supports at most {m} coordinates, {dim} requested")));
            }
        }
        Ok(match self {
            Copula::Comonotone => vec![rng.random::<f64>(); dim],
            Copula::Independence => (0..dim).map(|_| rng.random::<f64>()).collect(),
            Copula::Countermonotone | Copula::FlipflopSingle => {
                let u: f64 = rng.random();
                (0..dim).map(|j| if j % 2 == 0 { u } else { 1.0 - u }).collect()
            }
            Copula::FlipflopRandom => {
                let mut out = Vec::with_capacity(dim);
                while out.len() < dim {
                    let u: f64 = rng.random();
                    out.push(u);
                    if out.len() < dim {
                        out.push(1.0 - u);
                    }
                }
                out
            }
            Copula::Archimedean { family, theta } => {
                let v = frailty(*family, *theta, rng);
                (0..dim)
                    .map(|_| {
                        let e: f64 = Exp1.sample(rng);
                        phi(*family, *theta, e / v)
                    })
                    .collect()
            }
            Copula::Finite { perm } => {
                let k = rng.random_range(0..perm.n);
                let n = perm.n as f64;
                (0..dim).map(|j| (perm.perms[j][k] as f64 + rng.random::<f64>()) / n).collect()
            }
            Copula::Pairwise { .. } => unreachable!("rejected by validate"),
        })
    }
}

pub fn copula_eval(c: &Copula, t: &[f64], idx: &[usize]) -> Result<f64> {
    c.eval(t, idx)
}

/// Mixing variable of the Marshall–Olkin construction: its Laplace
/// transform is the generator φ.
fn frailty<R: Rng + ?Sized>(family: ArchimedeanFamily, theta: f64, rng: &mut R) -> f64 {
    match family {
        ArchimedeanFamily::Clayton => Gamma::new(1.0 / theta, theta).expect("valid gamma").sample(rng),
        ArchimedeanFamily::Gumbel => {
            if theta == 1.0 {
                return 1.0;
            }
            positive_stable(1.0 / theta, rng)
        }
        ArchimedeanFamily::Frank => logarithmic(-(-theta).exp_m1(), rng) as f64,
    }
}

/// Positive α-stable variable with E e^{-λS} = e^{-λ^α} (Kanter).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = std::f64::consts::PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Logarithmic series variable, P(V = k) ∝ p^k / k (Kemp's LK method).
pub fn logarithmic<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    let v: f64 = rng.random();
    if v >= p {
        return 1;
    }
    let u: f64 = rng.random();
    let q = -((1.0 - p).ln() * u).exp_m1();
    if v <= q * q {
        let k = (1.0 + v.ln() / q.ln()).floor();
        if k.is_finite() && k >= 1.0 {
            k as u64
        } else {
            1
        }
    } else if v <= q {
        2
    } else {
        1
    }
}

/// Perm(v): stable 0-based ranks, Perm(v)(k) = #{l : v_l < v_k} + #{l < k : v_l = v_k}.
pub fn perm_of(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut rank = vec![0; v.len()];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    rank
}

/// Draw N i.i.d. permuton points in J coordinates and rank each column.
pub fn sample_jpermutation<R: Rng + ?Sized>(c: &Copula, n: usize, j: usize, rng: &mut R) -> Result<JPermutation> {
    let mut cols = vec![Vec::with_capacity(n); j];
    for _ in 0..n {
        let pt = c.sample_point(j, rng)?;
        for (col, v) in cols.iter_mut().zip(pt) {
            col.push(v);
        }
    }
    Ok(JPermutation { n, perms: cols.iter().map(|c| perm_of(c)).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutonMode {
    /// μ̂_σ: atoms at ((σ^j(k)+1)/N)_j.
    PointMass,
    /// μ_σ: uniform mass on the cubes Π_j [σ^j(k)/N, (σ^j(k)+1)/N].
    Smoothed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPermuton {
    pub source: JPermutation,
    pub mode: PermutonMode,
}

impl EmpiricalPermuton {
    pub fn new(source: JPermutation, mode: PermutonMode) -> Self {
        EmpiricalPermuton { source, mode }
    }

    pub fn cdf(&self, t: &[f64], idx: &[usize]) -> Result<f64> {
        let g = group(t, idx)?;
        for &(j, _) in &g {
            if j >= self.source.j() {
                return Err(Error::invalid(format!("index {j} beyond J = {}", self.source.j())));
            }
        }
        let n = self.source.n;
        let nf = n as f64;
        let mut acc = 0.0;
        match self.mode {
            PermutonMode::PointMass => {
                let caps: Vec<(usize, usize)> = g.iter().map(|&(j, v)| (j, (nf * v).floor() as usize)).collect();
                let count = (0..n)
                    .filter(|&k| caps.iter().all(|&(j, cap)| self.source.perms[j][k] < cap))
                    .count();
                acc = count as f64;
            }
            PermutonMode::Smoothed => {
                for k in 0..n {
                    let mut p = 1.0;
                    for &(j, v) in &g {
                        p *= (nf * v - self.source.perms[j][k] as f64).clamp(0.0, 1.0);
                    }
                    acc += p;
                }
            }
        }
        Ok(acc / nf)
    }

    /// CDF of the (i, j) margin on the grid (a/res, b/res), a, b = 1..=res,
    /// row-major in a. Exact for point-mass mode; for smoothed mode it agrees
    /// with `cdf` whenever res divides N.
    pub fn grid_cdf(&self, i: usize, j: usize, res: usize) -> Result<Vec<f64>> {
        if i >= self.source.j() || j >= self.source.j() {
            return Err(Error::invalid("pair index beyond J"));
        }
        let n = self.source.n;
        if self.mode == PermutonMode::Smoothed && !n.is_multiple_of(res) {
            let mut out = Vec::with_capacity(res * res);
            for a in 1..=res {
                for b in 1..=res {
                    out.push(self.cdf(&[a as f64 / res as f64, b as f64 / res as f64], &[i, j])?);
                }
            }
            return Ok(out);
        }
        // smallest grid index a with σ + 1 ≤ ⌊N a / res⌋
        let first = |s: usize| ((s + 1) * res).div_ceil(n);
        let mut hist = vec![0u32; (res + 1) * (res + 1)];
        for k in 0..n {
            let a = first(self.source.perms[i][k]);
            let b = first(self.source.perms[j][k]);
            hist[a * (res + 1) + b] += 1;
        }
        for a in 0..=res {
            for b in 0..=res {
                let mut v = hist[a * (res + 1) + b];
                if a > 0 {
                    v += hist[(a - 1) * (res + 1) + b];
                }
                if b > 0 {
                    v += hist[a * (res + 1) + b - 1];
                }
                if a > 0 && b > 0 {
                    v -= hist[(a - 1) * (res + 1) + b - 1];
                }
                hist[a * (res + 1) + b] = v;
            }
        }
        let mut out = Vec::with_capacity(res * res);
        for a in 1..=res {
            for b in 1..=res {
                out.push(hist[a * (res + 1) + b] as f64 / n as f64);
            }
        }
        Ok(out)
    }
}

pub fn empirical_cdf(p: &EmpiricalPermuton, pair: (usize, usize), s: f64, t: f64) -> Result<f64> {
    p.cdf(&[s, t], &[pair.0, pair.1])
}

/// Sup-norm distance over the tensor grid {1/res, …, 1}^m.
pub fn ks_distance(f1: impl Fn(&[f64]) -> f64, f2: impl Fn(&[f64]) -> f64, m: usize, res: usize) -> f64 {
    let mut idx = vec![1usize; m];
    let mut pt = vec![0.0; m];
    let mut best: f64 = 0.0;
    loop {
        for (p, &i) in pt.iter_mut().zip(&idx) {
            *p = i as f64 / res as f64;
        }
        best = best.max((f1(&pt) - f2(&pt)).abs());
        let mut d = 0;
        loop {
            if d == m {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= res {
                break;
            }
            idx[d] = 1;
            d += 1;
        }
    }
}

pub const DEFAULT_KS_RES: usize = 64;

/// KS distance on the (i, j) margin between an empirical permuton and a copula.
pub fn permuton_ks(p: &EmpiricalPermuton, c: &Copula, pair: (usize, usize), res: usize) -> Result<f64> {
    let emp = p.grid_cdf(pair.0, pair.1, res)?;
    let mut best: f64 = 0.0;
    for a in 1..=res {
        for b in 1..=res {
            let exact = c.eval_pair(pair.0, pair.1, a as f64 / res as f64, b as f64 / res as f64)?;
            best = best.max((emp[(a - 1) * res + b - 1] - exact).abs());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn eval_examples() {
        assert_eq!(Copula::Comonotone.eval_pair(0, 1, 0.3, 0.7).unwrap(), 0.3);
        assert_eq!(Copula::Countermonotone.eval_pair(0, 1, 0.3, 0.5).unwrap(), 0.0);
        let clayton = Copula::Archimedean { family: ArchimedeanFamily::Clayton, theta: 1.0 };
        assert!((clayton.eval_pair(0, 1, 0.5, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let gumbel = Copula::Archimedean { family: ArchimedeanFamily::Gumbel, theta: 1.0 };
        assert!((gumbel.eval_pair(0, 1, 0.4, 0.9).unwrap() - 0.36).abs() < 1e-15);
        let frank = Copula::Archimedean { family: ArchimedeanFamily::Frank, theta: 1.0 };
        let e = 0.5f64;
        let expect = -(1.0 + ((-e).exp() - 1.0).powi(2) / ((-1f64).exp() - 1.0)).ln();
        assert!((frank.eval_pair(0, 1, 0.5, 0.5).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 0.2809).abs() < 1e-4);
        assert!(Copula::Countermonotone.eval_pair(0, 2, 0.3, 0.5).is_err());
    }

    #[test]
    fn generator_boundaries() {
        use GeneratorDirection::*;
        let f = ArchimedeanFamily::Clayton;
        assert_eq!(archimedean_generator(f, 2.0, PhiInverse, 1.0).unwrap(), 0.0);
        assert_eq!(archimedean_generator(f, 2.0, Phi, 0.0).unwrap(), 1.0);
        assert!(archimedean_generator(ArchimedeanFamily::Gumbel, 0.5, Phi, 1.0).is_err());
        assert!(archimedean_generator(ArchimedeanFamily::Frank, 0.0, Phi, 1.0).is_err());
    }

    #[test]
    fn perm_of_examples() {
        assert_eq!(perm_of(&[0.1, 0.2, 0.3]), vec![0, 1, 2]);
        assert_eq!(perm_of(&[0.3, 0.1, 0.2]), vec![2, 0, 1]);
        assert_eq!(perm_of(&[0.5, 0.5]), vec![0, 1]);
    }

    #[test]
    fn empirical_examples() {
        let jp = JPermutation::new(vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0]]).unwrap();
        let p = EmpiricalPermuton::new(jp, PermutonMode::PointMass);
        assert_eq!(empirical_cdf(&p, (0, 1), 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(empirical_cdf(&p, (1, 1), 0.6, 0.9).unwrap(), 0.5);
    }

    #[test]
    fn countermonotone_sample_is_reversal() {
        let mut rng = derive_stream(4, &["c"]);
        let jp = sample_jpermutation(&Copula::Countermonotone, 50, 2, &mut rng).unwrap();
        let rev: Vec<usize> = jp.perms[0].iter().map(|&v| 49 - v).collect();
        assert_eq!(jp.perms[1], rev);
    }

    #[test]
    fn grid_cdf_matches_direct() {
        let mut rng = derive_stream(2, &["g"]);
        let c = Copula::Archimedean { family: ArchimedeanFamily::Clayton, theta: 2.0 };
        let jp = sample_jpermutation(&c, 100, 2, &mut rng).unwrap();
        for mode in [PermutonMode::PointMass, PermutonMode::Smoothed] {
            let p = EmpiricalPermuton::new(jp.clone(), mode);
            let g = p.grid_cdf(0, 1, 8).unwrap();
            for a in 1..=8 {
                for b in 1..=8 {
                    let d = p.cdf(&[a as f64 / 8.0, b as f64 / 8.0], &[0, 1]).unwrap();
                    assert!((g[(a - 1) * 8 + b - 1] - d).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn frailty_laplace_transforms() {
        let mut rng = derive_stream(8, &["f"]);
        let n = 200_000;
        let stable: f64 = (0..n).map(|_| (-positive_stable(0.5, &mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((stable - (-1f64).exp()).abs() < 5e-3, "{stable}");
        let theta = 2.0f64;
        let p = -(-theta).exp_m1();
        let lg: f64 = (0..n).map(|_| logarithmic(p, &mut rng) as f64).sum::<f64>() / n as f64;
        let mean = p / ((1.0 - p) * theta);
        assert!((lg - mean).abs() < 0.02 * mean, "{lg} vs {mean}");
    }

    #[test]
    fn pairwise_is_refused() {
        let c = Copula::Pairwise { family: "gaussian".into() };
        assert!(c.eval_pair(0, 1, 0.5, 0.5).is_err());
        let mut rng = derive_stream(0, &["x"]);
        assert!(sample_jpermutation(&c, 4, 2, &mut rng).is_err());
    }
}
