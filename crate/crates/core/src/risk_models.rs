//! Linear-regression risk: population risk, per-sample gradients, gradient
//! noise covariance and feature statistics.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::linalg::{self, Mat, Vector};
use crate::{Error, Result};

/// Scalar feature laws, all standardized to mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "law")]
pub enum ScalarLaw {
    Gaussian,
    Exponential,
    Uniform,
    Rademacher,
    Lognormal { sigma: f64 },
}

impl ScalarLaw {
    /// Standardized fourth moment E[(x-μ)^4]/Var(x)^2.
    pub fn kurtosis(&self) -> f64 {
        match *self {
            ScalarLaw::Gaussian => 3.0,
            ScalarLaw::Exponential => 9.0,
            ScalarLaw::Uniform => 9.0 / 5.0,
            ScalarLaw::Rademacher => 1.0,
            ScalarLaw::Lognormal { sigma } => {
                let s2 = sigma * sigma;
                (4.0 * s2).exp() + 2.0 * (3.0 * s2).exp() + 3.0 * (2.0 * s2).exp() - 3.0
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ScalarLaw::Lognormal { sigma } = *self {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("lognormal sigma must be positive"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarLaw::Gaussian => StandardNormal.sample(rng),
            ScalarLaw::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            ScalarLaw::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            ScalarLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ScalarLaw::Lognormal { sigma } => {
                let s2 = sigma * sigma;
                let z: f64 = StandardNormal.sample(rng);
                let mean = (0.5 * s2).exp();
                let sd = ((s2.exp() - 1.0) * s2.exp()).sqrt();
                ((sigma * z).exp() - mean) / sd
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureLaw {
    /// x ~ N(0, κ).
    Gaussian,
    /// x = κ^{1/2} s with i.i.d. standardized coordinates s.
    ScalarIid { law: ScalarLaw },
    /// Only B^Eq is known; no sampler.
    Abstract { b_eq: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub x: Vector,
    pub y: f64,
}

/// R(θ) = ½⟨κ, (θ-θ*)⊗²⟩ + offset.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    pub kappa: Mat,
    pub theta_star: Vector,
    pub offset: f64,
}

impl QuadraticObjective {
    pub fn new(kappa: Mat, theta_star: Vector, offset: f64) -> Result<Self> {
        validate_kappa(&kappa)?;
        check_dim(kappa.nrows(), theta_star.len())?;
        Ok(QuadraticObjective { kappa, theta_star, offset })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn excess(&self, theta: &Vector) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        let d = theta - &self.theta_star;
        Ok(0.5 * linalg::quad_form(&self.kappa, &d))
    }

    pub fn risk(&self, theta: &Vector) -> Result<f64> {
        Ok(self.excess(theta)? + self.offset)
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        check_dim(self.dim(), theta.len())?;
        Ok(&self.kappa * (theta - &self.theta_star))
    }

    pub fn hessian(&self) -> &Mat {
        &self.kappa
    }
}

fn validate_kappa(kappa: &Mat) -> Result<()> {
    if !kappa.is_square() || kappa.nrows() == 0 {
        return Err(Error::invalid("kappa must be a non-empty square matrix"));
    }
    if kappa.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kappa has non-finite entries"));
    }
    if !linalg::is_symmetric(kappa, 1e-10) {
        return Err(Error::invalid("kappa is not symmetric"));
    }
    let e = linalg::eigen(kappa);
    if e.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::invalid("kappa is not positive definite"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinRegModel {
    kappa: Mat,
    sqrt_kappa: Mat,
    theta_star: Vector,
    sigma_eps: f64,
    feature_law: FeatureLaw,
}

impl LinRegModel {
    pub fn new(kappa: Mat, theta_star: Vector, sigma_eps: f64, feature_law: FeatureLaw) -> Result<Self> {
        validate_kappa(&kappa)?;
        check_dim(kappa.nrows(), theta_star.len())?;
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
            return Err(Error::invalid("sigma_eps must be a nonnegative number"));
        }
        match feature_law {
            FeatureLaw::ScalarIid { law } => law.validate()?,
            FeatureLaw::Abstract { b_eq } if !(b_eq >= 0.0 && b_eq.is_finite()) => {
                return Err(Error::invalid("abstract B^Eq must be nonnegative"));
            }
            _ => {}
        }
        let kappa = linalg::symmetrize(&kappa);
        let sqrt_kappa = linalg::sym_fn(&kappa, f64::sqrt);
        Ok(LinRegModel { kappa, sqrt_kappa, theta_star, sigma_eps, feature_law })
    }

    /// One-dimensional model with scalar curvature.
    pub fn scalar(kappa: f64, theta_star: f64, sigma_eps: f64, feature_law: FeatureLaw) -> Result<Self> {
        Self::new(
            Mat::from_element(1, 1, kappa),
            Vector::from_element(1, theta_star),
            sigma_eps,
            feature_law,
        )
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn kappa(&self) -> &Mat {
        &self.kappa
    }

    pub fn sqrt_kappa(&self) -> &Mat {
        &self.sqrt_kappa
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn feature_law(&self) -> FeatureLaw {
        self.feature_law
    }

    pub fn objective(&self) -> QuadraticObjective {
        QuadraticObjective {
            kappa: self.kappa.clone(),
            theta_star: self.theta_star.clone(),
            offset: 0.5 * self.sigma_eps * self.sigma_eps,
        }
    }

    /// Kurtosis of the scalar feature law, when there is one.
    pub fn kurtosis(&self) -> Option<f64> {
        match self.feature_law {
            FeatureLaw::Gaussian => Some(3.0),
            FeatureLaw::ScalarIid { law } => Some(law.kurtosis()),
            FeatureLaw::Abstract { b_eq } => (self.dim() == 1).then_some(2.0 * b_eq + 1.0),
        }
    }

    /// B^Eq such that S(θ) = 2B^Eq κ(θ-θ*)⊗²κ + σ_ε²κ.
    pub fn b_eq(&self) -> Result<f64> {
        match self.feature_law {
            FeatureLaw::Gaussian => Ok(1.0),
            FeatureLaw::ScalarIid { law } => {
                if self.dim() == 1 || law == ScalarLaw::Gaussian {
                    Ok(0.5 * (law.kurtosis() - 1.0))
                } else {
                    Err(Error::invalid(
                        "B^Eq is not defined for non-Gaussian i.i.d. coordinates in d > 1; use an abstract law",
                    ))
                }
            }
            FeatureLaw::Abstract { b_eq } => Ok(b_eq),
        }
    }

    pub fn population_risk(&self, theta: &Vector) -> Result<f64> {
        Ok(self.excess_risk(theta)? + 0.5 * self.sigma_eps * self.sigma_eps)
    }

    pub fn excess_risk(&self, theta: &Vector) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        let d = theta - &self.theta_star;
        Ok(0.5 * linalg::quad_form(&self.kappa, &d))
    }

    pub fn gradient_covariance(&self, theta: &Vector) -> Result<Mat> {
        check_dim(self.dim(), theta.len())?;
        let c = 2.0 * self.b_eq()?;
        let g = &self.kappa * (theta - &self.theta_star);
        Ok(&g * g.transpose() * c + &self.kappa * (self.sigma_eps * self.sigma_eps))
    }

    /// Symmetric PSD Q with Q·Q = S(θ).
    pub fn sqrt_gradient_covariance(&self, theta: &Vector) -> Result<Mat> {
        check_dim(self.dim(), theta.len())?;
        let c = 2.0 * self.b_eq()?;
        let w = &self.sqrt_kappa * (theta - &self.theta_star);
        let wwt = &w * w.transpose();
        if self.dim() == 1 || linalg::commutes(&self.kappa, &wwt, 1e-12) {
            let t = w.norm_squared();
            let s = self.sigma_eps;
            let b = if t == 0.0 { 0.0 } else { (-s + (c * t + s * s).sqrt()) / t };
            let d = self.dim();
            let inner = Mat::identity(d, d) * s + wwt * b;
            // κ commutes with wwᵀ, so √S = κ^{1/2}(cwwᵀ + σ²I)^{1/2}
            return Ok(&self.sqrt_kappa * inner);
        }
        linalg::psd_sqrt(&self.gradient_covariance(theta)?)
    }

    pub fn sample_feature<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        let law = match self.feature_law {
            FeatureLaw::Gaussian => ScalarLaw::Gaussian,
            FeatureLaw::ScalarIid { law } => law,
            FeatureLaw::Abstract { .. } => {
                return Err(Error::invalid("abstract feature law has no sampler"));
            }
        };
        let s = Vector::from_fn(self.dim(), |_, _| law.sample(rng));
        Ok(&self.sqrt_kappa * s)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DataPoint> {
        let x = self.sample_feature(rng)?;
        let eps: f64 = StandardNormal.sample(rng);
        let y = self.theta_star.dot(&x) + self.sigma_eps * eps;
        Ok(DataPoint { x, y })
    }

    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<DataPoint>> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }

    /// Scalar view for d = 1 fast paths: (√κ, θ*, σ_ε, law).
    pub fn scalar_view(&self) -> Result<ScalarModel> {
        if self.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: self.dim() });
        }
        let law = match self.feature_law {
            FeatureLaw::Gaussian => ScalarLaw::Gaussian,
            FeatureLaw::ScalarIid { law } => law,
            FeatureLaw::Abstract { .. } => {
                return Err(Error::invalid("abstract feature law has no sampler"));
            }
        };
        Ok(ScalarModel {
            kappa: self.kappa[(0, 0)],
            sqrt_kappa: self.sqrt_kappa[(0, 0)],
            theta_star: self.theta_star[0],
            sigma_eps: self.sigma_eps,
            law,
        })
    }
}

/// d = 1 model; draws consume the stream exactly like `LinRegModel::sample_point`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarModel {
    pub kappa: f64,
    pub sqrt_kappa: f64,
    pub theta_star: f64,
    pub sigma_eps: f64,
    pub law: ScalarLaw,
}

impl ScalarModel {
    #[inline]
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let x = self.sqrt_kappa * self.law.sample(rng);
        let eps: f64 = StandardNormal.sample(rng);
        (x, self.theta_star * x + self.sigma_eps * eps)
    }
}

/// ∇R_z(θ) = (⟨θ, x⟩ − y)x.
pub fn point_gradient(theta: &Vector, z: &DataPoint) -> Result<Vector> {
    check_dim(theta.len(), z.x.len())?;
    Ok(&z.x * (theta.dot(&z.x) - z.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn unit() -> LinRegModel {
        LinRegModel::scalar(1.0, 0.0, 1.0, FeatureLaw::Gaussian).unwrap()
    }

    #[test]
    fn risk_examples() {
        let m = unit();
        assert_eq!(m.population_risk(&Vector::from_element(1, 0.0)).unwrap(), 0.5);
        assert_eq!(m.population_risk(&Vector::from_element(1, 1.0)).unwrap(), 1.0);
        let m2 = LinRegModel::new(Mat::identity(2, 2), Vector::zeros(2), 0.0, FeatureLaw::Gaussian).unwrap();
        assert_eq!(m2.population_risk(&Vector::from_vec(vec![3.0, 4.0])).unwrap(), 12.5);
        assert!(m2.population_risk(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn gradient_examples() {
        let z = DataPoint { x: Vector::from_element(1, 2.0), y: 1.0 };
        assert_eq!(point_gradient(&Vector::from_element(1, 1.0), &z).unwrap()[0], 2.0);
        let z0 = DataPoint { x: Vector::zeros(2), y: 3.0 };
        assert_eq!(point_gradient(&Vector::from_element(2, 1.0), &z0).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn covariance_examples() {
        let m = unit();
        let s = m.gradient_covariance(&Vector::from_element(1, 1.0)).unwrap();
        assert!((s[(0, 0)] - 3.0).abs() < 1e-15);
        let q = m.sqrt_gradient_covariance(&Vector::from_element(1, 1.0)).unwrap();
        assert!((q[(0, 0)] - 3f64.sqrt()).abs() < 1e-12);
        let q0 = m.sqrt_gradient_covariance(&Vector::from_element(1, 0.0)).unwrap();
        assert!((q0[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn b_eq_values() {
        let exp = LinRegModel::scalar(1.0, 0.0, 1.0, FeatureLaw::ScalarIid { law: ScalarLaw::Exponential }).unwrap();
        assert_eq!(exp.b_eq().unwrap(), 4.0);
        let rad = LinRegModel::scalar(1.0, 0.0, 1.0, FeatureLaw::ScalarIid { law: ScalarLaw::Rademacher }).unwrap();
        assert_eq!(rad.b_eq().unwrap(), 0.0);
        assert_eq!(unit().b_eq().unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_kappa() {
        let k = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(LinRegModel::new(k, Vector::zeros(2), 1.0, FeatureLaw::Gaussian).is_err());
        let k = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(LinRegModel::new(k, Vector::zeros(2), 1.0, FeatureLaw::Gaussian).is_err());
    }

    #[test]
    fn scalar_view_consumes_stream_like_general_sampler() {
        let m = LinRegModel::scalar(2.5, -0.3, 0.7, FeatureLaw::ScalarIid { law: ScalarLaw::Exponential }).unwrap();
        let sv = m.scalar_view().unwrap();
        let mut a = derive_stream(11, &["x"]);
        let mut b = derive_stream(11, &["x"]);
        for _ in 0..50 {
            let p = m.sample_point(&mut a).unwrap();
            let (x, y) = sv.sample_point(&mut b);
            assert_eq!(p.x[0], x);
            assert_eq!(p.y, y);
        }
    }
}
