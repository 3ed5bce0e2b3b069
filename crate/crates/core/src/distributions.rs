//! Gaussian and diagonal Gaussian-mixture densities, sampling and the L1
//! geometry used to separate mixture peaks.
//!
//! Densities are evaluated in log space and only exponentiated by the public
//! `*_pdf` functions, so ratios between far-tail densities can be formed from
//! the `*_log_pdf` variants without underflow.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AmisError, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Tolerance on the mixing-rate simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point in the tunable-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(AmisError::malformed("parameter point must have d >= 1"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(AmisError::malformed(format!(
                "parameter point has non-finite coordinate {c}"
            )));
        }
        Ok(ParameterPoint(coords))
    }

    /// One-dimensional point. Panics on a non-finite value.
    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x]).expect("finite scalar coordinate")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// First coordinate; the natural accessor for 1-d experiments.
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<f64> for ParameterPoint {
    fn from(x: f64) -> Self {
        ParameterPoint::scalar(x)
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(AmisError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Diagonal Gaussian with per-axis scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: ParameterPoint,
    pub sigma: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(mean: ParameterPoint, sigma: Vec<f64>) -> Result<Self> {
        check_dim(mean.dim(), sigma.len())?;
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(AmisError::malformed(format!(
                "component sigma must be positive and finite, got {s}"
            )));
        }
        Ok(GaussianComponent { mean, sigma })
    }

    /// Isotropic component: the same scale on every axis.
    pub fn isotropic(mean: ParameterPoint, sigma: f64) -> Result<Self> {
        let d = mean.dim();
        Self::new(mean, vec![sigma; d])
    }

    /// 1-d convenience constructor. Panics on invalid arguments.
    pub fn univariate(mean: f64, sigma: f64) -> Self {
        Self::isotropic(ParameterPoint::scalar(mean), sigma).expect("valid univariate gaussian")
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn log_pdf(&self, x: &ParameterPoint) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(self
            .mean
            .coords()
            .iter()
            .zip(&self.sigma)
            .zip(x.coords())
            .map(|((m, s), xi)| {
                let z = (xi - m) / s;
                -0.5 * z * z - s.ln() - LN_SQRT_2PI
            })
            .sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterPoint {
        let coords = self
            .mean
            .coords()
            .iter()
            .zip(&self.sigma)
            .map(|(m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect();
        ParameterPoint(coords)
    }
}

pub fn gaussian_pdf(c: &GaussianComponent, x: &ParameterPoint) -> Result<f64> {
    c.log_pdf(x).map(f64::exp)
}

/// A sampled point together with the index of the component that drew it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub point: ParameterPoint,
    pub component: usize,
}

/// Gaussian mixture proposal `q(x) = sum_k w_k N(x | mean_k, sigma_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureProposal {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
}

impl MixtureProposal {
    pub fn new(components: Vec<GaussianComponent>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(AmisError::malformed("mixture needs at least one component"));
        }
        if components.len() != weights.len() {
            return Err(AmisError::malformed(format!(
                "{} components but {} mixing rates",
                components.len(),
                weights.len()
            )));
        }
        let d = components[0].dim();
        for c in &components {
            check_dim(d, c.dim())?;
        }
        check_simplex(&weights)?;
        Ok(MixtureProposal {
            components,
            weights,
        })
    }

    pub fn single(component: GaussianComponent) -> Self {
        MixtureProposal {
            components: vec![component],
            weights: vec![1.0],
        }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn means(&self) -> Vec<ParameterPoint> {
        self.components.iter().map(|c| c.mean.clone()).collect()
    }

    pub fn log_pdf(&self, x: &ParameterPoint) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, w)| c.log_pdf(x).map(|lp| lp + w.ln()))
            .collect::<Result<_>>()?;
        Ok(log_sum_exp(&terms))
    }

    /// Draws `n` points, recording which component produced each one.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<LabeledSample> {
        (0..n)
            .map(|_| {
                let component = self.draw_component(rng);
                LabeledSample {
                    point: self.components[component].sample(rng),
                    component,
                }
            })
            .collect()
    }

    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.components.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // round-off left u above the final partial sum
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

pub fn mixture_pdf(q: &MixtureProposal, x: &ParameterPoint) -> Result<f64> {
    q.log_pdf(x).map(f64::exp)
}

/// Draws `n >= 1` points from `q`.
pub fn sample<R: Rng + ?Sized>(
    q: &MixtureProposal,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ParameterPoint>> {
    if n == 0 {
        return Err(AmisError::malformed("sample count must be at least 1"));
    }
    Ok(q.sample_labeled(n, rng)
        .into_iter()
        .map(|s| s.point)
        .collect())
}

pub fn l1_distance(a: &ParameterPoint, b: &ParameterPoint) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y).abs())
        .sum())
}

pub(crate) fn check_simplex(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(AmisError::malformed(format!(
            "mixing rate must be finite and non-negative, got {w}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(AmisError::malformed(format!(
            "mixing rates must sum to 1, got {total}"
        )));
    }
    Ok(())
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
