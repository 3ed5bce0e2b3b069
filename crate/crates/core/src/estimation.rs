//! Counterfactual importance-sampling estimation.
//!
//! Samples drawn from the proposal `q` are reweighted by `p(x) / q(x)` to
//! estimate the expected KPI under a counterfactual Gaussian `p`. Every
//! evaluation carries its effective sample size and standard error; deciding
//! what to do with degenerate weights is left to the policies.

use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianComponent, LabeledSample, MixtureProposal, ParameterPoint};
use crate::error::{AmisError, Result};

/// A counterfactual Gaussian `p` together with the proposal component whose
/// grid spawned it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualCandidate {
    pub target: GaussianComponent,
    pub source_component: usize,
    /// Signed offset of the candidate mean from its source mean, in units of
    /// the counterfactual sigma.
    pub grid_offset: f64,
}

impl CounterfactualCandidate {
    pub fn mean(&self) -> &ParameterPoint {
        &self.target.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub candidate: CounterfactualCandidate,
    pub estimate: f64,
    pub ess: f64,
    pub stderr: f64,
    pub n: usize,
    /// ESS of `p` against the components sharing the source peak's location,
    /// over the `local_n` samples those components drew. Equals `ess` and `n`
    /// when evaluated without component labels.
    pub local_ess: f64,
    pub local_n: usize,
}

impl CandidateEvaluation {
    /// ESS divided by the number of samples, in (0, 1].
    pub fn normalized_ess(&self) -> f64 {
        self.ess / self.n as f64
    }

    /// `local_ess / local_n`, or 0 when the source peak drew no samples.
    pub fn normalized_local_ess(&self) -> f64 {
        if self.local_n == 0 {
            0.0
        } else {
            self.local_ess / self.local_n as f64
        }
    }

    /// Ranking score: estimate plus `confidence_coefficient` standard errors.
    pub fn score(&self, confidence_coefficient: f64) -> f64 {
        if confidence_coefficient == 0.0 {
            self.estimate
        } else {
            self.estimate + confidence_coefficient * self.stderr
        }
    }
}

/// Which importance-sampling estimator to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `(1/N) sum f_i w_i`.
    #[default]
    Plain,
    /// `sum f_i w_i / sum w_i`.
    SelfNormalized,
}

/// `w_i = p(x_i) / q(x_i)`, formed as a log-density difference.
pub fn importance_weights(
    p: &GaussianComponent,
    q: &MixtureProposal,
    xs: &[ParameterPoint],
) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(AmisError::malformed("no samples to weight"));
    }
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let log_q = q.log_pdf(x)?;
            let w = (p.log_pdf(x)? - log_q).exp();
            if log_q == f64::NEG_INFINITY || !w.is_finite() {
                return Err(AmisError::ProposalUnderflow {
                    index: i,
                    point: x.coords().to_vec(),
                });
            }
            Ok(w)
        })
        .collect()
}

fn check_aligned(f_values: &[f64], weights: &[f64], min: usize) -> Result<()> {
    if f_values.len() != weights.len() {
        return Err(AmisError::malformed(format!(
            "{} KPI values but {} weights",
            f_values.len(),
            weights.len()
        )));
    }
    if f_values.len() < min {
        return Err(AmisError::InsufficientData {
            needed: min,
            got: f_values.len(),
        });
    }
    Ok(())
}

/// Plain importance-sampling estimate `(1/N) sum f_i w_i`.
pub fn is_estimate(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    check_aligned(f_values, weights, 1)?;
    let sum: f64 = f_values.iter().zip(weights).map(|(f, w)| f * w).sum();
    Ok(sum / f_values.len() as f64)
}

/// Self-normalized estimate `sum f_i w_i / sum w_i`.
pub fn self_normalized_estimate(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    check_aligned(f_values, weights, 1)?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(AmisError::DegenerateWeights);
    }
    let sum: f64 = f_values.iter().zip(weights).map(|(f, w)| f * w).sum();
    Ok(sum / total)
}

/// Effective sample size `(sum w)^2 / sum w^2`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(AmisError::malformed("weights must be finite and non-negative"));
    }
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(AmisError::DegenerateWeights);
    }
    if weights.iter().all(|w| *w == max) {
        return Ok(weights.len() as f64);
    }
    let sums = |scale: f64| {
        weights.iter().fold((0.0, 0.0), |(s, s2), w| {
            let r = w / scale;
            (s + r, s2 + r * r)
        })
    };
    let (mut s, mut s2) = sums(1.0);
    // Rescale only when squaring overflowed or underflowed.
    if !(s * s).is_finite() || !s2.is_normal() {
        (s, s2) = sums(max);
    }
    Ok((s * s / s2).clamp(1.0, weights.len() as f64))
}

/// Standard error of the plain estimate: sample sd of `f_i w_i` over `sqrt(N)`.
pub fn is_stderr(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    check_aligned(f_values, weights, 2)?;
    let terms: Vec<f64> = f_values.iter().zip(weights).map(|(f, w)| f * w).collect();
    Ok(sample_sd(&terms) / (terms.len() as f64).sqrt())
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

// Delta-method standard error of the ratio estimator.
fn self_normalized_stderr(f_values: &[f64], weights: &[f64], estimate: f64) -> Result<f64> {
    check_aligned(f_values, weights, 2)?;
    let n = weights.len() as f64;
    let mean_w = weights.iter().sum::<f64>() / n;
    let terms: Vec<f64> = f_values
        .iter()
        .zip(weights)
        .map(|(f, w)| w * (f - estimate) / mean_w)
        .collect();
    Ok(sample_sd(&terms) / n.sqrt())
}

fn evaluate_one(
    cand: &CounterfactualCandidate,
    q: &MixtureProposal,
    xs: &[ParameterPoint],
    f_values: &[f64],
    estimator: Estimator,
) -> Result<CandidateEvaluation> {
    let weights = importance_weights(&cand.target, q, xs)?;
    let (estimate, stderr) = match estimator {
        Estimator::Plain => (
            is_estimate(f_values, &weights)?,
            is_stderr(f_values, &weights)?,
        ),
        Estimator::SelfNormalized => {
            let est = self_normalized_estimate(f_values, &weights)?;
            (est, self_normalized_stderr(f_values, &weights, est)?)
        }
    };
    Ok(CandidateEvaluation {
        candidate: cand.clone(),
        estimate,
        ess: ess(&weights)?,
        stderr,
        n: xs.len(),
        local_ess: ess(&weights)?,
        local_n: xs.len(),
    })
}

/// Indices of the components located exactly at the source component's mean.
fn colocated(q: &MixtureProposal, source: usize) -> Result<Vec<usize>> {
    let comps = q.components();
    let anchor = &comps
        .get(source)
        .ok_or_else(|| AmisError::malformed(format!("source component {source} out of range")))?
        .mean;
    Ok((0..comps.len()).filter(|k| comps[*k].mean == *anchor).collect())
}

/// `(ess, count)` of `p` against the sub-mixture of components co-located
/// with `source`, using only the samples those components drew.
pub fn local_ess(
    p: &GaussianComponent,
    q: &MixtureProposal,
    source: usize,
    samples: &[LabeledSample],
) -> Result<(f64, usize)> {
    let members = colocated(q, source)?;
    let rates: Vec<f64> = members.iter().map(|k| q.weights()[*k]).collect();
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Ok((0.0, 0));
    }
    let comps: Vec<GaussianComponent> = members.iter().map(|k| q.components()[*k].clone()).collect();
    let local = MixtureProposal::new(comps, rates.iter().map(|r| r / total).collect())?;
    let xs: Vec<ParameterPoint> = samples
        .iter()
        .filter(|s| members.contains(&s.component))
        .map(|s| s.point.clone())
        .collect();
    if xs.is_empty() {
        return Ok((0.0, 0));
    }
    let weights = importance_weights(p, &local, &xs)?;
    match ess(&weights) {
        Ok(e) => Ok((e, xs.len())),
        Err(AmisError::DegenerateWeights) => Ok((0.0, xs.len())),
        Err(e) => Err(e),
    }
}

/// Like [`evaluate_candidates_with`], additionally filling the local ESS from
/// the component labels of the samples.
pub fn evaluate_candidates_labeled(
    cands: &[CounterfactualCandidate],
    q: &MixtureProposal,
    samples: &[LabeledSample],
    f_values: &[f64],
    estimator: Estimator,
) -> Result<Vec<CandidateEvaluation>> {
    let xs: Vec<ParameterPoint> = samples.iter().map(|s| s.point.clone()).collect();
    let mut evals = evaluate_candidates_with(cands, q, &xs, f_values, estimator)?;
    for (index, e) in evals.iter_mut().enumerate() {
        let (le, ln) = local_ess(&e.candidate.target, q, e.candidate.source_component, samples)
            .map_err(|err| AmisError::Candidate {
                index,
                source: Box::new(err),
            })?;
        e.local_ess = le;
        e.local_n = ln;
    }
    Ok(evals)
}

/// Evaluates every candidate against the same sample set with the plain estimator.
pub fn evaluate_candidates(
    cands: &[CounterfactualCandidate],
    q: &MixtureProposal,
    xs: &[ParameterPoint],
    f_values: &[f64],
) -> Result<Vec<CandidateEvaluation>> {
    evaluate_candidates_with(cands, q, xs, f_values, Estimator::Plain)
}

pub fn evaluate_candidates_with(
    cands: &[CounterfactualCandidate],
    q: &MixtureProposal,
    xs: &[ParameterPoint],
    f_values: &[f64],
    estimator: Estimator,
) -> Result<Vec<CandidateEvaluation>> {
    if cands.is_empty() {
        return Err(AmisError::NoCandidates);
    }
    if xs.len() != f_values.len() {
        return Err(AmisError::malformed(format!(
            "{} samples but {} KPI values",
            xs.len(),
            f_values.len()
        )));
    }
    cands
        .iter()
        .enumerate()
        .map(|(index, c)| {
            evaluate_one(c, q, xs, f_values, estimator).map_err(|e| AmisError::Candidate {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Exact `E_p[f]` for the 1-d landscape `f(x) = amplitude * N(x; mu0, sigma0)`.
pub fn true_gaussian_expectation(
    amplitude: f64,
    mu0: &ParameterPoint,
    sigma0: f64,
    p: &GaussianComponent,
) -> Result<f64> {
    if mu0.dim() != 1 {
        return Err(AmisError::UnsupportedDimension(mu0.dim()));
    }
    if p.dim() != 1 {
        return Err(AmisError::UnsupportedDimension(p.dim()));
    }
    let s = (sigma0 * sigma0 + p.sigma[0] * p.sigma[0]).sqrt();
    let conv = GaussianComponent::univariate(mu0.x(), s);
    Ok(amplitude * conv.log_pdf(&p.mean)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{gaussian_pdf, sample};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(m: f64, s: f64) -> GaussianComponent {
        GaussianComponent::univariate(m, s)
    }

    fn cand(m: f64, s: f64) -> CounterfactualCandidate {
        CounterfactualCandidate {
            target: g(m, s),
            source_component: 0,
            grid_offset: 0.0,
        }
    }

    // Independent oracle: trapezoid integral of f(x) p(x).
    fn quad_expectation(amp: f64, mu0: f64, s0: f64, mp: f64, sp: f64) -> f64 {
        let pdf = |x: f64, m: f64, s: f64| {
            (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let (lo, hi, n) = (-60.0, 60.0, 240_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| amp * pdf(x, mu0, s0) * pdf(x, mp, sp);
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn weights_examples() {
        let q = MixtureProposal::single(g(3.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = sample(&q, 200, &mut rng).unwrap();
        let w = importance_weights(&g(3.0, 0.5), &q, &xs).unwrap();
        assert!(w.iter().all(|w| *w == 1.0));

        let w = importance_weights(&g(6.0, 1.0), &MixtureProposal::single(g(5.0, 1.0)), &[5.0.into()])
            .unwrap();
        assert!((w[0] - 0.6065306597).abs() < 1e-10);

        let mvu = MixtureProposal::new(vec![g(5.0, 1.0), g(5.0, 3.0)], vec![0.8, 0.2]).unwrap();
        let w = importance_weights(&g(5.0, 1.0), &mvu, &[5.0.into()]).unwrap();
        assert!((w[0] - 0.3989422804 / 0.3457499763).abs() < 1e-9);
        assert!((w[0] - 1.1538).abs() < 1e-4);
    }

    #[test]
    fn weights_reject_unreachable_points() {
        let q = MixtureProposal::single(g(0.0, 0.01));
        let err = importance_weights(&g(100.0, 1.0), &q, &[100.0.into()]).unwrap_err();
        assert!(matches!(err, AmisError::ProposalUnderflow { index: 0, .. }));
        assert!(importance_weights(&g(0.0, 1.0), &q, &[]).is_err());
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(is_estimate(&[1.0, 2.0, 6.0], &[1.0; 3]).unwrap(), 3.0);
        assert_eq!(is_estimate(&[2.0, 4.0], &[1.0, 3.0]).unwrap(), 7.0);
        assert!(is_estimate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(is_estimate(&[], &[]).is_err());
        assert_eq!(self_normalized_estimate(&[2.0, 4.0], &[1.0, 3.0]).unwrap(), 3.5);
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[0.7; 40]).unwrap(), 40.0);
        assert_eq!(ess(&[1.0, 3.0]).unwrap(), 1.6);
        assert_eq!(ess(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ess(&[0.0, 0.0]), Err(AmisError::DegenerateWeights));
        assert!(ess(&[1e300, 1e300]).unwrap() == 2.0);
    }

    #[test]
    fn stderr_examples() {
        assert_eq!(is_stderr(&[2.0, 2.0, 2.0], &[1.0; 3]).unwrap(), 0.0);
        assert!((is_stderr(&[0.0, 1.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            is_stderr(&[1.0], &[1.0]),
            Err(AmisError::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn stderr_shrinks_with_root_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = MixtureProposal::single(g(0.0, 1.0));
        let (mut small, mut large) = (0.0, 0.0);
        for _ in 0..1000 {
            let xs = sample(&q, 400, &mut rng).unwrap();
            let f: Vec<f64> = xs.iter().map(|x| x.x() * x.x()).collect();
            let w = vec![1.0; 400];
            small += is_stderr(&f[..200], &w[..200]).unwrap();
            large += is_stderr(&f, &w).unwrap();
        }
        let ratio = small / large;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn true_expectation_matches_quadrature() {
        let v = true_gaussian_expectation(100.0, &10.0.into(), 1.0, &g(10.0, 1.0)).unwrap();
        assert!((v - 28.2095).abs() < 1e-4);
        assert!((v - quad_expectation(100.0, 10.0, 1.0, 10.0, 1.0)).abs() < 1e-8);
        let v = true_gaussian_expectation(100.0, &10.0.into(), 1.0, &g(9.5, 1.0)).unwrap();
        assert!((v - 26.50035).abs() < 1e-4);
        assert!((v - quad_expectation(100.0, 10.0, 1.0, 9.5, 1.0)).abs() < 1e-8);
        assert_eq!(true_gaussian_expectation(0.0, &1.0.into(), 1.0, &g(3.0, 1.0)).unwrap(), 0.0);
        let point = true_gaussian_expectation(7.0, &2.0.into(), 1.5, &g(3.0, 1e-6)).unwrap();
        let direct = 7.0 * gaussian_pdf(&g(2.0, 1.5), &3.0.into()).unwrap();
        assert!((point - direct).abs() < 1e-10);
        assert!(matches!(
            true_gaussian_expectation(1.0, &ParameterPoint::new(vec![0.0, 0.0]).unwrap(), 1.0, &g(0.0, 1.0)),
            Err(AmisError::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn estimate_tracks_closed_form() {
        let q = MixtureProposal::single(g(9.0, 1.0));
        let p = g(9.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let xs = sample(&q, 10_000, &mut rng).unwrap();
        let f: Vec<f64> = xs.iter().map(|x| 100.0 * gaussian_pdf(&g(10.0, 1.0), x).unwrap()).collect();
        let w = importance_weights(&p, &q, &xs).unwrap();
        let est = is_estimate(&f, &w).unwrap();
        let se = is_stderr(&f, &w).unwrap();
        let truth = true_gaussian_expectation(100.0, &10.0.into(), 1.0, &p).unwrap();
        assert!((est - truth).abs() < 3.0 * se, "est {est} truth {truth} se {se}");
    }

    #[test]
    fn evaluate_candidates_contract() {
        let q = MixtureProposal::single(g(5.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs = sample(&q, 300, &mut rng).unwrap();
        let f: Vec<f64> = xs.iter().map(|x| x.x().sin() + 2.0).collect();
        let ev = evaluate_candidates(&[cand(5.0, 1.0)], &q, &xs, &f).unwrap();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((ev[0].estimate - mean).abs() < 1e-12);
        assert_eq!(ev[0].ess, 300.0);
        assert!(matches!(
            evaluate_candidates(&[], &q, &xs, &f),
            Err(AmisError::NoCandidates)
        ));

        // Noiseless landscape peaked at 10: estimates over a grid around 5 rise toward 6.
        let f: Vec<f64> = xs.iter().map(|x| 100.0 * gaussian_pdf(&g(10.0, 1.0), x).unwrap()).collect();
        let cands: Vec<_> = (0..11).map(|i| cand(4.0 + 0.2 * i as f64, 1.0)).collect();
        let ev = evaluate_candidates(&cands, &q, &xs, &f).unwrap();
        assert_eq!(ev.len(), 11);
        for (e, c) in ev.iter().zip(&cands) {
            assert_eq!(&e.candidate, c);
        }
        assert!(ev.windows(2).all(|w| w[1].estimate > w[0].estimate));
    }

    #[test]
    fn local_ess_ignores_other_peaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = MixtureProposal::new(vec![g(0.0, 1.0), g(20.0, 1.0), g(40.0, 1.0)], vec![0.2, 0.5, 0.3])
            .unwrap();
        let drawn = q.sample_labeled(2000, &mut rng);
        let xs: Vec<ParameterPoint> = drawn.iter().map(|s| s.point.clone()).collect();
        let f = vec![1.0; xs.len()];
        let c = CounterfactualCandidate {
            target: g(0.0, 1.0),
            source_component: 0,
            grid_offset: 0.0,
        };
        let e = &evaluate_candidates_labeled(std::slice::from_ref(&c), &q, &drawn, &f, Estimator::Plain).unwrap()[0];
        // p equals its source component: every local weight is 1.
        assert_eq!(e.local_n, drawn.iter().filter(|s| s.component == 0).count());
        assert!((e.normalized_local_ess() - 1.0).abs() < 1e-9);
        // Against the whole mixture the ratio is about the mixing rate.
        assert!((e.normalized_ess() - 0.2).abs() < 0.03, "{}", e.normalized_ess());
        assert_eq!(e.estimate, evaluate_candidates(&[c], &q, &xs, &f).unwrap()[0].estimate);
    }

    #[test]
    fn local_ess_pools_colocated_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = MixtureProposal::new(vec![g(5.0, 1.0), g(5.0, 3.0)], vec![0.8, 0.2]).unwrap();
        let drawn = q.sample_labeled(500, &mut rng);
        let xs: Vec<ParameterPoint> = drawn.iter().map(|s| s.point.clone()).collect();
        let p = g(6.0, 2.0);
        let (le, ln) = local_ess(&p, &q, 1, &drawn).unwrap();
        assert_eq!(ln, 500);
        assert!((le - ess(&importance_weights(&p, &q, &xs).unwrap()).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn local_ess_without_local_samples_is_zero() {
        let q = MixtureProposal::new(vec![g(0.0, 1.0), g(9.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let drawn = vec![LabeledSample { point: 9.0.into(), component: 1 }];
        assert_eq!(local_ess(&g(0.0, 1.0), &q, 0, &drawn).unwrap(), (0.0, 0));
        assert!(local_ess(&g(0.0, 1.0), &q, 2, &drawn).is_err());
    }

    #[test]
    fn evaluate_candidates_tags_failures() {
        let q = MixtureProposal::single(g(0.0, 0.01));
        let err = evaluate_candidates(&[cand(0.0, 1.0), cand(1.0, 1.0)], &q, &[50.0.into(), 0.0.into()], &[1.0, 1.0])
            .unwrap_err();
        assert!(matches!(err, AmisError::Candidate { index: 0, .. }));
    }

    #[test]
    fn unbiased_over_repetitions() {
        let q = MixtureProposal::single(g(9.0, 1.0));
        let p = g(9.6, 1.0);
        let truth = true_gaussian_expectation(100.0, &10.0.into(), 1.0, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let reps: Vec<f64> = (0..200)
            .map(|_| {
                let xs = sample(&q, 1000, &mut rng).unwrap();
                let f: Vec<f64> = xs.iter().map(|x| 100.0 * gaussian_pdf(&g(10.0, 1.0), x).unwrap()).collect();
                is_estimate(&f, &importance_weights(&p, &q, &xs).unwrap()).unwrap() - truth
            })
            .collect();
        let mean = reps.iter().sum::<f64>() / 200.0;
        let sd = sample_sd(&reps);
        let z = mean / (sd / 200f64.sqrt());
        assert!(z.abs() < 4.0, "z {z}");
    }

    proptest! {
        #[test]
        fn p_equals_q_gives_sample_mean(mu in -5.0..5.0f64, s in 0.1..3.0f64, seed in any::<u64>(),
                                        fs in prop::collection::vec(-100.0..100.0f64, 2..60)) {
            let q = MixtureProposal::single(g(mu, s));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs = sample(&q, fs.len(), &mut rng).unwrap();
            let w = importance_weights(&g(mu, s), &q, &xs).unwrap();
            let est = is_estimate(&fs, &w).unwrap();
            let mean = fs.iter().sum::<f64>() / fs.len() as f64;
            prop_assert!((est - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }

        #[test]
        fn ess_bounds(w in prop::collection::vec(0.0..10.0f64, 1..80)) {
            prop_assume!(w.iter().any(|x| *x > 0.0));
            let e = ess(&w).unwrap();
            prop_assert!(e >= 1.0 && e <= w.len() as f64);
        }

        #[test]
        fn scale_covariance(fs in prop::collection::vec(-10.0..10.0f64, 2..30), c in -5.0..5.0f64) {
            let w: Vec<f64> = (0..fs.len()).map(|i| 0.5 + i as f64 * 0.1).collect();
            let scaled: Vec<f64> = fs.iter().map(|f| f * c).collect();
            let (e, s) = (is_estimate(&fs, &w).unwrap(), is_stderr(&fs, &w).unwrap());
            let (es, ss) = (is_estimate(&scaled, &w).unwrap(), is_stderr(&scaled, &w).unwrap());
            prop_assert!((es - c * e).abs() <= 1e-9 * (1.0 + e.abs() * c.abs()));
            prop_assert!((ss - c.abs() * s).abs() <= 1e-9 * (1.0 + s * c.abs()));
        }
    }
}
