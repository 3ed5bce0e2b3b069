//! Offline tuning simulation: a synthetic noisy KPI landscape, the iterative
//! sample / observe / evaluate / update loop, and regret and convergence
//! metrics aggregated over repeated runs.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianComponent, MixtureProposal, ParameterPoint};
use crate::error::{AmisError, Result};
use crate::estimation::{evaluate_candidates_labeled, importance_weights, is_estimate, true_gaussian_expectation, Estimator};
use crate::policies::{filter_by_ess, EssScope, generate_candidates, major_peak, Policy, PolicyState};

/// Source of KPI observations for a parameter setting.
///
/// Implementations are shared across concurrently executing runs, so they
/// must be `Sync`; all randomness comes from the stream passed in.
pub trait KpiOracle: Send + Sync {
    /// One noisy KPI observation at `x`.
    fn observe(&self, x: &ParameterPoint, rng: &mut dyn RngCore) -> f64;

    /// Noiseless KPI at `x`, when known.
    fn true_value(&self, _x: &ParameterPoint) -> Option<f64> {
        None
    }

    /// Location of the global optimum, when known.
    fn optimum(&self) -> Option<ParameterPoint> {
        None
    }
}

/// `f(x) = amplitude * N(x; mu_star, sigma_star) + N(0, gamma * sigma_star)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    pub mu_star: ParameterPoint,
    pub sigma_star: f64,
    pub amplitude: f64,
    pub gamma: f64,
}

impl SyntheticLandscape {
    pub fn new(mu_star: ParameterPoint, sigma_star: f64, amplitude: f64, gamma: f64) -> Result<Self> {
        if !(sigma_star > 0.0 && sigma_star.is_finite()) {
            return Err(AmisError::malformed(format!("sigma_star must be positive, got {sigma_star}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(AmisError::malformed(format!("gamma must be >= 0, got {gamma}")));
        }
        if !amplitude.is_finite() {
            return Err(AmisError::malformed("amplitude must be finite"));
        }
        Ok(SyntheticLandscape {
            mu_star,
            sigma_star,
            amplitude,
            gamma,
        })
    }

    fn density(&self) -> GaussianComponent {
        GaussianComponent::isotropic(self.mu_star.clone(), self.sigma_star)
            .expect("validated landscape")
    }

    pub fn noiseless(&self, x: &ParameterPoint) -> Result<f64> {
        Ok(self.amplitude * self.density().log_pdf(x)?.exp())
    }
}

/// One KPI observation from the synthetic landscape.
pub fn synthetic_observe<R: Rng + ?Sized>(
    land: &SyntheticLandscape,
    x: &ParameterPoint,
    rng: &mut R,
) -> Result<f64> {
    let clean = land.noiseless(x)?;
    if land.gamma == 0.0 {
        return Ok(clean);
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(clean + land.gamma * land.sigma_star * z)
}

impl KpiOracle for SyntheticLandscape {
    fn observe(&self, x: &ParameterPoint, rng: &mut dyn RngCore) -> f64 {
        synthetic_observe(self, x, rng).expect("observation dimension matches landscape")
    }

    fn true_value(&self, x: &ParameterPoint) -> Option<f64> {
        self.noiseless(x).ok()
    }

    fn optimum(&self) -> Option<ParameterPoint> {
        Some(self.mu_star.clone())
    }
}

/// When a run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    pub tolerance: f64,
    /// Scale the tolerance by `|mu_star|` on each axis.
    pub relative: bool,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule {
            tolerance: 0.02,
            relative: true,
        }
    }
}

impl ConvergenceRule {
    // Absorbs grid round-off such as 5 + 13 * 0.4 landing just past 10.2.
    const SLACK: f64 = 1e-9;

    pub fn is_converged(&self, peak: &ParameterPoint, target: &ParameterPoint) -> bool {
        peak.dim() == target.dim()
            && peak.coords().iter().zip(target.coords()).all(|(p, t)| {
                let tol = if self.relative {
                    self.tolerance * t.abs()
                } else {
                    self.tolerance
                };
                (p - t).abs() <= tol + Self::SLACK
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub n_samples: usize,
    pub iterations: usize,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub ess_scope: EssScope,
    #[serde(default)]
    pub convergence: ConvergenceRule,
}

impl RunOptions {
    pub fn new(n_samples: usize, iterations: usize) -> Self {
        RunOptions {
            n_samples,
            iterations,
            estimator: Estimator::Plain,
            ess_scope: EssScope::default(),
            convergence: ConvergenceRule::default(),
        }
    }
}

/// Independent random streams for one run: proposal sampling and KPI noise
/// never share state, so changing the noise level leaves the sampled
/// parameters untouched.
#[derive(Debug, Clone)]
pub struct RunRngs {
    pub sampling: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl RunRngs {
    pub fn derive(master_seed: u64, run_index: u64) -> Self {
        let mut sampling = ChaCha8Rng::seed_from_u64(master_seed);
        sampling.set_stream(2 * run_index);
        let mut noise = ChaCha8Rng::seed_from_u64(master_seed);
        noise.set_stream(2 * run_index + 1);
        RunRngs { sampling, noise }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub proposal_before: MixtureProposal,
    pub samples: usize,
    /// Component means after the update.
    pub selected_peaks: Vec<ParameterPoint>,
    pub mixing_rates: Vec<f64>,
    pub best_score: f64,
    pub candidates_kept: usize,
    pub distance_fallback: bool,
    pub major_peak: ParameterPoint,
    /// Noiseless KPI gap between the optimum and the major peak.
    pub regret_term: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_index: usize,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub final_major_peak: ParameterPoint,
    pub converged: bool,
    pub first_convergence_iteration: Option<usize>,
}

impl RunTrace {
    pub fn major_peak_trajectory(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.major_peak.x()).collect()
    }
}

/// Runs one tuning loop of `opts.iterations` iterations.
pub fn run_tuning(
    policy: &Policy,
    state0: PolicyState,
    oracle: &dyn KpiOracle,
    opts: &RunOptions,
    rngs: &mut RunRngs,
) -> Result<RunTrace> {
    if opts.n_samples < 2 {
        return Err(AmisError::InsufficientData {
            needed: 2,
            got: opts.n_samples,
        });
    }
    if opts.iterations == 0 {
        return Err(AmisError::malformed("need at least one iteration"));
    }
    state0.validate_for(&policy.kind)?;

    let optimum = oracle.optimum();
    let best_value = optimum.as_ref().and_then(|o| oracle.true_value(o));
    let mut state = state0;
    let mut records = Vec::with_capacity(opts.iterations);
    let mut first = None;

    for iteration in 1..=opts.iterations {
        let at = |e: AmisError| AmisError::Run {
            run: 0,
            iteration,
            source: Box::new(e),
        };
        let proposal_before = state.proposal.clone();
        let drawn = proposal_before.sample_labeled(opts.n_samples, &mut rngs.sampling);
        let f: Vec<f64> = drawn
            .iter()
            .map(|s| oracle.observe(&s.point, &mut rngs.noise))
            .collect();

        let cands = generate_candidates(&state, &policy.kind);
        let evals = evaluate_candidates_labeled(&cands, &proposal_before, &drawn, &f, opts.estimator)
            .map_err(at)?;
        let kept = filter_by_ess(evals, state.ess_threshold, opts.ess_scope);
        let best_score = kept
            .iter()
            .map(|e| e.score(policy.confidence_coefficient))
            .fold(f64::NEG_INFINITY, f64::max);
        state = policy.update(&state, &kept).map_err(at)?;

        let major = major_peak(&state);
        let regret_term = best_value.zip(oracle.true_value(&major)).map(|(b, v)| b - v);
        if first.is_none() {
            if let Some(o) = &optimum {
                if opts.convergence.is_converged(&major, o) {
                    first = Some(iteration);
                }
            }
        }
        records.push(IterationRecord {
            iteration,
            proposal_before,
            samples: opts.n_samples,
            selected_peaks: state.proposal.means(),
            mixing_rates: state.proposal.weights().to_vec(),
            best_score,
            candidates_kept: kept.len(),
            distance_fallback: state.distance_fallback,
            major_peak: major,
            regret_term,
        });
    }

    Ok(RunTrace {
        run_index: 0,
        seed: 0,
        final_major_peak: major_peak(&state),
        records,
        converged: first.is_some(),
        first_convergence_iteration: first,
    })
}

/// Table-style metrics over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algorithm: String,
    pub gamma: f64,
    pub ess_threshold: f64,
    pub n: usize,
    pub t: usize,
    pub r: usize,
    pub seed: u64,
    pub mean_regret: f64,
    pub mae: f64,
    pub mse: f64,
    pub var: f64,
    /// Mean first-convergence iteration over converged runs; `None` when no
    /// run converged.
    pub fci: Option<f64>,
    pub prc: f64,
}

/// Metric columns of an [`ExperimentReport`], without the configuration echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mean_regret: f64,
    pub mae: f64,
    pub mse: f64,
    pub var: f64,
    pub fci: Option<f64>,
    pub prc: f64,
}

/// Mean regret over every (run, iteration) pair and convergence statistics
/// of the final major peaks relative to `mu_star`.
///
/// Peak errors are signed in 1-d and the L1 norm of the error otherwise.
pub fn aggregate(traces: &[RunTrace], mu_star: &ParameterPoint) -> Result<Metrics> {
    if traces.is_empty() {
        return Err(AmisError::malformed("no traces to aggregate"));
    }
    let t = traces[0].records.len();
    if traces.iter().any(|tr| tr.records.len() != t) {
        return Err(AmisError::malformed("traces have different iteration counts"));
    }
    let regrets: Vec<f64> = traces
        .iter()
        .flat_map(|tr| tr.records.iter().map(|r| r.regret_term.unwrap_or(f64::NAN)))
        .collect();
    let mean_regret = regrets.iter().sum::<f64>() / regrets.len() as f64;

    let errors: Vec<f64> = traces
        .iter()
        .map(|tr| {
            let p = &tr.final_major_peak;
            if p.dim() == 1 && mu_star.dim() == 1 {
                Ok(p.x() - mu_star.x())
            } else {
                crate::distributions::l1_distance(p, mu_star)
            }
        })
        .collect::<Result<_>>()?;
    let r = errors.len() as f64;
    let mean_err = errors.iter().sum::<f64>() / r;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / r;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / r;
    let var = errors.iter().map(|e| (e - mean_err).powi(2)).sum::<f64>() / r;

    let fcis: Vec<f64> = traces
        .iter()
        .filter_map(|tr| tr.first_convergence_iteration.map(|i| i as f64))
        .collect();
    let fci = (!fcis.is_empty()).then(|| fcis.iter().sum::<f64>() / fcis.len() as f64);
    let prc = fcis.len() as f64 / r;

    Ok(Metrics {
        mean_regret,
        mae,
        mse,
        var,
        fci,
        prc,
    })
}

/// One point of a counterfactual sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub grid_mean: f64,
    pub estimate: f64,
    pub true_value: f64,
}

impl SweepPoint {
    pub fn abs_rel_error(&self) -> f64 {
        ((self.estimate - self.true_value) / self.true_value).abs()
    }
}

/// Importance-sampling estimates of `E_p[f]` across a grid of counterfactual
/// means, all computed from one set of `n` noiseless observations drawn
/// under `q`, next to the exact expectation.
pub fn counterfactual_sweep<R: Rng + ?Sized>(
    land: &SyntheticLandscape,
    q: &MixtureProposal,
    sigma_p: f64,
    grid: &[ParameterPoint],
    n: usize,
    rng: &mut R,
) -> Result<Vec<SweepPoint>> {
    if land.mu_star.dim() != 1 || q.dim() != 1 {
        return Err(AmisError::UnsupportedDimension(q.dim().max(land.mu_star.dim())));
    }
    if grid.is_empty() {
        return Err(AmisError::malformed("sweep grid is empty"));
    }
    if n == 0 {
        return Err(AmisError::malformed("sweep needs at least one sample"));
    }
    let xs: Vec<ParameterPoint> = q.sample_labeled(n, rng).into_iter().map(|s| s.point).collect();
    let f: Vec<f64> = xs.iter().map(|x| land.noiseless(x)).collect::<Result<_>>()?;
    grid.iter()
        .map(|m| {
            let p = GaussianComponent::isotropic(m.clone(), sigma_p)?;
            let w = importance_weights(&p, q, &xs)?;
            Ok(SweepPoint {
                grid_mean: m.x(),
                estimate: is_estimate(&f, &w)?,
                true_value: true_gaussian_expectation(land.amplitude, &land.mu_star, land.sigma_star, &p)?,
            })
        })
        .collect()
}
