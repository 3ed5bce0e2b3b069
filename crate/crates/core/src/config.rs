//! Experiment configuration: a TOML file whose keys mirror
//! [`ExperimentConfig`], where every omitted key falls back to the offline
//! simulation defaults for the chosen algorithm.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianComponent, MixtureProposal, ParameterPoint, SIMPLEX_TOL};
use crate::error::{AmisError, Result};
use crate::estimation::Estimator;
use crate::policies::{EssScope, Policy, PolicyKind, PolicyState};
use crate::simulation::{
    aggregate, run_tuning, ConvergenceRule, ExperimentReport, RunOptions, RunRngs, RunTrace,
    SyntheticLandscape,
};

/// Mixing-rate boost used by PCU when none is configured.
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_PEAK_DISTANCE_COEFFICIENT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GIS", alias = "gis", alias = "VIS", alias = "vis")]
    Gis,
    #[serde(rename = "MVU", alias = "mvu")]
    Mvu,
    #[serde(rename = "GU", alias = "gu", alias = "PU", alias = "pu")]
    Gu,
    #[serde(rename = "PCU", alias = "pcu", alias = "MRU", alias = "mru")]
    Pcu,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Gis, Algorithm::Mvu, Algorithm::Gu, Algorithm::Pcu];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gis => "GIS",
            Algorithm::Mvu => "MVU",
            Algorithm::Gu => "GU",
            Algorithm::Pcu => "PCU",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = AmisError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GIS" | "VIS" => Ok(Algorithm::Gis),
            "MVU" => Ok(Algorithm::Mvu),
            "GU" | "PU" => Ok(Algorithm::Gu),
            "PCU" | "MRU" => Ok(Algorithm::Pcu),
            other => Err(AmisError::config(
                "algorithm",
                format!("unknown algorithm `{other}` (expected GIS, MVU, GU or PCU)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub mu_star: f64,
    pub sigma_star: f64,
    pub amplitude: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            mu_star: 10.0,
            sigma_star: 1.0,
            amplitude: 100.0,
        }
    }
}

/// Partially specified configuration, as read from a file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub algorithm: Option<String>,
    pub gamma: Option<f64>,
    pub ess_threshold: Option<f64>,
    pub n_samples: Option<usize>,
    pub t_iterations: Option<usize>,
    pub r_runs: Option<usize>,
    pub master_seed: Option<u64>,
    pub landscape: Option<PartialLandscape>,
    pub initial_peaks: Option<Vec<f64>>,
    pub initial_mixing_rates: Option<Vec<f64>>,
    pub proposal_sigmas: Option<Vec<f64>>,
    pub counterfactual_sigma: Option<f64>,
    pub grid_size: Option<usize>,
    pub peak_distance_coefficient: Option<f64>,
    pub delta: Option<f64>,
    pub confidence_coefficient: Option<f64>,
    pub self_normalized: Option<bool>,
    pub ess_scope: Option<EssScope>,
    pub convergence_tolerance: Option<f64>,
    pub convergence_relative: Option<bool>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialLandscape {
    pub mu_star: Option<f64>,
    pub sigma_star: Option<f64>,
    pub amplitude: Option<f64>,
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub ess_threshold: f64,
    pub n_samples: usize,
    pub t_iterations: usize,
    pub r_runs: usize,
    pub master_seed: u64,
    pub landscape: LandscapeConfig,
    pub initial_peaks: Vec<f64>,
    pub initial_mixing_rates: Vec<f64>,
    pub proposal_sigmas: Vec<f64>,
    pub counterfactual_sigma: f64,
    pub grid_size: usize,
    pub peak_distance_coefficient: f64,
    pub delta: f64,
    pub confidence_coefficient: f64,
    pub self_normalized: bool,
    pub ess_scope: EssScope,
    pub convergence_tolerance: f64,
    pub convergence_relative: bool,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

struct AlgorithmDefaults {
    peaks: Vec<f64>,
    rates: Vec<f64>,
    sigmas: Vec<f64>,
    counterfactual_sigma: f64,
}

fn defaults_for(algo: Algorithm) -> AlgorithmDefaults {
    match algo {
        Algorithm::Gis => AlgorithmDefaults {
            peaks: vec![5.0],
            rates: vec![1.0],
            sigmas: vec![1.0],
            counterfactual_sigma: 1.0,
        },
        Algorithm::Mvu => AlgorithmDefaults {
            peaks: vec![5.0, 5.0],
            rates: vec![0.8, 0.2],
            sigmas: vec![1.0, 3.0],
            counterfactual_sigma: 2.0,
        },
        Algorithm::Gu | Algorithm::Pcu => AlgorithmDefaults {
            peaks: vec![3.0, 5.0, 7.0],
            rates: vec![0.2, 0.6, 0.2],
            sigmas: vec![1.0, 1.0, 1.0],
            counterfactual_sigma: 1.0,
        },
    }
}

impl PartialConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| AmisError::config("config", e.message().to_string()))
    }

    /// Fields set in `other` replace the ones in `self`.
    pub fn overlay(mut self, other: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            algorithm, gamma, ess_threshold, n_samples, t_iterations, r_runs, master_seed,
            initial_peaks, initial_mixing_rates, proposal_sigmas, counterfactual_sigma, grid_size,
            peak_distance_coefficient, delta, confidence_coefficient, self_normalized,
            ess_scope, convergence_tolerance, convergence_relative, out, trace
        );
        if let Some(l) = other.landscape {
            let mut base = self.landscape.take().unwrap_or_default();
            if l.mu_star.is_some() {
                base.mu_star = l.mu_star;
            }
            if l.sigma_star.is_some() {
                base.sigma_star = l.sigma_star;
            }
            if l.amplitude.is_some() {
                base.amplitude = l.amplitude;
            }
            self.landscape = Some(base);
        }
        self
    }

    /// Fills defaults for the named algorithm and validates the result.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let algorithm: Algorithm = self
            .algorithm
            .as_deref()
            .ok_or_else(|| AmisError::config("algorithm", "missing"))?
            .parse()?;
        let d = defaults_for(algorithm);
        let l = self.landscape.unwrap_or_default();
        let ld = LandscapeConfig::default();
        let cfg = ExperimentConfig {
            algorithm,
            gamma: self.gamma.unwrap_or(0.0),
            ess_threshold: self.ess_threshold.unwrap_or(0.0),
            n_samples: self.n_samples.unwrap_or(100),
            t_iterations: self.t_iterations.unwrap_or(10),
            r_runs: self.r_runs.unwrap_or(100),
            master_seed: self.master_seed.unwrap_or(0),
            landscape: LandscapeConfig {
                mu_star: l.mu_star.unwrap_or(ld.mu_star),
                sigma_star: l.sigma_star.unwrap_or(ld.sigma_star),
                amplitude: l.amplitude.unwrap_or(ld.amplitude),
            },
            initial_peaks: self.initial_peaks.unwrap_or(d.peaks),
            initial_mixing_rates: self.initial_mixing_rates.unwrap_or(d.rates),
            proposal_sigmas: self.proposal_sigmas.unwrap_or(d.sigmas),
            counterfactual_sigma: self.counterfactual_sigma.unwrap_or(d.counterfactual_sigma),
            grid_size: self.grid_size.unwrap_or(11),
            peak_distance_coefficient: self
                .peak_distance_coefficient
                .unwrap_or(DEFAULT_PEAK_DISTANCE_COEFFICIENT),
            delta: self.delta.unwrap_or(DEFAULT_DELTA),
            confidence_coefficient: self.confidence_coefficient.unwrap_or(0.0),
            self_normalized: self.self_normalized.unwrap_or(false),
            ess_scope: self.ess_scope.unwrap_or_default(),
            convergence_tolerance: self.convergence_tolerance.unwrap_or(0.02),
            convergence_relative: self.convergence_relative.unwrap_or(true),
            out: self.out,
            trace: self.trace,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads and resolves a TOML config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    read_partial(path)?.resolve()
}

pub fn read_partial(path: &Path) -> Result<PartialConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AmisError::config("config", format!("{}: {e}", path.display())))?;
    PartialConfig::from_toml_str(&text)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AmisError::config(field, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// Defaults for `algorithm` with nothing else overridden.
    pub fn defaults(algorithm: Algorithm) -> ExperimentConfig {
        PartialConfig {
            algorithm: Some(algorithm.name().to_string()),
            ..Default::default()
        }
        .resolve()
        .expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("n_samples", self.n_samples),
            ("t_iterations", self.t_iterations),
            ("r_runs", self.r_runs),
            ("grid_size", self.grid_size),
        ] {
            if v == 0 {
                return Err(AmisError::config(field, "must be at least 1"));
            }
        }
        if self.n_samples < 2 {
            return Err(AmisError::config("n_samples", "must be at least 2"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(AmisError::config("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.ess_threshold) {
            return Err(AmisError::config(
                "ess_threshold",
                format!("must lie in [0, 1), got {}", self.ess_threshold),
            ));
        }
        if self.grid_size % 2 == 0 {
            return Err(AmisError::config(
                "grid_size",
                format!("must be odd, got {}", self.grid_size),
            ));
        }
        positive("landscape.sigma_star", self.landscape.sigma_star)?;
        positive("counterfactual_sigma", self.counterfactual_sigma)?;
        positive("peak_distance_coefficient", self.peak_distance_coefficient)?;
        positive("delta", self.delta)?;
        positive("convergence_tolerance", self.convergence_tolerance)?;
        if !self.landscape.mu_star.is_finite() {
            return Err(AmisError::config("landscape.mu_star", "must be finite"));
        }
        if !self.landscape.amplitude.is_finite() {
            return Err(AmisError::config("landscape.amplitude", "must be finite"));
        }
        if !self.confidence_coefficient.is_finite() {
            return Err(AmisError::config("confidence_coefficient", "must be finite"));
        }

        let k = self.initial_mixing_rates.len();
        if k == 0 {
            return Err(AmisError::config("initial_mixing_rates", "must not be empty"));
        }
        if self.initial_mixing_rates.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(AmisError::config("initial_mixing_rates", "entries must be >= 0"));
        }
        let total: f64 = self.initial_mixing_rates.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(AmisError::config(
                "initial_mixing_rates",
                format!("must sum to 1, got {total}"),
            ));
        }
        if !(self.initial_peaks.len() == k || self.initial_peaks.len() == 1) {
            return Err(AmisError::config(
                "initial_peaks",
                format!("expected {k} peaks (or one shared peak), got {}", self.initial_peaks.len()),
            ));
        }
        if self.initial_peaks.iter().any(|p| !p.is_finite()) {
            return Err(AmisError::config("initial_peaks", "entries must be finite"));
        }
        if !(self.proposal_sigmas.len() == k || self.proposal_sigmas.len() == 1) {
            return Err(AmisError::config(
                "proposal_sigmas",
                format!("expected {k} sigmas (or one shared sigma), got {}", self.proposal_sigmas.len()),
            ));
        }
        for s in &self.proposal_sigmas {
            positive("proposal_sigmas", *s)?;
        }
        self.policy_state()?
            .validate_for(&self.policy()?.kind)
            .map_err(|e| AmisError::config("algorithm", e.to_string()))?;
        Ok(())
    }

    pub fn policy(&self) -> Result<Policy> {
        let kind = match self.algorithm {
            Algorithm::Gis => PolicyKind::Gis,
            Algorithm::Mvu => PolicyKind::Mvu,
            Algorithm::Gu => PolicyKind::Gu {
                peak_distance_coefficient: self.peak_distance_coefficient,
            },
            Algorithm::Pcu => PolicyKind::Pcu { delta: self.delta },
        };
        Policy::with_confidence(kind, self.confidence_coefficient)
    }

    pub fn initial_proposal(&self) -> Result<MixtureProposal> {
        let k = self.initial_mixing_rates.len();
        let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
        let comps = (0..k)
            .map(|i| {
                GaussianComponent::isotropic(
                    ParameterPoint::new(vec![pick(&self.initial_peaks, i)])?,
                    pick(&self.proposal_sigmas, i),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureProposal::new(comps, self.initial_mixing_rates.clone())
    }

    pub fn policy_state(&self) -> Result<PolicyState> {
        PolicyState::new(
            self.initial_proposal()?,
            self.counterfactual_sigma,
            self.grid_size,
            self.ess_threshold,
        )
    }

    pub fn landscape(&self) -> Result<SyntheticLandscape> {
        SyntheticLandscape::new(
            ParameterPoint::new(vec![self.landscape.mu_star])?,
            self.landscape.sigma_star,
            self.landscape.amplitude,
            self.gamma,
        )
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            n_samples: self.n_samples,
            iterations: self.t_iterations,
            estimator: if self.self_normalized {
                Estimator::SelfNormalized
            } else {
                Estimator::Plain
            },
            ess_scope: self.ess_scope,
            convergence: ConvergenceRule {
                tolerance: self.convergence_tolerance,
                relative: self.convergence_relative,
            },
        }
    }
}

/// Runs `r_runs` independent tuning runs and aggregates them.
///
/// Run `i` draws from streams derived from `(master_seed, i)` only, so the
/// result is identical whether runs execute in parallel or sequentially.
pub fn run_experiment(
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<(ExperimentReport, Vec<RunTrace>)> {
    let policy = config.policy()?;
    let state0 = config.policy_state()?;
    let land = config.landscape()?;
    let opts = config.run_options();

    let one = |run: usize| -> Result<RunTrace> {
        let mut rngs = RunRngs::derive(config.master_seed, run as u64);
        let mut trace =
            run_tuning(&policy, state0.clone(), &land, &opts, &mut rngs).map_err(|e| match e {
                AmisError::Run {
                    iteration, source, ..
                } => AmisError::Run {
                    run,
                    iteration,
                    source,
                },
                other => AmisError::Run {
                    run,
                    iteration: 0,
                    source: Box::new(other),
                },
            })?;
        trace.run_index = run;
        trace.seed = config.master_seed;
        Ok(trace)
    };
    let traces: Vec<RunTrace> = if parallel {
        (0..config.r_runs).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..config.r_runs).map(one).collect::<Result<_>>()?
    };

    let m = aggregate(&traces, &land.mu_star)?;
    let report = ExperimentReport {
        algorithm: config.algorithm.name().to_string(),
        gamma: config.gamma,
        ess_threshold: config.ess_threshold,
        n: config.n_samples,
        t: config.t_iterations,
        r: config.r_runs,
        seed: config.master_seed,
        mean_regret: m.mean_regret,
        mae: m.mae,
        mse: m.mse,
        var: m.var,
        fci: m.fci,
        prc: m.prc,
    };
    Ok((report, traces))
}
