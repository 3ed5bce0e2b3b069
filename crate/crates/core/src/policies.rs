//! Adaptive proposal update policies.
//!
//! Each iteration a policy spawns a grid of counterfactual Gaussians around
//! its exploration loci, the candidates are scored by importance sampling,
//! and the policy turns the scores into the next proposal:
//!
//! * [`PolicyKind::Gis`]: single Gaussian, moves to the best candidate.
//! * [`PolicyKind::Mvu`]: two co-located Gaussians (narrow exploit, wide
//!   explore) with fixed mixing rates; the shared mean moves to the best
//!   candidate.
//! * [`PolicyKind::Gu`]: greedy selection of mutually separated high-score
//!   candidates as the new peaks, with score-proportional mixing rates.
//! * [`PolicyKind::Pcu`]: every peak moves to the best candidate of its own
//!   cluster; the winning cluster's mixing rate is boosted by `delta`.
//!
//! Ties are always broken in favour of the earliest candidate or lowest
//! component index.

use serde::{Deserialize, Serialize};

use crate::distributions::{
    check_simplex, l1_distance, GaussianComponent, MixtureProposal, ParameterPoint,
};
use crate::error::{AmisError, Result};
use crate::estimation::{CandidateEvaluation, CounterfactualCandidate};

/// Floor applied to greedy-update scores before proportional allocation.
pub const SCORE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Gis,
    Mvu,
    Gu { peak_distance_coefficient: f64 },
    Pcu { delta: f64 },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Gis => "GIS",
            PolicyKind::Mvu => "MVU",
            PolicyKind::Gu { .. } => "GU",
            PolicyKind::Pcu { .. } => "PCU",
        }
    }
}

/// A policy kind plus the confidence coefficient applied when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    /// Candidate score is `estimate + confidence_coefficient * stderr`.
    pub confidence_coefficient: f64,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Result<Self> {
        Self::with_confidence(kind, 0.0)
    }

    pub fn with_confidence(kind: PolicyKind, confidence_coefficient: f64) -> Result<Self> {
        match kind {
            PolicyKind::Gu {
                peak_distance_coefficient,
            } if !(peak_distance_coefficient > 0.0 && peak_distance_coefficient.is_finite()) => {
                return Err(AmisError::malformed(format!(
                    "peak distance coefficient must be positive, got {peak_distance_coefficient}"
                )));
            }
            PolicyKind::Pcu { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(AmisError::malformed(format!(
                    "delta must be positive, got {delta}"
                )));
            }
            _ => {}
        }
        if !confidence_coefficient.is_finite() {
            return Err(AmisError::malformed("confidence coefficient must be finite"));
        }
        Ok(Policy {
            kind,
            confidence_coefficient,
        })
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Applies this policy's update rule to already-filtered evaluations.
    pub fn update(&self, state: &PolicyState, evals: &[CandidateEvaluation]) -> Result<PolicyState> {
        let c = self.confidence_coefficient;
        match self.kind {
            PolicyKind::Gis => gis_update(state, evals, c),
            PolicyKind::Mvu => mvu_update(state, evals, c),
            PolicyKind::Gu {
                peak_distance_coefficient,
            } => greedy_update(
                state,
                evals,
                state.proposal.len(),
                peak_distance_coefficient * state.counterfactual_sigma,
                c,
            ),
            PolicyKind::Pcu { delta } => pcu_update(state, evals, delta, c),
        }
    }
}

/// Proposal plus the candidate-grid settings carried between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub proposal: MixtureProposal,
    pub counterfactual_sigma: f64,
    pub grid_size: usize,
    pub ess_threshold: f64,
    /// Set by the greedy update when it had to ignore the separation distance.
    #[serde(default)]
    pub distance_fallback: bool,
}

impl PolicyState {
    pub fn new(
        proposal: MixtureProposal,
        counterfactual_sigma: f64,
        grid_size: usize,
        ess_threshold: f64,
    ) -> Result<Self> {
        if !(counterfactual_sigma > 0.0 && counterfactual_sigma.is_finite()) {
            return Err(AmisError::malformed(format!(
                "counterfactual sigma must be positive, got {counterfactual_sigma}"
            )));
        }
        // A single-point grid is allowed: it only proposes staying put.
        if grid_size % 2 == 0 {
            return Err(AmisError::malformed(format!(
                "grid size must be odd, got {grid_size}"
            )));
        }
        if !(0.0..1.0).contains(&ess_threshold) {
            return Err(AmisError::malformed(format!(
                "ess threshold must lie in [0, 1), got {ess_threshold}"
            )));
        }
        Ok(PolicyState {
            proposal,
            counterfactual_sigma,
            grid_size,
            ess_threshold,
            distance_fallback: false,
        })
    }

    /// Checks the proposal shape each policy expects.
    pub fn validate_for(&self, kind: &PolicyKind) -> Result<()> {
        let q = &self.proposal;
        match kind {
            PolicyKind::Gis if q.len() != 1 => Err(AmisError::malformed(format!(
                "GIS needs exactly one component, got {}",
                q.len()
            ))),
            PolicyKind::Mvu => {
                if q.len() != 2 {
                    return Err(AmisError::malformed(format!(
                        "MVU needs exactly two components, got {}",
                        q.len()
                    )));
                }
                let (a, b) = (&q.components()[0], &q.components()[1]);
                if a.mean != b.mean {
                    return Err(AmisError::malformed("MVU components must share a mean"));
                }
                if !a.sigma.iter().zip(&b.sigma).all(|(s1, s2)| s2 > s1) {
                    return Err(AmisError::malformed(
                        "MVU explore sigma must exceed exploit sigma",
                    ));
                }
                if q.weights()[1] >= q.weights()[0] {
                    return Err(AmisError::malformed(
                        "MVU explore rate must be below exploit rate",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn with_proposal(&self, proposal: MixtureProposal) -> PolicyState {
        PolicyState {
            proposal,
            distance_fallback: false,
            ..self.clone()
        }
    }
}

/// Offsets in units of the counterfactual sigma, evenly spaced on [-1, 1].
fn grid_offsets(grid_size: usize) -> Vec<f64> {
    if grid_size <= 1 {
        return vec![0.0];
    }
    let half = (grid_size - 1) / 2;
    (0..grid_size)
        .map(|i| (i as f64 - half as f64) / half as f64)
        .collect()
}

/// Counterfactual candidates around every exploration locus of `kind`.
///
/// Loci are the single mean for GIS, the shared mean for MVU and every
/// component mean for GU and PCU. Multi-dimensional loci get a star grid:
/// the centre plus the off-centre offsets along each axis in turn.
pub fn generate_candidates(state: &PolicyState, kind: &PolicyKind) -> Vec<CounterfactualCandidate> {
    let loci: Vec<usize> = match kind {
        PolicyKind::Gis | PolicyKind::Mvu => vec![0],
        PolicyKind::Gu { .. } | PolicyKind::Pcu { .. } => (0..state.proposal.len()).collect(),
    };
    let sp = state.counterfactual_sigma;
    let offsets = grid_offsets(state.grid_size);
    let mut out = Vec::with_capacity(loci.len() * state.grid_size);
    for k in loci {
        let center = &state.proposal.components()[k].mean;
        let d = center.dim();
        let push = |out: &mut Vec<_>, coords: Vec<f64>, offset: f64| {
            let mean = ParameterPoint::new(coords).expect("finite grid point");
            out.push(CounterfactualCandidate {
                target: GaussianComponent::isotropic(mean, sp).expect("positive sigma"),
                source_component: k,
                grid_offset: offset,
            });
        };
        if d == 1 {
            for &o in &offsets {
                push(&mut out, vec![center.x() + o * sp], o);
            }
        } else {
            push(&mut out, center.coords().to_vec(), 0.0);
            for axis in 0..d {
                for &o in offsets.iter().filter(|o| **o != 0.0) {
                    let mut coords = center.coords().to_vec();
                    coords[axis] += o * sp;
                    push(&mut out, coords, o);
                }
            }
        }
    }
    out
}

/// Which effective sample size the ESS filter compares against its threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssScope {
    /// Against the components co-located with the candidate's source peak.
    /// For separated peaks this bounds the step away from the peak without
    /// also penalising the peak's mixing rate.
    #[default]
    Local,
    /// Against the full mixture. For a peak with mixing rate `pi` this is at
    /// most about `pi`, so minor peaks are filtered regardless of step size.
    Mixture,
}

impl EssScope {
    pub fn normalized(self, e: &CandidateEvaluation) -> f64 {
        match self {
            EssScope::Local => e.normalized_local_ess(),
            EssScope::Mixture => e.normalized_ess(),
        }
    }
}

/// Keeps evaluations whose normalized ESS reaches `threshold`.
///
/// When nothing survives, returns the candidate closest to its own source
/// mean so that the policy stays put instead of failing.
pub fn filter_by_ess(
    evals: Vec<CandidateEvaluation>,
    threshold: f64,
    scope: EssScope,
) -> Vec<CandidateEvaluation> {
    if threshold <= 0.0 || evals.is_empty() {
        return evals;
    }
    let passes = |e: &CandidateEvaluation| scope.normalized(e) >= threshold;
    if evals.iter().any(passes) {
        return evals.into_iter().filter(|e| passes(e)).collect();
    }
    let mut best: Option<CandidateEvaluation> = None;
    for e in evals {
        let closer = best
            .as_ref()
            .is_none_or(|b| e.candidate.grid_offset.abs() < b.candidate.grid_offset.abs());
        if closer {
            best = Some(e);
        }
    }
    best.into_iter().collect()
}

/// Index of the first evaluation with the highest score.
fn argmax_score(evals: &[CandidateEvaluation], confidence: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in evals.iter().enumerate() {
        let s = e.score(confidence);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(AmisError::NoCandidates)
}

fn moved(c: &GaussianComponent, mean: &ParameterPoint) -> GaussianComponent {
    GaussianComponent {
        mean: mean.clone(),
        sigma: c.sigma.clone(),
    }
}

/// Single-Gaussian update: move the mean to the best candidate.
pub fn gis_update(
    state: &PolicyState,
    evals: &[CandidateEvaluation],
    confidence: f64,
) -> Result<PolicyState> {
    if state.proposal.len() != 1 {
        return Err(AmisError::malformed("GIS update needs a single-component proposal"));
    }
    let best = &evals[argmax_score(evals, confidence)?];
    let c = moved(&state.proposal.components()[0], best.candidate.mean());
    Ok(state.with_proposal(MixtureProposal::single(c)))
}

/// Multi-variance update: both co-located components follow the best
/// candidate; sigmas and mixing rates are left untouched.
pub fn mvu_update(
    state: &PolicyState,
    evals: &[CandidateEvaluation],
    confidence: f64,
) -> Result<PolicyState> {
    let best = &evals[argmax_score(evals, confidence)?];
    let target = best.candidate.mean();
    let comps = state
        .proposal
        .components()
        .iter()
        .map(|c| moved(c, target))
        .collect();
    let q = MixtureProposal::new(comps, state.proposal.weights().to_vec())?;
    Ok(state.with_proposal(q))
}

/// Score-based greedy update.
///
/// Candidates are visited in descending score order; the first becomes a
/// peak and each later one is accepted when it lies more than `d` (L1) from
/// every accepted peak, until `k` peaks are held. If the candidates run out
/// first, the best remaining ones are taken regardless of distance and
/// `distance_fallback` is set. Mixing rates are the accepted scores, floored
/// at [`SCORE_FLOOR`], normalized to sum to one.
pub fn greedy_update(
    state: &PolicyState,
    evals: &[CandidateEvaluation],
    k: usize,
    d: f64,
    confidence: f64,
) -> Result<PolicyState> {
    if evals.is_empty() {
        return Err(AmisError::NoCandidates);
    }
    if k == 0 {
        return Err(AmisError::malformed("greedy update needs k >= 1"));
    }
    if !(d >= 0.0) {
        return Err(AmisError::malformed(format!("peak distance must be >= 0, got {d}")));
    }
    let scores: Vec<f64> = evals.iter().map(|e| e.score(confidence)).collect();
    let mut order: Vec<usize> = (0..evals.len()).collect();
    // stable: equal scores keep grid order
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut selected: Vec<usize> = vec![order[0]];
    for &i in &order[1..] {
        if selected.len() == k {
            break;
        }
        let mean = evals[i].candidate.mean();
        let separated = selected.iter().try_fold(true, |acc, &j| {
            l1_distance(mean, evals[j].candidate.mean()).map(|dist| acc && dist > d)
        })?;
        if separated {
            selected.push(i);
        }
    }
    let mut fallback = false;
    for &i in &order {
        if selected.len() == k {
            break;
        }
        if !selected.contains(&i) {
            selected.push(i);
            fallback = true;
        }
    }

    let comps = state.proposal.components();
    let peaks: Vec<GaussianComponent> = selected
        .iter()
        .map(|&i| {
            let cand = &evals[i].candidate;
            let src = comps.get(cand.source_component).unwrap_or(&comps[0]);
            moved(src, cand.mean())
        })
        .collect();
    let raw: Vec<f64> = selected.iter().map(|&i| scores[i].max(SCORE_FLOOR)).collect();
    let q = MixtureProposal::new(peaks, normalize(&raw))?;
    let mut next = state.with_proposal(q);
    next.distance_fallback = fallback;
    Ok(next)
}

/// Rank-based peak cluster update.
///
/// Each component moves to the best candidate its own grid produced (or
/// stays put if the ESS filter removed all of them). The component whose
/// best score is highest gains `delta` mixing rate before renormalization.
pub fn pcu_update(
    state: &PolicyState,
    evals: &[CandidateEvaluation],
    delta: f64,
    confidence: f64,
) -> Result<PolicyState> {
    if evals.is_empty() {
        return Err(AmisError::NoCandidates);
    }
    if !(delta > 0.0) {
        return Err(AmisError::malformed(format!("delta must be positive, got {delta}")));
    }
    let comps = state.proposal.components();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; comps.len()];
    for (i, e) in evals.iter().enumerate() {
        let k = e.candidate.source_component;
        let slot = best.get_mut(k).ok_or_else(|| {
            AmisError::malformed(format!("candidate source component {k} out of range"))
        })?;
        let s = e.score(confidence);
        if slot.is_none_or(|(_, b)| s > b) {
            *slot = Some((i, s));
        }
    }
    let new_comps: Vec<GaussianComponent> = comps
        .iter()
        .zip(&best)
        .map(|(c, b)| match b {
            Some((i, _)) => moved(c, evals[*i].candidate.mean()),
            None => c.clone(),
        })
        .collect();
    let mut winner = 0;
    let mut winner_score = f64::NEG_INFINITY;
    for (k, b) in best.iter().enumerate() {
        if let Some((_, s)) = b {
            if *s > winner_score {
                winner = k;
                winner_score = *s;
            }
        }
    }
    let mut rates = state.proposal.weights().to_vec();
    rates[winner] += delta;
    let q = MixtureProposal::new(new_comps, normalize(&rates))?;
    Ok(state.with_proposal(q))
}

fn normalize(xs: &[f64]) -> Vec<f64> {
    let total: f64 = xs.iter().sum();
    let out: Vec<f64> = xs.iter().map(|x| x / total).collect();
    debug_assert!(check_simplex(&out).is_ok());
    out
}

/// The centre followed by hypercube corners `center +/- radius`, enumerated
/// in lexicographic sign order (minus before plus, first axis most
/// significant) and truncated to `max_peaks` points in total.
pub fn init_orthogonal_peaks(
    center: &ParameterPoint,
    radius: f64,
    max_peaks: usize,
) -> Result<Vec<ParameterPoint>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(AmisError::malformed(format!("radius must be positive, got {radius}")));
    }
    if max_peaks == 0 {
        return Err(AmisError::malformed("max_peaks must be at least 1"));
    }
    let d = center.dim();
    let corner_count = if d >= usize::BITS as usize {
        usize::MAX
    } else {
        1usize << d
    };
    let mut out = vec![center.clone()];
    for code in 0..corner_count.min(max_peaks - 1) {
        let coords = center
            .coords()
            .iter()
            .enumerate()
            .map(|(axis, c)| {
                let bit = d - 1 - axis;
                let plus = bit < usize::BITS as usize && (code >> bit) & 1 == 1;
                if plus {
                    c + radius
                } else {
                    c - radius
                }
            })
            .collect();
        out.push(ParameterPoint::new(coords)?);
    }
    Ok(out)
}

/// Mean of the component with the largest mixing rate (lowest index on ties).
pub fn major_peak(state: &PolicyState) -> ParameterPoint {
    let w = state.proposal.weights();
    let mut best = 0;
    for (k, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = k;
        }
    }
    state.proposal.components()[best].mean.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(m: f64, s: f64) -> GaussianComponent {
        GaussianComponent::univariate(m, s)
    }

    fn state(means: &[f64], sigma: f64, rates: &[f64], sp: f64) -> PolicyState {
        let q = MixtureProposal::new(means.iter().map(|m| g(*m, sigma)).collect(), rates.to_vec())
            .unwrap();
        PolicyState::new(q, sp, 11, 0.0).unwrap()
    }

    fn eval(mean: f64, src: usize, estimate: f64) -> CandidateEvaluation {
        CandidateEvaluation {
            candidate: CounterfactualCandidate {
                target: g(mean, 1.0),
                source_component: src,
                grid_offset: 0.0,
            },
            estimate,
            ess: 10.0,
            stderr: 0.0,
            n: 10,
            local_ess: 10.0,
            local_n: 10,
        }
    }

    fn means(s: &PolicyState) -> Vec<f64> {
        s.proposal.components().iter().map(|c| c.mean.x()).collect()
    }

    #[test]
    fn grid_examples() {
        let s = state(&[5.0], 1.0, &[1.0], 1.0);
        let c = generate_candidates(&s, &PolicyKind::Gis);
        let m: Vec<f64> = c.iter().map(|c| c.mean().x()).collect();
        let want = [4.0, 4.2, 4.4, 4.6, 4.8, 5.0, 5.2, 5.4, 5.6, 5.8, 6.0];
        assert_eq!(m.len(), 11);
        for (a, b) in m.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(m[0], 4.0);
        assert_eq!(m[5], 5.0);
        assert_eq!(m[10], 6.0);
        assert!(c.iter().all(|c| c.target.sigma == vec![1.0]));

        let mut s3 = state(&[0.0], 1.0, &[1.0], 2.0);
        s3.grid_size = 3;
        let m: Vec<f64> = generate_candidates(&s3, &PolicyKind::Gis)
            .iter()
            .map(|c| c.mean().x())
            .collect();
        assert_eq!(m, vec![-2.0, 0.0, 2.0]);

        let p = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
        let c = generate_candidates(&p, &PolicyKind::Pcu { delta: 0.2 });
        assert_eq!(c.len(), 33);
        for k in 0..3 {
            assert_eq!(c.iter().filter(|c| c.source_component == k).count(), 11);
        }
    }

    #[test]
    fn star_grid_in_two_dimensions() {
        let q = MixtureProposal::single(
            GaussianComponent::isotropic(ParameterPoint::new(vec![0.0, 0.0]).unwrap(), 1.0).unwrap(),
        );
        let mut s = PolicyState::new(q, 1.0, 3, 0.0).unwrap();
        s.grid_size = 3;
        let c = generate_candidates(&s, &PolicyKind::Gis);
        let pts: Vec<Vec<f64>> = c.iter().map(|c| c.mean().coords().to_vec()).collect();
        assert_eq!(
            pts,
            vec![vec![0.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]]
        );
    }

    #[test]
    fn state_validation() {
        let q = MixtureProposal::single(g(0.0, 1.0));
        assert!(PolicyState::new(q.clone(), 1.0, 10, 0.0).is_err());
        assert!(PolicyState::new(q.clone(), 0.0, 11, 0.0).is_err());
        assert!(PolicyState::new(q.clone(), 1.0, 11, 1.0).is_err());
        let s = PolicyState::new(q, 1.0, 11, 0.4).unwrap();
        assert!(s.validate_for(&PolicyKind::Gis).is_ok());
        assert!(s.validate_for(&PolicyKind::Mvu).is_err());
        let mvu = MixtureProposal::new(vec![g(5.0, 1.0), g(5.0, 3.0)], vec![0.8, 0.2]).unwrap();
        let s = PolicyState::new(mvu, 2.0, 11, 0.0).unwrap();
        assert!(s.validate_for(&PolicyKind::Mvu).is_ok());
        let bad = MixtureProposal::new(vec![g(5.0, 3.0), g(5.0, 1.0)], vec![0.8, 0.2]).unwrap();
        assert!(PolicyState::new(bad, 2.0, 11, 0.0)
            .unwrap()
            .validate_for(&PolicyKind::Mvu)
            .is_err());
        assert!(Policy::new(PolicyKind::Pcu { delta: 0.0 }).is_err());
        assert!(Policy::new(PolicyKind::Gu { peak_distance_coefficient: -1.0 }).is_err());
    }

    #[test]
    fn ess_filter_examples() {
        let mk = |ratio: f64, offset: f64| {
            let mut e = eval(offset, 0, 1.0);
            e.ess = ratio * 100.0;
            e.n = 100;
            e.local_ess = ratio * 100.0;
            e.local_n = 100;
            e.candidate.grid_offset = offset;
            e
        };
        let evals = vec![mk(0.9, -1.0), mk(0.35, 0.0), mk(0.5, 1.0)];
        assert_eq!(filter_by_ess(evals.clone(), 0.0, EssScope::Mixture), evals);
        let kept = filter_by_ess(evals.clone(), 0.4, EssScope::Mixture);
        assert_eq!(kept, vec![evals[0].clone(), evals[2].clone()]);

        let low = vec![mk(0.1, -1.0), mk(0.2, 0.4), mk(0.05, -0.4), mk(0.1, 1.0)];
        let kept = filter_by_ess(low.clone(), 0.5, EssScope::Local);
        assert_eq!(kept, vec![low[1].clone()]);
    }

    #[test]
    fn ess_filter_fallback_on_real_far_tail_candidates() {
        use crate::distributions::sample;
        use crate::estimation::evaluate_candidates;
        use rand::SeedableRng;
        let q = MixtureProposal::single(g(0.0, 0.3));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let xs = sample(&q, 100, &mut rng).unwrap();
        let f = vec![1.0; 100];
        let cands: Vec<CounterfactualCandidate> = [-3.0, -2.0, 2.0, 3.0]
            .iter()
            .map(|m: &f64| CounterfactualCandidate {
                target: g(*m, 1.0),
                source_component: 0,
                grid_offset: m / 1.0,
            })
            .collect();
        let evals = evaluate_candidates(&cands, &q, &xs, &f).unwrap();
        assert!(evals.iter().all(|e| e.normalized_ess() < 0.5));
        let kept = filter_by_ess(evals, 0.5, EssScope::Local);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].candidate.mean().x(), -2.0);
    }

    #[test]
    fn gis_update_examples() {
        let s = state(&[5.0], 1.0, &[1.0], 1.0);
        let evals: Vec<_> = (0..11).map(|i| eval(4.0 + 0.2 * i as f64, 0, i as f64)).collect();
        let mut evals = evals;
        evals[10].candidate.target = g(6.0, 1.0);
        let next = gis_update(&s, &evals, 0.0).unwrap();
        assert_eq!(means(&next), vec![6.0]);
        assert_eq!(next.proposal.weights(), s.proposal.weights());

        let fixed = gis_update(&s, &[eval(5.0, 0, 3.0)], 0.0).unwrap();
        assert_eq!(fixed, s);

        let tie = gis_update(&s, &[eval(4.4, 0, 2.0), eval(5.6, 0, 2.0)], 0.0).unwrap();
        assert_eq!(means(&tie), vec![4.4]);
        assert!(matches!(gis_update(&s, &[], 0.0), Err(AmisError::NoCandidates)));
    }

    #[test]
    fn mvu_update_keeps_rates_and_sigmas() {
        let mvu = MixtureProposal::new(vec![g(5.0, 1.0), g(5.0, 3.0)], vec![0.8, 0.2]).unwrap();
        let mut s = PolicyState::new(mvu, 2.0, 11, 0.0).unwrap();
        for step in 0..10 {
            let c = means(&s)[0];
            let evals = vec![eval(c - 1.0, 0, 1.0), eval(c + 1.0, 0, 5.0), eval(c, 0, 2.0)];
            let next = mvu_update(&s, &evals, 0.0).unwrap();
            assert_eq!(means(&next), vec![c + 1.0, c + 1.0], "step {step}");
            assert_eq!(next.proposal.weights(), &[0.8, 0.2]);
            assert_eq!(next.proposal.components()[1].sigma, vec![3.0]);
            s = next;
        }
        let here = means(&s)[0];
        assert_eq!(mvu_update(&s, &[eval(here, 0, 1.0)], 0.0).unwrap(), s);
    }

    #[test]
    fn greedy_hand_trace() {
        let s = state(&[5.0, 7.0], 1.0, &[0.5, 0.5], 1.0);
        let evals = vec![eval(5.0, 0, 3.0), eval(5.1, 0, 2.9), eval(7.0, 1, 1.0)];
        let next = greedy_update(&s, &evals, 2, 1.5, 0.0).unwrap();
        assert_eq!(means(&next), vec![5.0, 7.0]);
        assert!((next.proposal.weights()[0] - 0.75).abs() < 1e-12);
        assert!((next.proposal.weights()[1] - 0.25).abs() < 1e-12);
        assert!(!next.distance_fallback);

        let one = greedy_update(&s, &evals, 1, 1.5, 0.0).unwrap();
        assert_eq!(means(&one), vec![5.0]);
        assert_eq!(one.proposal.weights(), &[1.0]);

        let neg = greedy_update(&s, &[eval(1.0, 0, 2.0), eval(3.0, 1, -1.0)], 2, 0.0, 0.0).unwrap();
        let w = neg.proposal.weights();
        assert!((w[0] - 2.0 / 2.000001).abs() < 1e-12);
        assert!((w[1] - 1e-6 / 2.000001).abs() < 1e-15);
        assert!((w[1] - 5e-7).abs() < 1e-12);
    }

    #[test]
    fn greedy_falls_back_when_separation_impossible() {
        let s = state(&[5.0, 7.0, 9.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
        let evals = vec![eval(5.0, 0, 3.0), eval(5.2, 0, 2.0), eval(5.4, 0, 1.0)];
        let next = greedy_update(&s, &evals, 3, 1.5, 0.0).unwrap();
        assert_eq!(means(&next), vec![5.0, 5.2, 5.4]);
        assert!(next.distance_fallback);
    }

    #[test]
    fn pcu_hand_trace() {
        let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
        let evals = vec![
            eval(2.5, 0, 9.0),
            eval(3.5, 0, 1.0),
            eval(5.5, 1, 3.0),
            eval(7.5, 2, 1.0),
        ];
        let next = pcu_update(&s, &evals, 0.2, 0.0).unwrap();
        assert_eq!(means(&next), vec![2.5, 5.5, 7.5]);
        let w = next.proposal.weights();
        for (a, b) in w.iter().zip([0.4 / 1.2, 0.6 / 1.2, 0.2 / 1.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w[0] - 0.33333).abs() < 1e-5);

        let single = state(&[1.0], 1.0, &[1.0], 1.0);
        let next = pcu_update(&single, &[eval(1.2, 0, 5.0)], 0.7, 0.0).unwrap();
        assert_eq!(next.proposal.weights(), &[1.0]);

        // cluster 1 filtered out entirely: it keeps its peak
        let next = pcu_update(&s, &[eval(2.0, 0, 1.0), eval(8.0, 2, 4.0)], 0.2, 0.0).unwrap();
        assert_eq!(means(&next), vec![2.0, 5.0, 8.0]);
        assert!(next.proposal.weights()[2] > 0.2 / 1.2 - 1e-12);
    }

    #[test]
    fn orthogonal_peaks() {
        let p = init_orthogonal_peaks(&5.0.into(), 2.0, 3).unwrap();
        assert_eq!(p, vec![5.0.into(), 3.0.into(), 7.0.into()]);
        let c = ParameterPoint::new(vec![0.0, 0.0]).unwrap();
        let p = init_orthogonal_peaks(&c, 1.0, 5).unwrap();
        let coords: Vec<Vec<f64>> = p.iter().map(|p| p.coords().to_vec()).collect();
        assert_eq!(
            coords,
            vec![vec![0.0, 0.0], vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );
        assert_eq!(init_orthogonal_peaks(&c, 1.0, 1).unwrap(), vec![c.clone()]);
        assert_eq!(init_orthogonal_peaks(&c, 1.0, 100).unwrap().len(), 5);
        assert!(init_orthogonal_peaks(&c, 0.0, 3).is_err());
    }

    #[test]
    fn major_peak_examples() {
        assert_eq!(major_peak(&state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0)).x(), 5.0);
        assert_eq!(major_peak(&state(&[4.0], 1.0, &[1.0], 1.0)).x(), 4.0);
        assert_eq!(major_peak(&state(&[1.0, 2.0], 1.0, &[0.5, 0.5], 1.0)).x(), 1.0);
    }

    fn arb_evals(k: usize) -> impl Strategy<Value = Vec<CandidateEvaluation>> {
        prop::collection::vec((0.0..20.0f64, 0..k, -50.0..50.0f64), 1..40)
            .prop_map(|v| v.into_iter().map(|(m, s, e)| eval(m, s, e)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn updates_preserve_simplex(evals in arb_evals(3), delta in 0.01..1.0f64, coef in 0.1..3.0f64) {
            let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
            for kind in [PolicyKind::Gu { peak_distance_coefficient: coef }, PolicyKind::Pcu { delta }] {
                let next = Policy::new(kind).unwrap().update(&s, &evals).unwrap();
                let w = next.proposal.weights();
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(w.iter().all(|x| *x >= 0.0));
            }
        }

        #[test]
        fn greedy_peaks_separated_or_flagged(evals in arb_evals(3), d in 0.0..3.0f64) {
            let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
            let next = greedy_update(&s, &evals, 3, d, 0.0).unwrap();
            let m = means(&next);
            if !next.distance_fallback {
                for i in 0..m.len() {
                    for j in 0..i {
                        prop_assert!((m[i] - m[j]).abs() > d);
                    }
                }
            }
        }

        #[test]
        fn greedy_rates_follow_scores(evals in arb_evals(3)) {
            let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
            let next = greedy_update(&s, &evals, 3, 0.5, 0.0).unwrap();
            let w = next.proposal.weights();
            // without fallback, selection order is descending score
            if !next.distance_fallback {
                prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
            }
        }

        #[test]
        fn positive_scaling_keeps_selection(evals in arb_evals(3), c in 0.1..10.0f64) {
            let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
            let scaled: Vec<_> = evals.iter().map(|e| { let mut e = e.clone(); e.estimate *= c; e }).collect();
            for kind in [PolicyKind::Gu { peak_distance_coefficient: 1.5 }, PolicyKind::Pcu { delta: 0.2 }] {
                let p = Policy::new(kind).unwrap();
                let a = p.update(&s, &evals).unwrap();
                let b = p.update(&s, &scaled).unwrap();
                prop_assert_eq!(means(&a), means(&b));
            }
            let gis = state(&[5.0], 1.0, &[1.0], 1.0);
            prop_assert_eq!(means(&gis_update(&gis, &evals, 0.0).unwrap()), means(&gis_update(&gis, &scaled, 0.0).unwrap()));
        }

        #[test]
        fn pcu_winner_gains(evals in arb_evals(3), delta in 0.01..1.0f64) {
            let s = state(&[3.0, 5.0, 7.0], 1.0, &[0.2, 0.6, 0.2], 1.0);
            let next = pcu_update(&s, &evals, delta, 0.0).unwrap();
            let before = s.proposal.weights();
            let after = next.proposal.weights();
            let gained: Vec<usize> = (0..3).filter(|&k| after[k] > before[k]).collect();
            prop_assert_eq!(gained.len(), 1);
        }
    }
}
