//! Monte-Carlo comparison of curriculum policies on simulated learners.
//!
//! Every (skill count, learner) pair gets its own RNG streams derived from
//! the master seed, so results do not depend on how work is scheduled
//! across threads. Each sampled learner is cloned and run under every
//! policy (paired design).

pub mod report;
pub mod seeds;
pub mod stats;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curriculum::{PolicyKind, PolicyState, DEFAULT_EPSILON, DEFAULT_MASTERY_THRESHOLD};
use crate::error::{Error, Result};
use crate::learner::{LearnerProfile, ModelConstants};
use crate::population::{sample_profile, DistributionConfig};
use crate::tracer::{TracerConfig, TracerScales};

pub use report::{EpisodeRecord, ExperimentReport, SignificanceRow, SummaryRow};
pub use seeds::{derive_seed, learner_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n_learners: usize,
    pub skill_counts: Vec<usize>,
    pub budget_per_skill: usize,
    pub policies: Vec<PolicyKind>,
    pub epsilon: f64,
    pub mastery_threshold: f64,
    pub distribution: DistributionConfig,
    pub constants: ModelConstants,
    pub tracer: TracerScales,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            n_learners: 500,
            skill_counts: vec![3, 5, 7, 10, 15],
            budget_per_skill: 50,
            policies: PolicyKind::ALL.to_vec(),
            epsilon: DEFAULT_EPSILON,
            mastery_threshold: DEFAULT_MASTERY_THRESHOLD,
            distribution: DistributionConfig::default(),
            constants: ModelConstants::default(),
            tracer: TracerScales::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_learners < 1 {
            return Err(Error::Config("n_learners must be >= 1".into()));
        }
        if self.budget_per_skill < 1 {
            return Err(Error::Config("budget_per_skill must be >= 1".into()));
        }
        if self.skill_counts.is_empty() || self.skill_counts.contains(&0) {
            return Err(Error::Config("skill_counts must be non-empty and positive".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(Error::Config("duplicate policy".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.mastery_threshold > 0.0 && self.mastery_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "mastery_threshold must lie in (0, 1], got {}",
                self.mastery_threshold
            )));
        }
        self.distribution.validate()?;
        self.constants.validate()?;
        self.tracer.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub skill: usize,
    pub observed_time: f64,
    /// Latent progress of the practiced skill after the attempt.
    pub progress_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub actions_used: usize,
    pub success: bool,
    pub trace: Vec<TraceStep>,
}

/// Builds the policy a learner is coached with. Greedy sees expert times;
/// adaptive is calibrated with the expert time and the novice baseline of
/// each skill.
pub fn build_policy(
    kind: PolicyKind,
    profile: &LearnerProfile,
    epsilon: f64,
    mastery_threshold: f64,
    scales: &TracerScales,
) -> Result<PolicyState> {
    let skills = profile.skills();
    match kind {
        PolicyKind::Uniform => PolicyState::uniform(skills.len()),
        PolicyKind::Greedy => PolicyState::greedy(skills.iter().map(|s| s.tau_star).collect(), epsilon),
        PolicyKind::Adaptive => {
            let tracers = skills
                .iter()
                .map(|s| TracerConfig::with_scales(s.tau_star, s.baseline().0, scales))
                .collect::<Result<Vec<_>>>()?;
            PolicyState::adaptive(tracers, epsilon, mastery_threshold)
        }
    }
}

/// Coaches one learner until every skill is latently mastered or the action
/// budget runs out. Mastery is checked before every action.
pub fn run_episode<R: Rng + ?Sized>(
    profile: &mut LearnerProfile,
    policy: &mut PolicyState,
    budget: usize,
    mastery_threshold: f64,
    rng: &mut R,
) -> Result<EpisodeResult> {
    if budget < 1 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }
    if policy.n_skills() != profile.n_skills() {
        return Err(Error::InvalidArgument(format!(
            "policy covers {} skills, learner has {}",
            policy.n_skills(),
            profile.n_skills()
        )));
    }
    let mut trace = Vec::new();
    for step in 0..budget {
        if profile.latently_mastered(mastery_threshold) {
            return Ok(EpisodeResult { actions_used: step, success: true, trace });
        }
        let skill = policy.select(rng);
        let observed_time = profile.attempt(skill, step as u64, rng)?;
        policy.observe(skill, observed_time)?;
        trace.push(TraceStep {
            skill,
            observed_time,
            progress_after: profile.states()[skill].progress,
        });
    }
    Ok(EpisodeResult {
        actions_used: budget,
        success: profile.latently_mastered(mastery_threshold),
        trace,
    })
}

fn learner_records(cfg: &ExperimentConfig, n_skills: usize, learner_id: usize) -> Result<Vec<EpisodeRecord>> {
    let mut profile_rng = learner_rng(cfg.master_seed, n_skills, learner_id, Stream::Profile);
    let profile = sample_profile(&mut profile_rng, n_skills, &cfg.distribution, cfg.constants)?;
    let budget = cfg.budget_per_skill * n_skills;
    cfg.policies
        .iter()
        .map(|&kind| {
            let mut learner = profile.clone();
            let mut policy = build_policy(kind, &learner, cfg.epsilon, cfg.mastery_threshold, &cfg.tracer)?;
            let mut rng = learner_rng(cfg.master_seed, n_skills, learner_id, Stream::Episode);
            let result = run_episode(&mut learner, &mut policy, budget, cfg.mastery_threshold, &mut rng)?;
            Ok(EpisodeRecord {
                policy: kind,
                skill_count: n_skills,
                learner_id,
                actions_used: result.actions_used,
                success: result.success,
            })
        })
        .collect()
}

/// Raw per-episode records ordered by skill count, then policy, then
/// learner. Runs on the current rayon pool.
pub fn simulate_records(cfg: &ExperimentConfig) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.skill_counts.len() * cfg.n_learners * cfg.policies.len());
    for &n_skills in &cfg.skill_counts {
        let per_learner = (0..cfg.n_learners)
            .into_par_iter()
            .map(|i| learner_records(cfg, n_skills, i))
            .collect::<Result<Vec<_>>>()?;
        for p in 0..cfg.policies.len() {
            records.extend(per_learner.iter().map(|rs| rs[p]));
        }
    }
    Ok(records)
}

/// Runs the full experiment and aggregates it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let records = simulate_records(cfg)?;
    Ok(ExperimentReport::from_records(records))
}
