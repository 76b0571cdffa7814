//! Simulated learner: latent skill dynamics and stochastic performance.
//!
//! Each skill starts from a novice baseline derived from the expert time and
//! improves with a diminishing-returns progress recurrence. The expected
//! completion time is further degraded by time since last practice
//! (forgetting) and by practice beyond a per-skill fatigue threshold.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-skill ground-truth parameters of a simulated learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    /// Optimal expert completion time in seconds.
    pub tau_star: f64,
    /// Novice slowdown factor, strictly greater than one.
    pub multiplier: f64,
    /// Baseline spread as a fraction of the expert time.
    pub variance_factor: f64,
    pub learning_rate: f64,
    /// Performance decay per global step without practice.
    pub forgetting_rate: f64,
    /// Attempts tolerated before fatigue starts to slow the learner.
    pub fatigue_threshold: u32,
}

impl SkillParams {
    pub fn new(
        tau_star: f64,
        multiplier: f64,
        variance_factor: f64,
        learning_rate: f64,
        forgetting_rate: f64,
        fatigue_threshold: u32,
    ) -> Result<Self> {
        let params = Self {
            tau_star,
            multiplier,
            variance_factor,
            learning_rate,
            forgetting_rate,
            fatigue_threshold,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tau_star,
            self.multiplier,
            self.variance_factor,
            self.learning_rate,
            self.forgetting_rate,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("skill parameters must be finite".into()));
        }
        if self.tau_star <= 0.0 {
            return Err(Error::InvalidArgument(format!("tau_star must be > 0, got {}", self.tau_star)));
        }
        if self.multiplier <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "multiplier must be > 1, got {}",
                self.multiplier
            )));
        }
        if self.variance_factor <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "variance_factor must be > 0, got {}",
                self.variance_factor
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must lie in (0, 1), got {}",
                self.learning_rate
            )));
        }
        if self.forgetting_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "forgetting_rate must be >= 0, got {}",
                self.forgetting_rate
            )));
        }
        if self.fatigue_threshold < 1 {
            return Err(Error::InvalidArgument("fatigue_threshold must be >= 1".into()));
        }
        Ok(())
    }

    /// Novice mean and standard deviation `(tau* * m, tau* * v)`.
    pub fn baseline(&self) -> (f64, f64) {
        (self.tau_star * self.multiplier, self.tau_star * self.variance_factor)
    }

    /// Distance between novice baseline and expert time.
    pub fn improvable_span(&self) -> f64 {
        self.tau_star * self.multiplier - self.tau_star
    }
}

/// Free function form of [`SkillParams::baseline`].
pub fn baseline(params: &SkillParams) -> (f64, f64) {
    params.baseline()
}

/// Population-wide model constants.
///
/// Fatigue and diminishing returns are off by default. With cumulative
/// fatigue a heavily practiced skill looks worse the more it is practiced,
/// which punishes any policy that concentrates practice; both stay
/// available for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConstants {
    pub lambda_fatigue: f64,
    pub lambda_exp: f64,
    pub gamma_dim: f64,
    pub min_time_floor: f64,
    pub min_learning_increment: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            lambda_fatigue: 0.0,
            lambda_exp: 0.05,
            gamma_dim: 0.0,
            min_time_floor: 0.1,
            min_learning_increment: 0.01,
        }
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_fatigue,
            self.lambda_exp,
            self.gamma_dim,
            self.min_time_floor,
            self.min_learning_increment,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("model constants must be finite".into()));
        }
        if self.lambda_fatigue < 0.0 || self.lambda_exp < 0.0 {
            return Err(Error::Config("lambda_fatigue and lambda_exp must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma_dim) {
            return Err(Error::Config(format!("gamma_dim must lie in [0, 1], got {}", self.gamma_dim)));
        }
        if self.min_time_floor <= 0.0 || self.min_learning_increment <= 0.0 {
            return Err(Error::Config("time floor and learning increment floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Evolving latent state of one skill.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnerSkillState {
    pub progress: f64,
    pub attempts: u32,
    /// Global step of the most recent attempt, `None` before the first one.
    pub last_practice_step: Option<u64>,
}

impl LearnerSkillState {
    /// Steps elapsed since the last attempt; zero for a never-practiced skill.
    pub fn elapsed(&self, step: u64) -> u64 {
        self.last_practice_step
            .map_or(0, |last| step.saturating_sub(last))
    }
}

/// Expected completion time at `step`, including learning, forgetting and
/// fatigue. Never better than the expert time, never worse than the novice
/// baseline.
pub fn current_mean(
    params: &SkillParams,
    constants: &ModelConstants,
    state: &LearnerSkillState,
    step: u64,
) -> f64 {
    let (mu_hat, _) = params.baseline();
    let span = params.improvable_span();
    let learned = state.progress * span;
    let forgotten = params.forgetting_rate * state.elapsed(step) as f64 * span;
    let over_practice = state.attempts.saturating_sub(params.fatigue_threshold) as f64;
    let fatigue = constants.lambda_fatigue * over_practice * span;
    (mu_hat - learned + forgotten + fatigue).min(mu_hat).max(params.tau_star)
}

/// Performance standard deviation; shrinks with experience down to half the
/// baseline, never below a tenth of the expert time.
pub fn current_std(params: &SkillParams, constants: &ModelConstants, state: &LearnerSkillState) -> f64 {
    let (_, sigma_hat) = params.baseline();
    let experience = (constants.lambda_exp * state.attempts as f64).min(0.5);
    (sigma_hat * (1.0 - experience)).max(0.1 * params.tau_star)
}

/// Progress increment for one attempt from progress `p`.
pub fn learning_increment(params: &SkillParams, constants: &ModelConstants, progress: f64) -> f64 {
    (params.learning_rate * (1.0 - constants.gamma_dim * progress)).max(constants.min_learning_increment)
}

/// One attempt driven by an explicit standard-normal draw `z`.
///
/// Performance is sampled from the pre-attempt state; the progress update
/// happens afterwards.
pub fn attempt_with_draw(
    params: &SkillParams,
    constants: &ModelConstants,
    state: &LearnerSkillState,
    step: u64,
    z: f64,
) -> (f64, LearnerSkillState) {
    let mean = current_mean(params, constants, state, step);
    let std = current_std(params, constants, state);
    let observed = (mean + std * z).max(constants.min_time_floor);
    let increment = learning_increment(params, constants, state.progress);
    let next = LearnerSkillState {
        progress: (state.progress + increment).min(1.0),
        attempts: state.attempts + 1,
        last_practice_step: Some(step),
    };
    (observed, next)
}

/// A simulated learner: per-skill parameters plus their evolving state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerProfile {
    skills: Vec<SkillParams>,
    constants: ModelConstants,
    states: Vec<LearnerSkillState>,
}

impl LearnerProfile {
    /// Fresh learner with zero progress on every skill.
    pub fn new(skills: Vec<SkillParams>, constants: ModelConstants) -> Result<Self> {
        if skills.is_empty() {
            return Err(Error::InvalidArgument("a learner needs at least one skill".into()));
        }
        for s in &skills {
            s.validate()?;
        }
        constants.validate()?;
        let states = vec![LearnerSkillState::default(); skills.len()];
        Ok(Self { skills, constants, states })
    }

    pub fn with_states(mut self, states: Vec<LearnerSkillState>) -> Result<Self> {
        if states.len() != self.skills.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} skill states, got {}",
                self.skills.len(),
                states.len()
            )));
        }
        if states.iter().any(|s| !(0.0..=1.0).contains(&s.progress)) {
            return Err(Error::InvalidArgument("progress must lie in [0, 1]".into()));
        }
        self.states = states;
        Ok(self)
    }

    pub fn n_skills(&self) -> usize {
        self.skills.len()
    }

    pub fn skills(&self) -> &[SkillParams] {
        &self.skills
    }

    pub fn states(&self) -> &[LearnerSkillState] {
        &self.states
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    fn check_skill(&self, skill: usize) -> Result<()> {
        if skill >= self.skills.len() {
            return Err(Error::InvalidArgument(format!(
                "skill index {skill} out of range for {} skills",
                self.skills.len()
            )));
        }
        Ok(())
    }

    pub fn current_mean(&self, skill: usize, step: u64) -> Result<f64> {
        self.check_skill(skill)?;
        Ok(current_mean(&self.skills[skill], &self.constants, &self.states[skill], step))
    }

    pub fn current_std(&self, skill: usize) -> Result<f64> {
        self.check_skill(skill)?;
        Ok(current_std(&self.skills[skill], &self.constants, &self.states[skill]))
    }

    /// Practice `skill` at global `step`, returning the observed time.
    pub fn attempt<R: Rng + ?Sized>(&mut self, skill: usize, step: u64, rng: &mut R) -> Result<f64> {
        self.check_skill(skill)?;
        let z: f64 = rng.sample(StandardNormal);
        let (observed, next) =
            attempt_with_draw(&self.skills[skill], &self.constants, &self.states[skill], step, z);
        self.states[skill] = next;
        Ok(observed)
    }

    /// True proficiency of a skill on the expert/novice scale: the expected
    /// time with no elapsed-time decay (fatigue still counts), mapped so the
    /// novice baseline is 0 and the expert time is 1.
    pub fn latent_proficiency(&self, skill: usize) -> Result<f64> {
        self.check_skill(skill)?;
        let params = &self.skills[skill];
        let rested = LearnerSkillState { last_practice_step: None, ..self.states[skill] };
        let mean = current_mean(params, &self.constants, &rested, 0);
        let (mu_hat, _) = params.baseline();
        Ok(((mu_hat - mean) / params.improvable_span()).clamp(0.0, 1.0))
    }

    /// Whether every skill's latent proficiency reaches `threshold`.
    pub fn latently_mastered(&self, threshold: f64) -> bool {
        (0..self.skills.len()).all(|k| self.latent_proficiency(k).is_ok_and(|p| p >= threshold))
    }
}
