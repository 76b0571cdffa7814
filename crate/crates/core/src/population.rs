//! Parameter distributions for generating diverse learner populations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{LearnerProfile, ModelConstants, SkillParams};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// One weighted uniform component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub low: f64,
    pub high: f64,
}

impl MixtureComponent {
    pub const fn new(weight: f64, low: f64, high: f64) -> Self {
        Self { weight, low, high }
    }
}

/// A finite mixture of uniform distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UniformMixture {
    pub components: Vec<MixtureComponent>,
}

impl UniformMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Self {
        Self { components }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config(format!("{name}: mixture has no components")));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight.is_finite() && c.low.is_finite() && c.high.is_finite()) {
                return Err(Error::Config(format!("{name}: non-finite mixture component")));
            }
            if c.weight < 0.0 {
                return Err(Error::Config(format!("{name}: negative weight {}", c.weight)));
            }
            if c.low < 0.0 || c.high < c.low {
                return Err(Error::Config(format!(
                    "{name}: invalid range [{}, {}]",
                    c.low, c.high
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::Config(format!("{name}: weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Draws a component by weight, then a value uniformly within it. Always
    /// consumes exactly two uniform draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc || i == last {
                return c.low + v * (c.high - c.low);
            }
        }
        unreachable!("mixture has at least one component")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub low: u32,
    pub high: u32,
}

/// Distributions for every per-skill parameter. Defaults reproduce the
/// reference population (easy/medium/hard expert times, near-expert to
/// struggling multipliers, consistent vs noisy learners, fast/slow/average
/// learning rates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionConfig {
    pub tau_star: UniformMixture,
    pub multiplier: UniformMixture,
    pub variance_factor: UniformMixture,
    pub learning_rate: UniformMixture,
    pub forgetting_rate: UniformRange,
    /// Inclusive integer range.
    pub fatigue_threshold: IntRange,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        Self {
            tau_star: UniformMixture::new(vec![
                MixtureComponent::new(0.30, 1.0, 5.0),
                MixtureComponent::new(0.30, 5.0, 12.0),
                MixtureComponent::new(0.40, 12.0, 25.0),
            ]),
            multiplier: UniformMixture::new(vec![
                MixtureComponent::new(0.20, 1.0, 2.0),
                MixtureComponent::new(0.30, 2.0, 5.0),
                MixtureComponent::new(0.50, 5.0, 15.0),
            ]),
            variance_factor: UniformMixture::new(vec![
                MixtureComponent::new(0.30, 0.05, 0.2),
                MixtureComponent::new(0.70, 0.3, 1.2),
            ]),
            learning_rate: UniformMixture::new(vec![
                MixtureComponent::new(0.25, 0.2, 0.5),
                MixtureComponent::new(0.25, 0.01, 0.08),
                MixtureComponent::new(0.50, 0.08, 0.25),
            ]),
            forgetting_rate: UniformRange { low: 0.02, high: 0.1 },
            fatigue_threshold: IntRange { low: 2, high: 20 },
        }
    }
}

impl DistributionConfig {
    pub fn validate(&self) -> Result<()> {
        self.tau_star.validate("tau_star")?;
        self.multiplier.validate("multiplier")?;
        self.variance_factor.validate("variance_factor")?;
        self.learning_rate.validate("learning_rate")?;
        let f = self.forgetting_rate;
        if !(f.low.is_finite() && f.high.is_finite()) || f.low < 0.0 || f.high < f.low {
            return Err(Error::Config(format!(
                "forgetting_rate: invalid range [{}, {}]",
                f.low, f.high
            )));
        }
        let n = self.fatigue_threshold;
        if n.low < 1 || n.high < n.low {
            return Err(Error::Config(format!(
                "fatigue_threshold: invalid range [{}, {}]",
                n.low, n.high
            )));
        }
        if self.multiplier.components.iter().any(|c| c.high <= 1.0) {
            return Err(Error::Config("multiplier components must extend above 1".into()));
        }
        if self.learning_rate.components.iter().any(|c| c.high >= 1.0) {
            return Err(Error::Config("learning_rate must stay below 1".into()));
        }
        Ok(())
    }

    /// Draws one skill. Parameters that must be strictly positive (or above
    /// one, for the multiplier) are nudged off a closed lower bound.
    pub fn sample_skill<R: Rng + ?Sized>(&self, rng: &mut R) -> SkillParams {
        let tau_star = self.tau_star.sample(rng).max(f64::MIN_POSITIVE);
        let multiplier = self.multiplier.sample(rng).max(1.0 + 1e-9);
        let variance_factor = self.variance_factor.sample(rng).max(f64::MIN_POSITIVE);
        let learning_rate = self.learning_rate.sample(rng).max(f64::MIN_POSITIVE);
        let forgetting_rate = rng.random_range(self.forgetting_rate.low..=self.forgetting_rate.high);
        let fatigue_threshold =
            rng.random_range(self.fatigue_threshold.low..=self.fatigue_threshold.high);
        SkillParams {
            tau_star,
            multiplier,
            variance_factor,
            learning_rate,
            forgetting_rate,
            fatigue_threshold,
        }
    }
}

/// Samples a fresh learner with `n_skills` independently drawn skills.
pub fn sample_profile<R: Rng + ?Sized>(
    rng: &mut R,
    n_skills: usize,
    dist: &DistributionConfig,
    constants: ModelConstants,
) -> Result<LearnerProfile> {
    if n_skills == 0 {
        return Err(Error::InvalidArgument("n_skills must be >= 1".into()));
    }
    dist.validate()?;
    let skills = (0..n_skills).map(|_| dist.sample_skill(rng)).collect();
    LearnerProfile::new(skills, constants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_draws_stay_in_table_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = sample_profile(&mut rng, 3, &DistributionConfig::default(), ModelConstants::default()).unwrap();
        for s in p.skills() {
            assert!((1.0..=25.0).contains(&s.tau_star));
            assert!((1.0..=15.0).contains(&s.multiplier));
            assert!((0.05..=1.2).contains(&s.variance_factor));
            assert!((0.01..=0.5).contains(&s.learning_rate));
            assert!((0.02..=0.1).contains(&s.forgetting_rate));
            assert!((2..=20).contains(&s.fatigue_threshold));
        }
        for st in p.states() {
            assert_eq!(st.progress, 0.0);
            assert_eq!(st.attempts, 0);
            assert_eq!(st.last_practice_step, None);
        }
    }

    #[test]
    fn same_seed_same_profile() {
        let dist = DistributionConfig::default();
        let a = sample_profile(&mut ChaCha8Rng::seed_from_u64(11), 5, &dist, ModelConstants::default()).unwrap();
        let b = sample_profile(&mut ChaCha8Rng::seed_from_u64(11), 5, &dist, ModelConstants::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn easy_share_matches_weight() {
        let dist = DistributionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let easy = (0..n).filter(|_| dist.sample_skill(&mut rng).tau_star <= 5.0).count();
        let share = easy as f64 / n as f64;
        assert!((share - 0.30).abs() < 0.01, "share {share}");
    }

    #[test]
    fn rejects_bad_weights_and_ranges() {
        let mut d = DistributionConfig::default();
        d.tau_star.components[0].weight = 0.5;
        assert!(matches!(d.validate(), Err(Error::Config(_))));

        let mut d = DistributionConfig::default();
        d.variance_factor.components[1] = MixtureComponent::new(0.7, 1.2, 0.3);
        assert!(matches!(d.validate(), Err(Error::Config(_))));

        let mut d = DistributionConfig::default();
        d.forgetting_rate.low = -0.1;
        assert!(matches!(d.validate(), Err(Error::Config(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_profile(&mut rng, 0, &DistributionConfig::default(), ModelConstants::default()).is_err());
    }
}
