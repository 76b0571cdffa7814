//! Curriculum policies choosing which sub-skill to practice next.
//!
//! * `Uniform` cycles through skills in a fixed order.
//! * `Greedy` picks the skill whose most recent expert-normalized time is
//!   worst, with epsilon exploration.
//! * `Adaptive` keeps a Gaussian belief per skill and picks the unmastered
//!   skill with the lowest estimated proficiency, with epsilon exploration
//!   over all skills.
//!
//! Ties always break toward the lowest index.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracer::{self, Belief, TracerConfig};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_MASTERY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Uniform,
    Greedy,
    Adaptive,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Uniform, PolicyKind::Greedy, PolicyKind::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Uniform => "uniform",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PolicyKind::Uniform),
            "greedy" => Ok(PolicyKind::Greedy),
            "adaptive" => Ok(PolicyKind::Adaptive),
            other => Err(Error::InvalidArgument(format!("unknown policy '{other}'"))),
        }
    }
}

/// Per-kind bookkeeping. Only the variant matching the policy kind exists.
#[derive(Debug, Clone, PartialEq)]
enum Strategy {
    Uniform {
        cursor: usize,
    },
    Greedy {
        expert_times: Vec<f64>,
        last_perf: Vec<Option<f64>>,
    },
    Adaptive {
        tracers: Vec<TracerConfig>,
        beliefs: Vec<Option<Belief>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    strategy: Strategy,
    n_skills: usize,
    epsilon: f64,
    mastery_threshold: f64,
}

fn check_probabilities(epsilon: f64, mastery_threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if !(mastery_threshold > 0.0 && mastery_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mastery_threshold must lie in (0, 1], got {mastery_threshold}"
        )));
    }
    Ok(())
}

impl PolicyState {
    pub fn uniform(n_skills: usize) -> Result<Self> {
        if n_skills == 0 {
            return Err(Error::InvalidArgument("n_skills must be >= 1".into()));
        }
        Ok(Self {
            strategy: Strategy::Uniform { cursor: 0 },
            n_skills,
            epsilon: DEFAULT_EPSILON,
            mastery_threshold: DEFAULT_MASTERY_THRESHOLD,
        })
    }

    /// `expert_times` are used to normalize raw completion times per skill.
    pub fn greedy(expert_times: Vec<f64>, epsilon: f64) -> Result<Self> {
        if expert_times.is_empty() {
            return Err(Error::InvalidArgument("n_skills must be >= 1".into()));
        }
        if expert_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidArgument("expert times must be > 0".into()));
        }
        check_probabilities(epsilon, DEFAULT_MASTERY_THRESHOLD)?;
        let n_skills = expert_times.len();
        Ok(Self {
            strategy: Strategy::Greedy { last_perf: vec![None; n_skills], expert_times },
            n_skills,
            epsilon,
            mastery_threshold: DEFAULT_MASTERY_THRESHOLD,
        })
    }

    /// Beliefs start empty; each skill's first observation initializes its
    /// mean.
    pub fn adaptive(tracers: Vec<TracerConfig>, epsilon: f64, mastery_threshold: f64) -> Result<Self> {
        if tracers.is_empty() {
            return Err(Error::InvalidArgument("n_skills must be >= 1".into()));
        }
        for t in &tracers {
            t.validate()?;
        }
        check_probabilities(epsilon, mastery_threshold)?;
        let n_skills = tracers.len();
        Ok(Self {
            strategy: Strategy::Adaptive { beliefs: vec![None; n_skills], tracers },
            n_skills,
            epsilon,
            mastery_threshold,
        })
    }

    /// Adaptive policy whose beliefs are already initialized.
    pub fn adaptive_with_beliefs(
        tracers: Vec<TracerConfig>,
        beliefs: Vec<Belief>,
        epsilon: f64,
        mastery_threshold: f64,
    ) -> Result<Self> {
        if beliefs.len() != tracers.len() {
            return Err(Error::Init(format!(
                "expected {} beliefs, got {}",
                tracers.len(),
                beliefs.len()
            )));
        }
        let mut state = Self::adaptive(tracers, epsilon, mastery_threshold)?;
        if let Strategy::Adaptive { beliefs: slots, .. } = &mut state.strategy {
            *slots = beliefs.into_iter().map(Some).collect();
        }
        Ok(state)
    }

    pub fn kind(&self) -> PolicyKind {
        match self.strategy {
            Strategy::Uniform { .. } => PolicyKind::Uniform,
            Strategy::Greedy { .. } => PolicyKind::Greedy,
            Strategy::Adaptive { .. } => PolicyKind::Adaptive,
        }
    }

    pub fn n_skills(&self) -> usize {
        self.n_skills
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mastery_threshold(&self) -> f64 {
        self.mastery_threshold
    }

    /// Current beliefs of an adaptive policy (`None` for unobserved skills).
    pub fn beliefs(&self) -> Option<&[Option<Belief>]> {
        match &self.strategy {
            Strategy::Adaptive { beliefs, .. } => Some(beliefs),
            _ => None,
        }
    }

    /// Estimated proficiency per skill for an adaptive policy; unobserved
    /// skills report `None`.
    pub fn proficiencies(&self) -> Result<Vec<Option<f64>>> {
        match &self.strategy {
            Strategy::Adaptive { tracers, beliefs } => Ok(beliefs
                .iter()
                .zip(tracers)
                .map(|(b, cfg)| b.as_ref().map(|b| tracer::proficiency(b, cfg)))
                .collect()),
            _ => Err(Error::Unsupported(format!(
                "{} policy keeps no proficiency estimates",
                self.kind()
            ))),
        }
    }

    /// Picks the next skill to practice.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let n = self.n_skills;
        match &mut self.strategy {
            Strategy::Uniform { cursor } => {
                let skill = *cursor % n;
                *cursor = (*cursor + 1) % n;
                skill
            }
            Strategy::Greedy { last_perf, .. } => {
                if explore(rng, self.epsilon) {
                    return rng.random_range(0..n);
                }
                worst_recent(last_perf)
            }
            Strategy::Adaptive { tracers, beliefs } => {
                let scores: Vec<Option<f64>> = beliefs
                    .iter()
                    .zip(tracers.iter())
                    .map(|(b, cfg)| b.as_ref().map(|b| tracer::proficiency(b, cfg)))
                    .collect();
                // Exploration covers every skill, including ones believed
                // mastered: a single noisy early observation can make a skill
                // look mastered and it would otherwise never be revisited.
                if explore(rng, self.epsilon) {
                    return rng.random_range(0..n);
                }
                let threshold = self.mastery_threshold;
                lowest_proficiency(&scores, threshold)
            }
        }
    }

    /// Records the observed completion time `y` for the practiced `skill`.
    pub fn observe(&mut self, skill: usize, y: f64) -> Result<()> {
        if skill >= self.n_skills {
            return Err(Error::InvalidArgument(format!(
                "skill index {skill} out of range for {} skills",
                self.n_skills
            )));
        }
        if !y.is_finite() {
            return Err(Error::Observation(format!("observation must be finite, got {y}")));
        }
        match &mut self.strategy {
            Strategy::Uniform { .. } => {}
            Strategy::Greedy { expert_times, last_perf } => {
                last_perf[skill] = Some(y / expert_times[skill]);
            }
            Strategy::Adaptive { tracers, beliefs } => {
                for (b, cfg) in beliefs.iter_mut().zip(tracers.iter()) {
                    if let Some(b) = b {
                        *b = tracer::predict(*b, cfg);
                    }
                }
                let cfg = &tracers[skill];
                beliefs[skill] = Some(match beliefs[skill] {
                    Some(b) => tracer::update(b, y, cfg)?,
                    None => tracer::initial_belief(y, cfg),
                });
            }
        }
        Ok(())
    }

    /// Whether the adaptive policy believes every skill is mastered.
    pub fn estimated_mastered(&self) -> Result<bool> {
        Ok(self
            .proficiencies()?
            .iter()
            .all(|p| p.is_some_and(|p| p >= self.mastery_threshold)))
    }
}

fn explore<R: Rng + ?Sized>(rng: &mut R, epsilon: f64) -> bool {
    // no draw at all when exploration is off keeps pure-exploit replays trivial
    epsilon > 0.0 && rng.random::<f64>() < epsilon
}

/// Highest normalized recent time; never-practiced skills rank worst.
fn worst_recent(last_perf: &[Option<f64>]) -> usize {
    let mut best = 0;
    for k in 1..last_perf.len() {
        let better = match (last_perf[k], last_perf[best]) {
            (None, Some(_)) => true,
            (Some(a), Some(b)) => a > b,
            _ => false,
        };
        if better {
            best = k;
        }
    }
    best
}

/// Lowest estimated proficiency among unmastered skills (unobserved skills
/// rank lowest); the lowest overall when everything looks mastered.
fn lowest_proficiency(scores: &[Option<f64>], threshold: f64) -> usize {
    let key = |s: Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
    let argmin = |candidates: &mut dyn Iterator<Item = usize>| {
        candidates.fold(None, |best: Option<usize>, k| match best {
            Some(b) if key(scores[b]) <= key(scores[k]) => Some(b),
            _ => Some(k),
        })
    };
    let mut unmastered = (0..scores.len()).filter(|&k| scores[k].is_none_or(|p| p < threshold));
    argmin(&mut unmastered)
        .or_else(|| argmin(&mut (0..scores.len())))
        .expect("at least one skill")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tracers(n: usize) -> Vec<TracerConfig> {
        (0..n).map(|_| TracerConfig::calibrated(5.0, 40.0).unwrap()).collect()
    }

    fn beliefs_for(profs: &[f64]) -> Vec<Belief> {
        profs.iter().map(|p| Belief::new(40.0 - p * 35.0, 1.0)).collect()
    }

    #[test]
    fn uniform_round_robin() {
        let mut p = PolicyState::uniform(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks: Vec<_> = (0..7).map(|_| p.select(&mut rng)).collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2, 0]);
        p.observe(2, 100.0).unwrap();
        assert_eq!(p.select(&mut rng), 1);
    }

    #[test]
    fn adaptive_pure_argmin() {
        let mut p =
            PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&[0.9, 0.3, 0.7]), 0.0, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.select(&mut rng), 1);
    }

    #[test]
    fn adaptive_skips_mastered_and_falls_back_to_overall_min() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p =
            PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&[0.95, 0.85, 0.9]), 0.0, 0.8).unwrap();
        assert_eq!(p.select(&mut rng), 1);
        let mut p =
            PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&[0.5, 0.5, 0.9]), 0.0, 0.8).unwrap();
        assert_eq!(p.select(&mut rng), 0);
    }

    #[test]
    fn adaptive_visits_unobserved_skills_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PolicyState::adaptive(tracers(3), 0.0, 0.8).unwrap();
        for expected in 0..3 {
            let k = p.select(&mut rng);
            assert_eq!(k, expected);
            p.observe(k, 20.0).unwrap();
        }
    }

    #[test]
    fn adaptive_converges_on_expert_observations() {
        let mut p = PolicyState::adaptive(tracers(2), 0.1, 0.8).unwrap();
        p.observe(0, 40.0).unwrap();
        for _ in 0..200 {
            p.observe(0, 5.0).unwrap();
        }
        let prof = p.proficiencies().unwrap()[0].unwrap();
        assert!(prof > 0.999, "{prof}");
    }

    #[test]
    fn greedy_brute_force_three_skills() {
        // enumerate every cache pattern over {never, 1.2, 2.0} and compare
        // against an independent argmax with "never" as +infinity
        let values = [None, Some(1.2), Some(2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for a in values {
            for b in values {
                for c in values {
                    let cache = [a, b, c];
                    let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
                    let mut expected = 0;
                    for k in 1..3 {
                        if key(cache[k]) > key(cache[expected]) {
                            expected = k;
                        }
                    }
                    let mut p = PolicyState::greedy(vec![1.0; 3], 0.0).unwrap();
                    for (k, v) in cache.iter().enumerate() {
                        if let Some(v) = v {
                            p.observe(k, *v).unwrap();
                        }
                    }
                    assert_eq!(p.select(&mut rng), expected, "cache {cache:?}");
                }
            }
        }
        let mut p = PolicyState::greedy(vec![1.0; 3], 0.0).unwrap();
        p.observe(0, 2.0).unwrap();
        p.observe(2, 1.2).unwrap();
        assert_eq!(p.select(&mut rng), 1);
    }

    #[test]
    fn greedy_normalizes_and_smaller_time_lowers_priority() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PolicyState::greedy(vec![10.0, 2.0], 0.0).unwrap();
        p.observe(0, 30.0).unwrap(); // 3.0
        p.observe(1, 8.0).unwrap(); // 4.0
        assert_eq!(p.select(&mut rng), 1);
        p.observe(1, 4.0).unwrap(); // 2.0
        assert_eq!(p.select(&mut rng), 0);
    }

    #[test]
    fn estimated_mastery_threshold_inclusive() {
        let p = PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&[0.81, 0.81, 0.81]), 0.1, 0.8).unwrap();
        assert!(p.estimated_mastered().unwrap());
        let p = PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&[0.81, 0.79, 0.81]), 0.1, 0.8).unwrap();
        assert!(!p.estimated_mastered().unwrap());
        // mean exactly on the 0.8 point of the scale
        let exact = vec![Belief::new(12.0, 1.0); 2];
        let p = PolicyState::adaptive_with_beliefs(tracers(2), exact, 0.1, 0.8).unwrap();
        assert_eq!(p.proficiencies().unwrap()[0], Some(0.8));
        assert!(p.estimated_mastered().unwrap());
        let u = PolicyState::uniform(3).unwrap();
        assert!(matches!(u.estimated_mastered(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn observe_rejects_bad_index() {
        let mut p = PolicyState::uniform(2).unwrap();
        assert!(matches!(p.observe(2, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(PolicyState::adaptive(tracers(2), 1.5, 0.8).is_err());
        assert!(PolicyState::adaptive(tracers(2), 0.1, 0.0).is_err());
        assert!(PolicyState::greedy(vec![1.0], -0.1).is_err());
    }

    #[test]
    fn exploration_rate_matches_epsilon() {
        let profs = [0.1, 0.5, 0.6, 0.7];
        let p0 = PolicyState::adaptive_with_beliefs(tracers(4), beliefs_for(&profs), 0.1, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut off = 0;
        for _ in 0..n {
            let mut p = p0.clone();
            if p.select(&mut rng) != 0 {
                off += 1;
            }
        }
        let rate = off as f64 / n as f64;
        let expected = 0.1 * 3.0 / 4.0;
        assert!((rate - expected).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn exploration_revisits_believed_mastered_skills() {
        let profs = [0.1, 0.95, 0.99];
        let p0 = PolicyState::adaptive_with_beliefs(tracers(3), beliefs_for(&profs), 1.0, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 3];
        for _ in 0..200 {
            seen[p0.clone().select(&mut rng)] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn label_permutation_permutes_selection() {
        let profs = [0.42, 0.13, 0.77, 0.31, 0.55];
        let perm = [3, 0, 4, 1, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PolicyState::adaptive_with_beliefs(tracers(5), beliefs_for(&profs), 0.0, 0.8).unwrap();
        let permuted: Vec<f64> = (0..5).map(|i| profs[perm[i]]).collect();
        let mut q = PolicyState::adaptive_with_beliefs(tracers(5), beliefs_for(&permuted), 0.0, 0.8).unwrap();
        let a = p.select(&mut rng);
        let b = q.select(&mut rng);
        assert_eq!(perm[b], a);
    }
}
