//! Gaussian knowledge tracing over continuous completion times.
//!
//! The coach keeps one scalar Gaussian belief per sub-skill over the
//! learner's expected completion time. Each teaching step inflates the
//! variance with process noise, folds in an observation with a conjugate
//! linear-Gaussian update, and maps the posterior mean onto a `[0, 1]`
//! proficiency score between novice and expert reference times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub mean: f64,
    pub variance: f64,
}

impl Belief {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerConfig {
    pub process_noise_var: f64,
    pub obs_noise_var: f64,
    pub novice_mean: f64,
    pub expert_mean: f64,
    pub initial_variance: f64,
}

/// Scale factors used to derive a [`TracerConfig`] from the two reference
/// times of a skill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracerScales {
    /// Observation s.d. as a fraction of the novice time.
    pub obs_noise: f64,
    /// Process-noise s.d. as a fraction of the novice-expert gap.
    pub process_noise: f64,
    /// Initial s.d. as a fraction of the novice-expert gap.
    pub initial_std: f64,
}

impl Default for TracerScales {
    fn default() -> Self {
        Self { obs_noise: 0.15, process_noise: 0.1, initial_std: 0.25 }
    }
}

impl TracerScales {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("obs_noise", self.obs_noise),
            ("process_noise", self.process_noise),
            ("initial_std", self.initial_std),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tracer {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl TracerConfig {
    /// Default calibration for a skill with the given reference times.
    pub fn calibrated(expert_mean: f64, novice_mean: f64) -> Result<Self> {
        Self::with_scales(expert_mean, novice_mean, &TracerScales::default())
    }

    pub fn with_scales(expert_mean: f64, novice_mean: f64, scales: &TracerScales) -> Result<Self> {
        let gap = novice_mean - expert_mean;
        let cfg = Self {
            process_noise_var: (scales.process_noise * gap).powi(2),
            obs_noise_var: (scales.obs_noise * novice_mean).powi(2),
            novice_mean,
            expert_mean,
            initial_variance: (scales.initial_std * gap).powi(2),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expert_mean > 0.0 && self.novice_mean > self.expert_mean) {
            return Err(Error::Config(format!(
                "tracer needs novice_mean > expert_mean > 0, got novice {} expert {}",
                self.novice_mean, self.expert_mean
            )));
        }
        // process noise of exactly zero is allowed for a static skill
        if !(self.process_noise_var >= 0.0 && self.obs_noise_var > 0.0 && self.initial_variance > 0.0) {
            return Err(Error::Config("tracer variances must be positive".into()));
        }
        Ok(())
    }
}

/// Inflates the belief variance by the process noise.
pub fn predict(belief: Belief, cfg: &TracerConfig) -> Belief {
    Belief { mean: belief.mean, variance: belief.variance + cfg.process_noise_var }
}

/// Conjugate update with observation `y` under Gaussian observation noise.
pub fn update(belief: Belief, y: f64, cfg: &TracerConfig) -> Result<Belief> {
    if !y.is_finite() {
        return Err(Error::Observation(format!("observation must be finite, got {y}")));
    }
    let gain = belief.variance / (belief.variance + cfg.obs_noise_var);
    Ok(Belief {
        mean: belief.mean + gain * (y - belief.mean),
        variance: (1.0 - gain) * belief.variance,
    })
}

/// Normalized proficiency: 0 at the novice reference, 1 at the expert
/// reference, linear in between and clipped outside.
pub fn proficiency(belief: &Belief, cfg: &TracerConfig) -> f64 {
    proficiency_of_mean(belief.mean, cfg)
}

pub fn proficiency_of_mean(mean: f64, cfg: &TracerConfig) -> f64 {
    ((cfg.novice_mean - mean) / (cfg.novice_mean - cfg.expert_mean)).clamp(0.0, 1.0)
}

/// Beliefs whose means are the first observation of each skill.
pub fn init_beliefs(first_obs: &[f64], cfgs: &[TracerConfig]) -> Result<Vec<Belief>> {
    if first_obs.len() != cfgs.len() {
        return Err(Error::Init(format!(
            "expected one first observation per skill ({}), got {}",
            cfgs.len(),
            first_obs.len()
        )));
    }
    first_obs
        .iter()
        .zip(cfgs)
        .enumerate()
        .map(|(k, (&y, cfg))| {
            if !y.is_finite() {
                return Err(Error::Init(format!("skill {k}: observation must be finite")));
            }
            Ok(initial_belief(y, cfg))
        })
        .collect()
}

pub fn initial_belief(first_obs: f64, cfg: &TracerConfig) -> Belief {
    Belief { mean: first_obs, variance: cfg.initial_variance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(obs: f64, proc_: f64) -> TracerConfig {
        TracerConfig {
            process_noise_var: proc_,
            obs_noise_var: obs,
            novice_mean: 40.0,
            expert_mean: 5.0,
            initial_variance: 10.0,
        }
    }

    #[test]
    fn predict_examples() {
        let b = Belief::new(20.0, 4.0);
        assert_eq!(predict(b, &cfg(1.0, 0.0)), b);
        assert_eq!(predict(b, &cfg(1.0, 1.0)), Belief::new(20.0, 5.0));
        let twice = predict(predict(b, &cfg(1.0, 1.5)), &cfg(1.0, 1.5));
        assert_eq!(twice, predict(b, &cfg(1.0, 3.0)));
    }

    #[test]
    fn update_hand_example() {
        let b = update(Belief::new(30.0, 9.0), 21.0, &cfg(3.0, 0.0)).unwrap();
        assert!((b.mean - 23.25).abs() < 1e-12);
        assert!((b.variance - 2.25).abs() < 1e-12);
    }

    #[test]
    fn equal_precision_averages() {
        let b = update(Belief::new(10.0, 4.0), 20.0, &cfg(4.0, 0.0)).unwrap();
        assert_eq!(b.mean, 15.0);
    }

    #[test]
    fn huge_observation_noise_leaves_belief() {
        let b0 = Belief::new(10.0, 4.0);
        let b = update(b0, 99.0, &cfg(1e300, 0.0)).unwrap();
        assert!((b.mean - b0.mean).abs() < 1e-12);
        assert!((b.variance - b0.variance).abs() < 1e-12);
    }

    #[test]
    fn non_finite_observation_rejected() {
        let err = update(Belief::new(10.0, 4.0), f64::NAN, &cfg(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Observation(_)));
    }

    #[test]
    fn proficiency_endpoints_and_open_door_midpoint() {
        let c = TracerConfig::calibrated(5.0, 40.0).unwrap();
        assert_eq!(proficiency(&Belief::new(40.0, 1.0), &c), 0.0);
        assert_eq!(proficiency(&Belief::new(5.0, 1.0), &c), 1.0);
        assert_eq!(proficiency(&Belief::new(22.5, 1.0), &c), 0.5);
        assert_eq!(proficiency(&Belief::new(2.0, 1.0), &c), 1.0);
    }

    #[test]
    fn init_beliefs_identity_and_errors() {
        let cfgs: Vec<_> = [15.0, 5.0, 10.0]
            .iter()
            .map(|&e| TracerConfig::calibrated(e, 40.0).unwrap())
            .collect();
        let b = init_beliefs(&[18.0, 25.0, 30.0], &cfgs).unwrap();
        assert_eq!(b.iter().map(|b| b.mean).collect::<Vec<_>>(), vec![18.0, 25.0, 30.0]);
        let novice = init_beliefs(&[40.0, 40.0, 40.0], &cfgs).unwrap();
        assert!(novice.iter().zip(&cfgs).all(|(b, c)| proficiency(b, c) == 0.0));
        assert!(matches!(init_beliefs(&[18.0, 25.0], &cfgs), Err(Error::Init(_))));
    }

    #[test]
    fn default_scales() {
        let c = TracerConfig::calibrated(5.0, 40.0).unwrap();
        assert!((c.obs_noise_var - 36.0).abs() < 1e-12);
        assert!((c.process_noise_var - 12.25).abs() < 1e-12);
        assert!((c.initial_variance - 76.5625).abs() < 1e-12);
        assert!(TracerConfig::calibrated(40.0, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn update_strictly_contracts(mean in 0.0..100.0f64, var in 1e-3..1e3f64, y in 0.0..200.0f64, obs in 1e-3..1e3f64) {
            let c = cfg(obs, 0.5);
            let b = update(Belief::new(mean, var), y, &c).unwrap();
            prop_assert!(b.variance < var);
            prop_assert!(b.variance > 0.0);
        }

        #[test]
        fn lower_mean_is_more_proficient(a in 5.0..40.0f64, b in 5.0..40.0f64) {
            let c = TracerConfig::calibrated(5.0, 40.0).unwrap();
            let (pa, pb) = (proficiency_of_mean(a, &c), proficiency_of_mean(b, &c));
            if a < b { prop_assert!(pa > pb); }
        }

        #[test]
        fn ordering_survives_common_rescale(means in proptest::collection::vec(1.0..60.0f64, 2..8), scale in 0.1..10.0f64) {
            let c = TracerConfig::calibrated(5.0, 40.0).unwrap();
            let cs = TracerConfig::calibrated(5.0 * scale, 40.0 * scale).unwrap();
            let arg = |ps: Vec<f64>| ps.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &p)| if p < acc.1 { (i, p) } else { acc }).0;
            let p1: Vec<f64> = means.iter().map(|&m| proficiency_of_mean(m, &c)).collect();
            let p2: Vec<f64> = means.iter().map(|&m| proficiency_of_mean(m * scale, &cs)).collect();
            for (x, y) in p1.iter().zip(&p2) { prop_assert!((x - y).abs() < 1e-9); }
            prop_assert_eq!(arg(p1), arg(p2));
        }

        #[test]
        fn constant_observation_converges(y in 5.0..40.0f64, start in 5.0..40.0f64) {
            let c = TracerConfig::calibrated(5.0, 40.0).unwrap();
            let mut b = initial_belief(start, &c);
            for _ in 0..2000 {
                b = update(predict(b, &c), y, &c).unwrap();
            }
            prop_assert!((b.mean - y).abs() < 1e-6);
        }
    }
}
