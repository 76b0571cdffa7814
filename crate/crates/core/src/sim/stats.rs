//! Two-sample statistics used in the experiment report.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `None` for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Statistics(format!(
            "need at least two samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Statistics("samples must be finite".into()));
    }
    Ok(())
}

/// Welch's unequal-variance t-test.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a).unwrap() / na, sample_variance(b).unwrap() / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Ok(WelchTest { t: 0.0, df: na + nb - 2.0, p: 1.0 });
        }
        return Err(Error::Statistics("zero variance in both samples with unequal means".into()));
    }
    let t = diff / se2.sqrt();
    let df = se2.powi(2) / (va.powi(2) / (na - 1.0) + vb.powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Statistics(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchTest { t, df, p })
}

/// Cohen's d with pooled standard deviation; negative when `a` has the
/// smaller mean.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_variance(a).unwrap() + (nb - 1.0) * sample_variance(b).unwrap())
        / (na + nb - 2.0))
        .sqrt();
    let diff = mean(a) - mean(b);
    if pooled == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Statistics("zero pooled variance with unequal means".into()));
    }
    Ok(diff / pooled)
}
