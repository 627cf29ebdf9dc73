//! Power-law decay fits on log-log axes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Fits with a larger RMS log-residual are refused.
pub const MAX_FIT_RESIDUAL: f64 = 0.2;

/// Least-squares fit of `log y = intercept + slope · log t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in `log y`, i.e. a relative error.
    pub residual: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub ci_half_width: f64,
}

impl DecayFit {
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

pub fn decay_exponent_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::Fit(format!("need at least 4 samples, got {n}")));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) || !(samples[0].0 > 0.0) {
        return Err(Error::Fit("sample times must be positive and strictly increasing".into()));
    }
    if let Some(&(t, y)) = samples.iter().find(|s| !(s.1 > 0.0 && s.1.is_finite())) {
        return Err(Error::Fit(format!("non-positive value {y} at t = {t}")));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual = (ss / nf).sqrt();
    if residual > MAX_FIT_RESIDUAL {
        return Err(Error::Fit(format!("log-log residual {residual:.3} exceeds {MAX_FIT_RESIDUAL}")));
    }
    let dof = nf - 2.0;
    let quantile = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.975);
    let ci_half_width = quantile * (ss / dof / sxx).sqrt();
    Ok(DecayFit { samples: samples.to_vec(), slope, intercept, residual, ci_half_width })
}

/// Samples with `lo <= t <= hi`.
pub fn window(samples: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    samples.iter().copied().filter(|s| s.0 >= lo && s.0 <= hi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..40).map(|i| 10f64.powf(2.0 + 3.0 * i as f64 / 39.0)).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = decay_exponent_fit(&grid(|t| 3.0 * t.powi(-2))).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
        assert!(fit.residual < 1e-12 && fit.ci_half_width < 1e-9);
        assert!((fit.predict(50.0) - 3.0 / 2500.0).abs() < 1e-12);
    }

    #[test]
    fn oscillating_perturbation() {
        let fit = decay_exponent_fit(&grid(|t| (1.0 + 0.1 * t.ln().sin()) / t)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{}", fit.slope);
        assert!(fit.ci_half_width > 0.0);
    }

    #[test]
    fn refusals() {
        assert!(decay_exponent_fit(&grid(|t| t)[..3]).is_err());
        assert!(decay_exponent_fit(&[(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(decay_exponent_fit(&grid(|t| if t > 1e3 { 0.0 } else { 1.0 })).is_err());
        let noisy: Vec<(f64, f64)> =
            grid(|t| t).into_iter().enumerate().map(|(i, (t, y))| (t, y * if i % 2 == 0 { 3.0 } else { 0.3 })).collect();
        assert!(matches!(decay_exponent_fit(&noisy), Err(Error::Fit(_))));
    }

    #[test]
    fn window_selects_closed_range() {
        let w = window(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], 2.0, 3.0);
        assert_eq!(w.len(), 2);
    }

    proptest! {
        #[test]
        fn recovers_slope(p in -3.0f64..1.0, c in 0.1f64..10.0) {
            let fit = decay_exponent_fit(&grid(|t| c * t.powf(p))).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-9);
        }
    }
}
