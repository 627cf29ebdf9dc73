//! Time- and radius-weighted sup and Hölder seminorms of radial fields.
//!
//! The Hölder part is a Monte-Carlo estimate over sampled quasiparabolic
//! pairs on a common ray, so it bounds the true supremum from below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNormSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma_w: f64,
    pub lambda: f64,
    pub pair_budget: usize,
}

impl WeightedNormSpec {
    pub fn new(alpha: f64, gamma: f64, sigma_w: f64, lambda: f64, pair_budget: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("Hölder exponent {alpha} must lie in (0, 1)")));
        }
        if !(gamma >= 0.0 && sigma_w >= 0.0 && lambda > 0.0) {
            return Err(Error::Config("weights must be nonnegative and the start time positive".into()));
        }
        Ok(Self { alpha, gamma, sigma_w, lambda, pair_budget })
    }

    /// `t^γ (r + t^{-1/2})^σ`.
    pub fn weight(&self, t: f64, r: f64) -> f64 {
        t.powf(self.gamma) * (r + t.powf(-0.5)).powf(self.sigma_w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSup {
    pub value: f64,
    pub t: f64,
    pub r: f64,
}

/// `max t^γ (r + t^{-1/2})^σ |field(t, r)|` over `grid` of `(t, |z|)` points.
///
/// Points beyond the chart radius `delta` are weighted as if `|z| = delta`.
pub fn weighted_sup_norm<F>(field: F, spec: &WeightedNormSpec, grid: &[(f64, f64)], delta: f64) -> Result<WeightedSup>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Domain("weighted norm over an empty grid".into()));
    }
    let values: Vec<WeightedSup> = grid
        .par_iter()
        .map(|&(t, r)| {
            let v = field(t, r)?;
            Ok(WeightedSup { value: spec.weight(t, r.min(delta)) * v.abs(), t, r })
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(
        WeightedSup { value: f64::NEG_INFINITY, t: 0.0, r: 0.0 },
        |best, v| {
            if v.value > best.value {
                v
            } else {
                best
            }
        },
    ))
}

/// One sampled quasiparabolic pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderPair {
    pub t: f64,
    pub r: f64,
    pub z1: f64,
    pub z2: f64,
    pub t2: f64,
    /// Weighted Hölder quotient.
    pub quotient: f64,
    /// `|Δf| / √(d² + |Δt|)`, unweighted.
    pub lipschitz: f64,
    /// `max(|f(m,t)|, |f(m',t')|)`.
    pub max_abs: f64,
    /// `|Δf| / (d² + |Δt|)^α`, unweighted.
    pub raw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderEstimate {
    pub value: f64,
    pub pairs: usize,
    pub argmax: Option<HolderPair>,
}

/// Sampled lower estimate of the weighted Hölder seminorm.
///
/// For every stratum `(t, r)` draws `pair_budget` pairs with
/// `|z|, |z'| ∈ [r/2, r + t^{-1/2}]` and `t ≤ t' ≤ t + (1 + t^{1/2}r)²`,
/// measures `d_t` with `distance(t, |z|, |z'|)`, and returns the largest
/// `t^γ(r+t^{-1/2})^σ(1+t^{1/2}r)^{2α}|Δf|/(d² + |Δt|)^α`.
pub fn weighted_holder_norm<F, D>(
    field: F,
    distance: D,
    spec: &WeightedNormSpec,
    strata: &[(f64, f64)],
    seed: u64,
) -> Result<HolderEstimate>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
    D: Fn(f64, f64, f64) -> Result<f64> + Sync,
{
    let per_stratum: Vec<(usize, Option<HolderPair>)> = strata
        .par_iter()
        .enumerate()
        .map(|(idx, &(t, r))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let lo = 0.5 * r;
            let hi = r + t.powf(-0.5);
            let dt_max = (1.0 + t.sqrt() * r).powi(2);
            let weight = spec.weight(t, r) * (1.0 + t.sqrt() * r).powf(2.0 * spec.alpha);
            let mut best: Option<HolderPair> = None;
            let mut count = 0;
            for _ in 0..spec.pair_budget {
                let z1 = rng.gen_range(lo..hi);
                let z2 = rng.gen_range(lo..hi);
                let t2 = t + rng.gen_range(0.0..dt_max);
                let d = distance(t, z1, z2)?;
                let gap = d * d + (t2 - t);
                if !(gap > 0.0) {
                    continue;
                }
                let (f1, f2) = (field(t, z1)?, field(t2, z2)?);
                let df = (f1 - f2).abs();
                let raw = df / gap.powf(spec.alpha);
                let pair = HolderPair {
                    t,
                    r,
                    z1,
                    z2,
                    t2,
                    quotient: weight * raw,
                    lipschitz: df / gap.sqrt(),
                    max_abs: f1.abs().max(f2.abs()),
                    raw,
                };
                count += 1;
                if best.is_none_or(|b| pair.quotient > b.quotient) {
                    best = Some(pair);
                }
            }
            Ok((count, best))
        })
        .collect::<Result<_>>()?;
    let pairs: usize = per_stratum.iter().map(|p| p.0).sum();
    if pairs == 0 {
        return Err(Error::Domain("pair sampler produced no valid pairs".into()));
    }
    let argmax = per_stratum.into_iter().filter_map(|p| p.1).max_by(|a, b| a.quotient.total_cmp(&b.quotient));
    Ok(HolderEstimate { value: argmax.map_or(0.0, |p| p.quotient), pairs, argmax })
}

/// `(2 max|f|)^{1−2α} (Lipschitz quotient)^{2α}`, which dominates the raw
/// Hölder quotient whenever `α ≤ ½`.
pub fn interpolation_bound(pair: &HolderPair, alpha: f64) -> f64 {
    (2.0 * pair.max_abs).powf(1.0 - 2.0 * alpha) * pair.lipschitz.powf(2.0 * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, gamma: f64, sigma_w: f64) -> WeightedNormSpec {
        WeightedNormSpec::new(alpha, gamma, sigma_w, 1.0, 200).unwrap()
    }

    #[test]
    fn sup_of_constant_and_of_inverse_weight() {
        let grid: Vec<(f64, f64)> = (0..10).flat_map(|i| (1..10).map(move |j| (2f64.powi(i), 0.1 * j as f64))).collect();
        let s = weighted_sup_norm(|_, _| Ok(1.0), &spec(0.5, 0.0, 0.0), &grid, 1.0).unwrap();
        assert_eq!(s.value, 1.0);
        let sp = spec(0.5, 1.5, 2.0);
        let inv = weighted_sup_norm(|t, r| Ok(1.0 / sp.weight(t, r)), &sp, &grid, 1.0).unwrap();
        assert!((inv.value - 1.0).abs() < 1e-12);
        assert!(weighted_sup_norm(|_, _| Ok(1.0), &sp, &[], 1.0).is_err());
    }

    #[test]
    fn off_chart_points_use_chart_radius() {
        let sp = spec(0.5, 0.0, 2.0);
        let s = weighted_sup_norm(|_, _| Ok(1.0), &sp, &[(1.0, 5.0)], 0.5).unwrap();
        assert!((s.value - 1.5f64.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn holder_of_constant_is_zero_and_deterministic() {
        let sp = spec(0.3, 1.5, 2.0);
        let strata = [(10.0, 0.2), (40.0, 0.1)];
        let dist = |_t: f64, a: f64, b: f64| Ok((a - b).abs());
        let h = weighted_holder_norm(|_, _| Ok(3.0), dist, &sp, &strata, 7).unwrap();
        assert_eq!(h.value, 0.0);
        assert_eq!(h.pairs, 400);
        let field = |t: f64, r: f64| Ok((r * 3.0).sin() / t);
        let a = weighted_holder_norm(field, dist, &sp, &strata, 7).unwrap();
        let b = weighted_holder_norm(field, dist, &sp, &strata, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.value > 0.0);
    }

    #[test]
    fn interpolation_inequality_holds_on_samples() {
        let alpha = 0.4;
        let sp = WeightedNormSpec::new(alpha, 0.0, 0.0, 1.0, 500).unwrap();
        let dist = |_t: f64, a: f64, b: f64| Ok(2.0 * (a - b).abs());
        let field = |t: f64, r: f64| Ok((-r * r).exp() / t.sqrt());
        for seed in 0..5 {
            let h = weighted_holder_norm(field, dist, &sp, &[(4.0, 0.5), (16.0, 1.0)], seed).unwrap();
            let p = h.argmax.unwrap();
            assert!(p.raw <= interpolation_bound(&p, alpha) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(WeightedNormSpec::new(1.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(WeightedNormSpec::new(0.5, 1.0, 1.0, 0.0, 1).is_err());
    }
}
