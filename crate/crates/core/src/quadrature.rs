//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-13, max_intervals: 2000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` by adaptive bisection of the worst panel.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = kronrod(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Evaluation("quadrature integrand".into()));
        }
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target {
            return Ok(QuadResult { value: total, error: err, evaluations });
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Accuracy { achieved: err, requested: target });
        }
        let (idx, _) = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty panel list");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            return Err(Error::Accuracy { achieved: err, requested: target });
        }
        let (v1, e1) = kronrod(&mut f, pa, mid);
        let (v2, e2) = kronrod(&mut f, mid, pb);
        evaluations += 30;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_smooth_integrands() {
        let r = integrate(|x| x.powi(6), 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - 128.0 / 7.0).abs() < 1e-12);
        let r = integrate(f64::exp, -1.0, 3.0, Tolerance::default()).unwrap();
        assert!((r.value - (3f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_is_refined() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance { abs: 1e-10, rel: 1e-12, max_intervals: 4000 }).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_reports_accuracy() {
        let tol = Tolerance { abs: 1e-15, rel: 0.0, max_intervals: 3 };
        match integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, tol) {
            Err(Error::Accuracy { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
