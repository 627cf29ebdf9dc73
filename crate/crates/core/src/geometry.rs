//! Radial Kähler calculus in complex dimension two.
//!
//! A `U(2)`-invariant potential `F(ρ)`, `ρ = |z|²`, has Hessian eigenvalues
//! `F_ρ` on the complement of `ℂz` and `F_ρ + ρF_ρρ` along `ℂz`. Everything in
//! the crate is built on that reduction.

use crate::error::{domain, Error, Result};

/// Eigenvalues of the radial Kähler metric: `phi` transverse, `psi` along `ℂz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricEigenvalues {
    pub phi: f64,
    pub psi: f64,
}

impl MetricEigenvalues {
    pub fn det(&self) -> f64 {
        self.phi * self.psi
    }

    pub fn is_positive(&self) -> bool {
        self.phi > 0.0 && self.psi > 0.0
    }

    /// `log det g`; its `−√−1∂∂̄` is the Ricci form.
    pub fn log_det(&self) -> Result<f64> {
        log_det(*self)
    }
}

pub fn log_det(eigs: MetricEigenvalues) -> Result<f64> {
    if !eigs.is_positive() {
        return Err(Error::Positivity { t: f64::NAN, rho: f64::NAN, phi: eigs.phi, psi: eigs.psi });
    }
    Ok(eigs.phi.ln() + eigs.psi.ln())
}

/// A radial potential at a fixed flow time.
pub trait RadialProfile {
    fn time(&self) -> f64;
    fn value(&self, rho: f64) -> Result<f64>;
    fn d_rho(&self, rho: f64) -> Result<f64>;
    fn d_rho2(&self, rho: f64) -> Result<f64>;

    /// `F_ρ + ρF_ρρ`; profiles with a closed form override this to avoid
    /// cancellation between the two terms.
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.d_rho(rho)? + rho * self.d_rho2(rho)?)
    }

    /// Length scale in `ρ` below which the profile is in its cap regime.
    fn cap_scale(&self) -> f64 {
        1.0
    }
}

impl<P: RadialProfile + ?Sized> RadialProfile for &P {
    fn time(&self) -> f64 {
        (**self).time()
    }
    fn value(&self, rho: f64) -> Result<f64> {
        (**self).value(rho)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        (**self).d_rho(rho)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        (**self).d_rho2(rho)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        (**self).psi(rho)
    }
    fn cap_scale(&self) -> f64 {
        (**self).cap_scale()
    }
}

pub fn metric_from_profile<P: RadialProfile + ?Sized>(f: &P, rho: f64) -> Result<MetricEigenvalues> {
    if rho < 0.0 {
        return domain(format!("rho = {rho} < 0"));
    }
    let phi = f.d_rho(rho)?;
    let psi = if rho == 0.0 { phi } else { f.psi(rho)? };
    if !phi.is_finite() || !psi.is_finite() {
        return Err(Error::Evaluation(format!("metric eigenvalues at rho = {rho}")));
    }
    Ok(MetricEigenvalues { phi, psi })
}

/// Trace of `g^{j̄i}∂_i∂_j̄ u` for radial `g` (potential `f`) and radial `u`.
pub fn radial_laplacian<F, U>(f: &F, u: &U, rho: f64) -> Result<f64>
where
    F: RadialProfile + ?Sized,
    U: RadialProfile + ?Sized,
{
    let g = metric_from_profile(f, rho)?;
    if !g.is_positive() {
        return Err(Error::Positivity { t: f.time(), rho, phi: g.phi, psi: g.psi });
    }
    let h = metric_from_profile(u, rho)?;
    Ok(h.phi / g.phi + h.psi / g.psi)
}

/// `(√(1+x)−1)/(√(1+x)+1)` in log form without cancellation, `x = c²ρ²`.
fn eh_log_ratio(x: f64) -> f64 {
    let s = (1.0 + x).sqrt();
    if x < 1e-4 || s <= 2.0 {
        // (s-1)/(s+1) = x/(s+1)²
        x.ln() - 2.0 * (s + 1.0).ln()
    } else {
        -2.0 * (1.0 / s).atanh()
    }
}

/// Eguchi-Hanson family parameters: cone slope `c` and area parameter `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EhParams {
    pub c: f64,
    pub b: f64,
}

impl EhParams {
    pub fn new(c: f64, b: f64) -> Result<Self> {
        if !(c > 0.0) || !(b > 0.0) {
            return domain(format!("Eguchi-Hanson parameters must be positive (c = {c}, b = {b})"));
        }
        Ok(Self { c, b })
    }
}

/// `φ_{EH,c}(ρ) = √(1+c²ρ²) + ½ log[(√(1+c²ρ²)−1)/(√(1+c²ρ²)+1)]`.
pub fn eh_potential(c: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("Eguchi-Hanson potential needs rho > 0, got {rho}"));
    }
    let x = c * c * rho * rho;
    Ok((1.0 + x).sqrt() + 0.5 * eh_log_ratio(x))
}

pub fn eh_potential_d_rho(c: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("Eguchi-Hanson derivative needs rho > 0, got {rho}"));
    }
    Ok((1.0 + c * c * rho * rho).sqrt() / rho)
}

/// `weight · φ_{EH,c}` as a static radial profile.
#[derive(Clone, Copy, Debug)]
pub struct EhProfile {
    pub c: f64,
    pub weight: f64,
    pub t: f64,
}

impl EhProfile {
    /// `b⁻¹ φ_{EH,bt}`: the artificially expanding cap at time `t`.
    pub fn expanding(b: f64, t: f64) -> Self {
        Self { c: b * t, weight: 1.0 / b, t }
    }

    pub fn fixed(c: f64) -> Self {
        Self { c, weight: 1.0, t: 1.0 }
    }
}

impl RadialProfile for EhProfile {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.weight * eh_potential(self.c, rho)?)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.weight * eh_potential_d_rho(self.c, rho)?)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok((self.psi(rho)? - self.d_rho(rho)?) / rho)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        let cr = self.c * rho;
        Ok(self.weight * self.c * cr / (1.0 + cr * cr).sqrt())
    }
    fn cap_scale(&self) -> f64 {
        1.0 / self.c
    }
}

/// `scale · ρ`: a multiple of the flat metric.
#[derive(Clone, Copy, Debug)]
pub struct FlatProfile {
    pub scale: f64,
    pub t: f64,
}

impl RadialProfile for FlatProfile {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.scale * rho)
    }
    fn d_rho(&self, _rho: f64) -> Result<f64> {
        Ok(self.scale)
    }
    fn d_rho2(&self, _rho: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// `2(t log t − t)`, the spatially constant part of every expanding potential.
pub fn time_offset(t: f64) -> f64 {
    2.0 * (t * t.ln() - t)
}

/// Exact expanding complex hyperbolic flow `2(t log t − t) − 3t log(1 − ρ/3)`.
pub fn hyperbolic_flow_potential(t: f64, rho: f64) -> Result<f64> {
    check_hyperbolic(t, rho)?;
    Ok(time_offset(t) - 3.0 * t * (-rho / 3.0).ln_1p())
}

/// `∂_t` of [`hyperbolic_flow_potential`].
pub fn hyperbolic_flow_dt(t: f64, rho: f64) -> Result<f64> {
    check_hyperbolic(t, rho)?;
    Ok(2.0 * t.ln() - 3.0 * (-rho / 3.0).ln_1p())
}

fn check_hyperbolic(t: f64, rho: f64) -> Result<()> {
    if !(t > 0.0) {
        return domain(format!("flow time must be positive, got {t}"));
    }
    if !(0.0..3.0).contains(&rho) {
        return domain(format!("complex hyperbolic ball needs 0 <= rho < 3, got {rho}"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct HyperbolicProfile {
    pub t: f64,
}

impl RadialProfile for HyperbolicProfile {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        hyperbolic_flow_potential(self.t, rho)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        check_hyperbolic(self.t, rho)?;
        Ok(self.t / (1.0 - rho / 3.0))
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        check_hyperbolic(self.t, rho)?;
        let w = 1.0 - rho / 3.0;
        Ok(self.t / (3.0 * w * w))
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        check_hyperbolic(self.t, rho)?;
        let w = 1.0 - rho / 3.0;
        Ok(self.t / (w * w))
    }
}

/// Pullback of `b·F` under `z ↦ z/√(bt)`: `ρ ↦ b F(ρ/(bt)) − offset`.
///
/// Eigenvalues transform as `phi(ρ) ↦ phi(ρ/(bt))/t`, likewise `psi`.
#[derive(Clone, Copy, Debug)]
pub struct Pullback<P> {
    inner: P,
    factor: f64,
    b: f64,
    offset: f64,
}

pub fn rescale_pullback<P: RadialProfile>(f: P, t: f64, b: f64) -> Result<Pullback<P>> {
    if !(t > 0.0) || !(b > 0.0) {
        return domain(format!("pullback needs t > 0 and b > 0 (t = {t}, b = {b})"));
    }
    Ok(Pullback { inner: f, factor: b * t, b, offset: 0.0 })
}

impl<P: RadialProfile> Pullback<P> {
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }
}

impl<P: RadialProfile> RadialProfile for Pullback<P> {
    fn time(&self) -> f64 {
        self.inner.time()
    }
    fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.b * self.inner.value(rho / self.factor)? - self.offset)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.b * self.inner.d_rho(rho / self.factor)? / self.factor)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.b * self.inner.d_rho2(rho / self.factor)? / (self.factor * self.factor))
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.b * self.inner.psi(rho / self.factor)? / self.factor)
    }
    fn cap_scale(&self) -> f64 {
        self.inner.cap_scale() * self.factor
    }
}

/// Sum of two profiles (e.g. a model potential plus a perturbation).
#[derive(Clone, Copy, Debug)]
pub struct SumProfile<A, B>(pub A, pub B);

impl<A: RadialProfile, B: RadialProfile> RadialProfile for SumProfile<A, B> {
    fn time(&self) -> f64 {
        self.0.time()
    }
    fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.0.value(rho)? + self.1.value(rho)?)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.0.d_rho(rho)? + self.1.d_rho(rho)?)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.0.d_rho2(rho)? + self.1.d_rho2(rho)?)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.0.psi(rho)? + self.1.psi(rho)?)
    }
    fn cap_scale(&self) -> f64 {
        self.0.cap_scale().min(self.1.cap_scale())
    }
}

/// Piecewise cubic-Hermite profile through `(ρ_i, F_i, F'_i)`.
///
/// Below the first node the profile is continued as the constant `F_0`
/// (regular, `ρF_ρ → 0`); above the last node evaluation fails.
#[derive(Clone, Debug)]
pub struct SampledProfile {
    t: f64,
    rho: Vec<f64>,
    val: Vec<f64>,
    der: Vec<f64>,
}

impl SampledProfile {
    pub fn new(t: f64, rho: Vec<f64>, val: Vec<f64>, der: Vec<f64>) -> Result<Self> {
        if rho.len() < 2 || rho.len() != val.len() || rho.len() != der.len() {
            return domain("sampled profile needs matching arrays of length >= 2");
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("sampled profile nodes must be strictly increasing");
        }
        Ok(Self { t, rho, val, der })
    }

    fn segment(&self, rho: f64) -> Result<Option<(usize, f64, f64)>> {
        let n = self.rho.len();
        if rho < self.rho[0] {
            return Ok(None);
        }
        if rho > self.rho[n - 1] {
            return domain(format!("rho = {rho} beyond sampled range {}", self.rho[n - 1]));
        }
        let i = self.rho.partition_point(|&r| r <= rho).clamp(1, n - 1) - 1;
        let h = self.rho[i + 1] - self.rho[i];
        Ok(Some((i, h, (rho - self.rho[i]) / h)))
    }
}

impl RadialProfile for SampledProfile {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        let Some((i, h, s)) = self.segment(rho)? else {
            return Ok(self.val[0]);
        };
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.val[i]
            + (s3 - 2.0 * s2 + s) * h * self.der[i]
            + (-2.0 * s3 + 3.0 * s2) * self.val[i + 1]
            + (s3 - s2) * h * self.der[i + 1])
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        let Some((i, h, s)) = self.segment(rho)? else {
            return Ok(0.0);
        };
        let s2 = s * s;
        Ok(((6.0 * s2 - 6.0 * s) * self.val[i] + (-6.0 * s2 + 6.0 * s) * self.val[i + 1]) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * self.der[i]
            + (3.0 * s2 - 2.0 * s) * self.der[i + 1])
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        let Some((i, h, s)) = self.segment(rho)? else {
            return Ok(0.0);
        };
        Ok(((12.0 * s - 6.0) * (self.val[i] - self.val[i + 1])) / (h * h)
            + ((6.0 * s - 4.0) * self.der[i] + (6.0 * s - 2.0) * self.der[i + 1]) / h)
    }
}

/// Coefficient of `log ρ` in a cap profile, `lim_{ρ→0} ρF_ρ`.
///
/// Richardson extrapolation on six levels `ρ_0 4^{-i}` starting from half the
/// profile's cap scale, assuming an error expansion in integer powers of `ρ`.
pub fn exceptional_area_coefficient<P: RadialProfile + ?Sized>(f: &P) -> Result<f64> {
    area_coefficient_from(f, 0.5 * f.cap_scale(), 1e-6)
}

pub fn area_coefficient_from<P: RadialProfile + ?Sized>(f: &P, rho_start: f64, tol: f64) -> Result<f64> {
    const LEVELS: usize = 6;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    for (i, row) in table.iter_mut().enumerate() {
        let rho = rho_start / 4f64.powi(i as i32);
        row[0] = rho * f.d_rho(rho)?;
    }
    for m in 1..LEVELS {
        let p = 4f64.powi(m as i32);
        for i in m..LEVELS {
            table[i][m] = (p * table[i][m - 1] - table[i - 1][m - 1]) / (p - 1.0);
        }
    }
    let best = table[LEVELS - 1][LEVELS - 1];
    let spread = (best - table[LEVELS - 2][LEVELS - 2]).abs();
    if !best.is_finite() || spread > tol * best.abs().max(1.0) {
        return Err(Error::Extraction(format!("area coefficient did not converge: estimate {best}, spread {spread:e}")));
    }
    Ok(best)
}

/// Smallest `K` with `K⁻¹g₁ ≤ g₂ ≤ Kg₁` over a grid, and where it is attained.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BiLipschitzReport {
    pub t: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub rho_star: f64,
}

/// Both metrics are diagonal in the same radial frame, so `K` is the largest
/// eigenvalue ratio in either direction.
pub fn bilipschitz_constant(t: f64, rho: &[f64], a: &[MetricEigenvalues], b: &[MetricEigenvalues]) -> Result<BiLipschitzReport> {
    if rho.len() != a.len() || rho.len() != b.len() || rho.is_empty() {
        return domain("bilipschitz comparison needs equal, non-empty grids");
    }
    let mut best = BiLipschitzReport { t, k: 1.0, rho_star: rho[0] };
    for ((&r, ea), eb) in rho.iter().zip(a).zip(b) {
        for e in [ea, eb] {
            if !e.is_positive() {
                return Err(Error::Positivity { t, rho: r, phi: e.phi, psi: e.psi });
            }
        }
        let k = [ea.phi / eb.phi, eb.phi / ea.phi, ea.psi / eb.psi, eb.psi / ea.psi].into_iter().fold(1.0, f64::max);
        if k > best.k {
            best = BiLipschitzReport { t, k, rho_star: r };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn eh_potential_reference_value_and_domain() {
        let v = eh_potential(1.0, 1.0).unwrap();
        let s = 2f64.sqrt();
        assert!((v - (s + 0.5 * ((s - 1.0) / (s + 1.0)).ln())).abs() < 1e-15);
        assert!((v - 0.532_839_975_353_552).abs() < 1e-12);
        assert!(matches!(eh_potential(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eh_potential_d_rho(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn eh_potential_is_asymptotically_conical() {
        let c = 1.0;
        let d1 = eh_potential(c, 1e6).unwrap() - c * 1e6;
        let d2 = eh_potential(c, 1e7).unwrap() - c * 1e7;
        assert!((d1 - d2).abs() < 1e-6, "{d1} {d2}");
    }

    #[test]
    fn eh_small_rho_branch_matches_direct_formula() {
        // on both sides of the 1e-4 switch the two exact forms agree
        for &rho in &[5e-3, 1.2e-2, 1e-1] {
            let x: f64 = rho * rho;
            let s = (1.0 + x).sqrt();
            let direct = s + 0.5 * ((s - 1.0) / (s + 1.0)).ln();
            assert!(close(eh_potential(1.0, rho).unwrap(), direct, 1e-10));
        }
    }

    #[test]
    fn eh_derivative_matches_centered_difference() {
        for &c in &[0.3, 1.0, 4.0] {
            for &rho in &[1e-3, 0.2, 1.0, 30.0] {
                let h = rho * 1e-5;
                let fd = (eh_potential(c, rho + h).unwrap() - eh_potential(c, rho - h).unwrap()) / (2.0 * h);
                let d = eh_potential_d_rho(c, rho).unwrap();
                assert!((fd - d).abs() <= 1e-8 * d.abs(), "c={c} rho={rho}");
            }
        }
        assert!(close(eh_potential_d_rho(1.0, 1.0).unwrap(), 2f64.sqrt(), 1e-15));
        assert!(close(eh_potential_d_rho(1e-9, 2.0).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn eh_metric_eigenvalues_and_flatness() {
        for &c in &[0.5, 1.0, 2.0] {
            let f = EhProfile::fixed(c);
            for &rho in &[1e-6, 1e-2, 1.0, 1e3, 1e6] {
                let g = metric_from_profile(&f, rho).unwrap();
                let s = (1.0 + c * c * rho * rho).sqrt();
                assert!(close(g.phi, s / rho, 1e-14));
                assert!(close(g.psi, c * c * rho / s, 1e-14));
                assert!((g.log_det().unwrap() - 2.0 * c.ln()).abs() < 1e-12);
            }
        }
        let flat = FlatProfile { scale: 1.0, t: 1.0 };
        let g = metric_from_profile(&flat, 0.7).unwrap();
        assert_eq!((g.phi, g.psi), (1.0, 1.0));
        assert_eq!(log_det(g).unwrap(), 0.0);
        assert!(log_det(MetricEigenvalues { phi: 1.0, psi: -1.0 }).is_err());
    }

    #[test]
    fn hyperbolic_profile_is_kahler_einstein_and_exact_flow() {
        let f = HyperbolicProfile { t: 1.0 };
        for &rho in &[0.0, 0.5, 2.0, 2.9] {
            let g = metric_from_profile(&f, rho).unwrap();
            let w = 1.0 - rho / 3.0;
            assert!(close(g.phi, 1.0 / w, 1e-14));
            assert!(close(g.psi, 1.0 / (w * w), 1e-14));
            let phi_ke = -3.0 * w.ln();
            assert!((g.log_det().unwrap() - phi_ke).abs() < 1e-13);
        }
        for &t in &[1.0, 37.0, 1e6] {
            for &rho in &[0.0, 1.0, 2.9] {
                let g = metric_from_profile(&HyperbolicProfile { t }, rho).unwrap();
                let res = hyperbolic_flow_dt(t, rho).unwrap() - g.log_det().unwrap();
                assert!(res.abs() < 1e-10, "t={t} rho={rho} res={res}");
            }
        }
        assert!((hyperbolic_flow_potential(3.0, 0.0).unwrap() - time_offset(3.0)).abs() < 1e-14);
        assert!(hyperbolic_flow_potential(1.0, 3.0).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let flat = FlatProfile { scale: 1.0, t: 1.0 };
        // trace of the identity
        let eh = EhProfile::fixed(1.5);
        assert!(close(radial_laplacian(&eh, &eh, 0.8).unwrap(), 2.0, 1e-14));
        // |z|^4 under the flat metric: 6ρ
        let quartic = SampledQuartic;
        assert!(close(radial_laplacian(&flat, &quartic, 0.4).unwrap(), 2.4, 1e-14));
        // 1/ρ is harmonic
        let inv = InvRho;
        for &rho in &[0.01, 1.0, 9.0] {
            assert!(radial_laplacian(&flat, &inv, rho).unwrap().abs() < 1e-10);
        }
    }

    struct SampledQuartic;
    impl RadialProfile for SampledQuartic {
        fn time(&self) -> f64 {
            1.0
        }
        fn value(&self, rho: f64) -> Result<f64> {
            Ok(rho * rho)
        }
        fn d_rho(&self, rho: f64) -> Result<f64> {
            Ok(2.0 * rho)
        }
        fn d_rho2(&self, _rho: f64) -> Result<f64> {
            Ok(2.0)
        }
    }

    struct InvRho;
    impl RadialProfile for InvRho {
        fn time(&self) -> f64 {
            1.0
        }
        fn value(&self, rho: f64) -> Result<f64> {
            Ok(1.0 / rho)
        }
        fn d_rho(&self, rho: f64) -> Result<f64> {
            Ok(-1.0 / (rho * rho))
        }
        fn d_rho2(&self, rho: f64) -> Result<f64> {
            Ok(2.0 / (rho * rho * rho))
        }
    }

    #[test]
    fn area_coefficient_of_expanding_cap_is_time_independent() {
        for &b in &[0.5, 1.0, 3.0] {
            for &t in &[1.0, 1e2, 1e5] {
                let a = exceptional_area_coefficient(&EhProfile::expanding(b, t)).unwrap();
                assert!((a - 1.0 / b).abs() < 1e-9 * (1.0 / b), "b={b} t={t} a={a}");
            }
        }
        let regular = HyperbolicProfile { t: 2.0 };
        assert!(exceptional_area_coefficient(&regular).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pullback_of_expanding_cap_is_static_eh() {
        for &(b, t) in &[(1.0, 1.0), (2.0, 10.0), (0.5, 1e4)] {
            let pb = rescale_pullback(EhProfile::expanding(b, t), t, b).unwrap().with_offset(0.0);
            let eh = EhProfile::fixed(1.0);
            for &rho in &[1e-3, 0.5, 4.0, 50.0] {
                let g = metric_from_profile(&pb, rho).unwrap();
                let h = metric_from_profile(&eh, rho).unwrap();
                assert!(close(g.phi, h.phi, 1e-12) && close(g.psi, h.psi, 1e-12));
                assert!(close(pb.value(rho).unwrap(), eh.value(rho).unwrap(), 1e-12));
            }
        }
        let hyp = HyperbolicProfile { t: 1.0 };
        let id = rescale_pullback(hyp, 1.0, 1.0).unwrap();
        for &rho in &[0.0, 0.3, 2.0] {
            assert_eq!(metric_from_profile(&id, rho).unwrap(), metric_from_profile(&hyp, rho).unwrap());
        }
        let flat = rescale_pullback(FlatProfile { scale: 7.0, t: 7.0 }, 7.0, 3.0).unwrap();
        let g = metric_from_profile(&flat, 0.9).unwrap();
        assert!(close(g.phi, 1.0, 1e-15) && close(g.psi, 1.0, 1e-15));
    }

    #[test]
    fn sampled_profile_reproduces_cubics() {
        let rho: Vec<f64> = (0..20).map(|i| 0.1 + 0.05 * i as f64).collect();
        let f = |r: f64| 1.0 + r - 2.0 * r * r + 0.5 * r * r * r;
        let df = |r: f64| 1.0 - 4.0 * r + 1.5 * r * r;
        let p = SampledProfile::new(1.0, rho.clone(), rho.iter().map(|&r| f(r)).collect(), rho.iter().map(|&r| df(r)).collect()).unwrap();
        for &r in &[0.1, 0.333, 0.71, 1.05] {
            assert!(close(p.value(r).unwrap(), f(r), 1e-13));
            assert!(close(p.d_rho(r).unwrap(), df(r), 1e-12));
            assert!(close(p.d_rho2(r).unwrap(), -4.0 + 3.0 * r, 1e-11));
        }
        assert!(p.value(2.0).is_err());
        assert_eq!(p.d_rho(0.01).unwrap(), 0.0);
    }

    #[test]
    fn bilipschitz_identity_and_scaling() {
        let rho = [0.1, 0.2, 0.3];
        let e: Vec<MetricEigenvalues> = rho.iter().map(|&r| MetricEigenvalues { phi: 1.0 + r, psi: 2.0 - r }).collect();
        assert_eq!(bilipschitz_constant(1.0, &rho, &e, &e).unwrap().k, 1.0);
        let scaled: Vec<MetricEigenvalues> = e.iter().map(|m| MetricEigenvalues { phi: 0.25 * m.phi, psi: 0.25 * m.psi }).collect();
        assert!((bilipschitz_constant(1.0, &rho, &e, &scaled).unwrap().k - 4.0).abs() < 1e-15);
        let bad = [MetricEigenvalues { phi: -1.0, psi: 1.0 }; 3];
        assert!(bilipschitz_constant(1.0, &rho, &e, &bad).is_err());
    }

    proptest! {
        // K from eigenvalue ratios bounds the quadratic-form ratio over random
        // tangent vectors and is approached by them
        #[test]
        fn bilipschitz_matches_quadratic_forms(p1 in 0.1f64..10.0, s1 in 0.1f64..10.0, p2 in 0.1f64..10.0, s2 in 0.1f64..10.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let a = MetricEigenvalues { phi: p1, psi: s1 };
            let b = MetricEigenvalues { phi: p2, psi: s2 };
            let k = bilipschitz_constant(1.0, &[0.5], &[a], &[b]).unwrap().k;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut worst = 1.0f64;
            for _ in 0..4000 {
                // two-complex-dimensional frame: radial pair weighted by psi, angular pair by phi
                let v: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let ga = a.psi * (v[0] * v[0] + v[1] * v[1]) + a.phi * (v[2] * v[2] + v[3] * v[3]);
                let gb = b.psi * (v[0] * v[0] + v[1] * v[1]) + b.phi * (v[2] * v[2] + v[3] * v[3]);
                prop_assert!(gb <= k * ga * (1.0 + 1e-12) && ga <= k * gb * (1.0 + 1e-12));
                worst = worst.max(gb / ga).max(ga / gb);
            }
            prop_assert!(worst > k * 0.9, "worst {} vs K {}", worst, k);
        }
    }
}
