//! The glued model potential and its flow-deviation field.
//!
//! `φ_mod = σ(t^a|z|) φ_EH^(k) + (1 − σ(t^a|z|)) φ_X` on the chart `|z| < δ`,
//! and `φ_X` beyond it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correction::CorrectionSeries;
use crate::error::{domain, Error, Result};
use crate::geometry::{time_offset, MetricEigenvalues, RadialProfile};

/// Smooth nonincreasing step: 1 on `[0, ½]`, 0 on `[1, ∞)`.
///
/// `σ(x) = ψ(1−x)/(ψ(1−x) + ψ(x−½))` with `ψ(y) = e^{−1/y}` for `y > 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BumpFunction;

impl BumpFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.jet(x)[1]
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.jet(x)[2]
    }

    /// `[σ, σ', σ'']`.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        if x <= 0.5 {
            return [1.0, 0.0, 0.0];
        }
        if x >= 1.0 {
            return [0.0, 0.0, 0.0];
        }
        // σ = 1/(1 + e^g) with g = 1/(1−x) − 1/(x−½)
        let (p, q) = (x - 0.5, 1.0 - x);
        let g = 1.0 / q - 1.0 / p;
        let dg = 1.0 / (p * p) + 1.0 / (q * q);
        let ddg = 2.0 / (q * q * q) - 2.0 / (p * p * p);
        let s = if g > 0.0 { (-g).exp() / (1.0 + (-g).exp()) } else { 1.0 / (1.0 + g.exp()) };
        let c = (0.5 * g).cosh();
        let s1ms = 1.0 / (4.0 * c * c);
        let d1 = -s1ms * dg;
        let d2 = -(1.0 - 2.0 * s) * d1 * dg - s1ms * ddg;
        [s, d1, d2]
    }
}

/// The expanding orbifold flow near the singular point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Background {
    /// `2(t log t − t) − 3t log(1 − ρ/3)`.
    Hyperbolic,
    /// `2(t log t − t) + t(ρ + cρ²)`; the Kähler-Einstein value is `c = 1/6`.
    Quartic { coeff: f64 },
}

impl Background {
    pub const KAHLER_EINSTEIN_QUARTIC: f64 = 1.0 / 6.0;

    pub fn quartic() -> Self {
        Background::Quartic { coeff: Self::KAHLER_EINSTEIN_QUARTIC }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Background::Hyperbolic => "hyperbolic",
            Background::Quartic { .. } => "quartic",
        }
    }

    /// `[φ_X − 2(t log t − t), ∂_ρ, ∂_ρ², ∂_t φ_X − 2 log t]`.
    pub fn jet(&self, t: f64, rho: f64) -> Result<[f64; 4]> {
        if !(rho >= 0.0) {
            return domain(format!("rho = {rho} < 0"));
        }
        match *self {
            Background::Hyperbolic => {
                if rho >= 3.0 {
                    return domain(format!("hyperbolic background needs rho < 3, got {rho}"));
                }
                let w = 1.0 - rho / 3.0;
                let l = -3.0 * (-rho / 3.0).ln_1p();
                Ok([t * l, t / w, t / (3.0 * w * w), l])
            }
            Background::Quartic { coeff } => {
                let p = rho + coeff * rho * rho;
                Ok([t * p, t * (1.0 + 2.0 * coeff * rho), 2.0 * coeff * t, p])
            }
        }
    }
}

/// `φ_X(t, ρ)`.
pub fn phi_x(t: f64, rho: f64, background: Background) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("flow time must be positive, got {t}"));
    }
    Ok(time_offset(t) + background.jet(t, rho)?[0])
}

/// Parameters of the glued model.
#[derive(Clone, Debug)]
pub struct GluedModelSpec {
    pub b: f64,
    pub a: f64,
    pub k: usize,
    pub delta: f64,
    pub bump: BumpFunction,
    pub background: Background,
    pub series: Arc<CorrectionSeries>,
}

/// Which piece of the partition a point falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Cap,
    Gluing,
    Background,
}

/// Potential, metric and deviation of the model at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelJet {
    pub region: Region,
    pub value: f64,
    pub d_rho: f64,
    pub d_rho2: f64,
    pub psi: f64,
    /// `∂_t φ_mod` at fixed `ρ`.
    pub d_t: f64,
    pub f: f64,
}

impl ModelJet {
    pub fn eigenvalues(&self) -> MetricEigenvalues {
        MetricEigenvalues { phi: self.d_rho, psi: self.psi }
    }
}

impl GluedModelSpec {
    /// Builds the spec together with a correction series long enough for
    /// every time up to `t_max`.
    pub fn new(b: f64, a: f64, k: usize, delta: f64, background: Background, t_max: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::Config(format!("gluing exponent a = {a} must lie in (0, 1/2)")));
        }
        if !(b > 0.0) {
            return Err(Error::Config(format!("area parameter b = {b} must be positive")));
        }
        match background {
            Background::Hyperbolic if !(delta > 0.0 && delta < 3f64.sqrt()) => {
                return Err(Error::Config(format!("chart radius delta = {delta} must lie in (0, sqrt 3)")));
            }
            Background::Quartic { .. } if !(delta > 0.0) => {
                return Err(Error::Config(format!("chart radius delta = {delta} must be positive")));
            }
            Background::Quartic { .. } if a != 0.25 => {
                return Err(Error::Config(format!("quartic background requires a = 1/4, got {a}")));
            }
            _ => {}
        }
        if !(t_max >= 1.0) {
            return Err(Error::Config(format!("t_max = {t_max} must be at least 1")));
        }
        let eta_max = (1.05 * t_max.powf(1.0 - 2.0 * a)).max(1e3);
        let series = CorrectionSeries::build(b, k, eta_max)?;
        Ok(Self { b, a, k, delta, bump: BumpFunction, background, series: Arc::new(series) })
    }

    /// Largest time the correction table supports.
    pub fn t_max(&self) -> f64 {
        self.series.eta_max().powf(1.0 / (1.0 - 2.0 * self.a))
    }

    /// `|z| = t^{-a}`, the outer edge of the gluing band.
    pub fn gluing_radius(&self, t: f64) -> f64 {
        t.powf(-self.a)
    }

    pub fn region(&self, t: f64, rho: f64) -> Region {
        if rho >= self.delta * self.delta {
            return Region::Background;
        }
        let x = t.powf(self.a) * rho.sqrt();
        if x <= 0.5 {
            Region::Cap
        } else if x >= 1.0 {
            Region::Background
        } else {
            Region::Gluing
        }
    }
}

impl GluedModelSpec {
    pub fn phi_mod(&self, t: f64, rho: f64) -> Result<f64> {
        Ok(self.jet(t, rho)?.value)
    }

    pub fn f_mod(&self, t: f64, rho: f64) -> Result<f64> {
        Ok(self.jet(t, rho)?.f)
    }

    pub fn eigenvalues(&self, t: f64, rho: f64) -> Result<MetricEigenvalues> {
        Ok(self.jet(t, rho)?.eigenvalues())
    }

    /// Evaluates the model at `(t, ρ)`. In the gluing band the deviation is
    /// assembled as `f_EH + ∂_t P − log(1 + P_ρ/E_ρ) − log(1 + (P_ρ+ρP_ρρ)/E_ψ)`
    /// with `P = (1−σ)(φ_X − φ_EH)`, which avoids cancelling the `O(t log t)` parts.
    pub fn jet(&self, t: f64, rho: f64) -> Result<ModelJet> {
        if !(t > 0.0) {
            return domain(format!("flow time must be positive, got {t}"));
        }
        if !(rho >= 0.0) {
            return domain(format!("rho = {rho} < 0"));
        }
        let region = self.region(t, rho);
        let offset = time_offset(t);
        let dt_offset = 2.0 * t.ln();
        if region == Region::Background {
            let [x, x1, x2, xt] = self.background.jet(t, rho)?;
            let jet = ModelJet { region, value: offset + x, d_rho: x1, d_rho2: x2, psi: x1 + rho * x2, d_t: dt_offset + xt, f: 0.0 };
            return self.checked(t, rho, jet);
        }
        let eta = t * rho;
        let e = self.series.partial_sum_jet(t, eta)?;
        let (e0, e1, e2, epsi) = (e.spatial, t * e.d_eta, t * t * e.d_eta2, t * e.psi_eta);
        let et = e.d_s_reduced + rho * e.d_eta;
        let f_eh = self.series.residual(t, eta)?;
        if region == Region::Cap {
            let jet = ModelJet { region, value: offset + e0, d_rho: e1, d_rho2: e2, psi: epsi, d_t: dt_offset + et, f: f_eh };
            return self.checked(t, rho, jet);
        }

        let [x0, x1, x2, xt] = self.background.jet(t, rho)?;
        let (d0, d1, d2, dt) = (x0 - e0, x1 - e1, x2 - e2, xt - et);
        let ta = t.powf(self.a);
        let x = ta * rho.sqrt();
        let [s, s1, s2] = self.bump.jet(x);
        let x_r = x / (2.0 * rho);
        let x_rr = -x / (4.0 * rho * rho);
        let x_t = self.a * x / t;
        let (sr, srr, st) = (s1 * x_r, s2 * x_r * x_r + s1 * x_rr, s1 * x_t);
        let m = 1.0 - s;
        let p0 = m * d0;
        let p1 = m * d1 - sr * d0;
        let p2 = m * d2 - 2.0 * sr * d1 - srr * d0;
        let pt = m * dt - st * d0;
        let ppsi = p1 + rho * p2;
        let r1 = p1 / e1;
        let r2 = ppsi / epsi;
        let phi = e1 + p1;
        let psi = epsi + ppsi;
        if !(r1 > -1.0 && r2 > -1.0) {
            return Err(Error::Positivity { t, rho, phi, psi });
        }
        let f = f_eh + pt - r1.ln_1p() - r2.ln_1p();
        let jet = ModelJet { region, value: offset + e0 + p0, d_rho: phi, d_rho2: e2 + p2, psi, d_t: dt_offset + et + pt, f };
        self.checked(t, rho, jet)
    }

    fn checked(&self, t: f64, rho: f64, jet: ModelJet) -> Result<ModelJet> {
        if ![jet.value, jet.d_rho, jet.psi, jet.d_t, jet.f].iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation(format!("model at t = {t}, rho = {rho}")));
        }
        if !(jet.d_rho > 0.0 && jet.psi > 0.0) {
            return Err(Error::Positivity { t, rho, phi: jet.d_rho, psi: jet.psi });
        }
        Ok(jet)
    }

    /// `φ_mod(t, ·)` as a radial profile.
    pub fn profile(&self, t: f64) -> ModelProfile<'_> {
        ModelProfile { spec: self, t }
    }

    /// `φ_X(t, ·)` as a radial profile.
    pub fn background_profile(&self, t: f64) -> BackgroundProfile {
        BackgroundProfile { background: self.background, t }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModelProfile<'a> {
    spec: &'a GluedModelSpec,
    t: f64,
}

impl RadialProfile for ModelProfile<'_> {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        self.spec.phi_mod(self.t, rho)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.spec.jet(self.t, rho)?.d_rho)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.spec.jet(self.t, rho)?.d_rho2)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.spec.jet(self.t, rho)?.psi)
    }
    fn cap_scale(&self) -> f64 {
        1.0 / (self.spec.b * self.t)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BackgroundProfile {
    background: Background,
    t: f64,
}

impl RadialProfile for BackgroundProfile {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        phi_x(self.t, rho, self.background)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.background.jet(self.t, rho)?[1])
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.background.jet(self.t, rho)?[2])
    }
}

/// Anything the flow evolver can use as its reference model.
pub trait ModelFlow: Sync {
    fn jet(&self, t: f64, rho: f64) -> Result<ModelJet>;
    fn describe(&self) -> String;

    /// Length scale in `ρ` of the cap at time `t`.
    fn cap_scale(&self, _t: f64) -> f64 {
        1.0
    }

    /// Power `p` with smooth perturbations behaving like `v(0) + cρ^p` at the origin.
    fn origin_order(&self) -> u32 {
        1
    }
}

impl ModelFlow for GluedModelSpec {
    fn jet(&self, t: f64, rho: f64) -> Result<ModelJet> {
        GluedModelSpec::jet(self, t, rho)
    }
    fn describe(&self) -> String {
        format!("glued(b={}, a={}, k={}, delta={}, {})", self.b, self.a, self.k, self.delta, self.background.name())
    }
    fn cap_scale(&self, t: f64) -> f64 {
        1.0 / (self.b * t)
    }
    // smooth functions near the exceptional curve are even in η
    fn origin_order(&self) -> u32 {
        2
    }
}

/// The orbifold flow alone, with zero deviation.
#[derive(Clone, Copy, Debug)]
pub struct PureBackground(pub Background);

impl ModelFlow for PureBackground {
    fn jet(&self, t: f64, rho: f64) -> Result<ModelJet> {
        let [x, x1, x2, xt] = self.0.jet(t, rho)?;
        Ok(ModelJet {
            region: Region::Background,
            value: time_offset(t) + x,
            d_rho: x1,
            d_rho2: x2,
            psi: x1 + rho * x2,
            d_t: 2.0 * t.ln() + xt,
            f: 0.0,
        })
    }
    fn describe(&self) -> String {
        format!("background({})", self.0.name())
    }
}

/// A model with its deviation field replaced by zero (control runs).
#[derive(Clone, Copy, Debug)]
pub struct ZeroForcing<'a, M: ?Sized>(pub &'a M);

impl<M: ModelFlow + ?Sized> ModelFlow for ZeroForcing<'_, M> {
    fn jet(&self, t: f64, rho: f64) -> Result<ModelJet> {
        Ok(ModelJet { f: 0.0, ..self.0.jet(t, rho)? })
    }
    fn describe(&self) -> String {
        format!("{} with f = 0", self.0.describe())
    }
    fn cap_scale(&self, t: f64) -> f64 {
        self.0.cap_scale(t)
    }
    fn origin_order(&self) -> u32 {
        self.0.origin_order()
    }
}

/// Radial geodesic distance `|∫ √ψ d|z||` between two points on a ray at time `t`.
pub fn radial_distance<M: ModelFlow + ?Sized>(model: &M, t: f64, r1: f64, r2: f64) -> Result<f64> {
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo == hi {
        return Ok(0.0);
    }
    let mut failure = None;
    let tol = crate::quadrature::Tolerance { abs: 0.0, rel: 1e-8, max_intervals: 200 };
    let res = crate::quadrature::integrate(
        |r| match model.jet(t, r * r) {
            Ok(j) => j.psi.sqrt(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(res.value)
}

/// Residual harmonicity of the two gluing error sources under the flat metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicReport {
    pub t: f64,
    pub inverse_rho: f64,
    pub quartic_difference: f64,
    pub pass: bool,
}

pub const HARMONIC_TOL: f64 = 1e-10;

/// Checks `Δ(1/ρ) = 0` and `Δ(cρ² − ρ²/6) = 0` over the gluing band at time `t`.
pub fn harmonic_cancellation_check(t: f64, a: f64, background: Background) -> Result<HarmonicReport> {
    use crate::geometry::{radial_laplacian, FlatProfile};
    struct Power {
        c: f64,
        p: i32,
    }
    impl RadialProfile for Power {
        fn time(&self) -> f64 {
            1.0
        }
        fn value(&self, rho: f64) -> Result<f64> {
            Ok(self.c * rho.powi(self.p))
        }
        fn d_rho(&self, rho: f64) -> Result<f64> {
            Ok(self.c * self.p as f64 * rho.powi(self.p - 1))
        }
        fn d_rho2(&self, rho: f64) -> Result<f64> {
            Ok(self.c * (self.p * (self.p - 1)) as f64 * rho.powi(self.p - 2))
        }
    }
    let flat = FlatProfile { scale: 1.0, t: 1.0 };
    let c = match background {
        Background::Hyperbolic => Background::KAHLER_EINSTEIN_QUARTIC,
        Background::Quartic { coeff } => coeff,
    };
    let inv = Power { c: 1.0, p: -1 };
    let quart = Power { c: c - Background::KAHLER_EINSTEIN_QUARTIC, p: 2 };
    let r_out = t.powf(-a);
    let (mut worst_inv, mut worst_q) = (0.0f64, 0.0f64);
    for i in 0..=64 {
        let r = r_out * (0.5 + 0.5 * i as f64 / 64.0);
        let rho = r * r;
        // relative to the size of each term's individual pieces
        worst_inv = worst_inv.max((radial_laplacian(&flat, &inv, rho)? * rho * rho).abs());
        worst_q = worst_q.max((radial_laplacian(&flat, &quart, rho)? / rho).abs());
    }
    Ok(HarmonicReport {
        t,
        inverse_rho: worst_inv,
        quartic_difference: worst_q,
        pass: worst_inv <= HARMONIC_TOL && worst_q <= HARMONIC_TOL,
    })
}
