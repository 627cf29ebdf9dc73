//! The correction hierarchy `Ĝ^(k) = G^(0) + Σ s^{-j} G^(j)(η)` on the cap.
//!
//! `G^(0)` is the expanding Eguchi-Hanson potential in `(s, η) = (t, tρ)`.
//! Each `G^(j)` solves the linearized equation with a source `H^(j)` read
//! off as the `u^j` coefficient (`u = 1/s`) of the residual of `Ĝ^(j-1)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cheb::PanelTable;
use crate::error::{domain, Error, Result};
use crate::eta::{default_table, solve_correction_sampled, EtaFunction, EtaJet};
use crate::geometry::{eh_potential, time_offset, RadialProfile};
use crate::linalg::{least_squares, solve_dense};
use crate::real::{DoubleDouble, Real};
use crate::series_u::SeriesInU;

pub const MAX_ORDER: usize = 6;

/// Points at which every extracted source is cross-checked by extrapolation.
pub const CHECK_ETAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Values of `s` used by the extrapolation path.
pub const CHECK_S: [f64; 3] = [1e3, 4e3, 1.6e4];
pub const CHECK_TOL: f64 = 1e-6;

/// `G^(0)(s, η) = 2(s log s − s) + b⁻¹φ_{EH,b}(η)`.
pub fn g0(b: f64, s: f64, eta: f64) -> Result<f64> {
    if !(s > 0.0) {
        return domain(format!("s must be positive, got {s}"));
    }
    Ok(time_offset(s) + eh_potential(b, eta)? / b)
}

#[derive(Clone, Copy, Debug)]
struct TermValues<T> {
    g: T,
    g1: T,
    h: T,
}

struct Frame<T> {
    b: T,
    eta: T,
    w: T,
    a: T,
}

impl<T: Real> Frame<T> {
    fn new(b: f64, eta: f64) -> Self {
        let (b, eta) = (T::from_f64(b), T::from_f64(eta));
        let w = (T::one() + b * b * eta * eta).sqrt();
        Self { b, eta, w, a: b * eta / w }
    }

    /// The two metric factors relative to `G^(0)`, as series in `u`, and the
    /// explicit part of the residual.
    fn parts(&self, order: usize, terms: &[TermValues<T>]) -> [SeriesInU<T>; 3] {
        let mut p1 = SeriesInU::constant(order, T::one());
        let mut p2 = SeriesInU::constant(order, T::one());
        let mut lin = SeriesInU::monomial(order, 1, self.w / self.b);
        for (idx, tv) in terms.iter().enumerate() {
            let i = idx + 1;
            p1 = p1.add(&SeriesInU::monomial(order, i, self.a * tv.g1));
            p2 = p2.add(&SeriesInU::monomial(order, i, self.w / self.b * tv.h - self.a * tv.g1));
            let c = self.eta * tv.g1 - T::from_f64(i as f64) * tv.g;
            lin = lin.add(&SeriesInU::monomial(order, i + 1, c));
        }
        [p1, p2, lin]
    }

    fn residual_series(&self, order: usize, terms: &[TermValues<T>]) -> Option<SeriesInU<T>> {
        let [p1, p2, lin] = self.parts(order, terms);
        Some(lin.sub(&p1.log()?).sub(&p2.log()?))
    }

    fn residual(&self, u: T, terms: &[TermValues<T>]) -> Option<T> {
        let mut e1 = T::zero();
        let mut e2 = T::zero();
        let mut lin = u * self.w / self.b;
        let mut un = T::one();
        for (idx, tv) in terms.iter().enumerate() {
            let i = T::from_f64((idx + 1) as f64);
            un *= u;
            e1 += un * self.a * tv.g1;
            e2 += un * (self.w / self.b * tv.h - self.a * tv.g1);
            lin += un * u * (self.eta * tv.g1 - i * tv.g);
        }
        if !(e1 > -T::one()) || !(e2 > -T::one()) {
            return None;
        }
        Some(lin - e1.ln_1p() - e2.ln_1p())
    }

    /// `H^(j)` from the `u^j` residual coefficient.
    fn source(&self, j: usize, terms: &[TermValues<T>]) -> Option<T> {
        if j == 1 {
            return Some(T::one());
        }
        Some(self.b * self.residual_series(j, &terms[..j - 1])?.coeff(j) / self.w)
    }
}

/// Polynomial corrections generated from the large-`η` model `G^(0) ≈ 2(s log s − s) + η`.
///
/// Returns, for `j = 1..=k`, the coefficients (by power of `η`) of `G^(j)_asymp`.
pub fn asymptotic_iteration(k: usize) -> Result<Vec<Vec<f64>>> {
    let mut polys: Vec<Vec<f64>> = Vec::new();
    let mut sources: Vec<Vec<f64>> = Vec::new();
    for j in 1..=k {
        // H_asymp^(j) has degree j-1; sample it at j points and interpolate
        let xs: Vec<f64> = (1..=j).map(|m| m as f64).collect();
        let mut ys = Vec::with_capacity(j);
        for &x in &xs {
            let terms: Vec<TermValues<f64>> =
                polys.iter().zip(&sources).map(|(p, h)| TermValues { g: peval(p, x), g1: peval(&pderiv(p), x), h: peval(h, x) }).collect();
            let y = if j == 1 {
                1.0
            } else {
                let frame = Frame { b: 1.0, eta: x, w: x, a: 1.0 };
                frame.residual_series(j, &terms).ok_or_else(|| Error::Extraction("asymptotic residual not positive".into()))?.coeff(j) / x
            };
            ys.push(y);
        }
        let vander: Vec<Vec<f64>> = xs.iter().map(|&x| (0..j).map(|p| x.powi(p as i32)).collect()).collect();
        let h = solve_dense(vander, ys).ok_or_else(|| Error::Extraction("asymptotic source fit".into()))?;
        let mut g = vec![0.0; j + 2];
        for (p, &c) in h.iter().enumerate() {
            g[p + 2] = c / (((p + 2) * (p + 3)) as f64);
        }
        polys.push(g);
        sources.push(h);
    }
    Ok(polys)
}

fn peval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn pderiv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(p, &a)| p as f64 * a).collect()
}

/// Outcome of the dual-path source check at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceCheck {
    pub j: usize,
    pub eta: f64,
    pub series: f64,
    pub extrapolated: f64,
}

impl SourceCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.series - self.extrapolated).abs() / self.series.abs().max(1.0)
    }
}

/// Value and first derivatives of the residual `F̂^(k)` at `(s, η)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualJet {
    pub value: f64,
    pub d_eta: f64,
    pub d_s: f64,
}

/// Value and metric quantities of `Ĝ^(k)` at `(s, η)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialSumJet {
    pub value: f64,
    /// `value − 2(s log s − s)`
    pub spatial: f64,
    /// `Ĝ_η`
    pub d_eta: f64,
    /// `Ĝ_η + ηĜ_ηη`
    pub psi_eta: f64,
    /// `Ĝ_ηη`
    pub d_eta2: f64,
    pub d_s: f64,
    /// `Ĝ_s − 2 log s`
    pub d_s_reduced: f64,
}

#[derive(Clone, Debug)]
pub struct CorrectionSeries {
    b: f64,
    table: Arc<PanelTable>,
    terms: Vec<EtaFunction>,
    checks: Vec<SourceCheck>,
}

impl CorrectionSeries {
    /// Builds `G^(1..=k)` on `[0, eta_max]`.
    pub fn build(b: f64, k: usize, eta_max: f64) -> Result<Self> {
        if !(b > 0.0) {
            return domain(format!("area parameter must be positive, got {b}"));
        }
        if k > MAX_ORDER {
            return domain(format!("correction order {k} exceeds the supported maximum {MAX_ORDER}"));
        }
        if !(eta_max > 0.0) {
            return domain(format!("eta_max must be positive, got {eta_max}"));
        }
        let polys = asymptotic_iteration(k)?;
        let mut series = Self { b, table: default_table(b, eta_max), terms: Vec::new(), checks: Vec::new() };
        for (idx, poly) in polys.into_iter().enumerate() {
            let j = idx + 1;
            let source = extract_source(b, j, &mut series)?;
            let term = solve_correction_sampled(b, series.table.clone(), &source, poly)?;
            series.terms.push(term);
        }
        Ok(series)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn eta_max(&self) -> f64 {
        self.table.x_max()
    }

    /// `G^(j)`, `1 <= j <= order`.
    pub fn term(&self, j: usize) -> Option<&EtaFunction> {
        j.checked_sub(1).and_then(|i| self.terms.get(i))
    }

    /// Dual-path source checks performed while building.
    pub fn checks(&self) -> &[SourceCheck] {
        &self.checks
    }

    /// The same hierarchy cut at order `k`.
    pub fn truncated(&self, k: usize) -> Self {
        let keep = k.min(self.order());
        Self {
            b: self.b,
            table: self.table.clone(),
            terms: self.terms[..keep].to_vec(),
            checks: self.checks.iter().copied().filter(|c| c.j <= keep).collect(),
        }
    }

    fn jets(&self, eta: f64) -> Result<Vec<EtaJet>> {
        self.terms.iter().map(|t| t.jet(eta)).collect()
    }

    fn values_f64(&self, eta: f64, upto: usize) -> Result<Vec<TermValues<f64>>> {
        self.terms[..upto]
            .iter()
            .map(|t| {
                let j = t.jet(eta)?;
                Ok(TermValues { g: j.value, g1: j.d1, h: j.source })
            })
            .collect()
    }

    /// `H^(j)(η)` by series order extraction from terms `1..j`.
    pub fn source_at(&self, j: usize, eta: f64) -> Result<f64> {
        if j == 0 || j > self.order() + 1 {
            return domain(format!("source order {j} needs terms up to {}", j.saturating_sub(1)));
        }
        let terms = self.values_f64(eta, j - 1)?;
        Frame::<f64>::new(self.b, eta)
            .source(j, &terms)
            .ok_or_else(|| Error::Extraction(format!("non-positive metric factor at eta = {eta}")))
    }

    /// `H^(j)(η)` by Richardson extrapolation of `s^j F̂^(j-1)(s, η)` in
    /// double-double arithmetic over [`CHECK_S`].
    pub fn source_extrapolated(&self, j: usize, eta: f64) -> Result<f64> {
        if j == 0 || j > self.order() + 1 {
            return domain(format!("source order {j} needs terms up to {}", j.saturating_sub(1)));
        }
        let frame = Frame::<DoubleDouble>::new(self.b, eta);
        let mut terms: Vec<TermValues<DoubleDouble>> = Vec::with_capacity(j - 1);
        for (idx, t) in self.terms[..j - 1].iter().enumerate() {
            let jet = t.jet(eta)?;
            let partial = TermValues { g: jet.value.into(), g1: jet.d1.into(), h: DoubleDouble::zero() };
            terms.push(partial);
            // the source is recomputed in the same precision so that lower
            // orders cancel to double-double rounding
            let h = frame.source(idx + 1, &terms).ok_or_else(|| Error::Extraction(format!("non-positive metric factor at eta = {eta}")))?;
            terms[idx].h = h;
        }
        let mut y = [DoubleDouble::zero(); 3];
        for (yi, &s) in y.iter_mut().zip(&CHECK_S) {
            let u = DoubleDouble::one() / DoubleDouble::from(s);
            let r = frame.residual(u, &terms).ok_or_else(|| Error::Extraction(format!("non-positive metric factor at eta = {eta}")))?;
            *yi = r * DoubleDouble::from(s).powi(j as u32);
        }
        let three = DoubleDouble::from(3.0);
        let a0 = (DoubleDouble::from(4.0) * y[1] - y[0]) / three;
        let a1 = (DoubleDouble::from(4.0) * y[2] - y[1]) / three;
        let r = (DoubleDouble::from(16.0) * a1 - a0) / DoubleDouble::from(15.0);
        Ok((frame.b * r / frame.w).to_f64())
    }

    /// Runs both extraction paths for `H^(j)` at `eta` and compares them.
    pub fn check_source(&self, j: usize, eta: f64) -> Result<SourceCheck> {
        let check = SourceCheck { j, eta, series: self.source_at(j, eta)?, extrapolated: self.source_extrapolated(j, eta)? };
        if !(check.discrepancy() <= CHECK_TOL) {
            return Err(Error::Extraction(format!(
                "H^({j}) at eta = {eta}: series {} vs extrapolation {} (relative gap {:e})",
                check.series,
                check.extrapolated,
                check.discrepancy()
            )));
        }
        Ok(check)
    }
}

/// Samples `H^(j)` at the table nodes of `previous`, which must hold terms `1..j`.
///
/// For `j >= 2` the series path is cross-checked against extrapolation at
/// [`CHECK_ETAS`]; the checks are appended to `previous`.
pub fn extract_source(b: f64, j: usize, previous: &mut CorrectionSeries) -> Result<Vec<f64>> {
    if previous.order() + 1 != j || previous.b != b {
        return domain(format!("source H^({j}) needs exactly terms 1..{} with matching b", j - 1));
    }
    let nodes = previous.table.all_nodes();
    if j == 1 {
        return Ok(vec![1.0; nodes.len()]);
    }
    let eta_max = previous.eta_max();
    for &eta in CHECK_ETAS.iter().filter(|&&e| e <= eta_max) {
        let check = previous.check_source(j, eta)?;
        previous.checks.push(check);
    }
    let prev = &*previous;
    nodes.par_iter().map(|&eta| prev.source_at(j, eta)).collect()
}

impl CorrectionSeries {
    /// `Ĝ^(k)(s, η)`; `η > 0` because `G^(0)` is logarithmic at the origin.
    pub fn partial_sum(&self, s: f64, eta: f64) -> Result<f64> {
        Ok(self.partial_sum_jet(s, eta)?.value)
    }

    pub fn partial_sum_jet(&self, s: f64, eta: f64) -> Result<PartialSumJet> {
        let b = self.b;
        if !(s > 0.0) {
            return domain(format!("s must be positive, got {s}"));
        }
        let spatial0 = eh_potential(b, eta)? / b;
        let w2 = 1.0 + b * b * eta * eta;
        let w = w2.sqrt();
        let u = 1.0 / s;
        let mut jet = PartialSumJet {
            value: 0.0,
            spatial: spatial0,
            d_eta: w / (b * eta),
            psi_eta: b * eta / w,
            d_eta2: 0.0,
            d_s: 0.0,
            d_s_reduced: 0.0,
        };
        let mut un = 1.0;
        for (idx, t) in self.jets(eta)?.iter().enumerate() {
            let i = (idx + 1) as f64;
            un *= u;
            jet.spatial += un * t.value;
            jet.d_eta += un * t.d1;
            jet.psi_eta += un * eta * (t.source - b * b * eta * t.d1 / w2);
            jet.d_s_reduced -= i * un * u * t.value;
        }
        jet.value = time_offset(s) + jet.spatial;
        jet.d_s = 2.0 * s.ln() + jet.d_s_reduced;
        jet.d_eta2 = (jet.psi_eta - jet.d_eta) / eta;
        Ok(jet)
    }

    /// `F̂^(k) = Ĝ_s + (η/s)Ĝ_η − log(Ĝ_η(Ĝ_η + ηĜ_ηη)) − 2 log s`, evaluated
    /// relative to `G^(0)` so that no large terms cancel.
    pub fn residual(&self, s: f64, eta: f64) -> Result<f64> {
        Ok(self.residual_jet(s, eta)?.value)
    }

    pub fn residual_jet(&self, s: f64, eta: f64) -> Result<ResidualJet> {
        if !(s > 0.0) || !(eta >= 0.0) {
            return domain(format!("residual needs s > 0 and eta >= 0 (s = {s}, eta = {eta})"));
        }
        let b = self.b;
        let u = 1.0 / s;
        let w2 = 1.0 + b * b * eta * eta;
        let w = w2.sqrt();
        let a = b * eta / w;
        let da = b / (w2 * w);
        let dw = b * b * eta / w;

        let (mut e1, mut e1_eta, mut e1_u) = (0.0, 0.0, 0.0);
        let (mut e2, mut e2_eta, mut e2_u) = (0.0, 0.0, 0.0);
        let mut lin = u * w / b;
        let mut lin_eta = u * dw / b;
        let mut lin_u = w / b;
        let mut un = 1.0;
        for (idx, t) in self.jets(eta)?.iter().enumerate() {
            let i = (idx + 1) as f64;
            let un_prev = un;
            un *= u;
            let p1 = a * t.d1;
            let p2 = w / b * t.source - a * t.d1;
            e1 += un * p1;
            e2 += un * p2;
            e1_u += i * un_prev * p1;
            e2_u += i * un_prev * p2;
            e1_eta += un * (da * t.d1 + a * t.d2);
            e2_eta += un * ((dw * t.source + w * t.source_d1) / b - da * t.d1 - a * t.d2);
            let c = eta * t.d1 - i * t.value;
            lin += un * u * c;
            lin_u += (i + 1.0) * un * c;
            lin_eta += un * u * ((1.0 - i) * t.d1 + eta * t.d2);
        }
        if !(e1 > -1.0) || !(e2 > -1.0) {
            let phi = (w / (b * eta.max(f64::MIN_POSITIVE))) * (1.0 + e1);
            return Err(Error::Positivity { t: s, rho: eta / s, phi, psi: a * (1.0 + e2) });
        }
        let value = lin - e1.ln_1p() - e2.ln_1p();
        let d_eta = lin_eta - e1_eta / (1.0 + e1) - e2_eta / (1.0 + e2);
        let d_u = lin_u - e1_u / (1.0 + e1) - e2_u / (1.0 + e2);
        Ok(ResidualJet { value, d_eta, d_s: -u * u * d_u })
    }

    /// The cap potential `φ_EH^(k)(t, ρ) = Ĝ^(k)(t, tρ)` as a radial profile.
    pub fn cap_profile(&self, t: f64) -> CapProfile<'_> {
        CapProfile { series: self, t }
    }

    /// `f_EH^(k)(t, ρ) = F̂^(k)(t, tρ)`.
    pub fn f_eh(&self, t: f64, rho: f64) -> Result<f64> {
        self.residual(t, t * rho)
    }

    /// `|∇f_EH|² = (√(1+b²η²)/b)(∂F̂/∂η)²`, returned as the norm.
    pub fn f_eh_gradient_norm(&self, t: f64, rho: f64) -> Result<f64> {
        let eta = t * rho;
        let jet = self.residual_jet(t, eta)?;
        let w = (1.0 + self.b * self.b * eta * eta).sqrt();
        Ok((w / self.b).sqrt() * jet.d_eta.abs())
    }

    /// `∂_t f_EH = s⁻¹ηF̂_η + F̂_s`.
    pub fn f_eh_time_derivative(&self, t: f64, rho: f64) -> Result<f64> {
        let eta = t * rho;
        let jet = self.residual_jet(t, eta)?;
        Ok(eta / t * jet.d_eta + jet.d_s)
    }

    /// Least-squares coefficient of `η^{j+1}` in `G^(j)` over `η ∈ [10², 10³]`.
    pub fn asymptotic_coefficient(&self, j: usize) -> Result<f64> {
        let term = self.term(j).ok_or_else(|| Error::Fit(format!("no correction term of order {j}")))?;
        const LO: f64 = 1e2;
        const HI: f64 = 1e3;
        if self.eta_max() < HI {
            return domain(format!("coefficient fit needs eta_max >= {HI}, have {}", self.eta_max()));
        }
        let n = 64;
        let mut design = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let eta = LO * (HI / LO).powf(i as f64 / (n - 1) as f64);
            let x = eta / HI;
            design.push(vec![x.powi(j as i32 + 1), x.powi(j as i32), x.powi(j as i32 - 1)]);
            y.push(term.value(eta)?);
        }
        let (coef, rms) = least_squares(&design, &y).ok_or_else(|| Error::Fit("singular design".into()))?;
        let scale = (y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if !(rms <= 1e-3 * scale) {
            return Err(Error::Fit(format!("relative residual {:e} for G^({j})", rms / scale)));
        }
        Ok(coef[0] / HI.powi(j as i32 + 1))
    }
}

/// `ρ ↦ Ĝ^(k)(t, tρ)`.
#[derive(Clone, Copy, Debug)]
pub struct CapProfile<'a> {
    series: &'a CorrectionSeries,
    t: f64,
}

impl RadialProfile for CapProfile<'_> {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        self.series.partial_sum(self.t, self.t * rho)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.t * self.series.partial_sum_jet(self.t, self.t * rho)?.d_eta)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.t * self.t * self.series.partial_sum_jet(self.t, self.t * rho)?.d_eta2)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.t * self.series.partial_sum_jet(self.t, self.t * rho)?.psi_eta)
    }
    fn cap_scale(&self) -> f64 {
        1.0 / (self.series.b * self.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::exceptional_area_coefficient;
    use std::sync::OnceLock;

    fn unit_b_series() -> &'static CorrectionSeries {
        static S: OnceLock<CorrectionSeries> = OnceLock::new();
        S.get_or_init(|| CorrectionSeries::build(1.0, 4, 1e3).unwrap())
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let design: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x.ln()]).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
        least_squares(&design, &ly).unwrap().0[1]
    }

    #[test]
    fn g0_reference_value_and_equation() {
        assert!((g0(1.0, 1.0, 1.0).unwrap() - (-2.0 + eh_potential(1.0, 1.0).unwrap())).abs() < 1e-15);
        assert!(g0(1.0, 1.0, 0.0).is_err());
        // G_s = log(G_η(G_η + ηG_ηη)) + 2 log s and the full residual, by differences
        for &(b, s, eta) in &[(1.0, 3.0, 0.7), (2.0, 50.0, 4.0), (0.5, 10.0, 0.5)] {
            let hs = 1e-4 * s;
            let he = 1e-3 * eta;
            let gs = (g0(b, s + hs, eta).unwrap() - g0(b, s - hs, eta).unwrap()) / (2.0 * hs);
            let spatial = |e: f64| g0(b, s, e).unwrap() - time_offset(s);
            let ge = (spatial(eta + he) - spatial(eta - he)) / (2.0 * he);
            let gee = (spatial(eta + he) - 2.0 * spatial(eta) + spatial(eta - he)) / (he * he);
            let rhs = (ge * (ge + eta * gee)).ln() + 2.0 * s.ln();
            assert!((gs - rhs).abs() < 1e-5, "{gs} {rhs}");
            let res = gs + eta / s * ge - rhs;
            let expect = (1.0 + b * b * eta * eta).sqrt() / (b * s);
            assert!((res - expect).abs() < 1e-5);
            let k0 = CorrectionSeries::build(b, 0, 10.0).unwrap();
            assert!((k0.residual(s, eta).unwrap() - expect).abs() < 1e-15 * expect.max(1.0));
        }
    }

    #[test]
    fn asymptotic_iteration_reproduces_hyperbolic_coefficients() {
        let polys = asymptotic_iteration(6).unwrap();
        for (idx, p) in polys.iter().enumerate() {
            let j = idx + 1;
            let lead = 1.0 / ((j + 1) as f64 * 3f64.powi(j as i32));
            assert_eq!(p.len(), j + 2);
            assert!((p[j + 1] - lead).abs() < 1e-12 * lead, "j={j} {p:?}");
            assert!(p[..=j].iter().all(|c| c.abs() < 1e-10), "j={j} {p:?}");
        }
    }

    /// Closed form of the first correction as printed, with its value at the
    /// origin `log(2/b)/(3b²)` removed so that it vanishes there.
    fn g1_closed(b: f64, eta: f64) -> f64 {
        let w = (1.0 + b * b * eta * eta).sqrt();
        let printed = (eta.ln() + 0.5 * b * b * eta * eta - 0.5 * ((w - 1.0) / (w + 1.0)).ln()) / (3.0 * b * b);
        printed - (2.0 / b).ln() / (3.0 * b * b)
    }

    #[test]
    fn first_correction_matches_closed_form() {
        for &b in &[0.7, 1.0, 2.0] {
            let s = CorrectionSeries::build(b, 1, 64.0).unwrap();
            let g1 = s.term(1).unwrap();
            for i in 0..=80 {
                let eta = 1e-1 * 500f64.powf(i as f64 / 80.0);
                let exact = g1_closed(b, eta);
                assert!((g1.value(eta).unwrap() - exact).abs() <= 1e-10 * exact.abs(), "b={b} eta={eta}");
            }
            for &eta in &[0.0, 0.01, 1.0, 30.0] {
                assert_eq!(s.source_at(1, eta).unwrap(), 1.0);
                let l = crate::eta::linearized_operator(b, g1, eta).unwrap();
                assert!((l - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dual_path_sources_agree() {
        let s = unit_b_series();
        assert_eq!(s.checks().len(), 3 * 3);
        for c in s.checks() {
            assert!(c.discrepancy() <= CHECK_TOL, "{c:?}");
        }
        // golden value of the second source at η = 1
        let h2 = s.source_at(2, 1.0).unwrap();
        assert!((h2 - H2_AT_ONE).abs() < 1e-9, "{h2:.15}");
        let check = s.check_source(2, 1.0).unwrap();
        assert!((check.extrapolated - H2_AT_ONE).abs() < 1e-6);
    }

    const H2_AT_ONE: f64 = 0.610_555_845_705_663;

    #[test]
    fn lemma1_leading_coefficients() {
        let s = unit_b_series();
        for j in 1..=3 {
            let c = s.asymptotic_coefficient(j).unwrap();
            let expect = 1.0 / ((j + 1) as f64 * 3f64.powi(j as i32));
            assert!((c - expect).abs() < 0.01 * expect, "j={j} c={c} expect={expect}");
        }
    }

    #[test]
    fn residual_decays_one_order_per_term() {
        let full = unit_b_series();
        let ss: Vec<f64> = (0..=12).map(|i| 1e2 * 10f64.powf(i as f64 / 4.0)).collect();
        for k in 0..=3 {
            let s = full.truncated(k);
            // the fourth-order residual reaches f64 rounding beyond s = 10^4
            let window = if k == 3 { &ss[..9] } else { &ss[..] };
            for &eta in &[0.5, 1.0, 2.0] {
                let r: Vec<f64> = window.iter().map(|&x| s.residual(x, eta).unwrap()).collect();
                let m = slope(window, &r);
                assert!((m + (k + 1) as f64).abs() < 0.1, "k={k} eta={eta} slope={m}");
            }
        }
    }

    #[test]
    fn truncated_hyperbolic_series_residual_order() {
        // G = 2(s log s − s) + Σ_{j<=k} η^{j+1} s^{-j}/((j+1)3^j), substituted directly
        let residual = |k: usize, s: f64, eta: f64| {
            let (mut gs, mut ge, mut gee) = (2.0 * s.ln(), 0.0, 0.0);
            for j in 0..=k {
                let c = 1.0 / ((j + 1) as f64 * 3f64.powi(j as i32));
                let sj = s.powi(-(j as i32));
                gs -= j as f64 * c * eta.powi(j as i32 + 1) * sj / s;
                ge += (j + 1) as f64 * c * eta.powi(j as i32) * sj;
                if j > 0 {
                    gee += ((j + 1) * j) as f64 * c * eta.powi(j as i32 - 1) * sj;
                }
            }
            gs + eta / s * ge - (ge * (ge + eta * gee)).ln() - 2.0 * s.ln()
        };
        let ss = [1e2, 3e2, 1e3, 3e3];
        for k in 0..=2 {
            let r: Vec<f64> = ss.iter().map(|&s| residual(k, s, 1.0)).collect();
            assert!((slope(&ss, &r) + (k + 1) as f64).abs() < 0.05);
        }
    }

    #[test]
    fn partial_sum_matches_explicit_first_order_potential() {
        let b = 1.0;
        let s1 = unit_b_series().truncated(1);
        for &(t, rho) in &[(10.0, 0.01), (100.0, 0.05), (1e3, 1e-3)] {
            let x: f64 = b * b * t * t * rho * rho;
            let w = (1.0 + x).sqrt();
            let lr = ((w - 1.0) / (w + 1.0)).ln();
            let explicit = 2.0 * (t * t.ln() - t) + w / b + lr / (2.0 * b) + ((t * rho).ln() + 0.5 * x - 0.5 * lr) / (3.0 * b * b * t);
            let shifted = explicit - (2.0 / b).ln() / (3.0 * b * b * t);
            let got = s1.partial_sum(t, t * rho).unwrap();
            assert!((got - shifted).abs() < 1e-9 * got.abs().max(1.0), "{got} {shifted}");
        }
        assert_eq!(s1.truncated(0).partial_sum(5.0, 0.3).unwrap(), g0(1.0, 5.0, 0.3).unwrap());
    }

    #[test]
    fn residual_derivatives_match_differences() {
        let s = unit_b_series().truncated(2);
        for &(t, eta) in &[(50.0, 0.3), (200.0, 3.0), (1e3, 20.0)] {
            let jet = s.residual_jet(t, eta).unwrap();
            let he = 1e-4 * eta;
            let fd_eta = (s.residual(t, eta + he).unwrap() - s.residual(t, eta - he).unwrap()) / (2.0 * he);
            assert!((jet.d_eta - fd_eta).abs() < 1e-5 * fd_eta.abs(), "{} {fd_eta}", jet.d_eta);
            let ht = 1e-4 * t;
            let fd_s = (s.residual(t + ht, eta).unwrap() - s.residual(t - ht, eta).unwrap()) / (2.0 * ht);
            assert!((jet.d_s - fd_s).abs() < 1e-5 * fd_s.abs(), "{} {fd_s}", jet.d_s);
            let rho = eta / t;
            let fd_t = (s.f_eh(t + ht, rho).unwrap() - s.f_eh(t - ht, rho).unwrap()) / (2.0 * ht);
            let dt = s.f_eh_time_derivative(t, rho).unwrap();
            assert!((dt - fd_t).abs() < 1e-5 * fd_t.abs(), "{dt} {fd_t}");
        }
    }

    #[test]
    fn zeroth_order_f_eh_closed_forms() {
        let b = 1.5;
        let s0 = CorrectionSeries::build(b, 0, 10.0).unwrap();
        for &(t, rho) in &[(10.0, 0.02), (1e3, 1e-3)] {
            let eta: f64 = t * rho;
            let w = (1.0 + b * b * eta * eta).sqrt();
            assert!((s0.f_eh(t, rho).unwrap() - w / (b * t)).abs() < 1e-15);
            let grad = (w / b).sqrt() * b * eta / (w * t);
            assert!((s0.f_eh_gradient_norm(t, rho).unwrap() - grad).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_profile_positivity_and_area() {
        let s = unit_b_series();
        for &t in &[1e2, 1e3, 1e4] {
            let cap = s.cap_profile(t);
            let a = exceptional_area_coefficient(&cap).unwrap();
            assert!((a - 1.0).abs() < 1e-8, "t={t} a={a}");
            // 0 <= η/s <= s^{-2a} with a = 1/4
            let rho_max = t.powf(-0.5);
            for i in 1..=50 {
                let rho = rho_max * i as f64 / 50.0;
                let g = crate::geometry::metric_from_profile(&cap, rho).unwrap();
                assert!(g.is_positive());
            }
        }
    }
}
