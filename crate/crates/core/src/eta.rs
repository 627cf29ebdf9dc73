//! Functions of `η` carrying the correction terms `G^(j)` and their sources.
//!
//! A term is stored as an explicit asymptotic polynomial plus a remainder
//! sampled on a dyadic Chebyshev-Lobatto table. Alongside the value we keep
//! `q = G'/η` (smooth and even at the origin) and the source `H`, so that
//! `G''` follows from the ODE rather than from differentiating samples.

use std::sync::Arc;

use crate::cheb::PanelTable;
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Value and derivatives of an [`EtaFunction`] at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaJet {
    pub value: f64,
    pub d1: f64,
    /// `G'/η`, finite at `η = 0`.
    pub d1_over_eta: f64,
    pub d2: f64,
    pub d3: f64,
    pub source: f64,
    pub source_d1: f64,
}

#[derive(Clone, Debug)]
pub struct EtaFunction {
    b: f64,
    table: Arc<PanelTable>,
    poly: Vec<f64>,
    remainder: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
    source: Vec<Vec<f64>>,
}

/// Default sampling table for correction terms with area parameter `b`.
pub fn default_table(b: f64, eta_max: f64) -> Arc<PanelTable> {
    Arc::new(PanelTable::dyadic(0.0625 / b.max(1e-3), eta_max, 20))
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl EtaFunction {
    pub fn eta_max(&self) -> f64 {
        self.table.x_max()
    }

    pub fn table(&self) -> &Arc<PanelTable> {
        &self.table
    }

    /// Coefficients (by power of `η`) of the explicit large-`η` part.
    pub fn asymptotic_poly(&self) -> &[f64] {
        &self.poly
    }

    fn check(&self, eta: f64) -> Result<()> {
        if !(0.0..=self.eta_max()).contains(&eta) {
            return domain(format!("eta = {eta} outside [0, {}]", self.eta_max()));
        }
        Ok(())
    }

    pub fn value(&self, eta: f64) -> Result<f64> {
        self.check(eta)?;
        Ok(poly_eval(&self.poly, eta) + self.table.eval(&self.remainder, eta).unwrap_or(f64::NAN))
    }

    pub fn source(&self, eta: f64) -> Result<f64> {
        self.check(eta)?;
        Ok(self.table.eval(&self.source, eta).unwrap_or(f64::NAN))
    }

    pub fn d1(&self, eta: f64) -> Result<f64> {
        Ok(self.jet(eta)?.d1)
    }

    pub fn d2(&self, eta: f64) -> Result<f64> {
        Ok(self.jet(eta)?.d2)
    }

    pub fn jet(&self, eta: f64) -> Result<EtaJet> {
        self.check(eta)?;
        let t = &self.table;
        let b2 = self.b * self.b;
        let q = t.eval(&self.slope, eta).unwrap_or(f64::NAN);
        let dq = t.eval_deriv(&self.slope, eta).unwrap_or(f64::NAN);
        let h = t.eval(&self.source, eta).unwrap_or(f64::NAN);
        let dh = t.eval_deriv(&self.source, eta).unwrap_or(f64::NAN);
        let w2 = 1.0 + b2 * eta * eta;
        let w = w2.sqrt();
        let dw = b2 * eta / w;
        let d1_over_eta = q / w;
        // G'' = H − G'/η − b²ηG'/W²
        let d2 = h - d1_over_eta * (1.0 + b2 * eta * eta / w2);
        let dd1_over_eta = dq / w - q * dw / w2;
        let r = b2 * eta * eta / w2;
        let dr = 2.0 * b2 * eta / (w2 * w2);
        let d3 = dh - dd1_over_eta * (1.0 + r) - d1_over_eta * dr;
        let jet = EtaJet { value: self.value(eta)?, d1: eta * d1_over_eta, d1_over_eta, d2, d3, source: h, source_d1: dh };
        if [jet.value, jet.d1, jet.d2, jet.d3].iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("correction term at eta = {eta}")));
        }
        Ok(jet)
    }
}

/// `h'' + (1/η + b²η/(1+b²η²)) h'`, with the even-extension limit `2h''(0)` at the origin.
pub fn linearized_operator(b: f64, h: &EtaFunction, eta: f64) -> Result<f64> {
    let j = h.jet(eta)?;
    if eta == 0.0 {
        return Ok(2.0 * j.d2);
    }
    Ok(j.d2 + (1.0 / eta + b * b * eta / (1.0 + b * b * eta * eta)) * j.d1)
}

/// Same operator applied to a closed-form `(h', h'')` pair.
pub fn linearized_operator_raw(b: f64, eta: f64, d1: f64, d2: f64) -> f64 {
    d2 + (1.0 / eta + b * b * eta / (1.0 + b * b * eta * eta)) * d1
}

/// Regular solution `∫₀^η (σW)⁻¹ ∫₀^σ τW H dτ dσ`, `W = √(1+b²η²)`, of the
/// linearized equation with source `h`.
pub fn solve_correction(b: f64, table: Arc<PanelTable>, h: impl Fn(f64) -> f64) -> Result<EtaFunction> {
    let samples: Vec<f64> = table.all_nodes().into_iter().map(h).collect();
    solve_correction_sampled(b, table, &samples, Vec::new())
}

/// As [`solve_correction`] with the source given at the table nodes and an
/// explicit polynomial part subtracted before storing the remainder.
pub fn solve_correction_sampled(b: f64, table: Arc<PanelTable>, source: &[f64], poly: Vec<f64>) -> Result<EtaFunction> {
    if !(b > 0.0) {
        return domain(format!("area parameter must be positive, got {b}"));
    }
    let nodes = table.all_nodes();
    if source.len() != nodes.len() {
        return domain("source samples do not match the table");
    }
    if source.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("correction source".into()));
    }
    let tol = Tolerance::default();
    let w = |x: f64| (1.0 + b * b * x * x).sqrt();
    let h_panels = table.split(source);

    let mut inner = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        let piece = integrate(|x| x * w(x) * table.eval(&h_panels, x).unwrap_or(f64::NAN), nodes[i - 1], nodes[i], tol)?;
        inner[i] = inner[i - 1] + piece.value;
    }
    let slope: Vec<f64> =
        nodes.iter().zip(&inner).enumerate().map(|(i, (&x, &v))| if x == 0.0 { 0.5 * source[i] } else { v / (x * x) }).collect();
    let q_panels = table.split(&slope);

    let mut value = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        let piece = integrate(|x| x * table.eval(&q_panels, x).unwrap_or(f64::NAN) / w(x), nodes[i - 1], nodes[i], tol)?;
        value[i] = value[i - 1] + piece.value;
    }
    let remainder: Vec<f64> = nodes.iter().zip(&value).map(|(&x, &g)| g - poly_eval(&poly, x)).collect();
    Ok(EtaFunction { b, remainder: table.split(&remainder), slope: q_panels, source: h_panels, poly, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form unit-source solution in cancellation-free form, normalized
    /// to vanish at the origin: `(1/(3b²))[b²η²/2 + log((W+1)/2)]`.
    fn unit_solution(b: f64, eta: f64) -> (f64, f64) {
        let x = b * b * eta * eta;
        let w = (1.0 + x).sqrt();
        let value = (0.5 * x + (x / (2.0 * (w + 1.0))).ln_1p()) / (3.0 * b * b);
        let d1 = (b * b * eta + b * b * eta / (w * (w + 1.0))) / (3.0 * b * b);
        (value, d1)
    }

    #[test]
    fn unit_source_matches_closed_form() {
        for &b in &[0.5, 1.0, 2.0] {
            let g = solve_correction(b, default_table(b, 100.0), |_| 1.0).unwrap();
            for i in 0..=60 {
                let eta = 1e-3 * 10f64.powf(i as f64 * 5.0 / 60.0);
                let (v, d) = unit_solution(b, eta);
                let jet = g.jet(eta).unwrap();
                assert!((jet.value - v).abs() <= 1e-10 * v.abs(), "b={b} eta={eta} {} {v}", jet.value);
                assert!((jet.d1 - d).abs() <= 1e-10 * d.abs());
            }
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = solve_correction(1.0, default_table(1.0, 10.0), |_| 0.0).unwrap();
        for &eta in &[0.0, 0.3, 7.0] {
            let j = g.jet(eta).unwrap();
            assert_eq!((j.value, j.d1, j.d2), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn operator_inverts_solver() {
        let b = 1.3;
        let table = default_table(b, 200.0);
        type Source = (&'static str, fn(f64) -> f64);
        let sources: [Source; 4] = [("one", |_| 1.0), ("eta", |x| x), ("eta2", |x| x * x), ("exp", |x| (-x).exp())];
        for (name, h) in sources {
            let g = solve_correction(b, table.clone(), h).unwrap();
            for i in 0..=40 {
                let eta = 1e-2 * 10f64.powf(i as f64 * 4.0 / 40.0);
                let lhs = linearized_operator(b, &g, eta).unwrap();
                assert!((lhs - h(eta)).abs() <= 1e-8 * h(eta).abs().max(1.0), "{name} eta={eta}");
            }
            assert!((linearized_operator(b, &g, 0.0).unwrap() - h(0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn third_derivative_matches_difference_of_second() {
        let g = solve_correction(1.0, default_table(1.0, 50.0), |x| 1.0 + x * x).unwrap();
        for &eta in &[0.05, 0.9, 3.0, 20.0] {
            let h = 1e-4 * eta;
            let fd = (g.d2(eta + h).unwrap() - g.d2(eta - h).unwrap()) / (2.0 * h);
            let d3 = g.jet(eta).unwrap().d3;
            assert!((fd - d3).abs() <= 1e-6 * d3.abs().max(1.0), "eta={eta} {fd} {d3}");
        }
    }

    #[test]
    fn domain_is_enforced() {
        let g = solve_correction(1.0, default_table(1.0, 10.0), |_| 1.0).unwrap();
        assert!(g.value(-1.0).is_err());
        assert!(g.value(g.eta_max() * 1.01).is_err());
        assert!(linearized_operator_raw(1.0, 1.0, 0.0, 0.0) == 0.0);
    }
}
