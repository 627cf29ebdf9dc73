//! Radial potential flow for a perturbation `v` of a model flow.
//!
//! The unknown solves `∂_t v = log[(φ₁+v_ρ)(ψ+v_ρ+ρv_ρρ)] − log(φ₁ψ) − f` on a
//! log-uniform grid in `ρ`, with `φ₁ = φ_mod,ρ` and `ψ = φ₁ + ρφ_mod,ρρ`.
//! In `x = log ρ` the two eigenvalue perturbations are `v_x/(ρφ₁)` and
//! `v_xx/(ρψ)`, discretized by centered differences. Values are stored in
//! double-double so that differences near the inner boundary, where `ρψ` is
//! tiny, are not swamped by rounding of `v` itself.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{exceptional_area_coefficient, RadialProfile, SampledProfile, SumProfile};
use crate::gluing::ModelFlow;
use crate::linalg::solve_tridiagonal;
use crate::real::{DoubleDouble, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Step size as a fraction of the current time.
    pub dt_ratio: f64,
    pub max_halvings: usize,
    pub nodes: usize,
    pub samples_per_octave: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_newton: 20, dt_ratio: 1e-3, max_halvings: 10, nodes: 2048, samples_per_octave: 4 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || !(self.dt_ratio > 0.0 && self.dt_ratio < 1.0) {
            return Err(Error::Config("newton_tol and dt_ratio must be positive, dt_ratio < 1".into()));
        }
        if self.max_newton == 0 || self.nodes < 8 || self.samples_per_octave == 0 {
            return Err(Error::Config("max_newton, samples_per_octave >= 1 and nodes >= 8 required".into()));
        }
        Ok(())
    }

    /// Steps per doubling of `t`, a multiple of the sampling density.
    pub fn steps_per_octave(&self) -> usize {
        let raw = (2f64.ln() / self.dt_ratio.ln_1p()).ceil() as usize;
        raw.div_ceil(self.samples_per_octave) * self.samples_per_octave
    }
}

/// Inner grid radius for a run ending at `t_end`.
pub fn rho_floor(t_end: f64) -> f64 {
    1e-3 / t_end
}

/// Log-uniform nodes `ρ_i = ρ_floor e^{ih}`, the last one at the outer radius.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowGrid {
    pub rho: Vec<f64>,
    pub h: f64,
}

impl FlowGrid {
    pub fn log_uniform(rho_min: f64, rho_max: f64, nodes: usize) -> Result<Self> {
        if !(rho_min > 0.0 && rho_max > rho_min) || nodes < 3 {
            return domain(format!("invalid grid [{rho_min}, {rho_max}] with {nodes} nodes"));
        }
        let h = (rho_max / rho_min).ln() / (nodes - 1) as f64;
        let mut rho: Vec<f64> = (0..nodes).map(|i| rho_min * (i as f64 * h).exp()).collect();
        rho[nodes - 1] = rho_max;
        Ok(Self { rho, h })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Every `factor`-th node of a grid with `(n-1)·factor + 1` nodes coincides with this one.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::log_uniform(self.rho[0], self.rho[self.len() - 1], (self.len() - 1) * factor + 1)
    }
}

/// Time, grid and perturbation samples; the last node carries the Dirichlet value.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub grid: Arc<FlowGrid>,
    pub v: Vec<DoubleDouble>,
}

impl FlowState {
    pub fn zero(t: f64, grid: Arc<FlowGrid>) -> Self {
        let v = vec![DoubleDouble::new(0.0); grid.len()];
        Self { t, grid, v }
    }

    pub fn from_fn(t: f64, grid: Arc<FlowGrid>, f: impl Fn(f64) -> f64) -> Self {
        let v = grid.rho.iter().map(|&r| DoubleDouble::new(f(r))).collect();
        Self { t, grid, v }
    }

    pub fn values(&self) -> Vec<f64> {
        self.v.iter().map(|x| x.to_f64()).collect()
    }

    pub fn boundary(&self) -> f64 {
        self.v[self.v.len() - 1].to_f64()
    }

    pub fn sup_abs(&self) -> f64 {
        self.v.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }
}

/// Extra source `s(t, ρ)` added to the right-hand side.
pub type Source<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);
/// Time-dependent Dirichlet value at the outer node.
pub type Boundary<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

/// Model plus optional extra forcing: `∂_t v = N(v) − f_mod + s`.
#[derive(Clone, Copy)]
pub struct FlowProblem<'a> {
    pub model: &'a dyn ModelFlow,
    pub source: Option<Source<'a>>,
    pub boundary: Option<Boundary<'a>>,
}

impl<'a> FlowProblem<'a> {
    pub fn new(model: &'a dyn ModelFlow) -> Self {
        Self { model, source: None, boundary: None }
    }

    pub fn with_source(mut self, source: Source<'a>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary<'a>) -> Self {
        self.boundary = Some(boundary);
        self
    }

    pub fn boundary_value(&self, t: f64) -> f64 {
        self.boundary.map_or(0.0, |b| b(t))
    }
}

/// Model coefficients on the grid at one time.
#[derive(Clone, Debug)]
pub struct NodeData {
    pub t: f64,
    /// `ρφ₁`
    pub rho_phi: Vec<f64>,
    /// `ρψ`
    pub rho_psi: Vec<f64>,
    /// `f_mod − s`
    pub forcing: Vec<f64>,
    pub sup_forcing: f64,
}

impl NodeData {
    pub fn compute(problem: &FlowProblem<'_>, grid: &FlowGrid, t: f64) -> Result<Self> {
        let rows: Vec<(f64, f64, f64)> = grid
            .rho
            .par_iter()
            .map(|&rho| {
                let j = problem.model.jet(t, rho)?;
                let s = problem.source.map_or(0.0, |s| s(t, rho));
                Ok((rho * j.d_rho, rho * j.psi, j.f - s))
            })
            .collect::<Result<_>>()?;
        let sup_forcing = rows[..rows.len() - 1].iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        Ok(Self {
            t,
            rho_phi: rows.iter().map(|r| r.0).collect(),
            rho_psi: rows.iter().map(|r| r.1).collect(),
            forcing: rows.iter().map(|r| r.2).collect(),
            sup_forcing,
        })
    }
}

/// Centered differences in `log ρ` with a regular ghost node below the floor.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    h: f64,
    /// Ghost reflection factor `e^{-ph}` for `v ≈ v(0) + cρ^p`.
    q: f64,
}

impl Stencil {
    fn new(grid: &FlowGrid, order: u32) -> Self {
        Self { h: grid.h, q: (-(order as f64) * grid.h).exp() }
    }

    /// Forward differences `v_{i+1} − v_i`, exact to double-double accuracy.
    fn differences(v: &[DoubleDouble]) -> Vec<f64> {
        v.windows(2).map(|w| (w[1] - w[0]).to_f64()).collect()
    }

    /// `(v_x, v_xx)` at free node `i` from the forward differences.
    fn derivs(&self, d: &[f64], i: usize) -> (f64, f64) {
        let dp = d[i];
        let dm = if i == 0 { self.q * d[0] } else { d[i - 1] };
        ((dp + dm) / (2.0 * self.h), (dp - dm) / (self.h * self.h))
    }
}

/// Relative eigenvalue perturbations `(v_ρ/φ₁, (v_ρ+ρv_ρρ)/ψ)` at the free nodes.
fn perturbations(v: &[DoubleDouble], data: &NodeData, grid: &FlowGrid, stencil: &Stencil) -> Result<Vec<[f64; 2]>> {
    let d = Stencil::differences(v);
    (0..grid.len() - 1)
        .map(|i| {
            let (dx, dxx) = stencil.derivs(&d, i);
            let a = dx / data.rho_phi[i];
            let b = dxx / data.rho_psi[i];
            if !(1.0 + a > 0.0 && 1.0 + b > 0.0) {
                let rho = grid.rho[i];
                return Err(Error::Positivity { t: data.t, rho, phi: (data.rho_phi[i] + dx) / rho, psi: (data.rho_psi[i] + dxx) / rho });
            }
            Ok([a, b])
        })
        .collect()
}

/// Right-hand side of the flow at the free nodes.
pub fn potential_flow_rhs(state: &FlowState, problem: &FlowProblem<'_>) -> Result<Vec<f64>> {
    let data = NodeData::compute(problem, &state.grid, state.t)?;
    let stencil = Stencil::new(&state.grid, problem.model.origin_order());
    let p = perturbations(&state.v, &data, &state.grid, &stencil)?;
    Ok(p.iter().zip(&data.forcing).map(|(&[a, b], f)| a.ln_1p() + b.ln_1p() - f).collect())
}

/// Log-det difference minus its linearization `Δ_{g_mod} v`; never positive.
pub fn q_remainder(state: &FlowState, problem: &FlowProblem<'_>) -> Result<Vec<f64>> {
    let data = NodeData::compute(problem, &state.grid, state.t)?;
    let stencil = Stencil::new(&state.grid, problem.model.origin_order());
    let p = perturbations(&state.v, &data, &state.grid, &stencil)?;
    Ok(p.iter().map(|&[a, b]| log1p_remainder(a) + log1p_remainder(b)).collect())
}

/// `ln(1+x) − x`, accurate for small `x`.
fn log1p_remainder(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let mut term = -x * x / 2.0;
        let mut sum = term;
        for k in 3..12 {
            term *= -x * (k as f64 - 1.0) / k as f64;
            sum += term;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Relative eigenvalue perturbations `(v_ρ/φ₁, (v_ρ+ρv_ρρ)/ψ)` at the free nodes.
pub fn eigen_perturbations(state: &FlowState, data: &NodeData, order: u32) -> Result<Vec<[f64; 2]>> {
    perturbations(&state.v, data, &state.grid, &Stencil::new(&state.grid, order))
}

/// BiLipschitz constant of the perturbed metric against the model at the free nodes.
pub fn perturbation_bilipschitz(state: &FlowState, data: &NodeData, order: u32) -> Result<(f64, f64)> {
    let stencil = Stencil::new(&state.grid, order);
    let p = perturbations(&state.v, data, &state.grid, &stencil)?;
    let mut best = (1.0, state.grid.rho[0]);
    for (i, &[a, b]) in p.iter().enumerate() {
        let k = [1.0 + a, 1.0 / (1.0 + a), 1.0 + b, 1.0 / (1.0 + b)].into_iter().fold(1.0, f64::max);
        if k > best.0 {
            best = (k, state.grid.rho[i]);
        }
    }
    Ok(best)
}

/// Variable-step two-step backward differentiation with Newton iterations.
pub struct FlowSolver<'a> {
    problem: FlowProblem<'a>,
    config: SolverConfig,
    stencil: Stencil,
    state: FlowState,
    previous: Option<FlowState>,
    data: NodeData,
    pub rejected: usize,
    pub newton_iterations: usize,
}

impl<'a> FlowSolver<'a> {
    pub fn new(problem: FlowProblem<'a>, config: SolverConfig, state: FlowState) -> Result<Self> {
        config.validate()?;
        let data = NodeData::compute(&problem, &state.grid, state.t)?;
        let stencil = Stencil::new(&state.grid, problem.model.origin_order());
        perturbations(&state.v, &data, &state.grid, &stencil)?;
        Ok(Self { problem, config, stencil, state, previous: None, data, rejected: 0, newton_iterations: 0 })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    /// Model coefficients at the current time.
    pub fn data(&self) -> &NodeData {
        &self.data
    }

    pub fn problem(&self) -> &FlowProblem<'a> {
        &self.problem
    }

    /// Forget the history so that the next step is a backward Euler step.
    pub fn restart(&mut self) {
        self.previous = None;
    }

    /// Advance to `t + dt`, halving the step on Newton failure or loss of positivity.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let target = self.state.t + dt;
        let mut sub = dt;
        let mut halvings = 0;
        while self.state.t < target {
            let remaining = target - self.state.t;
            let (h, t_new) = if sub >= remaining * (1.0 - 1e-12) { (remaining, target) } else { (sub, self.state.t + sub) };
            match self.attempt(t_new, h) {
                Ok((v, data, its)) => {
                    self.newton_iterations += its;
                    let next = FlowState { t: t_new, grid: self.state.grid.clone(), v };
                    self.previous = Some(std::mem::replace(&mut self.state, next));
                    self.data = data;
                }
                Err(e @ (Error::Solver { .. } | Error::Positivity { .. })) => {
                    if halvings >= self.config.max_halvings {
                        return Err(Error::Solver {
                            t: self.state.t,
                            reason: format!("step failed after {halvings} halvings (dt = {h:e}): {e}"),
                        });
                    }
                    halvings += 1;
                    self.rejected += 1;
                    sub = h / 2.0;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn attempt(&self, t_new: f64, h: f64) -> Result<(Vec<DoubleDouble>, NodeData, usize)> {
        let grid = &self.state.grid;
        let n = grid.len();
        let data = NodeData::compute(&self.problem, grid, t_new)?;
        let v = &self.state.v;
        // G = (w − v) − β(v − v_old) − γh R(w)
        let (beta, gamma, mut w) = match &self.previous {
            Some(old) => {
                let omega = h / (self.state.t - old.t);
                let beta = omega * omega / (1.0 + 2.0 * omega);
                let w: Vec<DoubleDouble> = v.iter().zip(&old.v).map(|(&x, &y)| x + (x - y) * DoubleDouble::new(omega)).collect();
                let w = if perturbations(&w, &data, grid, &self.stencil).is_ok() { w } else { v.clone() };
                let hist: Vec<f64> = v.iter().zip(&old.v).map(|(&x, &y)| beta * (x - y).to_f64()).collect();
                (hist, (1.0 + omega) / (1.0 + 2.0 * omega), w)
            }
            None => (vec![0.0; n], 1.0, v.clone()),
        };
        w[n - 1] = DoubleDouble::new(self.problem.boundary_value(t_new));
        let (w, its) = newton(v, &beta, gamma * h, w, &data, grid, &self.stencil, &self.config, t_new)?;
        Ok((w, data, its))
    }
}

/// Newton iterations for `(w − v) − hist − gh·R(w) = 0` with `w` at time `t_new`.
#[allow(clippy::too_many_arguments)]
fn newton(
    v: &[DoubleDouble],
    beta: &[f64],
    gh: f64,
    mut w: Vec<DoubleDouble>,
    data: &NodeData,
    grid: &FlowGrid,
    stencil: &Stencil,
    config: &SolverConfig,
    t_new: f64,
) -> Result<(Vec<DoubleDouble>, usize)> {
    let (st, m) = (*stencil, grid.len() - 1);
    let (h1, h2) = (2.0 * st.h, st.h * st.h);
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for it in 0..config.max_newton {
        let p = perturbations(&w, data, grid, &st)?;
        for i in 0..m {
            let [a, b] = p[i];
            let r = a.ln_1p() + b.ln_1p() - data.forcing[i];
            rhs[i] = -((w[i] - v[i]).to_f64() - beta[i] - gh * r);
            let ca = 1.0 / ((1.0 + a) * h1 * data.rho_phi[i]);
            let cb = 1.0 / ((1.0 + b) * h2 * data.rho_psi[i]);
            // ∂R/∂D₊ and ∂R/∂D₋
            let (rp, rm) = (ca + cb, ca - cb);
            if i == 0 {
                diag[0] = 1.0 + gh * (rp + st.q * rm);
                upper[0] = -gh * (rp + st.q * rm);
            } else {
                lower[i] = gh * rm;
                diag[i] = 1.0 + gh * (rp - rm);
                upper[i] = -gh * rp;
            }
        }
        let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs)
            .ok_or_else(|| Error::Solver { t: t_new, reason: "singular Newton matrix".into() })?;
        let mut change = 0.0f64;
        for i in 0..m {
            let dp = if i + 1 < m { delta[i + 1] - delta[i] } else { -delta[i] };
            let dm = if i == 0 { st.q * dp } else { delta[i] - delta[i - 1] };
            let da = (dp + dm) / (h1 * data.rho_phi[i]);
            let db = (dp - dm) / (h2 * data.rho_psi[i]);
            change = change.max(delta[i].abs()).max(da.abs()).max(db.abs());
        }
        if !change.is_finite() {
            return Err(Error::Solver { t: t_new, reason: "non-finite Newton update".into() });
        }
        for i in 0..m {
            w[i] += DoubleDouble::new(delta[i]);
        }
        if change <= config.newton_tol {
            perturbations(&w, data, grid, &st)?;
            return Ok((w, it + 1));
        }
    }
    Err(Error::Solver { t: t_new, reason: format!("Newton did not converge in {} iterations", config.max_newton) })
}

/// A model flow frozen at one time, as a radial profile.
#[derive(Clone, Copy)]
pub struct ModelSnapshot<'a> {
    pub model: &'a dyn ModelFlow,
    pub t: f64,
}

impl RadialProfile for ModelSnapshot<'_> {
    fn time(&self) -> f64 {
        self.t
    }
    fn value(&self, rho: f64) -> Result<f64> {
        Ok(self.model.jet(self.t, rho)?.value)
    }
    fn d_rho(&self, rho: f64) -> Result<f64> {
        Ok(self.model.jet(self.t, rho)?.d_rho)
    }
    fn d_rho2(&self, rho: f64) -> Result<f64> {
        Ok(self.model.jet(self.t, rho)?.d_rho2)
    }
    fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.model.jet(self.t, rho)?.psi)
    }
    fn cap_scale(&self) -> f64 {
        self.model.cap_scale(self.t)
    }
}

/// The perturbation as a cubic-Hermite profile with slopes from the grid stencil.
pub fn perturbation_profile(state: &FlowState, order: u32) -> Result<SampledProfile> {
    let grid = &state.grid;
    let n = grid.len();
    let st = Stencil::new(grid, order);
    let d = Stencil::differences(&state.v);
    let der: Vec<f64> =
        (0..n).map(|i| if i + 1 < n { st.derivs(&d, i).0 / grid.rho[i] } else { d[n - 2] / (st.h * grid.rho[i]) }).collect();
    SampledProfile::new(state.t, grid.rho.clone(), state.values(), der)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub sup_v: f64,
    pub sup_f: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub k_rho: f64,
    /// Only for models with an exceptional curve.
    pub area_coeff: Option<f64>,
    #[serde(skip)]
    pub v: Vec<DoubleDouble>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSample {
    pub t: f64,
    pub sup_v: f64,
    pub sup_f: f64,
}

/// Sampled history of one evolution.
#[derive(Clone, Debug)]
pub struct EvolutionTrace {
    pub model: String,
    pub t_start: f64,
    pub t_end: f64,
    pub grid: Arc<FlowGrid>,
    /// Samples at `t_start · 2^{j/m}` for `m` samples per octave, plus the end time.
    pub samples: Vec<TraceSample>,
    /// `sup|v|` and `sup|f|` after every step.
    pub dense: Vec<DenseSample>,
    pub steps: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub final_state: FlowState,
}

fn sample(solver: &FlowSolver<'_>) -> Result<TraceSample> {
    let state = solver.state();
    let order = solver.problem().model.origin_order();
    let (k, k_rho) = perturbation_bilipschitz(state, solver.data(), order)?;
    let snapshot = ModelSnapshot { model: solver.problem().model, t: state.t };
    let area_coeff =
        if order == 2 { Some(exceptional_area_coefficient(&SumProfile(snapshot, perturbation_profile(state, order)?))?) } else { None };
    Ok(TraceSample { t: state.t, sup_v: state.sup_abs(), sup_f: solver.data().sup_forcing, k, k_rho, area_coeff, v: state.v.clone() })
}

/// Evolve from `v(t_start) = 0` on `[ρ_floor(t_end), rho_max]`.
pub fn evolve(problem: FlowProblem<'_>, t_start: f64, t_end: f64, rho_max: f64, config: &SolverConfig) -> Result<EvolutionTrace> {
    let grid = Arc::new(FlowGrid::log_uniform(rho_floor(t_end), rho_max, config.nodes)?);
    let mut state = FlowState::zero(t_start, grid);
    let n = state.v.len();
    state.v[n - 1] = DoubleDouble::new(problem.boundary_value(t_start));
    evolve_from(problem, state, t_end, config)
}

/// Evolve an arbitrary initial state on a logarithmic time grid.
pub fn evolve_from(problem: FlowProblem<'_>, state: FlowState, t_end: f64, config: &SolverConfig) -> Result<EvolutionTrace> {
    let t_start = state.t;
    if !(t_start > 0.0 && t_end > t_start) {
        return domain(format!("need 0 < t_start < t_end, got [{t_start}, {t_end}]"));
    }
    let grid = state.grid.clone();
    let model = problem.model.describe();
    let per_octave = config.steps_per_octave();
    let sample_every = per_octave / config.samples_per_octave;
    let mut solver = FlowSolver::new(problem, config.clone(), state)?;
    let mut samples = vec![sample(&solver)?];
    let mut dense = vec![DenseSample { t: t_start, sup_v: solver.state().sup_abs(), sup_f: solver.data().sup_forcing }];
    let mut step = 0usize;
    while solver.state().t < t_end {
        step += 1;
        let t_next = (t_start * 2f64.powf(step as f64 / per_octave as f64)).min(t_end);
        let t_next = if t_end - t_next < 1e-9 * t_end { t_end } else { t_next };
        solver.step(t_next - solver.state().t)?;
        let s = solver.state();
        dense.push(DenseSample { t: s.t, sup_v: s.sup_abs(), sup_f: solver.data().sup_forcing });
        if step.is_multiple_of(sample_every) || s.t >= t_end {
            samples.push(sample(&solver)?);
        }
    }
    Ok(EvolutionTrace {
        model,
        t_start,
        t_end,
        grid,
        samples,
        dense,
        steps: step,
        rejected: solver.rejected,
        newton_iterations: solver.newton_iterations,
        final_state: solver.state().clone(),
    })
}

/// Flow quantities in normalized time `t̂ = log t`, divided by `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedView {
    pub t_hat: f64,
    /// `(φ_mod + v)/t`
    pub u_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
}

pub fn normalized_transform(state: &FlowState, model: &dyn ModelFlow) -> Result<NormalizedView> {
    if !(state.t > 0.0) {
        return domain(format!("normalized time needs t > 0, got {}", state.t));
    }
    let t = state.t;
    let v_hat: Vec<f64> = state.values().iter().map(|v| v / t).collect();
    let u_hat = state.grid.rho.iter().zip(&v_hat).map(|(&rho, vh)| Ok(model.jet(t, rho)?.value / t + vh)).collect::<Result<_>>()?;
    Ok(NormalizedView { t_hat: t.ln(), u_hat, v_hat })
}

/// Difference between one backward Euler step in `t` and one in `t̂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedStepCheck {
    pub t: f64,
    pub dt: f64,
    /// `max |v̂_t − v̂_t̂|` at the new time.
    pub max_difference: f64,
}

/// Step `∂_t v = N(v) − f` and `∂_t̂ v̂ + v̂ = N(t v̂) − f` once each from the same state.
pub fn normalized_step_check(state: &FlowState, problem: FlowProblem<'_>, config: &SolverConfig, dt: f64) -> Result<NormalizedStepCheck> {
    let (t, t_new) = (state.t, state.t + dt);
    let mut solver = FlowSolver::new(problem, config.clone(), state.clone())?;
    solver.step(dt)?;
    let direct = solver.state().values();

    let grid = &state.grid;
    let data = NodeData::compute(&problem, grid, t_new)?;
    let stencil = Stencil::new(grid, problem.model.origin_order());
    // (1 + Δt̂) w − (t'/t) v − Δt̂ t' R(w) = 0 with w = t' v̂'
    let dth = (t_new / t).ln();
    let shift = t_new / (t * (1.0 + dth)) - 1.0;
    let hist: Vec<f64> = state.v.iter().map(|x| shift * x.to_f64()).collect();
    let mut w = state.v.clone();
    let n = w.len();
    w[n - 1] = DoubleDouble::new(problem.boundary_value(t_new));
    let gh = dth * t_new / (1.0 + dth);
    let (w, _) = newton(&state.v, &hist, gh, w, &data, grid, &stencil, config, t_new)?;
    let max_difference = w.iter().zip(&direct).map(|(a, b)| (a.to_f64() - b).abs() / t_new).fold(0.0, f64::max);
    Ok(NormalizedStepCheck { t, dt, max_difference })
}

/// Power-law tail `C t^p` of the forcing sup and its integral beyond `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub exponent: f64,
    pub coefficient: f64,
    /// `∫_{t_start}^∞ C s^p ds`
    pub tail_from_start: f64,
    pub epsilon: f64,
    /// Smallest start time with tail at most `epsilon`.
    pub minimal_t: f64,
}

impl TailEstimate {
    pub fn tail_from(&self, t: f64) -> f64 {
        if self.exponent >= -1.0 {
            return f64::INFINITY;
        }
        self.coefficient * t.powf(self.exponent + 1.0) / (-self.exponent - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySample {
    pub t: f64,
    pub sup_v: f64,
    /// `∫_{t_start}^t sup|f| ds`
    pub forcing_integral: f64,
    pub margin: f64,
}

/// Maximum-principle bound `sup|v(t)| ≤ sup|v(t_start)| + ∫ sup|f|` along a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub samples: Vec<StabilitySample>,
    pub min_margin: f64,
    pub first_violation: Option<f64>,
    pub tail: Option<TailEstimate>,
    pub pass: bool,
}

/// Tolerance on the margin for rounding in the trapezoid sum.
const MARGIN_SLACK: f64 = 1e-13;

pub fn stability_check(trace: &EvolutionTrace, epsilon: f64) -> StabilityReport {
    let dense = &trace.dense;
    let v0 = dense[0].sup_v;
    let mut integral = 0.0;
    let mut samples = Vec::with_capacity(dense.len());
    for (i, d) in dense.iter().enumerate() {
        if i > 0 {
            let p = &dense[i - 1];
            integral += 0.5 * (d.t - p.t) * (d.sup_f + p.sup_f);
        }
        samples.push(StabilitySample { t: d.t, sup_v: d.sup_v, forcing_integral: integral, margin: v0 + integral - d.sup_v });
    }
    let min_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let first_violation = samples.iter().find(|s| s.margin < -MARGIN_SLACK * (1.0 + s.sup_v)).map(|s| s.t);
    StabilityReport { tail: forcing_tail(trace, epsilon), pass: first_violation.is_none(), samples, min_margin, first_violation }
}

/// Fit the decay of `sup|f|` over the last decade of the trace.
fn forcing_tail(trace: &EvolutionTrace, epsilon: f64) -> Option<TailEstimate> {
    let lo = (trace.t_end / 10.0).max(trace.t_start);
    let pts: Vec<(f64, f64)> = trace.dense.iter().filter(|d| d.t >= lo && d.sup_f > 0.0).map(|d| (d.t, d.sup_f)).collect();
    let fit = crate::fit::decay_exponent_fit(&pts).ok()?;
    let coefficient = fit.intercept.exp();
    let mut tail = TailEstimate { exponent: fit.slope, coefficient, tail_from_start: 0.0, epsilon, minimal_t: f64::INFINITY };
    tail.tail_from_start = tail.tail_from(trace.t_start);
    if fit.slope < -1.0 {
        tail.minimal_t = (epsilon * (-fit.slope - 1.0) / coefficient).powf(1.0 / (fit.slope + 1.0));
    }
    Some(tail)
}
