//! One function per subcommand: each returns the summary and its CSV tables.

use anyhow::{Context, Result};
use krflab::correction::CorrectionSeries;
use krflab::experiments::*;
use krflab::flow::{stability_check, EvolutionTrace};
use krflab::gluing::{GluedModelSpec, ModelFlow, Region};

use crate::config::RunConfig;
use crate::report::{fmt_float, Summary, Table};

pub type Output = (Summary, Vec<Table>);

pub fn series(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("series", cfg);
    let k = cfg.k.max(1);
    let series = CorrectionSeries::build(cfg.b, k, 64.0)?;
    let mut header = vec!["eta".to_string()];
    for j in 1..=k {
        header.push(format!("G{j}"));
        header.push(format!("H{j}"));
    }
    header.push("G1_closed_form".into());
    let mut table = Table { name: "terms".into(), header, rows: vec![] };
    for eta in log_grid(1e-3, 50.0, cfg.series_points) {
        let mut row = vec![eta];
        for j in 1..=k {
            row.push(series.term(j).context("missing correction term")?.value(eta)?);
            row.push(series.source_at(j, eta)?);
        }
        row.push(first_correction_closed_form(cfg.b, eta));
        table.push(row);
    }
    let ricci = ricci_flat_check(&[0.5, 1.0, 2.0], 1000, 1e-10)?;
    let first = first_correction_check(cfg.b, 1e-8)?;
    summary.flag("ricci_flat", ricci.pass);
    summary.flag("first_correction", first.pass);
    summary.metric("ricci_flat", &ricci)?;
    summary.metric("first_correction", &first)?;
    Ok((summary, vec![table]))
}

fn region_code(r: Region) -> f64 {
    match r {
        Region::Cap => 0.0,
        Region::Gluing => 1.0,
        Region::Background => 2.0,
    }
}

pub fn model(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("model", cfg);
    let model = cfg.evolution()?.model()?;
    let mut table = Table::new("profile", &["t", "rho", "region", "phi_mod", "phi", "psi", "f_mod"]);
    let mut positive = true;
    for t in log_grid(cfg.t_start, cfg.t_end, 5) {
        for rho in log_grid(1e-3 / t, cfg.delta * cfg.delta, cfg.series_points) {
            let j = model.jet(t, rho)?;
            let e = j.eigenvalues();
            positive &= e.phi > 0.0 && e.psi > 0.0;
            table.push([t, rho, region_code(j.region), j.value, e.phi, e.psi, j.f]);
        }
    }
    summary.flag("positive", positive);
    summary.metric("model", model.describe())?;
    Ok((summary, vec![table]))
}

fn trace_table(name: &str, trace: &EvolutionTrace) -> Table {
    let mut t = Table::new(name, &["t", "sup_v", "sup_f", "K", "k_rho", "area_coeff"]);
    for s in &trace.samples {
        t.push([s.t, s.sup_v, s.sup_f, s.k, s.k_rho, s.area_coeff.unwrap_or(f64::NAN)]);
    }
    t
}

fn dense_table(name: &str, trace: &EvolutionTrace) -> Table {
    let mut t = Table::new(name, &["t", "sup_v", "sup_f"]);
    for d in &trace.dense {
        t.push([d.t, d.sup_v, d.sup_f]);
    }
    t
}

pub fn evolve(cfg: &RunConfig, dense: bool) -> Result<Output> {
    let mut summary = Summary::new("evolve", cfg);
    let ec = cfg.evolution()?;
    let model = ec.model()?;
    let trace = run_evolution(&ec, &model)?;
    let decay = decay_report("evolve", &trace, f64::NEG_INFINITY);
    let stability = stability_check(&trace, cfg.epsilon);
    summary.flag("maximum_principle", stability.pass);
    if let Some(d) = area_deviation(&trace, cfg.b) {
        summary.flag("area_invariance", d <= 1e-4);
        summary.metric("area_deviation", d)?;
    }
    summary.metric("model", &trace.model)?;
    summary.metric("steps", trace.steps)?;
    summary.metric("rejected", trace.rejected)?;
    summary.metric("newton_iterations", trace.newton_iterations)?;
    summary.metric("exponent", decay.exponent)?;
    summary.metric("ci_half_width", decay.ci_half_width)?;
    summary.metric("stability_min_margin", stability.min_margin)?;
    let mut profile = Table::new("profile", &["rho", "v"]);
    for (r, v) in trace.grid.rho.iter().zip(trace.final_state.values()) {
        profile.push([*r, v]);
    }
    let mut tables = vec![trace_table("trace", &trace), profile];
    if dense {
        tables.push(dense_table("dense", &trace));
    }
    Ok((summary, tables))
}

fn slope_table(name: &str, checks: &[&SlopeCheck]) -> Table {
    let mut t = Table::new(name, &["check", "t", "value"]);
    for c in checks {
        for &(x, y) in &c.samples {
            t.push_raw(vec![c.label.clone(), fmt_float(x), fmt_float(y)]);
        }
    }
    t
}

fn weighted(cfg: &RunConfig, name: &str, wc: &WeightedBoundConfig) -> Result<Output> {
    let mut summary = Summary::new(name, cfg);
    let r = weighted_bound(name, wc)?;
    let mut table = Table::new("rows", &["t", "weighted_sup", "sup_at_r", "weighted_holder", "interpolation_ratio"]);
    for row in &r.rows {
        table.push([row.t, row.weighted_sup, row.sup_at_r, row.weighted_holder, row.interpolation_ratio]);
    }
    summary.flag("weighted_sup", r.sup.pass);
    summary.flag("interpolation", r.rows.iter().all(|row| row.interpolation_ratio <= 1.0));
    summary.metric("sup_slope", r.sup.slope)?;
    summary.metric("holder_slope", r.holder.slope)?;
    summary.metric("report", &r)?;
    Ok((summary, vec![table]))
}

pub fn lemma1_cmd(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("lemma1", cfg);
    let r = lemma1(cfg.b, 3, cfg.lemma1_tol)?;
    let mut table = Table::new("coefficients", &["j", "fitted", "expected", "relative_error"]);
    for row in &r.rows {
        table.push([row.j as f64, row.fitted, row.expected, row.relative_error]);
        summary.flag(&format!("j{}", row.j), row.pass);
    }
    summary.metric("report", &r)?;
    Ok((summary, vec![table]))
}

pub fn lemma2_cmd(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("lemma2", cfg);
    let r = lemma2(cfg.b, &[0, 1, 2], cfg.lemma2_tol)?;
    for c in &r.checks {
        summary.flag(&c.label, c.pass);
    }
    let table = slope_table("residuals", &r.checks.iter().collect::<Vec<_>>());
    summary.metric("report", &r)?;
    Ok((summary, vec![table]))
}

pub fn lemma3_cmd(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("lemma3", cfg);
    let r = lemma3(cfg.b, cfg.k, cfg.a, cfg.lambda, cfg.lambda * cfg.span, cfg.lemma3_tol)?;
    summary.flag("value", r.value.pass);
    summary.flag("gradient", r.gradient.pass);
    let table = slope_table("bounds", &[&r.value, &r.gradient]);
    summary.metric("report", &r)?;
    Ok((summary, vec![table]))
}

pub fn lemma4_cmd(cfg: &RunConfig) -> Result<Output> {
    weighted(cfg, "lemma4", &cfg.weighted(cfg.k, cfg.a, 1.5))
}

/// Weight `t^{1.8}` with the fourth-order model and `a = 1/4`.
pub fn lemma6_cmd(cfg: &RunConfig) -> Result<Output> {
    weighted(cfg, "lemma6", &cfg.weighted(4, 0.25, 1.8))
}

fn decay_table(name: &str, runs: &[&DecayReport]) -> Table {
    let mut t = Table::new(name, &["run", "t", "K_minus_1"]);
    for r in runs {
        for &(x, y) in &r.samples {
            t.push_raw(vec![r.label.clone(), fmt_float(x), fmt_float(y)]);
        }
    }
    t
}

fn record_run(summary: &mut Summary, key: &str, r: &TheoremReport) -> Result<()> {
    summary.metric(&format!("{key}_exponent"), r.decay.exponent)?;
    summary.metric(&format!("{key}_ci"), r.decay.ci_half_width)?;
    summary.metric(key, r)?;
    Ok(())
}

/// Gate `≤ −0.8` on the configured run; controls: zero forcing and the `k = 0` model.
pub fn theorem1(cfg: &RunConfig) -> Result<(Output, EvolutionTrace, GluedModelSpec)> {
    let mut summary = Summary::new("theorem1", cfg);
    let ec = cfg.evolution()?;
    let (main, trace, model) = theorem_run(&format!("k={}", ec.k), &ec, -0.8, cfg.epsilon)?;
    let (order0, _, _) = theorem_run("k=0", &EvolutionConfig { k: 0, ..ec.clone() }, -0.8, cfg.epsilon)?;
    let separation = rate_separation(&main.decay, &order0.decay, 0.5);
    summary.flag("decay_gate", main.pass);
    summary.flag("zero_forcing_exact", main.zero_control.exact);
    summary.flag("order_separation", separation.pass);
    record_run(&mut summary, "run", &main)?;
    record_run(&mut summary, "k0_control", &order0)?;
    summary.metric("order_separation", &separation)?;
    let table = decay_table("decay", &[&main.decay, &order0.decay]);
    Ok(((summary, vec![table, trace_table("trace", &trace)]), trace, model))
}

/// Gate `≤ −1.6` with `k ≥ 4`, `a = 1/k`, and separation `≥ 0.5` from the first-order run.
pub fn theorem2(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("theorem2", cfg);
    let base = cfg.evolution()?;
    let k = base.k.max(4);
    let ec = EvolutionConfig { k, a: 1.0 / k as f64, ..base.clone() };
    let (main, trace, _) = theorem_run(&format!("k={k}"), &ec, -1.6, cfg.epsilon)?;
    let (first, _, _) = theorem_run("k=1", &EvolutionConfig { k: 1, a: 0.25, ..base.clone() }, -1.6, cfg.epsilon)?;
    let (diag, _, _) = theorem_run(&format!("k={k} a=0.1"), &EvolutionConfig { a: 0.1, ..ec.clone() }, -1.6, cfg.epsilon)?;
    let separation = rate_separation(&main.decay, &first.decay, 0.5);
    summary.flag("decay_gate", main.pass);
    summary.flag("zero_forcing_exact", main.zero_control.exact);
    summary.flag("rate_separation", separation.pass);
    summary.flag("k1_fails_gate", !first.pass);
    record_run(&mut summary, "run", &main)?;
    record_run(&mut summary, "k1_control", &first)?;
    record_run(&mut summary, "diagnostic_a0.1", &diag)?;
    summary.metric("rate_separation", &separation)?;
    let table = decay_table("decay", &[&main.decay, &first.decay, &diag.decay]);
    Ok((summary, vec![table, trace_table("trace", &trace)]))
}

pub fn corollary1_cmd(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("corollary1", cfg);
    let ec = cfg.evolution()?;
    let model = ec.model()?;
    let trace = run_evolution(&ec, &model)?;
    let r = corollary1(&trace, &model, cfg.eta_max)?;
    let mut table = Table::new("deviation", &["t", "evolved", "model"]);
    for (e, m) in r.deviation.samples.iter().zip(&r.model_deviation.samples) {
        table.push([e.0, e.1, m.1]);
    }
    summary.flag("deviation_decays", r.pass);
    summary.metric("slope", r.deviation.slope)?;
    summary.metric("model_slope", r.model_deviation.slope)?;
    summary.metric("report", &r)?;
    Ok((summary, vec![table]))
}

/// Maximum-principle margins along the first- and fourth-order runs.
pub fn stability(cfg: &RunConfig) -> Result<Output> {
    let mut summary = Summary::new("stability", cfg);
    let base = cfg.evolution()?;
    let mut tables = vec![];
    for (key, ec) in [("k1", EvolutionConfig { k: 1, a: 0.25, ..base.clone() }), ("k4", EvolutionConfig { k: 4, a: 0.25, ..base.clone() })]
    {
        let model = ec.model()?;
        let trace = run_evolution(&ec, &model)?;
        let r = stability_check(&trace, cfg.epsilon);
        let mut table = Table::new(key, &["t", "sup_v", "forcing_integral", "margin"]);
        for s in &r.samples {
            table.push([s.t, s.sup_v, s.forcing_integral, s.margin]);
        }
        summary.flag(&format!("{key}_margin"), r.pass);
        summary.metric(&format!("{key}_min_margin"), r.min_margin)?;
        summary.metric(&format!("{key}_tail"), r.tail)?;
        tables.push(table);
    }
    Ok((summary, tables))
}
