//! Flat `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use krflab::experiments::{EvolutionConfig, WeightedBoundConfig};
use krflab::flow::SolverConfig;
use krflab::gluing::Background;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub b: f64,
    pub a: f64,
    pub k: usize,
    pub delta: f64,
    /// `hyperbolic` or `quartic`.
    pub mode: String,
    pub quartic_coeff: f64,
    #[serde(rename = "T")]
    pub t_start: f64,
    pub t_end: f64,
    pub nodes: usize,
    pub dt_ratio: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub samples_per_octave: usize,
    pub seed: u64,
    pub lambda: f64,
    pub span: f64,
    pub radii: usize,
    pub strata: usize,
    pub pair_budget: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub eta_max: f64,
    pub series_points: usize,
    pub lemma1_tol: f64,
    pub lemma2_tol: f64,
    pub lemma3_tol: f64,
    pub weighted_slope_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EvolutionConfig::theorem1();
        let w = WeightedBoundConfig::lemma4();
        Self {
            b: e.b,
            a: e.a,
            k: e.k,
            delta: e.delta,
            mode: "hyperbolic".into(),
            quartic_coeff: 1.0 / 6.0,
            t_start: e.t_start,
            t_end: e.t_end,
            nodes: e.solver.nodes,
            dt_ratio: e.solver.dt_ratio,
            newton_tol: e.solver.newton_tol,
            max_newton: e.solver.max_newton,
            max_halvings: e.solver.max_halvings,
            samples_per_octave: e.solver.samples_per_octave,
            seed: w.seed,
            lambda: w.lambda,
            span: w.span,
            radii: w.radii,
            strata: w.strata,
            pair_budget: w.pair_budget,
            alpha: w.alpha,
            epsilon: 1e-2,
            eta_max: 10.0,
            series_points: 200,
            lemma1_tol: 0.01,
            lemma2_tol: 0.1,
            lemma3_tol: 0.05,
            weighted_slope_tol: w.slope_tol,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {value:?}: {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "b" => self.b = parse(key, v)?,
            "a" => self.a = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "mode" => self.mode = v.to_string(),
            "quartic_coeff" => self.quartic_coeff = parse(key, v)?,
            "T" => self.t_start = parse(key, v)?,
            "t_end" => self.t_end = parse(key, v)?,
            "nodes" => self.nodes = parse(key, v)?,
            "dt_ratio" => self.dt_ratio = parse(key, v)?,
            "newton_tol" => self.newton_tol = parse(key, v)?,
            "max_newton" => self.max_newton = parse(key, v)?,
            "max_halvings" => self.max_halvings = parse(key, v)?,
            "samples_per_octave" => self.samples_per_octave = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "span" => self.span = parse(key, v)?,
            "radii" => self.radii = parse(key, v)?,
            "strata" => self.strata = parse(key, v)?,
            "pair_budget" => self.pair_budget = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "eta_max" => self.eta_max = parse(key, v)?,
            "series_points" => self.series_points = parse(key, v)?,
            "lemma1_tol" => self.lemma1_tol = parse(key, v)?,
            "lemma2_tol" => self.lemma2_tol = parse(key, v)?,
            "lemma3_tol" => self.lemma3_tol = parse(key, v)?,
            "weighted_slope_tol" => self.weighted_slope_tol = parse(key, v)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Applies every `key = value` line; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').with_context(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key, value).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in {}", path.display()))
    }

    /// `key = value` lines sorted by key, re-readable by `apply_text`.
    pub fn render(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (key, v) in value.as_object().expect("config is an object") {
            let shown = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{key} = {shown}");
        }
        out
    }

    pub fn background(&self) -> Result<Background> {
        match self.mode.as_str() {
            "hyperbolic" => Ok(Background::Hyperbolic),
            "quartic" => Ok(Background::Quartic { coeff: self.quartic_coeff }),
            other => bail!("mode must be hyperbolic or quartic, got {other:?}"),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            dt_ratio: self.dt_ratio,
            max_halvings: self.max_halvings,
            nodes: self.nodes,
            samples_per_octave: self.samples_per_octave,
        }
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        Ok(EvolutionConfig {
            b: self.b,
            a: self.a,
            k: self.k,
            delta: self.delta,
            background: self.background()?,
            t_start: self.t_start,
            t_end: self.t_end,
            solver: self.solver(),
            zero_forcing: false,
        })
    }

    pub fn weighted(&self, k: usize, a: f64, gamma: f64) -> WeightedBoundConfig {
        WeightedBoundConfig {
            b: self.b,
            k,
            a,
            delta: self.delta,
            gamma,
            alpha: self.alpha,
            lambda: self.lambda,
            span: self.span,
            radii: self.radii,
            strata: self.strata,
            pair_budget: self.pair_budget,
            seed: self.seed,
            slope_tol: self.weighted_slope_tol,
        }
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("b", self.b),
            ("delta", self.delta),
            ("T", self.t_start),
            ("dt_ratio", self.dt_ratio),
            ("newton_tol", self.newton_tol),
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("eta_max", self.eta_max),
            ("lemma1_tol", self.lemma1_tol),
            ("lemma2_tol", self.lemma2_tol),
            ("lemma3_tol", self.lemma3_tol),
            ("weighted_slope_tol", self.weighted_slope_tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{key} must be positive and finite, got {v}");
            }
        }
        if !(self.a > 0.0 && self.a < 0.5) {
            bail!("a must lie in (0, 1/2), got {}", self.a);
        }
        if !(self.t_end > self.t_start) {
            bail!("t_end must exceed T");
        }
        if !(self.span > 1.0) {
            bail!("span must exceed 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            bail!("alpha must lie in (0, 1/2), got {}", self.alpha);
        }
        for (key, v, min) in [
            ("radii", self.radii, 2),
            ("strata", self.strata, 2),
            ("pair_budget", self.pair_budget, 1),
            ("series_points", self.series_points, 2),
        ] {
            if v < min {
                bail!("{key} must be at least {min}, got {v}");
            }
        }
        if self.background()? == Background::Hyperbolic && self.delta >= 3f64.sqrt() {
            bail!("delta must be below sqrt 3 in hyperbolic mode, got {}", self.delta);
        }
        self.solver().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig { b: 1.25, mode: "quartic".into(), seed: 7, ..Default::default() };
        c.dt_ratio = 3e-4;
        let mut back = RunConfig::default();
        back.apply_text(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_errors() {
        let mut c = RunConfig::default();
        c.apply_text("# header\n\nk = 4   # order\n a=0.25\n").unwrap();
        assert_eq!((c.k, c.a), (4, 0.25));
        assert!(c.apply_text("nonsense").is_err());
        assert!(c.apply_text("zzz = 1").is_err());
        assert!(c.apply_text("k = four").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        for bad in ["b = -1", "a = 0.6", "t_end = 10", "mode = flat", "nodes = 2", "pair_budget = 0"] {
            let mut c = RunConfig::default();
            c.apply_text(bad).unwrap();
            assert!(c.validate().is_err(), "{bad}");
        }
    }
}
