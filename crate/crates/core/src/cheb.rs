//! Piecewise Chebyshev-Lobatto tables with barycentric evaluation.
//!
//! A table covers `[0, x_max]` with a first panel `[0, h]` followed by panels
//! whose lengths double, so that a smooth function with polynomial growth is
//! resolved to near machine precision relative to its local size.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct PanelTable {
    breaks: Vec<f64>,
    degree: usize,
    /// Lobatto nodes per panel, ascending.
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl PanelTable {
    pub fn dyadic(first: f64, x_max: f64, degree: usize) -> Self {
        assert!(first > 0.0 && x_max > 0.0 && degree >= 2);
        let mut breaks = vec![0.0, first];
        while *breaks.last().unwrap() < x_max {
            let last = *breaks.last().unwrap();
            breaks.push(2.0 * last);
        }
        let n = degree;
        let weights: Vec<f64> = (0..=n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let nodes = breaks
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                // ascending order: x_k = mid - half*cos(k pi / n)
                (0..=n)
                    .map(|k| {
                        if k == 0 {
                            a
                        } else if k == n {
                            b
                        } else {
                            0.5 * (a + b) - 0.5 * (b - a) * (k as f64 * PI / n as f64).cos()
                        }
                    })
                    .collect()
            })
            .collect();
        Self { breaks, degree, nodes, weights }
    }

    pub fn x_max(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn panel_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn panel_nodes(&self, p: usize) -> &[f64] {
        &self.nodes[p]
    }

    /// All distinct nodes in ascending order (shared endpoints appear once).
    pub fn all_nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len() * self.degree + 1);
        for (p, ns) in self.nodes.iter().enumerate() {
            let skip = usize::from(p > 0);
            out.extend_from_slice(&ns[skip..]);
        }
        out
    }

    /// Splits a vector indexed like [`all_nodes`](Self::all_nodes) into per-panel values.
    pub fn split(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        let n = self.degree;
        (0..self.nodes.len()).map(|p| flat[p * n..=p * n + n].to_vec()).collect()
    }

    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(0.0..=self.x_max()).contains(&x) {
            return None;
        }
        let idx = self.breaks.partition_point(|&b| b <= x);
        Some(idx.saturating_sub(1).min(self.nodes.len() - 1))
    }

    /// Barycentric interpolant of `values` (per-panel layout) at `x`.
    pub fn eval(&self, values: &[Vec<f64>], x: f64) -> Option<f64> {
        let p = self.locate(x)?;
        Some(bary(&self.nodes[p], &self.weights, &values[p], x))
    }

    /// First derivative of the interpolant.
    pub fn eval_deriv(&self, values: &[Vec<f64>], x: f64) -> Option<f64> {
        let p = self.locate(x)?;
        Some(bary_deriv(&self.nodes[p], &self.weights, &values[p], x))
    }
}

fn bary(xs: &[f64], ws: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..xs.len() {
        let d = x - xs[k];
        if d == 0.0 {
            return ys[k];
        }
        let c = ws[k] / d;
        num += c * ys[k];
        den += c;
    }
    num / den
}

fn bary_deriv(xs: &[f64], ws: &[f64], ys: &[f64], x: f64) -> f64 {
    if let Some(j) = xs.iter().position(|&xk| xk == x) {
        // differentiation-matrix row j
        let mut s = 0.0;
        for k in 0..xs.len() {
            if k != j {
                s += (ws[k] / ws[j]) * (ys[k] - ys[j]) / (xs[k] - xs[j]);
            }
        }
        return -s;
    }
    let p = bary(xs, ws, ys, x);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..xs.len() {
        let d = x - xs[k];
        let c = ws[k] / d;
        num += c * (p - ys[k]) / d;
        den += c;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_growing_smooth_function() {
        let table = PanelTable::dyadic(1.0 / 64.0, 1000.0, 24);
        let f = |x: f64| x.powi(3) / 27.0 + (1.0 + x * x).ln() + (-x).exp();
        let df = |x: f64| x * x / 9.0 + 2.0 * x / (1.0 + x * x) - (-x).exp();
        let vals = table.split(&table.all_nodes().iter().map(|&x| f(x)).collect::<Vec<_>>());
        for &x in &[0.0, 1e-4, 0.013, 0.5, 3.3, 77.7, 512.0, 999.0] {
            let v = table.eval(&vals, x).unwrap();
            assert!((v - f(x)).abs() <= 1e-13 * f(x).abs().max(1.0), "value at {x}");
            let d = table.eval_deriv(&vals, x).unwrap();
            assert!((d - df(x)).abs() <= 1e-9 * df(x).abs().max(1.0), "deriv at {x}: {d} vs {}", df(x));
        }
        assert!(table.eval(&vals, 1e6).is_none());
    }

    #[test]
    fn derivative_at_nodes() {
        let table = PanelTable::dyadic(0.5, 4.0, 16);
        let vals = table.split(&table.all_nodes().iter().map(|&x| x.sin()).collect::<Vec<_>>());
        for &x in table.panel_nodes(2) {
            let d = table.eval_deriv(&vals, x).unwrap();
            assert!((d - x.cos()).abs() < 1e-10, "{x}: {d}");
        }
    }
}
