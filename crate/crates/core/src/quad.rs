//! Gauss–Legendre quadrature in `log t`, one panel per dyadic octave.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per octave used when none is given. Twice the usual 16: the
/// squared integrands of the norm functionals need it to reach 1e-8 under
/// doubling.
pub const DEFAULT_POINTS_PER_OCTAVE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// `dt/t`
    Log,
    /// `dt/(t(t+1))`
    LogDamped,
}

/// Nodes and weights approximating `∫_{t_min}^{t_max} g(t) dμ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_octave: usize,
    pub measure: Measure,
    pub breaks: Option<(f64, f64)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre pairs mapped to `[0, 1]`.
pub fn gl_unit(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("need at least one node"));
    let mut v: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

impl TimeQuadrature {
    /// Panels start at `t_min` and advance by one octave; the last one is cut at `t_max`.
    pub fn new(t_min: f64, t_max: f64, points_per_octave: usize, measure: Measure) -> Result<Self> {
        Self::build(t_min, t_max, points_per_octave, measure, None)
    }

    /// As [`Self::new`], with panels also broken at the multiples of `step`
    /// below `upto`, where a cone `|m - n| < t/step` changes its size.
    pub fn with_breaks(&self, step: f64, upto: f64) -> Result<Self> {
        if !(step > 0.0 && upto.is_finite()) {
            return Err(Error::param("bad break specification"));
        }
        Self::build(self.t_min, self.t_max, self.points_per_octave, self.measure, Some((step, upto)))
    }

    fn build(
        t_min: f64,
        t_max: f64,
        points_per_octave: usize,
        measure: Measure,
        breaks: Option<(f64, f64)>,
    ) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::param(format!("bad time range [{t_min}, {t_max}]")));
        }
        if points_per_octave == 0 {
            return Err(Error::param("need at least one node per octave"));
        }
        let (u0, u1) = (t_min.log2(), t_max.log2());
        let mut panels = vec![];
        let mut a = u0;
        while a < u1 - 1e-12 {
            let b = (a + 1.0).min(u1);
            panels.push((a.exp2(), b.exp2()));
            a = b;
        }
        if let Some((step, upto)) = breaks {
            let mut split = vec![];
            for (a, b) in panels {
                let mut x = a;
                let mut k = (a / step).floor() + 1.0;
                while k * step < b.min(upto) {
                    split.push((x, k * step));
                    x = k * step;
                    k += 1.0;
                }
                split.push((x, b));
            }
            panels = split;
        }
        let min_nodes = (points_per_octave / 8).max(2);
        let mut rules: std::collections::HashMap<usize, Vec<(f64, f64)>> = Default::default();
        let mut nodes = vec![];
        let mut weights = vec![];
        for (a, b) in panels {
            let len = (b / a).log2();
            let n = ((points_per_octave as f64 * len).ceil() as usize)
                .max(min_nodes)
                .min(points_per_octave);
            let rule = rules.entry(n).or_insert_with(|| gl_unit(n));
            let (la, lb) = (a.ln(), b.ln());
            for &(x, w) in rule.iter() {
                let t = (la + (lb - la) * x).exp();
                let mut wt = (lb - la) * w;
                if measure == Measure::LogDamped {
                    wt /= t + 1.0;
                }
                nodes.push(t);
                weights.push(wt);
            }
        }
        Ok(TimeQuadrature {
            t_min,
            t_max,
            points_per_octave,
            measure,
            breaks,
            nodes,
            weights,
        })
    }

    /// `[2^lo, 2^hi]` with octave-aligned panels.
    pub fn octaves(lo: i32, hi: i32, points_per_octave: usize, measure: Measure) -> Result<Self> {
        Self::new((lo as f64).exp2(), (hi as f64).exp2(), points_per_octave, measure)
    }

    /// Default for the heat-type square functions, which live at all `t > 0`.
    pub fn area_default() -> Self {
        Self::octaves(-12, 28, DEFAULT_POINTS_PER_OCTAVE, Measure::LogDamped).unwrap()
    }

    /// Default for `ψ(t√Δ)`-type integrands, which vanish for `t < 1`.
    pub fn psi_default() -> Self {
        Self::octaves(0, 28, DEFAULT_POINTS_PER_OCTAVE, Measure::LogDamped).unwrap()
    }

    pub fn with_measure(&self, measure: Measure) -> Self {
        Self::build(self.t_min, self.t_max, self.points_per_octave, measure, self.breaks).unwrap()
    }

    /// Same range and breaks, twice the nodes per octave.
    pub fn doubled(&self) -> Self {
        Self::build(self.t_min, self.t_max, 2 * self.points_per_octave, self.measure, self.breaks)
            .unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        crate::sum::ksum(self.iter().map(|(t, w)| w * g(t)))
    }
}
