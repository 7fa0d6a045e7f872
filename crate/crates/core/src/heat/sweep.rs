//! Empirical constants for the heat-kernel decay estimates.
//!
//! Each sweep evaluates `|quantity| / bound_shape` on a box of `(t, n)` and
//! reports the maximum. Rerunning on a refined `t` grid gives the stability
//! flag.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fft_analyze, lambda_of_theta, bin_theta};

use super::bessel::scaled_bessel_i;

pub const STABILITY_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepKind {
    /// `|h_t(n)| ≤ C t^{-1/2} (1 + |n|/√t)^{-2N-1}` for `n = 0` or `|n| > N`.
    Lem1Ht { order: u32 },
    /// `|∂_t^ℓ h_t(n)| ≤ C t^{-(ℓ+1/2)} (1 + |n|/√t)^{-ℓ}`.
    Lem2Htk { ell: u32 },
    /// `|D∂^ℓ h| + |D*∂^ℓ h| ≤ C t^{-(ℓ+1)} (1 + |n|/√t)^{-ℓ}`.
    LemHtkDiff { ell: u32 },
    /// `|𝔇^k ∂^{kℓ} h| ≤ C t^{-(kℓ+(k+1)/2)} (1 + |n|/√t)^{-ℓ}`, `𝔇 ∈ {D, D*}`.
    LemHtkHigher { k: u32, ell: u32 },
    /// Complex time `z = r e^{iα}`, `r ≥ 1`:
    /// `|∂_z^ℓ h_z(n)| ≤ C (r cos α)^{-(ℓ+1/2)} (1 + |n| cos α / √(r cos α))^{-N}`.
    Lem1Htk { ell: u32, order: u32, alpha: f64 },
}

impl SweepKind {
    pub fn label(&self) -> String {
        match *self {
            SweepKind::Lem1Ht { order } => format!("lem1-ht(N={order})"),
            SweepKind::Lem2Htk { ell } => format!("lem2-htk(l={ell})"),
            SweepKind::LemHtkDiff { ell } => format!("lem-htk-diff(l={ell})"),
            SweepKind::LemHtkHigher { k, ell } => format!("lem-htk-higher(k={k},l={ell})"),
            SweepKind::Lem1Htk { ell, order, alpha } => {
                format!("lem1-htk(l={ell},N={order},alpha={alpha})")
            }
        }
    }

    pub fn bound_label(&self) -> String {
        match *self {
            SweepKind::Lem1Ht { order } => format!("t^-0.5*(1+|n|/sqrt t)^-{}", 2 * order + 1),
            SweepKind::Lem2Htk { ell } => format!("t^-{}*(1+|n|/sqrt t)^-{ell}", ell as f64 + 0.5),
            SweepKind::LemHtkDiff { ell } => format!("t^-{}*(1+|n|/sqrt t)^-{ell}", ell + 1),
            SweepKind::LemHtkHigher { k, ell } => format!(
                "t^-{}*(1+|n|/sqrt t)^-{ell}",
                (k * ell) as f64 + (k + 1) as f64 / 2.0
            ),
            SweepKind::Lem1Htk { ell, order, .. } => format!(
                "(r cos a)^-{}*(1+|n| cos a/sqrt(r cos a))^-{order}",
                ell as f64 + 0.5
            ),
        }
    }

    fn is_complex(&self) -> bool {
        matches!(self, SweepKind::Lem1Htk { .. })
    }

    fn admits(&self, n: i64) -> bool {
        match *self {
            SweepKind::Lem1Ht { order } => n == 0 || n.unsigned_abs() > order as u64,
            _ => true,
        }
    }
}

/// Box of the sweep: log-spaced `t` (or `|z|`) and an `n` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub n_min: i64,
    pub n_max: i64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            t_min: 1e-2,
            t_max: 1e2,
            t_steps: 64,
            n_min: -200,
            n_max: 200,
        }
    }
}

impl SweepParams {
    /// Default box for complex time, where the estimate needs `|z| ≥ 1`.
    pub fn complex_default() -> Self {
        SweepParams {
            t_min: 1.0,
            ..Default::default()
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        log_grid(self.t_min, self.t_max, self.t_steps)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max >= self.t_min && self.t_max.is_finite()) {
            return Err(Error::param("need 0 < tmin <= tmax"));
        }
        if self.t_steps == 0 || self.n_min > self.n_max {
            return Err(Error::param("sweep grid is empty"));
        }
        Ok(())
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|i| (a + (b - a) * i as f64 / (steps - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub n: i64,
    pub quantity: f64,
    pub bound_shape: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub label: String,
    pub bound: String,
    pub params: SweepParams,
    pub points: Vec<SweepPoint>,
    /// Largest ratio on the grid.
    pub constant: f64,
    pub argmax_t: f64,
    pub argmax_n: i64,
    /// Relative change of the constant on the refined `t` grid.
    pub refinement_delta: f64,
    pub stable: bool,
    /// Points dropped because the ratio was not finite.
    pub excluded: usize,
}

/// Integer-indexed profile `v[n - lo]` on `[lo, hi]`.
struct Profile {
    lo: i64,
    v: Vec<f64>,
}

impl Profile {
    fn get(&self, n: i64) -> f64 {
        self.v[(n - self.lo) as usize]
    }

    fn hi(&self) -> i64 {
        self.lo + self.v.len() as i64 - 1
    }

    fn neg_laplacian(&self) -> Profile {
        let v = self.v.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
        Profile { lo: self.lo + 1, v }
    }

    fn forward(&self) -> Profile {
        let v = self.v.windows(2).map(|w| w[1] - w[0]).collect();
        Profile { lo: self.lo, v }
    }

    fn backward(&self) -> Profile {
        let v = self.v.windows(2).map(|w| w[1] - w[0]).collect();
        Profile { lo: self.lo + 1, v }
    }
}

fn real_quantity(kind: SweepKind, t: f64, n_lo: i64, n_hi: i64) -> Vec<(i64, f64)> {
    let pad: i64 = match kind {
        SweepKind::Lem1Ht { .. } => 0,
        SweepKind::Lem2Htk { ell } => ell as i64,
        SweepKind::LemHtkDiff { ell } => ell as i64 + 1,
        SweepKind::LemHtkHigher { k, ell } => (k * ell + k) as i64,
        SweepKind::Lem1Htk { .. } => unreachable!(),
    };
    let reach = n_lo.abs().max(n_hi.abs()) + pad + 1;
    let half = scaled_bessel_i(2.0 * t, reach as usize);
    let h = Profile {
        lo: -reach,
        v: (-reach..=reach).map(|n| half[n.unsigned_abs() as usize]).collect(),
    };
    let derive = |p: &Profile, times: u32| p.neg_laplacian_pow(times);
    let q: Box<dyn Fn(i64) -> f64> = match kind {
        SweepKind::Lem1Ht { .. } => Box::new(move |n| h.get(n).abs()),
        SweepKind::Lem2Htk { ell } => {
            let g = derive(&h, ell);
            Box::new(move |n| g.get(n).abs())
        }
        SweepKind::LemHtkDiff { ell } => {
            let g = derive(&h, ell);
            let (d, ds) = (g.forward(), g.backward());
            Box::new(move |n| d.get(n).abs() + ds.get(n).abs())
        }
        SweepKind::LemHtkHigher { k, ell } => {
            let g = derive(&h, k * ell);
            let (mut d, mut ds) = (g.forward(), g.backward());
            for _ in 1..k {
                d = d.forward();
                ds = ds.backward();
            }
            Box::new(move |n| d.get(n).abs().max(ds.get(n).abs()))
        }
        SweepKind::Lem1Htk { .. } => unreachable!(),
    };
    (n_lo..=n_hi).map(|n| (n, q(n))).collect()
}

impl Profile {
    fn neg_laplacian_pow(&self, times: u32) -> Profile {
        let mut p = Profile {
            lo: self.lo,
            v: self.v.clone(),
        };
        for _ in 0..times {
            p = p.neg_laplacian();
        }
        debug_assert!(p.hi() >= p.lo);
        p
    }
}

fn complex_quantity(ell: u32, r: f64, alpha: f64, n_lo: i64, n_hi: i64) -> Vec<(i64, f64)> {
    let z = Complex64::from_polar(r, alpha);
    let reach = n_lo.abs().max(n_hi.abs()) as f64;
    let need = 2.0 * (reach + 4.0 * r + 13.0 * r.sqrt() + 40.0);
    let k = (need.ceil() as usize).next_power_of_two().max(1 << 13);
    let s = if ell % 2 == 0 { 1.0 } else { -1.0 };
    let mut buf: Vec<Complex64> = (0..k)
        .map(|m| {
            let x = lambda_of_theta(bin_theta(m, k));
            s * x.powi(2 * ell as i32) * (-z * x * x).exp()
        })
        .collect();
    fft_analyze(&mut buf);
    (n_lo..=n_hi)
        .map(|n| {
            let a = buf[n.rem_euclid(k as i64) as usize];
            let b = buf[(-n).rem_euclid(k as i64) as usize];
            (n, (0.5 * (a + b)).norm())
        })
        .collect()
}

fn bound_shape(kind: SweepKind, t: f64, n: i64) -> f64 {
    let na = n.unsigned_abs() as f64;
    let x = 1.0 + na / t.sqrt();
    match kind {
        SweepKind::Lem1Ht { order } => t.powf(-0.5) * x.powi(-(2 * order as i32 + 1)),
        SweepKind::Lem2Htk { ell } => t.powf(-(ell as f64 + 0.5)) * x.powi(-(ell as i32)),
        SweepKind::LemHtkDiff { ell } => t.powf(-(ell as f64 + 1.0)) * x.powi(-(ell as i32)),
        SweepKind::LemHtkHigher { k, ell } => {
            t.powf(-((k * ell) as f64 + (k + 1) as f64 / 2.0)) * x.powi(-(ell as i32))
        }
        SweepKind::Lem1Htk { ell, order, alpha } => {
            let rc = t * alpha.cos();
            let y = 1.0 + na * alpha.cos() / rc.sqrt();
            rc.powf(-(ell as f64 + 0.5)) * y.powi(-(order as i32))
        }
    }
}

fn sweep_points(kind: SweepKind, params: &SweepParams, t_grid: &[f64]) -> Vec<SweepPoint> {
    t_grid
        .par_iter()
        .flat_map_iter(|&t| {
            let q = match kind {
                SweepKind::Lem1Htk { ell, alpha, .. } => {
                    complex_quantity(ell, t, alpha, params.n_min, params.n_max)
                }
                _ => real_quantity(kind, t, params.n_min, params.n_max),
            };
            q.into_iter()
                .filter(move |&(n, _)| kind.admits(n))
                .map(move |(n, quantity)| {
                    let b = bound_shape(kind, t, n);
                    SweepPoint {
                        t,
                        n,
                        quantity,
                        bound_shape: b,
                        ratio: quantity / b,
                    }
                })
        })
        .collect()
}

fn max_ratio(points: &[SweepPoint]) -> (f64, usize, Option<SweepPoint>) {
    let mut best: Option<SweepPoint> = None;
    let mut excluded = 0;
    for p in points {
        if !p.ratio.is_finite() || p.ratio < 0.0 {
            excluded += 1;
            continue;
        }
        if best.map_or(true, |b| p.ratio > b.ratio) {
            best = Some(*p);
        }
    }
    (best.map_or(0.0, |b| b.ratio), excluded, best)
}

/// Runs the sweep on `params` and on the refined grid with `2·steps - 1` points.
pub fn decay_sweep(kind: SweepKind, params: &SweepParams) -> Result<SweepReport> {
    params.validate()?;
    if let SweepKind::Lem1Htk { alpha, .. } = kind {
        if !(alpha.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param("complex-time sweep needs |arg z| < π/2"));
        }
        if params.t_min < 1.0 {
            return Err(Error::param("complex-time sweep needs |z| >= 1"));
        }
    }
    debug_assert!(!kind.is_complex() || params.t_min >= 1.0);
    let coarse_t = params.t_grid();
    let points = sweep_points(kind, params, &coarse_t);
    let (constant, excluded, best) = max_ratio(&points);
    let fine_t = log_grid(params.t_min, params.t_max, 2 * params.t_steps - 1);
    let fine = sweep_points(kind, params, &fine_t);
    let (fine_constant, _, _) = max_ratio(&fine);
    let refinement_delta = if fine_constant > 0.0 {
        (fine_constant - constant).abs() / fine_constant
    } else {
        0.0
    };
    let best = best.unwrap_or(SweepPoint {
        t: f64::NAN,
        n: 0,
        quantity: 0.0,
        bound_shape: 0.0,
        ratio: 0.0,
    });
    Ok(SweepReport {
        kind,
        label: kind.label(),
        bound: kind.bound_label(),
        params: *params,
        points,
        constant,
        argmax_t: best.t,
        argmax_n: best.n,
        refinement_delta,
        stable: refinement_delta <= STABILITY_THRESHOLD,
        excluded,
    })
}
