//! Smooth dyadic partition of unity and Littlewood–Paley blocks.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{gl_unit, Measure, TimeQuadrature};
use crate::seq::Sequence;
use crate::spectral::{apply_symbol, Applied, Circle, Symbol, DEFAULT_HALFWIDTH};
use crate::sum::ksum;

pub const DEFAULT_JMIN: i32 = -25;
pub const DEFAULT_STEEPNESS: f64 = 2.0;
/// Gauss–Legendre nodes per octave in the Calderón time integral.
pub const CALDERON_POINTS_PER_OCTAVE: usize = 16;

const TABLE_POINTS: usize = 4097;

/// `e^{-a/x}` for `x > 0`, zero otherwise.
fn flat(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-a / x).exp()
    }
}

/// Smooth step from 1 (`x ≤ 0`) to 0 (`x ≥ 1`).
fn step(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let (p, q) = (flat(a, 1.0 - x), flat(a, x));
        p / (p + q)
    }
}

/// `ψ(λ) = η(λ) - η(2λ)` with `η = 1` on `[0, 4]` and `η = 0` on `[8, ∞)`.
///
/// The step is taken in `log₂ λ`, so `Σ_j ψ(2^{-j}λ)` telescopes to one.
#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    pub steepness: f64,
    #[serde(skip)]
    pub psi: Symbol,
    /// `(λ, ψ(λ))` on a uniform grid of `[2, 8]`.
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

/// Builds the partition with the given steepness of the log-scale step.
pub fn make_partition(steepness: f64) -> Result<Partition> {
    if !(steepness > 0.0 && steepness.is_finite()) {
        return Err(Error::param(format!("steepness must be positive, got {steepness}")));
    }
    let a = steepness;
    let psi = Symbol::real(format!("psi:{a}"), move |x| eta(a, x) - eta(a, 2.0 * x))
        .with_support(2.0, 8.0);
    let samples = (0..TABLE_POINTS)
        .map(|i| {
            let x = 2.0 + 6.0 * i as f64 / (TABLE_POINTS - 1) as f64;
            (x, psi.eval(x).re)
        })
        .collect();
    Ok(Partition {
        steepness,
        psi,
        samples,
    })
}

fn eta(a: f64, lambda: f64) -> f64 {
    if lambda <= 4.0 {
        1.0
    } else if lambda >= 8.0 {
        0.0
    } else {
        step(a, lambda.log2() - 2.0)
    }
}

impl Default for Partition {
    fn default() -> Self {
        make_partition(DEFAULT_STEEPNESS).unwrap()
    }
}

impl Partition {
    pub fn eta(&self, lambda: f64) -> f64 {
        eta(self.steepness, lambda)
    }

    pub fn psi(&self, lambda: f64) -> f64 {
        eta(self.steepness, lambda) - eta(self.steepness, 2.0 * lambda)
    }

    /// `ψ_j(λ) = ψ(2^{-j} λ)`.
    pub fn psi_j(&self, j: i32, lambda: f64) -> f64 {
        self.psi((-j as f64).exp2() * lambda)
    }

    /// `Σ_{j=jmin}^{jmax} ψ_j(λ)`, summed term by term.
    pub fn partial_sum(&self, jmin: i32, jmax: i32, lambda: f64) -> f64 {
        (jmin..=jmax).map(|j| self.psi_j(j, lambda)).sum()
    }

    /// `η(2^{-jmax}λ) - η(2^{1-jmin}λ)`, the closed form of [`Self::partial_sum`].
    pub fn telescoped(&self, jmin: i32, jmax: i32, lambda: f64) -> f64 {
        self.eta((-jmax as f64).exp2() * lambda) - self.eta((1.0 - jmin as f64).exp2() * lambda)
    }

    /// The block as a symbol of `√Δ`.
    pub fn block_symbol(&self, j: i32) -> Symbol {
        self.psi.dilate((-j as f64).exp2())
    }

    /// Frame bounds `min`/`max` of `Σ_j ψ_j(λ)²` over `λ ∈ (0, 2]`.
    ///
    /// The sum is invariant under `λ → 2λ`, so one octave is scanned.
    pub fn frame_bounds(&self) -> (f64, f64) {
        let n = 200_000;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..=n {
            let lambda = (1.0 + i as f64 / n as f64).min(2.0);
            let s: f64 = (-4..=0).map(|j| self.psi_j(j, lambda).powi(2)).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// `∫_0^∞ ψ(s) ds/s` by Gauss–Legendre in `log₂ s` on the two octaves of the support.
    pub fn psi_integral(&self, points_per_octave: usize) -> f64 {
        let rule = gl_unit(points_per_octave);
        let mut s = 0.0;
        for oct in 1..3 {
            for &(x, w) in &rule {
                s += w * self.psi((oct as f64 + x).exp2());
            }
        }
        s * LN_2
    }

    /// `c_ψ = [∫ ψ(s) ds/s]^{-1}`.
    pub fn c_psi(&self) -> f64 {
        1.0 / self.psi_integral(CALDERON_POINTS_PER_OCTAVE)
    }
}

/// `ψ_j(√Δ) f` on the support of `f` widened by `halfwidth`.
pub fn lp_block_with(p: &Partition, j: i32, f: &Sequence, halfwidth: usize) -> Result<Applied> {
    if j >= 1 {
        return Ok(Applied {
            seq: Sequence::zero(),
            tail: 0.0,
            grid_size: 0,
        });
    }
    apply_symbol(&p.block_symbol(j), f, halfwidth)
}

/// `ψ_j(√Δ) f`; zero for `j ≥ 1` since the spectrum of `√Δ` is `[0, 2]`.
pub fn lp_block(p: &Partition, j: i32, f: &Sequence) -> Result<Applied> {
    lp_block_with(p, j, f, DEFAULT_HALFWIDTH)
}

/// Block tables `ψ_j(λ_m)` on the bins of a circle.
pub fn block_table(p: &Partition, j: i32, lambdas: &[f64]) -> Vec<Complex64> {
    lambdas
        .iter()
        .map(|&l| Complex64::new(if j >= 1 { 0.0 } else { p.psi_j(j, l) }, 0.0))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub seq: Sequence,
    /// `‖f - Σ‖₂ / ‖f‖₂` on ℤ.
    pub residual: f64,
    /// `∫ |1 - Σ_j ψ_j|² |𝓕f|² dθ/2π`, the absolute missing energy.
    pub missing_energy: f64,
}

/// `Σ_{j=jmin}^0 ψ_j(√Δ) f` with its exact relative residual.
///
/// The sum is returned on the support of `f` widened by the default
/// half-width. The residual is computed on ℤ by Parseval: `1 - Σ_j ψ_j`
/// equals `η(2^{1-jmin}λ)`, which vanishes outside `|θ| < θ_c`, and that
/// band is integrated by Gauss–Legendre against the trigonometric
/// polynomial `𝓕f`.
pub fn calderon_reconstruct(p: &Partition, f: &Sequence, jmin: i32) -> Result<Reconstruction> {
    if jmin > 0 {
        return Err(Error::param(format!("jmin must be <= 0, got {jmin}")));
    }
    if f.is_zero() {
        return Ok(Reconstruction {
            seq: Sequence::zero(),
            residual: 0.0,
            missing_energy: 0.0,
        });
    }
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    let lambdas = circle.lambdas();
    let tables: Vec<Vec<Complex64>> = (jmin..=0)
        .into_par_iter()
        .map(|j| block_table(p, j, &lambdas))
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); circle.size];
    for t in &tables {
        for (a, b) in total.iter_mut().zip(t) {
            *a += b;
        }
    }
    let spec = circle.spectrum(&circle.embed(f));
    let out = circle.synthesize_with(&spec, &total);
    let (lo, hi) = f.support().unwrap();
    let hw = DEFAULT_HALFWIDTH as i64;
    let seq = Sequence::tabulate(lo - hw, hi + hw, |n| out[circle.slot(n)]);
    let missing = low_band_energy(f, |lambda| 1.0 - p.partial_sum(jmin, 0, lambda), band_edge(jmin));
    let norm2 = ksum(f.values().iter().map(|v| v.norm_sqr()));
    Ok(Reconstruction {
        seq,
        residual: (missing / norm2).sqrt(),
        missing_energy: missing,
    })
}

/// `θ_c` with `2^{1-jmin} · 2 sin(θ_c/2) = 8`.
fn band_edge(jmin: i32) -> f64 {
    let lam = 8.0 * (jmin as f64 - 1.0).exp2();
    if lam >= 2.0 {
        std::f64::consts::PI
    } else {
        2.0 * (lam / 2.0).asin()
    }
}

/// `(1/2π) ∫_{-θc}^{θc} |w(λ(θ))|² |𝓕f(θ)|² dθ` by composite Gauss–Legendre.
pub(crate) fn low_band_energy(f: &Sequence, w: impl Fn(f64) -> f64 + Sync, theta_c: f64) -> f64 {
    let (lo, hi) = f.support().unwrap_or((0, 0));
    let centre = (lo + hi) / 2;
    let width = (hi - lo + 1) as f64;
    // Panels short enough to resolve both the weight and the trigonometric polynomial.
    let panels = (8.0 + width * theta_c / 2.0).ceil() as usize;
    let rule = gl_unit(24);
    let h = 2.0 * theta_c / panels as f64;
    let parts: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|i| {
            let a = -theta_c + h * i as f64;
            ksum(rule.iter().map(|&(x, wt)| {
                let theta = a + h * x;
                let lambda = crate::spectral::lambda_of_theta(theta);
                let ft: Complex64 = f
                    .iter()
                    .map(|(n, v)| v * Complex64::from_polar(1.0, (n - centre) as f64 * theta))
                    .sum();
                wt * h * w(lambda).powi(2) * ft.norm_sqr()
            }))
        })
        .collect();
    ksum(parts) / (2.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone)]
pub struct ContinuousReconstruction {
    pub seq: Sequence,
    pub c_psi: f64,
    /// Relative ℓ² change when the nodes per octave are doubled.
    pub refinement_delta: f64,
}

/// Octave-aligned quadrature covering `t ∈ [1, 2^{-jmin}]`.
pub fn calderon_quadrature(jmin: i32, points_per_octave: usize) -> TimeQuadrature {
    TimeQuadrature::octaves(0, (-jmin).max(1), points_per_octave, Measure::Log).unwrap()
}

fn continuous_on_circle(
    p: &Partition,
    circle: &Circle,
    spec: &[Complex64],
    quad: &TimeQuadrature,
    c_psi: f64,
) -> Vec<Complex64> {
    let lambdas = circle.lambdas();
    let table: Vec<Complex64> = lambdas
        .par_iter()
        .map(|&l| {
            let s = ksum(quad.iter().map(|(t, w)| w * p.psi(t * l)));
            Complex64::new(c_psi * s, 0.0)
        })
        .collect();
    circle.synthesize_with(spec, &table)
}

/// `c_ψ ∫ ψ(t√Δ) f dt/t` with the given quadrature.
pub fn continuous_calderon(
    p: &Partition,
    f: &Sequence,
    quad: &TimeQuadrature,
) -> Result<ContinuousReconstruction> {
    if quad.measure != Measure::Log {
        return Err(Error::param("Calderón integral uses the measure dt/t"));
    }
    if quad.t_min > 1.0 {
        return Err(Error::param("quadrature must start at t <= 1"));
    }
    let c_psi = p.c_psi();
    if f.is_zero() {
        return Ok(ContinuousReconstruction {
            seq: Sequence::zero(),
            c_psi,
            refinement_delta: 0.0,
        });
    }
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    let spec = circle.spectrum(&circle.embed(f));
    let a = continuous_on_circle(p, &circle, &spec, quad, c_psi);
    let b = continuous_on_circle(p, &circle, &spec, &quad.doubled(), c_psi);
    let diff = ksum(a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr())).sqrt();
    let norm = ksum(a.iter().map(|x| x.norm_sqr())).sqrt();
    let (lo, hi) = f.support().unwrap();
    let hw = DEFAULT_HALFWIDTH as i64;
    Ok(ContinuousReconstruction {
        seq: Sequence::tabulate(lo - hw, hi + hw, |n| a[circle.slot(n)]),
        c_psi,
        refinement_delta: if norm > 0.0 { diff / norm } else { 0.0 },
    })
}
