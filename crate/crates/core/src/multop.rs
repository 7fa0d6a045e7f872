//! Spectral multipliers `F(√Δ)`, their Sobolev condition, weighted kernel
//! bounds and the Riesz transforms `DΔ^{-1/2}`, `D*Δ^{-1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Signal;
use crate::quad::{Measure, TimeQuadrature};
use crate::seq::Sequence;
use crate::spaces::SpaceSpec;
use crate::spectral::{
    apply_multiplier_windowed, bin_theta, fft_analyze, fft_synth, synthesize_kernel, Applied,
    Circle, Multiplier, SpectralGrid, Symbol, DEFAULT_HALFWIDTH,
};

pub const SUBORDINATION_T_LO: f64 = 1e-4;
pub const SUBORDINATION_T_HI: f64 = 1e8;
pub const SUBORDINATION_POINTS_PER_OCTAVE: usize = 16;
/// Relative `|𝓕f(0)| / ‖f‖₁` above which an input counts as having a mean.
pub const MEAN_ZERO_TOL: f64 = 1e-8;
pub const CROSS_ROUTE_TOL: f64 = 1e-6;

/// Samples of `g` on its interval in the Sobolev norm.
pub const SOBOLEV_SAMPLES: usize = 2048;
const SOBOLEV_PADDING: usize = 8;

/// `F(√Δ)f` on `[lo - hw, hi + hw]`. With `f0` given, `F(0)` is replaced by it.
pub fn apply_multiplier(f_sym: &Symbol, f: &Sequence, f0: Option<Complex64>, hw: usize) -> Result<Applied> {
    match f0 {
        None => apply_multiplier_windowed(f_sym, f, hw),
        Some(v) => {
            let g = f_sym.clone();
            let s = Symbol::new(f_sym.label(), move |x| if x == 0.0 { v } else { g.eval(x) });
            apply_multiplier_windowed(&s, f, hw)
        }
    }
}

fn lr_norm(v: &[Complex64], h: f64, r: f64) -> f64 {
    if r.is_infinite() {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        (h * v.iter().map(|z| z.norm().powf(r)).sum::<f64>()).powf(1.0 / r)
    }
}

fn sobolev_at(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, s: f64, r: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let k = (SOBOLEV_PADDING * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    for (j, v) in buf.iter_mut().take(n).enumerate() {
        *v = g(a + (j as f64 + 0.5) * h);
    }
    let base = lr_norm(&buf, h, r);
    fft_analyze(&mut buf);
    let period = k as f64 * h;
    for (m, v) in buf.iter_mut().enumerate() {
        let xi = bin_theta(m, k) * k as f64 / period;
        *v *= xi.abs().powf(s);
    }
    fft_synth(&mut buf);
    base + lr_norm(&buf, h, r)
}

/// `‖g‖_{L^r} + ‖|∂|^s g‖_{L^r}` for `g` supported in `[a, b]`, with the
/// relative change under doubling the sample count.
pub fn sobolev_norm(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, s: f64, r: f64, samples: usize) -> Result<(f64, f64)> {
    if !(b > a && s >= 0.0 && r >= 1.0 && samples >= 8) {
        return Err(Error::param("sobolev norm needs a < b, s ≥ 0, r ≥ 1"));
    }
    let coarse = sobolev_at(g, a, b, s, r, samples);
    let fine = sobolev_at(g, a, b, s, r, 2 * samples);
    let delta = if fine > 0.0 { (fine - coarse).abs() / fine } else { 0.0 };
    Ok((fine, delta))
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierCondition {
    pub symbol: String,
    pub s: f64,
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sup: f64,
    pub argmax_t: f64,
    /// Largest relative change of a value when the samples double.
    pub refinement_delta: f64,
}

/// `t = 2^{k/4}` from `1/2` to `2^16`.
pub fn default_t_grid() -> Vec<f64> {
    (-4..=64).map(|k| (k as f64 / 4.0).exp2()).collect()
}

/// `‖η δ_t F‖_{W^s_r}` for each `t` in the grid.
pub fn sobolev_condition(f_sym: &Symbol, s: f64, r: f64, t_grid: &[f64], eta: &Symbol) -> Result<MultiplierCondition> {
    if !(s > 0.0) {
        return Err(Error::param(format!("s must be positive, got {s}")));
    }
    if !(r > 4.0) {
        return Err(Error::param(format!("r must lie in (4, ∞], got {r}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t >= 0.5 && t.is_finite())) {
        return Err(Error::param("t grid must be non-empty with every t ≥ 1/2"));
    }
    let (a, b) = match eta.support_hint() {
        Some((a, b)) if a >= 2.0 && b <= 8.0 => (a, b),
        _ => return Err(Error::param("η must carry a support inside [2, 8]")),
    };
    let evals: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let g = |x: f64| eta.eval(x) * f_sym.eval(t * x);
            sobolev_norm(&g, a, b, s, r, SOBOLEV_SAMPLES)
        })
        .collect::<Result<_>>()?;
    if let Some(i) = evals.iter().position(|v| !v.0.is_finite()) {
        return Err(Error::Infeasible(format!("Sobolev value at t = {} is not finite", t_grid[i])));
    }
    let values: Vec<f64> = evals.iter().map(|v| v.0).collect();
    let (imax, sup) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(MultiplierCondition {
        symbol: f_sym.label().to_string(),
        s,
        r,
        t_grid: t_grid.to_vec(),
        values,
        sup,
        argmax_t: t_grid[imax],
        refinement_delta: evals.iter().map(|v| v.1).fold(0.0, f64::max),
    })
}

/// `φ(λ/R)` with `φ` the standard bump on `[1/2, 1]`.
pub fn band_bump(r_scale: f64) -> Symbol {
    Symbol::real(format!("bump:{r_scale}"), move |x| {
        let y = (x / r_scale - 0.75) / 0.25;
        if y.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - y * y)).exp()
        }
    })
    .with_support(0.5 * r_scale, r_scale)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub r_scale: f64,
    pub s: f64,
    pub q: f64,
    pub eps: f64,
    /// `Σ_m |K(m)|² (1 + R|m|)^{2s}`.
    pub weighted_l2: f64,
    /// `max_m |K(m)| (1 + R|m|)^s`.
    pub weighted_sup: f64,
    /// `‖δ_R F‖_{W^{s+ε}_q}`.
    pub sobolev: f64,
    pub ratio_l2: f64,
    pub ratio_pointwise: f64,
    pub kernel_error: f64,
    pub refinement_delta: f64,
}

/// Weighted kernel bounds of `F(√Δ)` for `F` supported in `[R/2, R]`:
/// `LHS / (R‖δ_R F‖²)` in ℓ² and `LHS / (R‖δ_R F‖)` pointwise.
pub fn weighted_kernel_check(f_sym: &Symbol, r_scale: f64, s: f64, q: f64, eps: f64) -> Result<KernelCheck> {
    if !(r_scale > 0.0 && r_scale <= 2.0) {
        return Err(Error::param(format!("R must lie in (0, 2], got {r_scale}")));
    }
    if !(s >= 0.0 && eps > 0.0 && q > 4.0) {
        return Err(Error::param("need s ≥ 0, ε > 0 and q ∈ (4, ∞]"));
    }
    let slack = 1e-12 * r_scale;
    match f_sym.support_hint() {
        Some((a, b)) if a >= 0.5 * r_scale - slack && b <= r_scale + slack => {}
        _ => return Err(Error::param("symbol must be supported in [R/2, R]")),
    }
    let nmax = (2048.0 / r_scale).ceil() as usize;
    let grid = SpectralGrid::new((4 * nmax).next_power_of_two())?;
    let k = synthesize_kernel(f_sym, nmax, &grid, None)?;
    let mut weighted_l2 = 0.0;
    let mut weighted_sup: f64 = 0.0;
    for (m, v) in k.kernel.iter() {
        let w = 1.0 + r_scale * m.abs() as f64;
        weighted_l2 += v.norm_sqr() * w.powf(2.0 * s);
        weighted_sup = weighted_sup.max(v.norm() * w.powf(s));
    }
    let dilated = f_sym.dilate(r_scale);
    let g = |x: f64| dilated.eval(x);
    let (sobolev, refinement_delta) = sobolev_norm(&g, 0.5, 1.0, s + eps, q, SOBOLEV_SAMPLES)?;
    Ok(KernelCheck {
        r_scale,
        s,
        q,
        eps,
        weighted_l2,
        weighted_sup,
        sobolev,
        ratio_l2: weighted_l2 / (r_scale * sobolev * sobolev),
        ratio_pointwise: weighted_sup / (r_scale * sobolev),
        kernel_error: k.error_estimate,
        refinement_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `DΔ^{-1/2}`
    Forward,
    /// `D*Δ^{-1/2}`
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Symbol,
    Subordination,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Variant::Forward),
            "backward" => Ok(Variant::Backward),
            _ => Err(Error::Parse(format!("unknown variant '{s}'"))),
        }
    }
}

/// Fourier symbol of the Riesz transform, `0` at `θ = 0`.
///
/// `e^{-iθ} - 1 = -2i sin(θ/2) e^{-iθ/2}`, so dividing by `2|sin(θ/2)|`
/// leaves `-i sgn(θ) e^{∓iθ/2}` with unit modulus up to rounding.
#[derive(Debug, Clone, Copy)]
pub struct RieszSymbol(pub Variant);

impl Multiplier for RieszSymbol {
    fn at_theta(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let half = match self.0 {
            Variant::Forward => -0.5 * theta,
            Variant::Backward => 0.5 * theta,
        };
        Complex64::new(0.0, -theta.signum()) * Complex64::from_polar(1.0, half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubordinationOptions {
    pub t_lo: f64,
    pub t_hi: f64,
    pub points_per_octave: usize,
}

impl Default for SubordinationOptions {
    fn default() -> Self {
        SubordinationOptions {
            t_lo: SUBORDINATION_T_LO,
            t_hi: SUBORDINATION_T_HI,
            points_per_octave: SUBORDINATION_POINTS_PER_OCTAVE,
        }
    }
}

/// `∫_0^{t_lo} √t e^{-tx} dt/t` by its power series in `t_lo·x`.
fn head_series(t_lo: f64, x: f64) -> f64 {
    let mut term = t_lo.sqrt();
    let mut sum = 2.0 * term;
    for k in 1..60 {
        term *= -t_lo * x / k as f64;
        let add = term / (k as f64 + 0.5);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Symbol of `Δ^{-1/2}` from `(1/√π) ∫_0^{t_hi} √t e^{-tλ²} dt/t`: the
/// segment `[t_lo, t_hi]` by quadrature, `[0, t_lo]` by series.
pub fn subordination_symbol(opts: &SubordinationOptions) -> Result<impl Fn(f64) -> f64> {
    let quad = TimeQuadrature::new(opts.t_lo, opts.t_hi, opts.points_per_octave, Measure::Log)?;
    let c = 1.0 / PI.sqrt();
    let t_lo = opts.t_lo;
    Ok(move |lambda: f64| {
        let x = lambda * lambda;
        let body: f64 = quad.iter().map(|(t, w)| w * t.sqrt() * (-t * x).exp()).sum();
        c * (body + head_series(t_lo, x))
    })
}

#[derive(Debug, Clone)]
pub struct RieszResult {
    /// The whole period of the circle the transform was computed on.
    pub seq: Sequence,
    pub circle: Circle,
    pub variant: Variant,
    pub route: Route,
    /// ℓ² mass outside `supp f ± DEFAULT_HALFWIDTH`, relative.
    pub tail: f64,
    pub warning: Option<String>,
}

fn mean_warning(f: &Sequence) -> Option<String> {
    let l1: f64 = f.values().iter().map(|v| v.norm()).sum();
    let m = f.moment(0).norm();
    (m > MEAN_ZERO_TOL * l1).then(|| {
        format!("input has mean {m:e}; the transform sees only its mean-zero part")
    })
}

fn tail_outside(circle: &Circle, buf: &[Complex64], lo: i64, hi: i64) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for (j, v) in buf.iter().enumerate() {
        let n = circle.index(j);
        total += v.norm_sqr();
        if n >= lo && n <= hi {
            inside += v.norm_sqr();
        }
    }
    if total > 0.0 {
        ((total - inside) / total).max(0.0)
    } else {
        0.0
    }
}

/// Riesz transform with default circle and subordination settings.
///
/// Inputs with a mean are projected to mean zero on the circle (the symbol
/// vanishes at `θ = 0`), and a warning is attached.
pub fn riesz(f: &Sequence, variant: Variant, route: Route) -> Result<RieszResult> {
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    riesz_on(&circle, f, variant, route, &SubordinationOptions::default())
}

pub fn riesz_on(
    circle: &Circle,
    f: &Sequence,
    variant: Variant,
    route: Route,
    opts: &SubordinationOptions,
) -> Result<RieszResult> {
    let warning = mean_warning(f);
    let out = match route {
        Route::Symbol => circle.apply(&RieszSymbol(variant), &circle.embed(f)),
        Route::Subordination => {
            let g = match variant {
                Variant::Forward => f.diff_forward(),
                Variant::Backward => f.diff_backward(),
            };
            let sym = subordination_symbol(opts)?;
            let table: Vec<Complex64> = circle
                .lambdas()
                .par_iter()
                .map(|&l| Complex64::new(sym(l), 0.0))
                .collect();
            let mut spec = circle.spectrum(&circle.embed(&g));
            // 𝔇f has no mean; keep the λ = 0 bin from amplifying rounding.
            spec[0] = Complex64::new(0.0, 0.0);
            circle.synthesize_with(&spec, &table)
        }
    };
    let tail = match f.support() {
        Some((lo, hi)) => {
            let hw = DEFAULT_HALFWIDTH as i64;
            tail_outside(circle, &out, lo - hw, hi + hw)
        }
        None => 0.0,
    };
    Ok(RieszResult {
        seq: circle.to_sequence(&out),
        circle: *circle,
        variant,
        route,
        tail,
        warning,
    })
}

#[derive(Debug, Clone)]
pub struct RieszComparison {
    pub symbol: RieszResult,
    pub subordination: RieszResult,
    /// `‖symbol - subordination‖₂ / ‖symbol‖₂`.
    pub discrepancy: f64,
}

/// Both routes on one circle. Fails if they differ by more than `tol`.
pub fn riesz_both(f: &Sequence, variant: Variant, tol: Option<f64>) -> Result<RieszComparison> {
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    let opts = SubordinationOptions::default();
    let a = riesz_on(&circle, f, variant, Route::Symbol, &opts)?;
    let b = riesz_on(&circle, f, variant, Route::Subordination, &opts)?;
    let norm = a.seq.l2_norm();
    let diff = a.seq.axpby(Complex64::new(1.0, 0.0), &b.seq, Complex64::new(-1.0, 0.0)).l2_norm();
    let discrepancy = if norm > 0.0 { diff / norm } else { diff };
    if let Some(tol) = tol {
        if discrepancy > tol {
            return Err(Error::Consistency {
                what: "riesz routes".into(),
                discrepancy,
                tolerance: tol,
            });
        }
    }
    Ok(RieszComparison {
        symbol: a,
        subordination: b,
        discrepancy,
    })
}

/// `λ^{iσ}(1 - η(2^J λ))`: an imaginary power with the region `λ < 8·2^{-J}`
/// smoothly removed.
pub fn cut_imaginary_power(sigma: f64, cut: i32, eta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Symbol {
    let scale = (cut as f64).exp2();
    Symbol::new(format!("imagpower:{sigma}"), move |x| {
        let keep = 1.0 - eta(scale * x);
        if keep == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(keep, sigma * x.ln())
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// Largest ratio over the family.
    pub value: f64,
    pub argmax: String,
    pub ratios: Vec<(String, f64)>,
    pub tail_warning: bool,
}

/// `max norm(op f) / norm(f)` over the family, skipping signals of norm zero.
pub fn operator_norm_probe(
    op: &(dyn Fn(&Sequence) -> Result<Sequence> + Sync),
    space: &SpaceSpec,
    family: &[Signal],
) -> Result<ProbeReport> {
    let rows: Vec<(String, f64, bool)> = family
        .par_iter()
        .map(|s| {
            let den = space.norm_default(&s.seq)?;
            if den.value == 0.0 {
                return Ok(None);
            }
            let num = space.norm_default(&op(&s.seq)?)?;
            Ok(Some((s.label.clone(), num.value / den.value, num.tail_warning || den.tail_warning)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if rows.is_empty() {
        return Err(Error::param("family has no signal of positive norm"));
    }
    let (mut value, mut argmax) = (f64::NEG_INFINITY, String::new());
    for (l, r, _) in &rows {
        if *r > value {
            value = *r;
            argmax = l.clone();
        }
    }
    Ok(ProbeReport {
        value,
        argmax,
        tail_warning: rows.iter().any(|r| r.2),
        ratios: rows.into_iter().map(|(l, r, _)| (l, r)).collect(),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
