//! Square functions and the Hardy, Besov and Triebel–Lizorkin norms.
//!
//! Everything is evaluated on the periodic grid around the input (see
//! [`Circle`]): fields, cones and norms all live on the `K` points of the
//! circle, so translation invariance and Parseval hold exactly.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpaley::{block_table, Partition, DEFAULT_JMIN};
use crate::maximal::peetre_envelope;
use crate::quad::{Measure, TimeQuadrature};
use crate::seq::{lp_norm_abs, Sequence};
use crate::spectral::{fft_analyze, fft_synth, Circle, DEFAULT_HALFWIDTH};
use crate::sum::ksum;

/// Fields whose largest symbol value on the grid is below this are skipped.
const NEGLIGIBLE: f64 = 1e-40;
/// Below this `t` the cone panels are split at the integers.
const CONE_BREAKS_UPTO: f64 = 256.0;
/// Share of the total carried by the coarsest block that triggers a warning.
const TAIL_WARNING: f64 = 1e-3;
/// Fixed work split for deterministic parallel reductions.
const CHUNK: usize = 16;

/// A field `(m, t) ↦ F(m, t)` sampled one time slice at a time on a circle.
pub trait TimeField: Sync {
    fn circle(&self) -> Circle;
    /// `F(·, t)` on the circle, or `None` where it is negligible.
    fn slice(&self, t: f64) -> Option<Vec<Complex64>>;
}

/// `F(m, t) = [G_t(√Δ) f](m)` for a family of symbols `G_t`.
#[derive(Clone)]
pub struct SymbolField {
    circle: Circle,
    spectrum: Vec<Complex64>,
    lambdas: Vec<f64>,
    symbol: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl SymbolField {
    pub fn new(f: &Sequence, symbol: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let circle = Circle::around(f, DEFAULT_HALFWIDTH);
        SymbolField {
            circle,
            spectrum: circle.spectrum(&circle.embed(f)),
            lambdas: circle.lambdas(),
            symbol: Arc::new(symbol),
        }
    }

    /// `ψ(t√Δ) f`.
    pub fn psi(p: &Partition, f: &Sequence) -> Self {
        let p = p.clone();
        Self::new(f, move |t, l| p.psi(t * l))
    }

    /// `(t²Δ)^N e^{-t²Δ} f`.
    pub fn heat_power(n_power: u32, f: &Sequence) -> Self {
        Self::new(f, move |t, l| {
            let x = t * t * l * l;
            x.powi(n_power as i32) * (-x).exp()
        })
    }
}

impl TimeField for SymbolField {
    fn circle(&self) -> Circle {
        self.circle
    }

    fn slice(&self, t: f64) -> Option<Vec<Complex64>> {
        let mut top = 0.0f64;
        let table: Vec<Complex64> = self
            .lambdas
            .iter()
            .map(|&l| {
                let v = (self.symbol)(t, l);
                top = top.max(v.abs());
                Complex64::new(v, 0.0)
            })
            .collect();
        if top < NEGLIGIBLE {
            return None;
        }
        Some(self.circle.synthesize_with(&self.spectrum, &table))
    }
}

/// A nonnegative function on the circle with its quadrature report.
#[derive(Debug, Clone)]
pub struct CircleFunction {
    pub circle: Circle,
    pub values: Vec<f64>,
    /// Relative ℓ^∞ change under doubling of the time quadrature, when requested.
    pub refinement_delta: Option<f64>,
}

impl CircleFunction {
    pub fn to_sequence(&self) -> Sequence {
        self.circle.to_sequence(
            &self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    pub fn at(&self, n: i64) -> f64 {
        self.values[self.circle.slot(n)]
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_abs(self.values.iter().copied(), p)
    }
}

/// Sum over the circle of `v` on the window `|m - n| ≤ r`, for every `n`.
fn cone_sums(v: &[f64], r: usize) -> Vec<f64> {
    let k = v.len();
    if 2 * r + 1 >= k {
        let total = ksum(v.iter().copied());
        return vec![total; k];
    }
    let mut prefix = Vec::with_capacity(3 * k + 1);
    prefix.push(0.0);
    for i in 0..3 * k {
        let last = *prefix.last().unwrap();
        prefix.push(last + v[i % k]);
    }
    (0..k)
        .map(|n| {
            let (a, b) = (n + k - r, n + k + r + 1);
            (prefix[b] - prefix[a]).max(0.0)
        })
        .collect()
}

/// Circular convolution of `v` with the even weight `w(d)`, `d` the circular distance.
#[cfg(test)]
fn weighted_sums(v: &[f64], w: impl Fn(usize) -> f64) -> Vec<f64> {
    let k = v.len();
    let mut hat = vec![Complex64::new(0.0, 0.0); k];
    add_weighted_spectrum(&mut hat, v, &w, 1.0);
    fft_analyze(&mut hat);
    hat.iter().map(|z| z.re.max(0.0)).collect()
}

/// Adds `c · FFT(v) · FFT(w)` to `hat`, both real transforms done by one complex FFT.
fn add_weighted_spectrum(hat: &mut [Complex64], v: &[f64], w: &dyn Fn(usize) -> f64, c: f64) {
    let k = v.len();
    let mut z: Vec<Complex64> = (0..k).map(|i| Complex64::new(v[i], w(i.min(k - i)))).collect();
    fft_synth(&mut z);
    for (i, h) in hat.iter_mut().enumerate() {
        let a = z[i];
        let b = z[(k - i) % k].conj();
        // a = V + iW, b = V - iW with V, W the transforms of v, w
        let vv = (a + b) * 0.5;
        let ww = (a - b) * Complex64::new(0.0, -0.5);
        *h += c * vv * ww;
    }
}

/// `x^q` with the common exponents done without `powf`.
fn pow_q(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else if q == 1.0 {
        x
    } else {
        x.powf(q)
    }
}

/// `(1 + d/t)^{-e}`, with integer `e` done by `powi`.
fn decay_weight(d: usize, t: f64, e: f64) -> f64 {
    let b = 1.0 + d as f64 / t;
    if e.fract() == 0.0 && e.abs() < 64.0 {
        b.powi(-(e as i32))
    } else {
        b.powf(-e)
    }
}

/// How the time slices are pooled in space.
#[derive(Debug, Clone, Copy)]
enum Pool {
    /// `Σ_{|m-n| < a t}`
    Cone { aperture: f64 },
    /// `Σ_m (1 + |m-n|/t)^{-λq}`
    Weighted { lambda_q: f64 },
    /// `m = n` only
    Diagonal,
    /// `sup_m |F(m,t)| / (1 + |m-n|/t)^λ`, raised to `q` afterwards
    Peetre { lambda: f64 },
}

/// `n ↦ [∫ pool_n((t^{-α}|F(·,t)|)^q) dμ(t)]^{1/q}`.
fn pooled(field: &dyn TimeField, quad: &TimeQuadrature, alpha: f64, q: f64, pool: Pool) -> Vec<f64> {
    let circle = field.circle();
    let k = circle.size;
    let nodes: Vec<(f64, f64)> = quad.iter().collect();
    // Weighted pooling is a convolution per slice; it is summed in frequency
    // and transformed back once at the end.
    let partials: Vec<Vec<Complex64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); k];
            // Cone sums are linear and share a radius across a panel, so
            // slices are gathered per radius and pooled once.
            let mut gathered: Option<(usize, Vec<f64>)> = None;
            let flush = |acc: &mut [Complex64], g: &mut Option<(usize, Vec<f64>)>| {
                if let Some((r, v)) = g.take() {
                    for (a, p) in acc.iter_mut().zip(cone_sums(&v, r)) {
                        a.re += p;
                    }
                }
            };
            for &(t, w) in chunk {
                let Some(slice) = field.slice(t) else { continue };
                let scale = t.powf(-alpha);
                let pooled = match pool {
                    Pool::Peetre { lambda } => {
                        let abs: Vec<f64> = slice.iter().map(|z| scale * z.norm()).collect();
                        peetre_envelope(&abs, t, lambda, true)
                            .into_iter()
                            .map(|x| pow_q(x, q))
                            .collect()
                    }
                    _ => {
                        let v: Vec<f64> = slice.iter().map(|z| pow_q(scale * z.norm(), q)).collect();
                        match pool {
                            Pool::Cone { aperture } => {
                                // |m - n| < a t  ⇔  |m - n| ≤ ⌈a t⌉ - 1
                                let r = ((aperture * t).ceil() as usize).saturating_sub(1);
                                if gathered.as_ref().is_some_and(|g| g.0 != r) {
                                    flush(&mut acc, &mut gathered);
                                }
                                let g = &mut gathered.get_or_insert_with(|| (r, vec![0.0; k])).1;
                                for (a, p) in g.iter_mut().zip(&v) {
                                    *a += w * p;
                                }
                                continue;
                            }
                            Pool::Weighted { lambda_q } => {
                                add_weighted_spectrum(&mut acc, &v, &|d| decay_weight(d, t, lambda_q), w);
                                continue;
                            }
                            Pool::Diagonal => v,
                            Pool::Peetre { .. } => unreachable!(),
                        }
                    }
                };
                for (a, p) in acc.iter_mut().zip(&pooled) {
                    a.re += w * p;
                }
            }
            flush(&mut acc, &mut gathered);
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); k];
    for part in &partials {
        for (a, p) in total.iter_mut().zip(part) {
            *a += p;
        }
    }
    if matches!(pool, Pool::Weighted { .. }) {
        fft_analyze(&mut total);
    }
    total.into_iter().map(|s| s.re.max(0.0).powf(1.0 / q)).collect()
}

fn with_refinement(
    field: &dyn TimeField,
    quad: &TimeQuadrature,
    alpha: f64,
    q: f64,
    pool: Pool,
    refine: bool,
) -> CircleFunction {
    let values = pooled(field, quad, alpha, q, pool);
    let refinement_delta = refine.then(|| {
        let fine = pooled(field, &quad.doubled(), alpha, q, pool);
        let top = fine.iter().copied().fold(0.0, f64::max);
        let diff = values
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if top > 0.0 {
            diff / top
        } else {
            0.0
        }
    });
    CircleFunction {
        circle: field.circle(),
        values,
        refinement_delta,
    }
}

fn cone_quadrature(quad: &TimeQuadrature, aperture: f64) -> TimeQuadrature {
    if quad.breaks.is_some() {
        quad.clone()
    } else {
        quad.with_breaks(1.0 / aperture, CONE_BREAKS_UPTO / aperture).unwrap()
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::param(format!("q must be positive and finite, got {q}")));
    }
    Ok(())
}

/// `S_{Δ,N} f(n) = [∫ Σ_{|m-n|<t} |(t²Δ)^N e^{-t²Δ} f(m)|² dt/(t(t+1))]^{1/2}`.
pub fn area_square(f: &Sequence, n_power: u32, quad: &TimeQuadrature, refine: bool) -> Result<CircleFunction> {
    if n_power == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let field = SymbolField::heat_power(n_power, f);
    Ok(with_refinement(&field, &cone_quadrature(quad, 1.0), 0.0, 2.0, Pool::Cone { aperture: 1.0 }, refine))
}

/// The `ψ(t√Δ)` variant of the area function.
pub fn psi_square(p: &Partition, f: &Sequence, quad: &TimeQuadrature, refine: bool) -> Result<CircleFunction> {
    let field = SymbolField::psi(p, f);
    Ok(with_refinement(&field, &cone_quadrature(quad, 1.0), 0.0, 2.0, Pool::Cone { aperture: 1.0 }, refine))
}

/// `G^α_{λ,q} F(n) = [∫ Σ_m (t^{-α}|F(m,t)|)^q (1 + |m-n|/t)^{-λq} dμ]^{1/q}`.
pub fn gfun(field: &dyn TimeField, alpha: f64, lambda: f64, q: f64, quad: &TimeQuadrature) -> Result<CircleFunction> {
    check_q(q)?;
    if !(lambda > 0.0) {
        return Err(Error::param("λ must be positive"));
    }
    Ok(with_refinement(field, quad, alpha, q, Pool::Weighted { lambda_q: lambda * q }, false))
}

/// `S^α_{a,q} F(n) = [∫ Σ_{|m-n|<at} (t^{-α}|F(m,t)|)^q dμ]^{1/q}`.
pub fn lusin(field: &dyn TimeField, alpha: f64, aperture: f64, q: f64, quad: &TimeQuadrature) -> Result<CircleFunction> {
    check_q(q)?;
    if !(aperture > 0.0) {
        return Err(Error::param("aperture must be positive"));
    }
    let qd = cone_quadrature(quad, aperture);
    Ok(with_refinement(field, &qd, alpha, q, Pool::Cone { aperture }, false))
}

/// The `m = n` term of [`gfun`]: `[∫ (t^{-α}|F(n,t)|)^q dμ]^{1/q}`.
pub fn diagonal(field: &dyn TimeField, alpha: f64, q: f64, quad: &TimeQuadrature) -> Result<CircleFunction> {
    check_q(q)?;
    Ok(with_refinement(field, quad, alpha, q, Pool::Diagonal, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum HardyVariant {
    /// `(t²Δ)^N e^{-t²Δ}` with the given `N`.
    Area { n_power: u32 },
    Psi,
}

/// A norm value with its numerical metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    /// Low-frequency content is outside what the truncated sum sees.
    pub tail_warning: bool,
    pub refinement_delta: Option<f64>,
}

/// Whether the mean of `f` is visible against its size: such inputs are only
/// partly captured, the spaces being defined modulo polynomials.
fn mean_warning(f: &Sequence) -> bool {
    let l1 = f.lp_norm(1.0).unwrap_or(0.0);
    l1 > 0.0 && f.moment(0).norm() > 1e-8 * l1
}

/// `‖S f‖_{ℓ^p}` for `0 < p ≤ 1`.
pub fn hardy_norm(f: &Sequence, p: f64, variant: HardyVariant, quad: Option<&TimeQuadrature>, refine: bool) -> Result<NormReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!("Hardy norms need 0 < p <= 1, got {p}")));
    }
    if f.is_zero() {
        return Ok(NormReport { value: 0.0, tail_warning: false, refinement_delta: Some(0.0) });
    }
    let s = match variant {
        HardyVariant::Area { n_power } => {
            let q = quad.cloned().unwrap_or_else(TimeQuadrature::area_default);
            area_square(f, n_power, &q, refine)?
        }
        HardyVariant::Psi => {
            let q = quad.cloned().unwrap_or_else(TimeQuadrature::psi_default);
            psi_square(&Partition::default(), f, &q, refine)?
        }
    };
    Ok(NormReport {
        value: s.lp_norm(p)?,
        tail_warning: mean_warning(f),
        refinement_delta: s.refinement_delta,
    })
}

/// Blocks `ψ_j(√Δ)f` for `j = jmin..=0` on the circle around `f`, in order.
pub fn blocks_on_circle(p: &Partition, f: &Sequence, jmin: i32) -> (Circle, Vec<(i32, Vec<Complex64>)>) {
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    let spec = circle.spectrum(&circle.embed(f));
    let lambdas = circle.lambdas();
    let blocks = (jmin..=0)
        .into_par_iter()
        .filter_map(|j| {
            let t = block_table(p, j, &lambdas);
            if t.iter().all(|v| v.re == 0.0) {
                None
            } else {
                Some((j, circle.synthesize_with(&spec, &t)))
            }
        })
        .collect();
    (circle, blocks)
}

fn lq_combine(terms: &[f64], q: f64) -> Result<f64> {
    lp_norm_abs(terms.iter().copied(), q)
}

fn check_exponent(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::param(format!("{what} must be positive, got {x}")));
    }
    Ok(())
}

/// `[Σ_{j=jmin}^0 (2^{jα} ‖ψ_j(√Δ)f‖_p)^q]^{1/q}`.
pub fn besov_norm(p_part: &Partition, f: &Sequence, alpha: f64, p: f64, q: f64, jmin: i32) -> Result<NormReport> {
    check_exponent(p, "p")?;
    check_exponent(q, "q")?;
    if f.is_zero() {
        return Ok(NormReport { value: 0.0, tail_warning: false, refinement_delta: None });
    }
    let (_, blocks) = blocks_on_circle(p_part, f, jmin);
    let mut terms = vec![];
    let mut coarsest = 0.0;
    for (j, b) in &blocks {
        let v = (*j as f64 * alpha).exp2() * lp_norm_abs(b.iter().map(|z| z.norm()), p)?;
        if *j == jmin {
            coarsest = v;
        }
        terms.push(v);
    }
    let value = lq_combine(&terms, q)?;
    Ok(NormReport {
        value,
        tail_warning: mean_warning(f) || (value > 0.0 && coarsest > TAIL_WARNING * value),
        refinement_delta: None,
    })
}

/// `‖[Σ_{j=jmin}^0 (2^{jα} |ψ_j(√Δ)f|)^q]^{1/q}‖_p`.
pub fn tl_norm(p_part: &Partition, f: &Sequence, alpha: f64, p: f64, q: f64, jmin: i32) -> Result<NormReport> {
    check_exponent(p, "p")?;
    check_exponent(q, "q")?;
    if f.is_zero() {
        return Ok(NormReport { value: 0.0, tail_warning: false, refinement_delta: None });
    }
    let (circle, blocks) = blocks_on_circle(p_part, f, jmin);
    let k = circle.size;
    let mut inner = vec![0.0f64; k];
    let mut coarsest = vec![0.0f64; k];
    for (j, b) in &blocks {
        let s = (*j as f64 * alpha).exp2();
        for (i, z) in b.iter().enumerate() {
            let a = s * z.norm();
            if q.is_infinite() {
                inner[i] = inner[i].max(a);
            } else {
                inner[i] += a.powf(q);
            }
            if *j == jmin {
                coarsest[i] = a;
            }
        }
    }
    let pointwise: Vec<f64> = if q.is_infinite() {
        inner
    } else {
        inner.into_iter().map(|s| s.powf(1.0 / q)).collect()
    };
    let value = lp_norm_abs(pointwise.iter().copied(), p)?;
    let tail = lp_norm_abs(coarsest.iter().copied(), p)?;
    Ok(NormReport {
        value,
        tail_warning: mean_warning(f) || (value > 0.0 && tail > TAIL_WARNING * value),
        refinement_delta: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Besov,
    Tl,
}

/// Default quadrature for continuous norms: `t ∈ [1, 2^{3-jmin}]`, `dt/t`.
pub fn continuous_quadrature(jmin: i32) -> TimeQuadrature {
    TimeQuadrature::octaves(0, 3 - jmin, crate::quad::DEFAULT_POINTS_PER_OCTAVE, Measure::Log).unwrap()
}

fn continuous_value(
    p_part: &Partition,
    f: &Sequence,
    alpha: f64,
    p: f64,
    q: f64,
    quad: &TimeQuadrature,
    flavor: Flavor,
    peetre: Option<f64>,
) -> Result<f64> {
    let field = SymbolField::psi(p_part, f);
    match flavor {
        Flavor::Tl => {
            let pool = match peetre {
                Some(lambda) => Pool::Peetre { lambda },
                None => Pool::Diagonal,
            };
            let g = pooled(&field, quad, alpha, q, pool);
            lp_norm_abs(g.into_iter(), p)
        }
        Flavor::Besov => {
            let nodes: Vec<(f64, f64)> = quad.iter().collect();
            let terms: Vec<f64> = nodes
                .par_iter()
                .map(|&(t, w)| -> Result<f64> {
                    let Some(slice) = field.slice(t) else { return Ok(0.0) };
                    let scale = t.powf(-alpha);
                    let abs: Vec<f64> = slice.iter().map(|z| scale * z.norm()).collect();
                    let v = match peetre {
                        Some(lambda) => peetre_envelope(&abs, t, lambda, true),
                        None => abs,
                    };
                    Ok(w * lp_norm_abs(v.into_iter(), p)?.powf(q))
                })
                .collect::<Result<_>>()?;
            Ok(ksum(terms).powf(1.0 / q))
        }
    }
}

/// Continuous-parameter norm with `ψ(t√Δ)` (or its Peetre maximal version).
///
/// Besov: `[∫ (t^{-α} ‖ψ(t√Δ)f‖_p)^q dt/t]^{1/q}`;
/// TL: `‖[∫ (t^{-α} |ψ(t√Δ)f|)^q dt/t]^{1/q}‖_p`.
#[allow(clippy::too_many_arguments)]
pub fn continuous_norm(
    p_part: &Partition,
    f: &Sequence,
    alpha: f64,
    p: f64,
    q: f64,
    quad: &TimeQuadrature,
    flavor: Flavor,
    peetre: Option<f64>,
    refine: bool,
) -> Result<NormReport> {
    check_exponent(p, "p")?;
    check_q(q)?;
    if quad.measure != Measure::Log {
        return Err(Error::param("continuous norms use the measure dt/t"));
    }
    if let Some(l) = peetre {
        check_exponent(l, "λ")?;
    }
    if f.is_zero() {
        return Ok(NormReport { value: 0.0, tail_warning: false, refinement_delta: Some(0.0) });
    }
    let value = continuous_value(p_part, f, alpha, p, q, quad, flavor, peetre)?;
    let refinement_delta = if refine {
        let fine = continuous_value(p_part, f, alpha, p, q, &quad.doubled(), flavor, peetre)?;
        Some(if fine > 0.0 { (fine - value).abs() / fine } else { 0.0 })
    } else {
        None
    };
    Ok(NormReport {
        value,
        tail_warning: mean_warning(f),
        refinement_delta,
    })
}

/// Norm selector used by the command line and the operator probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum SpaceSpec {
    Besov { alpha: f64, p: f64, q: f64 },
    Tl { alpha: f64, p: f64, q: f64 },
    Hardy { p: f64, n_power: u32 },
    L2,
}

impl SpaceSpec {
    /// Parses `besov:α:p:q`, `tl:α:p:q`, `hardy:p[:N]`, `h1` or `l2`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| -> Result<f64> {
            match x {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => x.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{x}' in '{s}'"))),
            }
        };
        match parts.as_slice() {
            ["besov", a, p, q] => Ok(SpaceSpec::Besov { alpha: num(a)?, p: num(p)?, q: num(q)? }),
            ["tl", a, p, q] => Ok(SpaceSpec::Tl { alpha: num(a)?, p: num(p)?, q: num(q)? }),
            ["hardy", p] => Ok(SpaceSpec::Hardy { p: num(p)?, n_power: 1 }),
            ["hardy", p, n] => Ok(SpaceSpec::Hardy {
                p: num(p)?,
                n_power: n.parse().map_err(|_| Error::Parse(format!("bad N in '{s}'")))?,
            }),
            ["h1"] => Ok(SpaceSpec::Tl { alpha: 0.0, p: 1.0, q: 2.0 }),
            ["l2"] => Ok(SpaceSpec::L2),
            _ => Err(Error::Parse(format!("unknown space '{s}'"))),
        }
    }

    pub fn norm(&self, p_part: &Partition, f: &Sequence, jmin: i32) -> Result<NormReport> {
        match *self {
            SpaceSpec::Besov { alpha, p, q } => besov_norm(p_part, f, alpha, p, q, jmin),
            SpaceSpec::Tl { alpha, p, q } => tl_norm(p_part, f, alpha, p, q, jmin),
            SpaceSpec::Hardy { p, n_power } => hardy_norm(f, p, HardyVariant::Area { n_power }, None, false),
            SpaceSpec::L2 => Ok(NormReport { value: f.l2_norm(), tail_warning: false, refinement_delta: None }),
        }
    }

    pub fn norm_default(&self, f: &Sequence) -> Result<NormReport> {
        self.norm(&Partition::default(), f, DEFAULT_JMIN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn packet(theta0: f64, sigma: f64, centre: i64) -> Sequence {
        let w = (9.0 * sigma) as i64;
        Sequence::tabulate(centre - w, centre + w, |n| {
            let x = (n - centre) as f64 / sigma;
            Complex64::from_polar((-0.5 * x * x).exp(), theta0 * n as f64)
        })
    }

    fn small_quad() -> TimeQuadrature {
        TimeQuadrature::octaves(-6, 16, 8, Measure::LogDamped).unwrap()
    }

    #[test]
    fn cone_sums_match_brute_force() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7) % 5) as f64 + 0.5).collect();
        for r in [0usize, 1, 5, 17, 18, 40] {
            let c = cone_sums(&v, r);
            for n in 0..37i64 {
                let brute: f64 = (0..37i64)
                    .filter(|&m| {
                        let d = (m - n).abs();
                        d.min(37 - d) as usize <= r
                    })
                    .map(|m| v[m as usize])
                    .sum();
                assert!((c[n as usize] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_sums_match_brute_force() {
        let v: Vec<f64> = (0..32).map(|i| ((i * 11) % 7) as f64).collect();
        let w = |d: usize| (1.0 + d as f64 / 3.0).powf(-2.5);
        let c = weighted_sums(&v, w);
        for n in 0..32i64 {
            let brute: f64 = (0..32i64)
                .map(|m| {
                    let d = (m - n).abs();
                    v[m as usize] * w(d.min(32 - d) as usize)
                })
                .sum();
            assert!((c[n as usize] - brute).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_inputs() {
        let p = Partition::default();
        let z = Sequence::zero();
        assert_eq!(besov_norm(&p, &z, 0.0, 2.0, 2.0, -25).unwrap().value, 0.0);
        assert_eq!(tl_norm(&p, &z, 0.0, 1.0, 2.0, -25).unwrap().value, 0.0);
        assert_eq!(hardy_norm(&z, 1.0, HardyVariant::Psi, None, false).unwrap().value, 0.0);
        let q = continuous_quadrature(-10);
        assert_eq!(continuous_norm(&p, &z, 0.0, 2.0, 2.0, &q, Flavor::Besov, None, false).unwrap().value, 0.0);
        let a = area_square(&z, 1, &small_quad(), false).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_covariance_of_area() {
        let f = Sequence::from_real(-2, &[1.0, -2.0, 0.5, 1.0]);
        let a = area_square(&f, 1, &small_quad(), false).unwrap();
        let b = area_square(&f.shift(37), 1, &small_quad(), false).unwrap();
        for n in -300..300 {
            assert!((a.at(n) - b.at(n + 37)).abs() <= 1e-12 * a.at(n).max(1e-300));
        }
        let pa = psi_square(&Partition::default(), &f, &small_quad(), false).unwrap();
        let pb = psi_square(&Partition::default(), &f.shift(-5), &small_quad(), false).unwrap();
        for n in -300..300 {
            assert!((pa.at(n) - pb.at(n - 5)).abs() <= 1e-12 * pa.at(n).max(1e-300));
        }
    }

    #[test]
    fn homogeneity() {
        let p = Partition::default();
        let f = Sequence::from_real(0, &[1.0, -1.0, 0.5, 0.25, -0.75]);
        let c = Complex64::new(-2.5, 1.0);
        let g = f.scale(c);
        let a = tl_norm(&p, &f, 0.5, 1.0, 2.0, -20).unwrap().value;
        let b = tl_norm(&p, &g, 0.5, 1.0, 2.0, -20).unwrap().value;
        assert!((b - c.norm() * a).abs() < 1e-12 * b);
        let a = besov_norm(&p, &f, 1.0, 2.0, 1.0, -20).unwrap().value;
        let b = besov_norm(&p, &g, 1.0, 2.0, 1.0, -20).unwrap().value;
        assert!((b - c.norm() * a).abs() < 1e-12 * b);
    }

    #[test]
    fn besov_tl_coincide_at_p_equals_q() {
        let p = Partition::default();
        let f = Sequence::from_real(-3, &[0.2, 1.0, -0.7, 0.0, 2.0, 0.3, -1.1]);
        for &(alpha, pq) in &[(0.0, 2.0), (0.7, 1.0), (-0.4, 3.0)] {
            let a = besov_norm(&p, &f, alpha, pq, pq, -25).unwrap().value;
            let b = tl_norm(&p, &f, alpha, pq, pq, -25).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn single_band_eigen_oracle() {
        let p = Partition::default();
        let theta = 2.0 * (0.75f64).asin();
        // Long smooth window so the band stays narrow.
        let f = Sequence::tabulate(-3000, 3000, |n| {
            let x = n as f64 / 3000.0;
            let env = if x.abs() < 1.0 { (PI * x / 2.0).cos().powi(8) } else { 0.0 };
            Complex64::from_polar(env, theta * n as f64)
        });
        let (alpha, pp, q) = (0.5, 2.0, 1.0);
        let expect = (-2..=0)
            .map(|j| ((j as f64 * alpha).exp2() * p.psi_j(j, 1.5)).powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
            * f.lp_norm(pp).unwrap();
        let got = besov_norm(&p, &f, alpha, pp, q, -25).unwrap().value;
        assert!((got - expect).abs() < 0.01 * expect, "{got} vs {expect}");
    }

    #[test]
    fn besov_frame_identity() {
        let p = Partition::default();
        let (a, b) = p.frame_bounds();
        for seed in 0..5u64 {
            let f = Sequence::tabulate(-10, 10, |n| Complex64::new(((n * 31 + seed as i64 * 7) % 13) as f64 - 6.0, 0.0));
            let f = f.diff_forward();
            let v = besov_norm(&p, &f, 0.0, 2.0, 2.0, -25).unwrap().value.powi(2);
            let e = f.l2_norm().powi(2);
            assert!(v >= a * e * (1.0 - 1e-9) && v <= b * e * (1.0 + 1e-9));
        }
    }

    #[test]
    fn gfun_dominates_diagonal_and_lusin_recovers_area() {
        let f = Sequence::from_real(-1, &[1.0, -2.0, 1.0]);
        let q = small_quad();
        let field = SymbolField::heat_power(1, &f);
        let area = area_square(&f, 1, &q, false).unwrap();
        let l = lusin(&field, 0.0, 1.0, 2.0, &q).unwrap();
        for (a, b) in area.values.iter().zip(&l.values) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
        let g = gfun(&field, 0.0, 1.5, 2.0, &q).unwrap();
        let d = diagonal(&field, 0.0, 2.0, &q).unwrap();
        for (x, y) in g.values.iter().zip(&d.values) {
            assert!(*x >= y * (1.0 - 1e-12));
        }
    }

    #[test]
    fn peetre_continuous_dominates_plain() {
        let p = Partition::default();
        let f = packet(1.0, 6.0, 0);
        let q = TimeQuadrature::octaves(0, 8, 8, Measure::Log).unwrap();
        for flavor in [Flavor::Besov, Flavor::Tl] {
            let plain = continuous_norm(&p, &f, 0.0, 2.0, 2.0, &q, flavor, None, false).unwrap().value;
            let star = continuous_norm(&p, &f, 0.0, 2.0, 2.0, &q, flavor, Some(2.0), false).unwrap().value;
            assert!(star >= plain * (1.0 - 1e-12));
        }
    }

    #[test]
    fn parse_spaces() {
        assert_eq!(SpaceSpec::parse("tl:0:1:2").unwrap(), SpaceSpec::Tl { alpha: 0.0, p: 1.0, q: 2.0 });
        assert_eq!(SpaceSpec::parse("besov:1:2:inf").unwrap(), SpaceSpec::Besov { alpha: 1.0, p: 2.0, q: f64::INFINITY });
        assert!(SpaceSpec::parse("sobolev:1").is_err());
    }
}
