//! Fourier transform on ℤ and the functional calculus of the discrete Laplacian.
//!
//! The transform follows `𝓕f(θ) = Σ f(n) e^{inθ}` with inverse
//! `(1/2π) ∫ φ(θ) e^{-inθ} dθ`. A symbol `F` acts as multiplication by
//! `F(2|sin(θ/2)|)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::seq::Sequence;

pub const DEFAULT_GRID_SIZE: usize = 1 << 14;
pub const DEFAULT_HALFWIDTH: usize = 2048;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

type PlanKey = (usize, bool);

fn planner() -> &'static Mutex<(FftPlanner<f64>, HashMap<PlanKey, Arc<dyn Fft<f64>>>)> {
    static P: OnceLock<Mutex<(FftPlanner<f64>, HashMap<PlanKey, Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    P.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

fn plan(k: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut guard = planner().lock().unwrap();
    let (pl, cache) = &mut *guard;
    cache
        .entry((k, forward))
        .or_insert_with(|| {
            pl.plan_fft(
                k,
                if forward {
                    FftDirection::Forward
                } else {
                    FftDirection::Inverse
                },
            )
        })
        .clone()
}

/// `x[m] ← Σ_j x[j] e^{+2πi jm/K}` (unnormalized).
pub(crate) fn fft_synth(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// [`fft_synth`] applied to each consecutive chunk of length `chunk`.
pub(crate) fn fft_synth_chunks(buf: &mut [Complex64], chunk: usize) {
    plan(chunk, false).process(buf);
}

/// `x[j] ← (1/K) Σ_m x[m] e^{-2πi jm/K}`.
pub(crate) fn fft_analyze(buf: &mut [Complex64]) {
    let k = buf.len();
    plan(k, true).process(buf);
    let s = 1.0 / k as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Frequency of FFT bin `m` folded into `(-π, π]`.
#[inline]
pub fn bin_theta(m: usize, k: usize) -> f64 {
    if 2 * m <= k {
        2.0 * PI * m as f64 / k as f64
    } else {
        2.0 * PI * (m as f64 - k as f64) / k as f64
    }
}

/// `2|sin(θ/2)| = √(2(1 - cos θ))`.
#[inline]
pub fn lambda_of_theta(theta: f64) -> f64 {
    2.0 * (0.5 * theta).sin().abs()
}

/// Uniform grid `θ_k = -π + 2πk/K` on `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralGrid {
    size: usize,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        SpectralGrid {
            size: DEFAULT_GRID_SIZE,
        }
    }
}

impl SpectralGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::param(format!(
                "grid size must be a power of two >= 4, got {size}"
            )));
        }
        Ok(SpectralGrid { size })
    }

    /// Smallest admissible grid (at least the default size) for an input of
    /// `width` samples and an output half-width `halfwidth`.
    pub fn for_window(width: usize, halfwidth: usize) -> Self {
        let need = required_size(width, halfwidth);
        SpectralGrid {
            size: need.next_power_of_two().max(DEFAULT_GRID_SIZE),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn doubled(&self) -> Self {
        SpectralGrid {
            size: self.size * 2,
        }
    }

    pub fn node(&self, k: usize) -> f64 {
        -PI + 2.0 * PI * k as f64 / self.size as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.size).map(|k| self.node(k)).collect()
    }

    pub fn check(&self, width: usize, halfwidth: usize) -> Result<()> {
        let required = required_size(width, halfwidth);
        if self.size < required {
            Err(Error::Aliasing {
                required,
                actual: self.size,
            })
        } else {
            Ok(())
        }
    }
}

fn required_size(width: usize, halfwidth: usize) -> usize {
    2 * (width + halfwidth) + 2
}

/// A scalar function on `[0, ∞)` standing for the operator `F(√Δ)`.
#[derive(Clone)]
pub struct Symbol {
    eval: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    support_hint: Option<(f64, f64)>,
    label: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("support_hint", &self.support_hint)
            .finish()
    }
}

impl Symbol {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Symbol {
            eval: Arc::new(eval),
            support_hint: None,
            label: label.into(),
        }
    }

    pub fn real(label: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |x| Complex64::new(eval(x), 0.0))
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support_hint = Some((lo, hi));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support_hint(&self) -> Option<(f64, f64)> {
        self.support_hint
    }

    #[inline]
    pub fn eval(&self, lambda: f64) -> Complex64 {
        (self.eval)(lambda)
    }

    pub fn one() -> Self {
        Self::real("one", |_| 1.0)
    }

    /// `λ ↦ λ^k`; `k = 2` is the Laplacian itself.
    pub fn power(k: f64) -> Self {
        Self::real(format!("power:{k}"), move |x| if x == 0.0 && k > 0.0 { 0.0 } else { x.powf(k) })
    }

    /// `λ ↦ e^{-tλ²}`, the heat semigroup at time `t`.
    pub fn heat(t: f64) -> Self {
        Self::real(format!("heat:{t}"), move |x| (-t * x * x).exp())
    }

    /// `λ ↦ F(tλ)`.
    pub fn dilate(&self, t: f64) -> Self {
        let e = self.eval.clone();
        Symbol {
            eval: Arc::new(move |x| e(t * x)),
            support_hint: self.support_hint.map(|(a, b)| (a / t, b / t)),
            label: format!("{}(·{t})", self.label),
        }
    }

    pub fn mul(&self, other: &Symbol) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Symbol {
            eval: Arc::new(move |x| a(x) * b(x)),
            support_hint: match (self.support_hint, other.support_hint) {
                (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
                (s, None) | (None, s) => s,
            },
            label: format!("{}*{}", self.label, other.label),
        }
    }

    pub fn conj(&self) -> Self {
        let a = self.eval.clone();
        Symbol {
            eval: Arc::new(move |x| a(x).conj()),
            support_hint: self.support_hint,
            label: format!("conj({})", self.label),
        }
    }

    /// Largest `|F|` on a dense sample of `[0, 2]`.
    pub fn sup_on_spectrum(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| self.eval(2.0 * i as f64 / samples as f64).norm())
            .fold(0.0, f64::max)
    }
}

/// Anything that acts by multiplication on the frequency side.
pub trait Multiplier: Send + Sync {
    fn at_theta(&self, theta: f64) -> Complex64;

    /// Samples on the FFT bins of a grid of size `k` (natural order).
    fn table(&self, k: usize) -> Vec<Complex64> {
        (0..k).map(|m| self.at_theta(bin_theta(m, k))).collect()
    }
}

impl Multiplier for Symbol {
    #[inline]
    fn at_theta(&self, theta: f64) -> Complex64 {
        self.eval(lambda_of_theta(theta))
    }
}

/// `𝓕f(θ_k)` on the nodes of `grid`.
pub fn dtft(f: &Sequence, grid: &SpectralGrid) -> Result<Vec<Complex64>> {
    grid.check(f.len(), 0)?;
    let k = grid.size();
    let mut buf = vec![ZERO; k];
    // e^{inθ_k} = (-1)^n e^{2πink/K}
    for (n, v) in f.iter() {
        let s = if n.rem_euclid(2) == 0 { v } else { -v };
        buf[n.rem_euclid(k as i64) as usize] += s;
    }
    fft_synth(&mut buf);
    Ok(buf)
}

/// Trapezoid-rule inverse of grid samples, evaluated on `lo..=hi`.
pub fn inverse_dtft(samples: &[Complex64], lo: i64, hi: i64) -> Result<Sequence> {
    let grid = SpectralGrid::new(samples.len())?;
    if hi < lo {
        return Ok(Sequence::zero());
    }
    grid.check((hi - lo + 1) as usize, 0)?;
    let k = grid.size() as i64;
    let mut buf = samples.to_vec();
    fft_analyze(&mut buf);
    Ok(Sequence::tabulate(lo, hi, |n| {
        let v = buf[n.rem_euclid(k) as usize];
        if n.rem_euclid(2) == 0 {
            v
        } else {
            -v
        }
    }))
}

/// Convolution kernel of `F(√Δ)` with its estimated quadrature error.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub kernel: Sequence,
    /// Max change of any value between the grid and its doubling.
    pub error_estimate: f64,
    pub grid_size: usize,
}

fn kernel_on_grid(f_sym: &dyn Multiplier, nmax: usize, k: usize) -> Vec<Complex64> {
    let mut buf = f_sym.table(k);
    fft_analyze(&mut buf);
    (0..=nmax)
        .map(|n| 0.5 * (buf[n] + buf[(k - n) % k]))
        .collect()
}

/// `K_F(n) = (1/π) ∫_0^π F(2 sin(θ/2)) cos(nθ) dθ` for `|n| ≤ nmax`.
///
/// Values come from the doubled grid; the error estimate is their distance
/// to the values on `grid`. Fails if the estimate exceeds `tol`.
pub fn synthesize_kernel(
    f_sym: &Symbol,
    nmax: usize,
    grid: &SpectralGrid,
    tol: Option<f64>,
) -> Result<Kernel> {
    synthesize_multiplier_kernel(f_sym, nmax, grid, tol)
}

pub(crate) fn synthesize_multiplier_kernel(
    f_sym: &dyn Multiplier,
    nmax: usize,
    grid: &SpectralGrid,
    tol: Option<f64>,
) -> Result<Kernel> {
    let k = grid.size();
    if nmax + 1 > k / 2 {
        return Err(Error::Aliasing {
            required: 2 * (nmax + 1),
            actual: k,
        });
    }
    let coarse = kernel_on_grid(f_sym, nmax, k);
    let fine = kernel_on_grid(f_sym, nmax, 2 * k);
    let err = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if let Some(tol) = tol {
        if err > tol {
            return Err(Error::Quadrature {
                estimate: err,
                tolerance: tol,
            });
        }
    }
    let n = nmax as i64;
    let kernel = Sequence::tabulate(-n, n, |j| fine[j.unsigned_abs() as usize]);
    Ok(Kernel {
        kernel,
        error_estimate: err,
        grid_size: 2 * k,
    })
}

/// Result of applying a multiplier to a finite sequence.
#[derive(Debug, Clone)]
pub struct Applied {
    pub seq: Sequence,
    /// ℓ² mass of the periodic result outside the output window, relative to the total.
    pub tail: f64,
    pub grid_size: usize,
}

/// `F(√Δ)f` on `[lo - hw, hi + hw]`, where `[lo, hi]` is the support of `f`.
pub fn apply_symbol(f_sym: &Symbol, f: &Sequence, out_halfwidth: usize) -> Result<Applied> {
    apply_multiplier_windowed(f_sym, f, out_halfwidth)
}

/// As [`apply_symbol`], failing with a truncation error if the tail exceeds `tol`.
pub fn apply_symbol_checked(
    f_sym: &Symbol,
    f: &Sequence,
    out_halfwidth: usize,
    tol: f64,
) -> Result<Applied> {
    let a = apply_symbol(f_sym, f, out_halfwidth)?;
    if a.tail > tol {
        return Err(Error::Truncation {
            tail: a.tail,
            tolerance: tol,
        });
    }
    Ok(a)
}

pub fn apply_multiplier_windowed(
    m: &dyn Multiplier,
    f: &Sequence,
    out_halfwidth: usize,
) -> Result<Applied> {
    let Some((lo, hi)) = f.support() else {
        return Ok(Applied {
            seq: Sequence::zero(),
            tail: 0.0,
            grid_size: 0,
        });
    };
    let grid = SpectralGrid::for_window(f.len(), out_halfwidth);
    let circle = Circle::new(grid.size(), (lo + hi).div_euclid(2));
    let out = circle.apply(m, &circle.embed(f));
    let hw = out_halfwidth as i64;
    let (wlo, whi) = (lo - hw, hi + hw);
    let mut inside = 0.0;
    let mut total = 0.0;
    for (j, v) in out.iter().enumerate() {
        let n = circle.index(j);
        let e = v.norm_sqr();
        total += e;
        if n >= wlo && n <= whi {
            inside += e;
        }
    }
    let tail = if total > 0.0 {
        ((total - inside).max(0.0) / total).sqrt()
    } else {
        0.0
    };
    Ok(Applied {
        seq: Sequence::tabulate(wlo, whi, |n| out[circle.slot(n)]),
        tail,
        grid_size: grid.size(),
    })
}

/// The integers modulo `K`, represented by the window `[base, base + K)`.
///
/// Multipliers act exactly by FFT here, so quantities computed on the whole
/// circle inherit exact Parseval and translation identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Circle {
    pub size: usize,
    pub base: i64,
}

impl Circle {
    pub fn new(size: usize, centre: i64) -> Self {
        assert!(size.is_power_of_two());
        Circle {
            size,
            base: centre - (size / 2) as i64,
        }
    }

    /// A circle at least `DEFAULT_GRID_SIZE` long holding `f` with `margin`
    /// free samples on each side.
    pub fn around(f: &Sequence, margin: usize) -> Self {
        let (lo, hi) = f.support().unwrap_or((0, 0));
        let width = (hi - lo + 1) as usize;
        let grid = SpectralGrid::for_window(width, margin);
        Circle::new(grid.size(), (lo + hi).div_euclid(2))
    }

    #[inline]
    pub fn index(&self, j: usize) -> i64 {
        self.base + j as i64
    }

    #[inline]
    pub fn slot(&self, n: i64) -> usize {
        (n - self.base).rem_euclid(self.size as i64) as usize
    }

    pub fn embed(&self, f: &Sequence) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.size];
        for (n, v) in f.iter() {
            buf[self.slot(n)] += v;
        }
        buf
    }

    pub fn to_sequence(&self, buf: &[Complex64]) -> Sequence {
        Sequence::new(self.base, buf.to_vec())
    }

    /// Forward transform to FFT-bin order (`bin_theta` gives the frequency).
    pub fn spectrum(&self, buf: &[Complex64]) -> Vec<Complex64> {
        let mut s = buf.to_vec();
        // Samples sit at base + j; the phase e^{i·base·θ} cancels on the way back.
        fft_synth(&mut s);
        s
    }

    pub fn synthesize(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let mut s = spec.to_vec();
        fft_analyze(&mut s);
        s
    }

    /// Multiply a spectrum by a precomputed table and transform back.
    pub fn synthesize_with(&self, spec: &[Complex64], table: &[Complex64]) -> Vec<Complex64> {
        let mut s: Vec<Complex64> = spec.iter().zip(table).map(|(a, b)| a * b).collect();
        fft_analyze(&mut s);
        s
    }

    pub fn apply(&self, m: &dyn Multiplier, buf: &[Complex64]) -> Vec<Complex64> {
        let spec = self.spectrum(buf);
        self.synthesize_with(&spec, &m.table(self.size))
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.size)
            .map(|m| lambda_of_theta(bin_theta(m, self.size)))
            .collect()
    }
}
