//! Dyadic intervals, molecules and the constructive Besov/TL decomposition.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpaley::{Partition, DEFAULT_JMIN};
use crate::quad::{Measure, TimeQuadrature};
use crate::seq::{lp_norm_abs, Sequence, SequenceJson};
use crate::spectral::{fft_analyze, fft_synth, fft_synth_chunks, Circle};
use crate::sum::ksum;

/// `I_{ν,k} = [k 2^{-ν}, (k+1) 2^{-ν})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub nu: i32,
    pub k: i64,
}

impl DyadicInterval {
    pub fn new(nu: i32, k: i64) -> Result<Self> {
        if !(-62..=0).contains(&nu) {
            return Err(Error::param(format!("scale ν must lie in [-62, 0], got {nu}")));
        }
        Ok(DyadicInterval { nu, k })
    }

    /// The interval of scale `nu` holding `n`.
    pub fn containing(nu: i32, n: i64) -> Self {
        DyadicInterval { nu, k: n.div_euclid(1i64 << -nu) }
    }

    pub fn len(&self) -> i64 {
        1i64 << -self.nu
    }

    /// `ℓ(I)`
    pub fn ell(&self) -> f64 {
        self.len() as f64
    }

    pub fn lo(&self) -> i64 {
        self.k * self.len()
    }

    /// Last point of `I`.
    pub fn hi(&self) -> i64 {
        self.lo() + self.len() - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.lo()..=self.hi()).contains(&n)
    }

    /// `d(n, I) = min_{m ∈ I} |n - m|`.
    pub fn distance(&self, n: i64) -> i64 {
        (self.lo() - n).max(n - self.hi()).max(0)
    }

    /// `2^j I`: the real dilate about the centre, intersected with ℤ (inclusive bounds).
    pub fn dilate(&self, j: u32) -> (i64, i64) {
        // Twice the real coordinates keeps everything integral.
        let c2 = 2 * self.lo() + self.len();
        let h2 = self.len() << j;
        let lo = (c2 - h2).div_euclid(2) + (c2 - h2).rem_euclid(2);
        let hi = (c2 + h2).div_euclid(2) + (c2 + h2).rem_euclid(2) - 1;
        (lo, hi)
    }

    /// Whether `n ∈ S_j(I)`: `2^j I \ 2^{j-1} I`, and `S_0(I) = I`.
    pub fn in_annulus(&self, j: u32, n: i64) -> bool {
        let (lo, hi) = self.dilate(j);
        if !(lo..=hi).contains(&n) {
            return false;
        }
        if j == 0 {
            return true;
        }
        let (lo1, hi1) = self.dilate(j - 1);
        !(lo1..=hi1).contains(&n)
    }
}

/// `a = Δ^M b` attached to a dyadic interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub interval: DyadicInterval,
    pub m: u32,
    /// `N` for the pointwise flavours, `ε` for the Hardy flavour.
    pub decay: f64,
    pub p: f64,
    b: Sequence,
    a: Sequence,
    /// `(base, L)` when `b` is one period of an `L`-periodic sequence.
    window: Option<(i64, usize)>,
}

impl Molecule {
    pub fn new(interval: DyadicInterval, m: u32, decay: f64, p: f64, b: Sequence) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M must be positive"));
        }
        if !(p > 0.0) || !(decay > 0.0) {
            return Err(Error::param("p and the decay parameter must be positive"));
        }
        let a = b.laplacian_pow(m as usize);
        Ok(Molecule { interval, m, decay, p, b, a, window: None })
    }

    /// `b` sampled on `[base, base + L)` as one period of an `L`-periodic
    /// sequence. Differences of `b` are then taken by FFT on the period,
    /// which keeps their relative accuracy at every order.
    pub fn periodic(interval: DyadicInterval, m: u32, decay: f64, p: f64, base: i64, period: Vec<Complex64>) -> Result<Self> {
        if !period.len().is_power_of_two() {
            return Err(Error::param("period length must be a power of two"));
        }
        let l = period.len();
        let mut mol = Molecule::new(interval, m, decay, p, Sequence::new(base, period))?;
        mol.window = Some((base, l));
        Ok(mol)
    }

    pub fn window(&self) -> Option<(i64, usize)> {
        self.window
    }

    pub fn b(&self) -> &Sequence {
        &self.b
    }

    pub fn a(&self) -> &Sequence {
        &self.a
    }

    pub fn translate(&self, dk: i64) -> Self {
        let interval = DyadicInterval { nu: self.interval.nu, k: self.interval.k + dk };
        let shift = dk * self.interval.len();
        Molecule {
            interval,
            m: self.m,
            decay: self.decay,
            p: self.p,
            b: self.b.shift(shift),
            a: self.a.shift(shift),
            window: self.window.map(|(base, l)| (base + shift, l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `ℓ²` bounds on the annuli `S_j(I)` for `Δ^k b`, `k ≤ M`.
    Hardy,
    /// Pointwise bounds for `Δ^k b`, `k ≤ 2M`.
    Besov,
    /// Pointwise bounds for `D^k b` and `D*^k b`, `k ≤ 4M`.
    Diff,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hardy" => Ok(Flavor::Hardy),
            "besov" => Ok(Flavor::Besov),
            "diff" => Ok(Flavor::Diff),
            _ => Err(Error::Parse(format!("unknown molecule flavour '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeReport {
    pub flavor: Flavor,
    /// Largest ratio of measured size to the bound shape.
    pub constant: f64,
    /// Largest ratio for each derivative order.
    pub per_order: Vec<f64>,
    pub worst_order: usize,
    /// Point (pointwise flavours) or annulus index (Hardy) of the largest ratio.
    pub worst_at: i64,
}

/// Relative size below which spectral bins of a periodic `b` are rounding noise.
const SPECTRAL_FLOOR: f64 = 1e-13;

/// Difference operators used by the verifiers.
#[derive(Debug, Clone, Copy)]
enum Op {
    Lap,
    Fwd,
    Bwd,
}

impl Op {
    fn exact(self, g: &Sequence) -> Sequence {
        match self {
            Op::Lap => g.laplacian(),
            Op::Fwd => g.diff_forward(),
            Op::Bwd => g.diff_backward(),
        }
    }

    fn symbol(self, theta: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -theta);
        match self {
            Op::Lap => Complex64::new(2.0 - 2.0 * theta.cos(), 0.0),
            Op::Fwd => e - 1.0,
            Op::Bwd => 1.0 - e.conj(),
        }
    }
}

/// `op^k b` for `k = 0..=kmax`.
fn derivatives(mol: &Molecule, op: Op, kmax: usize) -> Vec<Sequence> {
    match mol.window {
        Some((base, l)) => {
            let mut spec = mol.b.window(base, base + l as i64 - 1);
            fft_synth(&mut spec);
            // Bins under the rounding floor of the samples carry no information
            // and would dominate the high differences at coarse scales.
            let top = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in spec.iter_mut() {
                if z.norm() < SPECTRAL_FLOOR * top {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
            let sym: Vec<Complex64> = (0..l).map(|m| op.symbol(crate::spectral::bin_theta(m, l))).collect();
            let mut out = Vec::with_capacity(kmax + 1);
            out.push(Sequence::new(base, mol.b.window(base, base + l as i64 - 1)));
            for _ in 1..=kmax {
                spec.iter_mut().zip(&sym).for_each(|(a, b)| *a *= b);
                let mut v = spec.clone();
                fft_analyze(&mut v);
                out.push(Sequence::new(base, v));
            }
            out
        }
        None => {
            let mut out = vec![mol.b.clone()];
            for k in 1..=kmax {
                let next = op.exact(&out[k - 1]);
                out.push(next);
            }
            out
        }
    }
}

/// `(1 + d/ℓ)^{1+N}` tabulated by the integer distance `d`.
struct DecayWeights {
    table: Vec<f64>,
    ell: f64,
    exponent: f64,
}

impl DecayWeights {
    fn new(ell: f64, decay: f64) -> Self {
        DecayWeights { table: vec![], ell, exponent: 1.0 + decay }
    }

    fn get(&mut self, d: i64) -> f64 {
        let d = d as usize;
        while self.table.len() <= d {
            let x = self.table.len() as f64;
            self.table.push((1.0 + x / self.ell).powf(self.exponent));
        }
        self.table[d]
    }
}

/// `max_n |g(n)| (1 + d(n,I)/ℓ)^{1+N} / scale` with its argmax.
fn pointwise_ratio(g: &Sequence, interval: &DyadicInterval, scale: f64, w: &mut DecayWeights) -> (f64, i64) {
    let mut best = (0.0, interval.lo());
    for (n, v) in g.iter() {
        let r = v.norm() * w.get(interval.distance(n)) / scale;
        if r > best.0 {
            best = (r, n);
        }
    }
    best
}

/// Measured constant of `mol` against the bound shapes of the chosen flavour.
///
/// Hardy: `‖Δ^k b‖_{ℓ²(S_j(I))} ≤ 2^{-jε} ℓ^{2(M-k)} |2^j I|^{1/2-1/p}`, `k ≤ M`.
/// Besov: `|Δ^k b(n)| ≤ ℓ^{2(M-k)} |I|^{-1/p} (1 + d(n,I)/ℓ)^{-1-N}`, `k ≤ 2M`.
/// Diff: `|𝔇^k b(n)| ≤ ℓ^{2M-k} |I|^{-1/p} (1 + d(n,I)/ℓ)^{-1-N}`, `k ≤ 4M`,
/// for both `𝔇 = D` and `𝔇 = D*`.
pub fn verify_molecule(mol: &Molecule, flavor: Flavor) -> MoleculeReport {
    let iv = mol.interval;
    let ell = iv.ell();
    let size = iv.len() as f64;
    let m = mol.m as i32;
    let inv_p = 1.0 / mol.p;
    let mut per_order = vec![];
    let mut worst_at = vec![];
    let mut w = DecayWeights::new(ell, mol.decay);
    match flavor {
        Flavor::Besov => {
            for (k, g) in derivatives(mol, Op::Lap, 2 * m as usize).iter().enumerate() {
                let scale = ell.powi(2 * (m - k as i32)) * size.powf(-inv_p);
                let (r, at) = pointwise_ratio(g, &iv, scale, &mut w);
                per_order.push(r);
                worst_at.push(at);
            }
        }
        Flavor::Diff => {
            let fwd = derivatives(mol, Op::Fwd, 4 * m as usize);
            let bwd = derivatives(mol, Op::Bwd, 4 * m as usize);
            for (k, (f, b)) in fwd.iter().zip(&bwd).enumerate() {
                let scale = ell.powi(2 * m - k as i32) * size.powf(-inv_p);
                let a = pointwise_ratio(f, &iv, scale, &mut w);
                let b = pointwise_ratio(b, &iv, scale, &mut w);
                let best = if a.0 >= b.0 { a } else { b };
                per_order.push(best.0);
                worst_at.push(best.1);
            }
        }
        Flavor::Hardy => {
            for (k, g) in derivatives(mol, Op::Lap, m as usize).iter().enumerate() {
                let (lo, hi) = g.support().unwrap_or((iv.lo(), iv.hi()));
                let reach = (iv.distance(lo).max(iv.distance(hi)) as f64 / ell).max(1.0);
                let jmax = (2.0 * reach + 2.0).log2().ceil() as u32 + 1;
                let mut energy = vec![0.0f64; jmax as usize + 1];
                for (n, v) in g.iter() {
                    if let Some(j) = (0..=jmax).find(|&j| iv.in_annulus(j, n)) {
                        energy[j as usize] += v.norm_sqr();
                    }
                }
                let mut best = (0.0f64, 0i64);
                for (j, e) in energy.iter().enumerate() {
                    let bound = (-(j as f64) * mol.decay).exp2()
                        * ell.powi(2 * (m - k as i32))
                        * (size * (j as f64).exp2()).powf(0.5 - inv_p);
                    let r = e.sqrt() / bound;
                    if r > best.0 {
                        best = (r, j as i64);
                    }
                }
                per_order.push(best.0);
                worst_at.push(best.1);
            }
        }
    }
    let (worst_order, constant) = per_order
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    MoleculeReport {
        flavor,
        constant,
        worst_at: worst_at.get(worst_order).copied().unwrap_or(0),
        per_order,
        worst_order,
    }
}

/// One term `s_I a_I` of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub s: f64,
    pub molecule: Molecule,
}

impl Coefficient {
    pub fn interval(&self) -> DyadicInterval {
        self.molecule.interval
    }
}

/// Serialized form: `{nu, k, s, b: {offset, re, im}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientJson {
    pub nu: i32,
    pub k: i64,
    pub s: f64,
    pub b: SequenceJson,
    /// `[base, L]` when `b` is one period of an `L`-periodic sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<[i64; 2]>,
}

impl Coefficient {
    pub fn to_json(&self) -> CoefficientJson {
        CoefficientJson {
            nu: self.molecule.interval.nu,
            k: self.molecule.interval.k,
            s: self.s,
            b: self.molecule.b.to_json(),
            period: self.molecule.window.map(|(base, l)| [base, l as i64]),
        }
    }

    pub fn from_json(j: &CoefficientJson, m: u32, decay: f64, p: f64) -> Result<Self> {
        let interval = DyadicInterval::new(j.nu, j.k)?;
        let b = Sequence::from_json(&j.b)?;
        let molecule = match j.period {
            Some([base, l]) if l > 0 => {
                let l = l as usize;
                Molecule::periodic(interval, m, decay, p, base, b.window(base, base + l as i64 - 1))?
            }
            Some(_) => return Err(Error::Parse("bad period in coefficient".into())),
            None => Molecule::new(interval, m, decay, p, b)?,
        };
        Ok(Coefficient { s: j.s, molecule })
    }
}

/// Nodes per octave: the octave-wise reproducing formula is then exact to ~1e-8.
pub const DECOMPOSE_POINTS_PER_OCTAVE: usize = 24;
/// Intervals with `s_I` below this fraction of the largest are dropped.
pub const DEFAULT_DROP: f64 = 1e-12;
/// Molecules are computed on one period of length `128 ℓ(I)`: `I` widened by
/// about 31 times the largest `t` of its octave, where the kernels are down
/// to `1e-8` of their peak.
const MARGIN: i64 = 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub m: u32,
    /// `N` recorded on the emitted molecules.
    pub decay: f64,
    pub p: f64,
    pub jmin: i32,
    pub points_per_octave: usize,
    pub drop: f64,
    /// Size of the periodic grid carrying `f`; it bounds the coarsest usable scale.
    pub grid_size: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            m: 2,
            decay: 3.0,
            p: 1.0,
            jmin: DEFAULT_JMIN,
            points_per_octave: DECOMPOSE_POINTS_PER_OCTAVE,
            drop: DEFAULT_DROP,
            grid_size: 1 << 14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Sorted by `(ν, k)`.
    pub coefficients: Vec<Coefficient>,
    pub circle: Circle,
    /// `[∫ ξ^{2M} ψ(ξ)² dξ/ξ]^{-1}`
    pub c: f64,
    /// Scales actually scanned.
    pub nu_range: (i32, i32),
    pub dropped: usize,
    /// `Σ s_I` over dropped intervals.
    pub dropped_mass: f64,
    pub options: DecomposeOptions,
}

/// `c = [∫ ξ^{2M} ψ(ξ)² dξ/ξ]^{-1}`.
pub fn reproducing_constant(p: &Partition, m: u32) -> f64 {
    let q = TimeQuadrature::octaves(1, 3, 256, Measure::Log).unwrap();
    1.0 / q.integrate(|x| x.powi(2 * m as i32) * p.psi(x).powi(2))
}

fn window_len(len: i64) -> usize {
    ((len + 4 * MARGIN * len) as usize).next_power_of_two()
}

/// A grid of `size` points holding `f` whose base is a multiple of `align`.
fn aligned_circle(f: &Sequence, size: usize, align: i64) -> Circle {
    let (lo, _) = f.support().unwrap_or((0, 0));
    let base = (lo - size as i64 / 4).div_euclid(align) * align;
    Circle::new(size, base + size as i64 / 2)
}

struct Level {
    nu: i32,
    nodes: Vec<(f64, f64)>,
    /// `ψ(t_i λ)` on the circle bins, per node.
    tables: Vec<Vec<Complex64>>,
}

impl Level {
    fn new(p: &Partition, nu: i32, ppo: usize, lambdas: &[f64]) -> Self {
        let q = TimeQuadrature::octaves(-nu, 1 - nu, ppo, Measure::Log).unwrap();
        let mut nodes = vec![];
        let mut tables = vec![];
        for (t, w) in q.iter() {
            let table: Vec<Complex64> = lambdas.iter().map(|&l| Complex64::new(p.psi(t * l), 0.0)).collect();
            if table.iter().any(|v| v.re != 0.0) {
                nodes.push((t, w));
                tables.push(table);
            }
        }
        Level { nu, nodes, tables }
    }

    fn fields(&self, circle: &Circle, spec: &[Complex64]) -> Vec<Vec<Complex64>> {
        self.tables.par_iter().map(|t| circle.synthesize_with(spec, t)).collect()
    }

    /// `s_I` for every interval of this scale on the circle, in slot order.
    fn coefficients(&self, circle: &Circle, fields: &[Vec<Complex64>], p: f64) -> Vec<(DyadicInterval, f64)> {
        let k = circle.size;
        let mut mass = vec![0.0f64; k];
        for ((_, w), g) in self.nodes.iter().zip(fields) {
            for (a, z) in mass.iter_mut().zip(g) {
                *a += w * z.norm();
            }
        }
        let len = 1usize << -self.nu;
        let weight = if p.is_infinite() { 1.0 } else { (len as f64).powf(1.0 / p) };
        mass.chunks(len)
            .enumerate()
            .map(|(i, c)| {
                let iv = DyadicInterval::containing(self.nu, circle.index(i * len));
                (iv, weight * c.iter().copied().fold(0.0, f64::max))
            })
            .collect()
    }
}

/// Decomposition with the default partition options.
pub fn decompose(p: &Partition, f: &Sequence, m: u32, p_exp: f64, jmin: i32) -> Result<Decomposition> {
    decompose_with(p, f, &DecomposeOptions { m, p: p_exp, jmin, ..Default::default() })
}

/// `f = c Σ_ν Σ_{I ∈ 𝓘_ν} s_I a_I` with
/// `s_I = |I|^{1/p} sup_{m∈I} ∫_{2^{-ν}}^{2^{1-ν}} |ψ(t√Δ)f(m)| dt/t` and
/// `b_I = s_I^{-1} ∫ t^{2M} ψ(t√Δ)[ψ(t√Δ)f · 1_I] dt/t` over the same octave.
///
/// Works on a periodic grid whose base is aligned with the coarsest scale,
/// so that every scale tiles it. Scales whose molecules would not fit a
/// window of `128` lengths are beyond the grid and are not scanned.
pub fn decompose_with(p: &Partition, f: &Sequence, opts: &DecomposeOptions) -> Result<Decomposition> {
    if opts.m == 0 {
        return Err(Error::param("M must be positive"));
    }
    if !(opts.p > 0.0) {
        return Err(Error::param("p must be positive"));
    }
    if opts.jmin > 0 || opts.points_per_octave == 0 || !opts.grid_size.is_power_of_two() {
        return Err(Error::param("need jmin <= 0, a positive node count and a power-of-two grid"));
    }
    let c = reproducing_constant(p, opts.m);
    let width = f.support().map(|(lo, hi)| (hi - lo + 1) as usize).unwrap_or(1);
    let size = opts.grid_size.max((2 * (width + 2048)).next_power_of_two());
    let mut nu_floor = 0;
    while nu_floor > opts.jmin && window_len(1i64 << (1 - nu_floor)) <= size {
        nu_floor -= 1;
    }
    let circle = aligned_circle(f, size, 1i64 << -nu_floor);
    let mut out = Decomposition {
        coefficients: vec![],
        circle,
        c,
        nu_range: (nu_floor, 0),
        dropped: 0,
        dropped_mass: 0.0,
        options: opts.clone(),
    };
    if f.is_zero() {
        return Ok(out);
    }
    let spec = circle.spectrum(&circle.embed(f));
    let lambdas = circle.lambdas();
    let levels: Vec<Level> = (nu_floor..=0)
        .map(|nu| Level::new(p, nu, opts.points_per_octave, &lambdas))
        .collect();

    // First pass: coefficients only, to fix the drop threshold.
    let all: Vec<Vec<(DyadicInterval, f64)>> = levels
        .iter()
        .map(|lv| lv.coefficients(&circle, &lv.fields(&circle, &spec), opts.p))
        .collect();
    let top = all.iter().flatten().map(|x| x.1).fold(0.0, f64::max);
    let threshold = opts.drop * top;

    for (lv, coeffs) in levels.iter().zip(&all) {
        let (keep, drop): (Vec<&(DyadicInterval, f64)>, Vec<_>) =
            coeffs.iter().partition(|x| x.1 > threshold && x.1 > 0.0);
        out.dropped += drop.len();
        out.dropped_mass += ksum(drop.iter().map(|x| x.1));
        if keep.is_empty() {
            continue;
        }
        let fields = lv.fields(&circle, &spec);
        let len = 1i64 << -lv.nu;
        let l = window_len(len);
        let wl = Circle::new(l, 0).lambdas();
        let weights: Vec<Vec<f64>> = lv
            .nodes
            .iter()
            .map(|&(t, w)| {
                let tm = t.powi(2 * opts.m as i32);
                wl.iter().map(|&x| w * tm * p.psi(t * x)).collect()
            })
            .collect();
        // Bins where some node weight is nonzero.
        let active: Vec<usize> = (0..l).filter(|&m| weights.iter().any(|w| w[m] != 0.0)).collect();
        let twiddle: Vec<Complex64> = (0..l)
            .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / l as f64))
            .collect();
        let mut mols: Vec<Coefficient> = keep
            .par_iter()
            .map(|&&(iv, s)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); l];
                let mut scratch = vec![Complex64::new(0.0, 0.0); l];
                let mut spec = vec![Complex64::new(0.0, 0.0); l];
                for (g, wt) in fields.iter().zip(&weights) {
                    let x: Vec<Complex64> = (iv.lo()..=iv.hi()).map(|n| g[circle.slot(n)]).collect();
                    sparse_synth(&x, &twiddle, &mut scratch, &mut spec);
                    for &m in &active {
                        acc[m] += spec[m] * wt[m];
                    }
                }
                fft_analyze(&mut acc);
                // acc[j] holds b(lo + j) periodically; centre the period on I.
                let half = (l as i64 - len) / 2;
                let base = iv.lo() - half;
                let inv = 1.0 / s;
                let period: Vec<Complex64> = (0..l as i64)
                    .map(|j| acc[(j - half).rem_euclid(l as i64) as usize] * inv)
                    .collect();
                Coefficient {
                    s,
                    molecule: Molecule::periodic(iv, opts.m, opts.decay, opts.p, base, period).unwrap(),
                }
            })
            .collect();
        out.coefficients.append(&mut mols);
    }
    out.coefficients.sort_by_key(|c| c.molecule.interval);
    Ok(out)
}

/// `X[m] = Σ_{n<|x|} x[n] e^{2πi nm/L}` for a block at the start of an
/// otherwise empty length-`L` buffer: `L/|x|` transforms of length `|x|`.
fn sparse_synth(x: &[Complex64], twiddle: &[Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
    let (b, l) = (x.len(), out.len());
    let r = l / b;
    for (res, chunk) in scratch.chunks_mut(b).enumerate() {
        let mut idx = 0;
        for (y, v) in chunk.iter_mut().zip(x) {
            *y = v * twiddle[idx];
            idx += res;
            if idx >= l {
                idx -= l;
            }
        }
    }
    fft_synth_chunks(scratch, b);
    for (res, chunk) in scratch.chunks(b).enumerate() {
        for (q, y) in chunk.iter().enumerate() {
            out[q * r + res] = *y;
        }
    }
}

impl Decomposition {
    /// `c Σ s_I a_I` folded onto the grid.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.circle.size];
        for co in &self.coefficients {
            let w = self.c * co.s;
            for (n, v) in co.molecule.a().iter() {
                out[self.circle.slot(n)] += v * w;
            }
        }
        out
    }

    pub fn reconstruct_sequence(&self) -> Sequence {
        self.circle.to_sequence(&self.reconstruct())
    }

    /// `‖f - c Σ s_I a_I‖₂ / ‖f‖₂` on the grid.
    pub fn residual(&self, f: &Sequence) -> f64 {
        let r = self.reconstruct();
        let e = self.circle.embed(f);
        let num = ksum(r.iter().zip(&e).map(|(a, b)| (a - b).norm_sqr()));
        let den = ksum(e.iter().map(|z| z.norm_sqr()));
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Sum of `s_I` at each scale, finest first.
    pub fn mass_by_scale(&self) -> Vec<(i32, f64)> {
        let mut v: Vec<(i32, f64)> = (self.nu_range.0..=self.nu_range.1).rev().map(|nu| (nu, 0.0)).collect();
        for co in &self.coefficients {
            let i = (-co.molecule.interval.nu) as usize;
            v[i].1 += co.s;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientStyle {
    Besov,
    Tl,
}

/// Besov: `[Σ_ν 2^{ναq} (Σ_I |s_I|^p)^{q/p}]^{1/q}`;
/// TL: `‖[Σ_ν Σ_I (2^{να} |I|^{-1/p} |s_I| 1_I)^q]^{1/q}‖_p`.
pub fn coefficient_norm(coeffs: &[Coefficient], alpha: f64, p: f64, q: f64, style: CoefficientStyle) -> Result<f64> {
    if !(p > 0.0) || !(q > 0.0) {
        return Err(Error::param("p and q must be positive"));
    }
    if coeffs.is_empty() {
        return Ok(0.0);
    }
    match style {
        CoefficientStyle::Besov => {
            let mut by_scale: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
            for c in coeffs {
                by_scale.entry(c.interval().nu).or_default().push(c.s.abs());
            }
            let terms: Vec<f64> = by_scale
                .iter()
                .map(|(&nu, s)| Ok((nu as f64 * alpha).exp2() * lp_norm_abs(s.iter().copied(), p)?))
                .collect::<Result<_>>()?;
            lp_norm_abs(terms.into_iter(), q)
        }
        CoefficientStyle::Tl => {
            // Piecewise constant in n: cut at every interval end.
            let mut cuts: Vec<i64> = coeffs.iter().flat_map(|c| [c.interval().lo(), c.interval().hi() + 1]).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut sorted: Vec<(i64, i64, f64)> = coeffs
                .iter()
                .map(|c| {
                    let iv = c.interval();
                    let h = (iv.nu as f64 * alpha).exp2() * (iv.len() as f64).powf(-1.0 / p) * c.s.abs();
                    (iv.lo(), iv.hi(), h)
                })
                .collect();
            sorted.sort_by_key(|x| x.0);
            let mut pieces = vec![];
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let vals = sorted
                    .iter()
                    .take_while(|x| x.0 <= a)
                    .filter(|x| x.1 >= a)
                    .map(|x| x.2);
                let v = if q.is_infinite() {
                    vals.fold(0.0, f64::max)
                } else {
                    ksum(vals.map(|h| h.powf(q))).powf(1.0 / q)
                };
                pieces.push(((b - a) as f64, v));
            }
            if p.is_infinite() {
                return Ok(pieces.iter().map(|x| x.1).fold(0.0, f64::max));
            }
            let top = pieces.iter().map(|x| x.1).fold(0.0, f64::max);
            if top == 0.0 {
                return Ok(0.0);
            }
            Ok(top * ksum(pieces.iter().map(|&(n, v)| n * (v / top).powf(p))).powf(1.0 / p))
        }
    }
}

/// A random `(p, 2)` atom on `I` with vanishing moments of order `0..=order`
/// and `‖a‖₂ = |I|^{1/2 - 1/p}`.
pub fn make_classical_atom(interval: DyadicInterval, p: f64, order: u32, seed: u64) -> Result<Sequence> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!("atoms need 0 < p <= 1, got {p}")));
    }
    let len = interval.len() as usize;
    let dim = order as usize + 1;
    if len < dim + 1 {
        return Err(Error::Infeasible(format!(
            "{dim} vanishing moments need an interval longer than {dim}, got {len}"
        )));
    }
    // Orthonormal basis of the polynomials of degree <= order on I, by
    // twice-repeated Gram-Schmidt in a centred, scaled variable.
    let centre = (len as f64 - 1.0) / 2.0;
    let x: Vec<f64> = (0..len).map(|i| (i as f64 - centre) / centre.max(1.0)).collect();
    let mut basis: Vec<Vec<f64>> = vec![];
    for d in 0..dim {
        let mut v: Vec<f64> = x.iter().map(|&t| t.powi(d as i32)).collect();
        for _ in 0..2 {
            for u in &basis {
                let c = ksum(v.iter().zip(u).map(|(a, b)| a * b));
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = ksum(v.iter().map(|a| a * a)).sqrt();
        if n < 1e-10 {
            return Err(Error::Infeasible("moment system is degenerate".into()));
        }
        v.iter_mut().for_each(|a| *a /= n);
        basis.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..2 {
        for u in &basis {
            let c = ksum(a.iter().zip(u).map(|(x, y)| x * y));
            a.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = ksum(a.iter().map(|v| v * v)).sqrt();
    if n == 0.0 {
        return Err(Error::Infeasible("projection vanished".into()));
    }
    let target = (len as f64).powf(0.5 - 1.0 / p);
    Ok(Sequence::from_real(interval.lo(), &a.iter().map(|v| v * target / n).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn packet(theta0: f64, width: i64) -> Sequence {
        // Raised-cosine window: compact in n and very narrow in θ.
        Sequence::tabulate(-width, width, |n| {
            let x = n as f64 / width as f64;
            let env = (std::f64::consts::FRAC_PI_2 * x).cos().powi(12);
            Complex64::from_polar(env, theta0 * n as f64)
        })
    }

    #[test]
    fn interval_geometry() {
        let i = DyadicInterval::new(-2, 3).unwrap();
        assert_eq!((i.lo(), i.hi(), i.len()), (12, 15, 4));
        assert_eq!(i.distance(10), 2);
        assert_eq!(i.distance(13), 0);
        assert_eq!(i.distance(20), 5);
        assert_eq!(i.dilate(0), (12, 15));
        assert_eq!(i.dilate(1), (10, 17));
        let unit = DyadicInterval::new(0, 5).unwrap();
        assert_eq!(unit.dilate(1), (5, 6));
        assert_eq!(unit.dilate(2), (4, 7));
        for j in 0..6 {
            let (lo, hi) = i.dilate(j);
            assert_eq!(hi - lo + 1, 4 << j);
        }
        assert!(DyadicInterval::new(1, 0).is_err());
    }

    proptest! {
        #[test]
        fn intervals_tile(nu in -20i32..=0, n in -(1i64 << 20)..(1i64 << 20)) {
            let i = DyadicInterval::containing(nu, n);
            prop_assert!(i.contains(n));
            let (next, prev) = (DyadicInterval { nu, k: i.k + 1 }, DyadicInterval { nu, k: i.k - 1 });
            prop_assert!(!next.contains(n) && !prev.contains(n));
        }
    }

    #[test]
    fn constant_matches_octave_sums() {
        let p = Partition::default();
        let c = reproducing_constant(&p, 2);
        let q = TimeQuadrature::octaves(0, 20, 64, Measure::Log).unwrap();
        for lam in [0.01, 0.3, 1.7] {
            let s = q.integrate(|t| (t * lam).powi(4) * p.psi(t * lam).powi(2));
            assert!((c * s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_input_gives_empty_list() {
        let d = decompose(&Partition::default(), &Sequence::zero(), 2, 1.0, -10).unwrap();
        assert!(d.coefficients.is_empty());
        assert_eq!(coefficient_norm(&d.coefficients, 0.0, 1.0, 1.0, CoefficientStyle::Besov).unwrap(), 0.0);
    }

    #[test]
    fn band_limited_reconstruction_and_concentration() {
        let p = Partition::default();
        // λ = 2 sin(θ/2) = 0.375 sits in the middle of the scales ν = -4..-2.
        let theta = 2.0 * (0.1875f64).asin();
        let f = packet(theta, 600);
        let d = decompose(&p, &f, 2, 1.0, DEFAULT_JMIN).unwrap();
        let res = d.residual(&f);
        assert!(res < 1e-6, "residual {res}");
        let mass = d.mass_by_scale();
        let total: f64 = mass.iter().map(|x| x.1).sum();
        let off: f64 = mass.iter().filter(|x| !(-4..=-2).contains(&x.0)).map(|x| x.1).sum();
        assert!(off <= 1e-6 * total, "off-band {off} of {total}");
        for w in d.coefficients.windows(2) {
            assert!(w[0].molecule.interval < w[1].molecule.interval);
        }
    }

    #[test]
    fn emitted_molecules_are_molecules() {
        let p = Partition::default();
        let f = packet(1.0, 40);
        let d = decompose(&p, &f, 2, 1.0, -8).unwrap();
        // The multiple is dominated by sup x^{4M} ψ(x) near the top of the
        // support of ψ; it is large but the same order for every molecule.
        let cs: Vec<f64> = d
            .coefficients
            .iter()
            .map(|co| verify_molecule(&co.molecule, Flavor::Besov).constant)
            .collect();
        let lo = cs.iter().copied().fold(f64::MAX, f64::min);
        let hi = cs.iter().copied().fold(0.0, f64::max);
        assert!(lo > 1.0 && hi < 1e8 && hi / lo < 1e3, "{lo} {hi}");
        let co = &d.coefficients[d.coefficients.len() / 2];
        assert_eq!(co.molecule.a(), &co.molecule.b().laplacian_pow(2));
    }

    #[test]
    fn json_roundtrip_keeps_the_period() {
        let d = decompose(&Partition::default(), &packet(1.0, 10), 2, 1.0, -3).unwrap();
        let co = &d.coefficients[0];
        let j = serde_json::to_string(&co.to_json()).unwrap();
        let back = Coefficient::from_json(&serde_json::from_str(&j).unwrap(), 2, 3.0, 1.0).unwrap();
        assert_eq!(&back, co);
    }

    #[test]
    fn spectral_and_exact_differences_agree_inside() {
        let iv = DyadicInterval::new(-3, 0).unwrap();
        let b: Vec<Complex64> = (0..64)
            .map(|j| {
                let x = (j as f64 - 32.0) / 4.0;
                Complex64::new((-0.5 * x * x).exp(), 0.1 * x)
            })
            .collect();
        let plain = Molecule::new(iv, 1, 2.0, 1.0, Sequence::new(-28, b.clone())).unwrap();
        let per = Molecule::periodic(iv, 1, 2.0, 1.0, -28, b).unwrap();
        for op in [Op::Lap, Op::Fwd, Op::Bwd] {
            let a = derivatives(&plain, op, 3);
            let c = derivatives(&per, op, 3);
            for n in -10..10 {
                assert!((a[3].get(n) - c[3].get(n)).norm() < 1e-9, "{op:?} {n}");
            }
        }
    }

    fn gaussian_molecule(iv: DyadicInterval, centre: f64) -> Molecule {
        let ell = iv.ell();
        let b = Sequence::tabulate(iv.lo() - 60 * iv.len(), iv.hi() + 60 * iv.len(), |n| {
            let x = (n as f64 - centre) / (2.0 * ell);
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        });
        Molecule::new(iv, 2, 3.0, 1.0, b).unwrap()
    }

    #[test]
    fn hand_built_bump_and_far_bump() {
        let iv = DyadicInterval::new(-4, 2).unwrap();
        let mol = gaussian_molecule(iv, iv.lo() as f64 + 8.0);
        let c = verify_molecule(&mol, Flavor::Besov).constant;
        let scaled = Molecule::new(iv, 2, 3.0, 1.0, mol.b().scale(Complex64::new(1.0 / c, 0.0))).unwrap();
        let r = verify_molecule(&scaled, Flavor::Besov).constant;
        assert!(r <= 1.01 && r > 0.99);
        let far = gaussian_molecule(iv, iv.lo() as f64 + 50.0 * 16.0);
        let far = Molecule::new(iv, 2, 3.0, 1.0, far.b().scale(Complex64::new(1.0 / c, 0.0))).unwrap();
        assert!(verify_molecule(&far, Flavor::Besov).constant > 1e3);
    }

    #[test]
    fn verification_is_translation_invariant() {
        let iv = DyadicInterval::new(-3, -1).unwrap();
        let mol = gaussian_molecule(iv, iv.lo() as f64 + 3.0);
        for flavor in [Flavor::Besov, Flavor::Hardy, Flavor::Diff] {
            let a = verify_molecule(&mol, flavor);
            let b = verify_molecule(&mol.translate(17), flavor);
            assert_eq!(a.constant, b.constant);
        }
    }

    #[test]
    fn classical_atoms() {
        let iv = DyadicInterval::new(-4, 3).unwrap();
        let a = make_classical_atom(iv, 1.0, 0, 9).unwrap();
        assert!(a.moment(0).norm() < 1e-14);
        assert!((a.l2_norm() - 16f64.powf(-0.5)).abs() < 1e-12);
        let a = make_classical_atom(iv, 0.5, 1, 10).unwrap();
        for beta in 0..=1 {
            let scale: f64 = a.iter().map(|(n, v)| (n as f64).powi(beta as i32) * v.norm()).sum();
            assert!(a.moment(beta).norm() <= 1e-12 * scale);
        }
        assert!((a.l2_norm() - 16f64.powf(-1.5)).abs() < 1e-12 * 16f64.powf(-1.5));
        assert!(make_classical_atom(DyadicInterval::new(-1, 0).unwrap(), 1.0, 1, 0).is_err());
    }

    #[test]
    fn coefficient_norms_by_hand() {
        let mk = |nu, k, s| Coefficient {
            s,
            molecule: Molecule::new(DyadicInterval::new(nu, k).unwrap(), 1, 1.0, 1.0, Sequence::delta(0)).unwrap(),
        };
        let cs = vec![mk(0, 0, 1.0), mk(0, 1, 2.0), mk(-1, 0, 4.0)];
        // Besov with α = 1, p = 1, q = 2: levels 0 → 3, -1 → 4/2.
        let b = coefficient_norm(&cs, 1.0, 1.0, 2.0, CoefficientStyle::Besov).unwrap();
        assert!((b - (9.0f64 + 4.0).sqrt()).abs() < 1e-14);
        // TL with α = 0, p = 1, q = 1: n=0 → 1 + 2, n=1 → 2 + 2.
        let t = coefficient_norm(&cs, 0.0, 1.0, 1.0, CoefficientStyle::Tl).unwrap();
        assert!((t - 7.0).abs() < 1e-14);
    }
}
