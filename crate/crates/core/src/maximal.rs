//! Hardy–Littlewood and Peetre maximal functions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lpaley::Partition;
use crate::seq::Sequence;
use crate::spectral::{Circle, DEFAULT_HALFWIDTH};

/// `𝓜_r f(n) = sup_{I ∋ n} (|I|^{-1} Σ_{m∈I} |f(m)|^r)^{1/r}` over integer
/// intervals inside `[n - W, n + W]`, evaluated on the support of `f`
/// widened by `W`.
pub fn hl_maximal(f: &Sequence, r: f64, search_halfwidth: usize) -> Result<Sequence> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param(format!("r must be positive, got {r}")));
    }
    let Some((lo, hi)) = f.support() else {
        return Ok(Sequence::zero());
    };
    let w = search_halfwidth as i64;
    let (a0, b0) = (lo - 2 * w, hi + 2 * w);
    let mut prefix = vec![0.0f64];
    for n in a0..=b0 {
        let v = f.get(n).norm().powf(r);
        prefix.push(prefix.last().unwrap() + v);
    }
    let sum = |a: i64, b: i64| prefix[(b - a0 + 1) as usize] - prefix[(a - a0) as usize];
    Ok(Sequence::tabulate(lo - w, hi + w, |n| {
        let mut best = 0.0f64;
        for a in n - w..=n {
            for b in n..=n + w {
                best = best.max(sum(a, b).max(0.0) / (b - a + 1) as f64);
            }
        }
        Complex64::new(best.powf(1.0 / r), 0.0)
    }))
}

/// Lower envelope of lines over the integer points `0..size`.
struct LiChao {
    size: usize,
    lines: Vec<Option<(f64, f64)>>,
}

impl LiChao {
    fn new(size: usize) -> Self {
        LiChao {
            size,
            lines: vec![None; 4 * size.max(1)],
        }
    }

    fn insert(&mut self, line: (f64, f64)) {
        self.insert_at(1, 0, self.size - 1, line);
    }

    fn insert_at(&mut self, node: usize, lo: usize, hi: usize, mut line: (f64, f64)) {
        let eval = |l: (f64, f64), x: usize| l.0 * x as f64 + l.1;
        let Some(mut cur) = self.lines[node] else {
            self.lines[node] = Some(line);
            return;
        };
        let mid = (lo + hi) / 2;
        if eval(line, mid) < eval(cur, mid) {
            std::mem::swap(&mut cur, &mut line);
            self.lines[node] = Some(cur);
        }
        if lo == hi {
            return;
        }
        if eval(line, lo) < eval(cur, lo) {
            self.insert_at(2 * node, lo, mid, line);
        } else if eval(line, hi) < eval(cur, hi) {
            self.insert_at(2 * node + 1, mid + 1, hi, line);
        }
    }

    fn query(&self, x: usize) -> f64 {
        let (mut node, mut lo, mut hi) = (1, 0, self.size - 1);
        let mut best = f64::INFINITY;
        loop {
            if let Some(l) = self.lines[node] {
                best = best.min(l.0 * x as f64 + l.1);
            }
            if lo == hi {
                return best;
            }
            let mid = (lo + hi) / 2;
            if x <= mid {
                node *= 2;
                hi = mid;
            } else {
                node = 2 * node + 1;
                lo = mid + 1;
            }
            if self.lines.get(node).is_none() {
                return best;
            }
        }
    }
}

/// `sup_m v(m) (1 + |m - n|/s)^{-λ}` for `n` in `0..v.len()`.
///
/// With `u = v^{-1/λ}` the supremum is `(min_m u(m)(1 + |n-m|/s))^{-λ}`, a
/// lower envelope of half-lines; two sweeps with a Li Chao tree give it in
/// `O(len log len)`. With `periodic`, distances are taken on the circle.
pub fn peetre_envelope(v: &[f64], s: f64, lambda: f64, periodic: bool) -> Vec<f64> {
    let k = v.len();
    if k == 0 {
        return vec![];
    }
    let copies = if periodic { 3 } else { 1 };
    let size = copies * k;
    let shift = if periodic { k } else { 0 };
    let u = |x: usize| {
        let a = v[x % k];
        if a > 0.0 {
            Some(a.powf(-1.0 / lambda))
        } else {
            None
        }
    };
    let mut best = vec![f64::INFINITY; k];
    // Left to right: lines from sources at x apply to n ≥ x.
    let mut tree = LiChao::new(size);
    for x in 0..size {
        if let Some(ux) = u(x) {
            tree.insert((ux / s, ux * (1.0 - x as f64 / s)));
        }
        if x >= shift && x < shift + k {
            best[x - shift] = best[x - shift].min(tree.query(x));
        }
    }
    let mut tree = LiChao::new(size);
    for x in (0..size).rev() {
        if let Some(ux) = u(x) {
            tree.insert((-ux / s, ux * (1.0 + x as f64 / s)));
        }
        if x >= shift && x < shift + k {
            best[x - shift] = best[x - shift].min(tree.query(x));
        }
    }
    best.into_iter()
        .map(|b| if b.is_finite() { b.powf(-lambda) } else { 0.0 })
        .collect()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("λ must be positive, got {lambda}")));
    }
    Ok(())
}

/// `φ(s√Δ)f` Peetre-maximized at scale `s`, on the circle around `f`.
fn peetre_on_circle(p: &Partition, s: f64, lambda: f64, f: &Sequence) -> (Circle, Vec<f64>) {
    let circle = Circle::around(f, DEFAULT_HALFWIDTH);
    let spec = circle.spectrum(&circle.embed(f));
    let table: Vec<Complex64> = circle
        .lambdas()
        .iter()
        .map(|&l| Complex64::new(p.psi(s * l), 0.0))
        .collect();
    let block = circle.synthesize_with(&spec, &table);
    let abs: Vec<f64> = block.iter().map(|z| z.norm()).collect();
    (circle, peetre_envelope(&abs, s, lambda, true))
}

fn window(circle: &Circle, f: &Sequence, v: &[f64]) -> Sequence {
    let (lo, hi) = f.support().unwrap();
    let hw = DEFAULT_HALFWIDTH as i64;
    Sequence::tabulate(lo - hw, hi + hw, |n| Complex64::new(v[circle.slot(n)], 0.0))
}

/// `sup_m |ψ_j(√Δ)f(m)| / (1 + 2^j|m - n|)^λ`.
///
/// The block and the supremum live on the periodic grid around `f`; the
/// result is reported on the support of `f` widened by the default half-width.
pub fn peetre_max(p: &Partition, j: i32, lambda: f64, f: &Sequence) -> Result<Sequence> {
    check_lambda(lambda)?;
    if f.is_zero() || j >= 1 {
        return Ok(Sequence::zero());
    }
    let (circle, v) = peetre_on_circle(p, (-j as f64).exp2(), lambda, f);
    Ok(window(&circle, f, &v))
}

/// `sup_m |ψ(s√Δ)f(m)| / (1 + |m - n|/s)^λ`.
pub fn peetre_max_continuous(p: &Partition, s: f64, lambda: f64, f: &Sequence) -> Result<Sequence> {
    check_lambda(lambda)?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::param(format!("scale must be positive, got {s}")));
    }
    if f.is_zero() {
        return Ok(Sequence::zero());
    }
    let (circle, v) = peetre_on_circle(p, s, lambda, f);
    Ok(window(&circle, f, &v))
}
