//! Finitely supported sequences on the integers.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{ksum, ksum_c, KahanSum};

/// A complex sequence on ℤ that vanishes outside `[offset, offset + len)`.
///
/// Stored in canonical form: the first and last stored samples are nonzero,
/// or nothing is stored at all.
#[derive(Debug, Clone, Default)]
pub struct Sequence {
    offset: i64,
    values: Vec<Complex64>,
}

impl Sequence {
    pub fn new(offset: i64, values: Vec<Complex64>) -> Self {
        let mut s = Sequence { offset, values };
        s.canonicalize();
        s
    }

    pub fn from_real(offset: i64, values: &[f64]) -> Self {
        Self::new(offset, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Sequence::default()
    }

    /// Unit sample at `n`.
    pub fn delta(n: i64) -> Self {
        Sequence {
            offset: n,
            values: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Samples `g(n)` for `n` in `lo..=hi`.
    pub fn tabulate(lo: i64, hi: i64, g: impl Fn(i64) -> Complex64) -> Self {
        if hi < lo {
            return Self::zero();
        }
        Self::new(lo, (lo..=hi).map(g).collect())
    }

    fn canonicalize(&mut self) {
        let zero = Complex64::new(0.0, 0.0);
        let Some(first) = self.values.iter().position(|&v| v != zero) else {
            self.values.clear();
            self.offset = 0;
            return;
        };
        let last = self.values.iter().rposition(|&v| v != zero).unwrap();
        if first > 0 || last + 1 < self.values.len() {
            self.values = self.values[first..=last].to_vec();
            self.offset += first as i64;
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Inclusive index range of the stored samples, `None` for the zero sequence.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.values.is_empty() {
            None
        } else {
            Some((self.offset, self.offset + self.values.len() as i64 - 1))
        }
    }

    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64
    }

    pub fn get(&self, n: i64) -> Complex64 {
        let i = n - self.offset;
        if i < 0 || i >= self.values.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }

    /// Samples on `lo..=hi`, zero-filled.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<Complex64> {
        (lo..=hi).map(|n| self.get(n)).collect()
    }

    /// Restriction to `lo..=hi`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        Self::tabulate(lo, hi, |n| self.get(n))
    }

    /// Translation: `(τ_k f)(n) = f(n - k)`.
    pub fn shift(&self, k: i64) -> Self {
        Sequence {
            offset: if self.values.is_empty() { 0 } else { self.offset + k },
            values: self.values.clone(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.offset, self.values.iter().map(|&v| v * c).collect())
    }

    pub fn map(&self, g: impl Fn(Complex64) -> Complex64) -> Self {
        Self::new(self.offset, self.values.iter().map(|&v| g(v)).collect())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Linear combination `a·self + b·other`.
    pub fn axpby(&self, a: Complex64, other: &Sequence, b: Complex64) -> Self {
        match (self.support(), other.support()) {
            (None, None) => Self::zero(),
            (None, Some(_)) => other.scale(b),
            (Some(_), None) => self.scale(a),
            (Some((l1, h1)), Some((l2, h2))) => {
                let (lo, hi) = (l1.min(l2), h1.max(h2));
                Self::tabulate(lo, hi, |n| a * self.get(n) + b * other.get(n))
            }
        }
    }

    /// ℓ² inner product `Σ f(n) conj(g(n))`.
    pub fn inner(&self, other: &Sequence) -> Complex64 {
        ksum_c(self.iter().map(|(n, v)| v * other.get(n).conj()))
    }

    /// Largest absolute sample difference against `other`.
    pub fn max_abs_diff(&self, other: &Sequence) -> f64 {
        (self - other).lp_norm(f64::INFINITY).unwrap()
    }

    /// The ℓ^p (quasi-)norm; `p = ∞` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_slice(&self.values, p)
    }

    pub fn l2_norm(&self) -> f64 {
        lp_norm_slice(&self.values, 2.0).unwrap()
    }

    /// Forward difference `Df(n) = f(n+1) - f(n)`.
    pub fn diff_forward(&self) -> Self {
        let Some((lo, hi)) = self.support() else {
            return Self::zero();
        };
        Self::tabulate(lo - 1, hi, |n| self.get(n + 1) - self.get(n))
    }

    /// Backward difference `D*f(n) = f(n) - f(n-1)`.
    pub fn diff_backward(&self) -> Self {
        let Some((lo, hi)) = self.support() else {
            return Self::zero();
        };
        Self::tabulate(lo, hi + 1, |n| self.get(n) - self.get(n - 1))
    }

    /// Discrete Laplacian `-f(n+1) + 2f(n) - f(n-1)`.
    pub fn laplacian(&self) -> Self {
        let Some((lo, hi)) = self.support() else {
            return Self::zero();
        };
        Self::tabulate(lo - 1, hi + 1, |n| {
            2.0 * self.get(n) - self.get(n + 1) - self.get(n - 1)
        })
    }

    pub fn laplacian_pow(&self, m: usize) -> Self {
        (0..m).fold(self.clone(), |acc, _| acc.laplacian())
    }

    /// `Σ_n n^β f(n)`.
    pub fn moment(&self, beta: u32) -> Complex64 {
        ksum_c(self.iter().map(|(n, v)| v * (n as f64).powi(beta as i32)))
    }

    /// `sup_n (1+|n|)^m max_{0≤ℓ≤m} |Δ^ℓ f(n)|`.
    pub fn schwartz_seminorm(&self, m: u32) -> f64 {
        let mut best = 0.0f64;
        let mut g = self.clone();
        for _ in 0..=m {
            for (n, v) in g.iter() {
                best = best.max((1.0 + n.unsigned_abs() as f64).powi(m as i32) * v.norm());
            }
            g = g.laplacian();
        }
        best
    }

    /// Discrete convolution `(f * g)(n) = Σ_m f(m) g(n - m)`, computed directly.
    pub fn convolve(&self, other: &Sequence) -> Self {
        let (Some((l1, _)), Some((l2, _))) = (self.support(), other.support()) else {
            return Self::zero();
        };
        let mut out = vec![Complex64::new(0.0, 0.0); self.len() + other.len() - 1];
        for (i, &a) in self.values.iter().enumerate() {
            for (j, &b) in other.values.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(l1 + l2, out)
    }

    pub fn to_json(&self) -> SequenceJson {
        SequenceJson {
            offset: self.offset,
            re: self.values.iter().map(|v| v.re).collect(),
            im: Some(self.values.iter().map(|v| v.im).collect()),
        }
    }

    pub fn from_json(j: &SequenceJson) -> Result<Self> {
        let im = match &j.im {
            Some(im) if im.len() != j.re.len() => {
                return Err(Error::Parse(format!(
                    "re has {} entries but im has {}",
                    j.re.len(),
                    im.len()
                )))
            }
            Some(im) => im.clone(),
            None => vec![0.0; j.re.len()],
        };
        if j.re.iter().chain(&im).any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite sample".into()));
        }
        Ok(Self::new(
            j.offset,
            j.re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect(),
        ))
    }
}

/// On-disk form `{"offset", "re", "im"?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceJson {
    pub offset: i64,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl Serialize for Sequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SequenceJson::deserialize(d)?;
        Sequence::from_json(&j).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for Sequence {
    fn eq(&self, other: &Self) -> bool {
        self.offset == other.offset && self.values == other.values
    }
}

impl Add for &Sequence {
    type Output = Sequence;
    fn add(self, rhs: &Sequence) -> Sequence {
        self.axpby(Complex64::new(1.0, 0.0), rhs, Complex64::new(1.0, 0.0))
    }
}

impl Sub for &Sequence {
    type Output = Sequence;
    fn sub(self, rhs: &Sequence) -> Sequence {
        self.axpby(Complex64::new(1.0, 0.0), rhs, Complex64::new(-1.0, 0.0))
    }
}

impl Neg for &Sequence {
    type Output = Sequence;
    fn neg(self) -> Sequence {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<f64> for &Sequence {
    type Output = Sequence;
    fn mul(self, rhs: f64) -> Sequence {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// ℓ^p (quasi-)norm of a slice of samples.
pub fn lp_norm_slice(values: &[Complex64], p: f64) -> Result<f64> {
    lp_norm_abs(values.iter().map(|v| v.norm()), p)
}

/// ℓ^p (quasi-)norm of nonnegative magnitudes.
pub fn lp_norm_abs(abs: impl Iterator<Item = f64> + Clone, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::param(format!("p must be positive, got {p}")));
    }
    if p.is_infinite() {
        return Ok(abs.fold(0.0, f64::max));
    }
    // Rescale by the maximum so large exponents neither overflow nor underflow.
    let m = abs.clone().fold(0.0, f64::max);
    if m == 0.0 {
        return Ok(0.0);
    }
    let s = if p == 2.0 {
        ksum(abs.map(|a| (a / m) * (a / m)))
    } else if p == 1.0 {
        return Ok(ksum(abs));
    } else {
        ksum(abs.map(|a| (a / m).powf(p)))
    };
    Ok(m * s.powf(1.0 / p))
}

/// Unnormalized power sum `Σ |a|^p`, compensated.
pub fn power_sum(abs: impl Iterator<Item = f64>, p: f64) -> f64 {
    let mut s = KahanSum::new();
    for a in abs {
        s.add(a.powf(p));
    }
    s.value()
}
