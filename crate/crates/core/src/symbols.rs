//! Named symbols for the command line: `one`, `heat:t`, `power:k`,
//! `band:R`, `psi:j`, `imagpower:σ[:J]`, `riesz[:forward|backward]`, and
//! tabulated symbols read from `(λ, re, im)` rows.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lpaley::Partition;
use crate::multop::{band_bump, cut_imaginary_power, Variant};
use crate::spectral::Symbol;

/// Default `J` of `imagpower`: the power is cut off below `λ = 8·2^{-J}`.
pub const DEFAULT_IMAGPOWER_CUT: i32 = 10;

#[derive(Debug, Clone)]
pub enum NamedSymbol {
    Plain(Symbol),
    /// Depends on the sign of `θ`, so it is not a function of `λ`.
    Riesz(Variant),
}

fn num(s: &str, whole: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{s}' in symbol '{whole}'")))
}

/// Parses every registry name except `custom:`, which needs file access.
pub fn parse(spec: &str) -> Result<NamedSymbol> {
    let parts: Vec<&str> = spec.split(':').collect();
    let plain = |s| Ok(NamedSymbol::Plain(s));
    match parts.as_slice() {
        ["one"] => plain(Symbol::one()),
        ["heat", t] => {
            let t = num(t, spec)?;
            if !(t > 0.0) {
                return Err(Error::param("heat time must be positive"));
            }
            plain(Symbol::heat(t))
        }
        ["power", k] => {
            let k = num(k, spec)?;
            if k < 0.0 {
                return Err(Error::param("power symbols must be bounded on [0, 2]"));
            }
            plain(Symbol::power(k))
        }
        ["band", r] => {
            let r = num(r, spec)?;
            if !(r > 0.0 && r <= 2.0) {
                return Err(Error::param("band scale R must lie in (0, 2]"));
            }
            plain(band_bump(r))
        }
        ["psi", j] => {
            let j: i32 = j.parse().map_err(|_| Error::Parse(format!("bad j in '{spec}'")))?;
            plain(Partition::default().block_symbol(j))
        }
        ["imagpower", s] | ["imagpower", s, _] => {
            let sigma = num(s, spec)?;
            let cut = match parts.get(2) {
                Some(c) => c.parse().map_err(|_| Error::Parse(format!("bad cut in '{spec}'")))?,
                None => DEFAULT_IMAGPOWER_CUT,
            };
            let part = Partition::default();
            plain(cut_imaginary_power(sigma, cut, move |x| part.eta(x)))
        }
        ["riesz"] => Ok(NamedSymbol::Riesz(Variant::Forward)),
        ["riesz", v] => Ok(NamedSymbol::Riesz(v.parse()?)),
        _ => Err(Error::Parse(format!("unknown symbol '{spec}'"))),
    }
}

/// Piecewise-linear symbol through `(λ, re, im)` rows, constant beyond the ends.
pub fn tabulated(label: impl Into<String>, mut rows: Vec<(f64, f64, f64)>) -> Result<Symbol> {
    if rows.is_empty() {
        return Err(Error::param("tabulated symbol has no rows"));
    }
    if rows.iter().any(|r| !(r.0.is_finite() && r.1.is_finite() && r.2.is_finite())) {
        return Err(Error::param("tabulated symbol has non-finite entries"));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::param("tabulated symbol repeats a λ"));
    }
    Ok(Symbol::new(label, move |x| {
        let i = rows.partition_point(|r| r.0 <= x);
        let (a, b) = if i == 0 {
            (rows[0], rows[0])
        } else if i == rows.len() {
            (rows[i - 1], rows[i - 1])
        } else {
            (rows[i - 1], rows[i])
        };
        if a.0 == b.0 {
            return Complex64::new(a.1, a.2);
        }
        let w = (x - a.0) / (b.0 - a.0);
        Complex64::new(a.1 + w * (b.1 - a.1), a.2 + w * (b.2 - a.2))
    }))
}
