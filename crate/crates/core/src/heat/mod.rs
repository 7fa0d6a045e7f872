//! The heat semigroup `e^{-tΔ}` on ℤ: kernel values, derivatives, complex time.

pub mod bessel;
pub mod sweep;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::Sequence;
use crate::spectral::{synthesize_kernel, Applied, SpectralGrid, Symbol};

pub use bessel::scaled_bessel_i;
pub use sweep::{decay_sweep, SweepKind, SweepParams, SweepPoint, SweepReport};

/// Agreement demanded between the Bessel and quadrature routes.
pub const ROUTE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Bessel,
    Quadrature,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Grid for trapezoid quadrature of `e^{-2z(1-cos θ)} cos(nθ)`: the aliased
/// terms `h_z(n ± K)` are far below roundoff.
fn quadrature_grid(z_abs: f64, n: usize) -> SpectralGrid {
    let need = 2.0 * (n as f64 + 4.0 * z_abs + 13.0 * z_abs.sqrt() + 40.0);
    SpectralGrid::new((need.ceil() as usize).next_power_of_two().max(64)).unwrap()
}

/// `h_t(n)` for `n = 0..=nmax`, by the Bessel route.
pub fn heat_profile(t: f64, nmax: usize) -> Result<Vec<f64>> {
    check_time(t)?;
    Ok(scaled_bessel_i(2.0 * t, nmax))
}

/// `h_t` on `[-nmax, nmax]` as a sequence.
pub fn heat_kernel_seq(t: f64, nmax: usize) -> Result<Sequence> {
    let p = heat_profile(t, nmax)?;
    let n = nmax as i64;
    Ok(Sequence::tabulate(-n, n, |j| {
        Complex64::new(p[j.unsigned_abs() as usize], 0.0)
    }))
}

/// `h_t(n) = e^{-2t} I_n(2t)`.
pub fn heat_kernel(t: f64, n: i64, route: Route) -> Result<f64> {
    check_time(t)?;
    let m = n.unsigned_abs() as usize;
    match route {
        Route::Bessel => Ok(scaled_bessel_i(2.0 * t, m)[m]),
        Route::Quadrature => {
            let k = synthesize_kernel(&Symbol::heat(t), m, &quadrature_grid(t, m), Some(1e-13))?;
            Ok(k.kernel.get(m as i64).re)
        }
    }
}

/// Both routes, failing with a consistency error if they disagree.
pub fn heat_kernel_both(t: f64, n: i64) -> Result<(f64, f64)> {
    let b = heat_kernel(t, n, Route::Bessel)?;
    let q = heat_kernel(t, n, Route::Quadrature)?;
    if (b - q).abs() > ROUTE_TOLERANCE {
        return Err(Error::Consistency {
            what: format!("heat kernel routes at t={t}, n={n}"),
            discrepancy: (b - q).abs(),
            tolerance: ROUTE_TOLERANCE,
        });
    }
    Ok((b, q))
}

/// Half-width beyond which `h_t` is below double-precision resolution.
pub fn heat_support(t: f64) -> usize {
    (30.0 + 13.0 * t.sqrt()).ceil() as usize
}

/// `e^{-tΔ}f = h_t * f`, with the kernel mass dropped by truncation as the tail.
pub fn heat_apply(t: f64, f: &Sequence) -> Result<Applied> {
    check_time(t)?;
    let w = heat_support(t);
    let kernel = heat_kernel_seq(t, w)?;
    let mass: f64 = kernel.values().iter().map(|v| v.re).sum();
    Ok(Applied {
        seq: f.convolve(&kernel),
        tail: (1.0 - mass).abs(),
        grid_size: 0,
    })
}

fn sign(l: u32) -> f64 {
    if l % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `∂_t^ℓ h_t(n) = (-1)^ℓ (1/π) ∫_0^π (2(1-cos θ))^ℓ e^{-2t(1-cos θ)} cos(nθ) dθ`.
pub fn dt_heat_kernel(l: u32, t: f64, n: i64) -> Result<f64> {
    check_time(t)?;
    let m = n.unsigned_abs() as usize;
    let s = sign(l);
    let sym = Symbol::real(format!("dt{l}heat:{t}"), move |x| {
        s * x.powi(2 * l as i32) * (-t * x * x).exp()
    });
    let k = synthesize_kernel(&sym, m, &quadrature_grid(t, m + l as usize), Some(1e-13))?;
    Ok(k.kernel.get(m as i64).re)
}

/// `(-Δ)^ℓ h_t(n)` from Bessel values and the difference stencil.
pub fn dt_heat_kernel_stencil(l: u32, t: f64, n: i64) -> Result<f64> {
    let l_us = l as usize;
    let reach = n.unsigned_abs() as usize + l_us;
    let h = heat_kernel_seq(t, reach)?;
    let g = h.laplacian_pow(l_us);
    Ok(sign(l) * g.get(n).re)
}

/// `h_z(n) = (1/π) ∫_0^π e^{-2z(1-cos θ)} cos(nθ) dθ` for `Re z > 0`.
pub fn complex_heat_kernel(z: Complex64, n: i64) -> Result<Complex64> {
    dz_complex_heat_kernel(0, z, n)
}

/// `∂_z^ℓ h_z(n)`.
pub fn dz_complex_heat_kernel(l: u32, z: Complex64, n: i64) -> Result<Complex64> {
    if !(z.re > 0.0) || !z.im.is_finite() {
        return Err(Error::param(format!("need Re z > 0, got {z}")));
    }
    let m = n.unsigned_abs() as usize;
    let s = sign(l);
    let sym = Symbol::new(format!("dz{l}heat:{z}"), move |x| {
        s * x.powi(2 * l as i32) * (-z * x * x).exp()
    });
    let k = synthesize_kernel(&sym, m, &quadrature_grid(z.norm(), m + l as usize), Some(1e-13))?;
    Ok(k.kernel.get(m as i64))
}
