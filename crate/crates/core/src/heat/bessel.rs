//! Exponentially scaled modified Bessel functions `e^{-x} I_k(x)` of integer order.
//!
//! Miller's downward recurrence `I_{k-1} = I_{k+1} + (2k/x) I_k`, normalized
//! with `I_0 + 2 Σ_{k≥1} I_k = e^x`. The scaled values never overflow.

/// Start order of the downward recurrence for orders up to `n` at argument `x`.
pub fn miller_start(n: usize, x: f64) -> usize {
    let n_f = n as f64;
    let local = n_f + 10.0 + 2.0 * (n_f * x).sqrt();
    // The normalization sum needs every order that carries mass, i.e. up to
    // a few standard deviations of the Gaussian profile of width √x.
    let global = 10.0 * x.sqrt() + 30.0;
    local.max(global).ceil() as usize
}

/// `e^{-x} I_k(x)` for `k = 0..=nmax`.
pub fn scaled_bessel_i(x: f64, nmax: usize) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "argument must be finite and nonnegative");
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = miller_start(nmax, x);
    let mut y = vec![0.0f64; start + 2];
    y[start] = 1e-280;
    // Two running normalization sums; `norm` counts orders ≥ 1 twice.
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        y[k - 1] = y[k + 1] + (2.0 * k as f64 / x) * y[k];
        norm += 2.0 * y[k];
        if y[k - 1] > 1e250 {
            let s = 1e-250;
            for v in y[k - 1..].iter_mut() {
                *v *= s;
            }
            norm *= s;
        }
    }
    norm += y[0];
    for (k, o) in out.iter_mut().enumerate() {
        *o = y[k] / norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Power series e^{-x} Σ_j (x/2)^{2j+k} / (j!(j+k)!), usable for small x.
    fn series(x: f64, k: usize) -> f64 {
        let mut term = (0..k).fold(1.0, |acc, i| acc * (x / 2.0) / (i + 1) as f64);
        let mut sum = 0.0;
        for j in 0..200 {
            sum += term;
            term *= (x / 2.0).powi(2) / ((j + 1) as f64 * (j + 1 + k) as f64);
        }
        (-x).exp() * sum
    }

    #[test]
    fn matches_power_series() {
        for &x in &[1e-3, 0.2, 1.0, 5.0, 20.0] {
            let v = scaled_bessel_i(x, 30);
            for k in 0..=30 {
                let s = series(x, k);
                assert!(
                    (v[k] - s).abs() <= 1e-14 * s.max(1e-300) + 1e-300,
                    "x={x} k={k} miller={} series={s}",
                    v[k]
                );
            }
        }
    }

    #[test]
    fn large_argument_is_finite_and_normalized() {
        for &x in &[200.0, 2000.0, 2e5] {
            let v = scaled_bessel_i(x, 10);
            assert!(v.iter().all(|a| a.is_finite() && *a > 0.0));
            // e^{-x} I_0(x) ≈ 1/√(2πx) (1 + 1/(8x) + 9/(128x²))
            let asym = (1.0 / (2.0 * std::f64::consts::PI * x).sqrt())
                * (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x));
            assert!((v[0] - asym).abs() < 1e-6 * asym);
        }
    }

    #[test]
    fn start_order_beyond_requested() {
        assert!(miller_start(50, 2.0) > 50);
        assert!(miller_start(0, 200.0) >= 170);
    }
}
