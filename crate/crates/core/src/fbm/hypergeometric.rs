//! Gauss hypergeometric function and the fBm Volterra kernel built on it.

use statrs::function::gamma::gamma;

const MAX_TERMS: usize = 100_000;

/// Power series of `F(a, b; c; z)`; requires `|z| < 1`.
pub(crate) fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    debug_assert!(z.abs() < 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `K_H(t, s) = c_H / Γ(H + 1/2) (t - s)^{H-1/2} F(H - 1/2, 1/2 - H, H + 1/2; 1 - t/s)`,
/// with constants for one Hurst index precomputed.
///
/// The argument `1 - t/s` lies in `(-∞, 0]`, outside the disk of
/// convergence once `s < t/2`. The Pfaff transformation turns it into
/// `F(H - 1/2, 2H; H + 1/2; w)` with `w = 1 - s/t ∈ [0, 1)`, summed
/// directly for `w <= 1/2` and through the `1 - w` connection formula
/// otherwise, so every series runs with argument at most 1/2.
#[derive(Debug, Clone, Copy)]
pub struct VolterraKernel {
    hurst: f64,
    prefactor: f64,
    // connection coefficients for the s < t/2 branch
    a1: f64,
    a2: f64,
}

impl VolterraKernel {
    pub fn new(hurst: f64) -> Self {
        let c_h = kernel_constant(hurst);
        let prefactor = c_h / gamma(hurst + 0.5);
        let (a1, a2) = if (hurst - 0.5).abs() < 1e-12 {
            (0.0, 0.0)
        } else {
            (
                gamma(hurst + 0.5) * gamma(1.0 - 2.0 * hurst) / gamma(0.5 - hurst),
                gamma(hurst + 0.5) * gamma(2.0 * hurst - 1.0) / (gamma(hurst - 0.5) * gamma(2.0 * hurst)),
            )
        };
        Self { hurst, prefactor, a1, a2 }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `K_H(t, s) / (s^{1/2-H} (t - s)^{H-1/2})` for `0 <= s <= t`, `t > 0`.
    /// Bounded on the closed triangle, including `s = 0`.
    pub fn regular(&self, t: f64, s: f64) -> f64 {
        let h = self.hurst;
        if (h - 0.5).abs() < 1e-12 {
            return 1.0;
        }
        let r = s / t;
        if r >= 0.5 {
            let w = 1.0 - r;
            self.prefactor * t.powf(0.5 - h) * s.powf(2.0 * h - 1.0) * hyp2f1_series(h - 0.5, 2.0 * h, h + 0.5, w)
        } else {
            let tail = hyp2f1_series(1.0, 0.5 - h, 2.0 - 2.0 * h, r);
            let head = if s > 0.0 { self.a1 * s.powf(2.0 * h - 1.0) * (t - s).powf(0.5 - h) } else { 0.0 };
            self.prefactor * (head + self.a2 * t.powf(h - 0.5) * tail)
        }
    }

    /// Splits [`Self::regular`] as `head * s^{2H-1} + tail` for `s < t/2`,
    /// separating the non-smooth power of `s` at the origin.
    pub fn split(&self, t: f64, s: f64) -> (f64, f64) {
        let h = self.hurst;
        if (h - 0.5).abs() < 1e-12 {
            return (0.0, 1.0);
        }
        debug_assert!(s <= 0.5 * t);
        let head = self.prefactor * self.a1 * (t - s).powf(0.5 - h);
        let tail = self.prefactor * self.a2 * t.powf(h - 0.5) * hyp2f1_series(1.0, 0.5 - h, 2.0 - 2.0 * h, s / t);
        (head, tail)
    }

    /// `K_H(t, s)` for `0 < s`; zero when `s > t`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        if s > t {
            return 0.0;
        }
        let h = self.hurst;
        s.powf(0.5 - h) * (t - s).powf(h - 0.5) * self.regular(t, s)
    }
}

/// `c_H = (2H Γ(3/2 - H) Γ(H + 1/2) / Γ(2 - 2H))^{1/2}`.
pub fn kernel_constant(hurst: f64) -> f64 {
    (2.0 * hurst * gamma(1.5 - hurst) * gamma(hurst + 0.5) / gamma(2.0 - 2.0 * hurst)).sqrt()
}
