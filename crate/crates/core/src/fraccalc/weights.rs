//! Product-integration weights.
//!
//! For a power kernel `u^p` on the unit cell `[a, a + 1]` and a linear
//! integrand the integral reduces to two moments. `near` multiplies the
//! node at `u = a` (closest to the kernel's origin), `far` the node at
//! `u = a + 1`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

/// Cells further than this from the kernel origin use Gauss-Legendre, which
/// avoids the cancellation in the closed-form moment differences.
const CLOSED_FORM_CUTOFF: usize = 16;

/// Quadrature points per cell (even; see [`JacobiRule`]).
pub(crate) const CELL_POINTS: usize = 8;

#[derive(Debug, Clone)]
pub(crate) struct CellWeights {
    pub near: Vec<f64>,
    pub far: Vec<f64>,
}

impl CellWeights {
    /// Weights for cells `a = 0..n`. Cell `a = 0` is only valid for `p > -1`
    /// and holds NaN otherwise.
    pub fn new(p: f64, n: usize) -> Self {
        let (near, far) = (0..n).map(|a| cell_weights(p, a)).unzip();
        Self { near, far }
    }
}

/// `(∫ u^p (a + 1 - u) du, ∫ u^p (u - a) du)` over `[a, a + 1]`.
pub(crate) fn cell_weights(p: f64, a: usize) -> (f64, f64) {
    if a == 0 {
        if p <= -1.0 {
            return (f64::NAN, f64::NAN);
        }
        let far = 1.0 / (p + 2.0);
        return (1.0 / (p + 1.0) - far, far);
    }
    let af = a as f64;
    if a >= CLOSED_FORM_CUTOFF {
        let (mut near, mut far) = (0.0, 0.0);
        for &(v, w) in legendre_unit() {
            let k = w * (af + v).powf(p);
            near += k * (1.0 - v);
            far += k * v;
        }
        return (near, far);
    }
    let m0 = power_difference(af, af + 1.0, p + 1.0);
    let m1 = power_difference(af, af + 1.0, p + 2.0);
    ((af + 1.0) * m0 - m1, m1 - af * m0)
}

/// `(y^q - x^q) / q` for `0 < x < y`, continuous through `q = 0`.
fn power_difference(x: f64, y: f64, q: f64) -> f64 {
    let l = (y / x).ln();
    if q.abs() < 1e-14 {
        return l;
    }
    x.powf(q) * (q * l).exp_m1() / q
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn legendre_unit() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(CELL_POINTS).unwrap())
            .iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

/// Gauss-Jacobi rule for `∫_0^1 (1 - v)^right * v^left g(v) dv`.
///
/// gauss-quad pins the middle node of odd-degree rules to zero, which is
/// wrong for asymmetric weights, so only even degrees are used here.
#[derive(Debug, Clone)]
pub(crate) struct JacobiRule {
    points: Vec<(f64, f64)>,
}

impl JacobiRule {
    pub fn new(left: f64, right: f64) -> Self {
        if left == 0.0 && right == 0.0 {
            return Self { points: legendre_unit().to_vec() };
        }
        let alpha = FiniteAboveNegOneF64::new(right).expect("right exponent above -1");
        let beta = FiniteAboveNegOneF64::new(left).expect("left exponent above -1");
        let scale = 2f64.powf(left + right + 1.0);
        let points = GaussJacobi::new(NonZeroUsize::new(CELL_POINTS).unwrap(), alpha, beta)
            .iter()
            .map(|(x, w)| (0.5 * (x + 1.0), w / scale))
            .collect();
        Self { points }
    }

    /// `∫_a^b (b - s)^right (s - a)^left g(s) ds`.
    pub fn integrate(&self, a: f64, b: f64, left: f64, right: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        let sum: f64 = self.points.iter().map(|&(v, w)| w * g(a + len * v)).sum();
        sum * len.powf(1.0 + left + right)
    }
}
