//! Normal-distribution tail helpers and the log-gamma function.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

pub use statrs::function::gamma::ln_gamma;

/// `ln(2 pi) / 2`
pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Upper tail probability `Q(z) = 1 - Phi(z)`.
#[inline]
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    normal_upper_tail(-z)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// `ln Q(z)`, finite far into the upper tail where `Q` itself underflows.
pub fn ln_normal_upper_tail(z: f64) -> f64 {
    if z < 30.0 {
        return normal_upper_tail(z).ln();
    }
    // Asymptotic expansion of the Mills ratio.
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - z.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `ln(Phi(hi) - Phi(lo))` for `lo < hi`, evaluated on whichever side of zero
/// keeps the subtraction away from catastrophic cancellation.
pub fn ln_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        ln_diff_tails(lo, hi)
    } else if hi <= 0.0 {
        ln_diff_tails(-hi, -lo)
    } else {
        let outside = normal_upper_tail(hi) + normal_upper_tail(-lo);
        (-outside).ln_1p()
    }
}

/// `ln(Q(a) - Q(b))` for `0 <= a < b`.
fn ln_diff_tails(a: f64, b: f64) -> f64 {
    let la = ln_normal_upper_tail(a);
    let lb = ln_normal_upper_tail(b);
    la + (-(lb - la).exp()).ln_1p()
}
