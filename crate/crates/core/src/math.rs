//! Scalar math routed through `libm` so results are identical with and
//! without `std`.

pub(crate) use libm::{cos, exp, log, sin, sqrt};

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, `0.5 * erfc(-z / sqrt(2))`.
///
/// The `erfc` form keeps full relative accuracy in the lower tail, where
/// `0.5 * (1 + erf(z / sqrt(2)))` would cancel.
pub fn standard_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z) / sqrt(2.0 * PI)
}
