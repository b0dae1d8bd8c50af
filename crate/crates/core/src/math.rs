//! Float functions routed through `libm` so results do not depend on whether
//! `std` is linked.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Log-density of `N(mean, std^2)` at `x`.
#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - ln(std) - 0.5 * LN_2PI
}
