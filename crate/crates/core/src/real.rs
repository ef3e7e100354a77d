//! Float math routed through `libm`, since the transcendental `f64` methods
//! live in `std`, not `core`.

/// Extension methods for `f64` backed by `libm`.
///
/// In `std` builds (including the test harness) the inherent methods shadow
/// these; the implementations agree to within the usual ulp differences.
#[allow(dead_code)] // test builds resolve the call sites to std's inherent methods
pub(crate) trait Real {
    fn sqrt(self) -> f64;
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn log10(self) -> f64;
    fn powf(self, e: f64) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn round(self) -> f64;
    fn cos(self) -> f64;
    fn hypot(self, other: f64) -> f64;
    /// Integer power by binary exponentiation (exact products, no log/exp).
    fn powi(self, e: i32) -> f64;
}

impl Real for f64 {
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn ln(self) -> f64 {
        libm::log(self)
    }
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    fn powf(self, e: f64) -> f64 {
        libm::pow(self, e)
    }
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    fn round(self) -> f64 {
        libm::round(self)
    }
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
    fn powi(self, e: i32) -> f64 {
        if e < 0 {
            return 1.0 / Real::powi(self, -e);
        }
        let mut base = self;
        let mut exp = e as u32;
        let mut acc = 1.0;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }
}

/// Natural log of the Gamma function.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
