//! Element type abstraction over f32 (working precision) and f64.
//!
//! f32 is the deployed precision everywhere; the f64 instantiation exists for
//! equivalence checks that need tolerances at the 1e-12 level. GELU routes
//! through the f64 erf in both cases so that both precisions share one
//! canonical activation.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Sum
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> Self;

    /// Additive score mask. Large enough that `exp(x + MASK_NEG - max)`
    /// underflows to exactly +0.0 and `x + MASK_NEG` rounds to `MASK_NEG`
    /// for any score of ordinary magnitude.
    const MASK_NEG: Self;

    /// Exact GELU: `0.5 * x * (1 + erf(x / sqrt(2)))`, evaluated via f64 erf.
    fn gelu(self) -> Self {
        let x = self.to_f64();
        Self::from_f64(0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)))
    }

    /// Little-endian byte encoding, used for checksums.
    fn write_le_bytes(self, out: &mut Vec<u8>);
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const MASK_NEG: Self = -1.0e30;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn write_le_bytes(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const MASK_NEG: Self = -1.0e30;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn write_le_bytes(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_zero_is_zero() {
        assert_eq!(<f32 as Scalar>::gelu(0.0), 0.0);
        assert_eq!(<f64 as Scalar>::gelu(0.0), 0.0);
    }

    #[test]
    fn gelu_asymptotes() {
        // Large positive -> identity, large negative -> zero.
        assert!((Scalar::gelu(20.0f64) - 20.0).abs() < 1e-12);
        assert!(Scalar::gelu(-20.0f64).abs() < 1e-12);
        assert!((Scalar::gelu(10.0f32) - 10.0).abs() < 1e-6);
    }

    /// Independent erf oracle: Abramowitz & Stegun style series
    /// erf(x) = 2/sqrt(pi) * sum_{n>=0} (-1)^n x^(2n+1) / (n! (2n+1)).
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = 0.0;
        for n in 0..200 {
            sum += term / (2 * n + 1) as f64;
            term *= -x * x / (n + 1) as f64;
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn gelu_at_one_matches_independent_erf() {
        // gelu(1) = Phi(1) * 1 = 0.5 * (1 + erf(1/sqrt(2))) = 0.84134474...
        let expect = 0.5 * (1.0 + erf_series(1.0 / std::f64::consts::SQRT_2));
        assert!((expect - 0.841344746068543).abs() < 1e-12);
        assert!((Scalar::gelu(1.0f64) - expect).abs() < 1e-12);
        assert!((Scalar::gelu(1.0f32) as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn mask_neg_absorbs_scores() {
        // Perturbing a masked score must not change the masked value.
        let m = <f32 as Scalar>::MASK_NEG;
        assert_eq!(12.5f32 + m, m);
        assert_eq!(-3.0f32 + m, m);
        assert_eq!((2.0f32 + m).exp(), 0.0);
        let m64 = <f64 as Scalar>::MASK_NEG;
        assert_eq!(12.5f64 + m64, m64);
        assert_eq!((2.0f64 + m64).exp(), 0.0);
    }
}
