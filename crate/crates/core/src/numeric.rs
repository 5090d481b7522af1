//! Small numeric helpers: compensated summation and complex arithmetic over
//! double-double floats.
//!
//! The extended path exists because the G-function sums cancel catastrophically
//! for large spectral parameters: individual terms K_n (z+g)^n can exceed the
//! final sum by tens of orders of magnitude. `TwoFloat` carries ~31 significant
//! digits, enough for the x ≲ 100 window this solver targets.

use num_complex::Complex64;
use twofloat::TwoFloat;

/// Neumaier-compensated accumulator (Kahan summation with the improved
/// correction term, safe when the addend exceeds the running sum).
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Complex accumulator built from two real Neumaier sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: Complex64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    #[inline]
    pub fn total(&self) -> Complex64 {
        Complex64::new(self.re.total(), self.im.total())
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy)]
pub struct ComplexDd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl ComplexDd {
    pub const fn new(re: TwoFloat, im: TwoFloat) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(TwoFloat::from(0.0), TwoFloat::from(0.0))
    }

    pub fn from_c64(z: Complex64) -> Self {
        Self::new(TwoFloat::from(z.re), TwoFloat::from(z.im))
    }

    pub fn from_re(re: TwoFloat) -> Self {
        Self::new(re, TwoFloat::from(0.0))
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.into(), self.im.into())
    }

    #[inline]
    pub fn add(self, other: Self) -> Self {
        Self::new(self.re + other.re, self.im + other.im)
    }

    #[inline]
    pub fn sub(self, other: Self) -> Self {
        Self::new(self.re - other.re, self.im - other.im)
    }

    #[inline]
    pub fn mul(self, other: Self) -> Self {
        Self::new(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )
    }

    #[inline]
    pub fn scale(self, factor: TwoFloat) -> Self {
        Self::new(self.re * factor, self.im * factor)
    }

    #[inline]
    pub fn div_real(self, d: TwoFloat) -> Self {
        Self::new(self.re / d, self.im / d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_tail() {
        // 1 + 1e100 - 1e100 + small terms: naive summation loses the 1.
        let mut acc = Neumaier::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(-1e100);
        acc.add(2.5);
        assert_eq!(acc.total(), 3.5);
    }

    #[test]
    fn neumaier_matches_exact_series() {
        let mut acc = Neumaier::new();
        for k in 1..=1_000_000u64 {
            acc.add(1.0 / k as f64);
        }
        let naive: f64 = (1..=1_000_000u64).map(|k| 1.0 / k as f64).sum();
        let exact = 14.392726722865723; // harmonic number H_1e6, dd-verified
        assert!((acc.total() - exact).abs() < 1e-13);
        assert!((acc.total() - exact).abs() <= (naive - exact).abs());
    }

    #[test]
    fn complex_dd_mul_matches_f64_for_exact_inputs() {
        let a = ComplexDd::from_c64(Complex64::new(1.5, -2.25));
        let b = ComplexDd::from_c64(Complex64::new(-0.5, 4.0));
        let p = a.mul(b).to_c64();
        let q = Complex64::new(1.5, -2.25) * Complex64::new(-0.5, 4.0);
        assert_eq!(p, q);
    }

    #[test]
    fn complex_dd_keeps_extra_digits() {
        // (1 + 2^-60 i)^2: the f64 path loses the 2^-120 real correction,
        // the dd path keeps it.
        let eps = 2f64.powi(-60);
        let z = ComplexDd::from_c64(Complex64::new(1.0, eps));
        let sq = z.mul(z);
        let re: f64 = sq.re.into();
        let lo: f64 = sq.re.lo();
        assert_eq!(re, 1.0);
        assert!((lo + eps * eps).abs() < 1e-52, "lo = {lo:e}");
    }
}
