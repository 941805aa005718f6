//! Scalar abstraction shared by every spectral routine.
//!
//! Field arithmetic only needs a commutative ring with signs and a way to
//! import small constants, so rational numbers work as well as floats. The
//! routines that take square roots, exponentials or phases ask for [`Real`].

use std::cell::RefCell;
use std::fmt::Debug;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};
use rustfft::{Fft, FftNum, FftPlanner};

/// Ring of coefficients for trigonometric polynomials.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Linear convolution of two coefficient sequences.
    ///
    /// The output has length `a.len() + b.len() - 1` (or is empty when either
    /// input is). Implementations must be exact up to the rounding of `Self`:
    /// no wrap-around, no truncation.
    fn convolve(a: &[Complex<Self>], b: &[Complex<Self>]) -> Vec<Complex<Self>> {
        direct_convolve(a, b)
    }

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer constant representable in scalar type")
    }

    /// Best representation of a float constant (exact binary value for rationals).
    fn from_float(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant representable in scalar type")
    }

    fn two_pi() -> Self {
        Self::from_float(std::f64::consts::TAU)
    }

    fn to_float(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Scalars with the full floating-point toolbox.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Exact rational scalar.
pub type Rational = BigRational;

/// Convert an `f64` into an exact rational (every finite double is a dyadic rational).
pub fn rational(v: f64) -> Rational {
    BigRational::from_float(v).expect("finite value")
}

pub fn rational_ratio(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Schoolbook convolution, O(len(a) * len(b)).
pub fn direct_convolve<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.re.is_zero() && ai.im.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + ai.clone() * bj.clone();
        }
    }
    out
}

// Below this many multiply-adds the FFT setup costs more than it saves.
const FFT_THRESHOLD: usize = 2048;

thread_local! {
    static PLANNER_F64: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANNER_F32: RefCell<FftPlanner<f32>> = RefCell::new(FftPlanner::new());
}

type Plans<T> = (Arc<dyn Fft<T>>, Arc<dyn Fft<T>>);

/// Zero-padded FFT convolution. The transform length is at least the full
/// output length, so the cyclic product never wraps.
fn fft_convolve<T: FftNum + Float>(
    a: &[Complex<T>],
    b: &[Complex<T>],
    plans: impl FnOnce(usize) -> Plans<T>,
) -> Vec<Complex<T>> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let (fwd, inv) = plans(size);
    let zero = Complex::new(T::zero(), T::zero());
    let mut fa = vec![zero; size];
    let mut fb = vec![zero; size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    inv.process(&mut fa);
    let scale = T::one() / T::from_usize(size).unwrap();
    fa.truncate(out_len);
    for x in &mut fa {
        *x = *x * scale;
    }
    fa
}

impl Scalar for f64 {
    fn convolve(a: &[Complex<f64>], b: &[Complex<f64>]) -> Vec<Complex<f64>> {
        if a.is_empty() || b.is_empty() || a.len() * b.len() < FFT_THRESHOLD {
            return direct_convolve(a, b);
        }
        fft_convolve(a, b, |n| {
            PLANNER_F64.with(|p| {
                let mut p = p.borrow_mut();
                (p.plan_fft_forward(n), p.plan_fft_inverse(n))
            })
        })
    }
}

impl Scalar for f32 {
    fn convolve(a: &[Complex<f32>], b: &[Complex<f32>]) -> Vec<Complex<f32>> {
        if a.is_empty() || b.is_empty() || a.len() * b.len() < FFT_THRESHOLD {
            return direct_convolve(a, b);
        }
        fft_convolve(a, b, |n| {
            PLANNER_F32.with(|p| {
                let mut p = p.borrow_mut();
                (p.plan_fft_forward(n), p.plan_fft_inverse(n))
            })
        })
    }
}

/// Double-double arithmetic (about 32 significant digits), for sums whose
/// cancellation eats most of an `f64`.
pub type DoubleDouble = twofloat::TwoFloat;

impl Scalar for DoubleDouble {
    // The crate's `FromPrimitive::from_f64` goes through `from_i64` and truncates.
    fn from_float(v: f64) -> Self {
        DoubleDouble::from(v)
    }
}

impl Scalar for BigRational {
    fn from_float(v: f64) -> Self {
        rational(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn double_double_keeps_fractions() {
        let x = DoubleDouble::from_float(0.3);
        assert_eq!(x.to_float(), 0.3);
        // The residue of the three binary constants is exact here, not in f64.
        let r = DoubleDouble::from_float(0.1) + DoubleDouble::from_float(0.2) - x;
        let exact = rational(0.1) + rational(0.2) - rational(0.3);
        assert_eq!(r.to_float(), exact.to_float());
        assert_ne!(r.to_float(), (0.1f64 + 0.2) - 0.3);
        assert!(DoubleDouble::two_pi().to_float() == std::f64::consts::TAU);
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let a: Vec<_> = (0..97).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b: Vec<_> = (0..61).map(|i| c((i as f64 * 1.7).cos(), -(i as f64).sin())).collect();
        let slow = direct_convolve(&a, &b);
        let fast = f64::convolve(&a, &b);
        assert_eq!(slow.len(), fast.len());
        for (x, y) in slow.iter().zip(&fast) {
            assert!((x - y).norm() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn rational_convolution_is_exact() {
        let a = vec![Complex::new(rational_ratio(1, 3), rational_ratio(0, 1)); 3];
        let b = vec![Complex::new(rational_ratio(0, 1), rational_ratio(1, 7)); 2];
        let out = Rational::convolve(&a, &b);
        assert_eq!(out.len(), 4);
        assert_eq!(out[1].im, rational_ratio(2, 21));
        assert_eq!(out[0].re, rational_ratio(0, 1));
    }

    #[test]
    fn empty_inputs_give_empty_output() {
        let a: Vec<Complex<f64>> = vec![];
        assert!(f64::convolve(&a, &[c(1.0, 0.0)]).is_empty());
    }
}
