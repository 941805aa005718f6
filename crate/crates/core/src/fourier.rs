//! Exact arithmetic on real, mean-zero trigonometric polynomials on the
//! 2π-periodic circle.
//!
//! A [`FourierField`] stores only the coefficients of the positive modes; the
//! negative modes are the complex conjugates and the zero mode is always 0.
//! Intermediate expressions (products keep their mean, and the `u⁺`/`u⁻`
//! splittings are not real) live in a two-sided [`Spectrum`].
//!
//! Norm convention: `‖u‖²_{Ḣ^s} = Σ_{j≠0} |j|^{2s} |c_j|²` carries no 2π,
//! while integrals do: `∫ u dx = 2π c_0`.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{Real, Scalar};

fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Fourier multiplier acting mode by mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `∂_x^α`, symbol `(ij)^α`.
    Derivative(u32),
    /// Hilbert transform, symbol `-i sign(j)`.
    Hilbert,
    /// Dirichlet projector `π_N` onto `|j| ≤ N`.
    DirichletLow(usize),
    /// Complementary projector `π_{>N}` onto `|j| > N`.
    DirichletHigh(usize),
}

impl Multiplier {
    /// Symbol of the multiplier at mode `j`.
    pub fn symbol<T: Scalar>(&self, j: i64) -> Complex<T> {
        match *self {
            Multiplier::Derivative(alpha) => i_pow_times(alpha, int_pow::<T>(j, alpha)),
            Multiplier::Hilbert => match j.signum() {
                0 => czero(),
                s => Complex::new(T::zero(), -T::from_int(s)),
            },
            Multiplier::DirichletLow(n) => indicator(j.unsigned_abs() as usize <= n),
            Multiplier::DirichletHigh(n) => indicator(j.unsigned_abs() as usize > n),
        }
    }
}

fn indicator<T: Scalar>(on: bool) -> Complex<T> {
    if on {
        Complex::new(T::one(), T::zero())
    } else {
        czero()
    }
}

fn int_pow<T: Scalar>(j: i64, alpha: u32) -> T {
    let base = T::from_int(j);
    let mut out = T::one();
    for _ in 0..alpha {
        out = out * base.clone();
    }
    out
}

/// `i^alpha * x` for real `x`.
fn i_pow_times<T: Scalar>(alpha: u32, x: T) -> Complex<T> {
    match alpha % 4 {
        0 => Complex::new(x, T::zero()),
        1 => Complex::new(T::zero(), x),
        2 => Complex::new(-x, T::zero()),
        _ => Complex::new(T::zero(), -x),
    }
}

/// Real, mean-zero trigonometric polynomial `Σ_{0<|j|≤n_max} c_j e^{ijx}`
/// with `c_{-j} = conj(c_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FourierField<T> {
    /// `coeffs[j - 1] = c_j` for `j = 1..=n_max`.
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> FourierField<T> {
    /// Field from the positive-mode coefficients `c_1, c_2, ...`.
    pub fn new(coeffs: Vec<Complex<T>>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n_max: usize) -> Self {
        Self { coeffs: vec![czero(); n_max] }
    }

    /// Field with the listed `(j, c_j)` entries, `j ≥ 1`.
    pub fn from_modes(modes: &[(usize, Complex<T>)]) -> Self {
        let n_max = modes.iter().map(|(j, _)| *j).max().unwrap_or(0);
        let mut out = Self::zeros(n_max);
        for (j, c) in modes {
            assert!(*j >= 1, "mode 0 is not stored");
            out.coeffs[j - 1] = c.clone();
        }
        out
    }

    /// `2 cos(jx)` scaled by `amp`: `c_j = amp`.
    pub fn cosine(j: usize, amp: T) -> Self {
        Self::from_modes(&[(j, Complex::new(amp, T::zero()))])
    }

    /// `2 sin(jx)` scaled by `amp`: `c_j = -i amp`.
    pub fn sine(j: usize, amp: T) -> Self {
        Self::from_modes(&[(j, Complex::new(T::zero(), -amp))])
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len()
    }

    /// Highest mode with a non-zero coefficient (0 for the zero field).
    pub fn support(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !(c.re.is_zero() && c.im.is_zero()))
            .map_or(0, |p| p + 1)
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient of mode `j` for any integer `j`.
    pub fn coeff(&self, j: i64) -> Complex<T> {
        let a = j.unsigned_abs() as usize;
        if a == 0 || a > self.coeffs.len() {
            return czero();
        }
        let c = self.coeffs[a - 1].clone();
        if j > 0 {
            c
        } else {
            c.conj()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support() == 0
    }

    pub fn apply(&self, m: Multiplier) -> Self {
        let n = match m {
            Multiplier::DirichletLow(cut) => cut.min(self.n_max()),
            _ => self.n_max(),
        };
        let coeffs = self.coeffs[..n]
            .iter()
            .enumerate()
            .map(|(i, c)| c.clone() * m.symbol::<T>(i as i64 + 1))
            .collect();
        Self { coeffs }
    }

    /// `π_N u`.
    pub fn project_low(&self, n: usize) -> Self {
        self.apply(Multiplier::DirichletLow(n))
    }

    /// `π_{>N} u`.
    pub fn project_high(&self, n: usize) -> Self {
        self.apply(Multiplier::DirichletHigh(n))
    }

    pub fn hilbert(&self) -> Self {
        self.apply(Multiplier::Hilbert)
    }

    pub fn derivative(&self, alpha: u32) -> Self {
        self.apply(Multiplier::Derivative(alpha))
    }

    /// Same field stored with `n_max` slots (truncating or zero-padding).
    pub fn resized(&self, n_max: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n_max, czero());
        Self { coeffs }
    }

    pub fn scale(&self, s: &T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.n_max().max(other.n_max());
        let coeffs = (1..=n as i64).map(|j| self.coeff(j) + other.coeff(j)).collect();
        Self { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-T::one()))
    }

    /// The same coefficients in another scalar type, through `f64`.
    pub fn to_scalar<U: Scalar>(&self) -> FourierField<U> {
        let f = |x: &T| U::from_float(x.to_float());
        FourierField { coeffs: self.coeffs.iter().map(|c| Complex::new(f(&c.re), f(&c.im))).collect() }
    }

    /// Mode-wise map on the positive modes, `f(j, c_j)`.
    pub fn map_modes(&self, mut f: impl FnMut(usize, &Complex<T>) -> Complex<T>) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(i, c)| f(i + 1, c)).collect() }
    }

    /// `Σ_{0<|j|≤n_max} |j|^k |c_j|²`, i.e. `‖u‖²_{Ḣ^{k/2}}`, computed exactly.
    pub fn half_sobolev_norm_sq(&self, k: u32) -> T {
        let two = T::from_int(2);
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            acc + two.clone() * int_pow::<T>(i as i64 + 1, k) * c.norm_sqr()
        })
    }

    /// Real bilinear form polarizing [`Self::half_sobolev_norm_sq`]:
    /// `Σ_{j≠0} |j|^k Re(conj(u_j) v_j)`.
    pub fn half_sobolev_inner(&self, other: &Self, k: u32) -> T {
        let two = T::from_int(2);
        let n = self.n_max().min(other.n_max());
        (0..n).fold(T::zero(), |acc, i| {
            let a = &self.coeffs[i];
            let b = &other.coeffs[i];
            let re = a.re.clone() * b.re.clone() + a.im.clone() * b.im.clone();
            acc + two.clone() * int_pow::<T>(i as i64 + 1, k) * re
        })
    }

    /// `‖u‖²_{L²}` in the coefficient convention (no 2π).
    pub fn l2_norm_sq(&self) -> T {
        self.half_sobolev_norm_sq(0)
    }

    pub fn to_spectrum(&self) -> Spectrum<T> {
        Spectrum::from_field(self)
    }

    /// `∫ u dx`, always zero.
    pub fn integrate(&self) -> T {
        T::zero()
    }
}

impl<T: Real> FourierField<T> {
    /// `‖u‖²_{Ḣ^s} = 2 Σ_{j≥1} j^{2s} |c_j|²` for real `s ≥ 0`.
    pub fn sobolev_norm_sq(&self, s: T) -> T {
        let two = T::from_int(2);
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            let j = T::from_usize(i + 1).unwrap();
            acc + two * j.powf(two * s) * c.norm_sqr()
        })
    }

    pub fn sobolev_norm(&self, s: T) -> T {
        self.sobolev_norm_sq(s).sqrt()
    }

    /// Point value `u(x)`; real by construction.
    pub fn eval(&self, x: T) -> T {
        let two = T::from_int(2);
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            let phase = Complex::from_polar(T::one(), T::from_usize(i + 1).unwrap() * x);
            acc + two * (c * phase).re
        })
    }
}

/// Result of multiplying two fields: the zero-mean part plus the mean that
/// [`FourierField`] cannot store.
#[derive(Clone, Debug, PartialEq)]
pub struct Product<T> {
    pub field: FourierField<T>,
    pub mean: T,
}

impl<T: Scalar> Product<T> {
    /// `∫ (u v) dx = 2π · mean`.
    pub fn integrate(&self) -> T {
        T::two_pi() * self.mean.clone()
    }
}

/// Exact product of two fields. The output carries modes up to
/// `u.n_max + v.n_max`; nothing is truncated.
pub fn product<T: Scalar>(u: &FourierField<T>, v: &FourierField<T>) -> Product<T> {
    let s = u.to_spectrum().mul(&v.to_spectrum());
    let mean = s.mean().re;
    let mut field = s.to_field();
    field = field.resized(u.n_max() + v.n_max());
    Product { field, mean }
}

/// `∫ (u + mean) dx` for a product result.
pub fn integrate<T: Scalar>(p: &Product<T>) -> T {
    p.integrate()
}

/// `‖u‖²_{Ḣ^s}` in the coefficient convention.
pub fn sobolev_norm_sq<T: Real>(u: &FourierField<T>, s: T) -> T {
    u.sobolev_norm_sq(s)
}

/// General complex trigonometric polynomial `Σ_{|k|≤half} a_k e^{ikx}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    half: usize,
    /// `coeffs[k + half] = a_k`.
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn zeros(half: usize) -> Self {
        Self { half, coeffs: vec![czero(); 2 * half + 1] }
    }

    /// Constant function `value`.
    pub fn constant(value: T) -> Self {
        Self { half: 0, coeffs: vec![Complex::new(value, T::zero())] }
    }

    pub fn from_field(u: &FourierField<T>) -> Self {
        let half = u.n_max();
        let mut out = Self::zeros(half);
        for (i, c) in u.coeffs().iter().enumerate() {
            out.coeffs[half + i + 1] = c.clone();
            out.coeffs[half - i - 1] = c.conj();
        }
        out
    }

    /// Build from an explicit two-sided coefficient vector of odd length.
    pub fn from_two_sided(coeffs: Vec<Complex<T>>) -> Self {
        assert!(coeffs.len() % 2 == 1, "two-sided spectrum needs odd length");
        Self { half: coeffs.len() / 2, coeffs }
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn coeff(&self, k: i64) -> Complex<T> {
        let a = k.unsigned_abs() as usize;
        if a > self.half {
            return czero();
        }
        self.coeffs[(self.half as i64 + k) as usize].clone()
    }

    pub fn mean(&self) -> Complex<T> {
        self.coeffs[self.half].clone()
    }

    /// `∫ f dx = 2π a_0`.
    pub fn integral(&self) -> Complex<T> {
        self.mean() * T::two_pi()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { half: self.half + other.half, coeffs: T::convolve(&self.coeffs, &other.coeffs) }
    }

    /// Mode-0 coefficient of `self * other` without forming the product.
    pub fn mean_of_product(&self, other: &Self) -> Complex<T> {
        let h = self.half.min(other.half) as i64;
        (-h..=h).fold(czero(), |acc, k| acc + self.coeff(k) * other.coeff(-k))
    }

    /// `Σ_k |a_k|₁ |b_{-k}|₁`: the size of `∫ f g dx / 2π` before cancellation.
    pub fn abs_mean_of_product(&self, other: &Self) -> T {
        let h = self.half.min(other.half) as i64;
        (-h..=h).fold(T::zero(), |acc, k| acc + self.coeff(k).l1_norm() * other.coeff(-k).l1_norm())
    }

    pub fn add(&self, other: &Self) -> Self {
        let half = self.half.max(other.half);
        let mut out = Self::zeros(half);
        for (k, slot) in (-(half as i64)..=half as i64).zip(out.coeffs.iter_mut()) {
            *slot = self.coeff(k) + other.coeff(k);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-T::one()))
    }

    pub fn scale(&self, s: &T) -> Self {
        Self { half: self.half, coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn scale_complex(&self, s: &Complex<T>) -> Self {
        Self { half: self.half, coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn apply(&self, m: Multiplier) -> Self {
        let half = self.half as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.clone() * m.symbol::<T>(i as i64 - half))
            .collect();
        Self { half: self.half, coeffs }
    }

    pub fn derivative(&self, alpha: u32) -> Self {
        self.apply(Multiplier::Derivative(alpha))
    }

    pub fn hilbert(&self) -> Self {
        self.apply(Multiplier::Hilbert)
    }

    pub fn project_low(&self, n: usize) -> Self {
        self.apply(Multiplier::DirichletLow(n)).trimmed_to(n)
    }

    pub fn project_high(&self, n: usize) -> Self {
        self.apply(Multiplier::DirichletHigh(n))
    }

    /// Restriction to the positive modes (`u⁺`).
    pub fn positive_part(&self) -> Self {
        self.keep(|k| k > 0)
    }

    /// Restriction to the negative modes (`u⁻`).
    pub fn negative_part(&self) -> Self {
        self.keep(|k| k < 0)
    }

    fn keep(&self, pred: impl Fn(i64) -> bool) -> Self {
        let half = self.half as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| if pred(i as i64 - half) { c.clone() } else { czero() })
            .collect();
        Self { half: self.half, coeffs }
    }

    fn trimmed_to(mut self, n: usize) -> Self {
        if n >= self.half {
            return self;
        }
        let start = self.half - n;
        self.coeffs = self.coeffs[start..start + 2 * n + 1].to_vec();
        self.half = n;
        self
    }

    /// Positive modes of a (numerically) real spectrum as a [`FourierField`],
    /// symmetrizing `a_k` and `conj(a_{-k})`. The mean is dropped.
    pub fn to_field(&self) -> FourierField<T> {
        let half_t = T::one() / T::from_int(2);
        let coeffs = (1..=self.half as i64)
            .map(|k| (self.coeff(k) + self.coeff(-k).conj()) * half_t.clone())
            .collect();
        FourierField::new(coeffs)
    }

    /// `coeffs()[k + half] = a_k`.
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for FourierField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "c{}={}", i + 1, c)?;
        }
        write!(f, "]")
    }
}
