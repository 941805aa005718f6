//! Differential monomials in `u` built from derivatives, Hilbert transforms
//! and products, e.g. `u*u_xx*H(u_x)` or `u*H(u_x)*H(u*u_x)`.
//!
//! Everything is evaluated exactly in Fourier space. The leaf order of a tree
//! (depth-first, left to right) is what [`PStar`] and the directional
//! derivative substitute into.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, Spectrum};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Monomial {
    /// `∂_x^α u`.
    Leaf(u32),
    Hilbert(Box<Monomial>),
    /// Product of one or more factors.
    Product(Vec<Monomial>),
}

impl Monomial {
    pub fn leaf(alpha: u32) -> Self {
        Monomial::Leaf(alpha)
    }

    pub fn hilbert(inner: Monomial) -> Self {
        Monomial::Hilbert(Box::new(inner))
    }

    /// Product of the given factors; nested products are flattened and a
    /// single factor is returned as is.
    pub fn product(factors: impl IntoIterator<Item = Monomial>) -> Self {
        let mut flat = Vec::new();
        for f in factors {
            match f {
                Monomial::Product(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        assert!(!flat.is_empty(), "empty product");
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Monomial::Product(flat)
        }
    }

    /// Number of leaves.
    pub fn degree(&self) -> usize {
        match self {
            Monomial::Leaf(_) => 1,
            Monomial::Hilbert(m) => m.degree(),
            Monomial::Product(fs) => fs.iter().map(Monomial::degree).sum(),
        }
    }

    /// Derivative orders of the leaves in depth-first order.
    pub fn leaf_orders(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u32>) {
        match self {
            Monomial::Leaf(a) => out.push(*a),
            Monomial::Hilbert(m) => m.collect_leaves(out),
            Monomial::Product(fs) => fs.iter().for_each(|f| f.collect_leaves(out)),
        }
    }

    /// `|p|`: the largest derivative order.
    pub fn max_order(&self) -> u32 {
        self.leaf_orders().into_iter().max().unwrap_or(0)
    }

    /// `‖p‖`: the total number of derivatives.
    pub fn total_order(&self) -> u32 {
        self.leaf_orders().into_iter().sum()
    }

    /// The same leaves with every Hilbert transform erased, as a flat product
    /// with orders sorted ascending.
    pub fn skeleton(&self) -> Monomial {
        let mut orders = self.leaf_orders();
        orders.sort_unstable();
        Monomial::product(orders.into_iter().map(Monomial::Leaf))
    }

    pub fn hilbert_count(&self) -> usize {
        match self {
            Monomial::Leaf(_) => 0,
            Monomial::Hilbert(m) => 1 + m.hilbert_count(),
            Monomial::Product(fs) => fs.iter().map(Monomial::hilbert_count).sum(),
        }
    }

    /// Largest number of Hilbert transforms on a root-to-leaf path.
    pub fn hilbert_depth(&self) -> usize {
        match self {
            Monomial::Leaf(_) => 0,
            Monomial::Hilbert(m) => 1 + m.hilbert_depth(),
            Monomial::Product(fs) => fs.iter().map(Monomial::hilbert_depth).max().unwrap_or(0),
        }
    }

    /// Arguments of every Hilbert node, outermost first.
    pub fn hilbert_arguments<'a>(&'a self, out: &mut Vec<&'a Monomial>) {
        match self {
            Monomial::Leaf(_) => {}
            Monomial::Hilbert(m) => {
                out.push(m);
                m.hilbert_arguments(out);
            }
            Monomial::Product(fs) => fs.iter().for_each(|f| f.hilbert_arguments(out)),
        }
    }

    /// Canonical form: factors of every product sorted by their printed form.
    /// Two monomials with equal canonical forms are the same function of `u`.
    pub fn canonical(&self) -> Monomial {
        match self {
            Monomial::Leaf(a) => Monomial::Leaf(*a),
            Monomial::Hilbert(m) => Monomial::hilbert(m.canonical()),
            Monomial::Product(fs) => {
                let mut fs: Vec<Monomial> = fs.iter().map(Monomial::canonical).collect();
                fs.sort_by_key(|f| f.to_string());
                Monomial::product(fs)
            }
        }
    }

    /// Evaluate with a custom leaf provider `leaf(index, alpha)`.
    pub fn eval_with<T: Scalar>(
        &self,
        leaf: &mut dyn FnMut(usize, u32) -> Spectrum<T>,
    ) -> Spectrum<T> {
        let mut counter = 0;
        self.eval_rec(leaf, &mut counter)
    }

    fn eval_rec<T: Scalar>(
        &self,
        leaf: &mut dyn FnMut(usize, u32) -> Spectrum<T>,
        counter: &mut usize,
    ) -> Spectrum<T> {
        match self {
            Monomial::Leaf(a) => {
                let s = leaf(*counter, *a);
                *counter += 1;
                s
            }
            Monomial::Hilbert(m) => m.eval_rec(leaf, counter).hilbert(),
            Monomial::Product(fs) => {
                let mut acc = fs[0].eval_rec(leaf, counter);
                for f in &fs[1..] {
                    acc = acc.mul(&f.eval_rec(leaf, counter));
                }
                acc
            }
        }
    }

    /// `∫ p dx` with a custom leaf provider, returned as a complex number so
    /// callers can inspect the imaginary residue. The last product at the
    /// root is never formed: only its mode-0 coefficient is computed.
    pub fn integral_with<T: Scalar>(
        &self,
        leaf: &mut dyn FnMut(usize, u32) -> Spectrum<T>,
    ) -> Complex<T> {
        let mean = match self {
            Monomial::Product(fs) => {
                let mut counter = 0;
                let mut acc = fs[0].eval_rec(leaf, &mut counter);
                for f in &fs[1..fs.len() - 1] {
                    acc = acc.mul(&f.eval_rec(leaf, &mut counter));
                }
                let last = fs[fs.len() - 1].eval_rec(leaf, &mut counter);
                acc.mean_of_product(&last)
            }
            other => other.eval_with(leaf).mean(),
        };
        mean * T::two_pi()
    }

    /// The function `p(u)` as a spectrum.
    pub fn eval<T: Scalar>(&self, u: &FourierField<T>) -> Spectrum<T> {
        let mut leaves = Leaves::new(u.to_spectrum());
        self.eval_with(&mut |_, a| leaves.get(a))
    }

    /// `∫ p(u) dx` including its (rounding-level) imaginary part.
    pub fn integral_complex<T: Scalar>(&self, u: &FourierField<T>) -> Complex<T> {
        let mut leaves = Leaves::new(u.to_spectrum());
        self.integral_with(&mut |_, a| leaves.get(a))
    }

    /// `∫ p(u) dx`.
    pub fn eval_integral<T: Scalar>(&self, u: &FourierField<T>) -> T {
        self.integral_complex(u).re
    }

    /// `d/dε ∫ p(u + εv) dx` at ε = 0: the sum over leaves of the integral
    /// with that one leaf evaluated at `v`.
    pub fn directional_derivative<T: Scalar>(&self, u: &FourierField<T>, v: &FourierField<T>) -> T {
        let mut at_u = Leaves::new(u.to_spectrum());
        let mut at_v = Leaves::new(v.to_spectrum());
        self.substituted_sum(&mut at_u, &mut at_v)
    }

    fn substituted_sum<T: Scalar>(&self, base: &mut Leaves<T>, sub: &mut Leaves<T>) -> T {
        (0..self.degree()).fold(T::zero(), |acc, i| {
            let term = self.integral_with(&mut |idx, a| if idx == i { sub.get(a) } else { base.get(a) });
            acc + term.re
        })
    }

    /// `p*_N` for this monomial.
    pub fn pstar(&self, n: usize) -> PStar<'_> {
        PStar { p: self, n }
    }
}

/// Cache of `∂^α` applied to one spectrum.
pub struct Leaves<T> {
    base: Spectrum<T>,
    derivs: HashMap<u32, Spectrum<T>>,
}

impl<T: Scalar> Leaves<T> {
    pub fn new(base: Spectrum<T>) -> Self {
        Self { base, derivs: HashMap::new() }
    }

    pub fn get(&mut self, alpha: u32) -> Spectrum<T> {
        if alpha == 0 {
            return self.base.clone();
        }
        let base = &self.base;
        self.derivs.entry(alpha).or_insert_with(|| base.derivative(alpha)).clone()
    }
}

/// `π_{>N}(u ∂_x u)`.
pub fn high_transfer<T: Scalar>(u: &Spectrum<T>, n: usize) -> Spectrum<T> {
    u.mul(&u.derivative(1)).project_high(n)
}

/// The substitution operator `p*_N = Σ_i p*_{i,N}`: summand `i` replaces leaf
/// `i`, `∂^α u`, by `∂^α π_{>N}(u ∂_x u)`.
#[derive(Clone, Copy, Debug)]
pub struct PStar<'a> {
    p: &'a Monomial,
    n: usize,
}

impl PStar<'_> {
    pub fn summand_count(&self) -> usize {
        self.p.degree()
    }

    /// `∫ p*_{i,N}(u) dx` for each leaf `i`.
    pub fn eval_summands<T: Scalar>(&self, u: &FourierField<T>) -> Vec<T> {
        let us = u.to_spectrum();
        let mut base = Leaves::new(us.clone());
        let mut sub = Leaves::new(high_transfer(&us, self.n));
        (0..self.summand_count())
            .map(|i| {
                self.p
                    .integral_with(&mut |idx, a| if idx == i { sub.get(a) } else { base.get(a) })
                    .re
            })
            .collect()
    }

    /// `∫ p*_N(u) dx`.
    pub fn eval_integral<T: Scalar>(&self, u: &FourierField<T>) -> T {
        self.eval_summands(u).into_iter().fold(T::zero(), |a, b| a + b)
    }
}

/// `Σ c_m p_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct WeightedMonomialSum<T> {
    pub terms: Vec<(T, Monomial)>,
}

impl<T: Scalar> WeightedMonomialSum<T> {
    pub fn new(terms: Vec<(T, Monomial)>) -> Self {
        Self { terms }
    }

    pub fn eval_integral(&self, u: &FourierField<T>) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (c, p)| acc + c.clone() * p.eval_integral(u))
    }

    pub fn directional_derivative(&self, u: &FourierField<T>, v: &FourierField<T>) -> T {
        let mut at_u = Leaves::new(u.to_spectrum());
        let mut at_v = Leaves::new(v.to_spectrum());
        self.terms.iter().fold(T::zero(), |acc, (c, p)| {
            acc + c.clone() * p.substituted_sum(&mut at_u, &mut at_v)
        })
    }

    /// `Σ c_m ∫ p*_{m,N}(u) dx`.
    pub fn pstar_integral(&self, u: &FourierField<T>, n: usize) -> T {
        let us = u.to_spectrum();
        let mut base = Leaves::new(us.clone());
        let mut sub = Leaves::new(high_transfer(&us, n));
        self.terms.iter().fold(T::zero(), |acc, (c, p)| acc + c.clone() * p.substituted_sum(&mut base, &mut sub))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monomial::Leaf(0) => write!(f, "u"),
            Monomial::Leaf(a) => write!(f, "u_{}", "x".repeat(*a as usize)),
            Monomial::Hilbert(m) => write!(f, "H({m})"),
            Monomial::Product(fs) => {
                let mut i = 0;
                let mut first = true;
                while i < fs.len() {
                    let mut run = 1;
                    while i + run < fs.len() && fs[i + run] == fs[i] {
                        run += 1;
                    }
                    if !first {
                        write!(f, "*")?;
                    }
                    first = false;
                    match &fs[i] {
                        Monomial::Product(_) => write!(f, "({})", fs[i])?,
                        other => write!(f, "{other}")?,
                    }
                    if run > 1 {
                        write!(f, "^{run}")?;
                    }
                    i += run;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Monomial {
    type Err = Error;

    /// Grammar: `expr := factor ('*' factor)*`, `factor := atom ('^' int)?`,
    /// `atom := 'u' ('_' 'x'+)? | 'H(' expr ')' | '(' expr ')'`.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser { s: &chars, pos: 0 };
        let m = p.expr()?;
        if p.pos != chars.len() {
            return Err(Error::Parse(format!("trailing input at {} in `{s}`", p.pos)));
        }
        Ok(m)
    }
}

struct Parser<'a> {
    s: &'a [char],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}` at {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Monomial> {
        let mut factors = self.factor()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            factors.extend(self.factor()?);
        }
        Ok(Monomial::product(factors))
    }

    fn factor(&mut self) -> Result<Vec<Monomial>> {
        let atom = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(vec![atom]);
        }
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let k: usize = self.s[start..self.pos]
            .iter()
            .collect::<String>()
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent at {start}")))?;
        if k == 0 {
            return Err(Error::Parse("zero exponent".into()));
        }
        Ok(vec![atom; k])
    }

    fn atom(&mut self) -> Result<Monomial> {
        match self.peek() {
            Some('u') => {
                self.pos += 1;
                if self.peek() != Some('_') {
                    return Ok(Monomial::Leaf(0));
                }
                self.pos += 1;
                let mut a = 0;
                while self.peek() == Some('x') {
                    self.pos += 1;
                    a += 1;
                }
                if a == 0 {
                    return Err(Error::Parse(format!("expected `x` at {}", self.pos)));
                }
                Ok(Monomial::Leaf(a))
            }
            Some('H') => {
                self.pos += 1;
                self.eat('(')?;
                let inner = self.expr()?;
                self.eat(')')?;
                Ok(Monomial::hilbert(inner))
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.eat(')')?;
                Ok(inner)
            }
            other => Err(Error::Parse(format!("unexpected {other:?} at {}", self.pos))),
        }
    }
}

impl Serialize for Monomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Monomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for `s.parse::<Monomial>().unwrap()` on literals.
pub fn mono(s: &str) -> Monomial {
    s.parse().unwrap_or_else(|e| panic!("bad monomial literal `{s}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["u", "u_xx", "u^2*H(u_x)", "u*H(u_x)*H(u*u_x)", "u^3*H(u*u_x)", "H(H(u)*u_x)*u"] {
            assert_eq!(mono(s).to_string(), s);
        }
        assert_eq!(mono("u*u*u"), mono("u^3"));
        assert!("u_".parse::<Monomial>().is_err());
        assert!("H(u".parse::<Monomial>().is_err());
        assert!("v".parse::<Monomial>().is_err());
    }

    #[test]
    fn orders_and_skeleton() {
        let p = mono("u*u_xx*H(u_x)");
        assert_eq!(p.degree(), 3);
        assert_eq!(p.max_order(), 2);
        assert_eq!(p.total_order(), 3);
        assert_eq!(p.skeleton(), mono("u*u_x*u_xx"));
        assert_eq!(mono("u*H(u_x)*H(u*u_x)").skeleton(), mono("u^2*u_x^2"));
    }

    /// Trapezoid rule on a uniform grid; exact for trigonometric polynomials of
    /// degree below `points`.
    fn quadrature(f: impl Fn(f64) -> f64, points: usize) -> f64 {
        let h = 2.0 * PI / points as f64;
        (0..points).map(|i| f(i as f64 * h)).sum::<f64>() * h
    }

    #[test]
    fn integral_examples() {
        let u = FourierField::cosine(1, 1.0);
        assert!((mono("u*u").eval_integral(&u) - 4.0 * PI).abs() < 1e-13);
        assert!(mono("u^2*H(u_x)").eval_integral(&u).abs() < 1e-13);
        let w = FourierField::from_modes(&[(1, c(1.0, 0.0)), (2, c(1.0, 0.0))]);
        // Both (1,1,-2) and (-1,-1,2) orderings contribute: 12π, matching quadrature.
        let quad = quadrature(|x| w.eval(x).powi(3), 64);
        assert!((quad - 12.0 * PI).abs() < 1e-12);
        assert!((mono("u^3").eval_integral(&w) - quad).abs() < 1e-12);
    }

    #[test]
    fn pstar_examples() {
        let u = FourierField::from_modes(&[(1, c(0.4, -0.2)), (2, c(0.1, 0.3)), (3, c(-0.5, 0.2))]);
        let sq = mono("u*u");
        let pp = sq.pstar(2);
        assert_eq!(pp.summand_count(), 2);
        let s = pp.eval_summands(&u);
        assert!((s[0] - s[1]).abs() < 1e-14);
        assert!(s[0].abs() > 1e-6);
        assert_eq!(mono("u").pstar(1).eval_integral(&u), 0.0);
        assert_eq!(mono("u*u_x*u_xx").pstar(6).eval_integral(&u), 0.0);
    }

    #[test]
    fn directional_derivative_examples() {
        let u = FourierField::from_modes(&[(1, c(0.4, -0.2)), (2, c(0.1, 0.3))]);
        let v = FourierField::from_modes(&[(1, c(-0.3, 0.6)), (3, c(0.2, 0.1))]);
        let d = mono("u*u").directional_derivative(&u, &v);
        let expected = 2.0 * crate::fourier::product(&u, &v).integrate();
        assert!((d - expected).abs() < 1e-13);
        let cos = FourierField::cosine(1, 1.0_f64);
        assert!(mono("u^3").directional_derivative(&cos, &cos).abs() < 1e-13);
        assert_eq!(mono("u*u_xx*H(u_x)").directional_derivative(&u, &FourierField::zeros(3)), 0.0);
    }

    #[test]
    fn canonical_sorts_factors() {
        assert_eq!(mono("H(u_x)*u*u").canonical(), mono("u^2*H(u_x)").canonical());
        assert_ne!(mono("H(u_x)*u*u").canonical(), mono("u*u_x*u").canonical());
    }
}
