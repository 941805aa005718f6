//! Exact algebraic identities for truncated fields.
//!
//! All of them rest on one fact: for `u` supported on `|j| ≤ N`, the product
//! `u⁺ u⁻` of the positive and negative parts has no modes above `N`, so
//! `π_{>N}` only sees `u⁺u⁺` and `u⁻u⁻`, on which `H` acts as `∓i`.
//!
//! Every check returns the value that should vanish together with a scale,
//! the sum of absolute pair products `2π Σ_k |A_k||B_{-k}|` over the terms
//! involved, so residuals can be judged relative to the size of what cancels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierField, Spectrum};
use crate::monomial::high_transfer;
use crate::scalar::Scalar;

/// A quantity that should vanish, plus the magnitude of its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    /// `|value| / scale`, or `|value|` when the scale is zero.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative() <= tol
    }
}

/// `∫ a b dx` and its absolute scale.
fn pair<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> (f64, f64) {
    let two_pi = std::f64::consts::TAU;
    let v = a.mean_of_product(b).re.to_float() * two_pi;
    let s = a.abs_mean_of_product(b).to_float() * two_pi;
    (v, s)
}

/// Accumulates signed terms into a [`Residual`].
#[derive(Default)]
struct Acc {
    value: f64,
    scale: f64,
}

impl Acc {
    fn add(&mut self, sign: f64, (v, s): (f64, f64)) {
        self.value += sign * v;
        self.scale += s;
    }

    fn finish(self) -> Residual {
        Residual { value: self.value.abs(), scale: self.scale }
    }
}

/// Residuals of the two integration-by-parts identities for `u` on `|j| ≤ N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntparResiduals {
    /// `∫ u (H∂^m u) ∂^m H π_{>N}(u u_x) − ∫ u ∂^m u ∂^m π_{>N}(u u_x)`.
    pub first: Residual,
    /// `∫ u ∂^m u ∂^m H π_{>N}(u u_x) + ∫ u ∂^m π_{>N}(u u_x) H∂^m u`.
    pub second: Residual,
}

/// Evaluate both identities. `u` must not carry modes above `n`.
pub fn check_intpar_identities<T: Scalar>(
    u: &FourierField<T>,
    m: u32,
    n: usize,
) -> Result<IntparResiduals> {
    if m == 0 {
        return Err(Error::Invalid("m must be at least 1".into()));
    }
    let support = u.support();
    if support > n {
        return Err(Error::SupportAboveCutoff { support, n });
    }
    let us = u.to_spectrum();
    let dm = us.derivative(m);
    let hdm = dm.hilbert();
    let w = high_transfer(&us, n);
    let dmw = w.derivative(m);
    let hdmw = dmw.hilbert();

    let mut first = Acc::default();
    first.add(1.0, pair(&us.mul(&hdm), &hdmw));
    first.add(-1.0, pair(&us.mul(&dm), &dmw));

    let mut second = Acc::default();
    second.add(1.0, pair(&us.mul(&dm), &hdmw));
    second.add(1.0, pair(&us.mul(&dmw), &hdm));

    Ok(IntparResiduals { first: first.finish(), second: second.finish() })
}

/// Identifiers accepted by [`check_vanishing_terms`].
pub const VANISHING_TERMS: [&str; 5] =
    ["heb-sr-i", "heb-sr-ii", "esrty-iii", "esrty-ii-pair", "esrty-ii-split"];

/// Evaluate one of the terms that vanish identically at `u_N = π_N u`.
///
/// * `heb-sr-i`: `(3/2) ∫ u_N π_{>N}(u_N ∂u_N) H∂u_N`
/// * `heb-sr-ii`: `(3/4) ∫ u_N² H π_{>N} ∂(u_N ∂u_N)`
/// * `esrty-iii`: `∫ u_N H∂u_N ∂² π_{>N}(u_N ∂u_N)`
/// * `esrty-ii-pair`: `∫ π_{>N}(u⁺u⁺_xx) π_{>N}H(u⁻u⁻_xx) + ∫ π_{>N}(u⁻u⁻_xx) π_{>N}H(u⁺u⁺_xx)`
/// * `esrty-ii-split`: `∫ u_N ∂²u_N π_{>N}H ∂(u_N ∂u_N)` minus its four-term
///   expansion over `u⁺`, `u⁻`.
pub fn check_vanishing_terms<T: Scalar>(u: &FourierField<T>, n: usize, which: &str) -> Result<Residual> {
    let un = u.project_low(n).to_spectrum();
    let ux = un.derivative(1);
    let uxx = un.derivative(2);
    let w = un.mul(&ux).project_high(n);
    let mut acc = Acc::default();
    match which {
        "heb-sr-i" => {
            let (v, s) = pair(&un.mul(&w), &ux.hilbert());
            acc.add(1.5, (v, 1.5 * s));
        }
        "heb-sr-ii" => {
            let (v, s) = pair(&un.mul(&un), &w.derivative(1).hilbert());
            acc.add(0.75, (v, 0.75 * s));
        }
        "esrty-iii" => acc.add(1.0, pair(&un.mul(&ux.hilbert()), &w.derivative(2))),
        "esrty-ii-pair" | "esrty-ii-split" => {
            let (p, q) = (un.positive_part(), un.negative_part());
            let (pxx, qxx) = (p.derivative(2), q.derivative(2));
            let (px, qx) = (p.derivative(1), q.derivative(1));
            let a_p = p.mul(&pxx).project_high(n);
            let a_q = q.mul(&qxx).project_high(n);
            let pair_terms = [
                pair(&a_p, &a_q.hilbert()),
                pair(&a_q, &a_p.hilbert()),
            ];
            if which == "esrty-ii-pair" {
                pair_terms.into_iter().for_each(|t| acc.add(1.0, t));
            } else {
                let b_p = px.mul(&px).project_high(n);
                let b_q = qx.mul(&qx).project_high(n);
                let whole = pair(&un.mul(&uxx), &w.derivative(1).hilbert());
                acc.add(1.0, whole);
                pair_terms.into_iter().for_each(|t| acc.add(-1.0, t));
                acc.add(-1.0, pair(&a_p, &b_q.hilbert()));
                acc.add(-1.0, pair(&a_q, &b_p.hilbert()));
            }
        }
        other => return Err(Error::UnknownTerm(other.to_string())),
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> FourierField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::random::unit_disk_field(n, &mut rng)
    }

    #[test]
    fn zero_field_gives_zero() {
        let z = FourierField::<f64>::zeros(4);
        let r = check_intpar_identities(&z, 2, 4).unwrap();
        assert_eq!((r.first.value, r.second.value), (0.0, 0.0));
        for id in VANISHING_TERMS {
            assert_eq!(check_vanishing_terms(&z, 4, id).unwrap().value, 0.0);
        }
    }

    #[test]
    fn cosine_at_cutoff_one() {
        let u = FourierField::cosine(1, 1.0);
        let r = check_intpar_identities(&u, 1, 1).unwrap();
        assert!(r.first.value < 1e-14 && r.second.value < 1e-14);
        assert!(r.first.scale > 0.0);
    }

    #[test]
    fn random_fields_satisfy_identities() {
        for (i, &n) in [8usize, 16, 32].iter().enumerate() {
            let u = random_field(n, 40 + i as u64);
            for m in 1..=3 {
                let r = check_intpar_identities(&u, m, n).unwrap();
                assert!(r.first.passes(1e-12) && r.second.passes(1e-12), "{r:?}");
            }
            for id in VANISHING_TERMS {
                let r = check_vanishing_terms(&u, n, id).unwrap();
                assert!(r.passes(1e-12), "{id}: {r:?}");
                assert!(r.scale > 0.0, "{id}");
            }
        }
    }

    #[test]
    fn support_above_cutoff_is_rejected() {
        let u = random_field(8, 1);
        assert_eq!(
            check_intpar_identities(&u, 1, 4),
            Err(Error::SupportAboveCutoff { support: 8, n: 4 })
        );
    }

    #[test]
    fn unknown_term_is_rejected() {
        let u = random_field(4, 2);
        assert!(matches!(check_vanishing_terms(&u, 4, "nope"), Err(Error::UnknownTerm(_))));
    }

    #[test]
    fn non_identity_is_detected() {
        // Without the Hilbert transforms the first identity has a non-zero side.
        let u = random_field(12, 9);
        let us = u.to_spectrum();
        let w = high_transfer(&us, 12);
        let (v, s) = pair(&us.mul(&us.derivative(2)), &w.derivative(2));
        assert!(v.abs() / s > 1e-6);
    }
}
