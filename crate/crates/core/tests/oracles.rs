use std::f64::consts::TAU;

use bo_core::energy::{catalog, g1_closed_form};
use bo_core::harness::decay_samples;
use bo_core::measure::{sample, MeasureSpec};
use bo_core::moments::exact_moment;
use bo_core::random::derive_seed;
use proptest::prelude::*;

/// Counts pairings of `g` factors with `ḡ` factors of the same mode by
/// trying every assignment. `j` entries are `g_j` (`ḡ_{|j|}` if negative),
/// `i` entries are conjugated.
fn wick_by_pairings(j: &[i64], i: &[i64]) -> u64 {
    let mut plain = Vec::new();
    let mut conj = Vec::new();
    for &x in j {
        if x > 0 { plain.push(x) } else { conj.push(-x) }
    }
    for &x in i {
        if x > 0 { conj.push(x) } else { plain.push(-x) }
    }
    if plain.len() != conj.len() {
        return 0;
    }
    fn count(plain: &[i64], conj: &mut Vec<Option<i64>>) -> u64 {
        let Some((&first, rest)) = plain.split_first() else { return 1 };
        let mut total = 0;
        for k in 0..conj.len() {
            if conj[k] == Some(first) {
                conj[k] = None;
                total += count(rest, conj);
                conj[k] = Some(first);
            }
        }
        total
    }
    count(&plain, &mut conj.into_iter().map(Some).collect())
}

fn nonzero() -> impl Strategy<Value = i64> {
    prop_oneof![-3i64..=-1, 1i64..=3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn moment_matches_pairing_count(
        j in prop::collection::vec(nonzero(), 0..=4),
        i in prop::collection::vec(nonzero(), 0..=4),
    ) {
        prop_assert_eq!(exact_moment(&j, &i), wick_by_pairings(&j, &i));
    }
}

#[test]
fn moment_examples() {
    assert_eq!(exact_moment(&[1, 1], &[1, 1]), 2);
    assert_eq!(exact_moment(&[1, -1], &[]), 1);
    assert_eq!(exact_moment(&[1, 2], &[2, 1]), 1);
    assert_eq!(exact_moment(&[1], &[2]), 0);
    assert_eq!(exact_moment(&[2, 2, 2], &[2, 2, 2]), 6);
}

#[test]
fn decay_samples_agree_with_closed_form() {
    let (n, samples, seed) = (24, 40, 3);
    let e = catalog::e1(TAU);
    let chain = decay_samples(&e, 2, n, samples, seed);
    for (i, g) in chain.iter().enumerate() {
        let u = sample(&MeasureSpec { k: 2, n, seed: derive_seed(seed, i as u64) }).field;
        let closed = g1_closed_form(&u, n);
        assert!((g - closed).abs() <= 1e-10 * closed.abs().max(1e-300), "draw {i}: {g} vs {closed}");
    }
}
