//! Exact moments of products of the Gaussians `g_n` (unit variance,
//! `g_{-n} = conj(g_n)`) and the zero-sum index sets on which the
//! orthogonality relations live.
//!
//! Tuple positions `l, m` are 1-based throughout, as in the set definitions.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type IndexTuple = Vec<i64>;

/// `E[Π g_{j} · conj(Π g_{i})]`.
///
/// Indices are folded onto positive modes; a mode seen `r` times as `g` and
/// `s` times as `ḡ` contributes `δ_{rs} r!`.
pub fn exact_moment(j_list: &[i64], i_list: &[i64]) -> u64 {
    let mut counts: HashMap<u64, (u32, u32)> = HashMap::new();
    let mut bump = |n: i64, conjugated: bool| {
        let e = counts.entry(n.unsigned_abs()).or_default();
        if (n > 0) != conjugated {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    };
    for &n in j_list {
        bump(n, false);
    }
    for &n in i_list {
        bump(n, true);
    }
    let mut out = 1u64;
    for (_, (r, s)) in counts {
        if r != s {
            return 0;
        }
        out *= (1..=r as u64).product::<u64>();
    }
    out
}

pub fn sums_to_zero(t: &[i64]) -> bool {
    t.iter().sum::<i64>() == 0
}

pub fn in_a(t: &[i64]) -> bool {
    t.iter().all(|&x| x != 0) && sums_to_zero(t)
}

/// Some `t_l = -t_m` with `l ≠ m`.
pub fn has_opposite_pair(t: &[i64]) -> bool {
    (0..t.len()).any(|l| (l + 1..t.len()).any(|m| t[l] == -t[m]))
}

pub fn in_a_tilde(t: &[i64]) -> bool {
    in_a(t) && !has_opposite_pair(t)
}

pub fn in_a_tilde_c(t: &[i64]) -> bool {
    in_a(t) && has_opposite_pair(t)
}

/// `t ∈ Ã^{c,j}`: `j = t_l = -t_m` for some `l ≠ m`.
pub fn in_a_tilde_c_j(t: &[i64], j: i64) -> bool {
    j != 0
        && in_a_tilde_c(t)
        && (0..t.len()).any(|l| t[l] == j && (0..t.len()).any(|m| m != l && t[m] == -j))
}

/// `t ∈ Ã^{c,j,(l,m)}`: `t ∈ Ã^{c,j}` and `j = t_l = -t_m`.
pub fn in_a_tilde_c_jlm(t: &[i64], j: i64, l: usize, m: usize) -> bool {
    (1..=t.len()).contains(&l)
        && (1..=t.len()).contains(&m)
        && l != m
        && t[l - 1] == j
        && t[m - 1] == -j
        && in_a_tilde_c_j(t, j)
}

/// `B^{c,j,(l0,m0)}`: the part of `Ã^{c,±j,(l0,m0)}` not already in some
/// `B^{c,j,(l,m)}` with `(l,m)` lexicographically smaller.
pub fn in_b(t: &[i64], j: i64, l0: usize, m0: usize) -> bool {
    if !(1 <= l0 && l0 < m0 && m0 <= t.len()) {
        return false;
    }
    let here = in_a_tilde_c_jlm(t, j, l0, m0) || in_a_tilde_c_jlm(t, -j, l0, m0);
    here && !ordered_pairs(t.len())
        .take_while(|&p| p < (l0, m0))
        .any(|(l, m)| in_b(t, j, l, m))
}

/// `(l, m)` with `1 ≤ l < m ≤ n` in lexicographic order.
pub fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=n).flat_map(move |l| (l + 1..=n).map(move |m| (l, m)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    A,
    ATilde,
    ATildeC,
    /// `Ã^{c,j}`.
    ATildeCj(i64),
    /// `Ã^{c,j,(l,m)}`.
    ATildeCjlm { j: i64, l: usize, m: usize },
    /// `B^{c,j,(l,m)}`.
    B { j: i64, l: usize, m: usize },
}

/// `|Σ_{p ∈ positions} t_p| > bound` (positions 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumAbove {
    pub positions: Vec<usize>,
    pub bound: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSetSpec {
    pub family: Family,
    pub n: usize,
    /// Largest allowed `|entry|`.
    pub max_abs: i64,
    pub extra: Vec<SumAbove>,
}

impl TupleSetSpec {
    pub fn new(family: Family, n: usize, max_abs: i64) -> Self {
        Self { family, n, max_abs, extra: vec![] }
    }

    pub fn with(mut self, positions: &[usize], bound: i64) -> Self {
        self.extra.push(SumAbove { positions: positions.to_vec(), bound });
        self
    }

    pub fn contains(&self, t: &[i64]) -> bool {
        if t.len() != self.n || t.iter().any(|x| x.abs() > self.max_abs) {
            return false;
        }
        let family = match self.family {
            Family::A => in_a(t),
            Family::ATilde => in_a_tilde(t),
            Family::ATildeC => in_a_tilde_c(t),
            Family::ATildeCj(j) => in_a_tilde_c_j(t, j),
            Family::ATildeCjlm { j, l, m } => in_a_tilde_c_jlm(t, j, l, m),
            Family::B { j, l, m } => in_b(t, j, l, m),
        };
        family
            && self.extra.iter().all(|c| {
                let s: i64 = c.positions.iter().map(|&p| t.get(p.wrapping_sub(1)).copied().unwrap_or(0)).sum();
                s.abs() > c.bound
            })
    }
}

/// All of `A_n` inside the box, in lexicographic order.
pub fn enumerate_a(n: usize, max_abs: i64) -> Vec<IndexTuple> {
    if n == 0 || max_abs < 1 {
        return vec![];
    }
    let values: Vec<i64> = (-max_abs..=max_abs).filter(|&x| x != 0).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(values: &[i64], n: usize, max_abs: i64, cur: &mut Vec<i64>, out: &mut Vec<IndexTuple>) {
        let s: i64 = cur.iter().sum();
        if cur.len() + 1 == n {
            let last = -s;
            if last != 0 && last.abs() <= max_abs {
                cur.push(last);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        let left = (n - cur.len()) as i64;
        for &v in values {
            // The remaining entries can move the sum by at most (left-1)·max_abs.
            if (s + v).abs() > (left - 1) * max_abs {
                continue;
            }
            cur.push(v);
            rec(values, n, max_abs, cur, out);
            cur.pop();
        }
    }
    if n == 1 {
        return vec![];
    }
    rec(&values, n, max_abs, &mut cur, &mut out);
    out
}

pub fn enumerate(spec: &TupleSetSpec) -> Vec<IndexTuple> {
    enumerate_a(spec.n, spec.max_abs).into_iter().filter(|t| spec.contains(t)).collect()
}

fn as_set(t: &[i64]) -> BTreeSet<i64> {
    t.iter().copied().collect()
}

/// The entries left after removing one copy of `j` and one of `-j`, as a set.
fn reduced_set(t: &[i64], j: i64) -> BTreeSet<i64> {
    let mut v = t.to_vec();
    for target in [j, -j] {
        if let Some(p) = v.iter().position(|&x| x == target) {
            v.remove(p);
        }
    }
    v.into_iter().collect()
}

/// The positive `j` with `t ∈ Ã^{c,j}`; unique for `n = 5`.
fn pair_values(t: &[i64]) -> Vec<i64> {
    let mut out: Vec<i64> = t.iter().filter(|&&x| x > 0 && t.contains(&-x)).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    /// Non-zero moment with different index sets forces an opposite pair.
    TildeA,
    /// Orthogonality on `A_3`.
    Cor33,
    /// Orthogonality on `Ã_n`.
    Cor55,
    /// Orthogonality across `Ã_5^{c,j}`, `Ã_5^{c,i}` once the pair is removed.
    ForP2,
    /// Orthogonality inside one `Ã_5^{c,j}`.
    Orthtzv,
    /// The `Ã_5^{c,j}`, `j > 0`, are pairwise disjoint.
    Rem5,
}

impl Statement {
    pub const ALL: [Statement; 6] =
        [Statement::TildeA, Statement::Cor33, Statement::Cor55, Statement::ForP2, Statement::Orthtzv, Statement::Rem5];

    pub fn id(self) -> &'static str {
        match self {
            Statement::TildeA => "tildeA",
            Statement::Cor33 => "cor3",
            Statement::Cor55 => "cor5,5",
            Statement::ForP2 => "forp=2",
            Statement::Orthtzv => "orthtzv",
            Statement::Rem5 => "rem5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.id() == s)
            .ok_or_else(|| Error::UnknownTerm(s.to_string()))
    }

    /// Tuple length the statement is about; `None` when it is free.
    pub fn fixed_arity(self) -> Option<usize> {
        match self {
            Statement::Cor33 => Some(3),
            Statement::ForP2 | Statement::Orthtzv | Statement::Rem5 => Some(5),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub statement: String,
    pub n: usize,
    #[serde(rename = "box")]
    pub max_abs: i64,
    pub pairs_checked: u64,
    pub violations: u64,
    /// Up to ten counterexamples.
    pub examples: Vec<(IndexTuple, IndexTuple)>,
}

impl OrthogonalityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const MAX_EXAMPLES: usize = 10;

/// Check every pair `(j, i)` from `tuples` for which `hyp` holds; a pair
/// violates the statement when its moment is non-zero.
fn sweep(tuples: &[IndexTuple], hyp: impl Fn(&[i64], &[i64]) -> bool + Sync) -> (u64, u64, Vec<(IndexTuple, IndexTuple)>) {
    tuples
        .par_iter()
        .map(|j| {
            let mut checked = 0;
            let mut bad = Vec::new();
            let mut bad_count = 0;
            for i in tuples {
                if !hyp(j, i) {
                    continue;
                }
                checked += 1;
                if exact_moment(j, i) != 0 {
                    bad_count += 1;
                    if bad.len() < MAX_EXAMPLES {
                        bad.push((j.clone(), i.clone()));
                    }
                }
            }
            (checked, bad_count, bad)
        })
        .reduce(
            || (0, 0, Vec::new()),
            |mut a, b| {
                a.0 += b.0;
                a.1 += b.1;
                a.2.extend(b.2);
                a.2.truncate(MAX_EXAMPLES);
                a
            },
        )
}

/// Exhaustively check one statement over tuples with entries in `[-max_abs, max_abs]`.
/// `n` is ignored by statements about a fixed arity.
pub fn verify_orthogonality(statement: Statement, n: usize, max_abs: i64) -> Result<OrthogonalityReport> {
    let n = statement.fixed_arity().unwrap_or(n);
    if n < 2 || max_abs < 1 {
        return Err(Error::Invalid(format!("need n ≥ 2 and box ≥ 1, got n = {n}, box = {max_abs}")));
    }
    let a = enumerate_a(n, max_abs);
    let (checked, violations, examples) = match statement {
        // Contrapositive: different sets and no opposite pair on either side.
        Statement::TildeA => sweep(&a, |j, i| {
            as_set(j) != as_set(i) && !has_opposite_pair(j) && !has_opposite_pair(i)
        }),
        Statement::Cor33 | Statement::Cor55 => {
            let pool: Vec<IndexTuple> = if statement == Statement::Cor33 {
                a
            } else {
                a.into_iter().filter(|t| in_a_tilde(t)).collect()
            };
            sweep(&pool, |j, i| as_set(j) != as_set(i))
        }
        Statement::ForP2 | Statement::Orthtzv => {
            let pool: Vec<IndexTuple> = a.into_iter().filter(|t| in_a_tilde_c(t)).collect();
            let same_j = statement == Statement::Orthtzv;
            sweep(&pool, move |jt, it| {
                // Every (j, i) choice of pair values the tuples admit.
                pair_values(jt).into_iter().any(|j| {
                    pair_values(it).into_iter().any(|i| {
                        (!same_j || i == j) && reduced_set(jt, j) != reduced_set(it, i)
                    })
                })
            })
        }
        Statement::Rem5 => {
            let pool: Vec<IndexTuple> = a.into_iter().filter(|t| in_a_tilde_c(t)).collect();
            let mut checked = 0u64;
            let mut bad = Vec::new();
            let mut count = 0u64;
            for t in &pool {
                for i in 1..=max_abs {
                    for j in i + 1..=max_abs {
                        checked += 1;
                        if in_a_tilde_c_j(t, i) && in_a_tilde_c_j(t, j) {
                            count += 1;
                            if bad.len() < MAX_EXAMPLES {
                                bad.push((t.clone(), vec![i, j]));
                            }
                        }
                    }
                }
            }
            (checked, count, bad)
        }
    };
    Ok(OrthogonalityReport {
        statement: statement.id().to_string(),
        n,
        max_abs,
        pairs_checked: checked,
        violations,
        examples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n: usize,
    #[serde(rename = "box")]
    pub max_abs: i64,
    /// Tuples of `Ã_n^{c,j}` (over all `j`) covered by exactly one `B^{c,j,(l,m)}`.
    pub covered_once: u64,
    /// Tuples covered zero or several times, or `B` members outside `Ã_n^{c,j}`.
    pub failures: u64,
    /// `|A_n| = |Ã_n| + |Ã_n^c|`.
    pub a_splits: bool,
}

/// Check `Ã_n^{c,j} = ⊔_{l<m} B^{c,j,(l,m)}` for every `0 < j ≤ box`, and `A_n = Ã_n ⊔ Ã_n^c`.
pub fn check_partition(n: usize, max_abs: i64) -> PartitionReport {
    let a = enumerate_a(n, max_abs);
    let tilde = a.iter().filter(|t| in_a_tilde(t)).count();
    let tilde_c = a.iter().filter(|t| in_a_tilde_c(t)).count();
    let a_splits = tilde + tilde_c == a.len() && a.iter().all(|t| in_a_tilde(t) != in_a_tilde_c(t));
    let (mut covered_once, mut failures) = (0, 0);
    for j in 1..=max_abs {
        for t in &a {
            let hits = ordered_pairs(n).filter(|&(l, m)| in_b(t, j, l, m)).count();
            match (in_a_tilde_c_j(t, j), hits) {
                (true, 1) => covered_once += 1,
                (false, 0) => {}
                _ => failures += 1,
            }
        }
    }
    PartitionReport { n, max_abs, covered_once, failures, a_splits }
}

/// `{t ∈ Ã_4^c : |t_1 + t_2| > bound}` against its closed description
/// `{(k,h,-k,-h), (k,h,-h,-k) : |h+k| > bound}`. Returns both sets.
pub fn four_tuples_with_large_pair_sum(max_abs: i64, bound: i64) -> (BTreeSet<IndexTuple>, BTreeSet<IndexTuple>) {
    let spec = TupleSetSpec::new(Family::ATildeC, 4, max_abs).with(&[1, 2], bound);
    let enumerated: BTreeSet<IndexTuple> = enumerate(&spec).into_iter().collect();
    let mut described = BTreeSet::new();
    for k in (-max_abs..=max_abs).filter(|&x| x != 0) {
        for h in (-max_abs..=max_abs).filter(|&x| x != 0) {
            if (h + k).abs() > bound {
                described.insert(vec![k, h, -k, -h]);
                described.insert(vec![k, h, -h, -k]);
            }
        }
    }
    (enumerated, described)
}

/// `E|Σ_a c_a g_{J_a}|²` expanded over all pairs of terms.
pub fn second_moment_direct(terms: &[(IndexTuple, f64)]) -> f64 {
    let mut s = 0.0;
    for (ja, ca) in terms {
        for (jb, cb) in terms {
            s += ca * cb * exact_moment(ja, jb) as f64;
        }
    }
    s
}

/// The same, grouping terms by the multiset of their indices. Valid when the
/// only surviving cross terms are between rearrangements of one multiset,
/// as on `Ã_n`.
pub fn second_moment_grouped(terms: &[(IndexTuple, f64)]) -> f64 {
    let mut groups: HashMap<IndexTuple, f64> = HashMap::new();
    for (j, c) in terms {
        let mut key = j.clone();
        key.sort_unstable();
        *groups.entry(key).or_default() += c;
    }
    groups.iter().map(|(key, c)| c * c * exact_moment(key, key) as f64).sum()
}
