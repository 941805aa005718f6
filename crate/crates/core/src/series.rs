//! Lattice sums over `0 < |j_k| ≤ N`, usually restricted to `|Σ j_k| > N`,
//! and the growth rates they are expected to follow.
//!
//! Summation is blockwise: one compensated (Neumaier) sum per value of the
//! outermost index, then a fixed pairwise reduction over the blocks, so the
//! result does not depend on thread scheduling. Inner indices are visited by
//! magnitude and by sign relative to the outer one, which makes the blocks
//! for `j` and `-j` bitwise identical.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `N` for double sums.
pub const DOUBLE_SUM_LIMIT: usize = 1 << 14;
/// Largest `N` for triple sums; `m`-fold sums use `N ≤ 2^{27/m}/2`.
pub const TRIPLE_SUM_LIMIT: usize = 1 << 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Lemma {
    /// `Σ_{|j+l|>N} 1/(|j| l²)`.
    AlgebrTv,
    /// `Σ_{|j_1+…+j_m|>N} 1/(|j_1| Π_{k≥2} j_k²)`.
    AlgebrTv2(usize),
    /// `Σ_j (Σ_{|j+l|>N} 1/(j² l²))^{1/2}`.
    Serienew,
    /// `Σ_{|j+l|>N} |j|/l²`.
    Sersaut,
    /// `Σ Π_k |j_k|^{-a_k}`, optionally over `|Σ j_k| > N` only.
    Generic { exponents: Vec<f64>, sum_above_n: bool },
}

impl Lemma {
    pub fn id(&self) -> String {
        match self {
            Lemma::AlgebrTv => "algebrTV".into(),
            Lemma::AlgebrTv2(m) => format!("algebrTV2({m})"),
            Lemma::Serienew => "serienew".into(),
            Lemma::Sersaut => "sersaut".into(),
            Lemma::Generic { exponents, sum_above_n } => {
                let e: Vec<String> = exponents.iter().map(|x| x.to_string()).collect();
                format!("generic({};{})", e.join(","), if *sum_above_n { "above" } else { "all" })
            }
        }
    }

    /// Parse `algebrTV`, `algebrTV2(3)`, `serienew`, `sersaut`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "algebrTV" => Ok(Lemma::AlgebrTv),
            "serienew" => Ok(Lemma::Serienew),
            "sersaut" => Ok(Lemma::Sersaut),
            _ => {
                let m = s
                    .strip_prefix("algebrTV2(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| Error::UnknownTerm(s.to_string()))?;
                if m < 2 {
                    return Err(Error::Invalid("algebrTV2 needs m ≥ 2".into()));
                }
                Ok(Lemma::AlgebrTv2(m))
            }
        }
    }

    fn arity(&self) -> usize {
        match self {
            Lemma::AlgebrTv | Lemma::Serienew | Lemma::Sersaut => 2,
            Lemma::AlgebrTv2(m) => *m,
            Lemma::Generic { exponents, .. } => exponents.len(),
        }
    }

    fn exponents(&self) -> Vec<f64> {
        match self {
            Lemma::AlgebrTv => vec![1.0, 2.0],
            Lemma::Serienew => vec![2.0, 2.0],
            Lemma::AlgebrTv2(m) => std::iter::once(1.0).chain(std::iter::repeat(2.0).take(m - 1)).collect(),
            Lemma::Sersaut => vec![-1.0, 2.0],
            Lemma::Generic { exponents, .. } => exponents.clone(),
        }
    }

    fn constrained(&self) -> bool {
        match self {
            Lemma::Generic { sum_above_n, .. } => *sum_above_n,
            _ => true,
        }
    }

    /// The claimed order of growth.
    pub fn rate(&self, n: usize) -> f64 {
        let x = n as f64;
        match self {
            Lemma::AlgebrTv | Lemma::AlgebrTv2(_) => x.ln() / x,
            Lemma::Serienew => 1.0 / x.sqrt(),
            Lemma::Sersaut => x * x.ln(),
            Lemma::Generic { .. } => 1.0,
        }
    }

    /// Largest `N` the brute-force evaluation accepts.
    pub fn limit(&self) -> usize {
        match self.arity() {
            0..=2 => DOUBLE_SUM_LIMIT,
            3 => TRIPLE_SUM_LIMIT,
            m => (2f64.powf(27.0 / m as f64) / 2.0).floor() as usize,
        }
    }
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.c
    }
}

/// Fixed-shape pairwise reduction.
fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise(&xs[..n / 2]) + pairwise(&xs[n / 2..]),
    }
}

struct Enumerator {
    n: i64,
    exponents: Vec<f64>,
    constrained: bool,
    positive_only: bool,
}

impl Enumerator {
    fn weight(&self, k: usize, mag: i64) -> f64 {
        (mag as f64).powf(-self.exponents[k])
    }

    /// Sum over indices `k..` given the partial sum `s` and product `w` of the
    /// earlier ones. `sign` is the sign of the outer index.
    fn inner(&self, k: usize, s: i64, w: f64, sign: i64, acc: &mut Compensated) {
        let n = self.n;
        let last = k + 1 == self.exponents.len();
        let signs: &[i64] = if self.positive_only { &[1] } else { &[1, -1] };
        if last && self.constrained {
            for mag in 1..=n {
                for &rel in signs {
                    if (s + sign * rel * mag).abs() > n {
                        acc.add(w * self.weight(k, mag));
                    }
                }
            }
            return;
        }
        for mag in 1..=n {
            for &rel in signs {
                let l = sign * rel * mag;
                let wk = w * self.weight(k, mag);
                if last {
                    acc.add(wk);
                } else {
                    self.inner(k + 1, s + l, wk, sign, acc);
                }
            }
        }
    }

    fn block(&self, j: i64) -> f64 {
        let mut acc = Compensated::default();
        if self.exponents.len() == 1 {
            if !self.constrained || j.abs() > self.n {
                acc.add(self.weight(0, j.abs()));
            }
        } else {
            self.inner(1, j, self.weight(0, j.abs()), j.signum(), &mut acc);
        }
        acc.value()
    }
}

fn check_cost(lemma: &Lemma, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("N must be at least 1".into()));
    }
    if lemma.arity() == 0 {
        return Err(Error::Invalid("empty exponent vector".into()));
    }
    let limit = lemma.limit();
    if n > limit {
        return Err(Error::CostGuard { n, limit });
    }
    Ok(())
}

fn evaluate_impl(lemma: &Lemma, n: usize, positive_only: bool) -> Result<f64> {
    check_cost(lemma, n)?;
    let e = Enumerator { n: n as i64, exponents: lemma.exponents(), constrained: lemma.constrained(), positive_only };
    let outer_signs: &[i64] = if positive_only { &[1] } else { &[1, -1] };
    let blocks: Vec<f64> = (1..=n as i64)
        .into_par_iter()
        .map(|mag| {
            let mut acc = Compensated::default();
            for &sg in outer_signs {
                let b = e.block(sg * mag);
                acc.add(if *lemma == Lemma::Serienew { b.sqrt() } else { b });
            }
            acc.value()
        })
        .collect();
    Ok(pairwise(&blocks))
}

/// The sum at cutoff `N`.
pub fn evaluate(lemma: &Lemma, n: usize) -> Result<f64> {
    evaluate_impl(lemma, n, false)
}

/// The same sum with every index restricted to be positive.
pub fn evaluate_positive(lemma: &Lemma, n: usize) -> Result<f64> {
    evaluate_impl(lemma, n, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub value: f64,
    /// `value / rate(N)`.
    pub scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub lemma: String,
    /// `p` and `q` in `log S ≈ c + p log N + q log log N`.
    pub exponent: f64,
    pub log_exponent: f64,
    pub max_scaled: f64,
    pub points: Vec<RatePoint>,
}

impl RateFit {
    /// `max scaled / scaled at the first grid point`.
    pub fn growth_of_scaled(&self) -> f64 {
        self.max_scaled / self.points[0].scaled
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lemma", "N", "value", "scaled"])?;
        for p in &self.points {
            w.write_record([self.lemma.clone(), p.n.to_string(), p.value.to_string(), p.scaled.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate on a grid of at least six cutoffs (each ≥ 3) and fit the growth.
pub fn fit_rate(lemma: &Lemma, grid: &[usize]) -> Result<RateFit> {
    if grid.len() < 6 {
        return Err(Error::Invalid(format!("need at least 6 grid points, got {}", grid.len())));
    }
    if grid.iter().any(|&n| n < 3) {
        return Err(Error::Invalid("grid points must be at least 3".into()));
    }
    let points: Vec<RatePoint> = grid
        .iter()
        .map(|&n| {
            let value = evaluate(lemma, n)?;
            Ok(RatePoint { n, value, scaled: value / lemma.rate(n) })
        })
        .collect::<Result<_>>()?;
    let rows = points.len();
    let a = DMatrix::from_fn(rows, 3, |i, c| {
        let x = points[i].n as f64;
        match c {
            0 => 1.0,
            1 => x.ln(),
            _ => x.ln().ln(),
        }
    });
    let b = DVector::from_iterator(rows, points.iter().map(|p| p.value.ln()));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let max_scaled = points.iter().map(|p| p.scaled).fold(f64::MIN, f64::max);
    Ok(RateFit { lemma: lemma.id(), exponent: sol[1], log_exponent: sol[2], max_scaled, points })
}

/// Check `Σ_{k=a}^N 1/k² ≤ c (N-a+1)/(aN)` for every `1 ≤ a ≤ N ≤ n_max`.
/// Returns the largest ratio of the left side to the right side.
pub fn integral_bound_ratio(n_max: usize, c: f64) -> f64 {
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut tail = 0.0;
            let mut worst: f64 = 0.0;
            for a in (1..=n).rev() {
                tail += 1.0 / (a * a) as f64;
                let rhs = c * (n - a + 1) as f64 / (a * n) as f64;
                worst = worst.max(tail / rhs);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// `2^lo, ..., 2^hi`.
pub fn geometric_grid(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|p| 1usize << p).collect()
}
