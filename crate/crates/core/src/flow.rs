//! Galerkin-truncated flows
//! `∂_t u + L u + π_N((π_N u) ∂_x (π_N u)) = 0`, with `L = H∂²` (Benjamin–Ono)
//! or `L = ∂³` (KdV). Modes above `N` are carried and evolve linearly.
//!
//! Time stepping is the integrating-factor RK4 scheme: the linear phase is
//! exact, the quadratic term goes through classical fourth-order stages.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierField;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equation {
    BenjaminOno,
    Kdv,
}

impl Equation {
    /// `ω_j` with `c_j' = i ω_j c_j` for the linear part, `j ≥ 1`.
    pub fn frequency(self, j: usize) -> f64 {
        let j = j as f64;
        match self {
            Equation::BenjaminOno => -j * j,
            Equation::Kdv => j * j * j,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub equation: Equation,
    pub n: usize,
    /// Base step; halved locally when the drift test fails.
    pub dt: f64,
    /// Budget for the relative drift of `‖π_N u‖²_{L²}` over the whole run.
    pub tol: f64,
    /// Switch the quadratic term off (linear flow only).
    pub nonlinear: bool,
}

impl FlowSpec {
    pub fn new(equation: Equation, n: usize, dt: f64, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("N must be at least 1".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        if !(tol > 0.0) {
            return Err(Error::Invalid(format!("tol must be positive, got {tol}")));
        }
        Ok(Self { equation, n, dt, tol, nonlinear: true })
    }

    pub fn bo(n: usize) -> Self {
        Self { equation: Equation::BenjaminOno, n, dt: 1e-3, tol: 1e-10, nonlinear: true }
    }

    pub fn kdv(n: usize) -> Self {
        Self { equation: Equation::Kdv, n, ..Self::bo(n) }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }
}

/// Per-step drift that is always accepted.
const ROUNDING_DRIFT: f64 = 16.0 * f64::EPSILON;

/// How many halvings of the base step are allowed before giving up.
const MAX_HALVINGS: u32 = 30;

/// `-π_N((π_N u) ∂(π_N u))` on modes `1..=N`, written as `-(ij/2) [π_N(u_N²)]_j`.
fn quadratic_term(c: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = n.min(c.len());
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    if m == 0 {
        return out;
    }
    // Two-sided coefficients of u_N for k = -m..=m.
    let mut two: Vec<Complex64> = Vec::with_capacity(2 * m + 1);
    two.extend(c[..m].iter().rev().map(|z| z.conj()));
    two.push(Complex64::new(0.0, 0.0));
    two.extend_from_slice(&c[..m]);
    let sq = f64::convolve(&two, &two);
    // sq index i holds mode i - 2m.
    for j in 1..=m {
        let s = sq[j + 2 * m];
        out[j - 1] = Complex64::new(0.0, -0.5 * j as f64) * s;
    }
    out
}

/// Time derivative of the state: linear part on every mode, quadratic part on `|j| ≤ N`.
pub fn vector_field(spec: &FlowSpec, u: &FourierField<f64>) -> FourierField<f64> {
    FourierField::new(rhs(spec, u.coeffs()))
}

fn rhs(spec: &FlowSpec, c: &[Complex64]) -> Vec<Complex64> {
    let mut out = if spec.nonlinear {
        quadratic_term(c, spec.n)
    } else {
        vec![Complex64::new(0.0, 0.0); c.len()]
    };
    for (i, (o, z)) in out.iter_mut().zip(c).enumerate() {
        *o += Complex64::new(0.0, spec.equation.frequency(i + 1)) * z;
    }
    out
}

struct Stepper<'a> {
    spec: &'a FlowSpec,
}

impl Stepper<'_> {
    fn nonlinear(&self, c: &[Complex64]) -> Vec<Complex64> {
        if self.spec.nonlinear {
            quadratic_term(c, self.spec.n)
        } else {
            vec![Complex64::new(0.0, 0.0); c.len()]
        }
    }

    /// One IF-RK4 step of size `h` (may be negative).
    fn step(&self, c: &[Complex64], h: f64) -> Vec<Complex64> {
        let e: Vec<Complex64> = (0..c.len())
            .map(|i| Complex64::from_polar(1.0, self.spec.equation.frequency(i + 1) * h / 2.0))
            .collect();
        let lin = |v: &[Complex64]| -> Vec<Complex64> { v.iter().zip(&e).map(|(a, b)| a * b).collect() };
        let axpy = |x: &[Complex64], a: f64, y: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).map(|(p, q)| p + q * a).collect()
        };
        let k1 = self.nonlinear(c);
        let k2 = self.nonlinear(&lin(&axpy(c, h / 2.0, &k1)));
        let ec = lin(c);
        let k3 = self.nonlinear(&axpy(&ec, h / 2.0, &k2));
        let eec = lin(&ec);
        let k4 = self.nonlinear(&axpy(&eec, h, &lin(&k3)));
        let ek1 = lin(&lin(&k1));
        let ek23 = lin(&k2.iter().zip(&k3).map(|(a, b)| a + b).collect::<Vec<_>>());
        (0..c.len())
            .map(|i| eec[i] + (ek1[i] + ek23[i] * 2.0 + k4[i]) * (h / 6.0))
            .collect()
    }

    fn low_mass(&self, c: &[Complex64]) -> f64 {
        c.iter().take(self.spec.n).map(|z| z.norm_sqr()).sum()
    }

    /// Advance by `h`, splitting the step until the drift of `‖π_N u‖²`
    /// stays within its share `tol · |h| / |t_total|` of the budget, or
    /// within rounding.
    fn advance(&self, c: &[Complex64], h: f64, t_total: f64, depth: u32, t_now: f64) -> Result<Vec<Complex64>> {
        let next = self.step(c, h);
        let before = self.low_mass(c);
        let drift = if before > 0.0 { (self.low_mass(&next) - before).abs() / before } else { 0.0 };
        let budget = (self.spec.tol * (h / t_total).abs()).max(ROUNDING_DRIFT);
        if drift <= budget || !self.spec.nonlinear {
            return Ok(next);
        }
        if depth >= MAX_HALVINGS {
            return Err(Error::StepUnderflow { t_reached: t_now });
        }
        let mid = self.advance(c, h / 2.0, t_total, depth + 1, t_now)?;
        self.advance(&mid, h / 2.0, t_total, depth + 1, t_now + h / 2.0)
    }
}

/// `Φ^N_t(u0)`. Negative `t` runs the flow backwards.
pub fn evolve(spec: &FlowSpec, u0: &FourierField<f64>, t: f64) -> Result<FourierField<f64>> {
    let mut out = None;
    evolve_with(spec, u0, t, 0, |_, u| out = Some(u.clone()))?;
    Ok(out.unwrap_or_else(|| u0.clone()))
}

/// Like [`evolve`], calling `observe` at `t = 0`, after every `every` base
/// steps (if `every > 0`), and at the final time.
pub fn evolve_with(
    spec: &FlowSpec,
    u0: &FourierField<f64>,
    t: f64,
    every: usize,
    mut observe: impl FnMut(f64, &FourierField<f64>),
) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Invalid(format!("final time must be finite, got {t}")));
    }
    // The state must hold every mode the quadratic term can reach.
    let width = u0.n_max().max(spec.n);
    let mut c: Vec<Complex64> = u0.resized(width).coeffs().to_vec();
    observe(0.0, &FourierField::new(c.clone()));
    if t == 0.0 {
        return Ok(());
    }
    let steps = (t.abs() / spec.dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let stepper = Stepper { spec };
    for s in 0..steps {
        c = stepper.advance(&c, h, t, 0, s as f64 * h)?;
        let last = s + 1 == steps;
        if last || (every > 0 && (s + 1) % every == 0) {
            observe((s + 1) as f64 * h, &FourierField::new(c.clone()));
        }
    }
    Ok(())
}

/// Run several initial data in parallel.
pub fn evolve_many(spec: &FlowSpec, u0s: &[FourierField<f64>], t: f64) -> Vec<Result<FourierField<f64>>> {
    u0s.par_iter().map(|u| evolve(spec, u, t)).collect()
}

/// Checkpoints `(t, j, Re c_j, Im c_j)` as CSV.
pub fn write_trajectory_csv<W: Write>(
    spec: &FlowSpec,
    u0: &FourierField<f64>,
    t: f64,
    every: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j", "re", "im"])?;
    let mut err = None;
    evolve_with(spec, u0, t, every, |time, u| {
        for (i, z) in u.coeffs().iter().enumerate() {
            let rec = [time.to_string(), (i + 1).to_string(), z.re.to_string(), z.im.to_string()];
            if let Err(e) = w.write_record(&rec) {
                err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `‖Φ_t^{ref}(u0) - Φ_t^N(u0)‖_{Ḣ^s}`.
    pub distance: f64,
}

/// Distance from each truncated flow to the one at the largest `N` in
/// `n_list`, which must be at least four times every other entry.
/// `base` supplies equation, step and tolerance; its `n` is ignored.
pub fn convergence_probe(
    base: &FlowSpec,
    u0: &FourierField<f64>,
    n_list: &[usize],
    t: f64,
    s: f64,
) -> Result<Vec<ConvergenceRow>> {
    let Some(&n_ref) = n_list.iter().max() else {
        return Err(Error::NoReference("empty N list".into()));
    };
    let others: Vec<usize> = n_list.iter().copied().filter(|&n| n != n_ref).collect();
    if others.is_empty() {
        return Err(Error::NoReference("need at least two distinct N".into()));
    }
    if let Some(&bad) = others.iter().find(|&&n| 4 * n > n_ref) {
        return Err(Error::NoReference(format!("reference N = {n_ref} is less than 4 x {bad}")));
    }
    let run = |n: usize| evolve(&FlowSpec { n, ..base.clone() }, u0, t);
    let reference = run(n_ref)?;
    let rows: Result<Vec<ConvergenceRow>> = others
        .par_iter()
        .map(|&n| {
            let un = run(n)?;
            let width = un.n_max().max(reference.n_max());
            let d = reference.resized(width).sub(&un.resized(width));
            Ok(ConvergenceRow { n, distance: d.sobolev_norm(s) })
        })
        .collect();
    rows
}
