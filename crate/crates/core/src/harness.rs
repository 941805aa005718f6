//! Batch experiments: Monte Carlo decay of `‖G_N^{k/2}‖_{L²(dμ)}`, the exact
//! identity suite, the density Cauchy probe and long-time recurrence runs. Every report carries the
//! seed and a SHA-256 of its configuration.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{catalog, g1_closed_form, g_value, EnergyFunctional, EnergySet};
use crate::error::{Error, Result};
use crate::flow::{evolve_with, Equation, FlowSpec};
use crate::fourier::FourierField;
use crate::identities::{check_intpar_identities, check_vanishing_terms, VANISHING_TERMS};
use crate::measure::{density_f, sample, MeasureSpec};
use crate::random::{derive_seed, unit_disk_field};

/// Hex SHA-256 of the JSON form of a configuration.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    /// Energy index: `G_N^{k/2}`.
    pub k: u32,
    /// Measure index when it differs from `k`, e.g. `G_N^{3/2}` under `μ_2`.
    pub measure_k: Option<u32>,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
}

impl DecayConfig {
    pub fn measure(&self) -> u32 {
        self.measure_k.unwrap_or(self.k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    /// `(mean G²)^{1/2}`.
    pub estimate: f64,
    /// Delta-method standard error of the estimate.
    pub std_error: f64,
    /// `(mean G⁴)^{1/4}`, the `L⁴(dμ)` norm.
    pub l4_estimate: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub config: DecayConfig,
    pub config_hash: String,
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].estimate < w[0].estimate)
    }

    /// Consecutive drops exceed `z` combined standard errors.
    pub fn drops_significant(&self, z: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            w[0].estimate - w[1].estimate > z * se
        })
    }

    /// Largest `est(4N)/est(N)` over grid pairs present in the report.
    pub fn worst_quadrupling_ratio(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for a in &self.rows {
            if let Some(b) = self.rows.iter().find(|b| b.n == 4 * a.n) {
                let r = b.estimate / a.estimate;
                worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            }
        }
        worst
    }

    pub fn max_estimate(&self) -> f64 {
        self.rows.iter().map(|r| r.estimate).fold(0.0, f64::max)
    }

    /// Long-format CSV: `k, measure_k, N, estimate, std_error, l4_estimate, samples, seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "measure_k", "N", "estimate", "std_error", "l4_estimate", "samples", "seed"])?;
        for r in &self.rows {
            w.write_record([
                self.config.k.to_string(),
                self.config.measure().to_string(),
                r.n.to_string(),
                r.estimate.to_string(),
                r.std_error.to_string(),
                r.l4_estimate.to_string(),
                r.samples.to_string(),
                self.config.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `G_N` on `samples` draws of `μ_{measure_k/2}` truncated at `N`. Draw `i`
/// uses seed `derive_seed(seed, i)`, so draws at different `N` share their low modes.
pub fn decay_samples(
    energy: &EnergyFunctional<f64>,
    measure_k: u32,
    n: usize,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = sample(&MeasureSpec { k: measure_k, n, seed: derive_seed(seed, i as u64) }).field;
            g_value(energy, n, &u)
        })
        .collect()
}

/// Root mean square and its delta-method standard error.
pub fn rms_with_error(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let sq: Vec<f64> = values.iter().map(|g| g * g).collect();
    let mean = sq.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let est = mean.sqrt();
    let se = if est > 0.0 { (var / m).sqrt() / (2.0 * est) } else { 0.0 };
    (est, se)
}

pub fn run_decay_study(cfg: &DecayConfig, energies: &EnergySet) -> Result<DecayReport> {
    if cfg.samples == 0 {
        return Err(Error::EmptySamples);
    }
    if cfg.grid.is_empty() || cfg.grid.contains(&0) {
        return Err(Error::Invalid("N grid must be non-empty with N ≥ 1".into()));
    }
    let energy = energies.get(cfg.k)?;
    let rows = cfg
        .grid
        .iter()
        .map(|&n| {
            let g = decay_samples(energy, cfg.measure(), n, cfg.samples, cfg.seed);
            let (estimate, std_error) = rms_with_error(&g);
            let l4_estimate = (g.iter().map(|x| x.powi(4)).sum::<f64>() / g.len() as f64).powf(0.25);
            DecayRow { n, estimate, std_error, l4_estimate, samples: cfg.samples }
        })
        .collect();
    Ok(DecayReport { config: cfg.clone(), config_hash: config_hash(cfg)?, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProbeConfig {
    pub k: u32,
    pub r: f64,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: usize,
    /// Mean of `|F_N - F_{2N}|²` over the draws.
    pub mean_sq_diff: f64,
    pub std_error: f64,
    /// Mean of `F_N`.
    pub mean_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub config: DensityProbeConfig,
    pub config_hash: String,
    pub rows: Vec<DensityRow>,
}

impl DensityReport {
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_sq_diff < w[0].mean_sq_diff)
    }
}

/// `L²(dμ)` Cauchy probe for the densities: each draw is taken at `2 max(grid)`
/// modes and compared at `N` and `2N`.
pub fn run_density_probe(cfg: &DensityProbeConfig, energies: &EnergySet) -> Result<DensityReport> {
    if cfg.samples == 0 {
        return Err(Error::EmptySamples);
    }
    let Some(&top) = cfg.grid.iter().max() else {
        return Err(Error::Invalid("N grid must be non-empty".into()));
    };
    if cfg.grid.contains(&0) {
        return Err(Error::Invalid("N grid entries must be at least 1".into()));
    }
    let width = 2 * top;
    let per_draw: Vec<Vec<(f64, f64)>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let u = sample(&MeasureSpec::new(cfg.k, width, derive_seed(cfg.seed, i as u64))?).field;
            cfg.grid
                .iter()
                .map(|&n| {
                    let a = density_f(cfg.k, n, cfg.r, &u, energies)?;
                    let b = density_f(cfg.k, 2 * n, cfg.r, &u, energies)?;
                    Ok((a, (a - b).powi(2)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let m = cfg.samples as f64;
    let rows = cfg
        .grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let d: Vec<f64> = per_draw.iter().map(|r| r[g].1).collect();
            let mean = d.iter().sum::<f64>() / m;
            let var = if d.len() > 1 { d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            let mean_density = per_draw.iter().map(|r| r[g].0).sum::<f64>() / m;
            DensityRow { n, mean_sq_diff: mean, std_error: (var / m).sqrt(), mean_density }
        })
        .collect();
    Ok(DensityReport { config: cfg.clone(), config_hash: config_hash(cfg)?, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuiteConfig {
    pub seed: u64,
    pub fields: usize,
    pub n_max_cycle: Vec<usize>,
    pub tol: f64,
    /// Tolerance for the `G_N` closed form, which goes through more products.
    pub g_tol: f64,
    /// Relative change applied to the `u⁴` coefficient of `E_1` (mutation test).
    pub corrupt: Option<f64>,
}

impl Default for IdentitySuiteConfig {
    fn default() -> Self {
        Self { seed: 1, fields: 100, n_max_cycle: vec![8, 16, 32], tol: 1e-10, g_tol: 1e-10, corrupt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityFailure {
    pub field: usize,
    pub n_max: usize,
    pub check: String,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub config: IdentitySuiteConfig,
    pub config_hash: String,
    pub checks: usize,
    /// Largest relative residual per check family.
    pub worst: Vec<(String, f64)>,
    pub failures: Vec<IdentityFailure>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The energy `E_1` with `λ = 2π`, optionally with a perturbed quartic coefficient.
fn e1_for_suite(corrupt: Option<f64>) -> EnergyFunctional<f64> {
    let mut e = catalog::e1(std::f64::consts::TAU);
    if let Some(eps) = corrupt {
        e.terms.terms[1].0 *= 1.0 + eps;
    }
    e
}

/// Run every exact identity on random fields; `n_max` cycles through
/// `n_max_cycle`. The integration-by-parts identities use `N = n_max`, the
/// vanishing terms and the `G_N` closed form use `N = n_max / 2`.
pub fn run_identity_suite(cfg: &IdentitySuiteConfig) -> Result<IdentityReport> {
    if cfg.fields == 0 || cfg.n_max_cycle.is_empty() {
        return Err(Error::EmptySamples);
    }
    let e1 = e1_for_suite(cfg.corrupt);
    let results: Vec<Vec<(String, usize, f64, f64)>> = (0..cfg.fields)
        .into_par_iter()
        .map(|i| -> Result<Vec<(String, usize, f64, f64)>> {
            let n_max = cfg.n_max_cycle[i % cfg.n_max_cycle.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
            let u = unit_disk_field(n_max, &mut rng);
            let mut out = Vec::new();
            for m in 1..=3 {
                let r = check_intpar_identities(&u, m, n_max)?;
                out.push((format!("intpar-first-m{m}"), n_max, r.first.relative(), cfg.tol));
                out.push((format!("intpar-second-m{m}"), n_max, r.second.relative(), cfg.tol));
            }
            let n = (n_max / 2).max(1);
            for id in VANISHING_TERMS {
                out.push((id.to_string(), n_max, check_vanishing_terms(&u, n, id)?.relative(), cfg.tol));
            }
            let chain = g_value(&e1, n, &u);
            let closed = g1_closed_form(&u, n);
            let scale = chain.abs().max(closed.abs());
            let rel = if scale > 0.0 { (chain - closed).abs() / scale } else { 0.0 };
            out.push(("g1-closed-form".into(), n_max, rel, cfg.g_tol));
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst: Vec<(String, f64)> = Vec::new();
    for (i, rows) in results.into_iter().enumerate() {
        for (name, n_max, rel, tol) in rows {
            checks += 1;
            match worst.iter_mut().find(|(w, _)| *w == name) {
                Some(w) => w.1 = w.1.max(rel),
                None => worst.push((name.clone(), rel)),
            }
            if !(rel <= tol) {
                failures.push(IdentityFailure { field: i, n_max, check: name, relative: rel });
            }
        }
    }
    Ok(IdentityReport { config: cfg.clone(), config_hash: config_hash(cfg)?, checks, worst, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialData {
    /// A draw of `μ_{k/2}` truncated at `n`.
    Draw { k: u32, n: usize, seed: u64 },
    Coefficients(FourierField<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceConfig {
    pub flow: FlowSpec,
    pub initial: InitialData,
    pub t_final: f64,
    pub s: f64,
    /// Record a distance every `stride` base steps.
    pub stride: usize,
    /// Distances per window.
    pub window: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub equation: Equation,
    pub s: f64,
    pub config_hash: String,
    /// `(t, ‖u(t) - u(0)‖_{Ḣ^s})`.
    pub distances: Vec<(f64, f64)>,
    /// Minimum over each window, excluding `t = 0`.
    pub window_minima: Vec<f64>,
    /// Running minimum of the window minima.
    pub running_minimum: Vec<f64>,
    pub initial_norm: f64,
}

impl RecurrenceReport {
    /// Long-format CSV: `t, distance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "distance"])?;
        for (t, d) in &self.distances {
            w.write_record([t.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_recurrence(cfg: &RecurrenceConfig) -> Result<RecurrenceReport> {
    if cfg.window == 0 {
        return Err(Error::Invalid("window must be at least 1".into()));
    }
    let u0 = match &cfg.initial {
        InitialData::Draw { k, n, seed } => {
            let bound = (*k as f64 - 1.0) / 2.0;
            if cfg.s >= bound {
                return Err(Error::RegularityTooHigh { s: cfg.s, k: *k, bound });
            }
            sample(&MeasureSpec::new(*k, *n, *seed)?).field
        }
        InitialData::Coefficients(u) => u.clone(),
    };
    let width = u0.n_max().max(cfg.flow.n);
    let start = u0.resized(width);
    let mut distances = Vec::new();
    evolve_with(&cfg.flow, &u0, cfg.t_final, cfg.stride.max(1), |t, u| {
        distances.push((t, u.resized(width).sub(&start).sobolev_norm(cfg.s)));
    })?;
    let window_minima: Vec<f64> = distances[1..]
        .chunks(cfg.window)
        .map(|c| c.iter().map(|p| p.1).fold(f64::INFINITY, f64::min))
        .collect();
    let running_minimum = window_minima
        .iter()
        .scan(f64::INFINITY, |m, &x| {
            *m = m.min(x);
            Some(*m)
        })
        .collect();
    Ok(RecurrenceReport {
        equation: cfg.flow.equation,
        s: cfg.s,
        config_hash: config_hash(cfg)?,
        distances,
        window_minima,
        running_minimum,
        initial_norm: start.sobolev_norm(cfg.s),
    })
}
