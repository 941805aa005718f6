use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bo_core::energy::{CalibrationConfig, EnergySet};
use bo_core::flow::{convergence_probe, Equation, FlowSpec};
use bo_core::harness::{
    run_decay_study, run_density_probe, run_identity_suite, run_recurrence, DecayConfig, DensityProbeConfig,
    IdentitySuiteConfig, InitialData, RecurrenceConfig,
};
use bo_core::measure::{sample, MeasureSpec};
use bo_core::moments::{verify_orthogonality, OrthogonalityReport, Statement};
use bo_core::series::{fit_rate, geometric_grid, integral_bound_ratio, Lemma, RateFit};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Largest allowed `max(S/rate) / (S/rate at the first N)` for a series.
const GROWTH_BOUND: f64 = 10.0;
/// Largest allowed `est(4N)/est(N)` in a decay study.
const QUADRUPLING_BOUND: f64 = 0.8;

#[derive(Parser)]
#[command(name = "bo-verify", version, about = "Numerical checks for the truncated Benjamin-Ono flow and its invariant measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identities on random fields.
    Identities(IdentitiesArgs),
    /// Exhaustive orthogonality sweeps over index boxes.
    Orthogonality(OrthogonalityArgs),
    /// Growth rates of the lattice sums.
    Series(SeriesArgs),
    /// Monte Carlo decay of the energy-derivative functionals.
    Decay(DecayArgs),
    /// Cauchy probe for the weighted densities.
    Density(DensityArgs),
    /// Distance of truncated flows to a high-resolution reference.
    FlowConverge(FlowConvergeArgs),
    /// Long-time return distances.
    Recurrence(RecurrenceArgs),
    /// Fit the conserved energies.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct IdentitiesArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of random fields.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct OrthogonalityArgs {
    /// Statement id (repeatable): tildeA, cor3, cor5,5, forp=2, orthtzv, rem5. Default: all.
    #[arg(long = "statement")]
    statements: Vec<String>,
    /// Tuple length for statements that do not fix it.
    #[arg(long)]
    n: Option<usize>,
    /// Index box `|j| ≤ box`.
    #[arg(long = "box")]
    max_abs: Option<i64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SeriesArgs {
    /// Lemma id (repeatable): algebrTV, algebrTV2(m), serienew, sersaut. Default: all with m = 2, 3.
    #[arg(long = "lemma")]
    lemmas: Vec<String>,
    /// Cutoffs; defaults to powers of two up to the cost limit of each sum.
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DecayArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
    k: Vec<u32>,
    /// Draw from this measure instead of the one matching `k`.
    #[arg(long)]
    measure_k: Option<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128, 256])]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Bound on the `k = 1` estimates, which vanish exactly.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Cut-off radius `R`.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64, 128])]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Bo,
    Kdv,
}

impl From<EquationArg> for Equation {
    fn from(e: EquationArg) -> Self {
        match e {
            EquationArg::Bo => Equation::BenjaminOno,
            EquationArg::Kdv => Equation::Kdv,
        }
    }
}

#[derive(Args)]
struct FlowConvergeArgs {
    #[arg(long, value_enum, default_value_t = EquationArg::Bo)]
    equation: EquationArg,
    /// Measure of the initial draw.
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Truncations; the largest is the reference and must be at least 4x the others.
    #[arg(long, value_delimiter = ',', default_values_t = [32usize, 64, 128, 512])]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 1.2)]
    s: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Drift budget of the step controller.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RecurrenceArgs {
    #[arg(long, value_enum, default_value_t = EquationArg::Bo)]
    equation: EquationArg,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Modes of the draw and truncation of the flow.
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.4)]
    s: f64,
    /// Record a distance every this many steps.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// Distances per window.
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 1, 2, 3, 4])]
    k: Vec<u32>,
    #[arg(long, default_value_t = CalibrationConfig::default().seed)]
    seed: u64,
    /// Bound on the validation residual.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

/// What a subcommand hands back: the report, its CSV rows, and the verdict.
struct Outcome {
    json: serde_json::Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    passed: bool,
    summary: String,
}

type Run = Result<Outcome, Box<dyn std::error::Error>>;

fn json<T: Serialize>(v: &T) -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    Ok(serde_json::to_value(v)?)
}

fn identities(a: &IdentitiesArgs) -> Run {
    let cfg = IdentitySuiteConfig { seed: a.seed, fields: a.samples, tol: a.tol, g_tol: a.tol, ..Default::default() };
    let report = run_identity_suite(&cfg)?;
    let rows = report.worst.iter().map(|(name, r)| vec![name.clone(), r.to_string()]).collect();
    Ok(Outcome {
        json: json(&report)?,
        header: vec!["check", "worst_relative"],
        rows,
        passed: report.passed(),
        summary: format!("{} checks, {} failures", report.checks, report.failures.len()),
    })
}

/// The statements with their default tuple lengths and boxes.
fn default_runs(st: Statement) -> Vec<(usize, i64)> {
    match st {
        Statement::TildeA => vec![(3, 4), (4, 4)],
        Statement::Cor55 => (2..=5).map(|n| (n, 3)).collect(),
        other => vec![(other.fixed_arity().unwrap_or(3), 4)],
    }
}

fn orthogonality(a: &OrthogonalityArgs) -> Run {
    let statements: Vec<Statement> = if a.statements.is_empty() {
        Statement::ALL.to_vec()
    } else {
        a.statements.iter().map(|s| Statement::parse(s)).collect::<Result<_, _>>()?
    };
    let mut reports: Vec<OrthogonalityReport> = Vec::new();
    for st in statements {
        let mut runs = default_runs(st);
        if let Some(n) = a.n.filter(|_| st.fixed_arity().is_none()) {
            runs = vec![(n, runs[0].1)];
        }
        for (n, b) in runs {
            reports.push(verify_orthogonality(st, n, a.max_abs.unwrap_or(b))?);
        }
    }
    let violations: u64 = reports.iter().map(|r| r.violations).sum();
    let pairs: u64 = reports.iter().map(|r| r.pairs_checked).sum();
    let rows = reports
        .iter()
        .map(|r| {
            vec![r.statement.clone(), r.n.to_string(), r.max_abs.to_string(), r.pairs_checked.to_string(), r.violations.to_string()]
        })
        .collect();
    Ok(Outcome {
        json: json(&reports)?,
        header: vec!["statement", "n", "box", "pairs_checked", "violations"],
        rows,
        passed: violations == 0,
        summary: format!("{pairs} pairs checked, {violations} violations"),
    })
}

fn default_grid(lemma: &Lemma) -> Vec<usize> {
    let top = (lemma.limit().max(1) as f64).log2().floor() as u32;
    let top = top.min(14);
    geometric_grid(top.saturating_sub(5).min(4), top)
}

#[derive(Serialize)]
struct SeriesReport {
    fits: Vec<RateFit>,
    integral_bound_ratio: f64,
}

fn series(a: &SeriesArgs) -> Run {
    let lemmas: Vec<Lemma> = if a.lemmas.is_empty() {
        vec![Lemma::AlgebrTv, Lemma::AlgebrTv2(2), Lemma::AlgebrTv2(3), Lemma::Serienew, Lemma::Sersaut]
    } else {
        a.lemmas.iter().map(|s| Lemma::parse(s)).collect::<Result<_, _>>()?
    };
    let mut fits = Vec::new();
    for lemma in &lemmas {
        let grid = if a.n_grid.is_empty() { default_grid(lemma) } else { a.n_grid.clone() };
        fits.push(fit_rate(lemma, &grid)?);
    }
    let ratio = integral_bound_ratio(1 << 10, 2.0);
    let passed = fits.iter().all(|f| f.growth_of_scaled() <= GROWTH_BOUND) && ratio <= 1.0;
    let rows = fits
        .iter()
        .flat_map(|f| {
            f.points.iter().map(move |p| vec![f.lemma.clone(), p.n.to_string(), p.value.to_string(), p.scaled.to_string()])
        })
        .collect();
    let growth: Vec<String> = fits.iter().map(|f| format!("{} {:.2}", f.lemma, f.growth_of_scaled())).collect();
    Ok(Outcome {
        json: json(&SeriesReport { fits, integral_bound_ratio: ratio })?,
        header: vec!["lemma", "N", "value", "scaled"],
        rows,
        passed,
        summary: format!("scaled growth: {}; integral bound ratio {ratio:.3}", growth.join(", ")),
    })
}

fn energies_up_to(k: u32) -> Result<EnergySet, bo_core::Error> {
    EnergySet::calibrate(0..=k, &CalibrationConfig::default())
}

fn decay(a: &DecayArgs) -> Run {
    let top = a.k.iter().copied().max().unwrap_or(0);
    let set = energies_up_to(top)?;
    let mut reports = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for &k in &a.k {
        let cfg = DecayConfig { k, measure_k: a.measure_k, grid: a.n_grid.clone(), samples: a.samples, seed: a.seed };
        let r = run_decay_study(&cfg, &set)?;
        if k == 1 {
            let m = r.max_estimate();
            passed &= m <= a.tol;
            parts.push(format!("k=1 max {m:.1e}"));
        } else {
            let ratio = r.worst_quadrupling_ratio();
            passed &= r.strictly_decreasing() && r.drops_significant(3.0) && ratio.is_none_or(|q| q <= QUADRUPLING_BOUND);
            parts.push(match ratio {
                Some(q) => format!("k={k} worst 4N ratio {q:.3}"),
                None => format!("k={k}"),
            });
        }
        reports.push(r);
    }
    let rows = reports
        .iter()
        .flat_map(|r| {
            r.rows.iter().map(move |x| {
                vec![
                    r.config.k.to_string(),
                    r.config.measure().to_string(),
                    x.n.to_string(),
                    x.estimate.to_string(),
                    x.std_error.to_string(),
                    x.l4_estimate.to_string(),
                    x.samples.to_string(),
                    r.config.seed.to_string(),
                ]
            })
        })
        .collect();
    Ok(Outcome {
        json: json(&reports)?,
        header: vec!["k", "measure_k", "N", "estimate", "std_error", "l4_estimate", "samples", "seed"],
        rows,
        passed,
        summary: parts.join("; "),
    })
}

fn density(a: &DensityArgs) -> Run {
    let set = energies_up_to(a.k)?;
    let cfg = DensityProbeConfig { k: a.k, r: a.r, grid: a.n_grid.clone(), samples: a.samples, seed: a.seed };
    let report = run_density_probe(&cfg, &set)?;
    let rows = report
        .rows
        .iter()
        .map(|x| vec![x.n.to_string(), x.mean_sq_diff.to_string(), x.std_error.to_string(), x.mean_density.to_string()])
        .collect();
    let diffs: Vec<String> = report.rows.iter().map(|x| format!("{:.2e}", x.mean_sq_diff)).collect();
    Ok(Outcome {
        json: json(&report)?,
        header: vec!["N", "mean_sq_diff", "std_error", "mean_density"],
        rows,
        passed: report.decreasing(),
        summary: format!("E|F_N - F_2N|^2: {}", diffs.join(" ")),
    })
}

#[derive(Serialize)]
struct ConvergenceReport {
    k: u32,
    seed: u64,
    t: f64,
    s: f64,
    flow: FlowSpec,
    rows: Vec<bo_core::flow::ConvergenceRow>,
}

fn flow_converge(a: &FlowConvergeArgs) -> Run {
    let n_ref = a.n_grid.iter().copied().max().unwrap_or(0);
    let u0 = sample(&MeasureSpec::new(a.k, n_ref.max(1), a.seed)?).field;
    let flow = FlowSpec::new(a.equation.into(), 1, a.dt, a.tol)?;
    let rows = convergence_probe(&flow, &u0, &a.n_grid, a.t, a.s)?;
    let passed = rows.windows(2).all(|w| w[1].distance < w[0].distance);
    let csv = rows.iter().map(|r| vec![r.n.to_string(), r.distance.to_string()]).collect();
    let txt: Vec<String> = rows.iter().map(|r| format!("N={} {:.3e}", r.n, r.distance)).collect();
    Ok(Outcome {
        json: json(&ConvergenceReport { k: a.k, seed: a.seed, t: a.t, s: a.s, flow, rows })?,
        header: vec!["N", "distance"],
        rows: csv,
        passed,
        summary: txt.join(", "),
    })
}

fn recurrence(a: &RecurrenceArgs) -> Run {
    let cfg = RecurrenceConfig {
        flow: FlowSpec::new(a.equation.into(), a.n, a.dt, a.tol)?,
        initial: InitialData::Draw { k: a.k, n: a.n, seed: a.seed },
        t_final: a.t_final,
        s: a.s,
        stride: a.stride,
        window: a.window,
    };
    let report = run_recurrence(&cfg)?;
    let passed = report.distances.iter().all(|(_, d)| *d >= 0.0)
        && report.running_minimum.windows(2).all(|w| w[1] <= w[0]);
    let rows = report.distances.iter().map(|(t, d)| vec![t.to_string(), d.to_string()]).collect();
    let last = report.running_minimum.last().copied().unwrap_or(0.0);
    Ok(Outcome {
        json: json(&report)?,
        header: vec!["t", "distance"],
        rows,
        passed,
        summary: format!("running minimum {last:.3e} vs initial norm {:.3e}", report.initial_norm),
    })
}

fn calibrate(a: &CalibrateArgs) -> Run {
    let cfg = CalibrationConfig { seed: a.seed, ..Default::default() };
    let set = EnergySet::calibrate(a.k.iter().copied(), &cfg)?;
    let passed = set.calibrations.iter().all(|c| c.validation_residual <= a.tol);
    let mut rows = Vec::new();
    for c in &set.calibrations {
        let e = &c.energy;
        let base = |term: String, coeff: f64| {
            vec![
                e.k.to_string(),
                term,
                coeff.to_string(),
                c.fit_residual.to_string(),
                c.validation_residual.to_string(),
            ]
        };
        rows.push(base("lambda".into(), e.lambda));
        rows.extend(e.terms.terms.iter().map(|(coeff, m)| base(m.to_string(), *coeff)));
    }
    let worst = set.calibrations.iter().map(|c| c.validation_residual).fold(0.0, f64::max);
    Ok(Outcome {
        json: json(&set.calibrations)?,
        header: vec!["k", "term", "coefficient", "fit_residual", "validation_residual"],
        rows,
        passed,
        summary: format!("{} energies, worst validation residual {worst:.1e}", set.calibrations.len()),
    })
}

fn write_outcome(o: &Outcome, output: &Output) -> Result<(), Box<dyn std::error::Error>> {
    let sink: Box<dyn Write> = match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    match output.format {
        Format::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, &o.json)?;
            writeln!(sink)?;
            sink.flush()?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(&o.header)?;
            for r in &o.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result, output) = match &cli.command {
        Command::Identities(a) => ("identities", identities(a), &a.output),
        Command::Orthogonality(a) => ("orthogonality", orthogonality(a), &a.output),
        Command::Series(a) => ("series", series(a), &a.output),
        Command::Decay(a) => ("decay", decay(a), &a.output),
        Command::Density(a) => ("density", density(a), &a.output),
        Command::FlowConverge(a) => ("flow-converge", flow_converge(a), &a.output),
        Command::Recurrence(a) => ("recurrence", recurrence(a), &a.output),
        Command::Calibrate(a) => ("calibrate", calibrate(a), &a.output),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_outcome(&outcome, output) {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(2);
    }
    eprintln!("{} {name}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.summary);
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
