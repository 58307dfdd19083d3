//! `invclt`: analyze score arrays, run the verification suite, and run
//! Monte Carlo experiments for random fixed-point-free involutions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use involution_clt::array::{moments, random_symmetric, standardize, validate_and_symmetrize, DEFAULT_SYMMETRY_TOL};
use involution_clt::bounds::{lower_bound_experiment, rate_bounds, write_lower_bound_csv, LowerBoundReport};
use involution_clt::coupling::{estimate_gap, zero_bias_draws, QuadSampler, TABLE_CAP};
use involution_clt::distances::{distance_report, parse_p_list, StepCdf};
use involution_clt::involution::{exact_w_distribution, ENUMERATION_CAP};
use involution_clt::io::{fmt_f64, read_matrix, write_cdf_csv};
use involution_clt::montecarlo::{sample_statistic, simulate, SimulationRow, GAP_STREAM_TAG, W_STREAM_TAG};
use involution_clt::stream::{derive_seed, StreamRng, DEFAULT_SEED};
use involution_clt::verify::{run_suite, SuiteConfig};
use involution_clt::{CenteredArray, Error, ScoreArray};
use rand::SeedableRng;

use serde::Serialize;
use serde_json::json;

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "invclt", version, about = "Normal approximation for statistics of random fixed-point-free involutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed for every random stream.
    #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    seed: u64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Moments, distances to the normal and bounds for one array.
    Analyze {
        /// Array file: CSV matrix or JSON {"n", "entries"}.
        #[arg(long)]
        input: PathBuf,
        /// Average (e_ij + e_ji)/2 instead of rejecting asymmetric input.
        #[arg(long)]
        symmetrize: bool,
        /// Relative tolerance for the symmetry and zero-diagonal checks.
        #[arg(long, default_value_t = DEFAULT_SYMMETRY_TOL)]
        tol: f64,
        /// Exponents for the L^p bounds, e.g. `1,2,inf`.
        #[arg(long, default_value = "1,2,inf")]
        p: String,
        /// Monte Carlo draws (sampling mode and coupling gap).
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Largest n handled by exact enumeration.
        #[arg(long, default_value_t = 12)]
        cap: usize,
        /// Write (t, F(t), Phi(t)) rows at the jump points.
        #[arg(long)]
        emit_cdf: Option<PathBuf>,
        /// Include the first K coupled zero-bias draws in the report.
        #[arg(long, default_value_t = 0)]
        dump_draws: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exact and Monte Carlo identity checks on generated arrays.
    Verify {
        /// Run only this check family.
        #[arg(long)]
        only: Option<String>,
        /// Draws for the sampler uniformity test.
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo distances and coupling gap against the bounds, as CSV.
    Simulate {
        /// Comma-separated even dimensions for random arrays.
        #[arg(long, default_value = "10,20,50")]
        n: String,
        /// Use this array instead of random ones.
        #[arg(long, conflicts_with = "n")]
        input: Option<PathBuf>,
        /// Average (e_ij + e_ji)/2 instead of rejecting asymmetric input.
        #[arg(long)]
        symmetrize: bool,
        /// Monte Carlo draws per array.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Largest n for the materialized quadruple table.
        #[arg(long, default_value_t = TABLE_CAP)]
        cap: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Lattice lower-bound experiment on the alternating-sign array.
    Lowerbound {
        /// Comma-separated even dimensions.
        #[arg(long, default_value = "64,100,196")]
        n: String,
        /// Draws of W per dimension.
        #[arg(long, default_value_t = 200_000)]
        draws: usize,
        /// Also write (n, sigma, ks, floor, beta_over_n) rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::DegenerateArray) { 3 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // a reader that hung up early is not an error
        let code = if e.kind() == io::ErrorKind::BrokenPipe { 0 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(path: &Option<PathBuf>, value: &impl Serialize) -> Result<(), Failure> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| match e.io_error_kind() {
        Some(kind) => Failure::from(io::Error::from(kind)),
        None => input_error(e.to_string()),
    })?;
    writeln!(out)?;
    Ok(())
}

fn parse_dims(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| input_error(format!("bad dimension {x:?}"))))
        .collect()
}

fn load(path: &PathBuf, symmetrize: bool, tol: f64) -> Result<involution_clt::SymmetricArray, Failure> {
    let raw = read_matrix(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(validate_and_symmetrize(&raw, symmetrize, tol)?)
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    input: &PathBuf,
    symmetrize: bool,
    tol: f64,
    p: &str,
    draws: usize,
    cap: usize,
    emit_cdf: &Option<PathBuf>,
    dump_draws: usize,
    common: &Common,
) -> Result<(), Failure> {
    let ps = parse_p_list(p)?;
    if draws == 0 {
        return Err(input_error("--draws must be at least 1"));
    }
    let e = load(input, symmetrize, tol)?;
    let m = moments(&e)?;
    let d = standardize(&e)?;
    let n = d.n();
    let exact = n <= cap.min(ENUMERATION_CAP);
    let cdf = if exact {
        StepCdf::from_exact(&exact_w_distribution(&d, ENUMERATION_CAP)?)
    } else {
        let w = sample_statistic(&d, draws, derive_seed(common.seed, W_STREAM_TAG), common.threads)?;
        StepCdf::ecdf(&w)?
    };
    let distances = distance_report(&cdf, &ps, exact, (!exact).then_some(draws));
    let bounds = rate_bounds(n, d.beta(), &ps);
    let coupling = if n >= 6 {
        let sampler = QuadSampler::new(&d, TABLE_CAP)?;
        let gap = estimate_gap(&d, &sampler, draws, derive_seed(common.seed, GAP_STREAM_TAG), common.threads)?;
        let dumped = if dump_draws > 0 {
            Some(zero_bias_draws(&d, &sampler, dump_draws, derive_seed(common.seed, GAP_STREAM_TAG), common.threads)?)
        } else {
            None
        };
        Some(json!({ "gap": gap, "draws": dumped }))
    } else {
        None
    };
    if let Some(path) = emit_cdf {
        write_cdf_csv(&cdf, sink(&Some(path.clone()))?)?;
    }
    let report = json!({
        "schema": SCHEMA,
        "n": n,
        "mu": m.mu,
        "sigma2": m.sigma2,
        "beta": d.beta(),
        "mode": if exact { "exact" } else { "mc" },
        "seed": common.seed,
        "bounds": bounds,
        "distances": distances,
        "coupling": coupling,
    });
    emit_json(&common.output, &report)
}

fn verify(only: Option<&str>, draws: usize, common: &Common) -> Result<bool, Failure> {
    let cfg = SuiteConfig { seed: common.seed, threads: common.threads, sampler_draws: draws, ..SuiteConfig::default() };
    let checks = run_suite(&cfg, only)?;
    let pass = checks.iter().all(|c| c.pass);
    emit_json(&common.output, &json!({ "schema": SCHEMA, "seed": common.seed, "pass": pass, "checks": checks }))?;
    Ok(pass)
}

fn simulation_arrays(n: &str, input: &Option<PathBuf>, symmetrize: bool, seed: u64) -> Result<Vec<CenteredArray>, Failure> {
    if let Some(path) = input {
        return Ok(vec![standardize(&load(path, symmetrize, DEFAULT_SYMMETRY_TOL)?)?]);
    }
    parse_dims(n)?
        .into_iter()
        .map(|n| {
            let mut rng = StreamRng::seed_from_u64(derive_seed(seed, n as u64));
            Ok(standardize(&random_symmetric(n, &mut rng)?)?)
        })
        .collect()
}

fn write_simulation_csv(rows: &[SimulationRow], out: impl Write) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| input_error(e.to_string());
    w.write_record(["n", "beta", "ks_mc", "l1_mc", "gap_mc", "gap_stderr", "bound_linf", "bound_l1", "gap_bound"])
        .map_err(csv_err)?;
    for r in rows {
        let mut record = vec![r.n.to_string()];
        record.extend(
            [r.beta, r.ks_mc, r.l1_mc, r.gap_mc, r.gap_stderr, r.bound_linf, r.bound_l1, r.gap_bound]
                .into_iter()
                .map(fmt_f64),
        );
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Analyze { input, symmetrize, tol, p, draws, cap, emit_cdf, dump_draws, common } => {
            analyze(&input, symmetrize, tol, &p, draws, cap, &emit_cdf, dump_draws, &common)?;
            Ok(true)
        }
        Command::Verify { only, draws, common } => verify(only.as_deref(), draws, &common),
        Command::Simulate { n, input, symmetrize, draws, cap, common } => {
            if draws == 0 {
                return Err(input_error("--draws must be at least 1"));
            }
            let rows = simulation_arrays(&n, &input, symmetrize, common.seed)?
                .iter()
                .map(|d| simulate(d, draws, common.seed, common.threads, cap))
                .collect::<Result<Vec<_>, _>>()?;
            write_simulation_csv(&rows, sink(&common.output)?)?;
            Ok(true)
        }
        Command::Lowerbound { n, draws, csv, common } => {
            let reports = parse_dims(&n)?
                .into_iter()
                .map(|n| lower_bound_experiment(n, draws, derive_seed(common.seed, n as u64), common.threads))
                .collect::<Result<Vec<LowerBoundReport>, _>>()?;
            if let Some(path) = &csv {
                write_lower_bound_csv(&reports, sink(&Some(path.clone()))?)?;
            }
            let pass = reports.iter().all(|r| r.pass && r.lattice);
            let by_n: BTreeMap<usize, &LowerBoundReport> = reports.iter().map(|r| (r.n, r)).collect();
            emit_json(&common.output, &json!({ "schema": SCHEMA, "seed": common.seed, "pass": pass, "reports": by_n }))?;
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("invclt: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
