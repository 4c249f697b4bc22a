//! Command-line frontend: fitting, bounds, rank selection, DOA simulation,
//! backtesting, and synthetic-data generation. All randomized commands take
//! an explicit seed and are bit-reproducible.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Deserialize;

use faan::bounds;
use faan::covmodel::{sample_covariance, Method, SampleCov, SigmaInit, SolverConfig};
use faan::doa::{self, ArrayScenario};
use faan::error::Error;
use faan::io::{self, FitReport};
use faan::portfolio::{self, BacktestSpec, Estimator};
use faan::ranksel;
use faan::solvers::FitRequest;

const EXIT_OK: u8 = 0;
const EXIT_RUNTIME: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "faan", version, about = "Low-rank-plus-diagonal covariance estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a factor model to a sample covariance matrix
    Fit(FitArgs),
    /// Print rank bounds and identifiability information
    Bounds(BoundsArgs),
    /// BIC scan over candidate ranks
    Rank(RankArgs),
    /// Monte-Carlo DOA estimation sweep
    DoaSim(DoaSimArgs),
    /// Rolling minimum-variance portfolio backtest
    Backtest(BacktestArgs),
    /// Generate synthetic datasets
    Synth(SynthArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Headerless CSV holding the square sample covariance
    matrix_file: PathBuf,
    #[arg(long, default_value = "faan")]
    method: String,
    #[arg(long)]
    rank: usize,
    /// identity | diag | random
    #[arg(long, default_value = "diag")]
    sigma_init: String,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Required when --sigma-init random
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Headerless CSV holding a square sample covariance (optional)
    matrix_file: Option<PathBuf>,
    /// Dimension, when no matrix is given
    #[arg(long)]
    n: Option<usize>,
    /// Rank to classify (defaults to a full table)
    #[arg(long)]
    rank: Option<usize>,
}

#[derive(Args)]
struct RankArgs {
    matrix_file: PathBuf,
    /// Number of samples behind the covariance
    #[arg(long = "N", visible_alias = "n-samples")]
    n_samples: usize,
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DoaSimArgs {
    /// Sweep variable: n (snapshot count) or snr
    #[arg(long)]
    sweep: String,
    /// Comma-separated sweep values (defaults: 40,100,200,300,400,500
    /// snapshots or -10,-5,0,5,10,15,20 dB)
    #[arg(long)]
    values: Option<String>,
    /// Snapshot count for an SNR sweep
    #[arg(long, default_value_t = 100)]
    snapshots: usize,
    /// SNR in dB for a snapshot sweep
    #[arg(long, default_value_t = 0.0)]
    snr: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Optional scenario JSON: {"n": 15, "freqs": [0.2, 0.25]}
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// Returns CSV: header row of asset names, one row per trading day
    returns_file: PathBuf,
    #[arg(long)]
    lookback: usize,
    /// faan_bic | scm | equal_weight
    #[arg(long)]
    estimator: String,
    #[arg(long, default_value_t = 20)]
    rebalance: usize,
    #[arg(long, default_value_t = 84)]
    horizon: usize,
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    /// JSON report destination
    #[arg(long)]
    out: PathBuf,
    /// Optional one-row CSV of (lookback, estimator, median_std)
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// doa | returns | frisch
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0.0)]
    snr: f64,
    /// Rows (returns) or snapshots (doa)
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Rank(args) => cmd_rank(args),
        Command::DoaSim(args) => cmd_doa_sim(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn load_scm(path: &PathBuf) -> Result<SampleCov, Error> {
    let m = io::read_matrix_csv(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "matrix file must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    SampleCov::from_matrix(m)
}

fn parse_sigma_init(s: &str, seed: Option<u64>) -> Result<(SigmaInit, u64), Error> {
    match s {
        "identity" => Ok((SigmaInit::Identity, seed.unwrap_or(0))),
        "diag" => Ok((SigmaInit::DiagOfScm, seed.unwrap_or(0))),
        "random" => match seed {
            Some(seed) => Ok((SigmaInit::SeededRandom, seed)),
            None => Err(Error::InvalidInput("--sigma-init random requires --seed".into())),
        },
        other => Err(Error::InvalidInput(format!("unknown sigma init '{other}'"))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<u8, Error> {
    let scm = load_scm(&args.matrix_file)?;
    let method: Method = args.method.parse()?;
    let (sigma_init, seed) = parse_sigma_init(&args.sigma_init, args.seed)?;
    let config = SolverConfig {
        epsilon: args.epsilon,
        max_iter: args.max_iter,
        sigma_init,
        seed,
        ..SolverConfig::default()
    };
    let fit = FitRequest { scm, rank: args.rank, config, method }.fit()?;
    FitReport::from_fit(&fit).write(&args.out)?;
    println!(
        "method={} rank={} iterations={} converged={} feasible={} loss={}",
        fit.method.as_str(),
        fit.rank,
        fit.iterations,
        fit.converged,
        fit.feasible,
        io::format_f64(fit.final_loss())
    );
    if !fit.converged {
        Ok(EXIT_NO_CONVERGENCE)
    } else if !fit.feasible {
        Ok(EXIT_INFEASIBLE)
    } else {
        Ok(EXIT_OK)
    }
}

fn class_str(c: bounds::IdentifiabilityClass) -> &'static str {
    match c {
        bounds::IdentifiabilityClass::GloballyIdentifiable => "globally identifiable",
        bounds::IdentifiabilityClass::LocallyIdentifiable => "locally identifiable",
        bounds::IdentifiabilityClass::Unidentifiable => "unidentifiable",
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<u8, Error> {
    let scm = match &args.matrix_file {
        Some(path) => Some(load_scm(path)?),
        None => None,
    };
    let n = match (&scm, args.n) {
        (Some(s), None) => s.n(),
        (None, Some(n)) => n,
        (Some(s), Some(n)) if s.n() == n => n,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput("--n conflicts with the matrix dimension".into()))
        }
        (None, None) => {
            return Err(Error::InvalidInput("provide a matrix file or --n".into()))
        }
    };
    println!("n = {n}");
    println!("r_L = {}", io::format_f64(bounds::ledermann_bound(n)?));
    let ranks: Vec<usize> = match args.rank {
        Some(r) => vec![r],
        None => (1..n).collect(),
    };
    for r in ranks {
        let v = bounds::identifiability_class(n, r)?;
        println!(
            "r = {r}: n_m = {}, n_c = {}, class = {}",
            v.n_m,
            v.n_c,
            class_str(v.class)
        );
    }
    if let Some(scm) = &scm {
        match bounds::guttman_bound(scm) {
            Ok(rg) => println!("r_G = {rg}"),
            Err(Error::SingularMatrix) => println!("r_G = unavailable (singular matrix)"),
            Err(e) => return Err(e),
        }
    }
    println!(
        "resolvable sources: isotropic {}, anisotropic {}",
        bounds::resolvable_sources(n, false),
        bounds::resolvable_sources(n, true)
    );
    Ok(EXIT_OK)
}

fn cmd_rank(args: RankArgs) -> Result<u8, Error> {
    let scm = load_scm(&args.matrix_file)?;
    let scan = ranksel::select_rank(&scm, args.n_samples, args.rmax, &SolverConfig::default())?;
    let report = serde_json::json!({
        "candidates": scan.candidates,
        "scores": scan.scores,
        "chosen": scan.chosen,
        "chosen_fit": FitReport::from_fit(scan.chosen_fit()),
    });
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("chosen rank = {}", scan.chosen);
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct DoaConfig {
    n: usize,
    freqs: Vec<f64>,
}

fn cmd_doa_sim(args: DoaSimArgs) -> Result<u8, Error> {
    let config: Option<DoaConfig> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    let sweep_n = match args.sweep.as_str() {
        "n" | "N" => true,
        "snr" => false,
        other => return Err(Error::InvalidInput(format!("unknown sweep variable '{other}'"))),
    };
    let values: Vec<f64> = match &args.values {
        Some(list) => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad sweep value '{v}'")))
            })
            .collect::<Result<_, _>>()?,
        None if sweep_n => vec![40.0, 100.0, 200.0, 300.0, 400.0, 500.0],
        None => vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
    };
    let mut out = String::new();
    out.push_str(if sweep_n { "N,method,rmse,trials\n" } else { "snr_db,method,rmse,trials\n" });
    for &value in &values {
        let (snapshots, snr_db) = if sweep_n {
            (value as usize, args.snr)
        } else {
            (args.snapshots, value)
        };
        let mut est_faan: Vec<Vec<f64>> = Vec::new();
        let mut est_music: Vec<Vec<f64>> = Vec::new();
        let mut truth = Vec::new();
        for trial in 0..args.trials {
            let trial_seed = args
                .seed
                .wrapping_mul(0x100000001b3)
                .wrapping_add(trial as u64);
            let scn = match &config {
                Some(c) => {
                    use rand::{Rng, SeedableRng};
                    let mut rng =
                        rand_chacha::ChaCha12Rng::seed_from_u64(trial_seed ^ 0x9e3779b97f4a7c15);
                    let noise_var: Vec<f64> =
                        (0..c.n).map(|_| rng.random_range(1e-6..1.0)).collect();
                    ArrayScenario::new(c.n, c.freqs.clone(), snapshots, noise_var, snr_db, trial_seed)?
                }
                None => ArrayScenario::standard_two_source(snapshots, snr_db, trial_seed),
            };
            truth = scn.freqs.clone();
            let m = scn.freqs.len();
            let data = doa::simulate_array(&scn)?;
            let scm = sample_covariance(&data, false)?;
            let fit = FitRequest {
                scm: scm.clone(),
                rank: scn.rank(),
                config: SolverConfig::default(),
                method: Method::Faan,
            }
            .fit();
            if let Ok(fit) = fit {
                if let Ok(res) = doa::music_faan(&fit, doa::DEFAULT_GRID_STEP, m) {
                    est_faan.push(res.peaks);
                }
            }
            let ones = DVector::from_element(scn.n, 1.0);
            if let Ok(res) = doa::music_whitened(&scm, &ones, m, doa::DEFAULT_GRID_STEP) {
                est_music.push(res.peaks);
            }
        }
        for (name, est) in [("faan", &est_faan), ("music", &est_music)] {
            if est.is_empty() {
                continue;
            }
            let rmse = doa::rmse(est, &truth)?;
            out.push_str(&format!(
                "{},{name},{},{}\n",
                io::format_f64(value),
                io::format_f64(rmse),
                est.len()
            ));
        }
    }
    std::fs::write(&args.out, &out)?;
    print!("{out}");
    Ok(EXIT_OK)
}

fn cmd_backtest(args: BacktestArgs) -> Result<u8, Error> {
    let (_, returns) = io::read_returns_csv(&args.returns_file)?;
    let estimator: Estimator = args.estimator.parse()?;
    let spec = BacktestSpec {
        lookback_n: args.lookback,
        rebalance_days: args.rebalance,
        horizon_days: args.horizon,
        estimator,
        r_max: args.rmax,
        sample_std: false,
        solver: SolverConfig::default(),
    };
    let result = portfolio::run_backtest(&returns, &spec)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&result)? + "\n")?;
    if let Some(csv_path) = &args.csv_out {
        let line = format!(
            "lookback_N,estimator,median_std\n{},{},{}\n",
            spec.lookback_n,
            estimator.as_str(),
            io::format_f64(result.median_std)
        );
        std::fs::write(csv_path, line)?;
    }
    println!(
        "dates = {}, median_std = {}",
        result.dates.len(),
        io::format_f64(result.median_std)
    );
    Ok(EXIT_OK)
}

fn cmd_synth(args: SynthArgs) -> Result<u8, Error> {
    match args.kind.as_str() {
        "doa" => {
            let scn = ArrayScenario::standard_two_source(args.rows, args.snr, args.seed);
            let data = doa::simulate_array(&scn)?;
            io::write_matrix_csv(&args.out, &data)?;
        }
        "returns" => {
            let data = portfolio::synth_factor_returns(args.n, args.rank, args.snr, args.rows, args.seed)?;
            let names: Vec<String> = (1..=args.n).map(|k| format!("a{k}")).collect();
            io::write_returns_csv(&args.out, &names, &data)?;
        }
        "frisch" => {
            let scm = bounds::frisch_test_matrix(args.n, args.seed)?;
            io::write_matrix_csv(&args.out, scm.entries())?;
        }
        other => return Err(Error::InvalidInput(format!("unknown synth kind '{other}'"))),
    }
    Ok(EXIT_OK)
}
