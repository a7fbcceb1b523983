use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ks8_core::analysis::{estimate_probabilities, SimilarityMode};
use ks8_core::bounds::BoundReport;
use ks8_core::ksset::{build_graph, canonical_set, enumerate_octads, octads_json};
use ks8_core::pipeline::{
    analyze_record, parse_state, read_epsilon, reproduce, state_name, to_json, verify, write_file,
    write_manifest, ReproduceOptions, VerifyOptions,
};
use ks8_core::quantum::{profile, s_value, sigma_value};
use ks8_core::simulator::{
    calibrate, convergence_trace, default_checkpoints, run_exclusivity_campaign, run_ks_experiment,
    trace_csv, CalibrationGrid, CalibrationTarget, CountRecord, NoiseConfig, NoiseModel, Pool,
    PulseRun, DEFAULT_INITIAL_RAYS, DEFAULT_MU, DEFAULT_PULSES,
};

const DEFAULT_NOISE: &str = "config/noise.json";

#[derive(Parser)]
#[command(name = "ks8", version, about = "Eight-dimensional Kochen-Specker set: verification, bounds and simulation")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Format of what is printed to stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (defaults to all cores; results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Regenerate the rays from the pentagram and check the graph structure.
    Verify(VerifyArgs),
    /// Enumerate all orthogonal octads; writes ksset.json and octads.json.
    Octads,
    /// Noncontextual bounds, ideal and corrected for false positives.
    Bounds(BoundsArgs),
    /// Exact probability profile of a state.
    Predict(PredictArgs),
    /// Simulate one photon-counting run; writes record.json and trace.csv.
    Simulate(SimulateArgs),
    /// Simulate the exclusivity campaign; writes exclusivity.json and .csv.
    Exclusivity(ExclusivityArgs),
    /// Grid-search the noise model; writes noise.json.
    Calibrate(CalibrateArgs),
    /// Estimates, similarity and verdicts for a record; writes report.json, fig3.csv, fig4.csv.
    Analyze(AnalyzeArgs),
    /// Full simulated reproduction of the experiment.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Ray table to check instead of the built-in one (JSON or `N: (..)` lines).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Fault injection: remove the edge I-J before the graph checks.
    #[arg(long, value_parser = parse_edge)]
    drop_edge: Option<(usize, usize)>,
}

#[derive(Args, Serialize)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.0140)]
    epsilon: f64,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// GHZ, W, beta, eta, prod, or eight comma-separated integers.
    #[arg(long)]
    state: String,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value = "ks40", value_parser = parse_pool)]
    pool: Pool,
    #[arg(long, default_value_t = DEFAULT_PULSES)]
    pulses: u64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    /// Noise config; ideal apparatus when absent.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Comma-separated pulse counts; geometric from 10^4 when absent.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u64>>,
}

#[derive(Args, Serialize)]
struct ExclusivityArgs {
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Initial rays (1-based, comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INITIAL_RAYS)]
    initial: Vec<usize>,
    /// Pulses per initial ray.
    #[arg(long, default_value_t = DEFAULT_PULSES)]
    pulses: u64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    /// Apparatus realizations averaged per grid point.
    #[arg(long, default_value_t = 8)]
    realizations: u64,
    /// Pulses per initial ray for the closed-loop campaign.
    #[arg(long, default_value_t = DEFAULT_PULSES)]
    closed_loop_pulses: u64,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    record: PathBuf,
    /// JSON file with an "epsilon" field, e.g. exclusivity.json; 0 when absent.
    #[arg(long)]
    epsilon_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-basis")]
    similarity: Similarity,
    /// Also report the extrapolated quantum value 5(1-e)+40e.
    #[arg(long)]
    quantum_extrapolation: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Similarity {
    PerBasis,
    Global,
}

#[derive(Args, Serialize)]
struct ReproduceArgs {
    #[arg(long, default_value = DEFAULT_NOISE)]
    noise: PathBuf,
    /// Pulses per run and per initial ray.
    #[arg(long, default_value_t = DEFAULT_PULSES)]
    pulses: u64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
}

fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or("expected I-J")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((n(a)?, n(b)?))
}

fn parse_pool(s: &str) -> Result<Pool, String> {
    s.parse().map_err(|e: ks8_core::Error| e.to_string())
}

#[derive(Serialize)]
struct Inputs<'a, T> {
    seed: u64,
    #[serde(flatten)]
    args: &'a T,
}

fn load_noise(path: Option<&Path>) -> Result<NoiseModel> {
    Ok(match path {
        Some(p) => NoiseConfig::load(p)?.noise,
        None => NoiseModel::IDEAL,
    })
}

fn emit(cli: &Cli, json: impl FnOnce() -> Result<String>, csv: impl FnOnce() -> Result<String>) -> Result<()> {
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => json()?,
        Format::Csv => csv()?,
    };
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let out = &cli.out;
    match &cli.command {
        Command::Verify(args) => {
            let report = verify(&VerifyOptions {
                data: args.data.clone(),
                drop_edge: args.drop_edge,
            })?;
            if cli.format == Some(Format::Json) {
                print!("{}", to_json(&report)?);
            } else {
                print!("{}", report.render());
            }
            return Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Octads => {
            let set = canonical_set()?;
            let octads = enumerate_octads(&build_graph(&set));
            write_file(out, "ksset.json", &(set.to_json()? + "\n"))?;
            write_file(out, "octads.json", &(octads_json(&octads)? + "\n"))?;
            write_manifest(out, "octads", &Inputs { seed: cli.seed, args: &() }, &["ksset.json", "octads.json"])?;
            emit(
                cli,
                || Ok(octads_json(&octads)? + "\n"),
                || {
                    Ok(octads
                        .iter()
                        .map(|o| o.0.map(|i| i.to_string()).join(",") + "\n")
                        .collect())
                },
            )?;
        }
        Command::Bounds(args) => {
            let report = BoundReport::compute(args.epsilon)?;
            write_file(out, "bounds.json", &to_json(&report)?)?;
            write_manifest(out, "bounds", &Inputs { seed: cli.seed, args }, &["bounds.json"])?;
            emit(
                cli,
                || Ok(to_json(&report)?),
                || {
                    Ok(format!(
                        "quantity,value\nsigma_nchv,{}\nS_nchv,{}\nks_colorable,{}\nepsilon,{}\nsigma_corrected,{:.6}\nS_corrected,{:.6}\n",
                        report.sigma_nchv,
                        report.s_nchv,
                        report.ks_colorable,
                        report.epsilon,
                        report.sigma_corrected,
                        report.s_corrected
                    ))
                },
            )?;
        }
        Command::Predict(args) => {
            let set = canonical_set()?;
            let state = parse_state(&args.state)?;
            let p = profile(&set, &state);
            let json = to_json(&serde_json::json!({
                "state": state,
                "state_name": state_name(&state),
                "sigma": sigma_value(&set, &state),
                "S": s_value(&set, &state),
                "profile": p,
            }))?;
            write_file(out, "profile.csv", &p.to_csv())?;
            write_file(out, "profile.json", &json)?;
            write_manifest(out, "predict", &Inputs { seed: cli.seed, args }, &["profile.csv", "profile.json"])?;
            emit(cli, || Ok(json.clone()), || Ok(p.to_csv()))?;
        }
        Command::Simulate(args) => {
            let set = canonical_set()?;
            let state = parse_state(&args.state)?;
            let noise = load_noise(args.noise.as_deref())?;
            let run = PulseRun {
                seed: cli.seed,
                n_pulses: args.pulses,
                mu: args.mu,
                projector_pool: args.pool.indices(),
            };
            let record = run_ks_experiment(&set, &state, &noise, &run)?;
            let checkpoints = args.checkpoints.clone().unwrap_or_else(|| default_checkpoints(args.pulses));
            if checkpoints.last() != Some(&args.pulses) {
                bail!("the last checkpoint must equal --pulses ({})", args.pulses);
            }
            let trace = trace_csv(&convergence_trace(&set, &state, &noise, &run, &checkpoints)?);
            write_file(out, "record.json", &to_json(&record)?)?;
            write_file(out, "trace.csv", &trace)?;
            write_manifest(out, "simulate", &Inputs { seed: cli.seed, args }, &["record.json", "trace.csv"])?;
            let est = estimate_probabilities(&set, &record)?;
            emit(cli, || Ok(to_json(&est)?), || Ok(trace.clone()))?;
        }
        Command::Exclusivity(args) => {
            let set = canonical_set()?;
            let noise = load_noise(args.noise.as_deref())?;
            let run = PulseRun {
                seed: cli.seed,
                n_pulses: args.pulses,
                mu: args.mu,
                projector_pool: vec![],
            };
            let report = run_exclusivity_campaign(&set, &noise, &args.initial, &run)?;
            write_file(out, "exclusivity.json", &to_json(&report)?)?;
            write_file(out, "exclusivity.csv", &report.to_csv())?;
            write_manifest(
                out,
                "exclusivity",
                &Inputs { seed: cli.seed, args },
                &["exclusivity.json", "exclusivity.csv"],
            )?;
            emit(
                cli,
                || {
                    Ok(to_json(&serde_json::json!({
                        "epsilon": report.epsilon,
                        "epsilon_error": report.epsilon_error,
                        "n_tests": report.n_tests,
                        "per_initial": report.per_initial,
                    }))?)
                },
                || Ok(report.to_csv()),
            )?;
        }
        Command::Calibrate(args) => {
            let set = canonical_set()?;
            let config = calibrate(
                &set,
                &CalibrationGrid::default(),
                &CalibrationTarget::default(),
                cli.seed,
                args.realizations,
                args.closed_loop_pulses,
            )?;
            write_file(out, "noise.json", &config.to_json())?;
            write_manifest(out, "calibrate", &Inputs { seed: cli.seed, args }, &["noise.json"])?;
            let rec = config.calibration.as_ref().expect("calibrator records its search");
            emit(
                cli,
                || {
                    Ok(to_json(&serde_json::json!({
                        "noise": config.noise,
                        "chosen": rec.chosen,
                        "closed_loop": rec.closed_loop,
                    }))?)
                },
                || {
                    let mut s = String::from("amplitude_jitter,phase_jitter,background,efficiency,epsilon,F_GHZ,feasible\n");
                    for p in &rec.trace {
                        s.push_str(&format!(
                            "{},{},{},{},{:.6},{:.6},{}\n",
                            p.noise.amplitude_jitter,
                            p.noise.phase_jitter,
                            p.noise.background,
                            p.noise.efficiency,
                            p.epsilon,
                            p.fidelity_ghz(),
                            p.feasible
                        ));
                    }
                    Ok(s)
                },
            )?;
        }
        Command::Analyze(args) => {
            let set = canonical_set()?;
            let text = std::fs::read_to_string(&args.record)
                .with_context(|| format!("reading {}", args.record.display()))?;
            let record: CountRecord = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", args.record.display()))?;
            let epsilon = match &args.epsilon_file {
                Some(p) => read_epsilon(p)?,
                None => 0.0,
            };
            let mode = match args.similarity {
                Similarity::PerBasis => SimilarityMode::PerBasis,
                Similarity::Global => SimilarityMode::Global,
            };
            let a = analyze_record(&set, &record, epsilon, mode, args.quantum_extrapolation)?;
            write_file(out, "report.json", &to_json(&a.report)?)?;
            write_file(out, "fig3.csv", &a.fig3_csv)?;
            write_file(out, "fig4.csv", &a.fig4_csv)?;
            write_manifest(
                out,
                "analyze",
                &Inputs { seed: cli.seed, args },
                &["report.json", "fig3.csv", "fig4.csv"],
            )?;
            emit(cli, || Ok(to_json(&a.report.verdict)?), || Ok(a.fig4_csv.clone()))?;
        }
        Command::Reproduce(args) => {
            let opts = ReproduceOptions {
                seed: cli.seed,
                n_pulses: args.pulses,
                mu: args.mu,
            };
            let summary = reproduce(&args.noise, &opts, out)?;
            emit(cli, || Ok(to_json(&summary)?), || Ok(summary.to_csv()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
