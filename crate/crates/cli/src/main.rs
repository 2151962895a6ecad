//! `procrec`: returns, block census and prediction experiments on hourly
//! price CSVs.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 usage or ingest error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use procrec_core::coder::{encode_series, write_symbols_csv, SymbolSidecar};
use procrec_core::ingest::{
    compute_log_returns, compute_stats, load_price_csv, phase_space_pairs, split_index, write_phase_space_csv,
    write_returns_csv, CsvSchema, LoadOptions, ReturnSeries, SeriesStats,
};
use procrec_core::markov::{census_blocks, write_census_csv, BlockCensus, MAX_ORDER};
use procrec_core::predictor::{
    prepare_experiment, write_plot_csv, BaselineKind, ExperimentConfig, ExperimentReport, MetricKind, PredictMode,
    StatsScope, DEFAULT_SEED,
};
use procrec_core::{Error, SchemeKind};

#[derive(Parser)]
#[command(name = "procrec", version, about = "Markov-chain reconstruction of return processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log returns, summary statistics and phase-space pairs.
    Returns(ReturnsArgs),
    /// Distinct k-block counts of the coded series.
    Census(CensusArgs),
    /// Split-halves prediction experiment against a random baseline.
    Predict(PredictArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Price CSV, optionally labelled as LABEL=PATH. Repeatable.
    #[arg(long = "input", required = true, value_name = "[LABEL=]PATH")]
    inputs: Vec<String>,
    /// Skip rows with unparseable timestamp or price.
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value = "timestamp")]
    ts_col: String,
    #[arg(long, default_value = "price")]
    price_col: String,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReturnsArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Five,
    Three,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Five => SchemeKind::Five,
            SchemeArg::Three => SchemeKind::Three,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Abs,
    Signed,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Uniform,
    Marginal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sample,
    Argmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsArg {
    Full,
    Train,
}

impl From<StatsArg> for StatsScope {
    fn from(s: StatsArg) -> Self {
        match s {
            StatsArg::Full => StatsScope::Full,
            StatsArg::Train => StatsScope::Train,
        }
    }
}

#[derive(Args)]
struct CensusArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "five")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=MAX_ORDER as i64))]
    kmax: u32,
    /// Which returns define the coding thresholds.
    #[arg(long = "stats-on", value_enum, default_value = "full")]
    stats_on: StatsArg,
    /// Also write the symbol sequence and its coding sidecar.
    #[arg(long)]
    dump_symbols: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "five")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=MAX_ORDER as i64))]
    kmin: u32,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=MAX_ORDER as i64))]
    kmax: u32,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    #[arg(long, env = "PROCREC_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "abs")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "uniform")]
    baseline: BaselineArg,
    #[arg(long, value_enum, default_value = "sample")]
    mode: ModeArg,
    #[arg(long = "stats-on", value_enum, default_value = "full")]
    stats_on: StatsArg,
    /// Also write the training tables and the symbol sequence.
    #[arg(long)]
    dump_tables: bool,
}

impl PredictArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            scheme: self.scheme.into(),
            k_min: self.kmin as usize,
            k_max: self.kmax as usize,
            runs: self.runs as usize,
            seed: self.seed,
            metric: match self.metric {
                MetricArg::Abs => MetricKind::Absolute,
                MetricArg::Signed => MetricKind::Signed,
            },
            baseline: match self.baseline {
                BaselineArg::Uniform => BaselineKind::Uniform,
                BaselineArg::Marginal => BaselineKind::Marginal,
            },
            mode: match self.mode {
                ModeArg::Sample => PredictMode::Sample,
                ModeArg::Argmax => PredictMode::Argmax,
            },
            stats_scope: self.stats_on.into(),
        }
    }
}

/// Failure of one instrument, carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_ingest() || matches!(e, Error::InvalidConfig(_)) { 2 } else { 1 };
        Failure { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

struct Input {
    label: String,
    path: PathBuf,
}

fn parse_input(raw: &str) -> Input {
    if let Some((label, path)) = raw.split_once('=') {
        if !label.is_empty() && !label.contains(['/', '\\']) {
            return Input { label: label.to_string(), path: PathBuf::from(path) };
        }
    }
    let path = PathBuf::from(raw);
    let label = path.file_stem().map_or_else(|| raw.to_string(), |s| s.to_string_lossy().into_owned());
    Input { label, path }
}

impl InputArgs {
    fn parsed(&self) -> Vec<Input> {
        self.inputs.iter().map(|s| parse_input(s)).collect()
    }

    fn load(&self, input: &Input) -> Result<ReturnSeries, Failure> {
        let (_, returns) = self.load_prices(input)?;
        Ok(returns)
    }

    fn load_prices(&self, input: &Input) -> Result<(procrec_core::PriceSeries, ReturnSeries), Failure> {
        let opts = LoadOptions {
            schema: CsvSchema { timestamp_column: self.ts_col.clone(), price_column: self.price_col.clone() },
            lenient: self.lenient,
        };
        let loaded = load_price_csv(&input.path, &input.label, &opts)?;
        for skip in &loaded.skipped {
            eprintln!("warning: {}: skipped line {}: {}", input.label, skip.line, skip.reason);
        }
        let returns = compute_log_returns(&loaded.series)?;
        Ok((loaded.series, returns))
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn coding_stats(returns: &ReturnSeries, scope: StatsScope) -> Result<SeriesStats, Error> {
    match scope {
        StatsScope::Full => compute_stats(returns),
        StatsScope::Train => SeriesStats::of_values(&returns.values()[..split_index(returns.len())]),
    }
}

/// Runs `job` for every input concurrently and returns results in input order.
fn for_each_input<T: Send>(
    inputs: &[Input],
    job: impl Fn(&Input) -> Result<T, Failure> + Sync,
) -> Vec<Result<T, Failure>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = inputs.iter().map(|input| scope.spawn(|| job(input))).collect();
        handles.into_iter().map(|h| h.join().expect("instrument worker panicked")).collect()
    })
}

fn report_failures<T>(inputs: &[Input], results: &[Result<T, Failure>]) -> u8 {
    let mut code = 0;
    for (input, result) in inputs.iter().zip(results) {
        if let Err(f) = result {
            eprintln!("error: {}: {:#}", input.label, f.error);
            code = code.max(f.code);
        }
    }
    code
}

fn cmd_returns(args: &ReturnsArgs) -> u8 {
    let inputs = args.input.parsed();
    let out = &args.input.out;
    let results = for_each_input(&inputs, |input| {
        let (prices, returns) = args.input.load_prices(input)?;
        let stats = compute_stats(&returns)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_returns_csv(create(out, &format!("{}_returns.csv", input.label))?, &prices, &returns)?;
        let pairs = phase_space_pairs(&returns)?;
        write_phase_space_csv(create(out, &format!("{}_phase_space.csv", input.label))?, &pairs)?;
        let summary = serde_json::json!({
            "instrument": input.label,
            "mean": stats.mean,
            "std": stats.std,
            "count": stats.count,
            "span": returns.span,
        });
        write_json(out, &format!("{}_stats.json", input.label), &summary)?;
        Ok(stats)
    });
    for (input, r) in inputs.iter().zip(&results) {
        if let Ok(stats) = r {
            println!("{}: {} returns, mean {:.6e}, std {:.6e}", input.label, stats.count, stats.mean, stats.std);
        }
    }
    report_failures(&inputs, &results)
}

fn cmd_census(args: &CensusArgs) -> u8 {
    let inputs = args.input.parsed();
    let out = &args.input.out;
    let scheme_kind: SchemeKind = args.scheme.into();
    let results = for_each_input(&inputs, |input| -> Result<Vec<BlockCensus>, Failure> {
        let returns = args.input.load(input)?;
        let stats = coding_stats(&returns, args.stats_on.into())?;
        let scheme = scheme_kind.build(&stats)?;
        let seq = encode_series(&returns, &stats, &scheme)?;
        let census = census_blocks(&seq.symbols, scheme.alphabet_size(), args.kmax as usize)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_census_csv(create(out, &format!("{}_census.csv", input.label))?, &census)?;
        if args.dump_symbols {
            write_symbols_csv(create(out, &format!("{}_symbols.csv", input.label))?, &seq)?;
            write_json(out, &format!("{}_symbols.json", input.label), &SymbolSidecar::new(&seq, &stats, &scheme))?;
        }
        Ok(census)
    });
    for (input, r) in inputs.iter().zip(&results) {
        if let Ok(census) = r {
            println!("{}", input.label);
            println!("{:>3} {:>10} {:>14} {:>10}", "k", "distinct", "max_possible", "windows");
            for c in census {
                println!("{:>3} {:>10} {:>14} {:>10}", c.k, c.distinct, c.max_possible, c.total_windows);
            }
        }
    }
    report_failures(&inputs, &results)
}

fn cmd_predict(args: &PredictArgs) -> u8 {
    let config = args.config();
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return 2;
    }
    let inputs = args.input.parsed();
    let out = &args.input.out;
    let results = for_each_input(&inputs, |input| -> Result<ExperimentReport, Failure> {
        let returns = args.input.load(input)?;
        let prepared = prepare_experiment(&config, &returns)?;
        let report = prepared.run(&config)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(out, &format!("{}_report.json", input.label), &report)?;
        write_plot_csv(create(out, &format!("{}_plot.csv", input.label))?, &report)?;
        if args.dump_tables {
            write_json(out, &format!("{}_tables.json", input.label), &prepared.tables.to_dump())?;
            write_symbols_csv(create(out, &format!("{}_symbols.csv", input.label))?, &prepared.sequence)?;
            let sidecar = SymbolSidecar::new(&prepared.sequence, &prepared.stats, &prepared.scheme);
            write_json(out, &format!("{}_symbols.json", input.label), &sidecar)?;
        }
        Ok(report)
    });
    for (input, r) in inputs.iter().zip(&results) {
        if let Ok(report) = r {
            println!("{} ({} scheme, {} runs, seed {})", input.label, report.scheme, report.runs, report.master_seed);
            println!("{:>3} {:>10} {:>10} {:>10} {:>10}", "k", "e_k", "sd", "eRand_k", "sd");
            for o in &report.orders {
                println!(
                    "{:>3} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    o.k, o.e_k_mean, o.e_k_std, o.e_rand_k_mean, o.e_rand_k_std
                );
            }
        }
    }
    report_failures(&inputs, &results)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Returns(a) => cmd_returns(a),
        Command::Census(a) => cmd_census(a),
        Command::Predict(a) => cmd_predict(a),
    };
    ExitCode::from(code)
}
