use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};

use netchar::anon::{anonymize_lines, rewrite_enrichment_log, rewrite_packet_log, AnonKey, Anonymizer};
use netchar::assoc::AssocArray;
use netchar::distfit::{fit_cauchy, fit_zm, log_bin, ReferenceTime};
use netchar::ingest::SynthConfig;
use netchar::report::{
    cmd_correlate, cmd_run, cmd_stats, cmd_synth, sources_per_value, ReportError, RunConfig,
};

#[derive(Parser)]
#[command(name = "netchar", version, about = "Characterize darkspace traffic against honeyfarm enrichment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic packet log and enrichment log with ground truth.
    Synth(SynthArgs),
    /// Anonymize addresses in a packet log, enrichment log or address list.
    Anon(AnonArgs),
    /// Join packet windows with enrichment; write matrices and overlap.
    Correlate(RunArgs),
    /// Dimensional statistics, relevance and exemplar records.
    Stats(RunArgs),
    /// Fit a Zipf-Mandelbrot or temporal model to a single data file.
    Fit(FitArgs),
    /// Full pipeline: correlate, stats, distributions and fits.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nv: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_sources: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Packets,
    Enrichment,
    Ips,
}

#[derive(Args)]
struct AnonArgs {
    /// Key file: 64 hex characters.
    #[arg(long)]
    key: PathBuf,
    /// Write a fresh key to --key instead of anonymizing (from --seed when
    /// given, otherwise from system randomness).
    #[arg(long)]
    generate_key: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Input file; standard input when omitted.
    #[arg(long = "in", visible_alias = "input")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "packets")]
    format: InputFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    packets: Option<PathBuf>,
    #[arg(long)]
    enrichment: Option<PathBuf>,
    #[arg(long)]
    key: Option<PathBuf>,
    /// Packets per window.
    #[arg(long)]
    nv: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// One positive count per line.
    #[arg(long, conflicts_with_all = ["matrix", "series"])]
    counts: Option<PathBuf>,
    /// Metadata matrix TSV; fits the number of sources per value of --variable.
    #[arg(long, requires = "variable")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    variable: Option<String>,
    /// Temporal series, `t<TAB>fraction` per line; needs --d and --nv.
    #[arg(long, requires_all = ["d", "nv"])]
    series: Option<PathBuf>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    nv: Option<u64>,
    /// Reference time of the temporal model; fitted when omitted.
    #[arg(long)]
    t0: Option<f64>,
    /// Model support for the Zipf-Mandelbrot fit.
    #[arg(long)]
    dmax: Option<u64>,
    /// Run configuration supplying fit grids.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> ReportError {
    ReportError::Usage(msg.into())
}

fn open_input(path: &Path) -> Result<BufReader<File>, ReportError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, ReportError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_config(args: RunArgs) -> Result<RunConfig, ReportError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.packets = args.packets.or(cfg.packets);
    cfg.enrichment = args.enrichment.or(cfg.enrichment);
    cfg.key_file = args.key.or(cfg.key_file);
    cfg.out_dir = args.out.or(cfg.out_dir);
    cfg.nv = args.nv.unwrap_or(cfg.nv);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    Ok(cfg)
}

fn synth(args: SynthArgs) -> Result<(), ReportError> {
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => serde_json::from_reader(open_input(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => SynthConfig::default(),
    };
    cfg.nv = args.nv.unwrap_or(cfg.nv);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.n_sources = args.n_sources.unwrap_or(cfg.n_sources);
    cfg.overlap_frac = args.overlap.unwrap_or(cfg.overlap_frac);
    let out = cmd_synth(&cfg, &args.out)?;
    eprintln!("wrote synthetic dataset to {}", out.display());
    Ok(())
}

fn anon(args: AnonArgs) -> Result<(), ReportError> {
    if args.generate_key {
        let mut bytes = [0u8; 32];
        match args.seed {
            Some(s) => rand_chacha::ChaCha20Rng::seed_from_u64(s).fill(&mut bytes),
            None => rand::rng().fill(&mut bytes),
        }
        AnonKey::from_bytes(&bytes)
            .write_file(&args.key)
            .map_err(|e| usage(e.to_string()))?;
        eprintln!("wrote key to {}", args.key.display());
        return Ok(());
    }
    let key = AnonKey::read_file(&args.key).map_err(|e| usage(e.to_string()))?;
    let anon = Anonymizer::new(&key);
    let input: Box<dyn BufRead> = match &args.input {
        Some(p) => Box::new(open_input(p)?),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = output(args.out.as_deref())?;
    let stage = |e: netchar::anon::AnonError| ReportError::stage("anon", e);
    let rows = match args.format {
        InputFormat::Packets => rewrite_packet_log(&anon, input, &mut out).map_err(stage)?,
        InputFormat::Enrichment => rewrite_enrichment_log(&anon, input, &mut out).map_err(stage)?,
        InputFormat::Ips => {
            let ips = anonymize_lines(&anon, input).map_err(stage)?;
            for ip in &ips {
                writeln!(out, "{ip}").map_err(|e| ReportError::stage("anon", e))?;
            }
            ips.len()
        }
    };
    log::info!("anonymized {rows} rows");
    out.flush().map_err(|e| ReportError::stage("anon", e))
}

fn read_counts(path: &Path) -> Result<Vec<u64>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line.map_err(|e| ReportError::stage("fit", e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| {
            ReportError::stage("fit", format!("{}: line {}: invalid count {t:?}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn read_series(path: &Path) -> Result<Vec<(f64, f64)>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in open_input(path)?.lines().enumerate() {
        let line = line.map_err(|e| ReportError::stage("fit", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || ReportError::stage("fit", format!("{}: line {}: expected t<TAB>fraction", path.display(), i + 1));
        let (t, y) = line.split_once('\t').ok_or_else(bad)?;
        out.push((t.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?));
    }
    Ok(out)
}

fn fit(args: FitArgs) -> Result<(), ReportError> {
    let grids = match &args.config {
        Some(p) => RunConfig::load(p)?.fit_grids,
        None => Default::default(),
    };
    let stage = |e: netchar::distfit::DistError| ReportError::stage("fit", e);
    let result = if let Some(series) = &args.series {
        let (d, nv) = (args.d.expect("required by clap"), args.nv.expect("required by clap"));
        let t0 = match args.t0 {
            Some(t) => ReferenceTime::Known(t),
            None => ReferenceTime::Fit(0.0),
        };
        let f = fit_cauchy(&read_series(series)?, d, nv, t0, &grids.cauchy).map_err(stage)?;
        serde_json::json!({
            "model": "cauchy",
            "d": d,
            "nv": nv,
            "alpha": f.params.alpha,
            "beta": f.params.beta,
            "t0": f.params.t0,
            "mse": f.mse,
            "beta_at_boundary": f.beta_at_boundary,
        })
    } else {
        let (variable, counts) = match (&args.counts, &args.matrix) {
            (Some(p), _) => ("counts".to_string(), read_counts(p)?),
            (None, Some(m)) => {
                let meta = AssocArray::read_tsv(open_input(m)?)
                    .map_err(|e| ReportError::stage("fit", format!("{}: {e}", m.display())))?;
                let var = args.variable.clone().expect("required by clap");
                let counts = sources_per_value(&meta, &var).into_values().collect();
                (var, counts)
            }
            (None, None) => return Err(usage("give one of --counts, --matrix or --series")),
        };
        let mut opts = grids.zm;
        opts.dmax = args.dmax.or(opts.dmax);
        let f = fit_zm(&log_bin(&counts).map_err(stage)?, &opts).map_err(stage)?;
        serde_json::json!({
            "variable": variable,
            "alpha": f.params.alpha,
            "delta": f.params.delta,
            "dmax": f.params.dmax,
            "mse": f.mse,
        })
    };
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &result).map_err(|e| ReportError::stage("fit", e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| ReportError::stage("fit", e))
}

fn report(done: Result<PathBuf, ReportError>) -> Result<(), ReportError> {
    let out = done?;
    eprintln!("wrote report to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Anon(a) => anon(a),
        Command::Correlate(a) => run_config(a).and_then(|c| report(cmd_correlate(&c))),
        Command::Stats(a) => run_config(a).and_then(|c| report(cmd_stats(&c))),
        Command::Fit(a) => fit(a),
        Command::Run(a) => run_config(a).and_then(|c| report(cmd_run(&c))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
