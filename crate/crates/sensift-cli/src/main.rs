//! Batch command-line front end: generate test datasets, run detection,
//! score reports against ground truth, and sweep the similarity threshold.
//!
//! Exit codes: 0 success, 1 runtime failure (unreadable data, processing
//! errors), 2 usage or configuration errors (clap uses 2 as well).

mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use report::ReportDoc;
use sensift::harness::{
    self, generate_clean, inject_events, inject_outliers, GenerateSpec, GroundTruth,
    InjectionMode, InjectionSpec, MetricsRow, TruthLabel,
};
use sensift::ingest::{load_tables, PropertyKind, Tables, TimeRange, Timestamp};
use sensift::pipeline::{prepare, DetectionConfig};
use sensift::rules::{load_rules, parse_predicate_list, RuleSet};

#[derive(Parser)]
#[command(
    name = "sensift",
    version,
    about = "Segment outlier and unusual event detection for wireless sensor network streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (optionally with injected anomalies).
    Gen(GenArgs),
    /// Run detection over a time range and write a JSON report.
    Detect(DetectArgs),
    /// Score a detection report against a ground-truth file.
    Score(ScoreArgs),
    /// Sweep the similarity threshold and write a metrics CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenMode {
    /// Clean data only; truth.csv stays empty.
    Clean,
    /// Replace random per-property segments with uniform noise.
    Outliers,
    /// Plant opposing temperature/humidity excursions at shared windows.
    EventsStrong,
    /// Plant co-moving temperature/humidity excursions at shared windows.
    EventsPositive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelArg {
    ErroneousOutlier,
    UnusualEvent,
}

impl LabelArg {
    fn truth_label(self) -> TruthLabel {
        match self {
            LabelArg::ErroneousOutlier => TruthLabel::ErroneousOutlier,
            LabelArg::UnusualEvent => TruthLabel::UnusualEvent,
        }
    }

    fn verdict_token(self) -> &'static str {
        self.truth_label().as_str()
    }
}

#[derive(Args)]
struct GenArgs {
    /// What to inject into the clean dataset.
    #[arg(long, value_enum)]
    mode: GenMode,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed for generation; injection derives its own stream from it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 36)]
    nodes: usize,
    #[arg(long, default_value_t = 30)]
    days: u32,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 600)]
    grid_step: i64,
    /// Injection rounds; defaults to 15 for outliers, 30 for events.
    #[arg(long)]
    rounds: Option<usize>,
    /// Streams (or nodes) hit per round.
    #[arg(long, default_value_t = 8)]
    per_round: usize,
}

#[derive(Args)]
struct DetectionFlags {
    /// Neighborhood threshold in meters.
    #[arg(long, default_value_t = 300.0)]
    delta: f64,
    /// Sliding window length in slots (even).
    #[arg(long, default_value_t = 12)]
    eta: usize,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 600)]
    grid_step: i64,
    /// Comma-separated predicate short names counting as "correlated".
    #[arg(long, default_value = "strong,medium")]
    predicates: String,
    /// Per-property value scale, as `property=scale`; repeatable.
    #[arg(long = "value-scale", value_name = "PROP=SCALE")]
    value_scales: Vec<String>,
}

impl DetectionFlags {
    fn to_config(&self, beta: f64) -> anyhow::Result<DetectionConfig> {
        let active_predicates =
            parse_predicate_list(&self.predicates).map_err(|e| anyhow!("--predicates: {e}"))?;
        let mut value_scales = BTreeMap::new();
        for spec in &self.value_scales {
            let (name, scale) = spec
                .split_once('=')
                .ok_or_else(|| anyhow!("--value-scale needs PROP=SCALE, got `{spec}`"))?;
            let property =
                PropertyKind::new(name.trim()).map_err(|e| anyhow!("--value-scale: {e}"))?;
            let scale: f64 = scale
                .trim()
                .parse()
                .map_err(|e| anyhow!("--value-scale `{spec}`: {e}"))?;
            value_scales.insert(property, scale);
        }
        Ok(DetectionConfig {
            delta_m: self.delta,
            eta: self.eta,
            beta,
            grid_step: self.grid_step,
            value_scales,
            active_predicates,
        })
    }
}

#[derive(Args)]
struct InputFiles {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    sensors: PathBuf,
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    rules: PathBuf,
}

impl InputFiles {
    fn check_readable(&self) -> anyhow::Result<()> {
        for path in [&self.nodes, &self.sensors, &self.obs, &self.rules] {
            if !path.is_file() {
                return Err(anyhow!("input file not found: {}", path.display()));
            }
        }
        Ok(())
    }

    fn load(&self) -> anyhow::Result<(Tables, RuleSet)> {
        let tables = load_tables(&self.nodes, &self.sensors, &self.obs)?;
        let rules = load_rules(&self.rules)?;
        Ok((tables, rules))
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    inputs: InputFiles,
    /// Start of the query range, ISO-8601 with timezone.
    #[arg(long)]
    from: String,
    /// End of the query range (exclusive), ISO-8601 with timezone.
    #[arg(long)]
    to: String,
    /// Similarity threshold.
    #[arg(long, default_value_t = 0.90)]
    beta: f64,
    #[command(flatten)]
    flags: DetectionFlags,
    /// Report output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Write per-version neighborhood matrices as CSV into this directory.
    #[arg(long, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
    /// Write per-property similarity tensors as CSV into this directory.
    #[arg(long, value_name = "DIR")]
    dump_similarity: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Detection report produced by `detect`.
    #[arg(long)]
    report: PathBuf,
    /// Ground-truth CSV produced by `gen`.
    #[arg(long)]
    truth: PathBuf,
    /// Which verdict to score.
    #[arg(long, value_enum)]
    label: LabelArg,
    /// Metrics output path (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: InputFiles,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    label: LabelArg,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, default_value_t = 0.70)]
    beta_from: f64,
    #[arg(long, default_value_t = 0.98)]
    beta_to: f64,
    #[arg(long, default_value_t = 0.01)]
    beta_step: f64,
    #[command(flatten)]
    flags: DetectionFlags,
    /// Metrics output path (CSV).
    #[arg(long)]
    out: PathBuf,
}

/// Distinguishes configuration mistakes (exit 2) from runtime failures
/// (exit 1).
enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Score(args) => cmd_score(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Rule files shipped with each generated dataset.
fn rules_text(mode: GenMode) -> &'static str {
    match mode {
        GenMode::Clean | GenMode::Outliers | GenMode::EventsStrong => {
            "# cross-property correlations\n\
             air_temperature hasStrongCorrelation relative_humidity\n\
             air_temperature hasNegativeCorrelation relative_humidity\n"
        }
        GenMode::EventsPositive => {
            "# cross-property correlations\n\
             air_temperature hasPositiveCorrelation relative_humidity\n"
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let spec = GenerateSpec {
        nodes: args.nodes,
        days: args.days,
        grid_step: args.grid_step,
        ..GenerateSpec::default()
    };
    let mut dataset = generate_clean(args.seed, &spec).map_err(usage)?;

    // Injection runs on an independent stream derived from the same seed.
    let inject_seed = args.seed ^ 0x9E37_79B9_7F4A_7C15;
    let adjust = |mut spec: InjectionSpec| {
        if let Some(rounds) = args.rounds {
            spec.rounds = rounds;
        }
        spec.streams_per_round = args.per_round;
        spec
    };
    let truth = match args.mode {
        GenMode::Clean => GroundTruth::default(),
        GenMode::Outliers => {
            inject_outliers(&mut dataset, &adjust(InjectionSpec::outliers()), inject_seed)
                .map_err(runtime)?
        }
        GenMode::EventsStrong => inject_events(
            &mut dataset,
            &adjust(InjectionSpec::events(InjectionMode::EventsStrong)),
            inject_seed,
        )
        .map_err(runtime)?,
        GenMode::EventsPositive => inject_events(
            &mut dataset,
            &adjust(InjectionSpec::events(InjectionMode::EventsPositive)),
            inject_seed,
        )
        .map_err(runtime)?,
    };

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(usage)?;
    dataset.write_csvs(&args.out).map_err(runtime)?;
    truth.write_csv(&args.out.join("truth.csv")).map_err(runtime)?;
    fs::write(args.out.join("rules.txt"), rules_text(args.mode))
        .with_context(|| "writing rules.txt")
        .map_err(runtime)?;

    let range = dataset.range();
    println!(
        "wrote {} nodes, {} sensors, {} observations, {} truth segments to {}",
        dataset.nodes.len(),
        dataset.sensors.len(),
        dataset.observation_count(),
        truth.len(),
        args.out.display()
    );
    println!("range: {} .. {}", range.start, range.end);
    Ok(())
}

fn parse_range(from: &str, to: &str) -> Result<TimeRange, CliError> {
    let start = Timestamp::parse(from).map_err(usage)?;
    let end = Timestamp::parse(to).map_err(usage)?;
    let range = TimeRange::new(start, end);
    if range.is_empty() {
        return Err(usage(anyhow!("--from must precede --to, got {range}")));
    }
    Ok(range)
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    args.inputs.check_readable().map_err(usage)?;
    let range = parse_range(&args.from, &args.to)?;
    let config = args.flags.to_config(args.beta).map_err(usage)?;
    config.validate().map_err(usage)?;

    let (tables, rules) = args.inputs.load().map_err(runtime)?;
    let prepared = prepare(&tables, &rules, &config, range).map_err(runtime)?;
    let outcome = prepared.detect(config.beta).map_err(runtime)?;

    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }

    if let Some(dir) = &args.dump_matrices {
        dump_matrices(&prepared, dir).map_err(runtime)?;
    }
    if let Some(dir) = &args.dump_similarity {
        dump_similarity(&prepared, dir).map_err(runtime)?;
    }

    let doc = ReportDoc::from_outcome(&outcome, &config, range);
    let body = serde_json::to_vec_pretty(&doc)
        .map_err(|e| runtime(anyhow!("serializing report: {e}")))?;
    write_atomically(&args.out, &body).map_err(runtime)?;

    println!(
        "{} anomalies ({} erroneous outliers, {} unusual events) over {} cells -> {}",
        outcome.records.len(),
        outcome.summary.erroneous_outliers,
        outcome.summary.unusual_events,
        outcome.summary.normal
            + outcome.summary.erroneous_outliers
            + outcome.summary.unusual_events
            + outcome.summary.unevaluated,
        args.out.display()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    for path in [&args.report, &args.truth] {
        if !path.is_file() {
            return Err(usage(anyhow!("input file not found: {}", path.display())));
        }
    }
    let body = fs::read_to_string(&args.report)
        .with_context(|| format!("reading {}", args.report.display()))
        .map_err(runtime)?;
    let doc: ReportDoc = serde_json::from_str(&body)
        .with_context(|| format!("parsing {}", args.report.display()))
        .map_err(runtime)?;
    let truth = GroundTruth::read_csv(&args.truth).map_err(runtime)?;

    let predictions = doc.predictions(args.label.verdict_token()).map_err(runtime)?;
    let row = harness::score_windows(
        doc.config.beta,
        &predictions,
        &truth,
        args.label.truth_label(),
    );

    let mut body = String::new();
    let _ = writeln!(body, "{}", MetricsRow::csv_header());
    let _ = writeln!(body, "{}", row.csv_row());
    write_atomically(&args.out, body.as_bytes()).map_err(runtime)?;
    println!("{}", row.csv_row());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    args.inputs.check_readable().map_err(usage)?;
    if !args.truth.is_file() {
        return Err(usage(anyhow!(
            "input file not found: {}",
            args.truth.display()
        )));
    }
    let range = parse_range(&args.from, &args.to)?;
    let config = args.flags.to_config(args.beta_from).map_err(usage)?;
    config.validate().map_err(usage)?;
    if !(args.beta_from > 0.0 && args.beta_from <= args.beta_to && args.beta_to <= 1.0) {
        return Err(usage(anyhow!(
            "threshold range must satisfy 0 < from <= to <= 1, got {}..{}",
            args.beta_from,
            args.beta_to
        )));
    }

    let (tables, rules) = args.inputs.load().map_err(runtime)?;
    let truth = GroundTruth::read_csv(&args.truth).map_err(runtime)?;
    let points = harness::sweep(
        &tables,
        &rules,
        &truth,
        args.label.truth_label(),
        &config,
        range,
        args.beta_from,
        args.beta_to,
        args.beta_step,
    )
    .map_err(runtime)?;

    let mut body = String::new();
    let _ = writeln!(body, "{}", MetricsRow::csv_header());
    for point in &points {
        let _ = writeln!(body, "{}", point.metrics.csv_row());
    }
    write_atomically(&args.out, body.as_bytes()).map_err(runtime)?;
    println!("{} sweep rows -> {}", points.len(), args.out.display());
    Ok(())
}

/// Writes through a sibling temp file and renames into place.
fn write_atomically(path: &Path, body: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, body).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn stamp(t: Timestamp) -> String {
    t.to_iso().replace([':', '-'], "")
}

fn dump_matrices(
    prepared: &sensift::pipeline::PreparedDetection,
    dir: &Path,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    for version in &prepared.versions {
        let from = stamp(version.range.start);
        let to = stamp(version.range.end);
        let node_matrix = &version.topology.node_matrix;

        let render = |cell: &dyn Fn(usize, usize) -> u8| -> String {
            let order = &node_matrix.node_order;
            let mut body = String::from("node_id");
            for id in order {
                body.push(',');
                body.push_str(id);
            }
            body.push('\n');
            for (j, id) in order.iter().enumerate() {
                body.push_str(id);
                for k in 0..order.len() {
                    let _ = write!(body, ",{}", cell(j, k));
                }
                body.push('\n');
            }
            body
        };

        fs::write(
            dir.join(format!("U_{from}_{to}.csv")),
            render(&|j, k| node_matrix.cell(j, k)),
        )?;
        for (property, matrix) in &version.topology.sensor_matrices {
            fs::write(
                dir.join(format!("A_{property}_{from}_{to}.csv")),
                render(&|j, k| matrix.cell(j, k)),
            )?;
        }
    }
    Ok(())
}

fn dump_similarity(
    prepared: &sensift::pipeline::PreparedDetection,
    dir: &Path,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    for (i, property) in prepared.property_order.iter().enumerate() {
        let mut body = String::from("node_j,node_k,window,similarity\n");
        for version in &prepared.versions {
            let tensor = &version.tensors[i];
            for (j, k, l, sim) in tensor.iter_present() {
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    tensor.node_order[j], tensor.node_order[k], l, sim
                );
            }
        }
        fs::write(dir.join(format!("SM_{property}.csv")), body)?;
    }
    Ok(())
}
