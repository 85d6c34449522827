//! Command-line entry point: one subcommand per pipeline or streaming
//! operation. Artifacts land under a run directory, logs go to stderr as
//! structured lines, and stdout carries only data.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, config
//! or spec schema violations, which name the offending field), 1 for
//! runtime failures.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ensemble::load_model_set;
use crate::error::{Error, Result};
use crate::io::synth::{generate_synthetic, SyntheticSpec};
use crate::io::{load_dataset, write_dataset, Dataset};
use crate::pipeline::{
    evaluate_model, extract_windows, prepare_run_dir, preprocess_recording,
    run_channel_selection, run_time_window_sweep, train_final, PipelineConfig, RunPaths,
};
use crate::realtime::{run_replay, serve_once, ReplayConfig, ReplaySpeed, ServeConfig};

#[derive(Parser)]
#[command(
    name = "passio",
    version,
    about = "EEG emotion detection: band-power features, affect classifiers, six passions",
    propagate_version = true
)]
struct Cli {
    /// Base RNG seed, overriding the config file's.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, downsample and re-reference every trial into a new dataset.
    Preprocess(RunArgs),
    /// Extract window features from a dataset into a table.
    Features(FeaturesArgs),
    /// Rank channels by ensemble importance and write the selection tables.
    SelectChannels(RunArgs),
    /// Compare analysis window lengths by cross-validated accuracy.
    SweepWindow(RunArgs),
    /// Cross-validate and fit the final per-dimension model set.
    Train(RunArgs),
    /// Score a trained model set on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Stream live frames into a model, or replay a recording through it.
    Stream(StreamArgs),
    /// Write a labeled synthetic dataset.
    GenerateSynthetic(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Input dataset directory (overrides the config's data_dir).
    #[arg(long)]
    data: Option<PathBuf>,

    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Window step in seconds (default: the config's training step).
    #[arg(long)]
    step_s: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Trained model container.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct StreamArgs {
    /// Trained model container.
    #[arg(long)]
    model: PathBuf,

    /// Accept live wire sessions on this address.
    #[arg(long, conflicts_with = "replay")]
    listen: Option<String>,

    /// Replay a recording file instead of listening.
    #[arg(long)]
    replay: Option<PathBuf>,

    /// Replay pacing: `1x` or `max`.
    #[arg(long, default_value = "1x")]
    speed: String,

    /// Seconds between events (default: the model's window length).
    #[arg(long)]
    cadence_s: Option<f64>,

    /// Also publish event lines to tcp://<addr>.
    #[arg(long)]
    emit: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator spec (TOML); defaults to the built-in demo corpus.
    #[arg(long)]
    spec: Option<PathBuf>,

    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

/// Parse argv, run, and map errors onto the documented exit codes. Every
/// failure prints one `error: ...` line to stderr.
pub fn run_from_env() -> i32 {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    builder.format_timestamp(None);
    let _ = builder.try_init();

    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Preprocess(args) => preprocess(&args, cli.seed, cli.force),
        Command::Features(args) => features(&args, cli.seed, cli.force),
        Command::SelectChannels(args) => select_channels(&args, cli.seed, cli.force),
        Command::SweepWindow(args) => sweep_window(&args, cli.seed, cli.force),
        Command::Train(args) => train(&args, cli.seed, cli.force),
        Command::Evaluate(args) => evaluate(&args, cli.seed, cli.force),
        Command::Stream(args) => stream(&args),
        Command::GenerateSynthetic(args) => generate(&args, cli.seed, cli.force),
    }
}

/// Configuration-phase failures exit 2 whatever their source variant.
fn configuration(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::config(other.to_string()),
    }
}

fn resolve(args: &RunArgs, seed: Option<u64>) -> Result<(PipelineConfig, PathBuf, PathBuf)> {
    let mut config = PipelineConfig::load(&args.config).map_err(configuration)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().map_err(configuration)?;
    let data = args
        .data
        .clone()
        .or_else(|| config.data_dir.clone())
        .ok_or_else(|| Error::config("no dataset directory: pass --data or set data_dir"))?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| Error::config("no output directory: pass --out or set out_dir"))?;
    Ok((config, data, out))
}

fn load_labeled(dir: &Path) -> Result<Dataset> {
    let dataset = load_dataset(dir)?;
    if dataset.is_empty() {
        return Err(Error::domain(format!("{} holds no recordings", dir.display())));
    }
    Ok(dataset)
}

/// Refuse to write into a non-empty directory unless `--force` was given.
fn ensure_overwritable(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied =
            std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if occupied && !force {
            return Err(Error::session(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Start a run directory and drop the resolved config into it, so every run
/// is reproducible from its own artifacts.
fn start_run(out: &Path, config: &PipelineConfig, force: bool) -> Result<RunPaths> {
    let paths = prepare_run_dir(out, force)?;
    let path = paths.config_dir.join("pipeline.toml");
    std::fs::write(&path, config.to_toml_string()).map_err(|e| Error::io(&path, e))?;
    Ok(paths)
}

fn write_table(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf).expect("vec write");
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

fn preprocess(args: &RunArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(args, seed)?;
    let dataset = load_labeled(&data)?;
    ensure_overwritable(&out, force)?;
    let keep = config.channel_ids().map_err(configuration)?;
    let processed = dataset
        .recordings
        .iter()
        .map(|rec| preprocess_recording(rec, &config, &keep))
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&out, &processed)?;
    log::info!("wrote {} preprocessed trials to {}", processed.len(), out.display());
    Ok(())
}

fn features(args: &FeaturesArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(&args.run, seed)?;
    let dataset = load_labeled(&data)?;
    let paths = start_run(&out, &config, force)?;
    let keep = config.channel_ids().map_err(configuration)?;
    let step = args.step_s.unwrap_or(config.train_step_s);
    let table = extract_windows(&dataset.recordings, &config, &keep, step)?;
    write_table(&paths.tables_dir.join("features.tsv"), |w| {
        table.write_tsv(w, &config.config_hash(), config.seed)
    })?;
    log::info!(
        "featurized {} windows x {} features into {}",
        table.n_windows(),
        table.schema().len(),
        paths.tables_dir.join("features.tsv").display()
    );
    Ok(())
}

fn select_channels(args: &RunArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(args, seed)?;
    let dataset = load_labeled(&data)?;
    let paths = start_run(&out, &config, force)?;
    let report = run_channel_selection(&config, &dataset.recordings)?;
    report.write_artifacts(&paths.tables_dir)?;
    let names: Vec<&str> = report.selected.iter().map(|c| c.name()).collect();
    log::info!("selected channels ({} band): {}", report.band.name(), names.join(" "));
    Ok(())
}

fn sweep_window(args: &RunArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(args, seed)?;
    let dataset = load_labeled(&data)?;
    let paths = start_run(&out, &config, force)?;
    let report = run_time_window_sweep(&config, &dataset.recordings, &config.window_lengths_s)?;
    write_table(&paths.tables_dir.join("window_sweep.tsv"), |w| report.write_tsv(w))?;
    log::info!("selected window length {} s", report.selected_length_s);
    Ok(())
}

fn train(args: &RunArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(args, seed)?;
    let dataset = load_labeled(&data)?;
    let paths = start_run(&out, &config, force)?;
    let report = train_final(&config, &dataset.recordings)?;
    report.write_artifacts(&paths)?;
    log::info!(
        "cross-validated accuracy: average {:.4}, all-three {:.4}",
        report.average_accuracy(),
        report.triple_accuracy
    );
    log::info!("model and tables under {}", paths.root.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let (config, data, out) = resolve(&args.run, seed)?;
    let models = load_model_set(&args.model)?;
    let dataset = load_labeled(&data)?;
    let paths = start_run(&out, &config, force)?;
    let report = evaluate_model(&models, &dataset.recordings, &config)?;
    write_table(&paths.tables_dir.join("evaluation.tsv"), |w| report.write_tsv(w))?;
    log::info!(
        "evaluated {} windows: average accuracy {:.4}",
        report.n_windows,
        report.average_accuracy()
    );
    Ok(())
}

fn generate(args: &GenerateArgs, seed: Option<u64>, force: bool) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => SyntheticSpec::load(path).map_err(configuration)?,
        None => SyntheticSpec::demo(),
    };
    ensure_overwritable(&args.out, force)?;
    let recordings = generate_synthetic(&spec, seed.unwrap_or(42))?;
    write_dataset(&args.out, &recordings)?;
    log::info!(
        "wrote {} trials ({} subjects x {} each) to {}",
        recordings.len(),
        spec.n_subjects,
        spec.n_trials,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// streaming
// ---------------------------------------------------------------------------

/// Event fan-out: always stdout, optionally a TCP publish socket.
struct EventSink {
    stdout: std::io::Stdout,
    emit: Option<TcpStream>,
}

impl EventSink {
    fn connect(emit: Option<&str>) -> Result<EventSink> {
        let emit = match emit {
            Some(addr) => {
                let addr: SocketAddr = addr
                    .strip_prefix("tcp://")
                    .ok_or_else(|| Error::config("--emit expects tcp://<host>:<port>"))?
                    .parse()
                    .map_err(|e| Error::config(format!("--emit address: {e}")))?;
                let socket = TcpStream::connect(addr)
                    .map_err(|e| Error::session(format!("cannot reach {addr}: {e}")))?;
                Some(socket)
            }
            None => None,
        };
        Ok(EventSink { stdout: std::io::stdout(), emit })
    }
}

impl Write for EventSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.stdout.write_all(buf)?;
        if let Some(socket) = &mut self.emit {
            socket.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.stdout.flush()?;
        if let Some(socket) = &mut self.emit {
            socket.flush()?;
        }
        Ok(())
    }
}

fn stream(args: &StreamArgs) -> Result<()> {
    if args.listen.is_none() && args.replay.is_none() {
        return Err(Error::config("stream needs --listen <addr> or --replay <file>"));
    }
    let models = load_model_set(&args.model)?;
    let mut sink = EventSink::connect(args.emit.as_deref())?;
    match (&args.listen, &args.replay) {
        (Some(addr), None) => {
            let addr: SocketAddr = addr
                .parse()
                .map_err(|e| Error::config(format!("--listen address: {e}")))?;
            let listener = TcpListener::bind(addr)
                .map_err(|e| Error::session(format!("cannot listen on {addr}: {e}")))?;
            log::info!("listening on {addr}");
            let config = ServeConfig { cadence_s: args.cadence_s };
            loop {
                match serve_once(&listener, models.clone(), &mut sink, &config) {
                    Ok(s) => log::info!(
                        "session closed: {} frames, {} events, {} dropped, {} gaps",
                        s.frames,
                        s.events,
                        s.dropped,
                        s.gaps
                    ),
                    Err(e) => log::error!("session failed: {e}"),
                }
            }
        }
        (None, Some(path)) => {
            let speed: ReplaySpeed = args.speed.parse()?;
            let config = ReplayConfig { speed, cadence_s: args.cadence_s };
            let summary = run_replay(path, models, &config, |event| {
                writeln!(sink, "{}", event.to_json_line())
                    .map_err(|e| Error::session(format!("event emit failed: {e}")))?;
                sink.flush().map_err(|e| Error::session(format!("event emit failed: {e}")))
            })?;
            log::info!(
                "replay done: {} frames, {} events, {} gaps in {:.2} s",
                summary.frames,
                summary.events,
                summary.gaps,
                summary.wall_s
            );
            Ok(())
        }
        _ => unreachable!("clap rejects the combination; absence checked above"),
    }
}
