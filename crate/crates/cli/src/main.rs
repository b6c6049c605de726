use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use predint_cli::bench::{self, BenchConfig, BenchKind, REFERENCE_HOURS_PER_BILLION};
use predint_cli::config::{load_maze, DataSpec, RunConfig};
use predint_cli::exit::{classify, config_error, data_error};
use predint_cli::record::{measure_maze, measure_series, ResultRecord};
use predint_cli::series_csv;
use predint_core::complexity::CompressorSpec;
use predint_core::maze;

#[derive(Parser)]
#[command(name = "predint", version, about = "Measure predictive intelligence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the maze agent by exploration and measure it.
    MeasureMaze(MazeArgs),
    /// Train LSTM ensembles on time series and measure them.
    MeasureSeries(SeriesArgs),
    /// Re-derive every value in a saved result record.
    Verify { record: PathBuf },
    /// Write a generated dataset as CSV.
    GenData {
        /// Generator spec, e.g. `sine-trend,n=500,seed=7`.
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the measurement at doubling prediction counts.
    Bench(BenchArgs),
    /// Run the HTTP session server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    compressor: Option<CompressorSpec>,
    #[arg(long)]
    parallel: bool,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MazeArgs {
    #[command(flatten)]
    common: Common,
    /// Built-in maze name or maze file; repeatable. Defaults to all built-ins.
    #[arg(long = "maze")]
    mazes: Vec<String>,
    #[arg(long)]
    passes: Option<usize>,
    /// Replay these actions from the start pose instead of exploring.
    #[arg(long)]
    actions: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset spec (`line`, `sine`, `sine-trend`, `noisy-line` or a CSV path); repeatable.
    #[arg(long = "data")]
    data: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "maze")]
    kind: BenchKind,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    start: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = CompressorSpec::default())]
    compressor: CompressorSpec,
    /// Write the timing points as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Extra maze files offered alongside the built-ins; repeatable.
    #[arg(long = "maze")]
    mazes: Vec<PathBuf>,
    /// Minutes of inactivity before a session is dropped.
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = common.compressor {
        config.compressor = c;
    }
    config.parallel |= common.parallel;
    Ok(config)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn emit(record: &ResultRecord, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => record.save(p)?,
        None => println!("{}", record.to_json()),
    }
    eprintln!(
        "{:<24} {:>8} {:>12} {:>10} {:>10}",
        "umwelt", "events", "weighted pm", "I", "max I"
    );
    for u in &record.umwelts {
        eprintln!(
            "{:<24} {:>8} {:>12.4} {:>10.4} {:>10.4}",
            u.id, u.events, u.weighted_pm, u.result.intelligence, u.max_intelligence
        );
    }
    let c = &record.combined;
    eprintln!(
        "{:<24} {:>8} {:>12.4} {:>10.4} {:>10.4}   joint factor {:.4}",
        "combined",
        "",
        c.result.pm_total,
        c.result.intelligence,
        c.max_intelligence,
        c.result.joint_factor
    );
    Ok(())
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_bench(args: BenchArgs) -> Result<()> {
    if args.points < 2 || args.runs < 1 || args.start < 1 {
        return Err(config_error(
            "bench needs at least 2 points, 1 run and a start of 1",
        ));
    }
    let config = BenchConfig {
        kind: args.kind,
        points: args.points,
        runs: args.runs,
        start: args.start,
        seed: args.seed,
    };
    let report = bench::run(&config, &args.compressor)?;
    println!("{:>12} {:>14} {:>14}", "predictions", "mean s", "sd s");
    for p in &report.points {
        println!(
            "{:>12} {:>14.6} {:>14.6}",
            p.predictions, p.mean_seconds, p.sd_seconds
        );
    }
    println!(
        "slope {:.3e} s/prediction, R^2 {:.4}, {:.3} h per 1e9 predictions (reference {REFERENCE_HOURS_PER_BILLION} h)",
        report.fit.slope, report.fit.r_squared, report.hours_per_billion
    );
    if let Some(p) = &args.csv {
        write_or_print(&report.to_csv(), Some(p))?;
    }
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&report)?;
        write_or_print(&(json + "\n"), Some(p))?;
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let mut library = maze::builtins();
    for path in &args.mazes {
        let world = load_maze(&path.to_string_lossy())?;
        if library.iter().any(|w| w.name() == world.name()) {
            return Err(config_error(format!(
                "maze `{}` is already loaded",
                world.name()
            )));
        }
        library.push(world);
    }
    let state = predint_service::app_state(library, Duration::from_secs(args.idle_minutes * 60));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(|e| config_error(format!("cannot listen on {}: {e}", args.addr)))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        predint_service::serve(listener, state, shutdown).await?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MeasureMaze(args) => {
            let mut config = base_config(&args.common)?;
            if !args.mazes.is_empty() {
                config.mazes = args.mazes;
            }
            set(&mut config.passes, args.passes);
            if args.actions.is_some() {
                config.actions = args.actions;
            }
            emit(&measure_maze(&config)?, args.common.out.as_deref())
        }
        Command::MeasureSeries(args) => {
            let mut config = base_config(&args.common)?;
            if !args.data.is_empty() {
                config.data = args.data;
            }
            set(&mut config.seed, args.seed);
            set(&mut config.window, args.window);
            set(&mut config.n_models, args.models);
            set(&mut config.hidden_units, args.hidden);
            set(&mut config.epochs, args.epochs);
            set(&mut config.batch_size, args.batch_size);
            set(&mut config.alpha, args.alpha);
            emit(&measure_series(&config)?, args.common.out.as_deref())
        }
        Command::Verify { record } => {
            let r = ResultRecord::load(&record)?;
            println!(
                "{}: ok ({} umwelts, intelligence {:.4})",
                record.display(),
                r.umwelts.len(),
                r.combined.result.intelligence
            );
            Ok(())
        }
        Command::GenData { spec, out } => {
            let data = match DataSpec::parse(&spec)? {
                DataSpec::Csv { .. } => {
                    return Err(config_error(format!("`{spec}` is not a generator")))
                }
                generator => generator.load()?,
            };
            write_or_print(&series_csv(&data.values), out.as_deref())
                .map_err(|e| data_error(e.to_string()))
        }
        Command::Bench(args) => run_bench(args),
        Command::Serve(args) => run_serve(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e).code())
        }
    }
}
