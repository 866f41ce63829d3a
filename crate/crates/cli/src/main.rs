use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use veriquery::encodings::BitwiseMode;
use veriquery::query::{parse_query, Query};
use veriquery_node::experiment::{run_experiment, ExperimentSpec, Row};
use veriquery_node::plot::plot_report;
use veriquery_node::{AnySystem, Config};

#[derive(Parser)]
#[command(name = "veriquery", version, about = "Verifiable privacy-preserving queries over distributed data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the public keys a config derives.
    Keygen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve nodes of a deployment until killed.
    RunNodes {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated node ids; every node except the querier by default.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
    },
    /// Run a query and print the result, block and traffic as JSON.
    Query {
        text: String,
        #[arg(long)]
        config: PathBuf,
        /// Add noise with the config's privacy parameters.
        #[arg(long)]
        dp_privacy: bool,
        /// Bounds `lo,hi` the providers prove their values lie in.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<(i64, i64)>,
        #[arg(long, value_enum)]
        bitwise: Option<Bitwise>,
    },
    /// Check the ledger entry of a query and print the audit report.
    Audit {
        query_id: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a parameter sweep and write its rows as JSON.
    Experiment {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an experiment report as an SVG line chart.
    Plot {
        report: PathBuf,
        #[arg(long, default_value = "wall_ms")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Bitwise {
    Bits,
    Random,
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    Ok((lo, hi))
}

fn load(config: &Path) -> Result<Config> {
    Config::load(config).with_context(|| format!("loading {}", config.display()))
}

/// Prints to stdout; a reader that hangs up early (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => emit(text),
    }
}

fn build_query(
    config: &Config,
    text: &str,
    dp_privacy: bool,
    range: Option<(i64, i64)>,
    bitwise: Option<Bitwise>,
) -> Result<Query> {
    let mut q = parse_query(text)?;
    if let Some(s) = config.scale {
        q.operation.scale = s;
    }
    if let Some((lo, hi)) = range {
        q = q.with_bounds(lo, hi)?;
    }
    if let Some(b) = bitwise {
        q = q.with_bitwise_mode(match b {
            Bitwise::Bits => BitwiseMode::BitWithObfuscation,
            Bitwise::Random => BitwiseMode::RandomInteger,
        });
    }
    if dp_privacy {
        let Some(p) = config.privacy else {
            bail!("--dp-privacy needs a [privacy] section in the config");
        };
        q = q.with_privacy(p);
    }
    q.validate()?;
    Ok(q)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen { config } => {
            let config = load(&config)?;
            if config.seed.is_none() {
                log::warn!("no seed in the config: these keys are random and will not match any other process");
            }
            let system = AnySystem::from_config(config)?;
            emit(&serde_json::to_string_pretty(&system.public_keys())?)?;
        }
        Command::RunNodes { config, nodes } => {
            let config = load(&config)?;
            if config.seed.is_none() {
                bail!("run-nodes needs a fixed seed so every process derives the same keys");
            }
            let nodes = if nodes.is_empty() {
                config
                    .addresses()
                    .into_iter()
                    .map(|(id, _)| id)
                    .filter(|id| *id != config.querier.id)
                    .collect()
            } else {
                nodes
            };
            let system = AnySystem::from_config(config)?;
            log::info!("serving {}", nodes.join(","));
            system.host(&nodes)?.wait()?;
        }
        Command::Query {
            text,
            config,
            dp_privacy,
            range,
            bitwise,
        } => {
            let config = load(&config)?;
            let query = build_query(&config, &text, dp_privacy, range, bitwise)?;
            let remote = config.querier.addr.is_some();
            let mut system = AnySystem::from_config(config)?;
            let out = if remote {
                // the deployment may have answered this text before
                let nanos = SystemTime::now().duration_since(UNIX_EPOCH)?.as_nanos();
                let id = format!("{}-{nanos}", query.id);
                system.run_remote_query(&query.with_id(id))?
            } else {
                system.run_query(&query)?
            };
            emit(&serde_json::to_string_pretty(&out)?)?;
        }
        Command::Audit { query_id, config } => {
            let config = load(&config)?;
            if config.data_dir.is_none() {
                bail!("audit reads chains from data_dir, which the config does not set");
            }
            let system = AnySystem::from_config(config)?;
            emit(&serde_json::to_string_pretty(&system.audit(&query_id)?)?)?;
        }
        Command::Experiment { spec, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let rows = run_experiment(&spec)?;
            write_out(out.as_deref(), &serde_json::to_string_pretty(&rows)?)?;
        }
        Command::Plot { report, metric, out } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let rows: Vec<Row> = serde_json::from_str(&text)?;
            write_out(out.as_deref(), &plot_report(&rows, &metric)?)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
