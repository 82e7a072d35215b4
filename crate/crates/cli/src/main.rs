use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sliceq_core::config::{apply_env_overrides, default_scenario, load_scenario_file};
use sliceq_core::harness::report::{
    render_comparison, render_robustness, render_run, write_file,
};
use sliceq_core::harness::{compare, robustness, train, Format, TraceWriter};
use sliceq_core::{Algorithm, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sliceq", version, about = "Two-slice RB allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, summary or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and report per-episode metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Per-TTI trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare algorithms over paired seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Inclusive range `a..b` or a comma list.
        #[arg(long, default_value = "1..20")]
        seeds: String,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "q_learning,double_q,self_play_ensemble"
        )]
        algorithms: Vec<Algorithm>,
    },
    /// Clean versus corrupted-table runs for double Q and the self-play ensemble.
    Robustness {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "1..20")]
        seeds: String,
    },
    /// Train one agent and write its final Q-tables.
    DumpQtable {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig> {
    let mut config = match path {
        Some(p) => load_scenario_file(p).with_context(|| format!("loading {}", p.display()))?,
        None => default_scenario(),
    };
    apply_env_overrides(&mut config)?;
    Ok(config)
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range {spec:?}"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range {spec:?}"))?;
        if a > b {
            bail!("empty seed range {spec:?}");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect()
}

fn format_or(common: &Common, default: Format) -> Result<Format> {
    match &common.format {
        Some(f) => Ok(f.parse()?),
        None => Ok(default),
    }
}

fn output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(bytes).and_then(|_| out.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            seed,
            algorithm,
            trace,
        } => {
            let mut config = load(common.config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(a) = algorithm {
                config.agent.algorithm = a;
            }
            let format = format_or(&common, Format::Csv)?;
            let result = match &trace {
                Some(path) => {
                    let file = File::create(path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    let mut w = TraceWriter::new(BufWriter::new(file))?;
                    let (r, _) = train(&config, Some(&mut w))
                        .with_context(|| format!("writing {}", path.display()))?;
                    w.flush().with_context(|| format!("writing {}", path.display()))?;
                    r
                }
                None => train::<std::io::Sink>(&config, None)?.0,
            };
            eprintln!("finished in {:.2}s", result.wall_time_s);
            output(common.out.as_deref(), &render_run(&result, format)?)
        }
        Command::Compare {
            common,
            seeds,
            algorithms,
        } => {
            let config = load(common.config.as_deref())?;
            let report = compare(&config, &algorithms, &parse_seeds(&seeds)?)?;
            let format = format_or(&common, Format::Summary)?;
            output(common.out.as_deref(), &render_comparison(&report, format)?)
        }
        Command::Robustness { common, seeds } => {
            let config = load(common.config.as_deref())?;
            let report = robustness(&config, &parse_seeds(&seeds)?)?;
            let format = format_or(&common, Format::Summary)?;
            output(common.out.as_deref(), &render_robustness(&report, format)?)
        }
        Command::DumpQtable {
            config,
            seed,
            algorithm,
            out,
        } => {
            let mut config = load(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(a) = algorithm {
                config.agent.algorithm = a;
            }
            let (_, agent) = train::<std::io::Sink>(&config, None)?;
            let mut buf = Vec::new();
            agent.dump_tables(&mut buf)?;
            output(out.as_deref(), &buf)
        }
    }
}
