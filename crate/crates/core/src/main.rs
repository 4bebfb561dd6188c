use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use emcomm::error::Error;
use emcomm::games::{extract_protocol, run_regime, Checkpoint, Regime};
use emcomm::harness::{
    child_seed, load_config, render_report, run_sweep, ExperimentSpec, ReportFormat, SweepOptions,
};
use emcomm::metrics::{context_independence, render_protocol_table, topographic_similarity, zero_shot_eval, TableFormat};
use emcomm::protocol::TrainedProtocol;
use emcomm::world::{build_dataset, diagonal_split};

#[derive(Parser)]
#[command(name = "emcomm", version, about = "Signaling-game training and compositionality metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Markdown,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train one regime for one seed; writes a checkpoint, record and protocol.
    Train {
        #[arg(long)]
        regime: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Extra `key=value` settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run several regimes over seeds 0..N and report mean (± std).
    Sweep {
        /// Comma-separated regimes.
        #[arg(long, default_value = "random,baseline,template-transfer,obverter")]
        regimes: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_seconds: Option<f64>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: ReportArg,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the protocol table of a checkpoint.
    DumpProtocol {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: TableArg,
        /// Needed only for checkpoints trained on an embedding file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Topographic similarity and context independence of a protocol file.
    Metrics {
        #[arg(long)]
        protocol: PathBuf,
    },
    /// Zero-shot accuracies of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_sets(set: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    set.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn load_checkpoint(path: &Path, config: Option<&Path>) -> anyhow::Result<(Checkpoint<f64>, emcomm::world::AttributeSpace)> {
    let ck = Checkpoint::<f64>::load(path).with_context(|| format!("loading {}", path.display()))?;
    let fallback = match config {
        Some(p) => Some(load_config(Some(p), &[])?.space),
        None => None,
    };
    let space = ck.space(fallback.as_ref())?;
    Ok((ck, space))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train { regime, config, seed, out, set } => {
            let regime: Regime = regime.parse()?;
            let base = load_config(config.as_deref(), &parse_sets(&set)?)?;
            let cfg = base.with_seed(child_seed(base.seed, seed));
            let trained = run_regime::<f64>(regime, &cfg)?;
            let mut record = trained.record.clone();
            record.seed = seed;
            fs::create_dir_all(&out)?;
            let stem = out.join(format!("{regime}-{seed}"));
            let obs_dim = build_dataset(&cfg.space)?.first().map_or(0, |o| o.observation.len());
            Checkpoint::from_trained(&trained, &cfg, obs_dim).save(&stem.with_extension("ckpt"))?;
            trained.protocol.save(&stem.with_extension("protocol"))?;
            let json = serde_json::to_string(&record)?;
            fs::write(stem.with_extension("json"), format!("{json}\n"))?;
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { regimes, config, seeds, jobs, out, max_seconds, format, set } => {
            let base = load_config(config.as_deref(), &parse_sets(&set)?)?;
            let regimes = regimes.split(',').map(|r| r.trim().parse::<Regime>()).collect::<Result<Vec<_>, _>>()?;
            if regimes.is_empty() || seeds == 0 {
                bail!(Error::Config("need at least one regime and one seed".into()));
            }
            let specs: Vec<ExperimentSpec> = regimes
                .into_iter()
                .map(|regime| ExperimentSpec {
                    config: base.clone(),
                    regime,
                    seeds: (0..seeds).collect(),
                    out_dir: Some(out.clone()),
                })
                .collect();
            let report = run_sweep(&specs, SweepOptions { jobs, max_seconds })?;
            for (f, ext) in [(ReportFormat::Markdown, "md"), (ReportFormat::Csv, "csv"), (ReportFormat::Json, "json")] {
                fs::write(out.join(format!("report.{ext}")), render_report(&report, f))?;
            }
            let shown = match format {
                ReportArg::Markdown => ReportFormat::Markdown,
                ReportArg::Csv => ReportFormat::Csv,
                ReportArg::Json => ReportFormat::Json,
            };
            print!("{}", render_report(&report, shown));
            for f in &report.failures {
                eprintln!("{} seed {} failed: {}", f.regime, f.seed, f.error);
            }
            Ok(if report.is_partial() { ExitCode::from(4) } else { ExitCode::SUCCESS })
        }
        Command::DumpProtocol { checkpoint, format, config } => {
            let (ck, space) = load_checkpoint(&checkpoint, config.as_deref())?;
            let protocol = extract_protocol(&*ck.agents.speaker()?, &space)?;
            let format = match format {
                TableArg::Csv => TableFormat::Csv,
                TableArg::Text => TableFormat::Text,
            };
            print!("{}", render_protocol_table(&protocol, &space, format));
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { protocol } => {
            let p = TrainedProtocol::load(&protocol).with_context(|| format!("reading {}", protocol.display()))?;
            let topo = topographic_similarity(&p)?;
            println!("topo {:.4}{}", topo.rho, if topo.degenerate { " (degenerate)" } else { "" });
            println!("ci {:.4}", context_independence(&p));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { checkpoint, config } => {
            let (ck, space) = load_checkpoint(&checkpoint, config.as_deref())?;
            let split = diagonal_split(&build_dataset(&space)?, &space);
            let z = zero_shot_eval(&*ck.agents.speaker()?, ck.agents.listener(), &split)?;
            println!("train_both {:.4}", z.train_both());
            println!("test_both {:.4}", z.test_both());
            println!("test_avg {:.4}", z.test_avg());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                Some(Error::Numerics(_)) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
