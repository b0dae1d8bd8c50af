use std::path::PathBuf;
use std::process::ExitCode;

use aifpoint::analyze::{analyze, load_dataset, write_analysis, write_comparison, HUMAN_FILE};
use aifpoint::config::RunConfig;
use aifpoint::ingest::{ingest_human, write_human_log, write_rejected};
use aifpoint::runner;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aifpoint", version, about = "Active-inference pointing simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed (overrides the configuration file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `default` or a TOML file.
    #[arg(long, global = true, default_value = "default")]
    config: String,
    /// Output directory (for `compare`: the output file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repetitions per target (overrides the configuration file).
    #[arg(long, global = true)]
    reps: Option<u32>,
    /// Target ids to run (overrides the configuration file).
    #[arg(long, global = true, value_delimiter = ',')]
    targets: Option<Vec<u32>>,
    /// Configuration override, `name=value` with a sweep parameter name.
    #[arg(long = "set", global = true, value_name = "NAME=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the target grid and write trajectory logs.
    Simulate,
    /// Fitts and end-point tables from a run or ingest directory.
    Analyze {
        /// Directory (or log file) to analyse.
        input: PathBuf,
    },
    /// One run per value of a parameter.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Convert a recorder export into the canonical human log.
    Ingest {
        input: PathBuf,
    },
    /// Side-by-side summary of a simulated and a human data set.
    Compare {
        agent: PathBuf,
        human: PathBuf,
    },
}

fn run_config(g: &Global) -> anyhow::Result<RunConfig> {
    let mut run = RunConfig::load(&g.config)?;
    if let Some(seed) = g.seed {
        run.seed = seed;
    }
    if let Some(reps) = g.reps {
        run.reps = reps;
    }
    if let Some(ids) = &g.targets {
        run.targets = Some(ids.clone());
    }
    for kv in &g.set {
        let Some((name, value)) = kv.split_once('=') else {
            bail!("--set expects NAME=VALUE, got '{kv}'");
        };
        let value: f64 = value
            .parse()
            .with_context(|| format!("--set {name}: '{value}' is not a number"))?;
        run.set_parameter(name, value)?;
    }
    run.validate()?;
    Ok(run)
}

fn out_dir(g: &Global) -> anyhow::Result<PathBuf> {
    g.out.clone().context("--out is required for this command")
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate => {
            let run = run_config(g)?;
            let dir = out_dir(g)?;
            let out = runner::simulate(&run, g.jobs, &dir)?;
            let hits = out.trials.iter().filter(|t| t.record.hit_step().is_some()).count();
            eprintln!("{} trials ({hits} hits) written to {}", out.trials.len(), dir.display());
        }
        Command::Analyze { input } => {
            let run = run_config(g)?;
            let data = load_dataset(&input, run.system.dt)?;
            let a = analyze(&data);
            let dir = g.out.clone().unwrap_or_else(|| if input.is_dir() { input.clone() } else { PathBuf::from(".") });
            write_analysis(&dir, &data, &a)?;
            match a.fit {
                Some(f) => eprintln!(
                    "MT = {:.3} + {:.3} ID (r2 {:.2}, n {}), {} incomplete",
                    f.a, f.b, f.r2, f.n, a.incomplete
                ),
                None => eprintln!("not enough completed trials for a fit ({} incomplete)", a.incomplete),
            }
            for (w, s) in &a.endpoints.per_width {
                eprintln!("end-point std, width {w} px: {s:.2} px");
            }
        }
        Command::Sweep { param, values } => {
            let run = run_config(g)?;
            let dir = out_dir(g)?;
            let summaries = runner::sweep(&run, &param, &values, g.jobs, &dir)?;
            for s in &summaries {
                runner::report(std::io::stderr(), &param, s)?;
            }
        }
        Command::Ingest { input } => {
            let dir = out_dir(g)?;
            let data = ingest_human(&input)?;
            std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
            write_human_log(&dir.join(HUMAN_FILE), &data)?;
            write_rejected(&dir.join("rejected.csv"), &data.rejected)?;
            for r in data.rejected.iter().take(20) {
                eprintln!("{}:{}: {}", input.display(), r.line, r.reason);
            }
            eprintln!(
                "{} trials ingested, {} rows rejected",
                data.trials.len(),
                data.rejected.len()
            );
        }
        Command::Compare { agent, human } => {
            let run = run_config(g)?;
            let a = analyze(&load_dataset(&agent, run.system.dt)?);
            let h = analyze(&load_dataset(&human, run.system.dt)?);
            let path = match &g.out {
                Some(p) if p.is_dir() => p.join("comparison.csv"),
                Some(p) => p.clone(),
                None => PathBuf::from("comparison.csv"),
            };
            write_comparison(&path, &a, &h)?;
            eprintln!("comparison written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
