//! Batch execution: the trial grid on a rayon pool, results in grid order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aifpoint_core::agent::{run_trial, AgentConfig};
use aifpoint_core::experiment::{summarize, trial_grid, SweepSummary, TrialSpec};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::log::{write_log, Header, LoggedTrial};

pub const TRAJECTORY_FILE: &str = "trajectories.jsonl";
pub const TIMING_FILE: &str = "timing.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trials: Vec<LoggedTrial>,
    /// Wall-clock seconds per trial, grid order.
    pub wall_s: Vec<f64>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Run every cell of `grid`. `jobs = 0` uses one thread per CPU. The output
/// does not depend on `jobs`: each trial draws only from its own seed.
pub fn run_trials(grid: &[TrialSpec], cfg: &AgentConfig, jobs: usize) -> Result<RunOutput> {
    let results: Vec<_> = pool(jobs)?.install(|| {
        grid.par_iter()
            .map(|spec| {
                let start = Instant::now();
                let rec = run_trial(&spec.target.task(), cfg, spec.seed);
                (rec, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut trials = Vec::with_capacity(grid.len());
    let mut wall_s = Vec::with_capacity(grid.len());
    for (spec, (rec, secs)) in grid.iter().zip(results) {
        trials.push(LoggedTrial {
            index: spec.index,
            target_id: spec.target.id,
            rep: spec.rep,
            record: rec?,
        });
        wall_s.push(secs);
    }
    Ok(RunOutput { trials, wall_s })
}

pub fn run_config(run: &RunConfig, jobs: usize) -> Result<RunOutput> {
    let cfg = run.agent_config()?;
    let grid = trial_grid(&run.target_specs()?, run.reps, run.seed);
    run_trials(&grid, &cfg, jobs)
}

fn header_for(run: &RunConfig, extra: Option<(&str, f64)>) -> Header {
    let mut meta = serde_json::json!({ "config": run });
    if let Some((name, value)) = extra {
        meta["sweep"] = serde_json::json!({ "parameter": name, "value": value });
    }
    Header::new(meta)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write the log, the resolved configuration and the timing sidecar into
/// `dir`. Only the timing file varies between identical runs.
pub fn write_run(dir: &Path, run: &RunConfig, out: &RunOutput, sweep: Option<(&str, f64)>) -> Result<()> {
    create_dir(dir)?;
    write_log(&dir.join(TRAJECTORY_FILE), &header_for(run, sweep), &out.trials)?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, run.to_toml_string()).map_err(|e| Error::io(&cfg_path, e))?;
    let timing = dir.join(TIMING_FILE);
    let mut w = csv::Writer::from_path(&timing)?;
    w.write_record(["trial", "wall_s"])?;
    for (t, s) in out.trials.iter().zip(&out.wall_s) {
        w.write_record([t.index.to_string(), format!("{s:.6}")])?;
    }
    w.flush().map_err(|e| Error::io(&timing, e))
}

pub fn simulate(run: &RunConfig, jobs: usize, dir: &Path) -> Result<RunOutput> {
    let out = run_config(run, jobs)?;
    write_run(dir, run, &out, None)?;
    Ok(out)
}

/// Directory name of one sweep value, e.g. `damping=40`.
pub fn sweep_dir(root: &Path, name: &str, value: f64) -> PathBuf {
    root.join(format!("{name}={value}"))
}

/// One run per value of `name`, each written to its own directory, plus a
/// `sweep.csv` summary in `root`.
pub fn sweep(base: &RunConfig, name: &str, values: &[f64], jobs: usize, root: &Path) -> Result<Vec<SweepSummary>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    create_dir(root)?;
    let mut summaries = Vec::with_capacity(values.len());
    for &v in values {
        let mut run = base.clone();
        run.set_parameter(name, v)?;
        let out = run_config(&run, jobs)?;
        write_run(&sweep_dir(root, name, v), &run, &out, Some((name, v)))?;
        let records: Vec<_> = out.trials.into_iter().map(|t| t.record).collect();
        summaries.push(summarize(v, &records));
    }
    let path = root.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["parameter", "value", "trials", "hits", "median_mt_s", "mean_misclicks", "mean_peak_velocity_px_s"])?;
    for s in &summaries {
        w.write_record([
            name.to_string(),
            s.value.to_string(),
            s.trials.to_string(),
            s.hits.to_string(),
            s.median_mt.map_or(String::new(), |m| m.to_string()),
            s.mean_misclicks.to_string(),
            (s.mean_peak_velocity * aifpoint_core::dynamics::TaskSpec::SCALE).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(summaries)
}

/// Print one progress line per finished value (used by the CLI).
pub fn report<W: Write>(mut w: W, name: &str, s: &SweepSummary) -> std::io::Result<()> {
    writeln!(
        w,
        "{name}={}: {}/{} hits, median MT {}, misclicks/trial {:.2}",
        s.value,
        s.hits,
        s.trials,
        s.median_mt.map_or("-".into(), |m| format!("{m:.3} s")),
        s.mean_misclicks
    )
}
