//! Fitts and end-point analyses over a run directory, written as CSV.
//!
//! Works on simulated runs (`trajectories.jsonl`) and on ingested human
//! data (`human.jsonl`). Timeouts and incomplete trials are left out of the
//! regression and the end-point statistics and counted separately; the
//! remaining trials go through the 3 SD movement-time outlier filter.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use aifpoint_core::experiment::{
    endpoint_stats, fitts_fit, fitts_fit_means, movement_time, outlier_mask, peak_velocity,
    target_by_id, Endpoint, EndpointStats, FittsFit,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{read_human_log, HumanTrial, HUMAN_FORMAT};
use crate::log::{read_log, LoggedTrial};
use crate::runner::TRAJECTORY_FILE;

pub const HUMAN_FILE: &str = "human.jsonl";

/// Per-trial quantities shared by simulated and human data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub target_id: u32,
    pub id_bits: f64,
    pub width: f64,
    pub mt_s: Option<f64>,
    pub endpoint_px: Option<f64>,
    pub misclicks: usize,
    pub peak_velocity_px_s: f64,
}

/// Cursor position over time, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub trial: usize,
    pub target_id: u32,
    pub t_s: f64,
    pub x_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub source: Source,
    pub trials: Vec<TrialSummary>,
    pub traces: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Agent,
    Human,
}

pub fn from_agent(trials: &[LoggedTrial]) -> Dataset {
    let mut summaries = Vec::with_capacity(trials.len());
    let mut traces = Vec::new();
    for t in trials {
        let r = &t.record;
        let target = target_by_id(t.target_id);
        summaries.push(TrialSummary {
            trial: t.index,
            target_id: t.target_id,
            id_bits: target.map_or(f64::NAN, |g| g.id_bits),
            width: r.task.width,
            mt_s: movement_time(r),
            endpoint_px: r.endpoint_px(),
            misclicks: r.misclicks,
            peak_velocity_px_s: peak_velocity(r) * r.task.scale,
        });
        traces.push(TracePoint {
            trial: t.index,
            target_id: t.target_id,
            t_s: 0.0,
            x_px: r.task.to_pixels(r.initial_state.position),
        });
        traces.extend(r.steps.iter().map(|s| TracePoint {
            trial: t.index,
            target_id: t.target_id,
            t_s: s.step as f64 * r.dt,
            x_px: r.task.to_pixels(s.state.position),
        }));
    }
    Dataset {
        source: Source::Agent,
        trials: summaries,
        traces,
    }
}

pub fn from_human(trials: &[HumanTrial], dt: f64) -> Dataset {
    let mut summaries = Vec::with_capacity(trials.len());
    let mut traces = Vec::new();
    for t in trials {
        let target = t.target();
        summaries.push(TrialSummary {
            trial: t.index,
            target_id: t.target_id,
            id_bits: target.id_bits,
            width: target.width,
            mt_s: t.movement_time(),
            endpoint_px: t.endpoint_px(),
            misclicks: t.misclicks(),
            peak_velocity_px_s: t.peak_velocity(dt),
        });
        traces.extend(t.resample(dt).into_iter().map(|(t_s, x_px)| TracePoint {
            trial: t.index,
            target_id: t.target_id,
            t_s,
            x_px,
        }));
    }
    Dataset {
        source: Source::Human,
        trials: summaries,
        traces,
    }
}

/// Load the log in a run directory (or a log file given directly); the
/// header's `format` field decides between simulated and human data.
pub fn load_dataset(path: &Path, dt: f64) -> Result<Dataset> {
    let file = if path.is_dir() {
        [TRAJECTORY_FILE, HUMAN_FILE]
            .iter()
            .map(|f| path.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                let msg = format!("no {TRAJECTORY_FILE} or {HUMAN_FILE} in the directory");
                Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, msg))
            })?
    } else {
        path.to_path_buf()
    };
    let first = BufReader::new(File::open(&file).map_err(|e| Error::io(&file, e))?)
        .lines()
        .next()
        .transpose()
        .map_err(|e| Error::io(&file, e))?
        .unwrap_or_default();
    let format = serde_json::from_str::<serde_json::Value>(&first)
        .ok()
        .and_then(|v| v.get("format").and_then(|f| f.as_str()).map(str::to_string));
    if format.as_deref() == Some(HUMAN_FORMAT) {
        Ok(from_human(&read_human_log(&file)?.1, dt))
    } else {
        Ok(from_agent(&read_log(&file)?.trials))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Completed trials that survived the outlier filter.
    pub kept: Vec<TrialSummary>,
    pub completed: usize,
    pub incomplete: usize,
    pub fit: Option<FittsFit>,
    pub fit_means: Option<FittsFit>,
    pub endpoints: EndpointStats,
    pub misclicks: usize,
}

pub fn analyze(data: &Dataset) -> Analysis {
    let done: Vec<&TrialSummary> = data.trials.iter().filter(|t| t.mt_s.is_some()).collect();
    let mts: Vec<f64> = done.iter().map(|t| t.mt_s.unwrap()).collect();
    let kept: Vec<TrialSummary> = done
        .iter()
        .zip(outlier_mask(&mts))
        .filter(|(_, k)| *k)
        .map(|(t, _)| (*t).clone())
        .collect();
    let points: Vec<(f64, f64)> = kept.iter().map(|t| (t.id_bits, t.mt_s.unwrap())).collect();
    let ends: Vec<Endpoint> = kept
        .iter()
        .map(|t| Endpoint {
            target_id: t.target_id,
            width: t.width,
            position: t.endpoint_px.unwrap(),
        })
        .collect();
    Analysis {
        completed: done.len(),
        incomplete: data.trials.len() - done.len(),
        fit: fitts_fit(&points).ok(),
        fit_means: fitts_fit_means(&points).ok(),
        endpoints: endpoint_stats(&ends),
        misclicks: data.trials.iter().map(|t| t.misclicks).sum(),
        kept,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Write fitts.csv, fitts_fit.csv, endpoints.csv, endpoint_summary.csv,
/// trials.csv and trajectories.csv into `out`.
pub fn write_analysis(out: &Path, data: &Dataset, a: &Analysis) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let p = out.join("fitts.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["trial", "id_bits", "mt_s"])?;
    for t in &a.kept {
        w.write_record([t.trial.to_string(), t.id_bits.to_string(), opt(t.mt_s)])?;
    }
    finish(w, &p)?;

    let p = out.join("fitts_fit.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["mode", "a_s", "b_s_per_bit", "r2", "n"])?;
    for (mode, fit) in [("trials", a.fit), ("target_means", a.fit_means)] {
        match fit {
            Some(f) => w.write_record([mode.into(), f.a.to_string(), f.b.to_string(), f.r2.to_string(), f.n.to_string()])?,
            None => w.write_record([mode, "", "", "", "0"])?,
        }
    }
    finish(w, &p)?;

    let p = out.join("endpoints.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["trial", "target_id", "width_px", "target_px", "endpoint_px", "offset_px"])?;
    for t in &a.kept {
        let target = target_by_id(t.target_id).map_or(f64::NAN, |g| g.position);
        let e = t.endpoint_px.unwrap();
        w.write_record([
            t.trial.to_string(),
            t.target_id.to_string(),
            t.width.to_string(),
            target.to_string(),
            e.to_string(),
            (e - target).to_string(),
        ])?;
    }
    finish(w, &p)?;

    let p = out.join("endpoint_summary.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["group", "key", "width_px", "n", "mean_px", "std_px"])?;
    for t in &a.endpoints.per_target {
        w.write_record([
            "target".into(),
            t.target_id.to_string(),
            t.width.to_string(),
            t.n.to_string(),
            t.mean.to_string(),
            t.std.to_string(),
        ])?;
    }
    for (width, std) in &a.endpoints.per_width {
        let n: usize = a.endpoints.per_target.iter().filter(|t| t.width == *width).map(|t| t.n).sum();
        w.write_record(["width".into(), width.to_string(), width.to_string(), n.to_string(), String::new(), std.to_string()])?;
    }
    finish(w, &p)?;

    let p = out.join("trials.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["trial", "target_id", "id_bits", "width_px", "mt_s", "endpoint_px", "misclicks", "peak_velocity_px_s"])?;
    for t in &data.trials {
        w.write_record([
            t.trial.to_string(),
            t.target_id.to_string(),
            t.id_bits.to_string(),
            t.width.to_string(),
            opt(t.mt_s),
            opt(t.endpoint_px),
            t.misclicks.to_string(),
            t.peak_velocity_px_s.to_string(),
        ])?;
    }
    finish(w, &p)?;

    let p = out.join("trajectories.csv");
    let mut w = csv_writer(&p)?;
    w.write_record(["trial", "target_id", "t_s", "x_px"])?;
    for s in &data.traces {
        w.write_record([s.trial.to_string(), s.target_id.to_string(), s.t_s.to_string(), s.x_px.to_string()])?;
    }
    finish(w, &p)
}

/// One row per metric, side by side for the agent and the human data.
pub fn write_comparison(path: &Path, agent: &Analysis, human: &Analysis) -> Result<()> {
    let mut rows: Vec<(String, Option<f64>, Option<f64>)> = vec![
        ("fitts_a_s".into(), agent.fit.map(|f| f.a), human.fit.map(|f| f.a)),
        ("fitts_b_s_per_bit".into(), agent.fit.map(|f| f.b), human.fit.map(|f| f.b)),
        ("fitts_r2".into(), agent.fit.map(|f| f.r2), human.fit.map(|f| f.r2)),
        ("completed".into(), Some(agent.completed as f64), Some(human.completed as f64)),
        ("incomplete".into(), Some(agent.incomplete as f64), Some(human.incomplete as f64)),
        ("misclicks".into(), Some(agent.misclicks as f64), Some(human.misclicks as f64)),
    ];
    let mut widths: Vec<f64> = agent
        .endpoints
        .per_width
        .iter()
        .chain(&human.endpoints.per_width)
        .map(|x| x.0)
        .collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    for w in widths {
        rows.push((
            format!("endpoint_std_px_w{w}"),
            agent.endpoints.width_std(w),
            human.endpoints.width_std(w),
        ));
    }
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "agent", "human", "difference"])?;
    for (name, a, h) in rows {
        let diff = a.zip(h).map(|(a, h)| a - h);
        w.write_record([name, opt(a), opt(h), opt(diff)])?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ingest_str;

    #[test]
    fn human_dataset_feeds_the_same_analysis() {
        let text = "# aifpoint-recorder v1\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n\
                    p,4,0,start,900,0,\np,4,300,click,1125,0,1\n\
                    p,4,1000,start,900,0,\np,4,1200,click,1100,0,0\np,4,1500,click,1130,0,1\n\
                    p,1,2000,start,900,0,\np,1,2100,move,800,0,\n";
        let ing = ingest_str(text).unwrap();
        let data = from_human(&ing.trials, 0.02);
        let a = analyze(&data);
        assert_eq!(a.completed, 2);
        assert_eq!(a.incomplete, 1);
        assert_eq!(a.misclicks, 1);
        assert_eq!(a.endpoints.per_target.len(), 1);
        assert!((a.endpoints.per_target[0].std - 2.5).abs() < 1e-12);
        // two points at the same ID: no slope to fit
        assert!(a.fit.is_none() || a.fit.unwrap().b.is_finite());
        assert!(data.traces.iter().any(|p| p.trial == 2 && p.x_px == 800.0));
    }
}
