//! Trajectory logs: line-delimited JSON.
//!
//! ```text
//! {"kind":"header","format":"aifpoint-trajectory","version":"1.0",...}
//! {"kind":"trial","trial":0,"target_id":1,...,"steps":37}
//! {"kind":"step","trial":0,"step":1,"time_s":0.02,...}
//! ...
//! ```
//!
//! Each trial line is followed by exactly `steps` step lines, numbered
//! from one. Floats are written in shortest round-trip form, so reading a
//! log gives back bit-identical records. Step lines also carry derived columns (time,
//! pixel coordinates, belief standard deviations) for plotting; readers
//! ignore them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use aifpoint_core::agent::{
    ClickEvent, Event, Outcome, StepRecord, TrialRecord,
};
use aifpoint_core::belief::ViStatus;
use aifpoint_core::dynamics::{Action, Observation, State, SystemParams, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "aifpoint-trajectory";
pub const VERSION_MAJOR: u32 = 1;
pub const VERSION_MINOR: u32 = 0;

/// A trial with its place in the run grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedTrial {
    pub index: usize,
    pub target_id: u32,
    pub rep: u32,
    pub record: TrialRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: String,
    /// Free-form provenance (resolved configuration, sweep value, ...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Header {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            format: FORMAT.into(),
            version: format!("{VERSION_MAJOR}.{VERSION_MINOR}"),
            meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: Header,
    pub trials: Vec<LoggedTrial>,
}

#[derive(Serialize, Deserialize)]
struct TrialLine {
    trial: usize,
    target_id: u32,
    rep: u32,
    seed: u64,
    task: TaskSpec,
    params: SystemParams,
    dt: f64,
    delay: usize,
    initial_state: State,
    outcome: Outcome,
    clicks: Vec<ClickEvent>,
    misclicks: usize,
    diagnostics: Vec<String>,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
struct StepLine {
    trial: usize,
    step: usize,
    #[serde(default, skip_deserializing)]
    time_s: f64,
    state: State,
    #[serde(default, skip_deserializing)]
    position_px: f64,
    #[serde(default, skip_deserializing)]
    velocity_px: f64,
    action: Action,
    observation: Option<Observation>,
    belief_mean: [f64; 4],
    #[serde(default, skip_deserializing)]
    belief_std: [f64; 4],
    belief_cov: [f64; 16],
    compensated_mean: [f64; 4],
    compensated_cov: [f64; 16],
    vi_status: Option<ViStatus>,
    event: Event,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(Header),
    Trial(Box<TrialLine>),
    Step(Box<StepLine>),
}

fn diag_std(cov: &[f64; 16]) -> [f64; 4] {
    [0, 5, 10, 15].map(|i| cov[i].max(0.0).sqrt())
}

pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, header: &Header) -> std::io::Result<Self> {
        write_line(&mut out, &Line::Header(header.clone()))?;
        Ok(Self { out })
    }

    pub fn write_trial(&mut self, t: &LoggedTrial) -> std::io::Result<()> {
        let r = &t.record;
        let line = TrialLine {
            trial: t.index,
            target_id: t.target_id,
            rep: t.rep,
            seed: r.seed,
            task: r.task,
            params: r.params,
            dt: r.dt,
            delay: r.delay,
            initial_state: r.initial_state,
            outcome: r.outcome,
            clicks: r.clicks.clone(),
            misclicks: r.misclicks,
            diagnostics: r.diagnostics.clone(),
            steps: r.steps.len(),
        };
        write_line(&mut self.out, &Line::Trial(Box::new(line)))?;
        for s in &r.steps {
            let line = StepLine {
                trial: t.index,
                step: s.step,
                time_s: s.step as f64 * r.dt,
                state: s.state,
                position_px: r.task.to_pixels(s.state.position),
                velocity_px: s.state.velocity * r.task.scale,
                action: s.action,
                observation: s.observation,
                belief_mean: s.belief_mean,
                belief_std: diag_std(&s.belief_cov),
                belief_cov: s.belief_cov,
                compensated_mean: s.compensated_mean,
                compensated_cov: s.compensated_cov,
                vi_status: s.vi_status,
                event: s.event,
            };
            write_line(&mut self.out, &Line::Step(Box::new(line)))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line<W: Write>(out: &mut W, line: &Line) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, line)?;
    out.write_all(b"\n")
}

pub fn write_log(path: &Path, header: &Header, trials: &[LoggedTrial]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = LogWriter::new(BufWriter::new(file), header).map_err(|e| Error::io(path, e))?;
    for t in trials {
        w.write_trial(t).map_err(|e| Error::io(path, e))?;
    }
    w.finish().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<TrajectoryLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_log_from(BufReader::new(file)).map_err(|e| match e {
        Error::Malformed { line, message } => Error::Malformed {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn check_version(h: &Header, line: usize) -> Result<()> {
    if h.format != FORMAT {
        return Err(Error::malformed(line, format!("not a trajectory log (format '{}')", h.format)));
    }
    let (major, minor) = h
        .version
        .split_once('.')
        .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<u32>().ok()?)))
        .ok_or_else(|| Error::malformed(line, format!("bad version '{}'", h.version)))?;
    let _ = minor;
    if major != VERSION_MAJOR {
        return Err(Error::Version {
            found: h.version.clone(),
            supported: format!("{VERSION_MAJOR}.x"),
        });
    }
    Ok(())
}

pub fn read_log_from<R: BufRead>(reader: R) -> Result<TrajectoryLog> {
    let mut header: Option<Header> = None;
    let mut trials: Vec<LoggedTrial> = Vec::new();
    // Step lines still owed to the last trial.
    let mut pending = 0usize;
    let mut last_line = 0;
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let text = line.map_err(|e| Error::malformed(n, e.to_string()))?;
        if text.trim().is_empty() {
            return Err(Error::malformed(n, "empty line"));
        }
        let parsed: Line =
            serde_json::from_str(&text).map_err(|e| Error::malformed(n, e.to_string()))?;
        match parsed {
            Line::Header(h) => {
                if n != 1 {
                    return Err(Error::malformed(n, "header must be the first line"));
                }
                check_version(&h, n)?;
                header = Some(h);
            }
            _ if header.is_none() => return Err(Error::malformed(n, "missing header")),
            Line::Trial(t) => {
                if pending != 0 {
                    return Err(Error::malformed(n, format!("previous trial is missing {pending} step lines")));
                }
                if t.trial != trials.len() {
                    return Err(Error::malformed(
                        n,
                        format!("trial {} out of order (expected {})", t.trial, trials.len()),
                    ));
                }
                pending = t.steps;
                trials.push(LoggedTrial {
                    index: t.trial,
                    target_id: t.target_id,
                    rep: t.rep,
                    record: TrialRecord {
                        seed: t.seed,
                        task: t.task,
                        params: t.params,
                        dt: t.dt,
                        delay: t.delay,
                        initial_state: t.initial_state,
                        steps: Vec::with_capacity(t.steps),
                        outcome: t.outcome,
                        clicks: t.clicks,
                        misclicks: t.misclicks,
                        diagnostics: t.diagnostics,
                    },
                });
            }
            Line::Step(s) => {
                let Some(current) = trials.last_mut() else {
                    return Err(Error::malformed(n, "step line before any trial line"));
                };
                if pending == 0 {
                    return Err(Error::malformed(n, "more step lines than the trial declares"));
                }
                let expected = current.record.steps.len() + 1;
                if s.trial != current.index || s.step != expected {
                    return Err(Error::malformed(
                        n,
                        format!(
                            "step {} of trial {} out of order (expected step {expected} of trial {})",
                            s.step, s.trial, current.index
                        ),
                    ));
                }
                pending -= 1;
                current.record.steps.push(StepRecord {
                    step: s.step,
                    state: s.state,
                    action: s.action,
                    observation: s.observation,
                    belief_mean: s.belief_mean,
                    belief_cov: s.belief_cov,
                    compensated_mean: s.compensated_mean,
                    compensated_cov: s.compensated_cov,
                    vi_status: s.vi_status,
                    event: s.event,
                });
            }
        }
    }
    let header = header.ok_or_else(|| Error::malformed(1, "empty file (no header)"))?;
    if pending != 0 {
        return Err(Error::malformed(last_line, format!("last trial is missing {pending} step lines")));
    }
    Ok(TrajectoryLog { header, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_log_is_readable() {
        let mut buf = Vec::new();
        LogWriter::new(&mut buf, &Header::new(serde_json::json!({"note": "empty"})))
            .unwrap()
            .finish()
            .unwrap();
        let log = read_log_from(buf.as_slice()).unwrap();
        assert!(log.trials.is_empty());
        assert_eq!(log.header.meta["note"], "empty");
    }

    #[test]
    fn newer_major_is_rejected() {
        let text = r#"{"kind":"header","format":"aifpoint-trajectory","version":"2.0","meta":null}"#;
        assert!(matches!(read_log_from(text.as_bytes()), Err(Error::Version { .. })));
        let minor = r#"{"kind":"header","format":"aifpoint-trajectory","version":"1.7","meta":null}"#;
        assert!(read_log_from(minor.as_bytes()).is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "{\"kind\":\"header\",\"format\":\"aifpoint-trajectory\",\"version\":\"1.0\"}\n{not json}\n";
        match read_log_from(text.as_bytes()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let stray = "{\"kind\":\"header\",\"format\":\"aifpoint-trajectory\",\"version\":\"1.0\"}\n{\"kind\":\"step\"}\n";
        assert!(matches!(read_log_from(stray.as_bytes()), Err(Error::Malformed { line: 2, .. })));
        assert!(read_log_from("".as_bytes()).is_err());
    }
}
