//! Human recorder exports.
//!
//! The export is a CSV file whose first line is the version tag, optionally
//! followed by `# key=value ...` metadata lines, then a header row and one
//! row per pointer event:
//!
//! ```text
//! # aifpoint-recorder v1
//! # session=2026-03-01T10:00:00Z config_hash=9f2c seed=7
//! participant,target_id,t_ms,event,x_px,y_px,correct
//! p01,4,1000.0,start,900,400,
//! p01,4,1016.7,move,903,400,
//! p01,4,1410.2,click,1122,401,1
//! ```
//!
//! A `start` row opens a trial for its target; `move` and `click` rows belong
//! to the open trial. A click with `correct=0` is a misclick and the trial
//! continues; `correct=1` ends it. Bad rows are skipped and reported with
//! their line number; the rest of the file is still read. The full schema is
//! in `docs/recorder-format.md`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use aifpoint_core::dynamics::TaskSpec;
use aifpoint_core::experiment::{target_by_id, TargetSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECORDER_TAG: &str = "# aifpoint-recorder v";
pub const RECORDER_VERSION: u32 = 1;
pub const COLUMNS: [&str; 7] = ["participant", "target_id", "t_ms", "event", "x_px", "y_px", "correct"];

pub const HUMAN_FORMAT: &str = "aifpoint-human";
pub const HUMAN_VERSION: &str = "1.0";

/// Cursor position, time relative to the trial's start click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanClick {
    pub t_ms: f64,
    pub x_px: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanTrial {
    pub index: usize,
    pub participant: String,
    pub target_id: u32,
    /// Recorder clock at the start click, ms.
    pub start_ms: f64,
    /// Start, move and click positions in time order.
    pub samples: Vec<HumanSample>,
    pub clicks: Vec<HumanClick>,
    /// Ended with a correct click.
    pub completed: bool,
}

impl HumanTrial {
    pub fn target(&self) -> TargetSpec {
        target_by_id(self.target_id).expect("target ids are validated on ingest")
    }

    pub fn misclicks(&self) -> usize {
        self.clicks.iter().filter(|c| !c.correct).count()
    }

    /// Seconds from the start click to the correct click.
    pub fn movement_time(&self) -> Option<f64> {
        self.clicks.iter().find(|c| c.correct).map(|c| c.t_ms / 1000.0)
    }

    pub fn endpoint_px(&self) -> Option<f64> {
        self.clicks.iter().find(|c| c.correct).map(|c| c.x_px)
    }

    /// Linear interpolation of the cursor trace onto `0, dt, 2 dt, ...`,
    /// closed by the last sample itself. Times in seconds, positions in px.
    pub fn resample(&self, dt: f64) -> Vec<(f64, f64)> {
        resample(&self.samples, dt)
    }

    /// Largest absolute velocity between consecutive resampled points, px/s.
    pub fn peak_velocity(&self, dt: f64) -> f64 {
        self.resample(dt)
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn resample(samples: &[HumanSample], dt: f64) -> Vec<(f64, f64)> {
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Vec::new();
    };
    let t0 = first.t_ms / 1000.0;
    let t_end = last.t_ms / 1000.0;
    let mut out = vec![(t0, first.x_px)];
    let mut j = 0;
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * dt;
        // Skip grid points that would land within rounding of the end.
        if t >= t_end - 1e-9 {
            break;
        }
        while samples[j + 1].t_ms / 1000.0 < t {
            j += 1;
        }
        let (a, b) = (&samples[j], &samples[j + 1]);
        let (ta, tb) = (a.t_ms / 1000.0, b.t_ms / 1000.0);
        let u = (t - ta) / (tb - ta);
        out.push((t, a.x_px + u * (b.x_px - a.x_px)));
        k += 1;
    }
    if samples.len() > 1 {
        out.push((t_end, last.x_px));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    pub meta: BTreeMap<String, String>,
    pub trials: Vec<HumanTrial>,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Deserialize)]
struct Row {
    participant: String,
    target_id: String,
    t_ms: String,
    event: String,
    x_px: String,
    y_px: String,
    correct: String,
}

pub fn ingest_human(path: &Path) -> Result<Ingested> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    ingest_str(&text)
}

fn parse_num(name: &str, v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("{name} '{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{name} is not finite"))
    }
}

struct Open {
    trial: HumanTrial,
    last_ms: f64,
}

pub fn ingest_str(text: &str) -> Result<Ingested> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::malformed(1, "empty export"))?;
    let version = first
        .trim_end()
        .strip_prefix(RECORDER_TAG)
        .ok_or_else(|| Error::malformed(1, format!("expected '{RECORDER_TAG}{RECORDER_VERSION}'")))?;
    let major: u32 = version
        .split('.')
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::malformed(1, format!("bad recorder version '{version}'")))?;
    if major != RECORDER_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            supported: RECORDER_VERSION.to_string(),
        });
    }
    let mut out = Ingested::default();
    for line in lines.clone() {
        let Some(rest) = line.strip_prefix('#') else { break };
        for kv in rest.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                out.meta.insert(k.to_string(), v.to_string());
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != COLUMNS {
        let line = headers.position().map_or(2, |p| p.line() as usize);
        return Err(Error::malformed(line, format!("expected columns {}", COLUMNS.join(","))));
    }

    let mut open: Option<Open> = None;
    let mut finished: Vec<HumanTrial> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row: Row = rec.deserialize(Some(&headers))?;
        if let Err(reason) = accept_row(&row, &mut open, &mut finished) {
            out.rejected.push(RejectedRow { line, reason });
        }
    }
    if let Some(o) = open.take() {
        finished.push(o.trial);
    }
    for (i, t) in finished.iter_mut().enumerate() {
        t.index = i;
    }
    out.trials = finished;
    Ok(out)
}

fn accept_row(
    row: &Row,
    open: &mut Option<Open>,
    finished: &mut Vec<HumanTrial>,
) -> std::result::Result<(), String> {
    let target_id: u32 = row
        .target_id
        .parse()
        .map_err(|_| format!("target id '{}' is not an integer", row.target_id))?;
    let target = target_by_id(target_id).ok_or_else(|| format!("unknown target id {target_id}"))?;
    let t_ms = parse_num("t_ms", &row.t_ms)?;
    let x = parse_num("x_px", &row.x_px)?;
    let y = if row.y_px.is_empty() { 0.0 } else { parse_num("y_px", &row.y_px)? };
    if !(0.0..=TaskSpec::CANVAS_WIDTH).contains(&x) {
        return Err(format!("x_px {x} outside the canvas"));
    }
    match row.event.as_str() {
        "start" => {
            if !row.correct.is_empty() {
                return Err("start row with a correctness flag".into());
            }
            if let Some(prev) = open.as_ref() {
                if t_ms <= prev.last_ms && prev.trial.participant == row.participant {
                    return Err(format!("timestamp {t_ms} not after {}", prev.last_ms));
                }
            }
            if let Some(o) = open.take() {
                finished.push(o.trial);
            }
            *open = Some(Open {
                trial: HumanTrial {
                    index: 0,
                    participant: row.participant.clone(),
                    target_id,
                    start_ms: t_ms,
                    samples: vec![HumanSample { t_ms: 0.0, x_px: x, y_px: y }],
                    clicks: Vec::new(),
                    completed: false,
                },
                last_ms: t_ms,
            });
            Ok(())
        }
        "move" | "click" => {
            let o = open.as_mut().ok_or("event outside a trial (no start row)")?;
            if o.trial.completed {
                return Err("event after the trial's correct click".into());
            }
            if row.participant != o.trial.participant {
                return Err(format!("participant '{}' differs from the open trial", row.participant));
            }
            if target_id != o.trial.target_id {
                return Err(format!("target id {target_id} differs from the open trial ({})", o.trial.target_id));
            }
            if t_ms <= o.last_ms {
                return Err(format!("timestamp {t_ms} not after {}", o.last_ms));
            }
            let rel = t_ms - o.trial.start_ms;
            if row.event == "click" {
                let correct = match row.correct.as_str() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => return Err(format!("bad correctness flag '{other}'")),
                };
                let inside = (x - target.position).abs() <= target.width / 2.0;
                if inside != correct {
                    return Err(format!(
                        "click at {x} px flagged correct={correct} but target {target_id} spans {}..{}",
                        target.position - target.width / 2.0,
                        target.position + target.width / 2.0
                    ));
                }
                o.trial.clicks.push(HumanClick { t_ms: rel, x_px: x, correct });
                o.trial.completed = correct;
            } else if !row.correct.is_empty() {
                return Err("move row with a correctness flag".into());
            }
            o.trial.samples.push(HumanSample { t_ms: rel, x_px: x, y_px: y });
            o.last_ms = t_ms;
            Ok(())
        }
        other => Err(format!("unknown event '{other}'")),
    }
}

#[derive(Serialize, Deserialize)]
struct HumanHeader {
    format: String,
    version: String,
    meta: BTreeMap<String, String>,
}

/// Canonical form of ingested trials: a header line, then one JSON object
/// per trial.
pub fn write_human_log(path: &Path, data: &Ingested) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let header = HumanHeader {
        format: HUMAN_FORMAT.into(),
        version: HUMAN_VERSION.into(),
        meta: data.meta.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for t in &data.trials {
        serde_json::to_writer(&mut w, t).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_human_log(path: &Path) -> Result<(BTreeMap<String, String>, Vec<HumanTrial>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::malformed(1, "empty file (no header)"))?
        .map_err(|e| Error::io(path, e))?;
    let header: HumanHeader =
        serde_json::from_str(&first).map_err(|e| Error::malformed(1, e.to_string()))?;
    if header.format != HUMAN_FORMAT {
        return Err(Error::malformed(1, format!("not a human trial log (format '{}')", header.format)));
    }
    if header.version.split('.').next() != HUMAN_VERSION.split('.').next() {
        return Err(Error::Version {
            found: header.version,
            supported: HUMAN_VERSION.into(),
        });
    }
    let mut trials = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t: HumanTrial =
            serde_json::from_str(&line).map_err(|e| Error::malformed(i + 2, e.to_string()))?;
        if target_by_id(t.target_id).is_none() {
            return Err(Error::malformed(i + 2, format!("unknown target id {}", t.target_id)));
        }
        trials.push(t);
    }
    Ok((header.meta, trials))
}

pub fn write_rejected(path: &Path, rejected: &[RejectedRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["line", "reason"])?;
    for r in rejected {
        w.write_record([r.line.to_string(), r.reason.clone()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "# aifpoint-recorder v1\n# session=s1 config_hash=abc\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n";

    #[test]
    fn two_trials_split_at_start() {
        let text = format!(
            "{HEAD}p1,4,0,start,900,400,\np1,4,100,move,1000,400,\np1,4,300,click,1125,400,1\n\
             p1,1,1000,start,900,400,\np1,1,1200,move,700,400,\np1,1,1400,click,675,400,1\n"
        );
        let got = ingest_str(&text).unwrap();
        assert!(got.rejected.is_empty(), "{:?}", got.rejected);
        assert_eq!(got.trials.len(), 2);
        assert_eq!(got.meta["config_hash"], "abc");
        assert_eq!(got.trials[0].movement_time(), Some(0.3));
        assert_eq!(got.trials[1].target_id, 1);
        assert_eq!(got.trials[1].index, 1);
        assert_eq!(got.trials[1].samples[0].t_ms, 0.0);
    }

    #[test]
    fn misclick_keeps_trial_open() {
        let text = format!(
            "{HEAD}p1,4,0,start,900,400,\np1,4,200,click,1090,400,0\np1,4,260,move,1120,400,\np1,4,300,click,1126,400,1\n"
        );
        let got = ingest_str(&text).unwrap();
        assert!(got.rejected.is_empty());
        let t = &got.trials[0];
        assert_eq!(t.misclicks(), 1);
        assert!(t.completed);
        assert_eq!(t.endpoint_px(), Some(1126.0));
        assert_eq!(t.samples.len(), 4);
    }

    #[test]
    fn bad_rows_are_reported_with_lines() {
        let text = format!(
            "{HEAD}p1,4,0,start,900,400,\np1,99,10,move,950,400,\np1,4,0,move,950,400,\n\
             p1,4,20,move,1900,400,\np1,4,30,click,1000,400,1\np1,4,40,wiggle,1000,400,\n"
        );
        let got = ingest_str(&text).unwrap();
        let lines: Vec<usize> = got.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![5, 6, 7, 8, 9]);
        assert!(got.rejected[0].reason.contains("unknown target"));
        assert!(got.rejected[1].reason.contains("not after"));
        assert!(got.rejected[2].reason.contains("canvas"));
        assert!(got.rejected[3].reason.contains("correct"));
        assert_eq!(got.trials.len(), 1);
        assert!(!got.trials[0].completed);
    }

    #[test]
    fn version_and_header_are_checked() {
        assert!(matches!(
            ingest_str("# aifpoint-recorder v2\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n"),
            Err(Error::Version { .. })
        ));
        assert!(ingest_str("participant,target_id\n").is_err());
        assert!(ingest_str("# aifpoint-recorder v1\na,b,c\n").is_err());
    }

    #[test]
    fn resample_keeps_endpoints() {
        let s = [
            HumanSample { t_ms: 0.0, x_px: 900.0, y_px: 0.0 },
            HumanSample { t_ms: 33.0, x_px: 930.0, y_px: 0.0 },
            HumanSample { t_ms: 71.3, x_px: 1000.0, y_px: 0.0 },
        ];
        let r = resample(&s, 0.02);
        assert_eq!(r.first(), Some(&(0.0, 900.0)));
        assert_eq!(r.last(), Some(&(0.0713, 1000.0)));
        assert_eq!(r.len(), 5);
        assert!((r[1].1 - (900.0 + 30.0 * 20.0 / 33.0)).abs() < 1e-9);
        assert!(r.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
