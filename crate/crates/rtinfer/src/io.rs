//! On-disk formats: taskset JSON, trace and response CSVs, model JSON,
//! prediction CSV and cluster JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rtinfer_core::cluster::ClusterModel;
use rtinfer_core::inference::{AttackModel, PredictionRecord, TrainConfig};
use rtinfer_core::pst::{Pst, PstNodeRecord, Symbol};
use rtinfer_core::simulator::{JobRecord, Trace};
use rtinfer_core::taskmodel::{Mode, TaskSet, TaskSpec, Time};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TasksetFile {
    #[serde(default)]
    pub blocking: bool,
    pub tasks: Vec<TaskSpec>,
}

impl TasksetFile {
    pub fn of(ts: &TaskSet) -> Self {
        TasksetFile { blocking: ts.blocking_enabled(), tasks: ts.tasks().to_vec() }
    }

    pub fn into_taskset(self) -> Result<TaskSet> {
        Ok(TaskSet::new(self.tasks)?.with_blocking(self.blocking))
    }
}

pub fn parse_taskset(json: &str) -> Result<TaskSet> {
    let file: TasksetFile = serde_json::from_str(json).context("parsing taskset JSON")?;
    file.into_taskset()
}

pub fn read_taskset(path: &Path) -> Result<TaskSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_taskset(&text).with_context(|| format!("in {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct JobRow {
    task_id: u32,
    job_index: u64,
    release: Time,
    mode: Mode,
    exec_demand: Time,
    completion: Time,
    response: Time,
}

const TRACE_MAGIC: &str = "# rtinfer trace v1";

/// Trace CSV. A few `#` lines carry the horizon, seed and taskset so the
/// file can be used on its own; the rest is one row per job.
pub fn write_trace<W: Write>(w: W, tr: &Trace) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{TRACE_MAGIC}")?;
    writeln!(w, "# horizon={}", tr.horizon)?;
    writeln!(w, "# seed={}", tr.seed)?;
    writeln!(w, "# taskset={}", serde_json::to_string(&TasksetFile::of(&tr.taskset))?)?;
    let mut csv = csv::Writer::from_writer(w);
    for j in &tr.jobs {
        csv.serialize(JobRow {
            task_id: j.task_id,
            job_index: j.job_index,
            release: j.release,
            mode: j.mode,
            exec_demand: j.exec_demand,
            completion: j.completion,
            response: j.response,
        })?;
    }
    csv.flush()?;
    Ok(())
}

/// Read a trace written by [`write_trace`]. `taskset` overrides the embedded
/// one and is required when the header lacks it.
pub fn read_trace<R: Read>(r: R, taskset: Option<TaskSet>) -> Result<Trace> {
    read_trace_with(r, taskset, None)
}

/// Like [`read_trace`] without an override: the embedded taskset wins and
/// `fallback` is used only for header-less files.
pub fn read_trace_or<R: Read>(r: R, fallback: TaskSet) -> Result<Trace> {
    read_trace_with(r, None, Some(fallback))
}

fn read_trace_with<R: Read>(r: R, taskset: Option<TaskSet>, fallback: Option<TaskSet>) -> Result<Trace> {
    let mut reader = BufReader::new(r);
    let mut horizon = None;
    let mut seed = 0;
    let mut embedded = None;
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let Some(meta) = line.strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let meta = meta.trim();
        if let Some(v) = meta.strip_prefix("horizon=") {
            horizon = Some(v.parse::<Time>().context("bad horizon")?);
        } else if let Some(v) = meta.strip_prefix("seed=") {
            seed = v.parse().context("bad seed")?;
        } else if let Some(v) = meta.strip_prefix("taskset=") {
            embedded = Some(v.to_owned());
        }
    }
    reader.read_to_string(&mut body)?;

    let ts = match (taskset, embedded, fallback) {
        (Some(ts), _, _) => ts,
        (None, Some(json), _) => parse_taskset(&json)?,
        (None, None, Some(ts)) => ts,
        (None, None, None) => bail!("trace has no embedded taskset; pass one explicitly"),
    };
    let mut jobs = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let row: JobRow = row?;
        ts.task(row.task_id).with_context(|| format!("job of unknown task {}", row.task_id))?;
        jobs.push(JobRecord {
            task_id: row.task_id,
            job_index: row.job_index,
            release: row.release,
            mode: row.mode,
            exec_demand: row.exec_demand,
            completion: row.completion,
            response: row.response,
        });
    }
    let horizon = match horizon {
        Some(h) => h,
        None => {
            // round the last release up to a whole hyperperiod
            let h = ts.hyperperiod()?;
            jobs.iter().map(|j| j.release / h + 1).max().unwrap_or(0) * h
        }
    };
    Ok(Trace::from_jobs(ts, horizon, seed, jobs))
}

pub fn load_trace_or(path: &Path, fallback: TaskSet) -> Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace_or(f, fallback).with_context(|| format!("in {}", path.display()))
}

pub fn save_trace(path: &Path, tr: &Trace) -> Result<()> {
    write_trace(File::create(path).with_context(|| format!("creating {}", path.display()))?, tr)
}

pub fn load_trace(path: &Path, taskset: Option<TaskSet>) -> Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace(f, taskset).with_context(|| format!("in {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct ResponseRow {
    response: Time,
}

/// Single-column `response` CSV.
pub fn write_responses<W: Write>(w: W, responses: &[Time]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for &response in responses {
        csv.serialize(ResponseRow { response })?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_responses<R: Read>(r: R) -> Result<Vec<Time>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| Ok(row.map(|r: ResponseRow| r.response)?))
        .collect()
}

pub fn load_responses(path: &Path) -> Result<Vec<Time>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_responses(f).with_context(|| format!("in {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PstFile {
    pub max_depth: usize,
    pub p_min: f64,
    pub alphabet: Vec<Symbol>,
    pub training_length: usize,
    pub nodes: Vec<PstNodeRecord>,
}

impl PstFile {
    pub fn of(pst: &Pst) -> Self {
        PstFile {
            max_depth: pst.max_depth(),
            p_min: pst.p_min(),
            alphabet: pst.alphabet().to_vec(),
            training_length: pst.training_length(),
            nodes: pst.to_records(),
        }
    }

    pub fn into_pst(self) -> Result<Pst> {
        Ok(Pst::from_records(&self.nodes, self.max_depth, self.p_min, self.alphabet, self.training_length)?)
    }
}

/// Cluster summary as written by the `cluster` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterFile {
    pub centroids: [f64; 2],
    pub threshold: f64,
    pub wcss: f64,
}

impl From<&ClusterModel> for ClusterFile {
    fn from(m: &ClusterModel) -> Self {
        ClusterFile { centroids: m.centroids, threshold: m.threshold, wcss: m.wcss }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub taskset: TasksetFile,
    pub fingerprint: u64,
    pub config: TrainConfig,
    pub cluster: ClusterModel,
    pub pst: PstFile,
}

impl ModelFile {
    pub fn new(model: &AttackModel, ts: &TaskSet) -> Self {
        ModelFile {
            taskset: TasksetFile::of(ts),
            fingerprint: model.fingerprint,
            config: model.config.clone(),
            // per-sample assignments are training detail, not model state
            cluster: ClusterModel { assignments: Vec::new(), ..model.cluster.clone() },
            pst: PstFile::of(&model.pst),
        }
    }

    pub fn into_model(self) -> Result<(AttackModel, TaskSet)> {
        let ts = self.taskset.into_taskset()?;
        let model = AttackModel {
            pst: self.pst.into_pst()?,
            cluster: self.cluster,
            config: self.config,
            fingerprint: self.fingerprint,
        };
        Ok((model, ts))
    }
}

pub fn model_to_string(model: &AttackModel, ts: &TaskSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::new(model, ts))?)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    job_index: u64,
    predicted_response: Option<Symbol>,
    predicted_mode: Mode,
    actual_label: Mode,
    correct: bool,
}

pub fn write_predictions<W: Write>(w: W, records: &[PredictionRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in records {
        csv.serialize(PredictionRow {
            job_index: r.observer_job_index,
            predicted_response: r.predicted_response,
            predicted_mode: r.predicted_mode,
            actual_label: r.actual_window_label,
            correct: r.correct,
        })?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<PredictionRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| {
            let row: PredictionRow = row?;
            Ok(PredictionRecord {
                observer_job_index: row.job_index,
                predicted_response: row.predicted_response,
                predicted_mode: row.predicted_mode,
                actual_window_label: row.actual_label,
                correct: row.correct,
            })
        })
        .collect()
}
