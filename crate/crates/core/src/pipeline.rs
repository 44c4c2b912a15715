//! End-to-end run: parse, validate, enumerate and label, learn, factorize,
//! verify, render.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use crate::dss::{ClassLabel, Engine, InputVector};
use crate::factor::{factorize, FactorError, FactoredTree};
use crate::generator::{
    count, csv_header, csv_row, enumerate, label_stream, CountSummary, ExportError,
};
use crate::kb::{validate_kb, Finding, KnowledgeBase, LoadError};
use crate::learner::{build_tree, Dataset, DecisionTree, LearnError};
use crate::render::{render_dot, render_json, render_text};
use crate::verify::{verify, DivergenceReport, VerifyOptions};

/// Process exit statuses of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Verified = 0,
    Divergent = 1,
    InvalidKb = 2,
    Failure = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub jobs: usize,
    pub max_witnesses: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            jobs: 1,
            max_witnesses: crate::verify::DEFAULT_MAX_WITNESSES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("knowledge base has {} validation finding(s)", .0.len())]
    Invalid(Vec<Finding>),
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    pub fn status(&self) -> Status {
        match self {
            PipelineError::Invalid(_) => Status::InvalidKb,
            _ => Status::Failure,
        }
    }

    fn stage(stage: &'static str, e: impl ToString) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let tmp = tmp_path(path);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub kb_version: String,
    pub counts: CountSummary,
    pub labeled_rows: u64,
    pub classes: usize,
    pub training_rows: usize,
    pub training_errors: u64,
    pub raw_node_count: usize,
    pub factored_node_count: usize,
    pub checked: u64,
    pub divergences: u64,
    pub verified: bool,
}

/// Everything a run produced, kept in memory for callers and tests.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub tree: DecisionTree,
    pub factored: FactoredTree,
    pub verification: DivergenceReport,
    pub timings: Vec<(&'static str, Duration)>,
}

impl PipelineOutcome {
    pub fn status(&self) -> Status {
        if self.manifest.verified {
            Status::Verified
        } else {
            Status::Divergent
        }
    }
}

/// Report written to `report.json`. Timings are excluded so reruns are
/// byte-identical; they go to `timings.json` instead.
pub fn report_json(outcome: &PipelineOutcome) -> String {
    let doc = json!({
        "manifest": outcome.manifest,
        "verification": outcome.verification,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn timings_json(timings: &[(&'static str, Duration)]) -> String {
    let mut map = serde_json::Map::new();
    for (stage, d) in timings {
        map.insert((*stage).into(), json!(d.as_secs_f64()));
    }
    let mut s = serde_json::to_string_pretty(&map).expect("timings serialize");
    s.push('\n');
    s
}

struct Clock {
    last: Instant,
    timings: Vec<(&'static str, Duration)>,
}

impl Clock {
    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push((stage, now - self.last));
        self.last = now;
    }
}

/// Runs every stage in memory and writes the labeled table to `csv_out`
/// as labeling proceeds.
pub fn run(
    kb: &KnowledgeBase,
    opts: PipelineOptions,
    csv_out: &mut dyn Write,
) -> Result<PipelineOutcome, PipelineError> {
    let mut clock = Clock {
        last: Instant::now(),
        timings: Vec::new(),
    };
    let findings = validate_kb(kb);
    if !findings.is_empty() {
        return Err(PipelineError::Invalid(findings));
    }
    clock.lap("validate");

    let counts = count(kb);
    let engine = Engine::new(kb);
    let mut rows: Vec<(InputVector, ClassLabel)> = Vec::new();
    writeln!(csv_out, "{}", csv_header(kb)).map_err(|e| PipelineError::stage("label", e))?;
    label_stream(
        &engine,
        enumerate(kb),
        opts.jobs,
        |_, row| -> Result<(), ExportError> {
            writeln!(csv_out, "{}", csv_row(kb, &row))?;
            rows.push((row.vector, row.label));
            Ok(())
        },
    )
    .map_err(|e| PipelineError::stage("label", e))?;
    clock.lap("enumerate+label");

    let ds = Dataset::from_kb(kb, rows.iter().cloned())
        .map_err(|e: LearnError| PipelineError::stage("learn", e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| PipelineError::stage("learn", e))?;
    let tree = pool
        .install(|| build_tree(&ds))
        .map_err(|e| PipelineError::stage("learn", e))?;
    let training_errors = rows
        .iter()
        .filter(|(v, l)| tree.classify(&v.values).ok() != Some(l))
        .count() as u64;
    clock.lap("learn");

    let factored = factorize(&tree, Some(kb))
        .map_err(|e: FactorError| PipelineError::stage("factorize", e))?;
    clock.lap("factorize");

    let verification = verify(
        kb,
        &factored,
        VerifyOptions {
            max_witnesses: opts.max_witnesses,
            jobs: opts.jobs,
        },
    )
    .map_err(|e| PipelineError::stage("verify", e))?;
    clock.lap("verify");

    let manifest = Manifest {
        kb_version: kb.version.clone(),
        counts,
        labeled_rows: rows.len() as u64,
        classes: ds.class_count(),
        training_rows: tree.training_rows,
        training_errors,
        raw_node_count: tree.node_count(),
        factored_node_count: factored.node_count(),
        checked: verification.checked,
        divergences: verification.divergences,
        verified: verification.passed() && training_errors == 0,
    };
    Ok(PipelineOutcome {
        manifest,
        tree,
        factored,
        verification,
        timings: clock.timings,
    })
}

/// Loads `kb_path`, runs the pipeline and writes every output into
/// `out_dir`. Nothing is written when the KB fails to parse or validate.
pub fn run_to_dir(
    kb_path: &Path,
    out_dir: &Path,
    opts: PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let kb = KnowledgeBase::load(kb_path)?;
    let findings = validate_kb(&kb);
    if !findings.is_empty() {
        return Err(PipelineError::Invalid(findings));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let csv_path = out_dir.join("vectors.csv");
    let csv_tmp = tmp_path(&csv_path);
    let file = fs::File::create(&csv_tmp).map_err(io_err(&csv_tmp))?;
    let mut writer = io::BufWriter::new(file);
    let mut outcome = run(&kb, opts, &mut writer)?;
    writer.flush().map_err(io_err(&csv_tmp))?;
    drop(writer);
    fs::rename(&csv_tmp, &csv_path).map_err(io_err(&csv_path))?;

    let start = Instant::now();
    let raw = {
        let mut s = serde_json::to_string_pretty(&outcome.tree.to_json()).expect("tree serializes");
        s.push('\n');
        s
    };
    write_atomic(&out_dir.join("tree.raw.json"), raw.as_bytes())?;
    write_atomic(
        &out_dir.join("tree.json"),
        render_json(&outcome.factored).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("tree.dot"),
        render_dot(&outcome.factored).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("tree.txt"),
        render_text(&outcome.factored).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("report.json"),
        report_json(&outcome).as_bytes(),
    )?;
    outcome.timings.push(("render", start.elapsed()));
    write_atomic(
        &out_dir.join("timings.json"),
        timings_json(&outcome.timings).as_bytes(),
    )?;
    Ok(outcome)
}
