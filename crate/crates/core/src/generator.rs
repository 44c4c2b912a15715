//! Exhaustive, constraint-filtered enumeration of input vectors.
//!
//! Vectors are produced in mixed-radix order over KB declaration order
//! (first variable most significant). A conditional variable whose guard
//! does not hold is pinned to NA instead of being expanded. Candidates are
//! then filtered by the structural invariants bound through roles and by
//! every exclusion constraint. Nothing is materialized: the stream is a
//! plain iterator.

use std::io::{self, Read, Write};

use serde::Serialize;

use crate::dss::{ClassLabel, DssError, Engine, InputVector, RoleIndex, Verdict};
use crate::kb::{all_match, Applicability, KnowledgeBase, ValueIdx, VarId, NA};
use crate::parallel::map_ordered;

/// Variable order, applicability guards and constraints driving
/// enumeration.
#[derive(Debug, Clone)]
pub struct EnumerationPlan {
    pub order: Vec<VarId>,
    pub guards: Vec<Option<Applicability>>,
    pub constraints: Vec<String>,
}

impl EnumerationPlan {
    pub fn new(kb: &KnowledgeBase) -> Self {
        EnumerationPlan {
            order: (0..kb.variables.len()).map(VarId).collect(),
            guards: kb.variables.iter().map(|v| v.applicability).collect(),
            constraints: kb.constraints.iter().map(|c| c.name.clone()).collect(),
        }
    }
}

/// Mixed-radix walk over the guard-respecting (pre-filter) space.
#[derive(Debug, Clone)]
pub struct Candidates<'kb> {
    kb: &'kb KnowledgeBase,
    state: Vec<ValueIdx>,
    started: bool,
    done: bool,
}

impl<'kb> Candidates<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        let mut c = Candidates {
            kb,
            state: vec![0; kb.variables.len()],
            started: false,
            done: kb.variables.iter().any(|v| v.domain.is_empty()),
        };
        c.reset_from(0);
        c
    }

    fn applicable(&self, j: usize) -> bool {
        match self.kb.variables[j].applicability {
            None => true,
            Some(a) => self.state[a.variable.0] == a.value,
        }
    }

    fn reset_from(&mut self, from: usize) {
        for j in from..self.state.len() {
            self.state[j] = if self.applicable(j) {
                0
            } else {
                self.kb.variables[j].domain.len() as ValueIdx
            };
        }
    }
}

impl Iterator for Candidates<'_> {
    type Item = InputVector;

    fn next(&mut self) -> Option<InputVector> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(InputVector::new(self.state.clone()));
        }
        for j in (0..self.state.len()).rev() {
            if self.applicable(j)
                && (self.state[j] as usize) + 1 < self.kb.variables[j].domain.len()
            {
                self.state[j] += 1;
                self.reset_from(j + 1);
                return Some(InputVector::new(self.state.clone()));
            }
        }
        self.done = true;
        None
    }
}

/// Realism filter: structural invariants plus KB exclusion constraints.
#[derive(Debug, Clone)]
pub struct Realism<'kb> {
    kb: &'kb KnowledgeBase,
    roles: RoleIndex,
}

impl<'kb> Realism<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        Realism {
            kb,
            roles: RoleIndex::new(kb),
        }
    }

    /// Whether every conditional variable is NA exactly when its guard
    /// fails.
    pub fn respects_guards(&self, values: &[ValueIdx]) -> bool {
        self.kb.variables.iter().zip(values).all(|(var, &v)| {
            let applicable = match var.applicability {
                None => true,
                Some(a) => values[a.variable.0] == a.value,
            };
            if applicable {
                (v as usize) < var.domain.len()
            } else {
                Some(v) == var.na()
            }
        })
    }

    pub fn excluded_by(&self, values: &[ValueIdx]) -> Option<&'kb str> {
        self.kb
            .constraints
            .iter()
            .find(|c| all_match(&c.conjuncts, values))
            .map(|c| c.name.as_str())
    }

    pub fn is_realistic(&self, values: &[ValueIdx]) -> bool {
        self.respects_guards(values)
            && self.roles.is_consistent(self.kb, values)
            && self.excluded_by(values).is_none()
    }
}

/// The realistic vectors of a KB, in enumeration order.
#[derive(Debug, Clone)]
pub struct VectorStream<'kb> {
    candidates: Candidates<'kb>,
    realism: Realism<'kb>,
    total_raw: u64,
    total_realistic: u64,
}

impl VectorStream<'_> {
    /// Candidates examined so far (the full pre-filter count once the
    /// stream is exhausted).
    pub fn total_raw(&self) -> u64 {
        self.total_raw
    }

    pub fn total_realistic(&self) -> u64 {
        self.total_realistic
    }
}

impl Iterator for VectorStream<'_> {
    type Item = InputVector;

    fn next(&mut self) -> Option<InputVector> {
        for v in self.candidates.by_ref() {
            self.total_raw += 1;
            if self.realism.is_realistic(&v.values) {
                self.total_realistic += 1;
                return Some(v);
            }
        }
        None
    }
}

pub fn enumerate(kb: &KnowledgeBase) -> VectorStream<'_> {
    VectorStream {
        candidates: Candidates::new(kb),
        realism: Realism::new(kb),
        total_raw: 0,
        total_realistic: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    /// Product of every domain size, ignoring applicability.
    pub unconditioned: u64,
    /// Guard-respecting combinations before filtering.
    pub conditional: u64,
    /// Combinations surviving the realism filter.
    pub realistic: u64,
}

/// Product of domain sizes, ignoring applicability guards.
pub fn unconditioned_count(kb: &KnowledgeBase) -> u64 {
    kb.variables
        .iter()
        .fold(1u64, |acc, v| acc.saturating_mul(v.domain.len() as u64))
}

/// Guard-respecting count computed by branching only on variables that
/// some guard inspects.
pub fn conditional_count(kb: &KnowledgeBase) -> u64 {
    let inspected: Vec<bool> = (0..kb.variables.len())
        .map(|i| {
            kb.variables
                .iter()
                .any(|v| v.applicability.map(|a| a.variable.0) == Some(i))
        })
        .collect();
    fn walk(kb: &KnowledgeBase, inspected: &[bool], i: usize, state: &mut [ValueIdx]) -> u64 {
        if i == kb.variables.len() {
            return 1;
        }
        let var = &kb.variables[i];
        let applicable = var
            .applicability
            .is_none_or(|a| state[a.variable.0] == a.value);
        let choices: Vec<ValueIdx> = if applicable {
            (0..var.domain.len() as ValueIdx).collect()
        } else {
            vec![var.domain.len() as ValueIdx]
        };
        if inspected[i] {
            choices
                .into_iter()
                .map(|c| {
                    state[i] = c;
                    walk(kb, inspected, i + 1, state)
                })
                .fold(0u64, u64::saturating_add)
        } else {
            (choices.len() as u64).saturating_mul(walk(kb, inspected, i + 1, state))
        }
    }
    let mut state = vec![0; kb.variables.len()];
    walk(kb, &inspected, 0, &mut state)
}

pub fn count(kb: &KnowledgeBase) -> CountSummary {
    CountSummary {
        unconditioned: unconditioned_count(kb),
        conditional: conditional_count(kb),
        realistic: enumerate(kb).count() as u64,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("row {row}: {source}")]
    Dss {
        row: usize,
        #[source]
        source: DssError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A labeled vector as exported to CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRow {
    pub vector: InputVector,
    pub label: ClassLabel,
    pub verdict: Option<Verdict>,
}

/// Labels every vector of `stream` (on `jobs` workers) and hands rows to
/// `sink` in enumeration order. The verdict is `None` when the KB binds no
/// proposed-treatment role.
pub fn label_stream<I, E>(
    engine: &Engine<'_>,
    stream: I,
    jobs: usize,
    mut sink: impl FnMut(usize, LabeledRow) -> Result<(), E>,
) -> Result<(), E>
where
    I: Iterator<Item = InputVector>,
    E: From<ExportError>,
{
    let critiques = engine.kb().roles.proposed.is_some() && engine.kb().roles.current.is_some();
    map_ordered(
        stream,
        jobs,
        |v| -> Result<(ClassLabel, Option<Verdict>), DssError> {
            let set = engine.recommend(v)?;
            let verdict = if critiques {
                let action = engine.derive_action(v)?;
                Some(crate::dss::verdict_for(&set, &action))
            } else {
                None
            };
            Ok((set.label(), verdict))
        },
        |row, vector, result| match result {
            Ok((label, verdict)) => sink(
                row,
                LabeledRow {
                    vector,
                    label,
                    verdict,
                },
            ),
            Err(source) => Err(ExportError::Dss { row, source }.into()),
        },
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '+', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_header(kb: &KnowledgeBase) -> String {
    let mut cols: Vec<String> = kb.variables.iter().map(|v| csv_field(&v.name)).collect();
    cols.push("label".into());
    cols.push("verdict".into());
    cols.join(",")
}

pub fn csv_row(kb: &KnowledgeBase, row: &LabeledRow) -> String {
    let mut cols: Vec<String> = kb
        .variables
        .iter()
        .zip(&row.vector.values)
        .map(|(var, &v)| csv_field(var.value_name(v)))
        .collect();
    cols.push(csv_field(row.label.as_str()));
    cols.push(
        row.verdict
            .map(|v| v.as_str().to_string())
            .unwrap_or_else(|| NA.to_string()),
    );
    cols.join(",")
}

/// Writes the labeled table for `stream` as CSV. Returns the row count.
pub fn export_labeled<W: Write>(
    kb: &KnowledgeBase,
    stream: impl Iterator<Item = InputVector>,
    out: W,
    jobs: usize,
) -> Result<usize, ExportError> {
    let engine = Engine::new(kb);
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{}", csv_header(kb))?;
    let mut rows = 0usize;
    label_stream(&engine, stream, jobs, |_, row| -> Result<(), ExportError> {
        writeln!(out, "{}", csv_row(kb, &row))?;
        rows += 1;
        Ok(())
    })?;
    out.flush()?;
    Ok(rows)
}

/// Writes unlabeled vectors (variable columns only).
pub fn export_vectors<W: Write>(
    kb: &KnowledgeBase,
    stream: impl Iterator<Item = InputVector>,
    out: W,
) -> io::Result<usize> {
    let mut out = io::BufWriter::new(out);
    let header: Vec<String> = kb.variables.iter().map(|v| csv_field(&v.name)).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut rows = 0;
    for v in stream {
        let cols: Vec<String> = kb
            .variables
            .iter()
            .zip(&v.values)
            .map(|(var, &x)| csv_field(var.value_name(x)))
            .collect();
        writeln!(out, "{}", cols.join(","))?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header does not match the knowledge base: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: `{value}` is not a value of `{variable}`")]
    Value {
        line: u64,
        variable: String,
        value: String,
    },
}

/// Reads a labeled table produced by [`export_labeled`] back into
/// (vector, label) pairs.
pub fn read_labeled<R: Read>(
    kb: &KnowledgeBase,
    input: R,
) -> Result<Vec<(InputVector, ClassLabel)>, ReadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let expected: Vec<String> = kb
        .variables
        .iter()
        .map(|v| v.name.clone())
        .chain(["label".to_string(), "verdict".to_string()])
        .collect();
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(ReadError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    let n = kb.variables.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut values = Vec::with_capacity(n);
        for (var, field) in kb.variables.iter().zip(record.iter()) {
            values.push(var.value_index(field).ok_or_else(|| ReadError::Value {
                line,
                variable: var.name.clone(),
                value: field.to_string(),
            })?);
        }
        rows.push((InputVector::new(values), ClassLabel::from_text(&record[n])));
    }
    Ok(rows)
}
