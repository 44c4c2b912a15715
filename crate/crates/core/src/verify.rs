//! Oracle equivalence: the tree against the engine on every realistic
//! vector.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dss::{DssError, Engine, InputVector, RecommendationSet};
use crate::factor::FactoredTree;
use crate::generator::enumerate;
use crate::kb::KnowledgeBase;
use crate::learner::{kb_attributes, Attribute, DecisionTree};
use crate::parallel::map_ordered;

pub const DEFAULT_MAX_WITNESSES: usize = 100;

/// One vector on which tree and engine disagree. Either side may be an
/// error message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    #[serde(skip)]
    pub input: InputVector,
    pub vector: String,
    pub tree: String,
    pub dss: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceReport {
    pub checked: u64,
    /// Full divergence count, independent of the witness cap.
    pub divergences: u64,
    pub max_witnesses: usize,
    pub witnesses: Vec<Divergence>,
    /// Kept out of serialized reports so they stay byte-reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl DivergenceReport {
    pub fn passed(&self) -> bool {
        self.divergences == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub max_witnesses: usize,
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_witnesses: DEFAULT_MAX_WITNESSES,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tree attributes do not match the knowledge base variables")]
pub struct AttributeMismatch;

fn sweep<F>(
    kb: &KnowledgeBase,
    attributes: &[Attribute],
    opts: VerifyOptions,
    model: F,
) -> Result<DivergenceReport, AttributeMismatch>
where
    F: Fn(&[u16]) -> Result<RecommendationSet, String> + Sync,
{
    if attributes != kb_attributes(kb).as_slice() {
        return Err(AttributeMismatch);
    }
    let start = Instant::now();
    let engine = Engine::new(kb);
    let mut report = DivergenceReport {
        checked: 0,
        divergences: 0,
        max_witnesses: opts.max_witnesses,
        witnesses: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let show = |r: Result<RecommendationSet, String>| match r {
        Ok(s) => s.label().to_string(),
        Err(e) => format!("error: {e}"),
    };
    map_ordered(
        enumerate(kb),
        opts.jobs,
        |v| {
            let tree = model(&v.values);
            let dss = engine.recommend(v).map_err(|e: DssError| e.to_string());
            (tree != dss || tree.is_err()).then_some((tree, dss))
        },
        |_, v, mismatch| {
            report.checked += 1;
            if let Some((tree, dss)) = mismatch {
                report.divergences += 1;
                if report.witnesses.len() < opts.max_witnesses {
                    report.witnesses.push(Divergence {
                        vector: v.describe(kb),
                        input: v,
                        tree: show(tree),
                        dss: show(dss),
                    });
                }
            }
            Ok::<_, std::convert::Infallible>(())
        },
    )
    .unwrap_or_else(|e| match e {});
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Compares `evaluate_factored` with `recommend` on every realistic vector.
pub fn verify(
    kb: &KnowledgeBase,
    tree: &FactoredTree,
    opts: VerifyOptions,
) -> Result<DivergenceReport, AttributeMismatch> {
    sweep(kb, &tree.attributes, opts, |v| {
        tree.evaluate(v).map_err(|e| e.to_string())
    })
}

/// Same check for an unfactored tree (classify, then decode the label).
pub fn verify_tree(
    kb: &KnowledgeBase,
    tree: &DecisionTree,
    opts: VerifyOptions,
) -> Result<DivergenceReport, AttributeMismatch> {
    sweep(kb, &tree.attributes, opts, |v| {
        tree.classify(v)
            .map_err(|e| e.to_string())
            .and_then(|l| l.decode().map_err(|e| e.to_string()))
    })
}
