use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use gverify_core::diff::diff;
use gverify_core::factor::{factorize, lift, FactoredTree};
use gverify_core::generator::{count, enumerate, export_labeled, export_vectors, read_labeled};
use gverify_core::kb::{validate_kb, KnowledgeBase};
use gverify_core::learner::{build_tree, Dataset, DecisionTree};
use gverify_core::pipeline::{run_to_dir, write_atomic, PipelineError, PipelineOptions, Status};
use gverify_core::render::{render, Format};
use gverify_core::verify::{verify, VerifyOptions, DEFAULT_MAX_WITNESSES};

#[derive(Parser)]
#[command(
    name = "gverify",
    version,
    about = "Verify a rule-based critiquing system by exhaustive enumeration and tree induction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Text,
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all outputs into a directory.
    Pipeline {
        kb: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "GVERIFY_JOBS")]
        jobs: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_WITNESSES)]
        max_witnesses: usize,
    },
    /// Check a knowledge base and list its findings.
    Validate { kb: PathBuf },
    /// Enumerate realistic input vectors (or just count them).
    Generate {
        kb: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        count: bool,
    },
    /// Enumerate and label every realistic vector as CSV.
    Label {
        kb: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "GVERIFY_JOBS")]
        jobs: Option<usize>,
    },
    /// Induce a decision tree from a labeled table.
    Learn {
        kb: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factorize a learned tree.
    Factorize {
        kb: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a tree document (learned or factored).
    Render {
        tree: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: RenderFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a factored tree with the engine on every realistic vector.
    Verify {
        kb: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_WITNESSES)]
        max_witnesses: usize,
        #[arg(long, env = "GVERIFY_JOBS")]
        jobs: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Structural diff of two tree documents.
    Diff { a: PathBuf, b: PathBuf },
}

struct Failure {
    status: Status,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            status: Status::Failure,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn other(e: impl std::fmt::Display) -> Self {
        Failure {
            status: Status::Failure,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<Status, Failure>;

fn load_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    KnowledgeBase::load(path).map_err(Failure::other)
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::io(path, e))
}

/// Accepts both learned and factored tree documents.
fn load_factored(path: &Path) -> Result<FactoredTree, Failure> {
    let doc = read_json(path)?;
    if doc.get("source_node_count").is_some() {
        FactoredTree::from_json(&doc).map_err(|e| Failure::io(path, e))
    } else {
        let tree = DecisionTree::from_json(&doc).map_err(|e| Failure::io(path, e))?;
        lift(&tree, None).map_err(|e| Failure::io(path, e))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(Failure::other),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::other),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serializes");
    s.push('\n');
    s
}

fn jobs(j: Option<usize>) -> usize {
    j.filter(|&n| n > 0)
        .unwrap_or_else(gverify_core::default_jobs)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Pipeline {
            kb,
            out,
            jobs: j,
            max_witnesses,
        } => {
            let opts = PipelineOptions {
                jobs: jobs(j),
                max_witnesses,
            };
            match run_to_dir(&kb, &out, opts) {
                Ok(outcome) => {
                    let m = &outcome.manifest;
                    for (stage, d) in &outcome.timings {
                        eprintln!("{stage:>16}: {:.3}s", d.as_secs_f64());
                    }
                    eprintln!(
                        "{} realistic vectors, tree {} -> {} nodes, {} divergence(s)",
                        m.counts.realistic, m.raw_node_count, m.factored_node_count, m.divergences
                    );
                    Ok(outcome.status())
                }
                Err(PipelineError::Invalid(findings)) => {
                    for f in &findings {
                        eprintln!("{}: {f}", kb.display());
                    }
                    Ok(Status::InvalidKb)
                }
                Err(e) => Err(Failure {
                    status: e.status(),
                    message: e.to_string(),
                }),
            }
        }
        Command::Validate { kb: path } => {
            let kb = load_kb(&path)?;
            let findings = validate_kb(&kb);
            for f in &findings {
                eprintln!("{}: {f}", path.display());
            }
            Ok(if findings.is_empty() {
                Status::Verified
            } else {
                Status::InvalidKb
            })
        }
        Command::Generate { kb, out, count: c } => {
            let kb = load_kb(&kb)?;
            if c {
                let summary = serde_json::to_value(count(&kb)).expect("counts serialize");
                emit(out.as_deref(), &pretty(&summary))?;
            } else {
                let mut buf = Vec::new();
                export_vectors(&kb, enumerate(&kb), &mut buf).map_err(Failure::other)?;
                emit(out.as_deref(), &String::from_utf8_lossy(&buf))?;
            }
            Ok(Status::Verified)
        }
        Command::Label { kb, out, jobs: j } => {
            let kb = load_kb(&kb)?;
            let mut buf = Vec::new();
            export_labeled(&kb, enumerate(&kb), &mut buf, jobs(j)).map_err(Failure::other)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))?;
            Ok(Status::Verified)
        }
        Command::Learn { kb, vectors, out } => {
            let kb = load_kb(&kb)?;
            let file = fs::File::open(&vectors).map_err(|e| Failure::io(&vectors, e))?;
            let rows = read_labeled(&kb, file).map_err(|e| Failure::io(&vectors, e))?;
            let ds = Dataset::from_kb(&kb, rows).map_err(Failure::other)?;
            let tree = build_tree(&ds).map_err(Failure::other)?;
            emit(out.as_deref(), &pretty(&tree.to_json()))?;
            Ok(Status::Verified)
        }
        Command::Factorize { kb, tree, out } => {
            let kb = load_kb(&kb)?;
            let doc = read_json(&tree)?;
            let t = DecisionTree::from_json(&doc).map_err(|e| Failure::io(&tree, e))?;
            let f = factorize(&t, Some(&kb)).map_err(Failure::other)?;
            emit(out.as_deref(), &pretty(&f.to_json()))?;
            Ok(Status::Verified)
        }
        Command::Render { tree, format, out } => {
            let f = load_factored(&tree)?;
            let format = match format {
                RenderFormat::Text => Format::Text,
                RenderFormat::Dot => Format::Dot,
                RenderFormat::Json => Format::Json,
            };
            emit(out.as_deref(), &render(&f, format))?;
            Ok(Status::Verified)
        }
        Command::Verify {
            kb,
            tree,
            max_witnesses,
            jobs: j,
            report,
        } => {
            let kb = load_kb(&kb)?;
            let f = load_factored(&tree)?;
            let r = verify(
                &kb,
                &f,
                VerifyOptions {
                    max_witnesses,
                    jobs: jobs(j),
                },
            )
            .map_err(Failure::other)?;
            let doc = serde_json::to_value(&r).expect("report serializes");
            emit(report.as_deref(), &pretty(&doc))?;
            eprintln!(
                "checked {} vectors, {} divergence(s) in {:.3}s",
                r.checked,
                r.divergences,
                r.elapsed.as_secs_f64()
            );
            Ok(if r.passed() {
                Status::Verified
            } else {
                Status::Divergent
            })
        }
        Command::Diff { a, b } => {
            let (ta, tb) = (load_factored(&a)?, load_factored(&b)?);
            let d = diff(&ta, &tb).map_err(Failure::other)?;
            emit(None, &d.to_string())?;
            Ok(if d.is_empty() {
                Status::Verified
            } else {
                Status::Divergent
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(f) => {
            eprintln!("gverify: {}", f.message);
            ExitCode::from(f.status.code() as u8)
        }
    }
}
