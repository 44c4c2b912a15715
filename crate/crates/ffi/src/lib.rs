//! C ABI over `gverify-core`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Strings returned through `char **` are
//! heap-allocated and must be released with [`gv_string_free`]. Every
//! fallible call returns a [`GvStatus`]; on failure a description is
//! available from [`gv_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gverify_core::dss::{Engine, InputVector, Verdict};
use gverify_core::factor::FactoredTree;
use gverify_core::generator::count;
use gverify_core::kb::{parse_kb, validate_kb, KnowledgeBase};
use gverify_core::learner::DecisionTree;
use gverify_core::pipeline::{run, PipelineError, PipelineOptions};
use gverify_core::render::{render, Format};
use gverify_core::verify::{verify, VerifyOptions};

/// Result of every fallible call. The first four match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GvStatus {
    Ok = 0,
    Divergent = 1,
    InvalidKb = 2,
    Failure = 3,
    NullArgument = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GvVerdict {
    Conform = 0,
    NotOptimal = 1,
    NonConform = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GvFormat {
    Text = 0,
    Dot = 1,
    Json = 2,
}

/// A parsed knowledge base.
pub struct GvKb {
    kb: KnowledgeBase,
}

/// A learned tree together with its factored form.
pub struct GvTree {
    raw: DecisionTree,
    factored: FactoredTree,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Fallible = Result<GvStatus, (GvStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible) -> GvStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GvStatus::Panic
        }
    }
}

fn null(what: &str) -> (GvStatus, String) {
    (GvStatus::NullArgument, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (GvStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (GvStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

unsafe fn values(
    kb: &KnowledgeBase,
    p: *const u16,
    len: usize,
) -> Result<InputVector, (GvStatus, String)> {
    if p.is_null() {
        return Err(null("values"));
    }
    let vals = std::slice::from_raw_parts(p, len);
    if vals.len() != kb.variables.len() {
        return Err((
            GvStatus::InvalidArgument,
            format!("expected {} values, got {}", kb.variables.len(), vals.len()),
        ));
    }
    for (var, &v) in kb.variables.iter().zip(vals) {
        if v as usize >= var.arity() {
            return Err((
                GvStatus::InvalidArgument,
                format!("value {v} out of range for {}", var.name),
            ));
        }
    }
    Ok(InputVector::new(vals.to_vec()))
}

/// Last error message on this thread, or null. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn gv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses KB source text.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out_kb` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_parse(source: *const c_char, out_kb: *mut *mut GvKb) -> GvStatus {
    guard(|| {
        let slot = out(out_kb, "out")?;
        *slot = ptr::null_mut();
        let kb =
            parse_kb(text(source, "source")?).map_err(|e| (GvStatus::Failure, e.to_string()))?;
        *slot = Box::into_raw(Box::new(GvKb { kb }));
        Ok(GvStatus::Ok)
    })
}

/// Reads and parses a KB file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_kb` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_load(path: *const c_char, out_kb: *mut *mut GvKb) -> GvStatus {
    guard(|| {
        let slot = out(out_kb, "out")?;
        *slot = ptr::null_mut();
        let kb = KnowledgeBase::load(text(path, "path")?)
            .map_err(|e| (GvStatus::Failure, e.to_string()))?;
        *slot = Box::into_raw(Box::new(GvKb { kb }));
        Ok(GvStatus::Ok)
    })
}

/// # Safety
/// `kb` must come from `gv_kb_parse`/`gv_kb_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_free(kb: *mut GvKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Runs static and coverage validation. Returns `GV_STATUS_INVALID_KB`
/// when there are findings; the last error then lists them one per line.
///
/// # Safety
/// `kb` must be a live handle; `findings` may be null.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_validate(kb: *const GvKb, findings: *mut usize) -> GvStatus {
    guard(|| {
        let kb = &deref(kb, "kb")?.kb;
        let found = validate_kb(kb);
        if let Some(n) = findings.as_mut() {
            *n = found.len();
        }
        if found.is_empty() {
            Ok(GvStatus::Ok)
        } else {
            let msg = found
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("\n");
            Err((GvStatus::InvalidKb, msg))
        }
    })
}

/// Number of variables, i.e. the expected length of value arrays.
///
/// # Safety
/// `kb` must be a live handle; `n` writable.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_variable_count(kb: *const GvKb, n: *mut usize) -> GvStatus {
    guard(|| {
        *out(n, "n")? = deref(kb, "kb")?.kb.variables.len();
        Ok(GvStatus::Ok)
    })
}

/// Input-space sizes: full product, guard-respecting, realistic.
///
/// # Safety
/// `kb` must be a live handle; the three outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_count(
    kb: *const GvKb,
    unconditioned: *mut u64,
    conditional: *mut u64,
    realistic: *mut u64,
) -> GvStatus {
    guard(|| {
        let c = count(&deref(kb, "kb")?.kb);
        *out(unconditioned, "unconditioned")? = c.unconditioned;
        *out(conditional, "conditional")? = c.conditional;
        *out(realistic, "realistic")? = c.realistic;
        Ok(GvStatus::Ok)
    })
}

/// Class label of one input vector, as encoded value indices in variable
/// order (NA is the index just past a conditional variable's domain).
///
/// # Safety
/// `values_ptr` must point to `len` readable elements; `label` writable.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_label(
    kb: *const GvKb,
    values_ptr: *const u16,
    len: usize,
    label: *mut *mut c_char,
) -> GvStatus {
    guard(|| {
        let kb = &deref(kb, "kb")?.kb;
        let slot = out(label, "label")?;
        *slot = ptr::null_mut();
        let v = values(kb, values_ptr, len)?;
        let l = Engine::new(kb)
            .label(&v)
            .map_err(|e| (GvStatus::Failure, e.to_string()))?;
        *slot = into_c(l.as_str().to_string());
        Ok(GvStatus::Ok)
    })
}

/// Verdict on the proposed treatment encoded in the vector.
///
/// # Safety
/// `values_ptr` must point to `len` readable elements; `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn gv_kb_critique(
    kb: *const GvKb,
    values_ptr: *const u16,
    len: usize,
    verdict: *mut GvVerdict,
) -> GvStatus {
    guard(|| {
        let kb = &deref(kb, "kb")?.kb;
        let slot = out(verdict, "verdict")?;
        let v = values(kb, values_ptr, len)?;
        let got = Engine::new(kb)
            .critique(&v)
            .map_err(|e| (GvStatus::Failure, e.to_string()))?;
        *slot = match got {
            Verdict::Conform => GvVerdict::Conform,
            Verdict::NotOptimal => GvVerdict::NotOptimal,
            Verdict::NonConform => GvVerdict::NonConform,
        };
        Ok(GvStatus::Ok)
    })
}

/// Enumerates, labels, learns and factorizes. `jobs` of 0 means 1.
///
/// # Safety
/// `kb` must be a live handle; `out_tree` writable.
#[no_mangle]
pub unsafe extern "C" fn gv_tree_build(
    kb: *const GvKb,
    jobs: usize,
    out_tree: *mut *mut GvTree,
) -> GvStatus {
    guard(|| {
        let kb = &deref(kb, "kb")?.kb;
        let slot = out(out_tree, "out")?;
        *slot = ptr::null_mut();
        let opts = PipelineOptions {
            jobs: jobs.max(1),
            ..PipelineOptions::default()
        };
        let outcome = run(kb, opts, &mut std::io::sink()).map_err(|e| {
            let status = match e {
                PipelineError::Invalid(_) => GvStatus::InvalidKb,
                _ => GvStatus::Failure,
            };
            (status, e.to_string())
        })?;
        *slot = Box::into_raw(Box::new(GvTree {
            raw: outcome.tree,
            factored: outcome.factored,
        }));
        Ok(GvStatus::Ok)
    })
}

/// # Safety
/// `tree` must come from `gv_tree_build` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gv_tree_free(tree: *mut GvTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Node counts before and after factorization.
///
/// # Safety
/// `tree` must be a live handle; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gv_tree_node_count(
    tree: *const GvTree,
    raw: *mut usize,
    factored: *mut usize,
) -> GvStatus {
    guard(|| {
        let t = deref(tree, "tree")?;
        *out(raw, "raw")? = t.raw.node_count();
        *out(factored, "factored")? = t.factored.node_count();
        Ok(GvStatus::Ok)
    })
}

/// Renders the factored tree.
///
/// # Safety
/// `tree` must be a live handle; `rendered` writable.
#[no_mangle]
pub unsafe extern "C" fn gv_tree_render(
    tree: *const GvTree,
    format: GvFormat,
    rendered: *mut *mut c_char,
) -> GvStatus {
    guard(|| {
        let t = deref(tree, "tree")?;
        let slot = out(rendered, "rendered")?;
        let f = match format {
            GvFormat::Text => Format::Text,
            GvFormat::Dot => Format::Dot,
            GvFormat::Json => Format::Json,
        };
        *slot = into_c(render(&t.factored, f));
        Ok(GvStatus::Ok)
    })
}

/// Checks the factored tree against `kb` on every realistic vector.
/// Returns `GV_STATUS_DIVERGENT` when they disagree anywhere; the last
/// error then names the first witness.
///
/// # Safety
/// Both handles must be live; `divergences` may be null.
#[no_mangle]
pub unsafe extern "C" fn gv_tree_verify(
    tree: *const GvTree,
    kb: *const GvKb,
    divergences: *mut u64,
) -> GvStatus {
    guard(|| {
        let t = deref(tree, "tree")?;
        let kb = &deref(kb, "kb")?.kb;
        let opts = VerifyOptions {
            max_witnesses: 1,
            ..VerifyOptions::default()
        };
        let report = verify(kb, &t.factored, opts)
            .map_err(|e| (GvStatus::InvalidArgument, e.to_string()))?;
        if let Some(n) = divergences.as_mut() {
            *n = report.divergences;
        }
        match report.witnesses.first() {
            None => Ok(GvStatus::Ok),
            Some(w) => Err((
                GvStatus::Divergent,
                format!("{}: tree {} / dss {}", w.vector, w.tree, w.dss),
            )),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let status = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(status, GvStatus::Panic);
        assert!(!gv_last_error().is_null());
        assert_eq!(guard(|| Ok(GvStatus::Ok)), GvStatus::Ok);
        assert!(gv_last_error().is_null());
    }

    #[test]
    fn errors_are_thread_local() {
        set_error("here");
        std::thread::spawn(|| assert!(gv_last_error().is_null()))
            .join()
            .unwrap();
        assert!(!gv_last_error().is_null());
    }

    #[test]
    fn interior_nul_is_replaced() {
        let s = into_c("a\0b".into());
        assert_eq!(unsafe { CStr::from_ptr(s) }.to_str().unwrap(), "a b");
        unsafe { gv_string_free(s) };
    }
}
