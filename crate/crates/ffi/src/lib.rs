//! C ABI over the `rbanswer` deciders.
//!
//! A problem file is parsed once into an opaque [`RbProblem`] handle; each
//! query of it can then be decided by name. Every fallible call returns an
//! [`RbStatus`]; on failure [`rb_last_error_message`] describes the error for
//! the calling thread. Strings handed out by the library are released with
//! [`rb_string_free`], handles with [`rb_problem_free`].
//!
//! No call unwinds into C: panics are caught and reported as
//! [`RbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rbanswer::decide::{decide, Answer, DecideOptions};
use rbanswer::parse::{parse_problem, ProblemFile};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// The problem text did not parse or validate.
    Parse = 3,
    /// No query of that name (or index) in the problem.
    NoSuchQuery = 4,
    /// The decision pipeline reported an error.
    Decide = 5,
    /// Internal error; the library caught a panic.
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbAnswer {
    Answerable = 0,
    NotAnswerable = 1,
    Unknown = 2,
}

/// Decider settings. Obtain defaults from [`rb_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RbOptions {
    /// Make the query's constants accessible (also enabled by the file's own
    /// `option accessible-constants true`).
    pub accessible_constants: bool,
    /// Largest ID width sent straight to linearization.
    pub width_threshold: u32,
    /// Rounds for budgeted chases.
    pub round_budget: u32,
    /// Facts any single chase may hold.
    pub fact_budget: u64,
}

/// A parsed problem file. Opaque to C.
pub struct RbProblem {
    file: ProblemFile,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

/// Run `f`, converting `Err` and panics into a status plus error message.
fn guard(f: impl FnOnce() -> Result<(), (RbStatus, String)>) -> RbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            RbStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RbStatus, String)> {
    if p.is_null() {
        return Err((RbStatus::NullArg, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (RbStatus::Utf8, format!("{what} is not UTF-8: {e}")))
}

fn null_arg(what: &str) -> (RbStatus, String) {
    (RbStatus::NullArg, format!("{what} is null"))
}

fn decide_options(file: &ProblemFile, opts: Option<&RbOptions>) -> DecideOptions {
    let o = opts.copied().unwrap_or_else(|| rb_options_default());
    let f = &file.options;
    DecideOptions {
        accessible_constants: o.accessible_constants || f.accessible_constants.unwrap_or(false),
        width_threshold: o.width_threshold as usize,
        round_budget: o.round_budget as usize,
        fact_budget: o.fact_budget as usize,
        ..DecideOptions::default()
    }
}

/// # Safety
/// Pointer arguments must be null or valid; see the public functions.
unsafe fn run_decide(
    problem: *const RbProblem,
    query: *const c_char,
    opts: *const RbOptions,
) -> Result<rbanswer::decide::Verdict, (RbStatus, String)> {
    let problem = problem.as_ref().ok_or_else(|| null_arg("problem"))?;
    let name = read_str(query, "query")?;
    let q = problem.file.query(name).ok_or_else(|| (RbStatus::NoSuchQuery, format!("no query named {name}")))?;
    let opts = decide_options(&problem.file, opts.as_ref());
    decide(&problem.file.schema, &q.cq, &opts).map_err(|e| (RbStatus::Decide, e.to_string()))
}

/// Default decider settings.
#[no_mangle]
pub extern "C" fn rb_options_default() -> RbOptions {
    let d = DecideOptions::default();
    RbOptions {
        accessible_constants: d.accessible_constants,
        width_threshold: d.width_threshold as u32,
        round_budget: d.round_budget as u32,
        fact_budget: d.fact_budget as u64,
    }
}

/// Parse a problem file. On success `*out` receives a handle to release with
/// [`rb_problem_free`]; on failure `*out` is set to null.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rb_problem_parse(text: *const c_char, out: *mut *mut RbProblem) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(text, "text")?;
        let file = parse_problem(text).map_err(|e| (RbStatus::Parse, e.to_string()))?;
        let names =
            file.queries.iter().map(|q| CString::new(q.name.as_str()).expect("query names are identifiers")).collect();
        *out = Box::into_raw(Box::new(RbProblem { file, names }));
        Ok(())
    })
}

/// Release a handle from [`rb_problem_parse`]. Null is ignored.
///
/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_problem_free(problem: *mut RbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of queries in the problem (0 for null).
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rb_problem_query_count(problem: *const RbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.file.queries.len())
}

/// Name of the query at `index`, borrowed from the handle (valid until it is
/// freed).
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rb_problem_query_name(
    problem: *const RbProblem,
    index: usize,
    out: *mut *const c_char,
) -> RbStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null_arg("problem"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let name = problem
            .names
            .get(index)
            .ok_or_else(|| (RbStatus::NoSuchQuery, format!("query index {index} out of range")))?;
        *out = name.as_ptr();
        Ok(())
    })
}

/// Decide the named query. `opts` may be null for defaults.
///
/// # Safety
/// `problem` must be a live handle, `query` a NUL-terminated string, `opts`
/// null or valid, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rb_decide_answer(
    problem: *const RbProblem,
    query: *const c_char,
    opts: *const RbOptions,
    out: *mut RbAnswer,
) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let v = run_decide(problem, query, opts)?;
        *out = match v.answer {
            Answer::Answerable => RbAnswer::Answerable,
            Answer::NotAnswerable => RbAnswer::NotAnswerable,
            Answer::Unknown(_) => RbAnswer::Unknown,
        };
        Ok(())
    })
}

/// Decide the named query and return the verdict as JSON
/// (`{answer, class, pipeline, witness, stats}`). On success `*out_json`
/// receives a string to release with [`rb_string_free`].
///
/// # Safety
/// As for [`rb_decide_answer`].
#[no_mangle]
pub unsafe extern "C" fn rb_decide_json(
    problem: *const RbProblem,
    query: *const c_char,
    opts: *const RbOptions,
    out_json: *mut *mut c_char,
) -> RbStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null_arg("out_json"));
        }
        *out_json = ptr::null_mut();
        let v = run_decide(problem, query, opts)?;
        let s = serde_json::to_string(&v).map_err(|e| (RbStatus::Decide, e.to_string()))?;
        *out_json = CString::new(s).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from [`rb_decide_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
