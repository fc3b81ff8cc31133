//! C ABI for the seqcheck deadlock checker.
//!
//! Sessions are opaque handles fed incrementally with process histories.
//! Every fallible call returns a [`SeqcheckStatus`]; on failure a message is
//! available from [`seqcheck_last_error`] on the same thread. Strings handed
//! out by this library must be released with [`seqcheck_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use seqcheck::cli::check_model;
use seqcheck::model::{Envelope, Mode, VerdictClass};
use seqcheck::parser::{detect_format, parse_abstract, parse_dsl, Format};
use seqcheck::report::Report;
use seqcheck::stream::{Event, StreamSession, Token};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcheckStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EngineError = 4,
    InvalidArgument = 5,
    NotFinished = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcheckMode {
    /// Decided by the input: DSL is strict, character strings are abstract.
    Auto = 0,
    Strict = 1,
    Abstract = 2,
}

/// Verdict classes, numbered like the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqcheckVerdict {
    NoDeadlock = 0,
    Deadlock = 2,
    Illegal = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqcheckEnvelope {
    pub tag: u32,
    pub source: u32,
    pub destination: u32,
    pub communicator: u32,
}

/// Opaque incremental checking session.
pub struct SeqcheckSession {
    inner: StreamSession,
    finished: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SeqcheckStatus, msg: impl Into<String>) -> SeqcheckStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SeqcheckStatus) -> SeqcheckStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SeqcheckStatus::Panic, "internal panic"))
}

fn verdict_code(v: VerdictClass) -> SeqcheckVerdict {
    match v {
        VerdictClass::Ok => SeqcheckVerdict::NoDeadlock,
        VerdictClass::Deadlock => SeqcheckVerdict::Deadlock,
        VerdictClass::Illegal => SeqcheckVerdict::Illegal,
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, SeqcheckStatus> {
    if p.is_null() {
        return Err(fail(SeqcheckStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(SeqcheckStatus::InvalidUtf8, format!("argument is not UTF-8: {e}")))
}

fn export_json(report: &Report, out: *mut *mut c_char) {
    if !out.is_null() {
        let json = CString::new(report.to_json()).expect("JSON has no nul bytes");
        unsafe { *out = json.into_raw() };
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn seqcheck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn seqcheck_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a session. Returns NULL only on allocation failure.
#[no_mangle]
pub extern "C" fn seqcheck_session_new(mode: SeqcheckMode) -> *mut SeqcheckSession {
    let fixed = match mode {
        SeqcheckMode::Auto => None,
        SeqcheckMode::Strict => Some(Mode::Strict),
        SeqcheckMode::Abstract => Some(Mode::Abstract),
    };
    Box::into_raw(Box::new(SeqcheckSession {
        inner: StreamSession::new(fixed),
        finished: false,
    }))
}

/// # Safety
/// `session` must be NULL or a pointer returned by [`seqcheck_session_new`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_free(session: *mut SeqcheckSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn apply(session: *mut SeqcheckSession, event: Event) -> SeqcheckStatus {
    let Some(s) = session.as_mut() else {
        return fail(SeqcheckStatus::NullPointer, "null session");
    };
    let is_end = event == Event::End;
    match s.inner.apply(event) {
        Ok(()) => {
            s.finished |= is_end;
            SeqcheckStatus::Ok
        }
        Err(e) => fail(SeqcheckStatus::EngineError, e.to_string()),
    }
}

/// Appends abstract characters (UTF-8, whitespace ignored) to `rank`.
/// An empty string declares the process without adding messages.
///
/// # Safety
/// `session` must be a live session handle and `chars` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_append_chars(
    session: *mut SeqcheckSession,
    rank: u32,
    chars: *const c_char,
) -> SeqcheckStatus {
    guard(|| {
        let text = match read_str(chars) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let tokens = text.chars().filter(|c| !c.is_whitespace()).map(Token::Char).collect();
        apply(session, Event::Append { rank, tokens })
    })
}

/// Appends `len` envelopes to `rank`. Send or receive is inferred from
/// whether `rank` is the source or the destination.
///
/// # Safety
/// `session` must be a live session handle; `envelopes` must point to `len`
/// readable elements (it may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_append_envelopes(
    session: *mut SeqcheckSession,
    rank: u32,
    envelopes: *const SeqcheckEnvelope,
    len: usize,
) -> SeqcheckStatus {
    guard(|| {
        let items: &[SeqcheckEnvelope] = match (envelopes.is_null(), len) {
            (_, 0) => &[],
            (true, _) => return fail(SeqcheckStatus::NullPointer, "null envelope array"),
            (false, n) => std::slice::from_raw_parts(envelopes, n),
        };
        let tokens = items
            .iter()
            .map(|e| Token::Envelope(Envelope::new(e.tag, e.source, e.destination, e.communicator)))
            .collect();
        apply(session, Event::Append { rank, tokens })
    })
}

/// Marks `rank` as complete.
///
/// # Safety
/// `session` must be a live session handle.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_close(session: *mut SeqcheckSession, rank: u32) -> SeqcheckStatus {
    guard(|| apply(session, Event::Close(rank)))
}

/// Applies one line of the text event protocol (`append`, `close`, `end`).
///
/// # Safety
/// `session` must be a live session handle and `line` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_event(session: *mut SeqcheckSession, line: *const c_char) -> SeqcheckStatus {
    guard(|| {
        let text = match read_str(line) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match Event::parse(text) {
            Ok(Some(ev)) => apply(session, ev),
            Ok(None) => SeqcheckStatus::Ok,
            Err(e) => fail(SeqcheckStatus::ParseError, e.to_string()),
        }
    })
}

/// Ends the stream and stores the verdict. Every process must be closed;
/// after a failed finish the session accepts no further events.
///
/// # Safety
/// `session` must be a live session handle; `verdict` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_finish(
    session: *mut SeqcheckSession,
    verdict: *mut SeqcheckVerdict,
) -> SeqcheckStatus {
    guard(|| {
        let status = apply(session, Event::End);
        if status != SeqcheckStatus::Ok {
            return status;
        }
        seqcheck_session_verdict(session, verdict)
    })
}

/// Verdict of a finished session.
///
/// # Safety
/// `session` must be a live session handle; `verdict` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_verdict(
    session: *const SeqcheckSession,
    verdict: *mut SeqcheckVerdict,
) -> SeqcheckStatus {
    guard(|| {
        let Some(s) = session.as_ref() else {
            return fail(SeqcheckStatus::NullPointer, "null session");
        };
        match s.inner.verdict() {
            Some(v) if s.finished => {
                if !verdict.is_null() {
                    *verdict = verdict_code(v.class());
                }
                SeqcheckStatus::Ok
            }
            _ => fail(SeqcheckStatus::NotFinished, "session has not been finished"),
        }
    })
}

/// JSON report of a finished session. Free `*json` with
/// [`seqcheck_string_free`].
///
/// # Safety
/// `session` must be a live session handle; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_session_report_json(
    session: *const SeqcheckSession,
    json: *mut *mut c_char,
) -> SeqcheckStatus {
    guard(|| {
        let Some(s) = session.as_ref() else {
            return fail(SeqcheckStatus::NullPointer, "null session");
        };
        if json.is_null() {
            return fail(SeqcheckStatus::NullPointer, "null output pointer");
        }
        match s.inner.report() {
            Some(report) if s.finished => {
                export_json(&report, json);
                SeqcheckStatus::Ok
            }
            _ => fail(SeqcheckStatus::NotFinished, "session has not been finished"),
        }
    })
}

/// Checks a whole model given as text (DSL or abstract strings). `json` may
/// be NULL; otherwise it receives a report to free with
/// [`seqcheck_string_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string; `verdict` and `json` must each be
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_check_text(
    text: *const c_char,
    mode: SeqcheckMode,
    verdict: *mut SeqcheckVerdict,
    json: *mut *mut c_char,
) -> SeqcheckStatus {
    guard(|| {
        let text = match read_str(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let format = detect_format(text);
        if mode == SeqcheckMode::Strict && format != Format::Dsl {
            return fail(SeqcheckStatus::InvalidArgument, "strict mode needs a DSL model");
        }
        let parsed = match format {
            Format::Dsl => parse_dsl(text),
            Format::Abstract => parse_abstract(text),
        };
        let model = match parsed {
            Ok(m) if mode == SeqcheckMode::Abstract => m.to_abstract(),
            Ok(m) => m,
            Err(e) => return fail(SeqcheckStatus::ParseError, e.to_string()),
        };
        let report = check_model(&model);
        if !verdict.is_null() {
            *verdict = verdict_code(report.verdict);
        }
        export_json(&report, json);
        SeqcheckStatus::Ok
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn seqcheck_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
