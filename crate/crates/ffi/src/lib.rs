//! C ABI for the ALPS chain and harness.
//!
//! Every fallible function returns an [`AlpsStatus`]. On failure the message
//! is available from [`alps_last_error`] on the same thread until the next
//! failing call. Objects are opaque and must be released with their `_free`
//! function. Mode and rung indices are 0-based.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use alps_core::config::RunConfig;
use alps_core::harness::simulate_run;
use alps_core::seed::master_rng;
use alps_core::sim::{Chain, SufficientStatSampler};
use alps_core::Error;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    Io = 5,
    Internal = 6,
}

/// Parsed and validated run configuration.
pub struct AlpsConfig {
    inner: RunConfig,
}

/// A running chain with its own random stream.
pub struct AlpsChain {
    chain: Chain<SufficientStatSampler>,
    rng: ChaCha8Rng,
}

/// Outcome of the last iteration of [`alps_chain_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AlpsStep {
    pub mode: usize,
    pub from_rung: usize,
    pub rung: usize,
    pub direction: i8,
    pub accepted: bool,
    pub mode_refreshed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn fail(status: AlpsStatus, msg: impl Into<String>) -> AlpsStatus {
    set_error(msg);
    status
}

fn from_core(err: Error) -> AlpsStatus {
    let status = match err {
        Error::Config(_) => AlpsStatus::Config,
        Error::Io(_) | Error::Json(_) => AlpsStatus::Io,
        _ => AlpsStatus::Domain,
    };
    fail(status, err.to_string())
}

fn guard<F: FnOnce() -> AlpsStatus>(f: F) -> AlpsStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(AlpsStatus::Internal, "panic inside alps"))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, AlpsStatus> {
    if p.is_null() {
        return Err(fail(AlpsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AlpsStatus::InvalidArgument, "string is not UTF-8"))
}

fn give<T>(out: *mut *mut T, value: T) -> AlpsStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    AlpsStatus::Ok
}

fn give_string(out: *mut *mut c_char, s: String) -> AlpsStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            AlpsStatus::Ok
        }
        Err(_) => fail(AlpsStatus::Internal, "string contains nul"),
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(AlpsStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

/// Message of the last failure on this thread, or an empty string. Owned by
/// the library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn alps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn alps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn alps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Two equal Gaussian modes in 16 dimensions.
#[no_mangle]
pub unsafe extern "C" fn alps_config_default(out: *mut *mut AlpsConfig) -> AlpsStatus {
    guard(|| {
        non_null!(out);
        give(
            out,
            AlpsConfig {
                inner: RunConfig::minimal(),
            },
        )
    })
}

/// Parses and validates a TOML configuration.
#[no_mangle]
pub unsafe extern "C" fn alps_config_from_toml(
    toml: *const c_char,
    out: *mut *mut AlpsConfig,
) -> AlpsStatus {
    guard(|| {
        non_null!(out);
        let text = match str_arg(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_toml_str(text).and_then(|c| c.validate().map(|_| c)) {
            Ok(inner) => give(out, AlpsConfig { inner }),
            Err(e) => from_core(e),
        }
    })
}

/// The configuration with all defaults filled in, as TOML. Free the result
/// with [`alps_string_free`].
#[no_mangle]
pub unsafe extern "C" fn alps_config_to_toml(
    config: *const AlpsConfig,
    out: *mut *mut c_char,
) -> AlpsStatus {
    guard(|| {
        non_null!(config, out);
        give_string(out, (*config).inner.to_toml())
    })
}

#[no_mangle]
pub unsafe extern "C" fn alps_config_free(config: *mut AlpsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Writes the number of rungs to `len` and, when `buf` holds at least that
/// many values, the inverse temperatures in increasing order. Passing a null
/// `buf` queries the length only.
#[no_mangle]
pub unsafe extern "C" fn alps_ladder_betas(
    config: *const AlpsConfig,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> AlpsStatus {
    guard(|| {
        non_null!(config, len);
        let ladder = match (*config).inner.ladder() {
            Ok(l) => l,
            Err(e) => return from_core(e),
        };
        let betas = ladder.betas();
        *len = betas.len();
        if buf.is_null() {
            return AlpsStatus::Ok;
        }
        if cap < betas.len() {
            return fail(
                AlpsStatus::InvalidArgument,
                format!("buffer holds {cap} values, ladder has {}", betas.len()),
            );
        }
        ptr::copy_nonoverlapping(betas.as_ptr(), buf, betas.len());
        AlpsStatus::Ok
    })
}

/// Starts a chain at the configured rung, in the configured mode or one drawn
/// from the weights.
#[no_mangle]
pub unsafe extern "C" fn alps_chain_new(
    config: *const AlpsConfig,
    seed: u64,
    out: *mut *mut AlpsChain,
) -> AlpsStatus {
    guard(|| {
        non_null!(config, out);
        let cfg = &(*config).inner;
        let built = (|| {
            let sampler = SufficientStatSampler::new(cfg.target()?);
            let ladder = cfg.ladder()?;
            let mut rng = master_rng(seed);
            let start = cfg.simulation.start_rung;
            let chain = match cfg.simulation.start_mode {
                Some(m) => Chain::new(sampler, ladder, m - 1, start)?,
                None => {
                    let mut c = Chain::from_weights(sampler, ladder, &mut rng)?;
                    let mode = c.state().mode;
                    c.reset(mode, start);
                    c
                }
            };
            Ok::<_, Error>(AlpsChain { chain, rng })
        })();
        match built {
            Ok(c) => give(out, c),
            Err(e) => from_core(e),
        }
    })
}

/// Advances the chain `n` iterations. `last` may be null.
#[no_mangle]
pub unsafe extern "C" fn alps_chain_step(
    chain: *mut AlpsChain,
    n: u64,
    last: *mut AlpsStep,
) -> AlpsStatus {
    guard(|| {
        non_null!(chain);
        let c = &mut *chain;
        let mut info = None;
        for _ in 0..n {
            info = Some(c.chain.step(&mut c.rng));
        }
        if let (Some(i), false) = (info, last.is_null()) {
            *last = AlpsStep {
                mode: i.mode,
                from_rung: i.from_rung,
                rung: i.rung,
                direction: i.direction,
                accepted: i.accepted,
                mode_refreshed: i.mode_refreshed,
            };
        }
        AlpsStatus::Ok
    })
}

/// Current mode, rung and inverse temperature. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn alps_chain_state(
    chain: *const AlpsChain,
    mode: *mut usize,
    rung: *mut usize,
    beta: *mut f64,
) -> AlpsStatus {
    guard(|| {
        non_null!(chain);
        let c = &(*chain).chain;
        let st = c.state();
        if !mode.is_null() {
            *mode = st.mode;
        }
        if !rung.is_null() {
            *rung = st.rung;
        }
        if !beta.is_null() {
            *beta = c.ladder().beta(st.rung);
        }
        AlpsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn alps_chain_free(chain: *mut AlpsChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Runs the configured simulation and returns its report as JSON. Free the
/// result with [`alps_string_free`].
#[no_mangle]
pub unsafe extern "C" fn alps_simulate_report(
    config: *const AlpsConfig,
    seed: u64,
    threads: usize,
    out: *mut *mut c_char,
) -> AlpsStatus {
    guard(|| {
        non_null!(config, out);
        match simulate_run(&(*config).inner, seed, threads.max(1)) {
            Ok(o) => give_string(out, o.report.to_json()),
            Err(e) => from_core(e),
        }
    })
}
