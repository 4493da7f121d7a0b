//! C interface to `deep-core`.
//!
//! Networks are opaque `DeepNetwork` handles created by the library and
//! released with `deep_network_free`. Every fallible call returns a
//! `DeepStatus`; on failure a message is kept per thread and can be read
//! with `deep_last_error_message` until the next failing call on that
//! thread. Panics never cross the boundary: they are caught and reported
//! as `DEEP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use deep_core::analysis::stability_certificate;
use deep_core::dynamics::free_equilibrium;
use deep_core::io::{load_network, save_network};
use deep_core::training::{logic_dataset, prune_rng, train};
use deep_core::{DeepError, Hyperparams, LogicOp, Network, Rule, TrainOptions};

/// Opaque network handle.
pub struct DeepNetwork {
    inner: Network,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &DeepError) -> DeepStatus {
    match err {
        DeepError::Io { .. } => DeepStatus::Io,
        DeepError::Parse { .. } => DeepStatus::Parse,
        DeepError::Divergence { .. } => DeepStatus::Numerical,
        DeepError::Training { source, .. } => status_of(source),
        _ => DeepStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(DeepError),
}

impl From<DeepError> for Failure {
    fn from(e: DeepError) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DeepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DeepStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer passed for `{what}`"));
            DeepStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(&msg);
            DeepStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            DeepStatus::Panic
        }
    }
}

unsafe fn net_ref<'a>(net: *const DeepNetwork) -> Result<&'a Network, Failure> {
    // SAFETY: the caller passes a handle from this library or NULL.
    unsafe { net.as_ref() }
        .map(|h| &h.inner)
        .ok_or(Failure::Null("net"))
}

unsafe fn c_str<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure::Invalid(format!("`{what}` is not valid UTF-8")))
}

fn emit(out: *mut *mut DeepNetwork, net: Network) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    // SAFETY: checked non-null; the caller owns the slot.
    unsafe { *out = Box::into_raw(Box::new(DeepNetwork { inner: net })) };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn deep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a complete directed network with uniform random parameters in
/// `[-init_scale, init_scale]`. Neurons `0..n_input` are inputs and the
/// last `n_output` are outputs.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn deep_network_new_complete(
    n_total: usize,
    n_input: usize,
    n_output: usize,
    init_scale: f64,
    seed: u64,
    out: *mut *mut DeepNetwork,
) -> DeepStatus {
    guard(|| {
        let net = Network::new_complete(n_total, n_input, n_output, init_scale, seed)?;
        emit(out, net)
    })
}

/// Reads a network file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn deep_network_load(
    path: *const c_char,
    out: *mut *mut DeepNetwork,
) -> DeepStatus {
    guard(|| {
        let path = unsafe { c_str(path, "path") }?;
        emit(out, load_network(Path::new(path))?)
    })
}

/// Writes a network file.
///
/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn deep_network_save(
    net: *const DeepNetwork,
    path: *const c_char,
) -> DeepStatus {
    guard(|| {
        let net = unsafe { net_ref(net) }?;
        let path = unsafe { c_str(path, "path") }?;
        save_network(net, Path::new(path))?;
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `net` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn deep_network_free(net: *mut DeepNetwork) {
    if !net.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Number of neurons, or 0 for NULL.
///
/// # Safety
/// `net` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn deep_network_n_total(net: *const DeepNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |h| h.inner.n_total())
}

/// Number of input neurons, or 0 for NULL.
///
/// # Safety
/// `net` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn deep_network_n_input(net: *const DeepNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |h| h.inner.n_input())
}

/// Weights plus biases still present, or 0 for NULL.
///
/// # Safety
/// `net` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn deep_network_parameter_count(net: *const DeepNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |h| h.inner.trainable_parameter_count())
}

/// Fraction of the complete graph's parameters that are absent.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn deep_network_sparsity(
    net: *const DeepNetwork,
    out: *mut f64,
) -> DeepStatus {
    guard(|| {
        let net = unsafe { net_ref(net) }?;
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        *out = net.sparsity()?;
        Ok(())
    })
}

/// Relaxes the free phase from input `x` with default hyperparameters and
/// writes the final state (`n_total` values) to `state`.
///
/// # Safety
/// `x` must point to `x_len` values and `state` to `state_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn deep_network_free_equilibrium(
    net: *const DeepNetwork,
    x: *const f64,
    x_len: usize,
    state: *mut f64,
    state_len: usize,
) -> DeepStatus {
    guard(|| {
        let net = unsafe { net_ref(net) }?;
        if x.is_null() && x_len > 0 {
            return Err(Failure::Null("x"));
        }
        if state.is_null() {
            return Err(Failure::Null("state"));
        }
        if state_len != net.n_total() {
            return Err(Failure::Invalid(format!(
                "state buffer holds {state_len} values, network has {} neurons",
                net.n_total()
            )));
        }
        let x = if x_len == 0 {
            &[][..]
        } else {
            // SAFETY: non-null with x_len elements per the contract.
            unsafe { std::slice::from_raw_parts(x, x_len) }
        };
        let eq = free_equilibrium(net, x, &Hyperparams::default())?;
        // SAFETY: non-null with state_len == n_total elements.
        let out = unsafe { std::slice::from_raw_parts_mut(state, state_len) };
        out.iter_mut().zip(eq.iter()).for_each(|(o, v)| *o = *v);
        Ok(())
    })
}

/// Sets `*certified` to 1 when every free neuron meets the stability
/// condition, else 0.
///
/// # Safety
/// `net` must be a live handle and `certified` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn deep_network_certified(
    net: *const DeepNetwork,
    certified: *mut i32,
) -> DeepStatus {
    guard(|| {
        let net = unsafe { net_ref(net) }?;
        let out = unsafe { certified.as_mut() }.ok_or(Failure::Null("certified"))?;
        *out = i32::from(stability_certificate(net).overall_certified);
        Ok(())
    })
}

/// Trains the network in place on a logic gate (`"and"`, `"or"` or
/// `"xor"`) with rule `"deep"` or `"asym"` and default hyperparameters.
/// `prune` is nonzero to enable pruning; `seed` drives the pruning lottery.
/// The last epoch's MSE goes to `final_mse` when it is not NULL.
///
/// # Safety
/// `net` must be a live handle, `task` and `rule` NUL-terminated strings and
/// `final_mse` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn deep_train(
    net: *mut DeepNetwork,
    task: *const c_char,
    rule: *const c_char,
    epochs: usize,
    prune: i32,
    seed: u64,
    final_mse: *mut f64,
) -> DeepStatus {
    guard(|| {
        let handle = unsafe { net.as_mut() }.ok_or(Failure::Null("net"))?;
        let task: LogicOp = unsafe { c_str(task, "task") }?.parse()?;
        let rule: Rule = unsafe { c_str(rule, "rule") }?.parse()?;
        if epochs == 0 {
            return Err(Failure::Invalid("epochs must be >= 1".into()));
        }
        let hp = Hyperparams {
            seed,
            ..Hyperparams::default()
        };
        let opts = TrainOptions {
            epochs,
            rule,
            prune: prune != 0,
            ..TrainOptions::default()
        };
        // Train a copy so a failure leaves the handle untouched.
        let mut work = handle.inner.clone();
        let record = train(
            &mut work,
            &logic_dataset(task),
            &hp,
            &opts,
            &mut prune_rng(seed),
        )?;
        handle.inner = work;
        if let Some(out) = unsafe { final_mse.as_mut() } {
            *out = record.mse.last().copied().unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
