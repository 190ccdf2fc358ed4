//! C ABI over `spikeq`.
//!
//! Every fallible function returns a [`SpikeqStatus`]; on failure the message
//! is available from [`spikeq_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new`/`*_load`/`*_preset` style functions and
//! released with the matching `*_free`. Complex sequences cross the boundary
//! as interleaved `(re, im)` doubles, symbol decisions as `uint32_t` indices
//! into the constellation.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use spikeq::encoding::{ternary_encode, TernaryEncoderConfig};
use spikeq::equalizers::EqualizerKind;
use spikeq::harness::{self, ExperimentConfig, Receiver};
use spikeq::link::{sigma2_for, transmit, Constellation, FirChannel};
use spikeq::rng::{Purpose, SeedTree};
use spikeq::{Error, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpikeqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Config = 4,
    MapInfeasible = 5,
    Divergence = 6,
    MissingCheckpoint = 7,
    Io = 8,
    CorruptCheckpoint = 9,
    Singular = 10,
    Internal = 11,
}

/// Resolved experiment configuration.
pub struct SpikeqConfig {
    inner: ExperimentConfig,
}

/// A receiver bound to the configuration it was loaded with.
pub struct SpikeqEqualizer {
    config: ExperimentConfig,
    receiver: Receiver,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> SpikeqStatus {
    match e {
        Error::Config(_) => SpikeqStatus::Config,
        Error::MapInfeasible { .. } => SpikeqStatus::MapInfeasible,
        Error::Divergence { .. } => SpikeqStatus::Divergence,
        Error::MissingCheckpoint(_) => SpikeqStatus::MissingCheckpoint,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => SpikeqStatus::Io,
        Error::CorruptCheckpoint(_) | Error::CheckpointVersion { .. } => SpikeqStatus::CorruptCheckpoint,
        Error::Singular(_) => SpikeqStatus::Singular,
        Error::Shape(_) | Error::LengthMismatch { .. } | Error::StaleTape { .. } => SpikeqStatus::Shape,
        _ => SpikeqStatus::InvalidArgument,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn call(f: impl FnOnce() -> Result<(), Fail>) -> SpikeqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpikeqStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("`{name}` must not be NULL"));
            SpikeqStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            SpikeqStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            SpikeqStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("`{name}` is not valid UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, name: &'static str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, name).map(Some)
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn get_mut<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Fail::Null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        Ok(&mut [])
    } else if p.is_null() {
        Err(Fail::Null(name))
    } else {
        Ok(std::slice::from_raw_parts_mut(p, len))
    }
}

fn new_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nuls removed").into_raw()
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spikeq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failed call on this thread, or NULL. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn spikeq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn spikeq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Preset configuration for `name` (`proakis-a|b|c`, or `identity`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_preset(name: *const c_char, out: *mut *mut SpikeqConfig) -> SpikeqStatus {
    call(|| {
        let out = get_mut(out, "out")?;
        let inner = ExperimentConfig::for_channel(text(name, "name")?)?;
        *out = Box::into_raw(Box::new(SpikeqConfig { inner }));
        Ok(())
    })
}

/// Configuration from a TOML document overlaid on its preset.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_from_toml(toml: *const c_char, out: *mut *mut SpikeqConfig) -> SpikeqStatus {
    call(|| {
        let out = get_mut(out, "out")?;
        let inner = ExperimentConfig::from_toml(text(toml, "toml")?, "<toml>", None)?;
        *out = Box::into_raw(Box::new(SpikeqConfig { inner }));
        Ok(())
    })
}

/// Resolved configuration as TOML; free with `spikeq_string_free`.
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_to_toml(cfg: *const SpikeqConfig, out: *mut *mut c_char) -> SpikeqStatus {
    call(|| {
        let cfg = get(cfg, "cfg")?;
        *get_mut(out, "out")? = new_string(cfg.inner.to_toml());
        Ok(())
    })
}

/// Hex SHA-256 of the resolved configuration; free with `spikeq_string_free`.
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_hash(cfg: *const SpikeqConfig, out: *mut *mut c_char) -> SpikeqStatus {
    call(|| {
        let cfg = get(cfg, "cfg")?;
        *get_mut(out, "out")? = new_string(cfg.inner.hash());
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_set_seed(cfg: *mut SpikeqConfig, seed: u64) -> SpikeqStatus {
    call(|| {
        get_mut(cfg, "cfg")?.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_set_epochs(cfg: *mut SpikeqConfig, epochs: usize) -> SpikeqStatus {
    call(|| {
        let cfg = get_mut(cfg, "cfg")?;
        let mut next = cfg.inner.clone();
        next.training.epochs = epochs;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// Selects the equalizer by name (`snn_dfe`, `zf`, `map`, ...).
///
/// # Safety
/// `cfg` must be a live configuration handle, `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_set_equalizer(cfg: *mut SpikeqConfig, name: *const c_char) -> SpikeqStatus {
    call(|| {
        let cfg = get_mut(cfg, "cfg")?;
        cfg.inner.equalizer = text(name, "name")?.parse::<EqualizerKind>()?;
        Ok(())
    })
}

/// Replaces the sweep grid.
///
/// # Safety
/// `cfg` must be a live configuration handle; `ebn0_db` must point to `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_set_sweep_grid(
    cfg: *mut SpikeqConfig,
    ebn0_db: *const f64,
    len: usize,
) -> SpikeqStatus {
    call(|| {
        let cfg = get_mut(cfg, "cfg")?;
        let mut next = cfg.inner.clone();
        next.sweep.ebn0_db = slice(ebn0_db, len, "ebn0_db")?.to_vec();
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a configuration handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn spikeq_config_free(cfg: *mut SpikeqConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates `n_symbols` symbols over the configured channel at `ebn0_db`.
/// Writes the transmitted indices to `tx_indices[n_symbols]` and the received
/// samples to `rx_pairs[2 * n_symbols]`.
///
/// # Safety
/// `cfg` must be a live configuration handle; the output buffers must hold
/// the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn spikeq_transmit(
    cfg: *const SpikeqConfig,
    ebn0_db: f64,
    seed: u64,
    n_symbols: usize,
    tx_indices: *mut u32,
    rx_pairs: *mut f64,
) -> SpikeqStatus {
    call(|| {
        let cfg = &get(cfg, "cfg")?.inner;
        let tx = slice_mut(tx_indices, n_symbols, "tx_indices")?;
        let rx = slice_mut(rx_pairs, 2 * n_symbols, "rx_pairs")?;
        let h = FirChannel::by_name(&cfg.channel)?;
        let c = Constellation::by_name(&cfg.constellation)?;
        let seeds = SeedTree::new(seed);
        let b = transmit(
            &c,
            &h,
            sigma2_for(ebn0_db, c.bits_per_symbol()),
            n_symbols,
            &mut seeds.stream(Purpose::Data, 0),
            &mut seeds.stream(Purpose::Noise, 0),
        )?;
        for (o, &i) in tx.iter_mut().zip(&b.indices) {
            *o = i as u32;
        }
        for (o, y) in rx.chunks_exact_mut(2).zip(&b.received) {
            o[0] = y.re;
            o[1] = y.im;
        }
        Ok(())
    })
}

/// Ternary spike code of `y`: `m_bits` entries in `{-1, 0, 1}`, MSB first.
///
/// # Safety
/// `out` must hold `out_len >= m_bits` bytes.
#[no_mangle]
pub unsafe extern "C" fn spikeq_ternary_encode(
    y: f64,
    m_bits: u32,
    y_max: f64,
    out: *mut i8,
    out_len: usize,
) -> SpikeqStatus {
    call(|| {
        let cfg = TernaryEncoderConfig::new(m_bits, y_max)?;
        if out_len < m_bits as usize {
            return Err(Fail::Arg(format!("output holds {out_len} entries, {m_bits} needed")));
        }
        let out = slice_mut(out, out_len, "out")?;
        out[..m_bits as usize].copy_from_slice(&ternary_encode(y, &cfg));
        Ok(())
    })
}

/// Receiver for the configured equalizer. Neural equalizers need
/// `checkpoint`; classical ones ignore it and may pass NULL.
///
/// # Safety
/// `cfg` must be a live configuration handle, `checkpoint` NULL or a
/// NUL-terminated path, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spikeq_equalizer_load(
    cfg: *const SpikeqConfig,
    checkpoint: *const c_char,
    out: *mut *mut SpikeqEqualizer,
) -> SpikeqStatus {
    call(|| {
        let config = get(cfg, "cfg")?.inner.clone();
        let out = get_mut(out, "out")?;
        let ck = opt_text(checkpoint, "checkpoint")?.map(Path::new);
        let receiver = harness::load_receiver(&config, ck)?;
        *out = Box::into_raw(Box::new(SpikeqEqualizer { config, receiver }));
        Ok(())
    })
}

/// Equalizes `n` received samples. `out_indices[k]` estimates the symbol sent
/// at `k - *out_delay`; the first `*out_delay` entries are placeholders.
/// Classical receivers are designed for the noise level of `ebn0_db`.
///
/// # Safety
/// `eq` must be a live equalizer handle, `rx_pairs` must hold `2 n`
/// doubles, `out_indices` `n` entries; `out_delay` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn spikeq_equalizer_run(
    eq: *const SpikeqEqualizer,
    ebn0_db: f64,
    rx_pairs: *const f64,
    n: usize,
    out_indices: *mut u32,
    out_delay: *mut usize,
) -> SpikeqStatus {
    call(|| {
        let eq = get(eq, "eq")?;
        let rx = slice(rx_pairs, 2 * n, "rx_pairs")?;
        let out = slice_mut(out_indices, n, "out_indices")?;
        let y: Vec<C64> = rx.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let res = eq.receiver.equalize(&eq.config, ebn0_db, &[y])?.remove(0);
        for (o, &i) in out.iter_mut().zip(&res.symbol_indices) {
            *o = i as u32;
        }
        if let Some(d) = out_delay.as_mut() {
            *d = res.decision_delay;
        }
        Ok(())
    })
}

/// # Safety
/// `eq` must be NULL or an equalizer handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn spikeq_equalizer_free(eq: *mut SpikeqEqualizer) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Runs the `train` command into `out_dir`. `checkpoint` (may be NULL)
/// overrides the checkpoint path; `final_loss` (may be NULL) receives the
/// mean loss of the last 50 epochs.
///
/// # Safety
/// `cfg` must be a live configuration handle, the strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn spikeq_train(
    cfg: *const SpikeqConfig,
    out_dir: *const c_char,
    checkpoint: *const c_char,
    final_loss: *mut f64,
) -> SpikeqStatus {
    call(|| {
        let cfg = &get(cfg, "cfg")?.inner;
        let out = Path::new(text(out_dir, "out_dir")?);
        let ck = opt_text(checkpoint, "checkpoint")?.map(Path::new);
        let r = harness::cmd_train(cfg, out, ck, |_| {})?;
        if let Some(l) = final_loss.as_mut() {
            *l = r.tail_loss;
        }
        Ok(())
    })
}

/// Runs the `sweep` command into `out_dir`.
///
/// # Safety
/// `cfg` must be a live configuration handle, the strings NUL-terminated
/// (`checkpoint` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn spikeq_sweep(
    cfg: *const SpikeqConfig,
    checkpoint: *const c_char,
    out_dir: *const c_char,
) -> SpikeqStatus {
    call(|| {
        let cfg = &get(cfg, "cfg")?.inner;
        let out = Path::new(text(out_dir, "out_dir")?);
        let ck = opt_text(checkpoint, "checkpoint")?.map(Path::new);
        harness::cmd_sweep(cfg, ck, out)?;
        Ok(())
    })
}
