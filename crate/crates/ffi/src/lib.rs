//! C ABI over the tract-forge engine.
//!
//! Every entry point returns a [`TfStatus`]; on failure the message is
//! available from [`tf_last_error_message`] on the same thread. Panics are
//! caught at the boundary and reported as `TF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tract_forge::area::ConstrictionClass;
use tract_forge::engine::{concat, ControlSnapshot, Engine, EngineConfig, EngineError};
use tract_forge::glottis::GlottalControls;
use tract_forge::io::{self, IoError, SUPPORTED_SAMPLE_RATES};
use tract_forge::kinematics::{ArticulatoryState, ChannelLayout};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    CalibrationMissing = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfConstrictionClass {
    Open = 0,
    Fricative = 1,
    Occluded = 2,
}

/// One control update. Out-of-range values are clamped; NaN takes the neutral value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfControl {
    /// Jaw opening in [0, 1].
    pub r: f64,
    /// Tongue advancement in [-1, 1].
    pub theta: f64,
    /// Thumb, index, middle, ring, pinky in [0, 1].
    pub fingers: [f64; 5],
    /// Fundamental frequency in Hz.
    pub f0: f64,
    /// 0 = breathy, 1 = pressed.
    pub tenseness: f64,
    /// Nonzero to voice.
    pub voiced: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfConstriction {
    pub index: usize,
    /// Minimum cross-sectional area in cm^2.
    pub area: f64,
    pub kind: TfConstrictionClass,
}

/// Opaque engine handle.
pub struct TfEngine {
    engine: Engine,
    scratch: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

const VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version contains a nul byte"),
};

struct Failure(TfStatus, String);

impl Failure {
    fn new(status: TfStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::CalibrationMissing => TfStatus::CalibrationMissing,
            _ => TfStatus::InvalidArgument,
        };
        Self::new(status, e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = match e {
            IoError::File { .. } => TfStatus::Io,
            _ => TfStatus::Parse,
        };
        Self::new(status, e)
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f` with panics caught; records the message of any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            TfStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a pointer valid for the call.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(TfStatus::NullPointer, format!("{name} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, and the caller does not alias it during the call.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(TfStatus::NullPointer, format!("{name} is null")))
}

fn path<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::new(TfStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and nul-terminated by contract.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(TfStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn check_rate(sample_rate: u32) -> Result<(), Failure> {
    if SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
        Ok(())
    } else {
        Err(Failure::new(
            TfStatus::InvalidArgument,
            format!("sample rate {sample_rate} not in {SUPPORTED_SAMPLE_RATES:?}"),
        ))
    }
}

/// Library version, e.g. "0.1.0". Static; do not free.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or "" after a success.
/// Valid until the next call on this thread; do not free.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an engine at 48000 or 44100 Hz with the given noise seed.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_new(sample_rate: u32, seed: u64, out: *mut *mut TfEngine) -> TfStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        check_rate(sample_rate)?;
        let engine = Engine::new(EngineConfig {
            sample_rate,
            seed,
            ..EngineConfig::default()
        })?;
        let block = engine.config().block_size;
        *out = Box::into_raw(Box::new(TfEngine {
            engine,
            scratch: vec![0.0; block],
        }));
        Ok(())
    })
}

/// Frees an engine. Null is a no-op.
///
/// # Safety
/// `engine` must come from `tf_engine_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_free(engine: *mut TfEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Samples per block; `tf_engine_render` lengths must be a multiple of it.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_block_size(engine: *const TfEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.engine.config().block_size)
}

/// Number of tract sections, i.e. the length `tf_engine_area_function` fills.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_sections(engine: *const TfEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.engine.config().sections)
}

/// Posts a control update; the latest one wins at the next block boundary.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_push_control(engine: *mut TfEngine, control: *const TfControl) -> TfStatus {
    guard(|| {
        let e = non_null_mut(engine, "engine")?;
        let c = non_null(control, "control")?;
        let snapshot = ControlSnapshot::new(
            ArticulatoryState {
                r: c.r,
                theta: c.theta,
                fingers: c.fingers,
            },
            GlottalControls {
                f0: c.f0,
                tenseness: c.tenseness,
                voiced: c.voiced != 0,
            },
        );
        e.engine.push_control(snapshot.sanitized());
        Ok(())
    })
}

/// Renders `len` samples into `out`; `len` must be a multiple of the block size.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_render(engine: *mut TfEngine, out: *mut f32, len: usize) -> TfStatus {
    guard(|| {
        let e = non_null_mut(engine, "engine")?;
        if out.is_null() {
            return Err(Failure::new(TfStatus::NullPointer, "out is null"));
        }
        let block = e.scratch.len();
        if !len.is_multiple_of(block) {
            return Err(Failure::new(
                TfStatus::InvalidArgument,
                format!("length {len} is not a multiple of the block size {block}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for chunk in out.chunks_exact_mut(block) {
            e.engine.render_into(&mut e.scratch);
            for (o, s) in chunk.iter_mut().zip(&e.scratch) {
                *o = *s as f32;
            }
        }
        Ok(())
    })
}

/// Copies the current area function (cm^2, glottis first) into `out`.
/// `written` receives the section count even when `cap` is too small.
///
/// # Safety
/// `out` must be valid for `cap` writes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_area_function(
    engine: *const TfEngine,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> TfStatus {
    guard(|| {
        let e = non_null(engine, "engine")?;
        let areas = &e.engine.areas().0;
        if let Some(w) = written.as_mut() {
            *w = areas.len();
        }
        if cap < areas.len() {
            return Err(Failure::new(
                TfStatus::BufferTooSmall,
                format!("need {} values, got room for {cap}", areas.len()),
            ));
        }
        if out.is_null() {
            return Err(Failure::new(TfStatus::NullPointer, "out is null"));
        }
        ptr::copy_nonoverlapping(areas.as_ptr(), out, areas.len());
        Ok(())
    })
}

/// Location, area and class of the narrowest section.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_engine_constriction(engine: *const TfEngine, out: *mut TfConstriction) -> TfStatus {
    guard(|| {
        let e = non_null(engine, "engine")?;
        let out = non_null_mut(out, "out")?;
        let c = e.engine.constriction();
        *out = TfConstriction {
            index: c.index,
            area: c.min_area,
            kind: match c.class {
                ConstrictionClass::Open => TfConstrictionClass::Open,
                ConstrictionClass::Fricative => TfConstrictionClass::Fricative,
                ConstrictionClass::Occluded => TfConstrictionClass::Occluded,
            },
        };
        Ok(())
    })
}

/// Renders a gesture CSV to a 16-bit WAV with the default channel layout and voice.
/// `calibration` is the JSON written by `tract-forge calibrate`.
///
/// # Safety
/// Paths must be nul-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn tf_render_gesture_file(
    gesture: *const c_char,
    calibration: *const c_char,
    wav_out: *const c_char,
    sample_rate: u32,
    seed: u64,
) -> TfStatus {
    guard(|| {
        let gesture = path(gesture, "gesture")?;
        let wav_out = path(wav_out, "wav_out")?;
        let calib = if calibration.is_null() {
            None
        } else {
            Some(io::read_calibration(path(calibration, "calibration")?)?)
        };
        check_rate(sample_rate)?;
        let frames = io::read_gesture_csv(gesture)?;
        let mut engine = Engine::new(EngineConfig {
            sample_rate,
            seed,
            ..EngineConfig::default()
        })?;
        let blocks = engine.replay(&frames, calib.as_ref(), &ChannelLayout::default(), GlottalControls::default())?;
        io::write_wav(wav_out, &concat(&blocks), sample_rate)?;
        Ok(())
    })
}
