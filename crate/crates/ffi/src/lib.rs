//! C ABI over the `thzmap` library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`ThzStatus`]; the message of the most recent failure on the calling
//! thread is available from [`thz_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use thzmap::propagation::{scale, trace_all, RadioConfig, RadioMap, ScalingSpec};
use thzmap::scenario::{generate_layout, rasterize, GridSpec};
use thzmap::sensing::{exact_majority_error, hard_vote, hoeffding_bound, segment_all, soft_vote};
use thzmap::{BeamSet, Error, Grid, OccupancyGrid, Tensor3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    OutOfDomain = 4,
    IndexOutOfRange = 5,
    GenerationFailed = 6,
    BufferTooSmall = 7,
    Io = 8,
    Internal = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ThzStatus {
    match e {
        Error::Index { .. } => ThzStatus::IndexOutOfRange,
        Error::Shape(_) => ThzStatus::ShapeMismatch,
        Error::Domain(_) => ThzStatus::OutOfDomain,
        Error::Argument(_) | Error::Config(_) => ThzStatus::InvalidArgument,
        Error::Generation(_) => ThzStatus::GenerationFailed,
        Error::Io(_) | Error::Json(_) | Error::Dataset(_) => ThzStatus::Io,
        Error::Stage { source, .. } => status_of(source),
    }
}

struct Fail(ThzStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ThzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThzStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            remember(msg);
            status
        }
        Err(_) => {
            remember("panic inside thzmap".into());
            ThzStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ThzStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            ThzStatus::BufferTooSmall,
            format!("{what} holds {len} elements, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn thz_status_message(status: ThzStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ThzStatus::Ok => b"ok\0",
        ThzStatus::NullPointer => b"null pointer argument\0",
        ThzStatus::InvalidArgument => b"invalid argument\0",
        ThzStatus::ShapeMismatch => b"shape mismatch\0",
        ThzStatus::OutOfDomain => b"value out of domain\0",
        ThzStatus::IndexOutOfRange => b"index out of range\0",
        ThzStatus::GenerationFailed => b"layout generation failed\0",
        ThzStatus::BufferTooSmall => b"output buffer too small\0",
        ThzStatus::Io => b"i/o error\0",
        ThzStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn thz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Grid geometry plus occupancy.
pub struct ThzScene {
    spec: GridSpec,
    occupancy: OccupancyGrid,
}

/// Dense `rows x cols x dirs` tensor, direction axis fastest.
pub struct ThzTensor(Tensor3);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ThzBeams {
    pub n_beams: usize,
    pub angular_sep_deg: f64,
    pub beamwidth_deg: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ThzRadio {
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub carrier_hz: f64,
    pub absorption_per_m: f64,
    pub reflection_loss_db: f64,
    pub rays_per_beam: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ThzScaling {
    pub psi_min: f64,
    pub psi_max: f64,
    pub db_floor: f64,
    pub db_ceil: f64,
}

impl From<&ThzRadio> for RadioConfig {
    fn from(r: &ThzRadio) -> Self {
        RadioConfig {
            tx_power_dbm: r.tx_power_dbm,
            noise_floor_dbm: r.noise_floor_dbm,
            carrier_hz: r.carrier_hz,
            absorption_per_m: r.absorption_per_m,
            reflection_loss_db: r.reflection_loss_db,
            rays_per_beam: r.rays_per_beam,
            ..RadioConfig::default()
        }
    }
}

#[no_mangle]
pub extern "C" fn thz_beams_default() -> ThzBeams {
    ThzBeams {
        n_beams: 18,
        angular_sep_deg: 20.0,
        beamwidth_deg: 20.0,
    }
}

#[no_mangle]
pub extern "C" fn thz_radio_default() -> ThzRadio {
    let r = RadioConfig::default();
    ThzRadio {
        tx_power_dbm: r.tx_power_dbm,
        noise_floor_dbm: r.noise_floor_dbm,
        carrier_hz: r.carrier_hz,
        absorption_per_m: r.absorption_per_m,
        reflection_loss_db: r.reflection_loss_db,
        rays_per_beam: r.rays_per_beam,
    }
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` before building the value.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Random layout of `n_obstacles` quadrilaterals rasterized onto an
/// `n_rows x n_cols` grid over a `length_m x width_m` area, BS at the center.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn thz_scene_generate(
    length_m: f64,
    width_m: f64,
    n_rows: usize,
    n_cols: usize,
    n_obstacles: usize,
    min_side_m: f64,
    max_side_m: f64,
    seed: u64,
    out: *mut *mut ThzScene,
) -> ThzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = GridSpec::new(length_m, width_m, n_rows, n_cols)?;
        let layout = generate_layout(&spec, n_obstacles, (min_side_m, max_side_m), seed)?;
        let occupancy = rasterize(&layout, &spec);
        boxed(ThzScene { spec, occupancy }, out);
        Ok(())
    })
}

/// Scene from a caller-supplied row-major 0/1 grid of `n_rows * n_cols` bytes.
///
/// # Safety
/// `cells` must point to `n_rows * n_cols` readable bytes; `out` must be
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn thz_scene_from_occupancy(
    length_m: f64,
    width_m: f64,
    n_rows: usize,
    n_cols: usize,
    cells: *const u8,
    out: *mut *mut ThzScene,
) -> ThzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if cells.is_null() {
            return Err(null("cells"));
        }
        let spec = GridSpec::new(length_m, width_m, n_rows, n_cols)?;
        let data = std::slice::from_raw_parts(cells, n_rows * n_cols).to_vec();
        let occupancy = Grid::from_vec(n_rows, n_cols, data)?;
        if !occupancy.is_binary() {
            return Err(Fail(ThzStatus::OutOfDomain, "occupancy must be 0/1".into()));
        }
        boxed(ThzScene { spec, occupancy }, out);
        Ok(())
    })
}

/// Copies the occupancy grid (row-major bytes) into `out`.
///
/// # Safety
/// `scene` must come from a `thz_scene_*` constructor; `out` must be
/// writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn thz_scene_occupancy(scene: *const ThzScene, out: *mut u8, len: usize) -> ThzStatus {
    guard(|| {
        let s = deref(scene, "scene")?;
        let cells = s.occupancy.as_slice();
        out_slice(out, len, cells.len(), "out")?.copy_from_slice(cells);
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or come from a `thz_scene_*` constructor, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn thz_scene_free(scene: *mut ThzScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Received power in mW for every cell and beam.
///
/// # Safety
/// `scene`, `beams` and `radio` must be valid; `out` must be valid for one
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn thz_trace_all(
    scene: *const ThzScene,
    beams: *const ThzBeams,
    radio: *const ThzRadio,
    out: *mut *mut ThzTensor,
) -> ThzStatus {
    guard(|| {
        let s = deref(scene, "scene")?;
        let b = deref(beams, "beams")?;
        let r = deref(radio, "radio")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let beams = BeamSet::from_degrees(b.n_beams, b.angular_sep_deg, b.beamwidth_deg)?;
        let cfg = RadioConfig::from(r);
        cfg.validate(&beams)?;
        let map = trace_all(&s.occupancy, &s.spec, &beams, &cfg)?;
        boxed(ThzTensor(map.0), out);
        Ok(())
    })
}

/// Default scaling for a scene: noise floor to the strongest reachable power.
///
/// # Safety
/// `scene` and `radio` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thz_scaling_for_scene(
    scene: *const ThzScene,
    radio: *const ThzRadio,
    out: *mut ThzScaling,
) -> ThzStatus {
    guard(|| {
        let s = deref(scene, "scene")?;
        let r = deref(radio, "radio")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = ScalingSpec::for_scene(&s.spec, &RadioConfig::from(r))?;
        *out = ThzScaling {
            psi_min: spec.psi_min,
            psi_max: spec.psi_max,
            db_floor: spec.db_floor,
            db_ceil: spec.db_ceil,
        };
        Ok(())
    })
}

/// Scales a raw power tensor: occupied cells become 1, free cells map into
/// `[psi_min, psi_max]`.
///
/// # Safety
/// All pointers must be valid; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn thz_scale(
    raw: *const ThzTensor,
    scene: *const ThzScene,
    scaling: *const ThzScaling,
    out: *mut *mut ThzTensor,
) -> ThzStatus {
    guard(|| {
        let t = deref(raw, "raw")?;
        let s = deref(scene, "scene")?;
        let sc = deref(scaling, "scaling")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = ScalingSpec::new(sc.psi_min, sc.psi_max, sc.db_floor, sc.db_ceil)?;
        let scaled = scale(&RadioMap(t.0.clone()), &s.occupancy, &spec)?;
        boxed(ThzTensor(scaled.0), out);
        Ok(())
    })
}

/// Tensor from `rows * cols * dirs` values, direction axis fastest.
///
/// # Safety
/// `data` must point to `rows * cols * dirs` readable doubles; `out` must be
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn thz_tensor_new(
    rows: usize,
    cols: usize,
    dirs: usize,
    data: *const f64,
    out: *mut *mut ThzTensor,
) -> ThzStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let values = std::slice::from_raw_parts(data, rows * cols * dirs).to_vec();
        boxed(ThzTensor(Tensor3::from_vec(rows, cols, dirs, values)?), out);
        Ok(())
    })
}

/// # Safety
/// `tensor` must be valid; each non-null output must be writable.
#[no_mangle]
pub unsafe extern "C" fn thz_tensor_dims(
    tensor: *const ThzTensor,
    rows: *mut usize,
    cols: *mut usize,
    dirs: *mut usize,
) -> ThzStatus {
    guard(|| {
        let t = deref(tensor, "tensor")?;
        let (r, c, d) = t.0.shape();
        for (p, v) in [(rows, r), (cols, c), (dirs, d)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies all tensor values into `out`.
///
/// # Safety
/// `tensor` must be valid; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn thz_tensor_copy(tensor: *const ThzTensor, out: *mut f64, len: usize) -> ThzStatus {
    guard(|| {
        let t = deref(tensor, "tensor")?;
        let src = t.0.as_slice();
        out_slice(out, len, src.len(), "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `tensor` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn thz_tensor_free(tensor: *mut ThzTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Thresholds every direction of a scaled tensor at `psi_max` and keeps the
/// cells flagged in all of them. Writes `rows * cols` bytes.
///
/// # Safety
/// `scaled` must be valid; `out` must be writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn thz_sense_hard_vote(
    scaled: *const ThzTensor,
    psi_max: f64,
    out: *mut u8,
    len: usize,
) -> ThzStatus {
    guard(|| {
        let t = deref(scaled, "scaled")?;
        let map = hard_vote(&segment_all(&t.0, psi_max)?)?;
        out_slice(out, len, map.len(), "out")?.copy_from_slice(map.as_slice());
        Ok(())
    })
}

/// `max(0, mean over directions - psi_max)` per cell. Writes `rows * cols`
/// doubles.
///
/// # Safety
/// `scaled` must be valid; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn thz_soft_vote(
    scaled: *const ThzTensor,
    psi_max: f64,
    out: *mut f64,
    len: usize,
) -> ThzStatus {
    guard(|| {
        let t = deref(scaled, "scaled")?;
        let map = soft_vote(&t.0, psi_max)?;
        out_slice(out, len, map.len(), "out")?.copy_from_slice(map.as_slice());
        Ok(())
    })
}

/// `exp(-2 n (1/2 - epsilon)^2)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thz_hoeffding_bound(n_votes: usize, epsilon: f64, out: *mut f64) -> ThzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = hoeffding_bound(n_votes, epsilon)?;
        Ok(())
    })
}

/// Probability that a majority of `n_votes` (odd) independent votes, each
/// wrong with probability `epsilon`, is wrong.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thz_exact_majority_error(n_votes: usize, epsilon: f64, out: *mut f64) -> ThzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = exact_majority_error(n_votes, epsilon)?;
        Ok(())
    })
}
