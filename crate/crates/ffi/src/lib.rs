//! C ABI for `dfd-core`.
//!
//! Conventions:
//!
//! * Fallible functions return a [`DfdStatus`]; results go through out
//!   pointers which are left untouched on failure.
//! * Images and depth maps are opaque handles created by `*_new`/`*_load`
//!   and released with the matching `*_free`. Freeing NULL is a no-op.
//! * After a failure, [`dfd_last_error`] returns a description that stays
//!   valid until the next call into this library on the same thread.
//! * Panics never cross the boundary; they surface as `DFD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dfd_core::blur_math::{self, MeasureKind, MonotoneInterval, RelativeError};
use dfd_core::experiment;
use dfd_core::image::{convolve_uniform, GrayImage};
use dfd_core::pipeline::{self, Calibration, DepthMap, PipelineConfig, SuperpixelGrid};
use dfd_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfdStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An argument is outside the function's domain.
    Domain = 2,
    /// Two inputs disagree in size, or a grid does not fit an image.
    Dimension = 3,
    /// A file could not be read or written.
    Io = 4,
    /// A file was read but its contents are malformed.
    Parse = 5,
    /// A configuration or calibration is invalid.
    Config = 6,
    /// Nothing to compute (for example an empty input).
    Empty = 7,
    /// An internal panic was caught.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfdMeasure {
    /// Continuous ratio of gradients; uses `sigma1`.
    RgContinuous = 0,
    /// Exact discrete ratio of gradients; uses `sigma1`.
    RgDiscrete = 1,
    /// Exact discrete single-image measure.
    MgDiscrete = 2,
}

impl DfdMeasure {
    fn kind(self, sigma1: f64) -> MeasureKind {
        match self {
            DfdMeasure::RgContinuous => MeasureKind::RgContinuous { sigma1 },
            DfdMeasure::RgDiscrete => MeasureKind::RgDiscrete { sigma1 },
            DfdMeasure::MgDiscrete => MeasureKind::MgDiscrete,
        }
    }
}

/// Log-linear depth/blur calibration: `sigma = c + d * ln(depth)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfdCalibration {
    pub c: f64,
    pub d: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl From<Calibration> for DfdCalibration {
    fn from(c: Calibration) -> Self {
        Self {
            c: c.c,
            d: c.d,
            sigma_min: c.sigma_min,
            sigma_max: c.sigma_max,
            d_min: c.d_min,
            d_max: c.d_max,
        }
    }
}

impl From<DfdCalibration> for Calibration {
    fn from(c: DfdCalibration) -> Self {
        Self {
            c: c.c,
            d: c.d,
            sigma_min: c.sigma_min,
            sigma_max: c.sigma_max,
            d_min: c.d_min,
            d_max: c.d_max,
        }
    }
}

/// Rectangular superpixel grid; cells are indexed row-major.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfdGrid {
    pub cell_width: usize,
    pub cell_height: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    pub cols: usize,
    pub rows: usize,
}

impl From<SuperpixelGrid> for DfdGrid {
    fn from(g: SuperpixelGrid) -> Self {
        Self {
            cell_width: g.cell_width,
            cell_height: g.cell_height,
            origin_x: g.origin_x,
            origin_y: g.origin_y,
            cols: g.cols,
            rows: g.rows,
        }
    }
}

impl DfdGrid {
    fn to_core(self) -> Result<SuperpixelGrid, Failure> {
        Ok(SuperpixelGrid::new(
            self.cell_width,
            self.cell_height,
            self.origin_x,
            self.origin_y,
            self.cols,
            self.rows,
        )?)
    }
}

/// Summary of one depth estimation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfdEstimateStats {
    pub candidate_points: usize,
    pub valid_points: usize,
    pub covered_cells: usize,
    pub total_cells: usize,
    pub clamped_points: usize,
    pub negative_discriminant_points: usize,
    pub valid_pixel_fraction: f64,
    pub covered_cell_fraction: f64,
}

/// Opaque grayscale image with intensities in `[0, 1]`.
pub struct DfdImage(GrayImage);

/// Opaque depth map, one positive value per superpixel.
pub struct DfdDepthMap(DepthMap);

struct Failure {
    status: DfdStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) | Error::OutOfBounds { .. } | Error::LowContrast | Error::NotMonotone { .. } => {
                DfdStatus::Domain
            }
            Error::DimensionMismatch { .. } | Error::ImageTooSmall { .. } | Error::InvalidGrid(_) => {
                DfdStatus::Dimension
            }
            Error::Io(_) | Error::PngEncode(_) => DfdStatus::Io,
            Error::Parse { .. } | Error::UnsupportedFormat(_) | Error::PngDecode(_) => DfdStatus::Parse,
            Error::DegenerateCalibration(_) | Error::Config(_) => DfdStatus::Config,
            Error::Empty(_) => DfdStatus::Empty,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure {
        status: DfdStatus::NullArgument,
        message: format!("{what} is NULL"),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DfdStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DfdStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            DfdStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure {
        status: DfdStatus::Domain,
        message: "path is not valid UTF-8".into(),
    })?;
    Ok(PathBuf::from(s))
}

unsafe fn image<'a>(p: *const DfdImage) -> Result<&'a GrayImage, Failure> {
    p.as_ref().map(|i| &i.0).ok_or_else(|| null("image"))
}

unsafe fn depth<'a>(p: *const DfdDepthMap) -> Result<&'a DepthMap, Failure> {
    p.as_ref().map(|d| &d.0).ok_or_else(|| null("depth map"))
}

/// Description of the last failure on this thread, or NULL after a success.
#[no_mangle]
pub extern "C" fn dfd_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn dfd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn dfd_erf(x: f64) -> f64 {
    blur_math::erf(x)
}

/// # Safety
/// `out_value` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn dfd_measure_forward(
    measure: DfdMeasure,
    sigma: f64,
    sigma1: f64,
    out_value: *mut f64,
) -> DfdStatus {
    guard(|| {
        let v = measure.kind(sigma1).forward(sigma)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Recovers sigma in `[lo, hi]` from a measure value. Values outside the
/// range of the measure on `[lo, hi]` give the nearer endpoint and set
/// `*out_of_range` to 1.
///
/// # Safety
/// `out_sigma` must point to a writable `double`; `out_of_range` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dfd_measure_invert(
    measure: DfdMeasure,
    value: f64,
    sigma1: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    out_sigma: *mut f64,
    out_of_range: *mut i32,
) -> DfdStatus {
    guard(|| {
        let sigma_out = out(out_sigma, "out_sigma")?;
        let kind = measure.kind(sigma1);
        let interval = MonotoneInterval::new(kind, lo, hi)?;
        let inv = blur_math::invert_measure(kind, value, &interval, tol)?;
        *sigma_out = inv.sigma;
        if let Some(flag) = out_of_range.as_mut() {
            *flag = i32::from(inv.out_of_range);
        }
        Ok(())
    })
}

/// Relative error of the continuous inverse applied to the discrete ratio
/// measure. Writes `INFINITY` where the continuous inverse has no solution.
///
/// # Safety
/// `out_value` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn dfd_erg(sigma: f64, sigma1: f64, out_value: *mut f64) -> DfdStatus {
    guard(|| {
        let v = match blur_math::erg_error(sigma, sigma1)? {
            RelativeError::Finite(v) => v,
            RelativeError::Infinite => f64::INFINITY,
        };
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Copies `width * height` row-major intensities in `[0, 1]`.
///
/// # Safety
/// `data` must point to `width * height` readable doubles and `out_image`
/// to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out_image: *mut *mut DfdImage,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_image, "out_image")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure::from(Error::Domain("image size overflows".into())))?;
        let pixels = std::slice::from_raw_parts(data, n).to_vec();
        let img = GrayImage::new(width, height, pixels)?;
        *slot = Box::into_raw(Box::new(DfdImage(img)));
        Ok(())
    })
}

/// Loads a PGM (P5) or PNG file, converting color to luminance.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_image` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_load(path: *const c_char, out_image: *mut *mut DfdImage) -> DfdStatus {
    guard(|| {
        let slot = out(out_image, "out_image")?;
        let img = experiment::load_image(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(DfdImage(img)));
        Ok(())
    })
}

/// Writes PNG when the path ends in `.png`, binary PGM otherwise.
///
/// # Safety
/// `image_handle` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_save(image_handle: *const DfdImage, path: *const c_char) -> DfdStatus {
    guard(|| Ok(experiment::save_image(path_arg(path)?, image(image_handle)?)?))
}

/// # Safety
/// `image_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_width(image_handle: *const DfdImage) -> usize {
    image_handle.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `image_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_height(image_handle: *const DfdImage) -> usize {
    image_handle.as_ref().map_or(0, |i| i.0.height())
}

/// Row-major pixels, valid while the handle lives.
///
/// # Safety
/// `image_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_data(image_handle: *const DfdImage) -> *const f64 {
    image_handle.as_ref().map_or(ptr::null(), |i| i.0.pixels().as_ptr())
}

/// # Safety
/// `image_handle` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dfd_image_free(image_handle: *mut DfdImage) {
    if !image_handle.is_null() {
        drop(Box::from_raw(image_handle));
    }
}

/// Gaussian blur of standard deviation `sigma` with edge replication.
///
/// # Safety
/// `image_handle` must be a live handle; `out_image` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_convolve_uniform(
    image_handle: *const DfdImage,
    sigma: f64,
    out_image: *mut *mut DfdImage,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_image, "out_image")?;
        let blurred = convolve_uniform(image(image_handle)?, sigma)?;
        *slot = Box::into_raw(Box::new(DfdImage(blurred)));
        Ok(())
    })
}

/// # Safety
/// `out_calibration` must point to a writable `DfdCalibration`.
#[no_mangle]
pub unsafe extern "C" fn dfd_calibration_fit(
    d_min: f64,
    d_max: f64,
    sigma_min: f64,
    sigma_max: f64,
    out_calibration: *mut DfdCalibration,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_calibration, "out_calibration")?;
        *slot = pipeline::fit_calibration(d_min, d_max, sigma_min, sigma_max)?.into();
        Ok(())
    })
}

/// Blur for a depth, clamped to the calibrated range.
///
/// # Safety
/// `calibration` must be readable; `out_sigma` writable; `out_clamped` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_to_blur(
    calibration: *const DfdCalibration,
    depth_value: f64,
    out_sigma: *mut f64,
    out_clamped: *mut i32,
) -> DfdStatus {
    guard(|| {
        let calib: Calibration = (*calibration.as_ref().ok_or_else(|| null("calibration"))?).into();
        let r = calib.depth_to_blur(depth_value);
        *out(out_sigma, "out_sigma")? = r.value;
        if let Some(flag) = out_clamped.as_mut() {
            *flag = i32::from(r.clamped);
        }
        Ok(())
    })
}

/// Depth for a blur, clamped to the calibrated range.
///
/// # Safety
/// `calibration` must be readable; `out_depth` writable; `out_clamped` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dfd_blur_to_depth(
    calibration: *const DfdCalibration,
    sigma: f64,
    out_depth: *mut f64,
    out_clamped: *mut i32,
) -> DfdStatus {
    guard(|| {
        let calib: Calibration = (*calibration.as_ref().ok_or_else(|| null("calibration"))?).into();
        let r = calib.blur_to_depth(sigma);
        *out(out_depth, "out_depth")? = r.value;
        if let Some(flag) = out_clamped.as_mut() {
            *flag = i32::from(r.clamped);
        }
        Ok(())
    })
}

/// The 2272 x 1704 benchmark geometry: 55 x 305 cells of 41 x 5 pixels.
#[no_mangle]
pub extern "C" fn dfd_grid_make3d() -> DfdGrid {
    SuperpixelGrid::make3d().into()
}

/// `cols x rows` cells of the given size centered in a `width x height` image.
///
/// # Safety
/// `out_grid` must point to a writable `DfdGrid`.
#[no_mangle]
pub unsafe extern "C" fn dfd_grid_centered(
    width: usize,
    height: usize,
    cell_width: usize,
    cell_height: usize,
    cols: usize,
    rows: usize,
    out_grid: *mut DfdGrid,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_grid, "out_grid")?;
        *slot = SuperpixelGrid::centered(width, height, cell_width, cell_height, cols, rows)?.into();
        Ok(())
    })
}

/// Copies `rows * cols` positive row-major depths.
///
/// # Safety
/// `values` must point to `rows * cols` readable doubles; `out_depth` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_new(
    rows: usize,
    cols: usize,
    values: *const f64,
    out_depth: *mut *mut DfdDepthMap,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_depth, "out_depth")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::from(Error::Domain("depth size overflows".into())))?;
        let map = DepthMap::new(rows, cols, std::slice::from_raw_parts(values, n).to_vec())?;
        *slot = Box::into_raw(Box::new(DfdDepthMap(map)));
        Ok(())
    })
}

/// Reads the text depth format (`rows cols` header, then rows of values).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_depth` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_load(path: *const c_char, out_depth: *mut *mut DfdDepthMap) -> DfdStatus {
    guard(|| {
        let slot = out(out_depth, "out_depth")?;
        let map = experiment::load_depth(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(DfdDepthMap(map)));
        Ok(())
    })
}

/// # Safety
/// `depth_handle` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_save(depth_handle: *const DfdDepthMap, path: *const c_char) -> DfdStatus {
    guard(|| Ok(experiment::save_depth(path_arg(path)?, depth(depth_handle)?)?))
}

/// # Safety
/// `depth_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_rows(depth_handle: *const DfdDepthMap) -> usize {
    depth_handle.as_ref().map_or(0, |d| d.0.rows())
}

/// # Safety
/// `depth_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_cols(depth_handle: *const DfdDepthMap) -> usize {
    depth_handle.as_ref().map_or(0, |d| d.0.cols())
}

/// Row-major values, valid while the handle lives.
///
/// # Safety
/// `depth_handle` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_data(depth_handle: *const DfdDepthMap) -> *const f64 {
    depth_handle.as_ref().map_or(ptr::null(), |d| d.0.values().as_ptr())
}

/// # Safety
/// `depth_handle` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dfd_depth_free(depth_handle: *mut DfdDepthMap) {
    if !depth_handle.is_null() {
        drop(Box::from_raw(depth_handle));
    }
}

/// Renders the defocused partner of `image` for the ground truth `gt`.
///
/// # Safety
/// Handles must be live, `grid` and `calibration` readable, `out_image` a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dfd_simulate_defocus(
    image_handle: *const DfdImage,
    gt: *const DfdDepthMap,
    grid: *const DfdGrid,
    calibration: *const DfdCalibration,
    out_image: *mut *mut DfdImage,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_image, "out_image")?;
        let grid = grid.as_ref().ok_or_else(|| null("grid"))?.to_core()?;
        let calib: Calibration = (*calibration.as_ref().ok_or_else(|| null("calibration"))?).into();
        let img = pipeline::simulate_defocus(image(image_handle)?, depth(gt)?, &grid, &calib)?;
        *slot = Box::into_raw(Box::new(DfdImage(img)));
        Ok(())
    })
}

/// Estimates a depth map from a focused/defocused pair with default
/// pipeline settings. Cells without a valid edge point get `d_max`.
///
/// # Safety
/// Handles must be live, `grid` and `calibration` readable, `out_depth` a
/// writable handle slot; `out_stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dfd_estimate_depth_map(
    original: *const DfdImage,
    defocused: *const DfdImage,
    grid: *const DfdGrid,
    calibration: *const DfdCalibration,
    out_depth: *mut *mut DfdDepthMap,
    out_stats: *mut DfdEstimateStats,
) -> DfdStatus {
    guard(|| {
        let slot = out(out_depth, "out_depth")?;
        let grid = grid.as_ref().ok_or_else(|| null("grid"))?.to_core()?;
        let calib: Calibration = (*calibration.as_ref().ok_or_else(|| null("calibration"))?).into();
        let est = pipeline::estimate_depth_map(
            image(original)?,
            image(defocused)?,
            &grid,
            &calib,
            &PipelineConfig::default(),
        )?;
        if let Some(stats) = out_stats.as_mut() {
            let c = &est.coverage;
            *stats = DfdEstimateStats {
                candidate_points: c.candidate_points,
                valid_points: c.valid_points,
                covered_cells: c.covered_cells,
                total_cells: c.total_cells,
                clamped_points: est.clamped_count(),
                negative_discriminant_points: est.negative_discriminant_count(),
                valid_pixel_fraction: c.valid_pixel_fraction(),
                covered_cell_fraction: c.covered_cell_fraction(),
            };
        }
        *slot = Box::into_raw(Box::new(DfdDepthMap(est.depth)));
        Ok(())
    })
}

/// Mean absolute relative error of `estimate` against `gt`.
///
/// # Safety
/// Handles must be live; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn dfd_mare(
    estimate: *const DfdDepthMap,
    gt: *const DfdDepthMap,
    out_value: *mut f64,
) -> DfdStatus {
    guard(|| {
        let v = experiment::mare(depth(estimate)?, depth(gt)?)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}
