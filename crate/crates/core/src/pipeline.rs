//! Depth/blur calibration, defocus simulation and depth recovery.
//!
//! Depth maps to blur through `sigma = c + d * ln(D)`, with `(c, d)` chosen so
//! the depth extremes land on the blur extremes. A defocused copy of the input
//! is made with that space-variant blur. At each validated edge site, `M_Gd`
//! is measured on both images and inverted. The objective blur is then
//! `sqrt(sigma2^2 - sigma1^2)`, which maps back to depth. Superpixels average
//! the depths of their sites. Superpixels without a site take `d_max`.

use crate::blur_math::{invert_measure, Inversion, MeasureKind, MonotoneInterval, DEFAULT_INVERSION_TOL};
use crate::edge::{detect_points, measure_mgd_at, EdgeConfig, EdgeMeasure, EdgePoint};
use crate::image::{convolve_space_variant, GrayImage, SigmaField};
use crate::{Error, Result};

pub const DEFAULT_SIGMA_MIN: f64 = 0.5;
pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

/// Value with a flag telling whether it was clamped into range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub c: f64,
    pub d: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

/// Solves `c + d ln(d_min) = sigma_min` and `c + d ln(d_max) = sigma_max`.
pub fn fit_calibration(d_min: f64, d_max: f64, sigma_min: f64, sigma_max: f64) -> Result<Calibration> {
    if !(d_min.is_finite() && d_max.is_finite() && d_min > 0.0 && d_max > 0.0) {
        return Err(Error::DegenerateCalibration(format!(
            "depth bounds must be positive, got [{d_min}, {d_max}]"
        )));
    }
    if d_min >= d_max {
        return Err(Error::DegenerateCalibration(format!(
            "need d_min < d_max, got [{d_min}, {d_max}]"
        )));
    }
    if !(sigma_min.is_finite() && sigma_max.is_finite() && sigma_min >= 0.0) || sigma_min >= sigma_max {
        return Err(Error::DegenerateCalibration(format!(
            "need 0 <= sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
        )));
    }
    let (l0, l1) = (d_min.ln(), d_max.ln());
    let d = (sigma_max - sigma_min) / (l1 - l0);
    let c = sigma_min - d * l0;
    Ok(Calibration {
        c,
        d,
        sigma_min,
        sigma_max,
        d_min,
        d_max,
    })
}

impl Calibration {
    pub fn fit(d_min: f64, d_max: f64, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        fit_calibration(d_min, d_max, sigma_min, sigma_max)
    }

    pub fn depth_to_blur(&self, depth: f64) -> Clamped {
        depth_to_blur(depth, self)
    }

    pub fn blur_to_depth(&self, sigma: f64) -> Clamped {
        blur_to_depth(sigma, self)
    }
}

pub fn depth_to_blur(depth: f64, calib: &Calibration) -> Clamped {
    let clamped = !(depth >= calib.d_min && depth <= calib.d_max);
    let d = if depth.is_nan() {
        calib.d_min
    } else {
        depth.clamp(calib.d_min, calib.d_max)
    };
    let value = if d == calib.d_min {
        calib.sigma_min
    } else if d == calib.d_max {
        calib.sigma_max
    } else {
        (calib.c + calib.d * d.ln()).clamp(calib.sigma_min, calib.sigma_max)
    };
    Clamped { value, clamped }
}

pub fn blur_to_depth(sigma: f64, calib: &Calibration) -> Clamped {
    if sigma.is_nan() {
        return Clamped {
            value: calib.d_min,
            clamped: true,
        };
    }
    let raw = ((sigma - calib.c) / calib.d).exp();
    let value = raw.clamp(calib.d_min, calib.d_max);
    Clamped {
        value,
        // exact endpoints are in range even if exp() rounds past them
        clamped: (sigma < calib.sigma_min || sigma > calib.sigma_max) && value != raw,
    }
}

/// Non-overlapping rectangular cells tiling part of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuperpixelGrid {
    pub cell_width: usize,
    pub cell_height: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    pub cols: usize,
    pub rows: usize,
}

impl SuperpixelGrid {
    pub fn new(
        cell_width: usize,
        cell_height: usize,
        origin_x: usize,
        origin_y: usize,
        cols: usize,
        rows: usize,
    ) -> Result<Self> {
        if cell_width == 0 || cell_height == 0 || cols == 0 || rows == 0 {
            return Err(Error::InvalidGrid("cell sizes and counts must be positive".into()));
        }
        Ok(Self {
            cell_width,
            cell_height,
            origin_x,
            origin_y,
            cols,
            rows,
        })
    }

    /// `cols x rows` cells centered in a `width x height` image.
    pub fn centered(
        width: usize,
        height: usize,
        cell_width: usize,
        cell_height: usize,
        cols: usize,
        rows: usize,
    ) -> Result<Self> {
        let (gw, gh) = (cell_width * cols, cell_height * rows);
        if gw > width || gh > height {
            return Err(Error::InvalidGrid(format!(
                "{cols}x{rows} cells of {cell_width}x{cell_height} do not fit a {width}x{height} image"
            )));
        }
        Self::new(cell_width, cell_height, (width - gw) / 2, (height - gh) / 2, cols, rows)
    }

    /// As many whole cells as fit, centered.
    pub fn fitted(width: usize, height: usize, cell_width: usize, cell_height: usize) -> Result<Self> {
        if cell_width == 0 || cell_height == 0 {
            return Err(Error::InvalidGrid("cell sizes must be positive".into()));
        }
        Self::centered(
            width,
            height,
            cell_width,
            cell_height,
            width / cell_width,
            height / cell_height,
        )
    }

    /// Geometry of the outdoor range-image benchmark: 55 x 305 cells of
    /// 41 x 5 pixels centered in a 2272 x 1704 image.
    pub fn make3d() -> Self {
        Self::centered(2272, 1704, 41, 5, 55, 305).expect("preset fits")
    }

    pub fn width(&self) -> usize {
        self.cell_width * self.cols
    }

    pub fn height(&self) -> usize {
        self.cell_height * self.rows
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn fits(&self, width: usize, height: usize) -> Result<()> {
        if self.origin_x + self.width() <= width && self.origin_y + self.height() <= height {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "grid reaching ({}, {}) does not fit a {width}x{height} image",
                self.origin_x + self.width(),
                self.origin_y + self.height()
            )))
        }
    }

    /// Row-major cell index containing pixel `(x, y)`.
    pub fn cell_index(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.origin_x || y < self.origin_y {
            return None;
        }
        let col = (x - self.origin_x) / self.cell_width;
        let row = (y - self.origin_y) / self.cell_height;
        (col < self.cols && row < self.rows).then_some(row * self.cols + col)
    }
}

/// Depth raster in scene units, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::domain(format!(
                "depth map of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("depth value {bad} is not positive")));
        }
        Ok(Self { rows, cols, values })
    }

    /// Like [`DepthMap::new`] but replaces non-finite values and values below
    /// `d_min` with `d_min`. Returns the map and the number of replacements.
    pub fn clamped_from(rows: usize, cols: usize, values: Vec<f64>, d_min: f64) -> Result<(Self, usize)> {
        let mut replaced = 0;
        let values = values
            .into_iter()
            .map(|v| {
                if v.is_finite() && v >= d_min {
                    v
                } else {
                    replaced += 1;
                    d_min
                }
            })
            .collect();
        Ok((Self::new(rows, cols, values)?, replaced))
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn matches_grid(&self, grid: &SuperpixelGrid) -> Result<()> {
        if self.rows == grid.rows && self.cols == grid.cols {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_width: grid.cols,
                expected_height: grid.rows,
                width: self.cols,
                height: self.rows,
            })
        }
    }
}

/// Per-pixel blur for a ground-truth depth map: every pixel of a cell gets the
/// blur of its depth, pixels outside the grid get `sigma_min`.
pub fn sigma_field(
    width: usize,
    height: usize,
    gt: &DepthMap,
    grid: &SuperpixelGrid,
    calib: &Calibration,
) -> Result<SigmaField> {
    gt.matches_grid(grid)?;
    grid.fits(width, height)?;
    let cell_sigma: Vec<f64> = gt.values.iter().map(|&d| depth_to_blur(d, calib).value).collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            values.push(grid.cell_index(x, y).map_or(calib.sigma_min, |i| cell_sigma[i]));
        }
    }
    SigmaField::new(width, height, values)
}

/// Defocused copy of `img` for the depth map `gt`.
pub fn simulate_defocus(
    img: &GrayImage,
    gt: &DepthMap,
    grid: &SuperpixelGrid,
    calib: &Calibration,
) -> Result<GrayImage> {
    let field = sigma_field(img.width(), img.height(), gt, grid, calib)?;
    convolve_space_variant(img, &field)
}

/// Objective blur from the absolute blurs of the two images. A negative
/// discriminant gives zero and sets the flag.
pub fn relative_blur(sigma1_hat: f64, sigma2_hat: f64) -> (f64, bool) {
    let disc = sigma2_hat * sigma2_hat - sigma1_hat * sigma1_hat;
    if disc >= 0.0 {
        (disc.sqrt(), false)
    } else {
        (0.0, true)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateFlags {
    /// A measure was out of range on the inversion interval, or the depth was
    /// clamped into `[d_min, d_max]`.
    pub clamped: bool,
    pub negative_discriminant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurEstimate {
    pub point: EdgePoint,
    pub m1: f64,
    pub m2: f64,
    pub sigma1_hat: f64,
    pub sigma2_hat: f64,
    pub sigma_obj: f64,
    pub depth_hat: f64,
    pub flags: EstimateFlags,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coverage {
    pub valid_points: usize,
    pub candidate_points: usize,
    /// Pixels inside the superpixel grid.
    pub region_pixels: usize,
    pub covered_cells: usize,
    pub total_cells: usize,
}

impl Coverage {
    pub fn valid_pixel_fraction(&self) -> f64 {
        ratio(self.valid_points, self.region_pixels)
    }

    pub fn covered_cell_fraction(&self) -> f64 {
        ratio(self.covered_cells, self.total_cells)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub edge: EdgeConfig,
    pub inversion_tol: f64,
    /// Blur range used to invert measures; `None` uses the calibration's
    /// `[sigma_min, sigma_max]`.
    pub inversion_range: Option<(f64, f64)>,
    /// Pixels excluded at the border; `None` uses `ceil(3 sigma_max)`.
    pub border_margin: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            edge: EdgeConfig::default(),
            inversion_tol: DEFAULT_INVERSION_TOL,
            inversion_range: None,
            border_margin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthEstimate {
    pub depth: DepthMap,
    pub estimates: Vec<BlurEstimate>,
    /// Candidate edge points that failed validation or measurement.
    pub rejected: Vec<EdgePoint>,
    /// Per cell, whether at least one estimate landed in it.
    pub covered: Vec<bool>,
    pub coverage: Coverage,
}

impl DepthEstimate {
    pub fn clamped_count(&self) -> usize {
        self.estimates.iter().filter(|e| e.flags.clamped).count()
    }

    pub fn negative_discriminant_count(&self) -> usize {
        self.estimates.iter().filter(|e| e.flags.negative_discriminant).count()
    }
}

/// Inverts `M_Gd` measured along a lattice direction, returning blur in
/// pixels. The blur range `[lo, hi]` is in pixels too. Intervals in step
/// units are cached per scale since only a handful of scales occur.
#[derive(Debug, Clone)]
pub struct LatticeInverter {
    lo: f64,
    hi: f64,
    tol: f64,
    cache: Vec<(u64, MonotoneInterval)>,
}

impl LatticeInverter {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite() && tol > 0.0) {
            return Err(Error::Config(format!(
                "inversion range [{lo}, {hi}] must be positive and increasing"
            )));
        }
        Ok(Self {
            lo,
            hi,
            tol,
            cache: Vec::new(),
        })
    }

    pub fn invert(&mut self, measure: &EdgeMeasure) -> Result<Inversion> {
        let scale = measure.step_scale;
        let key = scale.to_bits();
        let interval = match self.cache.iter().find(|(k, _)| *k == key) {
            Some((_, iv)) => *iv,
            None => {
                let iv = MonotoneInterval::new(MeasureKind::MgDiscrete, self.lo / scale, self.hi / scale)?;
                self.cache.push((key, iv));
                iv
            }
        };
        let inv = invert_measure(MeasureKind::MgDiscrete, measure.value, &interval, self.tol / scale)?;
        Ok(Inversion {
            sigma: inv.sigma * scale,
            out_of_range: inv.out_of_range,
        })
    }
}

/// Full depth-from-defocus pass over an image pair.
pub fn estimate_depth_map(
    original: &GrayImage,
    defocused: &GrayImage,
    grid: &SuperpixelGrid,
    calib: &Calibration,
    cfg: &PipelineConfig,
) -> Result<DepthEstimate> {
    cfg.edge.validate()?;
    original.same_size(defocused)?;
    grid.fits(original.width(), original.height())?;
    let (lo, hi) = cfg.inversion_range.unwrap_or((calib.sigma_min, calib.sigma_max));
    let mut inverter = LatticeInverter::new(lo, hi, cfg.inversion_tol)?;
    let margin = cfg
        .border_margin
        .unwrap_or_else(|| (3.0 * calib.sigma_max).ceil() as usize)
        .max(cfg.edge.reach());

    let candidates = if original.width() > 2 * margin && original.height() > 2 * margin {
        detect_points(original, &cfg.edge, margin)?
    } else {
        Vec::new()
    };
    let candidate_points = candidates.len();

    let mut estimates = Vec::new();
    let mut rejected = Vec::new();
    for point in candidates {
        if !point.valid || grid.cell_index(point.x, point.y).is_none() {
            rejected.push(point);
            continue;
        }
        let floor = cfg.edge.denominator_floor;
        let (first, second) = match (
            measure_mgd_at(original, &point, floor),
            measure_mgd_at(defocused, &point, floor),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                rejected.push(point);
                continue;
            }
        };
        let Inversion {
            sigma: sigma1_hat,
            out_of_range: out1,
        } = inverter.invert(&first)?;
        let Inversion {
            sigma: sigma2_hat,
            out_of_range: out2,
        } = inverter.invert(&second)?;
        let (sigma_obj, negative) = relative_blur(sigma1_hat, sigma2_hat);
        let depth = blur_to_depth(sigma_obj, calib);
        estimates.push(BlurEstimate {
            point,
            m1: first.value,
            m2: second.value,
            sigma1_hat,
            sigma2_hat,
            sigma_obj,
            depth_hat: depth.value,
            flags: EstimateFlags {
                clamped: out1 || out2 || depth.clamped,
                negative_discriminant: negative,
            },
        });
    }

    let cells = grid.cell_count();
    let mut sums = vec![0.0; cells];
    let mut counts = vec![0usize; cells];
    for e in &estimates {
        let i = grid
            .cell_index(e.point.x, e.point.y)
            .expect("estimates lie inside the grid");
        sums[i] += e.depth_hat;
        counts[i] += 1;
    }
    let values: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { calib.d_max } else { s / n as f64 })
        .collect();
    let covered: Vec<bool> = counts.iter().map(|&n| n > 0).collect();

    let coverage = Coverage {
        valid_points: estimates.len(),
        candidate_points,
        region_pixels: grid.width() * grid.height(),
        covered_cells: covered.iter().filter(|&&c| c).count(),
        total_cells: cells,
    };
    Ok(DepthEstimate {
        depth: DepthMap::new(grid.rows, grid.cols, values)?,
        estimates,
        rejected,
        covered,
        coverage,
    })
}
