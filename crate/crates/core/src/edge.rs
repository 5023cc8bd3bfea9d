//! Edge location, measurement-circle validation and the `M_Gd` measurement.
//!
//! A pixel is a measurement site when the Canny mask marks it and the disc of
//! radius [`EdgeConfig::radius`] around it holds a single straight edge:
//! enough edge pixels, one orientation, enough contrast across the edge, and
//! the edge crossing the center pixel.
//!
//! The measure is read from integer pixel samples along the lattice direction
//! (axis or diagonal) closest to the edge normal. Moving one lattice step
//! along that direction advances `step_scale` pixel widths along the normal,
//! so the blur seen in step units is `sigma / step_scale` and no
//! interpolation enters the ratio.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::image::{check_min_size, convolve_uniform, sample_bilinear, sobel_at, EdgeMask, GrayImage, Raster};
use crate::{Error, Result};

pub const MIN_CANNY_SIZE: usize = 7;

/// Default orientation spread tolerance, in degrees.
pub const DEFAULT_ANGLE_TOL_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub smoothing_sigma: f64,
    /// Weak threshold as a fraction of the largest gradient magnitude.
    pub low_ratio: f64,
    /// Strong threshold as a fraction of the largest gradient magnitude.
    pub high_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            smoothing_sigma: 1.0,
            low_ratio: 0.1,
            high_ratio: 0.2,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.smoothing_sigma.is_finite()
            && self.smoothing_sigma >= 0.0
            && 0.0 < self.low_ratio
            && self.low_ratio < self.high_ratio
            && self.high_ratio < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "canny parameters need sigma >= 0 and 0 < low < high < 1, got {self:?}"
            )))
        }
    }
}

/// Settings for point validation and measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeConfig {
    pub canny: CannyParams,
    /// Measurement circle radius in pixels.
    pub radius: f64,
    /// Largest circular standard deviation of edge orientations (radians).
    pub angle_tol: f64,
    /// Smallest intensity span across the circle along the normal.
    pub min_contrast: f64,
    /// Largest allowed `|i(0) - (i(2) + i(-2))/2| / |i(2) - i(-2)|`.
    pub center_tol: f64,
    pub min_support: usize,
    /// Smallest `|i(1) - i(-1)|` accepted as a measurement denominator.
    pub denominator_floor: f64,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            radius: 3.0,
            angle_tol: DEFAULT_ANGLE_TOL_DEG.to_radians(),
            min_contrast: 0.02,
            center_tol: 0.08,
            min_support: 3,
            denominator_floor: 1e-4,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        self.canny.validate()?;
        let ok = self.radius.is_finite()
            && self.radius >= 2.0
            && self.angle_tol > 0.0
            && self.min_contrast >= 0.0
            && self.center_tol > 0.0
            && self.denominator_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid edge configuration {self:?}")))
        }
    }

    /// Pixels needed between a site and the image border.
    pub fn reach(&self) -> usize {
        (self.radius.ceil() as usize + 1).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NoEdge,
    MultiOrientation,
    LowContrast,
    OutOfBounds,
    /// The edge does not cross the center pixel closely enough.
    OffCenter,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoEdge => "no_edge",
            RejectReason::MultiOrientation => "multi_orientation",
            RejectReason::LowContrast => "low_contrast",
            RejectReason::OutOfBounds => "out_of_bounds",
            RejectReason::OffCenter => "off_center",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub x: usize,
    pub y: usize,
    /// Edge normal in `[-pi, pi)`, pointing towards increasing intensity.
    pub normal_angle: f64,
    pub valid: bool,
    pub reject_reason: Option<RejectReason>,
}

impl EdgePoint {
    fn rejected(x: usize, y: usize, normal_angle: f64, reason: RejectReason) -> Self {
        Self {
            x,
            y,
            normal_angle,
            valid: false,
            reject_reason: Some(reason),
        }
    }
}

/// One step along the pixel lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeStep {
    pub dx: isize,
    pub dy: isize,
    /// Displacement along the edge normal per step, in pixel widths.
    pub scale: f64,
}

const LATTICE: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Lattice direction closest in angle to `normal_angle`.
pub fn lattice_step(normal_angle: f64) -> LatticeStep {
    let (nx, ny) = (normal_angle.cos(), normal_angle.sin());
    let mut best = LatticeStep {
        dx: 1,
        dy: 0,
        scale: nx,
    };
    let mut best_cos = f64::NEG_INFINITY;
    for &(dx, dy) in &LATTICE {
        let dot = dx as f64 * nx + dy as f64 * ny;
        let cos = dot / ((dx * dx + dy * dy) as f64).sqrt();
        if cos > best_cos + 1e-12 {
            best_cos = cos;
            best = LatticeStep { dx, dy, scale: dot };
        }
    }
    best
}

/// Measured ratio at a site plus the lattice geometry needed to invert it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMeasure {
    /// `(i(2) - i(-2)) / (i(1) - i(-1))` over lattice steps.
    pub value: f64,
    /// Blur in pixel widths is the inverted blur in step units times this.
    pub step_scale: f64,
}

/// Canny edge detector: smoothing, Sobel gradient, non-maximum suppression
/// along the gradient, and hysteresis with thresholds relative to the largest
/// gradient magnitude.
pub fn canny(img: &GrayImage, params: &CannyParams) -> Result<EdgeMask> {
    params.validate()?;
    check_min_size(img, MIN_CANNY_SIZE)?;
    let smooth = convolve_uniform(img, params.smoothing_sigma)?;
    let (w, h) = (img.width(), img.height());

    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b) = sobel_at(&smooth, x, y);
            gx[y * w + x] = a;
            gy[y * w + x] = b;
            mag[y * w + x] = a.hypot(b);
        }
    }
    let max_mag = mag.iter().cloned().fold(0.0, f64::max);
    let mut mask = Raster::filled(w, h, false);
    if max_mag <= 1e-12 {
        return Ok(mask);
    }

    let interp = |x: f64, y: f64| -> f64 {
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let at = |xx: usize, yy: usize| mag[yy.min(h - 1) * w + xx.min(w - 1)];
        (at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx) * (1.0 - fy)
            + (at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx) * fy
    };

    let mut thin = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (ux, uy) = (gx[i] / m, gy[i] / m);
            let fwd = interp(x as f64 + ux, y as f64 + uy);
            let bwd = interp(x as f64 - ux, y as f64 - uy);
            // ties across a plateau keep only the pixel on the low side
            if m >= fwd && m > bwd {
                thin[i] = m;
            }
        }
    }

    let low = params.low_ratio * max_mag;
    let high = params.high_ratio * max_mag;
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if thin[y * w + x] >= high {
                mask.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                if !*mask.get(nx, ny) && thin[ny * w + nx] >= low {
                    mask.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    Ok(mask)
}

/// Integer offsets inside a disc of the given radius, in raster order.
fn disc_offsets(radius: f64) -> Vec<(isize, isize)> {
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn wrap_angle(a: f64) -> f64 {
    let mut t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t -= 2.0 * PI;
    }
    t
}

/// Difference stencils for the orientation sweep, one per whole degree.
///
/// For an integer center `p` the half-pixel difference
/// `bilinear(p + u) - bilinear(p - u)` with `u = (cos t, sin t) / 2` only
/// touches the 3x3 neighbourhood of `p`, with weights that depend on `t`
/// alone. Entry `[3 * (b + 1) + (a + 1)]` weights pixel `p + (a, b)`.
fn orientation_stencils() -> &'static [(f64, [f64; 9]); 180] {
    static TABLE: OnceLock<[(f64, [f64; 9]); 180]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let tent = |a: f64, u: f64| (1.0 - (a - u).abs()).max(0.0);
        std::array::from_fn(|deg| {
            let theta = (deg as f64).to_radians();
            let (ux, uy) = (0.5 * theta.cos(), 0.5 * theta.sin());
            let mut k = [0.0; 9];
            for b in -1..=1 {
                for a in -1..=1 {
                    let (af, bf) = (a as f64, b as f64);
                    k[(3 * (b + 1) + (a + 1)) as usize] = tent(af, ux) * tent(bf, uy) - tent(af, -ux) * tent(bf, -uy);
                }
            }
            (theta, k)
        })
    })
}

/// Edge normal at `(x, y)`: the whole-degree direction maximizing the summed
/// squared half-pixel directional difference over the disc, signed towards
/// increasing intensity.
pub fn edge_orientation(img: &GrayImage, x: usize, y: usize, radius: f64) -> Result<f64> {
    let reach = radius.ceil() + 1.0;
    let (xf, yf) = (x as f64, y as f64);
    if xf < reach || yf < reach || xf + reach > (img.width() - 1) as f64 || yf + reach > (img.height() - 1) as f64 {
        return Err(Error::OutOfBounds { x: xf, y: yf });
    }
    // The energy at angle t is k_t' G k_t, with G the Gram matrix of the 3x3
    // patches around the disc pixels, so the patches are visited once.
    let mut gram = [[0.0; 9]; 9];
    let mut patch_sum = [0.0; 9];
    for (dx, dy) in disc_offsets(radius) {
        let (cx, cy) = (x as isize + dx, y as isize + dy);
        // Stencils sum to zero, so centering each patch changes nothing but
        // keeps the Gram entries small.
        let center = img.get(cx as usize, cy as usize);
        let mut patch = [0.0; 9];
        for b in -1..=1isize {
            for a in -1..=1isize {
                patch[(3 * (b + 1) + (a + 1)) as usize] = img.get((cx + a) as usize, (cy + b) as usize) - center;
            }
        }
        for i in 0..9 {
            patch_sum[i] += patch[i];
            for j in i..9 {
                gram[i][j] += patch[i] * patch[j];
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for (theta, k) in orientation_stencils() {
        let mut energy = 0.0;
        let mut signed = 0.0;
        for i in 0..9 {
            signed += k[i] * patch_sum[i];
            let mut row = k[i] * gram[i][i];
            for j in i + 1..9 {
                row += 2.0 * k[j] * gram[i][j];
            }
            energy += k[i] * row;
        }
        if energy > best.0 {
            best = (energy, *theta, signed);
        }
    }
    if best.0 <= 1e-18 {
        return Err(Error::LowContrast);
    }
    let theta = if best.2 < 0.0 { best.1 + PI } else { best.1 };
    Ok(wrap_angle(theta))
}

/// Circular standard deviation of axial angles (period `pi`).
fn axial_spread(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + (2.0 * a).sin(), c + (2.0 * a).cos()));
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt();
    if r <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * (-2.0 * r.min(1.0).ln()).sqrt()
}

#[inline]
fn lattice_sample(img: &GrayImage, x: usize, y: usize, step: LatticeStep, k: isize) -> Option<f64> {
    let sx = x as isize + k * step.dx;
    let sy = y as isize + k * step.dy;
    if sx < 0 || sy < 0 || sx >= img.width() as isize || sy >= img.height() as isize {
        None
    } else {
        Some(img.get(sx as usize, sy as usize))
    }
}

/// Checks whether `(x, y)` is a usable measurement site.
pub fn validate_point(mask: &EdgeMask, img: &GrayImage, x: usize, y: usize, cfg: &EdgeConfig) -> EdgePoint {
    let reach = cfg.reach();
    if x < reach || y < reach || x + reach >= img.width() || y + reach >= img.height() {
        return EdgePoint::rejected(x, y, 0.0, RejectReason::OutOfBounds);
    }
    if mask.width() != img.width() || mask.height() != img.height() || !*mask.get(x, y) {
        return EdgePoint::rejected(x, y, 0.0, RejectReason::NoEdge);
    }

    let mut orientations = Vec::new();
    for (dx, dy) in disc_offsets(cfg.radius) {
        let (px, py) = ((x as isize + dx) as usize, (y as isize + dy) as usize);
        if *mask.get(px, py) {
            let (gx, gy) = sobel_at(img, px, py);
            if gx != 0.0 || gy != 0.0 {
                orientations.push(gy.atan2(gx));
            }
        }
    }
    if orientations.len() < cfg.min_support {
        return EdgePoint::rejected(x, y, 0.0, RejectReason::NoEdge);
    }
    if axial_spread(&orientations) > cfg.angle_tol {
        return EdgePoint::rejected(x, y, 0.0, RejectReason::MultiOrientation);
    }

    let normal = match edge_orientation(img, x, y, cfg.radius) {
        Ok(a) => a,
        Err(Error::OutOfBounds { .. }) => return EdgePoint::rejected(x, y, 0.0, RejectReason::OutOfBounds),
        Err(_) => return EdgePoint::rejected(x, y, 0.0, RejectReason::LowContrast),
    };

    let (nx, ny) = (normal.cos(), normal.sin());
    let (xf, yf) = (x as f64, y as f64);
    let span = match (
        sample_bilinear(img, xf + cfg.radius * nx, yf + cfg.radius * ny),
        sample_bilinear(img, xf - cfg.radius * nx, yf - cfg.radius * ny),
    ) {
        (Ok(a), Ok(b)) => a - b,
        _ => return EdgePoint::rejected(x, y, normal, RejectReason::OutOfBounds),
    };
    if span.abs() < cfg.min_contrast {
        return EdgePoint::rejected(x, y, normal, RejectReason::LowContrast);
    }

    let step = lattice_step(normal);
    let samples: Option<Vec<f64>> = (-2..=2).map(|k| lattice_sample(img, x, y, step, k)).collect();
    let Some(s) = samples else {
        return EdgePoint::rejected(x, y, normal, RejectReason::OutOfBounds);
    };
    let outer = s[4] - s[0];
    if (s[3] - s[1]).abs() < cfg.denominator_floor || outer.abs() < cfg.denominator_floor {
        return EdgePoint::rejected(x, y, normal, RejectReason::LowContrast);
    }
    let asymmetry = (s[2] - 0.5 * (s[4] + s[0])).abs() / outer.abs();
    if asymmetry > cfg.center_tol {
        return EdgePoint::rejected(x, y, normal, RejectReason::OffCenter);
    }

    EdgePoint {
        x,
        y,
        normal_angle: normal,
        valid: true,
        reject_reason: None,
    }
}

/// `M_Gd` at a validated site, from integer samples two lattice steps either
/// side of the point.
pub fn measure_mgd_at(img: &GrayImage, point: &EdgePoint, denominator_floor: f64) -> Result<EdgeMeasure> {
    let step = lattice_step(point.normal_angle);
    let sample = |k: isize| {
        lattice_sample(img, point.x, point.y, step, k).ok_or(Error::OutOfBounds {
            x: point.x as f64 + (k * step.dx) as f64,
            y: point.y as f64 + (k * step.dy) as f64,
        })
    };
    let (m2, m1, p1, p2) = (sample(-2)?, sample(-1)?, sample(1)?, sample(2)?);
    let inner = p1 - m1;
    if inner.abs() < denominator_floor {
        return Err(Error::LowContrast);
    }
    let outer = p2 - m2;
    Ok(EdgeMeasure {
        value: outer / inner,
        step_scale: step.scale,
    })
}

/// Runs Canny and validates every edge pixel at least `margin` pixels from
/// the border. Points come back in raster order.
pub fn detect_points(img: &GrayImage, cfg: &EdgeConfig, margin: usize) -> Result<Vec<EdgePoint>> {
    cfg.validate()?;
    let mask = canny(img, &cfg.canny)?;
    let mut points = Vec::new();
    for y in margin..img.height().saturating_sub(margin) {
        for x in margin..img.width().saturating_sub(margin) {
            if *mask.get(x, y) {
                points.push(validate_point(&mask, img, x, y, cfg));
            }
        }
    }
    Ok(points)
}
