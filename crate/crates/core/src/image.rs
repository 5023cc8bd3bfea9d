//! Raster types, exact Gaussian kernels and convolution.
//!
//! Pixel values are read as the average of a piecewise-constant scene over
//! each pixel cell, sampled at the pixel center. Kernel taps therefore
//! integrate the Gaussian over one pixel width, so a blurred step sampled at
//! pixel centers equals the closed-form erf profile.

use std::collections::HashMap;

use crate::blur_math::erf;
use crate::{Error, Result};

/// Blur values below this produce the identity kernel.
pub const IDENTITY_SIGMA: f64 = 1e-6;

/// Kernel half-width in standard deviations.
pub const KERNEL_TRUNCATION: f64 = 4.0;

/// Row-major luminance raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::domain(format!(
                "image of {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::domain(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from a function of `(x, y)`, clamping into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self { width, height, data }
    }

    /// Converts 8-bit gray samples (`255 -> 1.0`).
    pub fn from_gray8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Converts interleaved 8-bit RGB with fixed luminance weights.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::domain(format!(
                "RGB buffer has {} bytes, expected {}",
                bytes.len(),
                width * height * 3
            )));
        }
        let data = bytes
            .chunks_exact(3)
            .map(|p| clamp_unit((0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0))
            .collect();
        Self::new(width, height, data)
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel value with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    pub fn same_size(&self, other: &GrayImage) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: other.width,
                height: other.height,
            })
        }
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Generic row-major raster for masks and derived fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::domain(format!(
                "raster of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }
}

pub type EdgeMask = Raster<bool>;

/// Symmetric one-dimensional Gaussian taps, each the Gaussian mass over one
/// pixel width.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        gaussian_kernel(sigma)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::domain(format!("kernel sigma must be >= 0, got {sigma}")));
    }
    if sigma < IDENTITY_SIGMA {
        return Ok(GaussianKernel {
            sigma,
            radius: 0,
            weights: vec![1.0],
        });
    }
    let radius = ((KERNEL_TRUNCATION * sigma).ceil() as usize).max(1);
    let scale = 1.0 / (std::f64::consts::SQRT_2 * sigma);
    let mut weights: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let k = i as f64 - radius as f64;
            tap_mass(k, scale)
        })
        .collect();
    // mirror so the taps are bit-symmetric
    for i in 0..radius {
        weights[2 * radius - i] = weights[i];
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussianKernel { sigma, radius, weights })
}

/// Gaussian mass over `[k - 1/2, k + 1/2]`, computed on the side where erf
/// differences do not cancel.
fn tap_mass(k: f64, scale: f64) -> f64 {
    let a = (k.abs() - 0.5) * scale;
    let b = (k.abs() + 0.5) * scale;
    if a <= 0.0 {
        0.5 * (erf(b) - erf(a))
    } else {
        0.5 * (crate::blur_math::erfc(a) - crate::blur_math::erfc(b))
    }
}

/// Per-pixel blur for space-variant convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SigmaField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::domain(format!(
                "sigma field of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("sigma field value {bad} is not a blur")));
        }
        Ok(Self { width, height, values })
    }

    pub fn uniform(width: usize, height: usize, sigma: f64) -> Result<Self> {
        Self::new(width, height, vec![sigma; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Separable Gaussian blur with edge replication.
pub fn convolve_uniform(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    Ok(separable_pass(img, |_, _| &kernel))
}

/// Space-variant blur: every output pixel gathers its input neighbourhood with
/// the kernel for the blur at that output pixel. Both separable passes use the
/// blur of the pixel they write.
pub fn convolve_space_variant(img: &GrayImage, field: &SigmaField) -> Result<GrayImage> {
    if field.width != img.width || field.height != img.height {
        return Err(Error::DimensionMismatch {
            expected_width: img.width,
            expected_height: img.height,
            width: field.width,
            height: field.height,
        });
    }
    let mut cache: HashMap<u64, GaussianKernel> = HashMap::new();
    for &s in &field.values {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(s.to_bits()) {
            e.insert(gaussian_kernel(s)?);
        }
    }
    Ok(separable_pass(img, |x, y| &cache[&field.get(x, y).to_bits()]))
}

fn separable_pass<'k>(img: &GrayImage, kernel_at: impl Fn(usize, usize) -> &'k GaussianKernel) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let k = kernel_at(x, y);
            let r = k.radius as isize;
            let mut acc = 0.0;
            for (i, wt) in k.weights.iter().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += wt * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let k = kernel_at(x, y);
            let r = k.radius as isize;
            let mut acc = 0.0;
            for (i, wt) in k.weights.iter().enumerate() {
                let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += wt * tmp[sy * w + x];
            }
            out[y * w + x] = clamp_unit(acc);
        }
    }
    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

/// Bilinear interpolation at pixel-center coordinates `(x, y)`.
pub fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> Result<f64> {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
        return Err(Error::OutOfBounds { x, y });
    }
    let x0 = (x.floor() as usize).min(img.width.saturating_sub(2));
    let y0 = (y.floor() as usize).min(img.height.saturating_sub(2));
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    Ok(top * (1.0 - fy) + bottom * fy)
}

/// Gradient magnitude and direction of steepest ascent (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub magnitude: Raster<f64>,
    pub orientation: Raster<f64>,
}

/// Normalized 3x3 Sobel derivative `(d/dx, d/dy)` at a pixel, with border
/// replication. The 1/8 factor makes a unit ramp read as slope 1.
#[inline]
pub fn sobel_at(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (x, y) = (x as isize, y as isize);
    let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
    let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
    (gx / 8.0, gy / 8.0)
}

/// Sobel gradient of the whole image.
pub fn gradient(img: &GrayImage) -> Result<Gradient> {
    gradient_with(img, sobel_at)
}

/// Central-difference gradient, used where an unsmoothed derivative is wanted.
pub fn central_gradient(img: &GrayImage) -> Result<Gradient> {
    gradient_with(img, |img, x, y| {
        let (x, y) = (x as isize, y as isize);
        let gx = 0.5 * (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y));
        let gy = 0.5 * (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1));
        (gx, gy)
    })
}

fn gradient_with(img: &GrayImage, op: impl Fn(&GrayImage, usize, usize) -> (f64, f64)) -> Result<Gradient> {
    check_min_size(img, 3)?;
    let (w, h) = (img.width, img.height);
    let mut magnitude = Vec::with_capacity(w * h);
    let mut orientation = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = op(img, x, y);
            magnitude.push(gx.hypot(gy));
            orientation.push(gy.atan2(gx));
        }
    }
    Ok(Gradient {
        magnitude: Raster::from_vec(w, h, magnitude)?,
        orientation: Raster::from_vec(w, h, orientation)?,
    })
}

pub(crate) fn check_min_size(img: &GrayImage, min: usize) -> Result<()> {
    if img.width < min || img.height < min {
        Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
            min,
        })
    } else {
        Ok(())
    }
}
