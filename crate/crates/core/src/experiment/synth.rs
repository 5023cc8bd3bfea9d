//! Synthetic defocus scenes: a textured image, a piecewise-planar depth map
//! and the defocused copy rendered from it.

use std::fmt;
use std::str::FromStr;

use rand::rngs::Xoshiro256PlusPlus;
use rand::{RngExt, SeedableRng};

use crate::image::{convolve_uniform, GrayImage};
use crate::pipeline::{simulate_defocus, Calibration, DepthMap, SuperpixelGrid};
use crate::{Error, Result};

/// Intensity ranges of the dark and bright squares of [`edge_grid_texture`].
pub const DARK_RANGE: (f64, f64) = (0.15, 0.35);
pub const BRIGHT_RANGE: (f64, f64) = (0.65, 0.85);

/// Checkerboard of `square`-pixel squares with per-square random intensity,
/// dark and bright squares alternating, blurred by `pre_blur` to mimic the
/// finite sharpness of a real focused photograph. Deterministic in `seed`.
pub fn edge_grid_texture(width: usize, height: usize, square: usize, pre_blur: f64, seed: u64) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Empty("texture size".into()));
    }
    if square < 2 {
        return Err(Error::domain("texture squares must be at least 2 pixels"));
    }
    let (sx, sy) = (width.div_ceil(square), height.div_ceil(square));
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let levels: Vec<f64> = (0..sx * sy)
        .map(|i| {
            let (cx, cy) = (i % sx, i / sx);
            let (lo, hi) = if (cx + cy) % 2 == 0 { DARK_RANGE } else { BRIGHT_RANGE };
            rng.random_range(lo..hi)
        })
        .collect();
    // Square boundaries run through pixel centers: a boundary pixel is split
    // evenly between its two squares, so the edge sits exactly on it.
    let spans = |p: usize, cells: usize| -> [(usize, f64); 2] {
        let c = p / square;
        if p % square == 0 && c > 0 && c < cells {
            [(c - 1, 0.5), (c, 0.5)]
        } else {
            [(c.min(cells - 1), 1.0), (0, 0.0)]
        }
    };
    let sharp = GrayImage::from_fn(width, height, |x, y| {
        let mut v = 0.0;
        for (cy, wy) in spans(y, sy) {
            for (cx, wx) in spans(x, sx) {
                v += wx * wy * levels[cy * sx + cx];
            }
        }
        v
    });
    convolve_uniform(&sharp, pre_blur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneLayout {
    /// Equal-width bands of grid columns, left to right.
    VerticalBands,
    /// Equal-height bands of grid rows, top to bottom.
    HorizontalBands,
}

/// A layout and the depth of each band, written `vbands:2,4,8` or
/// `hbands:1.5,30`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub layout: PlaneLayout,
    pub depths: Vec<f64>,
}

impl FromStr for PlaneSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("plane spec `{s}`: {why}"));
        let (kind, list) = s
            .split_once(':')
            .ok_or_else(|| bad("expected `vbands:` or `hbands:` prefix"))?;
        let layout = match kind.trim() {
            "vbands" => PlaneLayout::VerticalBands,
            "hbands" => PlaneLayout::HorizontalBands,
            other => return Err(bad(&format!("unknown layout `{other}`"))),
        };
        let depths = list
            .split(',')
            .map(|t| {
                let d: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| bad(&format!("bad depth `{}`", t.trim())))?;
                if d > 0.0 && d.is_finite() {
                    Ok(d)
                } else {
                    Err(bad("depths must be positive"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout, depths })
    }
}

impl fmt::Display for PlaneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.layout {
            PlaneLayout::VerticalBands => "vbands",
            PlaneLayout::HorizontalBands => "hbands",
        };
        let depths: Vec<String> = self.depths.iter().map(|d| d.to_string()).collect();
        write!(f, "{kind}:{}", depths.join(","))
    }
}

impl PlaneSpec {
    /// Ground truth at grid resolution. Band `k` of `n` covers grid columns
    /// (or rows) `[k*len/n, (k+1)*len/n)`.
    pub fn depth_map(&self, grid: &SuperpixelGrid) -> Result<DepthMap> {
        let n = self.depths.len();
        if n == 0 {
            return Err(Error::Empty("plane depths".into()));
        }
        let along = match self.layout {
            PlaneLayout::VerticalBands => grid.cols,
            PlaneLayout::HorizontalBands => grid.rows,
        };
        if n > along {
            return Err(Error::InvalidGrid(format!(
                "{n} planes do not fit in {along} grid cells"
            )));
        }
        let band = |i: usize| self.depths[i * n / along];
        let mut values = Vec::with_capacity(grid.cell_count());
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                values.push(match self.layout {
                    PlaneLayout::VerticalBands => band(c),
                    PlaneLayout::HorizontalBands => band(r),
                });
            }
        }
        DepthMap::new(grid.rows, grid.cols, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub original: GrayImage,
    pub defocused: GrayImage,
    pub gt: DepthMap,
}

pub fn make_synthetic_scene(
    texture: &GrayImage,
    planes: &PlaneSpec,
    grid: &SuperpixelGrid,
    calib: &Calibration,
) -> Result<SyntheticScene> {
    grid.fits(texture.width(), texture.height())?;
    let gt = planes.depth_map(grid)?;
    let defocused = simulate_defocus(texture, &gt, grid, calib)?;
    Ok(SyntheticScene {
        original: texture.clone(),
        defocused,
        gt,
    })
}
