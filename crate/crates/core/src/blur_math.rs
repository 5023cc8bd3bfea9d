//! Closed-form blur measures for a Gaussian-blurred step edge.
//!
//! A step from `i_min` to `i_max` blurred by a Gaussian of standard deviation
//! `sigma` has the profile `i(y) = i_min + (i_max - i_min)/2 * (1 + erf(y / (sqrt(2) sigma)))`.
//! Three scalar measures are derived from it:
//!
//! * `R_G`  – the continuous gradient ratio between the image and a copy
//!   re-blurred by `sigma1`, evaluated at the edge.
//! * `R_Gd` – the same ratio built from the one-pixel differences `i(1) - i(0)`,
//!   which is what a discrete implementation actually observes.
//! * `M_Gd` – `(i(2) - i(-2)) / (i(1) - i(-1))`, which needs no re-blurring.
//!
//! The discrete measures are exact for pixel samples, so inverting them on a
//! monotone interval recovers `sigma` exactly for noise-free edges.

use std::fmt;

use crate::{Error, Result};

/// Default standard deviation of the auxiliary re-blur used by the `R_G` family.
pub const DEFAULT_SIGMA1: f64 = 1.0;

/// Bisection stops once the bracket is narrower than this (pixel widths).
pub const DEFAULT_INVERSION_TOL: f64 = 1e-6;

pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Grid spacing used to verify monotonicity of an interval.
pub const MONOTONE_GRID_STEP: f64 = 1e-3;

/// Upper end of the blur range scanned by [`monotone_onset`].
pub const ONSET_SCAN_END: f64 = 10.0;

/// Error function, accurate to about one ulp.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Defocused step edge along one image axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEdgeModel {
    i_min: f64,
    i_max: f64,
    sigma: f64,
}

impl StepEdgeModel {
    pub fn new(i_min: f64, i_max: f64, sigma: f64) -> Result<Self> {
        if !(i_min.is_finite() && i_max.is_finite()) || i_max <= i_min {
            return Err(Error::domain(format!(
                "step edge needs i_max > i_min, got [{i_min}, {i_max}]"
            )));
        }
        check_blur("sigma", sigma)?;
        Ok(Self { i_min, i_max, sigma })
    }

    pub fn i_min(&self) -> f64 {
        self.i_min
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Intensity at signed offset `y` (pixel widths) from the edge.
    pub fn profile(&self, y: f64) -> f64 {
        step_edge_profile(y, self)
    }
}

pub fn step_edge_profile(y: f64, model: &StepEdgeModel) -> f64 {
    let half_span = 0.5 * (model.i_max - model.i_min);
    model.i_min + half_span * (1.0 + erf(y / (std::f64::consts::SQRT_2 * model.sigma)))
}

fn check_blur(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Continuous gradient ratio `sqrt((sigma^2 + sigma1^2) / sigma^2)`.
pub fn rg_continuous(sigma: f64, sigma1: f64) -> Result<f64> {
    check_blur("sigma", sigma)?;
    check_blur("sigma1", sigma1)?;
    Ok((1.0 + (sigma1 / sigma).powi(2)).sqrt())
}

/// Blur from a continuous gradient ratio, `sigma1 / sqrt(R^2 - 1)`.
pub fn rg_invert(ratio: f64, sigma1: f64) -> Result<f64> {
    check_blur("sigma1", sigma1)?;
    if ratio.is_nan() || ratio <= 1.0 {
        return Err(Error::domain(format!("gradient ratio must exceed 1, got {ratio}")));
    }
    if ratio.is_infinite() {
        return Ok(0.0);
    }
    Ok(sigma1 / ((ratio - 1.0) * (ratio + 1.0)).sqrt())
}

/// Exact one-pixel-difference version of the gradient ratio.
pub fn rgd_forward(sigma: f64, sigma1: f64) -> Result<f64> {
    check_blur("sigma", sigma)?;
    check_blur("sigma1", sigma1)?;
    let num = erf(1.0 / (std::f64::consts::SQRT_2 * sigma));
    let den = erf(1.0 / (2.0 * (sigma * sigma + sigma1 * sigma1)).sqrt());
    Ok(num / den)
}

/// `(i(2) - i(-2)) / (i(1) - i(-1))` for an edge blurred by `sigma`.
pub fn mgd_forward(sigma: f64) -> Result<f64> {
    Ok(1.0 + mgd_excess(sigma)?)
}

/// `M_Gd(sigma) - 1`, accurate where `M_Gd` itself rounds to 1.
pub fn mgd_excess(sigma: f64) -> Result<f64> {
    check_blur("sigma", sigma)?;
    let a = 1.0 / (std::f64::consts::SQRT_2 * sigma);
    if a > 1.0 {
        // erf saturates here; the excess is an erfc difference
        Ok((erfc(a) - erfc(2.0 * a)) / erf(a))
    } else {
        Ok((erf(2.0 * a) - erf(a)) / erf(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    RgContinuous { sigma1: f64 },
    RgDiscrete { sigma1: f64 },
    MgDiscrete,
}

impl MeasureKind {
    pub fn rg_continuous() -> Self {
        MeasureKind::RgContinuous { sigma1: DEFAULT_SIGMA1 }
    }

    pub fn rg_discrete() -> Self {
        MeasureKind::RgDiscrete { sigma1: DEFAULT_SIGMA1 }
    }

    pub fn sigma1(&self) -> Option<f64> {
        match *self {
            MeasureKind::RgContinuous { sigma1 } | MeasureKind::RgDiscrete { sigma1 } => Some(sigma1),
            MeasureKind::MgDiscrete => None,
        }
    }

    pub fn forward(&self, sigma: f64) -> Result<f64> {
        match *self {
            MeasureKind::RgContinuous { sigma1 } => rg_continuous(sigma, sigma1),
            MeasureKind::RgDiscrete { sigma1 } => rgd_forward(sigma, sigma1),
            MeasureKind::MgDiscrete => mgd_forward(sigma),
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::RgContinuous { sigma1 } => write!(f, "R_G(sigma1={sigma1})"),
            MeasureKind::RgDiscrete { sigma1 } => write!(f, "R_Gd(sigma1={sigma1})"),
            MeasureKind::MgDiscrete => f.write_str("M_Gd"),
        }
    }
}

/// A blur interval on which a measure is strictly monotone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneInterval {
    kind: MeasureKind,
    sigma_lo: f64,
    sigma_hi: f64,
    value_lo: f64,
    value_hi: f64,
}

impl MonotoneInterval {
    /// Builds the interval after checking strict monotonicity on a grid of
    /// [`MONOTONE_GRID_STEP`].
    pub fn new(kind: MeasureKind, sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        check_blur("sigma_lo", sigma_lo)?;
        check_blur("sigma_hi", sigma_hi)?;
        if sigma_lo >= sigma_hi {
            return Err(Error::domain(format!(
                "interval needs sigma_lo < sigma_hi, got [{sigma_lo}, {sigma_hi}]"
            )));
        }
        let value_lo = kind.forward(sigma_lo)?;
        let value_hi = kind.forward(sigma_hi)?;
        let increasing = value_hi > value_lo;
        let steps = ((sigma_hi - sigma_lo) / MONOTONE_GRID_STEP).ceil() as usize;
        let mut prev = value_lo;
        for k in 1..=steps {
            let s = if k == steps {
                sigma_hi
            } else {
                sigma_lo + k as f64 * MONOTONE_GRID_STEP
            };
            let v = kind.forward(s)?;
            let ok = if increasing { v > prev } else { v < prev };
            if !ok {
                return Err(Error::NotMonotone {
                    lo: sigma_lo,
                    hi: sigma_hi,
                });
            }
            prev = v;
        }
        Ok(Self {
            kind,
            sigma_lo,
            sigma_hi,
            value_lo,
            value_hi,
        })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn sigma_lo(&self) -> f64 {
        self.sigma_lo
    }

    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi
    }

    pub fn value_lo(&self) -> f64 {
        self.value_lo
    }

    pub fn value_hi(&self) -> f64 {
        self.value_hi
    }

    pub fn is_increasing(&self) -> bool {
        self.value_hi > self.value_lo
    }
}

/// Result of inverting a measured value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub sigma: f64,
    /// The value was not attainable on the interval and `sigma` is an endpoint.
    pub out_of_range: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Values outside the attainable range by at most this much map to the
    /// nearer endpoint without raising `out_of_range`.
    pub slack: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_INVERSION_TOL,
            max_iterations: MAX_BISECTION_ITERATIONS,
            slack: 0.0,
        }
    }
}

/// Inverts `value` on the interval by bisection with tolerance `tol`.
pub fn invert_measure(kind: MeasureKind, value: f64, interval: &MonotoneInterval, tol: f64) -> Result<Inversion> {
    invert_measure_with(
        kind,
        value,
        interval,
        &InversionOptions {
            tol,
            ..InversionOptions::default()
        },
    )
}

pub fn invert_measure_with(
    kind: MeasureKind,
    value: f64,
    interval: &MonotoneInterval,
    opts: &InversionOptions,
) -> Result<Inversion> {
    if kind != interval.kind {
        return Err(Error::domain(format!(
            "interval was built for {}, not {kind}",
            interval.kind
        )));
    }
    if !value.is_finite() {
        return Err(Error::domain(format!("measure value must be finite, got {value}")));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let increasing = interval.is_increasing();
    let (v_min, sigma_at_min, v_max, sigma_at_max) = if increasing {
        (
            interval.value_lo,
            interval.sigma_lo,
            interval.value_hi,
            interval.sigma_hi,
        )
    } else {
        (
            interval.value_hi,
            interval.sigma_hi,
            interval.value_lo,
            interval.sigma_lo,
        )
    };
    if value <= v_min {
        return Ok(Inversion {
            sigma: sigma_at_min,
            out_of_range: value < v_min - opts.slack,
        });
    }
    if value >= v_max {
        return Ok(Inversion {
            sigma: sigma_at_max,
            out_of_range: value > v_max + opts.slack,
        });
    }

    let mut lo = interval.sigma_lo;
    let mut hi = interval.sigma_hi;
    for _ in 0..opts.max_iterations {
        if hi - lo <= opts.tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let below = kind.forward(mid)? < value;
        // below the target means the root lies on the side where the measure grows
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Inversion {
        sigma: 0.5 * (lo + hi),
        out_of_range: false,
    })
}

/// Relative error with an explicit sentinel for the inapplicable case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelativeError {
    Finite(f64),
    /// `R_Gd <= 1`, where the continuous inverse has no real solution.
    Infinite,
}

impl RelativeError {
    pub fn finite(self) -> Option<f64> {
        match self {
            RelativeError::Finite(v) => Some(v),
            RelativeError::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RelativeError::Infinite)
    }

    /// `f64` view, with the sentinel mapped to `+inf`.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Relative error of estimating `sigma` by applying the continuous inverse
/// `rg_invert` to the discrete ratio actually observed on pixels.
pub fn erg_error(sigma: f64, sigma1: f64) -> Result<RelativeError> {
    let rgd = rgd_forward(sigma, sigma1)?;
    if rgd <= 1.0 {
        return Ok(RelativeError::Infinite);
    }
    let estimate = (sigma1 / sigma) / ((rgd - 1.0) * (rgd + 1.0)).sqrt();
    Ok(RelativeError::Finite((estimate - 1.0).abs()))
}

/// Smallest grid blur above which `kind` has no reversal of direction up to
/// [`ONSET_SCAN_END`]. The grid starts at `grid_step`. Equal neighbours are
/// not reversals: at tiny blur the measures saturate in `f64`.
pub fn monotone_onset(kind: MeasureKind, grid_step: f64) -> Result<f64> {
    check_blur("grid_step", grid_step)?;
    let n = (ONSET_SCAN_END / grid_step).round() as usize;
    if n < 2 {
        return Err(Error::domain(format!(
            "grid step {grid_step} leaves fewer than two points"
        )));
    }
    let values = (1..=n)
        .map(|k| kind.forward(k as f64 * grid_step))
        .collect::<Result<Vec<_>>>()?;
    let increasing = values[n - 1] > values[n - 2];
    let mut start = n - 2;
    while start > 0 {
        let step_ok = if increasing {
            values[start] >= values[start - 1]
        } else {
            values[start] <= values[start - 1]
        };
        if !step_ok {
            break;
        }
        start -= 1;
    }
    Ok((start + 1) as f64 * grid_step)
}

/// One row of the measure/error curve table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub sigma: f64,
    pub rg: f64,
    pub rgd: f64,
    pub mgd: f64,
    pub erg: RelativeError,
}

pub fn curve_rows(sigmas: &[f64], sigma1: f64) -> Result<Vec<CurveRow>> {
    sigmas
        .iter()
        .map(|&sigma| {
            Ok(CurveRow {
                sigma,
                rg: rg_continuous(sigma, sigma1)?,
                rgd: rgd_forward(sigma, sigma1)?,
                mgd: mgd_forward(sigma)?,
                erg: erg_error(sigma, sigma1)?,
            })
        })
        .collect()
}
