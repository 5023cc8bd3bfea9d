//! Tables of the blur measures against σ, as CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::blur_math::{curve_rows, CurveRow, RelativeError};
use crate::{Error, Result};

pub const CURVE_HEADER: &str = "sigma,R_G,R_Gd,M_Gd,E_RG";

/// Significant digits kept when a table is written out.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// σ = 0.05, 0.10, ..., 10.0.
pub fn default_sigma_grid() -> Vec<f64> {
    (1..=200).map(|k| k as f64 / 20.0).collect()
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn fmt_value(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{}", round_sig(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub sigma1: f64,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let erg = match r.erg {
                RelativeError::Finite(v) => fmt_value(v),
                RelativeError::Infinite => "inf".to_owned(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_value(r.sigma),
                fmt_value(r.rg),
                fmt_value(r.rgd),
                fmt_value(r.mgd),
                erg
            );
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV produced by [`CurveTable::to_csv`]. The re-parsed table
    /// is bit-identical to the emitted one.
    pub fn parse(text: &str, sigma1: f64, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CURVE_HEADER => {}
            _ => return Err(err(1, format!("expected header `{CURVE_HEADER}`"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 5 {
                return Err(err(i + 1, format!("expected 5 fields, found {}", fields.len())));
            }
            let mut v = [0.0; 5];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| err(i + 1, format!("bad number `{f}`")))?;
            }
            rows.push(CurveRow {
                sigma: v[0],
                rg: v[1],
                rgd: v[2],
                mgd: v[3],
                erg: if v[4].is_infinite() {
                    RelativeError::Infinite
                } else {
                    RelativeError::Finite(v[4])
                },
            });
        }
        Ok(Self { sigma1, rows })
    }
}

/// Evaluates every measure on `sigma_grid` and returns the table as it is
/// written: every entry already rounded to [`SIGNIFICANT_DIGITS`].
pub fn emit_curves(sigma_grid: &[f64], sigma1: f64) -> Result<CurveTable> {
    if sigma_grid.is_empty() {
        return Err(Error::Empty("sigma grid".into()));
    }
    if sigma_grid[0] <= 0.0 || sigma_grid.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
        return Err(Error::domain("sigma grid must be positive and strictly ascending"));
    }
    let rows = curve_rows(sigma_grid, sigma1)?
        .into_iter()
        .map(|r| CurveRow {
            sigma: round_sig(r.sigma),
            rg: round_sig(r.rg),
            rgd: round_sig(r.rgd),
            mgd: round_sig(r.mgd),
            erg: match r.erg {
                RelativeError::Finite(v) => RelativeError::Finite(round_sig(v)),
                RelativeError::Infinite => RelativeError::Infinite,
            },
        })
        .collect();
    Ok(CurveTable { sigma1, rows })
}
