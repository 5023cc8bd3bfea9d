//! Evaluation over a list of (image, ground-truth depth) pairs.
//!
//! Each entry is handled on its own: the defocused partner is rendered from
//! the ground truth, depth is estimated from the pair and compared against
//! the truth. Entries run in parallel; results are reduced in entry order so
//! reports do not depend on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::io::{load_depth_raw, load_image};
use super::metrics::{mare, mare_masked};
use super::{REFERENCE_COVERED_CELL_FRACTION, REFERENCE_MARE, REFERENCE_VALID_PIXEL_FRACTION};
use crate::image::GrayImage;
use crate::pipeline::{
    estimate_depth_map, simulate_defocus, Calibration, DepthEstimate, DepthMap, PipelineConfig, SuperpixelGrid,
    DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN,
};
use crate::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub depth_path: PathBuf,
}

/// Reads `dir/manifest.txt`: one `id image depth` triple per line, paths
/// relative to `dir`, blank lines and `#` comments ignored. Both files of
/// every entry must exist.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(super::io::with_path(&path))?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.clone(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, image, depth] = fields[..] else {
            return Err(err(format!("expected `id image depth`, found {} fields", fields.len())));
        };
        let entry = DatasetEntry {
            id: id.to_owned(),
            image_path: dir.join(image),
            depth_path: dir.join(depth),
        };
        for p in [&entry.image_path, &entry.depth_path] {
            if !p.is_file() {
                return Err(err(format!("{} does not exist", p.display())));
            }
        }
        if entries.iter().any(|e: &DatasetEntry| e.id == entry.id) {
            return Err(err(format!("duplicate id `{id}`")));
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// How the superpixel grid is laid over each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpec {
    /// The outdoor benchmark geometry; images must be 2272 x 1704.
    Make3d,
    /// Cells of the given size, as many as the ground truth has, centered.
    Fitted {
        cell_width: usize,
        cell_height: usize,
    },
    Explicit(SuperpixelGrid),
}

impl GridSpec {
    pub fn resolve(&self, width: usize, height: usize, depth_rows: usize, depth_cols: usize) -> Result<SuperpixelGrid> {
        let grid = match *self {
            GridSpec::Make3d => SuperpixelGrid::make3d(),
            GridSpec::Fitted {
                cell_width,
                cell_height,
            } => SuperpixelGrid::centered(width, height, cell_width, cell_height, depth_cols, depth_rows)?,
            GridSpec::Explicit(g) => g,
        };
        grid.fits(width, height)?;
        if grid.rows != depth_rows || grid.cols != depth_cols {
            return Err(Error::InvalidGrid(format!(
                "ground truth is {depth_rows}x{depth_cols} cells, grid is {}x{}",
                grid.rows, grid.cols
            )));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub grid: GridSpec,
    pub pipeline: PipelineConfig,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Depth range for calibration. `None` takes each entry's ground-truth
    /// extremes.
    pub depth_range: Option<(f64, f64)>,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::Make3d,
            pipeline: PipelineConfig::default(),
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            depth_range: None,
            threads: 0,
        }
    }
}

/// Per-entry outcome kept in the report.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryResult {
    pub id: String,
    pub mare: f64,
    /// MARE over cells with at least one estimate, if any.
    pub mare_covered: Option<f64>,
    pub valid_pixel_fraction: f64,
    pub covered_cell_fraction: f64,
    pub valid_points: usize,
    pub clamped_points: usize,
    pub negative_discriminant_points: usize,
    /// Ground-truth cells below the calibrated near limit, raised to it.
    pub gt_clamped_cells: usize,
}

/// Everything produced for one entry, handed to the batch callback.
#[derive(Debug, Clone)]
pub struct EntryOutput {
    pub result: EntryResult,
    pub calibration: Calibration,
    pub gt: DepthMap,
    pub estimate: DepthEstimate,
}

/// Evaluates an in-memory pair: renders the defocused image, estimates depth
/// and scores it.
pub fn evaluate_scene(
    id: &str,
    original: &GrayImage,
    gt: &DepthMap,
    grid: &SuperpixelGrid,
    calib: &Calibration,
    pipeline: &PipelineConfig,
) -> Result<(EntryResult, DepthEstimate)> {
    let defocused = simulate_defocus(original, gt, grid, calib)?;
    let estimate = estimate_depth_map(original, &defocused, grid, calib, pipeline)?;
    let result = EntryResult {
        id: id.to_owned(),
        mare: mare(&estimate.depth, gt)?,
        mare_covered: mare_masked(&estimate.depth, gt, &estimate.covered)?,
        valid_pixel_fraction: estimate.coverage.valid_pixel_fraction(),
        covered_cell_fraction: estimate.coverage.covered_cell_fraction(),
        valid_points: estimate.coverage.valid_points,
        clamped_points: estimate.clamped_count(),
        negative_discriminant_points: estimate.negative_discriminant_count(),
        gt_clamped_cells: 0,
    };
    Ok((result, estimate))
}

pub fn evaluate_entry(entry: &DatasetEntry, cfg: &EvalConfig) -> Result<EntryOutput> {
    let original = load_image(&entry.image_path)?;
    let (rows, cols, raw) = load_depth_raw(&entry.depth_path)?;
    let (d_min, d_max) = match cfg.depth_range {
        Some(r) => r,
        None => {
            let usable = raw.iter().copied().filter(|v| v.is_finite() && *v > 0.0);
            let lo = usable.clone().fold(f64::INFINITY, f64::min);
            let hi = usable.fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                return Err(Error::DegenerateCalibration(format!(
                    "{} holds no positive depth",
                    entry.depth_path.display()
                )));
            }
            (lo, hi)
        }
    };
    let calibration = Calibration::fit(d_min, d_max, cfg.sigma_min, cfg.sigma_max)?;
    let (gt, gt_clamped_cells) = DepthMap::clamped_from(rows, cols, raw, d_min)?;
    let grid = cfg.grid.resolve(original.width(), original.height(), rows, cols)?;
    let (mut result, estimate) = evaluate_scene(&entry.id, &original, &gt, &grid, &calibration, &cfg.pipeline)?;
    result.gt_clamped_cells = gt_clamped_cells;
    Ok(EntryOutput {
        result,
        calibration,
        gt,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Successful entries, in input order.
    pub entries: Vec<EntryResult>,
    /// `(id, message)` for each entry that could not be evaluated.
    pub failures: Vec<(String, String)>,
    pub mean_mare: f64,
    /// Mean over entries that covered at least one cell.
    pub mean_mare_covered: Option<f64>,
    pub mean_valid_pixel_fraction: f64,
    pub mean_covered_cell_fraction: f64,
    pub clamped_points: usize,
    pub negative_discriminant_points: usize,
    pub gt_clamped_cells: usize,
}

impl EvalReport {
    pub fn from_results(entries: Vec<EntryResult>, failures: Vec<(String, String)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty(format!(
                "no entry could be evaluated ({} failed)",
                failures.len()
            )));
        }
        let n = entries.len() as f64;
        let mean = |f: fn(&EntryResult) -> f64| entries.iter().map(f).sum::<f64>() / n;
        let covered: Vec<f64> = entries.iter().filter_map(|e| e.mare_covered).collect();
        Ok(Self {
            mean_mare: mean(|e| e.mare),
            mean_mare_covered: (!covered.is_empty()).then(|| covered.iter().sum::<f64>() / covered.len() as f64),
            mean_valid_pixel_fraction: mean(|e| e.valid_pixel_fraction),
            mean_covered_cell_fraction: mean(|e| e.covered_cell_fraction),
            clamped_points: entries.iter().map(|e| e.clamped_points).sum(),
            negative_discriminant_points: entries.iter().map(|e| e.negative_discriminant_points).sum(),
            gt_clamped_cells: entries.iter().map(|e| e.gt_clamped_cells).sum(),
            entries,
            failures,
        })
    }

    /// `key=value` lines, summary first, then one line per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "entries={}", self.entries.len());
        let _ = writeln!(s, "failed={}", self.failures.len());
        let _ = writeln!(s, "mean_mare={}", fmt9(self.mean_mare));
        let _ = writeln!(
            s,
            "mean_mare_covered={}",
            self.mean_mare_covered.map_or_else(|| "none".to_owned(), fmt9)
        );
        let _ = writeln!(s, "reference_mare={REFERENCE_MARE}");
        let _ = writeln!(s, "mean_valid_pixel_fraction={}", fmt9(self.mean_valid_pixel_fraction));
        let _ = writeln!(
            s,
            "reference_valid_pixel_fraction_below={REFERENCE_VALID_PIXEL_FRACTION}"
        );
        let _ = writeln!(
            s,
            "mean_covered_cell_fraction={}",
            fmt9(self.mean_covered_cell_fraction)
        );
        let _ = writeln!(
            s,
            "reference_covered_cell_fraction_above={REFERENCE_COVERED_CELL_FRACTION}"
        );
        let _ = writeln!(s, "clamped_points={}", self.clamped_points);
        let _ = writeln!(s, "negative_discriminant_points={}", self.negative_discriminant_points);
        let _ = writeln!(s, "gt_clamped_cells={}", self.gt_clamped_cells);
        for e in &self.entries {
            let _ = writeln!(
                s,
                "entry.{}=mare:{} mare_covered:{} valid_pixels:{} covered_cells:{} points:{} clamped:{} negative:{} gt_clamped:{}",
                e.id,
                fmt9(e.mare),
                e.mare_covered.map_or_else(|| "none".to_owned(), fmt9),
                fmt9(e.valid_pixel_fraction),
                fmt9(e.covered_cell_fraction),
                e.valid_points,
                e.clamped_points,
                e.negative_discriminant_points,
                e.gt_clamped_cells
            );
        }
        for (id, msg) in &self.failures {
            let _ = writeln!(s, "failure.{id}={}", msg.replace('\n', " "));
        }
        s
    }
}

fn fmt9(x: f64) -> String {
    format!("{}", super::curves::round_sig(x))
}

pub fn batch_eval(entries: &[DatasetEntry], cfg: &EvalConfig) -> Result<EvalReport> {
    batch_eval_with(entries, cfg, |_| Ok(()))
}

/// Like [`batch_eval`], calling `on_entry` for each successful entry in
/// input order. An error from the callback aborts the batch.
pub fn batch_eval_with(
    entries: &[DatasetEntry],
    cfg: &EvalConfig,
    mut on_entry: impl FnMut(&EntryOutput) -> Result<()>,
) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::Empty("dataset has no entries".into()));
    }
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(entries.len());

    let slots: Vec<Mutex<Option<Result<EntryOutput>>>> = entries.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= entries.len() {
                    break;
                }
                let out = evaluate_entry(&entries[i], cfg);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (entry, slot) in entries.iter().zip(slots) {
        match slot.into_inner().expect("slot lock").expect("every entry evaluated") {
            Ok(out) => {
                on_entry(&out)?;
                results.push(out.result);
            }
            Err(e) => failures.push((entry.id.clone(), e.to_string())),
        }
    }
    EvalReport::from_results(results, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, mare: f64) -> EntryResult {
        EntryResult {
            id: id.into(),
            mare,
            mare_covered: Some(mare / 2.0),
            valid_pixel_fraction: 0.05,
            covered_cell_fraction: 0.5,
            valid_points: 10,
            clamped_points: 1,
            negative_discriminant_points: 2,
            gt_clamped_cells: 0,
        }
    }

    #[test]
    fn report_means_and_text() {
        let r = EvalReport::from_results(
            vec![result("a", 0.1), result("b", 0.4)],
            vec![("c".into(), "boom".into())],
        )
        .unwrap();
        assert!((r.mean_mare - 0.25).abs() < 1e-15);
        assert_eq!(r.mean_mare_covered, Some(0.125));
        assert_eq!(r.clamped_points, 2);
        let text = r.to_text();
        assert!(text.contains("mean_mare=0.25\n"));
        assert!(text.contains("failed=1\n"));
        assert!(text.contains("reference_mare=0.275\n"));
        assert!(text.contains("failure.c=boom\n"));
        assert!(EvalReport::from_results(vec![], vec![]).is_err());
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(batch_eval(&[], &EvalConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn grid_spec_checks_depth_shape() {
        let g = GridSpec::Fitted {
            cell_width: 8,
            cell_height: 4,
        };
        let grid = g.resolve(100, 50, 10, 12).unwrap();
        assert_eq!((grid.origin_x, grid.origin_y), (2, 5));
        assert!(g.resolve(100, 50, 20, 12).is_err());
        assert!(GridSpec::Make3d.resolve(640, 480, 305, 55).is_err());
        assert!(GridSpec::Make3d.resolve(2272, 1704, 305, 55).is_ok());
        assert!(GridSpec::Make3d.resolve(2272, 1704, 55, 305).is_err());
    }
}
