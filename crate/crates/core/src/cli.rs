//! Command-line front end for the `dfd` binary.
//!
//! Settings come from built-in defaults, then an optional `key=value` config
//! file, then `DFD_OUT_DIR`, then command-line flags; later sources win. Every
//! run writes the fully resolved settings to `config.resolved` in the output
//! directory so the run can be repeated with `--config`.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 validation.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::edge::{CannyParams, EdgeConfig};
use crate::experiment::batch::{batch_eval_with, EvalConfig, GridSpec};
use crate::experiment::curves::{default_sigma_grid, emit_curves};
use crate::experiment::io::{load_depth_raw, save_depth};
use crate::experiment::{
    edge_grid_texture, load_image, make_synthetic_scene, read_manifest, save_image, save_pgm_visualization, PlaneSpec,
};
use crate::image::GrayImage;
use crate::pipeline::{
    estimate_depth_map, Calibration, DepthEstimate, DepthMap, PipelineConfig, SuperpixelGrid, DEFAULT_SIGMA_MAX,
    DEFAULT_SIGMA_MIN,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

pub const OUT_DIR_ENV: &str = "DFD_OUT_DIR";
pub const RESOLVED_CONFIG_NAME: &str = "config.resolved";

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_)
        | Error::PngDecode(_)
        | Error::PngEncode(_)
        | Error::Parse { .. }
        | Error::UnsupportedFormat(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// How the superpixel grid is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    /// `make3d`: 55 x 305 cells of 41 x 5 pixels in a 2272 x 1704 image.
    Make3d,
    /// `cells:WxH`: cells of W x H pixels, as many as fit, centered.
    Cells { width: usize, height: usize },
    /// `grid:CW,CH,OX,OY,COLS,ROWS`: fully explicit.
    Explicit(SuperpixelGrid),
}

impl FromStr for GridChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "make3d" {
            return Ok(GridChoice::Make3d);
        }
        let nums = |list: &str, sep: char| -> std::result::Result<Vec<usize>, String> {
            list.split(sep)
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("bad grid number `{t}` in `{s}`"))
                })
                .collect()
        };
        if let Some(rest) = s.strip_prefix("cells:") {
            if let [w, h] = nums(rest, 'x')?[..] {
                if w > 0 && h > 0 {
                    return Ok(GridChoice::Cells { width: w, height: h });
                }
            }
        } else if let Some(rest) = s.strip_prefix("grid:") {
            if let [cw, ch, ox, oy, cols, rows] = nums(rest, ',')?[..] {
                return SuperpixelGrid::new(cw, ch, ox, oy, cols, rows)
                    .map(GridChoice::Explicit)
                    .map_err(|e| e.to_string());
            }
        }
        Err(format!(
            "grid `{s}` is not `make3d`, `cells:WxH` or `grid:CW,CH,OX,OY,COLS,ROWS`"
        ))
    }
}

impl fmt::Display for GridChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridChoice::Make3d => f.write_str("make3d"),
            GridChoice::Cells { width, height } => write!(f, "cells:{width}x{height}"),
            GridChoice::Explicit(g) => write!(
                f,
                "grid:{},{},{},{},{},{}",
                g.cell_width, g.cell_height, g.origin_x, g.origin_y, g.cols, g.rows
            ),
        }
    }
}

impl GridChoice {
    /// Grid for an image of the given size.
    pub fn grid_for(&self, width: usize, height: usize) -> Result<SuperpixelGrid> {
        let grid = match *self {
            GridChoice::Make3d => SuperpixelGrid::make3d(),
            GridChoice::Cells { width: cw, height: ch } => SuperpixelGrid::fitted(width, height, cw, ch)?,
            GridChoice::Explicit(g) => g,
        };
        grid.fits(width, height)?;
        Ok(grid)
    }

    pub fn spec(&self) -> GridSpec {
        match *self {
            GridChoice::Make3d => GridSpec::Make3d,
            GridChoice::Cells { width, height } => GridSpec::Fitted {
                cell_width: width,
                cell_height: height,
            },
            GridChoice::Explicit(g) => GridSpec::Explicit(g),
        }
    }
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Re-blur parameter for the curve tables.
    pub sigma1: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    /// Orientation tolerance in degrees.
    pub angle_tol: f64,
    pub radius: f64,
    pub min_contrast: f64,
    pub center_tol: f64,
    pub grid: GridChoice,
    /// Depth range for calibration; unset means the ground-truth extremes.
    pub d_min: Option<f64>,
    pub d_max: Option<f64>,
    pub seed: u64,
    pub texture_size: usize,
    pub square: usize,
    pub pre_blur: f64,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let edge = EdgeConfig::default();
        Self {
            sigma1: crate::blur_math::DEFAULT_SIGMA1,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            canny_sigma: edge.canny.smoothing_sigma,
            canny_low: edge.canny.low_ratio,
            canny_high: edge.canny.high_ratio,
            angle_tol: crate::edge::DEFAULT_ANGLE_TOL_DEG,
            radius: edge.radius,
            min_contrast: edge.min_contrast,
            center_tol: edge.center_tol,
            grid: GridChoice::Make3d,
            d_min: None,
            d_max: None,
            seed: 0,
            texture_size: 512,
            square: 32,
            pre_blur: 1.0,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn parse_optional(key: &str, value: &str) -> std::result::Result<Option<f64>, String> {
    if value.is_empty() || value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

impl RunConfig {
    /// Sets one setting from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "sigma1" => self.sigma1 = parse_value(key, v)?,
            "sigma_min" => self.sigma_min = parse_value(key, v)?,
            "sigma_max" => self.sigma_max = parse_value(key, v)?,
            "canny_sigma" => self.canny_sigma = parse_value(key, v)?,
            "canny_low" => self.canny_low = parse_value(key, v)?,
            "canny_high" => self.canny_high = parse_value(key, v)?,
            "angle_tol" => self.angle_tol = parse_value(key, v)?,
            "radius" => self.radius = parse_value(key, v)?,
            "min_contrast" => self.min_contrast = parse_value(key, v)?,
            "center_tol" => self.center_tol = parse_value(key, v)?,
            "grid" => self.grid = v.parse()?,
            "d_min" => self.d_min = parse_optional(key, v)?,
            "d_max" => self.d_max = parse_optional(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "texture_size" => self.texture_size = parse_value(key, v)?,
            "square" => self.square = parse_value(key, v)?,
            "pre_blur" => self.pre_blur = parse_value(key, v)?,
            "threads" => self.threads = parse_value(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(format!("unknown setting `{other}`")),
        }
        Ok(())
    }

    /// Applies a `key=value` file on top of `self`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> std::result::Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
            self.set(k, v)
                .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        }
        Ok(())
    }

    /// The settings as a config file.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_owned(), |x| x.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "sigma1={}", self.sigma1);
        let _ = writeln!(s, "sigma_min={}", self.sigma_min);
        let _ = writeln!(s, "sigma_max={}", self.sigma_max);
        let _ = writeln!(s, "canny_sigma={}", self.canny_sigma);
        let _ = writeln!(s, "canny_low={}", self.canny_low);
        let _ = writeln!(s, "canny_high={}", self.canny_high);
        let _ = writeln!(s, "angle_tol={}", self.angle_tol);
        let _ = writeln!(s, "radius={}", self.radius);
        let _ = writeln!(s, "min_contrast={}", self.min_contrast);
        let _ = writeln!(s, "center_tol={}", self.center_tol);
        let _ = writeln!(s, "grid={}", self.grid);
        let _ = writeln!(s, "d_min={}", opt(self.d_min));
        let _ = writeln!(s, "d_max={}", opt(self.d_max));
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "texture_size={}", self.texture_size);
        let _ = writeln!(s, "square={}", self.square);
        let _ = writeln!(s, "pre_blur={}", self.pre_blur);
        let _ = writeln!(s, "threads={}", self.threads);
        let _ = writeln!(s, "out_dir={}", self.out_dir.display());
        s
    }

    pub fn edge(&self) -> EdgeConfig {
        EdgeConfig {
            canny: CannyParams {
                smoothing_sigma: self.canny_sigma,
                low_ratio: self.canny_low,
                high_ratio: self.canny_high,
            },
            radius: self.radius,
            angle_tol: self.angle_tol.to_radians(),
            min_contrast: self.min_contrast,
            center_tol: self.center_tol,
            ..EdgeConfig::default()
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            edge: self.edge(),
            ..PipelineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.edge().validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return bad(format!("sigma1 must be positive, got {}", self.sigma1));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return bad(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            ));
        }
        if self.d_min.is_some() != self.d_max.is_some() {
            return bad("d_min and d_max must be given together".into());
        }
        if let (Some(lo), Some(hi)) = (self.d_min, self.d_max) {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return bad(format!("need 0 < d_min < d_max, got {lo} and {hi}"));
            }
        }
        if self.square < 2 || self.texture_size < self.square {
            return bad(format!(
                "texture_size {} and square {} must satisfy 2 <= square <= texture_size",
                self.texture_size, self.square
            ));
        }
        if !(self.pre_blur >= 0.0 && self.pre_blur.is_finite()) {
            return bad(format!("pre_blur must be >= 0, got {}", self.pre_blur));
        }
        Ok(())
    }

    /// Calibration from the configured depth range, or from `fallback` (the
    /// ground-truth extremes) when none is configured.
    pub fn calibration(&self, fallback: Option<(f64, f64)>) -> Result<Calibration> {
        let (lo, hi) = match (self.d_min.zip(self.d_max), fallback) {
            (Some(r), _) | (None, Some(r)) => r,
            (None, None) => {
                return Err(Error::Config(
                    "no depth range: pass --d-min/--d-max or a ground-truth depth map".into(),
                ))
            }
        };
        Calibration::fit(lo, hi, self.sigma_min, self.sigma_max)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dfd",
    version,
    about = "Depth from defocus using exact discrete blur measures",
    long_about = "Depth from defocus using exact discrete blur measures.\n\n\
        Settings are resolved from defaults, then --config, then DFD_OUT_DIR, then flags.\n\
        Exit codes: 0 success, 1 usage, 2 I/O, 3 validation."
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Config file of key=value lines (same keys as config.resolved).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true, env = OUT_DIR_ENV, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Re-blur parameter of the curve tables [default: 1.0].
    #[arg(long, global = true)]
    sigma1: Option<f64>,
    /// Blur of the nearest depth [default: 0.5].
    #[arg(long, global = true)]
    sigma_min: Option<f64>,
    /// Blur of the farthest depth [default: 10].
    #[arg(long, global = true)]
    sigma_max: Option<f64>,
    /// Canny pre-smoothing sigma [default: 1.0].
    #[arg(long, global = true)]
    canny_sigma: Option<f64>,
    /// Canny weak threshold, fraction of the largest gradient [default: 0.1].
    #[arg(long, global = true)]
    canny_low: Option<f64>,
    /// Canny strong threshold, fraction of the largest gradient [default: 0.2].
    #[arg(long, global = true)]
    canny_high: Option<f64>,
    /// Orientation spread tolerance inside the circle, degrees [default: 15].
    #[arg(long, global = true)]
    angle_tol: Option<f64>,
    /// Measurement circle radius in pixels [default: 3].
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Smallest intensity span across an edge [default: 0.02].
    #[arg(long, global = true)]
    min_contrast: Option<f64>,
    /// Largest edge centering asymmetry [default: 0.08].
    #[arg(long, global = true)]
    center_tol: Option<f64>,
    /// Superpixel grid: make3d, cells:WxH or grid:CW,CH,OX,OY,COLS,ROWS [default: make3d].
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Nearest depth of the calibration [default: from ground truth].
    #[arg(long, global = true)]
    d_min: Option<f64>,
    /// Farthest depth of the calibration [default: from ground truth].
    #[arg(long, global = true)]
    d_max: Option<f64>,
    /// Seed of the generated texture [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Side of the generated texture in pixels [default: 512].
    #[arg(long, global = true)]
    texture_size: Option<usize>,
    /// Checker square size of the generated texture [default: 32].
    #[arg(long, global = true)]
    square: Option<usize>,
    /// Blur applied to the generated texture [default: 1.0].
    #[arg(long, global = true)]
    pre_blur: Option<f64>,
    /// Worker threads for eval, 0 = all cores [default: 0].
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> std::result::Result<(), String> {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        take!(
            sigma1,
            sigma_min,
            sigma_max,
            canny_sigma,
            canny_low,
            canny_high,
            angle_tol,
            radius,
            min_contrast,
            center_tol,
            seed,
            texture_size,
            square,
            pre_blur,
            threads,
            out_dir
        );
        if let Some(g) = &self.grid {
            cfg.grid = g.parse()?;
        }
        if self.d_min.is_some() {
            cfg.d_min = self.d_min;
        }
        if self.d_max.is_some() {
            cfg.d_max = self.d_max;
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write blur measures against sigma on 0.05..10 (step 0.05) to curves.csv.
    Curves,
    /// Render a synthetic scene: original.pgm, defocused.pgm and gt_depth.txt.
    Synth {
        /// Plane layout and depths, e.g. vbands:2,4,8 or hbands:3,9.
        #[arg(long)]
        planes: String,
        /// Texture image; by default a seeded checkerboard is generated.
        #[arg(long)]
        texture: Option<PathBuf>,
    },
    /// Estimate depth from an image pair; writes <name>_depth.txt, <name>_vis.pgm and report.txt.
    Dfd {
        original: PathBuf,
        defocused: PathBuf,
        /// Ground-truth depth map; adds MARE to the report.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Evaluate every entry of DATASET_DIR/manifest.txt (lines `id image depth`).
    Eval { dataset_dir: PathBuf },
    /// Dump every accepted edge point of an image pair to measure.csv.
    Measure { original: PathBuf, defocused: PathBuf },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Runs the CLI with the given arguments (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("dfd: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("dfd: error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve(overrides: &Overrides) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &overrides.config {
        let text = fs::read_to_string(path).map_err(|e| {
            Failure::Run(Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )))
        })?;
        cfg.apply_text(&text, path).map_err(Failure::Usage)?;
    }
    overrides.apply(&mut cfg).map_err(Failure::Usage)?;
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = crate::experiment::io::ensure_dir(&cfg.out_dir)?;
    fs::write(dir.join(RESOLVED_CONFIG_NAME), cfg.to_text())?;
    Ok(dir)
}

fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    let cfg = resolve(&cli.overrides)?;
    match cli.command {
        Command::Curves => cmd_curves(&cfg)?,
        Command::Synth { planes, texture } => {
            let planes: PlaneSpec = planes.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            cmd_synth(&cfg, texture.as_deref(), &planes)?
        }
        Command::Dfd {
            original,
            defocused,
            gt,
        } => cmd_dfd(&cfg, &original, &defocused, gt.as_deref())?,
        Command::Eval { dataset_dir } => cmd_eval(&cfg, &dataset_dir)?,
        Command::Measure { original, defocused } => cmd_measure(&cfg, &original, &defocused)?,
    }
    Ok(())
}

pub fn cmd_curves(cfg: &RunConfig) -> Result<()> {
    let table = emit_curves(&default_sigma_grid(), cfg.sigma1)?;
    let dir = prepare_out_dir(cfg)?;
    let path = dir.join("curves.csv");
    table.write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, texture: Option<&Path>, planes: &PlaneSpec) -> Result<()> {
    let texture = match texture {
        Some(p) => load_image(p)?,
        None => edge_grid_texture(cfg.texture_size, cfg.texture_size, cfg.square, cfg.pre_blur, cfg.seed)?,
    };
    let grid = cfg.grid.grid_for(texture.width(), texture.height())?;
    let (lo, hi) = planes
        .depths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    // a single plane has no range of its own; give it one decade
    let fallback = if lo < hi { (lo, hi) } else { (lo, lo * 10.0) };
    let calib = cfg.calibration(Some(fallback))?;
    let scene = make_synthetic_scene(&texture, planes, &grid, &calib)?;
    let dir = prepare_out_dir(cfg)?;
    save_image(dir.join("original.pgm"), &scene.original)?;
    save_image(dir.join("defocused.pgm"), &scene.defocused)?;
    save_depth(dir.join("gt_depth.txt"), &scene.gt)?;
    println!(
        "wrote original.pgm, defocused.pgm, gt_depth.txt to {} (grid {}, depth {}..{})",
        dir.display(),
        cfg.grid,
        calib.d_min,
        calib.d_max
    );
    Ok(())
}

fn load_pair(original: &Path, defocused: &Path) -> Result<(GrayImage, GrayImage)> {
    let a = load_image(original)?;
    let b = load_image(defocused)?;
    a.same_size(&b)?;
    Ok((a, b))
}

fn extremes(values: &[f64]) -> Option<(f64, f64)> {
    let usable = values.iter().copied().filter(|v| v.is_finite() && *v > 0.0);
    let lo = usable.clone().fold(f64::INFINITY, f64::min);
    let hi = usable.fold(f64::NEG_INFINITY, f64::max);
    lo.is_finite().then_some((lo, hi))
}

fn coverage_lines(est: &DepthEstimate) -> String {
    let c = &est.coverage;
    format!(
        "candidate_points={}\nvalid_points={}\nvalid_pixel_fraction={}\ncovered_cells={}\ntotal_cells={}\n\
         covered_cell_fraction={}\nclamped_points={}\nnegative_discriminant_points={}\n",
        c.candidate_points,
        c.valid_points,
        c.valid_pixel_fraction(),
        c.covered_cells,
        c.total_cells,
        c.covered_cell_fraction(),
        est.clamped_count(),
        est.negative_discriminant_count()
    )
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".to_owned(), |s| s.to_string_lossy().into_owned())
}

pub fn cmd_dfd(cfg: &RunConfig, original: &Path, defocused: &Path, gt_path: Option<&Path>) -> Result<()> {
    let (a, b) = load_pair(original, defocused)?;
    let grid = cfg.grid.grid_for(a.width(), a.height())?;
    let gt_raw = gt_path.map(load_depth_raw).transpose()?;
    let calib = cfg.calibration(gt_raw.as_ref().and_then(|(_, _, v)| extremes(v)))?;
    let gt = match gt_raw {
        Some((rows, cols, values)) => {
            let (gt, replaced) = DepthMap::clamped_from(rows, cols, values, calib.d_min)?;
            gt.matches_grid(&grid)?;
            Some((gt, replaced))
        }
        None => None,
    };
    let est = estimate_depth_map(&a, &b, &grid, &calib, &cfg.pipeline())?;

    let dir = prepare_out_dir(cfg)?;
    let name = stem(original);
    save_depth(dir.join(format!("{name}_depth.txt")), &est.depth)?;
    save_pgm_visualization(
        dir.join(format!("{name}_vis.pgm")),
        &est.depth,
        calib.d_min,
        calib.d_max,
    )?;
    let mut report = format!("image={name}\nd_min={}\nd_max={}\n", calib.d_min, calib.d_max);
    report.push_str(&coverage_lines(&est));
    if let Some((gt, replaced)) = &gt {
        let m = crate::experiment::mare(&est.depth, gt)?;
        let mc = crate::experiment::mare_masked(&est.depth, gt, &est.covered)?;
        let _ = writeln!(report, "mare={m}");
        let _ = writeln!(
            report,
            "mare_covered={}",
            mc.map_or_else(|| "none".to_owned(), |v| v.to_string())
        );
        let _ = writeln!(report, "gt_clamped_cells={replaced}");
    }
    fs::write(dir.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, dataset_dir: &Path) -> Result<()> {
    let entries = read_manifest(dataset_dir)?;
    let eval_cfg = EvalConfig {
        grid: cfg.grid.spec(),
        pipeline: cfg.pipeline(),
        sigma_min: cfg.sigma_min,
        sigma_max: cfg.sigma_max,
        depth_range: cfg.d_min.zip(cfg.d_max),
        threads: cfg.threads,
    };
    let dir = prepare_out_dir(cfg)?;
    let report = batch_eval_with(&entries, &eval_cfg, |out| {
        let id = &out.result.id;
        save_depth(dir.join(format!("{id}_depth.txt")), &out.estimate.depth)?;
        save_pgm_visualization(
            dir.join(format!("{id}_vis.pgm")),
            &out.estimate.depth,
            out.calibration.d_min,
            out.calibration.d_max,
        )
    })?;
    let text = report.to_text();
    fs::write(dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn cmd_measure(cfg: &RunConfig, original: &Path, defocused: &Path) -> Result<()> {
    let (a, b) = load_pair(original, defocused)?;
    let grid = cfg.grid.grid_for(a.width(), a.height())?;
    let calib = match cfg.calibration(None) {
        Ok(c) => c,
        // depth is incidental here; measure in blur units with a nominal range
        Err(Error::Config(_)) => Calibration::fit(1.0, 10.0, cfg.sigma_min, cfg.sigma_max)?,
        Err(e) => return Err(e),
    };
    let est = estimate_depth_map(&a, &b, &grid, &calib, &cfg.pipeline())?;
    let mut csv =
        String::from("x,y,normal_deg,m1,m2,sigma1_hat,sigma2_hat,sigma_obj,depth,clamped,negative_discriminant\n");
    for e in &est.estimates {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.point.x,
            e.point.y,
            e.point.normal_angle.to_degrees(),
            e.m1,
            e.m2,
            e.sigma1_hat,
            e.sigma2_hat,
            e.sigma_obj,
            e.depth_hat,
            u8::from(e.flags.clamped),
            u8::from(e.flags.negative_discriminant)
        );
    }
    let dir = prepare_out_dir(cfg)?;
    let path = dir.join("measure.csv");
    fs::write(&path, csv)?;
    println!("wrote {} points to {}", est.estimates.len(), path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_choice_round_trip() {
        for s in ["make3d", "cells:16x4", "grid:41,5,8,89,55,305"] {
            let g: GridChoice = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        for bad in ["", "cells:0x4", "cells:4", "grid:1,2,3", "hex:3"] {
            assert!(bad.parse::<GridChoice>().is_err(), "{bad}");
        }
        assert_eq!(
            "grid:41,5,8,89,55,305".parse::<GridChoice>().unwrap(),
            GridChoice::Explicit(SuperpixelGrid::make3d())
        );
    }

    #[test]
    fn resolved_text_reparses() {
        let cfg = RunConfig {
            d_min: Some(1.5),
            d_max: Some(80.0),
            grid: GridChoice::Cells { width: 16, height: 4 },
            ..RunConfig::default()
        };
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text(), Path::new("c")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::default().edge(), EdgeConfig::default());
    }

    #[test]
    fn config_file_errors_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg
            .apply_text("sigma1=2\n\nbogus=1\n", Path::new("f.conf"))
            .unwrap_err();
        assert!(err.starts_with("f.conf:3:"), "{err}");
        assert!(cfg.apply_text("sigma1", Path::new("f")).is_err());
        assert!(cfg.apply_text("sigma1=abc", Path::new("f")).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.d_min = Some(3.0);
        assert!(cfg.validate().is_err());
        cfg.d_max = Some(2.0);
        assert!(cfg.validate().is_err());
        cfg.d_max = Some(20.0);
        assert!(cfg.validate().is_ok());
        cfg.canny_low = 0.5;
        assert!(cfg.validate().is_err());
    }
}
