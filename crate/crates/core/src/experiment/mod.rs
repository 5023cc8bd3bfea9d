//! Everything around the pipeline needed to run experiments: file formats,
//! synthetic scenes, error metrics, curve tables and batch evaluation.

pub mod batch;
pub mod curves;
pub mod io;
pub mod metrics;
pub mod synth;

pub use batch::{batch_eval, read_manifest, DatasetEntry, EvalConfig, EvalReport, GridSpec};
pub use curves::{emit_curves, CurveTable};
pub use io::{load_depth, load_image, save_depth, save_image, save_pgm_visualization};
pub use metrics::{mare, mare_masked};
pub use synth::{edge_grid_texture, make_synthetic_scene, PlaneLayout, PlaneSpec, SyntheticScene};

/// Mean absolute relative depth error reported for the exact-measure
/// pipeline on the 134 outdoor benchmark test images.
pub const REFERENCE_MARE: f64 = 0.275;

/// Reported average fraction of image pixels that are valid edge sites
/// ("less than 6%").
pub const REFERENCE_VALID_PIXEL_FRACTION: f64 = 0.06;

/// Reported average fraction of depth cells holding at least one site
/// ("more than 57%").
pub const REFERENCE_COVERED_CELL_FRACTION: f64 = 0.57;

/// Published mean relative errors of single-image learned/handcrafted
/// methods on the same benchmark, for comparison in reports.
pub const SINGLE_IMAGE_BASELINES: [(&str, f64); 6] = [
    ("saxena2005", 0.53),
    ("make3d", 0.37),
    ("semantic-labels", 0.375),
    ("depth-transfer", 0.362),
    ("discrete-continuous", 0.338),
    ("deep-cnf", 0.307),
];
