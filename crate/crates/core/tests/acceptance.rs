//! Acceptance criteria, one line of output each.
//!
//! Runs as a plain binary (no libtest harness) so the report is always
//! printed. Exits non-zero if any criterion fails.
//!
//! Criterion 8 additionally evaluates a real converted dataset when
//! `DFD_MAKE3D_DIR` points at a directory with a `manifest.txt`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use dfd_core::blur_math::{
    curve_rows, erg_error, invert_measure, mgd_excess, MeasureKind, MonotoneInterval, RelativeError,
};
use dfd_core::edge::{detect_points, measure_mgd_at, EdgeConfig};
use dfd_core::experiment::batch::{batch_eval, evaluate_scene, EvalConfig, GridSpec};
use dfd_core::experiment::curves::default_sigma_grid;
use dfd_core::experiment::{
    edge_grid_texture, read_manifest, save_depth, save_image, PlaneSpec, REFERENCE_COVERED_CELL_FRACTION,
    REFERENCE_MARE, REFERENCE_VALID_PIXEL_FRACTION,
};
use dfd_core::image::{convolve_uniform, GrayImage};
use dfd_core::pipeline::{
    estimate_depth_map, relative_blur, Calibration, DepthMap, LatticeInverter, PipelineConfig, SuperpixelGrid,
};
use rand::{RngExt, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Result<Verdict, String>);

/// A check either passes, fails, or is met by everything except a bound the
/// exact formula cannot satisfy. Deviations are reported but do not fail the run.
enum Verdict {
    Pass(String),
    Deviation(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:.2?}, budget {budget:?}"))?;
    Ok(t)
}

fn c1_curves() -> Result<Verdict, String> {
    let start = Instant::now();
    let grid = default_sigma_grid();
    let rows = curve_rows(&grid, 1.0).map_err(|e| e.to_string())?;
    ensure(grid[0] == 0.05 && grid[grid.len() - 1] == 10.0, || {
        "grid does not span [0.05, 10]".into()
    })?;
    for r in rows.iter().filter(|r| r.sigma < 0.25) {
        ensure(r.rg > 4.0, || format!("R_G({}) = {} is not above 4", r.sigma, r.rg))?;
    }
    for w in rows.windows(2) {
        ensure(w[0].rg > w[1].rg, || {
            format!("R_G not increasing towards 0 at sigma {}", w[0].sigma)
        })?;
        ensure(w[0].mgd <= w[1].mgd, || {
            format!("M_Gd decreases at sigma {}", w[0].sigma)
        })?;
        let (a, b) = (mgd_excess(w[0].sigma).unwrap(), mgd_excess(w[1].sigma).unwrap());
        ensure(a < b, || {
            format!("M_Gd - 1 not strictly increasing at sigma {}", w[0].sigma)
        })?;
    }
    let rgd_max = rows.iter().map(|r| r.rgd).fold(0.0, f64::max);
    ensure(rgd_max < 1.6, || format!("R_Gd reaches {rgd_max}"))?;
    let (lo, hi) = (rows[0].mgd, rows[rows.len() - 1].mgd);
    ensure((lo - 1.0).abs() < 1e-3, || format!("M_Gd(0.05) = {lo}"))?;
    let (olo, ohi) = (common::mgd(0.05), common::mgd(10.0));
    ensure((lo - olo).abs() < 1e-12 && (hi - ohi).abs() < 1e-12, || {
        format!("endpoint mismatch with oracle: {lo} vs {olo}, {hi} vs {ohi}")
    })?;
    // 2 - M_Gd(s) decays like 1/s^2, so the upper asymptote is only within
    // 1e-3 from s of about 31.6 on. Check convergence there instead.
    for s in [32.0, 100.0, 1000.0] {
        let m = 1.0 + mgd_excess(s).unwrap();
        ensure((m - 2.0).abs() < 1e-3 && m < 2.0, || {
            format!("M_Gd({s}) = {m} does not approach 2")
        })?;
    }
    let t = within_budget(start, Duration::from_secs(1))?;
    let detail = format!(
        "R_G(0.05)={:.3}, max R_Gd={rgd_max:.5}, M_Gd(0.05)={lo}, M_Gd(10)={hi:.8} [{t:.2?}]",
        rows[0].rg
    );
    if (hi - 2.0).abs() < 1e-3 {
        Ok(Verdict::Pass(detail))
    } else {
        Ok(Verdict::Deviation(format!(
            "{detail}; M_Gd(10) is {:.2e} below 2, which the exact curve (oracle {ohi:.8}) cannot meet; \
             |M_Gd - 2| < 1e-3 holds from sigma 32 on, all other checks pass",
            2.0 - hi
        )))
    }
}

fn c2_error_curve() -> Outcome {
    let start = Instant::now();
    common::check_oracle()?;
    for sigma in [0.05, 0.1] {
        let e = erg_error(sigma, 1.0).map_err(|e| e.to_string())?;
        ensure(e.as_f64() > 1.0, || format!("E_RG({sigma}) = {:?} is not above 1", e))?;
    }
    for sigma in default_sigma_grid().into_iter().filter(|s| *s >= 0.5) {
        let e = erg_error(sigma, 1.0).map_err(|e| e.to_string())?;
        ensure(matches!(e, RelativeError::Finite(v) if v.is_finite()), || {
            format!("E_RG({sigma}) not finite")
        })?;
    }
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let sigma = 0.05 + k as f64 * (10.0 - 0.05) / 19.0;
        let got = erg_error(sigma, 1.0).map_err(|e| e.to_string())?.as_f64();
        let want = common::erg(sigma, 1.0);
        let diff = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("E_RG({sigma}) = {got}, oracle {want}"))?;
    }
    let t = within_budget(start, Duration::from_secs(1))?;
    Ok(format!(
        "E_RG(0.05)={:.3}, E_RG(1)={:.6}, worst deviation from oracle {worst:.1e} over 20 points [{t:.2?}]",
        common::erg(0.05, 1.0),
        common::erg(1.0, 1.0)
    ))
}

fn c3_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = rand::rngs::Xoshiro256PlusPlus::seed_from_u64(3);
    let sigmas: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..10.0)).collect();
    let mut worst: f64 = 0.0;
    for kind in [MeasureKind::MgDiscrete, MeasureKind::RgDiscrete { sigma1: 1.0 }] {
        let interval = MonotoneInterval::new(kind, 0.5, 10.0).map_err(|e| e.to_string())?;
        for &s in &sigmas {
            let v = kind.forward(s).map_err(|e| e.to_string())?;
            let inv = invert_measure(kind, v, &interval, 1e-6).map_err(|e| e.to_string())?;
            let err = (inv.sigma - s).abs();
            worst = worst.max(err);
            ensure(err <= 1e-6 && !inv.out_of_range, || {
                format!("{kind}: sigma {s} came back as {}", inv.sigma)
            })?;
        }
    }
    let t = within_budget(start, Duration::from_secs(1))?;
    Ok(format!("200 inversions, worst error {worst:.1e} [{t:.2?}]"))
}

fn c4_convolution() -> Outcome {
    let start = Instant::now();
    let (w, h, edge) = (160usize, 8usize, 80usize);
    let (i_min, i_max) = (0.2, 0.8);
    let step = GrayImage::from_fn(w, h, |x, _| if x < edge { i_min } else { i_max });
    let mut worst: f64 = 0.0;
    for sigma in [0.6, 1.0, 2.0, 5.0] {
        let out = convolve_uniform(&step, sigma).map_err(|e| e.to_string())?;
        let margin = (4.0 * sigma).ceil() as usize + 1;
        for y in 0..h {
            for x in margin..w - margin {
                // pixel x covers [x - 1/2, x + 1/2]; the step sits at edge - 1/2
                let want = common::step(x as f64 - (edge as f64 - 0.5), i_min, i_max, sigma);
                let err = (out.get(x, y) - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-3, || {
                    format!("sigma {sigma}: pixel {x} is {} vs {want}", out.get(x, y))
                })?;
            }
        }
    }
    let t = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "worst deviation {worst:.1e} over sigma {{0.6, 1, 2, 5}} [{t:.2?}]"
    ))
}

fn c5_single_edge() -> Outcome {
    let start = Instant::now();
    let cfg = EdgeConfig::default();
    let mut inverter = LatticeInverter::new(0.5, 10.0, 1e-6).map_err(|e| e.to_string())?;
    let n = 96usize;
    let c = (n / 2) as f64;
    let mut worst: f64 = 0.0;
    let mut total = 0usize;
    let mut counts = Vec::new();
    for angle in [0.0f64, 30.0, 45.0, 90.0] {
        let (nx, ny) = (angle.to_radians().cos(), angle.to_radians().sin());
        for sigma in [0.6, 1.0, 2.0, 4.0, 8.0] {
            let img = GrayImage::from_fn(n, n, |x, y| {
                common::step((x as f64 - c) * nx + (y as f64 - c) * ny, 0.2, 0.8, sigma)
            });
            let points = detect_points(&img, &cfg, 8).map_err(|e| e.to_string())?;
            let mut valid = 0;
            for p in points.iter().filter(|p| p.valid) {
                let m = measure_mgd_at(&img, p, cfg.denominator_floor).map_err(|e| format!("{e} at {p:?}"))?;
                let inv = inverter.invert(&m).map_err(|e| e.to_string())?;
                let rel = (inv.sigma - sigma).abs() / sigma;
                worst = worst.max(rel);
                ensure(rel <= 0.05, || {
                    format!(
                        "angle {angle}, sigma {sigma}: point ({}, {}) gives {:.4}",
                        p.x, p.y, inv.sigma
                    )
                })?;
                valid += 1;
            }
            ensure(valid > 0, || format!("angle {angle}, sigma {sigma}: no valid point"))?;
            counts.push(valid);
            total += valid;
        }
    }
    let t = within_budget(start, Duration::from_secs(30))?;
    let fewest = counts.iter().min().copied().unwrap_or(0);
    Ok(format!(
        "{total} valid points over 20 edges (fewest {fewest}), worst relative error {:.2}% [{t:.2?}]",
        worst * 100.0
    ))
}

fn c6_composition() -> Outcome {
    let start = Instant::now();
    let original = edge_grid_texture(256, 256, 32, 1.0, 6).map_err(|e| e.to_string())?;
    let defocused = convolve_uniform(&original, 2.0).map_err(|e| e.to_string())?;
    let calib = Calibration::fit(1.0, 100.0, 0.5, 10.0).map_err(|e| e.to_string())?;
    let grid = SuperpixelGrid::fitted(256, 256, 16, 16).map_err(|e| e.to_string())?;
    let est = estimate_depth_map(&original, &defocused, &grid, &calib, &PipelineConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(!est.estimates.is_empty(), || "no valid points".into())?;
    let mut worst: f64 = 0.0;
    let mut mean = 0.0;
    for e in &est.estimates {
        let rel = (e.sigma_obj - 2.0).abs() / 2.0;
        worst = worst.max(rel);
        mean += e.sigma_obj;
        ensure(rel <= 0.07, || {
            format!("({}, {}) recovers {:.4}", e.point.x, e.point.y, e.sigma_obj)
        })?;
    }
    mean /= est.estimates.len() as f64;
    Ok(format!(
        "{} points, mean objective blur {mean:.4}, worst relative error {:.2}% [{:.2?}]",
        est.estimates.len(),
        worst * 100.0,
        start.elapsed()
    ))
}

fn c7_scene() -> Outcome {
    let start = Instant::now();
    let run = || {
        let texture = edge_grid_texture(512, 512, 32, 1.0, 42)?;
        let calib = Calibration::fit(1.0, 100.0, 0.5, 10.0)?;
        let grid = SuperpixelGrid::centered(512, 512, 16, 4, 30, 120)?;
        let planes: PlaneSpec = "vbands:2,4,8".parse()?;
        let gt = planes.depth_map(&grid)?;
        let (result, est) = evaluate_scene("scene", &texture, &gt, &grid, &calib, &PipelineConfig::default())?;
        Ok::<_, dfd_core::Error>((result, est, calib))
    };
    let (a, est, calib) = run().map_err(|e| e.to_string())?;
    let (b, est_b, _) = run().map_err(|e| e.to_string())?;
    let bits = |d: &DepthMap| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(a == b && bits(&est.depth) == bits(&est_b.depth), || {
        "two runs differ".into()
    })?;
    for (v, covered) in est.depth.values().iter().zip(&est.covered) {
        ensure(*covered || *v == calib.d_max, || {
            format!("empty cell holds {v}, not d_max")
        })?;
    }
    let m = a.mare_covered.ok_or("no cell covered")?;
    ensure(m < 0.10, || format!("MARE over covered cells {m}"))?;
    let t = within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "MARE over covered cells {:.2}%, {:.1}% cells covered, {:.2}% pixels valid, runs bit-identical [{t:.2?}]",
        m * 100.0,
        a.covered_cell_fraction * 100.0,
        a.valid_pixel_fraction * 100.0
    ))
}

/// Builds a two-entry dataset in benchmark geometry on disk.
fn desk_scale_dataset(dir: &std::path::Path) -> dfd_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    let grid = SuperpixelGrid::make3d();
    let mut manifest = String::from("# synthetic stand-in in benchmark geometry\n");
    for (i, spec) in ["vbands:3,7,15,30,60", "hbands:2,5,12,40"].iter().enumerate() {
        let texture = edge_grid_texture(2272, 1704, 48, 1.0, 100 + i as u64)?;
        let gt = spec.parse::<PlaneSpec>()?.depth_map(&grid)?;
        save_image(dir.join(format!("img{i}.pgm")), &texture)?;
        save_depth(dir.join(format!("depth{i}.txt")), &gt)?;
        manifest.push_str(&format!("scene{i} img{i}.pgm depth{i}.txt\n"));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

fn c8_benchmark_scale() -> Outcome {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("dfd-acceptance-{}", std::process::id()));
    desk_scale_dataset(&dir).map_err(|e| e.to_string())?;
    let cfg = EvalConfig {
        grid: GridSpec::Make3d,
        ..EvalConfig::default()
    };
    let entries = read_manifest(&dir).map_err(|e| e.to_string())?;
    let report = batch_eval(&entries, &cfg).map_err(|e| e.to_string())?;
    let text = report.to_text();
    for key in [
        "mean_mare=",
        "reference_mare=0.275",
        "mean_valid_pixel_fraction=",
        "mean_covered_cell_fraction=",
    ] {
        ensure(text.contains(key), || format!("report lacks `{key}`"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    let mut detail = format!(
        "harness ran on a synthetic stand-in: mean MARE {:.1}% (reference {:.1}%), {:.2}% over covered cells, valid pixels {:.2}% (reference < {:.0}%), covered cells {:.1}% (reference > {:.0}%)",
        report.mean_mare * 100.0,
        REFERENCE_MARE * 100.0,
        report.mean_mare_covered.unwrap_or(f64::NAN) * 100.0,
        report.mean_valid_pixel_fraction * 100.0,
        REFERENCE_VALID_PIXEL_FRACTION * 100.0,
        report.mean_covered_cell_fraction * 100.0,
        REFERENCE_COVERED_CELL_FRACTION * 100.0
    );
    match std::env::var_os("DFD_MAKE3D_DIR").map(PathBuf::from) {
        Some(real) => {
            let entries = read_manifest(&real).map_err(|e| e.to_string())?;
            let r = batch_eval(&entries, &cfg).map_err(|e| e.to_string())?;
            detail.push_str(&format!(
                "; converted benchmark ({} images): mean MARE {:.1}% vs {:.1}%",
                r.entries.len(),
                r.mean_mare * 100.0,
                REFERENCE_MARE * 100.0
            ));
        }
        None => {
            detail.push_str("; benchmark data not supplied (set DFD_MAKE3D_DIR), the 27.5% figure is not reproduced")
        }
    }
    Ok(format!("{detail} [{:.2?}]", start.elapsed()))
}

fn c9_degenerate() -> Outcome {
    let start = Instant::now();
    let calib = Calibration::fit(1.0, 100.0, 0.5, 10.0).map_err(|e| e.to_string())?;
    let grid = SuperpixelGrid::fitted(128, 128, 16, 16).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let img = edge_grid_texture(128, 128, 32, 1.0, 9).map_err(|e| e.to_string())?;
    let blurred = convolve_uniform(&img, 2.0).map_err(|e| e.to_string())?;

    // identical pair: zero objective blur, nearest depth on covered cells
    let same = estimate_depth_map(&img, &img, &grid, &calib, &cfg).map_err(|e| e.to_string())?;
    ensure(!same.estimates.is_empty(), || "identical pair: no points".into())?;
    for e in &same.estimates {
        ensure(
            e.sigma_obj == 0.0 && e.depth_hat == calib.d_min && !e.flags.negative_discriminant,
            || format!("identical pair: {e:?}"),
        )?;
    }
    for (v, c) in same.depth.values().iter().zip(&same.covered) {
        let want = if *c { calib.d_min } else { calib.d_max };
        ensure(*v == want, || format!("identical pair: cell {v} != {want}"))?;
    }

    // flat images: nothing to measure
    let flat = GrayImage::filled(128, 128, 0.5).map_err(|e| e.to_string())?;
    let none = estimate_depth_map(&flat, &flat, &grid, &calib, &cfg).map_err(|e| e.to_string())?;
    ensure(
        none.coverage.valid_points == 0
            && none.coverage.covered_cells == 0
            && none.depth.values().iter().all(|&v| v == calib.d_max),
        || format!("flat image: {:?}", none.coverage),
    )?;

    // defocused sharper than original: flagged zeros
    let swapped = estimate_depth_map(&blurred, &img, &grid, &calib, &cfg).map_err(|e| e.to_string())?;
    ensure(!swapped.estimates.is_empty(), || "swapped pair: no points".into())?;
    for e in &swapped.estimates {
        ensure(e.flags.negative_discriminant && e.sigma_obj == 0.0, || {
            format!("swapped pair: {e:?}")
        })?;
    }
    ensure(relative_blur(2.0, 1.0) == (0.0, true), || "relative_blur(2, 1)".into())?;
    ensure(relative_blur(1.0, 1.0) == (0.0, false), || "relative_blur(1, 1)".into())?;

    // unattainable values clamp to the nearer end and say so
    let mg = MonotoneInterval::new(MeasureKind::MgDiscrete, 0.5, 10.0).map_err(|e| e.to_string())?;
    let hi = invert_measure(MeasureKind::MgDiscrete, 2.5, &mg, 1e-6).map_err(|e| e.to_string())?;
    let lo = invert_measure(MeasureKind::MgDiscrete, 0.9, &mg, 1e-6).map_err(|e| e.to_string())?;
    ensure(
        hi.sigma == 10.0 && hi.out_of_range && lo.sigma == 0.5 && lo.out_of_range,
        || format!("M_Gd clamping: {hi:?} {lo:?}"),
    )?;
    let rgd = MeasureKind::RgDiscrete { sigma1: 1.0 };
    let rgd_iv = MonotoneInterval::new(rgd, 0.5, 10.0).map_err(|e| e.to_string())?;
    let top = invert_measure(rgd, 1.9, &rgd_iv, 1e-6).map_err(|e| e.to_string())?;
    let bottom = invert_measure(rgd, 0.5, &rgd_iv, 1e-6).map_err(|e| e.to_string())?;
    ensure(
        top.sigma == 0.5 && top.out_of_range && bottom.sigma == 10.0 && bottom.out_of_range,
        || format!("R_Gd clamping: {top:?} {bottom:?}"),
    )?;
    let far = calib.blur_to_depth(12.0);
    let near = calib.blur_to_depth(0.0);
    ensure(
        far.value == 100.0 && far.clamped && near.value == 1.0 && near.clamped,
        || format!("depth clamping: {far:?} {near:?}"),
    )?;
    Ok(format!(
        "identical pair {} points at d_min, flat image 0 points, swapped pair {} flagged, clamps exact [{:.2?}]",
        same.estimates.len(),
        swapped.estimates.len(),
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "measure curves", c1_curves),
        (2, "discretization error curve", || c2_error_curve().map(Verdict::Pass)),
        (3, "round-trip inversion", || c3_round_trip().map(Verdict::Pass)),
        (4, "convolution vs closed form", || c4_convolution().map(Verdict::Pass)),
        (5, "single-edge measurement", || c5_single_edge().map(Verdict::Pass)),
        (6, "blur composition", || c6_composition().map(Verdict::Pass)),
        (7, "end-to-end synthetic scene", || c7_scene().map(Verdict::Pass)),
        (8, "benchmark-scale harness", || c8_benchmark_scale().map(Verdict::Pass)),
        (9, "degenerate inputs", || c9_degenerate().map(Verdict::Pass)),
    ];
    let (mut failed, mut deviations) = (0, 0);
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(Verdict::Pass(detail)) => println!("criterion {id} PASS {name}: {detail}"),
            Ok(Verdict::Deviation(detail)) => {
                deviations += 1;
                println!("criterion {id} DEVIATION {name}: {detail}");
            }
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {deviations} deviation(s), {failed} failed",
        9 - failed - deviations
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
