use std::ffi::{CStr, CString};
use std::ptr;

use dfd_ffi::*;

fn last_error() -> String {
    let p = dfd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    assert!((dfd_erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            dfd_measure_forward(DfdMeasure::MgDiscrete, 1.0, 0.0, &mut v),
            DfdStatus::Ok
        );
        assert!((v - 1.398_146_2).abs() < 1e-6);
        assert_eq!(
            dfd_measure_forward(DfdMeasure::RgContinuous, 1.0, 1.0, &mut v),
            DfdStatus::Ok
        );
        assert!((v - 2f64.sqrt()).abs() < 1e-15);

        let mut sigma = 0.0;
        let mut flag = -1;
        let m = 1.6;
        assert_eq!(
            dfd_measure_invert(DfdMeasure::MgDiscrete, m, 0.0, 0.5, 10.0, 1e-9, &mut sigma, &mut flag),
            DfdStatus::Ok
        );
        assert_eq!(flag, 0);
        dfd_measure_forward(DfdMeasure::MgDiscrete, sigma, 0.0, &mut v);
        assert!((v - m).abs() < 1e-8);
        assert_eq!(
            dfd_measure_invert(DfdMeasure::MgDiscrete, 2.5, 0.0, 0.5, 10.0, 1e-9, &mut sigma, &mut flag),
            DfdStatus::Ok
        );
        assert_eq!((sigma, flag), (10.0, 1));

        assert_eq!(dfd_erg(1.0, 1.0, &mut v), DfdStatus::Ok);
        assert!((v - 0.178_263).abs() < 1e-6);
        assert_eq!(
            dfd_measure_forward(DfdMeasure::MgDiscrete, -1.0, 0.0, &mut v),
            DfdStatus::Domain
        );
        assert!(last_error().contains("domain"));
    }
    assert!(dfd_last_error().is_null() || dfd_erf(0.0) == 0.0);
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        assert_eq!(
            dfd_measure_forward(DfdMeasure::MgDiscrete, 1.0, 0.0, ptr::null_mut()),
            DfdStatus::NullArgument
        );
        assert!(last_error().contains("NULL"));
        let mut img = ptr::null_mut();
        assert_eq!(dfd_image_new(2, 2, ptr::null(), &mut img), DfdStatus::NullArgument);
        assert!(img.is_null());
        assert_eq!(dfd_image_width(ptr::null()), 0);
        dfd_image_free(ptr::null_mut());
        dfd_depth_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_error() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(dfd_erg(-1.0, 1.0, &mut v), DfdStatus::Domain);
        assert!(!dfd_last_error().is_null());
        assert_eq!(dfd_erg(1.0, 1.0, &mut v), DfdStatus::Ok);
    }
    assert!(dfd_last_error().is_null());
}

#[test]
fn image_and_depth_handles() {
    let dir = std::env::temp_dir().join(format!("dfd-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    unsafe {
        let pixels: Vec<f64> = (0..64 * 64).map(|i| if i % 64 < 32 { 0.2 } else { 0.8 }).collect();
        let mut img = ptr::null_mut();
        assert_eq!(dfd_image_new(64, 64, pixels.as_ptr(), &mut img), DfdStatus::Ok);
        assert_eq!((dfd_image_width(img), dfd_image_height(img)), (64, 64));
        assert_eq!(*dfd_image_data(img).add(40), 0.8);

        let mut blurred = ptr::null_mut();
        assert_eq!(dfd_convolve_uniform(img, 2.0, &mut blurred), DfdStatus::Ok);
        assert!(*dfd_image_data(blurred).add(31) > 0.2);

        let path = CString::new(dir.join("img.png").to_str().unwrap()).unwrap();
        assert_eq!(dfd_image_save(img, path.as_ptr()), DfdStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dfd_image_load(path.as_ptr(), &mut back), DfdStatus::Ok);
        assert_eq!(dfd_image_width(back), 64);

        let missing = CString::new(dir.join("missing.pgm").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(dfd_image_load(missing.as_ptr(), &mut none), DfdStatus::Io);
        assert!(last_error().contains("missing.pgm"));

        let mut calib = std::mem::zeroed::<DfdCalibration>();
        assert_eq!(dfd_calibration_fit(1.0, 100.0, 0.5, 10.0, &mut calib), DfdStatus::Ok);
        let (mut s, mut clamped) = (0.0, -1);
        assert_eq!(dfd_depth_to_blur(&calib, 100.0, &mut s, &mut clamped), DfdStatus::Ok);
        assert_eq!((s, clamped), (10.0, 0));
        assert_eq!(dfd_blur_to_depth(&calib, 20.0, &mut s, &mut clamped), DfdStatus::Ok);
        assert_eq!((s, clamped), (100.0, 1));
        assert_eq!(dfd_calibration_fit(5.0, 5.0, 0.5, 10.0, &mut calib), DfdStatus::Config);

        let mut grid = std::mem::zeroed::<DfdGrid>();
        assert_eq!(dfd_grid_centered(64, 64, 16, 16, 4, 4, &mut grid), DfdStatus::Ok);
        assert_eq!(dfd_grid_centered(64, 64, 16, 16, 5, 4, &mut grid), DfdStatus::Dimension);
        let m3 = dfd_grid_make3d();
        assert_eq!((m3.cols, m3.rows, m3.cell_width, m3.cell_height), (55, 305, 41, 5));

        let values = [4.0; 16];
        let mut depth = ptr::null_mut();
        assert_eq!(dfd_depth_new(4, 4, values.as_ptr(), &mut depth), DfdStatus::Ok);
        let dpath = CString::new(dir.join("d.txt").to_str().unwrap()).unwrap();
        assert_eq!(dfd_depth_save(depth, dpath.as_ptr()), DfdStatus::Ok);
        let mut dback = ptr::null_mut();
        assert_eq!(dfd_depth_load(dpath.as_ptr(), &mut dback), DfdStatus::Ok);
        assert_eq!((dfd_depth_rows(dback), dfd_depth_cols(dback)), (4, 4));
        let mut err = -1.0;
        assert_eq!(dfd_mare(dback, depth, &mut err), DfdStatus::Ok);
        assert_eq!(err, 0.0);

        let bad = [0.0; 4];
        let mut none = ptr::null_mut();
        assert_eq!(dfd_depth_new(2, 2, bad.as_ptr(), &mut none), DfdStatus::Domain);

        for h in [img, blurred, back] {
            dfd_image_free(h);
        }
        dfd_depth_free(depth);
        dfd_depth_free(dback);
    }
}

#[test]
fn identical_pair_estimates_near_depth() {
    unsafe {
        let pixels: Vec<f64> = (0..96 * 96)
            .map(|i| {
                let (x, y) = (i % 96, i / 96);
                if (x / 24 + y / 24) % 2 == 0 {
                    0.25
                } else {
                    0.75
                }
            })
            .collect();
        let mut sharp = ptr::null_mut();
        dfd_image_new(96, 96, pixels.as_ptr(), &mut sharp);
        let mut img = ptr::null_mut();
        assert_eq!(dfd_convolve_uniform(sharp, 1.0, &mut img), DfdStatus::Ok);
        let mut calib = std::mem::zeroed::<DfdCalibration>();
        dfd_calibration_fit(1.0, 50.0, 0.5, 10.0, &mut calib);
        let mut grid = std::mem::zeroed::<DfdGrid>();
        dfd_grid_centered(96, 96, 8, 8, 12, 12, &mut grid);
        let mut depth = ptr::null_mut();
        let mut stats = DfdEstimateStats::default();
        assert_eq!(
            dfd_estimate_depth_map(img, img, &grid, &calib, &mut depth, &mut stats),
            DfdStatus::Ok
        );
        assert_eq!(stats.total_cells, 144);
        assert_eq!(stats.negative_discriminant_points, 0);
        let values = std::slice::from_raw_parts(dfd_depth_data(depth), 144);
        for &v in values {
            // covered cells get the near limit, the rest the far limit
            assert!(v == 1.0 || v == 50.0, "{v}");
        }
        assert_eq!(values.iter().filter(|&&v| v == 1.0).count(), stats.covered_cells);
        dfd_depth_free(depth);
        dfd_image_free(img);
        dfd_image_free(sharp);
    }
}
