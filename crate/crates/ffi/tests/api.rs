use std::ffi::{CStr, CString};
use std::ptr;

use ccevo::engine::run_with_backend;
use ccevo::{load_preset, preset_names, Backend, Grid};
use ccevo_ffi::*;

fn last_error() -> String {
    let p = ccevo_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn preset(name: &str) -> *mut CcevoRule {
    let name = CString::new(name).unwrap();
    let mut rule = ptr::null_mut();
    assert_eq!(
        unsafe { ccevo_rule_from_preset(name.as_ptr(), &mut rule) },
        CcevoStatus::Ok
    );
    rule
}

#[test]
fn preset_table_matches_core() {
    let names: Vec<String> = (0..ccevo_preset_count())
        .map(|i| {
            unsafe { CStr::from_ptr(ccevo_preset_name(i)) }
                .to_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(names, preset_names());
    assert!(ccevo_preset_name(names.len()).is_null());
    let v = unsafe { CStr::from_ptr(ccevo_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn stepping_through_handles_matches_core() {
    let side = 64;
    let mut rng = ccevo::seed::stream(5, "ffi", &[]);
    let start = Grid::random_patch(side, side, 24, &mut rng).unwrap();
    let expected = run_with_backend(&start, &load_preset("Orbium").unwrap(), 10, Backend::Fft)
        .unwrap()
        .grid;

    unsafe {
        let rule = preset("Orbium");
        let mut dt = 0.0;
        assert_eq!(ccevo_rule_dt(rule, &mut dt), CcevoStatus::Ok);
        assert_eq!(dt, 0.1);
        let mut grid = ptr::null_mut();
        assert_eq!(
            ccevo_grid_from_cells(side, side, start.cells().as_ptr(), &mut grid),
            CcevoStatus::Ok
        );
        let mut sim = ptr::null_mut();
        assert_eq!(
            ccevo_simulator_new(rule, side, side, CcevoBackend::Fft as i32, &mut sim),
            CcevoStatus::Ok
        );
        ccevo_rule_free(rule);
        assert_eq!(ccevo_simulator_step(sim, grid, 10), CcevoStatus::Ok);
        assert!(ccevo_last_error().is_null());

        let mut out = vec![0.0; side * side];
        assert_eq!(
            ccevo_grid_copy_cells(grid, out.as_mut_ptr(), out.len()),
            CcevoStatus::Ok
        );
        assert_eq!(out, expected.cells());
        let mut v = -1.0;
        assert_eq!(ccevo_grid_get(grid, 3, 4, &mut v), CcevoStatus::Ok);
        assert_eq!(v, expected.get(3, 4));
        assert_eq!(
            (ccevo_grid_height(grid), ccevo_grid_width(grid)),
            (side, side)
        );
        ccevo_simulator_free(sim);
        ccevo_grid_free(grid);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut rule = ptr::null_mut();
        let bad = CString::new("Nope").unwrap();
        assert_eq!(
            ccevo_rule_from_preset(bad.as_ptr(), &mut rule),
            CcevoStatus::NotFound
        );
        assert!(last_error().contains("Orbium"));
        assert!(rule.is_null());

        assert_eq!(
            ccevo_rule_from_preset(ptr::null(), &mut rule),
            CcevoStatus::NullPointer
        );
        let json = CString::new(r#"{"name": "x"}"#).unwrap();
        assert_eq!(
            ccevo_rule_from_json(json.as_ptr(), &mut rule),
            CcevoStatus::InvalidArgument
        );

        let orbium = preset("Orbium");
        let mut sim = ptr::null_mut();
        assert_eq!(
            ccevo_simulator_new(orbium, 16, 16, 0, &mut sim),
            CcevoStatus::Dimension
        );
        assert!(last_error().contains("kernel"), "{}", last_error());
        assert_eq!(
            ccevo_simulator_new(orbium, 32, 32, 9, &mut sim),
            CcevoStatus::InvalidArgument
        );
        assert_eq!(
            ccevo_simulator_new(orbium, 32, 32, 2, &mut sim),
            CcevoStatus::Ok
        );

        let mut grid = ptr::null_mut();
        assert_eq!(ccevo_grid_new(40, 32, &mut grid), CcevoStatus::Ok);
        assert_eq!(ccevo_simulator_step(sim, grid, 1), CcevoStatus::Dimension);
        assert_eq!(
            ccevo_grid_set(grid, 0, 0, 1.5),
            CcevoStatus::InvalidArgument
        );
        assert_eq!(
            ccevo_grid_set(grid, 40, 0, 0.5),
            CcevoStatus::InvalidArgument
        );
        let mut small = [0.0; 3];
        assert_eq!(
            ccevo_grid_copy_cells(grid, small.as_mut_ptr(), 3),
            CcevoStatus::Dimension
        );
        assert_eq!(ccevo_grid_set(grid, 1, 1, 0.5), CcevoStatus::Ok);
        assert!(ccevo_last_error().is_null(), "success clears the message");

        let cells = [0.5, 2.0];
        assert_eq!(
            ccevo_grid_from_cells(1, 2, cells.as_ptr(), &mut grid),
            CcevoStatus::InvalidArgument
        );
        assert_eq!(
            ccevo_grid_new(0, 4, ptr::null_mut()),
            CcevoStatus::NullPointer
        );

        ccevo_grid_free(grid);
        ccevo_rule_free(orbium);
        ccevo_simulator_free(sim);
        ccevo_rule_free(ptr::null_mut());
        ccevo_grid_free(ptr::null_mut());
        ccevo_simulator_free(ptr::null_mut());
    }
}
