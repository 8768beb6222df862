//! C ABI over the ccevo simulation core.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CcevoStatus`]; on failure [`ccevo_last_error`] describes the cause.
//! Handles are not thread-safe; the last error is per thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ccevo::{Backend, Error, Grid, RuleParams, Stepper};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcevoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Dimension = 4,
    Io = 5,
    Panic = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcevoBackend {
    Auto = 0,
    Fft = 1,
    Direct = 2,
}

/// A validated CA rule.
pub struct CcevoRule(RuleParams);

/// A row-major grid of cells in `[0, 1]`.
pub struct CcevoGrid(Grid);

/// A rule bound to one grid shape.
pub struct CcevoSimulator(Stepper);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> CcevoStatus {
    match err {
        Error::Dimension(_) | Error::DegenerateKernel => CcevoStatus::Dimension,
        Error::PresetNotFound { .. } => CcevoStatus::NotFound,
        Error::Io { .. } => CcevoStatus::Io,
        Error::Usage(_) | Error::Parameter(_) | Error::Config(_) | Error::Json(_) => {
            CcevoStatus::InvalidArgument
        }
        _ => CcevoStatus::Internal,
    }
}

fn fail(status: CcevoStatus, msg: impl Into<String>) -> CcevoStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f` with panics contained and errors mapped to a status.
fn guard(f: impl FnOnce() -> Result<(), CcevoStatus>) -> CcevoStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcevoStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(CcevoStatus::Panic, "internal panic"),
    }
}

fn check(result: ccevo::Result<()>) -> Result<(), CcevoStatus> {
    result.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn lift<T>(result: ccevo::Result<T>) -> Result<T, CcevoStatus> {
    result.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CcevoStatus> {
    if p.is_null() {
        return Err(fail(CcevoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CcevoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, CcevoStatus> {
    p.as_mut()
        .ok_or_else(|| fail(CcevoStatus::NullPointer, "output pointer is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, CcevoStatus> {
    p.as_ref()
        .ok_or_else(|| fail(CcevoStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, CcevoStatus> {
    p.as_mut()
        .ok_or_else(|| fail(CcevoStatus::NullPointer, format!("{what} is null")))
}

fn boxed<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ccevo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of shipped presets.
#[no_mangle]
pub extern "C" fn ccevo_preset_count() -> usize {
    ccevo::preset_names().len()
}

/// Name of preset `index` as a static NUL-terminated string, or NULL when out of range.
#[no_mangle]
pub extern "C" fn ccevo_preset_name(index: usize) -> *const c_char {
    const NAMES: [&str; 10] = [
        "Orbium\0",
        "P_s_labens\0",
        "S_valvatus\0",
        "D_valvatus\0",
        "H_natans\0",
        "s7\0",
        "s613\0",
        "s11\0",
        "s643\0",
        "s113\0",
    ];
    NAMES.get(index).map_or(ptr::null(), |n| n.as_ptr().cast())
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_rule_from_preset(
    name: *const c_char,
    out: *mut *mut CcevoRule,
) -> CcevoStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rule = lift(ccevo::load_preset(str_arg(name, "name")?))?;
        boxed(out, CcevoRule(rule));
        Ok(())
    })
}

/// Parses a rule from its JSON file format.
#[no_mangle]
pub unsafe extern "C" fn ccevo_rule_from_json(
    json: *const c_char,
    out: *mut *mut CcevoRule,
) -> CcevoStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rule = lift(RuleParams::from_json(str_arg(json, "json")?))?;
        boxed(out, CcevoRule(rule));
        Ok(())
    })
}

/// Time step of the rule.
#[no_mangle]
pub unsafe extern "C" fn ccevo_rule_dt(rule: *const CcevoRule, out: *mut f64) -> CcevoStatus {
    guard(|| {
        let rule = handle(rule, "rule")?;
        *handle_mut(out, "output pointer")? = rule.0.dt;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_rule_free(rule: *mut CcevoRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// All-zero grid.
#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_new(
    height: usize,
    width: usize,
    out: *mut *mut CcevoGrid,
) -> CcevoStatus {
    guard(|| {
        let out = out_arg(out)?;
        boxed(out, CcevoGrid(lift(Grid::zeros(height, width))?));
        Ok(())
    })
}

/// Grid copied from `height * width` row-major values in `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_from_cells(
    height: usize,
    width: usize,
    cells: *const f64,
    out: *mut *mut CcevoGrid,
) -> CcevoStatus {
    guard(|| {
        let out = out_arg(out)?;
        if cells.is_null() {
            return Err(fail(CcevoStatus::NullPointer, "cells is null"));
        }
        let len = height
            .checked_mul(width)
            .ok_or_else(|| fail(CcevoStatus::Dimension, "grid size overflows"))?;
        let values = std::slice::from_raw_parts(cells, len).to_vec();
        boxed(
            out,
            CcevoGrid(lift(Grid::from_cells(height, width, values))?),
        );
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_height(grid: *const CcevoGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.height())
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_width(grid: *const CcevoGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_get(
    grid: *const CcevoGrid,
    row: usize,
    col: usize,
    out: *mut f64,
) -> CcevoStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        if row >= g.height() || col >= g.width() {
            return Err(fail(
                CcevoStatus::InvalidArgument,
                format!("cell ({row}, {col}) is out of range"),
            ));
        }
        *handle_mut(out, "output pointer")? = g.get(row, col);
        Ok(())
    })
}

/// Sets one cell; the value must lie in `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_set(
    grid: *mut CcevoGrid,
    row: usize,
    col: usize,
    value: f64,
) -> CcevoStatus {
    guard(|| {
        let g = &mut handle_mut(grid, "grid")?.0;
        if row >= g.height() || col >= g.width() {
            return Err(fail(
                CcevoStatus::InvalidArgument,
                format!("cell ({row}, {col}) is out of range"),
            ));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(fail(
                CcevoStatus::InvalidArgument,
                format!("cell value {value} is outside [0, 1]"),
            ));
        }
        g.set(row, col, value);
        Ok(())
    })
}

/// Copies the cells row-major into `out`, which must hold `height * width` values.
#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_copy_cells(
    grid: *const CcevoGrid,
    out: *mut f64,
    len: usize,
) -> CcevoStatus {
    guard(|| {
        let cells = handle(grid, "grid")?.0.cells();
        if out.is_null() {
            return Err(fail(CcevoStatus::NullPointer, "output buffer is null"));
        }
        if len != cells.len() {
            return Err(fail(
                CcevoStatus::Dimension,
                format!("buffer holds {len} values, grid has {}", cells.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(cells);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_grid_free(grid: *mut CcevoGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Prepares `rule` for grids of the given shape. `backend` is a
/// `CcevoBackend` value. The rule handle may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccevo_simulator_new(
    rule: *const CcevoRule,
    height: usize,
    width: usize,
    backend: i32,
    out: *mut *mut CcevoSimulator,
) -> CcevoStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rule = handle(rule, "rule")?;
        let backend = match backend {
            b if b == CcevoBackend::Auto as i32 => Backend::Auto,
            b if b == CcevoBackend::Fft as i32 => Backend::Fft,
            b if b == CcevoBackend::Direct as i32 => Backend::Direct,
            other => {
                return Err(fail(
                    CcevoStatus::InvalidArgument,
                    format!("unknown backend {other}"),
                ))
            }
        };
        boxed(
            out,
            CcevoSimulator(lift(Stepper::new(&rule.0, height, width, backend))?),
        );
        Ok(())
    })
}

/// Advances `grid` in place by `steps` updates.
#[no_mangle]
pub unsafe extern "C" fn ccevo_simulator_step(
    sim: *mut CcevoSimulator,
    grid: *mut CcevoGrid,
    steps: usize,
) -> CcevoStatus {
    guard(|| {
        let sim = &mut handle_mut(sim, "simulator")?.0;
        let grid = &mut handle_mut(grid, "grid")?.0;
        let (h, w) = sim.shape();
        if (grid.height(), grid.width()) != (h, w) {
            check(Err(Error::Dimension(format!(
                "simulator expects {h}x{w}, grid is {}x{}",
                grid.height(),
                grid.width()
            ))))?;
        }
        for _ in 0..steps {
            sim.step_in_place(grid);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ccevo_simulator_free(sim: *mut CcevoSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
