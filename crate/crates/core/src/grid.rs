//! Toroidal CA state, neighborhood kernels and circular convolution.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D field of cell values on a torus, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<f64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("mean", &self.mean())
            .field("max", &self.max())
            .finish()
    }
}

impl Grid {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "grid must be at least 1x1, got {height}x{width}"
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Parameter(format!(
                "cell value {value} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            cells: vec![value; height * width],
        })
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "grid must be at least 1x1, got {height}x{width}"
            )));
        }
        if cells.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} grid needs {} cells, got {}",
                height * width,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!("cell value {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            cells,
        })
    }

    /// Zero grid with a centered `patch x patch` square of uniform `[0, 1)` noise.
    pub fn random_patch<R: Rng + ?Sized>(
        height: usize,
        width: usize,
        patch: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if patch > height || patch > width {
            return Err(Error::Dimension(format!(
                "patch side {patch} exceeds {height}x{width} grid"
            )));
        }
        let mut grid = Self::zeros(height, width)?;
        let (r0, c0) = ((height - patch) / 2, (width - patch) / 2);
        for r in r0..r0 + patch {
            for c in c0..c0 + patch {
                grid.cells[r * width + c] = rng.random::<f64>();
            }
        }
        Ok(grid)
    }

    /// Writes `tile` (row-major, `tile_h x tile_w`) into the center of the grid.
    pub fn place_centered(&mut self, tile: &[f64], tile_h: usize, tile_w: usize) -> Result<()> {
        if tile_h > self.height || tile_w > self.width || tile.len() != tile_h * tile_w {
            return Err(Error::Dimension(format!(
                "cannot place {tile_h}x{tile_w} tile in {}x{} grid",
                self.height, self.width
            )));
        }
        let (r0, c0) = ((self.height - tile_h) / 2, (self.width - tile_w) / 2);
        for r in 0..tile_h {
            let dst = (r0 + r) * self.width + c0;
            self.cells[dst..dst + tile_w].copy_from_slice(&tile[r * tile_w..(r + 1) * tile_w]);
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Mutable access for engine code. Callers are responsible for keeping
    /// values inside `[0, 1]`.
    pub fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            (0.0..=1.0).contains(&value),
            "cell value {value} outside [0, 1]"
        );
        self.cells[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.cells.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Circular shift: the value at `(r, c)` moves to `(r + dr, c + dc)` mod size.
    pub fn shifted(&self, dr: isize, dc: isize) -> Grid {
        let (h, w) = (self.height as isize, self.width as isize);
        let mut out = vec![0.0; self.cells.len()];
        for r in 0..h {
            let nr = (r + dr).rem_euclid(h);
            for c in 0..w {
                let nc = (c + dc).rem_euclid(w);
                out[(nr * w + nc) as usize] = self.cells[(r * w + c) as usize];
            }
        }
        Grid {
            height: self.height,
            width: self.width,
            cells: out,
        }
    }

    /// FNV-1a over the exact bit patterns of the cells.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.cells {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Normalized, nonnegative, compactly supported neighborhood weights of
/// side `2R + 1`, centered on the cell being updated.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    radius: usize,
    weights: Vec<f64>,
    normalization: f64,
}

impl Kernel {
    /// Builds a kernel from raw weights, rescaling them to sum to one.
    ///
    /// Weights must be nonnegative and exactly zero beyond distance `radius`
    /// from the center.
    pub fn from_weights(radius: usize, weights: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(Error::Dimension(format!(
                "kernel of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter(
                "kernel weights must be finite and nonnegative".into(),
            ));
        }
        let r = radius as f64;
        for u in 0..side {
            for v in 0..side {
                let (du, dv) = (u as f64 - r, v as f64 - r);
                if (du * du + dv * dv).sqrt() > r && weights[u * side + v] != 0.0 {
                    return Err(Error::Parameter(format!(
                        "kernel weight at ({u}, {v}) lies outside radius {radius}"
                    )));
                }
            }
        }
        let normalization: f64 = weights.iter().sum();
        if normalization <= 0.0 {
            return Err(Error::DegenerateKernel);
        }
        let weights = weights.into_iter().map(|w| w / normalization).collect();
        Ok(Self {
            radius,
            weights,
            normalization,
        })
    }

    /// Identity kernel: weight one on the center cell.
    pub fn delta() -> Self {
        Self {
            radius: 0,
            weights: vec![1.0],
            normalization: 1.0,
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the weights before normalization.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.side() + v]
    }
}

/// Result of `K * A`; same shape as the grid it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Neighborhood {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Direct,
    Fft,
    /// FFT when both grid sides are at least 64, direct otherwise.
    #[default]
    Auto,
}

impl Backend {
    pub const FFT_MIN_SIDE: usize = 64;

    pub fn resolve(self, height: usize, width: usize) -> Backend {
        match self {
            Backend::Auto if height.min(width) >= Self::FFT_MIN_SIDE => Backend::Fft,
            Backend::Auto => Backend::Direct,
            other => other,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "fft" => Ok(Backend::Fft),
            "auto" => Ok(Backend::Auto),
            other => Err(Error::Usage(format!(
                "unknown backend `{other}` (expected direct, fft or auto)"
            ))),
        }
    }
}

/// Convolution engine bound to one kernel and one grid shape. Owns its
/// scratch buffers, so each simulation holds its own instance.
pub enum Convolver {
    Direct(DirectConvolver),
    Fft(Box<FftConvolver>),
}

impl Convolver {
    pub fn new(kernel: &Kernel, height: usize, width: usize, backend: Backend) -> Result<Self> {
        check_fits(kernel, height, width)?;
        Ok(match backend.resolve(height, width) {
            Backend::Fft => Convolver::Fft(Box::new(FftConvolver::new(kernel, height, width))),
            _ => Convolver::Direct(DirectConvolver::new(kernel, height, width)),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Convolver::Direct(d) => (d.height, d.width),
            Convolver::Fft(f) => (f.height, f.width),
        }
    }

    /// Writes `K * grid` into `out` (row-major, same shape as the grid).
    pub fn convolve_into(&mut self, grid: &Grid, out: &mut [f64]) {
        assert_eq!(
            self.shape(),
            (grid.height, grid.width),
            "grid shape mismatch"
        );
        assert_eq!(out.len(), grid.cells.len());
        match self {
            Convolver::Direct(d) => d.convolve_into(&grid.cells, out),
            Convolver::Fft(f) => f.convolve_into(&grid.cells, out),
        }
    }
}

fn check_fits(kernel: &Kernel, height: usize, width: usize) -> Result<()> {
    if kernel.side() > height.min(width) {
        return Err(Error::Dimension(format!(
            "kernel side {} exceeds {height}x{width} grid",
            kernel.side()
        )));
    }
    Ok(())
}

/// Circular convolution:
/// `n[i, j] = sum_{u,v} K[u, v] * A[(i + u - R) mod H, (j + v - R) mod W]`.
pub fn convolve(grid: &Grid, kernel: &Kernel, backend: Backend) -> Result<Neighborhood> {
    let mut conv = Convolver::new(kernel, grid.height, grid.width, backend)?;
    let mut values = vec![0.0; grid.cells.len()];
    conv.convolve_into(grid, &mut values);
    Ok(Neighborhood {
        height: grid.height,
        width: grid.width,
        values,
    })
}

/// Direct summation over the kernel's nonzero taps.
pub struct DirectConvolver {
    height: usize,
    width: usize,
    // (row offset, col offset, weight), offsets already reduced mod H / W
    taps: Vec<(usize, usize, f64)>,
}

impl DirectConvolver {
    fn new(kernel: &Kernel, height: usize, width: usize) -> Self {
        let side = kernel.side();
        let r = kernel.radius as isize;
        let mut taps = Vec::new();
        for u in 0..side {
            for v in 0..side {
                let w = kernel.weight(u, v);
                if w != 0.0 {
                    let du = (u as isize - r).rem_euclid(height as isize) as usize;
                    let dv = (v as isize - r).rem_euclid(width as isize) as usize;
                    taps.push((du, dv, w));
                }
            }
        }
        Self {
            height,
            width,
            taps,
        }
    }

    fn convolve_into(&self, cells: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        out.fill(0.0);
        for &(du, dv, k) in &self.taps {
            for i in 0..h {
                let src = &cells[((i + du) % h) * w..((i + du) % h + 1) * w];
                let dst = &mut out[i * w..(i + 1) * w];
                // columns j with j + dv < w read src[j + dv], the rest wrap
                let split = w - dv;
                for (d, s) in dst[..split].iter_mut().zip(&src[dv..]) {
                    *d += k * s;
                }
                for (d, s) in dst[split..].iter_mut().zip(&src[..dv]) {
                    *d += k * s;
                }
            }
        }
    }
}

/// Spectral convolution: real FFT along rows, complex FFT along columns,
/// pointwise product with the precomputed kernel spectrum.
pub struct FftConvolver {
    height: usize,
    width: usize,
    spec_cols: usize,
    row_fwd: Arc<dyn RealToComplex<f64>>,
    row_inv: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    // kernel spectrum in transposed layout (spec_cols x height), scaled by 1/(H W)
    kernel_spectrum: Vec<Complex<f64>>,
    row_in: Vec<f64>,
    spec: Vec<Complex<f64>>,
    spec_t: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl FftConvolver {
    fn new(kernel: &Kernel, height: usize, width: usize) -> Self {
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        let row_fwd = real_planner.plan_fft_forward(width);
        let row_inv = real_planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        let spec_cols = width / 2 + 1;
        let scratch_len = [
            row_fwd.get_scratch_len(),
            row_inv.get_scratch_len(),
            col_fwd.get_inplace_scratch_len(),
            col_inv.get_inplace_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);

        let mut conv = Self {
            height,
            width,
            spec_cols,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            kernel_spectrum: Vec::new(),
            row_in: vec![0.0; width],
            spec: vec![Complex::default(); height * spec_cols],
            spec_t: vec![Complex::default(); height * spec_cols],
            scratch: vec![Complex::default(); scratch_len],
        };

        // Flipped embedding turns the correlation into a plain circular convolution.
        let r = kernel.radius as isize;
        let mut embedded = vec![0.0; height * width];
        for u in 0..kernel.side() {
            for v in 0..kernel.side() {
                let row = (r - u as isize).rem_euclid(height as isize) as usize;
                let col = (r - v as isize).rem_euclid(width as isize) as usize;
                embedded[row * width + col] += kernel.weight(u, v);
            }
        }
        conv.forward(&embedded);
        let scale = 1.0 / (height * width) as f64;
        conv.kernel_spectrum = conv.spec_t.iter().map(|c| c * scale).collect();
        conv
    }

    /// Leaves the 2D spectrum of `cells` in `spec_t` (transposed layout).
    fn forward(&mut self, cells: &[f64]) {
        let (h, w, wc) = (self.height, self.width, self.spec_cols);
        for i in 0..h {
            self.row_in.copy_from_slice(&cells[i * w..(i + 1) * w]);
            self.row_fwd
                .process_with_scratch(
                    &mut self.row_in,
                    &mut self.spec[i * wc..(i + 1) * wc],
                    &mut self.scratch,
                )
                .expect("row FFT buffer sizes are fixed at construction");
        }
        transpose(&self.spec, &mut self.spec_t, h, wc);
        self.col_fwd
            .process_with_scratch(&mut self.spec_t, &mut self.scratch);
    }

    fn convolve_into(&mut self, cells: &[f64], out: &mut [f64]) {
        let (h, w, wc) = (self.height, self.width, self.spec_cols);
        self.forward(cells);
        for (s, k) in self.spec_t.iter_mut().zip(&self.kernel_spectrum) {
            *s *= k;
        }
        self.col_inv
            .process_with_scratch(&mut self.spec_t, &mut self.scratch);
        transpose(&self.spec_t, &mut self.spec, wc, h);
        for i in 0..h {
            let row = &mut self.spec[i * wc..(i + 1) * wc];
            // DC (and Nyquist for even widths) are real up to rounding
            row[0].im = 0.0;
            if w % 2 == 0 {
                row[wc - 1].im = 0.0;
            }
            self.row_inv
                .process_with_scratch(row, &mut out[i * w..(i + 1) * w], &mut self.scratch)
                .expect("row IFFT buffer sizes are fixed at construction");
        }
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
