//! Ground-truth spectra from a direct discretization of the Weyl quantization.
//!
//! On the periodic grid `x_j = -L + 2Lj/N` with dual momenta
//! `η_m = (πh/L)(m - N/2)` the Weyl kernel becomes
//!
//! ```text
//! M_jk = (1/N) Σ_m p((x_j + x_k)/2, η_m; h) exp(i (x_j - x_k) η_m / h)
//! ```
//!
//! The midpoint depends only on `j + k` and the phase only on `j - k`, so for
//! each of the `2N - 1` midpoints the sum over `m` is one inverse FFT.
//!
//! A second, independent route for Schrödinger-form symbols is the
//! three-point finite-difference matrix with Dirichlet walls, whose
//! eigenvalues are found by Sturm-sequence bisection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{trace_orbit, OrbitOptions};
use crate::symbols::{Interval, SymbolModel};

pub const DEFAULT_N: usize = 512;
pub const MAX_N: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylGrid {
    /// Half box length `L`.
    pub half_length: f64,
    /// Number of grid points, an even power of two.
    pub n: usize,
}

impl WeylGrid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidParameters(format!("box half length {half_length} must be positive")));
        }
        Ok(Self { half_length, n })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| -self.half_length + self.dx() * j as f64).collect()
    }

    pub fn eta_nodes(&self, h: f64) -> Vec<f64> {
        let n = self.n as f64;
        let scale = PI * h / self.half_length;
        (0..self.n).map(|m| scale * (m as f64 - n / 2.0)).collect()
    }

    /// Largest momentum represented on the grid, `πhN / 2L`.
    pub fn momentum_extent(&self, h: f64) -> f64 {
        PI * h * self.n as f64 / (2.0 * self.half_length)
    }

    pub fn doubled(&self) -> Self {
        Self { half_length: self.half_length, n: 2 * self.n }
    }
}

/// Dense Hermitian matrix of the discretized Weyl operator.
#[derive(Debug, Clone)]
pub struct WeylMatrix {
    pub h: f64,
    pub grid: WeylGrid,
    pub data: DMatrix<Complex64>,
    /// Frobenius norm of the discarded anti-Hermitian part.
    pub discard_norm: f64,
    pub norm: f64,
}

impl WeylMatrix {
    pub fn dim(&self) -> usize {
        self.grid.n
    }

    pub fn is_real(&self) -> bool {
        let scale = self.norm.max(1.0) * 1e-14;
        self.data.iter().all(|z| z.im.abs() <= scale)
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(u.len(), n, "vector length must match the grid");
        (0..n)
            .map(|j| (0..n).map(|k| self.data[(j, k)] * u[k]).sum())
            .collect()
    }
}

/// Momentum-coverage requirement `πhN/2L >= 1.5 max|xi|` for a given `max|xi|`.
pub fn check_coverage(grid: &WeylGrid, h: f64, max_xi: f64) -> Result<()> {
    let coverage = grid.momentum_extent(h);
    let required = 1.5 * max_xi;
    if coverage < required {
        return Err(Error::GridUnderresolved { coverage, required });
    }
    Ok(())
}

pub fn build_weyl_matrix(model: &SymbolModel, h: f64, grid: &WeylGrid) -> Result<WeylMatrix> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameters(format!("h = {h} must be positive")));
    }
    if grid.n > 2 * MAX_N {
        return Err(Error::GridTooLarge(grid.n));
    }
    let n = grid.n;
    let l = grid.half_length;
    let etas = grid.eta_nodes(h);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);

    // kernel[s][d] = Σ_m p(mid_s, η_m) exp(2πi d (m - N/2) / N)
    let mut kernel: Vec<Vec<Complex64>> = Vec::with_capacity(2 * n - 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..(2 * n - 1) {
        let mid = -l + l * s as f64 / n as f64;
        for (m, &eta) in etas.iter().enumerate() {
            buf[m] = Complex64::new(model.full_symbol(h, mid, eta)?, 0.0);
        }
        ifft.process(&mut buf);
        let row: Vec<Complex64> = buf
            .iter()
            .enumerate()
            .map(|(d, z)| if d % 2 == 0 { *z } else { -*z })
            .collect();
        kernel.push(row);
    }

    let inv_n = 1.0 / n as f64;
    let raw = DMatrix::from_fn(n, n, |j, k| {
        let d = (j + n - k) % n;
        kernel[j + k][d] * inv_n
    });
    let adjoint = raw.adjoint();
    let data = (&raw + &adjoint) * Complex64::new(0.5, 0.0);
    let discard_norm = ((&raw - &adjoint) * Complex64::new(0.5, 0.0)).norm();
    let norm = data.norm();
    if discard_norm > 1e-8 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::HermitizationTooLarge { discard: discard_norm, norm });
    }
    Ok(WeylMatrix { h, grid: *grid, data, discard_norm, norm })
}

/// Eigenvalues of a Hermitian matrix inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWindow {
    pub h: f64,
    pub window: Interval,
    /// Ascending eigenvalues inside the window.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues below the window, i.e. the global index of `eigenvalues[0]`.
    pub first_index: usize,
    pub grid: WeylGrid,
    /// Largest change of an in-window eigenvalue when `N` is doubled.
    pub convergence_gap: Option<f64>,
}

impl SpectrumWindow {
    /// `(global index, eigenvalue)` pairs.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.eigenvalues.iter().enumerate().map(|(k, &e)| (self.first_index + k, e))
    }
}

fn window_slice(all: &[f64], window: Interval) -> (usize, Vec<f64>) {
    let first = all.iter().take_while(|&&e| e < window.min).count();
    let inside = all[first..].iter().copied().take_while(|&e| e <= window.max).collect();
    (first, inside)
}

/// All eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(matrix: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let scale = matrix.norm().max(1.0) * 1e-14;
    let mut values: Vec<f64> = if matrix.iter().all(|z| z.im.abs() <= scale) {
        let real = matrix.map(|z| z.re);
        real.symmetric_eigenvalues().iter().copied().collect()
    } else {
        matrix.symmetric_eigenvalues().iter().copied().collect()
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolverFailure);
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn spectrum(matrix: &WeylMatrix, window: Interval) -> Result<SpectrumWindow> {
    let all = hermitian_eigenvalues(&matrix.data)?;
    let (first_index, eigenvalues) = window_slice(&all, window);
    Ok(SpectrumWindow { h: matrix.h, window, eigenvalues, first_index, grid: matrix.grid, convergence_gap: None })
}

/// Grid selection for [`weyl_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Fixed half box length; `None` selects it from the orbit and decay.
    pub half_length: Option<f64>,
    /// Starting grid size; escalated by doubling to meet momentum coverage.
    pub n: usize,
    pub max_n: usize,
    /// Target decay exponent `∫ κ dx / h` between turning point and wall.
    pub decay_exponent: f64,
    pub check_convergence: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { half_length: None, n: DEFAULT_N, max_n: MAX_N, decay_exponent: 18.0, check_convergence: false }
    }
}

/// Box half length for the spectrum up to `e_top`: at least 1.5 times the
/// orbit's extent, and far enough that `∫ κ dx / h` past each turning point
/// reaches the decay exponent, with `κ² = 2 (p0 - E) / d_xi² p0` along `xi = xi0`.
pub fn auto_half_length(model: &SymbolModel, h: f64, e_top: f64, decay_exponent: f64) -> Result<f64> {
    let orbit = trace_orbit(model, e_top, &OrbitOptions { n_samples: 256, ..OrbitOptions::default() })?;
    let (x_lo, x_hi) = orbit.x_range();
    let mut half = 1.5 * x_lo.abs().max(x_hi.abs());
    let xi0 = model.well_seed().xi;
    let span = x_hi - x_lo;
    for (start, dir) in [(x_hi, 1.0), (x_lo, -1.0)] {
        let step = 1e-3 * span;
        let mut x = start;
        let mut acc = 0.0;
        let mut guard = 0;
        while acc < decay_exponent * h {
            let mid = x + 0.5 * step * dir;
            let excess = (model.p0(mid, xi0)? - e_top).max(0.0);
            let curvature = model.eval_derivative(0, 2, mid, xi0)?.abs().max(1e-300);
            acc += (2.0 * excess / curvature).sqrt() * step;
            x += step * dir;
            guard += 1;
            if guard > 10_000_000 {
                return Err(Error::NoCrossing(e_top));
            }
        }
        half = half.max(x.abs());
    }
    Ok(half)
}

/// Picks `(L, N)` for the spectrum in `window`, escalating `N` until the
/// momentum grid covers the orbit at `window.max`.
pub fn select_grid(model: &SymbolModel, h: f64, window: Interval, opts: &GridOptions) -> Result<WeylGrid> {
    let half = match opts.half_length {
        Some(l) => l,
        None => auto_half_length(model, h, window.max, opts.decay_exponent)?,
    };
    let max_xi = trace_orbit(model, window.max, &OrbitOptions { n_samples: 256, ..OrbitOptions::default() })?
        .max_abs_xi();
    let mut grid = WeylGrid::new(half, opts.n)?;
    while check_coverage(&grid, h, max_xi).is_err() {
        grid = grid.doubled();
        if grid.n > opts.max_n {
            return Err(Error::GridTooLarge(grid.n));
        }
    }
    Ok(grid)
}

/// Oracle eigenvalues in `window` at semiclassical parameter `h`.
pub fn weyl_spectrum(model: &SymbolModel, h: f64, window: Interval, opts: &GridOptions) -> Result<SpectrumWindow> {
    let grid = select_grid(model, h, window, opts)?;
    weyl_spectrum_on(model, h, window, &grid, opts.check_convergence)
}

pub fn weyl_spectrum_on(
    model: &SymbolModel,
    h: f64,
    window: Interval,
    grid: &WeylGrid,
    check_convergence: bool,
) -> Result<SpectrumWindow> {
    let mut spec = spectrum(&build_weyl_matrix(model, h, grid)?, window)?;
    if check_convergence {
        let fine = spectrum(&build_weyl_matrix(model, h, &grid.doubled())?, window)?;
        spec.convergence_gap = Some(index_aligned_gap(&spec, &fine));
    }
    Ok(spec)
}

/// Largest difference between eigenvalues with the same global index; an
/// index present in only one spectrum counts as an infinite gap.
pub fn index_aligned_gap(a: &SpectrumWindow, b: &SpectrumWindow) -> f64 {
    if a.first_index != b.first_index || a.eigenvalues.len() != b.eigenvalues.len() {
        return f64::INFINITY;
    }
    a.eigenvalues.iter().zip(&b.eigenvalues).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm count).
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - lambda - if i == 0 { 0.0 } else { coupling / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + lambda.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `(first index, ascending eigenvalues)` inside the window.
    pub fn eigenvalues_in(&self, window: Interval) -> (usize, Vec<f64>) {
        let first = self.count_below(window.min);
        let end = self.count_below(window.max.next_up());
        (first, (first..end).map(|k| self.eigenvalue(k)).collect())
    }
}

/// `-kinetic h² (u_{j+1} - 2u_j + u_{j-1}) / Δx² + V(x_j) u_j` on the interior
/// nodes of `grid`, with Dirichlet walls at `±L`.
pub fn schrodinger_fd_matrix<V: Fn(f64) -> f64>(potential: V, kinetic: f64, h: f64, grid: &WeylGrid) -> SymTridiagonal {
    let dx = grid.dx();
    let c = kinetic * h * h / (dx * dx);
    let x = grid.x_nodes();
    let diag: Vec<f64> = x[1..].iter().map(|&xj| 2.0 * c + potential(xj)).collect();
    let off = vec![-c; diag.len().saturating_sub(1)];
    SymTridiagonal { diag, off }
}

/// Finite-difference spectrum with one Richardson step on `N` and `2N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSpectrum {
    pub first_index: usize,
    pub eigenvalues: Vec<f64>,
    /// Per-eigenvalue truncation estimate `|E_2N - E_N| / 3`.
    pub truncation: Vec<f64>,
}

pub fn fd_spectrum(model: &SymbolModel, h: f64, window: Interval, grid: &WeylGrid) -> Result<FdSpectrum> {
    let (kinetic, potential) = model
        .schrodinger_potential(h)
        .ok_or_else(|| Error::InvalidParameters(format!("`{}` is not of Schrödinger form", model.name())))?;
    let coarse = schrodinger_fd_matrix(&potential, kinetic, h, grid);
    let fine = schrodinger_fd_matrix(&potential, kinetic, h, &grid.doubled());
    let (first, coarse_vals) = coarse.eigenvalues_in(window);
    let mut eigenvalues = Vec::with_capacity(coarse_vals.len());
    let mut truncation = Vec::with_capacity(coarse_vals.len());
    for (k, ec) in coarse_vals.iter().enumerate() {
        let idx = first + k;
        let ef = fine.eigenvalue(idx);
        eigenvalues.push((4.0 * ef - ec) / 3.0);
        truncation.push((ef - ec).abs() / 3.0);
    }
    Ok(FdSpectrum { first_index: first, eigenvalues, truncation })
}
