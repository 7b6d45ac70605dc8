//! Spatial WKB branches on the classically allowed interval and their checks.
//!
//! Away from the two focal points `a'_E < a_E` the orbit is a union of two
//! graphs `xi = xi_±(x)`, with `β0 = d_xi p0` positive on `+` and negative
//! on `-`. Each branch carries the phase
//!
//! ```text
//! S_±(x) = x_E xi_E + ∫_{x_E}^x xi_±(y) dy - h ∫_{x_E}^x p1 / β0 dy
//! ```
//!
//! and the leading amplitude `2^{-1/2} |β0|^{-1/2}`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Stepper;
use crate::oracle::{build_weyl_matrix, WeylGrid, MAX_N};
use crate::orbit::{flow, trace_orbit, Orbit, OrbitOptions, PhaseSpacePoint};
use crate::quadrature::GaussLegendre;
use crate::roots::brent;
use crate::symbols::SymbolModel;

/// Leading flux-normalized amplitude constant.
pub const C0: f64 = FRAC_1_SQRT_2;

const GL_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalPoint {
    pub point: PhaseSpacePoint,
    /// Flow time from the orbit's section point.
    pub t: f64,
    pub dx_p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalPair {
    /// Right focal point (larger `x`).
    pub a_e: FocalPoint,
    /// Left focal point.
    pub a_prime_e: FocalPoint,
    pub energy: f64,
    pub period: f64,
    /// Largest `|xi - xi_E|` on the orbit.
    pub xi_scale: f64,
}

impl FocalPair {
    pub fn separation(&self) -> f64 {
        self.a_e.point.x - self.a_prime_e.point.x
    }
}

/// Focal points of an already traced orbit.
pub fn focal_points_of(model: &SymbolModel, orbit: &Orbit, rk_tol: f64) -> Result<FocalPair> {
    let n = orbit.len();
    let dt = orbit.dt();
    let mut found = Vec::new();
    for k in 0..n {
        let a = orbit.samples[k].velocity[0] > 0.0;
        let b = orbit.samples[(k + 1) % n].velocity[0] > 0.0;
        if a != b {
            found.push(k);
        }
    }
    if found.len() != 2 {
        return Err(Error::FocalPointCount(found.len()));
    }
    let mut focal = Vec::with_capacity(2);
    for k in found {
        let start = orbit.samples[k].point;
        let g = |s: f64| -> Result<f64> {
            let p = flow(model, start, s, rk_tol)?;
            model.eval_derivative(0, 1, p.x, p.xi)
        };
        let (g0, g1) = (g(0.0)?, g(dt)?);
        // a focal point sitting on a sample shows up with a roundoff-level sign
        let s = if g0 == 0.0 || g0.signum() == g1.signum() {
            if g0.abs() <= g1.abs() { 0.0 } else { dt }
        } else {
            brent(g, 0.0, dt, 1e-15 * orbit.period)?
        };
        let point = flow(model, start, s, rk_tol)?;
        let dx_p0 = model.eval_derivative(1, 0, point.x, point.xi)?;
        if dx_p0.abs() < 1e-8 {
            return Err(Error::DegenerateFocal(dx_p0));
        }
        focal.push(FocalPoint { point, t: orbit.samples[k].t + s, dx_p0 });
    }
    let (right, left) = if focal[0].point.x >= focal[1].point.x { (focal[0], focal[1]) } else { (focal[1], focal[0]) };
    let xi_scale = orbit
        .samples
        .iter()
        .map(|s| (s.point.xi - right.point.xi).abs())
        .fold(0.0, f64::max);
    Ok(FocalPair { a_e: right, a_prime_e: left, energy: orbit.energy, period: orbit.period, xi_scale })
}

/// The two points of `γ_E` where `d_xi p0` vanishes.
pub fn focal_points(model: &SymbolModel, e: f64, opts: &OrbitOptions) -> Result<FocalPair> {
    let orbit = trace_orbit(model, e, opts)?;
    focal_points_of(model, &orbit, opts.rk_tol)
}

/// `(∫ xi dx, ∫ p1 dt)` along the flow from `start` for time `duration`.
pub fn arc_integrals(model: &SymbolModel, start: PhaseSpacePoint, duration: f64, rk_tol: f64) -> Result<(f64, f64)> {
    let f = |y: &[f64; 4]| -> Result<[f64; 4]> {
        let v = model.hamilton_field(y[0], y[1])?;
        let p1 = if model.p1_is_zero() { 0.0 } else { model.p1(y[0], y[1])? };
        Ok([v[0], v[1], y[1] * v[0], p1])
    };
    let mut s = Stepper::new(rk_tol, duration.abs().min(1e-2).max(1e-12), 4);
    let y = s.advance(&f, &[start.x, start.xi, 0.0, 0.0], duration)?;
    Ok((y[2], y[3]))
}

fn bracket_outward<F>(mut f: F, from: f64, dir: f64, scale: f64, x: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f0 = f(from)?;
    let mut step = 1e-3 * scale;
    let mut lo = from;
    for _ in 0..200 {
        let hi = from + dir * step;
        if f(hi)?.signum() != f0.signum() {
            return Ok((lo, hi));
        }
        lo = hi;
        step *= 1.6;
    }
    Err(Error::BranchRootFailure(x))
}

/// Solves `p0(x, xi) = E` on the requested branch.
pub fn branch_root(model: &SymbolModel, e: f64, focal: &FocalPair, branch: Branch, x: f64) -> Result<f64> {
    let scale = focal.xi_scale.max(1e-8);
    let xi_e = focal.a_e.point.xi;
    let dxi = |xi: f64| model.eval_derivative(0, 1, x, xi);
    // the momentum minimizing p0(x, .) separates the two branches
    let d0 = dxi(xi_e)?;
    let xi_c = if d0 == 0.0 {
        xi_e
    } else {
        let dir = -d0.signum();
        let (a, b) = bracket_outward(dxi, xi_e, dir, scale, x)?;
        brent(dxi, a, b, 1e-15 * scale).map_err(|_| Error::BranchRootFailure(x))?
    };
    if model.p0(x, xi_c)? >= e {
        return Err(Error::BranchRootFailure(x));
    }
    let g = |xi: f64| Ok(model.p0(x, xi)? - e);
    let (a, b) = bracket_outward(g, xi_c, branch.sign(), scale, x)?;
    brent(g, a, b, 1e-15 * scale.max(xi_c.abs())).map_err(|_| Error::BranchRootFailure(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbBranch {
    pub branch: Branch,
    pub energy: f64,
    pub h: f64,
    pub focal: FocalPair,
    pub x_grid: Vec<f64>,
    pub xi_branch: Vec<f64>,
    pub beta0: Vec<f64>,
    /// `S_±(x_E, x_j; h)`.
    pub phase: Vec<f64>,
    /// `∫_{x_E}^{x_j} p1 / β0 dy`.
    pub p1_integral: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub c0: f64,
    /// Next amplitude constant; `None` where `p1 / d_xi p0` is singular at `a_E`.
    pub c1: Option<f64>,
}

struct BranchPoint {
    xi: f64,
    beta0: f64,
    p1: f64,
}

fn branch_point(model: &SymbolModel, focal: &FocalPair, branch: Branch, x: f64) -> Result<BranchPoint> {
    let xi = branch_root(model, focal.energy, focal, branch, x)?;
    let beta0 = model.eval_derivative(0, 1, x, xi)?;
    let p1 = if model.p1_is_zero() { 0.0 } else { model.p1(x, xi)? };
    Ok(BranchPoint { xi, beta0, p1 })
}

fn c1_constant(model: &SymbolModel, focal: &FocalPair) -> Result<Option<f64>> {
    if model.p1_is_zero() {
        return Ok(Some(0.0));
    }
    let PhaseSpacePoint { x, xi } = focal.a_e.point;
    let b = model.eval_derivative(0, 1, x, xi)?;
    let b_xi = model.eval_derivative(0, 2, x, xi)?;
    let step = 1e-5 * focal.xi_scale.max(1e-8);
    let p1_xi = (model.p1(x, xi + step)? - model.p1(x, xi - step)?) / (2.0 * step);
    let value = -C0 / 2.0 * (p1_xi * b - model.p1(x, xi)? * b_xi) / (b * b);
    Ok(value.is_finite().then_some(value))
}

/// Builds a branch on an explicit ascending grid strictly inside `(x'_E, x_E)`.
pub fn build_branch_on(
    model: &SymbolModel,
    focal: &FocalPair,
    h: f64,
    branch: Branch,
    x_grid: &[f64],
) -> Result<WkbBranch> {
    let x_e = focal.a_e.point.x;
    let x_p = focal.a_prime_e.point.x;
    let closest = x_grid.iter().map(|&x| (x_e - x).min(x - x_p)).fold(f64::INFINITY, f64::min);
    if x_grid.is_empty() || closest <= 0.0 {
        return Err(Error::FocalTooClose(closest / focal.separation()));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameters("WKB grid must be strictly ascending".into()));
    }
    let gl = GaussLegendre::new(GL_POINTS);
    let u_far = focal.separation().sqrt();
    let n = x_grid.len();
    let mut xi_branch = vec![0.0; n];
    let mut beta0 = vec![0.0; n];
    let mut phase = vec![0.0; n];
    let mut p1_integral = vec![0.0; n];
    let mut amplitude = vec![0.0; n];

    // y = x_E - u^2 removes the square-root behavior at the right focal point
    let mut u_prev = 0.0;
    let mut xi_int = 0.0;
    let mut p1_int = 0.0;
    for j in (0..n).rev() {
        let x = x_grid[j];
        let u = (x_e - x).sqrt();
        let dist = (u_far - u).max(1e-12);
        let panels = ((4.0 * (u - u_prev) / dist).ceil() as usize).clamp(2, 4096);
        let width = (u - u_prev) / panels as f64;
        for k in 0..panels {
            let lo = u_prev + width * k as f64;
            let mid = lo + 0.5 * width;
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                let uu = mid + 0.5 * width * t;
                let bp = branch_point(model, focal, branch, x_e - uu * uu)?;
                let jac = 2.0 * uu * 0.5 * width * w;
                xi_int -= bp.xi * jac;
                if bp.p1 != 0.0 {
                    p1_int -= bp.p1 / bp.beta0 * jac;
                }
            }
        }
        u_prev = u;
        let bp = branch_point(model, focal, branch, x)?;
        if bp.beta0 * branch.sign() <= 0.0 {
            return Err(Error::BranchRootFailure(x));
        }
        xi_branch[j] = bp.xi;
        beta0[j] = bp.beta0;
        p1_integral[j] = p1_int;
        phase[j] = x_e * focal.a_e.point.xi + xi_int - h * p1_int;
        amplitude[j] = C0 / bp.beta0.abs().sqrt();
    }
    Ok(WkbBranch {
        branch,
        energy: focal.energy,
        h,
        focal: *focal,
        x_grid: x_grid.to_vec(),
        xi_branch,
        beta0,
        phase,
        p1_integral,
        amplitude,
        c0: C0,
        c1: c1_constant(model, focal)?,
    })
}

/// Builds a branch on `n_nodes` uniform nodes spanning
/// `[x'_E + margin·sep, x_E - margin·sep]`.
pub fn build_branch(
    model: &SymbolModel,
    e: f64,
    h: f64,
    branch: Branch,
    margin: f64,
    n_nodes: usize,
) -> Result<WkbBranch> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(Error::FocalTooClose(margin));
    }
    if n_nodes < 2 {
        return Err(Error::InvalidParameters("a WKB grid needs at least two nodes".into()));
    }
    let focal = focal_points(model, e, &OrbitOptions::default())?;
    let sep = focal.separation();
    let lo = focal.a_prime_e.point.x + margin * sep;
    let hi = focal.a_e.point.x - margin * sep;
    let grid: Vec<f64> = (0..n_nodes).map(|k| lo + (hi - lo) * k as f64 / (n_nodes - 1) as f64).collect();
    build_branch_on(model, &focal, h, branch, &grid)
}

/// Local data of a branch at an arbitrary interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchValue {
    pub xi: f64,
    pub beta0: f64,
    pub p1: f64,
    pub phase: f64,
    pub p1_integral: f64,
    pub amplitude: f64,
}

impl WkbBranch {
    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.is_empty() && x >= self.x_grid[0] && x <= self.x_grid[self.len() - 1]
    }

    /// Evaluates the branch at `x` by integrating from the nearest node.
    pub fn value_at(&self, model: &SymbolModel, x: f64) -> Result<BranchValue> {
        if !self.contains(x) {
            return Err(Error::GridMismatch(x));
        }
        let j = match self.x_grid.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(j) => j,
            Err(j) => {
                if j == 0 || (j < self.len() && self.x_grid[j] - x < x - self.x_grid[j - 1]) {
                    j
                } else {
                    j - 1
                }
            }
        };
        let x0 = self.x_grid[j];
        let gl = GaussLegendre::new(GL_POINTS);
        let mut xi_int = 0.0;
        let mut p1_int = 0.0;
        if x != x0 {
            let half = 0.5 * (x - x0);
            let mid = 0.5 * (x + x0);
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                let bp = branch_point(model, &self.focal, self.branch, mid + half * t)?;
                xi_int += w * half * bp.xi;
                if bp.p1 != 0.0 {
                    p1_int += w * half * bp.p1 / bp.beta0;
                }
            }
        }
        let bp = branch_point(model, &self.focal, self.branch, x)?;
        let p1_integral = self.p1_integral[j] + p1_int;
        Ok(BranchValue {
            xi: bp.xi,
            beta0: bp.beta0,
            p1: bp.p1,
            phase: self.phase[j] + xi_int - self.h * p1_int,
            p1_integral,
            amplitude: C0 / bp.beta0.abs().sqrt(),
        })
    }

    /// `u = amplitude · exp(i phase / h)` and `u'` at `x`; the amplitude
    /// derivative is a fourth-order central difference.
    pub fn wave_at(&self, model: &SymbolModel, x: f64) -> Result<(Complex64, Complex64)> {
        let v = self.value_at(model, x)?;
        let step = 1e-4 * self.focal.separation();
        let amp = |y: f64| -> Result<f64> {
            let xi = branch_root(model, self.energy, &self.focal, self.branch, y)?;
            Ok(C0 / model.eval_derivative(0, 1, y, xi)?.abs().sqrt())
        };
        let d_amp = (8.0 * (amp(x + step)? - amp(x - step)?) - (amp(x + 2.0 * step)? - amp(x - 2.0 * step)?))
            / (12.0 * step);
        let d_phase = v.xi - self.h * v.p1 / v.beta0;
        let e = Complex64::from_polar(1.0, v.phase / self.h);
        let u = e * v.amplitude;
        let du = e * Complex64::new(d_amp, v.amplitude * d_phase / self.h);
        Ok((u, du))
    }

    /// Largest `|p0(x_j, xi_j) - E|` over the nodes.
    pub fn eikonal_error(&self, model: &SymbolModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&x, &xi) in self.x_grid.iter().zip(&self.xi_branch) {
            worst = worst.max((model.p0(x, xi)? - self.energy).abs());
        }
        Ok(worst)
    }

    pub fn phase_is_monotone(&self) -> bool {
        let up = self.phase.windows(2).all(|w| w[1] > w[0]);
        let down = self.phase.windows(2).all(|w| w[1] < w[0]);
        up || down
    }

    /// Largest relative defect `|β0 a0' + (i p1 + β0'/2) a0| / |a0|` of the
    /// first transport equation, with
    /// `a0 = C0 |β0|^{-1/2} exp(-i ∫ p1/β0)`.
    pub fn transport_identity_error(&self, model: &SymbolModel) -> Result<f64> {
        let step = 2.5e-4 * self.focal.separation();
        let a0 = |x: f64| -> Result<Complex64> {
            let v = self.value_at(model, x)?;
            Ok(Complex64::from_polar(v.amplitude, -v.p1_integral))
        };
        let mut worst: f64 = 0.0;
        let lo = self.x_grid[0] + 2.0 * step;
        let hi = self.x_grid[self.len() - 1] - 2.0 * step;
        for &x in self.x_grid.iter().filter(|&&x| x >= lo && x <= hi) {
            let v = self.value_at(model, x)?;
            let a = Complex64::from_polar(v.amplitude, -v.p1_integral);
            let da = (8.0 * (a0(x + step)? - a0(x - step)?) - (a0(x + 2.0 * step)? - a0(x - 2.0 * step)?))
                / (12.0 * step);
            let dx_p0 = model.eval_derivative(1, 0, x, v.xi)?;
            let d_beta = model.eval_derivative(1, 1, x, v.xi)? - model.eval_derivative(0, 2, x, v.xi)? * dx_p0 / v.beta0;
            let defect = v.beta0 * da + (Complex64::new(0.0, v.p1) + 0.5 * d_beta) * a;
            worst = worst.max(defect.norm() / a.norm());
        }
        Ok(worst)
    }
}

/// Flux pairing `-i h (u' v̄ - u v̄')` of two branches at `x`.
pub fn wronskian_flux(model: &SymbolModel, a: &WkbBranch, b: &WkbBranch, x: f64) -> Result<Complex64> {
    if a.energy != b.energy || a.h != b.h || !a.contains(x) || !b.contains(x) {
        return Err(Error::GridMismatch(x));
    }
    let (u, du) = a.wave_at(model, x)?;
    let (v, dv) = b.wave_at(model, x)?;
    Ok(Complex64::new(0.0, -a.h) * (du * v.conj() - u * dv.conj()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WkbCombo {
    Plus,
    Minus,
    /// `e^{iπ/4} u_+ + e^{-iπ/4} u_-`.
    CosCombination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbResidualOptions {
    /// Fraction of the focal separation kept clear at each end.
    pub margin: f64,
    /// Fixed oracle grid; `None` picks `L = 1.5 max|x|` and the smallest
    /// power-of-two `N` meeting the resolution rule.
    pub grid: Option<WeylGrid>,
}

impl Default for WkbResidualOptions {
    fn default() -> Self {
        Self { margin: 0.1, grid: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbResidual {
    pub energy: f64,
    pub h: f64,
    pub combo: WkbCombo,
    /// `sup |(M - E) χu|` on the inner half of the window over `sup |χu|`.
    pub residual: f64,
    pub grid: WeylGrid,
}

/// C∞ step rising from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smoothstep(t: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        f(t) / (f(t) + f(1.0 - t))
    }
}

fn required_n(half_length: f64, max_xi: f64, h: f64) -> f64 {
    8.0 * half_length * max_xi / (std::f64::consts::PI * h)
}

/// Residual of `(M - E)` on a cut-off WKB quasi-mode, with `M` the Weyl matrix.
pub fn wkb_residual(
    model: &SymbolModel,
    e: f64,
    h: f64,
    combo: WkbCombo,
    opts: &WkbResidualOptions,
) -> Result<WkbResidual> {
    let orbit_opts = OrbitOptions::default();
    let orbit = trace_orbit(model, e, &orbit_opts)?;
    let focal = focal_points_of(model, &orbit, orbit_opts.rk_tol)?;
    let max_xi = orbit.max_abs_xi();
    let grid = match opts.grid {
        Some(g) => {
            let required = required_n(g.half_length, max_xi, h);
            if (g.n as f64) < required {
                return Err(Error::GridUnderresolved {
                    coverage: g.momentum_extent(h),
                    required: 4.0 * max_xi,
                });
            }
            g
        }
        None => {
            let half = 1.5 * orbit.max_abs_x();
            let n = (required_n(half, max_xi, h).ceil() as usize).max(128).next_power_of_two();
            if n > MAX_N {
                return Err(Error::GridTooLarge(n));
            }
            WeylGrid::new(half, n)?
        }
    };
    let sep = focal.separation();
    let m = opts.margin * sep;
    if !(opts.margin > 0.0 && opts.margin < 0.25) {
        return Err(Error::FocalTooClose(opts.margin));
    }
    let lo = focal.a_prime_e.point.x + m;
    let hi = focal.a_e.point.x - m;
    let xs = grid.x_nodes();
    let inside: Vec<usize> = (0..xs.len()).filter(|&j| xs[j] > lo && xs[j] < hi).collect();
    let pts: Vec<f64> = inside.iter().map(|&j| xs[j]).collect();

    let weights: [(Branch, Complex64); 2] = match combo {
        WkbCombo::Plus => [(Branch::Plus, Complex64::new(1.0, 0.0)), (Branch::Minus, Complex64::new(0.0, 0.0))],
        WkbCombo::Minus => [(Branch::Plus, Complex64::new(0.0, 0.0)), (Branch::Minus, Complex64::new(1.0, 0.0))],
        WkbCombo::CosCombination => [
            (Branch::Plus, Complex64::from_polar(1.0, FRAC_PI_4)),
            (Branch::Minus, Complex64::from_polar(1.0, -FRAC_PI_4)),
        ],
    };
    let mut u = vec![Complex64::new(0.0, 0.0); grid.n];
    for (branch, w) in weights {
        if w.norm() == 0.0 {
            continue;
        }
        let b = build_branch_on(model, &focal, h, branch, &pts)?;
        for (k, &j) in inside.iter().enumerate() {
            let x = xs[j];
            let chi = smoothstep((x - lo) / m) * smoothstep((hi - x) / m);
            u[j] += w * chi * Complex64::from_polar(b.amplitude[k], b.phase[k] / h);
        }
    }
    let matrix = build_weyl_matrix(model, h, &grid)?;
    let mu = matrix.apply(&u);
    let quarter = 0.25 * (hi - lo);
    let (inner_lo, inner_hi) = (lo + quarter, hi - quarter);
    let sup_u = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sup_r = (0..grid.n)
        .filter(|&j| xs[j] >= inner_lo && xs[j] <= inner_hi)
        .map(|j| (mu[j] - e * u[j]).norm())
        .fold(0.0, f64::max);
    Ok(WkbResidual { energy: e, h, combo, residual: sup_r / sup_u.max(f64::MIN_POSITIVE), grid })
}
