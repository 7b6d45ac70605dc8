//! Bohr-Sommerfeld roots, the Gram determinant condition, and comparison
//! with oracle spectra.
//!
//! Order 0 solves `S0(E) = 2π(n + 1/2)h`; orders 1 and 2 solve
//! `S_h(E) = 2πnh` with `S_h` truncated at that order (the `-π` of `S1`
//! carries the half-integer shift).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::actions::{action_coefficients, first_order_actions, resolve_de_step, ActionOptions};
use crate::error::{Error, Result};
use crate::oracle::SpectrumWindow;
use crate::orbit::{trace_orbit, OrbitOptions};
use crate::roots::brent_with_values;
use crate::symbols::{Interval, SymbolModel};
use crate::wkb::{arc_integrals, focal_points_of};

pub const DEFAULT_GRID_POINTS: usize = 512;
const MAX_REFINE_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSolution {
    pub n: i64,
    pub h: f64,
    pub order: usize,
    pub energy: f64,
    /// `|S_h(E) - 2πnh|` at the returned root.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsOptions {
    pub grid_points: usize,
    pub actions: ActionOptions,
}

impl Default for BsOptions {
    fn default() -> Self {
        Self { grid_points: DEFAULT_GRID_POINTS, actions: ActionOptions::default() }
    }
}

/// `S_h(E)` at the given order, shifted so that every order is solved
/// against `2πnh`.
pub fn quantized_action(model: &SymbolModel, e: f64, h: f64, order: usize, opts: &ActionOptions) -> Result<f64> {
    match order {
        0 => Ok(trace_orbit(model, e, &opts.orbit)?.area_action() - PI * h),
        1 => {
            let (s0, s1, _) = first_order_actions(model, e, &opts.orbit)?;
            Ok(s0 + h * s1)
        }
        2 => Ok(action_coefficients(model, e, opts)?.series(h, 2)),
        _ => Err(Error::InvalidParameters(format!("quantization order {order} is not one of 0, 1, 2"))),
    }
}

fn check_window(model: &SymbolModel, window: Interval, order: usize, opts: &ActionOptions) -> Result<()> {
    let w = model.energy_window();
    if !(window.min < window.max) || !w.contains_interval(&window) {
        return Err(Error::EnergyOutsideWindow { energy: window.min, min: w.min, max: w.max });
    }
    if order == 2 {
        resolve_de_step(model, window.min, opts)?;
        resolve_de_step(model, window.max, opts)?;
    }
    Ok(())
}

/// Samples `f` on a uniform grid over `window`, bisecting any cell over which
/// the value moves by more than `quantum`.
fn sample_adaptive<F>(mut f: F, window: Interval, points: usize, quantum: f64) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let points = points.max(2);
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        let e = window.min + window.width() * k as f64 / (points - 1) as f64;
        out.push((e, f(e)?));
    }
    for _ in 0..MAX_REFINE_DEPTH {
        let mut refined = Vec::with_capacity(out.len());
        let mut changed = false;
        for k in 0..out.len() {
            refined.push(out[k]);
            if k + 1 < out.len() && (out[k + 1].1 - out[k].1).abs() > quantum {
                let e = 0.5 * (out[k].0 + out[k + 1].0);
                refined.push((e, f(e)?));
                changed = true;
            }
        }
        out = refined;
        if !changed {
            break;
        }
    }
    Ok(out)
}

/// Bohr-Sommerfeld roots in `window`, ascending. `n_range` restricts the
/// quantum numbers (inclusive); `None` takes every `n` whose quantum lies in
/// the range of `S_h` over the window.
pub fn solve_bs(
    model: &SymbolModel,
    h: f64,
    window: Interval,
    order: usize,
    n_range: Option<(i64, i64)>,
    opts: &BsOptions,
) -> Result<Vec<BsSolution>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameters(format!("h = {h} must be positive")));
    }
    if order > 2 {
        return Err(Error::InvalidParameters(format!("quantization order {order} is not one of 0, 1, 2")));
    }
    check_window(model, window, order, &opts.actions)?;
    let quantum = 2.0 * PI * h;
    let s = |e: f64| quantized_action(model, e, h, order, &opts.actions);
    let table = sample_adaptive(s, window, opts.grid_points, quantum)?;
    for w in table.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(Error::NonMonotoneAction(w[1].0));
        }
    }
    let (s_lo, s_hi) = (table[0].1, table[table.len() - 1].1);
    let mut n_lo = (s_lo / quantum).ceil() as i64;
    let mut n_hi = (s_hi / quantum).floor() as i64;
    if let Some((a, b)) = n_range {
        n_lo = n_lo.max(a);
        n_hi = n_hi.min(b);
    }
    let xtol = 1e-12 * window.width();
    let mut out = Vec::new();
    for n in n_lo..=n_hi {
        let target = quantum * n as f64;
        let k = table.partition_point(|&(_, v)| v < target);
        let energy = if k < table.len() && table[k].1 == target {
            table[k].0
        } else if k == 0 || k == table.len() {
            continue;
        } else {
            let (a, fa) = (table[k - 1].0, table[k - 1].1 - target);
            let (b, fb) = (table[k].0, table[k].1 - target);
            brent_with_values(|e| Ok(s(e)? - target), a, fa, b, fb, xtol)?
        };
        let residual = (s(energy)? - target).abs();
        out.push(BsSolution { n, h, order, energy, residual });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramEvaluation {
    pub energy: f64,
    pub h: f64,
    /// Phase from `a_E` to `a'_E` along the `+` branch, through order `h`.
    pub a_plus: f64,
    /// Phase from `a_E` to `a'_E` along the `-` branch, through order `h`.
    pub a_minus: f64,
    /// `(A_- - A_+) / 2h`.
    pub theta: f64,
    /// `-cos²(theta)`.
    pub det: f64,
}

/// Order-1 Gram determinant at energy `E`.
///
/// The arc from `a_E` along the flow is the `-` branch; the return arc is
/// the `+` branch, traversed against the flow from `a_E`.
pub fn gram_eval(model: &SymbolModel, e: f64, h: f64, opts: &OrbitOptions) -> Result<GramEvaluation> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameters(format!("h = {h} must be positive")));
    }
    let orbit = trace_orbit(model, e, opts)?;
    let focal = focal_points_of(model, &orbit, opts.rk_tol)?;
    let t = orbit.period;
    let out = (focal.a_prime_e.t - focal.a_e.t).rem_euclid(t);
    let (j_minus, p_minus) = arc_integrals(model, focal.a_e.point, out, opts.rk_tol)?;
    let (j_plus, p_plus) = arc_integrals(model, focal.a_prime_e.point, t - out, opts.rk_tol)?;
    let a_minus = j_minus - h * p_minus;
    let a_plus = -j_plus + h * p_plus;
    let theta = (a_minus - a_plus) / (2.0 * h);
    let c = theta.cos();
    Ok(GramEvaluation { energy: e, h, a_plus, a_minus, theta, det: -(c * c) })
}

/// Energies in `window` where the Gram determinant vanishes, located as the
/// zeros of `cos(theta)`.
pub fn gram_roots(model: &SymbolModel, h: f64, window: Interval, opts: &OrbitOptions) -> Result<Vec<f64>> {
    let w = model.energy_window();
    if !w.contains_interval(&window) {
        return Err(Error::EnergyOutsideWindow { energy: window.min, min: w.min, max: w.max });
    }
    let theta = |e: f64| Ok(gram_eval(model, e, h, opts)?.theta);
    let table = sample_adaptive(theta, window, DEFAULT_GRID_POINTS, 0.5 * PI)?;
    let xtol = 1e-12 * window.width();
    let mut roots = Vec::new();
    for pair in table.windows(2) {
        let (a, ta) = pair[0];
        let (b, tb) = pair[1];
        let (ca, cb) = (ta.cos(), tb.cos());
        if ca == 0.0 {
            roots.push(a);
        } else if ca * cb < 0.0 {
            roots.push(brent_with_values(|e| Ok(theta(e)?.cos()), a, ca, b, cb, xtol)?);
        }
    }
    if let Some(&(b, tb)) = table.last() {
        if tb.cos() == 0.0 {
            roots.push(b);
        }
    }
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub h: f64,
    pub n: i64,
    pub order: usize,
    pub e_bs: f64,
    pub e_oracle: Option<f64>,
    pub abs_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMismatch {
    pub bs: usize,
    pub oracle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Largest error over paired rows; `None` if nothing paired.
    pub max_error: Option<f64>,
    pub count_mismatch: Option<CountMismatch>,
}

/// Pairs each root with the oracle eigenvalue of the same global index `n`.
pub fn compare_with_oracle(bs: &[BsSolution], spec: &SpectrumWindow) -> ComparisonTable {
    let mut rows = Vec::with_capacity(bs.len());
    let mut max_error: Option<f64> = None;
    for s in bs {
        let k = s.n - spec.first_index as i64;
        let e_oracle = (k >= 0).then(|| spec.eigenvalues.get(k as usize).copied()).flatten();
        let abs_err = e_oracle.map(|e| (s.energy - e).abs());
        if let Some(err) = abs_err {
            max_error = Some(max_error.map_or(err, |m| m.max(err)));
        }
        rows.push(ComparisonRow { h: s.h, n: s.n, order: s.order, e_bs: s.energy, e_oracle, abs_err });
    }
    let paired = rows.iter().filter(|r| r.e_oracle.is_some()).count();
    let count_mismatch = (paired != bs.len() || paired != spec.eigenvalues.len())
        .then_some(CountMismatch { bs: bs.len(), oracle: spec.eigenvalues.len() });
    ComparisonTable { rows, max_error, count_mismatch }
}
