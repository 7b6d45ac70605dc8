//! Periodic orbits of the Hamiltonian flow of `p0` inside the well.
//!
//! The orbit at energy `E` is anchored on the ray `{(x, xi0) : x > x0}`
//! leaving the well seed `(x0, xi0)`. Hamilton's equations
//! `x' = d_xi p0`, `xi' = -d_x p0` are integrated until the flow crosses the
//! ray again, and the closed loop is then re-integrated onto a uniform time
//! grid so that periodic trapezoid sums are spectrally accurate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{dopri_step, Stepper};
use crate::roots::brent;
use crate::symbols::SymbolModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub xi: f64,
}

impl PhaseSpacePoint {
    pub const fn new(x: f64, xi: f64) -> Self {
        Self { x, xi }
    }

    pub fn distance(&self, other: &PhaseSpacePoint) -> f64 {
        (self.x - other.x).hypot(self.xi - other.xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    /// Local error tolerance of the adaptive integrator.
    pub rk_tol: f64,
    pub n_samples: usize,
    /// Energy conservation tolerance, relative to `max(1, |E|)`.
    pub energy_tol: f64,
    /// Maximum distance between the start and the state after one period.
    pub close_tol: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { rk_tol: 1e-10, n_samples: 1024, energy_tol: 1e-9, close_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    pub point: PhaseSpacePoint,
    /// `(x', xi')` from the Hamiltonian vector field at `point`.
    pub velocity: [f64; 2],
}

/// Closed trajectory sampled uniformly in time over `[0, T)`.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub energy: f64,
    pub period: f64,
    pub samples: Vec<OrbitSample>,
    /// `+1` when the samples run counterclockwise in the `(x, xi)` plane.
    pub orientation: i8,
}

const MIN_SAMPLES: usize = 64;
const MAX_STEPS: usize = 10_000_000;

fn check_window(model: &SymbolModel, e: f64) -> Result<()> {
    let w = model.energy_window();
    if !w.contains(e) {
        return Err(Error::EnergyOutsideWindow { energy: e, min: w.min, max: w.max });
    }
    Ok(())
}

/// First point with `p0 = E` on the ray to the right of the well seed.
pub fn section_point(model: &SymbolModel, e: f64) -> Result<PhaseSpacePoint> {
    check_window(model, e)?;
    let seed = model.well_seed();
    let g = |x: f64| Ok(model.p0(x, seed.xi)? - e);
    let scale = seed.x.abs().max(1.0);
    let mut lo = seed.x;
    let mut step = 1e-4 * scale;
    let max_reach = 1e6 * scale;
    loop {
        let hi = lo + step;
        if hi - seed.x > max_reach {
            return Err(Error::NoCrossing(e));
        }
        if g(hi)? >= 0.0 {
            let x = brent(g, lo, hi, 0.0)?;
            return Ok(PhaseSpacePoint::new(x, seed.xi));
        }
        lo = hi;
        step *= 1.25;
    }
}

/// Advances the Hamiltonian flow from `start` for time `duration >= 0`.
pub fn flow(model: &SymbolModel, start: PhaseSpacePoint, duration: f64, rk_tol: f64) -> Result<PhaseSpacePoint> {
    if duration == 0.0 {
        return Ok(start);
    }
    let f = |y: &[f64; 2]| model.hamilton_field(y[0], y[1]);
    let mut s = Stepper::new(rk_tol, duration.abs().min(1e-2), 2);
    let y = s.advance(&f, &[start.x, start.xi], duration)?;
    Ok(PhaseSpacePoint::new(y[0], y[1]))
}

/// Period estimate used to size the `t_max` guard: the harmonic period at
/// the bottom of the well when its Hessian is non-degenerate, otherwise a
/// crossing-time scale at the section point.
fn timescale(model: &SymbolModel, start: PhaseSpacePoint) -> Result<f64> {
    let seed = model.well_seed();
    let det = model.eval_derivative(2, 0, seed.x, seed.xi)? * model.eval_derivative(0, 2, seed.x, seed.xi)?
        - model.eval_derivative(1, 1, seed.x, seed.xi)?.powi(2);
    if det > 1e-12 {
        return Ok(2.0 * std::f64::consts::PI / det.sqrt());
    }
    let v = model.hamilton_field(start.x, start.xi)?;
    let speed = v[0].hypot(v[1]).max(1e-300);
    Ok(2.0 * std::f64::consts::PI * (start.x - seed.x).abs().max(1e-3) / speed)
}

/// Traces the periodic orbit at energy `E`.
pub fn trace_orbit(model: &SymbolModel, e: f64, opts: &OrbitOptions) -> Result<Orbit> {
    if opts.n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameters(format!(
            "n_samples = {} is below the minimum {MIN_SAMPLES}",
            opts.n_samples
        )));
    }
    let start = section_point(model, e)?;
    let xi0 = model.well_seed().xi;
    let x0 = model.well_seed().x;
    let f = |y: &[f64; 2]| model.hamilton_field(y[0], y[1]);
    let y0 = [start.x, start.xi];

    let t_est = timescale(model, start)?;
    let t_max = 1e6 * t_est;
    let initial_dir = f(&y0)?[1].signum();
    if initial_dir == 0.0 {
        return Err(Error::DegenerateFocal(0.0));
    }

    // first pass: locate the return to the section
    let mut stepper = Stepper::new(opts.rk_tol, 1e-3 * t_est, 2);
    let mut t = 0.0;
    let mut y = y0;
    let mut steps = 0;
    let period = loop {
        let (y_new, used) = stepper.step(&f, &y, f64::INFINITY)?;
        let g_prev = (y[1] - xi0) * initial_dir;
        let g_new = (y_new[1] - xi0) * initial_dir;
        if g_prev < 0.0 && g_new >= 0.0 && y_new[0] > x0 {
            let y_from = y;
            let sigma = brent(
                |s| Ok((dopri_step(&f, &y_from, s)?.0[1] - xi0) * initial_dir),
                0.0,
                used,
                0.0,
            )?;
            break t + sigma;
        }
        y = y_new;
        t += used;
        steps += 1;
        if t > t_max || steps > MAX_STEPS {
            return Err(Error::NoReturn { t_max });
        }
    };

    // second pass: uniform resampling by re-integration
    let n = opts.n_samples;
    let dt = period / n as f64;
    let mut stepper = Stepper::new(opts.rk_tol, dt.min(1e-3 * t_est), 2);
    let mut samples = Vec::with_capacity(n);
    let mut state = y0;
    for k in 0..n {
        if k > 0 {
            state = stepper.advance(&f, &state, dt)?;
        }
        let point = PhaseSpacePoint::new(state[0], state[1]);
        samples.push(OrbitSample { t: k as f64 * dt, point, velocity: f(&state)? });
    }
    let end = stepper.advance(&f, &state, dt)?;
    let distance = PhaseSpacePoint::new(end[0], end[1]).distance(&start);
    if distance > opts.close_tol {
        return Err(Error::OrbitNotClosed { distance, tol: opts.close_tol });
    }

    let tol_e = opts.energy_tol * e.abs().max(1.0);
    let mut drift: f64 = 0.0;
    for s in &samples {
        drift = drift.max((model.p0(s.point.x, s.point.xi)? - e).abs());
    }
    if drift > tol_e {
        return Err(Error::EnergyDrift { drift, tol: tol_e });
    }

    let mut orbit = Orbit { energy: e, period, samples, orientation: 1 };
    orbit.orientation = if orbit.signed_shoelace_area() >= 0.0 { 1 } else { -1 };
    Ok(orbit)
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.period / self.samples.len() as f64
    }

    /// `∮ f(x(t), xi(t)) dt` by the periodic trapezoid rule.
    pub fn loop_time_integral<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        let mut acc = 0.0;
        for s in &self.samples {
            acc += f(s.point.x, s.point.xi)?;
        }
        Ok(acc * self.dt())
    }

    /// Classical action `S0 = ∮ xi dx = ∮ xi x' dt`, normalized positive.
    pub fn area_action(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|s| s.point.xi * s.velocity[0]).sum();
        (sum * self.dt()).abs()
    }

    /// Signed polygon area of the samples (counterclockwise positive).
    pub fn signed_shoelace_area(&self) -> f64 {
        polygon_area(self.samples.iter().map(|s| s.point))
    }

    /// Polygon area with the leading `O(n^-2)` chord error removed by
    /// combining the full polygon with the one through every other sample.
    pub fn shoelace_area_extrapolated(&self) -> f64 {
        let full = self.signed_shoelace_area().abs();
        let half = polygon_area(self.samples.iter().step_by(2).map(|s| s.point)).abs();
        (4.0 * full - half) / 3.0
    }

    /// The same loop traversed backwards in time.
    pub fn reversed(&self) -> Orbit {
        let n = self.samples.len();
        let dt = self.dt();
        let samples = (0..n)
            .map(|k| {
                let s = &self.samples[(n - k) % n];
                OrbitSample {
                    t: k as f64 * dt,
                    point: s.point,
                    velocity: [-s.velocity[0], -s.velocity[1]],
                }
            })
            .collect();
        Orbit { energy: self.energy, period: self.period, samples, orientation: -self.orientation }
    }

    pub fn max_abs_xi(&self) -> f64 {
        self.samples.iter().map(|s| s.point.xi.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_x(&self) -> f64 {
        self.samples.iter().map(|s| s.point.x.abs()).fold(0.0, f64::max)
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.point.x), hi.max(s.point.x))
        })
    }
}

fn polygon_area<I: Iterator<Item = PhaseSpacePoint>>(points: I) -> f64 {
    let pts: Vec<PhaseSpacePoint> = points.collect();
    let n = pts.len();
    let mut acc = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        acc += a.x * b.xi - b.x * a.xi;
    }
    0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use crate::symbols::{catalog_build, Params};
    use std::f64::consts::PI;

    fn harmonic() -> SymbolModel {
        catalog_build("harmonic", &Params::new()).unwrap()
    }

    fn quartic() -> SymbolModel {
        catalog_build("quartic", &Params::new()).unwrap()
    }

    /// `∫_{-1}^{1} g(x) / sqrt(1 - x^4) dx` with `x = sin(u)` removing the
    /// endpoint singularities: `dx / sqrt(1 - x^4) = du / sqrt(1 + sin^2 u)`.
    fn quartic_period_oracle() -> f64 {
        let gl = GaussLegendre::new(40);
        gl.integrate_panels(-PI / 2.0, PI / 2.0, 8, |u| 1.0 / (1.0 + u.sin().powi(2)).sqrt())
    }

    fn quartic_action_oracle() -> f64 {
        // 2 ∫ sqrt(1 - x^4) dx with x = sin(u): sqrt(1-x^4) dx = cos^2 u sqrt(1 + sin^2 u) du
        let gl = GaussLegendre::new(40);
        2.0 * gl.integrate_panels(-PI / 2.0, PI / 2.0, 8, |u| u.cos().powi(2) * (1.0 + u.sin().powi(2)).sqrt())
    }

    #[test]
    fn section_points() {
        let h = harmonic();
        let p = section_point(&h, 0.5).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12 && p.xi == 0.0);
        let p = section_point(&h, 2.0).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12);
        let p = section_point(&quartic(), 1.0).unwrap();
        assert!((p.x - 1.0).abs() < 1e-12);
        assert!(matches!(section_point(&h, 100.0), Err(Error::EnergyOutsideWindow { .. })));
    }

    #[test]
    fn harmonic_period_is_two_pi() {
        let h = harmonic();
        for e in [0.5, 2.0] {
            let o = trace_orbit(&h, e, &OrbitOptions::default()).unwrap();
            assert!((o.period - 2.0 * PI).abs() < 1e-8, "E={e} T={}", o.period);
            let r = (2.0 * e).sqrt();
            for s in &o.samples {
                assert!((s.point.x.hypot(s.point.xi) - r).abs() < 1e-9);
            }
            // the flow runs clockwise
            assert_eq!(o.orientation, -1);
        }
    }

    #[test]
    fn quartic_period_matches_quadrature() {
        let o = trace_orbit(&quartic(), 1.0, &OrbitOptions::default()).unwrap();
        let t = quartic_period_oracle();
        assert!((o.period - t).abs() < 1e-8 * t, "{} vs {t}", o.period);
    }

    #[test]
    fn loop_integrals_on_harmonic() {
        let o = trace_orbit(&harmonic(), 0.5, &OrbitOptions::default()).unwrap();
        let one = o.loop_time_integral(|_, _| Ok(1.0)).unwrap();
        assert!((one - 2.0 * PI).abs() < 1e-8);
        let energy = o.loop_time_integral(|x, xi| Ok(0.5 * (x * x + xi * xi))).unwrap();
        assert!((energy - PI).abs() < 1e-8);
        let x2 = o.loop_time_integral(|x, _| Ok(x * x)).unwrap();
        assert!((x2 - PI).abs() < 1e-8);
    }

    #[test]
    fn area_actions() {
        let h = harmonic();
        let a1 = trace_orbit(&h, 1.0, &OrbitOptions::default()).unwrap().area_action();
        assert!((a1 - 2.0 * PI).abs() < 1e-8 * 2.0 * PI);
        let a05 = trace_orbit(&h, 0.5, &OrbitOptions::default()).unwrap().area_action();
        assert!((a05 - PI).abs() < 1e-8 * PI);
        let q = trace_orbit(&quartic(), 1.0, &OrbitOptions::default()).unwrap().area_action();
        let oracle = quartic_action_oracle();
        assert!((q - oracle).abs() < 1e-8 * oracle, "{q} vs {oracle}");
    }

    #[test]
    fn reversal_keeps_area() {
        let o = trace_orbit(&quartic(), 2.0, &OrbitOptions::default()).unwrap();
        let r = o.reversed();
        assert_eq!(r.orientation, -o.orientation);
        assert!((r.area_action() - o.area_action()).abs() < 1e-12 * o.area_action());
    }

    #[test]
    fn shoelace_agrees_with_action() {
        let o = trace_orbit(&quartic(), 1.5, &OrbitOptions::default()).unwrap();
        let a = o.area_action();
        assert!((o.shoelace_area_extrapolated() - a).abs() < 1e-6 * a);
    }

    #[test]
    fn too_few_samples() {
        let opts = OrbitOptions { n_samples: 10, ..OrbitOptions::default() };
        assert!(matches!(trace_orbit(&harmonic(), 0.5, &opts), Err(Error::InvalidParameters(_))));
    }
}
