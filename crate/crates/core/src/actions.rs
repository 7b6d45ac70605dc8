//! Action coefficients `S0`, `S1`, `S2` of the second-order quantization rule.
//!
//! With `(x(t), xi(t))` the Hamiltonian flow on the orbit at energy `E`:
//!
//! ```text
//! S0 = ∮ xi dx
//! S1 = -π - ∮ p1 dt
//! S2 = -(1/24) d/dE ∮ Δ dt - ∮ p2 dt + (1/2) d/dE ∮ p1² dt
//! ```
//!
//! where `Δ` is the Hessian determinant of `p0`. Energy derivatives are
//! central differences over orbits re-traced at `E ± δ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{trace_orbit, Orbit, OrbitOptions};
use crate::symbols::SymbolModel;

/// Hessian determinant `p0_xx p0_xixi - p0_xxi^2`.
pub fn delta(model: &SymbolModel, x: f64, xi: f64) -> Result<f64> {
    let xx = model.eval_derivative(2, 0, x, xi)?;
    let pp = model.eval_derivative(0, 2, x, xi)?;
    let xp = model.eval_derivative(1, 1, x, xi)?;
    Ok(xx * pp - xp * xp)
}

/// `(f(E + δ) - f(E - δ)) / 2δ`.
pub fn central_de<F>(mut f: F, e: f64, step: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let hi = f(e + step)?;
    let lo = f(e - step)?;
    let d = (hi - lo) / (2.0 * step);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFiniteEvaluation { symbol: "central_de".into(), x: e, xi: step })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionOptions {
    /// Energy step for d/dE; `None` means `1e-4` times the window width.
    pub de_step: Option<f64>,
    pub orbit: OrbitOptions,
}

impl Default for ActionOptions {
    fn default() -> Self {
        Self { de_step: None, orbit: OrbitOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionComponents {
    pub int_p1_dt: f64,
    pub int_p2_dt: f64,
    pub int_delta_dt: f64,
    pub int_p1sq_dt: f64,
    pub de_int_delta_dt: f64,
    pub de_int_p1sq_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCoefficients {
    pub energy: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub period: f64,
    pub components: ActionComponents,
    pub de_step: f64,
}

impl ActionCoefficients {
    /// `S0 + h S1 + h^2 S2` truncated after `order` in `{0, 1, 2}`.
    pub fn series(&self, h: f64, order: usize) -> f64 {
        match order {
            0 => self.s0,
            1 => self.s0 + h * self.s1,
            _ => self.s0 + h * self.s1 + h * h * self.s2,
        }
    }
}

/// Loop integrals entering `S1`, `S2` on one traced orbit.
#[derive(Debug, Clone, Copy)]
struct LoopIntegrals {
    p1: f64,
    p2: f64,
    delta: f64,
    p1sq: f64,
}

fn loop_integrals(model: &SymbolModel, orbit: &Orbit, with_second: bool) -> Result<LoopIntegrals> {
    let p1 = if model.p1_is_zero() { 0.0 } else { orbit.loop_time_integral(|x, xi| model.p1(x, xi))? };
    if !with_second {
        return Ok(LoopIntegrals { p1, p2: 0.0, delta: 0.0, p1sq: 0.0 });
    }
    let p2 = if model.p2_is_zero() { 0.0 } else { orbit.loop_time_integral(|x, xi| model.p2(x, xi))? };
    let p1sq = if model.p1_is_zero() {
        0.0
    } else {
        orbit.loop_time_integral(|x, xi| Ok(model.p1(x, xi)?.powi(2)))?
    };
    let delta = orbit.loop_time_integral(|x, xi| delta(model, x, xi))?;
    Ok(LoopIntegrals { p1, p2, delta, p1sq })
}

/// Resolves the d/dE step: the configured or default value, clamped so that
/// `E ± δ` stays inside the model's energy window.
pub fn resolve_de_step(model: &SymbolModel, e: f64, opts: &ActionOptions) -> Result<f64> {
    let w = model.energy_window();
    if !w.contains(e) {
        return Err(Error::EnergyOutsideWindow { energy: e, min: w.min, max: w.max });
    }
    let nominal = opts.de_step.unwrap_or(1e-4 * w.width());
    let room = (e - w.min).min(w.max - e);
    let step = nominal.min(room);
    // a step squeezed far below nominal means E sits on the window edge
    if step < 1e-3 * nominal || step <= 0.0 {
        return Err(Error::EnergyOutsideWindow { energy: e, min: w.min + nominal, max: w.max - nominal });
    }
    Ok(step)
}

/// `S0` and `S1` only, from a single orbit.
pub fn first_order_actions(model: &SymbolModel, e: f64, opts: &OrbitOptions) -> Result<(f64, f64, Orbit)> {
    let orbit = trace_orbit(model, e, opts)?;
    let li = loop_integrals(model, &orbit, false)?;
    Ok((orbit.area_action(), -PI - li.p1, orbit))
}

/// Full `S0, S1, S2` at energy `E`.
pub fn action_coefficients(model: &SymbolModel, e: f64, opts: &ActionOptions) -> Result<ActionCoefficients> {
    let step = resolve_de_step(model, e, opts)?;
    let orbit = trace_orbit(model, e, &opts.orbit)?;
    let mid = loop_integrals(model, &orbit, true)?;
    let side = |energy: f64| -> Result<LoopIntegrals> {
        let o = trace_orbit(model, energy, &opts.orbit)?;
        loop_integrals(model, &o, true)
    };
    let hi = side(e + step)?;
    let lo = side(e - step)?;
    let de_int_delta_dt = (hi.delta - lo.delta) / (2.0 * step);
    let de_int_p1sq_dt = (hi.p1sq - lo.p1sq) / (2.0 * step);

    let components = ActionComponents {
        int_p1_dt: mid.p1,
        int_p2_dt: mid.p2,
        int_delta_dt: mid.delta,
        int_p1sq_dt: mid.p1sq,
        de_int_delta_dt,
        de_int_p1sq_dt,
    };
    Ok(ActionCoefficients {
        energy: e,
        s0: orbit.area_action(),
        s1: -PI - components.int_p1_dt,
        s2: -de_int_delta_dt / 24.0 - components.int_p2_dt + 0.5 * de_int_p1sq_dt,
        period: orbit.period,
        components,
        de_step: step,
    })
}

/// `S_h(E)` truncated at `order`; orders 0 and 1 trace a single orbit.
pub fn action_series(model: &SymbolModel, e: f64, h: f64, order: usize, opts: &ActionOptions) -> Result<f64> {
    match order {
        0 => Ok(trace_orbit(model, e, &opts.orbit)?.area_action()),
        1 => {
            let (s0, s1, _) = first_order_actions(model, e, &opts.orbit)?;
            Ok(s0 + h * s1)
        }
        _ => Ok(action_coefficients(model, e, opts)?.series(h, 2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{catalog_build, ParamValue, Params};

    fn model(name: &str, c: Option<f64>) -> SymbolModel {
        let mut p = Params::new();
        if let Some(c) = c {
            p.insert("c".into(), ParamValue::Scalar(c));
        }
        catalog_build(name, &p).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&model("harmonic", None), 0.3, 1.2).unwrap(), 1.0);
        let q = model("quartic", None);
        for x in [0.0, 0.5, 1.1] {
            assert!((delta(&q, x, 0.0).unwrap() - 24.0 * x * x).abs() < 1e-12);
        }
        let mut p = Params::new();
        p.insert("coeffs".into(), ParamValue::List(vec![0.0, 0.0, 1.0]));
        let sq = catalog_build("schrodinger_poly", &p).unwrap();
        assert_eq!(delta(&sq, -0.4, 0.9).unwrap(), 4.0);
    }

    #[test]
    fn central_difference_of_square() {
        let d = central_de(|e| Ok(e * e), 1.0, 1e-4).unwrap();
        assert!((d - 2.0).abs() < 1e-7);
    }

    #[test]
    fn harmonic_coefficients() {
        let a = action_coefficients(&model("harmonic", None), 0.5, &ActionOptions::default()).unwrap();
        assert!((a.s0 - PI).abs() < 1e-6);
        assert_eq!(a.s1, -PI);
        assert!(a.s2.abs() < 1e-6, "S2 = {}", a.s2);
    }

    #[test]
    fn constant_subprincipal_shift() {
        let a = action_coefficients(&model("harmonic_shift1", Some(0.25)), 0.5, &ActionOptions::default()).unwrap();
        assert!((a.s1 + 1.5 * PI).abs() < 1e-6, "S1 = {}", a.s1);
    }

    #[test]
    fn constant_second_order_shift() {
        let a = action_coefficients(&model("harmonic_shift2", Some(0.3)), 0.5, &ActionOptions::default()).unwrap();
        assert!((a.s2 + 0.6 * PI).abs() < 1e-6, "S2 = {}", a.s2);
        assert!(a.components.de_int_delta_dt.abs() < 1e-6);
    }

    #[test]
    fn quadratic_subprincipal_closed_form() {
        // p1 = κx² on the unit oscillator: ∮p1 dt = 2πκE, ∮p1² dt = 3πκ²E²
        let kappa = 0.7;
        let m = SymbolModel::new(
            "quadratic_p1",
            |x, xi| 0.5 * (x * x + xi * xi),
            crate::orbit::PhaseSpacePoint::new(0.0, 0.0),
            crate::symbols::Interval::new(0.01, 4.0),
        )
        .with_p1(move |x, _| kappa * x * x);
        let e = 0.8;
        let a = action_coefficients(&m, e, &ActionOptions::default()).unwrap();
        assert!((a.s1 + PI + 2.0 * PI * kappa * e).abs() < 1e-8, "S1 = {}", a.s1);
        assert!((a.s2 - 3.0 * PI * kappa * kappa * e).abs() < 1e-6, "S2 = {}", a.s2);
    }

    #[test]
    fn step_is_clamped_near_window_edge() {
        let m = model("harmonic", None);
        let w = m.energy_window();
        let opts = ActionOptions::default();
        let near = w.min + 0.5e-4 * w.width();
        let step = resolve_de_step(&m, near, &opts).unwrap();
        assert!(near - step >= w.min);
        assert!(resolve_de_step(&m, w.min, &opts).is_err());
        assert!(resolve_de_step(&m, w.max + 1.0, &opts).is_err());
    }

    #[test]
    fn period_constant_gives_zero_derivative() {
        let m = model("harmonic", None);
        let d = central_de(|e| Ok(trace_orbit(&m, e, &OrbitOptions::default())?.period), 1.3, 1e-4).unwrap();
        assert!(d.abs() < 1e-6);
    }
}
