//! Evaluable classical symbols `p ~ p0 + h p1 + h^2 p2` and the builtin catalog.
//!
//! A [`SymbolModel`] is immutable once built and every evaluation is pure.
//! Derivatives of the principal symbol are limited to total order two; when a
//! model carries no analytic derivatives they are taken by central finite
//! differences with a step proportional to `max(1, |x|, |xi|)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::PhaseSpacePoint;
use crate::roots::brent;

pub type SymbolFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type DerivativeFn = Arc<dyn Fn(usize, usize, f64, f64) -> f64 + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed energy interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.min && e <= self.max
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.min >= self.min && other.max <= self.max
    }
}

/// A catalog parameter: either a scalar or a coefficient list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

/// Relative finite-difference steps used when no analytic derivatives exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    /// Relative step for first derivatives.
    pub first_rel: f64,
    /// Relative step for second derivatives (5-point stencils).
    pub second_rel: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { first_rel: 1e-5, second_rel: 1e-3 }
    }
}

/// `p0 = kinetic * xi^2 + V(x)` with `p1`, `p2` independent of `xi`.
#[derive(Clone)]
pub struct SchrodingerForm {
    pub kinetic: f64,
    pub potential: PotentialFn,
}

/// Which term of the symbol expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Principal,
    Subprincipal,
    Second,
}

impl TryFrom<usize> for Level {
    type Error = Error;

    fn try_from(v: usize) -> Result<Self> {
        match v {
            0 => Ok(Level::Principal),
            1 => Ok(Level::Subprincipal),
            2 => Ok(Level::Second),
            other => Err(Error::UnsupportedLevel(other)),
        }
    }
}

#[derive(Clone)]
pub struct SymbolModel {
    name: String,
    params: Params,
    p0: SymbolFn,
    p1: SymbolFn,
    p2: SymbolFn,
    p1_zero: bool,
    p2_zero: bool,
    derivatives: Option<DerivativeFn>,
    fd: FdSteps,
    well_seed: PhaseSpacePoint,
    energy_window: Interval,
    schrodinger: Option<SchrodingerForm>,
}

impl fmt::Debug for SymbolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolModel")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("well_seed", &self.well_seed)
            .field("energy_window", &self.energy_window)
            .field("analytic_derivatives", &self.derivatives.is_some())
            .finish()
    }
}

impl SymbolModel {
    /// Starts a model from its principal symbol; `p1 = p2 = 0` until set.
    pub fn new<F>(name: impl Into<String>, p0: F, well_seed: PhaseSpacePoint, energy_window: Interval) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let zero: SymbolFn = Arc::new(|_, _| 0.0);
        Self {
            name: name.into(),
            params: Params::new(),
            p0: Arc::new(p0),
            p1: zero.clone(),
            p2: zero,
            p1_zero: true,
            p2_zero: true,
            derivatives: None,
            fd: FdSteps::default(),
            well_seed,
            energy_window,
            schrodinger: None,
        }
    }

    pub fn with_p1<F>(mut self, p1: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.p1 = Arc::new(p1);
        self.p1_zero = false;
        self
    }

    pub fn with_p2<F>(mut self, p2: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.p2 = Arc::new(p2);
        self.p2_zero = false;
        self
    }

    /// Analytic `d_x^i d_xi^j p0` for `i + j <= 2`.
    pub fn with_derivatives<F>(mut self, d: F) -> Self
    where
        F: Fn(usize, usize, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.derivatives = Some(Arc::new(d));
        self
    }

    pub fn with_fd_steps(mut self, fd: FdSteps) -> Self {
        self.fd = fd;
        self
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    pub fn with_energy_window(mut self, window: Interval) -> Self {
        self.energy_window = window;
        self
    }

    /// Marks the model as `kinetic * xi^2 + V(x)`; `p1`, `p2` must not depend on `xi`.
    pub fn with_schrodinger_form<F>(mut self, kinetic: f64, potential: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.schrodinger = Some(SchrodingerForm { kinetic, potential: Arc::new(potential) });
        self
    }

    /// Checks well containment against the energy window.
    pub fn validated(self) -> Result<Self> {
        let w = self.energy_window;
        if !(w.min.is_finite() && w.max.is_finite() && w.min < w.max) {
            return Err(Error::InvalidParameters(format!(
                "energy window [{}, {}] is empty or non-finite",
                w.min, w.max
            )));
        }
        let bottom = self.eval_symbol(0, self.well_seed.x, self.well_seed.xi)?;
        if bottom >= w.min {
            return Err(Error::InvalidParameters(format!(
                "well seed energy {bottom} is not below the window minimum {}",
                w.min
            )));
        }
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn well_seed(&self) -> PhaseSpacePoint {
        self.well_seed
    }

    pub fn energy_window(&self) -> Interval {
        self.energy_window
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    pub fn p1_is_zero(&self) -> bool {
        self.p1_zero
    }

    pub fn p2_is_zero(&self) -> bool {
        self.p2_zero
    }

    pub fn schrodinger_form(&self) -> Option<&SchrodingerForm> {
        self.schrodinger.as_ref()
    }

    /// Effective potential `V(x) + h p1(x) + h^2 p2(x)` of a Schrödinger-form model.
    pub fn schrodinger_potential(&self, h: f64) -> Option<(f64, impl Fn(f64) -> f64 + '_)> {
        let form = self.schrodinger.as_ref()?;
        let v = form.potential.clone();
        Some((form.kinetic, move |x: f64| {
            v(x) + h * (self.p1)(x, 0.0) + h * h * (self.p2)(x, 0.0)
        }))
    }

    fn finite(&self, v: f64, x: f64, xi: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation { symbol: self.name.clone(), x, xi })
        }
    }

    /// `p_level(x, xi)` for `level` in `{0, 1, 2}`.
    pub fn eval_symbol(&self, level: usize, x: f64, xi: f64) -> Result<f64> {
        let f = match Level::try_from(level)? {
            Level::Principal => &self.p0,
            Level::Subprincipal => &self.p1,
            Level::Second => &self.p2,
        };
        self.finite(f(x, xi), x, xi)
    }

    pub fn p0(&self, x: f64, xi: f64) -> Result<f64> {
        self.finite((self.p0)(x, xi), x, xi)
    }

    pub fn p1(&self, x: f64, xi: f64) -> Result<f64> {
        self.finite((self.p1)(x, xi), x, xi)
    }

    pub fn p2(&self, x: f64, xi: f64) -> Result<f64> {
        self.finite((self.p2)(x, xi), x, xi)
    }

    /// Full symbol `p0 + h p1 + h^2 p2`.
    pub fn full_symbol(&self, h: f64, x: f64, xi: f64) -> Result<f64> {
        let mut v = self.p0(x, xi)?;
        if !self.p1_zero {
            v += h * self.p1(x, xi)?;
        }
        if !self.p2_zero {
            v += h * h * self.p2(x, xi)?;
        }
        Ok(v)
    }

    /// `d_x^i d_xi^j p0(x, xi)`, analytic when available.
    pub fn eval_derivative(&self, i: usize, j: usize, x: f64, xi: f64) -> Result<f64> {
        if i + j > 2 {
            return Err(Error::UnsupportedOrder { i, j });
        }
        if i == 0 && j == 0 {
            return self.p0(x, xi);
        }
        match &self.derivatives {
            Some(d) => self.finite(d(i, j, x, xi), x, xi),
            None => self.fd_derivative(i, j, x, xi),
        }
    }

    /// Finite-difference derivative, regardless of analytic availability.
    pub fn fd_derivative(&self, i: usize, j: usize, x: f64, xi: f64) -> Result<f64> {
        if i + j > 2 {
            return Err(Error::UnsupportedOrder { i, j });
        }
        let scale = 1f64.max(x.abs()).max(xi.abs());
        let p = |a: f64, b: f64| self.p0(a, b);
        let d1 = self.fd.first_rel * scale;
        let d2 = self.fd.second_rel * scale;
        match (i, j) {
            (0, 0) => p(x, xi),
            (1, 0) => first_5pt(|s| p(x + s, xi), d1),
            (0, 1) => first_5pt(|s| p(x, xi + s), d1),
            (2, 0) => second_5pt(|s| p(x + s, xi), d2),
            (0, 2) => second_5pt(|s| p(x, xi + s), d2),
            (1, 1) => self.fd_mixed_x_first(x, xi),
            _ => unreachable!(),
        }
    }

    /// `d_x (d_xi p0)` with the xi-stencil applied innermost.
    pub fn fd_mixed_x_first(&self, x: f64, xi: f64) -> Result<f64> {
        let d = self.fd.second_rel * 1f64.max(x.abs()).max(xi.abs());
        first_5pt(|s| first_5pt(|t| self.p0(x + s, xi + t), d), d)
    }

    /// `d_xi (d_x p0)` with the x-stencil applied innermost.
    pub fn fd_mixed_xi_first(&self, x: f64, xi: f64) -> Result<f64> {
        let d = self.fd.second_rel * 1f64.max(x.abs()).max(xi.abs());
        first_5pt(|t| first_5pt(|s| self.p0(x + s, xi + t), d), d)
    }

    /// Hamiltonian vector field `(d_xi p0, -d_x p0)`.
    pub fn hamilton_field(&self, x: f64, xi: f64) -> Result<[f64; 2]> {
        Ok([self.eval_derivative(0, 1, x, xi)?, -self.eval_derivative(1, 0, x, xi)?])
    }
}

fn first_5pt<F: Fn(f64) -> Result<f64>>(f: F, d: f64) -> Result<f64> {
    Ok((f(-2.0 * d)? - 8.0 * f(-d)? + 8.0 * f(d)? - f(2.0 * d)?) / (12.0 * d))
}

fn second_5pt<F: Fn(f64) -> Result<f64>>(f: F, d: f64) -> Result<f64> {
    Ok((-f(-2.0 * d)? + 16.0 * f(-d)? - 30.0 * f(0.0)? + 16.0 * f(d)? - f(2.0 * d)?) / (12.0 * d * d))
}

/// Names accepted by [`catalog_build`].
pub const CATALOG_NAMES: &[&str] = &[
    "harmonic",
    "harmonic_shift1",
    "harmonic_shift2",
    "quartic",
    "schrodinger_poly",
    "anharmonic",
];

/// A catalog entry: name plus builder.
pub struct SymbolCatalogEntry {
    pub name: &'static str,
    pub builder: fn(&Params) -> Result<SymbolModel>,
}

pub const CATALOG: &[SymbolCatalogEntry] = &[
    SymbolCatalogEntry { name: "harmonic", builder: build_harmonic },
    SymbolCatalogEntry { name: "harmonic_shift1", builder: build_harmonic_shift1 },
    SymbolCatalogEntry { name: "harmonic_shift2", builder: build_harmonic_shift2 },
    SymbolCatalogEntry { name: "quartic", builder: build_quartic },
    SymbolCatalogEntry { name: "schrodinger_poly", builder: build_schrodinger_poly },
    SymbolCatalogEntry { name: "anharmonic", builder: build_anharmonic },
];

pub fn catalog_build(name: &str, params: &Params) -> Result<SymbolModel> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownSymbolName(name.to_string()))
        .and_then(|e| (e.builder)(params))
}

/// Every catalog symbol at its default parameters.
pub fn catalog_defaults() -> Vec<SymbolModel> {
    CATALOG
        .iter()
        .map(|e| (e.builder)(&Params::new()).expect("catalog defaults are valid"))
        .collect()
}

fn scalar(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
        Some(other) => Err(Error::InvalidParameters(format!("`{key}` must be a finite number, got {other:?}"))),
    }
}

fn reject_unknown(params: &Params, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParameters(format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

fn window_from(params: &Params, default: Interval) -> Result<Interval> {
    Ok(Interval::new(scalar(params, "e_min", default.min)?, scalar(params, "e_max", default.max)?))
}

fn build_harmonic(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["e_min", "e_max"])?;
    let window = window_from(params, Interval::new(0.005, 4.0))?;
    schrodinger_model("harmonic", 0.5, &[0.0, 0.0, 0.5], Some(window), params.clone())
}

fn build_harmonic_shift1(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["c", "e_min", "e_max"])?;
    let c = scalar(params, "c", 0.25)?;
    let window = window_from(params, Interval::new(0.005, 4.0))?;
    Ok(schrodinger_model("harmonic_shift1", 0.5, &[0.0, 0.0, 0.5], Some(window), params.clone())?
        .with_p1(move |_, _| c))
}

fn build_harmonic_shift2(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["c", "e_min", "e_max"])?;
    let c = scalar(params, "c", 0.3)?;
    let window = window_from(params, Interval::new(0.005, 4.0))?;
    Ok(schrodinger_model("harmonic_shift2", 0.5, &[0.0, 0.0, 0.5], Some(window), params.clone())?
        .with_p2(move |_, _| c))
}

fn build_quartic(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["e_min", "e_max"])?;
    let window = window_from(params, Interval::new(0.05, 4.0))?;
    schrodinger_model("quartic", 1.0, &[0.0, 0.0, 0.0, 0.0, 1.0], Some(window), params.clone())
}

fn build_anharmonic(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["lambda", "e_min", "e_max"])?;
    let lambda = scalar(params, "lambda", 0.1)?;
    if lambda < 0.0 {
        return Err(Error::InvalidParameters(format!("lambda = {lambda} must be non-negative")));
    }
    let window = window_from(params, Interval::new(0.01, 4.0))?;
    schrodinger_model("anharmonic", 0.5, &[0.0, 0.0, 0.5, 0.0, lambda], Some(window), params.clone())
}

fn build_schrodinger_poly(params: &Params) -> Result<SymbolModel> {
    reject_unknown(params, &["coeffs", "e_min", "e_max"])?;
    let coeffs = match params.get("coeffs") {
        Some(ParamValue::List(c)) => c.clone(),
        Some(other) => {
            return Err(Error::InvalidParameters(format!("`coeffs` must be a list, got {other:?}")))
        }
        None => vec![0.0, 0.0, 1.0],
    };
    let window = match (params.get("e_min"), params.get("e_max")) {
        (None, None) => None,
        _ => Some(Interval::new(scalar(params, "e_min", f64::NAN)?, scalar(params, "e_max", f64::NAN)?)),
    };
    schrodinger_model("schrodinger_poly", 1.0, &coeffs, window, params.clone())
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

/// `kinetic * xi^2 + V(x)` with polynomial `V` (coefficients lowest degree first).
///
/// Rejects potentials that are not a single well: the leading term must be
/// of even degree with positive coefficient and `V'` must change sign exactly
/// once on the sublevel set `{V <= E_max}`. Without an explicit window the
/// default is `[V_min + 0.01, V_min + 4]`.
pub fn schrodinger_model(
    name: &str,
    kinetic: f64,
    coeffs: &[f64],
    window: Option<Interval>,
    params: Params,
) -> Result<SymbolModel> {
    if !(kinetic > 0.0 && kinetic.is_finite()) {
        return Err(Error::InvalidParameters(format!("kinetic coefficient {kinetic} must be positive")));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameters("polynomial coefficients must be finite".into()));
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let degree = c.len().saturating_sub(1);
    if degree < 2 || degree % 2 != 0 || c[degree] <= 0.0 {
        return Err(Error::InvalidParameters(
            "potential must have even degree >= 2 with positive leading coefficient".into(),
        ));
    }
    let dc = poly_derivative(&c);
    let ddc = poly_derivative(&dc);

    // every critical point of V lies within the Cauchy bound of V'
    let lead = dc[dc.len() - 1];
    let bound = 1.0 + dc[..dc.len() - 1].iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let samples = 4000;
    let xs: Vec<f64> = (0..=samples).map(|k| -bound + 2.0 * bound * k as f64 / samples as f64).collect();
    let mut minima = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (poly_eval(&dc, w[0]), poly_eval(&dc, w[1]));
        if a < 0.0 && b >= 0.0 {
            let r = brent(|x| Ok(poly_eval(&dc, x)), w[0], w[1], 1e-15)?;
            minima.push(r);
        }
    }
    let x0 = *minima
        .iter()
        .min_by(|a, b| poly_eval(&c, **a).total_cmp(&poly_eval(&c, **b)))
        .ok_or_else(|| Error::InvalidParameters("potential has no minimum".into()))?;
    let v_min = poly_eval(&c, x0);
    let window = window.unwrap_or(Interval::new(v_min + 0.01, v_min + 4.0));
    if !(window.min.is_finite() && window.max.is_finite()) {
        return Err(Error::InvalidParameters("both e_min and e_max must be given".into()));
    }
    if window.min <= v_min {
        return Err(Error::InvalidParameters(format!(
            "window minimum {} must exceed the well bottom {v_min}",
            window.min
        )));
    }
    // count critical points of V inside the sublevel set {V <= E_max}
    let mut changes = 0;
    for w in xs.windows(2) {
        let (a, b) = (poly_eval(&dc, w[0]), poly_eval(&dc, w[1]));
        let inside = poly_eval(&c, w[0]).min(poly_eval(&c, w[1])) <= window.max;
        if inside && (a.signum() != b.signum() || b == 0.0) && !(a == 0.0 && b == 0.0) {
            changes += 1;
        }
    }
    if changes != 1 {
        return Err(Error::InvalidParameters(format!(
            "potential is not a single well below E = {} ({changes} critical points)",
            window.max
        )));
    }

    let cv = c.clone();
    let cp = c.clone();
    let (dcv, ddcv) = (dc.clone(), ddc.clone());
    SymbolModel::new(name, move |x, xi| kinetic * xi * xi + poly_eval(&cp, x), PhaseSpacePoint::new(x0, 0.0), window)
        .with_derivatives(move |i, j, x, xi| match (i, j) {
            (1, 0) => poly_eval(&dcv, x),
            (0, 1) => 2.0 * kinetic * xi,
            (2, 0) => poly_eval(&ddcv, x),
            (1, 1) => 0.0,
            (0, 2) => 2.0 * kinetic,
            _ => f64::NAN,
        })
        .with_schrodinger_form(kinetic, move |x| poly_eval(&cv, x))
        .with_params(params)
        .validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(v: &[f64]) -> ParamValue {
        ParamValue::List(v.to_vec())
    }

    #[test]
    fn harmonic_level_zero() {
        let m = catalog_build("harmonic", &Params::new()).unwrap();
        assert_eq!(m.eval_symbol(0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(m.well_seed(), PhaseSpacePoint::new(0.0, 0.0));
        assert!(m.p1_is_zero() && m.p2_is_zero());
    }

    #[test]
    fn zero_subprincipal() {
        let m = catalog_build("quartic", &Params::new()).unwrap();
        assert_eq!(m.eval_symbol(1, 0.3, -2.0).unwrap(), 0.0);
    }

    #[test]
    fn quartic_level_zero() {
        let m = catalog_build("quartic", &Params::new()).unwrap();
        assert_eq!(m.eval_symbol(0, 1.0, 2.0).unwrap(), 5.0);
        assert_eq!(m.well_seed(), PhaseSpacePoint::new(0.0, 0.0));
    }

    #[test]
    fn bad_level() {
        let m = catalog_build("quartic", &Params::new()).unwrap();
        assert_eq!(m.eval_symbol(3, 0.0, 0.0).unwrap_err(), Error::UnsupportedLevel(3));
    }

    #[test]
    fn derivative_examples() {
        let h = catalog_build("harmonic", &Params::new()).unwrap();
        assert_eq!(h.eval_derivative(2, 0, 0.7, -0.2).unwrap(), 1.0);
        assert_eq!(h.eval_derivative(1, 1, 0.7, -0.2).unwrap(), 0.0);
        let q = catalog_build("quartic", &Params::new()).unwrap();
        assert_eq!(q.eval_derivative(2, 0, 0.5, 0.0).unwrap(), 3.0);
        assert_eq!(q.eval_derivative(0, 0, 0.5, 0.3).unwrap(), q.p0(0.5, 0.3).unwrap());
        assert!(matches!(q.eval_derivative(2, 1, 0.0, 0.0), Err(Error::UnsupportedOrder { i: 2, j: 1 })));
    }

    #[test]
    fn shifts_add_constant_terms() {
        let mut p = Params::new();
        p.insert("c".into(), ParamValue::Scalar(0.25));
        let m = catalog_build("harmonic_shift1", &p).unwrap();
        assert_eq!(m.p1(3.0, -1.0).unwrap(), 0.25);
        assert!(m.p2_is_zero());
        let m2 = catalog_build("harmonic_shift2", &p).unwrap();
        assert_eq!(m2.p2(0.0, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn unknown_name_and_params() {
        assert_eq!(
            catalog_build("morse", &Params::new()).unwrap_err(),
            Error::UnknownSymbolName("morse".into())
        );
        let mut p = Params::new();
        p.insert("omega".into(), ParamValue::Scalar(2.0));
        assert!(matches!(catalog_build("harmonic", &p), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn double_well_is_rejected() {
        // V = x^4 - x^2 has two minima below E = 1
        let mut p = Params::new();
        p.insert("coeffs".into(), list(&[0.0, 0.0, -1.0, 0.0, 1.0]));
        p.insert("e_min".into(), ParamValue::Scalar(0.1));
        p.insert("e_max".into(), ParamValue::Scalar(1.0));
        assert!(matches!(catalog_build("schrodinger_poly", &p), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn odd_degree_is_rejected() {
        let mut p = Params::new();
        p.insert("coeffs".into(), list(&[0.0, 0.0, 1.0, 1.0]));
        assert!(matches!(catalog_build("schrodinger_poly", &p), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn shifted_well_seed() {
        // V = (x - 1)^2 + 0.5
        let mut p = Params::new();
        p.insert("coeffs".into(), list(&[1.5, -2.0, 1.0]));
        let m = catalog_build("schrodinger_poly", &p).unwrap();
        assert!((m.well_seed().x - 1.0).abs() < 1e-12);
        assert!((m.energy_window().min - 0.51).abs() < 1e-12);
        let (k, v) = m.schrodinger_potential(0.1).unwrap();
        assert_eq!(k, 1.0);
        assert!((v(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fd_backend_without_analytic_derivatives() {
        let m = SymbolModel::new(
            "rotated",
            |x, xi| 0.5 * (x * x + xi * xi) + 0.1 * x * xi,
            PhaseSpacePoint::new(0.0, 0.0),
            Interval::new(0.1, 1.0),
        );
        assert!(!m.has_analytic_derivatives());
        assert!((m.eval_derivative(1, 1, 0.3, 0.4).unwrap() - 0.1).abs() < 1e-9);
        assert!((m.eval_derivative(1, 0, 0.3, 0.4).unwrap() - 0.34).abs() < 1e-10);
        let a = m.fd_mixed_x_first(0.3, 0.4).unwrap();
        let b = m.fd_mixed_xi_first(0.3, 0.4).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn non_finite_is_reported() {
        let m = SymbolModel::new("log", |x, _| x.ln(), PhaseSpacePoint::new(1.0, 0.0), Interval::new(0.5, 1.0));
        assert!(matches!(m.p0(-1.0, 0.0), Err(Error::NonFiniteEvaluation { .. })));
    }
}
