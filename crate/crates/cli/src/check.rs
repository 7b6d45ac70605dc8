//! Invariant suites behind `bs check`.

use std::f64::consts::PI;

use bs_core::actions::{action_coefficients, central_de, ActionOptions};
use bs_core::asymptotics::fixtures::{cubic_gaussian, gaussian_2d_exact, gaussian_2d_mixed, quadratic_gaussian, quadratic_gaussian_exact};
use bs_core::asymptotics::{double_phase_expansion, loglog_slope, oscillatory_quadrature, stationary_phase_1d};
use bs_core::orbit::trace_orbit;
use bs_core::symbols::catalog_defaults;
use bs_core::wkb::{build_branch, wkb_residual, wronskian_flux, Branch, WkbCombo, WkbResidualOptions};
use bs_core::{catalog_build, Interval, OrbitOptions, ParamValue, Params, SymbolModel};
use clap::ValueEnum;
use num_complex::Complex64;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Orbit,
    Actions,
    Wkb,
    Asymptotics,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

fn row(suite: &'static str, name: impl Into<String>, value: f64, bound: &str, pass: bool) -> CheckRow {
    CheckRow { suite, name: name.into(), value, bound: bound.into(), pass }
}

fn at_most(suite: &'static str, name: impl Into<String>, value: f64, tol: f64) -> CheckRow {
    row(suite, name, value, &format!("<= {tol:e}"), value <= tol)
}

fn energies(w: Interval, count: usize) -> Vec<f64> {
    (1..=count).map(|k| w.min + w.width() * k as f64 / (count + 1) as f64).collect()
}

fn with_c(name: &str, c: f64) -> Result<SymbolModel, CliError> {
    let mut p = Params::new();
    p.insert("c".into(), ParamValue::Scalar(c));
    catalog_build(name, &p).map_err(|e| CliError::Config(e.to_string()))
}

fn orbit_suite() -> Result<Vec<CheckRow>, CliError> {
    let opts = OrbitOptions::default();
    let mut out = Vec::new();
    for model in catalog_defaults() {
        let w = model.energy_window();
        let step = 1e-4 * w.width();
        let mut worst: f64 = 0.0;
        for e in energies(w, 10) {
            let stage = CliError::stage(format!("orbit {}", model.name()));
            let period = trace_orbit(&model, e, &opts).map_err(stage)?.period;
            let stage = CliError::stage(format!("orbit {}", model.name()));
            let ds = central_de(|x| Ok(trace_orbit(&model, x, &opts)?.area_action()), e, step).map_err(stage)?;
            worst = worst.max((ds - period).abs() / period);
        }
        out.push(at_most("orbit", format!("{} dS0/dE = T (rel)", model.name()), worst, 1e-6));
    }
    let harmonic = catalog_build("harmonic", &Params::new()).expect("catalog symbol");
    let mut worst: f64 = 0.0;
    for e in energies(harmonic.energy_window(), 10) {
        let o = trace_orbit(&harmonic, e, &opts).map_err(CliError::stage("orbit harmonic"))?;
        worst = worst.max((o.period - 2.0 * PI).abs());
    }
    out.push(at_most("orbit", "harmonic T = 2π", worst, 1e-9));
    Ok(out)
}

fn actions_suite() -> Result<Vec<CheckRow>, CliError> {
    let opts = ActionOptions::default();
    let harmonic = catalog_build("harmonic", &Params::new()).expect("catalog symbol");
    let (mut s0, mut s1, mut s2): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for e in energies(Interval::new(0.1, 3.0), 10) {
        let a = action_coefficients(&harmonic, e, &opts).map_err(CliError::stage("actions harmonic"))?;
        s0 = s0.max((a.s0 - 2.0 * PI * e).abs() / (2.0 * PI * e));
        s1 = s1.max((a.s1 + PI).abs());
        s2 = s2.max(a.s2.abs());
    }
    let mut out = vec![
        at_most("actions", "harmonic S0 = 2πE (rel)", s0, 1e-8),
        at_most("actions", "harmonic S1 = -π", s1, 1e-12),
        at_most("actions", "harmonic |S2|", s2, 1e-6),
    ];
    let c = 0.3;
    let shift1 = with_c("harmonic_shift1", c)?;
    let shift2 = with_c("harmonic_shift2", c)?;
    let (mut d1, mut d2): (f64, f64) = (0.0, 0.0);
    for e in energies(Interval::new(0.1, 3.0), 5) {
        let a = action_coefficients(&shift1, e, &opts).map_err(CliError::stage("actions harmonic_shift1"))?;
        d1 = d1.max((a.s1 + PI + 2.0 * PI * c).abs());
        let b = action_coefficients(&shift2, e, &opts).map_err(CliError::stage("actions harmonic_shift2"))?;
        d2 = d2.max((b.s2 + 2.0 * PI * c).abs());
    }
    out.push(at_most("actions", "shift1 S1 = -π - 2πc", d1, 1e-8));
    out.push(at_most("actions", "shift2 S2 = -2πc", d2, 1e-6));
    Ok(out)
}

fn wkb_suite() -> Result<Vec<CheckRow>, CliError> {
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut out = Vec::new();
    for (name, e) in [("harmonic", 0.5), ("quartic", 1.0), ("anharmonic", 1.0)] {
        let model = catalog_build(name, &Params::new()).expect("catalog symbol");
        let stage = || CliError::stage(format!("wkb {name}"));
        let plus = build_branch(&model, e, 0.1, Branch::Plus, 0.1, 101).map_err(stage())?;
        out.push(at_most("wkb", format!("{name} transport identity"), plus.transport_identity_error(&model).map_err(stage())?, 1e-8));

        let mut residuals = Vec::new();
        let mut flux_ok = true;
        let mut flux_ratio: f64 = 0.0;
        for &h in &hs {
            let r = wkb_residual(&model, e, h, WkbCombo::Plus, &WkbResidualOptions::default()).map_err(stage())?;
            residuals.push(r.residual);
            let b = build_branch(&model, e, h, Branch::Plus, 0.1, 101).map_err(stage())?;
            let inner = &b.x_grid[2..b.len() - 2];
            let mid = wronskian_flux(&model, &b, &b, inner[inner.len() / 2]).map_err(stage())?;
            let mut spread: f64 = 0.0;
            for &x in inner {
                spread = spread.max((wronskian_flux(&model, &b, &b, x).map_err(stage())? - mid).norm());
            }
            flux_ratio = flux_ratio.max(spread / h);
            flux_ok &= spread <= h;
        }
        let slope = loglog_slope(&hs, &residuals);
        out.push(row("wkb", format!("{name} residual slope"), slope, ">= 1.7", slope >= 1.7));
        out.push(row("wkb", format!("{name} flux spread / h"), flux_ratio, "<= 1", flux_ok));
    }
    Ok(out)
}

fn asymptotics_suite() -> Result<Vec<CheckRow>, CliError> {
    let hs = [0.4, 0.2, 0.1, 0.05];
    let mut out = Vec::new();
    let stage = || CliError::stage("asymptotics");

    let quad = quadratic_gaussian();
    for order in [0usize, 1] {
        let target = (order + 1) as f64;
        let mut errs = Vec::new();
        for &h in &hs {
            let exact = quadratic_gaussian_exact(h);
            errs.push((stationary_phase_1d(&quad, h, order).map_err(stage())? - exact).norm() / exact.norm());
        }
        let s = loglog_slope(&hs, &errs);
        out.push(row("asymptotics", format!("gaussian order {order} slope"), s, &format!("{target} ± 0.3"), (s - target).abs() <= 0.3));
    }

    let cubic = cubic_gaussian();
    for order in [0usize, 1] {
        let target = (order + 1) as f64;
        let mut errs = Vec::new();
        for &h in &hs {
            let (phase, amp) = (cubic[0].phase.clone(), cubic[0].amplitude.clone());
            let q = oscillatory_quadrature(|x| phase(x), |x| amp(x), h, Interval::new(-9.0, 9.0), None).map_err(stage())?;
            let mut sp = Complex64::new(0.0, 0.0);
            for p in &cubic {
                sp += stationary_phase_1d(p, h, order).map_err(stage())?;
            }
            errs.push((sp - q).norm() / q.norm());
        }
        let s = loglog_slope(&hs, &errs);
        out.push(row("asymptotics", format!("cubic gaussian order {order} slope"), s, &format!("{target} ± 0.3"), (s - target).abs() <= 0.3));
    }

    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| (double_phase_expansion(gaussian_2d_mixed, h, 2) - gaussian_2d_exact(h)).norm())
        .collect();
    let s = loglog_slope(&hs, &errs);
    out.push(row("asymptotics", "double expansion K=2 slope", s, ">= 2.5", s >= 2.5));
    Ok(out)
}

/// Runs the requested suite; numerical failures abort the suite.
pub fn run_suite(suite: Suite) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    if matches!(suite, Suite::Orbit | Suite::All) {
        rows.extend(orbit_suite()?);
    }
    if matches!(suite, Suite::Actions | Suite::All) {
        rows.extend(actions_suite()?);
    }
    if matches!(suite, Suite::Wkb | Suite::All) {
        rows.extend(wkb_suite()?);
    }
    if matches!(suite, Suite::Asymptotics | Suite::All) {
        rows.extend(asymptotics_suite()?);
    }
    Ok(rows)
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in rows {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        s.push_str(&format!("{verdict}  {:<12} {:<width$}  {:>12.4e}  {}\n", r.suite, r.name, r.value, r.bound));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let total = if failed == 0 { "PASS" } else { "FAIL" };
    s.push_str(&format!("{total}  {} checks, {failed} failed\n", rows.len()));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bs_core::symbols::CATALOG_NAMES;

    #[test]
    fn catalog_names_are_covered() {
        assert_eq!(catalog_defaults().len(), CATALOG_NAMES.len());
    }

    #[test]
    fn table_reports_failures() {
        let rows = vec![at_most("orbit", "a", 1.0, 2.0), at_most("orbit", "b", 3.0, 2.0)];
        let t = format_table(&rows);
        assert!(t.starts_with("PASS"));
        assert!(t.lines().nth(1).unwrap().starts_with("FAIL"));
        assert!(t.trim_end().ends_with("2 checks, 1 failed"));
    }

    #[test]
    fn asymptotics_suite_passes() {
        let rows = asymptotics_suite().unwrap();
        assert!(rows.iter().all(|r| r.pass), "{}", format_table(&rows));
    }
}
