//! Acceptance criteria 1-9. Runs as a plain binary (`harness = false`) so the
//! PASS/FAIL lines are always printed; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use bs_core::actions::{action_coefficients, central_de, ActionOptions};
use bs_core::asymptotics::fixtures::{cubic_gaussian, gaussian_2d_exact, gaussian_2d_mixed};
use bs_core::asymptotics::{double_phase_expansion, loglog_slope, oscillatory_quadrature, stationary_phase_1d};
use bs_core::oracle::{fd_spectrum, weyl_spectrum, weyl_spectrum_on, GridOptions, WeylGrid};
use bs_core::orbit::trace_orbit;
use bs_core::quantize::{compare_with_oracle, gram_eval, gram_roots, solve_bs, BsOptions, BsSolution};
use bs_core::symbols::catalog_defaults;
use bs_core::wkb::{build_branch, wkb_residual, wronskian_flux, Branch, WkbCombo, WkbResidualOptions};
use bs_core::{catalog_build, Interval, OrbitOptions, ParamValue, Params, SymbolModel};
use num_complex::Complex64;

type Outcome = Result<Vec<String>, String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn model(name: &str) -> SymbolModel {
    catalog_build(name, &Params::new()).expect("catalog symbol")
}

fn model_with(name: &str, key: &str, v: f64) -> SymbolModel {
    let mut p = Params::new();
    p.insert(key.into(), ParamValue::Scalar(v));
    catalog_build(name, &p).expect("catalog symbol")
}

fn bs(m: &SymbolModel, h: f64, w: Interval, order: usize) -> Result<Vec<BsSolution>, String> {
    solve_bs(m, h, w, order, None, &BsOptions::default()).map_err(|e| format!("solve_bs {} h={h}: {e}", m.name()))
}

/// Collects failed sub-checks; the criterion passes only if none failed.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }

    fn finish(self) -> Outcome {
        if self.failed.is_empty() {
            Ok(self.notes)
        } else {
            Err(self.failed.join("; ") + if self.notes.is_empty() { "" } else { " | ok: " } + &self.notes.join("; "))
        }
    }
}

fn c1_harmonic_exactness() -> Outcome {
    let m = model("harmonic");
    let h = 0.1;
    let w = Interval::new(0.01, 1.0);
    let mut c = Checks::default();
    let roots = bs(&m, h, w, 1)?;
    let exact: Vec<f64> = (0..10).map(|n| h * (n as f64 + 0.5)).collect();
    let bs_err = roots.iter().zip(&exact).map(|(r, e)| (r.energy - e).abs()).fold(0.0, f64::max);
    c.check(roots.len() == 10 && roots.iter().enumerate().all(|(k, r)| r.n == k as i64), format!("{} roots n=0..9", roots.len()));
    c.check(bs_err <= 1e-9, format!("BS max err {bs_err:.2e} <= 1e-9"));
    let grid = WeylGrid::new(6.0, 256).map_err(|e| e.to_string())?;
    let spec = weyl_spectrum_on(&m, h, w, &grid, false).map_err(|e| e.to_string())?;
    let or_err = spec.eigenvalues.iter().zip(&exact).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
    c.check(spec.eigenvalues.len() == 10 && spec.first_index == 0, format!("{} oracle eigenvalues", spec.eigenvalues.len()));
    c.check(or_err <= 2e-6, format!("oracle (N=256, L=6) max err {or_err:.2e} <= 2e-6"));
    c.finish()
}

fn c2_harmonic_actions() -> Outcome {
    let m = model("harmonic");
    let opts = ActionOptions::default();
    let mut c = Checks::default();
    let (mut s0, mut s2): (f64, f64) = (0.0, 0.0);
    let mut s1_exact = true;
    for k in 0..10 {
        let e = 0.1 + 0.35 * k as f64;
        let a = action_coefficients(&m, e, &opts).map_err(|e| e.to_string())?;
        s0 = s0.max((a.s0 - 2.0 * PI * e).abs() / (2.0 * PI * e));
        s1_exact &= a.s1 == -PI;
        s2 = s2.max(a.s2.abs());
    }
    c.check(s0 <= 1e-8, format!("S0 rel err {s0:.2e} <= 1e-8"));
    c.check(s1_exact, "S1 == -π".into());
    c.check(s2 <= 1e-6, format!("|S2| {s2:.2e} <= 1e-6"));
    c.finish()
}

fn shift_check(c: &mut Checks, name: &str, order: usize, power: i32) -> Result<(), String> {
    let cval = 0.3;
    let shifted = model_with(name, "c", cval);
    let base = model("harmonic");
    let w = Interval::new(0.5, 3.0);
    for h in [0.2f64, 0.1, 0.05] {
        let shift = h.powi(power) * cval;
        let a = bs(&base, h, Interval::new(w.min - shift, w.max), order)?;
        let b = bs(&shifted, h, w, order)?;
        let mut worst: f64 = 0.0;
        let mut paired = 0;
        for sb in &b {
            if let Some(sa) = a.iter().find(|s| s.n == sb.n) {
                worst = worst.max((sb.energy - sa.energy - shift).abs());
                paired += 1;
            }
        }
        c.check(paired == b.len() && paired > 0 && worst <= 1e-8, format!("{name} h={h}: shift err {worst:.1e} <= 1e-8 ({paired} levels)"));
        let spec = weyl_spectrum(&shifted, h, w, &GridOptions::default()).map_err(|e| e.to_string())?;
        let table = compare_with_oracle(&b, &spec);
        let max = table.max_error.unwrap_or(f64::INFINITY);
        c.check(table.count_mismatch.is_none() && max <= 1e-6, format!("{name} h={h}: oracle err {max:.1e} <= 1e-6"));
    }
    Ok(())
}

fn c3_exact_shifts() -> Outcome {
    let mut c = Checks::default();
    shift_check(&mut c, "harmonic_shift1", 1, 1)?;
    shift_check(&mut c, "harmonic_shift2", 2, 2)?;
    c.finish()
}

fn c4_quartic_convergence() -> Outcome {
    let m = model("quartic");
    let w = Interval::new(0.5, 3.0);
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut c = Checks::default();
    let mut err2s = Vec::new();
    for &h in &hs {
        let spec = weyl_spectrum(&m, h, w, &GridOptions::default()).map_err(|e| e.to_string())?;
        let mut errs = [0.0; 3];
        for (order, slot) in errs.iter_mut().enumerate() {
            let t = compare_with_oracle(&bs(&m, h, w, order)?, &spec);
            *slot = t.max_error.ok_or_else(|| format!("no paired levels at h={h}"))?;
        }
        err2s.push(errs[2]);
        c.check(errs[2] < errs[1], format!("h={h}: err2 {:.2e} < err1 {:.2e}", errs[2], errs[1]));
        c.check(errs[1] < errs[0], format!("h={h}: err1 {:.2e} < err0 {:.2e}", errs[1], errs[0]));
    }
    let slope = loglog_slope(&hs, &err2s);
    c.check(slope >= 2.5, format!("order-2 slope {slope:.3} >= 2.5"));
    c.finish()
}

fn c5_period_identity() -> Outcome {
    let opts = OrbitOptions::default();
    let mut c = Checks::default();
    for m in catalog_defaults() {
        let w = m.energy_window();
        let mut worst: f64 = 0.0;
        for k in 1..=10 {
            let e = w.min + w.width() * k as f64 / 11.0;
            let t = trace_orbit(&m, e, &opts).map_err(|e| e.to_string())?.period;
            let ds = central_de(|x| Ok(trace_orbit(&m, x, &opts)?.area_action()), e, 1e-4 * w.width())
                .map_err(|e| e.to_string())?;
            worst = worst.max((ds - t).abs() / t);
        }
        c.check(worst <= 1e-6, format!("{} rel {worst:.1e}", m.name()));
    }
    c.finish()
}

fn c6_gram_equivalence() -> Outcome {
    let opts = OrbitOptions::default();
    let mut c = Checks::default();
    let w = Interval::new(0.02, 3.0);
    for m in [model("harmonic"), model("harmonic_shift1")] {
        for h in [0.2, 0.1, 0.05] {
            let roots = bs(&m, h, w, 1)?;
            let gram = gram_roots(&m, h, w, &opts).map_err(|e| e.to_string())?;
            let worst = if gram.len() == roots.len() {
                gram.iter().zip(&roots).map(|(g, r)| (g - r.energy).abs()).fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            c.check(worst <= 1e-8, format!("{} h={h}: {} roots, max diff {worst:.1e}", m.name(), roots.len()));
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let energies = (0..=200).map(|k| w.min + w.width() * k as f64 / 200.0).chain(roots.iter().map(|r| r.energy));
            for e in energies {
                let det = gram_eval(&m, e, h, &opts).map_err(|e| e.to_string())?.det;
                lo = lo.min(det);
                hi = hi.max(det);
            }
            c.check(lo >= -1.0 && hi <= 0.0, format!("{} h={h}: det in [{lo:.3}, {hi:.1e}]", m.name()));
        }
    }
    c.finish()
}

fn c7_wkb_laws() -> Outcome {
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut c = Checks::default();
    for (m, e) in [(model("harmonic"), 0.5), (model("quartic"), 1.0), (model_with("harmonic_shift1", "c", 0.3), 0.8)] {
        let mut res = Vec::new();
        let mut flux_ratio: f64 = 0.0;
        let mut transport: f64 = 0.0;
        for &h in &hs {
            let r = wkb_residual(&m, e, h, WkbCombo::Plus, &WkbResidualOptions::default()).map_err(|e| e.to_string())?;
            res.push(r.residual);
            let b = build_branch(&m, e, h, Branch::Plus, 0.1, 101).map_err(|e| e.to_string())?;
            transport = transport.max(b.transport_identity_error(&m).map_err(|e| e.to_string())?);
            let inner = &b.x_grid[2..b.len() - 2];
            let f0 = wronskian_flux(&m, &b, &b, inner[inner.len() / 2]).map_err(|e| e.to_string())?;
            for &x in inner {
                let f = wronskian_flux(&m, &b, &b, x).map_err(|e| e.to_string())?;
                flux_ratio = flux_ratio.max((f - f0).norm() / h);
            }
        }
        let slope = loglog_slope(&hs, &res);
        c.check(slope >= 1.7, format!("{} residual slope {slope:.3} >= 1.7", m.name()));
        c.check(transport <= 1e-8, format!("{} transport {transport:.1e} <= 1e-8", m.name()));
        c.check(flux_ratio <= 1.0, format!("{} flux spread/h {flux_ratio:.1e} <= 1", m.name()));
    }
    c.finish()
}

fn c8_stationary_phase() -> Outcome {
    let hs = [0.4, 0.2, 0.1, 0.05];
    let mut c = Checks::default();
    let cubic = cubic_gaussian();
    let mut errs = Vec::new();
    for &h in &hs {
        let (phase, amp) = (cubic[0].phase.clone(), cubic[0].amplitude.clone());
        let q = oscillatory_quadrature(|x| phase(x), |x| amp(x), h, Interval::new(-9.0, 9.0), None).map_err(|e| e.to_string())?;
        let mut sp = Complex64::new(0.0, 0.0);
        for p in &cubic {
            sp += stationary_phase_1d(p, h, 1).map_err(|e| e.to_string())?;
        }
        errs.push((sp - q).norm() / q.norm());
    }
    let slope = loglog_slope(&hs, &errs);
    c.check((slope - 2.0).abs() <= 0.3, format!("cubic SP order-1 slope {slope:.3} in 2 ± 0.3"));

    let mut derrs = Vec::new();
    let mut closed = true;
    for &h in &hs {
        let v = double_phase_expansion(gaussian_2d_mixed, h, 2);
        closed &= (v - Complex64::new(1.0 - 2.0 * h * h, 0.0)).norm() <= 1e-14;
        derrs.push((v - gaussian_2d_exact(h)).norm());
    }
    let dslope = loglog_slope(&hs, &derrs);
    c.check(closed, "K=2 expansion equals 1 - 2h²".into());
    c.check(dslope >= 2.5, format!("double expansion slope {dslope:.3} >= 2.5"));
    c.finish()
}

fn c9_oracle_consistency() -> Outcome {
    let mut c = Checks::default();
    let opts = GridOptions { check_convergence: true, ..GridOptions::default() };
    for m in catalog_defaults() {
        let w = m.energy_window();
        let (mut gap, mut fd_gap): (f64, f64) = (0.0, 0.0);
        for h in [0.2, 0.1, 0.05] {
            let spec = weyl_spectrum(&m, h, w, &opts).map_err(|e| format!("{} h={h}: {e}", m.name()))?;
            gap = gap.max(spec.convergence_gap.unwrap_or(f64::INFINITY));
            if m.schrodinger_form().is_some() {
                let grid = WeylGrid::new(spec.grid.half_length, 4096).map_err(|e| e.to_string())?;
                let fd = fd_spectrum(&m, h, w, &grid).map_err(|e| e.to_string())?;
                let d = if fd.first_index == spec.first_index && fd.eigenvalues.len() == spec.eigenvalues.len() {
                    fd.eigenvalues.iter().zip(&spec.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                } else {
                    f64::INFINITY
                };
                fd_gap = fd_gap.max(d);
            }
        }
        c.check(gap <= 1e-7, format!("{} N-doubling {gap:.1e} <= 1e-7", m.name()));
        if m.schrodinger_form().is_some() {
            c.check(fd_gap <= 1e-5, format!("{} Weyl vs FD {fd_gap:.1e} <= 1e-5", m.name()));
        }
    }
    c.finish()
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "harmonic exactness", budget: Some(Duration::from_secs(5)), run: c1_harmonic_exactness },
    Criterion { id: 2, title: "harmonic action coefficients", budget: Some(Duration::from_secs(5)), run: c2_harmonic_actions },
    Criterion { id: 3, title: "exact perturbation shifts", budget: None, run: c3_exact_shifts },
    Criterion { id: 4, title: "quartic h-convergence", budget: Some(Duration::from_secs(180)), run: c4_quartic_convergence },
    Criterion { id: 5, title: "dS0/dE = T on the catalog", budget: None, run: c5_period_identity },
    Criterion { id: 6, title: "Gram/BS equivalence", budget: None, run: c6_gram_equivalence },
    Criterion { id: 7, title: "WKB residual, transport and flux", budget: None, run: c7_wkb_laws },
    Criterion { id: 8, title: "stationary-phase verifiers", budget: None, run: c8_stationary_phase },
    Criterion { id: 9, title: "oracle self-consistency", budget: None, run: c9_oracle_consistency },
];

fn main() {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for crit in CRITERIA.iter().filter(|c| only.is_none_or(|k| k == c.id)) {
        let start = Instant::now();
        let outcome = (crit.run)();
        let elapsed = start.elapsed();
        let over = crit.budget.filter(|b| elapsed > *b);
        let (verdict, detail) = match (&outcome, over) {
            (Ok(notes), None) => ("PASS", notes.join("; ")),
            (Ok(notes), Some(b)) => ("FAIL", format!("runtime over {b:?}; {}", notes.join("; "))),
            (Err(msg), _) => ("FAIL", msg.clone()),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("{verdict} criterion {} ({}) [{:.2}s]: {detail}", crit.id, crit.title, elapsed.as_secs_f64());
    }
    println!("{} failed", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
