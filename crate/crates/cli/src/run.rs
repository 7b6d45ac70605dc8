//! The `run` pipeline: BS roots, oracle spectrum and comparison per `h`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bs_core::asymptotics::loglog_slope;
use bs_core::oracle::{self, fd_spectrum, weyl_spectrum, GridOptions, WeylGrid};
use bs_core::quantize::{gram_eval, solve_bs, BsOptions, BsSolution};
use bs_core::wkb::{build_branch, wkb_residual, wronskian_flux, Branch, WkbCombo, WkbResidualOptions};
use bs_core::actions::ActionOptions;
use bs_core::{catalog_build, OrbitOptions, SymbolModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

const FD_POINTS: usize = 4096;
const WKB_NODES: usize = 201;
const GAP_TOL: f64 = 1e-7;
const FD_TOL: f64 = 1e-5;
const TRANSPORT_TOL: f64 = 1e-8;
const DET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub n: i64,
    #[serde(rename = "E_bs0")]
    pub e_bs0: Option<f64>,
    #[serde(rename = "E_bs1")]
    pub e_bs1: Option<f64>,
    #[serde(rename = "E_bs2")]
    pub e_bs2: Option<f64>,
    #[serde(rename = "E_oracle")]
    pub e_oracle: Option<f64>,
    pub err0: Option<f64>,
    pub err1: Option<f64>,
    pub err2: Option<f64>,
}

impl Row {
    fn bs(&self, order: usize) -> Option<f64> {
        [self.e_bs0, self.e_bs1, self.e_bs2][order]
    }

    pub fn err(&self, order: usize) -> Option<f64> {
        [self.err0, self.err1, self.err2][order]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WkbSummary {
    pub energy: f64,
    pub residual: f64,
    pub transport_error: f64,
    /// Largest deviation of the `+` branch self-flux from its mid-window value.
    pub flux_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HTable {
    pub h: f64,
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub n_grid: usize,
    pub rows: Vec<Row>,
    /// Per order, `max |E_bs - E_oracle|` over the paired rows.
    pub max_error: BTreeMap<usize, f64>,
    pub bs_count: BTreeMap<usize, usize>,
    pub oracle_count: usize,
    pub convergence_gap: Option<f64>,
    pub fd_gap: Option<f64>,
    pub gram_det_range: Option<[f64; 2]>,
    pub wkb: Option<WkbSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slope {
    pub quantity: String,
    pub order: Option<usize>,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub h: Option<f64>,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedStage {
    pub h: f64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub bs_core_version: String,
    pub bs_cli_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub status: String,
    pub failed_stage: Option<FailedStage>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
    pub config: RunConfig,
    pub tables: Vec<HTable>,
    pub slopes: Vec<Slope>,
    pub invariants: Vec<Verdict>,
}

impl RunReport {
    pub fn invariants_pass(&self) -> bool {
        self.invariants.iter().all(|v| v.pass)
    }
}

fn orbit_options(cfg: &RunConfig) -> OrbitOptions {
    OrbitOptions { rk_tol: cfg.orbit.rk_tol, n_samples: cfg.orbit.n_samples, ..OrbitOptions::default() }
}

fn bs_options(cfg: &RunConfig) -> BsOptions {
    BsOptions { actions: ActionOptions { de_step: cfg.actions.de_step, orbit: orbit_options(cfg) }, ..BsOptions::default() }
}

fn merge_rows(solutions: &BTreeMap<usize, Vec<BsSolution>>, first_index: usize, oracle: &[f64]) -> Vec<Row> {
    let mut rows: BTreeMap<i64, Row> = BTreeMap::new();
    let blank = |n: i64| Row { n, e_bs0: None, e_bs1: None, e_bs2: None, e_oracle: None, err0: None, err1: None, err2: None };
    for (order, sols) in solutions {
        for s in sols {
            let row = rows.entry(s.n).or_insert_with(|| blank(s.n));
            match order {
                0 => row.e_bs0 = Some(s.energy),
                1 => row.e_bs1 = Some(s.energy),
                _ => row.e_bs2 = Some(s.energy),
            }
        }
    }
    for (k, &e) in oracle.iter().enumerate() {
        let n = (first_index + k) as i64;
        rows.entry(n).or_insert_with(|| blank(n)).e_oracle = Some(e);
    }
    for row in rows.values_mut() {
        if let Some(eo) = row.e_oracle {
            row.err0 = row.e_bs0.map(|e| (e - eo).abs());
            row.err1 = row.e_bs1.map(|e| (e - eo).abs());
            row.err2 = row.e_bs2.map(|e| (e - eo).abs());
        }
    }
    rows.into_values().collect()
}

fn wkb_summary(model: &SymbolModel, e: f64, h: f64, margin: f64) -> bs_core::Result<WkbSummary> {
    let residual = wkb_residual(model, e, h, WkbCombo::Plus, &WkbResidualOptions { margin, grid: None })?.residual;
    let plus = build_branch(model, e, h, Branch::Plus, margin, WKB_NODES)?;
    let transport_error = plus.transport_identity_error(model)?;
    let inner = &plus.x_grid[2..plus.len() - 2];
    let mid = wronskian_flux(model, &plus, &plus, inner[inner.len() / 2])?;
    let mut flux_spread: f64 = 0.0;
    for &x in inner {
        flux_spread = flux_spread.max((wronskian_flux(model, &plus, &plus, x)? - mid).norm());
    }
    Ok(WkbSummary { energy: e, residual, transport_error, flux_spread })
}

/// Runs every stage at one `h`; the error names the failing stage.
pub fn run_h(cfg: &RunConfig, model: &SymbolModel, h: f64) -> Result<HTable, CliError> {
    let window = cfg.window_interval();
    let bs_opts = bs_options(cfg);
    let mut solutions = BTreeMap::new();
    for &order in &cfg.bs.orders {
        let sols = solve_bs(model, h, window, order, cfg.n_range(), &bs_opts)
            .map_err(CliError::stage(format!("bs order {order}")))?;
        solutions.insert(order, sols);
    }

    let grid_opts = GridOptions {
        half_length: cfg.box_length(),
        n: cfg.oracle.n,
        max_n: oracle::MAX_N.max(cfg.oracle.n),
        check_convergence: cfg.oracle.dual_check,
        ..GridOptions::default()
    };
    let spec = weyl_spectrum(model, h, window, &grid_opts).map_err(CliError::stage("oracle"))?;
    let fd_gap = if cfg.oracle.dual_check && model.schrodinger_form().is_some() {
        let grid = WeylGrid::new(spec.grid.half_length, FD_POINTS).map_err(CliError::stage("oracle fd"))?;
        let fd = fd_spectrum(model, h, window, &grid).map_err(CliError::stage("oracle fd"))?;
        Some(if fd.first_index == spec.first_index && fd.eigenvalues.len() == spec.eigenvalues.len() {
            fd.eigenvalues.iter().zip(&spec.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        })
    } else {
        None
    };

    let rows = merge_rows(&solutions, spec.first_index, &spec.eigenvalues);
    let mut max_error = BTreeMap::new();
    for &order in &cfg.bs.orders {
        if let Some(m) = rows.iter().filter_map(|r| r.err(order)).reduce(f64::max) {
            max_error.insert(order, m);
        }
    }
    let bs_count = solutions.iter().map(|(&k, v)| (k, v.len())).collect();

    let gram_det_range = match solutions.get(&1) {
        Some(sols) if !sols.is_empty() => {
            let orbit_opts = orbit_options(cfg);
            let mut range = [f64::INFINITY, f64::NEG_INFINITY];
            for s in sols {
                let det = gram_eval(model, s.energy, h, &orbit_opts).map_err(CliError::stage("gram"))?.det;
                range = [range[0].min(det), range[1].max(det)];
            }
            Some(range)
        }
        _ => None,
    };

    let wkb = if cfg.wkb.enabled {
        let e = 0.5 * (window.min + window.max);
        Some(wkb_summary(model, e, h, cfg.wkb.margin).map_err(CliError::stage("wkb"))?)
    } else {
        None
    };

    Ok(HTable {
        h,
        half_length: spec.grid.half_length,
        n_grid: spec.grid.n,
        rows,
        max_error,
        bs_count,
        oracle_count: spec.eigenvalues.len(),
        convergence_gap: spec.convergence_gap,
        fd_gap,
        gram_det_range,
        wkb,
    })
}

fn fit(quantity: &str, order: Option<usize>, points: &[(f64, f64)]) -> Option<Slope> {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, y)| y > 0.0 && y.is_finite()).collect();
    if usable.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    Some(Slope { quantity: quantity.into(), order, slope: loglog_slope(&xs, &ys), points: xs.len() })
}

fn slopes(cfg: &RunConfig, tables: &[HTable]) -> Vec<Slope> {
    let mut out = Vec::new();
    for &order in &cfg.bs.orders {
        let pts: Vec<(f64, f64)> = tables.iter().filter_map(|t| t.max_error.get(&order).map(|&e| (t.h, e))).collect();
        out.extend(fit("max_abs_err", Some(order), &pts));
    }
    let wkb: Vec<(f64, f64)> = tables.iter().filter_map(|t| t.wkb.as_ref().map(|w| (t.h, w.residual))).collect();
    out.extend(fit("wkb_residual", None, &wkb));
    out
}

fn invariants(tables: &[HTable]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let mut push = |name: &str, h: f64, value: f64, tol: f64| {
        out.push(Verdict { name: name.into(), h: Some(h), value, tol, pass: value <= tol })
    };
    for t in tables {
        if let Some(g) = t.convergence_gap {
            push("oracle_n_doubling", t.h, g, GAP_TOL);
        }
        if let Some(g) = t.fd_gap {
            push("weyl_vs_fd", t.h, g, FD_TOL);
        }
        if let Some([lo, hi]) = t.gram_det_range {
            let outside = (-1.0 - lo).max(hi).max(0.0);
            push("gram_det_in_range", t.h, outside, DET_SLACK);
        }
        if let Some(w) = &t.wkb {
            push("wkb_transport", t.h, w.transport_error, TRANSPORT_TOL);
            push("wkb_flux_spread", t.h, w.flux_spread, t.h);
        }
    }
    out
}

/// Executes the pipeline over all `h_values` on at most `jobs` threads.
/// Tables come back in config order whatever the scheduling.
pub fn run(cfg: &RunConfig, jobs: usize) -> RunReport {
    let model = catalog_build(&cfg.problem.name, &cfg.problem.params).expect("resolved config builds its model");
    let hs = &cfg.h_values;
    let results: Vec<Mutex<Option<Result<HTable, CliError>>>> = hs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, hs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= hs.len() {
                    break;
                }
                let r = run_h(cfg, &model, hs[k]);
                *results[k].lock().expect("result slot") = Some(r);
            });
        }
    });

    let mut tables = Vec::new();
    let mut failed_stage = None;
    for (k, slot) in results.into_iter().enumerate() {
        match slot.into_inner().expect("result slot").expect("every h was scheduled") {
            Ok(t) => tables.push(t),
            Err(e) => {
                if failed_stage.is_none() {
                    let stage = match &e {
                        CliError::Numerical { stage, .. } => stage.clone(),
                        _ => "run".into(),
                    };
                    let message = match &e {
                        CliError::Numerical { source, .. } => source.to_string(),
                        other => other.to_string(),
                    };
                    failed_stage = Some(FailedStage { h: hs[k], stage, message });
                }
            }
        }
    }

    let mut warnings = Vec::new();
    if failed_stage.is_none() && tables.iter().all(|t| t.rows.is_empty()) {
        let w = cfg.window_interval();
        warnings.push(format!("no eigenvalues in window [{}, {}] at any h", w.min, w.max));
    }
    let slopes = slopes(cfg, &tables);
    let invariants = invariants(&tables);
    let status = if failed_stage.is_some() {
        "FAILED"
    } else if invariants.iter().all(|v| v.pass) {
        "OK"
    } else {
        "INVARIANT_FAILURE"
    };
    RunReport {
        status: status.into(),
        failed_stage,
        warnings,
        provenance: Provenance {
            config_hash: cfg.hash(),
            bs_core_version: bs_core::VERSION.into(),
            bs_cli_version: env!("CARGO_PKG_VERSION").into(),
        },
        config: cfg.clone(),
        tables,
        slopes,
        invariants,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn eigenvalues_csv(report: &RunReport) -> String {
    let mut s = String::from("h,n,E_bs0,E_bs1,E_bs2,E_oracle,err0,err1,err2\n");
    for t in &report.tables {
        for r in &t.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                t.h,
                r.n,
                cell(r.bs(0)),
                cell(r.bs(1)),
                cell(r.bs(2)),
                cell(r.e_oracle),
                cell(r.err0),
                cell(r.err1),
                cell(r.err2)
            );
        }
    }
    s
}

pub fn slopes_csv(report: &RunReport) -> String {
    let mut s = String::from("quantity,order,slope,points\n");
    for sl in &report.slopes {
        let order = sl.order.map(|o| o.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", sl.quantity, order, sl.slope, sl.points);
    }
    s
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

/// Writes the report artifacts into `dir`; `metadata` is the only file
/// carrying run-dependent values such as timestamps.
pub fn write_outputs(report: &RunReport, dir: &Path, metadata: &serde_json::Value) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if report.config.writes("csv") {
        write(&dir.join("eigenvalues.csv"), &eigenvalues_csv(report))?;
        write(&dir.join("slopes.csv"), &slopes_csv(report))?;
    }
    if report.config.writes("json") {
        let body = serde_json::to_string_pretty(report).expect("report serializes");
        write(&dir.join("report.json"), &(body + "\n"))?;
    }
    let meta = serde_json::to_string_pretty(metadata).expect("metadata serializes");
    write(&dir.join("metadata.json"), &(meta + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solution(n: i64, order: usize, energy: f64) -> BsSolution {
        BsSolution { n, h: 0.1, order, energy, residual: 0.0 }
    }

    #[test]
    fn rows_align_by_quantum_number() {
        let mut sols = BTreeMap::new();
        sols.insert(0, vec![solution(1, 0, 0.151), solution(2, 0, 0.251)]);
        sols.insert(1, vec![solution(1, 1, 0.15)]);
        let rows = merge_rows(&sols, 1, &[0.1500001, 0.2500001, 0.35]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].n, 1);
        assert!((rows[0].err0.unwrap() - 0.0009999).abs() < 1e-12);
        assert!((rows[0].err1.unwrap() - 1e-7).abs() < 1e-12);
        assert_eq!(rows[1].e_bs1, None);
        assert_eq!(rows[1].err1, None);
        assert_eq!(rows[2].e_bs0, None);
        assert_eq!(rows[2].e_oracle, Some(0.35));
    }

    #[test]
    fn errors_are_recomputable_from_rows() {
        let mut sols = BTreeMap::new();
        sols.insert(2, vec![solution(0, 2, 0.05), solution(1, 2, 0.15)]);
        for r in merge_rows(&sols, 0, &[0.0500003, 0.1499]) {
            assert_eq!(r.err2, Some((r.e_bs2.unwrap() - r.e_oracle.unwrap()).abs()));
        }
    }

    #[test]
    fn slope_fit_skips_missing_points() {
        assert!(fit("x", None, &[(0.1, 1e-3)]).is_none());
        let s = fit("x", Some(2), &[(0.2, 8e-3), (0.1, 1e-3), (0.05, 0.0)]).unwrap();
        assert_eq!(s.points, 2);
        assert!((s.slope - 3.0).abs() < 1e-12);
    }
}
