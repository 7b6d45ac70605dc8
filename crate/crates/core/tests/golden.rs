//! Regression against `data/v1`: quartic levels at h = 0.1 in [0.5, 3]. The
//! file holds h^{4/3} e_n with e_n the levels of -d² + y⁴ from a sinc-DVR
//! solve (independent of the crate's oracles).

use bs_core::oracle::{weyl_spectrum, GridOptions};
use bs_core::quantize::{solve_bs, BsOptions};
use bs_core::{catalog_build, Interval, Params};

fn golden() -> Vec<(f64, usize, f64)> {
    let text = include_str!("data/v1/quartic_h0.1.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,index,eigenvalue"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn weyl_oracle_matches_golden() {
    let rows = golden();
    assert_eq!(rows.len(), 10);
    let m = catalog_build("quartic", &Params::new()).unwrap();
    let spec = weyl_spectrum(&m, 0.1, Interval::new(0.5, 3.0), &GridOptions::default()).unwrap();
    assert_eq!(spec.first_index, rows[0].1);
    assert_eq!(spec.eigenvalues.len(), rows.len());
    for ((h, _, e), got) in rows.iter().zip(&spec.eigenvalues) {
        assert_eq!(*h, 0.1);
        assert!((got - e).abs() < 1e-9, "{got} vs {e}");
    }
}

#[test]
fn second_order_roots_match_golden() {
    let m = catalog_build("quartic", &Params::new()).unwrap();
    let roots = solve_bs(&m, 0.1, Interval::new(0.5, 3.0), 2, None, &BsOptions::default()).unwrap();
    for (_, n, e) in golden() {
        let r = roots.iter().find(|r| r.n == n as i64).expect("level present");
        assert!((r.energy - e).abs() < 2e-5, "n={n}: {} vs {e}", r.energy);
    }
}
