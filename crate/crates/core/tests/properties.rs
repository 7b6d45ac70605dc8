use std::f64::consts::PI;

use bs_core::actions::{action_coefficients, ActionOptions};
use bs_core::orbit::trace_orbit;
use bs_core::quantize::gram_eval;
use bs_core::wkb::{build_branch, wronskian_flux, Branch};
use bs_core::{catalog_build, OrbitOptions, ParamValue, Params, SymbolModel};
use proptest::prelude::*;

fn model(name: &str) -> SymbolModel {
    catalog_build(name, &Params::new()).unwrap()
}

fn shift1(c: f64) -> SymbolModel {
    let mut p = Params::new();
    p.insert("c".into(), ParamValue::Scalar(c));
    catalog_build("harmonic_shift1", &p).unwrap()
}

const NAMES: [&str; 4] = ["harmonic", "quartic", "anharmonic", "schrodinger_poly"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gram_det_in_unit_range(e in 0.05f64..3.5, h in 0.02f64..0.3, c in -0.5f64..0.5) {
        let det = gram_eval(&shift1(c), e, h, &OrbitOptions::default()).unwrap().det;
        prop_assert!((-1.0..=0.0).contains(&det), "det = {det}");
    }

    #[test]
    fn orbit_conserves_energy(k in 0usize..4, frac in 0.05f64..0.95) {
        let m = model(NAMES[k]);
        let w = m.energy_window();
        let e = w.min + frac * w.width();
        let o = trace_orbit(&m, e, &OrbitOptions { n_samples: 128, ..OrbitOptions::default() }).unwrap();
        for s in &o.samples {
            let drift = (m.p0(s.point.x, s.point.xi).unwrap() - e).abs();
            prop_assert!(drift <= 1e-9 * e.max(1.0), "drift {drift:e}");
        }
        prop_assert_eq!(o.orientation, -1);
        prop_assert!(o.area_action() > 0.0);
    }

    #[test]
    fn maslov_constant_is_assembled(c in -0.5f64..0.5, e in 0.2f64..3.0) {
        let a = action_coefficients(&shift1(c), e, &ActionOptions::default()).unwrap();
        prop_assert_eq!(a.s1, -PI - a.components.int_p1_dt);
        prop_assert!((a.components.int_p1_dt - 2.0 * PI * c).abs() < 1e-9);
    }

    #[test]
    fn flux_is_hermitian(s in -0.7f64..0.7, c in -0.4f64..0.4) {
        let m = shift1(c);
        let plus = build_branch(&m, 0.8, 0.1, Branch::Plus, 0.1, 41).unwrap();
        let minus = build_branch(&m, 0.8, 0.1, Branch::Minus, 0.1, 41).unwrap();
        let x = s * 0.8f64.sqrt() * 2f64.sqrt() * 0.9;
        let ab = wronskian_flux(&m, &plus, &minus, x).unwrap();
        let ba = wronskian_flux(&m, &minus, &plus, x).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        let aa = wronskian_flux(&m, &plus, &plus, x).unwrap();
        prop_assert!(aa.im.abs() < 1e-12 && aa.re > 0.0);
    }
}
