//! Stationary-phase expansions and a brute-force oscillatory quadrature
//! used to check them.
//!
//! In one dimension, with `Φ(x) = φ(x) - φ(x0) - φ''(x0)(x - x0)²/2`,
//!
//! ```text
//! ∫ e^{iφ/h} u dx ≈ e^{iφ(x0)/h} (φ''(x0) / 2πih)^{-1/2} (u(x0) + h L1u(x0))
//! L1u = (i/2) u''/φ'' - (i/8)(4φ'''u' + φ''''u)/φ''² + (5i/24) φ'''² u/φ''³
//! ```
//!
//! and the `(z, θ)` double integral `(2πh)^{-1} ∬ e^{-izθ/h} u` has the
//! expansion `Σ_k h^k/(k! i^k) (∂_z ∂_θ)^k u(0, 0)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::symbols::Interval;

pub type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

const QUAD_POINTS: usize = 20;

/// A non-degenerate critical point with the Taylor data the expansion needs.
#[derive(Clone)]
pub struct PhasePoint1D {
    pub phase: ComplexFn,
    pub amplitude: ComplexFn,
    pub x0: f64,
    /// `φ(x0), φ'(x0), ..., φ''''(x0)`.
    pub phase_jet: [Complex64; 5],
    /// `u(x0), u'(x0), u''(x0)`.
    pub amplitude_jet: [Complex64; 3],
}

impl std::fmt::Debug for PhasePoint1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhasePoint1D")
            .field("x0", &self.x0)
            .field("phase_jet", &self.phase_jet)
            .field("amplitude_jet", &self.amplitude_jet)
            .finish_non_exhaustive()
    }
}

impl PhasePoint1D {
    pub fn new(
        phase: ComplexFn,
        amplitude: ComplexFn,
        x0: f64,
        phase_jet: [Complex64; 5],
        amplitude_jet: [Complex64; 3],
    ) -> Result<Self> {
        if phase_jet[1].norm() > 1e-10 {
            return Err(Error::InvalidParameters(format!(
                "x0 = {x0} is not a critical point: |phi'| = {:e}",
                phase_jet[1].norm()
            )));
        }
        if phase_jet[2].norm() < 1e-12 {
            return Err(Error::DegenerateCriticalPoint(phase_jet[2].norm()));
        }
        Ok(Self { phase, amplitude, x0, phase_jet, amplitude_jet })
    }

    pub fn second_derivative(&self) -> Complex64 {
        self.phase_jet[2]
    }

    /// `Φ(x0), Φ'(x0), Φ''(x0)` for the remainder `Φ = φ - φ(x0) - φ''(x0)(x-x0)²/2`.
    pub fn remainder_jet(&self) -> [Complex64; 3] {
        let phi = &self.phase_jet;
        [(self.phase)(self.x0) - phi[0], phi[1], phi[2] - self.second_derivative()]
    }

    /// `L1u(x0)`.
    pub fn l1(&self) -> Complex64 {
        let [_, _, f2, f3, f4] = self.phase_jet;
        let [u0, u1, u2] = self.amplitude_jet;
        let i = Complex64::i();
        i * 0.5 * u2 / f2 - i / 8.0 * (4.0 * f3 * u1 + f4 * u0) / (f2 * f2)
            + i * (5.0 / 24.0) * f3 * f3 * u0 / (f2 * f2 * f2)
    }
}

/// Order-0 or order-1 stationary-phase value at one critical point.
pub fn stationary_phase_1d(pp: &PhasePoint1D, h: f64, order: usize) -> Result<Complex64> {
    if order > 1 {
        return Err(Error::InvalidParameters(format!("stationary-phase order {order} is not 0 or 1")));
    }
    let f2 = pp.second_derivative();
    if f2.norm() < 1e-12 {
        return Err(Error::DegenerateCriticalPoint(f2.norm()));
    }
    let prefactor = (f2 / Complex64::new(0.0, 2.0 * PI * h)).powf(-0.5);
    let mut series = pp.amplitude_jet[0];
    if order == 1 {
        series += h * pp.l1();
    }
    Ok((Complex64::i() * pp.phase_jet[0] / h).exp() * prefactor * series)
}

/// `Σ_{k ≤ K} h^k / (k! i^k) (∂_z ∂_θ)^k u(0, 0)`, with `mixed(i, j)` giving
/// `∂_z^i ∂_θ^j u(0, 0)`.
pub fn double_phase_expansion<F: Fn(usize, usize) -> f64>(mixed: F, h: f64, k_max: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut coeff = Complex64::new(1.0, 0.0);
    for k in 0..=k_max {
        if k > 0 {
            coeff *= h / (k as f64) / Complex64::i();
        }
        acc += coeff * mixed(k, k);
    }
    acc
}

/// Composite Gauss-Legendre value of `∫_domain e^{iφ/h} u dx`.
///
/// The panel count defaults to at least 20 nodes per local oscillation;
/// an explicit `panels` below that rule is rejected.
pub fn oscillatory_quadrature<P, U>(phase: P, u: U, h: f64, domain: Interval, panels: Option<usize>) -> Result<Complex64>
where
    P: Fn(f64) -> Complex64,
    U: Fn(f64) -> Complex64,
{
    if !(h > 0.0) || !(domain.max > domain.min) {
        return Err(Error::InvalidParameters("oscillatory quadrature needs h > 0 and a non-empty domain".into()));
    }
    let probes = 4096;
    let width = domain.width();
    let step = width / probes as f64;
    let mut max_slope: f64 = 0.0;
    for k in 0..probes {
        let a = domain.min + step * k as f64;
        max_slope = max_slope.max(((phase(a + step) - phase(a)).re / step).abs());
    }
    let oscillations = width * max_slope / (2.0 * PI * h);
    let required = ((20.0 * oscillations).ceil() as usize).max(QUAD_POINTS);
    let panels = match panels {
        Some(p) => {
            if p * QUAD_POINTS < required {
                return Err(Error::UnderresolvedOscillation { nodes: p * QUAD_POINTS, required });
            }
            p
        }
        None => (2 * required).div_ceil(QUAD_POINTS).max(8),
    };
    let gl = GaussLegendre::new(QUAD_POINTS);
    let pw = width / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = domain.min + pw * (p as f64 + 0.5);
        let mut panel = Complex64::new(0.0, 0.0);
        for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
            let x = mid + 0.5 * pw * t;
            panel += w * (Complex64::i() * phase(x) / h).exp() * u(x);
        }
        acc += panel * (0.5 * pw);
    }
    Ok(acc)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Phase/amplitude fixtures with closed-form Taylor data.
pub mod fixtures {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// `(-1)^k He_k(x) e^{-x²/2}` for `k = 0, 1, 2`.
    pub fn gaussian_jet(x: f64) -> [Complex64; 3] {
        let g = (-0.5 * x * x).exp();
        [c(g), c(-x * g), c((x * x - 1.0) * g)]
    }

    pub fn gaussian() -> ComplexFn {
        Arc::new(|x: f64| c((-0.5 * x * x).exp()))
    }

    /// `φ = x²/2`, `u = e^{-x²/2}`; exact integral `√(2π / (1 - i/h))`.
    pub fn quadratic_gaussian() -> PhasePoint1D {
        PhasePoint1D::new(
            Arc::new(|x: f64| c(0.5 * x * x)),
            gaussian(),
            0.0,
            [c(0.0), c(0.0), c(1.0), c(0.0), c(0.0)],
            gaussian_jet(0.0),
        )
        .expect("quadratic phase is non-degenerate")
    }

    pub fn quadratic_gaussian_exact(h: f64) -> Complex64 {
        (Complex64::new(2.0 * PI, 0.0) / Complex64::new(1.0, -1.0 / h)).sqrt()
    }

    /// `φ = x²/2 + x³/6`, `u = e^{-x²/2}`: critical points at 0 and -2.
    pub fn cubic_gaussian() -> [PhasePoint1D; 2] {
        let phase: ComplexFn = Arc::new(|x: f64| c(0.5 * x * x + x * x * x / 6.0));
        let at = |x0: f64| {
            PhasePoint1D::new(
                phase.clone(),
                gaussian(),
                x0,
                [c(0.5 * x0 * x0 + x0 * x0 * x0 / 6.0), c(x0 + 0.5 * x0 * x0), c(1.0 + x0), c(1.0), c(0.0)],
                gaussian_jet(x0),
            )
            .expect("cubic critical points are non-degenerate")
        };
        [at(0.0), at(-2.0)]
    }

    /// `∂_z^i ∂_θ^j e^{-z²-θ²}` at the origin: `H_i(0) H_j(0)` up to sign.
    pub fn gaussian_2d_mixed(i: usize, j: usize) -> f64 {
        let hermite0 = |k: usize| -> f64 {
            if k % 2 == 1 {
                return 0.0;
            }
            // (-1)^k H_k(0) with H_{2m}(0) = (-1)^m (2m)!/m!
            let m = k / 2;
            let mut v = if m % 2 == 0 { 1.0 } else { -1.0 };
            for r in (m + 1)..=(2 * m) {
                v *= r as f64;
            }
            v
        };
        hermite0(i) * hermite0(j)
    }

    /// `(2πh)^{-1} ∬ e^{-izθ/h} e^{-z²-θ²} = (1 + 4h²)^{-1/2}`.
    pub fn gaussian_2d_exact(h: f64) -> f64 {
        (1.0 + 4.0 * h * h).powf(-0.5)
    }
}
