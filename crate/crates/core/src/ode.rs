//! Adaptive Dormand-Prince 5(4) integrator for small autonomous systems.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const _: () = assert!(C2 == A21);

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand-Prince step of size `h`; returns the fifth-order solution and
/// the embedded error vector.
pub fn dopri_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, &[(A21, &k1)], h))?;
    let k3 = f(&axpy(y, &[(A31, &k1), (A32, &k2)], h))?;
    let k4 = f(&axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
    let k5 = f(&axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h))?;
    let k6 = f(&axpy(
        y,
        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        h,
    ))?;
    let y_new = axpy(
        y,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        h,
    );
    let k7 = f(&y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok((y_new, err))
}

/// Step-size controller state.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub tol: f64,
    pub h: f64,
    /// Only the leading `controlled` components enter the error norm.
    pub controlled: usize,
}

impl Stepper {
    pub fn new(tol: f64, h0: f64, controlled: usize) -> Self {
        Self { tol, h: h0, controlled }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let m = self.controlled.min(N).max(1);
        let mut acc = 0.0;
        for i in 0..m {
            let sc = self.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            acc += (err[i] / sc).powi(2);
        }
        (acc / m as f64).sqrt()
    }

    /// Takes one accepted step of size at most `h_max`, returning the new
    /// state and the step size actually used.
    pub fn step<const N: usize, F>(&mut self, f: &F, y: &[f64; N], h_max: f64) -> Result<([f64; N], f64)>
    where
        F: Fn(&[f64; N]) -> Result<[f64; N]>,
    {
        loop {
            let h = self.h.min(h_max);
            if h < 1e-15 && h < h_max {
                return Err(Error::StepSizeUnderflow(h));
            }
            let (y_new, err) = dopri_step(f, y, h)?;
            let en = self.error_norm(y, &y_new, &err);
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if en <= 1.0 {
                // do not let a clamped final step shrink the controller
                if h == self.h || factor > 1.0 {
                    self.h = h * factor;
                }
                return Ok((y_new, h));
            }
            self.h = h * factor.min(1.0);
        }
    }

    /// Integrates from `y` over a duration `span > 0` landing exactly on it.
    pub fn advance<const N: usize, F>(&mut self, f: &F, y: &[f64; N], span: f64) -> Result<[f64; N]>
    where
        F: Fn(&[f64; N]) -> Result<[f64; N]>,
    {
        let mut state = *y;
        let mut elapsed = 0.0;
        while elapsed < span {
            let remaining = span - elapsed;
            let (next, used) = self.step(f, &state, remaining)?;
            state = next;
            if used >= remaining {
                break;
            }
            elapsed += used;
        }
        Ok(state)
    }
}
