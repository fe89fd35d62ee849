//! Explicit Runge–Kutta steppers on complex state vectors: the
//! Dormand–Prince 5(4) embedded pair with step-size control, and classical
//! fixed-step RK4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive Dormand–Prince 5(4).
    #[default]
    Dopri5,
    /// Classical RK4 with a fixed step.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

/// Right-hand side `y' = f(t, y)`.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[C64]) -> Result<Vec<C64>>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    fn eval(&mut self, t: f64, y: &[C64]) -> Result<Vec<C64>> {
        self(t, y)
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
// Differences between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &[C64], h: f64, terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = y.to_vec();
    for &(w, k) in terms {
        if w != 0.0 {
            let hw = h * w;
            out.iter_mut().zip(k).for_each(|(o, ki)| *o += ki * hw);
        }
    }
    out
}

/// Weighted RMS norm `sqrt(mean((e_i / (abs + rel max(|y_i|, |z_i|)))^2))`.
pub fn error_norm(err: &[C64], y: &[C64], z: &[C64], tol: Tolerance) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(z))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// One Dormand–Prince step from `(t, y)` with `k1 = f(t, y)`. Returns the
/// fifth-order solution, the scaled error norm, and `f` at the new point.
pub fn dopri5_step<F: Rhs>(f: &mut F, t: f64, y: &[C64], h: f64, k1: &[C64], tol: Tolerance) -> Result<(Vec<C64>, f64, Vec<C64>)> {
    let k2 = f.eval(t + C2 * h, &combine(y, h, &[(A21, k1)]))?;
    let k3 = f.eval(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f.eval(t + C4 * h, &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f.eval(t + C5 * h, &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f.eval(t + h, &combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y_new = combine(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f.eval(t + h, &y_new)?;
    let zero = vec![C64::new(0.0, 0.0); y.len()];
    let err = combine(&zero, h, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    Ok((y_new.clone(), error_norm(&err, y, &y_new, tol), k7))
}

pub fn rk4_step<F: Rhs>(f: &mut F, t: f64, y: &[C64], h: f64) -> Result<Vec<C64>> {
    let k1 = f.eval(t, y)?;
    let k2 = f.eval(t + 0.5 * h, &combine(y, h, &[(0.5, &k1)]))?;
    let k3 = f.eval(t + 0.5 * h, &combine(y, h, &[(0.5, &k2)]))?;
    let k4 = f.eval(t + h, &combine(y, h, &[(1.0, &k3)]))?;
    Ok(combine(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

/// An accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub t: f64,
    pub y: Vec<C64>,
    pub h: f64,
}

/// Step driver that lands exactly on a caller-supplied limit.
#[derive(Clone, Debug)]
pub struct Stepper {
    method: Method,
    tol: Tolerance,
    max_step: f64,
    fixed_step: f64,
    h: Option<f64>,
    /// `f(t, y)` at the last accepted point.
    fsal: Option<(f64, Vec<C64>)>,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

impl Stepper {
    pub fn new(method: Method, tol: Tolerance, max_step: f64, fixed_step: f64) -> Self {
        Stepper {
            method,
            tol,
            max_step,
            fixed_step,
            h: None,
            fsal: None,
        }
    }

    /// Forgets the cached derivative; call after modifying the state.
    pub fn reset(&mut self) {
        self.fsal = None;
    }

    /// Scales the next trial step.
    pub fn shrink(&mut self, factor: f64) {
        let h = self.h.unwrap_or(self.fixed_step);
        self.h = Some(h * factor);
        if self.method == Method::Rk4 {
            self.fixed_step *= factor;
        }
    }

    /// Takes one accepted step from `(t, y)` towards `limit > t`.
    pub fn advance<F: Rhs>(&mut self, f: &mut F, t: f64, y: &[C64], limit: f64) -> Result<Step> {
        let remaining = limit - t;
        let floor = 1e-14 * t.abs().max(limit.abs()).max(1.0);
        match self.method {
            Method::Rk4 => {
                let h = self.fixed_step.min(self.max_step);
                let (h_try, landed) = clip(h, remaining);
                if h_try < floor {
                    return Err(Error::StepUnderflow { t, h: h_try });
                }
                let y_new = rk4_step(f, t, y, h_try)?;
                Ok(Step {
                    t: if landed { limit } else { t + h_try },
                    y: y_new,
                    h: h_try,
                })
            }
            Method::Dopri5 => {
                let k1 = match self.fsal.take() {
                    Some((tc, k)) if tc == t => k,
                    _ => f.eval(t, y)?,
                };
                let mut h = match self.h {
                    Some(h) => h,
                    None => self.initial_step(f, t, y, &k1)?,
                }
                .min(self.max_step);
                loop {
                    let (h_try, landed) = clip(h, remaining);
                    if !(h_try >= floor) {
                        return Err(Error::StepUnderflow { t, h: h_try });
                    }
                    let (y_new, err, k7) = dopri5_step(f, t, y, h_try, &k1, self.tol)?;
                    let finite = err.is_finite() && y_new.iter().all(|z| z.re.is_finite() && z.im.is_finite());
                    if finite && err <= 1.0 {
                        let factor = if err == 0.0 {
                            MAX_FACTOR
                        } else {
                            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                        };
                        // A step shortened to land on the limit says nothing
                        // about the step the error would allow.
                        self.h = Some(if landed && h_try < h { h } else { h_try * factor });
                        let t_new = if landed { limit } else { t + h_try };
                        self.fsal = Some((t_new, k7));
                        return Ok(Step { t: t_new, y: y_new, h: h_try });
                    }
                    let factor = if finite {
                        (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                    } else {
                        MIN_FACTOR
                    };
                    h = h_try * factor;
                }
            }
        }
    }

    fn initial_step<F: Rhs>(&self, f: &mut F, t: f64, y: &[C64], k1: &[C64]) -> Result<f64> {
        let scale: Vec<f64> = y.iter().map(|z| self.tol.abs + self.tol.rel * z.norm()).collect();
        let rms = |v: &[C64]| {
            let s: f64 = v.iter().zip(&scale).map(|(z, sc)| (z.norm() / sc).powi(2)).sum();
            (s / v.len().max(1) as f64).sqrt()
        };
        let d0 = rms(y);
        let d1 = rms(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1 = combine(y, h0, &[(1.0, k1)]);
        let k2 = f.eval(t + h0, &y1)?;
        let diff: Vec<C64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.max_step))
    }
}

/// `(step, lands_on_limit)`; steps within a relative `1e-10` of the limit
/// are stretched onto it.
fn clip(h: f64, remaining: f64) -> (f64, bool) {
    if h >= remaining * (1.0 - 1e-10) {
        (remaining, true)
    } else {
        (h, false)
    }
}
