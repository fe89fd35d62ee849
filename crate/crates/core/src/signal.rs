//! Coefficient signals `t -> M(t)`, given either as basis coefficients
//! `a(t)` or as Hermitian `H(t)` with `M = -iH`.
//!
//! Matrix-valued signals are split as `M = M0 + (tr M / N) I`; the engine
//! sees the coefficients of the traceless `M0` and carries the scalar part
//! as a phase rate.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_ordered_basis, expand_unchecked, OrderedBasis, RowOrder};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Linear,
    /// Natural cubic spline.
    #[default]
    Cubic,
}

fn default_modes() -> usize {
    3
}

fn default_max_norm() -> f64 {
    5.0
}

fn default_omega() -> f64 {
    std::f64::consts::PI
}

/// Serializable description of a signal. Complex numbers are `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Constant {
        a: Vec<C64>,
    },
    /// `a(t) = Σ_k coeffs[k] t^k`.
    Polynomial {
        coeffs: Vec<Vec<C64>>,
    },
    /// `a(t) = offset + Σ_k cos[k] cos((k+1) ω t) + sin[k] sin((k+1) ω t)`.
    Fourier {
        omega: f64,
        offset: Vec<C64>,
        #[serde(default)]
        cos: Vec<Vec<C64>>,
        #[serde(default)]
        sin: Vec<Vec<C64>>,
    },
    /// Coefficient vectors at strictly increasing nodes.
    Piecewise {
        times: Vec<f64>,
        values: Vec<Vec<C64>>,
        #[serde(default)]
        interpolation: Interpolation,
    },
    /// Hermitian `H` per node, upper triangle with diagonal in row-major
    /// order. A single node is a constant Hamiltonian.
    Hamiltonian {
        times: Vec<f64>,
        entries: Vec<Vec<C64>>,
        #[serde(default)]
        interpolation: Interpolation,
    },
    /// Smooth traceless Hermitian trigonometric polynomial with
    /// `max_t ‖H(t)‖_F <= max_norm`.
    RandomHamiltonian {
        seed: u64,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_max_norm")]
        max_norm: f64,
        #[serde(default = "default_omega")]
        omega: f64,
    },
}

/// Value of a signal at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalValue {
    /// Coefficients of the traceless part.
    pub a: Vec<C64>,
    /// `tr M / N`.
    pub phase_rate: C64,
}

#[derive(Clone, Debug)]
enum Compiled {
    Coefficients(Curve),
    Matrix(MatrixCurve),
}

#[derive(Clone, Debug)]
enum Curve {
    Constant(Vec<C64>),
    Polynomial(Vec<Vec<C64>>),
    Fourier {
        omega: f64,
        offset: Vec<C64>,
        cos: Vec<Vec<C64>>,
        sin: Vec<Vec<C64>>,
    },
    Samples(Interpolant),
}

#[derive(Clone, Debug)]
enum MatrixCurve {
    /// `H(t)` interpolated entrywise.
    Samples(Interpolant),
    Trig {
        omega: f64,
        cos: Vec<DMatrix<C64>>,
        sin: Vec<DMatrix<C64>>,
    },
}

#[derive(Clone, Debug)]
pub struct Signal {
    dim: usize,
    basis: OrderedBasis,
    spec: SignalSpec,
    compiled: Compiled,
}

impl Signal {
    pub fn new(dim: usize, order: RowOrder, spec: SignalSpec) -> Result<Self> {
        let basis = build_ordered_basis(dim, order)?;
        let n = basis.len();
        let tri = dim * (dim + 1) / 2;
        let compiled = match &spec {
            SignalSpec::Constant { a } => {
                check_vec(a, n, "a")?;
                Compiled::Coefficients(Curve::Constant(a.clone()))
            }
            SignalSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Config("polynomial signal needs at least one coefficient".into()));
                }
                for c in coeffs {
                    check_vec(c, n, "polynomial coefficient")?;
                }
                Compiled::Coefficients(Curve::Polynomial(coeffs.clone()))
            }
            SignalSpec::Fourier { omega, offset, cos, sin } => {
                check_finite(*omega, "omega")?;
                check_vec(offset, n, "offset")?;
                for c in cos.iter().chain(sin) {
                    check_vec(c, n, "fourier coefficient")?;
                }
                Compiled::Coefficients(Curve::Fourier {
                    omega: *omega,
                    offset: offset.clone(),
                    cos: cos.clone(),
                    sin: sin.clone(),
                })
            }
            SignalSpec::Piecewise { times, values, interpolation } => {
                if times.len() < 2 {
                    return Err(Error::Config("piecewise signal needs at least two nodes".into()));
                }
                for v in values {
                    check_vec(v, n, "sample")?;
                }
                Compiled::Coefficients(Curve::Samples(Interpolant::new(times, values, *interpolation)?))
            }
            SignalSpec::Hamiltonian { times, entries, interpolation } => {
                for e in entries {
                    check_vec(e, tri, "Hamiltonian entries")?;
                    check_hermitian_diagonal(e, dim)?;
                }
                Compiled::Matrix(MatrixCurve::Samples(Interpolant::new(times, entries, *interpolation)?))
            }
            SignalSpec::RandomHamiltonian { seed, modes, max_norm, omega } => {
                check_finite(*max_norm, "max_norm")?;
                check_finite(*omega, "omega")?;
                if *max_norm < 0.0 {
                    return Err(Error::Config("max_norm must be nonnegative".into()));
                }
                Compiled::Matrix(random_trig(dim, *seed, *modes, *max_norm, *omega))
            }
        };
        Ok(Signal {
            dim,
            basis,
            spec,
            compiled,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> RowOrder {
        self.basis.order()
    }

    pub fn spec(&self) -> &SignalSpec {
        &self.spec
    }

    /// Closed interval on which the signal is defined.
    pub fn domain(&self) -> (f64, f64) {
        let samples = match &self.compiled {
            Compiled::Coefficients(Curve::Samples(s)) | Compiled::Matrix(MatrixCurve::Samples(s)) => s,
            _ => return (f64::NEG_INFINITY, f64::INFINITY),
        };
        if samples.times.len() == 1 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (samples.times[0], *samples.times.last().unwrap())
        }
    }

    pub fn eval(&self, t: f64) -> SignalValue {
        match &self.compiled {
            Compiled::Coefficients(curve) => SignalValue {
                a: curve.eval(t),
                phase_rate: C64::new(0.0, 0.0),
            },
            Compiled::Matrix(_) => {
                let mut m = self.matrix(t);
                let shift = m.trace() / self.dim as f64;
                for i in 0..self.dim {
                    m[(i, i)] -= shift;
                }
                SignalValue {
                    a: expand_unchecked(&m, &self.basis),
                    phase_rate: shift,
                }
            }
        }
    }

    /// The full `M(t)`, trace included.
    pub fn matrix(&self, t: f64) -> DMatrix<C64> {
        match &self.compiled {
            Compiled::Coefficients(curve) => self.basis.combine(&curve.eval(t)),
            Compiled::Matrix(MatrixCurve::Samples(s)) => {
                hermitian_from_entries(&s.eval(t), self.dim) * C64::new(0.0, -1.0)
            }
            Compiled::Matrix(MatrixCurve::Trig { omega, cos, sin }) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for (k, c) in cos.iter().enumerate() {
                    h += c * C64::new((k as f64 * omega * t).cos(), 0.0);
                }
                for (k, s) in sin.iter().enumerate() {
                    h += s * C64::new(((k + 1) as f64 * omega * t).sin(), 0.0);
                }
                h * C64::new(0.0, -1.0)
            }
        }
    }
}

fn check_vec(v: &[C64], expected: usize, what: &str) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Config(format!("{what}: expected {expected} entries, got {}", v.len())));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Config(format!("{what}: non-finite entry")));
    }
    Ok(())
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite")))
    }
}

fn check_hermitian_diagonal(entries: &[C64], dim: usize) -> Result<()> {
    let mut k = 0;
    for i in 0..dim {
        let d = entries[k];
        if d.im.abs() > 1e-12 * d.norm().max(1.0) {
            return Err(Error::Config(format!("Hamiltonian diagonal entry ({}, {}) is not real", i + 1, i + 1)));
        }
        k += dim - i;
    }
    Ok(())
}

/// Hermitian matrix from its upper triangle (row-major, diagonal included).
pub fn hermitian_from_entries(entries: &[C64], dim: usize) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                h[(i, i)] = C64::new(entries[k].re, 0.0);
            } else {
                h[(i, j)] = entries[k];
                h[(j, i)] = entries[k].conj();
            }
            k += 1;
        }
    }
    h
}

/// Upper triangle (row-major, diagonal included) of a square matrix.
pub fn hermitian_entries(h: &DMatrix<C64>) -> Vec<C64> {
    let dim = h.nrows();
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            out.push(h[(i, j)]);
        }
    }
    out
}

impl Curve {
    fn eval(&self, t: f64) -> Vec<C64> {
        match self {
            Curve::Constant(a) => a.clone(),
            Curve::Polynomial(coeffs) => {
                let mut acc = coeffs.last().unwrap().clone();
                for c in coeffs.iter().rev().skip(1) {
                    for (x, ci) in acc.iter_mut().zip(c) {
                        *x = *x * t + ci;
                    }
                }
                acc
            }
            Curve::Fourier { omega, offset, cos, sin } => {
                let mut acc = offset.clone();
                for (k, c) in cos.iter().enumerate() {
                    let w = ((k + 1) as f64 * omega * t).cos();
                    acc.iter_mut().zip(c).for_each(|(x, ci)| *x += ci * w);
                }
                for (k, s) in sin.iter().enumerate() {
                    let w = ((k + 1) as f64 * omega * t).sin();
                    acc.iter_mut().zip(s).for_each(|(x, si)| *x += si * w);
                }
                acc
            }
            Curve::Samples(s) => s.eval(t),
        }
    }
}

/// Componentwise interpolation of vector samples. Outside the node range
/// the end segments are extended.
#[derive(Clone, Debug)]
struct Interpolant {
    times: Vec<f64>,
    values: Vec<Vec<C64>>,
    rule: Interpolation,
    /// Second derivatives at the nodes (cubic only).
    second: Vec<Vec<C64>>,
}

impl Interpolant {
    fn new(times: &[f64], values: &[Vec<C64>], rule: Interpolation) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config(format!(
                "{} nodes but {} samples",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("node times must be finite and strictly increasing".into()));
        }
        let second = match rule {
            Interpolation::Cubic if times.len() > 2 => natural_spline(times, values),
            _ => vec![vec![C64::new(0.0, 0.0); values[0].len()]; times.len()],
        };
        Ok(Interpolant {
            times: times.to_vec(),
            values: values.to_vec(),
            rule,
            second,
        })
    }

    fn eval(&self, t: f64) -> Vec<C64> {
        let n = self.times.len();
        if n == 1 {
            return self.values[0].clone();
        }
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let b = (t - t0) / h;
        let a = 1.0 - b;
        let (y0, y1) = (&self.values[i], &self.values[i + 1]);
        match self.rule {
            Interpolation::Linear => y0.iter().zip(y1).map(|(p, q)| p * a + q * b).collect(),
            Interpolation::Cubic => {
                let (m0, m1) = (&self.second[i], &self.second[i + 1]);
                let ca = (a * a * a - a) * h * h / 6.0;
                let cb = (b * b * b - b) * h * h / 6.0;
                (0..y0.len())
                    .map(|k| y0[k] * a + y1[k] * b + m0[k] * ca + m1[k] * cb)
                    .collect()
            }
        }
    }
}

/// Second derivatives of the natural cubic spline (tridiagonal solve).
fn natural_spline(times: &[f64], values: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = times.len();
    let dim = values[0].len();
    let zero = C64::new(0.0, 0.0);
    let mut m = vec![vec![zero; dim]; n];
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // Interior unknowns 1..n-1: h[i-1] m[i-1] + 2(h[i-1]+h[i]) m[i] + h[i] m[i+1] = r[i].
    let mut diag = vec![0.0; n];
    let mut rhs = vec![vec![zero; dim]; n];
    for i in 1..n - 1 {
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        for k in 0..dim {
            rhs[i][k] = ((values[i + 1][k] - values[i][k]) / h[i] - (values[i][k] - values[i - 1][k]) / h[i - 1]) * 6.0;
        }
    }
    for i in 2..n - 1 {
        let w = h[i - 1] / diag[i - 1];
        diag[i] -= w * h[i - 1];
        let prev = rhs[i - 1].clone();
        for k in 0..dim {
            rhs[i][k] -= prev[k] * w;
        }
    }
    for i in (1..n - 1).rev() {
        for k in 0..dim {
            let next = if i + 1 < n - 1 { m[i + 1][k] * h[i] } else { zero };
            m[i][k] = (rhs[i][k] - next) / diag[i];
        }
    }
    m
}

fn random_traceless_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let shift = h.trace() / dim as f64;
    for i in 0..dim {
        h[(i, i)] -= shift;
    }
    h
}

/// `H(t) = Σ_{k=0}^{modes} C_k cos(kωt) + Σ_{k=1}^{modes} S_k sin(kωt)`,
/// scaled so that `Σ ‖C_k‖_F + Σ ‖S_k‖_F = max_norm`.
fn random_trig(dim: usize, seed: u64, modes: usize, max_norm: f64, omega: f64) -> MatrixCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cos: Vec<DMatrix<C64>> = (0..=modes).map(|_| random_traceless_hermitian(dim, &mut rng)).collect();
    let mut sin: Vec<DMatrix<C64>> = (0..modes).map(|_| random_traceless_hermitian(dim, &mut rng)).collect();
    let total: f64 = cos.iter().chain(&sin).map(|m| m.norm()).sum();
    if total > 0.0 {
        let s = C64::new(max_norm / total, 0.0);
        cos.iter_mut().chain(sin.iter_mut()).for_each(|m| *m *= s);
    }
    MatrixCurve::Trig { omega, cos, sin }
}
