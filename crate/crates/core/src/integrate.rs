//! Time integration of the Wei–Norman exponents with chart re-anchoring, and
//! the direct integration of `K' = M K` used as an oracle.
//!
//! The reconstructed evolution is `K = e^φ K_chart(u) K_anchor`, where
//! `K_chart(u) = Π exp(u_k X_k)`, `φ' = tr M / N`, and `K_anchor` is the
//! evolution accumulated by earlier charts. Since `K_chart` solves the
//! traceless equation from the identity, the frozen factor sits on the
//! right.
//!
//! Chart policy. The chart size is the largest `|u_k|` over root
//! generators and `|Re u_k|` over Cartan generators. The last accepted
//! state with size at most `chart_bound` is kept as a checkpoint. Leaving
//! that bound starts an excursion; a breakdown (size above
//! `growth_threshold`, a non-finite state, a singular diagonal block of `A`,
//! or step underflow during an excursion) produces a [`SingularityReport`].
//! With re-anchoring on, breakdowns and finished excursions roll back to
//! the checkpoint and restart the chart there with `u = 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{BasisElement, OrderedBasis, Role, RootLabel};
use crate::context::Algebra;
use crate::error::{Error, Result};
use crate::ode::{Step, Stepper, Tolerance};
use crate::signal::Signal;
use crate::staged::{assemble_a_numeric, condition_estimate, rhs_with, DEFAULT_COND_THRESHOLD};
use crate::trajectory::{Sample, Trajectory, TrajectoryKind};
use crate::C64;

pub use crate::ode::Method;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerances used by [`IntegrationConfig::oracle`].
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    pub t0: f64,
    pub t1: f64,
    pub method: Method,
    /// Step of the fixed-step method.
    pub step: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_step: Option<f64>,
    /// Number of equally spaced output times, endpoints included.
    pub samples: usize,
    pub reanchor: bool,
    pub cond_threshold: f64,
    pub growth_threshold: f64,
    pub chart_bound: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            t0: 0.0,
            t1: 1.0,
            method: Method::Dopri5,
            step: 1e-2,
            tol_abs: 1e-10,
            tol_rel: 1e-10,
            max_step: None,
            samples: 101,
            reanchor: true,
            cond_threshold: DEFAULT_COND_THRESHOLD,
            growth_threshold: 1e6,
            chart_bound: 2.0,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.t0.is_finite() && self.t1.is_finite()) {
            return bad("t0 and t1 must be finite");
        }
        if self.t1 <= self.t0 {
            return bad("t1 must exceed t0");
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.method == Method::Rk4 && !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad("max_step must be positive");
            }
        }
        if self.samples < 2 {
            return bad("samples must be at least 2");
        }
        if !(self.cond_threshold >= 1.0) {
            return bad("cond_threshold must be at least 1");
        }
        if !(self.chart_bound > 0.0 && self.growth_threshold > self.chart_bound) {
            return bad("growth_threshold must exceed chart_bound > 0");
        }
        Ok(())
    }

    /// Output times; the last one is exactly `t1`.
    pub fn sample_times(&self) -> Vec<f64> {
        let m = self.samples - 1;
        (0..=m)
            .map(|i| {
                if i == m {
                    self.t1
                } else {
                    self.t0 + (self.t1 - self.t0) * i as f64 / m as f64
                }
            })
            .collect()
    }

    /// Same span and sampling with the adaptive pair at [`ORACLE_TOL`].
    pub fn oracle(&self) -> Self {
        IntegrationConfig {
            method: Method::Dopri5,
            tol_abs: ORACLE_TOL,
            tol_rel: ORACLE_TOL,
            ..self.clone()
        }
    }

    fn stepper(&self) -> Stepper {
        Stepper::new(
            self.method,
            Tolerance {
                abs: self.tol_abs,
                rel: self.tol_rel,
            },
            self.max_step.unwrap_or(f64::INFINITY),
            self.step,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityAction {
    Reanchor,
    Abort,
}

/// A detected breakdown of the factorization chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    /// Time at which the breakdown was detected.
    pub time: f64,
    /// 1-based block of the offending unknown, in index order.
    pub stage: usize,
    /// Condition estimate of `A(u)` (or of the failing block); `None` when
    /// numerically singular.
    pub cond: Option<f64>,
    pub action: SingularityAction,
    /// 0-based chart in which the breakdown occurred.
    pub chart: usize,
    /// Chart size at detection.
    pub magnitude: f64,
}

/// `exp(u X)` for a single generator.
pub fn factor_exp(element: &BasisElement, u: C64, dim: usize) -> DMatrix<C64> {
    let mut m = DMatrix::identity(dim, dim);
    match element.label {
        RootLabel::Root { p, q } => m[(p - 1, q - 1)] = u,
        RootLabel::Cartan { l } => {
            m[(l - 1, l - 1)] = u.exp();
            m[(l, l)] = (-u).exp();
        }
    }
    m
}

/// `Π_k exp(u_k X_k)` left to right, built by column operations.
pub fn reconstruct_k(basis: &OrderedBasis, u: &[C64]) -> Result<DMatrix<C64>> {
    if u.len() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            got: u.len(),
        });
    }
    let dim = basis.dim();
    let mut k = DMatrix::identity(dim, dim);
    for (el, &uk) in basis.elements().iter().zip(u) {
        if uk == ZERO {
            continue;
        }
        match el.label {
            // K (I + u S_pq): column q gains u times column p.
            RootLabel::Root { p, q } => {
                let col = k.column(p - 1) * uk;
                let mut target = k.column_mut(q - 1);
                target += col;
            }
            RootLabel::Cartan { l } => {
                let (up, down) = (uk.exp(), (-uk).exp());
                for r in 0..dim {
                    k[(r, l - 1)] *= up;
                    k[(r, l)] *= down;
                }
            }
        }
    }
    Ok(k)
}

fn component_size(el: &BasisElement, x: C64) -> f64 {
    let s = if el.role == Role::Cartan { x.re.abs() } else { x.norm() };
    if s.is_nan() {
        f64::INFINITY
    } else {
        s
    }
}

/// Chart size and the position attaining it.
fn chart_size(basis: &OrderedBasis, u: &[C64]) -> (f64, usize) {
    let mut best = (0.0f64, 0usize);
    for (i, (el, &x)) in basis.elements().iter().zip(u).enumerate() {
        let s = component_size(el, x);
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

/// First position above `threshold`; escapes propagate to later blocks,
/// so this names the originating stage.
fn first_above(basis: &OrderedBasis, u: &[C64], threshold: f64) -> Option<usize> {
    basis
        .elements()
        .iter()
        .zip(u)
        .position(|(el, &x)| component_size(el, x) > threshold)
}

fn finite(y: &[C64]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_domain(signal: &Signal, config: &IntegrationConfig) -> Result<()> {
    let (lo, hi) = signal.domain();
    if config.t0 < lo || config.t1 > hi {
        return Err(Error::Config(format!(
            "signal domain [{lo}, {hi}] does not cover [{}, {}]",
            config.t0, config.t1
        )));
    }
    Ok(())
}

fn diagnostics(k: &DMatrix<C64>, log_det: C64) -> (f64, f64) {
    let n = k.nrows();
    let unitarity = (k.adjoint() * k - DMatrix::<C64>::identity(n, n)).norm();
    let det = (k.clone().determinant() - log_det.exp()).norm();
    (unitarity, det)
}

fn row_major(k: &DMatrix<C64>) -> Vec<C64> {
    k.transpose().iter().copied().collect()
}

/// Integrates the Wei–Norman exponents for `signal` on the basis ordering
/// of the signal.
pub fn integrate_wn(signal: &Signal, config: &IntegrationConfig) -> Result<Trajectory> {
    let alg = Algebra::new(signal.dim(), signal.order())?;
    integrate_wn_with(&alg, signal, config)
}

struct Checkpoint {
    t: f64,
    y: Vec<C64>,
    /// Samples recorded up to and including `t`.
    samples: usize,
}

enum Outcome {
    Accepted(Step),
    Breakdown {
        time: f64,
        pos: Option<usize>,
        cond: Option<f64>,
        magnitude: f64,
    },
}

/// As [`integrate_wn`], with a prebuilt algebra of matching dimension and
/// ordering.
pub fn integrate_wn_with(alg: &Algebra, signal: &Signal, config: &IntegrationConfig) -> Result<Trajectory> {
    config.validate()?;
    check_domain(signal, config)?;
    if signal.dim() != alg.dim() || signal.order() != alg.basis.order() {
        return Err(Error::Config("signal and algebra disagree on dimension or ordering".into()));
    }
    let basis = &alg.basis;
    let n = alg.len();
    let dim = alg.dim();
    let block_of = alg.partition.block_of();
    let times = config.sample_times();
    // State: u followed by the phase φ.
    let mut f = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let v = signal.eval(t);
        let mut out = rhs_with(alg, &y[..n], &v.a, config.cond_threshold)?;
        out.push(v.phase_rate);
        Ok(out)
    };
    let sample = |t: f64, y: &[C64], anchor: &DMatrix<C64>, step: f64, chart: usize| -> Result<Sample> {
        let phase = y[n];
        let k = reconstruct_k(basis, &y[..n])? * anchor * phase.exp();
        let (unitarity_defect, det_defect) = diagnostics(&k, phase * dim as f64);
        Ok(Sample {
            t,
            u: y[..n].to_vec(),
            k: row_major(&k),
            unitarity_defect,
            det_defect,
            step,
            chart,
        })
    };

    let mut traj = Trajectory::new(TrajectoryKind::WeiNorman, dim, basis.order());
    let mut anchor = DMatrix::<C64>::identity(dim, dim);
    let mut chart = 0usize;
    let mut chart_steps = 0usize;
    let mut in_excursion = false;
    let mut t = config.t0;
    let mut y = vec![ZERO; n + 1];
    traj.samples.push(sample(t, &y, &anchor, 0.0, chart)?);
    let mut checkpoint = Checkpoint {
        t,
        y: y.clone(),
        samples: 1,
    };
    let mut next = 1;
    let mut stepper = config.stepper();

    loop {
        if next == times.len() {
            if !(in_excursion && config.reanchor) {
                break;
            }
            // Excursion still open at t1: restart from the checkpoint.
        } else {
            let limit = times[next];
            let outcome = match stepper.advance(&mut f, t, &y, limit) {
                Ok(step) => {
                    let (size, argmax) = chart_size(basis, &step.y[..n]);
                    if !finite(&step.y) || size > config.growth_threshold {
                        let pos = first_above(basis, &step.y[..n], config.growth_threshold).unwrap_or(argmax);
                        let cond = condition_estimate(&assemble_a_numeric(alg, &step.y[..n])?).0;
                        Outcome::Breakdown {
                            time: step.t,
                            pos: Some(pos),
                            cond: cond.is_finite().then_some(cond),
                            magnitude: size,
                        }
                    } else {
                        Outcome::Accepted(step)
                    }
                }
                Err(Error::SingularBlock { stage, cond }) => Outcome::Breakdown {
                    time: t,
                    pos: alg.partition.blocks().get(stage.saturating_sub(1)).map(|b| b.range.start),
                    cond: cond.is_finite().then_some(cond),
                    magnitude: chart_size(basis, &y[..n]).0,
                },
                Err(Error::StepUnderflow { .. }) if in_excursion => Outcome::Breakdown {
                    time: t,
                    pos: Some(chart_size(basis, &y[..n]).1),
                    cond: None,
                    magnitude: chart_size(basis, &y[..n]).0,
                },
                Err(e) => return Err(e),
            };
            match outcome {
                Outcome::Accepted(step) => {
                    let size = chart_size(basis, &step.y[..n]).0;
                    if size > config.chart_bound && chart_steps == 0 {
                        // The first step of a chart must stay inside it.
                        stepper.shrink(0.5);
                        continue;
                    }
                    t = step.t;
                    y = step.y;
                    chart_steps += 1;
                    if t == limit {
                        traj.samples.push(sample(t, &y, &anchor, step.h, chart)?);
                        next += 1;
                    }
                    if size > config.chart_bound {
                        in_excursion = true;
                        continue;
                    }
                    if !(in_excursion && config.reanchor) {
                        in_excursion = false;
                        checkpoint = Checkpoint {
                            t,
                            y: y.clone(),
                            samples: traj.samples.len(),
                        };
                        continue;
                    }
                    // Excursion returned inside the bound: restart from the
                    // checkpoint.
                }
                Outcome::Breakdown {
                    time,
                    pos,
                    cond,
                    magnitude,
                } => {
                    if chart_steps == 0 {
                        stepper.shrink(0.5);
                        continue;
                    }
                    let report = SingularityReport {
                        time,
                        stage: pos.map_or(0, |p| block_of[p] + 1),
                        cond,
                        action: if config.reanchor {
                            SingularityAction::Reanchor
                        } else {
                            SingularityAction::Abort
                        },
                        chart,
                        magnitude,
                    };
                    if !config.reanchor {
                        return Err(Error::Breakdown(Box::new(report)));
                    }
                    traj.singularities.push(report);
                }
            }
        }

        // Re-anchor at the checkpoint.
        anchor = reconstruct_k(basis, &checkpoint.y[..n])? * anchor;
        t = checkpoint.t;
        y = vec![ZERO; n + 1];
        y[n] = checkpoint.y[n];
        checkpoint.y = y.clone();
        traj.samples.truncate(checkpoint.samples);
        next = checkpoint.samples;
        chart += 1;
        chart_steps = 0;
        in_excursion = false;
        traj.chart_switches.push(t);
        stepper = config.stepper();
    }
    Ok(traj)
}

/// Integrates `K' = M(t) K` from the identity, together with
/// `ψ' = tr M` so that `det K = e^ψ`.
pub fn integrate_direct(signal: &Signal, config: &IntegrationConfig) -> Result<Trajectory> {
    config.validate()?;
    check_domain(signal, config)?;
    let dim = signal.dim();
    let nk = dim * dim;
    let times = config.sample_times();
    let mut f = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let m = signal.matrix(t);
        let k = DMatrix::from_column_slice(dim, dim, &y[..nk]);
        let mut out: Vec<C64> = (&m * k).iter().copied().collect();
        out.push(m.trace());
        Ok(out)
    };
    let sample = |t: f64, y: &[C64], step: f64| -> Sample {
        let k = DMatrix::from_column_slice(dim, dim, &y[..nk]);
        let (unitarity_defect, det_defect) = diagnostics(&k, y[nk]);
        Sample {
            t,
            u: Vec::new(),
            k: row_major(&k),
            unitarity_defect,
            det_defect,
            step,
            chart: 0,
        }
    };
    let mut traj = Trajectory::new(TrajectoryKind::Direct, dim, signal.order());
    let mut y: Vec<C64> = DMatrix::<C64>::identity(dim, dim).iter().copied().collect();
    y.push(ZERO);
    let mut t = config.t0;
    traj.samples.push(sample(t, &y, 0.0));
    let mut stepper = config.stepper();
    for &limit in &times[1..] {
        while t < limit {
            let step = stepper.advance(&mut f, t, &y, limit)?;
            if !finite(&step.y) {
                return Err(Error::StepUnderflow { t, h: step.h });
            }
            t = step.t;
            y = step.y;
            if t == limit {
                traj.samples.push(sample(t, &y, step.h));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_ordered_basis, RowOrder};
    use crate::signal::SignalSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn constant(dim: usize, a: Vec<C64>) -> Signal {
        Signal::new(dim, RowOrder::Ascending, SignalSpec::Constant { a }).unwrap()
    }

    fn last_k(traj: &Trajectory) -> DMatrix<C64> {
        let s = traj.samples.last().unwrap();
        DMatrix::from_row_slice(traj.n, traj.n, &s.k)
    }

    #[test]
    fn factor_exp_examples() {
        let basis = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let u = c(0.3, -0.7);
        assert_eq!(factor_exp(basis.element(0), ZERO, 2), DMatrix::identity(2, 2));
        let root = factor_exp(basis.element(0), u, 2);
        assert_eq!(root, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), u, ZERO, c(1.0, 0.0)]));
        let cartan = factor_exp(basis.element(1), u, 2);
        assert_eq!(cartan[(0, 0)], u.exp());
        assert_eq!(cartan[(1, 1)], (-u).exp());
        assert!((cartan.determinant() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reconstruct_matches_factor_product() {
        for dim in 2..=4 {
            let basis = build_ordered_basis(dim, RowOrder::Ascending).unwrap();
            let u: Vec<C64> = (0..basis.len()).map(|i| c(0.1 * i as f64 - 0.4, 0.05 * (i % 3) as f64)).collect();
            let mut expected = DMatrix::identity(dim, dim);
            for (el, &x) in basis.elements().iter().zip(&u) {
                expected *= factor_exp(el, x, dim);
            }
            let k = reconstruct_k(&basis, &u).unwrap();
            assert!((k.clone() - expected).norm() < 1e-12, "N = {dim}");
            assert!((k.determinant() - c(1.0, 0.0)).norm() < 1e-12);
        }
        let basis = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let k = reconstruct_k(&basis, &[ZERO, c(0.4, 0.0), ZERO]).unwrap();
        assert_eq!(k, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.4, 0.0).exp(), c(-0.4, 0.0).exp()])));
    }

    #[test]
    fn zero_signal_stays_at_identity() {
        let traj = integrate_wn(&constant(3, vec![ZERO; 8]), &IntegrationConfig::default()).unwrap();
        assert_eq!(traj.samples.len(), 101);
        for s in &traj.samples {
            assert!(s.u.iter().all(|x| *x == ZERO));
            assert_eq!(DMatrix::from_row_slice(3, 3, &s.k), DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn sl2_cartan_precession() {
        let traj = integrate_wn(&constant(2, vec![ZERO, c(0.0, 1.0), ZERO]), &IntegrationConfig::default()).unwrap();
        for s in &traj.samples {
            let k = DMatrix::from_row_slice(2, 2, &s.k);
            let expected = DMatrix::from_row_slice(2, 2, &[c(0.0, s.t).exp(), ZERO, ZERO, c(0.0, -s.t).exp()]);
            assert!((k - expected).norm() < 1e-9);
            assert!(s.unitarity_defect < 1e-9);
        }
    }

    #[test]
    fn direct_rotation_closed_form() {
        let sig = constant(2, vec![c(1.0, 0.0), ZERO, c(-1.0, 0.0)]);
        let traj = integrate_direct(&sig, &IntegrationConfig::default()).unwrap();
        for s in &traj.samples {
            let (co, si) = (s.t.cos(), s.t.sin());
            let expected = DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(si, 0.0), c(-si, 0.0), c(co, 0.0)]);
            assert!((DMatrix::from_row_slice(2, 2, &s.k) - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn tangent_escape_is_detected_and_crossed() {
        let sig = constant(2, vec![c(1.0, 0.0), ZERO, c(-1.0, 0.0)]);
        let config = IntegrationConfig {
            t1: 2.0,
            ..IntegrationConfig::default()
        };
        let traj = integrate_wn(&sig, &config).unwrap();
        assert_eq!(traj.singularities.len(), 1);
        let report = &traj.singularities[0];
        assert!((report.time - std::f64::consts::FRAC_PI_2).abs() < 1e-3, "{report:?}");
        assert_eq!(report.stage, 1);
        assert_eq!(report.action, SingularityAction::Reanchor);
        assert!(!traj.chart_switches.is_empty());
        assert!(traj.chart_switches[0] < std::f64::consts::FRAC_PI_2);
        let k = last_k(&traj);
        let expected = DMatrix::from_row_slice(2, 2, &[c(2f64.cos(), 0.0), c(2f64.sin(), 0.0), c(-2f64.sin(), 0.0), c(2f64.cos(), 0.0)]);
        assert!((k - expected).norm() < 1e-8);
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(times, config.sample_times());
    }

    #[test]
    fn tangent_escape_aborts_without_reanchoring() {
        let sig = constant(2, vec![c(1.0, 0.0), ZERO, c(-1.0, 0.0)]);
        let config = IntegrationConfig {
            t1: 2.0,
            reanchor: false,
            ..IntegrationConfig::default()
        };
        match integrate_wn(&sig, &config) {
            Err(Error::Breakdown(report)) => {
                assert!((report.time - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
                assert_eq!(report.action, SingularityAction::Abort);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let ok = IntegrationConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            IntegrationConfig { t1: 0.0, ..ok.clone() },
            IntegrationConfig { tol_abs: 0.0, ..ok.clone() },
            IntegrationConfig { samples: 1, ..ok.clone() },
            IntegrationConfig { growth_threshold: 1.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        let times = IntegrationConfig { t0: 0.5, t1: 2.0, samples: 4, ..ok }.sample_times();
        assert_eq!(times, vec![0.5, 1.0, 1.5, 2.0]);
    }
}
