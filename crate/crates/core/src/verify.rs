//! Seeded verification battery: algebraic properties, structure of `A`,
//! staged versus dense solves, the reference hierarchies, and agreement of
//! the Wei–Norman integrator with the direct oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_ordered_basis, RowOrder};
use crate::context::Algebra;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hierarchy::derive_hierarchy_for;
use crate::integrate::{integrate_direct, integrate_wn_with, IntegrationConfig};
use crate::lemmas::check_algebraic_properties_with;
use crate::reference::{compare_with_reference, reference_system, REFERENCE_ORDER};
use crate::signal::{Signal, SignalSpec};
use crate::staged::{assemble_a_numeric, below_block_diagonal, dense_rhs, rhs};
use crate::trajectory::compare;
use crate::C64;

pub const REPORT_VERSION: u32 = 1;

/// Relative tolerance of the staged versus dense comparison.
pub const STAGED_REL_TOL: f64 = 1e-10;
/// Bounds of the oracle comparison.
pub const ORACLE_FROBENIUS_TOL: f64 = 1e-6;
pub const UNITARITY_TOL: f64 = 1e-7;
pub const DET_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub min_dim: usize,
    pub max_dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// Swaps the first and last basis elements to exercise failure paths.
    pub corrupt: bool,
    pub exec: Execution,
    pub config: IntegrationConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            min_dim: 2,
            max_dim: 4,
            trials: 5,
            seed: 0,
            corrupt: false,
            exec: Execution::default(),
            config: IntegrationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug)]
enum Job {
    Lemmas,
    Structure,
    Staged,
    Golden,
    Oracle(usize),
}

/// Per-trial generator, independent of execution order.
pub fn trial_rng(seed: u64, dim: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((dim as u64) << 32) | trial as u64);
    rng
}

/// Random complex vector with components in the unit square.
pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn build(dim: usize, order: RowOrder, corrupt: bool) -> Result<Algebra> {
    let mut basis = build_ordered_basis(dim, order)?;
    if corrupt {
        let last = basis.len() - 1;
        basis.swap_for_testing(0, last);
    }
    Algebra::from_basis(basis)
}

pub fn run_verification(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.min_dim < 2 {
        return Err(Error::InvalidDimension(opts.min_dim));
    }
    if opts.max_dim < opts.min_dim {
        return Err(Error::Config("empty dimension range".into()));
    }
    opts.config.validate()?;
    let mut algebras = Vec::new();
    let mut jobs = Vec::new();
    for dim in opts.min_dim..=opts.max_dim {
        algebras.push(build(dim, RowOrder::Ascending, opts.corrupt)?);
        jobs.extend([(dim, Job::Lemmas), (dim, Job::Structure), (dim, Job::Staged)]);
        if reference_system(dim).is_some() {
            jobs.push((dim, Job::Golden));
        }
        jobs.extend((0..opts.trials).map(|t| (dim, Job::Oracle(t))));
    }
    let checks = opts.exec.map(&jobs, |&(dim, job)| {
        let alg = &algebras[dim - opts.min_dim];
        run_job(alg, dim, job, opts).unwrap_or_else(|e| CheckResult {
            name: job_name(job).into(),
            n: dim,
            trial: trial_of(job),
            passed: false,
            detail: e.to_string(),
        })
    });
    Ok(VerifyReport {
        schema_version: REPORT_VERSION,
        seed: opts.seed,
        trials: opts.trials,
        checks,
    })
}

fn job_name(job: Job) -> &'static str {
    match job {
        Job::Lemmas => "lemmas",
        Job::Structure => "structure",
        Job::Staged => "staged-vs-dense",
        Job::Golden => "golden",
        Job::Oracle(_) => "oracle",
    }
}

fn trial_of(job: Job) -> Option<usize> {
    match job {
        Job::Oracle(t) => Some(t),
        _ => None,
    }
}

fn run_job(alg: &Algebra, dim: usize, job: Job, opts: &VerifyOptions) -> Result<CheckResult> {
    let (passed, detail) = match job {
        Job::Lemmas => {
            let report = check_algebraic_properties_with(alg, opts.seed, Execution::Sequential);
            let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
            (failed.is_empty(), if failed.is_empty() { "all properties hold".into() } else { format!("failed: {}", failed.join(", ")) })
        }
        Job::Structure => {
            derive_hierarchy_for(alg)?;
            let mut rng = trial_rng(opts.seed, dim, usize::MAX >> 32);
            let mut worst = 0.0f64;
            for _ in 0..opts.trials.max(1) {
                let amat = assemble_a_numeric(alg, &random_vec(&mut rng, alg.len()))?;
                worst = worst.max(below_block_diagonal(alg, &amat));
            }
            (worst == 0.0, format!("largest entry below the block diagonal {worst:e}"))
        }
        Job::Staged => {
            let mut rng = trial_rng(opts.seed, dim, (usize::MAX >> 32) - 1);
            let mut worst = 0.0f64;
            for _ in 0..opts.trials.max(1) {
                let u = random_vec(&mut rng, alg.len());
                let a = random_vec(&mut rng, alg.len());
                worst = worst.max(relative_error(&rhs(alg, &u, &a)?, &dense_rhs(alg, &u, &a)?));
            }
            (worst <= STAGED_REL_TOL, format!("max relative error {worst:e}"))
        }
        Job::Golden => {
            let reference_alg = build(dim, REFERENCE_ORDER, opts.corrupt)?;
            let mismatches = compare_with_reference(&derive_hierarchy_for(&reference_alg)?)?;
            let detail = match mismatches.first() {
                None => "matches reference".into(),
                Some(m) => format!("{} mismatches, first at {}: expected {}, got {}", mismatches.len(), m.location, m.expected, m.got),
            };
            (mismatches.is_empty(), detail)
        }
        Job::Oracle(trial) => {
            let seed = trial_rng(opts.seed, dim, trial).random::<u64>();
            let signal = Signal::new(
                dim,
                alg.basis.order(),
                SignalSpec::RandomHamiltonian {
                    seed,
                    modes: 3,
                    max_norm: 5.0,
                    omega: std::f64::consts::PI,
                },
            )?;
            let wn = integrate_wn_with(alg, &signal, &opts.config)?;
            let direct = integrate_direct(&signal, &opts.config.oracle())?;
            let m = compare(&wn, &direct)?;
            let (unitarity, det) = (wn.max_unitarity_defect(), wn.max_det_defect());
            (
                m.max_frobenius < ORACLE_FROBENIUS_TOL && unitarity < UNITARITY_TOL && det < DET_TOL,
                format!(
                    "max |K_wn - K_direct|_F {:e}, unitarity {unitarity:e}, det {det:e}, charts {}",
                    m.max_frobenius,
                    wn.chart_switches.len() + 1
                ),
            )
        }
    };
    Ok(CheckResult {
        name: job_name(job).into(),
        n: dim,
        trial: trial_of(job),
        passed,
        detail,
    })
}

/// `max_i |x_i - y_i| / max(max_i |y_i|, 1)`.
pub fn relative_error(x: &[C64], y: &[C64]) -> f64 {
    let scale = y.iter().map(|z| z.norm()).fold(1.0, f64::max);
    x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions {
            min_dim: 2,
            max_dim: 3,
            trials: 2,
            seed: 7,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn clean_battery_passes() {
        let report = run_verification(&small()).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(report.checks.len(), 2 * (4 + 2));
    }

    #[test]
    fn corrupted_ordering_fails() {
        let report = run_verification(&VerifyOptions { corrupt: true, ..small() }).unwrap();
        assert!(!report.passed());
        assert!(report.failures().any(|c| c.name == "lemmas"));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let seq = run_verification(&VerifyOptions { exec: Execution::Sequential, ..small() }).unwrap();
        let par = run_verification(&VerifyOptions { exec: Execution::Parallel, ..small() }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(run_verification(&VerifyOptions { min_dim: 1, ..small() }).is_err());
        assert!(run_verification(&VerifyOptions { min_dim: 4, max_dim: 3, ..small() }).is_err());
    }
}
