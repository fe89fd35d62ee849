//! Executable checks of the structural properties the hierarchy relies on:
//! nilpotency of root-vector adjoints, triangularity, invariant subspaces,
//! block-diagonality, and the quadratic closed form of `exp(u ad X)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::exp_ad;
use crate::algebra::{Role, RowOrder};
use crate::context::Algebra;
use crate::exec::Execution;
use crate::C64;

/// Random elements drawn per abelian block.
pub const RANDOM_DRAWS: usize = 10;
/// Relative Frobenius tolerance for the closed-form exponential.
pub const EXP_REL_TOL: f64 = 1e-12;

/// First offending case of a failed check. Indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub generators: Vec<usize>,
    pub entry: Option<(usize, usize)>,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub cases: usize,
    pub violation: Option<Violation>,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub dim: usize,
    pub order: RowOrder,
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(PropertyCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    RootNilpotency,
    RandomNilpotency,
    Triangularity,
    QuadraticImage,
    InvariantSubspaces,
    BlockDiagonal,
    ExpQuadratic,
    ExpInverse,
    IdealChain,
    AbelianBlocks,
    Jacobi,
}

const ALL: [Kind; 11] = [
    Kind::RootNilpotency,
    Kind::RandomNilpotency,
    Kind::Triangularity,
    Kind::QuadraticImage,
    Kind::InvariantSubspaces,
    Kind::BlockDiagonal,
    Kind::ExpQuadratic,
    Kind::ExpInverse,
    Kind::IdealChain,
    Kind::AbelianBlocks,
    Kind::Jacobi,
];

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::RootNilpotency => "root-nilpotency",
            Kind::RandomNilpotency => "random-nilpotency",
            Kind::Triangularity => "triangularity",
            Kind::QuadraticImage => "quadratic-image",
            Kind::InvariantSubspaces => "invariant-subspaces",
            Kind::BlockDiagonal => "block-diagonal",
            Kind::ExpQuadratic => "exp-quadratic",
            Kind::ExpInverse => "exp-inverse",
            Kind::IdealChain => "ideal-chain",
            Kind::AbelianBlocks => "abelian-blocks",
            Kind::Jacobi => "jacobi",
        }
    }
}

pub fn check_algebraic_properties(alg: &Algebra, seed: u64) -> LemmaReport {
    check_algebraic_properties_with(alg, seed, Execution::default())
}

pub fn check_algebraic_properties_with(alg: &Algebra, seed: u64, exec: Execution) -> LemmaReport {
    let checks = exec.map(&ALL, |&kind| {
        let (cases, violation) = match kind {
            Kind::RootNilpotency => root_nilpotency(alg),
            Kind::RandomNilpotency => random_nilpotency(alg, seed),
            Kind::Triangularity => triangularity(alg),
            Kind::QuadraticImage => quadratic_image(alg),
            Kind::InvariantSubspaces => invariant_subspaces(alg, seed),
            Kind::BlockDiagonal => block_diagonal(alg),
            Kind::ExpQuadratic => exp_quadratic(alg, seed),
            Kind::ExpInverse => exp_inverse(alg, seed),
            Kind::IdealChain => ideal_chain(alg),
            Kind::AbelianBlocks => abelian_blocks(alg),
            Kind::Jacobi => jacobi(alg),
        };
        PropertyCheck {
            name: kind.name().to_string(),
            cases,
            violation,
        }
    });
    LemmaReport {
        dim: alg.dim(),
        order: alg.basis.order(),
        seed,
        checks,
    }
}

type Outcome = (usize, Option<Violation>);

fn violation(generators: Vec<usize>, entry: Option<(usize, usize)>, value: f64, detail: impl Into<String>) -> Option<Violation> {
    Some(Violation {
        generators: generators.into_iter().map(|g| g + 1).collect(),
        entry: entry.map(|(r, c)| (r + 1, c + 1)),
        value,
        detail: detail.into(),
    })
}

fn root_positions(alg: &Algebra) -> Vec<usize> {
    (0..alg.len()).filter(|&p| alg.basis.element(p).is_root()).collect()
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// `ad X` for `X = Σ c_i X_i` over the given positions.
fn dense_ad(alg: &Algebra, terms: &[(usize, C64)]) -> DMatrix<C64> {
    let n = alg.len();
    let mut m = DMatrix::zeros(n, n);
    for &(pos, c) in terms {
        for &(r, col, v) in alg.ads[pos].entries() {
            m[(r, col)] += c * v as f64;
        }
    }
    m
}

/// `(block range, k)` for every `J_k` and `J̃_k`.
fn root_blocks(alg: &Algebra) -> Vec<(std::ops::Range<usize>, usize)> {
    let p = &alg.partition;
    let mut out: Vec<_> = p.upper.iter().cloned().zip(1..).collect();
    out.extend(p.lower.iter().cloned().zip(1..));
    out
}

fn root_nilpotency(alg: &Algebra) -> Outcome {
    let roots = root_positions(alg);
    for &m in &roots {
        if let Some((&(r, c), &v)) = alg.ads[m].power(3).iter().next() {
            return (roots.len(), violation(vec![m], Some((r, c)), v as f64, "(ad X)^3 has a nonzero entry"));
        }
    }
    (roots.len(), None)
}

fn random_nilpotency(alg: &Algebra, seed: u64) -> Outcome {
    let mut cases = 0;
    for (i, (range, _)) in root_blocks(alg).into_iter().enumerate() {
        let mut rng = rng_for(seed, 1000 + i as u64);
        for _ in 0..RANDOM_DRAWS {
            let terms: Vec<_> = range.clone().map(|p| (p, random_c64(&mut rng))).collect();
            let x = dense_ad(alg, &terms);
            let cube = &x * &x * &x;
            let scale = x.norm().max(1.0).powi(3);
            cases += 1;
            if cube.norm() > 1e-12 * scale {
                let (r, c) = argmax(&cube);
                return (
                    cases,
                    violation(range.clone().collect(), Some((r, c)), cube.norm() / scale, "(ad X)^3 != 0 for a random X in the block"),
                );
            }
        }
    }
    (cases, None)
}

fn argmax(m: &DMatrix<C64>) -> (usize, usize) {
    let mut best = (0, 0, -1.0);
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if m[(r, c)].norm() > best.2 {
                best = (r, c, m[(r, c)].norm());
            }
        }
    }
    (best.0, best.1)
}

fn triangularity(alg: &Algebra) -> Outcome {
    let roots = root_positions(alg);
    for &m in &roots {
        let upper = alg.basis.element(m).role == Role::UpperRoot;
        for &(r, c, v) in alg.ads[m].entries() {
            let ok = if upper { r < c } else { r > c };
            if !ok {
                let side = if upper { "on or below" } else { "on or above" };
                return (roots.len(), violation(vec![m], Some((r, c)), v as f64, format!("entry {side} the diagonal")));
            }
        }
    }
    (roots.len(), None)
}

/// `(ad X_α)^2` is nonzero only on `X_{-α}`, with image in `g_α`.
fn quadratic_image(alg: &Algebra) -> Outcome {
    let roots = root_positions(alg);
    for &m in &roots {
        let neg = alg.basis.negative_of(m).expect("root has a negative");
        let sq = alg.ads[m].power(2);
        for (&(r, c), &v) in &sq {
            if c != neg || r != m {
                return (roots.len(), violation(vec![m], Some((r, c)), v as f64, "(ad X)^2 reaches outside X_{-α} -> g_α"));
            }
        }
        if sq.is_empty() {
            return (roots.len(), violation(vec![m], None, 0.0, "(ad X)^2 vanishes identically"));
        }
    }
    (roots.len(), None)
}

/// Random elements of `a_k`, `ã_k` map every summand of the level-`k`
/// decomposition into itself.
fn invariant_subspaces(alg: &Algebra, seed: u64) -> Outcome {
    let mut cases = 0;
    for (i, (range, k)) in root_blocks(alg).into_iter().enumerate() {
        let summand = alg.partition.summand_of(k);
        let mut rng = rng_for(seed, 2000 + i as u64);
        for _ in 0..RANDOM_DRAWS {
            let terms: Vec<_> = range.clone().map(|p| (p, random_c64(&mut rng))).collect();
            let x = dense_ad(alg, &terms);
            cases += 1;
            for c in 0..x.ncols() {
                for r in 0..x.nrows() {
                    if summand[r] != summand[c] && x[(r, c)].norm() != 0.0 {
                        return (
                            cases,
                            violation(range.clone().collect(), Some((r, c)), x[(r, c)].norm(), format!("summand {} leaks into summand {}", summand[c], summand[r])),
                        );
                    }
                }
            }
        }
    }
    (cases, None)
}

fn block_diagonal(alg: &Algebra) -> Outcome {
    let mut cases = 0;
    for (range, k) in root_blocks(alg) {
        let summand = alg.partition.summand_of(k);
        for m in range {
            cases += 1;
            for &(r, c, v) in alg.ads[m].entries() {
                if summand[r] != summand[c] {
                    return (cases, violation(vec![m], Some((r, c)), v as f64, "entry outside the block mask"));
                }
            }
        }
    }
    (cases, None)
}

fn sample_parameters(rng: &mut ChaCha8Rng) -> [C64; 3] {
    let mut polar = || {
        let r: f64 = rng.random_range(0.0..10.0);
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        C64::from_polar(r, th)
    };
    [polar(), polar(), C64::new(10.0, 0.0)]
}

fn exp_quadratic(alg: &Algebra, seed: u64) -> Outcome {
    let mut cases = 0;
    for m in 0..alg.len() {
        let mut rng = rng_for(seed, 3000 + m as u64);
        let dense = alg.ads[m].to_dense();
        for u in sample_parameters(&mut rng) {
            cases += 1;
            let closed = exp_ad(&alg.ads[m], u).matrix;
            let generic = (&dense * u).exp();
            let rel = (&closed - &generic).norm() / generic.norm();
            if !(rel < EXP_REL_TOL) {
                return (cases, violation(vec![m], None, rel, format!("relative error at u = {u}")));
            }
        }
    }
    (cases, None)
}

fn exp_inverse(alg: &Algebra, seed: u64) -> Outcome {
    let n = alg.len();
    let mut cases = 0;
    for m in 0..n {
        let mut rng = rng_for(seed, 4000 + m as u64);
        for u in sample_parameters(&mut rng) {
            cases += 1;
            let e = exp_ad(&alg.ads[m], u).matrix;
            let f = exp_ad(&alg.ads[m], -u).matrix;
            let defect = (&e * &f - DMatrix::identity(n, n)).norm() / (e.norm() * f.norm());
            if !(defect < EXP_REL_TOL) {
                return (cases, violation(vec![m], None, defect, format!("exp(u ad) exp(-u ad) != I at u = {u}")));
            }
        }
    }
    (cases, None)
}

/// `[I_k, n_+] ⊆ I_k` for the prefix spans `I_k` of the upper root vectors.
fn ideal_chain(alg: &Algebra) -> Outcome {
    let nu = alg.basis.num_upper();
    for k in 1..=nu {
        for p in 0..k {
            for q in 0..nu {
                if let Some(&(m, c)) = alg.tensor.bracket(p, q).iter().find(|&&(m, _)| m >= k) {
                    return (nu, violation(vec![p, q], Some((m, k - 1)), c as f64, format!("[X_p, X_q] leaves I_{k}")));
                }
            }
        }
    }
    (nu, None)
}

fn abelian_blocks(alg: &Algebra) -> Outcome {
    let blocks = alg.partition.blocks();
    for b in &blocks {
        for p in b.range.clone() {
            for q in b.range.clone() {
                if let Some(&(m, c)) = alg.tensor.bracket(p, q).first() {
                    return (blocks.len(), violation(vec![p, q], Some((m, m)), c as f64, "bracket inside a block is nonzero"));
                }
            }
        }
    }
    (blocks.len(), None)
}

fn jacobi(alg: &Algebra) -> Outcome {
    let n = alg.len();
    let t = &alg.tensor;
    let nested = |p: usize, q: usize, r: usize, acc: &mut [i64]| {
        for &(s, c) in t.bracket(q, r) {
            for &(m, d) in t.bracket(p, s) {
                acc[m] += c * d;
            }
        }
    };
    let mut acc = vec![0i64; n];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                acc.iter_mut().for_each(|x| *x = 0);
                nested(p, q, r, &mut acc);
                nested(q, r, p, &mut acc);
                nested(r, p, q, &mut acc);
                if let Some((m, &v)) = acc.iter().enumerate().find(|(_, &v)| v != 0) {
                    return (n * n * n, violation(vec![p, q, r], Some((m, m)), v as f64, "cyclic sum of nested brackets"));
                }
            }
        }
    }
    (n * n * n, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_in_ascending_order() {
        for dim in 2..=4 {
            let alg = Algebra::new(dim, RowOrder::Ascending).unwrap();
            let report = check_algebraic_properties(&alg, 7);
            let failed: Vec<_> = report.failures().collect();
            assert!(failed.is_empty(), "N={dim}: {failed:?}");
            assert_eq!(report.checks.len(), ALL.len());
        }
    }

    #[test]
    fn descending_order_breaks_only_the_root_order_checks() {
        let alg = Algebra::new(3, RowOrder::Descending).unwrap();
        let report = check_algebraic_properties(&alg, 7);
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["triangularity", "ideal-chain"]);
    }

    #[test]
    fn sl3_quadratic_image_lands_on_the_opposite_root() {
        let alg = Algebra::new(3, RowOrder::Ascending).unwrap();
        let sq = alg.ads[0].power(2);
        let cols: Vec<usize> = sq.keys().map(|&(_, c)| c).collect();
        // X_1 = S_13, X_8 = S_31.
        assert!(!cols.is_empty() && cols.iter().all(|&c| c == 7));
    }

    #[test]
    fn broken_ordering_is_reported() {
        let mut basis = crate::algebra::build_ordered_basis(3, RowOrder::Ascending).unwrap();
        basis.swap_for_testing(0, 5);
        let alg = Algebra::from_basis(basis).unwrap();
        let report = check_algebraic_properties(&alg, 1);
        let v = report.check("block-diagonal").unwrap().violation.clone().unwrap();
        assert!(v.entry.is_some());
        assert!(!report.passed());
    }

    #[test]
    fn report_is_independent_of_execution_mode() {
        let alg = Algebra::new(3, RowOrder::Ascending).unwrap();
        assert_eq!(
            check_algebraic_properties_with(&alg, 3, Execution::Sequential),
            check_algebraic_properties_with(&alg, 3, Execution::Parallel)
        );
    }
}
