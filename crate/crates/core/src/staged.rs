//! Numeric coefficient matrix `A(u)` and the staged solve of `A u' = a`.
//!
//! `A` is block upper triangular over the partition blocks, with identity
//! diagonal blocks on the upper and Cartan blocks, so `u'` follows by block
//! back-substitution from the last block.

use nalgebra::DMatrix;

use crate::context::Algebra;
use crate::error::{Error, Result};
use crate::C64;

/// Default condition threshold above which a diagonal block is singular.
pub const DEFAULT_COND_THRESHOLD: f64 = 1e12;

/// Column `l` is `Π_{k<l} exp(u_k ad X_k) e_l`, applied innermost first.
pub fn assemble_a_numeric(alg: &Algebra, u: &[C64]) -> Result<DMatrix<C64>> {
    let n = alg.len();
    check_len(n, u.len())?;
    let mut a = DMatrix::zeros(n, n);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for l in 0..n {
        col.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        col[l] = C64::new(1.0, 0.0);
        for k in (0..l).rev() {
            if u[k] != C64::new(0.0, 0.0) {
                alg.ads[k].apply_exp(u[k], &mut col);
            }
        }
        a.set_column(l, &nalgebra::DVector::from_column_slice(&col));
    }
    Ok(a)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// `‖B‖_1 ‖B^{-1}‖_1`, or infinity if `B` is numerically singular.
pub fn condition_estimate(b: &DMatrix<C64>) -> (f64, Option<DMatrix<C64>>) {
    let norm1 = |m: &DMatrix<C64>| {
        (0..m.ncols())
            .map(|c| m.column(c).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match b.clone().lu().try_inverse() {
        Some(inv) => {
            let cond = norm1(b) * norm1(&inv);
            (if cond.is_finite() { cond } else { f64::INFINITY }, Some(inv))
        }
        None => (f64::INFINITY, None),
    }
}

/// Staged solve of `A(u) u' = a`. Blocks are numbered from 1 in index
/// order; a diagonal block with condition estimate above `cond_threshold`
/// yields [`Error::SingularBlock`].
pub fn rhs_with(alg: &Algebra, u: &[C64], a: &[C64], cond_threshold: f64) -> Result<Vec<C64>> {
    let n = alg.len();
    check_len(n, a.len())?;
    let amat = assemble_a_numeric(alg, u)?;
    let blocks = alg.partition.blocks();
    let mut du = vec![C64::new(0.0, 0.0); n];
    for (s, block) in blocks.iter().enumerate().rev() {
        let r = block.range.clone();
        let mut rhs: Vec<C64> = a[r.clone()].to_vec();
        for (i, row) in r.clone().enumerate() {
            for col in r.end..n {
                rhs[i] -= amat[(row, col)] * du[col];
            }
        }
        let diag = amat.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let (cond, inv) = condition_estimate(&diag);
        let inv = match inv {
            Some(inv) if cond <= cond_threshold => inv,
            _ => return Err(Error::SingularBlock { stage: s + 1, cond }),
        };
        let sol = inv * nalgebra::DVector::from_vec(rhs);
        for (i, pos) in r.enumerate() {
            du[pos] = sol[i];
        }
    }
    Ok(du)
}

pub fn rhs(alg: &Algebra, u: &[C64], a: &[C64]) -> Result<Vec<C64>> {
    rhs_with(alg, u, a, DEFAULT_COND_THRESHOLD)
}

/// Full dense LU solve of `A(u) u' = a`, ignoring the block structure.
pub fn dense_rhs(alg: &Algebra, u: &[C64], a: &[C64]) -> Result<Vec<C64>> {
    check_len(alg.len(), a.len())?;
    let amat = assemble_a_numeric(alg, u)?;
    let sol = amat
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(a))
        .ok_or(Error::SingularBlock {
            stage: 0,
            cond: f64::INFINITY,
        })?;
    Ok(sol.iter().copied().collect())
}

/// Largest entry magnitude below the block diagonal, relative to `‖A‖_max`.
pub fn below_block_diagonal(alg: &Algebra, amat: &DMatrix<C64>) -> f64 {
    let block = alg.partition.block_of();
    let scale = amat.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let mut worst = 0.0f64;
    for c in 0..amat.ncols() {
        for r in 0..amat.nrows() {
            if block[r] > block[c] {
                worst = worst.max(amat[(r, c)].norm() / scale);
            }
        }
    }
    worst
}
