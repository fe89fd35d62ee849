//! Adjoint endomorphisms `ad X_m` in the ordered basis and their
//! closed-form exponentials.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::algebra::{GeneratorIndex, OrderedBasis, Role, StructureTensor};
use crate::C64;

/// Sparse integer matrix of `ad X_m`; column `q` is the expansion of
/// `[X_m, X_q]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjointMatrix {
    source: GeneratorIndex,
    role: Role,
    n: usize,
    /// `(row, col, value)`, sorted by column then row.
    entries: Vec<(usize, usize, i64)>,
}

pub fn ad_matrix(basis: &OrderedBasis, tensor: &StructureTensor, m: GeneratorIndex) -> AdjointMatrix {
    let n = basis.len();
    let src = m.pos();
    let mut entries = Vec::new();
    for q in 0..n {
        for &(row, c) in tensor.bracket(src, q) {
            entries.push((row, q, c));
        }
    }
    AdjointMatrix {
        source: m,
        role: basis.element(src).role,
        n,
        entries,
    }
}

/// All `N^2 - 1` adjoint matrices, indexed by 0-based position.
pub fn ad_matrices(basis: &OrderedBasis, tensor: &StructureTensor) -> Vec<AdjointMatrix> {
    (0..basis.len())
        .map(|p| ad_matrix(basis, tensor, GeneratorIndex::from_pos(p)))
        .collect()
}

impl AdjointMatrix {
    pub fn source(&self) -> GeneratorIndex {
        self.source
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, i64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries
            .iter()
            .find(|&&(r, c, _)| r == row && c == col)
            .map_or(0, |&(_, _, v)| v)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = C64::new(v as f64, 0.0);
        }
        m
    }

    /// Integer power as a sparse map `(row, col) -> value`.
    pub fn power(&self, k: u32) -> BTreeMap<(usize, usize), i64> {
        let mut acc: BTreeMap<(usize, usize), i64> = (0..self.n).map(|i| ((i, i), 1)).collect();
        for _ in 0..k {
            acc = sparse_mul(&self.entries, &acc);
        }
        acc
    }

    /// `w = ad · v`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut w = vec![C64::new(0.0, 0.0); self.n];
        for &(r, c, val) in &self.entries {
            w[r] += v[c] * val as f64;
        }
        w
    }

    /// Diagonal entries; for a Cartan source these are the root values
    /// `α_q(X_m)`.
    pub fn diagonal(&self) -> Vec<i64> {
        let mut d = vec![0; self.n];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// In-place `v <- exp(u ad) v` without forming the dense exponential.
    pub fn apply_exp(&self, u: C64, v: &mut [C64]) {
        match self.role {
            Role::Cartan => {
                for (x, w) in v.iter_mut().zip(self.diagonal()) {
                    if w != 0 {
                        *x *= (u * w as f64).exp();
                    }
                }
            }
            Role::UpperRoot | Role::LowerRoot => {
                let first = self.apply(v);
                let second = self.apply(&first);
                let half_u2 = u * u * 0.5;
                for ((x, f), s) in v.iter_mut().zip(first).zip(second) {
                    *x += u * f + half_u2 * s;
                }
            }
        }
    }
}

fn sparse_mul(
    lhs: &[(usize, usize, i64)],
    rhs: &BTreeMap<(usize, usize), i64>,
) -> BTreeMap<(usize, usize), i64> {
    let mut out = BTreeMap::new();
    for &(r, k, a) in lhs {
        for (&(_, c), &b) in rhs.range((k, 0)..(k + 1, 0)) {
            *out.entry((r, c)).or_insert(0) += a * b;
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

/// Dense `exp(u ad X_m)`, evaluated in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpAdjoint {
    pub source: GeneratorIndex,
    pub u: C64,
    pub matrix: DMatrix<C64>,
}

/// Root vectors: `I + u ad + (u^2/2) ad^2`. Cartan elements: diagonal
/// `exp(u α_q)`.
pub fn exp_ad(ad: &AdjointMatrix, u: C64) -> ExpAdjoint {
    let n = ad.n;
    let mut matrix = DMatrix::identity(n, n);
    match ad.role {
        Role::Cartan => {
            for (q, w) in ad.diagonal().into_iter().enumerate() {
                matrix[(q, q)] = (u * w as f64).exp();
            }
        }
        Role::UpperRoot | Role::LowerRoot => {
            for &(r, c, v) in &ad.entries {
                matrix[(r, c)] += u * v as f64;
            }
            let half_u2 = u * u * 0.5;
            for ((r, c), v) in ad.power(2) {
                matrix[(r, c)] += half_u2 * v as f64;
            }
        }
    }
    ExpAdjoint {
        source: ad.source,
        u,
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_ordered_basis, structure_constants, RowOrder};

    fn setup(dim: usize) -> (OrderedBasis, StructureTensor) {
        let b = build_ordered_basis(dim, RowOrder::Ascending).unwrap();
        let t = structure_constants(&b).unwrap();
        (b, t)
    }

    fn idx(m: usize) -> GeneratorIndex {
        GeneratorIndex::from_pos(m - 1)
    }

    #[test]
    fn sl2_ad_x1() {
        let (b, t) = setup(2);
        let ad = ad_matrix(&b, &t, idx(1));
        let mut e = ad.entries().to_vec();
        e.sort();
        assert_eq!(e, vec![(0, 1, -2), (1, 2, 1)]);
        assert!(ad.power(3).is_empty());
    }

    #[test]
    fn cartan_ad_is_diagonal() {
        for dim in 2..=5 {
            let (b, t) = setup(dim);
            for p in b.cartan_start()..b.cartan_start() + dim - 1 {
                let ad = ad_matrix(&b, &t, GeneratorIndex::from_pos(p));
                assert!(ad.entries().iter().all(|&(r, c, _)| r == c));
            }
        }
    }

    #[test]
    fn exp_ad_zero_is_identity() {
        let (b, t) = setup(3);
        for ad in ad_matrices(&b, &t) {
            assert_eq!(exp_ad(&ad, C64::new(0.0, 0.0)).matrix, DMatrix::identity(8, 8));
        }
    }

    #[test]
    fn sl2_exp_closed_forms() {
        let (b, t) = setup(2);
        let u = C64::new(0.7, -0.4);
        let e1 = exp_ad(&ad_matrix(&b, &t, idx(1)), u).matrix;
        assert_eq!(e1[(0, 2)], -u * u);
        assert_eq!(e1[(0, 1)], -u * 2.0);
        assert_eq!(e1[(1, 2)], u);
        let e2 = exp_ad(&ad_matrix(&b, &t, idx(2)), u).matrix;
        let expected = [(u * 2.0).exp(), C64::new(1.0, 0.0), (-u * 2.0).exp()];
        for q in 0..3 {
            assert_eq!(e2[(q, q)], expected[q]);
        }
        assert_eq!(e2[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn apply_exp_matches_dense() {
        let (b, t) = setup(3);
        let u = C64::new(-0.3, 1.2);
        let v: Vec<C64> = (0..8).map(|i| C64::new(i as f64 * 0.5 - 1.0, 0.1 * i as f64)).collect();
        for ad in ad_matrices(&b, &t) {
            let dense = exp_ad(&ad, u).matrix * nalgebra::DVector::from_vec(v.clone());
            let mut w = v.clone();
            ad.apply_exp(u, &mut w);
            for i in 0..8 {
                assert!((w[i] - dense[i]).norm() < 1e-13);
            }
        }
    }
}
