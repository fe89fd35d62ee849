//! The ordered basis of sl(N,C), its block partition into abelian
//! subalgebras, and exact structure constants.
//!
//! Generators are single-entry matrices `S_pq` (root vectors) and the
//! diagonal differences `S_ll - S_{l+1,l+1}` (Cartan elements). The upper
//! root vectors come first, grouped by column from the last column to the
//! second; then the Cartan elements; then the transposes of the upper root
//! vectors in reverse order.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// 1-based label of a generator `X_m`, `1 <= m <= N^2 - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeneratorIndex(usize);

impl GeneratorIndex {
    pub fn new(m: usize, dim: usize) -> Option<Self> {
        (1..dim).contains(&m).then_some(Self(m))
    }

    pub fn from_pos(pos: usize) -> Self {
        Self(pos + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// 0-based position in coefficient vectors.
    pub fn pos(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for GeneratorIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X_{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    UpperRoot,
    Cartan,
    LowerRoot,
}

/// Matrix label of a generator. Row and column indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootLabel {
    /// `S_pq`, `p != q`.
    Root { p: usize, q: usize },
    /// `S_ll - S_{l+1,l+1}`.
    Cartan { l: usize },
}

impl fmt::Display for RootLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RootLabel::Root { p, q } => write!(f, "S_{p}{q}"),
            RootLabel::Cartan { l } => write!(f, "S_{l}{l}-S_{}{}", l + 1, l + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisElement {
    pub role: Role,
    pub label: RootLabel,
}

impl BasisElement {
    /// Nonzero entries as 0-based `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, i64)> {
        match self.label {
            RootLabel::Root { p, q } => vec![(p - 1, q - 1, 1)],
            RootLabel::Cartan { l } => vec![(l - 1, l - 1, 1), (l, l, -1)],
        }
    }

    pub fn matrix(&self, dim: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(dim, dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] = C64::new(v as f64, 0.0);
        }
        m
    }

    pub fn is_root(&self) -> bool {
        self.role != Role::Cartan
    }

    pub fn transpose(&self) -> BasisElement {
        match self.label {
            RootLabel::Root { p, q } => BasisElement {
                role: if q > p { Role::LowerRoot } else { Role::UpperRoot },
                label: RootLabel::Root { p: q, q: p },
            },
            RootLabel::Cartan { .. } => *self,
        }
    }
}

/// Order of the root vectors inside one column block.
///
/// `Ascending` lists `S_1q, S_2q, ...` and realizes the positive-root order
/// for the whole of `n_+` (ad of an upper root vector is strictly upper
/// triangular). `Descending` lists `S_{q-1,q}, ..., S_1q`; it is the
/// labelling used by the published low-dimensional worked systems. Both
/// orders share the same block partition and the same hierarchy up to a
/// relabelling inside each block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowOrder {
    #[default]
    Ascending,
    Descending,
}

impl fmt::Display for RowOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowOrder::Ascending => "ascending",
            RowOrder::Descending => "descending",
        })
    }
}

impl std::str::FromStr for RowOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" | "root" => Ok(RowOrder::Ascending),
            "descending" | "worked" => Ok(RowOrder::Descending),
            other => Err(Error::Config(format!("unknown row order `{other}`"))),
        }
    }
}

/// The `N^2 - 1` generators of sl(N,C) in solver order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedBasis {
    dim: usize,
    order: RowOrder,
    elements: Vec<BasisElement>,
}

/// Builds the ordered basis for `N = dim`.
pub fn build_ordered_basis(dim: usize, order: RowOrder) -> Result<OrderedBasis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut upper = Vec::with_capacity(dim * (dim - 1) / 2);
    for q in (2..=dim).rev() {
        let rows: Vec<usize> = match order {
            RowOrder::Ascending => (1..q).collect(),
            RowOrder::Descending => (1..q).rev().collect(),
        };
        upper.extend(rows.into_iter().map(|p| BasisElement {
            role: Role::UpperRoot,
            label: RootLabel::Root { p, q },
        }));
    }
    let mut elements = upper.clone();
    elements.extend((1..dim).map(|l| BasisElement {
        role: Role::Cartan,
        label: RootLabel::Cartan { l },
    }));
    elements.extend(upper.iter().rev().map(BasisElement::transpose));
    Ok(OrderedBasis {
        dim,
        order,
        elements,
    })
}

impl OrderedBasis {
    /// Matrix size `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, `N^2 - 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn order(&self) -> RowOrder {
        self.order
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn element(&self, pos: usize) -> &BasisElement {
        &self.elements[pos]
    }

    /// Number of positive roots, `N(N-1)/2`.
    pub fn num_upper(&self) -> usize {
        self.dim * (self.dim - 1) / 2
    }

    /// 0-based position of the first Cartan generator.
    pub fn cartan_start(&self) -> usize {
        self.num_upper()
    }

    pub fn position_of(&self, label: RootLabel) -> Option<usize> {
        self.elements.iter().position(|e| e.label == label)
    }

    /// Position of the root vector with the opposite root.
    pub fn negative_of(&self, pos: usize) -> Option<usize> {
        match self.elements[pos].label {
            RootLabel::Root { p, q } => self.position_of(RootLabel::Root { p: q, q: p }),
            RootLabel::Cartan { .. } => None,
        }
    }

    /// `Σ c_m X_m` as an `N x N` matrix.
    pub fn combine(&self, coeffs: &[C64]) -> DMatrix<C64> {
        assert_eq!(coeffs.len(), self.len(), "coefficient vector length");
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (e, &c) in self.elements.iter().zip(coeffs) {
            for (i, j, v) in e.entries() {
                m[(i, j)] += c * v as f64;
            }
        }
        m
    }

    /// Root value `α_q(X_cartan)`: the eigenvalue of `ad X_cartan` on `X_q`.
    pub fn cartan_weight(&self, cartan_pos: usize, pos: usize) -> i64 {
        let RootLabel::Cartan { l } = self.elements[cartan_pos].label else {
            panic!("X_{} is not a Cartan generator", cartan_pos + 1);
        };
        match self.elements[pos].label {
            RootLabel::Cartan { .. } => 0,
            RootLabel::Root { p, q } => {
                let d = |i: usize| -> i64 {
                    if i == l {
                        1
                    } else if i == l + 1 {
                        -1
                    } else {
                        0
                    }
                };
                d(p) - d(q)
            }
        }
    }

    /// Swaps two generators. Exists only to exercise the structural checks
    /// with a deliberately broken ordering.
    #[doc(hidden)]
    pub fn swap_for_testing(&mut self, i: usize, j: usize) {
        self.elements.swap(i, j);
    }
}

/// Expands a traceless `N x N` matrix in the ordered basis.
///
/// Root coefficients are read off the off-diagonal entries; the Cartan
/// coefficients are the cumulative sums `c_l = Σ_{j<=l} M_jj`. The trace
/// must not exceed `rel_tol * ||M||_F`.
pub fn expand_in_basis(m: &DMatrix<C64>, basis: &OrderedBasis, rel_tol: f64) -> Result<Vec<C64>> {
    let dim = basis.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    let trace = m.trace().norm();
    let tol = rel_tol * m.norm();
    if trace > tol {
        return Err(Error::NotTraceless { trace, tol });
    }
    Ok(expand_unchecked(m, basis))
}

pub(crate) fn expand_unchecked(m: &DMatrix<C64>, basis: &OrderedBasis) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); basis.len()];
    let mut diag = C64::new(0.0, 0.0);
    for (pos, e) in basis.elements().iter().enumerate() {
        out[pos] = match e.label {
            RootLabel::Root { p, q } => m[(p - 1, q - 1)],
            RootLabel::Cartan { l } => {
                diag += m[(l - 1, l - 1)];
                diag
            }
        };
    }
    out
}

/// Exact expansion of an integer matrix; `None` if it is not in the span.
fn expand_exact(m: &[i64], basis: &OrderedBasis) -> Option<Vec<(usize, i64)>> {
    let dim = basis.dim();
    let mut out = Vec::new();
    let mut cum = 0i64;
    for (pos, e) in basis.elements().iter().enumerate() {
        let c = match e.label {
            RootLabel::Root { p, q } => m[(p - 1) * dim + (q - 1)],
            RootLabel::Cartan { l } => {
                cum += m[(l - 1) * dim + (l - 1)];
                cum
            }
        };
        if c != 0 {
            out.push((pos, c));
        }
    }
    let mut rebuilt = vec![0i64; dim * dim];
    for &(pos, c) in &out {
        for (i, j, v) in basis.element(pos).entries() {
            rebuilt[i * dim + j] += c * v;
        }
    }
    (rebuilt == m).then_some(out)
}

/// Contiguous index range of one abelian block, with its place in the
/// decomposition `a_1 ... a_{N-1}, h, ã_{N-1} ... ã_1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub range: Range<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    /// `a_k`: root vectors above the diagonal in column `N - k + 1`.
    Upper(usize),
    Cartan,
    /// `ã_k`: transposes of `a_k`.
    Lower(usize),
}

/// Index ranges (0-based, half-open) of `J_k`, the Cartan block and `J̃_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubalgebraPartition {
    dim: usize,
    /// `upper[k-1] = J_k`, length `N - k`.
    pub upper: Vec<Range<usize>>,
    pub cartan: Range<usize>,
    /// `lower[k-1] = J̃_k`, length `N - k`.
    pub lower: Vec<Range<usize>>,
}

pub fn build_partition(basis: &OrderedBasis) -> SubalgebraPartition {
    let dim = basis.dim();
    let n = basis.len();
    let upper: Vec<Range<usize>> = (1..dim)
        .map(|k| {
            let start = dim * (k - 1) - k * (k - 1) / 2;
            start..start + dim - k
        })
        .collect();
    let h = basis.cartan_start();
    let lower = upper.iter().map(|r| n - r.end..n - r.start).collect();
    SubalgebraPartition {
        dim,
        upper,
        cartan: h..h + dim - 1,
        lower,
    }
}

impl SubalgebraPartition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All `2N - 1` blocks in increasing index order.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out: Vec<Block> = self
            .upper
            .iter()
            .enumerate()
            .map(|(i, r)| Block {
                kind: BlockKind::Upper(i + 1),
                range: r.clone(),
            })
            .collect();
        out.push(Block {
            kind: BlockKind::Cartan,
            range: self.cartan.clone(),
        });
        out.extend(self.lower.iter().enumerate().rev().map(|(i, r)| Block {
            kind: BlockKind::Lower(i + 1),
            range: r.clone(),
        }));
        out
    }

    /// Block number (into [`Self::blocks`]) of every position.
    pub fn block_of(&self) -> Vec<usize> {
        let blocks = self.blocks();
        let n = blocks.last().map_or(0, |b| b.range.end);
        let mut out = vec![0; n];
        for (b, block) in blocks.iter().enumerate() {
            for pos in block.range.clone() {
                out[pos] = b;
            }
        }
        out
    }

    /// Summand of the decomposition `a_1 ⊕ ... ⊕ a_{k-1} ⊕ (b_k ⊕ h ⊕ b̃_k) ⊕
    /// ã_{k-1} ⊕ ... ⊕ ã_1` holding each position. Summands are numbered
    /// `0..2k-1`, with the middle block numbered `k - 1`.
    pub fn summand_of(&self, k: usize) -> Vec<usize> {
        let n = self.cartan.end + self.lower.iter().map(|r| r.len()).sum::<usize>();
        let mut out = vec![k - 1; n];
        for l in 1..k {
            for pos in self.upper[l - 1].clone() {
                out[pos] = l - 1;
            }
            for pos in self.lower[l - 1].clone() {
                out[pos] = 2 * k - 1 - l;
            }
        }
        out
    }
}

/// Sparse integer structure constants: `[X_p, X_q] = Σ_m c[m][p][q] X_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureTensor {
    n: usize,
    brackets: Vec<Vec<(usize, i64)>>,
}

impl StructureTensor {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Expansion of `[X_p, X_q]` as `(m, c)` pairs, 0-based.
    pub fn bracket(&self, p: usize, q: usize) -> &[(usize, i64)] {
        &self.brackets[p * self.n + q]
    }

    /// `c[m][p][q]`.
    pub fn get(&self, m: usize, p: usize, q: usize) -> i64 {
        self.bracket(p, q)
            .iter()
            .find(|&&(i, _)| i == m)
            .map_or(0, |&(_, c)| c)
    }
}

/// Computes all brackets by integer matrix commutators and re-expands them.
pub fn structure_constants(basis: &OrderedBasis) -> Result<StructureTensor> {
    let dim = basis.dim();
    let n = basis.len();
    let dense: Vec<Vec<i64>> = basis
        .elements()
        .iter()
        .map(|e| {
            let mut m = vec![0i64; dim * dim];
            for (i, j, v) in e.entries() {
                m[i * dim + j] = v;
            }
            m
        })
        .collect();
    let mut brackets = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            let comm = int_commutator(&dense[p], &dense[q], dim);
            let exp = expand_exact(&comm, basis).ok_or(Error::NotClosed { p: p + 1, q: q + 1 })?;
            brackets.push(exp);
        }
    }
    Ok(StructureTensor { n, brackets })
}

fn int_commutator(x: &[i64], y: &[i64], dim: usize) -> Vec<i64> {
    let mut out = vec![0i64; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let (xik, yik) = (x[i * dim + k], y[i * dim + k]);
            if xik == 0 && yik == 0 {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += xik * y[k * dim + j] - yik * x[k * dim + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root(p: usize, q: usize) -> RootLabel {
        RootLabel::Root { p, q }
    }

    fn labels(b: &OrderedBasis) -> Vec<RootLabel> {
        b.elements().iter().map(|e| e.label).collect()
    }

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(
            build_ordered_basis(1, RowOrder::Ascending),
            Err(Error::InvalidDimension(1))
        ));
        assert!(build_ordered_basis(0, RowOrder::Descending).is_err());
    }

    #[test]
    fn sl2_basis() {
        let b = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        assert_eq!(
            labels(&b),
            vec![root(1, 2), RootLabel::Cartan { l: 1 }, root(2, 1)]
        );
        // N = 2 has a single positive root, so both orders agree.
        assert_eq!(labels(&build_ordered_basis(2, RowOrder::Descending).unwrap()), labels(&b));
    }

    #[test]
    fn sl3_basis_both_orders() {
        let b = build_ordered_basis(3, RowOrder::Ascending).unwrap();
        assert_eq!(
            labels(&b),
            vec![
                root(1, 3),
                root(2, 3),
                root(1, 2),
                RootLabel::Cartan { l: 1 },
                RootLabel::Cartan { l: 2 },
                root(2, 1),
                root(3, 2),
                root(3, 1),
            ]
        );
        let d = build_ordered_basis(3, RowOrder::Descending).unwrap();
        assert_eq!(
            labels(&d),
            vec![
                root(2, 3),
                root(1, 3),
                root(1, 2),
                RootLabel::Cartan { l: 1 },
                RootLabel::Cartan { l: 2 },
                root(2, 1),
                root(3, 1),
                root(3, 2),
            ]
        );
    }

    #[test]
    fn upper_index_formula_matches_ascending_order() {
        // m = (N+q-1)(N-q)/2 + p for S_pq, p < q.
        for dim in 2..=7 {
            let b = build_ordered_basis(dim, RowOrder::Ascending).unwrap();
            for q in 2..=dim {
                for p in 1..q {
                    let m = (dim + q - 1) * (dim - q) / 2 + p;
                    assert_eq!(b.position_of(root(p, q)), Some(m - 1));
                }
            }
        }
    }

    #[test]
    fn lower_elements_are_reversed_transposes() {
        for order in [RowOrder::Ascending, RowOrder::Descending] {
            for dim in 2..=6 {
                let b = build_ordered_basis(dim, order).unwrap();
                let n = b.len();
                for m in 0..b.num_upper() {
                    assert_eq!(b.element(n - 1 - m), &b.element(m).transpose());
                    assert_eq!(b.element(n - 1 - m).role, Role::LowerRoot);
                }
            }
        }
    }

    #[test]
    fn partition_sl4() {
        let b = build_ordered_basis(4, RowOrder::Ascending).unwrap();
        let p = build_partition(&b);
        assert_eq!(p.upper, vec![0..3, 3..5, 5..6]);
        assert_eq!(p.cartan, 6..9);
        assert_eq!(p.lower, vec![12..15, 10..12, 9..10]);
        let j1: Vec<_> = p.upper[0].clone().map(|i| b.element(i).label).collect();
        assert_eq!(j1, vec![root(1, 4), root(2, 4), root(3, 4)]);
        let sizes: Vec<usize> = p.blocks().iter().map(|b| b.range.len()).collect();
        assert_eq!(sizes, vec![3, 2, 1, 3, 1, 2, 3]);
    }

    #[test]
    fn partition_small() {
        let b2 = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let p2 = build_partition(&b2);
        assert_eq!((p2.upper.len(), p2.upper[0].clone()), (1, 0..1));
        assert_eq!(p2.cartan, 1..2);
        assert_eq!((p2.lower.len(), p2.lower[0].clone()), (1, 2..3));
        let b3 = build_ordered_basis(3, RowOrder::Ascending).unwrap();
        let p3 = build_partition(&b3);
        assert_eq!(p3.upper, vec![0..2, 2..3]);
        assert_eq!(p3.cartan, 3..5);
        assert_eq!(p3.lower, vec![6..8, 5..6]);
    }

    #[test]
    fn partition_blocks_are_columns_and_cover() {
        for order in [RowOrder::Ascending, RowOrder::Descending] {
            for dim in 2..=6 {
                let b = build_ordered_basis(dim, order).unwrap();
                let p = build_partition(&b);
                let mut seen = vec![0; b.len()];
                for blk in p.blocks() {
                    for i in blk.range.clone() {
                        seen[i] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1));
                for (k, r) in p.upper.iter().enumerate() {
                    assert_eq!(r.len(), dim - k - 1);
                    for i in r.clone() {
                        let RootLabel::Root { p: row, q } = b.element(i).label else { panic!() };
                        assert_eq!(q, dim - k);
                        assert!(row < q);
                    }
                }
            }
        }
    }

    #[test]
    fn sl2_brackets() {
        let b = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let t = structure_constants(&b).unwrap();
        assert_eq!(t.bracket(0, 2), &[(1, 1)]);
        assert_eq!(t.bracket(0, 1), &[(0, -2)]);
        for p in 0..3 {
            assert!(t.bracket(p, p).is_empty());
        }
    }

    #[test]
    fn structure_constants_follow_elementary_commutators() {
        // [S_ij, S_kl] = δ_kj S_il - δ_il S_kj
        let dim = 4;
        let b = build_ordered_basis(dim, RowOrder::Ascending).unwrap();
        let t = structure_constants(&b).unwrap();
        for p in 0..b.len() {
            for q in 0..b.len() {
                let (RootLabel::Root { p: i, q: j }, RootLabel::Root { p: k, q: l }) =
                    (b.element(p).label, b.element(q).label)
                else {
                    continue;
                };
                let mut expected = DMatrix::<C64>::zeros(dim, dim);
                if k == j {
                    expected[(i - 1, l - 1)] += C64::new(1.0, 0.0);
                }
                if i == l {
                    expected[(k - 1, j - 1)] -= C64::new(1.0, 0.0);
                }
                let mut coeffs = vec![C64::new(0.0, 0.0); b.len()];
                for &(m, c) in t.bracket(p, q) {
                    coeffs[m] = C64::new(c as f64, 0.0);
                }
                assert_eq!(b.combine(&coeffs), expected, "[X{}, X{}]", p + 1, q + 1);
            }
        }
    }

    #[test]
    fn antisymmetry_and_jacobi() {
        for dim in 2..=5 {
            let b = build_ordered_basis(dim, RowOrder::Ascending).unwrap();
            let t = structure_constants(&b).unwrap();
            let n = b.len();
            for p in 0..n {
                for q in 0..n {
                    for m in 0..n {
                        assert_eq!(t.get(m, p, q), -t.get(m, q, p));
                    }
                }
            }
            // [X_p,[X_q,X_r]] + cyclic = 0
            let nested = |p: usize, q: usize, r: usize| {
                let mut acc = vec![0i64; n];
                for &(s, c) in t.bracket(q, r) {
                    for &(m, d) in t.bracket(p, s) {
                        acc[m] += c * d;
                    }
                }
                acc
            };
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        let (x, y, z) = (nested(p, q, r), nested(q, r, p), nested(r, p, q));
                        assert!((0..n).all(|m| x[m] + y[m] + z[m] == 0));
                    }
                }
            }
        }
    }

    #[test]
    fn expansion_examples() {
        let b2 = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let s12 = b2.element(0).matrix(2);
        assert_eq!(expand_in_basis(&s12, &b2, 1e-12).unwrap(), vec![one, zero, zero]);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![i, -i]));
        assert_eq!(expand_in_basis(&d, &b2, 1e-12).unwrap(), vec![zero, i, zero]);

        let b3 = build_ordered_basis(3, RowOrder::Ascending).unwrap();
        let (d1, d2) = (C64::new(0.3, -1.0), C64::new(-1.1, 0.25));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![d1, d2, -d1 - d2]));
        let a = expand_in_basis(&d, &b3, 1e-12).unwrap();
        assert_eq!(a[3], d1);
        assert_eq!(a[4], d1 + d2);
    }

    #[test]
    fn expansion_rejects_trace() {
        let b = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        let m = DMatrix::<C64>::identity(2, 2);
        match expand_in_basis(&m, &b, 1e-12) {
            Err(Error::NotTraceless { trace, .. }) => assert!((trace - 2.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cartan_weights_sl2() {
        let b = build_ordered_basis(2, RowOrder::Ascending).unwrap();
        assert_eq!(
            (0..3).map(|q| b.cartan_weight(1, q)).collect::<Vec<_>>(),
            vec![2, 0, -2]
        );
    }
}
