//! Symbolic derivation of the staged hierarchy.
//!
//! Starting from `V = a`, each block `s` in index order strips its own
//! product of factors by applying `exp(-u_i ad X_i)` for each generator of
//! the block. The components of `V` on block `s` are then the right-hand
//! sides of that stage; they are removed and the next block is processed.
//! Components on already processed blocks must stay zero, which is the
//! block triangularity of `A`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::adjoint::AdjointMatrix;
use crate::algebra::{BlockKind, GeneratorIndex, Role, RowOrder};
use crate::context::Algebra;
use crate::error::{Error, Result};
use crate::symbolic::{int, Coeff, ExpForm, Style, SymbolicExpr, Var};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

/// `u' = c + C u + u (uᵀ b)` over the unknowns of one upper block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiStage {
    /// `k` of the block `a_k`.
    pub index: usize,
    pub unknowns: Vec<GeneratorIndex>,
    pub c: Vec<SymbolicExpr>,
    #[serde(rename = "C")]
    pub cmat: Vec<Vec<SymbolicExpr>>,
    pub b: Vec<SymbolicExpr>,
}

/// Right-hand sides given explicitly, one per unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitStage {
    pub unknowns: Vec<GeneratorIndex>,
    pub rhs: Vec<SymbolicExpr>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stage {
    Riccati(RiccatiStage),
    /// Quadratures: no Cartan unknown appears on the right.
    Cartan(ExplicitStage),
    /// Affine in the stage's own unknowns.
    Linear(ExplicitStage),
}

impl Stage {
    pub fn unknowns(&self) -> &[GeneratorIndex] {
        match self {
            Stage::Riccati(r) => &r.unknowns,
            Stage::Cartan(e) | Stage::Linear(e) => &e.unknowns,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Stage::Riccati(_) => "riccati",
            Stage::Cartan(_) => "cartan",
            Stage::Linear(_) => "linear",
        }
    }

    /// Expanded right-hand side for each unknown.
    pub fn rhs_exprs(&self) -> Vec<SymbolicExpr> {
        match self {
            Stage::Riccati(r) => r.rhs_exprs(),
            Stage::Cartan(e) | Stage::Linear(e) => e.rhs.clone(),
        }
    }
}

impl RiccatiStage {
    pub fn rhs_exprs(&self) -> Vec<SymbolicExpr> {
        let us: Vec<SymbolicExpr> = self.unknowns.iter().map(|g| SymbolicExpr::u(g.pos())).collect();
        let mut quad = SymbolicExpr::zero();
        for (bi, ui) in self.b.iter().zip(&us) {
            quad = quad + bi * ui;
        }
        (0..self.unknowns.len())
            .map(|j| {
                let mut e = self.c[j].clone();
                for (cji, ui) in self.cmat[j].iter().zip(&us) {
                    e = e + cji * ui;
                }
                e + &us[j] * &quad
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchySchedule {
    pub dim: usize,
    pub order: RowOrder,
    pub stages: Vec<Stage>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    schema_version: u32,
    #[serde(rename = "N")]
    n: usize,
    ordering: RowOrder,
    stages: Vec<Stage>,
}

impl HierarchySchedule {
    /// `(unknown, rhs)` pairs in stage order.
    pub fn equations(&self) -> Vec<(GeneratorIndex, SymbolicExpr)> {
        self.stages
            .iter()
            .flat_map(|s| s.unknowns().iter().copied().zip(s.rhs_exprs()))
            .collect()
    }

    pub fn num_unknowns(&self) -> usize {
        self.stages.iter().map(|s| s.unknowns().len()).sum()
    }

    /// Evaluates `u'` at `(u, a)`.
    pub fn eval(&self, u: &[C64], a: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); u.len()];
        for (g, e) in self.equations() {
            out[g.pos()] = e.eval(u, a);
        }
        out
    }
}

/// Builds the hierarchy for the standard basis of sl(N,C) in `order`.
pub fn derive_hierarchy(dim: usize, order: RowOrder) -> Result<HierarchySchedule> {
    derive_hierarchy_for(&Algebra::new(dim, order)?)
}

pub fn derive_hierarchy_for(alg: &Algebra) -> Result<HierarchySchedule> {
    let n = alg.len();
    let mut v: Vec<SymbolicExpr> = (0..n).map(SymbolicExpr::a).collect();
    let mut stages = Vec::new();
    let blocks = alg.partition.blocks();
    for (s, block) in blocks.iter().enumerate() {
        let stage_no = s + 1;
        let r = block.range.clone();
        for i in r.clone() {
            apply_exp_symbolic(&alg.ads[i], i, -1, &mut v);
        }
        if let Some(pos) = (0..r.start).find(|&p| !v[p].is_zero()) {
            return Err(Error::BlockTriangularity {
                stage: stage_no,
                position: pos + 1,
            });
        }
        let exprs: Vec<SymbolicExpr> = r.clone().map(|p| std::mem::take(&mut v[p])).collect();
        let unknowns: Vec<GeneratorIndex> = r.clone().map(GeneratorIndex::from_pos).collect();
        let own: Vec<usize> = r.clone().collect();
        check_locality(stage_no, &exprs, r.end)?;
        let stage = match block.kind {
            BlockKind::Upper(k) => Stage::Riccati(split_riccati(stage_no, k, unknowns, &own, &exprs)?),
            BlockKind::Cartan => {
                if exprs.iter().any(|e| mentions_any(e, &own)) {
                    return Err(shape(stage_no, "Cartan unknown on a quadrature right-hand side"));
                }
                Stage::Cartan(ExplicitStage { unknowns, rhs: exprs })
            }
            BlockKind::Lower(_) => {
                if exprs.iter().any(|e| e.degree_in(&own) > 1) {
                    return Err(shape(stage_no, "lower stage is not affine in its unknowns"));
                }
                Stage::Linear(ExplicitStage { unknowns, rhs: exprs })
            }
        };
        stages.push(stage);
    }
    Ok(HierarchySchedule {
        dim: alg.dim(),
        order: alg.basis.order(),
        stages,
    })
}

fn shape(stage: usize, detail: impl Into<String>) -> Error {
    Error::StageShape {
        stage,
        detail: detail.into(),
    }
}

fn mentions_any(e: &SymbolicExpr, vars: &[usize]) -> bool {
    e.variables().iter().any(|v| matches!(v, Var::U(i) if vars.contains(i)))
}

/// No unknown of a later stage may appear.
fn check_locality(stage: usize, exprs: &[SymbolicExpr], end: usize) -> Result<()> {
    for e in exprs {
        if let Some(Var::U(i)) = e.variables().into_iter().find(|v| matches!(v, Var::U(i) if *i >= end)) {
            return Err(shape(stage, format!("references u{} of a later stage", i + 1)));
        }
    }
    Ok(())
}

fn split_riccati(
    stage: usize,
    k: usize,
    unknowns: Vec<GeneratorIndex>,
    own: &[usize],
    exprs: &[SymbolicExpr],
) -> Result<RiccatiStage> {
    let d = own.len();
    let mut c = vec![SymbolicExpr::zero(); d];
    let mut cmat = vec![vec![SymbolicExpr::zero(); d]; d];
    let mut b: Vec<Option<SymbolicExpr>> = vec![None; d];
    for (j, e) in exprs.iter().enumerate() {
        for (mono, cof) in e.collect_in(own) {
            let factors = mono.factors();
            let idx = |v: Var| match v {
                Var::U(i) => own.iter().position(|&o| o == i).expect("own unknown"),
                Var::A(_) => unreachable!(),
            };
            match mono.degree() {
                0 => c[j] = cof,
                1 => cmat[j][idx(factors[0].0)] = cof,
                2 => {
                    let (p, q) = match factors {
                        [(v, 2)] => (idx(*v), idx(*v)),
                        [(v, 1), (w, 1)] => (idx(*v), idx(*w)),
                        _ => unreachable!(),
                    };
                    let i = match (p == j, q == j) {
                        (true, _) => q,
                        (_, true) => p,
                        _ => return Err(shape(stage, format!("quadratic term {mono:?} in row {} lacks u_j", j + 1))),
                    };
                    match &b[i] {
                        Some(prev) if *prev != cof => {
                            return Err(shape(stage, "quadratic part is not of the form u (uᵀ b)"));
                        }
                        _ => b[i] = Some(cof),
                    }
                }
                deg => return Err(shape(stage, format!("degree {deg} term in a Riccati stage"))),
            }
        }
    }
    let st = RiccatiStage {
        index: k,
        unknowns,
        c,
        cmat,
        b: b.into_iter().map(Option::unwrap_or_default).collect(),
    };
    if st.rhs_exprs() != exprs {
        return Err(shape(stage, "quadratic part is not of the form u (uᵀ b)"));
    }
    for e in st.c.iter().chain(st.b.iter()).chain(st.cmat.iter().flatten()) {
        if mentions_any(e, own) {
            return Err(shape(stage, "Riccati data depends on the stage's own unknowns"));
        }
    }
    Ok(st)
}

/// `v <- exp(sign * u_var * ad) v`, symbolically.
pub fn apply_exp_symbolic(ad: &AdjointMatrix, var: usize, sign: i64, v: &mut [SymbolicExpr]) {
    match ad.role() {
        Role::Cartan => {
            for (q, w) in ad.diagonal().into_iter().enumerate() {
                if w != 0 && !v[q].is_zero() {
                    v[q] = v[q].mul_exp(&ExpForm::new(vec![(var, (sign * w) as i32)]));
                }
            }
        }
        Role::UpperRoot | Role::LowerRoot => {
            let first = sparse_apply(ad, v);
            if first.iter().all(SymbolicExpr::is_zero) {
                return;
            }
            let second = sparse_apply(ad, &first);
            let u = SymbolicExpr::u(var);
            let half_u2 = (&u * &u).scale(Coeff::new(Rational64::new(1, 2), Rational64::zero()));
            let su = u.scale(int(sign));
            for ((x, f), s) in v.iter_mut().zip(first).zip(second) {
                if !f.is_zero() {
                    x.add_assign_ref(&(&su * &f));
                }
                if !s.is_zero() {
                    x.add_assign_ref(&(&half_u2 * &s));
                }
            }
        }
    }
}

fn sparse_apply(ad: &AdjointMatrix, v: &[SymbolicExpr]) -> Vec<SymbolicExpr> {
    let mut w = vec![SymbolicExpr::zero(); v.len()];
    for &(r, c, val) in ad.entries() {
        if !v[c].is_zero() {
            w[r].add_scaled(&v[c], int(val));
        }
    }
    w
}

/// Symbolic `A(u)`, column `l` being `Π_{k<l} exp(u_k ad X_k) e_l`.
pub fn assemble_a_symbolic(alg: &Algebra) -> DMatrix<SymbolicExpr> {
    let n = alg.len();
    let mut out = DMatrix::from_element(n, n, SymbolicExpr::zero());
    for l in 0..n {
        let mut col = vec![SymbolicExpr::zero(); n];
        col[l] = SymbolicExpr::constant(int(1));
        for k in (0..l).rev() {
            apply_exp_symbolic(&alg.ads[k], k, 1, &mut col);
        }
        for (r, e) in col.into_iter().enumerate() {
            out[(r, l)] = e;
        }
    }
    out
}

/// Output formats for [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Latex,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Format::Plain),
            "latex" => Ok(Format::Latex),
            "json" => Ok(Format::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Plain => "plain",
            Format::Latex => "latex",
            Format::Json => "json",
        })
    }
}

/// Deterministic rendering. Plain and LaTeX group every right-hand side by
/// the stage's own unknowns and exponential factors.
pub fn emit(schedule: &HierarchySchedule, format: Format) -> String {
    match format {
        Format::Json => {
            let repr = ScheduleRepr {
                schema_version: SCHEMA_VERSION,
                n: schedule.dim,
                ordering: schedule.order,
                stages: schedule.stages.clone(),
            };
            let mut s = serde_json::to_string_pretty(&repr).expect("schedule serializes");
            s.push('\n');
            s
        }
        Format::Plain | Format::Latex => {
            let style = if format == Format::Plain { Style::Plain } else { Style::Latex };
            let mut lines = Vec::new();
            for stage in &schedule.stages {
                let own: Vec<usize> = stage.unknowns().iter().map(|g| g.pos()).collect();
                for (g, e) in stage.unknowns().iter().zip(stage.rhs_exprs()) {
                    let body = e.render_grouped(&own, style);
                    lines.push(match style {
                        Style::Plain => format!("u{}' = {body}", g.get()),
                        Style::Latex => format!("u_{{{}}}' &= {body} \\\\", g.get()),
                    });
                }
            }
            let mut out = String::new();
            if style == Style::Latex {
                out.push_str("\\begin{aligned}\n");
            }
            for l in lines {
                out.push_str(&l);
                out.push('\n');
            }
            if style == Style::Latex {
                out.push_str("\\end{aligned}\n");
            }
            out
        }
    }
}

/// Parses the JSON form produced by [`emit`].
pub fn parse_schedule(json: &str) -> Result<HierarchySchedule> {
    let repr: ScheduleRepr = serde_json::from_str(json)?;
    if repr.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "schedule schema version {} (expected {SCHEMA_VERSION})",
            repr.schema_version
        )));
    }
    if repr.n < 2 {
        return Err(Error::InvalidDimension(repr.n));
    }
    let schedule = HierarchySchedule {
        dim: repr.n,
        order: repr.ordering,
        stages: repr.stages,
    };
    let mut seen: Vec<usize> = schedule.stages.iter().flat_map(|s| s.unknowns().iter().map(|g| g.get())).collect();
    seen.sort_unstable();
    if seen != (1..repr.n * repr.n).collect::<Vec<_>>() {
        return Err(Error::Schema("stage unknowns do not cover 1..N^2-1 exactly once".into()));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> SymbolicExpr {
        SymbolicExpr::parse(s).unwrap()
    }

    #[test]
    fn sl2_hierarchy() {
        let s = derive_hierarchy(2, RowOrder::Ascending).unwrap();
        assert_eq!(s.stages.len(), 3);
        let eqs: Vec<_> = s.equations().into_iter().map(|(_, e)| e).collect();
        assert_eq!(eqs, vec![p("a1 + 2 a2 u1 - a3 u1^2"), p("a2 - a3 u1"), p("a3 e^(2 u2)")]);
        assert_eq!(
            emit(&s, Format::Plain),
            "u1' = a1 + 2 a2 u1 - a3 u1^2\nu2' = a2 - a3 u1\nu3' = a3 e^(2 u2)\n"
        );
    }

    #[test]
    fn sl3_ascending_hierarchy() {
        let s = derive_hierarchy(3, RowOrder::Ascending).unwrap();
        let eqs: Vec<_> = s.equations().into_iter().map(|(_, e)| e).collect();
        let expected = [
            "a1 + a3 u2 + (a4 + a5) u1 - a7 u1 u2 - a8 u1^2",
            "a2 - a4 u2 + 2 a5 u2 + a6 u1 - a7 u2^2 - a8 u1 u2",
            "a3 + 2 a4 u3 - a5 u3 - a6 u3^2 - a7 u1 + a7 u2 u3 - a8 u1 u3 + a8 u2 u3^2",
            "a4 - a6 u3 - a8 u1 + a8 u2 u3",
            "a5 - a7 u2 - a8 u1",
            "(a6 - a8 u2) e^(2 u4 - u5)",
            "(a7 + a8 u3) e^(-u4 + 2 u5)",
            "(a7 + a8 u3) u6 e^(-u4 + 2 u5) + a8 e^(u4 + u5)",
        ];
        for (i, (got, want)) in eqs.iter().zip(expected).enumerate() {
            assert_eq!(*got, p(want), "u{}'", i + 1);
        }
    }

    #[test]
    fn stage_kinds_and_sizes() {
        let s = derive_hierarchy(4, RowOrder::Ascending).unwrap();
        let kinds: Vec<_> = s.stages.iter().map(Stage::kind).collect();
        assert_eq!(kinds, ["riccati", "riccati", "riccati", "cartan", "linear", "linear", "linear"]);
        let sizes: Vec<_> = s.stages.iter().map(|st| st.unknowns().len()).collect();
        assert_eq!(sizes, [3, 2, 1, 3, 1, 2, 3]);
        assert_eq!(s.num_unknowns(), 15);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let s = derive_hierarchy(3, RowOrder::Descending).unwrap();
        let text = emit(&s, Format::Json);
        assert_eq!(parse_schedule(&text).unwrap(), s);
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse_schedule(&bumped), Err(Error::Schema(_))));
        assert!(matches!("yaml".parse::<Format>(), Err(Error::UnknownFormat(_))));
    }

    #[test]
    fn latex_emits_aligned_block() {
        let s = derive_hierarchy(2, RowOrder::Ascending).unwrap();
        let tex = emit(&s, Format::Latex);
        assert!(tex.starts_with("\\begin{aligned}\n"));
        assert!(tex.contains("u_{3}' &= a_{3} e^{2u_{2}} \\\\"));
    }

    #[test]
    fn corrupted_ordering_breaks_triangularity() {
        // Exchanges S_12 and S_31.
        let mut basis = crate::algebra::build_ordered_basis(3, RowOrder::Ascending).unwrap();
        basis.swap_for_testing(2, 7);
        let alg = Algebra::from_basis(basis).unwrap();
        assert!(matches!(
            derive_hierarchy_for(&alg),
            Err(Error::BlockTriangularity { stage: 4, position: 3 })
        ));
    }

    #[test]
    fn transposed_bases_fail_with_errors_not_panics() {
        let n = 8;
        for i in 0..n {
            for j in i + 1..n {
                let mut basis = crate::algebra::build_ordered_basis(3, RowOrder::Ascending).unwrap();
                basis.swap_for_testing(i, j);
                if let Ok(alg) = Algebra::from_basis(basis) {
                    let _ = derive_hierarchy_for(&alg);
                }
            }
        }
    }
}
