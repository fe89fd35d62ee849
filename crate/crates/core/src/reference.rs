//! Reference hierarchies for `N = 2, 3, 4`, written out by hand in the
//! descending row order, and a term-level comparison against derived
//! schedules.
//!
//! For `N = 4` only the three Riccati stages and the total number of
//! unknowns are fixed by reference.

use serde::{Deserialize, Serialize};

use crate::algebra::RowOrder;
use crate::error::Result;
use crate::hierarchy::{HierarchySchedule, Stage};
use crate::symbolic::SymbolicExpr;

/// Row order in which the reference systems are written.
pub const REFERENCE_ORDER: RowOrder = RowOrder::Descending;

#[derive(Clone, Copy, Debug)]
pub enum ReferenceStage {
    Riccati {
        unknowns: &'static [usize],
        c: &'static [&'static str],
        cmat: &'static [&'static [&'static str]],
        b: &'static [&'static str],
    },
    /// Expanded right-hand side per unknown.
    Equations {
        unknowns: &'static [usize],
        rhs: &'static [&'static str],
    },
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceSystem {
    pub dim: usize,
    pub unknowns: usize,
    pub stages: &'static [ReferenceStage],
}

const SL2: &[ReferenceStage] = &[
    ReferenceStage::Equations {
        unknowns: &[1],
        rhs: &["a1 + 2 a2 u1 - a3 u1^2"],
    },
    ReferenceStage::Equations {
        unknowns: &[2],
        rhs: &["a2 - a3 u1"],
    },
    ReferenceStage::Equations {
        unknowns: &[3],
        rhs: &["a3 e^(2 u2)"],
    },
];

const SL3: &[ReferenceStage] = &[
    ReferenceStage::Riccati {
        unknowns: &[1, 2],
        c: &["a1", "a2"],
        cmat: &[&["2 a5 - a4", "a6"], &["a3", "a4 + a5"]],
        b: &["-a8", "-a7"],
    },
    ReferenceStage::Equations {
        unknowns: &[3],
        rhs: &["(a3 - a8 u2) + (2 a4 - a5 + a8 u1 - a7 u2) u3 + (a7 u1 - a6) u3^2"],
    },
    ReferenceStage::Equations {
        unknowns: &[4, 5],
        rhs: &["a4 - a6 u3 + a7 (u1 u3 - u2)", "a5 - a8 u1 - a7 u2"],
    },
    ReferenceStage::Equations {
        unknowns: &[6],
        rhs: &["(a6 - a7 u1) e^(2 u4 - u5)"],
    },
    ReferenceStage::Equations {
        unknowns: &[7, 8],
        rhs: &[
            "(a7 u3 + a8) u6 e^(-u4 + 2 u5) + a7 e^(u4 + u5)",
            "(a8 + a7 u3) e^(-u4 + 2 u5)",
        ],
    },
];

/// Entry `(1, 2)` of the second `N = 4` Riccati matrix as it is commonly
/// quoted. The trailing `- a15` is inconsistent with the dense solve; the
/// reference below omits it.
pub const QUOTED_SL4_C2_ENTRY: &str = "a10 - u2 a13 - a15";

const SL4: &[ReferenceStage] = &[
    ReferenceStage::Riccati {
        unknowns: &[1, 2, 3],
        c: &["a1", "a2", "a3"],
        cmat: &[
            &["-a8 + 2 a9", "a12", "a11"],
            &["a4", "-a7 + a8 + a9", "a10"],
            &["a5", "a6", "a7 + a9"],
        ],
        b: &["-a15", "-a14", "-a13"],
    },
    ReferenceStage::Riccati {
        unknowns: &[4, 5],
        c: &["a4 - a15 u2", "a5 - a15 u3"],
        cmat: &[
            &["-a7 + 2 a8 - a9 - a14 u2 + a15 u1", "a10 - u2 a13"],
            &["a6 - a14 u3", "a7 + a8 - a9 - a13 u3 + a15 u1"],
        ],
        b: &["-a12 + a14 u1", "-a11 + a13 u1"],
    },
    ReferenceStage::Riccati {
        unknowns: &[6],
        c: &["a6 - a12 u5 + a14 u1 u5 - a14 u3"],
        cmat: &[&["2 a7 - a8 - u5 a11 + u4 a12 - u3 a13 + a13 u1 u5 - a14 u1 u4 + u2 a14"]],
        b: &["-a10 + u4 a11 - a13 u1 u4 + a13 u2"],
    },
];

pub fn reference_system(dim: usize) -> Option<ReferenceSystem> {
    let stages = match dim {
        2 => SL2,
        3 => SL3,
        4 => SL4,
        _ => return None,
    };
    Some(ReferenceSystem {
        dim,
        unknowns: dim * dim - 1,
        stages,
    })
}

/// One term-level disagreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub location: String,
    pub expected: String,
    pub got: String,
}

fn parse(s: &str) -> Result<SymbolicExpr> {
    SymbolicExpr::parse(s)
}

fn cmp(out: &mut Vec<Mismatch>, location: String, expected: &str, got: &SymbolicExpr) -> Result<()> {
    let want = parse(expected)?;
    if want != *got {
        out.push(Mismatch {
            location,
            expected: want.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

/// Compares a schedule derived in [`REFERENCE_ORDER`] with the reference
/// system for its dimension. Reference stages map to the leading schedule
/// stages in order.
pub fn compare_with_reference(schedule: &HierarchySchedule) -> Result<Vec<Mismatch>> {
    let Some(reference) = reference_system(schedule.dim) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    if schedule.order != REFERENCE_ORDER {
        out.push(Mismatch {
            location: "ordering".into(),
            expected: REFERENCE_ORDER.to_string(),
            got: schedule.order.to_string(),
        });
        return Ok(out);
    }
    if schedule.num_unknowns() != reference.unknowns {
        out.push(Mismatch {
            location: "unknowns".into(),
            expected: reference.unknowns.to_string(),
            got: schedule.num_unknowns().to_string(),
        });
    }
    let equations = schedule.equations();
    let rhs_of = |u: usize| equations.iter().find(|(g, _)| g.get() == u).map(|(_, e)| e.clone());
    for (s, rs) in reference.stages.iter().enumerate() {
        let stage = schedule.stages.get(s);
        match rs {
            ReferenceStage::Riccati { unknowns, c, cmat, b } => {
                let Some(Stage::Riccati(st)) = stage else {
                    out.push(Mismatch {
                        location: format!("stage {}", s + 1),
                        expected: "riccati".into(),
                        got: stage.map_or("missing", Stage::kind).into(),
                    });
                    continue;
                };
                let got_unknowns: Vec<usize> = st.unknowns.iter().map(|g| g.get()).collect();
                if got_unknowns != *unknowns {
                    out.push(Mismatch {
                        location: format!("stage {} unknowns", s + 1),
                        expected: format!("{unknowns:?}"),
                        got: format!("{got_unknowns:?}"),
                    });
                    continue;
                }
                for (i, want) in c.iter().enumerate() {
                    cmp(&mut out, format!("stage {} c[{}]", s + 1, i + 1), want, &st.c[i])?;
                }
                for (i, row) in cmat.iter().enumerate() {
                    for (j, want) in row.iter().enumerate() {
                        cmp(&mut out, format!("stage {} C[{},{}]", s + 1, i + 1, j + 1), want, &st.cmat[i][j])?;
                    }
                }
                for (i, want) in b.iter().enumerate() {
                    cmp(&mut out, format!("stage {} b[{}]", s + 1, i + 1), want, &st.b[i])?;
                }
            }
            ReferenceStage::Equations { unknowns, rhs } => {
                for (&u, want) in unknowns.iter().zip(rhs.iter()) {
                    let got = rhs_of(u).unwrap_or_default();
                    cmp(&mut out, format!("u{u}'"), want, &got)?;
                }
            }
        }
    }
    Ok(out)
}
