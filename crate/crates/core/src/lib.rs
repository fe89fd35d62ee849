//! Wei–Norman solver for `dK/dt = M(t) K` on SL(N,C) and SU(N).
//!
//! The solution is written as an ordered product of one-parameter
//! exponentials `K = Π exp(u_k X_k)` over a basis of sl(N,C) chosen so that
//! the equations for the exponents `u_k` split into a hierarchy: coupled
//! Riccati blocks, Cartan quadratures, and linear stages.
//!
//! ```
//! use wei_norman::{derive_hierarchy, emit, Format, RowOrder};
//!
//! let schedule = derive_hierarchy(2, RowOrder::Ascending).unwrap();
//! let text = emit(&schedule, Format::Plain);
//! assert_eq!(text.lines().next(), Some("u1' = a1 + 2 a2 u1 - a3 u1^2"));
//! ```

// `!(x < tol)` is intended: NaN must fail every bound check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod algebra;
pub mod context;
pub mod error;
pub mod exec;
pub mod hierarchy;
pub mod integrate;
pub mod lemmas;
pub mod ode;
pub mod reference;
pub mod signal;
pub mod staged;
pub mod symbolic;
pub mod trajectory;
pub mod verify;

/// Scalar type used throughout.
pub type C64 = num_complex::Complex<f64>;

pub use adjoint::{ad_matrices, ad_matrix, exp_ad, AdjointMatrix, ExpAdjoint};
pub use algebra::{
    build_ordered_basis, build_partition, expand_in_basis, structure_constants, BasisElement,
    Block, BlockKind, GeneratorIndex, OrderedBasis, Role, RootLabel, RowOrder, StructureTensor,
    SubalgebraPartition,
};
pub use context::Algebra;
pub use error::{Error, Result};
pub use exec::Execution;
pub use hierarchy::{derive_hierarchy, emit, parse_schedule, Format, HierarchySchedule, Stage};
pub use integrate::{
    factor_exp, integrate_direct, integrate_wn, reconstruct_k, IntegrationConfig, Method,
    SingularityReport,
};
pub use lemmas::{check_algebraic_properties, LemmaReport};
pub use signal::{Signal, SignalSpec};
pub use staged::{assemble_a_numeric, dense_rhs, rhs};
pub use symbolic::SymbolicExpr;
pub use trajectory::{compare, CompareMetrics, Trajectory};
