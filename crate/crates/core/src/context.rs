use crate::adjoint::{ad_matrices, AdjointMatrix};
use crate::algebra::{
    build_ordered_basis, build_partition, structure_constants, OrderedBasis, RowOrder,
    StructureTensor, SubalgebraPartition,
};
use crate::error::Result;

/// Everything derived from the ordered basis, built once per `N`.
#[derive(Clone, Debug)]
pub struct Algebra {
    pub basis: OrderedBasis,
    pub tensor: StructureTensor,
    pub partition: SubalgebraPartition,
    pub ads: Vec<AdjointMatrix>,
}

impl Algebra {
    pub fn new(dim: usize, order: RowOrder) -> Result<Self> {
        Self::from_basis(build_ordered_basis(dim, order)?)
    }

    /// Builds the derived data for an arbitrary (possibly reordered) basis.
    pub fn from_basis(basis: OrderedBasis) -> Result<Self> {
        let tensor = structure_constants(&basis)?;
        let partition = build_partition(&basis);
        let ads = ad_matrices(&basis, &tensor);
        Ok(Algebra {
            basis,
            tensor,
            partition,
            ads,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Number of generators, `N^2 - 1`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}
