use crate::element::{ElementError, ReferenceElement};
use crate::mesh::{build_dofmap, build_mesh, DofMap, Grading, MeshError, RectDomain, TensorMesh};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// Mesh, degree-of-freedom map and reference element of one finite element
/// space. Immutable once built.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TensorMesh,
    pub dofs: DofMap,
    pub element: ReferenceElement,
}

impl Discretization {
    pub fn new(mesh: TensorMesh, element: ReferenceElement) -> Self {
        let dofs = build_dofmap(&mesh);
        Self {
            mesh,
            dofs,
            element,
        }
    }

    /// Uniform Q1 space with the default 3-point rule.
    pub fn uniform(domain: RectDomain, n_y: usize, n_theta: usize) -> Result<Self, DiscretizationError> {
        Ok(Self::new(build_mesh(domain, n_y, n_theta, None)?, ReferenceElement::q1()))
    }

    pub fn with_order(
        domain: RectDomain,
        n_y: usize,
        n_theta: usize,
        grading: Option<&Grading>,
        order: usize,
    ) -> Result<Self, DiscretizationError> {
        let mesh = build_mesh(domain, n_y, n_theta, grading)?;
        Ok(Self::new(mesh, ReferenceElement::new(1, order)?))
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free()
    }

    pub fn domain(&self) -> &RectDomain {
        self.mesh.domain()
    }
}
