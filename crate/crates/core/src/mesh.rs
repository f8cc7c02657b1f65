//! Rectangular domain, tensor-product Q1 mesh and the degree-of-freedom map.
//!
//! The computational domain is `(0, 1) x (theta_min, theta_max)` in the
//! `(y, theta)` plane, advanced in range `r in [r_min, r_max]`. Homogeneous
//! Dirichlet conditions hold on `y = 0`, `theta = theta_min` and
//! `theta = theta_max`; the Robin condition holds on `y = 1`.

use thiserror::Error;

/// Default bound on the ratio of the longest to the shortest element edge.
pub const DEFAULT_QUASI_UNIFORMITY_BOUND: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("element count in {axis} must be positive")]
    ZeroElements { axis: &'static str },
    #[error("node list for {axis} is not strictly increasing at index {index}")]
    NotIncreasing { axis: &'static str, index: usize },
    #[error("node list for {axis} must have {expected} entries, got {got}")]
    WrongLength {
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("node list for {axis} does not match the domain endpoints")]
    EndpointMismatch { axis: &'static str },
    #[error("node index {index} out of range (mesh has {n_nodes} nodes)")]
    NodeOutOfRange { index: usize, n_nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectDomain {
    pub y_min: f64,
    pub y_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl RectDomain {
    pub fn new(theta_min: f64, theta_max: f64, r_min: f64, r_max: f64) -> Result<Self, MeshError> {
        if !(theta_min < theta_max) {
            return Err(MeshError::InvalidDomain(format!(
                "theta_min ({theta_min}) must be below theta_max ({theta_max})"
            )));
        }
        if !(r_min < r_max) {
            return Err(MeshError::InvalidDomain(format!(
                "r_min ({r_min}) must be below r_max ({r_max})"
            )));
        }
        Ok(Self {
            y_min: 0.0,
            y_max: 1.0,
            theta_min,
            theta_max,
            r_min,
            r_max,
        })
    }

    /// `(0,1)^2` in space and `[0, 1]` in range.
    pub fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0).expect("unit domain is valid")
    }

    pub fn theta_width(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    pub fn range_length(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn area(&self) -> f64 {
        (self.y_max - self.y_min) * self.theta_width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Interior,
    Dirichlet,
    Robin,
}

/// An element edge lying on `y = 1`. `nodes` are the global indices of the
/// edge end points in increasing theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinEdge {
    pub element: usize,
    pub nodes: [usize; 2],
    pub theta: [f64; 2],
}

/// Optional non-uniform node placement for `build_mesh`.
#[derive(Debug, Clone, Default)]
pub struct Grading {
    pub y_nodes: Option<Vec<f64>>,
    pub theta_nodes: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TensorMesh {
    domain: RectDomain,
    n_y: usize,
    n_theta: usize,
    y_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
    elements: Vec<[usize; 4]>,
    robin_edges: Vec<RobinEdge>,
    h: f64,
    edge_ratio: f64,
    quasi_uniformity_bound: f64,
}

fn check_nodes(
    axis: &'static str,
    nodes: &[f64],
    n: usize,
    lo: f64,
    hi: f64,
) -> Result<(), MeshError> {
    if nodes.len() != n + 1 {
        return Err(MeshError::WrongLength {
            axis,
            expected: n + 1,
            got: nodes.len(),
        });
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(MeshError::NotIncreasing { axis, index: i + 1 });
        }
    }
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    if (nodes[0] - lo).abs() > tol || (nodes[n] - hi).abs() > tol {
        return Err(MeshError::EndpointMismatch { axis });
    }
    Ok(())
}

fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / (n as f64)
            }
        })
        .collect()
}

/// Builds the tensor mesh; uniform unless `grading` supplies node lists.
pub fn build_mesh(
    domain: RectDomain,
    n_y: usize,
    n_theta: usize,
    grading: Option<&Grading>,
) -> Result<TensorMesh, MeshError> {
    if n_y == 0 {
        return Err(MeshError::ZeroElements { axis: "y" });
    }
    if n_theta == 0 {
        return Err(MeshError::ZeroElements { axis: "theta" });
    }
    let y_nodes = match grading.and_then(|g| g.y_nodes.clone()) {
        Some(nodes) => {
            check_nodes("y", &nodes, n_y, domain.y_min, domain.y_max)?;
            let mut nodes = nodes;
            nodes[0] = domain.y_min;
            nodes[n_y] = domain.y_max;
            nodes
        }
        None => uniform_nodes(domain.y_min, domain.y_max, n_y),
    };
    let theta_nodes = match grading.and_then(|g| g.theta_nodes.clone()) {
        Some(nodes) => {
            check_nodes("theta", &nodes, n_theta, domain.theta_min, domain.theta_max)?;
            let mut nodes = nodes;
            nodes[0] = domain.theta_min;
            nodes[n_theta] = domain.theta_max;
            nodes
        }
        None => uniform_nodes(domain.theta_min, domain.theta_max, n_theta),
    };

    let stride = n_theta + 1;
    let mut elements = Vec::with_capacity(n_y * n_theta);
    let mut robin_edges = Vec::with_capacity(n_theta);
    let mut h: f64 = 0.0;
    let mut longest: f64 = 0.0;
    let mut shortest = f64::INFINITY;
    for iy in 0..n_y {
        let hy = y_nodes[iy + 1] - y_nodes[iy];
        for it in 0..n_theta {
            let ht = theta_nodes[it + 1] - theta_nodes[it];
            let n0 = iy * stride + it;
            elements.push([n0, n0 + stride, n0 + stride + 1, n0 + 1]);
            h = h.max(hy.hypot(ht));
            longest = longest.max(hy.max(ht));
            shortest = shortest.min(hy.min(ht));
            if iy + 1 == n_y {
                robin_edges.push(RobinEdge {
                    element: elements.len() - 1,
                    nodes: [n0 + stride, n0 + stride + 1],
                    theta: [theta_nodes[it], theta_nodes[it + 1]],
                });
            }
        }
    }
    Ok(TensorMesh {
        domain,
        n_y,
        n_theta,
        y_nodes,
        theta_nodes,
        elements,
        robin_edges,
        h,
        edge_ratio: longest / shortest,
        quasi_uniformity_bound: DEFAULT_QUASI_UNIFORMITY_BOUND,
    })
}

impl TensorMesh {
    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    pub fn n_nodes(&self) -> usize {
        (self.n_y + 1) * (self.n_theta + 1)
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn robin_edges(&self) -> &[RobinEdge] {
        &self.robin_edges
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Longest over shortest element edge.
    pub fn edge_ratio(&self) -> f64 {
        self.edge_ratio
    }

    pub fn quasi_uniformity_bound(&self) -> f64 {
        self.quasi_uniformity_bound
    }

    pub fn with_quasi_uniformity_bound(mut self, bound: f64) -> Self {
        self.quasi_uniformity_bound = bound;
        self
    }

    /// Whether the recorded edge ratio is within the recorded bound. The
    /// bound is not enforced at construction.
    pub fn is_quasi_uniform(&self) -> bool {
        self.edge_ratio <= self.quasi_uniformity_bound
    }

    /// `(y, theta)` of a node.
    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let stride = self.n_theta + 1;
        (self.y_nodes[node / stride], self.theta_nodes[node % stride])
    }

    /// `[y0, y1, theta0, theta1]` of an element.
    pub fn element_bounds(&self, element: usize) -> [f64; 4] {
        let iy = element / self.n_theta;
        let it = element % self.n_theta;
        [
            self.y_nodes[iy],
            self.y_nodes[iy + 1],
            self.theta_nodes[it],
            self.theta_nodes[it + 1],
        ]
    }

    /// The `y = 1` edge of an element, if it has one.
    pub fn robin_edge_of(&self, element: usize) -> Option<&RobinEdge> {
        if element / self.n_theta + 1 == self.n_y {
            self.robin_edges.get(element % self.n_theta)
        } else {
            None
        }
    }

    /// Element containing `(y, theta)`; points on shared edges go to the
    /// element with the larger index.
    pub fn locate(&self, y: f64, theta: f64) -> Option<usize> {
        let iy = locate_interval(&self.y_nodes, y)?;
        let it = locate_interval(&self.theta_nodes, theta)?;
        Some(iy * self.n_theta + it)
    }

    pub fn classify_boundary(&self, node: usize) -> Result<BoundaryClass, MeshError> {
        if node >= self.n_nodes() {
            return Err(MeshError::NodeOutOfRange {
                index: node,
                n_nodes: self.n_nodes(),
            });
        }
        let stride = self.n_theta + 1;
        let iy = node / stride;
        let it = node % stride;
        Ok(if iy == 0 || it == 0 || it == self.n_theta {
            BoundaryClass::Dirichlet
        } else if iy == self.n_y {
            BoundaryClass::Robin
        } else {
            BoundaryClass::Interior
        })
    }
}

fn locate_interval(nodes: &[f64], x: f64) -> Option<usize> {
    let n = nodes.len() - 1;
    let tol = 1e-12 * (nodes[n] - nodes[0]);
    if x < nodes[0] - tol || x > nodes[n] + tol {
        return None;
    }
    let idx = nodes.partition_point(|&v| v <= x);
    Some(idx.saturating_sub(1).min(n - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDof {
    Free(usize),
    Dirichlet,
}

/// Maps mesh nodes to free unknowns after eliminating Dirichlet nodes.
///
/// Free nodes are numbered in node order (y-major rows), so every assembled
/// operator has bandwidth at most `n_theta`.
#[derive(Debug, Clone)]
pub struct DofMap {
    node_to_dof: Vec<NodeDof>,
    dof_to_node: Vec<usize>,
    robin_dofs: Vec<usize>,
}

pub fn build_dofmap(mesh: &TensorMesh) -> DofMap {
    let mut node_to_dof = Vec::with_capacity(mesh.n_nodes());
    let mut dof_to_node = Vec::new();
    let mut robin_dofs = Vec::new();
    for node in 0..mesh.n_nodes() {
        let class = mesh
            .classify_boundary(node)
            .expect("node index is in range");
        match class {
            BoundaryClass::Dirichlet => node_to_dof.push(NodeDof::Dirichlet),
            BoundaryClass::Interior | BoundaryClass::Robin => {
                let dof = dof_to_node.len();
                if class == BoundaryClass::Robin {
                    robin_dofs.push(dof);
                }
                dof_to_node.push(node);
                node_to_dof.push(NodeDof::Free(dof));
            }
        }
    }
    DofMap {
        node_to_dof,
        dof_to_node,
        robin_dofs,
    }
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.node_to_dof[node] {
            NodeDof::Free(d) => Some(d),
            NodeDof::Dirichlet => None,
        }
    }

    pub fn node_to_dof(&self) -> &[NodeDof] {
        &self.node_to_dof
    }

    pub fn node_of(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn robin_dofs(&self) -> &[usize] {
        &self.robin_dofs
    }

    /// Free-dof indices of an element's corners (`None` for Dirichlet).
    pub fn element_dofs(&self, element: &[usize; 4]) -> [Option<usize>; 4] {
        element.map(|n| self.dof(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_counts() {
        let mesh = build_mesh(RectDomain::unit(), 2, 2, None).unwrap();
        assert_eq!(mesh.n_nodes(), 9);
        assert_eq!(mesh.elements().len(), 4);
        assert_eq!(mesh.robin_edges().len(), 2);
    }

    #[test]
    fn uniform_h() {
        let mesh = build_mesh(RectDomain::unit(), 20, 20, None).unwrap();
        assert!((mesh.h() - 2f64.sqrt() / 20.0).abs() < 1e-15);
        let coarse = build_mesh(RectDomain::unit(), 10, 10, None).unwrap();
        assert!((coarse.h() - 2f64.sqrt() / 10.0).abs() < 1e-15);
        assert_eq!(coarse.h(), 2.0 * mesh.h());
        assert!(mesh.is_quasi_uniform());
    }

    #[test]
    fn robin_edges_lie_on_top_exactly_once() {
        let mesh = build_mesh(RectDomain::unit(), 3, 5, None).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in mesh.robin_edges() {
            for &n in &e.nodes {
                assert_eq!(mesh.node_coords(n).0, 1.0);
            }
            assert!(seen.insert(e.nodes));
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn classification_and_corner_precedence() {
        let mesh = build_mesh(RectDomain::unit(), 2, 2, None).unwrap();
        let find = |y: f64, t: f64| {
            (0..mesh.n_nodes())
                .find(|&n| mesh.node_coords(n) == (y, t))
                .unwrap()
        };
        assert_eq!(mesh.classify_boundary(find(0.0, 0.5)).unwrap(), BoundaryClass::Dirichlet);
        assert_eq!(mesh.classify_boundary(find(1.0, 1.0)).unwrap(), BoundaryClass::Dirichlet);
        assert_eq!(mesh.classify_boundary(find(1.0, 0.5)).unwrap(), BoundaryClass::Robin);
        assert_eq!(mesh.classify_boundary(find(0.5, 0.5)).unwrap(), BoundaryClass::Interior);
        assert!(matches!(
            mesh.classify_boundary(9),
            Err(MeshError::NodeOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn dof_counts() {
        let mesh = build_mesh(RectDomain::unit(), 2, 2, None).unwrap();
        let dofs = build_dofmap(&mesh);
        assert_eq!(dofs.n_free(), 2);
        for d in 0..2 {
            let (_, t) = mesh.node_coords(dofs.node_of(d));
            assert!(t > 0.0 && t < 1.0);
        }

        let mesh = build_mesh(RectDomain::unit(), 1, 3, None).unwrap();
        let dofs = build_dofmap(&mesh);
        assert_eq!(dofs.n_free(), 2);
        assert_eq!(dofs.robin_dofs().len(), 2);
    }

    #[test]
    fn dof_count_by_enumeration_20x20() {
        let mesh = build_mesh(RectDomain::unit(), 20, 20, None).unwrap();
        let dofs = build_dofmap(&mesh);
        let enumerated = (0..mesh.n_nodes())
            .filter(|&n| {
                let (y, t) = mesh.node_coords(n);
                y > 0.0 && t > 0.0 && t < 1.0
            })
            .count();
        assert_eq!(enumerated, 380);
        assert_eq!(dofs.n_free(), 380);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = RectDomain::unit();
        assert!(matches!(build_mesh(d, 0, 2, None), Err(MeshError::ZeroElements { axis: "y" })));
        assert!(matches!(build_mesh(d, 2, 0, None), Err(MeshError::ZeroElements { axis: "theta" })));
        let g = Grading {
            y_nodes: Some(vec![0.0, 0.6, 0.4, 1.0]),
            theta_nodes: None,
        };
        assert!(matches!(build_mesh(d, 3, 2, Some(&g)), Err(MeshError::NotIncreasing { axis: "y", .. })));
        let g = Grading {
            y_nodes: None,
            theta_nodes: Some(vec![0.0, 0.5, 0.9]),
        };
        assert!(matches!(build_mesh(d, 2, 2, Some(&g)), Err(MeshError::EndpointMismatch { .. })));
        assert!(RectDomain::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(RectDomain::new(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn graded_mesh_records_edge_ratio() {
        let g = Grading {
            y_nodes: Some(vec![0.0, 0.1, 0.4, 1.0]),
            theta_nodes: None,
        };
        let mesh = build_mesh(RectDomain::unit(), 3, 3, Some(&g)).unwrap();
        assert!((mesh.edge_ratio() - 6.0).abs() < 1e-12);
        assert!(!mesh.is_quasi_uniform());
    }

    #[test]
    fn locate_finds_containing_element() {
        let mesh = build_mesh(RectDomain::new(-1.0, 2.0, 0.0, 1.0).unwrap(), 4, 6, None).unwrap();
        let e = mesh.locate(0.3, 0.1).unwrap();
        let [y0, y1, t0, t1] = mesh.element_bounds(e);
        assert!(y0 <= 0.3 && 0.3 <= y1 && t0 <= 0.1 && 0.1 <= t1);
        assert!(mesh.locate(1.0, 2.0).is_some());
        assert!(mesh.locate(1.5, 0.0).is_none());
    }

    proptest! {
        #[test]
        fn free_count_formula(n_y in 1usize..30, n_theta in 1usize..30) {
            let mesh = build_mesh(RectDomain::unit(), n_y, n_theta, None).unwrap();
            let dofs = build_dofmap(&mesh);
            prop_assert_eq!(dofs.n_free(), n_y * (n_theta - 1));
            prop_assert_eq!(dofs.robin_dofs().len(), n_theta - 1);
            // bijection onto 0..n_free
            let mut hit = vec![false; dofs.n_free()];
            for nd in dofs.node_to_dof() {
                if let NodeDof::Free(d) = nd {
                    prop_assert!(!hit[*d]);
                    hit[*d] = true;
                }
            }
            prop_assert!(hit.iter().all(|&b| b));
        }

        #[test]
        fn doubling_halves_h(n in 1usize..40) {
            let a = build_mesh(RectDomain::unit(), n, n, None).unwrap();
            let b = build_mesh(RectDomain::unit(), 2 * n, 2 * n, None).unwrap();
            prop_assert!((a.h() - 2.0 * b.h()).abs() <= 1e-14 * a.h());
        }
    }
}
