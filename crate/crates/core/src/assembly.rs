//! Galerkin matrices and load vectors.
//!
//! Convention: entry `(j, k)` pairs trial function `phi_k` (column) with test
//! function `phi_j` (row, conjugated slot). Only free dofs appear; Dirichlet
//! nodes are eliminated. Coefficients are evaluated at quadrature points.
//!
//! The sesquilinear form is
//!
//! ```text
//! B(r; v, w) = (D grad v, grad w) - i( <lambda v, w>_{y=1} - (b . grad v, w) ) + delta (v, w)
//! ```

use crate::discretization::Discretization;
use crate::problem::{GeneralProblem, ProblemError};
use crate::sparse::{ComplexSparseMatrix, TripletBuilder};
use num_complex::Complex64 as C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) struct QuadPoint {
    pub y: f64,
    pub theta: f64,
    pub weight: f64,
    pub shape: [f64; 4],
    pub grads: [[f64; 2]; 4],
}

/// Quadrature points of one element mapped to physical coordinates.
pub(crate) fn element_points(disc: &Discretization, e: usize) -> Vec<QuadPoint> {
    let [y0, y1, t0, t1] = disc.mesh.element_bounds(e);
    let (hy, ht) = (y1 - y0, t1 - t0);
    let jac = 0.25 * hy * ht;
    let re = &disc.element;
    (0..re.points().len())
        .map(|q| {
            let xi = re.points()[q];
            let g = re.grads(q);
            QuadPoint {
                y: y0 + 0.5 * (xi[0] + 1.0) * hy,
                theta: t0 + 0.5 * (xi[1] + 1.0) * ht,
                weight: re.weights()[q] * jac,
                shape: *re.shape(q),
                grads: g.map(|ga| [ga[0] * 2.0 / hy, ga[1] * 2.0 / ht]),
            }
        })
        .collect()
}

pub(crate) struct EdgePoint {
    pub theta: f64,
    pub weight: f64,
    pub shape: [f64; 4],
}

/// Quadrature points on the `y = 1` edge of element `e`.
pub(crate) fn robin_edge_points(disc: &Discretization, e: usize) -> Vec<EdgePoint> {
    let [_, _, t0, t1] = disc.mesh.element_bounds(e);
    let rule = disc.element.rule_1d();
    rule.points()
        .iter()
        .zip(rule.weights())
        .map(|(&xi, &w)| EdgePoint {
            theta: t0 + 0.5 * (xi + 1.0) * (t1 - t0),
            weight: 0.5 * w * (t1 - t0),
            shape: disc.element.shape_at([1.0, xi]),
        })
        .collect()
}

fn scatter(b: &mut TripletBuilder, dofs: &[Option<usize>; 4], local: &[[C64; 4]; 4]) {
    for a in 0..4 {
        let Some(row) = dofs[a] else { continue };
        for c in 0..4 {
            if let Some(col) = dofs[c] {
                b.push(row, col, local[a][c]);
            }
        }
    }
}

fn builder(disc: &Discretization) -> TripletBuilder {
    let n = disc.n_free();
    TripletBuilder::with_capacity(n, n, 16 * disc.mesh.elements().len())
}

type Local = [[C64; 4]; 4];

const ZERO: Local = [[C64 { re: 0.0, im: 0.0 }; 4]; 4];

/// Element mass matrix in local corner order.
pub fn element_mass(disc: &Discretization, e: usize) -> Local {
    let mut local = ZERO;
    for qp in element_points(disc, e) {
        for a in 0..4 {
            for c in 0..4 {
                local[a][c] += qp.weight * qp.shape[a] * qp.shape[c];
            }
        }
    }
    local
}

/// Element matrix of the form, including the Robin edge term when the
/// element touches `y = 1`.
pub fn element_form(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
    e: usize,
) -> Result<Local, ProblemError> {
    let mut local = ZERO;
    for qp in element_points(disc, e) {
        let d = p.diffusion_at(r, qp.y, qp.theta)?;
        let drift = p.drift_at(r, qp.y, qp.theta)?;
        for c in 0..4 {
            let gc = qp.grads[c];
            let flux = [d[0][0] * gc[0] + d[0][1] * gc[1], d[1][0] * gc[0] + d[1][1] * gc[1]];
            let adv = drift[0] * gc[0] + drift[1] * gc[1];
            for a in 0..4 {
                let ga = qp.grads[a];
                let re = flux[0] * ga[0] + flux[1] * ga[1] + delta * qp.shape[c] * qp.shape[a];
                // -i * (-(b.grad phi_k, phi_j)) = +i (b.grad phi_k) phi_j
                let im = adv * qp.shape[a];
                local[a][c] += qp.weight * C64::new(re, im);
            }
        }
    }
    if disc.mesh.robin_edge_of(e).is_some() {
        for ep in robin_edge_points(disc, e) {
            let lam = p.robin_at(r, ep.theta)?;
            for a in 0..4 {
                for c in 0..4 {
                    local[a][c] -= I * lam * (ep.weight * ep.shape[c] * ep.shape[a]);
                }
            }
        }
    }
    Ok(local)
}

/// Element matrix of `((beta + delta) phi_k, phi_j)`.
pub fn element_beta_mass(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
    e: usize,
) -> Result<Local, ProblemError> {
    let mut local = ZERO;
    for qp in element_points(disc, e) {
        let beta = p.potential_at(r, qp.y, qp.theta)? + delta;
        for a in 0..4 {
            for c in 0..4 {
                local[a][c] += beta * (qp.weight * qp.shape[a] * qp.shape[c]);
            }
        }
    }
    Ok(local)
}

fn assemble_with(
    disc: &Discretization,
    mut local: impl FnMut(usize) -> Result<Local, ProblemError>,
) -> Result<ComplexSparseMatrix, ProblemError> {
    let mut b = builder(disc);
    for (e, element) in disc.mesh.elements().iter().enumerate() {
        scatter(&mut b, &disc.dofs.element_dofs(element), &local(e)?);
    }
    Ok(b.into_csr())
}

/// Mass matrix `M_jk = (phi_k, phi_j)`.
pub fn assemble_mass(disc: &Discretization) -> ComplexSparseMatrix {
    assemble_with(disc, |e| Ok(element_mass(disc, e))).expect("mass assembly evaluates no coefficients")
}

/// `H^1` Gram matrix `(grad phi_k, grad phi_j) + (phi_k, phi_j)`.
pub fn assemble_h1_gram(disc: &Discretization) -> ComplexSparseMatrix {
    let mut b = builder(disc);
    for (e, element) in disc.mesh.elements().iter().enumerate() {
        let mut local = ZERO;
        for qp in element_points(disc, e) {
            for a in 0..4 {
                for c in 0..4 {
                    let g = qp.grads[c][0] * qp.grads[a][0] + qp.grads[c][1] * qp.grads[a][1];
                    local[a][c] += qp.weight * (g + qp.shape[a] * qp.shape[c]);
                }
            }
        }
        scatter(&mut b, &disc.dofs.element_dofs(element), &local);
    }
    b.into_csr()
}

/// Matrix of `B(r; phi_k, phi_j)`.
pub fn assemble_form(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
) -> Result<ComplexSparseMatrix, ProblemError> {
    assemble_with(disc, |e| element_form(disc, p, r, delta, e))
}

/// Weighted mass `G_jk = ((beta(r) + delta) phi_k, phi_j)`.
pub fn assemble_beta_mass(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
) -> Result<ComplexSparseMatrix, ProblemError> {
    assemble_with(disc, |e| element_beta_mass(disc, p, r, delta, e))
}

/// Domain load `(F(r), phi_j)` plus any line sources.
pub fn assemble_load(disc: &Discretization, p: &GeneralProblem, r: f64) -> Result<Vec<C64>, ProblemError> {
    let mut out = vec![C64::new(0.0, 0.0); disc.n_free()];
    for (e, element) in disc.mesh.elements().iter().enumerate() {
        let dofs = disc.dofs.element_dofs(element);
        for qp in element_points(disc, e) {
            let f = p.source_at(r, qp.y, qp.theta)?;
            for a in 0..4 {
                if let Some(j) = dofs[a] {
                    out[j] += f * (qp.weight * qp.shape[a]);
                }
            }
        }
    }
    for src in &p.line_sources {
        add_line_source(disc, src, r, &mut out)?;
    }
    Ok(out)
}

fn add_line_source(
    disc: &Discretization,
    src: &crate::problem::LineSource,
    r: f64,
    out: &mut [C64],
) -> Result<(), ProblemError> {
    let mesh = &disc.mesh;
    let Some(e0) = mesh.locate(0.5 * (mesh.y_nodes()[0] + mesh.y_nodes()[1]), src.theta) else {
        return Ok(());
    };
    let column = e0 % mesh.n_theta();
    let rule = disc.element.rule_1d();
    for iy in 0..mesh.n_y() {
        let e = iy * mesh.n_theta() + column;
        let [y0, y1, t0, t1] = mesh.element_bounds(e);
        let xi_t = (2.0 * src.theta - t0 - t1) / (t1 - t0);
        let dofs = disc.dofs.element_dofs(&mesh.elements()[e]);
        for (&xi, &w) in rule.points().iter().zip(rule.weights()) {
            let y = y0 + 0.5 * (xi + 1.0) * (y1 - y0);
            let dens = (src.density)(r, y);
            if !(dens.re.is_finite() && dens.im.is_finite()) {
                return Err(ProblemError::NonFinite { field: "line source", r, y, theta: src.theta });
            }
            let shape = disc.element.shape_at([xi, xi_t]);
            for a in 0..4 {
                if let Some(j) = dofs[a] {
                    out[j] += dens * (0.5 * w * (y1 - y0) * shape[a]);
                }
            }
        }
    }
    Ok(())
}

/// Boundary load `i <g(r), phi_j>` on `y = 1`.
pub fn assemble_robin_load(disc: &Discretization, p: &GeneralProblem, r: f64) -> Result<Vec<C64>, ProblemError> {
    let mut out = vec![C64::new(0.0, 0.0); disc.n_free()];
    if p.robin_datum.is_none() {
        return Ok(out);
    }
    for edge in disc.mesh.robin_edges() {
        let dofs = disc.dofs.element_dofs(&disc.mesh.elements()[edge.element]);
        for ep in robin_edge_points(disc, edge.element) {
            let g = p.robin_datum_at(r, ep.theta)?;
            for a in 0..4 {
                if let Some(j) = dofs[a] {
                    out[j] += I * g * (ep.weight * ep.shape[a]);
                }
            }
        }
    }
    Ok(out)
}

/// Mass matrix plus the `r`-dependent form and weighted mass, with the shift
/// `delta` frozen.
pub struct FormMatrices<'a> {
    pub disc: &'a Discretization,
    pub problem: &'a GeneralProblem,
    pub mass: ComplexSparseMatrix,
    pub delta: f64,
}

impl<'a> FormMatrices<'a> {
    pub fn new(disc: &'a Discretization, problem: &'a GeneralProblem, delta: f64) -> Self {
        Self {
            disc,
            problem,
            mass: assemble_mass(disc),
            delta,
        }
    }

    pub fn form(&self, r: f64) -> Result<ComplexSparseMatrix, ProblemError> {
        assemble_form(self.disc, self.problem, r, self.delta)
    }

    pub fn beta_mass(&self, r: f64) -> Result<ComplexSparseMatrix, ProblemError> {
        assemble_beta_mass(self.disc, self.problem, r, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RectDomain;
    use crate::sparse::max_abs_diff;

    fn unit_element() -> Discretization {
        Discretization::uniform(RectDomain::unit(), 1, 1).unwrap()
    }

    fn assert_local(got: &Local, want: &[[f64; 4]; 4], scale: f64, tol: f64) {
        for a in 0..4 {
            for c in 0..4 {
                assert!((got[a][c] - C64::new(scale * want[a][c], 0.0)).norm() <= tol, "entry ({a},{c})");
            }
        }
    }

    #[test]
    fn element_mass_matches_closed_form() {
        let want = [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
        assert_local(&element_mass(&unit_element(), 0), &want, 1.0 / 36.0, 1e-15);
        let dom = RectDomain::new(0.0, 0.4, 0.0, 1.0).unwrap();
        let disc = Discretization::uniform(dom, 4, 2).unwrap();
        assert_local(&element_mass(&disc, 5), &want, 0.25 * 0.2 / 36.0, 1e-16);
    }

    #[test]
    fn element_stiffness_matches_closed_form() {
        let p = GeneralProblem::new(RectDomain::unit());
        let want = [[4.0, -1.0, -2.0, -1.0], [-1.0, 4.0, -1.0, -2.0], [-2.0, -1.0, 4.0, -1.0], [-1.0, -2.0, -1.0, 4.0]];
        assert_local(&element_form(&unit_element(), &p, 0.0, 0.0, 0).unwrap(), &want, 1.0 / 6.0, 1e-15);
    }

    #[test]
    fn robin_edge_block() {
        let dom = RectDomain::new(0.0, 0.5, 0.0, 1.0).unwrap();
        let disc = Discretization::uniform(dom, 1, 2).unwrap();
        let p = GeneralProblem::new(dom)
            .with_diffusion(|_, _, _| [[0.0; 2]; 2])
            .with_robin(|_, _| I);
        let local = element_form(&disc, &p, 0.0, 0.0, 1).unwrap();
        // corners 1 and 2 lie on y = 1
        let l = 0.25 / 6.0;
        let want = [[0.0; 4], [0.0, 2.0, 1.0, 0.0], [0.0, 1.0, 2.0, 0.0], [0.0; 4]];
        assert_local(&local, &want, l, 1e-16);
    }

    #[test]
    fn mass_is_hermitian_and_reproduces_area() {
        let disc = Discretization::uniform(RectDomain::new(0.0, 2.0, 0.0, 1.0).unwrap(), 4, 6).unwrap();
        let m = assemble_mass(&disc);
        assert_eq!(m.hermitian_defect(), 0.0);
        assert!(m.is_structurally_symmetric());
        // one element, no elimination: the local mass sums to the area
        let total: C64 = element_mass(&disc, 7).iter().flatten().sum();
        assert!((total.re - (2.0 / 6.0) * 0.25).abs() < 1e-15);
    }

    #[test]
    fn shift_only_form_is_scaled_mass() {
        let disc = Discretization::uniform(RectDomain::unit(), 3, 4).unwrap();
        let p = GeneralProblem::new(RectDomain::unit()).with_diffusion(|_, _, _| [[0.0, 0.0], [0.0, 0.0]]);
        let b = assemble_form(&disc, &p, 0.0, 5.0).unwrap();
        let m = assemble_mass(&disc).scale(C64::new(5.0, 0.0));
        assert!(max_abs_diff(&b, &m) < 1e-15);
    }

    #[test]
    fn form_is_linear_in_coefficients() {
        let dom = RectDomain::unit();
        let disc = Discretization::uniform(dom, 3, 3).unwrap();
        let d1 = |_: f64, y: f64, t: f64| [[1.0 + y, 0.1 * t], [0.1 * t, 2.0]];
        let d2 = |_: f64, y: f64, _: f64| [[0.5, -0.2 * y], [-0.2 * y, 1.0 + y * y]];
        let p1 = GeneralProblem::new(dom).with_diffusion(d1).with_drift(|_, y, _| [y, 0.3]);
        let p2 = GeneralProblem::new(dom).with_diffusion(d2).with_robin(|_, t| C64::new(t, 1.0));
        let sum = GeneralProblem::new(dom)
            .with_diffusion(move |r, y, t| {
                let (a, b) = (d1(r, y, t), d2(r, y, t));
                [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
            })
            .with_drift(|_, y, _| [y, 0.3])
            .with_robin(|_, t| C64::new(t, 1.0));
        let b1 = assemble_form(&disc, &p1, 0.0, 0.0).unwrap();
        let b2 = assemble_form(&disc, &p2, 0.0, 1.0).unwrap();
        let bs = assemble_form(&disc, &sum, 0.0, 1.0).unwrap();
        let one = C64::new(1.0, 0.0);
        let lin = ComplexSparseMatrix::linear_combination(&[(one, &b1), (one, &b2)]);
        assert!(max_abs_diff(&lin, &bs) < 1e-13);
    }

    #[test]
    fn beta_mass_for_constant_potential() {
        let disc = Discretization::uniform(RectDomain::unit(), 3, 4).unwrap();
        let m = assemble_mass(&disc);
        let p = GeneralProblem::new(RectDomain::unit()).with_potential(|_, _, _| C64::new(1.0, 0.0));
        assert_eq!(max_abs_diff(&assemble_beta_mass(&disc, &p, 0.0, 0.0).unwrap(), &m), 0.0);
        let p = GeneralProblem::new(RectDomain::unit()).with_potential(|_, _, _| C64::new(0.0, 1.0));
        let g = assemble_beta_mass(&disc, &p, 0.0, 2.0).unwrap();
        assert!(max_abs_diff(&g, &m.scale(C64::new(2.0, 1.0))) < 1e-15);
    }

    #[test]
    fn loads_follow_partition_of_unity() {
        let disc = Discretization::uniform(RectDomain::unit(), 4, 4).unwrap();
        let zero = assemble_load(&disc, &GeneralProblem::new(RectDomain::unit()), 0.3).unwrap();
        assert!(zero.iter().all(|v| *v == C64::new(0.0, 0.0)));

        let p = GeneralProblem::new(RectDomain::new(0.0, 3.0, 0.0, 1.0).unwrap())
            .with_robin(|_, _| C64::new(0.2, -4.0))
            .with_robin_datum(|_, _| C64::new(1.0, 0.0));
        let disc = Discretization::uniform(p.domain, 2, 5).unwrap();
        let g = assemble_robin_load(&disc, &p, 0.0).unwrap();
        let total: C64 = g.iter().sum();
        // the free Robin hats miss the two Dirichlet corner half-hats
        let h = 3.0 / 5.0;
        assert!((total - I * (3.0 - h)).norm() < 1e-12);
        for (j, v) in g.iter().enumerate() {
            if !disc.dofs.robin_dofs().contains(&j) {
                assert_eq!(*v, C64::new(0.0, 0.0));
            }
        }
    }
}
