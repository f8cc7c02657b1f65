//! Brute-force dense assembly used to cross-check the sparse path.
//!
//! Basis functions are evaluated globally as products of 1D hats built from
//! the node coordinates, with no element-local shape tables, no dof scatter
//! and no sparse storage.

use crate::discretization::Discretization;
use crate::element::GaussLegendre;
use crate::problem::{GeneralProblem, ProblemError};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Largest system the oracle accepts.
pub const ORACLE_MAX_FREE: usize = 200;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense oracle limited to {max} unknowns, mesh has {n_free}")]
    TooLarge { n_free: usize, max: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

pub type DenseMatrix = Vec<Vec<C64>>;

#[derive(Debug, Clone)]
pub struct DenseOperators {
    pub mass: DenseMatrix,
    pub form: DenseMatrix,
    pub beta_mass: DenseMatrix,
}

struct Basis {
    // (y index, theta index) of each free dof
    index: Vec<(usize, usize)>,
}

impl Basis {
    fn new(disc: &Discretization) -> Self {
        let stride = disc.mesh.n_theta() + 1;
        let index = (0..disc.n_free())
            .map(|d| {
                let node = disc.dofs.node_of(d);
                (node / stride, node % stride)
            })
            .collect();
        Self { index }
    }

    /// Whether free basis function `j` is nonzero on element `(ey, et)`.
    fn supports(&self, j: usize, ey: usize, et: usize) -> bool {
        let (iy, it) = self.index[j];
        (iy == ey || iy == ey + 1) && (it == et || it == et + 1)
    }

    /// Values and gradients of all free basis functions at the point with
    /// cell-local coordinates `(xi, eta)` in `[-1, 1]^2` of element
    /// `(ey, et)`. Hats peaking on a shared edge take this cell's slope.
    fn eval(&self, disc: &Discretization, ey: usize, et: usize, xi: f64, eta: f64) -> Vec<(f64, [f64; 2])> {
        let yn = disc.mesh.y_nodes();
        let tn = disc.mesh.theta_nodes();
        self.index
            .iter()
            .map(|&(iy, it)| {
                if !((iy == ey || iy == ey + 1) && (it == et || it == et + 1)) {
                    return (0.0, [0.0, 0.0]);
                }
                let (ly, lt) = (yn[ey + 1] - yn[ey], tn[et + 1] - tn[et]);
                let (hy, sy) = hat_in(iy, ey, xi);
                let (ht, st) = hat_in(it, et, eta);
                (hy * ht, [sy * ht / ly, st * hy / lt])
            })
            .collect()
    }
}

/// 1D hat of node `i` (either end of cell `c`) at cell coordinate `xi`:
/// value and the sign of its slope.
fn hat_in(i: usize, c: usize, xi: f64) -> (f64, f64) {
    if i == c {
        (0.5 * (1.0 - xi), -1.0)
    } else {
        (0.5 * (1.0 + xi), 1.0)
    }
}

/// Dense `M`, `B(r)` (shift `delta`) and `G(r)` by nested-loop quadrature.
pub fn dense_oracle_assemble(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
) -> Result<DenseOperators, OracleError> {
    let n = disc.n_free();
    if n > ORACLE_MAX_FREE {
        return Err(OracleError::TooLarge { n_free: n, max: ORACLE_MAX_FREE });
    }
    let zero = C64::new(0.0, 0.0);
    let mut mass = vec![vec![zero; n]; n];
    let mut form = vec![vec![zero; n]; n];
    let mut beta_mass = vec![vec![zero; n]; n];
    let basis = Basis::new(disc);
    let gauss = GaussLegendre::new(disc.element.order()).expect("element order is positive");
    let yn = disc.mesh.y_nodes();
    let tn = disc.mesh.theta_nodes();
    let i = C64::new(0.0, 1.0);

    // Contributions are summed per element first, then added to the global
    // matrices, so rounding follows the same element-by-element pattern as
    // the sparse path while the basis itself is evaluated independently.
    let top = disc.mesh.n_y() - 1;
    for ey in 0..disc.mesh.n_y() {
        for et in 0..disc.mesh.n_theta() {
            let active: Vec<usize> = (0..n).filter(|&j| basis.supports(j, ey, et)).collect();
            let m = active.len();
            let mut lm = vec![vec![zero; m]; m];
            let mut lf = vec![vec![zero; m]; m];
            let mut lb = vec![vec![zero; m]; m];
            let (hy, ht) = (yn[ey + 1] - yn[ey], tn[et + 1] - tn[et]);
            let jac = 0.25 * hy * ht;
            for (&xa, &wa) in gauss.points().iter().zip(gauss.weights()) {
                for (&xb, &wb) in gauss.points().iter().zip(gauss.weights()) {
                    let y = yn[ey] + 0.5 * (xa + 1.0) * hy;
                    let t = tn[et] + 0.5 * (xb + 1.0) * ht;
                    let w = wa * wb * jac;
                    let phi = basis.eval(disc, ey, et, xa, xb);
                    let d = p.diffusion_at(r, y, t)?;
                    let b = p.drift_at(r, y, t)?;
                    let beta = p.potential_at(r, y, t)?;
                    for (lj, &j) in active.iter().enumerate() {
                        let (pj, gj) = phi[j];
                        for (lk, &k) in active.iter().enumerate() {
                            let (pk, gk) = phi[k];
                            let dgk = [d[0][0] * gk[0] + d[0][1] * gk[1], d[1][0] * gk[0] + d[1][1] * gk[1]];
                            let stiff = dgk[0] * gj[0] + dgk[1] * gj[1];
                            let adv = (b[0] * gk[0] + b[1] * gk[1]) * pj;
                            lm[lj][lk] += w * pk * pj;
                            lf[lj][lk] += w * C64::new(stiff + delta * pk * pj, adv);
                            lb[lj][lk] += (beta + delta) * (w * pk * pj);
                        }
                    }
                }
            }
            // Robin line integral on y = 1
            if ey == top {
                for (&xb, &wb) in gauss.points().iter().zip(gauss.weights()) {
                    let t = tn[et] + 0.5 * (xb + 1.0) * ht;
                    let w = 0.5 * wb * ht;
                    let lam = p.robin_at(r, t)?;
                    let phi = basis.eval(disc, ey, et, 1.0, xb);
                    for (lj, &j) in active.iter().enumerate() {
                        for (lk, &k) in active.iter().enumerate() {
                            lf[lj][lk] -= i * lam * (w * phi[k].0 * phi[j].0);
                        }
                    }
                }
            }
            for (lj, &j) in active.iter().enumerate() {
                for (lk, &k) in active.iter().enumerate() {
                    mass[j][k] += lm[lj][lk];
                    form[j][k] += lf[lj][lk];
                    beta_mass[j][k] += lb[lj][lk];
                }
            }
        }
    }

    Ok(DenseOperators { mass, form, beta_mass })
}

/// Entrywise `max |dense - sparse|`.
pub fn max_deviation(dense: &DenseMatrix, sparse: &crate::sparse::ComplexSparseMatrix) -> f64 {
    let s = sparse.to_dense();
    dense
        .iter()
        .zip(&s)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_beta_mass, assemble_form, assemble_mass};
    use crate::mesh::RectDomain;

    #[test]
    fn guard_rejects_large_meshes() {
        let disc = Discretization::uniform(RectDomain::unit(), 20, 20).unwrap();
        let p = GeneralProblem::new(RectDomain::unit());
        assert!(matches!(
            dense_oracle_assemble(&disc, &p, 0.0, 0.0),
            Err(OracleError::TooLarge { n_free: 380, .. })
        ));
    }

    #[test]
    fn matches_sparse_on_small_mesh() {
        let dom = RectDomain::unit();
        let disc = Discretization::uniform(dom, 2, 2).unwrap();
        let p = GeneralProblem::new(dom)
            .with_robin(|_, _| C64::new(0.0, 1.0))
            .with_potential(|_, y, _| C64::new(y, 0.0));
        let d = dense_oracle_assemble(&disc, &p, 0.0, 0.5).unwrap();
        assert!(max_deviation(&d.mass, &assemble_mass(&disc)) <= 1e-14);
        assert!(max_deviation(&d.form, &assemble_form(&disc, &p, 0.0, 0.5).unwrap()) <= 1e-14);
        assert!(max_deviation(&d.beta_mass, &assemble_beta_mass(&disc, &p, 0.0, 0.5).unwrap()) <= 1e-14);
    }

    #[test]
    fn identity_coefficients_give_known_stiffness() {
        // 2x2 mesh on the unit square: one free dof at (0.5, 0.5) and one at
        // (1, 0.5). The centre hat's stiffness is 4 * (4/6) = 8/3.
        let dom = RectDomain::unit();
        let disc = Discretization::uniform(dom, 2, 2).unwrap();
        let d = dense_oracle_assemble(&disc, &GeneralProblem::new(dom), 0.0, 0.0).unwrap();
        assert!((d.form[0][0].re - 8.0 / 3.0).abs() < 1e-14);
        // the Robin node only sees the two upper elements
        assert!((d.form[1][1].re - 4.0 / 3.0).abs() < 1e-14);
        // diagonal neighbours across the middle row: two elements, each -1/6 * 2
        assert!((d.form[0][1].re + 2.0 / 6.0).abs() < 1e-14);
    }
}
