//! Elliptic projection `R_h(r) v`: the `B(r)`-orthogonal projection of an
//! analytic field onto the finite element space.

use crate::assembly::{assemble_form, element_points, robin_edge_points};
use crate::discretization::Discretization;
use crate::element::ReferenceElement;
use crate::field::{field_errors, AnalyticField, RangeField};
use crate::mesh::RectDomain;
use crate::problem::{GeneralProblem, ProblemError};
use crate::report::{StudyKind, StudyReport, StudyRow};
use crate::solver::{factorize, SolveReport, SolverConfig, SolverError};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dirichlet trace defect above which the projection warns.
pub const TRACE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Discretization(#[from] crate::discretization::DiscretizationError),
    #[error("rate study needs at least 3 resolutions, got {0}")]
    TooFewResolutions(usize),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<C64>,
    pub solve: SolveReport,
    /// Largest `|v|` sampled on the Dirichlet sides.
    pub trace_defect: f64,
}

/// `B(r; v, phi_j)` for every free `j`, with `v` and `grad v` analytic.
pub fn form_rhs(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
    v: &AnalyticField,
) -> Result<Vec<C64>, ProblemError> {
    let mut out = vec![C64::new(0.0, 0.0); disc.n_free()];
    for (e, element) in disc.mesh.elements().iter().enumerate() {
        let dofs = disc.dofs.element_dofs(element);
        if dofs.iter().all(Option::is_none) {
            continue;
        }
        for qp in element_points(disc, e) {
            let d = p.diffusion_at(r, qp.y, qp.theta)?;
            let b = p.drift_at(r, qp.y, qp.theta)?;
            let val = v.value(qp.y, qp.theta);
            let g = v.gradient(qp.y, qp.theta);
            let flux = [d[0][0] * g[0] + d[0][1] * g[1], d[1][0] * g[0] + d[1][1] * g[1]];
            let adv = b[0] * g[0] + b[1] * g[1];
            for a in 0..4 {
                if let Some(j) = dofs[a] {
                    let ga = qp.grads[a];
                    let sa = qp.shape[a];
                    out[j] += qp.weight * (flux[0] * ga[0] + flux[1] * ga[1] + (I * adv + delta * val) * sa);
                }
            }
        }
        if disc.mesh.robin_edge_of(e).is_some() {
            for ep in robin_edge_points(disc, e) {
                let lam = p.robin_at(r, ep.theta)?;
                let tr = v.robin_trace(ep.theta);
                for a in 0..4 {
                    if let Some(j) = dofs[a] {
                        out[j] -= I * lam * tr * (ep.weight * ep.shape[a]);
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn elliptic_project(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
    v: &AnalyticField,
    solver: SolverConfig,
) -> Result<Projection, ProjectionError> {
    let dom = disc.domain();
    let trace_defect = v.dirichlet_trace_defect(dom.theta_min, dom.theta_max, 64);
    let scale = v.value(0.5, 0.5 * (dom.theta_min + dom.theta_max)).norm().max(1.0);
    if trace_defect > TRACE_TOLERANCE * scale {
        log::warn!("projected field violates the Dirichlet trace by {trace_defect:e}; projecting anyway");
    }
    let b = assemble_form(disc, p, r, delta)?;
    let rhs = form_rhs(disc, p, r, delta, v)?;
    let (coeffs, solve) = factorize(&b, solver)?.solve(&rhs)?;
    Ok(Projection {
        coeffs,
        solve,
        trace_defect,
    })
}

/// `max_j |B(r; R_h v - v, phi_j)|`.
pub fn galerkin_residual(
    disc: &Discretization,
    p: &GeneralProblem,
    r: f64,
    delta: f64,
    coeffs: &[C64],
    v: &AnalyticField,
) -> Result<f64, ProblemError> {
    let bu = assemble_form(disc, p, r, delta)?.mul_vec(coeffs);
    let rhs = form_rhs(disc, p, r, delta, v)?;
    Ok(bu.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Projection errors at one resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionErrors {
    pub l2: f64,
    pub h1: f64,
    /// `L^2` norm of `(R_h v(r+eps) - R_h v(r-eps)) / 2 eps - dv/dr`.
    pub dr_l2: f64,
}

/// Quadrature used for measuring errors; finer than assembly so the error
/// norm itself is not the limiting factor.
fn error_rule() -> ReferenceElement {
    ReferenceElement::new(1, 5).expect("Q1 with five points")
}

pub fn projection_errors(
    disc: &Discretization,
    p: &GeneralProblem,
    v: &RangeField,
    r: f64,
    delta: f64,
    solver: SolverConfig,
) -> Result<ProjectionErrors, ProjectionError> {
    let dom = disc.domain();
    let eps = 1e-4 * dom.range_length();
    let rule = error_rule();
    let at = elliptic_project(disc, p, r, delta, &v.at(r), solver)?;
    let errs = field_errors(disc, &rule, &at.coeffs, &v.at(r));
    let (rp, rm) = (r + eps, r - eps);
    let plus = elliptic_project(disc, p, rp, delta, &v.at(rp), solver)?;
    let minus = elliptic_project(disc, p, rm, delta, &v.at(rm), solver)?;
    let dr: Vec<C64> = plus
        .coeffs
        .iter()
        .zip(&minus.coeffs)
        .map(|(a, b)| (a - b) / (rp - rm))
        .collect();
    let dr_err = field_errors(disc, &rule, &dr, &v.dr_at(r));
    Ok(ProjectionErrors {
        l2: errs.l2,
        h1: errs.h1(),
        dr_l2: dr_err.l2,
    })
}

/// Projection errors over uniform meshes `h^-1 = n`, with least-squares
/// slopes in the report footer.
pub fn projection_rate_study(
    p: &GeneralProblem,
    domain: RectDomain,
    v: &RangeField,
    resolutions: &[usize],
    r: f64,
    delta: f64,
    solver: SolverConfig,
) -> Result<StudyReport, ProjectionError> {
    if resolutions.len() < 3 {
        return Err(ProjectionError::TooFewResolutions(resolutions.len()));
    }
    let rows = resolutions
        .par_iter()
        .map(|&n| {
            let disc = Discretization::uniform(domain, n, n)?;
            let e = projection_errors(&disc, p, v, r, delta, solver)?;
            Ok(StudyRow {
                resolution: n,
                step: 1.0 / n as f64,
                values: vec![e.l2, e.h1, e.dr_l2],
            })
        })
        .collect::<Result<Vec<_>, ProjectionError>>()?;
    let mut report = StudyReport::new(
        StudyKind::Projection,
        "h^-1",
        vec!["L2".into(), "H1".into(), "dr L2".into()],
    )
    .with_meta("r", r)
    .with_meta("delta", delta)
    .with_meta("quadrature.order", crate::element::ReferenceElement::q1().order())
    .with_meta("solver.tolerance", solver.tolerance);
    for row in rows {
        report.push_row(row)?;
    }
    for c in 0..report.columns.len() {
        if report.rates(c).iter().any(Option::is_none) {
            report.notes.push(format!(
                "{} errors at solver tolerance level; slope not meaningful",
                report.columns[c]
            ));
        }
    }
    Ok(report)
}
