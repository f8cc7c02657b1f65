//! Analytic fields and finite element field evaluation and norms.

use crate::discretization::Discretization;
use crate::element::ReferenceElement;
use num_complex::Complex64 as C64;
use std::sync::Arc;

pub type ValueFn = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(f64, f64) -> [C64; 2] + Send + Sync>;
pub type RangeValueFn = Arc<dyn Fn(f64, f64, f64) -> C64 + Send + Sync>;
pub type RangeGradientFn = Arc<dyn Fn(f64, f64, f64) -> [C64; 2] + Send + Sync>;

/// A function of `(y, theta)` with its gradient `[d/dy, d/dtheta]`.
#[derive(Clone)]
pub struct AnalyticField {
    value: ValueFn,
    gradient: GradientFn,
}

impl std::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AnalyticField")
    }
}

impl AnalyticField {
    pub fn new(
        value: impl Fn(f64, f64) -> C64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64) -> [C64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| C64::new(0.0, 0.0), |_, _| [C64::new(0.0, 0.0); 2])
    }

    /// The finite element function with the given free coefficients.
    pub fn from_fe(disc: &Discretization, coeffs: &[C64]) -> Self {
        let disc_v = disc.clone();
        let disc_g = disc.clone();
        let cv: Arc<[C64]> = coeffs.into();
        let cg = cv.clone();
        Self::new(
            move |y, t| fe_value(&disc_v, &cv, y, t).0,
            move |y, t| fe_value(&disc_g, &cg, y, t).1,
        )
    }

    pub fn value(&self, y: f64, theta: f64) -> C64 {
        (self.value)(y, theta)
    }

    pub fn gradient(&self, y: f64, theta: f64) -> [C64; 2] {
        (self.gradient)(y, theta)
    }

    /// Trace on `y = 1`.
    pub fn robin_trace(&self, theta: f64) -> C64 {
        (self.value)(1.0, theta)
    }

    /// Largest deviation between the supplied gradient and central
    /// differences of the value at the given points.
    pub fn gradient_defect(&self, points: &[(f64, f64)], step: f64) -> f64 {
        points
            .iter()
            .map(|&(y, t)| {
                let g = self.gradient(y, t);
                let dy = (self.value(y + step, t) - self.value(y - step, t)) / (2.0 * step);
                let dt = (self.value(y, t + step) - self.value(y, t - step)) / (2.0 * step);
                (g[0] - dy).norm().max((g[1] - dt).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Largest magnitude on the Dirichlet sides, sampled at `n` points per side.
    pub fn dirichlet_trace_defect(&self, theta_min: f64, theta_max: f64, n: usize) -> f64 {
        let n = n.max(2);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let t = theta_min + s * (theta_max - theta_min);
            worst = worst.max(self.value(0.0, t).norm());
            worst = worst.max(self.value(s, theta_min).norm());
            worst = worst.max(self.value(s, theta_max).norm());
        }
        worst
    }
}

/// A range-dependent field `v(r, y, theta)` together with `d/dr`.
#[derive(Clone)]
pub struct RangeField {
    value: RangeValueFn,
    gradient: RangeGradientFn,
    dr_value: RangeValueFn,
    dr_gradient: RangeGradientFn,
}

impl std::fmt::Debug for RangeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RangeField")
    }
}

impl RangeField {
    pub fn new(
        value: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64, f64) -> [C64; 2] + Send + Sync + 'static,
        dr_value: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static,
        dr_gradient: impl Fn(f64, f64, f64) -> [C64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            dr_value: Arc::new(dr_value),
            dr_gradient: Arc::new(dr_gradient),
        }
    }

    pub fn value(&self, r: f64, y: f64, theta: f64) -> C64 {
        (self.value)(r, y, theta)
    }

    pub fn gradient(&self, r: f64, y: f64, theta: f64) -> [C64; 2] {
        (self.gradient)(r, y, theta)
    }

    pub fn dr_value(&self, r: f64, y: f64, theta: f64) -> C64 {
        (self.dr_value)(r, y, theta)
    }

    pub fn at(&self, r: f64) -> AnalyticField {
        let v = self.value.clone();
        let g = self.gradient.clone();
        AnalyticField::new(move |y, t| v(r, y, t), move |y, t| g(r, y, t))
    }

    pub fn dr_at(&self, r: f64) -> AnalyticField {
        let v = self.dr_value.clone();
        let g = self.dr_gradient.clone();
        AnalyticField::new(move |y, t| v(r, y, t), move |y, t| g(r, y, t))
    }
}

/// Value and gradient of the finite element function at a point.
pub fn fe_value(disc: &Discretization, coeffs: &[C64], y: f64, theta: f64) -> (C64, [C64; 2]) {
    let zero = C64::new(0.0, 0.0);
    let Some(e) = disc.mesh.locate(y, theta) else {
        return (zero, [zero; 2]);
    };
    let [y0, y1, t0, t1] = disc.mesh.element_bounds(e);
    let xi = [
        (2.0 * y - y0 - y1) / (y1 - y0),
        (2.0 * theta - t0 - t1) / (t1 - t0),
    ];
    let shape = disc.element.shape_at(xi);
    let grads = disc.element.grads_at(xi);
    let dofs = disc.dofs.element_dofs(&disc.mesh.elements()[e]);
    let mut val = zero;
    let mut grad = [zero; 2];
    for a in 0..4 {
        if let Some(d) = dofs[a] {
            val += coeffs[d] * shape[a];
            grad[0] += coeffs[d] * (grads[a][0] * 2.0 / (y1 - y0));
            grad[1] += coeffs[d] * (grads[a][1] * 2.0 / (t1 - t0));
        }
    }
    (val, grad)
}

/// `L^2` error and `H^1` seminorm error of a finite element function
/// against an analytic field, by element quadrature with `rule`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldErrors {
    pub l2: f64,
    pub h1_semi: f64,
}

impl FieldErrors {
    /// Full `H^1` norm of the error.
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

pub fn field_errors(
    disc: &Discretization,
    rule: &ReferenceElement,
    coeffs: &[C64],
    exact: &AnalyticField,
) -> FieldErrors {
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for (e, element) in disc.mesh.elements().iter().enumerate() {
        let [y0, y1, t0, t1] = disc.mesh.element_bounds(e);
        let (hy, ht) = (y1 - y0, t1 - t0);
        let jac = 0.25 * hy * ht;
        let dofs = disc.dofs.element_dofs(element);
        for q in 0..rule.points().len() {
            let xi = rule.points()[q];
            let y = y0 + 0.5 * (xi[0] + 1.0) * hy;
            let t = t0 + 0.5 * (xi[1] + 1.0) * ht;
            let w = rule.weights()[q] * jac;
            let shape = rule.shape(q);
            let grads = rule.grads(q);
            let mut uh = C64::new(0.0, 0.0);
            let mut gh = [C64::new(0.0, 0.0); 2];
            for a in 0..4 {
                if let Some(d) = dofs[a] {
                    uh += coeffs[d] * shape[a];
                    gh[0] += coeffs[d] * (grads[a][0] * 2.0 / hy);
                    gh[1] += coeffs[d] * (grads[a][1] * 2.0 / ht);
                }
            }
            let u = exact.value(y, t);
            let g = exact.gradient(y, t);
            l2 += w * (u - uh).norm_sqr();
            semi += w * ((g[0] - gh[0]).norm_sqr() + (g[1] - gh[1]).norm_sqr());
        }
    }
    FieldErrors {
        l2: l2.sqrt(),
        h1_semi: semi.sqrt(),
    }
}

/// `L^2` norm of an analytic field by element quadrature.
pub fn analytic_l2_norm(disc: &Discretization, rule: &ReferenceElement, f: impl Fn(f64, f64) -> C64) -> f64 {
    let mut acc = 0.0;
    for e in 0..disc.mesh.elements().len() {
        let [y0, y1, t0, t1] = disc.mesh.element_bounds(e);
        let (hy, ht) = (y1 - y0, t1 - t0);
        for (q, xi) in rule.points().iter().enumerate() {
            let y = y0 + 0.5 * (xi[0] + 1.0) * hy;
            let t = t0 + 0.5 * (xi[1] + 1.0) * ht;
            acc += rule.weights()[q] * 0.25 * hy * ht * f(y, t).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Nodal interpolant of an analytic field onto the free nodes.
pub fn interpolate(disc: &Discretization, f: &AnalyticField) -> Vec<C64> {
    (0..disc.n_free())
        .map(|d| {
            let (y, t) = disc.mesh.node_coords(disc.dofs.node_of(d));
            f.value(y, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RectDomain;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn fe_function_is_its_own_exact_field() {
        let disc = Discretization::uniform(RectDomain::unit(), 4, 5).unwrap();
        let coeffs: Vec<C64> = (0..disc.n_free())
            .map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let exact = AnalyticField::from_fe(&disc, &coeffs);
        let rule = ReferenceElement::new(1, 5).unwrap();
        let err = field_errors(&disc, &rule, &coeffs, &exact);
        assert!(err.l2 < 1e-14 && err.h1_semi < 1e-13, "{err:?}");
    }

    #[test]
    fn constant_offset_error_is_sqrt_area() {
        let disc = Discretization::uniform(RectDomain::new(0.0, 2.0, 0.0, 1.0).unwrap(), 3, 4).unwrap();
        let coeffs = vec![C64::new(0.0, 0.0); disc.n_free()];
        let offset = C64::new(0.3, -0.4);
        let exact = AnalyticField::new(move |_, _| offset, |_, _| [c(0.0); 2]);
        let err = field_errors(&disc, &ReferenceElement::q1(), &coeffs, &exact);
        assert!((err.l2 - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_defect_detects_wrong_gradient() {
        let good = AnalyticField::new(|y, t| c(y * y * t), |y, t| [c(2.0 * y * t), c(y * y)]);
        let bad = AnalyticField::new(|y, t| c(y * y * t), |y, t| [c(y * t), c(y * y)]);
        let pts = [(0.3, 0.4), (0.7, 0.2)];
        assert!(good.gradient_defect(&pts, 1e-5) < 1e-8);
        assert!(bad.gradient_defect(&pts, 1e-5) > 1e-2);
    }

    #[test]
    fn interpolant_reproduces_nodal_values() {
        let disc = Discretization::uniform(RectDomain::unit(), 2, 4).unwrap();
        let f = AnalyticField::new(|y, t| c(y * t * (1.0 - t)), |_, _| [c(0.0); 2]);
        let v = interpolate(&disc, &f);
        for (d, val) in v.iter().enumerate() {
            let (y, t) = disc.mesh.node_coords(disc.dofs.node_of(d));
            assert_eq!(*val, f.value(y, t));
            assert_eq!(fe_value(&disc, &v, y, t).0, *val);
        }
    }
}
