//! Reference element and Gauss-Legendre quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("polynomial degree {0} is not supported (only Q1)")]
    UnsupportedDegree(usize),
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `n` points, exact for polynomials of degree `2n - 1`.
    ///
    /// Nodes are the roots of the Legendre polynomial `P_n`, located by
    /// Newton's method from the Chebyshev-like initial guess; weights are
    /// `2 / ((1 - x^2) P_n'(x)^2)`.
    pub fn new(n: usize) -> Result<Self, ElementError> {
        if n == 0 {
            return Err(ElementError::ZeroOrder);
        }
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            points[n / 2] = 0.0;
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Points and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Reference square [-1, 1]^2 with tensor Lagrange shape functions and a
/// tensor Gauss rule.
///
/// Local corner order is counterclockwise in the (y, theta) plane:
/// `(-1,-1), (1,-1), (1,1), (-1,1)`, the first coordinate being y.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    order: usize,
    rule: GaussLegendre,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    shape: Vec<[f64; 4]>,
    grads: Vec<[[f64; 2]; 4]>,
}

pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

impl ReferenceElement {
    pub fn new(degree: usize, order: usize) -> Result<Self, ElementError> {
        if degree != 1 {
            return Err(ElementError::UnsupportedDegree(degree));
        }
        let rule = GaussLegendre::new(order)?;
        let mut points = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for (&xa, &wa) in rule.points().iter().zip(rule.weights()) {
            for (&xb, &wb) in rule.points().iter().zip(rule.weights()) {
                points.push([xa, xb]);
                weights.push(wa * wb);
            }
        }
        let shape = points.iter().map(|&p| q1_shape(p)).collect();
        let grads = points.iter().map(|&p| q1_gradients(p)).collect();
        Ok(Self {
            degree,
            order,
            rule,
            points,
            weights,
            shape,
            grads,
        })
    }

    /// Q1 element with the default 3-point rule per axis.
    pub fn q1() -> Self {
        Self::new(1, 3).expect("Q1 with order 3 is always valid")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of Gauss points per axis.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_local(&self) -> usize {
        4
    }

    pub fn rule_1d(&self) -> &GaussLegendre {
        &self.rule
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shape values at quadrature point `q`.
    pub fn shape(&self, q: usize) -> &[f64; 4] {
        &self.shape[q]
    }

    /// Reference gradients at quadrature point `q`.
    pub fn grads(&self, q: usize) -> &[[f64; 2]; 4] {
        &self.grads[q]
    }

    pub fn shape_at(&self, xi: [f64; 2]) -> [f64; 4] {
        q1_shape(xi)
    }

    pub fn grads_at(&self, xi: [f64; 2]) -> [[f64; 2]; 4] {
        q1_gradients(xi)
    }
}

fn q1_shape(xi: [f64; 2]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        out[a] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    out
}

fn q1_gradients(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut out = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        out[a] = [
            0.25 * c[0] * (1.0 + c[1] * xi[1]),
            0.25 * c[1] * (1.0 + c[0] * xi[0]),
        ];
    }
    out
}
