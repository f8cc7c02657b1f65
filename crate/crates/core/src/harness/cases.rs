//! Manufactured solutions with hand-derived data.

use crate::field::{AnalyticField, RangeField};
use crate::mesh::RectDomain;
use crate::problem::{GeneralProblem, LineSource};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// An exact solution together with the problem whose data it generates:
/// `F = u_r - i div(D grad u) - b . grad u - i beta u` and
/// `g = (D grad u)_y - i lambda u` on `y = 1`.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub exact: RangeField,
    pub problem: GeneralProblem,
    /// Points where the strong form is not classical (kinks), excluded
    /// from the finite-difference self-check.
    pub singular_theta: Vec<f64>,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).finish()
    }
}

impl ManufacturedCase {
    /// `u = e^{2r} y (e^{-y} - 1) theta (1 - theta)^3` on the unit square,
    /// `r in [0, 1]`, with `D = I`, `b = 0`, `beta = 1`, `lambda = i`.
    pub fn smooth() -> Self {
        let yf = |y: f64| y * ((-y).exp() - 1.0);
        let dyf = |y: f64| (-y).exp() * (1.0 - y) - 1.0;
        let d2yf = |y: f64| (y - 2.0) * (-y).exp();
        let tf = |t: f64| t * (1.0 - t).powi(3);
        let dtf = |t: f64| (1.0 - t).powi(2) * (1.0 - 4.0 * t);
        let d2tf = |t: f64| 6.0 * (1.0 - t) * (2.0 * t - 1.0);

        let u = move |r: f64, y: f64, t: f64| (2.0 * r).exp() * yf(y) * tf(t);
        let grad = move |r: f64, y: f64, t: f64| {
            let e = (2.0 * r).exp();
            [re(e * dyf(y) * tf(t)), re(e * yf(y) * dtf(t))]
        };
        let exact = RangeField::new(
            move |r, y, t| re(u(r, y, t)),
            grad,
            move |r, y, t| re(2.0 * u(r, y, t)),
            move |r, y, t| {
                let g = grad(r, y, t);
                [2.0 * g[0], 2.0 * g[1]]
            },
        );
        let lap = move |r: f64, y: f64, t: f64| (2.0 * r).exp() * (d2yf(y) * tf(t) + yf(y) * d2tf(t));
        // F = u_r - i lap u - i u with u_r = 2u
        let source = move |r: f64, y: f64, t: f64| {
            let v = u(r, y, t);
            C64::new(2.0 * v, -lap(r, y, t) - v)
        };
        // g = u_y - i * i * u = u_y + u at y = 1
        let datum = move |r: f64, t: f64| re((2.0 * r).exp() * (dyf(1.0) + yf(1.0)) * tf(t));
        let problem = GeneralProblem::new(RectDomain::unit())
            .with_potential(|_, _, _| re(1.0))
            .with_robin(|_, _| I)
            .with_source(source)
            .with_robin_datum(datum)
            .with_initial(exact.at(0.0));
        Self {
            name: "smooth",
            exact,
            problem,
            singular_theta: Vec::new(),
        }
    }

    /// `u = (1 + r) y (1 - |2 theta - 1|)`, which lies in the Q1 space of any
    /// mesh with a node line at `theta = 1/2`. Same coefficients as
    /// [`ManufacturedCase::smooth`]. The kink puts a line source
    /// `4 i (1 + r) y` on `theta = 1/2`.
    pub fn bilinear() -> Self {
        let tent = |t: f64| 1.0 - (2.0 * t - 1.0).abs();
        let dtent = |t: f64| -2.0 * (2.0 * t - 1.0).signum();
        let exact = RangeField::new(
            move |r, y, t| re((1.0 + r) * y * tent(t)),
            move |r, y, t| [re((1.0 + r) * tent(t)), re((1.0 + r) * y * dtent(t))],
            move |_, y, t| re(y * tent(t)),
            move |_, y, t| [re(tent(t)), re(y * dtent(t))],
        );
        let problem = GeneralProblem::new(RectDomain::unit())
            .with_potential(|_, _, _| re(1.0))
            .with_robin(|_, _| I)
            // u_r - i u; the Laplacian is singular on the kink only
            .with_source(move |r, y, t| {
                let h = y * tent(t);
                C64::new(h, -(1.0 + r) * h)
            })
            .with_line_source(LineSource {
                theta: 0.5,
                density: Arc::new(|r, y| C64::new(0.0, 4.0 * (1.0 + r) * y)),
            })
            .with_robin_datum(move |r, t| re(2.0 * (1.0 + r) * tent(t)))
            .with_initial(exact.at(0.0));
        Self {
            name: "bilinear",
            exact,
            problem,
            singular_theta: vec![0.5],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "smooth" => Some(Self::smooth()),
            "bilinear" => Some(Self::bilinear()),
            _ => None,
        }
    }

    pub fn exact_at(&self, r: f64) -> AnalyticField {
        self.exact.at(r)
    }

    /// Strong-form residual with every derivative taken by central
    /// differences of the exact value and flux.
    pub fn strong_residual(&self, r: f64, y: f64, t: f64, step: f64) -> C64 {
        let p = &self.problem;
        let u = |r: f64, y: f64, t: f64| self.exact.value(r, y, t);
        let du = |y: f64, t: f64| {
            [
                (u(r, y + step, t) - u(r, y - step, t)) / (2.0 * step),
                (u(r, y, t + step) - u(r, y, t - step)) / (2.0 * step),
            ]
        };
        let flux = |y: f64, t: f64| {
            let d = p.diffusion_at(r, y, t).expect("finite diffusion");
            let g = du(y, t);
            [d[0][0] * g[0] + d[0][1] * g[1], d[1][0] * g[0] + d[1][1] * g[1]]
        };
        let ur = (u(r + step, y, t) - u(r - step, y, t)) / (2.0 * step);
        let div = (flux(y + step, t)[0] - flux(y - step, t)[0]) / (2.0 * step)
            + (flux(y, t + step)[1] - flux(y, t - step)[1]) / (2.0 * step);
        let b = p.drift_at(r, y, t).expect("finite drift");
        let g = du(y, t);
        let beta = p.potential_at(r, y, t).expect("finite potential");
        let f = p.source_at(r, y, t).expect("finite source");
        ur - I * div - (b[0] * g[0] + b[1] * g[1]) - I * beta * u(r, y, t) - f
    }

    /// Largest `|strong_residual|` and largest deviation of `g` from `(D grad u)_y - i lambda u`, over seeded
    /// random points.
    pub fn self_check(&self, n_points: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = self.problem.domain;
        let step = 1e-3;
        let margin = 0.01;
        let mut worst_pde: f64 = 0.0;
        let mut worst_g: f64 = 0.0;
        let mut taken = 0;
        while taken < n_points {
            let r = rng.gen_range(dom.r_min + margin..dom.r_max - margin);
            let y = rng.gen_range(margin..1.0 - margin);
            let t = rng.gen_range(dom.theta_min + margin..dom.theta_max - margin);
            if self.singular_theta.iter().any(|s| (t - s).abs() < margin) {
                continue;
            }
            taken += 1;
            // Richardson extrapolation of two step sizes removes the
            // leading h^2 term of the central differences.
            let a = self.strong_residual(r, y, t, step);
            let b = self.strong_residual(r, y, t, 0.5 * step);
            worst_pde = worst_pde.max(((4.0 * b - a) / 3.0).norm());

            let d = self.problem.diffusion_at(r, 1.0, t).expect("finite diffusion");
            let gr = self.exact.gradient(r, 1.0, t);
            let lam = self.problem.robin_at(r, t).expect("finite lambda");
            let want = d[0][0] * gr[0] + d[0][1] * gr[1] - I * lam * self.exact.value(r, 1.0, t);
            let got = self.problem.robin_datum_at(r, t).expect("finite datum");
            worst_g = worst_g.max((want - got).norm());
        }
        (worst_pde, worst_g)
    }
}

/// An `r`-dependent problem with variable `D`, `b`, `lambda` satisfying the
/// sign condition, and a smooth field vanishing on the Dirichlet sides, for
/// projection rate studies.
pub fn projection_test_problem() -> (GeneralProblem, RangeField) {
    use std::f64::consts::PI;
    let dom = RectDomain::unit();
    let b1 = |r: f64, y: f64| (0.5 + 0.5 * r) * y;
    let p = GeneralProblem::new(dom)
        .with_diffusion(|r, y, t| {
            let off = 0.1 * (PI * t).sin();
            [[1.0 + 0.5 * r * y, off], [off, 1.0 + 0.2 * r]]
        })
        .with_drift(move |r, y, t| [b1(r, y), 0.3 * (PI * t).cos()])
        .with_robin(move |r, _| C64::new(0.5 * b1(r, 1.0) + 0.1, 1.0 + 0.5 * r))
        .range_dependent();
    // v = cos(r) y e^y sin(pi t) + i r y^2 t (1 - t)
    let v = RangeField::new(
        |r, y, t| C64::new(r.cos() * y * y.exp() * (PI * t).sin(), r * y * y * t * (1.0 - t)),
        |r, y, t| {
            [
                C64::new(r.cos() * (1.0 + y) * y.exp() * (PI * t).sin(), 2.0 * r * y * t * (1.0 - t)),
                C64::new(r.cos() * y * y.exp() * PI * (PI * t).cos(), r * y * y * (1.0 - 2.0 * t)),
            ]
        },
        |r, y, t| C64::new(-r.sin() * y * y.exp() * (PI * t).sin(), y * y * t * (1.0 - t)),
        |r, y, t| {
            [
                C64::new(-r.sin() * (1.0 + y) * y.exp() * (PI * t).sin(), 2.0 * y * t * (1.0 - t)),
                C64::new(-r.sin() * y * y.exp() * PI * (PI * t).cos(), y * y * (1.0 - 2.0 * t)),
            ]
        },
    );
    (p, v)
}
