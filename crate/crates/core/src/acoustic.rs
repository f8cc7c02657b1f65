//! Narrow-angle acoustic model over variable bathymetry and its change of
//! variables onto the fixed rectangle.
//!
//! The physical field `psi(r, z, theta)` lives on `0 <= z <= s(r, theta)`.
//! With `y = z / s` and `v = sqrt(s) psi` the problem becomes an instance of
//! [`GeneralProblem`] on `(0, 1) x (theta_min, theta_max)` with
//!
//! ```text
//! D      = [[a/s^2 + (a/r^2) y^2 (s_t/s)^2,  -(a/r^2) y s_t/s],
//!           [-(a/r^2) y s_t/s,               a/r^2          ]]
//! b      = (y s_r / s, 0)
//! lambda = (s_r/s + i (a/r^2)(s_t/s)^2) / 2
//! beta   = beta_psi(r, y s, theta) + (a/r^2)(3 s_t^2 - 2 s s_tt)/(4 s^2) - i s_r/(2 s)
//! F      = 0
//! v0     = sqrt(s(r_min, theta)) psi0(y s(r_min, theta), theta)
//! ```
//!
//! where `a = 1/(2 k0)`.

use crate::bathymetry::{Bathymetry, DepthSample};
use crate::field::AnalyticField;
use crate::mesh::RectDomain;
use crate::problem::{GeneralProblem, ProblemError, ScalarField};
use num_complex::Complex64 as C64;
use std::sync::Arc;

#[derive(Clone)]
pub struct AcousticScenario {
    pub domain: RectDomain,
    /// Reference wavenumber in rad per unit length.
    pub k0: f64,
    /// Refraction term `k0 (n^2 - 1) / 2` as a function of `(r, z, theta)`.
    pub beta_psi: ScalarField,
    pub bathymetry: Arc<dyn Bathymetry>,
    /// Source field `psi0(z, theta)` with its gradient.
    pub source: AnalyticField,
}

impl AcousticScenario {
    pub fn new(domain: RectDomain, k0: f64, bathymetry: Arc<dyn Bathymetry>) -> Self {
        let source = gaussian_source(&domain, 0.5, 0.25, 1.0);
        Self {
            domain,
            k0,
            beta_psi: Arc::new(|_, _, _| C64::new(0.0, 0.0)),
            bathymetry,
            source,
        }
    }

    pub fn with_beta_psi(mut self, beta: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        self.beta_psi = Arc::new(beta);
        self
    }

    pub fn with_source(mut self, source: AnalyticField) -> Self {
        self.source = source;
        self
    }

    pub fn a(&self) -> f64 {
        0.5 / self.k0
    }
}

/// `psi0(z, theta) = z exp(-((z - z_s)/w)^2) sin(pi (theta - theta_min)/(theta_max - theta_min))`,
/// which vanishes at the surface and on both azimuthal edges.
pub fn gaussian_source(domain: &RectDomain, z_s: f64, width: f64, amplitude: f64) -> AnalyticField {
    let (t0, tw) = (domain.theta_min, domain.theta_width());
    let k = std::f64::consts::PI / tw;
    let g = move |z: f64| (-((z - z_s) / width).powi(2)).exp();
    AnalyticField::new(
        move |z, t| C64::new(amplitude * z * g(z) * (k * (t - t0)).sin(), 0.0),
        move |z, t| {
            let dz = g(z) * (1.0 - 2.0 * z * (z - z_s) / (width * width));
            [
                C64::new(amplitude * dz * (k * (t - t0)).sin(), 0.0),
                C64::new(amplitude * z * g(z) * k * (k * (t - t0)).cos(), 0.0),
            ]
        },
    )
}

fn sample_or_nan(bathy: &dyn Bathymetry, r: f64, theta: f64) -> DepthSample {
    bathy.sample(r, theta).unwrap_or(DepthSample {
        s: f64::NAN,
        s_r: f64::NAN,
        s_theta: f64::NAN,
        s_theta_theta: f64::NAN,
    })
}

/// Rewrites the acoustic problem on the rectangle.
///
/// Depth is checked on a sample of the domain first; a bathymetry query that
/// fails later (for instance outside a grid hull) surfaces as a non-finite
/// coefficient during assembly.
pub fn transform_to_rectangle(sc: &AcousticScenario) -> Result<GeneralProblem, ProblemError> {
    let dom = sc.domain;
    if !(dom.r_min > 0.0) {
        return Err(ProblemError::NonPositiveRange(dom.r_min));
    }
    let n = 9;
    for i in 0..n {
        for j in 0..n {
            let r = dom.r_min + dom.range_length() * i as f64 / (n - 1) as f64;
            let t = dom.theta_min + dom.theta_width() * j as f64 / (n - 1) as f64;
            let d = sc.bathymetry.sample(r, t)?;
            if !(d.s > 0.0) {
                return Err(ProblemError::NonPositiveDepth { depth: d.s, r, theta: t });
            }
        }
    }
    let a = sc.a();

    let bathy = sc.bathymetry.clone();
    let diffusion = move |r: f64, y: f64, t: f64| {
        let d = sample_or_nan(bathy.as_ref(), r, t);
        let ar = a / (r * r);
        let q = d.s_theta / d.s;
        let cross = -ar * y * q;
        [[a / (d.s * d.s) + ar * y * y * q * q, cross], [cross, ar]]
    };
    let bathy = sc.bathymetry.clone();
    let drift = move |r: f64, y: f64, t: f64| {
        let d = sample_or_nan(bathy.as_ref(), r, t);
        [y * d.s_r / d.s, 0.0]
    };
    let bathy = sc.bathymetry.clone();
    let robin = move |r: f64, t: f64| {
        let d = sample_or_nan(bathy.as_ref(), r, t);
        let q = d.s_theta / d.s;
        C64::new(0.5 * d.s_r / d.s, 0.5 * a / (r * r) * q * q)
    };
    let bathy = sc.bathymetry.clone();
    let beta_psi = sc.beta_psi.clone();
    let potential = move |r: f64, y: f64, t: f64| {
        let d = sample_or_nan(bathy.as_ref(), r, t);
        let geometric = a / (r * r) * (3.0 * d.s_theta * d.s_theta - 2.0 * d.s * d.s_theta_theta) / (4.0 * d.s * d.s);
        beta_psi(r, y * d.s, t) + C64::new(geometric, -0.5 * d.s_r / d.s)
    };

    let r0 = dom.r_min;
    let bathy_v = sc.bathymetry.clone();
    let bathy_g = sc.bathymetry.clone();
    let psi_v = sc.source.clone();
    let psi_g = sc.source.clone();
    let initial = AnalyticField::new(
        move |y, t| {
            let d = sample_or_nan(bathy_v.as_ref(), r0, t);
            psi_v.value(y * d.s, t) * d.s.sqrt()
        },
        move |y, t| {
            let d = sample_or_nan(bathy_g.as_ref(), r0, t);
            let root = d.s.sqrt();
            let z = y * d.s;
            let psi = psi_g.value(z, t);
            let gp = psi_g.gradient(z, t);
            [
                gp[0] * (root * d.s),
                psi * (0.5 * d.s_theta / root) + (gp[0] * (y * d.s_theta) + gp[1]) * root,
            ]
        },
    );

    Ok(GeneralProblem {
        domain: dom,
        diffusion: Arc::new(diffusion),
        drift: Arc::new(drift),
        potential: Arc::new(potential),
        robin: Arc::new(robin),
        source: Arc::new(|_, _, _| C64::new(0.0, 0.0)),
        initial,
        robin_datum: None,
        line_sources: Vec::new(),
        range_independent: false,
    })
}
