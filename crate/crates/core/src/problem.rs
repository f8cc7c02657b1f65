//! The general range-stepping problem
//!
//! ```text
//! u_r = i div(D grad u) + b . grad u + i beta u + F   in [r_min, r_max] x (0,1) x (theta_min, theta_max)
//! u = 0                                              on y = 0, theta = theta_min, theta = theta_max
//! eta . (D grad u) = i lambda u + g                  on y = 1,  eta = (1, 0)
//! u(r_min) = u0
//! ```
//!
//! with coefficient fields supplied as pure callables. Callables must not
//! carry hidden mutable state: assembly may evaluate them from several
//! threads and in any order.

use crate::field::AnalyticField;
use crate::mesh::RectDomain;
use num_complex::Complex64 as C64;
use std::sync::Arc;
use thiserror::Error;

pub type MatrixField = Arc<dyn Fn(f64, f64, f64) -> [[f64; 2]; 2] + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(f64, f64, f64) -> C64 + Send + Sync>;
/// A field on the Robin side, a function of `(r, theta)`.
pub type BoundaryField = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("coefficient `{field}` is not finite at r={r}, y={y}, theta={theta}")]
    NonFinite {
        field: &'static str,
        r: f64,
        y: f64,
        theta: f64,
    },
    #[error("sampling grid must have at least one point per axis")]
    EmptySampling,
    #[error("depth must be positive, got {depth} at r={r}, theta={theta}")]
    NonPositiveDepth { depth: f64, r: f64, theta: f64 },
    #[error("r_min must be positive for the acoustic transform, got {0}")]
    NonPositiveRange(f64),
    #[error("bathymetry derivative `{which}` deviates from finite differences by {defect} at r={r}, theta={theta}")]
    InconsistentDerivative {
        which: &'static str,
        defect: f64,
        r: f64,
        theta: f64,
    },
    #[error("query r={r}, theta={theta} lies outside the bathymetry grid")]
    OutsideGrid { r: f64, theta: f64 },
    #[error("bathymetry grid: {0}")]
    Grid(String),
}

/// A source concentrated on the segment `theta = theta_c`, `0 <= y <= 1`,
/// contributing `int_0^1 density(r, y) conj(phi(y, theta_c)) dy` to the load.
#[derive(Clone)]
pub struct LineSource {
    pub theta: f64,
    pub density: Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>,
}

/// Coefficient bundle of the general problem.
#[derive(Clone)]
pub struct GeneralProblem {
    pub domain: RectDomain,
    pub diffusion: MatrixField,
    pub drift: VectorField,
    pub potential: ScalarField,
    pub robin: BoundaryField,
    pub source: ScalarField,
    pub initial: AnalyticField,
    pub robin_datum: Option<BoundaryField>,
    pub line_sources: Vec<LineSource>,
    /// Set when `D`, `b`, `beta` and `lambda` do not depend on `r`; the
    /// stepper then factorizes its system once.
    pub range_independent: bool,
}

impl std::fmt::Debug for GeneralProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralProblem")
            .field("domain", &self.domain)
            .field("robin_datum", &self.robin_datum.is_some())
            .field("line_sources", &self.line_sources.len())
            .field("range_independent", &self.range_independent)
            .finish()
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl GeneralProblem {
    /// `D = I`, everything else zero.
    pub fn new(domain: RectDomain) -> Self {
        Self {
            domain,
            diffusion: Arc::new(|_, _, _| [[1.0, 0.0], [0.0, 1.0]]),
            drift: Arc::new(|_, _, _| [0.0, 0.0]),
            potential: Arc::new(|_, _, _| zero()),
            robin: Arc::new(|_, _| zero()),
            source: Arc::new(|_, _, _| zero()),
            initial: AnalyticField::zero(),
            robin_datum: None,
            line_sources: Vec::new(),
            range_independent: true,
        }
    }

    pub fn with_diffusion(mut self, d: impl Fn(f64, f64, f64) -> [[f64; 2]; 2] + Send + Sync + 'static) -> Self {
        self.diffusion = Arc::new(d);
        self
    }

    pub fn with_drift(mut self, b: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(b);
        self
    }

    pub fn with_potential(mut self, beta: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        self.potential = Arc::new(beta);
        self
    }

    pub fn with_robin(mut self, lambda: impl Fn(f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        self.robin = Arc::new(lambda);
        self
    }

    pub fn with_source(mut self, f: impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_initial(mut self, u0: AnalyticField) -> Self {
        self.initial = u0;
        self
    }

    pub fn with_robin_datum(mut self, g: impl Fn(f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        self.robin_datum = Some(Arc::new(g));
        self
    }

    pub fn with_line_source(mut self, source: LineSource) -> Self {
        self.line_sources.push(source);
        self
    }

    pub fn range_dependent(mut self) -> Self {
        self.range_independent = false;
        self
    }

    pub fn diffusion_at(&self, r: f64, y: f64, theta: f64) -> Result<[[f64; 2]; 2], ProblemError> {
        let d = (self.diffusion)(r, y, theta);
        if d.iter().flatten().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(non_finite("D", r, y, theta))
        }
    }

    pub fn drift_at(&self, r: f64, y: f64, theta: f64) -> Result<[f64; 2], ProblemError> {
        let b = (self.drift)(r, y, theta);
        if b.iter().all(|v| v.is_finite()) {
            Ok(b)
        } else {
            Err(non_finite("b", r, y, theta))
        }
    }

    pub fn potential_at(&self, r: f64, y: f64, theta: f64) -> Result<C64, ProblemError> {
        finite("beta", (self.potential)(r, y, theta), r, y, theta)
    }

    pub fn robin_at(&self, r: f64, theta: f64) -> Result<C64, ProblemError> {
        finite("lambda", (self.robin)(r, theta), r, 1.0, theta)
    }

    pub fn source_at(&self, r: f64, y: f64, theta: f64) -> Result<C64, ProblemError> {
        finite("F", (self.source)(r, y, theta), r, y, theta)
    }

    pub fn robin_datum_at(&self, r: f64, theta: f64) -> Result<C64, ProblemError> {
        match &self.robin_datum {
            Some(g) => finite("g", g(r, theta), r, 1.0, theta),
            None => Ok(zero()),
        }
    }

    /// Boundary coefficient of the adjoint problem, `b_1(r, 1, theta) - conj(lambda(r, theta))`.
    pub fn lambda_star(&self, r: f64, theta: f64) -> Result<C64, ProblemError> {
        let b1 = self.drift_at(r, 1.0, theta)?[0];
        Ok(C64::new(b1, 0.0) - self.robin_at(r, theta)?.conj())
    }

    /// Growth constant `c` with `d/dr ||u||^2 <= 2 c ||u||^2` for `F = 0`
    /// under the con2 sign condition: the sampled maximum of
    /// `-(div b)/2 - Im beta`, floored at zero. `div b` uses central
    /// differences of the drift field.
    pub fn growth_constant(&self, sampling: &SamplingGrid) -> Result<f64, ProblemError> {
        let fd = 1e-6;
        let mut c: f64 = 0.0;
        for (r, y, t) in sampling.points(&self.domain)? {
            let yp = (y + fd).min(1.0);
            let ym = (y - fd).max(0.0);
            let tp = (t + fd).min(self.domain.theta_max);
            let tm = (t - fd).max(self.domain.theta_min);
            let b1y = (self.drift_at(r, yp, t)?[0] - self.drift_at(r, ym, t)?[0]) / (yp - ym);
            let b2t = (self.drift_at(r, y, tp)?[1] - self.drift_at(r, y, tm)?[1]) / (tp - tm);
            let im_beta = self.potential_at(r, y, t)?.im;
            c = c.max(-0.5 * (b1y + b2t) - im_beta);
        }
        Ok(c)
    }
}

fn non_finite(field: &'static str, r: f64, y: f64, theta: f64) -> ProblemError {
    ProblemError::NonFinite { field, r, y, theta }
}

fn finite(field: &'static str, v: C64, r: f64, y: f64, theta: f64) -> Result<C64, ProblemError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(field, r, y, theta))
    }
}

/// Tensor sampling grid over `(r, y, theta)` including endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub n_r: usize,
    pub n_y: usize,
    pub n_theta: usize,
    /// Tolerance below which `con2` counts as an equality.
    pub equality_tol: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self {
            n_r: 5,
            n_y: 9,
            n_theta: 9,
            equality_tol: 1e-10,
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

impl SamplingGrid {
    pub fn points(&self, domain: &RectDomain) -> Result<Vec<(f64, f64, f64)>, ProblemError> {
        if self.n_r == 0 || self.n_y == 0 || self.n_theta == 0 {
            return Err(ProblemError::EmptySampling);
        }
        let rs = axis(domain.r_min, domain.r_max, self.n_r);
        let ys = axis(0.0, 1.0, self.n_y);
        let ts = axis(domain.theta_min, domain.theta_max, self.n_theta);
        let mut out = Vec::with_capacity(rs.len() * ys.len() * ts.len());
        for &r in &rs {
            for &y in &ys {
                for &t in &ts {
                    out.push((r, y, t));
                }
            }
        }
        Ok(out)
    }

    pub fn boundary_points(&self, domain: &RectDomain) -> Result<Vec<(f64, f64)>, ProblemError> {
        if self.n_r == 0 || self.n_theta == 0 {
            return Err(ProblemError::EmptySampling);
        }
        let rs = axis(domain.r_min, domain.r_max, self.n_r);
        let ts = axis(domain.theta_min, domain.theta_max, self.n_theta);
        Ok(rs.iter().flat_map(|&r| ts.iter().map(move |&t| (r, t))).collect())
    }
}

/// A sampled value with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleValue {
    pub value: f64,
    pub r: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Con0,
    Con1,
    Con2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub con0_ok: bool,
    pub con1_ok: bool,
    pub con2_ok: bool,
    pub con2_equality: bool,
    /// Smallest sampled `det(D)`.
    pub min_det: SampleValue,
    /// Largest sampled asymmetry `|D12 - D21|`.
    pub max_asymmetry: f64,
    /// Largest sampled `b_1(r,1,theta) - 2 Re lambda(r,theta)`.
    pub max_con2: SampleValue,
    /// Largest sampled `|b_1(r,1,theta) - 2 Re lambda(r,theta)|`.
    pub max_con2_abs: f64,
    pub samples: usize,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.con0_ok && self.con1_ok && self.con2_ok
    }

    /// The most severe failing condition and where it fails.
    pub fn worst_violation(&self) -> Option<(Condition, SampleValue)> {
        if !self.con0_ok {
            Some((Condition::Con0, self.min_det))
        } else if !self.con2_ok {
            Some((Condition::Con2, self.max_con2))
        } else {
            None
        }
    }
}

/// Checks con0 (`D` symmetric, `det D > 0`), con1 (`b` real, which the
/// types guarantee) and con2 (`b_1 - 2 Re lambda <= 0` on `y = 1`) on a
/// sampling grid.
pub fn validate_conditions(p: &GeneralProblem, sampling: &SamplingGrid) -> Result<ConditionReport, ProblemError> {
    let tol = sampling.equality_tol;
    let mut min_det = SampleValue {
        value: f64::INFINITY,
        r: 0.0,
        y: 0.0,
        theta: 0.0,
    };
    let mut max_asym: f64 = 0.0;
    let mut sym_ok = true;
    let points = sampling.points(&p.domain)?;
    for &(r, y, t) in &points {
        let d = p.diffusion_at(r, y, t)?;
        p.drift_at(r, y, t)?;
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        let asym = (d[0][1] - d[1][0]).abs();
        let scale = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if asym > tol * scale.max(1.0) {
            sym_ok = false;
        }
        max_asym = max_asym.max(asym);
        if det < min_det.value {
            min_det = SampleValue { value: det, r, y, theta: t };
        }
    }
    let mut max_con2 = SampleValue {
        value: f64::NEG_INFINITY,
        r: 0.0,
        y: 1.0,
        theta: 0.0,
    };
    let mut max_abs: f64 = 0.0;
    let boundary = sampling.boundary_points(&p.domain)?;
    for &(r, t) in &boundary {
        let v = p.drift_at(r, 1.0, t)?[0] - 2.0 * p.robin_at(r, t)?.re;
        max_abs = max_abs.max(v.abs());
        if v > max_con2.value {
            max_con2 = SampleValue { value: v, r, y: 1.0, theta: t };
        }
    }
    let con2_ok = max_con2.value <= tol;
    Ok(ConditionReport {
        con0_ok: sym_ok && min_det.value > 0.0,
        con1_ok: true,
        con2_ok,
        con2_equality: con2_ok && max_abs <= tol,
        min_det,
        max_asymmetry: max_asym,
        max_con2,
        max_con2_abs: max_abs,
        samples: points.len() + boundary.len(),
    })
}
