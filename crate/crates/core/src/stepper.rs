//! Crank–Nicolson range stepping.
//!
//! With `A(r) = -i B(r) + i G(r)` one step solves
//!
//! ```text
//! (M - k/2 A) U^{n+1} = (M + k/2 A) U^n + k (F(r_mid) + g-load(r_mid))
//! ```
//!
//! with every operator taken at the midpoint `r_mid = (r^n + r^{n+1}) / 2`.
//! The shift `delta` enters `B` and `G` with the same sign and cancels in `A`.

use crate::assembly::{assemble_load, assemble_robin_load, FormMatrices};
use crate::discretization::Discretization;
use crate::element::ReferenceElement;
use crate::field::{analytic_l2_norm, field_errors, AnalyticField};
use crate::problem::{GeneralProblem, ProblemError, SamplingGrid};
use crate::projection::{elliptic_project, ProjectionError};
use crate::solver::{factorize, Factorization, SolverConfig, SolverError};
use crate::sparse::ComplexSparseMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("linear solve failed at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("step k = {k:e} too large for growth constant c = {growth:e} (1 - c k <= 0)")]
    StepTooLarge { k: f64, growth: f64 },
    #[error("non-finite coefficients after step {step}")]
    NonFinite { step: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("state has {got} coefficients, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("range {r} outside [{r_min}, {r_max}]")]
    OutOfRange { r: f64, r_min: f64, r_max: f64 },
}

/// Coefficients of a discrete field at range `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coeffs: Vec<C64>,
    pub r: f64,
}

impl StateVector {
    pub fn zeros(n: usize, r: f64) -> Self {
        Self {
            coeffs: vec![C64::new(0.0, 0.0); n],
            r,
        }
    }

    /// `sqrt(conj(U)^T M U)`.
    pub fn m_norm(&self, mass: &ComplexSparseMatrix) -> f64 {
        mass.quadratic_form(&self.coeffs).re.max(0.0).sqrt()
    }
}

/// Uniform partition of `[r_min, r_max]` into `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchPlan {
    pub n_steps: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub k: f64,
    /// Observers see every `record_every`-th state (and the last one).
    pub record_every: usize,
    pub delta: f64,
}

impl MarchPlan {
    pub fn new(r_min: f64, r_max: f64, n_steps: usize, delta: f64) -> Result<Self, StepError> {
        if n_steps == 0 {
            return Err(StepError::InvalidPlan("zero steps".into()));
        }
        if !(r_max > r_min) {
            return Err(StepError::InvalidPlan(format!("empty range [{r_min}, {r_max}]")));
        }
        Ok(Self {
            n_steps,
            r_min,
            r_max,
            k: (r_max - r_min) / n_steps as f64,
            record_every: 1,
            delta,
        })
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    /// `r^n`; the last node is `r_max` exactly.
    pub fn r(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.r_max
        } else {
            self.r_min + n as f64 * self.k
        }
    }

    pub fn r_mid(&self, n: usize) -> f64 {
        0.5 * (self.r(n) + self.r(n + 1))
    }
}

/// `U^0 = R_h(r_min) u_0`.
pub fn initial_state(
    disc: &Discretization,
    p: &GeneralProblem,
    delta: f64,
    solver: SolverConfig,
) -> Result<StateVector, StepError> {
    let r0 = p.domain.r_min;
    let pr = elliptic_project(disc, p, r0, delta, &p.initial, solver)?;
    Ok(StateVector { coeffs: pr.coeffs, r: r0 })
}

/// The two step matrices at one midpoint.
#[derive(Debug, Clone)]
pub struct StepMatrices {
    pub plus: ComplexSparseMatrix,
    pub minus: ComplexSparseMatrix,
}

/// Per-step numbers the march keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub relative_residual: f64,
    /// `L^2` norm of `F(r_mid)` by quadrature.
    pub source_norm: f64,
}

pub struct CnStepper<'a> {
    disc: &'a Discretization,
    problem: &'a GeneralProblem,
    forms: FormMatrices<'a>,
    solver: SolverConfig,
    growth: f64,
    cached: Option<(f64, Factorization, ComplexSparseMatrix)>,
    norm_rule: ReferenceElement,
}

impl<'a> CnStepper<'a> {
    pub fn new(
        disc: &'a Discretization,
        problem: &'a GeneralProblem,
        delta: f64,
        solver: SolverConfig,
    ) -> Result<Self, StepError> {
        let growth = problem.growth_constant(&SamplingGrid::default())?;
        Ok(Self {
            disc,
            problem,
            forms: FormMatrices::new(disc, problem, delta),
            solver,
            growth,
            cached: None,
            norm_rule: ReferenceElement::q1(),
        })
    }

    pub fn mass(&self) -> &ComplexSparseMatrix {
        &self.forms.mass
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    /// `A_+` and `A_-` at `r_mid`.
    pub fn matrices(&self, k: f64, r_mid: f64) -> Result<StepMatrices, ProblemError> {
        let b = self.forms.form(r_mid)?;
        let g = self.forms.beta_mass(r_mid)?;
        let half = C64::new(0.0, 0.5 * k);
        // -(k/2) A = (ik/2)(B - G)
        let plus = ComplexSparseMatrix::linear_combination(&[(C64::new(1.0, 0.0), &self.forms.mass), (half, &b), (-half, &g)]);
        let minus = ComplexSparseMatrix::linear_combination(&[(C64::new(1.0, 0.0), &self.forms.mass), (-half, &b), (half, &g)]);
        Ok(StepMatrices { plus, minus })
    }

    pub fn loads(&self, r_mid: f64) -> Result<Vec<C64>, ProblemError> {
        let mut f = assemble_load(self.disc, self.problem, r_mid)?;
        if self.problem.robin_datum.is_some() {
            let g = assemble_robin_load(self.disc, self.problem, r_mid)?;
            f.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok(f)
    }

    pub fn check_step(&self, k: f64) -> Result<(), StepError> {
        if !(k > 0.0) {
            return Err(StepError::InvalidPlan(format!("step {k} not positive")));
        }
        if 1.0 - self.growth * k <= 0.0 {
            return Err(StepError::StepTooLarge { k, growth: self.growth });
        }
        Ok(())
    }

    /// One step from `state` over `[state.r, state.r + k]`, reporting
    /// failures against step index `n`.
    pub fn step(&mut self, state: &StateVector, k: f64, r_mid: f64, n: usize) -> Result<(StateVector, StepInfo), StepError> {
        self.check_step(k)?;
        if state.coeffs.len() != self.disc.n_free() {
            return Err(StepError::StateLength {
                expected: self.disc.n_free(),
                got: state.coeffs.len(),
            });
        }
        let reuse = self.problem.range_independent && matches!(&self.cached, Some((ck, _, _)) if *ck == k);
        if !reuse {
            let m = self.matrices(k, r_mid)?;
            let f = factorize(&m.plus, self.solver).map_err(|source| StepError::Solver { step: n, source })?;
            self.cached = Some((k, f, m.minus));
        }
        let (_, fact, minus) = self.cached.as_ref().expect("factorization cached above");
        let loads = self.loads(r_mid)?;
        let mut rhs = minus.mul_vec(&state.coeffs);
        rhs.iter_mut().zip(&loads).for_each(|(a, l)| *a += k * l);
        let (coeffs, rep) = fact.solve(&rhs).map_err(|source| StepError::Solver { step: n, source })?;
        let source_norm = {
            let p = self.problem;
            analytic_l2_norm(self.disc, &self.norm_rule, |y, t| {
                p.source_at(r_mid, y, t).unwrap_or(C64::new(f64::NAN, 0.0))
            })
        };
        Ok((
            StateVector {
                coeffs,
                r: state.r + k,
            },
            StepInfo {
                relative_residual: rep.relative_residual,
                source_norm,
            },
        ))
    }

    /// Marches `u0` through `plan`. The observer receives `(n, r^n, U^n)` at
    /// `n = 0`, every `record_every` steps, and the last step.
    pub fn march(
        &mut self,
        plan: &MarchPlan,
        u0: &StateVector,
        mut observer: impl FnMut(usize, f64, &[C64]),
    ) -> Result<MarchResult, StepError> {
        self.check_step(plan.k)?;
        let mass = self.forms.mass.clone();
        let mut state = u0.clone();
        state.r = plan.r(0);
        let mut norms = vec![state.m_norm(&mass)];
        let mut max_source: f64 = 0.0;
        let mut max_residual: f64 = 0.0;
        observer(0, state.r, &state.coeffs);
        for n in 0..plan.n_steps {
            let (mut next, info) = self.step(&state, plan.k, plan.r_mid(n), n + 1)?;
            next.r = plan.r(n + 1);
            if next.coeffs.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(StepError::NonFinite { step: n + 1 });
            }
            max_source = max_source.max(info.source_norm);
            max_residual = max_residual.max(info.relative_residual);
            norms.push(next.m_norm(&mass));
            state = next;
            if (n + 1) % plan.record_every == 0 || n + 1 == plan.n_steps {
                observer(n + 1, state.r, &state.coeffs);
            }
        }
        let stability = StabilityMonitor::new(&norms, max_source);
        Ok(MarchResult {
            final_state: state,
            norms,
            max_source_norm: max_source,
            max_relative_residual: max_residual,
            stability,
        })
    }
}

/// `max_n ||U^n||_M / (||U^0||_M + max_n ||F(r_mid)||)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMonitor {
    pub ratio: f64,
}

impl StabilityMonitor {
    pub const DEFAULT_MAX: f64 = 10.0;

    pub fn new(norms: &[f64], max_source: f64) -> Self {
        let peak = norms.iter().cloned().fold(0.0, f64::max);
        let denom = norms.first().copied().unwrap_or(0.0) + max_source;
        let ratio = if denom > 0.0 { peak / denom } else if peak == 0.0 { 0.0 } else { f64::INFINITY };
        Self { ratio }
    }

    pub fn violated(&self, c_max: f64) -> bool {
        self.ratio > c_max
    }
}

#[derive(Debug, Clone)]
pub struct MarchResult {
    pub final_state: StateVector,
    /// `||U^n||_M` for `n = 0..=N`.
    pub norms: Vec<f64>,
    pub max_source_norm: f64,
    pub max_relative_residual: f64,
    pub stability: StabilityMonitor,
}

impl MarchResult {
    /// `| ||U^N||_M - ||U^0||_M | / ||U^0||_M`.
    pub fn relative_drift(&self) -> f64 {
        let n0 = self.norms[0];
        (self.norms.last().expect("nonempty") - n0).abs() / n0
    }

    /// Largest `| ||U^n||_M - ||U^0||_M |` over the march.
    pub fn max_drift(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms.iter().map(|v| (v - n0).abs()).fold(0.0, f64::max)
    }
}

/// `||u(r) - U||_{L^2}` by element quadrature.
pub fn error_norm(disc: &Discretization, state: &StateVector, exact: &AnalyticField) -> f64 {
    field_errors(disc, &ReferenceElement::q1(), &state.coeffs, exact).l2
}

/// `E(r)` at the step nodes, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub r: Vec<f64>,
    pub e: Vec<f64>,
}

impl ErrorCurve {
    pub fn new() -> Self {
        Self { r: Vec::new(), e: Vec::new() }
    }

    pub fn push(&mut self, r: f64, e: f64) {
        debug_assert!(self.r.last().map_or(true, |&last| r > last));
        self.r.push(r);
        self.e.push(e);
    }

    pub fn at(&self, r: f64) -> Result<f64, StepError> {
        let (lo, hi) = match (self.r.first(), self.r.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(StepError::OutOfRange { r, r_min: f64::NAN, r_max: f64::NAN }),
        };
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if r < lo - tol || r > hi + tol {
            return Err(StepError::OutOfRange { r, r_min: lo, r_max: hi });
        }
        let i = self.r.partition_point(|&x| x < r - tol);
        if i < self.r.len() && (self.r[i] - r).abs() <= tol {
            return Ok(self.e[i]);
        }
        let i = i.clamp(1, self.r.len() - 1);
        let (r0, r1) = (self.r[i - 1], self.r[i]);
        let s = (r - r0) / (r1 - r0);
        Ok(self.e[i - 1] + s * (self.e[i] - self.e[i - 1]))
    }
}

impl Default for ErrorCurve {
    fn default() -> Self {
        Self::new()
    }
}

/// Marches and records `E(r^n)` against `exact(r)` at every step.
pub fn error_curve(
    disc: &Discretization,
    p: &GeneralProblem,
    plan: &MarchPlan,
    exact: &dyn Fn(f64) -> AnalyticField,
    solver: SolverConfig,
) -> Result<(ErrorCurve, MarchResult), StepError> {
    let u0 = initial_state(disc, p, plan.delta, solver)?;
    let mut stepper = CnStepper::new(disc, p, plan.delta, solver)?;
    let mut curve = ErrorCurve::new();
    let mut plan = *plan;
    plan.record_every = 1;
    let result = stepper.march(&plan, &u0, |_, r, c| {
        let st = StateVector { coeffs: c.to_vec(), r };
        curve.push(r, error_norm(disc, &st, &exact(r)));
    })?;
    Ok((curve, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::RectDomain;
    use crate::sparse::max_abs_diff;

    fn schrodinger() -> GeneralProblem {
        GeneralProblem::new(RectDomain::unit())
            .with_robin(|_, _| C64::new(0.0, 1.0))
            .with_potential(|_, _, _| C64::new(1.0, 0.0))
            .with_initial(AnalyticField::new(
                |y, t| C64::new(y * t * (1.0 - t), 0.0),
                |y, t| [C64::new(t * (1.0 - t), 0.0), C64::new(y * (1.0 - 2.0 * t), 0.0)],
            ))
    }

    #[test]
    fn plan_partition() {
        let plan = MarchPlan::new(0.0, 1.0, 7, 0.0).unwrap();
        assert!((plan.k * 7.0 - 1.0).abs() < 1e-14);
        assert_eq!(plan.r(7), 1.0);
        assert_eq!(plan.r_mid(2), 0.5 * (plan.r(2) + plan.r(3)));
        assert!(MarchPlan::new(0.0, 1.0, 0, 0.0).is_err());
    }

    #[test]
    fn splitting_sums_to_twice_mass() {
        let disc = Discretization::uniform(RectDomain::unit(), 5, 5).unwrap();
        let p = schrodinger().with_drift(|_, y, _| [y, 0.2]);
        let st = CnStepper::new(&disc, &p, 0.7, SolverConfig::direct()).unwrap();
        let m = st.matrices(0.01, 0.3).unwrap();
        let sum = ComplexSparseMatrix::linear_combination(&[(C64::new(1.0, 0.0), &m.plus), (C64::new(1.0, 0.0), &m.minus)]);
        let two_m = st.mass().scale(C64::new(2.0, 0.0));
        assert!(max_abs_diff(&sum, &two_m) <= 1e-13);
    }

    #[test]
    fn skew_case_conserves_norm_each_step() {
        let disc = Discretization::uniform(RectDomain::unit(), 8, 8).unwrap();
        let p = schrodinger();
        let st = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let b = st.forms.form(0.5).unwrap();
        let g = st.forms.beta_mass(0.5).unwrap();
        let i = C64::new(0.0, 1.0);
        let a = ComplexSparseMatrix::linear_combination(&[(-i, &b), (i, &g)]);
        assert!(a.skew_hermitian_defect() <= 1e-13);

        let mut st = st;
        let u0 = initial_state(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let mut state = u0.clone();
        for n in 0..5 {
            let before = state.m_norm(st.mass());
            state = st.step(&state, 0.01, 0.005 + 0.01 * n as f64, n + 1).unwrap().0;
            let after = state.m_norm(st.mass());
            assert!((after - before).abs() <= 1e-11 * before);
        }
    }

    #[test]
    fn single_step_march_equals_step() {
        let disc = Discretization::uniform(RectDomain::unit(), 4, 4).unwrap();
        let p = schrodinger().with_source(|r, y, t| C64::new(r * y, t));
        let u0 = initial_state(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let plan = MarchPlan::new(0.0, 1.0, 1, 0.0).unwrap();
        let mut a = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let res = a.march(&plan, &u0, |_, _, _| {}).unwrap();
        let mut b = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let (s, _) = b.step(&u0, 1.0, 0.5, 1).unwrap();
        assert_eq!(res.final_state.coeffs, s.coeffs);
    }

    #[test]
    fn zero_initial_and_source_stay_zero() {
        let disc = Discretization::uniform(RectDomain::unit(), 3, 3).unwrap();
        let p = GeneralProblem::new(RectDomain::unit()).with_robin(|_, _| C64::new(0.0, 1.0));
        let u0 = initial_state(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        assert!(u0.coeffs.iter().all(|v| v.norm() == 0.0));
        let plan = MarchPlan::new(0.0, 1.0, 4, 0.0).unwrap();
        let res = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap().march(&plan, &u0, |_, _, _| {}).unwrap();
        assert!(res.final_state.coeffs.iter().all(|v| v.norm() == 0.0));
        assert_eq!(res.stability.ratio, 0.0);
    }

    #[test]
    fn first_step_change_is_first_order_in_k() {
        let disc = Discretization::uniform(RectDomain::unit(), 6, 6).unwrap();
        let p = schrodinger();
        let u0 = initial_state(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let mut st = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        let diff = |st: &mut CnStepper, k: f64| {
            let (u1, _) = st.step(&u0, k, 0.5 * k, 1).unwrap();
            let d = StateVector {
                coeffs: u1.coeffs.iter().zip(&u0.coeffs).map(|(a, b)| a - b).collect(),
                r: 0.0,
            };
            d.m_norm(st.mass())
        };
        let d1 = diff(&mut st, 1e-3);
        let d2 = diff(&mut st, 5e-4);
        assert!((d1 / d2 - 2.0).abs() < 0.05, "{}", d1 / d2);
    }

    #[test]
    fn growth_refusal() {
        let disc = Discretization::uniform(RectDomain::unit(), 3, 3).unwrap();
        let p = GeneralProblem::new(RectDomain::unit()).with_potential(|_, _, _| C64::new(0.0, -10.0));
        let st = CnStepper::new(&disc, &p, 0.0, SolverConfig::direct()).unwrap();
        assert!((st.growth_constant() - 10.0).abs() < 1e-9);
        assert!(matches!(st.check_step(0.2), Err(StepError::StepTooLarge { .. })));
        assert!(st.check_step(0.05).is_ok());
    }

    #[test]
    fn error_of_fe_field_against_itself() {
        let disc = Discretization::uniform(RectDomain::unit(), 4, 4).unwrap();
        let coeffs: Vec<C64> = (0..disc.n_free()).map(|i| C64::new(i as f64, 1.0)).collect();
        let st = StateVector { coeffs: coeffs.clone(), r: 0.0 };
        assert!(error_norm(&disc, &st, &AnalyticField::from_fe(&disc, &coeffs)) < 1e-12);
    }

    #[test]
    fn error_curve_interpolates() {
        let mut c = ErrorCurve::new();
        for (r, e) in [(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)] {
            c.push(r, e);
        }
        assert_eq!(c.at(0.5).unwrap(), 2.0);
        assert!((c.at(0.75).unwrap() - 3.0).abs() < 1e-15);
        assert!(c.at(1.5).is_err());
    }
}
