//! Spatial and temporal convergence studies on manufactured cases.

use super::cases::ManufacturedCase;
use super::HarnessError;
use crate::coercivity::{coercivity_delta, CoercivityConfig};
use crate::discretization::Discretization;
use crate::report::{StudyKind, StudyReport, StudyRow};
use crate::solver::SolverConfig;
use crate::sparse::ComplexSparseMatrix;
use crate::stepper::{error_norm, initial_state, CnStepper, ErrorCurve, MarchPlan, StabilityMonitor, StateVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Shared knobs of the studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub solver: SolverConfig,
    /// `None` computes the shift with [`coercivity_delta`].
    pub delta: Option<f64>,
    pub coercivity: CoercivityConfig,
    pub stability_max: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::direct(),
            delta: None,
            coercivity: CoercivityConfig::default(),
            stability_max: StabilityMonitor::DEFAULT_MAX,
        }
    }
}

/// Stability ratio observed for one `(h, k)` run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    pub hy_inv: usize,
    pub htheta_inv: usize,
    pub k_inv: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: StudyReport,
    pub stability: Vec<StabilityRecord>,
    pub delta: f64,
}

impl StudyOutcome {
    pub fn max_stability_ratio(&self) -> f64 {
        self.stability.iter().map(|s| s.ratio).fold(0.0, f64::max)
    }
}

fn resolve_delta(case: &ManufacturedCase, opts: &StudyOptions) -> Result<f64, HarnessError> {
    match opts.delta {
        Some(d) => Ok(d),
        None => Ok(coercivity_delta(&case.problem, &opts.coercivity)?.delta),
    }
}

fn steps_for(k_inv: usize, length: f64) -> Result<usize, HarnessError> {
    let n = k_inv as f64 * length;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(HarnessError::Validation(format!(
            "k^-1 = {k_inv} does not divide the range length {length}"
        )));
    }
    Ok(rounded as usize)
}

/// Step indices whose states are needed to evaluate at `ranges`.
fn bracket_indices(plan: &MarchPlan, ranges: &[f64]) -> Result<Vec<usize>, HarnessError> {
    let mut out = Vec::new();
    for &r in ranges {
        if r < plan.r_min - 1e-12 || r > plan.r_max + 1e-12 {
            return Err(HarnessError::Validation(format!(
                "range {r} outside [{}, {}]",
                plan.r_min, plan.r_max
            )));
        }
        let x = (r - plan.r_min) / plan.k;
        let lo = (x + 1e-9).floor().min(plan.n_steps as f64) as usize;
        out.push(lo);
        if (x - lo as f64).abs() > 1e-9 && lo < plan.n_steps {
            out.push(lo + 1);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Marches and keeps the states at the steps bracketing `ranges`.
fn march_keeping(
    disc: &Discretization,
    case: &ManufacturedCase,
    plan: &MarchPlan,
    ranges: &[f64],
    opts: &StudyOptions,
) -> Result<(BTreeMap<usize, StateVector>, StabilityMonitor, ComplexSparseMatrix), HarnessError> {
    let keep = bracket_indices(plan, ranges)?;
    let u0 = initial_state(disc, &case.problem, plan.delta, opts.solver)?;
    let mut stepper = CnStepper::new(disc, &case.problem, plan.delta, opts.solver)?;
    let mut kept = BTreeMap::new();
    let result = stepper.march(plan, &u0, |n, r, c| {
        if keep.binary_search(&n).is_ok() {
            kept.insert(n, StateVector { coeffs: c.to_vec(), r });
        }
    })?;
    if result.stability.violated(opts.stability_max) {
        log::warn!(
            "stability ratio {:.3} exceeds {} (n_free = {}, N = {})",
            result.stability.ratio,
            opts.stability_max,
            disc.n_free(),
            plan.n_steps
        );
    }
    Ok((kept, result.stability, stepper.mass().clone()))
}

/// State at `r` by linear interpolation between kept step states.
fn state_at(plan: &MarchPlan, kept: &BTreeMap<usize, StateVector>, r: f64) -> StateVector {
    let x = (r - plan.r_min) / plan.k;
    let lo = (x + 1e-9).floor().min(plan.n_steps as f64) as usize;
    let a = &kept[&lo];
    let s = x - lo as f64;
    if s.abs() <= 1e-9 || lo == plan.n_steps {
        return StateVector { coeffs: a.coeffs.clone(), r };
    }
    let b = &kept[&(lo + 1)];
    let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(u, v)| u * (1.0 - s) + v * s).collect();
    StateVector { coeffs, r }
}

fn range_label(prefix: &str, r: f64) -> String {
    format!("{prefix}(r={r})")
}

fn base_metadata(report: &mut StudyReport, case: &ManufacturedCase, opts: &StudyOptions, delta: f64) {
    report.push_meta("case", case.name);
    report.push_meta("delta", delta);
    report.push_meta("quadrature.order", crate::element::ReferenceElement::q1().order());
    report.push_meta("solver.method", opts.solver.method.tag());
    report.push_meta("solver.tolerance", format!("{:e}", opts.solver.tolerance));
    report.push_meta("stability.max", opts.stability_max);
}

/// `E(r)` for each mesh `hy_inv[i] x htheta_inv[i]` at fixed `k = 1/k_inv`.
/// The reported step is `h = 1/hy_inv`.
pub fn run_spatial_study(
    case: &ManufacturedCase,
    hy_inv: &[usize],
    htheta_inv: &[usize],
    k_inv: usize,
    ranges: &[f64],
    opts: &StudyOptions,
) -> Result<StudyOutcome, HarnessError> {
    if hy_inv.len() < 2 {
        return Err(HarnessError::Validation("spatial study needs at least 2 resolutions".into()));
    }
    if hy_inv.len() != htheta_inv.len() {
        return Err(HarnessError::Validation("hy-inv and htheta-inv lists differ in length".into()));
    }
    let dom = case.problem.domain;
    let n_steps = steps_for(k_inv, dom.range_length())?;
    let delta = resolve_delta(case, opts)?;
    let plan = MarchPlan::new(dom.r_min, dom.r_max, n_steps, delta)?;

    let rows = hy_inv
        .par_iter()
        .zip(htheta_inv.par_iter())
        .map(|(&ny, &nt)| -> Result<_, HarnessError> {
            let disc = Discretization::uniform(dom, ny, nt)?;
            let (kept, stability, _) = march_keeping(&disc, case, &plan, ranges, opts)?;
            let mut curve = ErrorCurve::new();
            for (_, st) in kept.iter() {
                curve.push(st.r, error_norm(&disc, st, &case.exact_at(st.r)));
            }
            let values = ranges.iter().map(|&r| curve.at(r)).collect::<Result<Vec<_>, _>>()?;
            Ok((
                StudyRow {
                    resolution: ny,
                    step: 1.0 / ny as f64,
                    values,
                },
                StabilityRecord {
                    hy_inv: ny,
                    htheta_inv: nt,
                    k_inv,
                    ratio: stability.ratio,
                },
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = StudyReport::new(
        StudyKind::Spatial,
        "h^-1",
        ranges.iter().map(|&r| range_label("E", r)).collect(),
    );
    base_metadata(&mut report, case, opts, delta);
    report.push_meta("k_inv", k_inv);
    let mut stability = Vec::new();
    for (row, st) in rows {
        report.push_row(row)?;
        stability.push(st);
    }
    stability.sort_by_key(|s| s.hy_inv);
    report.push_meta(
        "stability.observed",
        stability.iter().map(|s| s.ratio).fold(0.0, f64::max),
    );
    Ok(StudyOutcome { report, stability, delta })
}

/// How the reference step of a temporal study is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRefRule {
    /// `k_ref = h / factor`.
    HOver(usize),
    /// `k_ref = 1 / k_inv`.
    Fixed(usize),
}

impl KRefRule {
    pub fn k_ref_inv(&self, h_inv: usize) -> usize {
        match *self {
            KRefRule::HOver(f) => f * h_inv,
            KRefRule::Fixed(k) => k,
        }
    }
}

/// `E*(r) = ||U(r) - U_ref(r)||_M` on a fixed `h_inv x h_inv` mesh, plus
/// `E(r)` against the exact solution for reference.
pub fn run_temporal_study(
    case: &ManufacturedCase,
    h_inv: usize,
    k_inv: &[usize],
    k_ref: KRefRule,
    ranges: &[f64],
    opts: &StudyOptions,
) -> Result<StudyOutcome, HarnessError> {
    if k_inv.is_empty() {
        return Err(HarnessError::Validation("temporal study needs at least one step".into()));
    }
    if k_inv.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Validation("k^-1 list must be strictly increasing".into()));
    }
    let ref_inv = k_ref.k_ref_inv(h_inv);
    if k_inv.iter().any(|&k| k > ref_inv) {
        return Err(HarnessError::Validation(format!(
            "k_ref = 1/{ref_inv} is not finer than every studied step"
        )));
    }
    let dom = case.problem.domain;
    let delta = resolve_delta(case, opts)?;
    let disc = Discretization::uniform(dom, h_inv, h_inv)?;

    let mut all: Vec<usize> = k_inv.to_vec();
    all.push(ref_inv);
    let runs = all
        .par_iter()
        .map(|&kv| -> Result<_, HarnessError> {
            let plan = MarchPlan::new(dom.r_min, dom.r_max, steps_for(kv, dom.range_length())?, delta)?;
            let (kept, stability, mass) = march_keeping(&disc, case, &plan, ranges, opts)?;
            let states: Vec<StateVector> = ranges.iter().map(|&r| state_at(&plan, &kept, r)).collect();
            Ok((kv, states, stability, mass))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (_, ref_states, ref_stab, mass) = runs.last().expect("reference run present").clone();

    let mut columns = Vec::new();
    for &r in ranges {
        columns.push(range_label("E", r));
        columns.push(range_label("E*", r));
    }
    let mut report = StudyReport::new(StudyKind::Temporal, "k^-1", columns);
    base_metadata(&mut report, case, opts, delta);
    report.push_meta("h_inv", h_inv);
    report.push_meta("k_ref_inv", ref_inv);
    let mut stability = Vec::new();
    for (kv, states, stab, _) in &runs[..runs.len() - 1] {
        let mut values = Vec::new();
        for (i, st) in states.iter().enumerate() {
            values.push(error_norm(&disc, st, &case.exact_at(st.r)));
            let diff: Vec<C64> = st.coeffs.iter().zip(&ref_states[i].coeffs).map(|(a, b)| a - b).collect();
            values.push(StateVector { coeffs: diff, r: st.r }.m_norm(&mass));
        }
        report.push_row(StudyRow {
            resolution: *kv,
            step: 1.0 / *kv as f64,
            values,
        })?;
        stability.push(StabilityRecord {
            hy_inv: h_inv,
            htheta_inv: h_inv,
            k_inv: *kv,
            ratio: stab.ratio,
        });
    }
    stability.push(StabilityRecord {
        hy_inv: h_inv,
        htheta_inv: h_inv,
        k_inv: ref_inv,
        ratio: ref_stab.ratio,
    });
    let ref_errors: Vec<String> = ref_states
        .iter()
        .map(|st| format!("{:e}", error_norm(&disc, st, &case.exact_at(st.r))))
        .collect();
    report.push_meta("reference.E", ref_errors.join(","));
    report.push_meta(
        "stability.observed",
        stability.iter().map(|s| s.ratio).fold(0.0, f64::max),
    );
    Ok(StudyOutcome { report, stability, delta })
}
