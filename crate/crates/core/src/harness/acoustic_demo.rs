//! Acoustic pipeline: bathymetry, change of variables, condition check,
//! norm-conserving march and field snapshots.

use super::HarnessError;
use crate::acoustic::{gaussian_source, transform_to_rectangle, AcousticScenario};
use crate::bathymetry::{AnalyticBathymetry, Bathymetry};
use crate::coercivity::{coercivity_delta, CoercivityConfig};
use crate::discretization::Discretization;
use crate::field::AnalyticField;
use crate::mesh::RectDomain;
use crate::problem::{validate_conditions, ConditionReport, SamplingGrid};
use crate::report::{StudyKind, StudyReport, StudyRow};
use crate::solver::SolverConfig;
use crate::stepper::{initial_state, CnStepper, MarchPlan};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Everything needed to run one acoustic scenario.
#[derive(Clone)]
pub struct AcousticDemo {
    pub name: String,
    pub scenario: AcousticScenario,
    pub n_y: usize,
    pub n_theta: usize,
    /// Step counts per unit range, one march each.
    pub k_inv: Vec<usize>,
    /// Ranges at which the finest march records a snapshot.
    pub snapshot_ranges: Vec<f64>,
    pub solver: SolverConfig,
    pub coercivity: CoercivityConfig,
}

impl std::fmt::Debug for AcousticDemo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AcousticDemo")
            .field("name", &self.name)
            .field("n_y", &self.n_y)
            .field("n_theta", &self.n_theta)
            .field("k_inv", &self.k_inv)
            .finish()
    }
}

/// Linear sound-speed profile: `beta_psi = k0 * eps * z / 2`, real.
pub fn linear_refraction(k0: f64, eps: f64) -> impl Fn(f64, f64, f64) -> C64 + Send + Sync + 'static {
    move |_, z, _| C64::new(0.5 * k0 * eps * z, 0.0)
}

impl AcousticDemo {
    /// Wedge of half-width 0.3 rad over `r in [1, 2]`, source at mid-depth
    /// of a 100 m column.
    pub fn standard(name: &str, bathymetry: Arc<dyn Bathymetry>) -> Result<Self, HarnessError> {
        let domain = RectDomain::new(-0.3, 0.3, 1.0, 2.0).map_err(|e| HarnessError::Validation(e.to_string()))?;
        let k0 = 0.01;
        let source = gaussian_source(&domain, 50.0, 15.0, 0.01);
        let scenario = AcousticScenario::new(domain, k0, bathymetry)
            .with_beta_psi(linear_refraction(k0, 0.01))
            .with_source(source);
        Ok(Self {
            name: name.to_owned(),
            scenario,
            n_y: 16,
            n_theta: 16,
            k_inv: vec![50, 100, 200],
            snapshot_ranges: vec![1.0, 1.5, 2.0],
            solver: SolverConfig::direct(),
            coercivity: CoercivityConfig::default(),
        })
    }

    pub fn flat() -> Result<Self, HarnessError> {
        Self::standard("flat", Arc::new(AnalyticBathymetry::flat(100.0)))
    }

    /// `s = 100 + 5 r`.
    pub fn downslope() -> Result<Self, HarnessError> {
        Self::standard("downslope", Arc::new(AnalyticBathymetry::range_slope(100.0, 5.0)))
    }
}

/// Norm history of one march.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRecord {
    pub k_inv: usize,
    /// `max_n | ||U^n||_M - ||U^0||_M |`.
    pub drift: f64,
    /// `| ||U^N||_M - ||U^0||_M | / ||U^0||_M`.
    pub relative_drift: f64,
    pub initial_norm: f64,
    pub stability: f64,
}

/// Nodal values of the discrete field on the full tensor grid, Dirichlet
/// nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub r: f64,
    pub points: Vec<(f64, f64, C64)>,
}

impl Snapshot {
    pub fn from_state(disc: &Discretization, r: f64, coeffs: &[C64]) -> Self {
        let field = AnalyticField::from_fe(disc, coeffs);
        let mesh = &disc.mesh;
        let mut points = Vec::with_capacity(mesh.y_nodes().len() * mesh.theta_nodes().len());
        for &y in mesh.y_nodes() {
            for &t in mesh.theta_nodes() {
                points.push((y, t, field.value(y, t)));
            }
        }
        Self { r, points }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("y,theta,re,im,abs\n");
        for &(y, t, v) in &self.points {
            let _ = writeln!(s, "{y:e},{t:e},{:e},{:e},{:e}", v.re, v.im, v.norm());
        }
        s
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf, HarnessError> {
        let path = dir.join(format!("{stem}_r{}.csv", self.r));
        std::fs::write(&path, self.to_csv()).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }
}

#[derive(Debug, Clone)]
pub struct AcousticOutcome {
    pub report: StudyReport,
    pub conditions: ConditionReport,
    /// Largest `|lambda|` sampled on `y = 1`.
    pub max_gamma_bc: f64,
    pub drifts: Vec<DriftRecord>,
    pub snapshots: Vec<Snapshot>,
    pub delta: f64,
}

impl AcousticOutcome {
    /// `drift(k) / drift(k/2)` for consecutive step counts.
    pub fn drift_ratios(&self) -> Vec<f64> {
        self.drifts.windows(2).map(|w| w[0].drift / w[1].drift).collect()
    }
}

fn max_gamma(p: &crate::problem::GeneralProblem, sampling: &SamplingGrid) -> Result<f64, HarnessError> {
    let mut m: f64 = 0.0;
    for (r, t) in sampling.boundary_points(&p.domain)? {
        m = m.max(p.robin_at(r, t)?.norm());
    }
    Ok(m)
}

/// Transforms and validates the scenario, then marches it once per entry of
/// `k_inv`. Condition failures abort before any solve.
pub fn run_acoustic_demo(demo: &AcousticDemo) -> Result<AcousticOutcome, HarnessError> {
    if demo.k_inv.is_empty() {
        return Err(HarnessError::Validation("acoustic demo needs at least one step size".into()));
    }
    if demo.k_inv.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Validation("k^-1 list must be strictly increasing".into()));
    }
    let problem = transform_to_rectangle(&demo.scenario)?;
    let sampling = SamplingGrid::default();
    let conditions = validate_conditions(&problem, &sampling)?;
    if !conditions.all_ok() {
        let detail = match conditions.worst_violation() {
            Some((c, v)) => format!("{c:?} fails with {:e} at r={}, y={}, theta={}", v.value, v.r, v.y, v.theta),
            None => "conditions fail".into(),
        };
        return Err(HarnessError::Validation(format!("scenario `{}`: {detail}", demo.name)));
    }
    if !conditions.con2_equality {
        log::warn!(
            "scenario `{}`: con2 holds strictly (max |b1 - 2 Re lambda| = {:e}), norm is not conserved",
            demo.name,
            conditions.max_con2_abs
        );
    }
    let max_gamma_bc = max_gamma(&problem, &sampling)?;
    let delta = coercivity_delta(&problem, &demo.coercivity)?.delta;
    let dom = problem.domain;
    let disc = Discretization::uniform(dom, demo.n_y, demo.n_theta)?;
    let u0 = initial_state(&disc, &problem, delta, demo.solver)?;
    let finest = *demo.k_inv.last().expect("nonempty");

    let runs = demo
        .k_inv
        .par_iter()
        .map(|&kv| -> Result<_, HarnessError> {
            let n = (kv as f64 * dom.range_length()).round().max(1.0) as usize;
            let plan = MarchPlan::new(dom.r_min, dom.r_max, n, delta)?;
            let mut stepper = CnStepper::new(&disc, &problem, delta, demo.solver)?;
            let wanted: Vec<usize> = if kv == finest {
                demo.snapshot_ranges
                    .iter()
                    .map(|&r| ((r - dom.r_min) / plan.k).round() as usize)
                    .filter(|&i| i <= plan.n_steps)
                    .collect()
            } else {
                Vec::new()
            };
            let mut snaps = Vec::new();
            let res = stepper.march(&plan, &u0, |i, r, c| {
                if wanted.contains(&i) {
                    snaps.push(Snapshot::from_state(&disc, r, c));
                }
            })?;
            let rec = DriftRecord {
                k_inv: kv,
                drift: res.max_drift(),
                relative_drift: res.relative_drift(),
                initial_norm: res.norms[0],
                stability: res.stability.ratio,
            };
            Ok((rec, snaps))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = StudyReport::new(
        StudyKind::Acoustic,
        "k^-1",
        vec!["drift".into(), "relative drift".into()],
    );
    report.push_meta("scenario", &demo.name);
    report.push_meta("k0", demo.scenario.k0);
    report.push_meta("n_y", demo.n_y);
    report.push_meta("n_theta", demo.n_theta);
    report.push_meta("delta", delta);
    report.push_meta("con2.equality", conditions.con2_equality);
    report.push_meta("con2.max_abs", format!("{:e}", conditions.max_con2_abs));
    report.push_meta("gamma_bc.max", format!("{max_gamma_bc:e}"));
    report.push_meta("solver.method", demo.solver.method.tag());
    report.push_meta("solver.tolerance", format!("{:e}", demo.solver.tolerance));
    let mut drifts = Vec::new();
    let mut snapshots = Vec::new();
    for (rec, snaps) in runs {
        report.push_row(StudyRow {
            resolution: rec.k_inv,
            step: 1.0 / rec.k_inv as f64,
            values: vec![rec.drift, rec.relative_drift],
        })?;
        report.push_meta(format!("initial_norm.k{}", rec.k_inv), format!("{:e}", rec.initial_norm));
        drifts.push(rec);
        snapshots.extend(snaps);
    }
    Ok(AcousticOutcome {
        report,
        conditions,
        max_gamma_bc,
        drifts,
        snapshots,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathymetry::DepthSample;

    fn small(mut demo: AcousticDemo) -> AcousticDemo {
        demo.n_y = 6;
        demo.n_theta = 6;
        demo.k_inv = vec![10, 20];
        demo.snapshot_ranges = vec![1.0, 2.0];
        demo
    }

    #[test]
    fn flat_bottom_conserves_norm() {
        let out = run_acoustic_demo(&small(AcousticDemo::flat().unwrap())).unwrap();
        assert!(out.conditions.con2_equality);
        assert_eq!(out.max_gamma_bc, 0.0);
        assert!(out.drifts.iter().all(|d| d.relative_drift <= 1e-11), "{:?}", out.drifts);
        assert_eq!(out.snapshots.len(), 2);
        assert_eq!(out.snapshots[0].points.len(), 7 * 7);
    }

    #[test]
    fn snapshot_csv_layout() {
        let out = run_acoustic_demo(&small(AcousticDemo::downslope().unwrap())).unwrap();
        let csv = out.snapshots[1].to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("y,theta,re,im,abs"));
        // y = 0 row is on the Dirichlet boundary
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[2..], [0.0, 0.0, 0.0]);
        assert_eq!(csv.lines().count(), 1 + 49);
    }

    #[test]
    fn shoaling_bottom_and_step_order() {
        let demo = small(AcousticDemo::standard(
            "shoal",
            Arc::new(AnalyticBathymetry::new(|r, _| DepthSample {
                s: 100.0 - 10.0 * r,
                s_r: -10.0,
                s_theta: 0.0,
                s_theta_theta: 0.0,
            })),
        )
        .unwrap());
        let out = run_acoustic_demo(&demo).unwrap();
        assert!(out.conditions.con2_equality);
        let mut bad = demo.clone();
        bad.k_inv = vec![20, 10];
        assert!(matches!(run_acoustic_demo(&bad), Err(HarnessError::Validation(_))));
    }
}
