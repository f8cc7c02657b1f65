//! Run configuration: TOML with one table per subcommand, every field
//! optional, plus command-line overrides.
//!
//! ```toml
//! seed = 0
//!
//! [solver]
//! method = "banded-lu"      # or "bicgstab"
//! tolerance = 1e-12
//!
//! [spatial]
//! case = "smooth"
//! hy_inv = [10, 20, 40, 80]
//! k_inv = 400
//! ranges = [0.1, 0.5, 1.0]
//! ```
//!
//! Dotted keys (`spatial.k_inv = 400`) are equivalent to the table form.

use super::acoustic_demo::{linear_refraction, AcousticDemo};
use super::cases::ManufacturedCase;
use super::study::{KRefRule, StudyOptions};
use super::HarnessError;
use crate::acoustic::{gaussian_source, AcousticScenario};
use crate::bathymetry::{bathymetry_from_grid, read_depth_csv, AnalyticBathymetry, Bathymetry};
use crate::coercivity::CoercivityConfig;
use crate::mesh::RectDomain;
use crate::report::TableFormat;
use crate::solver::{SolveMethod, SolverConfig};
use crate::stepper::StabilityMonitor;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub solver: SolverSection,
    pub coercivity: CoercivitySection,
    pub output: OutputSection,
    pub spatial: SpatialSection,
    pub temporal: TemporalSection,
    pub projection: ProjectionSection,
    pub acoustic: AcousticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: String,
    pub tolerance: f64,
    pub max_refinements: usize,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoercivitySection {
    /// Fixed shift; computed when absent.
    pub delta: Option<f64>,
    pub mesh: usize,
    pub n_r: usize,
    pub fraction: f64,
    pub max_doublings: usize,
    pub random_vectors: usize,
    pub stability_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialSection {
    pub case: String,
    pub hy_inv: Vec<usize>,
    /// Defaults to `hy_inv`.
    pub htheta_inv: Option<Vec<usize>>,
    pub k_inv: usize,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalSection {
    pub case: String,
    pub h_inv: usize,
    pub k_inv: Vec<usize>,
    /// `k_ref = h / k_ref_factor` unless `k_ref_inv` is given.
    pub k_ref_factor: usize,
    pub k_ref_inv: Option<usize>,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    /// Square meshes `n x n`.
    pub hy_inv: Vec<usize>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticSection {
    /// `flat`, `slope` (`s = depth + slope r`) or `grid`.
    pub bathymetry: String,
    pub depth: f64,
    pub slope: f64,
    /// Long-format depth table, required for `grid`.
    pub bathymetry_csv: Option<String>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub k0: f64,
    /// Relative sound-speed gradient: `n^2 - 1 = refraction * z`.
    pub refraction: f64,
    pub source_depth: f64,
    pub source_width: f64,
    pub source_amplitude: f64,
    pub n_y: usize,
    pub n_theta: usize,
    pub k_inv: Vec<usize>,
    pub snapshot_ranges: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            solver: SolverSection::default(),
            coercivity: CoercivitySection::default(),
            output: OutputSection::default(),
            spatial: SpatialSection::default(),
            temporal: TemporalSection::default(),
            projection: ProjectionSection::default(),
            acoustic: AcousticSection::default(),
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::direct();
        Self {
            method: d.method.tag().to_owned(),
            tolerance: d.tolerance,
            max_refinements: d.max_refinements,
            max_iter: 2000,
        }
    }
}

impl Default for CoercivitySection {
    fn default() -> Self {
        let c = CoercivityConfig::default();
        Self {
            delta: None,
            mesh: c.mesh,
            n_r: c.n_r,
            fraction: c.fraction,
            max_doublings: c.max_doublings,
            random_vectors: c.random_vectors,
            stability_max: StabilityMonitor::DEFAULT_MAX,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: "markdown".into(),
        }
    }
}

impl Default for SpatialSection {
    fn default() -> Self {
        Self {
            case: "smooth".into(),
            hy_inv: vec![10, 20, 40, 80],
            htheta_inv: None,
            k_inv: 400,
            ranges: vec![0.1, 0.5, 1.0],
        }
    }
}

impl Default for TemporalSection {
    fn default() -> Self {
        Self {
            case: "smooth".into(),
            h_inv: 20,
            k_inv: vec![144, 192, 240, 288],
            k_ref_factor: 30,
            k_ref_inv: None,
            ranges: vec![1.0],
        }
    }
}

impl Default for ProjectionSection {
    fn default() -> Self {
        Self {
            hy_inv: vec![10, 20, 40, 80],
            r: 0.5,
        }
    }
}

impl Default for AcousticSection {
    fn default() -> Self {
        Self {
            bathymetry: "slope".into(),
            depth: 100.0,
            slope: 5.0,
            bathymetry_csv: None,
            theta_min: -0.3,
            theta_max: 0.3,
            r_min: 1.0,
            r_max: 2.0,
            k0: 0.01,
            refraction: 0.01,
            source_depth: 50.0,
            source_width: 15.0,
            source_amplitude: 0.01,
            n_y: 16,
            n_theta: 16,
            k_inv: vec![50, 100, 200],
            snapshot_ranges: vec![1.0, 1.5, 2.0],
        }
    }
}

/// Command-line values that replace their configuration counterparts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub hy_inv: Option<Vec<usize>>,
    pub htheta_inv: Option<Vec<usize>>,
    pub k_inv: Option<Vec<usize>>,
    pub ranges: Option<Vec<f64>>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Spatial,
    Temporal,
    Acoustic,
    Project,
}

impl Subcommand {
    pub fn section(&self) -> &'static str {
        match self {
            Subcommand::Spatial => "spatial",
            Subcommand::Temporal => "temporal",
            Subcommand::Acoustic => "acoustic",
            Subcommand::Project => "projection",
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

fn single(v: &[usize], flag: &str) -> Result<usize, HarnessError> {
    match v {
        [x] => Ok(*x),
        _ => Err(invalid(format!("{flag} takes a single value here, got {}", v.len()))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Folds `o` into the section that `cmd` reads.
    pub fn apply(&mut self, cmd: Subcommand, o: &Overrides) -> Result<(), HarnessError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(f) = &o.format {
            self.output.format = f.clone();
        }
        match cmd {
            Subcommand::Spatial => {
                let s = &mut self.spatial;
                if let Some(v) = &o.hy_inv {
                    s.hy_inv = v.clone();
                }
                if let Some(v) = &o.htheta_inv {
                    s.htheta_inv = Some(v.clone());
                }
                if let Some(v) = &o.k_inv {
                    s.k_inv = single(v, "--k-inv")?;
                }
                if let Some(v) = &o.ranges {
                    s.ranges = v.clone();
                }
            }
            Subcommand::Temporal => {
                let s = &mut self.temporal;
                if let Some(v) = &o.hy_inv {
                    s.h_inv = single(v, "--hy-inv")?;
                }
                if let Some(v) = &o.htheta_inv {
                    if single(v, "--htheta-inv")? != s.h_inv {
                        return Err(invalid("temporal study runs on a square mesh; --htheta-inv must equal --hy-inv"));
                    }
                }
                if let Some(v) = &o.k_inv {
                    s.k_inv = v.clone();
                }
                if let Some(v) = &o.ranges {
                    s.ranges = v.clone();
                }
            }
            Subcommand::Project => {
                let s = &mut self.projection;
                if let Some(v) = &o.hy_inv {
                    s.hy_inv = v.clone();
                }
                if o.htheta_inv.as_ref().is_some_and(|v| *v != s.hy_inv) {
                    return Err(invalid("projection study runs on square meshes; --htheta-inv must equal --hy-inv"));
                }
                if o.k_inv.is_some() {
                    return Err(invalid("--k-inv does not apply to the projection study"));
                }
                if let Some(v) = &o.ranges {
                    s.r = match v.as_slice() {
                        [r] => *r,
                        _ => return Err(invalid("projection study takes a single range")),
                    };
                }
            }
            Subcommand::Acoustic => {
                let s = &mut self.acoustic;
                if let Some(v) = &o.hy_inv {
                    s.n_y = single(v, "--hy-inv")?;
                }
                if let Some(v) = &o.htheta_inv {
                    s.n_theta = single(v, "--htheta-inv")?;
                }
                if let Some(v) = &o.k_inv {
                    s.k_inv = v.clone();
                }
                if let Some(v) = &o.ranges {
                    s.snapshot_ranges = v.clone();
                }
            }
        }
        Ok(())
    }

    pub fn solver(&self) -> Result<SolverConfig, HarnessError> {
        let s = &self.solver;
        let method = match s.method.as_str() {
            "banded-lu" => SolveMethod::BandedLu,
            "bicgstab" => SolveMethod::BiCgStab { max_iter: s.max_iter },
            other => return Err(invalid(format!("unknown solver method `{other}`"))),
        };
        if !(s.tolerance > 0.0) {
            return Err(invalid("solver.tolerance must be positive"));
        }
        Ok(SolverConfig {
            method,
            tolerance: s.tolerance,
            max_refinements: s.max_refinements,
        })
    }

    pub fn coercivity(&self) -> CoercivityConfig {
        let c = &self.coercivity;
        CoercivityConfig {
            mesh: c.mesh,
            n_r: c.n_r,
            fraction: c.fraction,
            max_doublings: c.max_doublings,
            random_vectors: c.random_vectors,
            seed: self.seed,
        }
    }

    pub fn study_options(&self) -> Result<StudyOptions, HarnessError> {
        if let Some(d) = self.coercivity.delta {
            if !(d >= 0.0) {
                return Err(invalid("coercivity.delta must be non-negative"));
            }
        }
        Ok(StudyOptions {
            solver: self.solver()?,
            delta: self.coercivity.delta,
            coercivity: self.coercivity(),
            stability_max: self.coercivity.stability_max,
        })
    }

    pub fn format(&self) -> Result<TableFormat, HarnessError> {
        match self.output.format.as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(invalid(format!("unknown format `{other}` (csv or markdown)"))),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    pub fn case(name: &str) -> Result<ManufacturedCase, HarnessError> {
        ManufacturedCase::by_name(name).ok_or_else(|| invalid(format!("unknown case `{name}` (smooth or bilinear)")))
    }

    pub fn k_ref(&self) -> Result<KRefRule, HarnessError> {
        match (self.temporal.k_ref_inv, self.temporal.k_ref_factor) {
            (Some(k), _) if k > 0 => Ok(KRefRule::Fixed(k)),
            (None, f) if f > 0 => Ok(KRefRule::HOver(f)),
            _ => Err(invalid("k_ref must be positive")),
        }
    }

    pub fn acoustic_demo(&self) -> Result<AcousticDemo, HarnessError> {
        let a = &self.acoustic;
        let domain = RectDomain::new(a.theta_min, a.theta_max, a.r_min, a.r_max).map_err(|e| invalid(e.to_string()))?;
        let bathymetry: Arc<dyn Bathymetry> = match a.bathymetry.as_str() {
            "flat" => Arc::new(AnalyticBathymetry::flat(a.depth)),
            "slope" => Arc::new(AnalyticBathymetry::range_slope(a.depth, a.slope)),
            "grid" => {
                let path = a
                    .bathymetry_csv
                    .as_ref()
                    .ok_or_else(|| invalid("acoustic.bathymetry = \"grid\" needs acoustic.bathymetry_csv"))?;
                let grid = bathymetry_from_grid(read_depth_csv(Path::new(path))?)?;
                if !grid.covers(&domain) {
                    return Err(invalid(format!("{path} does not cover the acoustic domain")));
                }
                Arc::new(grid)
            }
            other => return Err(invalid(format!("unknown bathymetry `{other}` (flat, slope or grid)"))),
        };
        if !(a.k0 > 0.0) {
            return Err(invalid("acoustic.k0 must be positive"));
        }
        let scenario = AcousticScenario::new(domain, a.k0, bathymetry)
            .with_beta_psi(linear_refraction(a.k0, a.refraction))
            .with_source(gaussian_source(&domain, a.source_depth, a.source_width, a.source_amplitude));
        Ok(AcousticDemo {
            name: a.bathymetry.clone(),
            scenario,
            n_y: a.n_y,
            n_theta: a.n_theta,
            k_inv: a.k_inv.clone(),
            snapshot_ranges: a.snapshot_ranges.clone(),
            solver: self.solver()?,
            coercivity: self.coercivity(),
        })
    }

    /// `key = value` lines for the shared settings and the section `cmd`
    /// reads, in a fixed order.
    pub fn resolved(&self, cmd: Subcommand) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        if let toml::Value::Table(t) = value {
            for (k, v) in &t {
                let keep = matches!(k.as_str(), "seed" | "solver" | "coercivity" | "output") || k == cmd.section();
                if keep {
                    flatten(k, v, &mut out);
                }
            }
        }
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_keys_match_tables() {
        let a = RunConfig::from_toml("spatial.k_inv = 200\nsolver.method = \"bicgstab\"\n").unwrap();
        let b = RunConfig::from_toml("[spatial]\nk_inv = 200\n[solver]\nmethod = \"bicgstab\"\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.spatial.k_inv, 200);
        assert!(matches!(a.solver().unwrap().method, SolveMethod::BiCgStab { max_iter: 2000 }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("spatial.kinv = 3").is_err());
        assert!(RunConfig::from_toml("[solver]\nmethod = \"qr\"").unwrap().solver().is_err());
        let mut c = RunConfig::default();
        c.output.format = "xml".into();
        assert!(c.format().is_err());
    }

    #[test]
    fn overrides_target_the_subcommand() {
        let mut c = RunConfig::default();
        let o = Overrides {
            hy_inv: Some(vec![8]),
            k_inv: Some(vec![10, 20]),
            ranges: Some(vec![0.5]),
            seed: Some(7),
            ..Default::default()
        };
        c.apply(Subcommand::Temporal, &o).unwrap();
        assert_eq!((c.temporal.h_inv, c.temporal.k_inv.clone(), c.seed), (8, vec![10, 20], 7));
        assert_eq!(c.spatial, SpatialSection::default());
        assert!(c.clone().apply(Subcommand::Spatial, &o).is_err());
        assert!(c.apply(Subcommand::Project, &o).is_err());
    }

    #[test]
    fn resolved_lines_cover_the_section() {
        let c = RunConfig::default();
        let lines = c.resolved(Subcommand::Spatial);
        let keys: Vec<&str> = lines.iter().map(|(k, _)| k.as_str()).collect();
        assert!(keys.contains(&"seed") && keys.contains(&"spatial.k_inv") && keys.contains(&"solver.tolerance"));
        assert!(!keys.iter().any(|k| k.starts_with("temporal.")));
        assert_eq!(lines, c.resolved(Subcommand::Spatial));
    }

    #[test]
    fn acoustic_section_builds_a_demo() {
        let mut c = RunConfig::default();
        let d = c.acoustic_demo().unwrap();
        assert_eq!((d.n_y, d.k_inv.len()), (16, 3));
        c.acoustic.bathymetry = "grid".into();
        assert!(c.acoustic_demo().is_err());
    }
}
