//! One entry point per subcommand: resolve the configuration, run, write
//! the report files.

use super::acoustic_demo::{run_acoustic_demo, AcousticOutcome};
use super::cases::projection_test_problem;
use super::config::{RunConfig, Subcommand};
use super::study::{run_spatial_study, run_temporal_study, StudyOutcome};
use super::HarnessError;
use crate::coercivity::coercivity_delta;
use crate::projection::projection_rate_study;
use crate::report::StudyReport;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: StudyReport,
    pub files: Vec<PathBuf>,
}

fn embed_config(report: &mut StudyReport, cfg: &RunConfig, cmd: Subcommand) {
    for (k, v) in cfg.resolved(cmd) {
        report.push_meta(format!("config.{k}"), v);
    }
}

fn write(mut report: StudyReport, cfg: &RunConfig, cmd: Subcommand, stem: &str) -> Result<RunSummary, HarnessError> {
    embed_config(&mut report, cfg, cmd);
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = report.emit(&dir, stem, cfg.format()?)?;
    Ok(RunSummary {
        report,
        files: vec![path],
    })
}

pub fn run_spatial(cfg: &RunConfig) -> Result<(RunSummary, StudyOutcome), HarnessError> {
    let s = &cfg.spatial;
    let case = RunConfig::case(&s.case)?;
    let htheta = s.htheta_inv.clone().unwrap_or_else(|| s.hy_inv.clone());
    let out = run_spatial_study(&case, &s.hy_inv, &htheta, s.k_inv, &s.ranges, &cfg.study_options()?)?;
    let summary = write(out.report.clone(), cfg, Subcommand::Spatial, "spatial")?;
    Ok((summary, out))
}

pub fn run_temporal(cfg: &RunConfig) -> Result<(RunSummary, StudyOutcome), HarnessError> {
    let t = &cfg.temporal;
    let case = RunConfig::case(&t.case)?;
    let out = run_temporal_study(&case, t.h_inv, &t.k_inv, cfg.k_ref()?, &t.ranges, &cfg.study_options()?)?;
    let summary = write(out.report.clone(), cfg, Subcommand::Temporal, "temporal")?;
    Ok((summary, out))
}

pub fn run_projection(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    let pc = &cfg.projection;
    let (problem, field) = projection_test_problem();
    let opts = cfg.study_options()?;
    let delta = match opts.delta {
        Some(d) => d,
        None => coercivity_delta(&problem, &opts.coercivity)?.delta,
    };
    let mut report = projection_rate_study(&problem, problem.domain, &field, &pc.hy_inv, pc.r, delta, opts.solver)?;
    report.push_meta("delta", delta);
    report.push_meta("r", pc.r);
    write(report, cfg, Subcommand::Project, "projection")
}

pub fn run_acoustic(cfg: &RunConfig) -> Result<(RunSummary, AcousticOutcome), HarnessError> {
    let demo = cfg.acoustic_demo()?;
    let out = run_acoustic_demo(&demo)?;
    let stem = format!("acoustic_{}", demo.name);
    let mut summary = write(out.report.clone(), cfg, Subcommand::Acoustic, &stem)?;
    let dir = cfg.out_dir();
    for snap in &out.snapshots {
        summary.files.push(snap.write(&dir, &stem)?);
    }
    Ok((summary, out))
}

pub fn run(cmd: Subcommand, cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    match cmd {
        Subcommand::Spatial => run_spatial(cfg).map(|x| x.0),
        Subcommand::Temporal => run_temporal(cfg).map(|x| x.0),
        Subcommand::Project => run_projection(cfg),
        Subcommand::Acoustic => run_acoustic(cfg).map(|x| x.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &std::path::Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.output.dir = dir.display().to_string();
        c.spatial.hy_inv = vec![4, 8];
        c.spatial.k_inv = 20;
        c.temporal.h_inv = 4;
        c.temporal.k_inv = vec![10, 20];
        c.projection.hy_inv = vec![4, 8, 16];
        c.acoustic.n_y = 4;
        c.acoustic.n_theta = 4;
        c.acoustic.k_inv = vec![10, 20];
        c
    }

    #[test]
    fn every_subcommand_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        for cmd in [Subcommand::Spatial, Subcommand::Temporal, Subcommand::Project, Subcommand::Acoustic] {
            let s = run(cmd, &cfg).unwrap();
            for f in &s.files {
                assert!(f.exists(), "{cmd:?}: {}", f.display());
            }
        }
        let md = std::fs::read_to_string(dir.path().join("spatial.md")).unwrap();
        assert!(md.contains("<!-- config.spatial.k_inv = 20 -->"));
        assert!(dir.path().join("acoustic_slope_r2.csv").exists());
    }

    #[test]
    fn output_is_byte_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut ca = tiny(a.path());
        let mut cb = tiny(b.path());
        ca.output.format = "csv".into();
        cb.output.format = "csv".into();
        run(Subcommand::Spatial, &ca).unwrap();
        run(Subcommand::Spatial, &cb).unwrap();
        let ra = std::fs::read_to_string(a.path().join("spatial.csv")).unwrap();
        let rb = std::fs::read_to_string(b.path().join("spatial.csv")).unwrap();
        // only the output directory differs
        let strip = |s: &str| s.lines().filter(|l| !l.contains("output.dir")).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&ra), strip(&rb));
    }
}
