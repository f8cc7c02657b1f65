//! Bottom depth surfaces `s(r, theta)` with the derivatives the change of
//! variables needs.

use crate::mesh::RectDomain;
use crate::problem::ProblemError;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub s: f64,
    pub s_r: f64,
    pub s_theta: f64,
    pub s_theta_theta: f64,
}

pub trait Bathymetry: Send + Sync {
    fn sample(&self, r: f64, theta: f64) -> Result<DepthSample, ProblemError>;

    fn depth(&self, r: f64, theta: f64) -> Result<f64, ProblemError> {
        Ok(self.sample(r, theta)?.s)
    }
}

/// Depth given in closed form with analytic derivatives.
#[derive(Clone)]
pub struct AnalyticBathymetry {
    f: Arc<dyn Fn(f64, f64) -> DepthSample + Send + Sync>,
}

impl AnalyticBathymetry {
    pub fn new(f: impl Fn(f64, f64) -> DepthSample + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn flat(depth: f64) -> Self {
        Self::new(move |_, _| DepthSample {
            s: depth,
            s_r: 0.0,
            s_theta: 0.0,
            s_theta_theta: 0.0,
        })
    }

    /// `s = s0 + slope * r`, independent of theta.
    pub fn range_slope(s0: f64, slope: f64) -> Self {
        Self::new(move |r, _| DepthSample {
            s: s0 + slope * r,
            s_r: slope,
            s_theta: 0.0,
            s_theta_theta: 0.0,
        })
    }
}

impl Bathymetry for AnalyticBathymetry {
    fn sample(&self, r: f64, theta: f64) -> Result<DepthSample, ProblemError> {
        let d = (self.f)(r, theta);
        if !(d.s > 0.0) {
            return Err(ProblemError::NonPositiveDepth { depth: d.s, r, theta });
        }
        Ok(d)
    }
}

/// Depths on a rectangular `(r, theta)` grid, bilinearly interpolated.
///
/// Derivative fields are formed on the grid nodes by centered differences
/// (one-sided at the ends) and interpolated the same way, so all four
/// fields are continuous across cells.
#[derive(Debug, Clone)]
pub struct GridBathymetry {
    r: Vec<f64>,
    theta: Vec<f64>,
    s: Vec<f64>,
    s_r: Vec<f64>,
    s_t: Vec<f64>,
    s_tt: Vec<f64>,
}

/// Gridded depth table; `depth[i * theta.len() + j]` is the depth at `(r[i], theta[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub depth: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn first_difference(x: &[f64], f: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = x.len();
    if n < 2 {
        0.0
    } else if i == 0 {
        (f(1) - f(0)) / (x[1] - x[0])
    } else if i == n - 1 {
        (f(n - 1) - f(n - 2)) / (x[n - 1] - x[n - 2])
    } else {
        (f(i + 1) - f(i - 1)) / (x[i + 1] - x[i - 1])
    }
}

fn second_difference(x: &[f64], f: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    let c = i.clamp(1, n - 2);
    let (hm, hp) = (x[c] - x[c - 1], x[c + 1] - x[c]);
    2.0 * (hm * f(c + 1) - (hm + hp) * f(c) + hp * f(c - 1)) / (hm * hp * (hm + hp))
}

pub fn bathymetry_from_grid(grid: DepthGrid) -> Result<GridBathymetry, ProblemError> {
    let (nr, nt) = (grid.r.len(), grid.theta.len());
    if nr == 0 || nt == 0 {
        return Err(ProblemError::Grid("empty axis".into()));
    }
    if grid.depth.len() != nr * nt {
        return Err(ProblemError::Grid(format!(
            "expected {} depths for a {nr}x{nt} grid, got {}",
            nr * nt,
            grid.depth.len()
        )));
    }
    if !strictly_increasing(&grid.r) || !strictly_increasing(&grid.theta) {
        return Err(ProblemError::Grid("axes must be strictly increasing".into()));
    }
    for i in 0..nr {
        for j in 0..nt {
            let d = grid.depth[i * nt + j];
            if !(d > 0.0) {
                return Err(ProblemError::NonPositiveDepth {
                    depth: d,
                    r: grid.r[i],
                    theta: grid.theta[j],
                });
            }
        }
    }
    let at = |i: usize, j: usize| grid.depth[i * nt + j];
    let mut s_r = vec![0.0; nr * nt];
    let mut s_t = vec![0.0; nr * nt];
    let mut s_tt = vec![0.0; nr * nt];
    for i in 0..nr {
        for j in 0..nt {
            s_r[i * nt + j] = first_difference(&grid.r, |k| at(k, j), i);
            s_t[i * nt + j] = first_difference(&grid.theta, |k| at(i, k), j);
            s_tt[i * nt + j] = second_difference(&grid.theta, |k| at(i, k), j);
        }
    }
    Ok(GridBathymetry {
        r: grid.r,
        theta: grid.theta,
        s: grid.depth,
        s_r,
        s_t,
        s_tt,
    })
}

/// Interval index and local coordinate in `[0, 1]`; a single-node axis maps everything to it.
fn bracket(x: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = x.len();
    if n == 1 {
        return if (v - x[0]).abs() <= 1e-12 * x[0].abs().max(1.0) {
            Some((0, 0.0))
        } else {
            None
        };
    }
    let tol = 1e-12 * (x[n - 1] - x[0]);
    if v < x[0] - tol || v > x[n - 1] + tol {
        return None;
    }
    let i = x.partition_point(|&p| p <= v).saturating_sub(1).min(n - 2);
    Some((i, ((v - x[i]) / (x[i + 1] - x[i])).clamp(0.0, 1.0)))
}

impl GridBathymetry {
    fn interp(&self, field: &[f64], i: usize, a: f64, j: usize, b: f64) -> f64 {
        let nt = self.theta.len();
        let i1 = (i + 1).min(self.r.len() - 1);
        let j1 = (j + 1).min(nt - 1);
        let f = |p: usize, q: usize| field[p * nt + q];
        (1.0 - a) * (1.0 - b) * f(i, j) + a * (1.0 - b) * f(i1, j) + a * b * f(i1, j1) + (1.0 - a) * b * f(i, j1)
    }

    pub fn r_axis(&self) -> &[f64] {
        &self.r
    }

    pub fn theta_axis(&self) -> &[f64] {
        &self.theta
    }

    /// Whether the grid hull covers `[r_min, r_max] x [theta_min, theta_max]`.
    pub fn covers(&self, domain: &RectDomain) -> bool {
        bracket(&self.r, domain.r_min).is_some()
            && bracket(&self.r, domain.r_max).is_some()
            && bracket(&self.theta, domain.theta_min).is_some()
            && bracket(&self.theta, domain.theta_max).is_some()
    }
}

impl Bathymetry for GridBathymetry {
    fn sample(&self, r: f64, theta: f64) -> Result<DepthSample, ProblemError> {
        let (i, a) = bracket(&self.r, r).ok_or(ProblemError::OutsideGrid { r, theta })?;
        let (j, b) = bracket(&self.theta, theta).ok_or(ProblemError::OutsideGrid { r, theta })?;
        Ok(DepthSample {
            s: self.interp(&self.s, i, a, j, b),
            s_r: self.interp(&self.s_r, i, a, j, b),
            s_theta: self.interp(&self.s_t, i, a, j, b),
            s_theta_theta: self.interp(&self.s_tt, i, a, j, b),
        })
    }
}

fn grid_err(e: impl std::fmt::Display) -> ProblemError {
    ProblemError::Grid(e.to_string())
}

/// Reads the long format: header `r,theta,depth`, one row per grid node in
/// any order, covering a full rectangular grid.
pub fn read_depth_csv(path: &Path) -> Result<DepthGrid, ProblemError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(grid_err)?;
    let headers: Vec<String> = reader.headers().map_err(grid_err)?.iter().map(str::to_owned).collect();
    if headers != ["r", "theta", "depth"] {
        return Err(ProblemError::Grid(format!("expected header r,theta,depth, got {}", headers.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(grid_err)?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals = vals.map_err(grid_err)?;
        if vals.len() != 3 {
            return Err(ProblemError::Grid(format!("row has {} fields", vals.len())));
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    depth_grid_from_rows(rows)
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn depth_grid_from_rows(rows: Vec<(f64, f64, f64)>) -> Result<DepthGrid, ProblemError> {
    let r = unique_sorted(rows.iter().map(|x| x.0).collect());
    let theta = unique_sorted(rows.iter().map(|x| x.1).collect());
    let nt = theta.len();
    if rows.len() != r.len() * nt {
        return Err(ProblemError::Grid(format!(
            "{} rows do not form a full {}x{} grid",
            rows.len(),
            r.len(),
            nt
        )));
    }
    let mut depth = vec![f64::NAN; r.len() * nt];
    for (rv, tv, d) in rows {
        let i = r.binary_search_by(|p| p.total_cmp(&rv)).expect("value is on the axis");
        let j = theta.binary_search_by(|p| p.total_cmp(&tv)).expect("value is on the axis");
        if !depth[i * nt + j].is_nan() {
            return Err(ProblemError::Grid(format!("duplicate node r={rv}, theta={tv}")));
        }
        depth[i * nt + j] = d;
    }
    Ok(DepthGrid { r, theta, depth })
}

/// Reads the matrix layout: one CSV row per range value, one column per
/// azimuth, no header. The sidecar holds two lines, `r,<values...>` and
/// `theta,<values...>`.
pub fn read_depth_matrix(path: &Path, axes: &Path) -> Result<DepthGrid, ProblemError> {
    let parse_line = |line: &str| -> Result<(String, Vec<f64>), ProblemError> {
        let mut parts = line.split(',').map(str::trim);
        let name = parts.next().unwrap_or_default().to_owned();
        let vals: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        Ok((name, vals.map_err(grid_err)?))
    };
    let sidecar = std::fs::read_to_string(axes).map_err(grid_err)?;
    let mut r = None;
    let mut theta = None;
    for line in sidecar.lines().filter(|l| !l.trim().is_empty()) {
        let (name, vals) = parse_line(line)?;
        match name.as_str() {
            "r" => r = Some(vals),
            "theta" => theta = Some(vals),
            other => return Err(ProblemError::Grid(format!("unknown axis `{other}` in sidecar"))),
        }
    }
    let (r, theta) = match (r, theta) {
        (Some(r), Some(t)) => (r, t),
        _ => return Err(ProblemError::Grid("sidecar must define both r and theta".into())),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(grid_err)?;
    let mut depth = Vec::with_capacity(r.len() * theta.len());
    let mut n_rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(grid_err)?;
        if rec.len() != theta.len() {
            return Err(ProblemError::Grid(format!("row {n_rows} has {} columns, expected {}", rec.len(), theta.len())));
        }
        for v in rec.iter() {
            depth.push(v.parse::<f64>().map_err(grid_err)?);
        }
        n_rows += 1;
    }
    if n_rows != r.len() {
        return Err(ProblemError::Grid(format!("{n_rows} rows, expected {}", r.len())));
    }
    Ok(DepthGrid { r, theta, depth })
}

/// Compares supplied derivatives with central differences of the depth on an
/// `n x n` sample of the domain interior.
pub fn check_derivatives(
    bathy: &dyn Bathymetry,
    domain: &RectDomain,
    n: usize,
    step: f64,
    tol: f64,
) -> Result<(), ProblemError> {
    let n = n.max(1);
    for i in 0..n {
        for j in 0..n {
            let r = domain.r_min + (domain.r_max - domain.r_min) * (i as f64 + 0.5) / n as f64;
            let t = domain.theta_min + domain.theta_width() * (j as f64 + 0.5) / n as f64;
            let d = bathy.sample(r, t)?;
            let s = |rr: f64, tt: f64| bathy.depth(rr, tt);
            let fr = (s(r + step, t)? - s(r - step, t)?) / (2.0 * step);
            let ft = (s(r, t + step)? - s(r, t - step)?) / (2.0 * step);
            let ftt = (s(r, t + step)? - 2.0 * d.s + s(r, t - step)?) / (step * step);
            for (which, got, fd) in [("s_r", d.s_r, fr), ("s_theta", d.s_theta, ft), ("s_theta_theta", d.s_theta_theta, ftt)] {
                let defect = (got - fd).abs();
                if defect > tol * (1.0 + fd.abs()) {
                    return Err(ProblemError::InconsistentDerivative { which, defect, r, theta: t });
                }
            }
        }
    }
    Ok(())
}
