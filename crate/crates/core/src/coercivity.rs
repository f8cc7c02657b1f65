//! Empirical choice of the coercivity shift `delta`.
//!
//! On a coarse sampling mesh the smallest generalized eigenvalue of
//! `(Re B(r) + delta M, K)` is computed at sampled ranges, where `Re B` is the
//! Hermitian part and `K` the discrete `H^1` Gram matrix. That eigenvalue is
//! the best constant `C` in `Re B(v, v) >= C ||v||_1^2` over the sampling
//! space. `delta = 0` is kept when it already gives `C >= fraction * c0`,
//! with `c0` the smallest sampled eigenvalue of `D`; otherwise `delta` is
//! doubled from a small seed until it does. The result is then checked on
//! seeded random vectors.

use crate::assembly::{assemble_form, assemble_h1_gram, assemble_mass};
use crate::discretization::Discretization;
use crate::problem::{GeneralProblem, ProblemError, SamplingGrid};
use crate::sparse::ComplexSparseMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoercivityError {
    #[error("form stays indefinite up to delta = {delta:e} (best constant {constant:e})")]
    Indefinite { delta: f64, constant: f64 },
    #[error("diffusion is not positive definite at the samples (min eigenvalue {0:e})")]
    DiffusionNotPositive(f64),
    #[error("random check failed: ratio {ratio:e} below constant {constant:e}")]
    RandomCheckFailed { ratio: f64, constant: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Discretization(#[from] crate::discretization::DiscretizationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityConfig {
    /// Sampling mesh size per axis.
    pub mesh: usize,
    pub n_r: usize,
    /// Required `C / c0`.
    pub fraction: f64,
    /// Doubling steps before giving up.
    pub max_doublings: usize,
    pub random_vectors: usize,
    pub seed: u64,
}

impl Default for CoercivityConfig {
    fn default() -> Self {
        Self {
            mesh: 8,
            n_r: 5,
            fraction: 0.25,
            max_doublings: 40,
            random_vectors: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub delta: f64,
    /// Smallest generalized eigenvalue over the sampled ranges at `delta`.
    pub constant: f64,
    /// Smallest sampled eigenvalue of `D`.
    pub c0: f64,
    /// Smallest `Re B(v,v) / ||v||_1^2` seen over the random vectors.
    pub random_min_ratio: f64,
}

fn dense(m: &ComplexSparseMatrix) -> DMatrix<C64> {
    let n = m.n_rows();
    let mut out = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        for (j, v) in m.row(i) {
            out[(i, j)] = v;
        }
    }
    out
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn min_diffusion_eigenvalue(p: &GeneralProblem, sampling: &SamplingGrid) -> Result<f64, ProblemError> {
    let mut c0 = f64::INFINITY;
    for (r, y, t) in sampling.points(&p.domain)? {
        let d = p.diffusion_at(r, y, t)?;
        let mean = 0.5 * (d[0][0] + d[1][1]);
        let half = (0.5 * (d[0][0] - d[1][1])).hypot(0.5 * (d[0][1] + d[1][0]));
        c0 = c0.min(mean - half);
    }
    Ok(c0)
}

/// Smallest eigenvalue of `(H, K)` via `L^{-1} H L^{-H}`, `K = L L^H`.
fn generalized_min(h: &DMatrix<C64>, l_inv: &DMatrix<C64>) -> f64 {
    let c = l_inv * h * l_inv.adjoint();
    let c = hermitian_part(&c);
    SymmetricEigen::new(c).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn coercivity_delta(p: &GeneralProblem, config: &CoercivityConfig) -> Result<CoercivityReport, CoercivityError> {
    let sampling = SamplingGrid {
        n_r: config.n_r,
        ..SamplingGrid::default()
    };
    let c0 = min_diffusion_eigenvalue(p, &sampling)?;
    if !(c0 > 0.0) {
        return Err(CoercivityError::DiffusionNotPositive(c0));
    }
    let disc = Discretization::uniform(p.domain, config.mesh, config.mesh.max(2))?;
    let k = dense(&assemble_h1_gram(&disc));
    let m = dense(&assemble_mass(&disc));
    let l = k.clone().cholesky().expect("H1 Gram matrix is positive definite").l();
    let n = l.nrows();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factor is nonsingular");

    let rs: Vec<f64> = {
        let mut v: Vec<f64> = sampling.points(&p.domain)?.iter().map(|s| s.0).collect();
        v.dedup();
        v
    };
    let parts = rs
        .iter()
        .map(|&r| Ok(hermitian_part(&dense(&assemble_form(&disc, p, r, 0.0)?))))
        .collect::<Result<Vec<_>, ProblemError>>()?;
    let constant_at = |delta: f64| {
        parts
            .iter()
            .map(|h| generalized_min(&(h + &m * C64::new(delta, 0.0)), &l_inv))
            .fold(f64::INFINITY, f64::min)
    };

    let target = config.fraction * c0;
    let mut delta = 0.0;
    let mut constant = constant_at(0.0);
    if constant < target {
        delta = 0.125 * c0;
        let mut found = false;
        for _ in 0..config.max_doublings {
            constant = constant_at(delta);
            if constant >= target {
                found = true;
                break;
            }
            delta *= 2.0;
        }
        if !found {
            return Err(CoercivityError::Indefinite { delta, constant });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst = f64::INFINITY;
    for i in 0..config.random_vectors {
        let v: nalgebra::DVector<C64> =
            nalgebra::DVector::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = &parts[i % parts.len()] + &m * C64::new(delta, 0.0);
        let num = (v.adjoint() * &h * &v)[(0, 0)].re;
        let den = (v.adjoint() * &k * &v)[(0, 0)].re;
        worst = worst.min(num / den);
    }
    if worst < constant * (1.0 - 1e-10) - 1e-14 {
        return Err(CoercivityError::RandomCheckFailed { ratio: worst, constant });
    }
    Ok(CoercivityReport {
        delta,
        constant,
        c0,
        random_min_ratio: worst,
    })
}
