//! Small dense helpers: weighted moments and multivariate normal kernels.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Weighted mean of equal-length vectors; weights must sum to one.
pub fn weighted_mean(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let d = points.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for (p, &w) in points.iter().zip(weights) {
        for (mi, &pi) in m.iter_mut().zip(p) {
            *mi += w * pi;
        }
    }
    m
}

/// Weighted covariance `sum_i w_i (x_i - m)(x_i - m)'` for normalised weights.
pub fn weighted_cov(points: &[Vec<f64>], weights: &[f64]) -> DMatrix<f64> {
    let m = weighted_mean(points, weights);
    let d = m.len();
    let mut c = DMatrix::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        for i in 0..d {
            let di = p[i] - m[i];
            for j in 0..=i {
                c[(i, j)] += w * di * (p[j] - m[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}

/// Cholesky factor of `cov`, adding `1e-10 * trace / d` to the diagonal once
/// if the matrix is not numerically positive definite.
pub fn regularized_cholesky(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    regularized(cov).map(|(c, _)| c)
}

/// `cov` itself if positive definite, otherwise the diagonally bumped matrix
/// factored by [`regularized_cholesky`].
pub fn regularize(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    regularized(cov).map(|(_, m)| m)
}

fn regularized(cov: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
    let d = cov.nrows();
    if d == 0 || cov.ncols() != d {
        return Err(Error::Shape(format!("covariance is {:?}", cov.shape())));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegeneratePopulation("non-finite covariance".into()));
    }
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok((c, cov.clone()));
    }
    let bump = 1e-10 * cov.trace() / d as f64;
    let mut reg = cov.clone();
    for i in 0..d {
        reg[(i, i)] += bump;
    }
    match Cholesky::new(reg.clone()) {
        Some(c) => Ok((c, reg)),
        None => Err(Error::DegeneratePopulation(
            "covariance is not positive definite".into(),
        )),
    }
}

/// Multivariate normal random-walk kernel with fixed covariance.
#[derive(Debug, Clone)]
pub struct Mvn {
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
    log_norm: f64,
}

impl Mvn {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = regularized_cholesky(cov)?;
        let lower = chol.l();
        let d = cov.nrows() as f64;
        let log_det: f64 = lower.diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Ok(Self {
            chol,
            lower,
            log_norm: -0.5 * (d * LN_2PI + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// Log density of `to` under a normal centred at `from`.
    pub fn log_density(&self, from: &[f64], to: &[f64]) -> f64 {
        let diff = DVector::from_iterator(self.dim(), to.iter().zip(from).map(|(a, b)| a - b));
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is invertible");
        self.log_norm - 0.5 * z.norm_squared()
    }

    /// Draws `center + L e` with `e` standard normal.
    pub fn perturb<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| center[i] + (0..=i).map(|j| self.lower[(i, j)] * e[j]).sum::<f64>())
            .collect()
    }
}

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
