//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(root().join(path)).unwrap()
}

/// Immigration `0 -> X` at rate `theta` from `X = 0`, observed with gaussian
/// error. Counts between observations are Poisson, so the marginal likelihood
/// follows from a forward pass over counts `0..cap`.
pub fn immigration_likelihood(
    theta: f64,
    times: &[f64],
    values: &[f64],
    sd: f64,
    cap: usize,
) -> f64 {
    let noise = Normal::new(0.0, sd).unwrap();
    let mut alpha = vec![0.0; cap];
    alpha[0] = 1.0;
    let mut t = 0.0;
    for (&tk, &y) in times.iter().zip(values) {
        let mu = theta * (tk - t);
        let mut pois = vec![0.0; cap];
        pois[0] = (-mu).exp();
        for j in 1..cap {
            pois[j] = pois[j - 1] * mu / j as f64;
        }
        let mut next = vec![0.0; cap];
        for (x, &a) in alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &p) in pois.iter().enumerate().take(cap - x) {
                next[x + j] += a * p;
            }
        }
        for (x, v) in next.iter_mut().enumerate() {
            *v *= noise.pdf(y - x as f64);
        }
        alpha = next;
        t = tk;
    }
    alpha.iter().sum()
}

/// Immigration model text with the given prior on `theta`.
pub fn immigration_model(prior: &str, sd: f64) -> String {
    format!(
        "species X = 0\nparam theta\nreaction imm: 0 -> X @ mass_action(theta)\n\
         prior theta ~ {prior}\nobs X ~ gaussian({sd})\n"
    )
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability with the small-sample correction.
pub fn ks_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let l = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..=200)
        .map(|j| {
            let j = j as f64;
            2.0 * if j as u64 % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * j * j * l * l).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

/// Pearson statistic of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

pub fn chi_square_p(stat: f64, df: usize) -> f64 {
    use statrs::distribution::ChiSquared;
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}
