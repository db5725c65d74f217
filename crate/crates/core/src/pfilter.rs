//! Bootstrap particle filter giving unbiased estimates of the marginal
//! likelihood `p(D | theta)`, with replicated experiments combined by the
//! product rule.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::pool::WorkerPool;
use crate::problem::Problem;
use crate::rng::Streams;
use crate::ssa::advance;

/// One observation step of a filter run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    pub replicate: usize,
    pub time: f64,
    /// `log((1/N) sum_i w_i)` at this step.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikEstimate {
    pub log_estimate: f64,
    pub increments: Vec<Increment>,
    pub particles: usize,
}

impl LikEstimate {
    fn from_increments(increments: Vec<Increment>, particles: usize) -> Self {
        let log_estimate = increments.iter().fold(0.0, |acc, i| acc + i.value);
        Self {
            log_estimate,
            increments,
            particles,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_estimate == f64::NEG_INFINITY
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replicate", "time", "log_increment"])?;
        for i in &self.increments {
            w.write_record([
                i.replicate.to_string(),
                i.time.to_string(),
                i.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }
}

/// Particle states and unnormalised weights immediately after weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub step: usize,
    pub states: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    /// Weights scaled to sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }
}

/// Log-likelihood estimate for one replicate of the problem's data at the
/// natural-scale parameters `theta`, using `n` particles.
pub fn bootstrap_filter<R: Rng + ?Sized>(
    problem: &Problem,
    theta: &[f64],
    replicate: usize,
    n: usize,
    rng: &mut R,
) -> Result<LikEstimate> {
    run_filter(problem, theta, replicate, n, rng, |_| {})
}

/// As [`bootstrap_filter`], also returning the weighted particle set of every step.
pub fn bootstrap_filter_traced<R: Rng + ?Sized>(
    problem: &Problem,
    theta: &[f64],
    replicate: usize,
    n: usize,
    rng: &mut R,
) -> Result<(LikEstimate, Vec<ParticleSet>)> {
    let v = problem.model.n_species();
    let mut trace = Vec::new();
    let est = run_filter(problem, theta, replicate, n, rng, |s: StepView<'_>| {
        trace.push(ParticleSet {
            step: s.step,
            states: s.states.chunks(v).map(<[i64]>::to_vec).collect(),
            weights: s.log_weights.iter().map(|lw| lw.exp()).collect(),
        })
    })?;
    Ok((est, trace))
}

struct StepView<'a> {
    step: usize,
    states: &'a [i64],
    log_weights: &'a [f64],
}

fn run_filter<R, F>(
    problem: &Problem,
    theta: &[f64],
    replicate: usize,
    n: usize,
    rng: &mut R,
    mut on_step: F,
) -> Result<LikEstimate>
where
    R: Rng + ?Sized,
    F: FnMut(StepView<'_>),
{
    if n == 0 {
        return Err(Error::Config("particle count must be at least 1".into()));
    }
    let model = &problem.model;
    if theta.len() != model.n_params() {
        return Err(Error::Dimension {
            expected: model.n_params(),
            got: theta.len(),
        });
    }
    let data = problem
        .data
        .replicates()
        .get(replicate)
        .ok_or_else(|| Error::InvalidDataset(format!("no replicate {replicate}")))?;
    let times = problem.data.times();
    let v = model.n_species();
    let mut h = vec![0.0; model.n_reactions()];
    let mut states: Vec<i64> = Vec::with_capacity(n * v);
    for _ in 0..n {
        states.extend(problem.initial[replicate].sample(rng));
    }
    let mut next = vec![0i64; n * v];
    let mut log_w = vec![0.0; n];
    let mut cdf = vec![0.0; n];
    let mut increments = Vec::with_capacity(times.len());
    let ln_n = (n as f64).ln();
    let mut t = 0.0;

    for (k, (&tk, row)) in times.iter().zip(data).enumerate() {
        if k > 0 {
            let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = 0.0;
            for (c, lw) in cdf.iter_mut().zip(&log_w) {
                acc += (lw - max).exp();
                *c = acc;
            }
            for i in 0..n {
                let j = crate::abc::pick_by_cdf(&cdf, rng.random());
                next[i * v..(i + 1) * v].copy_from_slice(&states[j * v..(j + 1) * v]);
            }
            std::mem::swap(&mut states, &mut next);
        }
        for (i, lw) in log_w.iter_mut().enumerate() {
            let x = &mut states[i * v..(i + 1) * v];
            let mut events = 0;
            let alive = if tk > t {
                match advance(
                    model,
                    theta,
                    x,
                    t,
                    tk,
                    &mut h,
                    &mut events,
                    problem.max_events,
                    rng,
                ) {
                    Ok(()) => true,
                    Err(Error::Explosion(_)) => false,
                    Err(e) => return Err(e),
                }
            } else {
                true
            };
            *lw = if alive {
                problem.obs.log_density_unchecked(row, x)
            } else {
                f64::NEG_INFINITY
            };
        }
        t = tk;
        on_step(StepView {
            step: k,
            states: &states,
            log_weights: &log_w,
        });
        let value = log_sum_exp(&log_w) - ln_n;
        increments.push(Increment {
            replicate,
            time: tk,
            value,
        });
        if value == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(LikEstimate::from_increments(increments, n))
}

/// Product of independent per-replicate estimates, drawn in replicate order
/// from `rng`. Stops at the first replicate with a zero estimate.
pub fn replicate_log_lik<R: Rng + ?Sized>(
    problem: &Problem,
    theta: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<LikEstimate> {
    let mut increments = Vec::new();
    for r in 0..problem.data.replicates().len() {
        let est = bootstrap_filter(problem, theta, r, n, rng)?;
        let zero = est.is_zero();
        increments.extend(est.increments);
        if zero {
            break;
        }
    }
    Ok(LikEstimate::from_increments(increments, n))
}

/// `repeats` independent log-likelihood estimates at `theta`; repeat `i` uses
/// stream `(stream_domain, i)`.
pub fn loglik_estimates(
    problem: &Problem,
    theta: &[f64],
    n: usize,
    repeats: usize,
    streams: &Streams,
    stream_domain: u64,
    pool: &WorkerPool,
) -> Result<Vec<f64>> {
    pool.map(0..repeats as u64, |i| {
        let mut rng = streams.stream(stream_domain, i);
        replicate_log_lik(problem, theta, n, &mut rng).map(|e| e.log_estimate)
    })
    .into_iter()
    .collect()
}

/// Sample variance of repeated log-likelihood estimates; `+inf` if any is zero.
pub fn loglik_variance(
    problem: &Problem,
    theta: &[f64],
    n: usize,
    repeats: usize,
    streams: &Streams,
    stream_domain: u64,
    pool: &WorkerPool,
) -> Result<f64> {
    if repeats < 2 {
        return Err(Error::Config("variance needs at least 2 repeats".into()));
    }
    let est = loglik_estimates(problem, theta, n, repeats, streams, stream_domain, pool)?;
    Ok(sample_variance(&est))
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    if xs.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}
