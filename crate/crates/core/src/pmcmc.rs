//! Pseudo-marginal random-walk Metropolis-Hastings driven by particle-filter
//! likelihood estimates, tuned from an ABC population and run as independent
//! parallel chains.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;

use crate::abc::{abc_smc, AbcConfig, AbcRun, WeightedPopulation};
use crate::error::{Error, Result};
use crate::linalg::{regularize, weighted_cov, Mvn};
use crate::pfilter::{loglik_variance, replicate_log_lik};
use crate::pool::WorkerPool;
use crate::problem::Problem;
use crate::rng::{domain, Streams};

/// Optimal random-walk scaling constant `2.38^2`.
pub const RW_SCALE: f64 = 5.6644;

/// Settings for one PMMH chain. `theta0` is on the sampling scale.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    proposal_cov: DMatrix<f64>,
    kernel: Mvn,
    pub particles: usize,
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    pub theta0: Vec<f64>,
    pub seed: u64,
}

impl ChainConfig {
    /// Fails unless `proposal_cov` is symmetric positive definite and the
    /// counts are positive.
    pub fn new(
        proposal_cov: DMatrix<f64>,
        particles: usize,
        iterations: u64,
        thin: u64,
        theta0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let d = theta0.len();
        if proposal_cov.shape() != (d, d) {
            return Err(Error::Dimension {
                expected: d,
                got: proposal_cov.nrows(),
            });
        }
        if proposal_cov != proposal_cov.transpose() || Cholesky::new(proposal_cov.clone()).is_none()
        {
            return Err(Error::DegeneratePopulation(
                "proposal covariance is not symmetric positive definite".into(),
            ));
        }
        if particles == 0 || iterations == 0 || thin == 0 {
            return Err(Error::Config(
                "particles, iterations and thin must be at least 1".into(),
            ));
        }
        let kernel = Mvn::new(&proposal_cov)?;
        Ok(Self {
            proposal_cov,
            kernel,
            particles,
            iterations,
            thin,
            burn_in: 0,
            theta0,
            seed,
        })
    }

    /// Discards the first `b` of the `iterations` steps.
    pub fn with_burn_in(mut self, b: u64) -> Result<Self> {
        if b >= self.iterations {
            return Err(Error::Config(
                "burn-in must be shorter than the chain".into(),
            ));
        }
        self.burn_in = b;
        Ok(self)
    }

    pub fn proposal_cov(&self) -> &DMatrix<f64> {
        &self.proposal_cov
    }

    pub fn kernel(&self) -> &Mvn {
        &self.kernel
    }

    /// Whether the state after 1-based iteration `i` is kept.
    pub fn retains(&self, i: u64) -> bool {
        i > self.burn_in && (i - self.burn_in - 1).is_multiple_of(self.thin)
    }
}

/// Current point of a chain: sampling-scale parameters with the stored
/// likelihood estimate and prior log density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub log_lik: f64,
    pub log_prior: f64,
}

/// Retained output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub chain: usize,
    pub seed: u64,
    /// 1-based iteration of each retained sample.
    pub iterations: Vec<u64>,
    pub samples: Vec<Vec<f64>>,
    pub log_liks: Vec<f64>,
    /// Whether the move at that iteration was accepted.
    pub accepted: Vec<bool>,
    pub acceptances: u64,
    pub total_iterations: u64,
    pub burn_in: u64,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptances as f64 / self.total_iterations.max(1) as f64
    }

    /// Values of parameter `p` across retained samples.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[p]).collect()
    }

    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iteration".to_string()];
        header.extend(names.iter().cloned());
        header.push("log_lik".into());
        header.push("accepted".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.iterations[i].to_string()];
            rec.extend(self.samples[i].iter().map(f64::to_string));
            rec.push(self.log_liks[i].to_string());
            rec.push(u8::from(self.accepted[i]).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }

    /// Reads a chain written by [`ChainRecord::write_csv`]. Acceptance totals
    /// are recovered only for unthinned chains.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<(Vec<String>, ChainRecord)> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 4
            || &header[0] != "iteration"
            || &header[n - 2] != "log_lik"
            || &header[n - 1] != "accepted"
        {
            return Err(Error::InvalidDataset(
                "chain CSV needs iteration, parameters, log_lik, accepted".into(),
            ));
        }
        let names = header
            .iter()
            .skip(1)
            .take(n - 3)
            .map(String::from)
            .collect();
        let mut rec = ChainRecord {
            chain: 0,
            seed: 0,
            iterations: Vec::new(),
            samples: Vec::new(),
            log_liks: Vec::new(),
            accepted: Vec::new(),
            acceptances: 0,
            total_iterations: 0,
            burn_in: 0,
        };
        let bad = |s: &str| Error::InvalidDataset(format!("bad chain entry `{s}`"));
        for row in rdr.records() {
            let row = row?;
            rec.iterations
                .push(row[0].parse().map_err(|_| bad(&row[0]))?);
            rec.samples.push(
                (1..n - 2)
                    .map(|j| row[j].parse::<f64>().map_err(|_| bad(&row[j])))
                    .collect::<Result<_>>()?,
            );
            rec.log_liks
                .push(row[n - 2].parse().map_err(|_| bad(&row[n - 2]))?);
            rec.accepted.push(&row[n - 1] == "1");
        }
        rec.total_iterations = rec.iterations.last().copied().unwrap_or(0);
        rec.acceptances = rec.accepted.iter().filter(|a| **a).count() as u64;
        Ok((names, rec))
    }
}

/// `log alpha` for the pseudo-marginal acceptance test. A proposal with zero
/// prior or likelihood is never accepted; a zero-likelihood current state
/// accepts any proposal that is not itself zero.
pub fn log_acceptance_ratio(proposed: (f64, f64), current: (f64, f64)) -> f64 {
    let (ll_p, lp_p) = proposed;
    let (ll_c, lp_c) = current;
    if ll_p == f64::NEG_INFINITY || lp_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if ll_c == f64::NEG_INFINITY || lp_c == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (ll_p + lp_p) - (ll_c + lp_c)
}

/// One PMMH transition. Returns the new state and whether the move was accepted.
pub fn pmmh_step<R: Rng + ?Sized>(
    problem: &Problem,
    current: &ChainState,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<(ChainState, bool)> {
    let z = config.kernel.perturb(&current.theta, rng);
    let log_prior = problem.prior.log_density(&z)?;
    if log_prior == f64::NEG_INFINITY {
        return Ok((current.clone(), false));
    }
    let log_lik = replicate_log_lik(
        problem,
        &problem.prior.to_natural(&z),
        config.particles,
        rng,
    )?
    .log_estimate;
    let log_alpha =
        log_acceptance_ratio((log_lik, log_prior), (current.log_lik, current.log_prior));
    let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
    if accept {
        Ok((
            ChainState {
                theta: z,
                log_lik,
                log_prior,
            },
            true,
        ))
    } else {
        Ok((current.clone(), false))
    }
}

/// Runs `config.iterations` PMMH steps from `config.theta0` using stream
/// `(CHAIN, 0)` of the chain seed.
pub fn run_chain(problem: &Problem, config: &ChainConfig, chain: usize) -> Result<ChainRecord> {
    let mut rng = Streams::new(config.seed).stream(domain::CHAIN, 0);
    let log_prior = problem.prior.log_density(&config.theta0)?;
    let log_lik = if log_prior == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        replicate_log_lik(
            problem,
            &problem.prior.to_natural(&config.theta0),
            config.particles,
            &mut rng,
        )?
        .log_estimate
    };
    let mut state = ChainState {
        theta: config.theta0.clone(),
        log_lik,
        log_prior,
    };
    let kept = (config.iterations - config.burn_in).div_ceil(config.thin) as usize;
    let mut rec = ChainRecord {
        chain,
        seed: config.seed,
        iterations: Vec::with_capacity(kept),
        samples: Vec::with_capacity(kept),
        log_liks: Vec::with_capacity(kept),
        accepted: Vec::with_capacity(kept),
        acceptances: 0,
        total_iterations: config.iterations,
        burn_in: config.burn_in,
    };
    for i in 1..=config.iterations {
        let (next, accepted) = pmmh_step(problem, &state, config, &mut rng)?;
        state = next;
        rec.acceptances += u64::from(accepted);
        if config.retains(i) {
            rec.iterations.push(i);
            rec.samples.push(state.theta.clone());
            rec.log_liks.push(state.log_lik);
            rec.accepted.push(accepted);
        }
    }
    Ok(rec)
}

/// `2.38^2 / d` times the weighted covariance of an ABC population.
pub fn proposal_cov_from_abc(population: &WeightedPopulation, d: usize) -> Result<DMatrix<f64>> {
    if population.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: population.dim(),
        });
    }
    let mut distinct: Vec<&Vec<f64>> = population
        .particles
        .iter()
        .zip(&population.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(p, _)| p)
        .collect();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < d + 1 {
        return Err(Error::DegeneratePopulation(format!(
            "{} distinct weighted particles, need at least {}",
            distinct.len(),
            d + 1
        )));
    }
    let cov = weighted_cov(&population.particles, &population.weights) * (RW_SCALE / d as f64);
    regularize(&cov)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    /// Target variance of the log-likelihood estimator.
    pub target: f64,
    /// Filter repeats per variance probe.
    pub repeats: usize,
    pub min_particles: usize,
    pub max_particles: usize,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            target: 2.0,
            repeats: 50,
            min_particles: 50,
            max_particles: 20_000,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0) {
            return Err(Error::Config("tuner.target must be positive".into()));
        }
        if self.repeats < 2 {
            return Err(Error::Config("tuner.repeats must be at least 2".into()));
        }
        if self.min_particles == 0 || self.max_particles < self.min_particles {
            return Err(Error::Config(
                "tuner needs 1 <= min_particles <= max_particles".into(),
            ));
        }
        Ok(())
    }
}

/// Chosen particle count with every `(N, variance)` probe in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub particles: usize,
    pub trace: Vec<(usize, f64)>,
}

/// Upper end of the band a refined particle count may land in.
const REFINE_CEILING: f64 = 3.0;

/// Chooses the particle count from a variance oracle `measure(N)`. Grows N
/// (at least doubling, else by the `1/N` law) until the variance is at most
/// `target`, then tries to shrink it by the same law while keeping the
/// variance at most 3.
pub fn tune_with<F>(config: &TunerConfig, mut measure: F) -> Result<TuneResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    config.validate()?;
    let by_law = |n: usize, v: f64| (n as f64 * v / config.target).ceil() as usize;
    let mut trace = Vec::new();
    let mut n = config.min_particles;
    loop {
        let v = measure(n)?;
        trace.push((n, v));
        if v <= config.target {
            if v >= 1.0 || n == config.min_particles {
                return Ok(TuneResult {
                    particles: n,
                    trace,
                });
            }
            let m = by_law(n, v).max(config.min_particles);
            if m >= n {
                return Ok(TuneResult {
                    particles: n,
                    trace,
                });
            }
            let vm = measure(m)?;
            trace.push((m, vm));
            let particles = if vm <= REFINE_CEILING { m } else { n };
            return Ok(TuneResult { particles, trace });
        }
        let next = if v.is_finite() {
            (2 * n).max(by_law(n, v))
        } else {
            2 * n
        };
        if next > config.max_particles {
            log::warn!("particle tuner: variance {v} at N = {n}; check the model and data");
            return Err(Error::ParticleCap {
                cap: config.max_particles,
                variance: v,
            });
        }
        n = next;
    }
}

/// Particle count at which the log-likelihood variance at natural-scale
/// `theta` is near the target. Probe `N` uses child streams `(TUNER, N)`.
pub fn tune_particles(
    problem: &Problem,
    theta: &[f64],
    config: &TunerConfig,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<TuneResult> {
    tune_with(config, |n| {
        let v = loglik_variance(
            problem,
            theta,
            n,
            config.repeats,
            &streams.child(domain::TUNER, n as u64),
            0,
            pool,
        )?;
        log::info!("particle tuner: N = {n}, variance {v:.3}");
        Ok(v)
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmcmcConfig {
    pub chains: usize,
    /// PMMH steps per chain, burn-in included.
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    /// Fixed particle count; the tuner runs when absent.
    pub particles: Option<usize>,
    pub tuner: TunerConfig,
}

impl Default for PmcmcConfig {
    fn default() -> Self {
        Self {
            chains: 8,
            iterations: 10_000,
            thin: 10,
            burn_in: 0,
            particles: None,
            tuner: TunerConfig::default(),
        }
    }
}

impl PmcmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("pmcmc.chains must be at least 1".into()));
        }
        if self.iterations == 0 || self.thin == 0 {
            return Err(Error::Config(
                "pmcmc.iterations and pmcmc.thin must be at least 1".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(
                "pmcmc.burn_in must be below pmcmc.iterations".into(),
            ));
        }
        if self.particles == Some(0) {
            return Err(Error::Config("pmcmc.particles must be at least 1".into()));
        }
        self.tuner.validate()
    }
}

/// Chains launched from an ABC population with shared tuning.
#[derive(Debug)]
pub struct PmcmcRun {
    pub proposal_cov: DMatrix<f64>,
    pub tuning: TuneResult,
    /// Sampling-scale starting points, one per chain.
    pub starts: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub chains: Vec<Result<ChainRecord>>,
}

impl PmcmcRun {
    /// Chains that finished.
    pub fn completed(&self) -> Vec<&ChainRecord> {
        self.chains.iter().filter_map(|c| c.as_ref().ok()).collect()
    }
}

/// Tunes once from `population` and runs `config.chains` independent chains
/// started from weighted population draws. A failed chain does not stop the others.
pub fn chains_from_population(
    problem: &Problem,
    population: &WeightedPopulation,
    config: &PmcmcConfig,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<PmcmcRun> {
    config.validate()?;
    let d = problem.dim();
    let proposal_cov = proposal_cov_from_abc(population, d)?;
    let tuning = match config.particles {
        Some(n) => TuneResult {
            particles: n,
            trace: Vec::new(),
        },
        None => {
            let mean = problem.prior.to_natural(&population.mean());
            tune_particles(problem, &mean, &config.tuner, streams, pool)?
        }
    };
    let mut rng = streams.stream(domain::HYBRID_INIT, 0);
    let starts: Vec<Vec<f64>> = (0..config.chains)
        .map(|_| population.particles[population.draw_index(&mut rng)].clone())
        .collect();
    let seeds: Vec<u64> = (0..config.chains)
        .map(|c| streams.child(domain::CHAIN, c as u64).master())
        .collect();
    let configs = starts
        .iter()
        .zip(&seeds)
        .map(|(start, &seed)| {
            ChainConfig::new(
                proposal_cov.clone(),
                tuning.particles,
                config.iterations,
                config.thin,
                start.clone(),
                seed,
            )?
            .with_burn_in(config.burn_in)
        })
        .collect::<Result<Vec<_>>>()?;
    let chains = pool.map(0..config.chains as u64, |c| {
        let rec = run_chain(problem, &configs[c as usize], c as usize);
        match &rec {
            Ok(r) => log::info!("chain {c}: acceptance {:.3}", r.acceptance_rate()),
            Err(e) => log::error!("chain {c} failed: {e}"),
        }
        rec
    });
    Ok(PmcmcRun {
        proposal_cov,
        tuning,
        starts,
        seeds,
        chains,
    })
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub abc: AbcConfig,
    pub pmcmc: PmcmcConfig,
}

#[derive(Debug)]
pub struct HybridRun {
    pub abc: AbcRun,
    pub pmcmc: PmcmcRun,
}

/// Sequential ABC followed by parallel PMMH chains initialised and tuned from
/// its final population.
pub fn hybrid_run(
    problem: &Problem,
    config: &HybridConfig,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<HybridRun> {
    config.abc.validate()?;
    config.pmcmc.validate()?;
    let abc = abc_smc(problem, &config.abc, streams, pool)?;
    let pmcmc = chains_from_population(problem, abc.last(), &config.pmcmc, streams, pool)?;
    Ok(HybridRun { abc, pmcmc })
}
