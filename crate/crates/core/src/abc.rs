//! Likelihood-free approximation of the posterior: rejection ABC and
//! sequential ABC with importance weights, quantile-adaptive tolerances and
//! the optimal Gaussian random-walk perturbation kernel.
//!
//! Proposals are evaluated in parallel batches. Proposal `i` of generation `g`
//! draws only from stream `(ABC_GENERATION + g, i)` and acceptances are taken
//! in index order, so a population is a function of the master seed alone.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Mvn};
use crate::model::Prior;
use crate::observation::Dataset;
use crate::pool::WorkerPool;
use crate::problem::Problem;
use crate::rng::{domain, Streams};
use crate::ssa::advance;

/// An ABC particle population on the sampling scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPopulation {
    pub generation: usize,
    pub tolerance: f64,
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub distances: Vec<f64>,
    /// Simulations spent to fill this population.
    pub proposals: u64,
}

impl WeightedPopulation {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.len() as f64 / self.proposals.max(1) as f64
    }

    /// Checks the population invariants: normalised non-negative weights and
    /// every distance within the tolerance.
    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if self.weights.len() != n || self.distances.len() != n {
            return Err(Error::Shape("population columns differ in length".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::DegeneratePopulation("negative weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::DegeneratePopulation(format!(
                "weights sum to {total}"
            )));
        }
        if self.distances.iter().any(|d| !(*d <= self.tolerance)) {
            return Err(Error::DegeneratePopulation(
                "distance above tolerance".into(),
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        crate::linalg::weighted_mean(&self.particles, &self.weights)
    }

    /// Index drawn with probability proportional to weight.
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick_by_cdf(&cumulative(&self.weights), rng.random())
    }

    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = names.to_vec();
        header.push("weight".into());
        header.push("distance".into());
        w.write_record(&header)?;
        for ((p, wt), d) in self
            .particles
            .iter()
            .zip(&self.weights)
            .zip(&self.distances)
        {
            let mut rec: Vec<String> = p.iter().map(f64::to_string).collect();
            rec.push(wt.to_string());
            rec.push(d.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }

    /// Reads a population written by [`WeightedPopulation::write_csv`]. The
    /// tolerance is taken as the largest distance.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<WeightedPopulation> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 3 || &header[n - 2] != "weight" || &header[n - 1] != "distance" {
            return Err(Error::InvalidDataset(
                "population CSV needs trailing weight,distance columns".into(),
            ));
        }
        let mut pop = WeightedPopulation {
            generation: 0,
            tolerance: 0.0,
            particles: Vec::new(),
            weights: Vec::new(),
            distances: Vec::new(),
            proposals: 0,
        };
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::InvalidDataset(format!("bad number `{s}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            pop.particles.push(vals[..n - 2].to_vec());
            pop.weights.push(vals[n - 2]);
            pop.distances.push(vals[n - 1]);
        }
        if pop.is_empty() {
            return Err(Error::InvalidDataset("empty population".into()));
        }
        let total: f64 = pop.weights.iter().sum();
        pop.weights.iter_mut().for_each(|w| *w /= total);
        pop.tolerance = pop.distances.iter().copied().fold(0.0, f64::max);
        pop.proposals = pop.len() as u64;
        Ok(pop)
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// First index whose cumulative weight exceeds `u`, scaled by the total.
pub(crate) fn pick_by_cdf(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

/// Euclidean distance over all entries present in `observed`, with every
/// replicate concatenated into one vector.
pub fn distance(observed: &Dataset, simulated: &Dataset) -> Result<f64> {
    if observed.times() != simulated.times()
        || observed.columns() != simulated.columns()
        || observed.replicates().len() != simulated.replicates().len()
    {
        return Err(Error::Shape(
            "datasets differ in times, columns or replicates".into(),
        ));
    }
    let mut acc = 0.0;
    for (a, b) in observed.replicates().iter().zip(simulated.replicates()) {
        for (ra, rb) in a.iter().zip(b) {
            for (da, db) in ra.iter().zip(rb) {
                match (da, db) {
                    (Some(x), Some(y)) => acc += (x - y) * (x - y),
                    (Some(_), None) => {
                        return Err(Error::Shape(
                            "simulated data is missing an observed entry".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(acc.sqrt())
}

/// Simulates a dataset at natural-scale `theta` and returns its distance to
/// the observed data. Returns `None` as soon as the distance is known to reach
/// `eps`; an exploded simulation has distance `+inf`.
pub(crate) fn simulated_distance<R: Rng + ?Sized>(
    problem: &Problem,
    theta: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let model = &problem.model;
    let mut h = vec![0.0; model.n_reactions()];
    let times = problem.data.times();
    let mut acc = 0.0;
    for (r, rep) in problem.data.replicates().iter().enumerate() {
        let mut x = problem.initial[r].sample(rng);
        let mut t = 0.0;
        let mut events = 0;
        for (k, &tk) in times.iter().enumerate() {
            if tk > t {
                match advance(
                    model,
                    theta,
                    &mut x,
                    t,
                    tk,
                    &mut h,
                    &mut events,
                    problem.max_events,
                    rng,
                ) {
                    Ok(()) => {}
                    Err(Error::Explosion(_)) => {
                        return Ok((eps == f64::INFINITY).then_some(f64::INFINITY));
                    }
                    Err(e) => return Err(e),
                }
                t = tk;
            }
            let sim = problem.obs.corrupt(&x, rng);
            for (d, s) in rep[k].iter().zip(&sim) {
                if let Some(d) = d {
                    acc += (d - s) * (d - s);
                }
            }
            if acc.sqrt() >= eps {
                return Ok(None);
            }
        }
    }
    Ok(Some(acc.sqrt()))
}

/// Lower empirical quantile: the `ceil(q M)`-th smallest of `M` distances.
pub fn adaptive_epsilon(distances: &[f64], q: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::Config("no distances".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("quantile {q} outside (0, 1]")));
    }
    if distances.iter().all(|d| d.is_infinite()) {
        return Err(Error::AllDistancesInfinite);
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    // guard against q * M landing a hair above an integer
    let k = ((q * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    Ok(sorted[k - 1])
}

/// Perturbation-kernel covariance
/// `sum_i sum_k w_i w~_k (x~_k - x_i)(x~_k - x_i)'` between the previous
/// population `x` and the subset `x~` of it that meets the next tolerance.
pub fn optimal_kernel_cov(
    prev: &WeightedPopulation,
    subset: &[Vec<f64>],
    subset_weights: &[f64],
) -> Result<DMatrix<f64>> {
    if subset.is_empty() || subset.len() != subset_weights.len() {
        return Err(Error::Shape("subset must be non-empty and weighted".into()));
    }
    let d = prev.dim();
    if subset.iter().chain(&prev.particles).any(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: subset.iter().map(Vec::len).find(|&l| l != d).unwrap_or(d),
        });
    }
    // The double sum splits into the two weighted covariances plus the outer
    // product of the difference in means.
    let ma = crate::linalg::weighted_mean(subset, subset_weights);
    let mb = prev.mean();
    let ca = crate::linalg::weighted_cov(subset, subset_weights);
    let cb = crate::linalg::weighted_cov(&prev.particles, &prev.weights);
    let mut sigma = ca + cb;
    for i in 0..d {
        for j in 0..d {
            sigma[(i, j)] += (ma[i] - mb[i]) * (ma[j] - mb[j]);
        }
    }
    Ok(sigma)
}

/// Importance weight of a generation-`t` particle: 1 at generation 0,
/// otherwise `prior(z) / sum_j w_j K(x_j, z)`.
pub fn smc_weight(
    z: &[f64],
    prior: &Prior,
    prev: Option<&WeightedPopulation>,
    kernel: &Mvn,
) -> Result<f64> {
    match prev {
        None => Ok(1.0),
        Some(prev) => log_smc_weight(z, prior, prev, kernel, 0).map(f64::exp),
    }
}

fn log_smc_weight(
    z: &[f64],
    prior: &Prior,
    prev: &WeightedPopulation,
    kernel: &Mvn,
    index: usize,
) -> Result<f64> {
    let lp = prior.log_density(z)?;
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    let terms: Vec<f64> = prev
        .particles
        .iter()
        .zip(&prev.weights)
        .map(|(p, &w)| w.ln() + kernel.log_density(p, z))
        .collect();
    let denom = log_sum_exp(&terms);
    if denom == f64::NEG_INFINITY {
        return Err(Error::WeightUnderflow(index));
    }
    Ok(lp - denom)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcConfig {
    /// Accepted particles per generation.
    pub particles: usize,
    /// Number of generations, including generation 0.
    pub generations: usize,
    /// Tolerance quantile in (0, 1].
    pub quantile: f64,
    /// Proposal cap per generation.
    pub budget: u64,
    /// Proposals evaluated per parallel batch; affects speed only.
    pub batch: u64,
}

impl Default for AbcConfig {
    fn default() -> Self {
        Self {
            particles: 1000,
            generations: 7,
            quantile: 0.3,
            budget: 5_000_000,
            batch: 512,
        }
    }
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config("abc.particles must be at least 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::Config("abc.generations must be at least 1".into()));
        }
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::Config(format!(
                "abc.quantile {} outside (0, 1]",
                self.quantile
            )));
        }
        if self.budget < self.particles as u64 || self.batch == 0 {
            return Err(Error::Config(
                "abc.budget must cover abc.particles and abc.batch must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Output of a sequential ABC run.
#[derive(Debug, Clone)]
pub struct AbcRun {
    pub pilot_epsilon: f64,
    pub populations: Vec<WeightedPopulation>,
}

impl AbcRun {
    pub fn last(&self) -> &WeightedPopulation {
        self.populations.last().expect("at least one generation")
    }

    pub fn tolerances(&self) -> Vec<f64> {
        self.populations.iter().map(|p| p.tolerance).collect()
    }
}

struct Candidate {
    z: Vec<f64>,
    distance: Option<f64>,
}

/// Evaluates proposals in index order until `wanted` are accepted.
#[allow(clippy::too_many_arguments)]
fn fill_generation<P>(
    problem: &Problem,
    stream_domain: u64,
    eps: f64,
    wanted: usize,
    budget: u64,
    batch: u64,
    streams: &Streams,
    pool: &WorkerPool,
    propose: P,
) -> Result<(Vec<Candidate>, u64)>
where
    P: Fn(&mut crate::rng::StreamRng) -> Result<Vec<f64>> + Sync,
{
    let mut accepted = Vec::with_capacity(wanted);
    let mut next = 0u64;
    while next < budget {
        let end = (next + batch).min(budget);
        let results = pool.map(next..end, |i| -> Result<Candidate> {
            let mut rng = streams.stream(stream_domain, i);
            let z = propose(&mut rng)?;
            let theta = problem.prior.to_natural(&z);
            let distance = simulated_distance(problem, &theta, eps, &mut rng)?;
            Ok(Candidate { z, distance })
        });
        for (offset, c) in results.into_iter().enumerate() {
            let c = c?;
            // at eps = infinity every draw counts, exploded ones included
            if matches!(c.distance, Some(d) if d < eps || eps == f64::INFINITY) {
                accepted.push(c);
                if accepted.len() == wanted {
                    return Ok((accepted, next + offset as u64 + 1));
                }
            }
        }
        next = end;
    }
    Err(Error::BudgetExhausted {
        budget,
        accepted: accepted.len(),
        wanted,
    })
}

/// Rejection ABC: prior proposals accepted when their simulated data fall
/// within `eps` of the observations. Weights are uniform.
pub fn abc_rejection(
    problem: &Problem,
    eps: f64,
    n_accept: usize,
    budget: u64,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<WeightedPopulation> {
    if !(eps > 0.0) || n_accept == 0 {
        return Err(Error::Config(
            "rejection ABC needs eps > 0 and at least one acceptance".into(),
        ));
    }
    rejection_generation(problem, eps, n_accept, budget, 512, streams, pool)
}

fn rejection_generation(
    problem: &Problem,
    eps: f64,
    n: usize,
    budget: u64,
    batch: u64,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<WeightedPopulation> {
    let prior = &problem.prior;
    let (accepted, proposals) = fill_generation(
        problem,
        domain::ABC_GENERATION,
        eps,
        n,
        budget,
        batch,
        streams,
        pool,
        |rng| Ok(prior.sample(rng)),
    )?;
    Ok(WeightedPopulation {
        generation: 0,
        tolerance: eps,
        weights: vec![1.0 / n as f64; n],
        distances: accepted
            .iter()
            .map(|c| c.distance.expect("accepted"))
            .collect(),
        particles: accepted.into_iter().map(|c| c.z).collect(),
        proposals,
    })
}

/// Distances of `n` prior-predictive simulations, used to set the first tolerance.
pub fn pilot_distances(
    problem: &Problem,
    n: usize,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<Vec<f64>> {
    pool.map(0..n as u64, |i| {
        let mut rng = streams.stream(domain::ABC_PILOT, i);
        let z = problem.prior.sample(&mut rng);
        let theta = problem.prior.to_natural(&z);
        simulated_distance(problem, &theta, f64::INFINITY, &mut rng)
            .map(|d| d.expect("no early stop without a tolerance"))
    })
    .into_iter()
    .collect()
}

const MAX_SUPPORT_ATTEMPTS: usize = 1_000_000;

/// One sequential-ABC generation following `prev`.
pub fn smc_generation(
    problem: &Problem,
    prev: &WeightedPopulation,
    config: &AbcConfig,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<WeightedPopulation> {
    let eps = adaptive_epsilon(&prev.distances, config.quantile)?;
    let (subset, sub_w): (Vec<Vec<f64>>, Vec<f64>) = prev
        .particles
        .iter()
        .zip(&prev.weights)
        .zip(&prev.distances)
        .filter(|(_, &d)| d <= eps)
        .map(|((p, &w), _)| (p.clone(), w))
        .unzip();
    let total: f64 = sub_w.iter().sum();
    let sub_w: Vec<f64> = if total > 0.0 {
        sub_w.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / subset.len() as f64; subset.len()]
    };
    let sigma = optimal_kernel_cov(prev, &subset, &sub_w)?;
    let kernel = Mvn::new(&sigma)?;
    let cdf = cumulative(&prev.weights);
    let prior = &problem.prior;
    let generation = prev.generation + 1;
    let (accepted, proposals) = fill_generation(
        problem,
        domain::ABC_GENERATION + generation as u64,
        eps,
        config.particles,
        config.budget,
        config.batch,
        streams,
        pool,
        |rng| {
            for _ in 0..MAX_SUPPORT_ATTEMPTS {
                let parent = &prev.particles[pick_by_cdf(&cdf, rng.random())];
                let z = kernel.perturb(parent, rng);
                if prior.log_density_unchecked(&z) > f64::NEG_INFINITY {
                    return Ok(z);
                }
            }
            Err(Error::DegeneratePopulation(
                "perturbed particles never land in the prior support".into(),
            ))
        },
    )?;
    let log_w = accepted
        .iter()
        .enumerate()
        .map(|(i, c)| log_smc_weight(&c.z, prior, prev, &kernel, i))
        .collect::<Result<Vec<f64>>>()?;
    let norm = log_sum_exp(&log_w);
    if !norm.is_finite() {
        return Err(Error::WeightUnderflow(0));
    }
    Ok(renormalize(WeightedPopulation {
        generation,
        tolerance: eps,
        weights: log_w.iter().map(|lw| (lw - norm).exp()).collect(),
        distances: accepted
            .iter()
            .map(|c| c.distance.expect("accepted"))
            .collect(),
        particles: accepted.into_iter().map(|c| c.z).collect(),
        proposals,
    }))
}

fn renormalize(mut pop: WeightedPopulation) -> WeightedPopulation {
    let total: f64 = pop.weights.iter().sum();
    pop.weights.iter_mut().for_each(|w| *w /= total);
    pop
}

/// Sequential ABC. Generation 0 is rejection sampling at the `quantile` of a
/// pilot batch of prior-predictive distances; each later generation uses the
/// same quantile of the previous generation's distances.
pub fn abc_smc(
    problem: &Problem,
    config: &AbcConfig,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<AbcRun> {
    config.validate()?;
    let pilot = pilot_distances(problem, config.particles, streams, pool)?;
    let eps0 = adaptive_epsilon(&pilot, config.quantile)?;
    log::info!("abc: pilot tolerance {eps0}");
    let mut populations = vec![rejection_generation(
        problem,
        eps0,
        config.particles,
        config.budget,
        config.batch,
        streams,
        pool,
    )?];
    for _ in 1..config.generations {
        let next = smc_generation(
            problem,
            populations.last().expect("non-empty"),
            config,
            streams,
            pool,
        )?;
        log::info!(
            "abc: generation {} tolerance {} acceptance {:.4}",
            next.generation,
            next.tolerance,
            next.acceptance_rate()
        );
        populations.push(next);
    }
    Ok(AbcRun {
        pilot_epsilon: eps0,
        populations,
    })
}
