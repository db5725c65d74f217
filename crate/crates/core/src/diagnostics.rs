//! Chain and population diagnostics: autocorrelation, thinning, pooling,
//! Gelman-Rubin, posterior predictive bands, ABC against pMCMC marginals and
//! the parallel-chains speedup law. Tables are plain CSV, one row per lag,
//! time or parameter.

use std::io::Write;

use crate::abc::WeightedPopulation;
use crate::error::{Error, Result};
use crate::pmcmc::ChainRecord;
use crate::pool::WorkerPool;
use crate::problem::Problem;
use crate::rng::{domain, Streams};
use crate::ssa::simulate_at_times;

/// Sample autocorrelation `c_k / c_0` for lags `0..=max_lag`, with
/// `c_k = (1/n) sum_t (x_t - m)(x_{t+k} - m)`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::Config(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let m = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - m).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>();
    if c0 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            dev[..n - k]
                .iter()
                .zip(&dev[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / c0
        })
        .collect())
}

/// Every `k`-th element starting from the first.
pub fn thin_slice<T: Clone>(xs: &[T], k: usize) -> Vec<T> {
    xs.iter().step_by(k.max(1)).cloned().collect()
}

/// Keeps every `k`-th retained sample of a chain, starting at index 0.
pub fn thin(record: &ChainRecord, k: usize) -> Result<ChainRecord> {
    if k == 0 {
        return Err(Error::Config("thinning factor must be at least 1".into()));
    }
    Ok(ChainRecord {
        iterations: thin_slice(&record.iterations, k),
        samples: thin_slice(&record.samples, k),
        log_liks: thin_slice(&record.log_liks, k),
        accepted: thin_slice(&record.accepted, k),
        ..record.clone()
    })
}

/// Potential scale reduction factor from equal-length series.
pub fn gelman_rubin_series(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Config("Gelman-Rubin needs at least 2 chains".into()));
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config(
            "Gelman-Rubin needs equal chain lengths of at least 10".into(),
        ));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// R-hat of parameter `p` across chains, truncated to the shortest chain.
pub fn gelman_rubin(chains: &[ChainRecord], p: usize) -> Result<f64> {
    let n = chains.iter().map(ChainRecord::len).min().unwrap_or(0);
    let series: Vec<Vec<f64>> = chains.iter().map(|c| c.column(p)[..n].to_vec()).collect();
    gelman_rubin_series(&series)
}

/// `(b + n) / (b + n/N)`: speedup of `N` parallel chains that each repeat a
/// burn-in of `b` and share `n` stored samples.
pub fn speedup(processors: u64, burn_in: u64, stored: u64) -> Result<f64> {
    if processors == 0 || stored == 0 {
        return Err(Error::Config("speedup needs N >= 1 and n >= 1".into()));
    }
    let (nf, b, n) = (processors as f64, burn_in as f64, stored as f64);
    // (b + n) / (b + n / N) rearranged so that b = 0 gives N exactly
    Ok((b + n) * nf / (b * nf + n))
}

/// Retained samples from several chains, concatenated in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledPosterior {
    pub names: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub chain: Vec<usize>,
}

impl PooledPosterior {
    pub fn new(names: Vec<String>, chains: &[ChainRecord]) -> Self {
        let mut samples = Vec::new();
        let mut chain = Vec::new();
        for c in chains {
            samples.extend(c.samples.iter().cloned());
            chain.extend(std::iter::repeat_n(c.chain, c.len()));
        }
        Self {
            names,
            samples,
            chain,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[p]).collect()
    }

    /// Central interval with lower order statistics at `alpha/2` and `1 - alpha/2`.
    pub fn interval(&self, p: usize, alpha: f64) -> (f64, f64) {
        let mut col = self.column(p);
        col.sort_by(f64::total_cmp);
        (
            order_quantile(&col, alpha / 2.0),
            order_quantile(&col, 1.0 - alpha / 2.0),
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (c, s) in self.chain.iter().zip(&self.samples) {
            let mut rec = vec![c.to_string()];
            rec.extend(s.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }
}

/// Lower order statistic: the `ceil(q n)`-th smallest of sorted values.
pub fn order_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[k - 1]
}

/// Predictive quantiles of one observed species at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveRow {
    pub time: f64,
    pub species: String,
    /// 2.5%, 50% and 97.5% of the latent count.
    pub latent: [f64; 3],
    /// The same quantiles after observation noise.
    pub observed: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTable {
    pub rows: Vec<PredictiveRow>,
    pub draws: usize,
    /// Draws dropped because the simulation exploded.
    pub exploded: usize,
}

impl PredictiveTable {
    /// Fraction of present observations of `replicate` inside the observed
    /// 95% band. The table must have been built at the data's times.
    pub fn coverage(&self, problem: &Problem, replicate: usize) -> Result<f64> {
        let channels = problem.obs.len();
        let times = problem.data.times();
        if self.rows.len() != times.len() * channels
            || self
                .rows
                .iter()
                .step_by(channels)
                .map(|r| r.time)
                .ne(times.iter().copied())
        {
            return Err(Error::Shape(
                "predictive table is not at the data times".into(),
            ));
        }
        let mut inside = 0usize;
        let mut total = 0usize;
        for (k, row) in problem.data.replicates()[replicate].iter().enumerate() {
            for (c, d) in row.iter().enumerate() {
                if let Some(d) = d {
                    let band = &self.rows[k * channels + c].observed;
                    total += 1;
                    inside += usize::from(*d >= band[0] && *d <= band[2]);
                }
            }
        }
        Ok(inside as f64 / total.max(1) as f64)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "time",
            "species",
            "latent_q025",
            "latent_q50",
            "latent_q975",
            "obs_q025",
            "obs_q50",
            "obs_q975",
        ])?;
        for r in &self.rows {
            let mut rec = vec![r.time.to_string(), r.species.clone()];
            rec.extend(r.latent.iter().chain(&r.observed).map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }
}

const BAND: [f64; 3] = [0.025, 0.5, 0.975];

/// Latent states and noisy observations of one predictive draw.
type PredictiveDraw = (Vec<Vec<i64>>, Vec<Vec<f64>>);

/// Posterior predictive bands at `times` for the initial conditions of
/// `replicate`. Draw `m` picks a pooled sample uniformly and simulates on
/// stream `(PREDICTIVE, m)`.
pub fn posterior_predictive(
    problem: &Problem,
    pooled: &PooledPosterior,
    replicate: usize,
    times: &[f64],
    draws: usize,
    streams: &Streams,
    pool: &WorkerPool,
) -> Result<PredictiveTable> {
    if draws == 0 || pooled.is_empty() || times.is_empty() {
        return Err(Error::Config(
            "predictive needs draws, samples and times".into(),
        ));
    }
    if replicate >= problem.initial.len() {
        return Err(Error::InvalidDataset(format!("no replicate {replicate}")));
    }
    let results = pool.map(0..draws as u64, |m| -> Result<Option<PredictiveDraw>> {
        let mut rng = streams.stream(domain::PREDICTIVE, m);
        let i = rand::Rng::random_range(&mut rng, 0..pooled.len());
        let theta = problem.prior.to_natural(&pooled.samples[i]);
        let x0 = problem.initial[replicate].sample(&mut rng);
        match simulate_at_times(
            &problem.model,
            &theta,
            &x0,
            0.0,
            times,
            problem.max_events,
            &mut rng,
        ) {
            Ok(states) => {
                let noisy = states
                    .iter()
                    .map(|x| problem.obs.corrupt(x, &mut rng))
                    .collect();
                Ok(Some((states, noisy)))
            }
            Err(Error::Explosion(_)) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut kept = Vec::with_capacity(draws);
    let mut exploded = 0;
    for r in results {
        match r? {
            Some(v) => kept.push(v),
            None => exploded += 1,
        }
    }
    if kept.is_empty() {
        return Err(Error::Explosion(problem.max_events));
    }
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        for (c, ch) in problem.obs.channels().iter().enumerate() {
            let mut latent: Vec<f64> = kept.iter().map(|(s, _)| s[k][ch.species] as f64).collect();
            let mut observed: Vec<f64> = kept.iter().map(|(_, o)| o[k][c]).collect();
            latent.sort_by(f64::total_cmp);
            observed.sort_by(f64::total_cmp);
            rows.push(PredictiveRow {
                time: t,
                species: ch.name.clone(),
                latent: BAND.map(|q| order_quantile(&latent, q)),
                observed: BAND.map(|q| order_quantile(&observed, q)),
            });
        }
    }
    Ok(PredictiveTable {
        rows,
        draws: kept.len(),
        exploded,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic between weighted empirical CDFs.
/// Weights need not be normalised.
pub fn ks_weighted(x: &[f64], wx: &[f64], y: &[f64], wy: &[f64]) -> f64 {
    let sorted = |v: &[f64], w: &[f64]| {
        let total: f64 = w.iter().sum();
        let mut p: Vec<(f64, f64)> = v.iter().zip(w).map(|(a, b)| (*a, b / total)).collect();
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        p
    };
    let (a, b) = (sorted(x, wx), sorted(y, wy));
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == next {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == next {
            fb += b[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d.min(1.0)
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
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

/// Asymptotic p-value `P(D > d)` of a KS statistic with effective sample size `n`.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Marginal summaries of one parameter under weighted ABC and pooled pMCMC.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: String,
    pub abc_mean: f64,
    pub abc_var: f64,
    pub pmcmc_mean: f64,
    pub pmcmc_var: f64,
    pub ks: f64,
}

fn weighted_moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let m = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let v = x
        .iter()
        .zip(w)
        .map(|(a, b)| b * (a - m) * (a - m))
        .sum::<f64>()
        / total;
    (m, v)
}

/// Per-parameter means, variances and KS distance between the weighted ABC
/// population and the pooled chains.
pub fn compare_abc_pmcmc(
    population: &WeightedPopulation,
    pooled: &PooledPosterior,
) -> Result<Vec<Comparison>> {
    if population.is_empty() || pooled.is_empty() {
        return Err(Error::Config("comparison needs non-empty samples".into()));
    }
    if population.dim() != pooled.names.len() {
        return Err(Error::Dimension {
            expected: pooled.names.len(),
            got: population.dim(),
        });
    }
    let uniform = vec![1.0; pooled.len()];
    Ok(pooled
        .names
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let a: Vec<f64> = population.particles.iter().map(|s| s[p]).collect();
            let b = pooled.column(p);
            let (abc_mean, abc_var) = weighted_moments(&a, &population.weights);
            let (pmcmc_mean, pmcmc_var) = weighted_moments(&b, &uniform);
            Comparison {
                name: name.clone(),
                abc_mean,
                abc_var,
                pmcmc_mean,
                pmcmc_var,
                ks: ks_weighted(&a, &population.weights, &b, &uniform),
            }
        })
        .collect())
}

pub fn write_comparison_csv<W: Write>(rows: &[Comparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "parameter",
        "abc_mean",
        "abc_var",
        "pmcmc_mean",
        "pmcmc_var",
        "ks",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.abc_mean.to_string(),
            r.abc_var.to_string(),
            r.pmcmc_mean.to_string(),
            r.pmcmc_var.to_string(),
            r.ks.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::output("<csv>", e))?;
    Ok(())
}

/// ACF table with one row per lag and one column per parameter.
pub fn write_acf_csv<W: Write>(names: &[String], acf: &[Vec<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["lag".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    let lags = acf.iter().map(Vec::len).min().unwrap_or(0);
    for k in 0..lags {
        let mut rec = vec![k.to_string()];
        rec.extend(acf.iter().map(|a| a[k].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::output("<csv>", e))?;
    Ok(())
}

/// Per-parameter convergence summary: R-hat, pooled mean and central 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub rhat: Option<f64>,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

pub fn summarize(chains: &[ChainRecord], pooled: &PooledPosterior) -> Vec<ParameterSummary> {
    pooled
        .names
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let col = pooled.column(p);
            let (q025, q975) = pooled.interval(p, 0.05);
            ParameterSummary {
                name: name.clone(),
                rhat: gelman_rubin(chains, p).ok(),
                mean: col.iter().sum::<f64>() / col.len() as f64,
                q025,
                q975,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[ParameterSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "rhat", "mean", "q025", "q975"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.rhat.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            r.mean.to_string(),
            r.q025.to_string(),
            r.q975.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::output("<csv>", e))?;
    Ok(())
}
