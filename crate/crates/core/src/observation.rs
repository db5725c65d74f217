//! Measurement-error models and observed datasets.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{domain, Streams};
use crate::ssa::{simulate_direct, states_at_times, Trajectory, DEFAULT_MAX_EVENTS};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian { sd: f64 },
    Poisson,
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Gaussian { sd } => write!(f, "gaussian({sd})"),
            Noise::Poisson => write!(f, "poisson()"),
        }
    }
}

impl Noise {
    fn log_density(self, d: f64, x: i64) -> f64 {
        match self {
            Noise::Gaussian { sd } => {
                let z = (d - x as f64) / sd;
                -sd.ln() - LN_SQRT_2PI - 0.5 * z * z
            }
            Noise::Poisson => {
                if x <= 0 {
                    if d == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    let lambda = x as f64;
                    d * lambda.ln() - lambda - ln_gamma(d + 1.0)
                }
            }
        }
    }

    fn check(self, d: f64) -> Result<()> {
        match self {
            Noise::Gaussian { .. } if !d.is_finite() => {
                Err(Error::InvalidObservation(format!("non-finite value {d}")))
            }
            Noise::Poisson if !(d >= 0.0 && d.fract() == 0.0 && d.is_finite()) => {
                Err(Error::InvalidObservation(format!(
                    "poisson observation {d} is not a non-negative integer"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// One observed species and its error model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsChannel {
    pub species: usize,
    pub name: String,
    pub noise: Noise,
}

/// Observation model: an ordered list of observed species. Species without a
/// channel are latent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObsModel {
    channels: Vec<ObsChannel>,
}

impl ObsModel {
    pub fn new(channels: Vec<ObsChannel>) -> Result<Self> {
        for (i, c) in channels.iter().enumerate() {
            if let Noise::Gaussian { sd } = c.noise {
                if !(sd > 0.0 && sd.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "gaussian noise for `{}` needs sd > 0, got {sd}",
                        c.name
                    )));
                }
            }
            if channels[..i].iter().any(|o| o.species == c.species) {
                return Err(Error::InvalidModel(format!(
                    "species `{}` observed twice",
                    c.name
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[ObsChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    /// Log density of one observation row given the latent state. Missing
    /// entries contribute zero.
    pub fn log_obs_density(&self, row: &[Option<f64>], x: &[i64]) -> Result<f64> {
        if row.len() != self.channels.len() {
            return Err(Error::Dimension {
                expected: self.channels.len(),
                got: row.len(),
            });
        }
        for (c, d) in self.channels.iter().zip(row) {
            if c.species >= x.len() {
                return Err(Error::Dimension {
                    expected: c.species + 1,
                    got: x.len(),
                });
            }
            if let Some(d) = d {
                c.noise.check(*d)?;
            }
        }
        Ok(self.log_density_unchecked(row, x))
    }

    /// As [`ObsModel::log_obs_density`] for rows already validated against this model.
    pub(crate) fn log_density_unchecked(&self, row: &[Option<f64>], x: &[i64]) -> f64 {
        let mut total = 0.0;
        for (c, d) in self.channels.iter().zip(row) {
            if let Some(d) = d {
                total += c.noise.log_density(*d, x[c.species]);
            }
        }
        total
    }

    /// Draws one noisy observation per channel.
    pub fn corrupt<R: Rng + ?Sized>(&self, x: &[i64], rng: &mut R) -> Vec<f64> {
        self.channels
            .iter()
            .map(|c| {
                let mean = x[c.species] as f64;
                match c.noise {
                    Noise::Gaussian { sd } => {
                        Normal::new(mean, sd).expect("sd validated").sample(rng)
                    }
                    Noise::Poisson if mean <= 0.0 => 0.0,
                    Noise::Poisson => Poisson::new(mean).expect("positive rate").sample(rng),
                }
            })
            .collect()
    }

    /// Checks every present entry of `data` (already aligned) against the noise model.
    pub fn validate_dataset(&self, data: &Dataset) -> Result<()> {
        if data.columns() != self.names().as_slice() {
            return Err(Error::InvalidDataset(format!(
                "columns {:?} do not match observed species {:?}",
                data.columns(),
                self.names()
            )));
        }
        for rep in data.replicates() {
            for row in rep {
                for (c, d) in self.channels.iter().zip(row) {
                    if let Some(d) = d {
                        c.noise.check(*d)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub type Row = Vec<Option<f64>>;
pub type Replicate = Vec<Row>;

/// Observations at shared times, one matrix per replicate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    times: Vec<f64>,
    columns: Vec<String>,
    replicates: Vec<Replicate>,
}

impl Dataset {
    pub fn new(times: Vec<f64>, columns: Vec<String>, replicates: Vec<Replicate>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidDataset("no observation times".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(
                "times must be finite and strictly increasing".into(),
            ));
        }
        if replicates.is_empty() {
            return Err(Error::InvalidDataset("no replicates".into()));
        }
        for (r, rep) in replicates.iter().enumerate() {
            if rep.len() != times.len() {
                return Err(Error::InvalidDataset(format!(
                    "replicate {r} has {} rows for {} times",
                    rep.len(),
                    times.len()
                )));
            }
            if rep.iter().any(|row| row.len() != columns.len()) {
                return Err(Error::InvalidDataset(format!(
                    "replicate {r} has a ragged row"
                )));
            }
            if !rep.iter().flatten().any(Option::is_some) {
                return Err(Error::InvalidDataset(format!(
                    "replicate {r} has no observed entries"
                )));
            }
        }
        Ok(Self {
            times,
            columns,
            replicates,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn replicates(&self) -> &[Replicate] {
        &self.replicates
    }

    pub fn replicate(&self, r: usize) -> Dataset {
        Dataset {
            times: self.times.clone(),
            columns: self.columns.clone(),
            replicates: vec![self.replicates[r].clone()],
        }
    }

    pub fn n_observed(&self) -> usize {
        self.replicates
            .iter()
            .flatten()
            .flatten()
            .filter(|d| d.is_some())
            .count()
    }

    /// Combines single- or multi-replicate datasets sharing times and columns.
    pub fn merge(parts: Vec<Dataset>) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let mut first = iter
            .next()
            .ok_or_else(|| Error::InvalidDataset("nothing to merge".into()))?;
        for d in iter {
            if d.times != first.times || d.columns != first.columns {
                return Err(Error::InvalidDataset(
                    "replicates disagree on times or columns".into(),
                ));
            }
            first.replicates.extend(d.replicates);
        }
        Ok(first)
    }

    /// Copy with the named columns set to missing throughout.
    pub fn without_columns(&self, names: &[String]) -> Result<Dataset> {
        let mut out = self.clone();
        for name in names {
            let c = self
                .columns
                .iter()
                .position(|col| col == name)
                .ok_or_else(|| Error::InvalidDataset(format!("no column `{name}`")))?;
            for row in out.replicates.iter_mut().flatten() {
                row[c] = None;
            }
        }
        Ok(out)
    }

    /// Reorders columns to follow the observation model's channel order.
    /// Channels absent from the data become all-missing columns.
    pub fn aligned_to(&self, obs: &ObsModel) -> Result<Dataset> {
        for c in &self.columns {
            if !obs.channels().iter().any(|ch| &ch.name == c) {
                return Err(Error::InvalidDataset(format!(
                    "column `{c}` is not an observed species"
                )));
            }
        }
        let index: Vec<Option<usize>> = obs
            .channels()
            .iter()
            .map(|ch| self.columns.iter().position(|c| *c == ch.name))
            .collect();
        let replicates = self
            .replicates
            .iter()
            .map(|rep| {
                rep.iter()
                    .map(|row| index.iter().map(|i| i.and_then(|i| row[i])).collect())
                    .collect()
            })
            .collect();
        let aligned = Dataset::new(self.times.clone(), obs.names(), replicates)?;
        obs.validate_dataset(&aligned)?;
        Ok(aligned)
    }

    /// Reads one CSV per replicate. Header `time,<species>...`; `NA` marks missing.
    pub fn read_csv<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset> {
        let mut parts = Vec::new();
        for p in paths {
            let p = p.as_ref();
            let file = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
            parts.push(Self::from_reader(file).map_err(|e| match e {
                Error::InvalidDataset(m) => Error::InvalidDataset(format!("{}: {m}", p.display())),
                other => other,
            })?);
        }
        Self::merge(parts)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("time") {
            return Err(Error::InvalidDataset("first column must be `time`".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidDataset(format!("bad number `{s}`")))
            };
            times.push(parse(&rec[0])?);
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    if s == "NA" {
                        Ok(None)
                    } else {
                        parse(s).map(Some)
                    }
                })
                .collect::<Result<Row>>()?;
            rows.push(row);
        }
        Dataset::new(times, columns, vec![rows])
    }

    pub fn write_csv<W: std::io::Write>(&self, replicate: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.replicates[replicate]) {
            let mut rec = vec![t.to_string()];
            rec.extend(
                row.iter()
                    .map(|d| d.map_or("NA".to_string(), |v| v.to_string())),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }

    /// Total log density of all replicates given one latent path per replicate.
    pub fn log_density(&self, obs: &ObsModel, paths: &[Vec<Vec<i64>>]) -> Result<f64> {
        if paths.len() != self.replicates.len() {
            return Err(Error::Dimension {
                expected: self.replicates.len(),
                got: paths.len(),
            });
        }
        let mut total = 0.0;
        for (rep, states) in self.replicates.iter().zip(paths) {
            for (row, x) in rep.iter().zip(states) {
                total += obs.log_obs_density(row, x)?;
            }
        }
        Ok(total)
    }
}

/// A synthetic dataset together with the path and inputs that produced it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub trajectory: Trajectory,
    pub theta: Vec<f64>,
    pub seed: u64,
}

/// Simulates one path from `x0` at time 0 with natural-scale rates `theta`,
/// samples it at `times` and corrupts it with observation noise.
pub fn synthesize_dataset(
    model: &Model,
    theta: &[f64],
    x0: &[i64],
    obs: &ObsModel,
    times: &[f64],
    streams: &Streams,
) -> Result<Synthetic> {
    let t_end = *times
        .last()
        .ok_or_else(|| Error::InvalidDataset("no observation times".into()))?;
    let t_end = if t_end > 0.0 {
        t_end
    } else {
        f64::MIN_POSITIVE
    };
    let mut sim_rng = streams.stream(domain::SIMULATE, 0);
    let trajectory = simulate_direct(
        model,
        theta,
        x0,
        0.0,
        t_end,
        DEFAULT_MAX_EVENTS,
        &mut sim_rng,
    )?;
    let states = states_at_times(&trajectory, times)?;
    let mut noise_rng = streams.stream(domain::CORRUPT, 0);
    let rows = states
        .iter()
        .map(|x| {
            obs.corrupt(x, &mut noise_rng)
                .into_iter()
                .map(Some)
                .collect()
        })
        .collect();
    let dataset = Dataset::new(times.to_vec(), obs.names(), vec![rows])?;
    Ok(Synthetic {
        dataset,
        trajectory,
        theta: theta.to_vec(),
        seed: streams.master(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sd: f64) -> ObsModel {
        ObsModel::new(vec![ObsChannel {
            species: 0,
            name: "X".into(),
            noise: Noise::Gaussian { sd },
        }])
        .unwrap()
    }

    fn poisson() -> ObsModel {
        ObsModel::new(vec![ObsChannel {
            species: 0,
            name: "N".into(),
            noise: Noise::Poisson,
        }])
        .unwrap()
    }

    #[test]
    fn gaussian_density_at_mean() {
        let v = gaussian(10.0)
            .log_obs_density(&[Some(50.0)], &[50])
            .unwrap();
        assert!((v + (10.0 * (2.0 * std::f64::consts::PI).sqrt()).ln()).abs() < 1e-12);
        assert!((v - (-3.2215)).abs() < 1e-4);
    }

    #[test]
    fn gaussian_density_peaks_at_state() {
        let obs = gaussian(10.0);
        for x in [0i64, 3, 50, 400] {
            let at = |d: f64| obs.log_obs_density(&[Some(d)], &[x]).unwrap();
            let peak = at(x as f64);
            for delta in [-7.0, -0.5, 0.25, 3.0, 40.0] {
                assert!(at(x as f64 + delta) < peak);
            }
        }
    }

    #[test]
    fn poisson_zero_count() {
        let v = poisson().log_obs_density(&[Some(0.0)], &[7]).unwrap();
        assert!((v + 7.0).abs() < 1e-12);
        assert_eq!(poisson().log_obs_density(&[Some(0.0)], &[0]).unwrap(), 0.0);
        assert_eq!(
            poisson().log_obs_density(&[Some(2.0)], &[0]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(poisson().log_obs_density(&[Some(-1.0)], &[3]).is_err());
        assert!(poisson().log_obs_density(&[Some(1.5)], &[3]).is_err());
    }

    #[test]
    fn missing_and_unobserved_contribute_nothing() {
        let obs = ObsModel::new(vec![
            ObsChannel {
                species: 0,
                name: "R".into(),
                noise: Noise::Gaussian { sd: 10.0 },
            },
            ObsChannel {
                species: 1,
                name: "P".into(),
                noise: Noise::Gaussian { sd: 10.0 },
            },
        ])
        .unwrap();
        let a = obs
            .log_obs_density(&[None, Some(140.0)], &[3, 150])
            .unwrap();
        let b = obs
            .log_obs_density(&[None, Some(140.0)], &[90, 150])
            .unwrap();
        assert_eq!(a, b);
        let only_p = gaussian(10.0)
            .log_obs_density(&[Some(140.0)], &[150])
            .unwrap();
        assert_eq!(a, only_p);
    }

    #[test]
    fn replicate_densities_add() {
        let obs = gaussian(10.0);
        let times = vec![0.0, 1.0];
        let r1 = vec![vec![Some(48.0)], vec![Some(55.0)]];
        let r2 = vec![vec![Some(40.0)], vec![None]];
        let d = Dataset::new(
            times.clone(),
            vec!["X".into()],
            vec![r1.clone(), r2.clone()],
        )
        .unwrap();
        let paths = vec![vec![vec![50], vec![52]], vec![vec![41], vec![60]]];
        let total = d.log_density(&obs, &paths).unwrap();
        let a = Dataset::new(times.clone(), vec!["X".into()], vec![r1])
            .unwrap()
            .log_density(&obs, &paths[..1])
            .unwrap();
        let b = Dataset::new(times, vec!["X".into()], vec![r2])
            .unwrap()
            .log_density(&obs, &paths[1..])
            .unwrap();
        assert_eq!(total, a + b);
    }

    #[test]
    fn corrupt_is_unbiased_and_poisson_zero() {
        let mut rng = Streams::new(11).stream(0, 0);
        let obs = gaussian(10.0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| obs.corrupt(&[100], &mut rng)[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (n as f64).sqrt());
        for _ in 0..100 {
            assert_eq!(poisson().corrupt(&[0], &mut rng), vec![0.0]);
        }
    }

    #[test]
    fn zero_sd_rejected() {
        assert!(ObsModel::new(vec![ObsChannel {
            species: 0,
            name: "X".into(),
            noise: Noise::Gaussian { sd: 0.0 },
        }])
        .is_err());
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let src = "time,R,P\n0,NA,151.5\n0.5,NA,-3\n";
        let d = Dataset::from_reader(src.as_bytes()).unwrap();
        assert_eq!(d.replicates()[0][1], vec![None, Some(-3.0)]);
        let mut out = Vec::new();
        d.write_csv(0, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "time,R,P\n0,NA,151.5\n0.5,NA,-3\n"
        );
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(
            vec![1.0, 0.5],
            vec!["X".into()],
            vec![vec![vec![Some(1.0)], vec![None]]]
        )
        .is_err());
        assert!(Dataset::new(vec![0.0], vec!["X".into()], vec![vec![vec![None]]]).is_err());
        assert!(Dataset::new(vec![], vec!["X".into()], vec![vec![]]).is_err());
    }
}
