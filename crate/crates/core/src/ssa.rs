//! Exact simulation of the jump process by Gillespie's direct method.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{HazardSpec, Model};

/// Paths are aborted after this many events.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

/// Piecewise-constant sample path, right-continuous at event times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `times[0]` is the start time; `times[k]` for `k > 0` is the time of event `k - 1`.
    pub times: Vec<f64>,
    /// `states[k]` holds on `[times[k], times[k + 1])`.
    pub states: Vec<Vec<i64>>,
    /// Zero-based index of the reaction that fired at each event.
    pub reactions: Vec<usize>,
    pub t_end: f64,
}

impl Trajectory {
    pub fn n_events(&self) -> usize {
        self.reactions.len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    /// CSV with columns `time,reaction_index,<species>...`. Reaction indices are
    /// one-based; the initial row has an empty index.
    pub fn write_csv<W: Write>(&self, species: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "reaction_index".to_string()];
        header.extend(species.iter().cloned());
        w.write_record(&header)?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let mut rec = vec![t.to_string()];
            rec.push(if k == 0 {
                String::new()
            } else {
                (self.reactions[k - 1] + 1).to_string()
            });
            rec.extend(x.iter().map(|n| n.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::output("<csv>", e))?;
        Ok(())
    }
}

fn binomial(n: i64, k: u32) -> f64 {
    if k == 1 {
        return n.max(0) as f64;
    }
    if n < k as i64 {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k as i64 {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Fills `h` with reaction hazards at state `x`, natural-scale rates `theta`
/// and time `t`; returns their sum.
pub fn hazard_vector(
    model: &Model,
    x: &[i64],
    theta: &[f64],
    t: f64,
    h: &mut [f64],
) -> Result<f64> {
    let mut total = 0.0;
    for (i, r) in model.reactions().iter().enumerate() {
        let hi = match &r.hazard {
            HazardSpec::MassAction { param } => {
                let mut v = theta[*param];
                for &(j, p) in model.reactants(i) {
                    if v == 0.0 {
                        break;
                    }
                    v *= binomial(x[j], p);
                }
                v
            }
            HazardSpec::Expression(e) => e.eval(x, theta, t),
        };
        if !(hi >= 0.0 && hi.is_finite()) {
            return Err(Error::BadHazard {
                reaction: r.name.clone(),
                value: hi,
            });
        }
        h[i] = hi;
        total += hi;
    }
    Ok(total)
}

/// Returns the hazard vector and its sum.
pub fn hazards(model: &Model, x: &[i64], theta: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    let mut h = vec![0.0; model.n_reactions()];
    let h0 = hazard_vector(model, x, theta, t, &mut h)?;
    Ok((h, h0))
}

fn check_inputs(model: &Model, theta: &[f64], x0: &[i64]) -> Result<()> {
    if theta.len() != model.n_params() {
        return Err(Error::Dimension {
            expected: model.n_params(),
            got: theta.len(),
        });
    }
    if x0.len() != model.n_species() {
        return Err(Error::Dimension {
            expected: model.n_species(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|&n| n < 0) {
        return Err(Error::InvalidModel("negative initial state".into()));
    }
    Ok(())
}

fn pick(h: &[f64], h0: f64, u: f64) -> usize {
    let target = u * h0;
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &hj) in h.iter().enumerate() {
        if hj > 0.0 {
            acc += hj;
            last = j;
            if target < acc {
                return j;
            }
        }
    }
    last
}

fn fire(model: &Model, x: &mut [i64], j: usize) -> Result<()> {
    for &(s, d) in model.delta(j) {
        x[s] += d;
        if x[s] < 0 {
            return Err(Error::NegativeCount {
                reaction: model.reactions()[j].name.clone(),
                species: model.species()[s].clone(),
            });
        }
    }
    Ok(())
}

/// Simulates on `[t0, t_end]` recording every event.
pub fn simulate_direct<R: Rng + ?Sized>(
    model: &Model,
    theta: &[f64],
    x0: &[i64],
    t0: f64,
    t_end: f64,
    max_events: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_inputs(model, theta, x0)?;
    if !(t_end > t0) {
        return Err(Error::InvalidModel(format!(
            "t_end {t_end} must exceed t0 {t0}"
        )));
    }
    let mut h = vec![0.0; model.n_reactions()];
    let mut x = x0.to_vec();
    let mut t = t0;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x.clone()],
        reactions: Vec::new(),
        t_end,
    };
    loop {
        let h0 = hazard_vector(model, &x, theta, t, &mut h)?;
        if h0 == 0.0 {
            break;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / h0;
        t += dt;
        if t >= t_end {
            break;
        }
        let j = pick(&h, h0, rng.random::<f64>());
        fire(model, &mut x, j)?;
        if traj.reactions.len() as u64 >= max_events {
            return Err(Error::Explosion(max_events));
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.reactions.push(j);
    }
    Ok(traj)
}

/// Advances `x` in place from `t_from` to `t_to` without recording the path.
/// `events` accumulates the number of reactions fired.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance<R: Rng + ?Sized>(
    model: &Model,
    theta: &[f64],
    x: &mut [i64],
    t_from: f64,
    t_to: f64,
    h: &mut [f64],
    events: &mut u64,
    max_events: u64,
    rng: &mut R,
) -> Result<()> {
    let mut t = t_from;
    loop {
        let h0 = hazard_vector(model, x, theta, t, h)?;
        if h0 == 0.0 {
            return Ok(());
        }
        t += rng.sample::<f64, _>(Exp1) / h0;
        if t >= t_to {
            return Ok(());
        }
        let j = pick(h, h0, rng.random::<f64>());
        fire(model, x, j)?;
        *events += 1;
        if *events > max_events {
            return Err(Error::Explosion(max_events));
        }
    }
}

/// Latent states at each of `times`, simulated forward from `x0` at time `t0`
/// (without storing the full path). `times` must be non-decreasing and ≥ `t0`.
pub fn simulate_at_times<R: Rng + ?Sized>(
    model: &Model,
    theta: &[f64],
    x0: &[i64],
    t0: f64,
    times: &[f64],
    max_events: u64,
    rng: &mut R,
) -> Result<Vec<Vec<i64>>> {
    check_inputs(model, theta, x0)?;
    let mut h = vec![0.0; model.n_reactions()];
    let mut x = x0.to_vec();
    let mut t = t0;
    let mut events = 0;
    let mut out = Vec::with_capacity(times.len());
    for &tq in times {
        if tq < t {
            return Err(Error::TimeOutOfRange {
                time: tq,
                start: t,
                end: f64::INFINITY,
            });
        }
        if tq > t {
            advance(
                model,
                theta,
                &mut x,
                t,
                tq,
                &mut h,
                &mut events,
                max_events,
                rng,
            )?;
            t = tq;
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// State at each query time: the state after the latest event at or before it.
pub fn states_at_times(traj: &Trajectory, times: &[f64]) -> Result<Vec<Vec<i64>>> {
    let start = traj.start();
    times
        .iter()
        .map(|&tq| {
            if !(tq >= start && tq <= traj.t_end) {
                return Err(Error::TimeOutOfRange {
                    time: tq,
                    start,
                    end: traj.t_end,
                });
            }
            let k = traj.times.partition_point(|&te| te <= tq) - 1;
            Ok(traj.states[k].clone())
        })
        .collect()
}
