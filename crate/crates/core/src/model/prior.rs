//! Marginal prior distributions for rate parameters and initial counts.
//!
//! Each parameter lives on a *sampling scale*: the log scale for
//! `log_uniform` priors, the natural scale otherwise. Samplers propose and
//! store values on that scale and densities are evaluated there.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Geometric, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Natural,
    Log,
}

impl Scale {
    pub fn to_natural(self, z: f64) -> f64 {
        match self {
            Scale::Natural => z,
            Scale::Log => z.exp(),
        }
    }

    pub fn from_natural(self, x: f64) -> f64 {
        match self {
            Scale::Natural => x,
            Scale::Log => x.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// `x ~ U(low, high)`.
    Uniform {
        low: f64,
        high: f64,
    },
    /// `log x ~ U(low, high)`; sampled on the log scale.
    LogUniform {
        low: f64,
        high: f64,
    },
    /// Gamma with mean `shape / rate`.
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Exponential with mean `1 / rate`.
    Exponential {
        rate: f64,
    },
    Poisson {
        rate: f64,
    },
    /// Number of failures before the first success, support {0, 1, ...}.
    Geometric {
        p: f64,
    },
    PointMass {
        value: f64,
    },
    /// `offset + X` with `X` drawn from `base`.
    Shifted {
        offset: f64,
        base: Box<Marginal>,
    },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Marginal::Uniform { low, high } | Marginal::LogUniform { low, high } => {
                low.is_finite() && high.is_finite() && low < high
            }
            Marginal::Gamma { shape, rate } => {
                *shape > 0.0 && *rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            Marginal::Exponential { rate } | Marginal::Poisson { rate } => {
                *rate > 0.0 && rate.is_finite()
            }
            Marginal::Geometric { p } => *p > 0.0 && *p <= 1.0,
            Marginal::PointMass { value } => value.is_finite(),
            Marginal::Shifted { offset, base } => {
                base.validate()?;
                offset.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "invalid distribution arguments in {self}"
            )))
        }
    }

    pub fn scale(&self) -> Scale {
        match self {
            Marginal::LogUniform { .. } => Scale::Log,
            _ => Scale::Natural,
        }
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            Marginal::Poisson { .. } | Marginal::Geometric { .. } | Marginal::PointMass { .. } => {
                true
            }
            Marginal::Shifted { base, .. } => base.is_discrete(),
            _ => false,
        }
    }

    /// Log density (or log pmf for discrete families) on the sampling scale.
    /// Returns `-inf` outside the support.
    pub fn log_density(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NEG_INFINITY;
        }
        match self {
            Marginal::Uniform { low, high } | Marginal::LogUniform { low, high } => {
                if z >= *low && z <= *high {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Gamma { shape, rate } => {
                if z <= 0.0 || !z.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * z.ln() - rate * z
                }
            }
            Marginal::Exponential { rate } => {
                if z < 0.0 || !z.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * z
                }
            }
            Marginal::Poisson { rate } => match as_count(z) {
                Some(k) => k * rate.ln() - rate - ln_gamma(k + 1.0),
                None => f64::NEG_INFINITY,
            },
            Marginal::Geometric { p } => match as_count(z) {
                Some(k) if *p == 1.0 => {
                    if k == 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Some(k) => p.ln() + k * (1.0 - p).ln(),
                None => f64::NEG_INFINITY,
            },
            Marginal::PointMass { value } => {
                if z == *value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Shifted { offset, base } => base.log_density(z - offset),
        }
    }

    /// Draws a value on the sampling scale.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Uniform { low, high } | Marginal::LogUniform { low, high } => {
                low + (high - low) * rng.random::<f64>()
            }
            Marginal::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated")
                .sample(rng),
            Marginal::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            Marginal::Poisson { rate } => Poisson::new(*rate).expect("validated").sample(rng),
            Marginal::Geometric { p } => Geometric::new(*p).expect("validated").sample(rng) as f64,
            Marginal::PointMass { value } => *value,
            Marginal::Shifted { offset, base } => offset + base.sample(rng),
        }
    }

    pub(crate) fn name(&self) -> &'static str {
        match self {
            Marginal::Uniform { .. } => "uniform",
            Marginal::LogUniform { .. } => "log_uniform",
            Marginal::Gamma { .. } => "gamma",
            Marginal::Exponential { .. } => "exponential",
            Marginal::Poisson { .. } => "poisson",
            Marginal::Geometric { .. } => "geometric",
            Marginal::PointMass { .. } => "point",
            Marginal::Shifted { .. } => "shifted",
        }
    }
}

fn as_count(z: f64) -> Option<f64> {
    (z >= 0.0 && z.fract() == 0.0 && z.is_finite()).then_some(z)
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name();
        match self {
            Marginal::Uniform { low, high } | Marginal::LogUniform { low, high } => {
                write!(f, "{name}({low}, {high})")
            }
            Marginal::Gamma { shape, rate } => write!(f, "{name}({shape}, {rate})"),
            Marginal::Exponential { rate } | Marginal::Poisson { rate } => {
                write!(f, "{name}({rate})")
            }
            Marginal::Geometric { p } => write!(f, "{name}({p})"),
            Marginal::PointMass { value } => write!(f, "{name}({value})"),
            Marginal::Shifted { offset, base } => write!(f, "{name}({offset}, {base})"),
        }
    }
}

/// Independent product prior over the full parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    names: Vec<String>,
    marginals: Vec<Marginal>,
}

impl Prior {
    pub fn new(names: Vec<String>, marginals: Vec<Marginal>) -> Result<Self> {
        if names.len() != marginals.len() {
            return Err(Error::Dimension {
                expected: names.len(),
                got: marginals.len(),
            });
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { names, marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn scales(&self) -> Vec<Scale> {
        self.marginals.iter().map(Marginal::scale).collect()
    }

    /// Column names for sampling-scale values: `log_<name>` for log-scale parameters.
    pub fn sampling_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.marginals)
            .map(|(n, m)| match m.scale() {
                Scale::Log => format!("log_{n}"),
                Scale::Natural => n.clone(),
            })
            .collect()
    }

    /// Sum of marginal log densities at `z` (sampling scale).
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(self.log_density_unchecked(z))
    }

    pub(crate) fn log_density_unchecked(&self, z: &[f64]) -> f64 {
        let mut total = 0.0;
        for (m, &zi) in self.marginals.iter().zip(z) {
            total += m.log_density(zi);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }

    /// Maps a sampling-scale vector to natural rate values.
    pub fn to_natural(&self, z: &[f64]) -> Vec<f64> {
        self.marginals
            .iter()
            .zip(z)
            .map(|(m, &zi)| m.scale().to_natural(zi))
            .collect()
    }

    pub fn from_natural(&self, theta: &[f64]) -> Vec<f64> {
        self.marginals
            .iter()
            .zip(theta)
            .map(|(m, &x)| m.scale().from_natural(x))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        // composite Simpson
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        let cases = [
            (
                Marginal::Uniform {
                    low: -1.0,
                    high: 3.0,
                },
                -1.0,
                3.0,
            ),
            (
                Marginal::LogUniform {
                    low: -8.0,
                    high: 8.0,
                },
                -8.0,
                8.0,
            ),
            (
                Marginal::Gamma {
                    shape: 19.36,
                    rate: 44.0,
                },
                1e-9,
                3.0,
            ),
            (
                Marginal::Gamma {
                    shape: 27.04,
                    rate: 52.0,
                },
                1e-9,
                3.0,
            ),
            (Marginal::Exponential { rate: 0.01 }, 0.0, 4000.0),
            (Marginal::Exponential { rate: 1.0 }, 0.0, 60.0),
        ];
        for (m, a, b) in cases {
            let total = integrate(|x| m.log_density(x).exp(), a, b, 200_000);
            assert!((total - 1.0).abs() < 1e-6, "{m}: {total}");
        }
    }

    #[test]
    fn discrete_pmfs_sum_to_one() {
        let cases = [
            Marginal::Poisson { rate: 50.0 },
            Marginal::Poisson { rate: 0.3 },
            Marginal::Geometric { p: 0.03 },
            Marginal::Shifted {
                offset: 12.0,
                base: Box::new(Marginal::Geometric { p: 0.5 }),
            },
            Marginal::PointMass { value: 4.0 },
        ];
        for m in cases {
            let total: f64 = (0..5000).map(|k| m.log_density(k as f64).exp()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{m}: {total}");
        }
    }

    #[test]
    fn outside_support_is_negative_infinity() {
        assert_eq!(
            Marginal::LogUniform {
                low: -8.0,
                high: 8.0
            }
            .log_density(9.0),
            f64::NEG_INFINITY
        );
        assert_eq!(
            Marginal::Exponential { rate: 2.0 }.log_density(-1.0),
            f64::NEG_INFINITY
        );
        assert_eq!(
            Marginal::Gamma {
                shape: 2.0,
                rate: 2.0
            }
            .log_density(0.0),
            f64::NEG_INFINITY
        );
        assert_eq!(
            Marginal::Poisson { rate: 2.0 }.log_density(1.5),
            f64::NEG_INFINITY
        );
        assert_eq!(
            Marginal::Geometric { p: 0.2 }.log_density(-1.0),
            f64::NEG_INFINITY
        );
        assert_eq!(
            Marginal::PointMass { value: 1.0 }.log_density(1.1),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn product_prior_examples() {
        let prior = Prior::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Marginal::LogUniform {
                    low: -8.0,
                    high: 8.0
                };
                3
            ],
        )
        .unwrap();
        let lp = prior.log_density(&[0.0, -5.30, -0.51]).unwrap();
        assert!((lp - (-8.3178)).abs() < 1e-4);
        assert!((lp + 3.0 * 16f64.ln()).abs() < 1e-12);
        assert_eq!(
            prior.log_density(&[9.0, 0.0, 0.0]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            prior.log_density(&[0.0]),
            Err(Error::Dimension { .. })
        ));

        let lp = Marginal::Exponential { rate: 0.01 }.log_density(100.0);
        assert!((lp - (0.01f64.ln() - 1.0)).abs() < 1e-12);
        assert!((lp - (-5.6052)).abs() < 1e-4);
    }

    #[test]
    fn sample_means() {
        let mut rng = Streams::new(3).stream(0, 0);
        let n = 20_000;
        let cases = [
            (
                Marginal::Gamma {
                    shape: 19.36,
                    rate: 44.0,
                },
                0.44,
            ),
            (Marginal::Exponential { rate: 0.1 }, 10.0),
            (Marginal::Geometric { p: 0.03 }, 0.97 / 0.03),
            (Marginal::Poisson { rate: 50.0 }, 50.0),
        ];
        for (m, mean) in cases {
            let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
            let mu = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(
                (mu - mean).abs() < 4.0 * (var / n as f64).sqrt(),
                "{m}: {mu}"
            );
        }
    }
}
