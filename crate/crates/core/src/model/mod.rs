//! Reaction networks, their text format, and priors.

mod expr;
mod parser;
mod prior;

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

pub use expr::{BinOp, Expr, Func, Var};
pub use parser::{parse_model, render_model};
pub use prior::{Marginal, Prior, Scale};

use crate::error::{Error, Result};
use crate::observation::{Dataset, ObsModel};

#[derive(Debug, Clone, PartialEq)]
pub enum HazardSpec {
    /// `theta[param] * prod_j C(x_j, pre_j)`.
    MassAction {
        param: usize,
    },
    Expression(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Reactant coefficients, one per species (a row of the pre matrix).
    pub pre: Vec<u32>,
    /// Product coefficients, one per species (a row of the post matrix).
    pub post: Vec<u32>,
    pub hazard: HazardSpec,
}

/// How the initial count of a species is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Fixed(i64),
    Random(Marginal),
    /// Taken from the first observation of the replicate being analysed.
    Observed,
    /// Another species' initial count plus a random offset.
    Offset {
        species: usize,
        name: String,
        offset: Marginal,
    },
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Fixed(n) => write!(f, "= {n}"),
            InitSpec::Random(m) => write!(f, "~ {m}"),
            InitSpec::Observed => write!(f, "= observed"),
            InitSpec::Offset { name, offset, .. } => write!(f, "~ {name} + {offset}"),
        }
    }
}

/// A validated stochastic kinetic model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    species: Vec<String>,
    initial: Vec<InitSpec>,
    params: Vec<String>,
    priors: Vec<Option<Marginal>>,
    reactions: Vec<Reaction>,
    obs: ObsModel,
    // derived from `reactions`
    reactants: Vec<Vec<(usize, u32)>>,
    deltas: Vec<Vec<(usize, i64)>>,
}

impl Model {
    pub fn new(
        species: Vec<String>,
        initial: Vec<InitSpec>,
        params: Vec<String>,
        priors: Vec<Option<Marginal>>,
        reactions: Vec<Reaction>,
        obs: ObsModel,
    ) -> Result<Self> {
        let u = species.len();
        if u == 0 {
            return Err(Error::InvalidModel("no species".into()));
        }
        if reactions.is_empty() {
            return Err(Error::InvalidModel("no reactions".into()));
        }
        if initial.len() != u {
            return Err(Error::Dimension {
                expected: u,
                got: initial.len(),
            });
        }
        if priors.len() != params.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                got: priors.len(),
            });
        }
        check_unique(&species, "species")?;
        check_unique(&params, "parameter")?;
        for (i, r) in reactions.iter().enumerate() {
            if reactions[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::DuplicateReaction(r.name.clone()));
            }
            if r.pre.len() != u || r.post.len() != u {
                return Err(Error::Shape(format!(
                    "reaction `{}` coefficients do not span {u} species",
                    r.name
                )));
            }
            let mut used = Vec::new();
            match &r.hazard {
                HazardSpec::MassAction { param } => used.push(*param),
                HazardSpec::Expression(e) => e.params(&mut used),
            }
            if let Some(&bad) = used.iter().find(|&&p| p >= params.len()) {
                return Err(Error::UndeclaredParameter(format!("#{bad}")));
            }
        }
        for (i, init) in initial.iter().enumerate() {
            match init {
                InitSpec::Fixed(n) if *n < 0 => {
                    return Err(Error::InvalidModel(format!(
                        "negative initial count for `{}`",
                        species[i]
                    )))
                }
                InitSpec::Random(m) | InitSpec::Offset { offset: m, .. } if !m.is_discrete() => {
                    return Err(Error::InvalidModel(format!(
                        "initial count for `{}` needs a discrete distribution",
                        species[i]
                    )))
                }
                InitSpec::Offset { species: s, .. } if *s >= i => {
                    return Err(Error::InvalidModel(format!(
                        "initial count for `{}` must offset an earlier species",
                        species[i]
                    )))
                }
                InitSpec::Observed if !obs.channels().iter().any(|c| c.species == i) => {
                    return Err(Error::InvalidModel(format!(
                        "`{}` is initialised from data but never observed",
                        species[i]
                    )))
                }
                _ => {}
            }
            if let InitSpec::Random(m) | InitSpec::Offset { offset: m, .. } = init {
                m.validate()?;
            }
        }
        for m in priors.iter().flatten() {
            m.validate()?;
        }
        for c in obs.channels() {
            if c.species >= u || species[c.species] != c.name {
                return Err(Error::UnknownSpecies(c.name.clone()));
            }
        }
        let reactants = reactions
            .iter()
            .map(|r| {
                r.pre
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(j, &p)| (j, p))
                    .collect()
            })
            .collect();
        let deltas = reactions
            .iter()
            .map(|r| {
                (0..u)
                    .map(|j| (j, r.post[j] as i64 - r.pre[j] as i64))
                    .filter(|&(_, d)| d != 0)
                    .collect()
            })
            .collect();
        Ok(Self {
            species,
            initial,
            params,
            priors,
            reactions,
            obs,
            reactants,
            deltas,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn initial(&self) -> &[InitSpec] {
        &self.initial
    }

    pub fn priors(&self) -> &[Option<Marginal>] {
        &self.priors
    }

    pub fn obs_model(&self) -> &ObsModel {
        &self.obs
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// The joint prior; fails if any parameter lacks one.
    pub fn prior(&self) -> Result<Prior> {
        let marginals = self
            .params
            .iter()
            .zip(&self.priors)
            .map(|(name, m)| m.clone().ok_or_else(|| Error::MissingPrior(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        Prior::new(self.params.clone(), marginals)
    }

    /// Pre-reaction coefficients, `v x u`.
    pub fn pre_matrix(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.n_reactions(), self.n_species(), |i, j| {
            self.reactions[i].pre[j] as i64
        })
    }

    /// Post-reaction coefficients, `v x u`.
    pub fn post_matrix(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.n_reactions(), self.n_species(), |i, j| {
            self.reactions[i].post[j] as i64
        })
    }

    /// Stoichiometry matrix `S = (Q - P)'`, `u x v`.
    pub fn stoichiometry(&self) -> DMatrix<i64> {
        stoichiometry(&self.pre_matrix(), &self.post_matrix()).expect("validated shapes")
    }

    pub(crate) fn reactants(&self, i: usize) -> &[(usize, u32)] {
        &self.reactants[i]
    }

    pub(crate) fn delta(&self, i: usize) -> &[(usize, i64)] {
        &self.deltas[i]
    }

    /// Initial-state distribution for the analysis of one replicate of `data`.
    /// `data` must be aligned to `obs`. Without data, `observed` species fail.
    pub fn initial_prior(
        &self,
        obs: &ObsModel,
        data: Option<(&Dataset, usize)>,
    ) -> Result<InitialPrior> {
        let mut observed = vec![None; self.n_species()];
        for (i, init) in self.initial.iter().enumerate() {
            if *init != InitSpec::Observed {
                continue;
            }
            let (data, r) = data.ok_or_else(|| {
                Error::InvalidModel(format!(
                    "`{}` is initialised from data but no data given",
                    self.species[i]
                ))
            })?;
            let col = obs
                .channels()
                .iter()
                .position(|c| c.species == i)
                .ok_or_else(|| {
                    Error::InvalidModel(format!("`{}` is not observed", self.species[i]))
                })?;
            if data.times()[0] != 0.0 {
                return Err(Error::InvalidDataset(
                    "initial counts from data need an observation at t = 0".into(),
                ));
            }
            let value = data.replicates()[r][0][col].ok_or_else(|| {
                Error::InvalidDataset(format!(
                    "replicate {r} has no t = 0 value for `{}`",
                    self.species[i]
                ))
            })?;
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::InvalidDataset(format!(
                    "initial count {value} is not a count"
                )));
            }
            observed[i] = Some(value as i64);
        }
        let specs = self
            .initial
            .iter()
            .zip(&observed)
            .map(|(s, o)| match (s, o) {
                (InitSpec::Observed, Some(v)) => InitSpec::Fixed(*v),
                (s, _) => s.clone(),
            })
            .collect();
        Ok(InitialPrior { specs })
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if n == "t" {
            return Err(Error::InvalidModel(format!(
                "`t` is reserved for time and cannot name a {what}"
            )));
        }
        if names[..i].contains(n) {
            return Err(Error::InvalidModel(format!("duplicate {what} `{n}`")));
        }
    }
    Ok(())
}

/// Distribution of the initial state vector with data-dependent entries resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPrior {
    specs: Vec<InitSpec>,
}

impl InitialPrior {
    pub fn fixed(x0: &[i64]) -> Self {
        Self {
            specs: x0.iter().map(|&n| InitSpec::Fixed(n)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let mut x = vec![0i64; self.specs.len()];
        for (i, s) in self.specs.iter().enumerate() {
            x[i] = match s {
                InitSpec::Fixed(n) => *n,
                InitSpec::Random(m) => m.sample(rng).max(0.0) as i64,
                InitSpec::Offset {
                    species, offset, ..
                } => x[*species] + offset.sample(rng) as i64,
                InitSpec::Observed => unreachable!("resolved at construction"),
            };
        }
        x
    }
}

/// `S = (Q - P)'` for `v x u` pre and post matrices.
pub fn stoichiometry(pre: &DMatrix<i64>, post: &DMatrix<i64>) -> Result<DMatrix<i64>> {
    if pre.shape() != post.shape() {
        return Err(Error::Shape(format!(
            "pre is {:?} but post is {:?}",
            pre.shape(),
            post.shape()
        )));
    }
    if pre.iter().chain(post.iter()).any(|&c| c < 0) {
        return Err(Error::Shape("negative coefficient".into()));
    }
    Ok((post - pre).transpose())
}
