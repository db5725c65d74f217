use crate::error::{Error, Result};
use crate::model::{InitialPrior, Model, Prior};
use crate::observation::{Dataset, ObsModel};
use crate::ssa::DEFAULT_MAX_EVENTS;

/// Everything an inference run conditions on: the model, its prior, the
/// observation model, the aligned data and one initial-state prior per replicate.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Model,
    pub prior: Prior,
    pub obs: ObsModel,
    pub data: Dataset,
    pub initial: Vec<InitialPrior>,
    pub max_events: u64,
}

impl Problem {
    /// Uses the model's own priors and observation model.
    pub fn new(model: Model, data: &Dataset) -> Result<Self> {
        let prior = model.prior()?;
        let obs = model.obs_model().clone();
        Self::with_parts(model, prior, obs, data)
    }

    pub fn with_parts(model: Model, prior: Prior, obs: ObsModel, data: &Dataset) -> Result<Self> {
        if prior.dim() != model.n_params() {
            return Err(Error::Dimension {
                expected: model.n_params(),
                got: prior.dim(),
            });
        }
        if obs.is_empty() {
            return Err(Error::InvalidModel("no observed species".into()));
        }
        if data.times()[0] < 0.0 {
            return Err(Error::InvalidDataset(
                "observation times must be non-negative".into(),
            ));
        }
        let data = data.aligned_to(&obs)?;
        let initial = (0..data.replicates().len())
            .map(|r| model.initial_prior(&obs, Some((&data, r))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            prior,
            obs,
            data,
            initial,
            max_events: DEFAULT_MAX_EVENTS,
        })
    }

    /// Replaces the initial-state prior of every replicate.
    pub fn with_initial(mut self, initial: InitialPrior) -> Result<Self> {
        if initial.dim() != self.model.n_species() {
            return Err(Error::Dimension {
                expected: self.model.n_species(),
                got: initial.dim(),
            });
        }
        self.initial = vec![initial; self.data.replicates().len()];
        Ok(self)
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }
}
