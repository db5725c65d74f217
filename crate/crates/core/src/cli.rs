//! Command-line front end: TOML run configs, run directories with a
//! reproducibility manifest, and the `simulate | abc | pmcmc | hybrid |
//! diagnose` commands.
//!
//! Relative paths in a config file are resolved against the file's directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::abc::{abc_smc, AbcConfig, WeightedPopulation};
use crate::diagnostics::{
    autocorrelation, compare_abc_pmcmc, posterior_predictive, summarize, write_acf_csv,
    write_comparison_csv, write_summary_csv, PooledPosterior,
};
use crate::error::{Error, Result};
use crate::model::{parse_model, Model};
use crate::observation::{synthesize_dataset, Dataset};
use crate::pmcmc::{chains_from_population, ChainRecord, PmcmcConfig, PmcmcRun};
use crate::pool::WorkerPool;
use crate::problem::Problem;
use crate::rng::{domain, Streams, RNG_ALGORITHM};
use crate::ssa::DEFAULT_MAX_EVENTS;

#[derive(Debug, Parser)]
#[command(
    name = "stochkin",
    version,
    about = "Hybrid ABC / particle MCMC inference for stochastic kinetic models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Run directory; overrides the config.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Print the effective configuration, defaults included, and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and a noisy dataset.
    Simulate,
    /// Sequential ABC.
    Abc,
    /// Particle MCMC chains started from an ABC population.
    Pmcmc,
    /// ABC followed by particle MCMC, with diagnostics.
    Hybrid,
    /// Diagnostics for the chains in an existing run directory.
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Abc => "abc",
            Command::Pmcmc => "pmcmc",
            Command::Hybrid => "hybrid",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub model: PathBuf,
    /// One CSV per replicate experiment.
    pub data: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// ABC population CSV that seeds the `pmcmc` command.
    pub population: Option<PathBuf>,
    pub max_events: u64,
    pub simulate: SimulateConfig,
    pub abc: AbcConfig,
    pub pmcmc: PmcmcConfig,
    pub diagnose: DiagnoseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 1,
            model: PathBuf::new(),
            data: Vec::new(),
            out_dir: PathBuf::from("run"),
            population: None,
            max_events: DEFAULT_MAX_EVENTS,
            simulate: SimulateConfig::default(),
            abc: AbcConfig::default(),
            pmcmc: PmcmcConfig::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Natural-scale rate parameters in declaration order.
    pub theta: Vec<f64>,
    /// Initial state per replicate; drawn from the model when empty.
    pub x0: Vec<Vec<i64>>,
    pub times: Vec<f64>,
    pub replicates: usize,
    /// Observed species written as all-missing columns.
    pub discard: Vec<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            theta: Vec::new(),
            x0: Vec::new(),
            times: Vec::new(),
            replicates: 1,
            discard: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Run directory holding `chain_*.csv`; defaults to the output directory.
    pub run_dir: Option<PathBuf>,
    pub max_lag: usize,
    pub predictive_draws: usize,
    /// Extra thinning applied before diagnostics.
    pub thin: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            run_dir: None,
            max_lag: 50,
            predictive_draws: 500,
            thin: 1,
        }
    }
}

impl RunConfig {
    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.model);
        cfg.data.iter_mut().for_each(resolve);
        resolve(&mut cfg.out_dir);
        if let Some(p) = cfg.population.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.diagnose.run_dir.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the settings that `command` uses, including that input files exist.
    pub fn validate(&self, command: Command) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.max_events == 0 {
            return Err(Error::Config("max_events must be at least 1".into()));
        }
        require_file(&self.model, "model")?;
        let needs_data = !matches!(command, Command::Simulate);
        if needs_data {
            if self.data.is_empty() {
                return Err(Error::Config("no data files given".into()));
            }
            for d in &self.data {
                require_file(d, "data")?;
            }
        }
        match command {
            Command::Simulate => {
                let s = &self.simulate;
                if s.times.is_empty() {
                    return Err(Error::Config("simulate.times is empty".into()));
                }
                if s.times[0] < 0.0
                    || s.times.windows(2).any(|w| w[1] < w[0])
                    || s.times.iter().any(|t| !t.is_finite())
                {
                    return Err(Error::Config(
                        "simulate.times must be finite, non-negative and non-decreasing".into(),
                    ));
                }
                if s.replicates == 0 && s.x0.is_empty() {
                    return Err(Error::Config(
                        "simulate.replicates must be at least 1".into(),
                    ));
                }
                if !s.x0.is_empty() && s.replicates > 1 && s.x0.len() != s.replicates {
                    return Err(Error::Config(
                        "simulate.x0 needs one row per replicate".into(),
                    ));
                }
            }
            Command::Abc => self.abc.validate()?,
            Command::Pmcmc => {
                self.pmcmc.validate()?;
                match &self.population {
                    Some(p) => require_file(p, "population")?,
                    None => return Err(Error::Config("pmcmc needs `population`".into())),
                }
            }
            Command::Hybrid => {
                self.abc.validate()?;
                self.pmcmc.validate()?;
            }
            Command::Diagnose => {
                if self.diagnose.thin == 0 {
                    return Err(Error::Config("diagnose.thin must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn read_model(&self) -> Result<Model> {
        let text = std::fs::read_to_string(&self.model).map_err(|e| Error::io(&self.model, e))?;
        parse_model(&text)
    }

    pub fn problem(&self) -> Result<Problem> {
        let model = self.read_model()?;
        let data = Dataset::read_csv(&self.data)?;
        Ok(Problem::new(model, &data)?.with_max_events(self.max_events))
    }

    fn replicates(&self) -> usize {
        self.simulate.x0.len().max(self.simulate.replicates).max(1)
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::Config(format!("no {what} file given")));
    }
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what} file not found"),
            ),
        ));
    }
    Ok(())
}

/// A run directory and the files written into it.
#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path).map_err(|e| Error::output(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes `name` through `f` and records it.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.path.join(name);
        let file = File::create(&path).map_err(|e| Error::output(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::output(&path, e))?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, |w| {
            w.write_all(text.as_bytes())
                .map_err(|e| Error::output(name, e))
        })
    }
}

/// Writes `manifest.toml`: everything needed to repeat the run bit for bit.
fn write_manifest(dir: &mut RunDir, command: Command, cfg: &RunConfig) -> Result<()> {
    let mut t = toml::Table::new();
    t.insert("command".into(), command.name().into());
    t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    t.insert("workers".into(), toml::Value::Integer(cfg.workers as i64));
    t.insert("rng".into(), RNG_ALGORITHM.into());
    t.insert(
        "config".into(),
        toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?,
    );
    let text = toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))?;
    dir.write_text("manifest.toml", &text)?;
    Ok(())
}

/// Runs a command with a ready configuration and returns the run directory.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<RunDir> {
    cfg.validate(command)?;
    let mut dir = RunDir::create(&cfg.out_dir)?;
    write_manifest(&mut dir, command, cfg)?;
    let pool = WorkerPool::new(cfg.workers)?;
    let streams = Streams::new(cfg.seed);
    match command {
        Command::Simulate => cmd_simulate(cfg, &streams, &mut dir)?,
        Command::Abc => cmd_abc(cfg, &streams, &pool, &mut dir)?,
        Command::Pmcmc => cmd_pmcmc(cfg, &streams, &pool, &mut dir)?,
        Command::Hybrid => cmd_hybrid(cfg, &streams, &pool, &mut dir)?,
        Command::Diagnose => cmd_diagnose(cfg, &streams, &pool, &mut dir)?,
    }
    Ok(dir)
}

fn cmd_simulate(cfg: &RunConfig, streams: &Streams, dir: &mut RunDir) -> Result<()> {
    let model = cfg.read_model()?;
    let s = &cfg.simulate;
    if s.theta.len() != model.n_params() {
        return Err(Error::Config(format!(
            "simulate.theta has {} values for {} parameters",
            s.theta.len(),
            model.n_params()
        )));
    }
    let obs = model.obs_model().clone();
    for r in 0..cfg.replicates() {
        let child = streams.child(domain::SIMULATE, r as u64);
        let x0 = match s.x0.get(r).or_else(|| s.x0.first()) {
            Some(x0) => x0.clone(),
            None => model
                .initial_prior(&obs, None)?
                .sample(&mut child.stream(domain::INITIAL, 0)),
        };
        if x0.len() != model.n_species() {
            return Err(Error::Config(format!(
                "simulate.x0 needs {} counts",
                model.n_species()
            )));
        }
        let mut syn = synthesize_dataset(&model, &s.theta, &x0, &obs, &s.times, &child)?;
        syn.dataset = syn.dataset.without_columns(&s.discard)?;
        let n = r + 1;
        let traj = dir.write(&format!("trajectory_{n}.csv"), |w| {
            syn.trajectory.write_csv(model.species(), w)
        })?;
        let data = dir.write(&format!("data_{n}.csv"), |w| syn.dataset.write_csv(0, w))?;
        println!("replicate {n}: {} and {}", traj.display(), data.display());
    }
    println!("seed {}", cfg.seed);
    Ok(())
}

fn write_abc(dir: &mut RunDir, names: &[String], run: &crate::abc::AbcRun) -> Result<()> {
    for p in &run.populations {
        dir.write(&format!("population_{}.csv", p.generation), |w| {
            p.write_csv(names, w)
        })?;
    }
    dir.write("abc_summary.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "generation",
            "tolerance",
            "proposals",
            "accepted",
            "acceptance_rate",
        ])?;
        c.write_record([
            "pilot".to_string(),
            run.pilot_epsilon.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
        for p in &run.populations {
            c.write_record([
                p.generation.to_string(),
                p.tolerance.to_string(),
                p.proposals.to_string(),
                p.len().to_string(),
                p.acceptance_rate().to_string(),
            ])?;
        }
        c.flush().map_err(|e| Error::output("abc_summary.csv", e))
    })?;
    Ok(())
}

fn cmd_abc(cfg: &RunConfig, streams: &Streams, pool: &WorkerPool, dir: &mut RunDir) -> Result<()> {
    let problem = cfg.problem()?;
    let run = abc_smc(&problem, &cfg.abc, streams, pool)?;
    write_abc(dir, &problem.prior.sampling_names(), &run)?;
    println!(
        "seed {}; {} populations in {}",
        cfg.seed,
        run.populations.len(),
        dir.path.display()
    );
    Ok(())
}

fn write_pmcmc(dir: &mut RunDir, problem: &Problem, run: &PmcmcRun) -> Result<()> {
    let names = problem.prior.sampling_names();
    let mut summary = String::new();
    summary.push_str(&format!("particles = {}\n", run.tuning.particles));
    summary.push_str(&format!(
        "tuner_trace = [{}]\n",
        run.tuning
            .trace
            .iter()
            .map(|(n, v)| format!("[{n}, {}]", toml_float(*v)))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let rows: Vec<String> = (0..run.proposal_cov.nrows())
        .map(|i| {
            let r: Vec<String> = run
                .proposal_cov
                .row(i)
                .iter()
                .map(|v| toml_float(*v))
                .collect();
            format!("[{}]", r.join(", "))
        })
        .collect();
    summary.push_str(&format!("proposal_cov = [{}]\n", rows.join(", ")));
    for (c, chain) in run.chains.iter().enumerate() {
        summary.push_str(&format!(
            "\n[[chain]]\nindex = {c}\nseed = {}\n",
            run.seeds[c]
        ));
        summary.push_str(&format!(
            "start = [{}]\n",
            run.starts[c]
                .iter()
                .map(|v| toml_float(*v))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        match chain {
            Ok(rec) => {
                summary.push_str(&format!(
                    "acceptance_rate = {}\nretained = {}\n",
                    toml_float(rec.acceptance_rate()),
                    rec.len()
                ));
                dir.write(&format!("chain_{c}.csv"), |w| rec.write_csv(&names, w))?;
            }
            Err(e) => summary.push_str(&format!("error = {:?}\n", e.to_string())),
        }
    }
    dir.write_text("pmcmc_summary.toml", &summary)?;
    Ok(())
}

fn toml_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn finished(run: &PmcmcRun) -> Result<Vec<ChainRecord>> {
    let done: Vec<ChainRecord> = run.completed().into_iter().cloned().collect();
    if done.is_empty() {
        return Err(run
            .chains
            .iter()
            .find_map(|c| c.as_ref().err())
            .map(|e| Error::Config(format!("every chain failed; first error: {e}")))
            .unwrap_or_else(|| Error::Config("no chains".into())));
    }
    Ok(done)
}

fn cmd_pmcmc(
    cfg: &RunConfig,
    streams: &Streams,
    pool: &WorkerPool,
    dir: &mut RunDir,
) -> Result<()> {
    let problem = cfg.problem()?;
    let path = cfg.population.as_ref().expect("validated");
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let population = WeightedPopulation::read_csv(file)?;
    let run = chains_from_population(&problem, &population, &cfg.pmcmc, streams, pool)?;
    write_pmcmc(dir, &problem, &run)?;
    let chains = finished(&run)?;
    write_diagnostics(
        cfg,
        &problem,
        Some(&population),
        &chains,
        streams,
        pool,
        dir,
    )?;
    println!(
        "seed {}; {} chains in {}",
        cfg.seed,
        chains.len(),
        dir.path.display()
    );
    Ok(())
}

fn cmd_hybrid(
    cfg: &RunConfig,
    streams: &Streams,
    pool: &WorkerPool,
    dir: &mut RunDir,
) -> Result<()> {
    let problem = cfg.problem()?;
    let abc = abc_smc(&problem, &cfg.abc, streams, pool)?;
    write_abc(dir, &problem.prior.sampling_names(), &abc)?;
    let run = chains_from_population(&problem, abc.last(), &cfg.pmcmc, streams, pool)?;
    write_pmcmc(dir, &problem, &run)?;
    let chains = finished(&run)?;
    write_diagnostics(cfg, &problem, Some(abc.last()), &chains, streams, pool, dir)?;
    println!(
        "seed {}; {} chains in {}",
        cfg.seed,
        chains.len(),
        dir.path.display()
    );
    Ok(())
}

fn cmd_diagnose(
    cfg: &RunConfig,
    streams: &Streams,
    pool: &WorkerPool,
    dir: &mut RunDir,
) -> Result<()> {
    let problem = cfg.problem()?;
    let run_dir = cfg
        .diagnose
        .run_dir
        .clone()
        .unwrap_or_else(|| cfg.out_dir.clone());
    let mut chains = Vec::new();
    for c in 0.. {
        let path = run_dir.join(format!("chain_{c}.csv"));
        if !path.is_file() {
            break;
        }
        let (_, mut rec) =
            ChainRecord::read_csv(File::open(&path).map_err(|e| Error::io(&path, e))?)?;
        rec.chain = c;
        chains.push(rec);
    }
    if chains.is_empty() {
        return Err(Error::Config(format!(
            "no chain_*.csv files in {}",
            run_dir.display()
        )));
    }
    let population = match &cfg.population {
        Some(p) => Some(WeightedPopulation::read_csv(
            File::open(p).map_err(|e| Error::io(p, e))?,
        )?),
        None => last_population(&run_dir)?,
    };
    write_diagnostics(
        cfg,
        &problem,
        population.as_ref(),
        &chains,
        streams,
        pool,
        dir,
    )?;
    println!(
        "diagnostics for {} chains in {}",
        chains.len(),
        dir.path.display()
    );
    Ok(())
}

fn last_population(run_dir: &Path) -> Result<Option<WeightedPopulation>> {
    let mut last = None;
    for g in 0.. {
        let path = run_dir.join(format!("population_{g}.csv"));
        if !path.is_file() {
            break;
        }
        last = Some(path);
    }
    match last {
        Some(p) => Ok(Some(WeightedPopulation::read_csv(
            File::open(&p).map_err(|e| Error::io(&p, e))?,
        )?)),
        None => Ok(None),
    }
}

/// Pooled samples, R-hat summary, autocorrelations, predictive bands and the
/// ABC comparison.
fn write_diagnostics(
    cfg: &RunConfig,
    problem: &Problem,
    population: Option<&WeightedPopulation>,
    chains: &[ChainRecord],
    streams: &Streams,
    pool: &WorkerPool,
    dir: &mut RunDir,
) -> Result<()> {
    let d = &cfg.diagnose;
    let chains: Vec<ChainRecord> = chains
        .iter()
        .map(|c| crate::diagnostics::thin(c, d.thin))
        .collect::<Result<_>>()?;
    let names = problem.prior.sampling_names();
    let pooled = PooledPosterior::new(names.clone(), &chains);
    dir.write("pooled.csv", |w| pooled.write_csv(w))?;
    let summary = summarize(&chains, &pooled);
    dir.write("summary.csv", |w| write_summary_csv(&summary, w))?;
    for s in &summary {
        let rhat = s.rhat.map_or("NA".to_string(), |r| format!("{r:.4}"));
        println!(
            "{}: mean {:.4}, 95% [{:.4}, {:.4}], R-hat {rhat}",
            s.name, s.mean, s.q025, s.q975
        );
    }
    let first = &chains[0];
    let lag = d.max_lag.min(first.len().saturating_sub(1));
    let acf: Vec<Vec<f64>> = (0..names.len())
        .map(|p| autocorrelation(&first.column(p), lag).unwrap_or_else(|_| vec![f64::NAN; lag + 1]))
        .collect();
    dir.write("acf_chain_0.csv", |w| write_acf_csv(&names, &acf, w))?;
    if d.predictive_draws > 0 {
        for r in 0..problem.data.replicates().len() {
            let table = posterior_predictive(
                problem,
                &pooled,
                r,
                problem.data.times(),
                d.predictive_draws,
                &streams.child(domain::PREDICTIVE, r as u64),
                pool,
            )?;
            let coverage = table.coverage(problem, r)?;
            println!(
                "replicate {}: {:.3} of observations inside the 95% predictive band",
                r + 1,
                coverage
            );
            dir.write(&format!("predictive_{}.csv", r + 1), |w| table.write_csv(w))?;
        }
    }
    if let Some(pop) = population {
        let cmp = compare_abc_pmcmc(pop, &pooled)?;
        dir.write("comparison.csv", |w| write_comparison_csv(&cmp, w))?;
    }
    Ok(())
}

/// Parses arguments, runs the command and maps errors to exit codes:
/// 0 success, 1 runtime failure, 2 invalid input.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Effective configuration: file (or defaults) with flag overrides applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cfg.seed > i64::MAX as u64 {
        return Err(Error::Config(format!("seed must be at most {}", i64::MAX)));
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out_dir {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    execute(cli.command, &cfg).map(|_| ())
}
