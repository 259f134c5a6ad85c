//! The `nnmp` command line: configuration, dataset I/O and the five
//! subcommands. Every command is a function of its config file, input files
//! and seed, and writes its outputs into one directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaFamily;
use crate::data::{CountData, ReferenceData};
use crate::diagnose::{anderson_darling, draws_by_row, residual_set, scores};
use crate::error::{Error, Result};
use crate::geom::{equirectangular, Location, OrderedReferenceSet};
use crate::marginal::{Covariates, MarginalFamily};
use crate::mcmc::{
    read_posterior, run_chains, write_posterior, McmcConfig, ModelSpec, ModelState, PosteriorHeader, Priors,
};
use crate::predict::{predictive_draws, predictive_summary, PredictionTarget};
use crate::simulate::{sglmm_dataset, skew_field_dataset, SglmmConfig, SkewFieldConfig};

pub const DATA_FILE: &str = "data.csv";
pub const SIDECAR_FILE: &str = "data.json";
pub const POSTERIOR_FILE: &str = "posterior.ndjson";
pub const ACCEPTANCE_FILE: &str = "acceptance.tsv";
pub const SPLIT_FILE: &str = "split.json";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const DRAWS_FILE: &str = "predictive_draws.csv";
pub const RESIDUALS_FILE: &str = "residuals.tsv";
pub const VALIDATION_FILE: &str = "validation.txt";
pub const SCORES_FILE: &str = "scores.txt";

#[derive(Debug, Parser)]
#[command(name = "nnmp", version, about = "Discrete copula NNMPs for spatial count data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; every setting has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: the configuration's `out`, else `nnmp-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Number of chains for `fit`.
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Fraction of rows held out of the fit, for prediction and scoring.
    #[arg(long, global = true)]
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate a dataset from one of the built-in scenarios.
    Simulate,
    /// Fit the model and store the posterior samples.
    Fit,
    /// Posterior predictive draws and summaries.
    Predict,
    /// Randomized quantile residuals and a normality check.
    Validate,
    /// Score stored predictive draws against observed counts.
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub marginal: MarginalFamily,
    pub copula: CopulaFamily,
    pub max_neighbors: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            marginal: MarginalFamily::Poisson,
            copula: CopulaFamily::Gaussian,
            max_neighbors: 10,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            marginal: self.marginal,
            copula: self.copula,
            max_neighbors: self.max_neighbors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Coordinates are used as given.
    #[default]
    None,
    /// Coordinates are longitude and latitude in degrees, projected to
    /// kilometres around the mean latitude.
    Equirectangular,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset CSV; defaults to `data.csv` in the output directory.
    pub path: Option<PathBuf>,
    pub holdout: Option<f64>,
    pub projection: Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Skew,
    Sglmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub skew: SkewFieldConfig,
    pub sglmm: SglmmConfig,
}

/// Where `predict` draws: `auto` means the held-out rows if the fit used a
/// holdout, otherwise the training sites.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Targets {
    #[default]
    Auto,
    Train,
    Holdout,
    /// CSV of `x, y, covariates…` with a header row.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub targets: Targets,
    pub draws_per_sample: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            targets: Targets::Auto,
            draws_per_sample: 1,
        }
    }
}

/// The whole run configuration. Relative paths are resolved against the
/// directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub priors: Priors,
    pub mcmc: McmcConfig,
    pub data: DataConfig,
    pub simulate: SimulateConfig,
    pub predict: PredictConfig,
    pub out: Option<PathBuf>,
    pub chains: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Read a configuration file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.data.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.out.as_mut() {
            resolve(p);
        }
        if let Targets::File(p) = &mut cfg.predict.targets {
            resolve(p);
        }
        Ok(cfg)
    }

    /// Apply command-line overrides and check the result.
    pub fn with_overrides(mut self, cli: &Cli) -> Result<Self> {
        if let Some(seed) = cli.seed {
            self.mcmc.seed = seed;
        }
        if let Some(out) = &cli.out {
            self.out = Some(out.clone());
        }
        if let Some(c) = cli.chains {
            self.chains = Some(c);
        }
        if let Some(h) = cli.holdout {
            self.data.holdout = Some(h);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.max_neighbors == 0 {
            return Err(Error::config("model.max_neighbors must be at least 1"));
        }
        self.mcmc.validate()?;
        if self.mcmc.n_iter <= self.mcmc.burnin {
            return Err(Error::config("mcmc.n_iter must exceed mcmc.burnin"));
        }
        if self.chains == Some(0) {
            return Err(Error::config("at least one chain is required"));
        }
        if let Some(h) = self.data.holdout {
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::config(format!("holdout fraction must be in (0, 1), got {h}")));
            }
        }
        if self.predict.draws_per_sample == 0 {
            return Err(Error::config("predict.draws_per_sample must be at least 1"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("nnmp-out"))
    }

    pub fn data_path(&self) -> PathBuf {
        self.data.path.clone().unwrap_or_else(|| self.out_dir().join(DATA_FILE))
    }
}

// ------------------------------------------------------------------ datasets

/// A dataset as read from CSV: raw coordinates as written, the (possibly
/// projected) data used for modeling, and the covariate column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub raw: Vec<Location>,
    pub data: CountData,
    pub covariate_names: Vec<String>,
}

fn parse_f64(field: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{what} {field:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} {field:?} is not finite"))
    }
}

fn parse_count(field: &str) -> std::result::Result<u64, String> {
    field
        .trim()
        .parse()
        .map_err(|_| format!("count {field:?} is not a nonnegative integer"))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::data(format!("{}: {e}", path.display())),
        _ => Error::data(format!("{}: malformed CSV: {e}", path.display())),
    }
}

/// Read `x, y, count, covariates…` (header required). Violations are
/// collected and reported row by row, with data rows numbered from 1.
pub fn read_dataset(path: &Path, projection: Projection) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 {
        return Err(Error::data(format!(
            "{}: header needs at least the columns x, y, count",
            path.display()
        )));
    }
    let covariate_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let mut raw = Vec::new();
    let mut counts = Vec::new();
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed = (|| {
            if rec.len() != header.len() {
                return Err(format!("expected {} fields, found {}", header.len(), rec.len()));
            }
            let x = parse_f64(&rec[0], "coordinate")?;
            let y = parse_f64(&rec[1], "coordinate")?;
            let c = parse_count(&rec[2])?;
            let cov = (3..rec.len())
                .map(|j| parse_f64(&rec[j], &format!("covariate {}", header[j].trim())))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((Location::new(x, y), c, cov))
        })();
        match parsed {
            Ok((loc, c, cov)) => {
                let key = (loc.x.to_bits(), loc.y.to_bits());
                if let Some(first) = seen.insert(key, row) {
                    problems.push(format!("row {row}: duplicates the coordinates of row {first}"));
                }
                raw.push(loc);
                counts.push(c);
                rows.push(cov);
            }
            Err(msg) => problems.push(format!("row {row}: {msg}")),
        }
    }
    if !problems.is_empty() {
        let shown = problems.len().min(20);
        let mut msg = format!(
            "{}: {} invalid rows\n  {}",
            path.display(),
            problems.len(),
            problems[..shown].join("\n  ")
        );
        if problems.len() > shown {
            let _ = write!(msg, "\n  … and {} more", problems.len() - shown);
        }
        return Err(Error::data(msg));
    }
    if raw.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    let locations = project(&raw, projection);
    let covariates = Covariates::with_intercept(&rows)?;
    Ok(Dataset {
        data: CountData::new(locations, counts, covariates)?,
        raw,
        covariate_names,
    })
}

fn project(raw: &[Location], projection: Projection) -> Vec<Location> {
    match projection {
        Projection::None => raw.to_vec(),
        Projection::Equirectangular => {
            let ref_lat = raw.iter().map(|l| l.y).sum::<f64>() / raw.len() as f64;
            raw.iter().map(|l| equirectangular(l.x, l.y, ref_lat)).collect()
        }
    }
}

/// Write `x, y, count, covariates…`, dropping the intercept column.
pub fn write_dataset<W: Write>(w: W, data: &CountData, covariate_names: &[String]) -> Result<()> {
    let p = data.covariates.ncol();
    if covariate_names.len() + 1 != p {
        return Err(Error::invalid("one name is needed per non-intercept covariate"));
    }
    let err = |e: csv::Error| Error::data(format!("writing dataset: {e}"));
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "y".to_string(), "count".to_string()];
    header.extend(covariate_names.iter().cloned());
    out.write_record(&header).map_err(err)?;
    for i in 0..data.len() {
        let l = data.locations[i];
        let mut rec = vec![l.x.to_string(), l.y.to_string(), data.counts[i].to_string()];
        rec.extend(data.covariates.row(i)[1..].iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(err)?;
    }
    out.flush().map_err(|e| Error::data(format!("writing dataset: {e}")))
}

/// Rows `x, y, covariates…` of a prediction target file.
fn read_targets(
    path: &Path,
    projection: Projection,
    reference: &Dataset,
) -> Result<(Vec<Location>, Vec<PredictionTarget>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let p = reference.covariate_names.len();
    if header.len() != 2 + p {
        return Err(Error::data(format!(
            "{}: expected columns x, y and {p} covariates, found {} columns",
            path.display(),
            header.len()
        )));
    }
    let mut raw = Vec::new();
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed = (|| {
            let vals = rec
                .iter()
                .map(|f| parse_f64(f, "value"))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if vals.len() != header.len() {
                return Err(format!("expected {} fields, found {}", header.len(), vals.len()));
            }
            Ok(vals)
        })();
        match parsed {
            Ok(v) => {
                raw.push(Location::new(v[0], v[1]));
                let mut cov = vec![1.0];
                cov.extend_from_slice(&v[2..]);
                rows.push(cov);
            }
            Err(msg) => problems.push(format!("row {}: {msg}", k + 1)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::data(format!("{}: {}", path.display(), problems.join("; "))));
    }
    // Project with the dataset's reference latitude so targets share its frame.
    let projected = match projection {
        Projection::None => raw.clone(),
        Projection::Equirectangular => {
            let ref_lat = reference.raw.iter().map(|l| l.y).sum::<f64>() / reference.raw.len() as f64;
            raw.iter().map(|l| equirectangular(l.x, l.y, ref_lat)).collect()
        }
    };
    let targets = projected
        .into_iter()
        .zip(rows)
        .map(|(l, c)| PredictionTarget::new(l, c))
        .collect();
    Ok((raw, targets))
}

// ------------------------------------------------------------------ splits

/// Which input rows trained the model and which were held out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub fraction: f64,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Hold out `round(fraction · n)` rows (at least one, leaving at least one).
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<SplitRecord> {
    if n < 2 {
        return Err(Error::data("a holdout split needs at least two rows"));
    }
    let n_test = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitRecord {
        fraction,
        seed,
        train,
        test,
    })
}

/// Keeps the split stream apart from the chain stream of the same seed.
const SPLIT_STREAM: u64 = 0x5eed_5911;

// ------------------------------------------------------------------ output helpers

fn guard(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ------------------------------------------------------------------ commands

/// What `simulate` records next to the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSidecar {
    pub scenario: Scenario,
    pub skew: Option<SkewFieldConfig>,
    pub sglmm: Option<SglmmConfig>,
    pub n_sites: usize,
    pub data_digest: String,
}

pub fn cmd_simulate(cfg: &RunConfig, force: bool) -> Result<Vec<PathBuf>> {
    let out = cfg.out_dir();
    let (csv_path, sidecar_path) = (out.join(DATA_FILE), out.join(SIDECAR_FILE));
    guard(&csv_path, force)?;
    guard(&sidecar_path, force)?;
    let seed = cfg.mcmc.seed;
    let (data, names, sidecar) = match cfg.simulate.scenario {
        Scenario::Skew => {
            let c = SkewFieldConfig {
                seed,
                ..cfg.simulate.skew
            };
            let d = skew_field_dataset(&c)?;
            let s = SimulationSidecar {
                scenario: Scenario::Skew,
                skew: Some(c),
                sglmm: None,
                n_sites: d.len(),
                data_digest: d.digest(),
            };
            (d, vec![], s)
        }
        Scenario::Sglmm => {
            let c = SglmmConfig {
                seed,
                ..cfg.simulate.sglmm
            };
            let d = sglmm_dataset(&c)?;
            let s = SimulationSidecar {
                scenario: Scenario::Sglmm,
                skew: None,
                sglmm: Some(c),
                n_sites: d.len(),
                data_digest: d.digest(),
            };
            (d, vec!["cov_x".to_string(), "cov_y".to_string()], s)
        }
    };
    ensure_dir(&out)?;
    write_dataset(create(&csv_path)?, &data, &names)?;
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::data(e.to_string()))?;
    write_text(&sidecar_path, &(json + "\n"))?;
    Ok(vec![csv_path, sidecar_path])
}

/// Everything `fit` stores and later commands reload.
pub struct FittedModel {
    pub header: PosteriorHeader,
    pub samples: Vec<ModelState>,
    pub dataset: Dataset,
    pub split: Option<SplitRecord>,
    pub data: ReferenceData,
}

impl FittedModel {
    fn train_rows(&self) -> Vec<usize> {
        match &self.split {
            Some(s) => s.train.clone(),
            None => (0..self.dataset.data.len()).collect(),
        }
    }
}

fn acceptance_table(header: &PosteriorHeader) -> String {
    let mut s = String::from("chain\tblock\trate\n");
    for (c, rates) in header.acceptance.iter().enumerate() {
        for (k, v) in rates {
            let _ = writeln!(s, "{c}\t{k}\t{v}");
        }
    }
    s
}

pub fn cmd_fit(cfg: &RunConfig, force: bool) -> Result<Vec<PathBuf>> {
    let out = cfg.out_dir();
    let post_path = out.join(POSTERIOR_FILE);
    let acc_path = out.join(ACCEPTANCE_FILE);
    let split_path = out.join(SPLIT_FILE);
    guard(&post_path, force)?;
    guard(&acc_path, force)?;
    if cfg.data.holdout.is_some() {
        guard(&split_path, force)?;
    }
    let dataset = read_dataset(&cfg.data_path(), cfg.data.projection)?;
    let spec = cfg.model.spec();
    cfg.priors.validate(dataset.data.covariates.ncol())?;
    let split = cfg
        .data
        .holdout
        .map(|f| holdout_split(dataset.data.len(), f, cfg.mcmc.seed))
        .transpose()?;
    let train = match &split {
        Some(s) => dataset.data.subset(&s.train)?,
        None => dataset.data.clone(),
    };
    let data = ReferenceData::random_ordering(&train, spec.max_neighbors, cfg.mcmc.seed)?;
    let chains = run_chains(&data, &spec, &cfg.priors, &cfg.mcmc, cfg.chains.unwrap_or(1))?;
    let header = PosteriorHeader::new(&chains, train.digest(), data.reference.permutation().to_vec())?;

    ensure_dir(&out)?;
    write_posterior(create(&post_path)?, &header, &chains)?;
    write_text(&acc_path, &acceptance_table(&header))?;
    let mut written = vec![post_path, acc_path];
    if let Some(s) = &split {
        let json = serde_json::to_string(s).map_err(|e| Error::data(e.to_string()))?;
        write_text(&split_path, &(json + "\n"))?;
        written.push(split_path);
    } else if split_path.exists() {
        // A split left over from an earlier fit would mislead later commands.
        std::fs::remove_file(&split_path).map_err(|e| Error::io(&split_path, e))?;
    }
    Ok(written)
}

/// Reload a fit and check that the data still match it.
pub fn load_fit(cfg: &RunConfig) -> Result<FittedModel> {
    let out = cfg.out_dir();
    let post_path = out.join(POSTERIOR_FILE);
    let file = File::open(&post_path).map_err(|e| Error::io(&post_path, e))?;
    let (header, chains) = read_posterior(BufReader::new(file))?;
    let split_path = out.join(SPLIT_FILE);
    let split: Option<SplitRecord> = if split_path.exists() {
        let text = std::fs::read_to_string(&split_path).map_err(|e| Error::io(&split_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", split_path.display())))?)
    } else {
        None
    };
    let dataset = read_dataset(&cfg.data_path(), cfg.data.projection)?;
    if let Some(s) = &split {
        if s.train.iter().chain(&s.test).any(|&i| i >= dataset.data.len()) {
            return Err(Error::data("the stored split does not fit this dataset"));
        }
    }
    let train = match &split {
        Some(s) => dataset.data.subset(&s.train)?,
        None => dataset.data.clone(),
    };
    if train.digest() != header.data_digest {
        return Err(Error::data(format!(
            "{} was fitted to different data than {}",
            post_path.display(),
            cfg.data_path().display()
        )));
    }
    let reference =
        OrderedReferenceSet::with_permutation(&train.locations, header.permutation.clone(), header.spec.max_neighbors)?;
    let data = ReferenceData::new(&train, reference)?;
    let samples: Vec<ModelState> = chains.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::data(format!(
            "{} holds no posterior samples",
            post_path.display()
        )));
    }
    Ok(FittedModel {
        header,
        samples,
        dataset,
        split,
        data,
    })
}

pub fn cmd_predict(cfg: &RunConfig, force: bool) -> Result<Vec<PathBuf>> {
    let out = cfg.out_dir();
    let (tab_path, draws_path) = (out.join(PREDICTIONS_FILE), out.join(DRAWS_FILE));
    guard(&tab_path, force)?;
    guard(&draws_path, force)?;
    let fit = load_fit(cfg)?;
    let rows_targets = |rows: &[usize]| -> (Vec<Location>, Vec<PredictionTarget>) {
        let d = &fit.dataset.data;
        let raw = rows.iter().map(|&i| fit.dataset.raw[i]).collect();
        let t = rows
            .iter()
            .map(|&i| PredictionTarget::new(d.locations[i], d.covariates.row(i).to_vec()))
            .collect();
        (raw, t)
    };
    let (raw, targets) = match (&cfg.predict.targets, &fit.split) {
        (Targets::Auto, Some(s)) | (Targets::Holdout, Some(s)) => rows_targets(&s.test),
        (Targets::Holdout, None) => {
            return Err(Error::config(
                "predict.targets = \"holdout\" but the fit used no holdout",
            ))
        }
        (Targets::Auto, None) | (Targets::Train, _) => rows_targets(&fit.train_rows()),
        (Targets::File(p), _) => read_targets(p, cfg.data.projection, &fit.dataset)?,
    };
    let draws = predictive_draws(
        &targets,
        &fit.samples,
        &fit.data,
        &fit.header.spec,
        cfg.predict.draws_per_sample,
        cfg.mcmc.seed,
    )?;

    let mut tab = String::from("x\ty\tmedian\tmean\tlower95\tupper95\tn_draws\n");
    for (loc, d) in raw.iter().zip(&draws) {
        let s = predictive_summary(d)?;
        let _ = writeln!(
            tab,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            loc.x, loc.y, s.median, s.mean, s.lower95, s.upper95, s.n_draws
        );
    }
    ensure_dir(&out)?;
    write_text(&tab_path, &tab)?;
    let mut w = create(&draws_path)?;
    let io = |e: std::io::Error| Error::io(&draws_path, e);
    let nd = draws.first().map_or(0, |d| d.len());
    let mut line = String::from("x,y");
    for k in 1..=nd {
        let _ = write!(line, ",draw_{k}");
    }
    writeln!(w, "{line}").map_err(io)?;
    for (loc, d) in raw.iter().zip(&draws) {
        line.clear();
        let _ = write!(line, "{},{}", loc.x, loc.y);
        for v in d {
            let _ = write!(line, ",{v}");
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(vec![tab_path, draws_path])
}

pub fn cmd_validate(cfg: &RunConfig, force: bool) -> Result<(Vec<PathBuf>, String)> {
    let out = cfg.out_dir();
    let (res_path, sum_path) = (out.join(RESIDUALS_FILE), out.join(VALIDATION_FILE));
    guard(&res_path, force)?;
    guard(&sum_path, force)?;
    let fit = load_fit(cfg)?;
    let set = residual_set(&fit.samples, &fit.data, &fit.header.spec)?;
    let mean = set.posterior_mean();
    let lo = set.pointwise_quantile(0.025);
    let hi = set.pointwise_quantile(0.975);
    let ad = anderson_darling(&mean)?;

    // Back to input order of the training rows.
    let rows = fit.train_rows();
    let (mean, lo, hi) = (
        fit.data.to_input_order(&mean),
        fit.data.to_input_order(&lo),
        fit.data.to_input_order(&hi),
    );
    let mut tab = String::from("x\ty\tcount\tresidual\tlower95\tupper95\n");
    for (k, &row) in rows.iter().enumerate() {
        let l = fit.dataset.raw[row];
        let _ = writeln!(
            tab,
            "{}\t{}\t{}\t{}\t{}\t{}",
            l.x, l.y, fit.dataset.data.counts[row], mean[k], lo[k], hi[k]
        );
    }
    let summary = format!(
        "n_sites = {}\nn_samples = {}\nclamped_probabilities = {}\nanderson_darling = {}\n\
         anderson_darling_modified = {}\ncritical_5pct = {}\nnormal_at_5pct = {}\n",
        mean.len(),
        set.per_sample.len(),
        set.clamped,
        ad.statistic,
        ad.modified,
        ad.critical_5pct,
        ad.passes()
    );
    ensure_dir(&out)?;
    write_text(&res_path, &tab)?;
    write_text(&sum_path, &summary)?;
    Ok((vec![res_path, sum_path], summary))
}

/// Predictive draws as written by `predict`: coordinates and draws per row.
pub fn read_draws(path: &Path) -> Result<(Vec<Location>, Vec<Vec<u64>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let width = reader.headers().map_err(|e| csv_error(path, e))?.len();
    if width < 3 {
        return Err(Error::data(format!("{}: no draw columns", path.display())));
    }
    let mut locs = Vec::new();
    let mut draws = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = k + 1;
        let bad = |m: String| Error::data(format!("{} row {row}: {m}", path.display()));
        if rec.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", rec.len())));
        }
        let x = parse_f64(&rec[0], "coordinate").map_err(bad)?;
        let y = parse_f64(&rec[1], "coordinate").map_err(bad)?;
        let d = (2..width)
            .map(|j| parse_count(&rec[j]))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(bad)?;
        locs.push(Location::new(x, y));
        draws.push(d);
    }
    Ok((locs, draws))
}

pub fn cmd_score(cfg: &RunConfig, force: bool) -> Result<(Vec<PathBuf>, String)> {
    let out = cfg.out_dir();
    let score_path = out.join(SCORES_FILE);
    guard(&score_path, force)?;
    let dataset = read_dataset(&cfg.data_path(), cfg.data.projection)?;
    let (locs, draws) = read_draws(&out.join(DRAWS_FILE))?;
    let by_loc: HashMap<(u64, u64), usize> = dataset
        .raw
        .iter()
        .enumerate()
        .map(|(i, l)| ((l.x.to_bits(), l.y.to_bits()), i))
        .collect();
    let y = locs
        .iter()
        .enumerate()
        .map(|(k, l)| {
            by_loc
                .get(&(l.x.to_bits(), l.y.to_bits()))
                .map(|&i| dataset.data.counts[i] as f64)
                .ok_or_else(|| Error::data(format!("draw row {}: ({}, {}) is not in the dataset", k + 1, l.x, l.y)))
        })
        .collect::<Result<Vec<_>>>()?;
    let r = scores(&y, &draws_by_row(&draws)?)?;
    let text = format!(
        "n_targets = {}\nn_draws = {}\nrmspe = {}\nrmspe_mean = {}\nci95_cover = {}\nci95_width = {}\n\
         crps = {}\nes = {}\nvs = {}\n",
        y.len(),
        draws.first().map_or(0, |d| d.len()),
        r.rmspe,
        r.rmspe_mean,
        r.ci95_cover,
        r.ci95_width,
        r.crps,
        r.es,
        r.vs
    );
    ensure_dir(&out)?;
    write_text(&score_path, &text)?;
    Ok((vec![score_path], text))
}

/// Run one parsed invocation; returns the paths written and any summary text.
pub fn run(cli: &Cli) -> Result<(Vec<PathBuf>, Option<String>)> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_overrides(cli)?;
    Ok(match cli.command {
        Command::Simulate => (cmd_simulate(&cfg, cli.force)?, None),
        Command::Fit => (cmd_fit(&cfg, cli.force)?, None),
        Command::Predict => (cmd_predict(&cfg, cli.force)?, None),
        Command::Validate => {
            let (p, s) = cmd_validate(&cfg, cli.force)?;
            (p, Some(s))
        }
        Command::Score => {
            let (p, s) = cmd_score(&cfg, cli.force)?;
            (p, Some(s))
        }
    })
}

/// Entry point of the `nnmp` binary.
pub fn main_from_env() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((paths, summary)) => {
            if let Some(s) = summary {
                print!("{s}");
            }
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nnmp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
