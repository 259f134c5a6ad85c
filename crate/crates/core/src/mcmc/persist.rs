//! Posterior storage as newline-delimited JSON: one header record, then one
//! record per stored sample tagged with its chain.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AcceptanceRates, McmcConfig, ModelSpec, ModelState, PosteriorSamples, Priors, StepSizes};
use crate::error::{Error, Result};

pub const FORMAT: &str = "discrete-nnmp-posterior/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorHeader {
    pub format: String,
    pub seed: u64,
    pub spec: ModelSpec,
    pub priors: Priors,
    pub config: McmcConfig,
    /// Digest of the data in input order.
    pub data_digest: String,
    /// `permutation[k]` is the input row of ordered site `k`.
    pub permutation: Vec<usize>,
    pub n_chains: usize,
    pub acceptance: Vec<AcceptanceRates>,
    pub final_steps: Vec<StepSizes>,
}

impl PosteriorHeader {
    pub fn new(chains: &[PosteriorSamples], data_digest: String, permutation: Vec<usize>) -> Result<Self> {
        let first = chains.first().ok_or_else(|| Error::invalid("no chains to store"))?;
        Ok(PosteriorHeader {
            format: FORMAT.to_string(),
            seed: first.config.seed,
            spec: first.spec,
            priors: first.priors.clone(),
            config: first.config.clone(),
            data_digest,
            permutation,
            n_chains: chains.len(),
            acceptance: chains.iter().map(|c| c.acceptance.clone()).collect(),
            final_steps: chains.iter().map(|c| c.final_steps).collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    chain: usize,
    #[serde(flatten)]
    state: ModelState,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::data(format!("malformed posterior record: {e}"))
}

pub fn write_posterior<W: Write>(mut w: W, header: &PosteriorHeader, chains: &[PosteriorSamples]) -> Result<()> {
    let io = |e: std::io::Error| Error::data(format!("writing posterior: {e}"));
    serde_json::to_writer(&mut w, header).map_err(json_err)?;
    w.write_all(b"\n").map_err(io)?;
    for (c, chain) in chains.iter().enumerate() {
        for s in &chain.samples {
            let rec = SampleRecord {
                chain: c,
                state: s.clone(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(json_err)?;
            w.write_all(b"\n").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Header plus the samples of each chain, in stored order.
pub fn read_posterior<R: BufRead>(r: R) -> Result<(PosteriorHeader, Vec<Vec<ModelState>>)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::data("empty posterior file"))?
        .map_err(|e| Error::data(format!("reading posterior: {e}")))?;
    let header: PosteriorHeader = serde_json::from_str(&first).map_err(json_err)?;
    if header.format != FORMAT {
        return Err(Error::data(format!("unsupported posterior format {:?}", header.format)));
    }
    let mut chains = vec![Vec::new(); header.n_chains];
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::data(format!("reading posterior: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord =
            serde_json::from_str(&line).map_err(|e| Error::data(format!("posterior line {}: {e}", k + 2)))?;
        if rec.chain >= chains.len() {
            return Err(Error::data(format!(
                "posterior line {}: unknown chain {}",
                k + 2,
                rec.chain
            )));
        }
        chains[rec.chain].push(rec.state);
    }
    Ok((header, chains))
}
