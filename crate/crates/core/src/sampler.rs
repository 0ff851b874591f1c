//! Block random-walk Metropolis sampler.
//!
//! All seven curve parameters are perturbed on their natural scale and
//! `sigma2` on the log scale in a single proposal. The log-scale move adds the
//! Jacobian term `z' - z` (with `z = ln sigma2`) to the acceptance ratio so the
//! chain still targets the posterior density in `sigma2`.

use std::io::{BufReader, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::likelihood::{series_log_likelihood, LikelihoodKind, ObservationSeries};
use crate::prior::{in_support, log_prior, ParamVector, PriorSpec, PARAM_NAMES};
use crate::rng::chain_rng;

/// One retained draw: `alpha1..alpha7, sigma2`, with `sigma2` on its natural scale.
pub type Draw = [f64; 8];

/// Proposal standard deviations: seven natural-scale entries for the curve
/// parameters and one log-scale entry for `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningSpec([f64; 8]);

impl TuningSpec {
    pub fn new(sd: [f64; 8]) -> Result<Self> {
        if let Some(i) = sd.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "tuning for {} must be positive, got {}",
                PARAM_NAMES[i], sd[i]
            )));
        }
        Ok(Self(sd))
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub n_samples: usize,
    /// First retained iteration, 1-based.
    pub sub_start: usize,
    /// Last iteration eligible for retention, 1-based and inclusive.
    pub sub_end: usize,
    pub sub_thin: usize,
    pub seed: u64,
    /// Number of final iterations the last-batch acceptance rate covers.
    pub batch_len: usize,
}

impl ChainConfig {
    /// Keeps every iteration, seed 0, batch length `min(100, n_samples)`.
    pub fn new(n_samples: usize) -> Self {
        Self {
            n_samples,
            sub_start: 1,
            sub_end: n_samples,
            sub_thin: 1,
            seed: 0,
            batch_len: n_samples.clamp(1, 100),
        }
    }

    pub fn with_subsample(mut self, start: usize, end: usize, thin: usize) -> Self {
        self.sub_start = start;
        self.sub_end = end;
        self.sub_thin = thin;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batch_len(mut self, batch_len: usize) -> Self {
        self.batch_len = batch_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if !(1 <= self.sub_start
            && self.sub_start <= self.sub_end
            && self.sub_end <= self.n_samples)
        {
            return bad(format!(
                "need 1 <= sub_start ({}) <= sub_end ({}) <= n_samples ({})",
                self.sub_start, self.sub_end, self.n_samples
            ));
        }
        if self.sub_thin == 0 {
            return bad("sub_thin must be at least 1".into());
        }
        if self.batch_len == 0 || self.batch_len > self.n_samples {
            return bad(format!(
                "batch_len ({}) must be in 1..=n_samples ({})",
                self.batch_len, self.n_samples
            ));
        }
        Ok(())
    }

    /// Number of draws a chain with this configuration retains.
    pub fn retained_count(&self) -> usize {
        (self.sub_end - self.sub_start) / self.sub_thin + 1
    }
}

/// 1-based iteration numbers retained by sub-sampling.
pub fn subsample_indices(config: &ChainConfig) -> Vec<usize> {
    (config.sub_start..=config.sub_end)
        .step_by(config.sub_thin.max(1))
        .collect()
}

/// Retained draws plus acceptance bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub draws: Vec<Draw>,
    pub accepted: usize,
    pub n_samples: usize,
    pub acc_overall: f64,
    pub acc_last_batch: f64,
}

impl Chain {
    pub fn retained_count(&self) -> usize {
        self.draws.len()
    }

    /// Column `j` (0..8) of the retained draws.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }
}

/// Unnormalized log posterior: likelihood plus prior.
pub fn log_posterior(
    kind: LikelihoodKind,
    series: &ObservationSeries,
    spec: &PriorSpec,
    v: &ParamVector,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let prior = log_prior(spec, v);
    if prior == f64::NEG_INFINITY {
        return Ok(prior);
    }
    Ok(series_log_likelihood(kind, series, &v.curve, v.noise)? + prior)
}

/// Runs one Metropolis chain and returns the sub-sampled draws.
pub fn run_chain(
    kind: LikelihoodKind,
    series: &ObservationSeries,
    spec: &PriorSpec,
    starting: &ParamVector,
    tuning: &TuningSpec,
    config: &ChainConfig,
) -> Result<Chain> {
    config.validate()?;
    kind.validate()?;
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !in_support(spec, starting) {
        return Err(Error::InvalidStartingValue(format!(
            "{:?} is outside the prior support",
            starting.to_array()
        )));
    }
    let mut current_lp = log_posterior(kind, series, spec, starting)?;
    if !current_lp.is_finite() {
        return Err(Error::InvalidStartingValue(
            "starting values give zero likelihood for the observations".into(),
        ));
    }

    let mut rng = chain_rng(config.seed);
    let sd = tuning.as_array();
    let mut current = starting.to_array();
    let mut current_z = current[7].ln();

    let batch_start = config.n_samples - config.batch_len + 1;
    let mut draws = Vec::with_capacity(config.retained_count());
    let mut next_keep = config.sub_start;
    let mut accepted = 0usize;
    let mut batch_accepted = 0usize;

    for iter in 1..=config.n_samples {
        let mut proposal = current;
        for j in 0..7 {
            let step: f64 = rng.sample(StandardNormal);
            proposal[j] += sd[j] * step;
        }
        let step: f64 = rng.sample(StandardNormal);
        let z = current_z + sd[7] * step;
        proposal[7] = z.exp();

        let proposal_lp = match ParamVector::from_array(proposal) {
            Ok(v) => log_posterior(kind, series, spec, &v).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        };
        let log_ratio = proposal_lp - current_lp + (z - current_z);
        let accept = if log_ratio >= 0.0 {
            true
        } else if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
            false
        } else {
            let u: f64 = rng.random();
            u.ln() < log_ratio
        };
        if accept {
            current = proposal;
            current_z = z;
            current_lp = proposal_lp;
            accepted += 1;
            if iter >= batch_start {
                batch_accepted += 1;
            }
        }
        if iter == next_keep && iter <= config.sub_end {
            draws.push(current);
            next_keep += config.sub_thin;
        }
    }

    Ok(Chain {
        draws,
        accepted,
        n_samples: config.n_samples,
        acc_overall: accepted as f64 / config.n_samples as f64,
        acc_last_batch: batch_accepted as f64 / config.batch_len as f64,
    })
}

/// Writes draws as CSV with a `alpha1..alpha7,sigma2` header and 17
/// significant digits per value.
pub fn write_draws_csv<W: Write>(mut out: W, draws: &[Draw]) -> Result<()> {
    writeln!(out, "{}", PARAM_NAMES.join(","))?;
    for d in draws {
        let row: Vec<String> = d.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads draws written by [`write_draws_csv`]. Columns are matched by header
/// name, so extra columns and reordering are tolerated.
pub fn read_draws_csv<R: Read>(input: R) -> Result<Vec<Draw>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(input));
    let headers = reader.headers()?.clone();
    let mut columns = [0usize; 8];
    for (j, name) in PARAM_NAMES.iter().enumerate() {
        columns[j] = headers
            .iter()
            .position(|h| crate::prior::param_index(h) == Some(j))
            .ok_or_else(|| Error::InvalidParameter(format!("chain file lacks column {name}")))?;
    }
    let mut draws = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut d = [0.0; 8];
        for (j, &c) in columns.iter().enumerate() {
            let field = record.get(c).unwrap_or("");
            d[j] = field.parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "chain row {}: cannot parse `{field}` as {}",
                    i + 2,
                    PARAM_NAMES[j]
                ))
            })?;
        }
        draws.push(d);
    }
    Ok(draws)
}
