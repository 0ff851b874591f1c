use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lsp_bayes::curve::IndexBounds;
use lsp_bayes::posterior::QuadratureConfig;
use lsp_bayes::prior::{
    default_priors, in_support, override_priors, param_index, FixedPrior, PriorOverrides,
    PARAM_NAMES,
};
use lsp_bayes::{ChainConfig, LikelihoodKind, ParamVector, PriorSpec, TuningSpec};

/// Starting values used by the reference `pheno` example.
pub const DEFAULT_START: [f64; 8] = [0.2, 0.5, 0.25, 100.0, 0.0001, 0.25, 200.0, 0.001];
/// Proposal standard deviations used by the reference `pheno` example.
pub const DEFAULT_TUNE: [f64; 8] = [0.001, 0.01, 0.01, 0.5, 0.0001, 0.01, 1.0, 0.1];

pub const DEFAULT_N_SAMPLES: usize = 50_000;
pub const DEFAULT_MEMORY_BUDGET_MB: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Likelihood {
    Normal,
    Tnormal,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Pooled,
    Annual,
}

/// Flat run configuration. Every field is optional so that a file and the
/// command line can be layered; `resolve` fills the gaps with defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub likelihood: Option<Likelihood>,
    pub gamma: Option<[f64; 2]>,
    pub tn_bounds: Option<[f64; 2]>,
    pub n_samples: Option<usize>,
    pub sub_start: Option<usize>,
    pub sub_end: Option<usize>,
    pub sub_thin: Option<usize>,
    pub batch_len: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub min_obs: Option<usize>,
    /// Inverse-gamma `(shape, scale)` for sigma2.
    pub ig: Option<[f64; 2]>,
    pub alpha4_lower: Option<f64>,
    pub pooling: Option<Pooling>,
    pub clamp_beta_eps: Option<f64>,
    pub memory_budget_mb: Option<f64>,
    pub auc_window: Option<[f64; 2]>,
    pub auc_panels: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Observation days for `simulate`.
    pub doys: Option<Vec<f64>>,
    /// Generating parameters for `simulate`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub truth: BTreeMap<String, f64>,
    #[serde(default)]
    pub start: BTreeMap<String, f64>,
    #[serde(default)]
    pub tune: BTreeMap<String, f64>,
    #[serde(default)]
    pub prior: BTreeMap<String, [f64; 2]>,
}

fn canonical(key: &str) -> Result<String> {
    param_index(key)
        .map(|j| PARAM_NAMES[j].to_string())
        .with_context(|| format!("unknown parameter `{key}` (expected alpha1..alpha7 or sigma2)"))
}

fn canonical_map<V: Copy>(map: &BTreeMap<String, V>) -> Result<BTreeMap<String, V>> {
    map.iter().map(|(k, v)| Ok((canonical(k)?, *v))).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        cfg.normalized()
    }

    /// Rewrites parameter keys to their canonical spelling.
    pub fn normalized(mut self) -> Result<Self> {
        self.start = canonical_map(&self.start)?;
        self.tune = canonical_map(&self.tune)?;
        self.prior = canonical_map(&self.prior)?;
        self.truth = canonical_map(&self.truth)?;
        Ok(self)
    }

    /// Values set in `over` win.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            likelihood,
            gamma,
            tn_bounds,
            n_samples,
            sub_start,
            sub_end,
            sub_thin,
            batch_len,
            seed,
            workers,
            min_obs,
            ig,
            alpha4_lower,
            pooling,
            clamp_beta_eps,
            memory_budget_mb,
            auc_window,
            auc_panels,
            input,
            output,
            doys
        );
        self.truth.extend(over.truth);
        self.start.extend(over.start);
        self.tune.extend(over.tune);
        self.prior.extend(over.prior);
        self
    }

    /// Fills every default except the inverse-gamma prior, which has none.
    pub fn with_defaults(mut self) -> Self {
        let gamma = *self.gamma.get_or_insert([0.0, 1.0]);
        let likelihood = *self.likelihood.get_or_insert(Likelihood::Normal);
        if likelihood == Likelihood::Tnormal && self.tn_bounds.is_none() {
            self.tn_bounds = Some(gamma);
        }
        let n = *self.n_samples.get_or_insert(DEFAULT_N_SAMPLES);
        self.sub_start.get_or_insert(1);
        self.sub_end.get_or_insert(n);
        self.sub_thin.get_or_insert(1);
        self.batch_len.get_or_insert(n.clamp(1, 100));
        self.seed.get_or_insert(0);
        self.workers.get_or_insert(1);
        self.min_obs.get_or_insert(9);
        self.alpha4_lower.get_or_insert(1.0);
        self.pooling.get_or_insert(Pooling::Pooled);
        self.memory_budget_mb
            .get_or_insert(DEFAULT_MEMORY_BUDGET_MB);
        self.auc_window.get_or_insert([1.0, 365.0]);
        self.auc_panels.get_or_insert(728);
        for (j, name) in PARAM_NAMES.iter().enumerate() {
            self.start
                .entry(name.to_string())
                .or_insert(DEFAULT_START[j]);
            self.tune.entry(name.to_string()).or_insert(DEFAULT_TUNE[j]);
        }
        self
    }

    pub fn kind(&self) -> Result<LikelihoodKind> {
        Ok(match self.likelihood.unwrap_or(Likelihood::Normal) {
            Likelihood::Normal => LikelihoodKind::Normal,
            Likelihood::Beta => LikelihoodKind::Beta,
            Likelihood::Tnormal => {
                let [a, b] = self.tn_bounds.or(self.gamma).unwrap_or([0.0, 1.0]);
                LikelihoodKind::truncated(a, b)?
            }
        })
    }

    pub fn bounds(&self) -> Result<IndexBounds> {
        let [lo, hi] = self.gamma.unwrap_or([0.0, 1.0]);
        Ok(IndexBounds::new(lo, hi)?)
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        let [t_lo, t_hi] = self.auc_window.unwrap_or([1.0, 365.0]);
        let q = QuadratureConfig {
            t_lo,
            t_hi,
            panels: self.auc_panels.unwrap_or(728),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn chain(&self) -> Result<ChainConfig> {
        let n = self.n_samples.unwrap_or(DEFAULT_N_SAMPLES);
        let config = ChainConfig::new(n)
            .with_subsample(
                self.sub_start.unwrap_or(1),
                self.sub_end.unwrap_or(n),
                self.sub_thin.unwrap_or(1),
            )
            .with_seed(self.seed.unwrap_or(0))
            .with_batch_len(self.batch_len.unwrap_or(n.clamp(1, 100)));
        config.validate()?;
        Ok(config)
    }

    fn vector(map: &BTreeMap<String, f64>, fallback: &[f64; 8]) -> [f64; 8] {
        let mut out = *fallback;
        for (j, name) in PARAM_NAMES.iter().enumerate() {
            if let Some(v) = map.get(*name) {
                out[j] = *v;
            }
        }
        out
    }

    pub fn priors(&self) -> Result<PriorSpec> {
        let [shape, scale] = match self.ig {
            Some(ig) => ig,
            None => bail!(
                "the sigma2 prior scale has no default; pass --ig SHAPE,SCALE (for example --ig 2,0.001)"
            ),
        };
        let base = default_priors(self.bounds()?, Some(scale))?;
        let mut overrides = PriorOverrides {
            ig: Some((shape, scale)),
            spring_day_lower: self.alpha4_lower,
            ..Default::default()
        };
        for (key, [lo, hi]) in &self.prior {
            let which = FixedPrior::from_name(key).with_context(|| match param_index(key) {
                Some(1) => {
                    "alpha2 has upper bound gamma_hi - alpha1 and cannot be set directly".into()
                }
                Some(3) => {
                    "alpha4 has upper bound alpha7; set its lower bound with --alpha4-lower".into()
                }
                _ => format!("no prior can be set for `{key}`"),
            })?;
            overrides.fixed.push((which, *lo, *hi));
        }
        Ok(override_priors(&base, &overrides)?)
    }

    pub fn start(&self) -> Result<ParamVector> {
        Ok(ParamVector::from_array(Self::vector(
            &self.start,
            &DEFAULT_START,
        ))?)
    }

    pub fn tuning(&self) -> Result<TuningSpec> {
        Ok(TuningSpec::new(Self::vector(&self.tune, &DEFAULT_TUNE))?)
    }
}

/// Everything a chain needs, validated.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: LikelihoodKind,
    pub bounds: IndexBounds,
    pub spec: PriorSpec,
    pub start: ParamVector,
    pub tuning: TuningSpec,
    pub chain: ChainConfig,
    pub quadrature: QuadratureConfig,
}

/// Explains which support condition a starting vector breaks.
fn support_violations(spec: &PriorSpec, v: &ParamVector) -> Vec<String> {
    let c = &v.curve;
    let mut out = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };
    let inside = |i: &lsp_bayes::prior::Interval, x: f64| i.contains_strict(x);
    need(
        inside(&spec.minimum, c.minimum),
        format!(
            "alpha1 = {} must lie in ({}, {})",
            c.minimum, spec.minimum.lower, spec.minimum.upper
        ),
    );
    let amp_hi = spec.amplitude_upper(c.minimum);
    need(
        c.amplitude > 0.0 && c.amplitude < amp_hi,
        format!("alpha2 = {} must lie in (0, {amp_hi})", c.amplitude),
    );
    need(
        inside(&spec.spring_rate, c.spring_rate),
        format!(
            "alpha3 = {} must lie in ({}, {})",
            c.spring_rate, spec.spring_rate.lower, spec.spring_rate.upper
        ),
    );
    need(
        c.spring_day > spec.spring_day_lower && c.spring_day < c.autumn_day,
        format!(
            "alpha4 = {} must lie in ({}, alpha7 = {})",
            c.spring_day, spec.spring_day_lower, c.autumn_day
        ),
    );
    need(
        inside(&spec.summer_slope, c.summer_slope),
        format!(
            "alpha5 = {} must lie in ({}, {})",
            c.summer_slope, spec.summer_slope.lower, spec.summer_slope.upper
        ),
    );
    need(
        inside(&spec.autumn_rate, c.autumn_rate),
        format!(
            "alpha6 = {} must lie in ({}, {})",
            c.autumn_rate, spec.autumn_rate.lower, spec.autumn_rate.upper
        ),
    );
    need(
        inside(&spec.autumn_day, c.autumn_day),
        format!(
            "alpha7 = {} must lie in ({}, {})",
            c.autumn_day, spec.autumn_day.lower, spec.autumn_day.upper
        ),
    );
    out
}

impl Model {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.priors()?;
        let start = cfg.start()?;
        if !in_support(&spec, &start) {
            bail!(
                "starting values are outside the prior support: {}",
                support_violations(&spec, &start).join("; ")
            );
        }
        Ok(Self {
            kind: cfg.kind()?,
            bounds: cfg.bounds()?,
            spec,
            start,
            tuning: cfg.tuning()?,
            chain: cfg.chain()?,
            quadrature: cfg.quadrature()?,
        })
    }
}

/// Records the priors actually in force so the sidecar is complete.
pub fn echo_priors(cfg: &mut RunConfig, spec: &PriorSpec) {
    for (name, i) in [
        ("alpha1", spec.minimum),
        ("alpha3", spec.spring_rate),
        ("alpha5", spec.summer_slope),
        ("alpha6", spec.autumn_rate),
        ("alpha7", spec.autumn_day),
    ] {
        cfg.prior.insert(name.to_string(), [i.lower, i.upper]);
    }
}

/// Parses `KEY=V`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Parses `LO,HI`.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| format!("`{a}` is not a number"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| format!("`{b}` is not a number"))?;
    Ok([a, b])
}

/// Parses `KEY=LO,HI`.
pub fn parse_prior(s: &str) -> Result<(String, [f64; 2]), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=LO,HI, got `{s}`"))?;
    Ok((k.trim().to_string(), parse_pair(v)?))
}
