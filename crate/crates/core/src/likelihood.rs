//! Observation models for bounded vegetation-index series.
//!
//! Three likelihoods are supported: Normal, Normal truncated to `[a, b]`, and
//! Beta in mean/precision form with precision `1 / sigma2`. Densities that
//! are zero or undefined evaluate to `-inf` so a Metropolis step can reject
//! the proposal without special casing.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::curve::{crossover, curve_value_at, CurveParams, IndexBounds};
use crate::error::{Error, Result};
use crate::special::{
    ln_gamma, ln_normal_mass, normal_cdf, normal_quantile, normal_upper_tail, HALF_LN_2PI,
};

/// Likelihood variance `sigma2`. For the Beta likelihood its reciprocal is the
/// precision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseParam(f64);

impl NoiseParam {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self(sigma2))
    }

    #[inline]
    pub fn variance(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sd(self) -> f64 {
        self.0.sqrt()
    }

    /// Beta precision `phi = 1 / sigma2`.
    #[inline]
    pub fn precision(self) -> f64 {
        1.0 / self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodKind {
    Normal,
    TruncatedNormal { lower: f64, upper: f64 },
    Beta,
}

impl LikelihoodKind {
    pub fn truncated(lower: f64, upper: f64) -> Result<Self> {
        let kind = LikelihoodKind::TruncatedNormal { lower, upper };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        if let LikelihoodKind::TruncatedNormal { lower, upper } = *self {
            if !(lower < upper) || lower.is_nan() || upper.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "truncation bounds must satisfy a < b, got ({lower}, {upper})"
                )));
            }
        }
        Ok(())
    }

    /// Short name used on the command line and in metadata.
    pub fn name(&self) -> &'static str {
        match self {
            LikelihoodKind::Normal => "normal",
            LikelihoodKind::TruncatedNormal { .. } => "tnormal",
            LikelihoodKind::Beta => "beta",
        }
    }
}

/// One pixel's observations: day-of-year and index value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    bounds: IndexBounds,
}

impl ObservationSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, bounds: IndexBounds) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} days but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(t) = times
            .iter()
            .find(|t| !(t.is_finite() && (1.0..=365.0).contains(*t)))
        {
            return Err(Error::InvalidParameter(format!(
                "day of year {t} outside [1, 365]"
            )));
        }
        if let Some(y) = values.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "observation {y} is not finite"
            )));
        }
        Ok(Self {
            times,
            values,
            bounds,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], bounds: IndexBounds) -> Result<Self> {
        let (times, values) = pairs.iter().copied().unzip();
        Self::new(times, values, bounds)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> IndexBounds {
        self.bounds
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

/// Log-density of one likelihood at a fixed `sigma2`, with the parts that do
/// not depend on the mean precomputed.
#[derive(Debug, Clone, Copy)]
pub struct LogDensity {
    kind: LikelihoodKind,
    sigma2: f64,
    sigma: f64,
    ln_norm: f64,
}

impl LogDensity {
    pub fn new(kind: LikelihoodKind, sigma2: NoiseParam) -> Result<Self> {
        kind.validate()?;
        let s2 = sigma2.variance();
        let ln_norm = match kind {
            LikelihoodKind::Normal | LikelihoodKind::TruncatedNormal { .. } => {
                -HALF_LN_2PI - 0.5 * s2.ln()
            }
            LikelihoodKind::Beta => ln_gamma(sigma2.precision()),
        };
        Ok(Self {
            kind,
            sigma2: s2,
            sigma: s2.sqrt(),
            ln_norm,
        })
    }

    #[inline]
    pub fn eval(&self, y: f64, mu: f64) -> f64 {
        match self.kind {
            LikelihoodKind::Normal => self.normal(y, mu),
            LikelihoodKind::TruncatedNormal { lower, upper } => {
                if !(lower..=upper).contains(&y) {
                    return f64::NEG_INFINITY;
                }
                let mass = ln_normal_mass((lower - mu) / self.sigma, (upper - mu) / self.sigma);
                self.normal(y, mu) - mass
            }
            LikelihoodKind::Beta => {
                if !(mu > 0.0 && mu < 1.0 && y > 0.0 && y < 1.0) {
                    return f64::NEG_INFINITY;
                }
                let phi = 1.0 / self.sigma2;
                let p = mu * phi;
                let q = (1.0 - mu) * phi;
                self.ln_norm - ln_gamma(p) - ln_gamma(q)
                    + (p - 1.0) * y.ln()
                    + (q - 1.0) * (-y).ln_1p()
            }
        }
    }

    #[inline]
    fn normal(&self, y: f64, mu: f64) -> f64 {
        let r = y - mu;
        self.ln_norm - 0.5 * r * r / self.sigma2
    }
}

/// `ln f(y | mu, sigma2)` under the given likelihood.
pub fn log_density(kind: LikelihoodKind, y: f64, mu: f64, sigma2: NoiseParam) -> Result<f64> {
    Ok(LogDensity::new(kind, sigma2)?.eval(y, mu))
}

/// Sum of observation log-densities with the curve as the mean.
pub fn series_log_likelihood(
    kind: LikelihoodKind,
    series: &ObservationSeries,
    p: &CurveParams,
    sigma2: NoiseParam,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let density = LogDensity::new(kind, sigma2)?;
    let delta = crossover(p)?;
    let mut total = 0.0;
    for (t, y) in series.iter() {
        let term = density.eval(y, curve_value_at(t, p, delta));
        if term == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += term;
    }
    Ok(total)
}

/// Draws one variate with mean `mu` from the likelihood.
pub fn predictive_draw<R: Rng + ?Sized>(
    kind: LikelihoodKind,
    mu: f64,
    sigma2: NoiseParam,
    rng: &mut R,
) -> Result<f64> {
    kind.validate()?;
    match kind {
        LikelihoodKind::Normal => {
            let z: f64 = StandardNormal.sample(rng);
            Ok(mu + sigma2.sd() * z)
        }
        LikelihoodKind::TruncatedNormal { lower, upper } => {
            Ok(truncated_normal_draw(mu, sigma2.sd(), lower, upper, rng))
        }
        LikelihoodKind::Beta => {
            if !(mu > 0.0 && mu < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Beta mean must lie in (0, 1), got {mu}"
                )));
            }
            let phi = sigma2.precision();
            let beta = Beta::new(mu * phi, (1.0 - mu) * phi)
                .map_err(|e| Error::InvalidParameter(format!("Beta shapes: {e}")))?;
            // Extreme shapes can round to an endpoint; keep the draw in (0, 1).
            let y: f64 = beta.sample(rng);
            Ok(y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
        }
    }
}

/// Inverse-CDF draw from `N(mu, sigma^2)` restricted to `[lower, upper]`.
///
/// When the interval sits in the upper tail the draw is made through the
/// complementary CDF so the uniform interval keeps its resolution.
fn truncated_normal_draw<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    let z_lo = (lower - mu) / sigma;
    let z_hi = (upper - mu) / sigma;
    let u: f64 = rng.random();
    let z = if z_lo > 0.0 {
        let (q_hi, q_lo) = (normal_upper_tail(z_hi), normal_upper_tail(z_lo));
        if !(q_lo > q_hi) {
            return lower;
        }
        -normal_quantile(q_hi + u * (q_lo - q_hi))
    } else {
        let (p_lo, p_hi) = (normal_cdf(z_lo), normal_cdf(z_hi));
        if !(p_hi > p_lo) {
            return if z_hi < 0.0 { upper } else { lower };
        }
        normal_quantile(p_lo + u * (p_hi - p_lo))
    };
    (mu + sigma * z.clamp(z_lo, z_hi)).clamp(lower, upper)
}

/// Generates a synthetic series by drawing one observation per day.
pub fn simulate_series<R: Rng + ?Sized>(
    kind: LikelihoodKind,
    p: &CurveParams,
    sigma2: NoiseParam,
    doys: &[f64],
    bounds: IndexBounds,
    rng: &mut R,
) -> Result<ObservationSeries> {
    if doys.is_empty() {
        return Err(Error::EmptySeries);
    }
    let delta = crossover(p)?;
    let values = doys
        .iter()
        .map(|&t| predictive_draw(kind, curve_value_at(t, p, delta), sigma2, rng))
        .collect::<Result<Vec<_>>>()?;
    ObservationSeries::new(doys.to_vec(), values, bounds)
}
