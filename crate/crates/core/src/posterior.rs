//! Posterior summaries and sample-wise derived quantities.
//!
//! Every derived quantity is computed one draw at a time from the retained
//! draws, so its posterior is carried through without approximation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::curve::{autumn, crossover, curve_value, spring, CurveParams};
use crate::error::{Error, Result};
use crate::likelihood::{predictive_draw, LikelihoodKind, NoiseParam, ObservationSeries};
use crate::prior::{param_index, PARAM_NAMES};
use crate::sampler::Draw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

impl PosteriorSummary {
    /// Width of the central 95% credible interval.
    pub fn width95(&self) -> f64 {
        self.q975 - self.q025
    }
}

/// Quantile of sorted data by linear interpolation between order statistics:
/// with `h = (n - 1) p`, returns `x[floor(h)] + (h - floor(h)) (x[floor(h)+1] - x[floor(h)])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Mean, sample standard deviation (n - 1 denominator), median and the 2.5%
/// and 97.5% quantiles.
pub fn summarize(samples: &[f64]) -> Result<PosteriorSummary> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("samples contain NaN".into()));
    }
    let n = samples.len() as f64;
    // Shifting by the first sample keeps constant input exact.
    let shift = samples[0];
    let mean = shift + samples.iter().map(|v| v - shift).sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PosteriorSummary {
        mean,
        sd: (ss / (n - 1.0)).sqrt(),
        median: quantile_sorted(&sorted, 0.5),
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

/// Integration window and panel count for curve-area quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Total Simpson panels; must be even.
    pub panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_lo: 1.0,
            t_hi: 365.0,
            panels: 728,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_lo.is_finite() && self.t_hi.is_finite() && self.t_lo < self.t_hi) {
            return Err(Error::InvalidParameter(format!(
                "quadrature window ({}, {}) is not increasing",
                self.t_lo, self.t_hi
            )));
        }
        if self.panels < 2 || !self.panels.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "quadrature panels must be even and >= 2, got {}",
                self.panels
            )));
        }
        Ok(())
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// Area under the curve over the quadrature window.
///
/// The curve has a kink at the crossover day, so when it falls inside the
/// window each side is integrated with its own Simpson rule, panels split in
/// proportion to the side lengths with at least two per side. The constant
/// `minimum * span` part is added exactly and only the excess over the
/// minimum goes through quadrature.
pub fn auc(p: &CurveParams, q: &QuadratureConfig) -> Result<f64> {
    q.validate()?;
    let delta = crossover(p)?;
    let base = p.minimum * (q.t_hi - q.t_lo);
    let excess_spring = |t: f64| spring(t, p) - p.minimum;
    let excess_autumn = |t: f64| autumn(t, p) - p.minimum;
    let area = if delta <= q.t_lo {
        simpson(excess_autumn, q.t_lo, q.t_hi, q.panels)
    } else if delta >= q.t_hi {
        simpson(excess_spring, q.t_lo, q.t_hi, q.panels)
    } else {
        let (left, right) = split_panels(q, delta);
        simpson(excess_spring, q.t_lo, delta, left) + simpson(excess_autumn, delta, q.t_hi, right)
    };
    Ok(base + area)
}

fn split_panels(q: &QuadratureConfig, delta: f64) -> (usize, usize) {
    let pairs = q.panels / 2;
    let frac = (delta - q.t_lo) / (q.t_hi - q.t_lo);
    let left_pairs = ((pairs as f64 * frac).round() as usize).clamp(1, pairs.max(2) - 1);
    let right_pairs = pairs.saturating_sub(left_pairs).max(1);
    (2 * left_pairs, 2 * right_pairs)
}

#[inline]
fn curve_of(d: &Draw) -> CurveParams {
    CurveParams::from_array([d[0], d[1], d[2], d[3], d[4], d[5], d[6]])
}

/// Fitted curve value at `t` for every draw, in draw order. Draws whose rates
/// sum to zero yield NaN.
pub fn fitted_samples(draws: &[Draw], t: f64) -> Vec<f64> {
    draws
        .iter()
        .map(|d| curve_value(t, &curve_of(d)).unwrap_or(f64::NAN))
        .collect()
}

/// One posterior-predictive observation at `t0` per draw.
pub fn predictive_samples<R: Rng + ?Sized>(
    draws: &[Draw],
    kind: LikelihoodKind,
    t0: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    draws
        .iter()
        .map(|d| {
            let mu = curve_value(t0, &curve_of(d))?;
            predictive_draw(kind, mu, NoiseParam::new(d[7])?, rng)
        })
        .collect()
}

/// Season length `alpha7 - alpha4` per draw.
pub fn season_length_samples(draws: &[Draw]) -> Vec<f64> {
    draws.iter().map(|d| d[6] - d[3]).collect()
}

/// Curve maximum `alpha1 + alpha2` per draw.
pub fn curve_max_samples(draws: &[Draw]) -> Vec<f64> {
    draws.iter().map(|d| d[0] + d[1]).collect()
}

/// Crossover day per draw (NaN where undefined).
pub fn crossover_samples(draws: &[Draw]) -> Vec<f64> {
    draws
        .iter()
        .map(|d| crossover(&curve_of(d)).unwrap_or(f64::NAN))
        .collect()
}

/// Area under the curve per draw (NaN where undefined).
pub fn auc_samples(draws: &[Draw], q: &QuadratureConfig) -> Vec<f64> {
    draws
        .iter()
        .map(|d| auc(&curve_of(d), q).unwrap_or(f64::NAN))
        .collect()
}

/// Fraction of observations that fall inside the central `level` interval
/// of their posterior-predictive distribution, estimated from one predictive
/// draw per retained draw.
pub fn predictive_coverage<R: Rng + ?Sized>(
    draws: &[Draw],
    kind: LikelihoodKind,
    series: &ObservationSeries,
    level: f64,
    rng: &mut R,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let tail = (1.0 - level) / 2.0;
    let mut covered = 0usize;
    for (t, y) in series.iter() {
        let mut pred = predictive_samples(draws, kind, t, rng)?;
        pred.sort_by(f64::total_cmp);
        let lo = quantile_sorted(&pred, tail);
        let hi = quantile_sorted(&pred, 1.0 - tail);
        if (lo..=hi).contains(&y) {
            covered += 1;
        }
    }
    Ok(covered as f64 / series.len() as f64)
}

/// A scalar function of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// Parameter column `0..8` (`alpha1..alpha7, sigma2`).
    Param(usize),
    SeasonLength,
    CurveMax,
    Auc,
    Delta,
}

impl Functional {
    pub fn samples(&self, draws: &[Draw], q: &QuadratureConfig) -> Vec<f64> {
        match *self {
            Functional::Param(j) => draws.iter().map(|d| d[j]).collect(),
            Functional::SeasonLength => season_length_samples(draws),
            Functional::CurveMax => curve_max_samples(draws),
            Functional::Auc => auc_samples(draws, q),
            Functional::Delta => crossover_samples(draws),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Param(j) => f.write_str(PARAM_NAMES[*j]),
            Functional::SeasonLength => f.write_str("season_length"),
            Functional::CurveMax => f.write_str("curve_max"),
            Functional::Auc => f.write_str("auc"),
            Functional::Delta => f.write_str("delta"),
        }
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "season_length" | "lambda" => Ok(Functional::SeasonLength),
            "curve_max" => Ok(Functional::CurveMax),
            "auc" => Ok(Functional::Auc),
            "delta" | "crossover" => Ok(Functional::Delta),
            _ => param_index(s)
                .map(Functional::Param)
                .ok_or_else(|| Error::UnknownFunctional(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Sd,
    Median,
    Q025,
    Q975,
    Width95,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::Mean,
        Statistic::Sd,
        Statistic::Median,
        Statistic::Q025,
        Statistic::Q975,
        Statistic::Width95,
    ];

    pub fn of(&self, s: &PosteriorSummary) -> f64 {
        match self {
            Statistic::Mean => s.mean,
            Statistic::Sd => s.sd,
            Statistic::Median => s.median,
            Statistic::Q025 => s.q025,
            Statistic::Q975 => s.q975,
            Statistic::Width95 => s.width95(),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Sd => "sd",
            Statistic::Median => "median",
            Statistic::Q025 => "q025",
            Statistic::Q975 => "q975",
            Statistic::Width95 => "width95",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownStatistic(s.to_string()))
    }
}

/// Writes `quantity,mean,sd,median,q025,q975` rows.
pub fn write_summary_csv<W: Write>(mut out: W, rows: &[(String, PosteriorSummary)]) -> Result<()> {
    writeln!(out, "quantity,mean,sd,median,q025,q975")?;
    for (name, s) in rows {
        writeln!(
            out,
            "{name},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.mean, s.sd, s.median, s.q025, s.q975
        )?;
    }
    out.flush()?;
    Ok(())
}
