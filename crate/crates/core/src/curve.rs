//! Double-logistic phenology curve.
//!
//! The seasonal curve is assembled from a spring logistic and an autumn
//! logistic that share the seasonal minimum, amplitude and midsummer slope.
//! The two branches meet at the crossover day, where their logistic arguments
//! coincide, so the combined curve is continuous.

use crate::error::{Error, Result};

/// Names of the seven curve parameters in their canonical order.
pub const CURVE_PARAM_NAMES: [&str; 7] = [
    "alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "alpha6", "alpha7",
];

/// The seven parameters of the phenology curve.
///
/// Field order matches the canonical `alpha1..alpha7` ordering used by every
/// external file format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    /// Seasonal minimum greenness (`alpha1`, VI units).
    pub minimum: f64,
    /// Seasonal amplitude (`alpha2`, VI units).
    pub amplitude: f64,
    /// Green-up rate (`alpha3`, 1/day).
    pub spring_rate: f64,
    /// Spring inflection day (`alpha4`).
    pub spring_day: f64,
    /// Midsummer greenness trajectory (`alpha5`, VI units per day). Positive
    /// values give a declining midsummer plateau.
    pub summer_slope: f64,
    /// Green-down rate (`alpha6`, 1/day).
    pub autumn_rate: f64,
    /// Autumn inflection day (`alpha7`).
    pub autumn_day: f64,
}

impl CurveParams {
    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            minimum: a[0],
            amplitude: a[1],
            spring_rate: a[2],
            spring_day: a[3],
            summer_slope: a[4],
            autumn_rate: a[5],
            autumn_day: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.minimum,
            self.amplitude,
            self.spring_rate,
            self.spring_day,
            self.summer_slope,
            self.autumn_rate,
            self.autumn_day,
        ]
    }

    /// Checks the structural invariants: finite fields, positive rates and
    /// spring inflection no later than autumn inflection.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.to_array().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{} is not finite",
                CURVE_PARAM_NAMES[i]
            )));
        }
        if self.spring_rate <= 0.0 || self.autumn_rate <= 0.0 {
            return Err(Error::InvalidParameter(
                "green-up and green-down rates must be positive".into(),
            ));
        }
        if self.spring_day > self.autumn_day {
            return Err(Error::InvalidParameter(format!(
                "spring inflection {} is after autumn inflection {}",
                self.spring_day, self.autumn_day
            )));
        }
        Ok(())
    }

    /// The crossover day where the spring and autumn branches meet.
    pub fn crossover(&self) -> Result<f64> {
        crossover(self)
    }
}

/// Lower and upper theoretical bounds of the vegetation index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexBounds {
    pub lower: f64,
    pub upper: f64,
}

impl IndexBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidParameter(format!(
                "index bounds must be finite with lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }
}

/// `1 / (1 + exp(-x))` without overflow for large `|x|`.
#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Spring branch: `minimum + (amplitude - slope t) * logistic(rate (t - day))`.
#[inline]
pub fn spring(t: f64, p: &CurveParams) -> f64 {
    p.minimum + (p.amplitude - p.summer_slope * t) * logistic(p.spring_rate * (t - p.spring_day))
}

/// Autumn branch: `minimum + (amplitude - slope t) * logistic(rate (day - t))`.
#[inline]
pub fn autumn(t: f64, p: &CurveParams) -> f64 {
    p.minimum + (p.amplitude - p.summer_slope * t) * logistic(p.autumn_rate * (p.autumn_day - t))
}

/// Rate-weighted mean of the two inflection days.
pub fn crossover(p: &CurveParams) -> Result<f64> {
    let rate_sum = p.spring_rate + p.autumn_rate;
    if rate_sum == 0.0 {
        return Err(Error::DegenerateRates);
    }
    let delta = (p.spring_rate * p.spring_day + p.autumn_rate * p.autumn_day) / rate_sum;
    if !delta.is_finite() {
        return Err(Error::DegenerateRates);
    }
    Ok(delta)
}

/// Evaluates the combined curve given a precomputed crossover day.
///
/// The spring branch is used up to and including `delta`.
#[inline]
pub fn curve_value_at(t: f64, p: &CurveParams, delta: f64) -> f64 {
    if t <= delta {
        spring(t, p)
    } else {
        autumn(t, p)
    }
}

/// Evaluates the combined phenology curve at day `t`.
pub fn curve_value(t: f64, p: &CurveParams) -> Result<f64> {
    Ok(curve_value_at(t, p, crossover(p)?))
}
