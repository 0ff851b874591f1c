//! Uniform priors on the curve parameters and an inverse-gamma prior on
//! `sigma2`.
//!
//! Two of the Uniform priors have parameter-dependent upper bounds: the
//! amplitude is bounded by `upper index bound - minimum` and the spring
//! inflection day by the autumn inflection day. Their normalizing widths move
//! with those parameters, so they are part of [`log_prior`] and therefore of
//! every Metropolis ratio.

use crate::curve::{CurveParams, IndexBounds, CURVE_PARAM_NAMES};
use crate::error::{Error, Result};
use crate::likelihood::NoiseParam;
use crate::special::ln_gamma;

/// Canonical names of all eight sampled parameters.
pub const PARAM_NAMES: [&str; 8] = [
    "alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "alpha6", "alpha7", "sigma2",
];

/// Maps `alpha1`, `alpha.1`, `sigma2`, `sigma.sq` and similar spellings to a
/// parameter index in `0..8`.
pub fn param_index(name: &str) -> Option<usize> {
    let key: String = name
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !matches!(c, '.' | '_' | '-'))
        .collect();
    match key.as_str() {
        "sigma2" | "sigmasq" => Some(7),
        _ => CURVE_PARAM_NAMES.iter().position(|n| *n == key),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(name: &str, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidInterval {
                name: name.to_string(),
                lower,
                upper,
            });
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn contains_strict(&self, v: f64) -> bool {
        v > self.lower && v < self.upper
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Priors whose bounds are fixed numbers and may be overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPrior {
    Minimum,
    SpringRate,
    SummerSlope,
    AutumnRate,
    AutumnDay,
}

impl FixedPrior {
    pub fn from_name(name: &str) -> Result<Self> {
        match param_index(name) {
            Some(0) => Ok(FixedPrior::Minimum),
            Some(2) => Ok(FixedPrior::SpringRate),
            Some(4) => Ok(FixedPrior::SummerSlope),
            Some(5) => Ok(FixedPrior::AutumnRate),
            Some(6) => Ok(FixedPrior::AutumnDay),
            Some(1) | Some(3) => Err(Error::DependentBound(name.to_string())),
            _ => Err(Error::InvalidParameter(format!(
                "no Uniform prior named `{name}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixedPrior::Minimum => "alpha1",
            FixedPrior::SpringRate => "alpha3",
            FixedPrior::SummerSlope => "alpha5",
            FixedPrior::AutumnRate => "alpha6",
            FixedPrior::AutumnDay => "alpha7",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub minimum: Interval,
    pub spring_rate: Interval,
    /// Lower bound of the spring inflection day; its upper bound is the
    /// current autumn inflection day.
    pub spring_day_lower: f64,
    pub summer_slope: Interval,
    pub autumn_rate: Interval,
    pub autumn_day: Interval,
    pub ig_shape: f64,
    pub ig_scale: f64,
    pub bounds: IndexBounds,
}

/// Requested changes to a [`PriorSpec`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorOverrides {
    pub fixed: Vec<(FixedPrior, f64, f64)>,
    pub spring_day_lower: Option<f64>,
    /// Inverse-gamma `(shape, scale)`.
    pub ig: Option<(f64, f64)>,
}

/// The full parameter state of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamVector {
    pub curve: CurveParams,
    pub noise: NoiseParam,
}

impl ParamVector {
    pub fn new(curve: CurveParams, noise: NoiseParam) -> Self {
        Self { curve, noise }
    }

    pub fn from_array(a: [f64; 8]) -> Result<Self> {
        let mut curve = [0.0; 7];
        curve.copy_from_slice(&a[..7]);
        Ok(Self {
            curve: CurveParams::from_array(curve),
            noise: NoiseParam::new(a[7])?,
        })
    }

    pub fn to_array(&self) -> [f64; 8] {
        let c = self.curve.to_array();
        [
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            c[5],
            c[6],
            self.noise.variance(),
        ]
    }
}

/// Default priors for the given index bounds. The inverse-gamma scale has no
/// default and must be supplied; the shape defaults to 2.
pub fn default_priors(bounds: IndexBounds, ig_scale: Option<f64>) -> Result<PriorSpec> {
    let ig_scale = ig_scale.ok_or(Error::MissingIgScale)?;
    let spec = PriorSpec {
        minimum: Interval::new("alpha1", bounds.lower, bounds.upper)?,
        spring_rate: Interval::new("alpha3", 0.0, 1.0)?,
        spring_day_lower: 1.0,
        summer_slope: Interval::new("alpha5", -0.01, 0.01)?,
        autumn_rate: Interval::new("alpha6", 0.0, 1.0)?,
        autumn_day: Interval::new("alpha7", 1.0, 365.0)?,
        ig_shape: 2.0,
        ig_scale,
        bounds,
    };
    spec.validate()?;
    Ok(spec)
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ig_shape > 0.0 && self.ig_shape.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma shape must be positive, got {}",
                self.ig_shape
            )));
        }
        if !(self.ig_scale > 0.0 && self.ig_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma scale must be positive, got {}",
                self.ig_scale
            )));
        }
        if !(self.spring_day_lower.is_finite() && self.spring_day_lower < self.autumn_day.upper) {
            return Err(Error::InvalidInterval {
                name: "alpha4".into(),
                lower: self.spring_day_lower,
                upper: self.autumn_day.upper,
            });
        }
        Ok(())
    }

    fn interval_mut(&mut self, which: FixedPrior) -> &mut Interval {
        match which {
            FixedPrior::Minimum => &mut self.minimum,
            FixedPrior::SpringRate => &mut self.spring_rate,
            FixedPrior::SummerSlope => &mut self.summer_slope,
            FixedPrior::AutumnRate => &mut self.autumn_rate,
            FixedPrior::AutumnDay => &mut self.autumn_day,
        }
    }

    /// Upper bound of the amplitude prior at the given minimum.
    #[inline]
    pub fn amplitude_upper(&self, minimum: f64) -> f64 {
        self.bounds.upper - minimum
    }
}

/// Applies overrides, leaving `spec` untouched on error.
pub fn override_priors(spec: &PriorSpec, overrides: &PriorOverrides) -> Result<PriorSpec> {
    let mut out = spec.clone();
    for &(which, lower, upper) in &overrides.fixed {
        *out.interval_mut(which) = Interval::new(which.name(), lower, upper)?;
    }
    if let Some(lower) = overrides.spring_day_lower {
        out.spring_day_lower = lower;
    }
    if let Some((shape, scale)) = overrides.ig {
        out.ig_shape = shape;
        out.ig_scale = scale;
    }
    out.validate()?;
    Ok(out)
}

/// True when every parameter lies strictly inside its (possibly dependent)
/// prior interval.
pub fn in_support(spec: &PriorSpec, v: &ParamVector) -> bool {
    let c = &v.curve;
    let s2 = v.noise.variance();
    spec.minimum.contains_strict(c.minimum)
        && c.amplitude > 0.0
        && c.amplitude < spec.amplitude_upper(c.minimum)
        && spec.spring_rate.contains_strict(c.spring_rate)
        && c.spring_day > spec.spring_day_lower
        && c.spring_day < c.autumn_day
        && spec.summer_slope.contains_strict(c.summer_slope)
        && spec.autumn_rate.contains_strict(c.autumn_rate)
        && spec.autumn_day.contains_strict(c.autumn_day)
        && s2 > 0.0
        && s2.is_finite()
}

/// Joint log prior density, `-inf` outside the support.
pub fn log_prior(spec: &PriorSpec, v: &ParamVector) -> f64 {
    if !in_support(spec, v) {
        return f64::NEG_INFINITY;
    }
    let c = &v.curve;
    let uniform = -(spec.minimum.width().ln()
        + spec.amplitude_upper(c.minimum).ln()
        + spec.spring_rate.width().ln()
        + (c.autumn_day - spec.spring_day_lower).ln()
        + spec.summer_slope.width().ln()
        + spec.autumn_rate.width().ln()
        + spec.autumn_day.width().ln());
    uniform + ln_inverse_gamma(v.noise.variance(), spec.ig_shape, spec.ig_scale)
}

/// Inverse-gamma log density with shape `a` and scale `b`.
pub fn ln_inverse_gamma(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}
