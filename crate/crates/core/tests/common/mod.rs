#![allow(dead_code)]

use lsp_bayes::curve::{curve_value, CurveParams, IndexBounds};
use lsp_bayes::likelihood::{simulate_series, LikelihoodKind, NoiseParam, ObservationSeries};
use lsp_bayes::prior::{
    default_priors, override_priors, FixedPrior, ParamVector, PriorOverrides, PriorSpec,
};
use lsp_bayes::rng::chain_rng;
use lsp_bayes::sampler::{run_chain, ChainConfig, TuningSpec};
use rand::Rng;

/// Roughly fortnightly acquisitions across the year.
pub fn doy_schedule(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (8.0 + k as f64 * 348.0 / (n - 1) as f64).round())
        .collect()
}

/// Curve parameters from the interior of the default prior.
pub fn draw_truth<R: Rng>(rng: &mut R) -> CurveParams {
    CurveParams::from_array([
        rng.random_range(0.1..0.3),
        rng.random_range(0.3..0.6),
        rng.random_range(0.05..0.2),
        rng.random_range(100.0..150.0),
        rng.random_range(0.0..0.0005),
        rng.random_range(0.05..0.2),
        rng.random_range(250.0..300.0),
    ])
}

/// Default priors with the narrower summer-slope prior and IG(2, 0.001).
pub fn synthetic_spec() -> PriorSpec {
    let spec = default_priors(IndexBounds::unit(), Some(0.001)).unwrap();
    override_priors(
        &spec,
        &PriorOverrides {
            fixed: vec![(FixedPrior::SummerSlope, -0.001, 0.001)],
            ..Default::default()
        },
    )
    .unwrap()
}

pub fn synthetic_start() -> ParamVector {
    ParamVector::from_array([0.2, 0.45, 0.1, 125.0, 0.0001, 0.1, 275.0, 0.003]).unwrap()
}

pub fn synthetic_tuning() -> TuningSpec {
    TuningSpec::new([0.005, 0.01, 0.01, 1.0, 0.00005, 0.01, 1.0, 0.15]).unwrap()
}

pub fn simulate(
    kind: LikelihoodKind,
    truth: &CurveParams,
    sigma2: f64,
    doys: &[f64],
    seed: u64,
) -> ObservationSeries {
    simulate_series(
        kind,
        truth,
        NoiseParam::new(sigma2).unwrap(),
        doys,
        IndexBounds::unit(),
        &mut chain_rng(seed),
    )
    .unwrap()
}

/// Mean and Monte-Carlo standard error of the mean by non-overlapping batch
/// means, which accounts for autocorrelation.
fn batch_mean_se(x: &[f64], batches: usize) -> (f64, f64) {
    let n = x.len() / batches * batches;
    let size = n / batches;
    let means: Vec<f64> = x[..n]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (grand, (var / batches as f64).sqrt())
}

/// Normal likelihood with the curve pinned: the sigma2 posterior is
/// IG(a + n/2, b + SS/2).
pub fn conjugate_check(retained: usize) -> (bool, String) {
    let (a, b) = (2.0, 0.001);
    let spec = default_priors(IndexBounds::unit(), Some(b)).unwrap();
    let truth = CurveParams::from_array([0.2, 0.5, 0.1, 130.0, 0.0002, 0.1, 280.0]);
    let doys = doy_schedule(30);
    let series = simulate(LikelihoodKind::Normal, &truth, 0.002, &doys, 7);
    let ss: f64 = series
        .iter()
        .map(|(t, y)| (y - curve_value(t, &truth).unwrap()).powi(2))
        .sum();
    let shape = a + series.len() as f64 / 2.0;
    let scale = b + ss / 2.0;
    let post_mean = scale / (shape - 1.0);
    let post_var = scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0));

    let start = ParamVector::new(truth, NoiseParam::new(0.002).unwrap());
    let tuning = TuningSpec::new([1e-15, 1e-15, 1e-15, 1e-15, 1e-15, 1e-15, 1e-15, 0.5]).unwrap();
    let thin = 5;
    let burn = 1000;
    let n = burn + retained * thin;
    let config = ChainConfig::new(n)
        .with_subsample(burn + thin, n, thin)
        .with_seed(2024);
    let chain = run_chain(
        LikelihoodKind::Normal,
        &series,
        &spec,
        &start,
        &tuning,
        &config,
    )
    .unwrap();
    let s2 = chain.column(7);
    let (mean, se_mean) = batch_mean_se(&s2, 50);
    let centred: Vec<f64> = s2.iter().map(|v| (v - mean).powi(2)).collect();
    let (var, se_var) = batch_mean_se(&centred, 50);
    let ok = (mean - post_mean).abs() < 3.0 * se_mean && (var - post_var).abs() < 3.0 * se_var;
    (
        ok,
        format!(
            "mean {mean:.6e} vs {post_mean:.6e} (3se {:.2e}), var {var:.4e} vs {post_var:.4e} (3se {:.2e}), {} draws",
            3.0 * se_mean,
            3.0 * se_var,
            s2.len()
        ),
    )
}
