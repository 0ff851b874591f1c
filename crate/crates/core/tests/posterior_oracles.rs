mod common;

use lsp_bayes::curve::{curve_value, CurveParams, IndexBounds};
use lsp_bayes::likelihood::{LikelihoodKind, ObservationSeries};
use lsp_bayes::posterior::{
    crossover_samples, curve_max_samples, fitted_samples, predictive_coverage, predictive_samples,
    season_length_samples, summarize, write_summary_csv, Functional, QuadratureConfig, Statistic,
};
use lsp_bayes::rng::chain_rng;
use lsp_bayes::sampler::{read_draws_csv, write_draws_csv, Draw};
use lsp_bayes::special::normal_quantile;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_draws(n: usize, seed: u64) -> Vec<Draw> {
    let mut rng = chain_rng(seed);
    (0..n)
        .map(|_| {
            let c = common::draw_truth(&mut rng).to_array();
            [
                c[0],
                c[1],
                c[2],
                c[3],
                c[4],
                c[5],
                c[6],
                rng.random_range(0.001..0.01),
            ]
        })
        .collect()
}

#[test]
fn normal_sample_quantiles_match_inverse_cdf() {
    let mut rng = chain_rng(41);
    let n = 1001;
    let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = summarize(&xs).unwrap();
    // Binomial standard error of a sample quantile, mapped through the density.
    let band = |p: f64| {
        let z = normal_quantile(p);
        let dens = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        3.0 * (p * (1.0 - p) / n as f64).sqrt() / dens
    };
    assert!((s.median - 0.0).abs() < band(0.5));
    assert!((s.q025 - normal_quantile(0.025)).abs() < band(0.025));
    assert!((s.q975 - normal_quantile(0.975)).abs() < band(0.975));
    assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
}

#[test]
fn derived_functionals_match_loops() {
    let draws = random_draws(300, 42);
    let fitted = fitted_samples(&draws, 150.0);
    let seasons = season_length_samples(&draws);
    let maxima = curve_max_samples(&draws);
    let deltas = crossover_samples(&draws);
    for (i, d) in draws.iter().enumerate() {
        let c = CurveParams::from_array([d[0], d[1], d[2], d[3], d[4], d[5], d[6]]);
        assert_eq!(fitted[i], curve_value(150.0, &c).unwrap());
        assert_eq!(seasons[i], d[6] - d[3]);
        assert!(seasons[i] >= 0.0);
        assert_eq!(maxima[i], d[0] + d[1]);
        assert!(maxima[i] <= 1.0);
        assert_eq!(deltas[i], (d[2] * d[3] + d[5] * d[6]) / (d[2] + d[5]));
    }
}

#[test]
fn fitted_at_inflection_is_half_amplitude() {
    let mut draws = random_draws(100, 43);
    for d in &mut draws {
        d[4] = 0.0;
        d[3] = 130.0;
    }
    let fitted = fitted_samples(&draws, 130.0);
    for (f, d) in fitted.iter().zip(&draws) {
        assert!((f - (d[0] + d[1] / 2.0)).abs() < 1e-12);
    }
}

#[test]
fn functional_parsing() {
    let draws = vec![[0.2, 0.3, 0.1, 120.0, 0.0, 0.1, 280.0, 0.01]; 3];
    let q = QuadratureConfig::default();
    let f: Functional = "season_length".parse().unwrap();
    assert_eq!(f.samples(&draws, &q), vec![160.0; 3]);
    assert_eq!(
        "alpha4".parse::<Functional>().unwrap(),
        Functional::Param(3)
    );
    assert_eq!("delta".parse::<Functional>().unwrap(), Functional::Delta);
    assert!("greenness".parse::<Functional>().is_err());
    assert_eq!("width95".parse::<Statistic>().unwrap(), Statistic::Width95);
    assert!("mode".parse::<Statistic>().is_err());
}

#[test]
fn predictive_variance_decomposition() {
    let mut draws = random_draws(1, 44);
    let d = draws[0];
    draws = vec![d; 20_000];
    let mut rng = chain_rng(45);
    for (i, row) in draws.iter_mut().enumerate() {
        row[7] = 0.002 + 0.004 * (i % 5) as f64 / 4.0;
    }
    let pred = predictive_samples(&draws, LikelihoodKind::Normal, 200.0, &mut rng).unwrap();
    let fitted = fitted_samples(&draws, 200.0);
    let resid: Vec<f64> = pred.iter().zip(&fitted).map(|(p, f)| p - f).collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_s2 = draws.iter().map(|d| d[7]).sum::<f64>() / n;
    // Var of a sample variance is about 2 s^4 / n for normal residuals.
    let se = (2.0 * mean_s2 * mean_s2 / n).sqrt() * 1.5;
    assert!((var - mean_s2).abs() < 3.0 * se, "{var} vs {mean_s2}");

    let tn = LikelihoodKind::truncated(0.0, 1.0).unwrap();
    let tpred = predictive_samples(&draws, tn, 200.0, &mut rng).unwrap();
    assert!(tpred.iter().all(|y| (0.0..=1.0).contains(y)));

    let mut quiet = draws.clone();
    for r in &mut quiet {
        r[7] = 1e-14;
    }
    let qpred = predictive_samples(&quiet, LikelihoodKind::Normal, 200.0, &mut rng).unwrap();
    for (p, f) in qpred.iter().zip(fitted_samples(&quiet, 200.0)) {
        assert!((p - f).abs() < 1e-5);
    }
}

#[test]
fn summary_is_order_invariant() {
    let mut rng = chain_rng(46);
    let mut xs: Vec<f64> = (0..999).map(|_| rng.random_range(-3.0..5.0)).collect();
    let a = summarize(&xs).unwrap();
    xs.shuffle(&mut rng);
    let b = summarize(&xs).unwrap();
    assert_eq!(a.median, b.median);
    assert_eq!(a.q025, b.q025);
    assert_eq!(a.q975, b.q975);
    assert!((a.mean - b.mean).abs() < 1e-14);
    assert!(a.q025 <= a.median && a.median <= a.q975);
}

#[test]
fn coverage_of_exact_model_is_near_nominal() {
    let truth = CurveParams::from_array([0.2, 0.5, 0.1, 130.0, 0.0002, 0.1, 280.0]);
    let doys: Vec<f64> = (0..400).map(|k| 1.0 + (k % 365) as f64).collect();
    let series = common::simulate(LikelihoodKind::Normal, &truth, 0.002, &doys, 47);
    let c = truth.to_array();
    let draws = vec![[c[0], c[1], c[2], c[3], c[4], c[5], c[6], 0.002]; 2000];
    let cov = predictive_coverage(
        &draws,
        LikelihoodKind::Normal,
        &series,
        0.95,
        &mut chain_rng(48),
    )
    .unwrap();
    assert!((cov - 0.95).abs() < 0.04, "{cov}");
    let empty = ObservationSeries::new(vec![], vec![], IndexBounds::unit()).unwrap();
    assert!(predictive_coverage(
        &draws,
        LikelihoodKind::Normal,
        &empty,
        0.95,
        &mut chain_rng(1)
    )
    .is_err());
}

#[test]
fn csv_round_trips_and_summary_header() {
    let draws = random_draws(17, 49);
    let mut buf = Vec::new();
    write_draws_csv(&mut buf, &draws).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("alpha1,alpha2,alpha3,alpha4,alpha5,alpha6,alpha7,sigma2\n"));
    assert_eq!(read_draws_csv(&buf[..]).unwrap(), draws);

    let mut out = Vec::new();
    let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
    write_summary_csv(&mut out, &[("alpha1".into(), s)]).unwrap();
    assert!(String::from_utf8(out)
        .unwrap()
        .starts_with("quantity,mean,sd,median,q025,q975\n"));
}
