//! Acceptance suite. Prints one line per criterion to stderr and fails if
//! any criterion fails. Lines marked N/A had an unmet precondition.

mod common;

use std::io::Write;
use std::time::Instant;

use lsp_bayes::brick::{
    fit_brick, ingest_long_csv, read_brick, write_brick, Brick, BrickFitOptions, BrickFitResult,
    Georef, IngestOptions,
};
use lsp_bayes::curve::{autumn, crossover, curve_value_at, spring, CurveParams};
use lsp_bayes::likelihood::{log_density, LikelihoodKind, NoiseParam};
use lsp_bayes::posterior::{auc, summarize, QuadratureConfig};
use lsp_bayes::prior::{override_priors, ParamVector, PriorOverrides, PriorSpec};
use lsp_bayes::rng::chain_rng;
use lsp_bayes::sampler::{run_chain, subsample_indices, ChainConfig, TuningSpec};
use rand::Rng;

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn line(&mut self, id: usize, verdict: Verdict, what: &str, detail: String) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                self.failures.push(id);
                "FAIL"
            }
            Verdict::NotApplicable => "N/A ",
        };
        let _ = writeln!(
            std::io::stderr(),
            "criterion {id:>2} {tag} {what}: {detail}"
        );
    }

    fn check(&mut self, id: usize, ok: bool, what: &str, detail: String) {
        self.line(
            id,
            if ok { Verdict::Pass } else { Verdict::Fail },
            what,
            detail,
        );
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn prior_draw<R: Rng>(rng: &mut R) -> CurveParams {
    let a1 = rng.random_range(0.0..1.0);
    let a7 = rng.random_range(1.0..365.0);
    CurveParams::from_array([
        a1,
        rng.random_range(0.0..1.0 - a1),
        rng.random_range(0.0..1.0),
        rng.random_range(1.0..a7),
        rng.random_range(-0.01..0.01),
        rng.random_range(0.0..1.0),
        a7,
    ])
}

fn criterion_1(report: &mut Report) {
    let t = Instant::now();
    let config = ChainConfig::new(50_000).with_subsample(25_000, 50_000, 25);
    let indices = subsample_indices(&config).len();
    let series = common::simulate(
        LikelihoodKind::Beta,
        &common::synthetic_start().curve,
        0.002,
        &common::doy_schedule(25),
        1,
    );
    let chain = run_chain(
        LikelihoodKind::Beta,
        &series,
        &common::synthetic_spec(),
        &common::synthetic_start(),
        &common::synthetic_tuning(),
        &config,
    )
    .unwrap();
    let secs = t.elapsed().as_secs_f64();
    report.check(
        1,
        indices == 1001 && chain.draws.len() == 1001 && secs < 1.0,
        "sub-sampling 50000/25000/50000/25",
        format!(
            "{indices} indices, {} retained draws, {secs:.2}s",
            chain.draws.len()
        ),
    );
}

fn criterion_2(report: &mut Report) {
    let mut rng = chain_rng(2002);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = prior_draw(&mut rng);
        let d = crossover(&p).unwrap();
        worst = worst.max((spring(d, &p) - autumn(d, &p)).abs());
    }
    report.check(
        2,
        worst < 1e-10,
        "crossover continuity over 1e4 prior draws",
        format!("max |S(d) - A(d)| = {worst:.3e}"),
    );
}

fn criterion_3(report: &mut Report) {
    let t = Instant::now();
    let (ok, detail) = common::conjugate_check(20_000);
    report.check(
        3,
        ok,
        "conjugate sigma2 posterior",
        format!("{detail}, {:.1}s", t.elapsed().as_secs_f64()),
    );
}

fn with_ig_scale(spec: &PriorSpec, b: f64) -> PriorSpec {
    override_priors(
        spec,
        &PriorOverrides {
            ig: Some((2.0, b)),
            ..Default::default()
        },
    )
    .unwrap()
}

/// Builds a brick whose pixels are independent synthetic series and returns
/// the brick together with each pixel's true curve.
fn recovery_brick(
    rows: usize,
    cols: usize,
    kind: LikelihoodKind,
    sigma2: f64,
    seed: u64,
) -> (Brick, Vec<CurveParams>) {
    let doys = common::doy_schedule(25);
    let mut rng = chain_rng(seed);
    let mut brick = Brick::empty(rows, cols, doys.clone(), None).unwrap();
    let mut truths = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let truth = common::draw_truth(&mut rng);
            let series = common::simulate(kind, &truth, sigma2, &doys, rng.random());
            for (k, y) in series.values().iter().enumerate() {
                brick.set(r, c, k, *y as f32);
            }
            truths.push(truth);
        }
    }
    (brick, truths)
}

fn coverage(result: &BrickFitResult, truths: &[CurveParams], params: &[usize]) -> Vec<usize> {
    params
        .iter()
        .map(|&j| {
            result
                .pixels
                .iter()
                .zip(truths)
                .filter(|(fit, truth)| {
                    fit.as_ref().is_some_and(|fit| {
                        let col: Vec<f64> = fit.draws.iter().map(|d| d[j]).collect();
                        let s = summarize(&col).unwrap();
                        let v = truth.to_array()[j];
                        s.q025 <= v && v <= s.q975
                    })
                })
                .count()
        })
        .collect()
}

fn criterion_4(report: &mut Report) {
    let t = Instant::now();
    let (brick, truths) = recovery_brick(10, 20, LikelihoodKind::Beta, 0.003, 4004);
    let n = 200_000;
    let config = ChainConfig::new(n)
        .with_subsample(n / 2, n, 50)
        .with_seed(44);
    let mut opts = BrickFitOptions::new(
        LikelihoodKind::Beta,
        with_ig_scale(&common::synthetic_spec(), 0.001),
        common::synthetic_start(),
        TuningSpec::new([0.003, 0.006, 0.006, 0.6, 0.00003, 0.006, 0.6, 0.1]).unwrap(),
        config,
    );
    opts.workers = workers();
    let params = [0, 1, 3, 6];
    let result = fit_brick(&brick, &opts, None).unwrap();
    let fitted = result.fitted_count();
    let cov = coverage(&result, &truths, &params);
    let ok = fitted == 200 && cov.iter().all(|&c| (176..=198).contains(&c));
    let pct: Vec<String> = cov
        .iter()
        .map(|c| format!("{:.1}%", 100.0 * *c as f64 / 200.0))
        .collect();
    report.check(
        4,
        ok,
        "95% interval coverage of alpha1, alpha2, alpha4, alpha7 over 200 Beta series (IG(2, 0.001))",
        format!("{} of 200 fitted, coverage {}, {:.0}s", fitted, pct.join(" "), t.elapsed().as_secs_f64()),
    );

    // Same data with the prior mean placed at the generating variance.
    opts.spec = with_ig_scale(&common::synthetic_spec(), 0.003);
    let result = fit_brick(&brick, &opts, None).unwrap();
    let cov = coverage(&result, &truths, &params);
    let pct: Vec<String> = cov
        .iter()
        .map(|c| format!("{:.1}%", 100.0 * *c as f64 / 200.0))
        .collect();
    let _ = writeln!(
        std::io::stderr(),
        "             info: same series under IG(2, 0.003): coverage {}",
        pct.join(" ")
    );
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn criterion_5(report: &mut Report) {
    let t = Instant::now();
    let (brick, truths) = recovery_brick(10, 10, LikelihoodKind::Beta, 0.003, 5005);
    // Range of the generating curves over the year.
    let (curve_lo, curve_hi) =
        truths
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                let d = crossover(p).unwrap();
                (1..=365).fold((a, b), |(a, b), t| {
                    let v = curve_value_at(t as f64, p, d);
                    (a.min(v), b.max(v))
                })
            });
    let in_range = curve_lo >= 0.1 && curve_hi <= 0.9;
    let n = 50_000;
    let config = ChainConfig::new(n)
        .with_subsample(n / 2, n, 25)
        .with_seed(55);
    let mut opts = BrickFitOptions::new(
        LikelihoodKind::Beta,
        common::synthetic_spec(),
        common::synthetic_start(),
        TuningSpec::new([0.003, 0.006, 0.006, 0.6, 0.00003, 0.006, 0.6, 0.1]).unwrap(),
        config,
    );
    opts.workers = workers();
    let beta = fit_brick(&brick, &opts, None).unwrap();
    opts.kind = LikelihoodKind::Normal;
    let normal = fit_brick(&brick, &opts, None).unwrap();
    let medians = |r: &BrickFitResult, j: usize| -> Vec<f64> {
        r.pixels
            .iter()
            .map(|f| {
                let col: Vec<f64> = f.as_ref().unwrap().draws.iter().map(|d| d[j]).collect();
                summarize(&col).unwrap().median
            })
            .collect()
    };
    let r4 = pearson(&medians(&beta, 3), &medians(&normal, 3));
    let r7 = pearson(&medians(&beta, 6), &medians(&normal, 6));
    let (lo, hi) = brick
        .values()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    report.check(
        5,
        in_range && r4 > 0.99 && r7 > 0.99,
        "Normal vs Beta posterior-median correlation over 100 pixels",
        format!(
            "rho(alpha4) = {r4:.4}, rho(alpha7) = {r7:.4}, curves in [{curve_lo:.3}, {curve_hi:.3}], observations in [{lo:.3}, {hi:.3}], {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn riemann(p: &CurveParams, lo: f64, hi: f64, cells: usize) -> f64 {
    let delta = crossover(p).unwrap();
    let h = (hi - lo) / cells as f64;
    let mut total = 0.0;
    let mut block = 0.0;
    for i in 0..cells {
        block += curve_value_at(lo + (i as f64 + 0.5) * h, p, delta);
        if i % 1000 == 999 {
            total += block;
            block = 0.0;
        }
    }
    (total + block) * h
}

fn criterion_6(report: &mut Report) {
    let t = Instant::now();
    let q = QuadratureConfig::default();
    let mut rng = chain_rng(6006);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = prior_draw(&mut rng);
        let oracle = riemann(&p, 1.0, 365.0, 1_000_000);
        worst = worst.max(((auc(&p, &q).unwrap() - oracle) / oracle).abs());
    }
    let constant = CurveParams::from_array([0.25, 0.0, 0.3, 120.0, 0.0, 0.2, 280.0]);
    let exact = auc(&constant, &q).unwrap();
    report.check(
        6,
        worst < 1e-6 && exact == 0.25 * 364.0,
        "AUC Simpson vs 1e6-cell Riemann over 100 prior draws",
        format!(
            "max relative error {worst:.3e}, constant curve {exact} (expected 91), {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn acceptance_band_count(tuning: [f64; 8], seed: u64) -> (usize, f64, f64) {
    let (brick, _) = recovery_brick(10, 10, LikelihoodKind::Beta, 0.002, seed);
    let start =
        ParamVector::from_array([0.2, 0.5, 0.25, 100.0, 0.0001, 0.25, 200.0, 0.001]).unwrap();
    let mut opts = BrickFitOptions::new(
        LikelihoodKind::Beta,
        common::synthetic_spec(),
        start,
        TuningSpec::new(tuning).unwrap(),
        ChainConfig::new(50_000)
            .with_subsample(25_000, 50_000, 25)
            .with_seed(seed),
    );
    opts.workers = workers();
    let result = fit_brick(&brick, &opts, None).unwrap();
    let mut acc: Vec<f64> = result
        .pixels
        .iter()
        .flatten()
        .map(|f| f.acc_overall)
        .collect();
    acc.sort_by(f64::total_cmp);
    let inside = acc.iter().filter(|a| (0.20..=0.50).contains(*a)).count();
    (inside, acc[0], acc[acc.len() - 1])
}

fn criterion_7(report: &mut Report) {
    let t = Instant::now();
    let brick_tuning = [0.001, 0.001, 0.005, 0.5, 0.0001, 0.005, 0.5, 0.03];
    let (inside, lo, hi) = acceptance_band_count(brick_tuning, 7007);
    report.check(
        7,
        inside >= 90,
        "overall acceptance in [0.20, 0.50], brick-workflow tunings, 100 Beta pixels",
        format!(
            "{inside} of 100 inside, range [{lo:.3}, {hi:.3}], {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    );
    let pixel_tuning = [0.001, 0.01, 0.01, 0.5, 0.0001, 0.01, 1.0, 0.1];
    let (inside, lo, hi) = acceptance_band_count(pixel_tuning, 7007);
    let _ = writeln!(
        std::io::stderr(),
        "             info: single-pixel workflow tunings: {inside} of 100 inside, range [{lo:.3}, {hi:.3}]"
    );
}

fn criterion_8(report: &mut Report) {
    let (brick, _) = recovery_brick(40, 40, LikelihoodKind::Beta, 0.003, 8008);
    let mut opts = BrickFitOptions::new(
        LikelihoodKind::Beta,
        common::synthetic_spec(),
        common::synthetic_start(),
        common::synthetic_tuning(),
        ChainConfig::new(4000)
            .with_subsample(2001, 4000, 10)
            .with_seed(88),
    );
    let mut timings = Vec::new();
    let mut results = Vec::new();
    for w in [1, 2, 4] {
        opts.workers = w;
        let t = Instant::now();
        results.push(fit_brick(&brick, &opts, None).unwrap());
        timings.push(t.elapsed().as_secs_f64());
    }
    let identical = results[0] == results[1] && results[0] == results[2];
    report.check(
        8,
        identical && results[0].fitted_count() == 1600,
        "40x40 brick bit-identical across workers 1, 2, 4",
        format!(
            "identical = {identical}, {} pixels fitted, times {:.1}s / {:.1}s / {:.1}s",
            results[0].fitted_count(),
            timings[0],
            timings[1],
            timings[2]
        ),
    );
    let ratio = timings[1] / timings[0];
    let cores = workers();
    if cores >= 4 {
        report.check(
            8,
            ratio <= 0.6,
            "workers=2 wall-clock <= 0.6x workers=1",
            format!("ratio {ratio:.3} on {cores} cores"),
        );
    } else {
        report.line(
            8,
            Verdict::NotApplicable,
            "workers=2 wall-clock <= 0.6x workers=1",
            format!("needs >= 4 cores, machine has {cores}; measured ratio {ratio:.3}"),
        );
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

fn criterion_9(report: &mut Report) {
    let mut rng = chain_rng(9009);
    let tn = LikelihoodKind::truncated(0.0, 1.0).unwrap();
    let (mut worst_beta, mut worst_tn) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let mu = rng.random_range(0.05..0.95);
        let s2 = NoiseParam::new(rng.random_range(0.001..0.1)).unwrap();
        let beta = simpson(
            |u| {
                let y = (1.0 - u.cos()) / 2.0;
                if y <= 0.0 || y >= 1.0 {
                    return 0.0;
                }
                log_density(LikelihoodKind::Beta, y, mu, s2).unwrap().exp() * u.sin() / 2.0
            },
            0.0,
            std::f64::consts::PI,
            40_000,
        );
        let mass = simpson(
            |y| log_density(tn, y, mu, s2).unwrap().exp(),
            0.0,
            1.0,
            40_000,
        );
        worst_beta = worst_beta.max((beta - 1.0).abs());
        worst_tn = worst_tn.max((mass - 1.0).abs());
    }
    report.check(
        9,
        worst_beta < 1e-6 && worst_tn < 1e-6,
        "density normalisation over 50 (mu, sigma2) pairs",
        format!("max |integral - 1|: Beta {worst_beta:.2e}, truncated Normal {worst_tn:.2e}"),
    );
}

fn criterion_10(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = chain_rng(1010);
    let mut exact = true;
    for trial in 0..20 {
        let (rows, cols, layers) = (
            rng.random_range(1..8),
            rng.random_range(1..8),
            rng.random_range(1..30),
        );
        let values: Vec<f32> = (0..rows * cols * layers)
            .map(|_| {
                if rng.random_bool(0.1) {
                    f32::NAN
                } else {
                    rng.random::<f32>()
                }
            })
            .collect();
        let doys: Vec<f64> = (0..layers).map(|_| rng.random_range(1.0..365.0)).collect();
        let g = Georef {
            x_origin: 718875.0,
            y_origin: 4694385.0,
            cell_size: 30.0,
        };
        let b = Brick::new(rows, cols, doys, Some(g), values).unwrap();
        let path = dir.path().join(format!("r{trial}.lspb"));
        write_brick(&b, &path).unwrap();
        let back = read_brick(&path).unwrap();
        let bits = |x: &Brick| x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        exact &= bits(&back) == bits(&b) && back.doys() == b.doys() && back.georef() == b.georef();
    }

    let csv = "pixel,x,y,sat,year,doy,evi\n\
               1,718875,4694385,L30,2014,4,NA\n\
               1,718875,4694385,L30,2014,13,NA\n\
               1,718875,4694385,L30,2014,20,0.2871\n\
               2,718905,4694385,S30,2014,4,0.3012\n\
               2,718905,4694385,S30,2014,13,NA\n\
               2,718905,4694385,S30,2014,20,0.3307\n";
    let path = dir.path().join("aoi.csv");
    std::fs::write(&path, csv).unwrap();
    let pooled = ingest_long_csv(&path, &IngestOptions::default()).unwrap();
    // Layers sort by (year, doy, sat): 4/L30, 4/S30, 13/L30, 13/S30, 20/L30, 20/S30.
    let expected_missing = [
        vec![true, true, true, true, false, true],
        vec![true, false, true, true, true, false],
    ];
    let layout_ok = (pooled.rows(), pooled.cols(), pooled.layers()) == (1, 2, 6)
        && (0..2).all(|c| {
            pooled
                .pixel(0, c)
                .iter()
                .zip(&expected_missing[c])
                .all(|(v, miss)| v.is_nan() == *miss)
        })
        && pooled.get(0, 0, 4) == 0.2871f32
        && pooled.get(0, 1, 1) == 0.3012f32;
    report.check(
        10,
        exact && layout_ok,
        "LSPB round trip and long-CSV ingest with NA rows",
        format!("20 random bricks bit-exact = {exact}, NA layout as expected = {layout_ok}"),
    );
}

#[test]
fn acceptance_criteria() {
    let _ = writeln!(
        std::io::stderr(),
        "acceptance suite, {} worker(s) available",
        workers()
    );
    let mut report = Report {
        failures: Vec::new(),
    };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);
    assert!(
        report.failures.is_empty(),
        "failed criteria: {:?}",
        report.failures
    );
}
