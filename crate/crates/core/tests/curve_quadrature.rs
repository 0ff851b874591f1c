use lsp_bayes::curve::{autumn, crossover, curve_value, curve_value_at, spring, CurveParams};
use lsp_bayes::posterior::{auc, auc_samples, QuadratureConfig};
use lsp_bayes::rng::chain_rng;
use rand::Rng;

// Reference values below were computed with 50-digit arithmetic.
const REF_PARAMS: [f64; 7] = [0.25, 0.55, 0.15, 130.0, 0.0005, 0.12, 270.0];
const SPRING_180: f64 = 0.709_745_721_827_015_144_222_603_7;
const AUTUMN_300: f64 = 0.260_638_797_430_746_342_070_720_3;
const DELTA_REF: f64 = 192.222_222_222_222_222_222_222_2;
const DELTA_ASYM: f64 = 229.555_555_555_555_555_555_555_6;
const AUC_REF: f64 = 153.980_007_531_474_258_273_999_1;

fn reference() -> CurveParams {
    CurveParams::from_array(REF_PARAMS)
}

#[test]
fn branches_match_high_precision_values() {
    let p = reference();
    assert!((spring(180.0, &p) - SPRING_180).abs() < 1e-15);
    assert!((autumn(300.0, &p) - AUTUMN_300).abs() < 1e-15);
    assert!((crossover(&p).unwrap() - DELTA_REF).abs() < 1e-12);

    let mut q = p;
    (q.spring_rate, q.spring_day, q.autumn_rate, q.autumn_day) = (0.07, 133.0, 0.11, 291.0);
    assert!((crossover(&q).unwrap() - DELTA_ASYM).abs() < 1e-12);
}

#[test]
fn saturated_tails() {
    let mut p = CurveParams::from_array([0.2, 0.6, 1.0, 120.0, 0.0, 0.1, 280.0]);
    assert!((spring(1.0, &p) - 0.2).abs() < 1e-9);
    p.spring_rate = 0.1;
    p.autumn_rate = 1.0;
    assert!((autumn(364.0, &p) - 0.2).abs() < 1e-9);
}

fn branch_oracle(t: f64, a: &[f64; 7]) -> f64 {
    let delta = (a[2] * a[3] + a[5] * a[6]) / (a[2] + a[5]);
    if t <= delta {
        a[0] + (a[1] - a[4] * t) / (1.0 + (-a[2] * (t - a[3])).exp())
    } else {
        a[0] + (a[1] - a[4] * t) / (1.0 + (-a[5] * (a[6] - t)).exp())
    }
}

fn prior_draw<R: Rng>(rng: &mut R) -> [f64; 7] {
    let a1 = rng.random_range(0.0..1.0);
    let a7 = rng.random_range(1.0..365.0);
    [
        a1,
        rng.random_range(0.0..1.0 - a1),
        rng.random_range(0.0..1.0),
        rng.random_range(1.0..a7),
        rng.random_range(-0.01..0.01),
        rng.random_range(0.0..1.0),
        a7,
    ]
}

#[test]
fn dense_grid_matches_branch_oracle() {
    let mut rng = chain_rng(11);
    for _ in 0..200 {
        let a = prior_draw(&mut rng);
        let p = CurveParams::from_array(a);
        for day in 1..=365 {
            let t = day as f64;
            let got = curve_value(t, &p).unwrap();
            assert!((got - branch_oracle(t, &a)).abs() <= 1e-12, "t={t} a={a:?}");
        }
    }
}

#[test]
fn half_amplitude_at_inflections() {
    let mut rng = chain_rng(12);
    for _ in 0..500 {
        let mut a = prior_draw(&mut rng);
        a[4] = 0.0;
        let p = CurveParams::from_array(a);
        let half = a[0] + a[1] / 2.0;
        let delta = crossover(&p).unwrap();
        if a[3] <= delta {
            assert!((curve_value(a[3], &p).unwrap() - half).abs() < 1e-12);
        }
        if a[6] > delta {
            assert!((curve_value(a[6], &p).unwrap() - half).abs() < 1e-12);
        }
    }
}

/// Midpoint rule with `cells` cells, summed in blocks to limit rounding.
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

#[test]
fn auc_matches_high_precision_reference() {
    let got = auc(&reference(), &QuadratureConfig::default()).unwrap();
    assert!(
        ((got - AUC_REF) / AUC_REF).abs() < 1e-9,
        "{got} vs {AUC_REF}"
    );
}

#[test]
fn auc_matches_riemann_on_saturated_curve() {
    // Near-step branches: the curve is close to piecewise constant.
    let p = CurveParams::from_array([0.1, 0.7, 1.0, 60.0, 0.0, 1.0, 330.0]);
    let q = QuadratureConfig::default();
    let got = auc(&p, &q).unwrap();
    let oracle = riemann(&p, 1.0, 365.0, 1_000_000);
    assert!(((got - oracle) / oracle).abs() < 1e-6, "{got} vs {oracle}");
    // Plateau approximation: 0.1 * 364 + 0.7 * 270.
    assert!((got - (36.4 + 0.7 * 270.0)).abs() < 1.5);
}

#[test]
fn constant_curve_area_is_exact() {
    let draws = vec![[0.25, 0.0, 0.3, 120.0, 0.0, 0.2, 280.0, 0.01]; 5];
    for v in auc_samples(&draws, &QuadratureConfig::default()) {
        assert_eq!(v, 91.0);
    }
}

#[test]
fn auc_shift_by_minimum() {
    let mut rng = chain_rng(13);
    let q = QuadratureConfig::default();
    for _ in 0..50 {
        let a = prior_draw(&mut rng);
        let mut b = a;
        b[0] += 0.05;
        let (pa, pb) = (CurveParams::from_array(a), CurveParams::from_array(b));
        let diff = auc(&pb, &q).unwrap() - auc(&pa, &q).unwrap();
        assert!((diff - 0.05 * 364.0).abs() < 1e-9);
    }
}

#[test]
fn quadrature_config_validation() {
    let p = reference();
    for q in [
        QuadratureConfig {
            t_lo: 10.0,
            t_hi: 5.0,
            panels: 100,
        },
        QuadratureConfig {
            t_lo: 1.0,
            t_hi: 365.0,
            panels: 7,
        },
        QuadratureConfig {
            t_lo: 1.0,
            t_hi: 365.0,
            panels: 0,
        },
    ] {
        assert!(auc(&p, &q).is_err());
    }
}
