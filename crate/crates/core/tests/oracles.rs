//! Monte Carlo oracles for the simulation designs and closed-form checks of
//! the fast estimators.

mod common;

use common::mean_sd;
use depth_jel::depth::{limit_constant_oracle, sample_depths};
use depth_jel::estimating::{GiniCorrelationComponent, GiniIndex, GiniTarget, Sample};
use depth_jel::inference::{gini_correlations_sorted, gini_index_sorted, plug_in_estimates};
use depth_jel::simlab::{sample_contaminated_normal, sample_kotz, sample_pareto, Family, SimDesign};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MILLION: usize = 1_000_000;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn recorded_gini_correlation_truths_reproduce() {
    let table = include_str!("../data/true_values.csv");
    let mut rows = 0;
    for line in table.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let rho: f64 = f[1].parse().unwrap();
        let family = match f[0] {
            "contaminated-normal" => Family::ContaminatedNormal {
                rho,
                contamination: f[2].parse().unwrap(),
            },
            "kotz" => Family::Kotz { rho },
            other => panic!("unexpected family {other}"),
        };
        let n: usize = f[3].parse().unwrap();
        let d = SimDesign::new(family, n, 1, 1, f[4].parse().unwrap());
        let s = d.draw(&mut d.rng_for(0, 0));
        let (g1, g2) = gini_correlations_sorted(&s.column(0), &s.column(1)).unwrap();
        let (r1, r2): (f64, f64) = (f[5].parse().unwrap(), f[6].parse().unwrap());
        assert!((g1 - r1).abs() <= 1e-12 && (g2 - r2).abs() <= 1e-12, "{line}: {g1} {g2}");
        // standard error of the plug-in at 10^6 points is below 1e-3
        assert!((g1 - rho).abs() < 4e-3 && (g2 - rho).abs() < 4e-3, "{line}: {g1} {g2}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn kotz_margins_are_heavier_than_normal() {
    let s = sample_kotz(0.5, MILLION, &mut rng(7));
    let x = s.column(0);
    let (m, sd) = mean_sd(&x);
    let kurt = x.iter().map(|v| ((v - m) / sd).powi(4)).sum::<f64>() / x.len() as f64 - 3.0;
    // E R^4 E cos^4 / (E R^2 E cos^2)^2 - 3 = 120 (3/8) / 9 - 3 = 2
    assert!(kurt > 0.0 && (kurt - 2.0).abs() < 0.2, "excess kurtosis {kurt}");
    for j in 0..2 {
        let (mj, sdj) = mean_sd(&s.column(j));
        assert!(mj.abs() < 3.0 * sdj / (MILLION as f64).sqrt(), "mean {mj}");
    }
}

#[test]
fn kotz_radial_part_is_gamma_two() {
    let rho: f64 = 0.5;
    let s = sample_kotz(rho, MILLION, &mut rng(8));
    // Sigma^{-1/2} via the inverse Cholesky factor
    let c = (1.0 - rho * rho).sqrt();
    let radii: Vec<f64> = s
        .rows()
        .map(|p| {
            let u = p[0];
            let v = (p[1] - rho * p[0]) / c;
            (u * u + v * v).sqrt()
        })
        .collect();
    let (m, _) = mean_sd(&radii);
    let se = 2f64.sqrt() / (MILLION as f64).sqrt();
    assert!((m - 2.0).abs() < 3.0 * se, "radial mean {m}");
}

#[test]
fn pareto_mean_matches_closed_form() {
    for (theta, beta) in [(1.0, 3.0), (4.0, 5.0), (10.0, 15.0)] {
        let s = sample_pareto(theta, beta, MILLION, &mut rng(9));
        let x = s.column(0);
        assert!(x.iter().all(|&v| v >= theta));
        let (m, _) = mean_sd(&x);
        let mean = theta * beta / (beta - 1.0);
        let sd = theta / (beta - 1.0) * (beta / (beta - 2.0)).sqrt();
        assert!((m - mean).abs() < 3.0 * sd / (MILLION as f64).sqrt(), "Pareto({theta},{beta}) mean {m}");
        let gi = gini_index_sorted(&x).unwrap();
        assert!((gi - 1.0 / (2.0 * beta - 1.0)).abs() < 2e-3, "Pareto({theta},{beta}) GI {gi}");
    }
}

#[test]
fn uncontaminated_path_is_plain_bivariate_normal() {
    let rho = 0.5;
    let s = sample_contaminated_normal(rho, 0.0, 100_000, &mut rng(10));
    let (x, y) = (s.column(0), s.column(1));
    let (mx, sx) = mean_sd(&x);
    let (my, sy) = mean_sd(&y);
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0);
    let se = 1.0 / (x.len() as f64).sqrt();
    assert!(mx.abs() < 4.0 * se && my.abs() < 4.0 * se);
    // var(s^2) = 2 / n, var(cov) = (1 + rho^2) / n for a normal pair
    assert!((sx * sx - 1.0).abs() < 4.0 * 2f64.sqrt() * se);
    assert!((sy * sy - 1.0).abs() < 4.0 * 2f64.sqrt() * se);
    assert!((cov - rho).abs() < 4.0 * (1.0 + rho * rho).sqrt() * se);
}

#[test]
fn contamination_inflates_variance_by_the_mixture_factor() {
    let eps = 0.05;
    let s = sample_contaminated_normal(0.0, eps, MILLION, &mut rng(11));
    let (_, sd) = mean_sd(&s.column(0));
    // (1 - eps) * 1 + eps * 4
    let expected = 1.0 + 3.0 * eps;
    assert!((sd * sd - expected).abs() < 0.01, "variance {}", sd * sd);
}

#[test]
fn sorted_estimators_match_quadratic_plug_in() {
    let d = SimDesign::new(Family::Kotz { rho: 0.3 }, 300, 1, 1, 12);
    let s = d.draw(&mut d.rng_for(0, 0));
    let (g1, g2) = gini_correlations_sorted(&s.column(0), &s.column(1)).unwrap();
    let p1 = plug_in_estimates(&GiniCorrelationComponent::new(GiniTarget::Gamma1), &s).unwrap()[0];
    let p2 = plug_in_estimates(&GiniCorrelationComponent::new(GiniTarget::Gamma2), &s).unwrap()[0];
    assert!((g1 - p1).abs() < 1e-12 && (g2 - p2).abs() < 1e-12);

    let p = sample_pareto(1.0, 3.0, 300, &mut rng(13));
    let gi = gini_index_sorted(&p.column(0)).unwrap();
    let pi = plug_in_estimates(&GiniIndex, &p).unwrap()[0];
    assert!((gi - pi).abs() < 1e-12);
}

#[test]
fn univariate_depth_constant_is_four_thirds() {
    // D = 1 - |2U - 1| with U uniform: E D = 1/2, E D^2 = 1/3
    let s = sample_contaminated_normal(0.0, 0.0, 4000, &mut rng(14));
    let x = Sample::univariate(&s.column(0)).unwrap();
    let c = limit_constant_oracle(&sample_depths(&x)).unwrap();
    assert!((c - 4.0 / 3.0).abs() < 0.02, "c = {c}");
}
