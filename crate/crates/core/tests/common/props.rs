//! Property checks run by both the proptest suite and the acceptance gate.
//! Each check returns `Err` with the proptest failure report.

#![allow(dead_code)]

use depth_jel::depth::{depth_weights, sample_depths, spatial_depth, uniform_weights, WeightVector};
use depth_jel::estimating::{GiniCorrelationComponent, GiniIndex, GiniTarget, Sample};
use depth_jel::inference::invert_ci;
use depth_jel::ustat::{jackknife_pseudo_values, u_statistic, Jackknife, PseudoValueSet};
use depth_jel::wjel::{solve_lambda, solve_lambda_traced, wjel_ratio, SolverConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use super::*;

pub const CASES: u32 = 256;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Mean of the pseudo-values equals the U-statistic.
pub fn jackknife_identity(cases: u32) -> Result<(), String> {
    check(cases, (bivariate(3, 60), -1.0f64..1.0), |(s, g)| {
        let eq = GiniCorrelationComponent::new(GiniTarget::Gamma1);
        let pv = jackknife_pseudo_values(&eq, &s, &[g]).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let w = u_statistic(&eq, &s, &[g]).unwrap()[0];
        let mean = pv.column_means()[0];
        prop_assert!(close(mean, w, 1e-10), "mean {mean} vs U {w}");
        Ok(())
    })
}

/// Degree-2 row-sum route against full enumeration of every U-statistic.
pub fn fast_path_matches_naive(cases: u32) -> Result<(), String> {
    check(cases, (bivariate(3, 12), -1.0f64..1.0, -1.0f64..1.0), |(s, g1, g2)| {
        let eq = depth_jel::GiniCorrelation;
        let fast = jackknife_pseudo_values(&eq, &s, &[g1, g2]).unwrap();
        let slow = naive_pseudo(&eq, &s, &[g1, g2]);
        for (i, row) in slow.iter().enumerate() {
            for (a, b) in fast.row(i).iter().zip(row) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "row {i}: {a} vs {b}");
            }
        }
        Ok(())
    })
}

/// Affine tables reproduce direct evaluation at arbitrary parameters.
pub fn affine_matches_direct(cases: u32) -> Result<(), String> {
    check(cases, (positive(3, 40), 0.0f64..1.0, 0.0f64..1.0), |(s, a, b)| {
        let jk = Jackknife::new(&GiniIndex, &s).unwrap();
        for t in [a, b] {
            let fast = jk.at(&[t]).unwrap();
            let direct = jackknife_pseudo_values(&GiniIndex, &s, &[t]).unwrap();
            for (x, y) in fast.as_flat().iter().zip(direct.as_flat()) {
                prop_assert!(close(*x, *y, 1e-10));
            }
        }
        // linear in theta
        let (va, vb) = (jk.at(&[a]).unwrap(), jk.at(&[b]).unwrap());
        let mid = jk.at(&[0.5 * (a + b)]).unwrap();
        for i in 0..s.len() {
            let lin = 0.5 * (va.row(i)[0] + vb.row(i)[0]);
            prop_assert!(close(mid.row(i)[0], lin, 1e-10));
        }
        Ok(())
    })
}

fn rotate(s: &Sample, phi: f64, shift: (f64, f64), scale: f64) -> Sample {
    let (c, sn) = (phi.cos(), phi.sin());
    let rows: Vec<[f64; 2]> = s
        .rows()
        .map(|p| [scale * (c * p[0] - sn * p[1]) + shift.0, scale * (sn * p[0] + c * p[1]) + shift.1])
        .collect();
    Sample::from_rows(&rows).unwrap()
}

/// Spatial depth is invariant to rotation, translation and scaling, and agrees
/// with the definition evaluated directly.
pub fn depth_invariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (bivariate(2, 40), 0.0f64..std::f64::consts::TAU, -50.0f64..50.0, -50.0f64..50.0, 0.1f64..10.0),
        |(s, phi, tx, ty, k)| {
            let base = sample_depths(&s);
            let moved = sample_depths(&rotate(&s, phi, (tx, ty), k));
            let rows: Vec<Vec<f64>> = s.rows().map(<[f64]>::to_vec).collect();
            for i in 0..s.len() {
                prop_assert!((base[i] - moved[i]).abs() <= 1e-10, "{} vs {}", base[i], moved[i]);
                let direct = depth_by_definition(&rows[i], &rows).clamp(0.0, 1.0);
                prop_assert!((base[i] - direct).abs() <= 1e-12);
            }
            Ok(())
        },
    )
}

/// Univariate depth off the sample equals `1 - |2 F_n(x) - 1|`.
pub fn univariate_depth_identity(cases: u32) -> Result<(), String> {
    check(cases, (positive(1, 50), 0.0f64..21.0), |(s, x)| {
        let xs = s.column(0);
        prop_assume!(xs.iter().all(|&v| v != x));
        let fnx = xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
        let d = spatial_depth(&[x], &s);
        prop_assert!((d - (1.0 - (2.0 * fnx - 1.0).abs())).abs() <= 1e-12);
        Ok(())
    })
}

/// A 90% interval sits inside the 95% interval, for JEL and WJEL.
pub fn ci_nesting(cases: u32) -> Result<(), String> {
    check(cases, (bivariate(8, 30), any::<bool>()), |(s, weighted)| {
        let eq = GiniCorrelationComponent::new(GiniTarget::Gamma1);
        let w = if weighted {
            depth_weights(&s, 1e-12).unwrap()
        } else {
            uniform_weights(s.len())
        };
        let cfg = SolverConfig::default();
        let (Ok(a), Ok(b)) = (invert_ci(&eq, &s, &w, 0.90, &cfg), invert_ci(&eq, &s, &w, 0.95, &cfg)) else {
            return Ok(());
        };
        let tol = 2e-6;
        prop_assert!(b.lower <= a.lower + tol && a.upper <= b.upper + tol, "90%: {a:?}\n95%: {b:?}");
        Ok(())
    })
}

/// The whole WJEL curve of the Gini index is unchanged by rescaling the data.
pub fn gini_index_scale_invariance(cases: u32) -> Result<(), String> {
    check(cases, (positive(4, 40), 0.01f64..100.0), |(s, c)| {
        let scaled = s.map(|x| c * x).unwrap();
        let (w, ws) = (depth_weights(&s, 1e-12).unwrap(), depth_weights(&scaled, 1e-12).unwrap());
        let (jk, jks) = (Jackknife::new(&GiniIndex, &s).unwrap(), Jackknife::new(&GiniIndex, &scaled).unwrap());
        let cfg = SolverConfig::default();
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let a = wjel_ratio(&jk.at(&[t]).unwrap(), &w, &cfg);
            let b = wjel_ratio(&jks.at(&[t]).unwrap(), &ws, &cfg);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!(
                    (a.self_normalized - b.self_normalized).abs() <= 1e-9 * (1.0 + a.self_normalized),
                    "t={t}: {} vs {}",
                    a.self_normalized,
                    b.self_normalized
                ),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "t={t}: {a:?} vs {b:?}"),
            }
        }
        Ok(())
    })
}

/// `l = 2 n KL(w || p)`, with `p` a probability vector satisfying the constraint.
pub fn kl_ratio_identity(cases: u32) -> Result<(), String> {
    let strat = straddling(3, 40).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), weights(n))
    });
    check(cases, strat, |(v, w)| {
        let pv = PseudoValueSet::scalar(&v).unwrap();
        let wv = WeightVector::new(w.clone()).unwrap();
        let e = wjel_ratio(&pv, &wv, &SolverConfig::default()).unwrap();
        let n = v.len() as f64;
        let kl: f64 = w.iter().zip(&e.probs).map(|(wi, pi)| wi * (wi / pi).ln()).sum();
        prop_assert!((e.ratio - 2.0 * n * kl).abs() <= 1e-9 * (1.0 + e.ratio), "{} vs {}", e.ratio, 2.0 * n * kl);
        let total: f64 = e.probs.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let moment: f64 = e.probs.iter().zip(&v).map(|(p, x)| p * x).sum();
        prop_assert!(moment.abs() <= 1e-9);
        Ok(())
    })
}

/// Rescaling the pseudo-values by `c` rescales the multiplier by `1/c`.
pub fn lambda_scale_equivariance(cases: u32) -> Result<(), String> {
    check(cases, (straddling(3, 40), 0.01f64..100.0), |(v, c)| {
        let w = uniform_weights(v.len());
        let cfg = SolverConfig::default();
        let pv = PseudoValueSet::scalar(&v).unwrap();
        let l1 = solve_lambda(&pv, &w, &cfg).unwrap()[0];
        let l2 = solve_lambda(&pv.scaled(c), &w, &cfg).unwrap()[0];
        prop_assert!((l2 * c - l1).abs() <= 1e-8 * (1.0 + l1.abs()), "{l1} vs {}", l2 * c);
        Ok(())
    })
}

/// Uniform-weight WJEL equals classical JEL computed independently.
pub fn equal_weights_reduction(cases: u32) -> Result<(), String> {
    check(cases, straddling(3, 100), |v| {
        let w = uniform_weights(v.len());
        let e = wjel_ratio(&PseudoValueSet::scalar(&v).unwrap(), &w, &SolverConfig::default()).unwrap();
        let oracle = owen_jel_ratio(&v).unwrap();
        prop_assert!((e.ratio - oracle).abs() <= 1e-8 * (1.0 + oracle), "{} vs {oracle}", e.ratio);
        prop_assert!((e.self_normalized - e.ratio).abs() <= 1e-12 * (1.0 + e.ratio));
        Ok(())
    })
}

/// Each accepted Newton step does not decrease the dual objective beyond rounding.
pub fn dual_monotone(cases: u32) -> Result<(), String> {
    let strat = straddling(3, 40).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), weights(n))
    });
    check(cases, strat, |(v, w)| {
        let sol = solve_lambda_traced(
            &PseudoValueSet::scalar(&v).unwrap(),
            &WeightVector::new(w).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        for pair in sol.objective_trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-14 * (1.0 + pair[0].abs()), "{:?}", sol.objective_trace);
        }
        Ok(())
    })
}

/// Newton multiplier against dense bisection of the weighted score equation.
pub fn solver_matches_bisection(cases: u32) -> Result<(), String> {
    let strat = straddling(2, 8).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), weights(n))
    });
    check(cases, strat, |(v, w)| {
        let oracle = bisect_lambda(&v, &w).unwrap();
        let got = solve_lambda(
            &PseudoValueSet::scalar(&v).unwrap(),
            &WeightVector::new(w).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap()[0];
        prop_assert!((got - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{got} vs {oracle}");
        Ok(())
    })
}
