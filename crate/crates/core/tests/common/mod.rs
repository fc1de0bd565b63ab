//! Independent oracles shared by the integration suites. Nothing here calls
//! into the library's U-statistic, solver or depth code.

#![allow(dead_code)]

use depth_jel::estimating::{EstimatingEquation, Sample};
use proptest::prelude::*;

/// All `k`-subsets of `0..n` in lexicographic order, by recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// U-statistic by explicit enumeration of every subset.
pub fn naive_u(eq: &dyn EstimatingEquation, rows: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let r = eq.param_dim();
    let k = eq.degree();
    let mut acc = vec![0.0; r];
    let mut out = vec![0.0; r];
    let subs = subsets(rows.len(), k);
    for s in &subs {
        let pts: Vec<&[f64]> = s.iter().map(|&i| rows[i].as_slice()).collect();
        eq.eval(&pts, theta, &mut out);
        for (a, o) in acc.iter_mut().zip(&out) {
            *a += o;
        }
    }
    acc.iter().map(|a| a / subs.len() as f64).collect()
}

/// Pseudo-values `n U - (n - 1) U^{(-i)}` with every U-statistic enumerated.
pub fn naive_pseudo(eq: &dyn EstimatingEquation, sample: &Sample, theta: &[f64]) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = sample.rows().map(<[f64]>::to_vec).collect();
    let n = rows.len();
    let full = naive_u(eq, &rows, theta);
    (0..n)
        .map(|i| {
            let rest: Vec<Vec<f64>> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| r.clone())
                .collect();
            let loo = naive_u(eq, &rest, theta);
            full.iter()
                .zip(&loo)
                .map(|(f, l)| n as f64 * f - (n - 1) as f64 * l)
                .collect()
        })
        .collect()
}

/// Root of `sum_i w_i v_i / (1 + lam v_i) = 0` on the feasible interval,
/// by plain bisection. `None` when all `v` share a sign.
pub fn bisect_lambda(v: &[f64], w: &[f64]) -> Option<f64> {
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(vmin < 0.0 && vmax > 0.0) {
        return None;
    }
    let g = |lam: f64| -> f64 { v.iter().zip(w).map(|(vi, wi)| wi * vi / (1.0 + lam * vi)).sum() };
    // g decreases on (-1/vmax, -1/vmin)
    let (mut lo, mut hi) = (-1.0 / vmax, -1.0 / vmin);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Classical (unweighted) JEL log-ratio `2 sum log(1 + lam v_i)`.
pub fn owen_jel_ratio(v: &[f64]) -> Option<f64> {
    let w = vec![1.0 / v.len() as f64; v.len()];
    let lam = bisect_lambda(v, &w)?;
    Some(2.0 * v.iter().map(|vi| (lam * vi).ln_1p()).sum::<f64>())
}

/// Spatial depth evaluated straight from the definition.
pub fn depth_by_definition(x: &[f64], rows: &[Vec<f64>]) -> f64 {
    let d = x.len();
    let mut m = vec![0.0; d];
    for r in rows {
        let diff: Vec<f64> = x.iter().zip(r).map(|(a, b)| a - b).collect();
        let nrm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for (mi, di) in m.iter_mut().zip(&diff) {
                *mi += di / nrm;
            }
        }
    }
    1.0 - m.iter().map(|v| (v / rows.len() as f64).powi(2)).sum::<f64>().sqrt()
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Bivariate sample of size `n_lo..=n_hi` with coordinates in `(-5, 5)`.
pub fn bivariate(n_lo: usize, n_hi: usize) -> impl Strategy<Value = Sample> {
    (n_lo..=n_hi).prop_flat_map(|n| {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n).prop_map(|pts| {
            let rows: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            Sample::from_rows(&rows).unwrap()
        })
    })
}

/// Positive univariate sample of size `n_lo..=n_hi`.
pub fn positive(n_lo: usize, n_hi: usize) -> impl Strategy<Value = Sample> {
    (n_lo..=n_hi).prop_flat_map(|n| {
        prop::collection::vec(0.05f64..20.0, n).prop_map(|xs| Sample::univariate(&xs).unwrap())
    })
}

/// Scalar pseudo-value-like vector that straddles zero.
pub fn straddling(n_lo: usize, n_hi: usize) -> impl Strategy<Value = Vec<f64>> {
    (n_lo..=n_hi).prop_flat_map(|n| {
        (prop::collection::vec(-3.0f64..3.0, n), -2.0f64..-0.1, 0.1f64..2.0).prop_map(|(mut v, neg, pos)| {
            v[0] = neg;
            v[1] = pos;
            v
        })
    })
}

/// Positive weights summing to one.
pub fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..5.0, n).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / s).collect()
    })
}

pub mod props;
