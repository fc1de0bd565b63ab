//! Point estimates and confidence intervals.
//!
//! Empirical-likelihood intervals are found by inverting the self-normalised
//! statistic against the chi-square quantile: starting from the minimiser of
//! the statistic, each endpoint is bracketed by doubling steps and then refined
//! by bisection. Outside the convex-hull support the statistic is `+inf`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::depth::{depth_weights, uniform_weights, WeightVector, DEFAULT_DEPTH_FLOOR};
use crate::error::{Error, Result};
use crate::estimating::{EstimatingEquation, Sample};
use crate::optim::{golden_section, nelder_mead, NelderMeadConfig};
use crate::special::{chi2_quantile, normal_quantile};
use crate::ustat::Jackknife;
use crate::wjel::{profile_with, wjel_ratio, ProfileConfig, SolverConfig};

/// Absolute tolerance of interval endpoints.
pub const ENDPOINT_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 60;

/// Interval construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Jackknife empirical likelihood (uniform weights).
    Jel,
    /// Spatial-depth weighted jackknife empirical likelihood.
    Wjel,
    /// Normal approximation with jackknife standard error.
    Vj,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Jel => "JEL",
            Method::Wjel => "WJEL",
            Method::Vj => "VJ",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jel" => Ok(Method::Jel),
            "wjel" => Ok(Method::Wjel),
            "vj" => Ok(Method::Vj),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Why an endpoint stopped where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// The statistic crossed the quantile.
    None,
    /// The statistic stayed below the quantile up to the edge of the hull support.
    Hull,
    /// The endpoint was clipped to the parameter's natural range.
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: Method,
    /// Plug-in estimate.
    pub point_estimate: f64,
    /// Minimiser of the inverted statistic (the plug-in for VJ).
    pub center: f64,
    pub lower_truncation: Truncation,
    pub upper_truncation: Truncation,
    /// False if the interior scan found the statistic above the quantile.
    pub monotone: bool,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn hull_truncated(&self) -> bool {
        self.lower_truncation == Truncation::Hull || self.upper_truncation == Truncation::Hull
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("confidence level {level} outside (0, 1)")))
    }
}

/// Root of the U-structure equation for an affine equation: solves
/// `U(A) theta = U(b)`.
pub(crate) fn plug_in_with(jk: &Jackknife<'_>) -> Result<Vec<f64>> {
    let tables = jk.affine().ok_or(Error::NotAffine)?;
    solve_affine(tables.slope_u(), tables.intercept_u())
}

fn solve_affine(slope: &[f64], intercept: &[f64]) -> Result<Vec<f64>> {
    let r = intercept.len();
    if r == 1 {
        if slope[0] == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        return Ok(vec![intercept[0] / slope[0]]);
    }
    let a = DMatrix::from_row_slice(r, r, slope);
    let b = DVector::from_column_slice(intercept);
    let lu = a.lu();
    if lu.determinant() == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    lu.solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::ZeroDenominator)
}

/// Plug-in estimate: the root of `W_n(theta) = 0`, i.e. the ratio of the two
/// U-statistics for the Gini equations.
pub fn plug_in_estimates(eq: &dyn EstimatingEquation, sample: &Sample) -> Result<Vec<f64>> {
    if !eq.is_affine() {
        return Err(Error::NotAffine);
    }
    let k = eq.degree();
    if sample.len() < k.max(2) {
        return Err(Error::InsufficientData {
            needed: k.max(2),
            got: sample.len(),
        });
    }
    if sample.len() == k {
        // a single kernel term; no jackknife needed
        let r = eq.param_dim();
        let pts: Vec<&[f64]> = sample.rows().collect();
        let (mut a, mut b) = (vec![0.0; r * r], vec![0.0; r]);
        eq.affine_parts(&pts, &mut a, &mut b);
        return solve_affine(&a, &b);
    }
    plug_in_with(&Jackknife::new(eq, sample)?)
}

/// Gini index `sum_{i<j} |x_i - x_j| / sum_{i<j} (x_i + x_j)` in `O(n log n)`.
pub fn gini_index_sorted(xs: &[f64]) -> Result<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let diff: f64 = v
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 - n + 1.0))
        .sum();
    let total: f64 = (n - 1.0) * v.iter().sum::<f64>();
    if total == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(diff / total)
}

/// Sum over pairs of `(x_a - x_b) sign(y_a - y_b)`, computed by sorting on `y`.
fn concordance_sum(xs: &[f64], ys: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let n = xs.len() as f64;
    idx.iter()
        .enumerate()
        .map(|(k, &i)| xs[i] * (2.0 * k as f64 - n + 1.0))
        .sum()
}

/// Both Gini correlations `(gamma_1, gamma_2)` in `O(n log n)`. Assumes no ties.
pub fn gini_correlations_sorted(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let sx = concordance_sum(xs, xs);
    let sy = concordance_sum(ys, ys);
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((concordance_sum(xs, ys) / sx, concordance_sum(ys, xs) / sy))
}

/// Minimiser of the WJEL ratio, started at the plug-in estimate.
pub fn wjel_point_estimate(
    eq: &dyn EstimatingEquation,
    sample: &Sample,
    w: &WeightVector,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let jk = Jackknife::new(eq, sample)?;
    let start = plug_in_with(&jk)?;
    point_estimate_with(&jk, &start, w, cfg)
}

fn ratio_at(jk: &Jackknife<'_>, theta: &[f64], w: &WeightVector, cfg: &SolverConfig) -> f64 {
    match jk.at(theta) {
        Ok(pv) => wjel_ratio(&pv, w, cfg).map_or(f64::INFINITY, |e| e.ratio),
        Err(_) => f64::INFINITY,
    }
}

fn point_estimate_with(
    jk: &Jackknife<'_>,
    start: &[f64],
    w: &WeightVector,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let r = start.len();
    let f_start = ratio_at(jk, start, w, cfg);
    if !f_start.is_finite() {
        return Err(Error::ProfileFailure("statistic is infinite at the plug-in start".into()));
    }
    let bounds = jk.equation().bounds();
    if r == 1 {
        let (lo_b, hi_b) = bounds[0];
        let f = |t: f64| ratio_at(jk, &[t], w, cfg);
        let (a, b) = downhill_bracket(&f, start[0], f_start, lo_b, hi_b);
        let m = golden_section(f, a, b, 1e-10 * (1.0 + start[0].abs()));
        return Ok(if m.value <= f_start { m.x } else { start.to_vec() });
    }
    let f = |t: &[f64]| {
        let inside = t.iter().zip(&bounds).all(|(x, (lo, hi))| x >= lo && x <= hi);
        if inside {
            ratio_at(jk, t, w, cfg)
        } else {
            f64::INFINITY
        }
    };
    let scale: Vec<f64> = start.iter().map(|x| 0.1 * (1.0 + x.abs())).collect();
    let mut best = nelder_mead(f, start, &scale, NelderMeadConfig::default());
    if !best.converged {
        let again = nelder_mead(f, &best.x.clone(), &scale, NelderMeadConfig::default());
        if again.value <= best.value {
            best = again;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::ProfileFailure("no finite value of the statistic".into()));
    }
    Ok(if best.value <= f_start { best.x } else { start.to_vec() })
}

/// Finds `[a, b]` around a local minimum of `f` by walking downhill from `x0`.
fn downhill_bracket(f: &dyn Fn(f64) -> f64, x0: f64, f0: f64, lo: f64, hi: f64) -> (f64, f64) {
    let clamp = |x: f64| x.clamp(lo, hi);
    let h = 1e-3 * (1.0 + x0.abs());
    let (fl, fr) = (f(clamp(x0 - h)), f(clamp(x0 + h)));
    if fl >= f0 && fr >= f0 {
        return (clamp(x0 - h), clamp(x0 + h));
    }
    let dir = if fr < fl { 1.0 } else { -1.0 };
    let (mut prev, mut cur, mut fcur) = (x0, clamp(x0 + dir * h), fr.min(fl));
    let mut step = h;
    for _ in 0..MAX_DOUBLINGS {
        step *= 2.0;
        let next = clamp(cur + dir * step);
        let fnext = f(next);
        if fnext > fcur || next == cur {
            let (a, b) = (prev, next);
            return if a < b { (a, b) } else { (b, a) };
        }
        prev = cur;
        cur = next;
        fcur = fnext;
    }
    if prev < cur {
        (prev, cur)
    } else {
        (cur, prev)
    }
}

fn weights_are_uniform(w: &WeightVector) -> bool {
    let first = w.weights()[0];
    w.weights().iter().all(|&x| x == first)
}

/// Scalar statistic for interval inversion: the self-normalised ratio for a
/// scalar equation, or its profile over the nuisance block when the equation
/// carries a one-dimensional interest parameter.
struct ScalarStatistic<'a> {
    jk: Jackknife<'a>,
    w: &'a WeightVector,
    cfg: SolverConfig,
    profile: bool,
}

impl ScalarStatistic<'_> {
    fn value(&self, alpha: f64, start: Option<&[f64]>) -> f64 {
        if !self.profile {
            return match self.jk.at(&[alpha]) {
                Ok(pv) => wjel_ratio(&pv, self.w, &self.cfg).map_or(f64::INFINITY, |e| e.self_normalized),
                Err(_) => f64::INFINITY,
            };
        }
        let opt = ProfileConfig {
            start: start.map(<[f64]>::to_vec),
            ..Default::default()
        };
        profile_with(&self.jk, &[alpha], self.w, &self.cfg, &opt)
            .map_or(f64::INFINITY, |p| p.evaluation.self_normalized)
    }
}

/// Confidence interval `{theta : l(theta) / sum n w^2 <= chi2_{1, level}}` for a
/// scalar parameter (or a scalar interest parameter with nuisance profiled out).
pub fn invert_ci(
    eq: &dyn EstimatingEquation,
    sample: &Sample,
    w: &WeightVector,
    level: f64,
    cfg: &SolverConfig,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let r = eq.param_dim();
    let profile = match (r, eq.split()) {
        (1, _) => false,
        (_, Some(s)) if s.interest == 1 => true,
        _ => {
            return Err(Error::DimensionMismatch { expected: 1, got: r });
        }
    };
    let jk = Jackknife::new(eq, sample)?;
    if w.len() != sample.len() {
        return Err(Error::DimensionMismatch {
            expected: sample.len(),
            got: w.len(),
        });
    }
    let plug = plug_in_with(&jk)?;
    let estimate = point_estimate_with(&jk, &plug, w, cfg)?;
    let center = estimate[0];
    let nuisance_start = (r > 1).then(|| estimate[1..].to_vec());
    let stat = ScalarStatistic {
        jk,
        w,
        cfg: *cfg,
        profile,
    };
    let s = |a: f64| stat.value(a, nuisance_start.as_deref());
    let q = chi2_quantile(1, level)?;
    let s_center = s(center);
    if !(s_center <= q) {
        return Err(Error::Domain(format!(
            "statistic {s_center} at the estimate exceeds the quantile {q}"
        )));
    }
    let (lo_b, hi_b) = eq.bounds()[0];
    let (lower, lower_truncation) = find_endpoint(&s, center, -1.0, q, lo_b, "lower")?;
    let (upper, upper_truncation) = find_endpoint(&s, center, 1.0, q, hi_b, "upper")?;
    let monotone = [lower, upper]
        .iter()
        .all(|&e| (1..=5).all(|k| s(center + k as f64 / 6.0 * (e - center)) <= q));
    Ok(ConfidenceInterval {
        lower,
        upper,
        level,
        method: if weights_are_uniform(w) { Method::Jel } else { Method::Wjel },
        point_estimate: plug[0],
        center,
        lower_truncation,
        upper_truncation,
        monotone,
    })
}

fn find_endpoint(
    s: &dyn Fn(f64) -> f64,
    center: f64,
    dir: f64,
    q: f64,
    bound: f64,
    side: &'static str,
) -> Result<(f64, Truncation)> {
    let past = |x: f64| if dir > 0.0 { x >= bound } else { x <= bound };
    let mut inside = center;
    let mut step = 1e-3 * (1.0 + center.abs());
    let mut outside = None;
    for _ in 0..MAX_DOUBLINGS {
        let mut cand = center + dir * step;
        let at_bound = past(cand);
        if at_bound {
            cand = bound;
        }
        let v = s(cand);
        if v > q {
            outside = Some((cand, v));
            break;
        }
        inside = cand;
        if at_bound {
            return Ok((bound, Truncation::Bound));
        }
        step *= 2.0;
    }
    let (mut out, mut out_val) = outside.ok_or(Error::UnboundedInterval { side })?;
    while (out - inside).abs() > ENDPOINT_TOL {
        let mid = 0.5 * (inside + out);
        let v = s(mid);
        if v > q {
            out = mid;
            out_val = v;
        } else {
            inside = mid;
        }
    }
    let truncation = if out_val.is_infinite() {
        Truncation::Hull
    } else {
        Truncation::None
    };
    Ok((inside, truncation))
}

/// Normal-approximation interval `estimate +- z SE`, with the standard error
/// from delete-one jackknifing of the plug-in estimator.
pub fn vj_interval(eq: &dyn EstimatingEquation, sample: &Sample, level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    if eq.param_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: eq.param_dim(),
        });
    }
    let n = sample.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let jk = Jackknife::new(eq, sample)?;
    let estimate = plug_in_with(&jk)?[0];
    let tables = jk.affine().ok_or(Error::NotAffine)?;
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = tables.leave_one_out(i);
            solve_affine(&a, &b).map(|t| t[0])
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|t| (t - mean).powi(2)).sum::<f64>();
    let half = normal_quantile(0.5 * (1.0 + level))? * var.sqrt();
    Ok(ConfidenceInterval {
        lower: estimate - half,
        upper: estimate + half,
        level,
        method: Method::Vj,
        point_estimate: estimate,
        center: estimate,
        lower_truncation: Truncation::None,
        upper_truncation: Truncation::None,
        monotone: true,
    })
}

/// Weights used by each likelihood method.
pub fn method_weights(method: Method, sample: &Sample) -> Result<WeightVector> {
    match method {
        Method::Wjel => depth_weights(sample, DEFAULT_DEPTH_FLOOR),
        _ => Ok(uniform_weights(sample.len())),
    }
}

/// Interval for `method` with its default weighting.
pub fn confidence_interval(
    eq: &dyn EstimatingEquation,
    sample: &Sample,
    method: Method,
    level: f64,
    cfg: &SolverConfig,
) -> Result<ConfidenceInterval> {
    match method {
        Method::Vj => vj_interval(eq, sample, level),
        Method::Jel | Method::Wjel => {
            let w = method_weights(method, sample)?;
            let mut ci = invert_ci(eq, sample, &w, level, cfg)?;
            ci.method = method;
            Ok(ci)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimating::{GiniCorrelationComponent, GiniIndex, GiniTarget};

    #[test]
    fn gini_index_plug_in() {
        let s = Sample::univariate(&[1.0, 2.0, 3.0]).unwrap();
        let g = plug_in_estimates(&GiniIndex, &s).unwrap()[0];
        assert!((g - 1.0 / 3.0).abs() < 1e-15);
        let c = Sample::univariate(&[2.0; 6]).unwrap();
        assert_eq!(plug_in_estimates(&GiniIndex, &c).unwrap()[0], 0.0);
        let z = Sample::univariate(&[0.0; 4]).unwrap();
        assert_eq!(plug_in_estimates(&GiniIndex, &z), Err(Error::ZeroDenominator));
    }

    #[test]
    fn comonotone_gini_correlation_is_one() {
        let xs = [0.3, -1.0, 2.5, 0.9, 4.0];
        let s = Sample::bivariate(&xs, &xs).unwrap();
        let g = plug_in_estimates(&GiniCorrelationComponent::new(GiniTarget::Gamma1), &s).unwrap()[0];
        assert!((g - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sorted_routes_agree_with_pair_sums() {
        let xs = [0.4, 2.2, 1.1, 7.5, 3.3, 0.9, 5.0];
        let ys = [1.0, 0.2, 3.1, 2.0, -0.5, 4.4, 0.7];
        let s = Sample::univariate(&xs).unwrap();
        let a = plug_in_estimates(&GiniIndex, &s).unwrap()[0];
        assert!((a - gini_index_sorted(&xs).unwrap()).abs() < 1e-14);
        let s = Sample::bivariate(&xs, &ys).unwrap();
        let (g1, g2) = gini_correlations_sorted(&xs, &ys).unwrap();
        let e1 = plug_in_estimates(&GiniCorrelationComponent::new(GiniTarget::Gamma1), &s).unwrap()[0];
        let e2 = plug_in_estimates(&GiniCorrelationComponent::new(GiniTarget::Gamma2), &s).unwrap()[0];
        assert!((g1 - e1).abs() < 1e-13 && (g2 - e2).abs() < 1e-13);
    }

    #[test]
    fn vj_on_constant_data_is_degenerate() {
        let s = Sample::univariate(&[3.0; 8]).unwrap();
        let ci = vj_interval(&GiniIndex, &s, 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.0, 0.0));
    }

    #[test]
    fn vj_is_symmetric() {
        let s = Sample::univariate(&[1.0, 4.0, 2.5, 9.0, 3.2, 0.7]).unwrap();
        let ci = vj_interval(&GiniIndex, &s, 0.95).unwrap();
        assert!(((ci.upper - ci.point_estimate) - (ci.point_estimate - ci.lower)).abs() < 1e-14);
    }

    #[test]
    fn level_is_validated() {
        let s = Sample::univariate(&[1.0, 4.0, 2.5, 9.0]).unwrap();
        let w = uniform_weights(4);
        assert!(invert_ci(&GiniIndex, &s, &w, 1.0, &SolverConfig::default()).is_err());
        assert!(vj_interval(&GiniIndex, &s, 0.0).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("WJEL".parse::<Method>().unwrap(), Method::Wjel);
        assert!("rjel".parse::<Method>().is_err());
    }
}
