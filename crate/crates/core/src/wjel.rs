//! Weighted jackknife empirical likelihood.
//!
//! For pseudo-values `V_i` and weights `w_i` the Lagrange multiplier `lambda`
//! solves `sum_i w_i V_i / (1 + lambda' V_i) = 0`; it maximises the concave dual
//! `f(lambda) = sum_i w_i log(1 + lambda' V_i)`. The log-likelihood ratio is
//! `l = 2 n f(lambda)` and the self-normalised statistic divides it by
//! `sum_i n w_i^2`.

use nalgebra::{DMatrix, DVector};

use crate::depth::WeightVector;
use crate::error::{Error, Result};
use crate::estimating::{EstimatingEquation, Sample};
use crate::hull::origin_in_interior;
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::ustat::{pairwise_sum, Jackknife, PseudoValueSet};

const MAX_HALVINGS: usize = 40;

/// Newton solver settings for the inner multiplier problem.
///
/// `grad_tol` and `barrier_eps` default to data-dependent values when `None`:
/// `1e-10 (1 + |sum_i w_i V_i|)` and `min(1/n, min_i w_i) / 10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub grad_tol: Option<f64>,
    pub barrier_eps: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: None,
            barrier_eps: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if let Some(t) = self.grad_tol {
            if !(t > 0.0) {
                return Err(Error::Config("grad_tol must be positive".into()));
            }
        }
        if let Some(b) = self.barrier_eps {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config("barrier_eps must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of the inner problem at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct WjelEvaluation {
    pub lambda: Vec<f64>,
    /// `l(theta) = 2 sum_i n w_i log(1 + lambda' V_i)`.
    pub ratio: f64,
    /// `ratio / sum_i n w_i^2`.
    pub self_normalized: f64,
    /// `p_i = w_i / (1 + lambda' V_i)`.
    pub probs: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn check_inputs(pv: &PseudoValueSet, w: &WeightVector) -> Result<()> {
    if pv.n() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: pv.n(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Whether the origin lies in the interior of the convex hull of the
/// pseudo-values. Weights only enter through their support, which is the
/// whole sample since every weight is positive.
pub fn convex_hull_check(pv: &PseudoValueSet, w: &WeightVector) -> bool {
    if check_inputs(pv, w).is_err() {
        return false;
    }
    if pv.dim() == 1 {
        let (lo, hi) = pv
            .rows()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[0]), hi.max(v[0])));
        return lo < 0.0 && hi > 0.0;
    }
    let points: Vec<Vec<f64>> = pv.rows().map(<[f64]>::to_vec).collect();
    origin_in_interior(&points)
}

struct DualState {
    lambda: Vec<f64>,
    denoms: Vec<f64>,
    objective: f64,
    grad: Vec<f64>,
}

fn dual_at(pv: &PseudoValueSet, w: &[f64], lambda: &[f64], floor: f64) -> Option<DualState> {
    let r = pv.dim();
    let mut denoms = Vec::with_capacity(pv.n());
    let mut logs = Vec::with_capacity(pv.n());
    for (v, wi) in pv.rows().zip(w) {
        let u = v.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
        let z = 1.0 + u;
        if !(z >= floor) {
            return None;
        }
        denoms.push(z);
        logs.push(wi * u.ln_1p());
    }
    let objective = pairwise_sum(&logs);
    let mut grad = vec![0.0; r];
    for ((v, wi), z) in pv.rows().zip(w).zip(&denoms) {
        let c = wi / z;
        for l in 0..r {
            grad[l] += c * v[l];
        }
    }
    Some(DualState {
        lambda: lambda.to_vec(),
        denoms,
        objective,
        grad,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Multiplier together with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSolution {
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Dual objective `sum_i w_i log(1 + lambda' V_i)` after each accepted step,
    /// starting from zero at `lambda = 0`.
    pub objective_trace: Vec<f64>,
}

/// Damped Newton ascent on the dual; every iterate keeps
/// `1 + lambda' V_i >= barrier_eps`.
pub fn solve_lambda_traced(
    pv: &PseudoValueSet,
    w: &WeightVector,
    cfg: &SolverConfig,
) -> Result<LambdaSolution> {
    check_inputs(pv, w)?;
    cfg.validate()?;
    // every p satisfies the constraint, so the unconstrained optimum p = w is attained
    if pv.rows().all(|v| v.iter().all(|&x| x == 0.0)) {
        return Ok(LambdaSolution {
            lambda: vec![0.0; pv.dim()],
            iterations: 0,
            grad_norm: 0.0,
            objective_trace: vec![0.0],
        });
    }
    if !convex_hull_check(pv, w) {
        return Err(Error::HullViolation);
    }
    let r = pv.dim();
    let n = pv.n();
    let weights = w.weights();
    let barrier = cfg
        .barrier_eps
        .unwrap_or_else(|| 0.1 * (1.0 / n as f64).min(w.min_weight()));

    let mut state = dual_at(pv, weights, &vec![0.0; r], barrier).ok_or(Error::HullViolation)?;
    let tol = cfg.grad_tol.unwrap_or(1e-10 * (1.0 + norm(&state.grad)));
    let mut trace = vec![state.objective];

    for iter in 0..cfg.max_iter {
        let gnorm = norm(&state.grad);
        if gnorm == 0.0 {
            return Ok(LambdaSolution {
                lambda: state.lambda,
                iterations: iter,
                grad_norm: gnorm,
                objective_trace: trace,
            });
        }
        // negative Hessian: sum_i w_i V_i V_i' / z_i^2
        let mut hess = DMatrix::<f64>::zeros(r, r);
        for ((v, wi), z) in pv.rows().zip(weights).zip(&state.denoms) {
            let c = wi / (z * z);
            for s in 0..r {
                for t in 0..=s {
                    hess[(s, t)] += c * v[s] * v[t];
                }
            }
        }
        for s in 0..r {
            for t in 0..s {
                hess[(t, s)] = hess[(s, t)];
            }
        }
        let g = DVector::from_column_slice(&state.grad);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
                match (hess + DMatrix::identity(r, r) * ridge).cholesky() {
                    Some(ch) => ch.solve(&g),
                    None => g.clone(),
                }
            }
        };

        // rounding bound of the summed objective; steps whose predicted gain is
        // below it cannot be ranked by the line search
        let slack = 64.0
            * f64::EPSILON
            * weights
                .iter()
                .zip(&state.denoms)
                .map(|(wi, z)| wi * (z - 1.0).ln_1p().abs())
                .sum::<f64>()
            + 4.0 * f64::EPSILON * state.objective.abs();
        let decrement: f64 = step.iter().zip(&state.grad).map(|(d, g)| d * g).sum();
        // a small gradient alone is not enough when the curvature is small
        if gnorm <= tol && step.norm() <= 1e-12 * (1.0 + norm(&state.lambda)) {
            return Ok(LambdaSolution {
                lambda: state.lambda,
                iterations: iter,
                grad_norm: gnorm,
                objective_trace: trace,
            });
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = state
                .lambda
                .iter()
                .zip(step.iter())
                .map(|(l, d)| l + t * d)
                .collect();
            if let Some(next) = dual_at(pv, weights, &trial, barrier) {
                if next.objective >= state.objective - slack {
                    accepted = Some(next);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                trace.push(next.objective);
                state = next;
            }
            None if 0.5 * decrement <= slack => {
                // the gain is below rounding, so the Newton point is as good as any
                let full: Vec<f64> = state.lambda.iter().zip(step.iter()).map(|(l, d)| l + d).collect();
                if let Some(next) = dual_at(pv, weights, &full, barrier) {
                    state = next;
                }
                return Ok(LambdaSolution {
                    grad_norm: norm(&state.grad),
                    lambda: state.lambda,
                    iterations: iter + 1,
                    objective_trace: trace,
                });
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    grad_norm: gnorm,
                })
            }
        }
    }
    let gnorm = norm(&state.grad);
    if gnorm <= tol {
        Ok(LambdaSolution {
            lambda: state.lambda,
            iterations: cfg.max_iter,
            grad_norm: gnorm,
            objective_trace: trace,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            grad_norm: gnorm,
        })
    }
}

/// Lagrange multiplier solving `sum_i w_i V_i / (1 + lambda' V_i) = 0`.
pub fn solve_lambda(pv: &PseudoValueSet, w: &WeightVector, cfg: &SolverConfig) -> Result<Vec<f64>> {
    solve_lambda_traced(pv, w, cfg).map(|s| s.lambda)
}

/// Weighted JEL log-likelihood ratio and its self-normalised version.
pub fn wjel_ratio(pv: &PseudoValueSet, w: &WeightVector, cfg: &SolverConfig) -> Result<WjelEvaluation> {
    let sol = solve_lambda_traced(pv, w, cfg)?;
    let n = pv.n() as f64;
    let mut terms = Vec::with_capacity(pv.n());
    let mut probs = Vec::with_capacity(pv.n());
    for (v, wi) in pv.rows().zip(w.weights()) {
        let u = v.iter().zip(&sol.lambda).map(|(a, b)| a * b).sum::<f64>();
        let z = 1.0 + u;
        terms.push(n * wi * u.ln_1p());
        probs.push(wi / z);
    }
    let ratio = (2.0 * pairwise_sum(&terms)).max(0.0);
    Ok(WjelEvaluation {
        self_normalized: ratio / w.c_hat(),
        lambda: sol.lambda,
        ratio,
        probs,
        converged: true,
        iterations: sol.iterations,
        grad_norm: sol.grad_norm,
    })
}

/// Self-normalised statistic, `+inf` when the origin leaves the hull or the
/// solver fails.
pub fn self_normalized_statistic(pv: &PseudoValueSet, w: &WeightVector, cfg: &SolverConfig) -> f64 {
    match wjel_ratio(pv, w, cfg) {
        Ok(e) => e.self_normalized,
        Err(_) => f64::INFINITY,
    }
}

/// Settings for profiling out nuisance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    /// Starting nuisance value; the plug-in estimate when `None`.
    pub start: Option<Vec<f64>>,
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            start: None,
            max_evals: 500,
            restarts: 1,
        }
    }
}

/// Profiled ratio `min_beta l(alpha, beta)` with its minimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    pub evaluation: WjelEvaluation,
    pub nuisance: Vec<f64>,
}

/// Minimises the WJEL ratio over the trailing `r - alpha.len()` parameter
/// components with Nelder-Mead.
pub fn profile_ratio(
    eq: &dyn EstimatingEquation,
    sample: &Sample,
    alpha: &[f64],
    w: &WeightVector,
    cfg: &SolverConfig,
    opt: &ProfileConfig,
) -> Result<ProfileResult> {
    let jk = Jackknife::new(eq, sample)?;
    profile_with(&jk, alpha, w, cfg, opt)
}

pub(crate) fn profile_with(
    jk: &Jackknife<'_>,
    alpha: &[f64],
    w: &WeightVector,
    cfg: &SolverConfig,
    opt: &ProfileConfig,
) -> Result<ProfileResult> {
    let r = jk.equation().param_dim();
    let p = alpha.len();
    if p == 0 || p > r {
        return Err(Error::DimensionMismatch { expected: r, got: p });
    }
    let q = r - p;
    let theta_of = |beta: &[f64]| -> Vec<f64> { alpha.iter().chain(beta).copied().collect() };
    if q == 0 {
        let evaluation = wjel_ratio(&jk.at(alpha)?, w, cfg)?;
        return Ok(ProfileResult {
            evaluation,
            nuisance: Vec::new(),
        });
    }
    let start = match &opt.start {
        Some(s) if s.len() == q => s.clone(),
        Some(s) => return Err(Error::DimensionMismatch { expected: q, got: s.len() }),
        None => crate::inference::plug_in_with(jk)?[p..].to_vec(),
    };
    let objective = |beta: &[f64]| -> f64 {
        match jk.at(&theta_of(beta)) {
            Ok(pv) => wjel_ratio(&pv, w, cfg).map_or(f64::INFINITY, |e| e.ratio),
            Err(_) => f64::INFINITY,
        }
    };
    let nm = NelderMeadConfig {
        max_evals: opt.max_evals,
        ..Default::default()
    };
    let scale: Vec<f64> = start.iter().map(|b| 0.1 * (1.0 + b.abs())).collect();
    let mut best = nelder_mead(objective, &start, &scale, nm);
    let mut attempt = 0;
    while attempt < opt.restarts && !(best.value.is_finite() && best.converged) {
        attempt += 1;
        let from: Vec<f64> = if best.value.is_finite() {
            best.x.clone()
        } else {
            start
                .iter()
                .zip(&scale)
                .map(|(b, s)| b + 0.5 * s * attempt as f64)
                .collect()
        };
        let next = nelder_mead(objective, &from, &scale, nm);
        if next.value < best.value || !best.value.is_finite() {
            best = next;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::ProfileFailure("no hull-feasible nuisance value found".into()));
    }
    let evaluation = wjel_ratio(&jk.at(&theta_of(&best.x))?, w, cfg)?;
    Ok(ProfileResult {
        evaluation,
        nuisance: best.x,
    })
}
