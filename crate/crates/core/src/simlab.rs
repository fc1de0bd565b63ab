//! Simulation designs and the Monte Carlo coverage engine.
//!
//! Every replication draws from its own ChaCha stream selected by
//! `(seed, run * reps + rep)`, so results do not depend on scheduling.
//! Replications are evaluated in parallel chunks and folded in index order,
//! which keeps reports bit-identical across runs and thread counts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::depth::{depth_weights, uniform_weights, DEFAULT_DEPTH_FLOOR};
use crate::error::{Error, Result};
use crate::estimating::{EstimatingEquation, GiniCorrelationComponent, GiniIndex, GiniTarget, Sample};
use crate::inference::{invert_ci, vj_interval, Method};
use crate::wjel::SolverConfig;

pub mod reference;

const CHUNK: usize = 256;

/// Data-generating family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `(1 - eps) N(0, S) + eps N(0, 4 S)` with `S = [[1, rho], [rho, 1]]`.
    ContaminatedNormal { rho: f64, contamination: f64 },
    /// Bivariate Laplace-type Kotz law with scatter `S`: density `~ exp(-|S^{-1/2} x|)`.
    Kotz { rho: f64 },
    /// `Pareto(scale, shape)` with survival `(scale / x)^shape`.
    Pareto { scale: f64, shape: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ContaminatedNormal { .. } => "contaminated-normal",
            Family::Kotz { .. } => "kotz",
            Family::Pareto { .. } => "pareto",
        }
    }

    pub fn is_bivariate(&self) -> bool {
        !matches!(self, Family::Pareto { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::ContaminatedNormal { rho, contamination } => {
                check_rho(rho)?;
                if !(0.0..1.0).contains(&contamination) {
                    return Err(Error::Config(format!("contamination {contamination} outside [0, 1)")));
                }
            }
            Family::Kotz { rho } => check_rho(rho)?,
            Family::Pareto { scale, shape } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Config(format!("theta_scale {scale} must be positive")));
                }
                if !(shape > 1.0 && shape.is_finite()) {
                    return Err(Error::Config(format!("beta_shape {shape} must exceed 1")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::ContaminatedNormal { rho, contamination } => {
                write!(f, "normal(rho={rho}, contamination={contamination})")
            }
            Family::Kotz { rho } => write!(f, "kotz(rho={rho})"),
            Family::Pareto { scale, shape } => write!(f, "pareto({scale}, {shape})"),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > -1.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("rho {rho} outside (-1, 1)")))
    }
}

/// Parameter whose interval is being assessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Gamma1,
    Gamma2,
    GiniIndex,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::Gamma1 => "gamma1",
            Target::Gamma2 => "gamma2",
            Target::GiniIndex => "gini-index",
        }
    }

    pub fn equation(&self) -> Box<dyn EstimatingEquation> {
        match self {
            Target::Gamma1 => Box::new(GiniCorrelationComponent::new(GiniTarget::Gamma1)),
            Target::Gamma2 => Box::new(GiniCorrelationComponent::new(GiniTarget::Gamma2)),
            Target::GiniIndex => Box::new(GiniIndex),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma1" | "gini-corr-1" => Ok(Target::Gamma1),
            "gamma2" | "gini-corr-2" => Ok(Target::Gamma2),
            "gini-index" | "gi" => Ok(Target::GiniIndex),
            other => Err(Error::Config(format!("unknown target '{other}'"))),
        }
    }
}

/// A complete Monte Carlo design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub family: Family,
    pub n: usize,
    pub reps: usize,
    pub runs: usize,
    pub level: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub targets: Vec<Target>,
}

impl SimDesign {
    /// Design with the defaults used throughout: 95% level, JEL and WJEL, and
    /// every target the family supports.
    pub fn new(family: Family, n: usize, reps: usize, runs: usize, seed: u64) -> Self {
        let targets = if family.is_bivariate() {
            vec![Target::Gamma1, Target::Gamma2]
        } else {
            vec![Target::GiniIndex]
        };
        Self {
            family,
            n,
            reps,
            runs,
            level: 0.95,
            seed,
            methods: vec![Method::Jel, Method::Wjel],
            targets,
        }
    }

    pub fn with_targets(mut self, targets: Vec<Target>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Self {
        self.methods = methods;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.n < 3 {
            return Err(Error::Config(format!("n = {} is too small (need >= 3)", self.n)));
        }
        if self.reps == 0 || self.runs == 0 {
            return Err(Error::Config("reps and runs must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0, 1)", self.level)));
        }
        if self.methods.is_empty() || self.targets.is_empty() {
            return Err(Error::Config("methods and targets must be non-empty".into()));
        }
        for t in &self.targets {
            let ok = match t {
                Target::GiniIndex => !self.family.is_bivariate(),
                _ => self.family.is_bivariate(),
            };
            if !ok {
                return Err(Error::Config(format!("target {t} does not fit family {}", self.family.name())));
            }
        }
        Ok(())
    }

    /// Population value of `target` under the design.
    pub fn true_value(&self, target: Target) -> f64 {
        match (self.family, target) {
            (Family::ContaminatedNormal { rho, .. } | Family::Kotz { rho }, Target::Gamma1 | Target::Gamma2) => rho,
            (Family::Pareto { shape, .. }, Target::GiniIndex) => 1.0 / (2.0 * shape - 1.0),
            _ => f64::NAN,
        }
    }

    /// Generator for replication `rep` of outer run `run`.
    pub fn rng_for(&self, run: usize, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((run as u64) * (self.reps as u64) + rep as u64);
        rng
    }

    /// One data set of size `n`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        match self.family {
            Family::ContaminatedNormal { rho, contamination } => {
                sample_contaminated_normal(rho, contamination, self.n, rng)
            }
            Family::Kotz { rho } => sample_kotz(rho, self.n, rng),
            Family::Pareto { scale, shape } => sample_pareto(scale, shape, self.n, rng),
        }
    }

    /// Parses a `key = value` design file. Unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut family = None;
        let (mut rho, mut contamination, mut scale, mut shape) = (None, 0.0, 1.0, None);
        let (mut n, mut reps, mut runs, mut seed) = (None, 1000, 10, 1u64);
        let mut level = 0.95;
        let mut methods = None;
        let mut targets = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: '{v}' is not a number", lineno + 1)))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("line {}: '{v}' is not an integer", lineno + 1)))
            };
            match key {
                "family" => family = Some(value.to_ascii_lowercase()),
                "rho" => rho = Some(num(value)?),
                "contamination" => contamination = num(value)?,
                "theta_scale" => scale = num(value)?,
                "beta_shape" => shape = Some(num(value)?),
                "n" => n = Some(int(value)? as usize),
                "reps" => reps = int(value)? as usize,
                "runs" => runs = int(value)? as usize,
                "level" => level = num(value)?,
                "seed" => seed = int(value)?,
                "methods" => {
                    methods = Some(
                        value
                            .split(',')
                            .filter(|s| !s.trim().is_empty())
                            .map(str::parse)
                            .collect::<Result<Vec<Method>>>()?,
                    )
                }
                "targets" => {
                    targets = Some(
                        value
                            .split(',')
                            .filter(|s| !s.trim().is_empty())
                            .map(str::parse)
                            .collect::<Result<Vec<Target>>>()?,
                    )
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        let need_rho = || rho.ok_or_else(|| Error::Config("missing key 'rho'".into()));
        let family = match family.as_deref() {
            Some("normal" | "contaminated-normal" | "contaminated_normal") => Family::ContaminatedNormal {
                rho: need_rho()?,
                contamination,
            },
            Some("kotz") => Family::Kotz { rho: need_rho()? },
            Some("pareto") => Family::Pareto {
                scale,
                shape: shape.ok_or_else(|| Error::Config("missing key 'beta_shape'".into()))?,
            },
            Some(other) => return Err(Error::Config(format!("unknown family '{other}'"))),
            None => return Err(Error::Config("missing key 'family'".into())),
        };
        let n = n.ok_or_else(|| Error::Config("missing key 'n'".into()))?;
        let mut design = SimDesign::new(family, n, reps, runs, seed);
        design.level = level;
        if let Some(m) = methods {
            design.methods = m;
        }
        if let Some(t) = targets {
            design.targets = t;
        }
        design.validate()?;
        Ok(design)
    }

    /// `key = value` rendering accepted by [`SimDesign::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut lines = vec![format!("family = {}", self.family.name())];
        match self.family {
            Family::ContaminatedNormal { rho, contamination } => {
                lines.push(format!("rho = {rho}"));
                lines.push(format!("contamination = {contamination}"));
            }
            Family::Kotz { rho } => lines.push(format!("rho = {rho}")),
            Family::Pareto { scale, shape } => {
                lines.push(format!("theta_scale = {scale}"));
                lines.push(format!("beta_shape = {shape}"));
            }
        }
        lines.push(format!("n = {}", self.n));
        lines.push(format!("reps = {}", self.reps));
        lines.push(format!("runs = {}", self.runs));
        lines.push(format!("level = {}", self.level));
        lines.push(format!("seed = {}", self.seed));
        let join = |v: Vec<String>| v.join(",");
        lines.push(format!(
            "methods = {}",
            join(self.methods.iter().map(|m| m.as_str().to_ascii_lowercase()).collect())
        ));
        lines.push(format!(
            "targets = {}",
            join(self.targets.iter().map(|t| t.as_str().to_string()).collect())
        ));
        lines.join("\n")
    }
}

/// Image of `(a, b)` under the Cholesky factor of `[[1, rho], [rho, 1]]`.
#[inline]
fn correlated_pair(rho: f64, a: f64, b: f64) -> [f64; 2] {
    [a, rho * a + (1.0 - rho * rho).sqrt() * b]
}

/// `n` points from `(1 - eps) N(0, S) + eps N(0, 4 S)`, mixing per point.
pub fn sample_contaminated_normal<R: Rng + ?Sized>(rho: f64, contamination: f64, n: usize, rng: &mut R) -> Sample {
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let outlier = contamination > 0.0 && rng.random::<f64>() < contamination;
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let scale = if outlier { 2.0 } else { 1.0 };
        let [x, y] = correlated_pair(rho, a, b);
        values.push(scale * x);
        values.push(scale * y);
    }
    Sample::new(2, values).expect("normal draws are finite")
}

/// `n` points `R L u` with `R ~ Gamma(2, 1)`, `u` uniform on the circle and
/// `L L' = S`.
pub fn sample_kotz<R: Rng + ?Sized>(rho: f64, n: usize, rng: &mut R) -> Sample {
    let radial = Gamma::new(2.0, 1.0).expect("valid gamma parameters");
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let r: f64 = radial.sample(rng);
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let [x, y] = correlated_pair(rho, phi.cos(), phi.sin());
        values.push(r * x);
        values.push(r * y);
    }
    Sample::new(2, values).expect("kotz draws are finite")
}

/// `n` draws `scale * U^{-1/shape}` from `Pareto(scale, shape)`.
pub fn sample_pareto<R: Rng + ?Sized>(scale: f64, shape: f64, n: usize, rng: &mut R) -> Sample {
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            scale * u.powf(-1.0 / shape)
        })
        .collect();
    Sample::new(1, xs).expect("pareto draws are finite")
}

/// Aggregated results for one `(target, method)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub target: Target,
    pub method: Method,
    pub true_value: f64,
    /// Mean over runs of the per-run coverage.
    pub coverage: f64,
    pub coverage_sd: f64,
    pub mean_length: f64,
    pub length_sd: f64,
    /// Replications whose interval could not be computed; excluded from the
    /// coverage and length averages.
    pub failures: usize,
    /// Replications with a hull-truncated endpoint.
    pub hull_truncated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub design: SimDesign,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, target: Target, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.target == target && r.method == method)
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Interval { hit: bool, length: f64, hull: bool },
    Failed,
}

fn replicate(design: &SimDesign, cells: &[(Target, Method)], run: usize, rep: usize, cfg: &SolverConfig) -> Vec<Outcome> {
    let mut rng = design.rng_for(run, rep);
    let sample = design.draw(&mut rng);
    let uniform = uniform_weights(sample.len());
    let depth = if design.methods.contains(&Method::Wjel) {
        depth_weights(&sample, DEFAULT_DEPTH_FLOOR).ok()
    } else {
        None
    };
    cells
        .iter()
        .map(|&(target, method)| {
            let eq = target.equation();
            let ci = match method {
                Method::Vj => vj_interval(eq.as_ref(), &sample, design.level),
                Method::Jel => invert_ci(eq.as_ref(), &sample, &uniform, design.level, cfg),
                Method::Wjel => match &depth {
                    Some(w) => invert_ci(eq.as_ref(), &sample, w, design.level, cfg),
                    None => return Outcome::Failed,
                },
            };
            match ci {
                Ok(ci) if ci.lower.is_finite() && ci.upper.is_finite() => Outcome::Interval {
                    hit: ci.contains(design.true_value(target)),
                    length: ci.length(),
                    hull: ci.hull_truncated(),
                },
                _ => Outcome::Failed,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Default)]
struct RunTally {
    hits: usize,
    successes: usize,
    length_sum: f64,
    failures: usize,
    hull: usize,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Runs `design.runs` outer repetitions of `design.reps` replications and
/// aggregates coverage and interval length per `(target, method)`.
pub fn run_coverage_experiment(design: &SimDesign) -> Result<ExperimentReport> {
    run_coverage_experiment_with(design, &SolverConfig::default())
}

pub fn run_coverage_experiment_with(design: &SimDesign, cfg: &SolverConfig) -> Result<ExperimentReport> {
    design.validate()?;
    let cells: Vec<(Target, Method)> = design
        .targets
        .iter()
        .flat_map(|&t| design.methods.iter().map(move |&m| (t, m)))
        .collect();
    let mut per_run: Vec<Vec<RunTally>> = Vec::with_capacity(design.runs);
    for run in 0..design.runs {
        let mut tallies = vec![RunTally::default(); cells.len()];
        let mut start = 0;
        while start < design.reps {
            let end = (start + CHUNK).min(design.reps);
            let chunk: Vec<Vec<Outcome>> = (start..end)
                .into_par_iter()
                .map(|rep| replicate(design, &cells, run, rep, cfg))
                .collect();
            for outcomes in chunk {
                for (t, o) in tallies.iter_mut().zip(outcomes) {
                    match o {
                        Outcome::Interval { hit, length, hull } => {
                            t.successes += 1;
                            t.hits += usize::from(hit);
                            t.length_sum += length;
                            t.hull += usize::from(hull);
                        }
                        Outcome::Failed => t.failures += 1,
                    }
                }
            }
            start = end;
        }
        per_run.push(tallies);
    }
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, &(target, method))| {
            let coverage: Vec<f64> = per_run
                .iter()
                .map(|t| if t[c].successes > 0 { t[c].hits as f64 / t[c].successes as f64 } else { f64::NAN })
                .collect();
            let lengths: Vec<f64> = per_run
                .iter()
                .map(|t| if t[c].successes > 0 { t[c].length_sum / t[c].successes as f64 } else { f64::NAN })
                .collect();
            let (coverage, coverage_sd) = mean_sd(&coverage);
            let (mean_length, length_sd) = mean_sd(&lengths);
            ReportRow {
                target,
                method,
                true_value: design.true_value(target),
                coverage,
                coverage_sd,
                mean_length,
                length_sd,
                failures: per_run.iter().map(|t| t[c].failures).sum(),
                hull_truncated: per_run.iter().map(|t| t[c].hull).sum(),
            }
        })
        .collect();
    Ok(ExperimentReport {
        design: design.clone(),
        rows,
    })
}
