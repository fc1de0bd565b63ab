//! Estimating equations with U-statistic structure.
//!
//! An estimating equation is a symmetric kernel `H(x_1, ..., x_k; theta)` of
//! degree `k` returning a vector in `R^r`. The parameter estimate is the root of
//! the U-statistic `W_n(theta)` built from that kernel. Two concrete
//! equations ship with the crate: the Gini correlations and the Gini index.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `n` observations in `R^d`, stored row-major. Every coordinate is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    values: Vec<f64>,
}

impl Sample {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values.len() % dim,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self { dim, values })
    }

    pub fn univariate(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn bivariate(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let values = xs.iter().zip(ys).flat_map(|(&x, &y)| [x, y]).collect();
        Self::new(2, values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `i`-th observation.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Copy of the sample without observation `i`.
    pub fn without(&self, i: usize) -> Sample {
        let mut values = Vec::with_capacity(self.values.len() - self.dim);
        for (j, row) in self.rows().enumerate() {
            if j != i {
                values.extend_from_slice(row);
            }
        }
        Sample {
            dim: self.dim,
            values,
        }
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Sample> {
        Sample::new(self.dim, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Split of a parameter vector into an interest block and a nuisance block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSplit {
    pub interest: usize,
    pub nuisance: usize,
}

/// A parameter value `theta` with an optional interest/nuisance split.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    split: Option<ParamSplit>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter"));
        }
        Ok(Self {
            values,
            split: None,
        })
    }

    pub fn with_split(values: Vec<f64>, interest: usize) -> Result<Self> {
        let mut p = Self::new(values)?;
        if interest > p.values.len() {
            return Err(Error::DimensionMismatch {
                expected: p.values.len(),
                got: interest,
            });
        }
        p.split = Some(ParamSplit {
            interest,
            nuisance: p.values.len() - interest,
        });
        Ok(p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn split(&self) -> Option<ParamSplit> {
        self.split
    }

    pub fn interest(&self) -> &[f64] {
        match self.split {
            Some(s) => &self.values[..s.interest],
            None => &self.values,
        }
    }

    pub fn nuisance(&self) -> &[f64] {
        match self.split {
            Some(s) => &self.values[s.interest..],
            None => &[],
        }
    }
}

/// A symmetric kernel `H(x_1, ..., x_k; theta) -> R^r`.
///
/// Implementations must be total functions and symmetric in the `k` data
/// arguments. Equations that are affine in `theta`, `H = A(x) theta - b(x)`,
/// should report so through [`EstimatingEquation::is_affine`]; the jackknife
/// then precomputes the parameter-free tables once per sample.
pub trait EstimatingEquation: Send + Sync {
    /// Number of sample arguments `k`.
    fn degree(&self) -> usize;

    /// Parameter dimension `r` (also the output length).
    fn param_dim(&self) -> usize;

    /// Dimension `d` of each observation.
    fn data_dim(&self) -> usize;

    /// Writes `H(points; theta)` into `out`.
    fn eval(&self, points: &[&[f64]], theta: &[f64], out: &mut [f64]);

    fn is_affine(&self) -> bool {
        false
    }

    /// Decomposes an affine kernel as `H = A theta - b`, writing `A` row-major
    /// into `slope` (`r * r`) and `b` into `intercept` (`r`).
    ///
    /// The default recovers both from `r + 1` evaluations, which is exact
    /// whenever the kernel really is affine.
    fn affine_parts(&self, points: &[&[f64]], slope: &mut [f64], intercept: &mut [f64]) {
        let r = self.param_dim();
        let mut theta = vec![0.0; r];
        let mut base = vec![0.0; r];
        self.eval(points, &theta, &mut base);
        for (b, h0) in intercept.iter_mut().zip(&base) {
            *b = -h0;
        }
        let mut col = vec![0.0; r];
        for j in 0..r {
            theta[j] = 1.0;
            self.eval(points, &theta, &mut col);
            for l in 0..r {
                slope[l * r + j] = col[l] - base[l];
            }
            theta[j] = 0.0;
        }
    }

    /// Natural range of each parameter component.
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.param_dim()]
    }

    /// Default interest/nuisance split, if the equation has one.
    fn split(&self) -> Option<ParamSplit> {
        None
    }

    fn name(&self) -> &str {
        "custom"
    }
}

/// Concordance part of the Gini covariance: `1/4 [(x1 - x2) I(y1 > y2) + (x2 - x1) I(y2 > y1)]`.
///
/// The indicators are strict, so ties in `y` contribute zero.
#[inline]
pub fn gini_concordance(z1: [f64; 2], z2: [f64; 2]) -> f64 {
    let (x1, y1) = (z1[0], z1[1]);
    let (x2, y2) = (z2[0], z2[1]);
    let mut s = 0.0;
    if y1 > y2 {
        s += x1 - x2;
    }
    if y2 > y1 {
        s += x2 - x1;
    }
    0.25 * s
}

/// Mean-difference part of the Gini covariance: `1/4 |x1 - x2|`.
#[inline]
pub fn gini_spread(z1: [f64; 2], z2: [f64; 2]) -> f64 {
    0.25 * (z1[0] - z2[0]).abs()
}

#[inline]
fn swap(z: [f64; 2]) -> [f64; 2] {
    [z[1], z[0]]
}

/// Gini correlation kernel `(H_1, H_2)` for a pair of bivariate points.
///
/// `H_1` uses the `(x, y)` ordering and targets `gamma_1 = cov(X, G(Y)) / cov(X, F(X))`;
/// `H_2` uses `(y, x)` and targets `gamma_2`.
pub fn gini_corr_kernel(z1: [f64; 2], z2: [f64; 2], gamma: [f64; 2]) -> [f64; 2] {
    let h1 = gini_spread(z1, z2) * gamma[0] - gini_concordance(z1, z2);
    let (w1, w2) = (swap(z1), swap(z2));
    let h2 = gini_spread(w1, w2) * gamma[1] - gini_concordance(w1, w2);
    [h1, h2]
}

/// Gini index kernel `(x1 + x2) g - |x1 - x2|`.
#[inline]
pub fn gini_index_kernel(x1: f64, x2: f64, g: f64) -> f64 {
    (x1 + x2) * g - (x1 - x2).abs()
}

#[inline]
fn pair(p: &[f64]) -> [f64; 2] {
    [p[0], p[1]]
}

/// Joint Gini correlation equation, `theta = (gamma_1, gamma_2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GiniCorrelation;

impl EstimatingEquation for GiniCorrelation {
    fn degree(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn data_dim(&self) -> usize {
        2
    }
    fn eval(&self, points: &[&[f64]], theta: &[f64], out: &mut [f64]) {
        let h = gini_corr_kernel(pair(points[0]), pair(points[1]), [theta[0], theta[1]]);
        out.copy_from_slice(&h);
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn affine_parts(&self, points: &[&[f64]], slope: &mut [f64], intercept: &mut [f64]) {
        let (z1, z2) = (pair(points[0]), pair(points[1]));
        slope.copy_from_slice(&[gini_spread(z1, z2), 0.0, 0.0, gini_spread(swap(z1), swap(z2))]);
        intercept.copy_from_slice(&[gini_concordance(z1, z2), gini_concordance(swap(z1), swap(z2))]);
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); 2]
    }
    fn split(&self) -> Option<ParamSplit> {
        Some(ParamSplit {
            interest: 1,
            nuisance: 1,
        })
    }
    fn name(&self) -> &str {
        "gini-corr"
    }
}

/// Which of the two Gini correlations a scalar equation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GiniTarget {
    Gamma1,
    Gamma2,
}

impl fmt::Display for GiniTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GiniTarget::Gamma1 => f.write_str("gamma1"),
            GiniTarget::Gamma2 => f.write_str("gamma2"),
        }
    }
}

/// Scalar Gini correlation equation for one of `gamma_1`, `gamma_2`.
#[derive(Debug, Clone, Copy)]
pub struct GiniCorrelationComponent {
    pub target: GiniTarget,
}

impl GiniCorrelationComponent {
    pub fn new(target: GiniTarget) -> Self {
        Self { target }
    }

    #[inline]
    fn oriented(&self, points: &[&[f64]]) -> ([f64; 2], [f64; 2]) {
        let (z1, z2) = (pair(points[0]), pair(points[1]));
        match self.target {
            GiniTarget::Gamma1 => (z1, z2),
            GiniTarget::Gamma2 => (swap(z1), swap(z2)),
        }
    }
}

impl EstimatingEquation for GiniCorrelationComponent {
    fn degree(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn data_dim(&self) -> usize {
        2
    }
    fn eval(&self, points: &[&[f64]], theta: &[f64], out: &mut [f64]) {
        let (z1, z2) = self.oriented(points);
        out[0] = gini_spread(z1, z2) * theta[0] - gini_concordance(z1, z2);
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn affine_parts(&self, points: &[&[f64]], slope: &mut [f64], intercept: &mut [f64]) {
        let (z1, z2) = self.oriented(points);
        slope[0] = gini_spread(z1, z2);
        intercept[0] = gini_concordance(z1, z2);
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }
    fn name(&self) -> &str {
        match self.target {
            GiniTarget::Gamma1 => "gini-corr-1",
            GiniTarget::Gamma2 => "gini-corr-2",
        }
    }
}

/// Gini index equation for univariate, nonnegative data.
#[derive(Debug, Clone, Copy, Default)]
pub struct GiniIndex;

impl EstimatingEquation for GiniIndex {
    fn degree(&self) -> usize {
        2
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn data_dim(&self) -> usize {
        1
    }
    fn eval(&self, points: &[&[f64]], theta: &[f64], out: &mut [f64]) {
        out[0] = gini_index_kernel(points[0][0], points[1][0], theta[0]);
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn affine_parts(&self, points: &[&[f64]], slope: &mut [f64], intercept: &mut [f64]) {
        let (x1, x2) = (points[0][0], points[1][0]);
        slope[0] = x1 + x2;
        intercept[0] = (x1 - x2).abs();
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }
    fn name(&self) -> &str {
        "gini-index"
    }
}

type KernelFn = dyn Fn(&[&[f64]], &[f64], &mut [f64]) + Send + Sync;

/// Estimating equation backed by a closure.
pub struct FnEquation {
    degree: usize,
    param_dim: usize,
    data_dim: usize,
    affine: bool,
    bounds: Option<Vec<(f64, f64)>>,
    kernel: Box<KernelFn>,
}

impl FnEquation {
    pub fn new(
        degree: usize,
        param_dim: usize,
        data_dim: usize,
        kernel: impl Fn(&[&[f64]], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            degree,
            param_dim,
            data_dim,
            affine: false,
            bounds: None,
            kernel: Box::new(kernel),
        }
    }

    /// Marks the kernel as affine in the parameter.
    pub fn affine(mut self) -> Self {
        self.affine = true;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

impl fmt::Debug for FnEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnEquation")
            .field("degree", &self.degree)
            .field("param_dim", &self.param_dim)
            .field("data_dim", &self.data_dim)
            .field("affine", &self.affine)
            .finish()
    }
}

impl EstimatingEquation for FnEquation {
    fn degree(&self) -> usize {
        self.degree
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn data_dim(&self) -> usize {
        self.data_dim
    }
    fn eval(&self, points: &[&[f64]], theta: &[f64], out: &mut [f64]) {
        (self.kernel)(points, theta, out)
    }
    fn is_affine(&self) -> bool {
        self.affine
    }
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds
            .clone()
            .unwrap_or_else(|| vec![(f64::NEG_INFINITY, f64::INFINITY); self.param_dim])
    }
}

/// Checks that `eq` gives the same value under `trials` random reorderings of
/// `points` (absolute tolerance `1e-12`).
pub fn check_symmetry(
    eq: &dyn EstimatingEquation,
    points: &[&[f64]],
    theta: &[f64],
    trials: usize,
) -> Result<bool> {
    if points.len() != eq.degree() {
        return Err(Error::DimensionMismatch {
            expected: eq.degree(),
            got: points.len(),
        });
    }
    let r = eq.param_dim();
    let mut reference = vec![0.0; r];
    eq.eval(points, theta, &mut reference);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut order: Vec<&[f64]> = points.to_vec();
    let mut out = vec![0.0; r];
    for trial in 0..trials {
        if trial == 0 {
            order.reverse();
        } else {
            order.shuffle(&mut rng);
        }
        eq.eval(&order, theta, &mut out);
        if out.iter().zip(&reference).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_corr_kernel_examples() {
        assert_eq!(gini_corr_kernel([0.0, 0.0], [1.0, 1.0], [1.0, 1.0]), [0.0, 0.0]);
        assert_eq!(gini_corr_kernel([3.0, 5.0], [3.0, 5.0], [0.3, -2.0]), [0.0, 0.0]);
        assert_eq!(gini_corr_kernel([0.0, 1.0], [1.0, 0.0], [-1.0, -1.0]), [0.0, 0.0]);
    }

    #[test]
    fn concordance_ties_contribute_nothing() {
        assert_eq!(gini_concordance([0.0, 2.0], [5.0, 2.0]), 0.0);
        assert_eq!(gini_spread([0.0, 2.0], [5.0, 2.0]), 1.25);
    }

    #[test]
    fn gini_index_kernel_examples() {
        assert_eq!(gini_index_kernel(1.0, 3.0, 0.5), 0.0);
        assert_eq!(gini_index_kernel(2.0, 2.0, 0.7), 4.0 * 0.7);
        assert_eq!(gini_index_kernel(0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn gini_index_root() {
        let (x1, x2) = (2.0f64, 7.0f64);
        let g = (x1 - x2).abs() / (x1 + x2);
        assert!(gini_index_kernel(x1, x2, g).abs() < 1e-15);
    }

    #[test]
    fn symmetry_checks() {
        let eq = GiniIndex;
        assert!(check_symmetry(&eq, &[&[1.0], &[3.0]], &[0.5], 10).unwrap());
        let eq = GiniCorrelation;
        assert!(check_symmetry(&eq, &[&[0.0, 0.0], &[1.0, 1.0]], &[1.0, 1.0], 10).unwrap());
        let skew = FnEquation::new(2, 1, 1, |p, _, out| out[0] = p[0][0]);
        assert!(!check_symmetry(&skew, &[&[1.0], &[2.0]], &[0.0], 10).unwrap());
        assert!(matches!(
            check_symmetry(&skew, &[&[1.0]], &[0.0], 10),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn default_affine_parts_match_explicit() {
        let eq = GiniCorrelation;
        let generic = FnEquation::new(2, 2, 2, move |p, t, out| GiniCorrelation.eval(p, t, out));
        let pts: [&[f64]; 2] = [&[0.3, -1.2], &[1.7, 0.4]];
        let (mut s1, mut b1) = ([0.0; 4], [0.0; 2]);
        let (mut s2, mut b2) = ([0.0; 4], [0.0; 2]);
        eq.affine_parts(&pts, &mut s1, &mut b1);
        generic.affine_parts(&pts, &mut s2, &mut b2);
        for (a, b) in s1.iter().zip(&s2).chain(b1.iter().zip(&b2)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_rejects_nonfinite() {
        assert!(Sample::univariate(&[1.0, f64::NAN]).is_err());
        let s = Sample::bivariate(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.row(1), &[2.0, 4.0]);
        assert_eq!(s.without(0).row(0), &[2.0, 4.0]);
    }

    #[test]
    fn param_split() {
        let p = ParamVector::with_split(vec![0.1, 0.2, 0.3], 1).unwrap();
        assert_eq!(p.interest(), &[0.1]);
        assert_eq!(p.nuisance(), &[0.2, 0.3]);
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
    }
}
