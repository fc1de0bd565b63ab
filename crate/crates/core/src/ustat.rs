//! U-statistics, leave-one-out statistics and jackknife pseudo-values.
//!
//! For degree-2 kernels the leave-one-out statistics come from per-row sums of
//! the pairwise kernel table, so a full set of pseudo-values costs `O(n^2)`
//! kernel evaluations. Higher degrees recompute each leave-one-out statistic.
//! Equations that are affine in the parameter get their slope and intercept
//! pseudo-values tabulated once; evaluating at a new parameter is then `O(n r^2)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimating::{EstimatingEquation, Sample};

const PAR_ROWS: usize = 256;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Jackknife pseudo-values `V_i(theta)` (rows) together with `W_n(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoValueSet {
    values: Vec<f64>,
    dim: usize,
    w_n: Vec<f64>,
    theta: Vec<f64>,
}

impl PseudoValueSet {
    /// Builds a set directly from row-major pseudo-values; `W_n` is taken as the
    /// column means.
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) || values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pseudo-values"));
        }
        let n = values.len() / dim;
        let w_n = (0..dim)
            .map(|l| {
                let col: Vec<f64> = (0..n).map(|i| values[i * dim + l]).collect();
                pairwise_sum(&col) / n as f64
            })
            .collect();
        Ok(Self {
            values,
            dim,
            w_n,
            theta: Vec::new(),
        })
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::from_rows(1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// The full-sample U-statistic `W_n(theta)`.
    pub fn w_n(&self) -> &[f64] {
        &self.w_n
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Unweighted column means of the pseudo-values.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n();
        (0..self.dim)
            .map(|l| {
                let col: Vec<f64> = (0..n).map(|i| self.values[i * self.dim + l]).collect();
                pairwise_sum(&col) / n as f64
            })
            .collect()
    }

    /// Multiplies every pseudo-value by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            dim: self.dim,
            w_n: self.w_n.iter().map(|v| v * s).collect(),
            theta: self.theta.clone(),
        }
    }
}

fn check_sample(eq: &dyn EstimatingEquation, sample: &Sample, theta: &[f64]) -> Result<()> {
    if sample.dim() != eq.data_dim() {
        return Err(Error::DimensionMismatch {
            expected: eq.data_dim(),
            got: sample.dim(),
        });
    }
    if theta.len() != eq.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: eq.param_dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Visits every increasing index tuple of size `k` from `0..n`.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Generic U-statistic of `f` (output width `width`) over all `k`-subsets.
fn u_stat_generic(
    sample: &Sample,
    k: usize,
    width: usize,
    f: &(dyn Fn(&[&[f64]], &mut [f64]) + Sync),
) -> Vec<f64> {
    let n = sample.len();
    let mut acc = vec![Neumaier::default(); width];
    let mut out = vec![0.0; width];
    let mut points: Vec<&[f64]> = Vec::with_capacity(k);
    let mut count = 0usize;
    for_each_combination(n, k, |idx| {
        points.clear();
        points.extend(idx.iter().map(|&i| sample.row(i)));
        f(&points, &mut out);
        for (a, v) in acc.iter_mut().zip(&out) {
            a.add(*v);
        }
        count += 1;
    });
    acc.into_iter().map(|a| a.value() / count as f64).collect()
}

/// Row sums `R_i = sum_{j != i} f(x_i, x_j)` for a symmetric pair function of
/// output width `width`, plus the total `sum_{i<j} f(x_i, x_j)`.
fn pair_row_sums(
    sample: &Sample,
    width: usize,
    f: &(dyn Fn(&[&[f64]], &mut [f64]) + Sync),
) -> (Vec<f64>, Vec<f64>) {
    let n = sample.len();
    let row_sum = |i: usize| -> Vec<f64> {
        // column-major buffer so each component is contiguous for pairwise_sum
        let mut buf = vec![0.0; width * n];
        let mut out = vec![0.0; width];
        let xi = sample.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            f(&[xi, sample.row(j)], &mut out);
            for (l, v) in out.iter().enumerate() {
                buf[l * n + j] = *v;
            }
        }
        (0..width)
            .map(|l| pairwise_sum(&buf[l * n..(l + 1) * n]))
            .collect()
    };
    let rows: Vec<Vec<f64>> = if n >= PAR_ROWS {
        (0..n).into_par_iter().map(row_sum).collect()
    } else {
        (0..n).map(row_sum).collect()
    };
    let mut flat = Vec::with_capacity(n * width);
    for r in &rows {
        flat.extend_from_slice(r);
    }
    let total = (0..width)
        .map(|l| {
            let col: Vec<f64> = rows.iter().map(|r| r[l]).collect();
            0.5 * pairwise_sum(&col)
        })
        .collect();
    (flat, total)
}

/// Pseudo-values of a degree-2 U-statistic from its row sums.
fn pseudo_from_row_sums(n: usize, width: usize, rows: &[f64], total: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    // n W_n = 2 S / (n - 1);  (n - 1) W^{(-i)} = 2 (S - R_i) / (n - 2)
    let full: Vec<f64> = total.iter().map(|s| 2.0 * s / (nf - 1.0)).collect();
    let mut pv = vec![0.0; n * width];
    for i in 0..n {
        for l in 0..width {
            let loo = 2.0 * (total[l] - rows[i * width + l]) / (nf - 2.0);
            pv[i * width + l] = full[l] - loo;
        }
    }
    let w_n = full.iter().map(|v| v / nf).collect();
    (pv, w_n)
}

/// Pseudo-values of a degree-`k` U-statistic by leave-one-out recomputation.
fn pseudo_by_recompute(
    sample: &Sample,
    k: usize,
    width: usize,
    f: &(dyn Fn(&[&[f64]], &mut [f64]) + Sync),
) -> (Vec<f64>, Vec<f64>) {
    let n = sample.len();
    let nf = n as f64;
    let w_n = u_stat_generic(sample, k, width, f);
    let loo: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| u_stat_generic(&sample.without(i), k, width, f))
        .collect();
    let mut pv = vec![0.0; n * width];
    for (i, w) in loo.iter().enumerate() {
        for l in 0..width {
            pv[i * width + l] = nf * w_n[l] - (nf - 1.0) * w[l];
        }
    }
    (pv, w_n)
}

/// `W_n(theta)`: the average of `H` over all `C(n, k)` index subsets.
pub fn u_statistic(eq: &dyn EstimatingEquation, sample: &Sample, theta: &[f64]) -> Result<Vec<f64>> {
    check_sample(eq, sample, theta)?;
    let k = eq.degree();
    if sample.len() < k {
        return Err(Error::InsufficientData {
            needed: k,
            got: sample.len(),
        });
    }
    let r = eq.param_dim();
    let f = |p: &[&[f64]], out: &mut [f64]| eq.eval(p, theta, out);
    if k == 2 && sample.len() >= 2 {
        let (_, total) = pair_row_sums(sample, r, &f);
        let pairs = (sample.len() * (sample.len() - 1) / 2) as f64;
        return Ok(total.iter().map(|s| s / pairs).collect());
    }
    Ok(u_stat_generic(sample, k, r, &f))
}

/// Jackknife pseudo-values `V_i = n W_n - (n-1) W_{n-1}^{(-i)}` at `theta`.
pub fn jackknife_pseudo_values(
    eq: &dyn EstimatingEquation,
    sample: &Sample,
    theta: &[f64],
) -> Result<PseudoValueSet> {
    Jackknife::new(eq, sample)?.at(theta)
}

/// Pseudo-values of the slope `A` and intercept `b` of an affine kernel.
#[derive(Debug, Clone)]
pub struct AffinePseudoValues {
    r: usize,
    /// `n` row-major `r x r` blocks.
    slope: Vec<f64>,
    /// `n x r`.
    intercept: Vec<f64>,
    slope_u: Vec<f64>,
    intercept_u: Vec<f64>,
}

impl AffinePseudoValues {
    fn build(eq: &dyn EstimatingEquation, sample: &Sample) -> Self {
        let r = eq.param_dim();
        let width = r * r + r;
        let f = |p: &[&[f64]], out: &mut [f64]| {
            let (s, b) = out.split_at_mut(r * r);
            eq.affine_parts(p, s, b);
        };
        let n = sample.len();
        let (pv, u) = if eq.degree() == 2 {
            let (rows, total) = pair_row_sums(sample, width, &f);
            pseudo_from_row_sums(n, width, &rows, &total)
        } else {
            pseudo_by_recompute(sample, eq.degree(), width, &f)
        };
        let mut slope = Vec::with_capacity(n * r * r);
        let mut intercept = Vec::with_capacity(n * r);
        for row in pv.chunks_exact(width) {
            slope.extend_from_slice(&row[..r * r]);
            intercept.extend_from_slice(&row[r * r..]);
        }
        Self {
            r,
            slope,
            intercept,
            slope_u: u[..r * r].to_vec(),
            intercept_u: u[r * r..].to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.intercept.len() / self.r
    }

    /// Row-major `r x r` slope block of observation `i`.
    pub fn slope(&self, i: usize) -> &[f64] {
        &self.slope[i * self.r * self.r..(i + 1) * self.r * self.r]
    }

    pub fn intercept(&self, i: usize) -> &[f64] {
        &self.intercept[i * self.r..(i + 1) * self.r]
    }

    /// U-statistic of the slope kernel (row-major `r x r`).
    pub fn slope_u(&self) -> &[f64] {
        &self.slope_u
    }

    /// U-statistic of the intercept kernel.
    pub fn intercept_u(&self) -> &[f64] {
        &self.intercept_u
    }

    /// Leave-one-out U-statistics of slope and intercept for observation `i`.
    pub fn leave_one_out(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let nf = self.n() as f64;
        let loo = |u: &[f64], pv: &[f64]| -> Vec<f64> {
            u.iter()
                .zip(pv)
                .map(|(u, v)| (nf * u - v) / (nf - 1.0))
                .collect()
        };
        (
            loo(&self.slope_u, self.slope(i)),
            loo(&self.intercept_u, self.intercept(i)),
        )
    }

    fn evaluate(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let r = self.r;
        let n = self.n();
        let mut values = vec![0.0; n * r];
        for i in 0..n {
            let a = self.slope(i);
            let b = self.intercept(i);
            for l in 0..r {
                let mut s = -b[l];
                for j in 0..r {
                    s += a[l * r + j] * theta[j];
                }
                values[i * r + l] = s;
            }
        }
        let w_n = (0..r)
            .map(|l| {
                let row = &self.slope_u[l * r..(l + 1) * r];
                row.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() - self.intercept_u[l]
            })
            .collect();
        (values, w_n)
    }
}

/// Jackknife machinery bound to one equation and one sample.
///
/// Evaluating at many parameter values reuses the affine tables when the
/// equation is affine.
pub struct Jackknife<'a> {
    eq: &'a dyn EstimatingEquation,
    sample: &'a Sample,
    affine: Option<AffinePseudoValues>,
}

impl<'a> Jackknife<'a> {
    pub fn new(eq: &'a dyn EstimatingEquation, sample: &'a Sample) -> Result<Self> {
        if sample.dim() != eq.data_dim() {
            return Err(Error::DimensionMismatch {
                expected: eq.data_dim(),
                got: sample.dim(),
            });
        }
        let needed = eq.degree() + 1;
        if sample.len() < needed {
            return Err(Error::InsufficientData {
                needed,
                got: sample.len(),
            });
        }
        let affine = eq.is_affine().then(|| AffinePseudoValues::build(eq, sample));
        Ok(Self { eq, sample, affine })
    }

    pub fn equation(&self) -> &'a dyn EstimatingEquation {
        self.eq
    }

    pub fn sample(&self) -> &'a Sample {
        self.sample
    }

    pub fn n(&self) -> usize {
        self.sample.len()
    }

    pub fn affine(&self) -> Option<&AffinePseudoValues> {
        self.affine.as_ref()
    }

    pub fn at(&self, theta: &[f64]) -> Result<PseudoValueSet> {
        check_sample(self.eq, self.sample, theta)?;
        let r = self.eq.param_dim();
        let (values, w_n) = match &self.affine {
            Some(tables) => tables.evaluate(theta),
            None => {
                let f = |p: &[&[f64]], out: &mut [f64]| self.eq.eval(p, theta, out);
                if self.eq.degree() == 2 {
                    let (rows, total) = pair_row_sums(self.sample, r, &f);
                    pseudo_from_row_sums(self.sample.len(), r, &rows, &total)
                } else {
                    pseudo_by_recompute(self.sample, self.eq.degree(), r, &f)
                }
            }
        };
        Ok(PseudoValueSet {
            values,
            dim: r,
            w_n,
            theta: theta.to_vec(),
        })
    }
}

/// Jackknife estimate of the covariance matrix of `W_n`:
/// `1/(n(n-1)) sum_i (V_i - W_n)(V_i - W_n)^T`.
pub fn jackknife_variance(pv: &PseudoValueSet) -> Result<DMatrix<f64>> {
    let n = pv.n();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let r = pv.dim();
    let w = pv.w_n();
    let scale = 1.0 / (n as f64 * (n as f64 - 1.0));
    let mut m = DMatrix::zeros(r, r);
    let mut terms = vec![0.0; n];
    for s in 0..r {
        for t in s..r {
            for (i, v) in pv.rows().enumerate() {
                terms[i] = (v[s] - w[s]) * (v[t] - w[t]);
            }
            let c = scale * pairwise_sum(&terms);
            m[(s, t)] = c;
            m[(t, s)] = c;
        }
    }
    Ok(m)
}
