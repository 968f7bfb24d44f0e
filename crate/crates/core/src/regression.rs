//! Linear regression under available cases and complete cases.
//!
//! The available-cases fit solves the pairwise covariance system
//! `Cov(X) b = Cov(X, y)` and recovers the intercept from available-case
//! means. The complete-cases fit is ordinary least squares on the rows where
//! every predictor and the response are present.
//!
//! Standard errors come either from the delta method over the uncentered
//! moment vector `K_rs` (with an explicit constant column), or from a row
//! bootstrap of the available-cases fit.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{column_stats_available, complete_rows, NumericFrame};
use crate::error::{Error, Result};
use crate::linalg::solve_checked;
use crate::moments::{for_each_joint, pairwise_moments, DenominatorPolicy, PresenceColumn};
use crate::rng::task_rng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Ac,
    Cc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeMethod {
    Delta,
    Bootstrap,
    None,
}

/// Rows behind a fit: the complete-row count for CC, the pair counts for AC.
#[derive(Debug, Clone, PartialEq)]
pub enum RowUsage {
    CompleteRows(usize),
    PairCounts(DMatrix<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Intercept first, then one entry per slope.
    pub se: Option<Vec<f64>>,
    pub method: Method,
    pub se_method: SeMethod,
    pub n_used: RowUsage,
}

impl RegressionFit {
    /// Intercept followed by the slopes.
    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(self.intercept)
            .chain(self.slopes.iter().copied())
            .collect()
    }

    pub fn with_se(mut self, se: Vec<f64>, se_method: SeMethod) -> Self {
        self.se = Some(se);
        self.se_method = se_method;
        self
    }
}

/// Splits a frame into predictors and the response column.
pub fn split_response(frame: &NumericFrame, response: usize) -> Result<(NumericFrame, Vec<Option<f64>>)> {
    frame.check_column(response)?;
    let preds: Vec<usize> = (0..frame.n_cols()).filter(|&c| c != response).collect();
    if preds.is_empty() {
        return Err(Error::Invalid("regression needs at least one predictor".into()));
    }
    Ok((frame.select_columns(&preds)?, frame.column(response).to_vec()))
}

fn joined(x: &NumericFrame, y: &[Option<f64>]) -> Result<NumericFrame> {
    if y.len() != x.n_rows() {
        return Err(Error::Shape(format!(
            "response has {} rows, predictors have {}",
            y.len(),
            x.n_rows()
        )));
    }
    let mut name = String::from("(response)");
    while x.names().contains(&name) {
        name.push('_');
    }
    x.with_column(&name, y.to_vec())
}

/// Available-cases regression from the pairwise covariance matrix.
pub fn fit_ac(x: &NumericFrame, y: &[Option<f64>]) -> Result<RegressionFit> {
    let p = x.n_cols();
    let frame = joined(x, y)?;
    let pm = pairwise_moments(&frame, DenominatorPolicy::Sample)?;
    let upu = pm.cov.view((0, 0), (p, p)).into_owned();
    let upv = pm.cov.view((0, p), (p, 1)).column(0).into_owned();
    let slopes = solve_checked(&upu, &upv)
        .ok_or_else(|| Error::Singular("AC covariance matrix singular".into()))?;

    let (mean_y, _) = column_stats_available(&frame, p)?;
    let mut intercept = mean_y;
    for (j, b) in slopes.iter().enumerate() {
        intercept -= column_stats_available(&frame, j)?.0 * b;
    }
    Ok(RegressionFit {
        intercept,
        slopes: slopes.iter().copied().collect(),
        se: None,
        method: Method::Ac,
        se_method: SeMethod::None,
        n_used: RowUsage::PairCounts(pm.counts),
    })
}

/// Complete-cases ordinary least squares via the normal equations.
pub fn fit_cc(x: &NumericFrame, y: &[Option<f64>]) -> Result<RegressionFit> {
    let p = x.n_cols();
    let frame = joined(x, y)?;
    let all: Vec<usize> = (0..=p).collect();
    let view = complete_rows(&frame, &all)?;
    let need = p + 2;
    if view.len() < need {
        return Err(Error::TooFewCompleteRows {
            have: view.len(),
            need,
        });
    }
    let rows = view.kept_rows();
    let design = DMatrix::from_fn(rows.len(), p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            frame.get(rows[i], j - 1).unwrap()
        }
    });
    let response = DVector::from_iterator(rows.len(), rows.iter().map(|&r| frame.get(r, p).unwrap()));
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * response;
    let beta = solve_checked(&xtx, &xty)
        .ok_or_else(|| Error::Singular("CC normal matrix singular".into()))?;
    Ok(RegressionFit {
        intercept: beta[0],
        slopes: beta.iter().skip(1).copied().collect(),
        se: None,
        method: Method::Cc,
        se_method: SeMethod::None,
        n_used: RowUsage::CompleteRows(rows.len()),
    })
}

/// Upper-triangle moment vector `K_rs`, `r <= s`, over design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentParameterVector {
    pub theta: Vec<f64>,
    dim: usize,
}

impl MomentParameterVector {
    pub fn new(theta: Vec<f64>, dim: usize) -> Result<Self> {
        if theta.len() != dim * (dim + 1) / 2 {
            return Err(Error::Shape(format!(
                "moment vector of length {} does not match {dim} design columns",
                theta.len()
            )));
        }
        Ok(MomentParameterVector { theta, dim })
    }

    pub fn from_matrix(k: &DMatrix<f64>) -> Self {
        let dim = k.nrows();
        let theta = (0..dim)
            .flat_map(|r| (r..dim).map(move |s| (r, s)))
            .map(|(r, s)| k[(r, s)])
            .collect();
        MomentParameterVector { theta, dim }
    }

    /// Number of design columns, including the constant and the response.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Flat position of the unordered pair `(r, s)`.
    pub fn index(&self, r: usize, s: usize) -> usize {
        let (r, s) = if r <= s { (r, s) } else { (s, r) };
        // row r starts after sum_{t<r} (dim - t) entries
        r * self.dim - r * r.saturating_sub(1) / 2 + (s - r)
    }

    /// The pair `(r, s)`, `r <= s`, stored at flat position `k`.
    pub fn pair(&self, mut k: usize) -> (usize, usize) {
        for r in 0..self.dim {
            let row = self.dim - r;
            if k < row {
                return (r, r + k);
            }
            k -= row;
        }
        panic!("moment index out of range")
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, &v) in self.theta.iter().enumerate() {
            let (r, s) = self.pair(k);
            m[(r, s)] = v;
            m[(s, r)] = v;
        }
        m
    }
}

/// Gradient and moment covariance for the delta method.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaWorkspace {
    pub theta: MomentParameterVector,
    /// One column per coefficient (intercept first), rows indexed like theta.
    pub gradient: DMatrix<f64>,
    /// Estimated `Cov(K_ab, K_cd)`.
    pub bmatrix: DMatrix<f64>,
}

impl DeltaWorkspace {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.gradient
            .column_iter()
            .map(|g| {
                let v = (g.transpose() * &self.bmatrix * g)[(0, 0)];
                v.max(0.0).sqrt()
            })
            .collect()
    }
}

/// Design frame `[1, x_1 .. x_p, y]` with the constant column first.
pub fn design_with_constant(x: &NumericFrame, y: &[Option<f64>]) -> Result<NumericFrame> {
    let frame = joined(x, y)?;
    let mut name = String::from("(const)");
    while frame.names().contains(&name) {
        name.push('_');
    }
    let mut names = vec![name];
    names.extend(frame.names().iter().cloned());
    let mut columns = vec![vec![Some(1.0); frame.n_rows()]];
    columns.extend((0..frame.n_cols()).map(|c| frame.column(c).to_vec()));
    NumericFrame::from_columns(names, columns)
}

/// Regression coefficients (intercept first) as a function of the moment
/// vector: `A b = c` with `A` the design block of `K` and `c` its response column.
pub fn coefficients_from_moments(theta: &MomentParameterVector) -> Option<DVector<f64>> {
    let k = theta.to_matrix();
    let q = theta.dim() - 1;
    let a = k.view((0, 0), (q, q)).into_owned();
    let c = k.view((0, q), (q, 1)).column(0).into_owned();
    solve_checked(&a, &c)
}

fn central_gradient(theta: &MomentParameterVector) -> Result<DMatrix<f64>> {
    let n_coef = theta.dim() - 1;
    let mut grad = DMatrix::zeros(theta.len(), n_coef);
    let mut work = theta.clone();
    for j in 0..theta.len() {
        let t = theta.theta[j];
        let h = 1e-6 * t.abs().max(1.0);
        work.theta[j] = t + h;
        let up = coefficients_from_moments(&work).ok_or(Error::DeltaSingular { coord: j })?;
        work.theta[j] = t - h;
        let down = coefficients_from_moments(&work).ok_or(Error::DeltaSingular { coord: j })?;
        work.theta[j] = t;
        for c in 0..n_coef {
            grad[(j, c)] = (up[c] - down[c]) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Covariance of the moment estimates `K_rs`, `r <= s`, over the columns of `design`.
///
/// Each pair contributes a zero-filled product column `W_ab,i = D_ia D_ib`
/// when both cells are present and `0` otherwise; the entry for `(ab, cd)` is
/// `n · sampleCov(W_ab, W_cd) / (N_ab · N_cd)`.
pub fn estimate_k_covariance(design: &NumericFrame) -> Result<DMatrix<f64>> {
    let n = design.n_rows();
    if n < 2 {
        return Err(Error::Shape("need at least two rows".into()));
    }
    let q = design.n_cols();
    let cols: Vec<PresenceColumn> = (0..q).map(|c| PresenceColumn::new(design.column(c))).collect();
    let m = q * (q + 1) / 2;
    let mut w = DMatrix::<f64>::zeros(n, m);
    let mut counts = vec![0usize; m];
    let mut k = 0;
    for a in 0..q {
        for b in a..q {
            let mut col = w.column_mut(k);
            let mut count = 0;
            for_each_joint(&cols[a].bits, &cols[b].bits, |i| {
                col[i] = cols[a].values[i] * cols[b].values[i];
                count += 1;
            });
            if count < 2 {
                return Err(Error::InsufficientPairCount { r: a, s: b, count, min: 2 });
            }
            counts[k] = count;
            k += 1;
        }
    }
    for mut col in w.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let mut b = w.transpose() * &w;
    let nf = n as f64;
    for i in 0..m {
        for j in 0..m {
            b[(i, j)] *= nf / ((nf - 1.0) * counts[i] as f64 * counts[j] as f64);
        }
    }
    // exact symmetry
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    Ok(b)
}

/// Builds the moment vector, its finite-difference gradient and covariance.
pub fn delta_workspace(x: &NumericFrame, y: &[Option<f64>]) -> Result<DeltaWorkspace> {
    let design = design_with_constant(x, y)?;
    let pm = pairwise_moments(&design, DenominatorPolicy::Sample)?;
    let theta = MomentParameterVector::from_matrix(&pm.cross);
    let gradient = central_gradient(&theta)?;
    let bmatrix = estimate_k_covariance(&design)?;
    Ok(DeltaWorkspace {
        theta,
        gradient,
        bmatrix,
    })
}

/// Delta-method standard errors, intercept first.
pub fn delta_se(x: &NumericFrame, y: &[Option<f64>]) -> Result<Vec<f64>> {
    Ok(delta_workspace(x, y)?.standard_errors())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSe {
    /// Intercept first.
    pub se: Vec<f64>,
    pub n_boot: usize,
    pub n_failed: usize,
}

pub const DEFAULT_N_BOOT: usize = 100;

/// Row-bootstrap standard errors of the available-cases fit.
///
/// Rows are resampled with their missingness pattern intact. Replicate `b`
/// draws from the stream `(seed, 0, b)`, so the result does not depend on how
/// replicates are scheduled.
pub fn bootstrap_se(x: &NumericFrame, y: &[Option<f64>], n_boot: usize, seed: u64) -> Result<BootstrapSe> {
    if n_boot < 2 {
        return Err(Error::Invalid("bootstrap needs at least 2 replicates".into()));
    }
    let frame = joined(x, y)?;
    let n = frame.n_rows();
    let p = x.n_cols();
    let fits: Vec<Option<Vec<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = task_rng(seed, 0, b as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = frame.select_rows(&rows).ok()?;
            let (xs, ys) = split_response(&sample, p).ok()?;
            fit_ac(&xs, &ys).ok().map(|f| f.coefficients())
        })
        .collect();
    let ok: Vec<&Vec<f64>> = fits.iter().flatten().collect();
    let failed = n_boot - ok.len();
    if failed * 5 > n_boot || ok.len() < 2 {
        return Err(Error::BootstrapUnstable {
            failed,
            total: n_boot,
        });
    }
    let se = (0..=p)
        .map(|c| sample_sd(ok.iter().map(|f| f[c])))
        .collect();
    Ok(BootstrapSe {
        se,
        n_boot,
        n_failed: failed,
    })
}

fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
