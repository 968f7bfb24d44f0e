//! Missingness injection and Monte-Carlo comparison of CC and AC estimators.
//!
//! A variance study repeatedly masks cells of a fixed dataset completely at
//! random, evaluates an estimand under both complete cases and available
//! cases on the same masked data, and reports the Monte-Carlo variance of
//! each. Replicate `r` at rate index `a` draws from the stream
//! `(seed, a, r)` (see [`crate::rng`]), and results are reduced in replicate
//! order, so reports are identical however the replicates are scheduled.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalFrame, NumericFrame};
use crate::error::{Error, Result};
use crate::loglinear::{fit_loglin_ac, fit_loglin_cc, LoglinFit, ModelSpec};
use crate::pca::{fit_pca_ac, fit_pca_cc};
use crate::regression::{fit_ac, fit_cc, split_response, Method, RegressionFit};
use crate::rng::{rng_from_seed, task_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarSpec {
    pub rate: f64,
    /// `None` targets every column.
    pub target_cols: Option<Vec<usize>>,
    pub seed: u64,
}

impl McarSpec {
    pub fn new(rate: f64, seed: u64) -> Self {
        McarSpec {
            rate,
            target_cols: None,
            seed,
        }
    }

    fn validate(&self, n_cols: usize) -> Result<Vec<bool>> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Invalid(format!("rate {} outside [0, 1]", self.rate)));
        }
        let mut targeted = vec![self.target_cols.is_none(); n_cols];
        for &c in self.target_cols.iter().flatten() {
            if c >= n_cols {
                return Err(Error::InvalidColumn { index: c, n_cols });
            }
            targeted[c] = true;
        }
        Ok(targeted)
    }
}

/// Data that can have cells masked completely at random.
pub trait Maskable: Sized + Sync {
    fn inject_mcar(&self, spec: &McarSpec) -> Result<Self>;
}

/// Masks each targeted cell independently with probability `spec.rate`.
///
/// One uniform draw is consumed per targeted cell, column by column, whether
/// or not the cell is already missing.
pub fn inject_mcar(frame: &NumericFrame, spec: &McarSpec) -> Result<NumericFrame> {
    let targeted = spec.validate(frame.n_cols())?;
    let mut rng = rng_from_seed(spec.seed);
    let mut mask = vec![vec![false; frame.n_rows()]; frame.n_cols()];
    for (c, col) in mask.iter_mut().enumerate() {
        if targeted[c] {
            for m in col.iter_mut() {
                *m = rng.random::<f64>() < spec.rate;
            }
        }
    }
    Ok(frame.masked(|r, c| mask[c][r]))
}

impl Maskable for NumericFrame {
    fn inject_mcar(&self, spec: &McarSpec) -> Result<Self> {
        inject_mcar(self, spec)
    }
}

impl Maskable for CategoricalFrame {
    fn inject_mcar(&self, spec: &McarSpec) -> Result<Self> {
        let targeted = spec.validate(3)?;
        let mut rng = rng_from_seed(spec.seed);
        let mut mask = vec![vec![false; self.n_rows()]; 3];
        for (f, col) in mask.iter_mut().enumerate() {
            if targeted[f] {
                for m in col.iter_mut() {
                    *m = rng.random::<f64>() < spec.rate;
                }
            }
        }
        Ok(self.masked(|r, f| mask[f][r]))
    }
}

/// Missing-at-random masking of one column driven by always-observed columns:
/// `P(M = 1 | D) = 1 / (1 + exp(-(offset + weights · D)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarSpec {
    pub target_col: usize,
    pub driver_cols: Vec<usize>,
    pub weights: Vec<f64>,
    pub offset: f64,
    pub seed: u64,
}

impl MarSpec {
    pub fn missing_probability(&self, drivers: &[f64]) -> f64 {
        let score = self.offset + self.weights.iter().zip(drivers).map(|(w, d)| w * d).sum::<f64>();
        1.0 / (1.0 + (-score).exp())
    }
}

pub fn inject_mar(frame: &NumericFrame, spec: &MarSpec) -> Result<NumericFrame> {
    frame.check_column(spec.target_col)?;
    if spec.weights.len() != spec.driver_cols.len() {
        return Err(Error::Invalid(format!(
            "{} weights for {} driver columns",
            spec.weights.len(),
            spec.driver_cols.len()
        )));
    }
    for &c in &spec.driver_cols {
        frame.check_column(c)?;
        if c == spec.target_col {
            return Err(Error::Invalid("target column cannot drive its own missingness".into()));
        }
        if frame.column(c).iter().any(Option::is_none) {
            return Err(Error::Invalid(format!("driver column {c} has missing cells")));
        }
    }
    let mut rng = rng_from_seed(spec.seed);
    let drop: Vec<bool> = (0..frame.n_rows())
        .map(|r| {
            let d: Vec<f64> = spec.driver_cols.iter().map(|&c| frame.get(r, c).unwrap()).collect();
            rng.random::<f64>() < spec.missing_probability(&d)
        })
        .collect();
    Ok(frame.masked(|r, c| c == spec.target_col && drop[r]))
}

/// A scalar computed from data under complete cases and under available cases.
pub trait Estimand: Sync {
    type Data: Maskable;

    fn id(&self) -> String;
    fn evaluate(&self, data: &Self::Data, method: Method) -> Result<f64>;
}

/// Coefficient `coef` (0 = intercept, 1 = first slope) of the regression of
/// column `response` on all other columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEstimand {
    pub response: usize,
    pub coef: usize,
}

impl Estimand for RegressionEstimand {
    type Data = NumericFrame;

    fn id(&self) -> String {
        format!("beta{}", self.coef)
    }

    fn evaluate(&self, data: &NumericFrame, method: Method) -> Result<f64> {
        let (x, y) = split_response(data, self.response)?;
        let fit: RegressionFit = match method {
            Method::Ac => fit_ac(&x, &y)?,
            Method::Cc => fit_cc(&x, &y)?,
        };
        fit.coefficients()
            .get(self.coef)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("no coefficient {}", self.coef)))
    }
}

/// Square root of the largest eigenvalue of the covariance (or correlation) matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaEstimand {
    pub scale: bool,
}

impl Estimand for PcaEstimand {
    type Data = NumericFrame;

    fn id(&self) -> String {
        if self.scale { "pca_scaled_max_sdev" } else { "pca_max_sdev" }.into()
    }

    fn evaluate(&self, data: &NumericFrame, method: Method) -> Result<f64> {
        let fit = match method {
            Method::Ac => fit_pca_ac(data, self.scale)?,
            Method::Cc => fit_pca_cc(data, self.scale)?,
        };
        Ok(fit.max_sdev())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoglinTarget {
    /// Entry `(0, 0)` of the first two-factor interaction in the model.
    FirstInteraction,
    /// Entry `index` (row-major) of the lambda term over `factors`.
    Lambda { factors: Vec<usize>, index: usize },
    /// A fitted expected count.
    Cell([usize; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglinEstimand {
    pub spec: ModelSpec,
    pub target: LoglinTarget,
}

impl LoglinEstimand {
    fn pick(&self, fit: &LoglinFit) -> Result<f64> {
        let missing = || Error::Invalid(format!("model has no term for {:?}", self.target));
        match &self.target {
            LoglinTarget::FirstInteraction => Ok(fit.lambdas.first_interaction().ok_or_else(missing)?.values[0]),
            LoglinTarget::Lambda { factors, index } => fit
                .lambdas
                .term(factors)
                .and_then(|t| t.values.get(*index).copied())
                .ok_or_else(missing),
            LoglinTarget::Cell(cell) => {
                let dims = fit.fitted.dims();
                if (0..3).any(|f| cell[f] >= dims[f]) {
                    return Err(missing());
                }
                Ok(fit.fitted.get(*cell))
            }
        }
    }
}

impl Estimand for LoglinEstimand {
    type Data = CategoricalFrame;

    fn id(&self) -> String {
        match &self.target {
            LoglinTarget::FirstInteraction => "lambda_first_interaction".into(),
            LoglinTarget::Lambda { factors, index } => format!("lambda{factors:?}[{index}]"),
            LoglinTarget::Cell(c) => format!("cell{c:?}"),
        }
    }

    fn evaluate(&self, data: &CategoricalFrame, method: Method) -> Result<f64> {
        let fit = match method {
            Method::Ac => fit_loglin_ac(data, &self.spec)?,
            Method::Cc => fit_loglin_cc(data, &self.spec)?,
        };
        self.pick(&fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub na_rate: f64,
    pub method: Method,
    pub estimand: String,
    /// Sample variance over successful replicates; `None` with fewer than two.
    pub variance: Option<f64>,
    pub mean: Option<f64>,
    pub n_reps: usize,
    pub n_failures: usize,
}

impl SimRow {
    pub fn successes(&self) -> usize {
        self.n_reps - self.n_failures
    }

    /// Monte-Carlo standard error of the mean.
    pub fn mean_se(&self) -> Option<f64> {
        Some((self.variance? / self.successes() as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub na_rate: f64,
    pub rep: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
    pub failures: Vec<FailureRecord>,
    pub seed: u64,
}

impl SimReport {
    pub fn row(&self, na_rate: f64, method: Method) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.na_rate == na_rate && r.method == method)
    }

    /// CC variance over AC variance at a rate.
    pub fn variance_ratio(&self, na_rate: f64) -> Option<f64> {
        Some(self.row(na_rate, Method::Cc)?.variance? / self.row(na_rate, Method::Ac)?.variance?)
    }

    pub fn total_successes(&self) -> usize {
        self.rows.iter().map(SimRow::successes).sum()
    }
}

fn mean_var(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var))
}

/// Monte-Carlo variance of an estimand under CC and AC at each NA rate.
///
/// Replicate failures (singular systems, negative eigenvalues, too few
/// complete rows) are logged and skipped.
pub fn run_variance_study<E: Estimand>(
    data: &E::Data,
    estimand: &E,
    na_rates: &[f64],
    n_reps: usize,
    seed: u64,
) -> Result<SimReport> {
    if n_reps < 2 {
        return Err(Error::Invalid("a variance study needs at least 2 replicates".into()));
    }
    if let Some(r) = na_rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Invalid(format!("rate {r} outside [0, 1]")));
    }
    let id = estimand.id();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (a, &rate) in na_rates.iter().enumerate() {
        let results: Vec<[Result<f64>; 2]> = (0..n_reps)
            .into_par_iter()
            .map(|rep| {
                let spec = McarSpec::new(rate, crate::rng::derive_seed(seed, a as u64, rep as u64));
                match data.inject_mcar(&spec) {
                    Ok(masked) => [Method::Cc, Method::Ac].map(|m| estimand.evaluate(&masked, m)),
                    Err(e) => [Err(e.clone()), Err(e)],
                }
            })
            .collect();
        for (slot, method) in [Method::Cc, Method::Ac].into_iter().enumerate() {
            let mut ok = Vec::with_capacity(n_reps);
            for (rep, r) in results.iter().enumerate() {
                match &r[slot] {
                    Ok(v) => ok.push(*v),
                    Err(e) => failures.push(FailureRecord {
                        na_rate: rate,
                        rep,
                        method,
                        message: e.to_string(),
                    }),
                }
            }
            let (mean, variance) = mean_var(&ok);
            rows.push(SimRow {
                na_rate: rate,
                method,
                estimand: id.clone(),
                variance,
                mean,
                n_reps,
                n_failures: n_reps - ok.len(),
            });
        }
    }
    Ok(SimReport { rows, failures, seed })
}

/// A population with known regression slope and response mean.
pub trait PopulationGenerator: Sync {
    /// Draws `n` rows; column 0 is the driver `D`, column 1 the response `Y`.
    fn sample(&self, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> NumericFrame;
    fn true_slope(&self) -> f64;
    fn true_mean_y(&self) -> f64;
}

/// `D ~ N(driver_mean, driver_sd²)`, `Y = intercept + slope·D + N(0, noise_sd²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianPopulation {
    pub intercept: f64,
    pub slope: f64,
    pub noise_sd: f64,
    pub driver_mean: f64,
    pub driver_sd: f64,
}

impl PopulationGenerator for LinearGaussianPopulation {
    fn sample(&self, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> NumericFrame {
        let d_dist = Normal::new(self.driver_mean, self.driver_sd).expect("valid sd");
        let e_dist = Normal::new(0.0, self.noise_sd).expect("valid sd");
        let mut d = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let di = d_dist.sample(rng);
            d.push(Some(di));
            y.push(Some(self.intercept + self.slope * di + e_dist.sample(rng)));
        }
        NumericFrame::from_columns(vec!["d".into(), "y".into()], vec![d, y]).expect("finite draws")
    }

    fn true_slope(&self) -> f64 {
        self.slope
    }

    fn true_mean_y(&self) -> f64 {
        self.intercept + self.slope * self.driver_mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: f64,
    /// Monte-Carlo standard error of `mean`.
    pub mc_se: f64,
    pub truth: f64,
}

impl EstimateSummary {
    pub fn bias(&self) -> f64 {
        self.mean - self.truth
    }

    /// Bias in units of Monte-Carlo standard error.
    pub fn z(&self) -> f64 {
        self.bias() / self.mc_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarBiasReport {
    /// Complete-case slope of `Y` on `D`.
    pub slope: EstimateSummary,
    /// Complete-case mean of `Y`.
    pub mean_y: EstimateSummary,
    pub n: usize,
    pub n_reps: usize,
    pub n_failures: usize,
}

/// Repeatedly draws a population sample, masks `Y` at random given `D`, and
/// summarizes the complete-case slope and mean of `Y` against the truth.
///
/// `mar_spec.seed` is ignored; replicate `r` uses stream `(seed, 0, r)` for
/// the sample and `(seed, 1, r)` for the mask.
pub fn mar_bias_study<G: PopulationGenerator>(
    population: &G,
    mar_spec: &MarSpec,
    n: usize,
    n_reps: usize,
    seed: u64,
) -> Result<MarBiasReport> {
    if n_reps < 2 {
        return Err(Error::Invalid("a bias study needs at least 2 replicates".into()));
    }
    if n < 3 {
        return Err(Error::Invalid("sample size must be at least 3".into()));
    }
    let results: Vec<Result<(f64, f64)>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = task_rng(seed, 0, rep as u64);
            let frame = population.sample(n, &mut rng);
            let spec = MarSpec {
                seed: crate::rng::derive_seed(seed, 1, rep as u64),
                ..mar_spec.clone()
            };
            let masked = inject_mar(&frame, &spec)?;
            let x = masked.select_columns(&[0])?;
            let slope = fit_cc(&x, masked.column(1))?.slopes[0];
            let (mean_y, _) = crate::data::column_stats_available(&masked, 1)?;
            Ok((slope, mean_y))
        })
        .collect();
    let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    if ok.len() < 2 {
        return Err(results.into_iter().find_map(Result::err).unwrap_or_else(|| {
            Error::Invalid("fewer than two successful replicates".into())
        }));
    }
    let summarize = |vals: Vec<f64>, truth: f64| {
        let (mean, var) = mean_var(&vals);
        EstimateSummary {
            mean: mean.unwrap(),
            mc_se: (var.unwrap() / vals.len() as f64).sqrt(),
            truth,
        }
    };
    Ok(MarBiasReport {
        slope: summarize(ok.iter().map(|v| v.0).collect(), population.true_slope()),
        mean_y: summarize(ok.iter().map(|v| v.1).collect(), population.true_mean_y()),
        n,
        n_reps,
        n_failures: n_reps - ok.len(),
    })
}
