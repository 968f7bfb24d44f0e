//! Pairwise-complete moments.
//!
//! For every pair of columns `(r, s)` the statistics here use exactly the rows
//! where both cells are present: the count `N_rs`, the mean cross-product
//! `K_rs = (1/N_rs) Σ D_ir D_is`, the pair means, and the covariance centered
//! at those pair means. Presence is held as one bitmask per column, so each
//! pair is an AND-and-accumulate scan over 64-row words.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::NumericFrame;
use crate::error::{Error, Result};

/// Denominator for the pairwise covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DenominatorPolicy {
    /// Divide by `N_rs - 1`.
    #[default]
    Sample,
    /// Divide by `N_rs`.
    Population,
}

impl DenominatorPolicy {
    pub fn min_count(self) -> usize {
        match self {
            DenominatorPolicy::Sample => 2,
            DenominatorPolicy::Population => 1,
        }
    }

    fn divisor(self, n: usize) -> f64 {
        match self {
            DenominatorPolicy::Sample => (n - 1) as f64,
            DenominatorPolicy::Population => n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMoments {
    /// `N_rs`.
    pub counts: DMatrix<usize>,
    /// `K_rs`.
    pub cross: DMatrix<f64>,
    /// Entry `(r, s)` is the mean of column `r` over rows where `(r, s)` is intact.
    pub pair_means: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub policy: DenominatorPolicy,
}

impl PairwiseMoments {
    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }
}

/// Presence bitmask plus zero-filled values for one column.
pub(crate) struct PresenceColumn {
    pub bits: Vec<u64>,
    pub values: Vec<f64>,
}

impl PresenceColumn {
    pub fn new(col: &[Option<f64>]) -> Self {
        let mut bits = vec![0u64; col.len().div_ceil(64)];
        let values = col
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Some(x) => {
                    bits[i / 64] |= 1 << (i % 64);
                    *x
                }
                None => 0.0,
            })
            .collect();
        PresenceColumn { bits, values }
    }
}

/// Calls `f(row)` for each row set in both masks, in increasing row order.
#[inline]
pub(crate) fn for_each_joint(a: &[u64], b: &[u64], mut f: impl FnMut(usize)) {
    for (w, (&x, &y)) in a.iter().zip(b).enumerate() {
        let mut word = x & y;
        while word != 0 {
            let bit = word.trailing_zeros() as usize;
            f(w * 64 + bit);
            word &= word - 1;
        }
    }
}

struct PairStats {
    count: usize,
    cross: f64,
    mean_r: f64,
    mean_s: f64,
    comoment: f64,
}

fn pair_stats(r: &PresenceColumn, s: &PresenceColumn) -> PairStats {
    let (mut n, mut sum_r, mut sum_s, mut sum_rs) = (0usize, 0.0, 0.0, 0.0);
    for_each_joint(&r.bits, &s.bits, |i| {
        let (x, y) = (r.values[i], s.values[i]);
        n += 1;
        sum_r += x;
        sum_s += y;
        sum_rs += x * y;
    });
    if n == 0 {
        return PairStats {
            count: 0,
            cross: 0.0,
            mean_r: 0.0,
            mean_s: 0.0,
            comoment: 0.0,
        };
    }
    let nf = n as f64;
    let (mean_r, mean_s) = (sum_r / nf, sum_s / nf);
    // second pass, centered at the pair means
    let mut comoment = 0.0;
    for_each_joint(&r.bits, &s.bits, |i| {
        comoment += (r.values[i] - mean_r) * (s.values[i] - mean_s);
    });
    PairStats {
        count: n,
        cross: sum_rs / nf,
        mean_r,
        mean_s,
        comoment,
    }
}

/// Pairwise-complete counts, cross-moments, pair means and covariances.
///
/// Fails if any pair has fewer jointly observed rows than the policy needs.
pub fn pairwise_moments(frame: &NumericFrame, policy: DenominatorPolicy) -> Result<PairwiseMoments> {
    let p = frame.n_cols();
    let cols: Vec<PresenceColumn> = (0..p).map(|c| PresenceColumn::new(frame.column(c))).collect();

    let mut counts = DMatrix::<usize>::zeros(p, p);
    let mut cross = DMatrix::<f64>::zeros(p, p);
    let mut pair_means = DMatrix::<f64>::zeros(p, p);
    let mut cov = DMatrix::<f64>::zeros(p, p);

    for r in 0..p {
        for s in r..p {
            let st = pair_stats(&cols[r], &cols[s]);
            if st.count < policy.min_count() {
                return Err(Error::InsufficientPairCount {
                    r,
                    s,
                    count: st.count,
                    min: policy.min_count(),
                });
            }
            let c = st.comoment / policy.divisor(st.count);
            counts[(r, s)] = st.count;
            counts[(s, r)] = st.count;
            cross[(r, s)] = st.cross;
            cross[(s, r)] = st.cross;
            pair_means[(r, s)] = st.mean_r;
            pair_means[(s, r)] = st.mean_s;
            cov[(r, s)] = c;
            cov[(s, r)] = c;
        }
    }
    Ok(PairwiseMoments {
        counts,
        cross,
        pair_means,
        cov,
        policy,
    })
}

/// Correlation from pairwise covariances: `cov(r,s) / sqrt(cov(r,r) cov(s,s))`.
///
/// The diagonal variances are each column's own available-case variance, so
/// off-diagonal entries are not guaranteed to lie in `[-1, 1]` when data are
/// missing.
pub fn pairwise_correlation(pm: &PairwiseMoments) -> Result<DMatrix<f64>> {
    let p = pm.dim();
    let sd: Vec<f64> = (0..p)
        .map(|c| {
            let v = pm.cov[(c, c)];
            if v > 0.0 {
                Ok(v.sqrt())
            } else {
                Err(Error::ZeroVariance { col: c })
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(p, p, |r, s| {
        if r == s {
            1.0
        } else {
            pm.cov[(r, s)] / (sd[r] * sd[s])
        }
    }))
}
