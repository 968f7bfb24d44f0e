//! Three-factor log-linear models from available-case margins.
//!
//! Each marginal probability the model needs is estimated from the records
//! that are intact on exactly that margin's factors. For a decomposable model
//! the estimates are combined through the usual product formula, e.g.
//! `p_ijk = p_i.k · p_.jk / p_..k` for conditional independence of the first
//! two factors given the third, with `p_..k` itself estimated from the records
//! where the third factor is observed. The resulting expected counts are then
//! fitted by iterative proportional fitting (IPF), and coefficients are read
//! off the log fitted table under zero-sum constraints.
//!
//! The only non-decomposable three-factor model, all two-way interactions,
//! has no closed form. There each two-way estimate is first raked to the
//! one-way estimates of its factors so the targets share their one-way
//! margins, and IPF fits the result.

use serde::{Deserialize, Serialize};

use crate::data::CategoricalFrame;
use crate::error::{Error, Result};
use crate::regression::Method;

pub const DEFAULT_IPF_TOL: f64 = 1e-10;
pub const DEFAULT_IPF_MAX_ITER: usize = 1000;

/// An `I × J × K` table of nonnegative cell values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    dims: [usize; 3],
    counts: Vec<f64>,
    factor_names: [String; 3],
    level_names: [Vec<String>; 3],
}

impl Table3 {
    pub fn new(dims: [usize; 3], counts: Vec<f64>) -> Result<Self> {
        let level_names = dims.map(|d| (0..d).map(|l| l.to_string()).collect());
        Self::with_names(["X".into(), "Y".into(), "Z".into()], level_names, counts)
    }

    pub fn with_names(factor_names: [String; 3], level_names: [Vec<String>; 3], counts: Vec<f64>) -> Result<Self> {
        let dims = [level_names[0].len(), level_names[1].len(), level_names[2].len()];
        if dims.contains(&0) {
            return Err(Error::Shape("every factor needs at least one level".into()));
        }
        if counts.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} counts for a {}x{}x{} table",
                counts.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Invalid("table counts must be finite and nonnegative".into()));
        }
        if counts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Invalid("table total must be positive".into()));
        }
        Ok(Table3 {
            dims,
            counts,
            factor_names,
            level_names,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn factor_names(&self) -> &[String; 3] {
        &self.factor_names
    }

    pub fn level_names(&self) -> &[Vec<String>; 3] {
        &self.level_names
    }

    pub fn index(&self, cell: [usize; 3]) -> usize {
        (cell[0] * self.dims[1] + cell[1]) * self.dims[2] + cell[2]
    }

    pub fn get(&self, cell: [usize; 3]) -> f64 {
        self.counts[self.index(cell)]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// All cells in storage order.
    pub fn cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [a, b, c] = self.dims;
        (0..a).flat_map(move |i| (0..b).flat_map(move |j| (0..c).map(move |k| [i, j, k])))
    }

    pub fn margin(&self, subset: &[usize]) -> MarginTable {
        let mut m = MarginTable::zeros(subset, self.dims);
        for (cell, v) in self.cells().zip(&self.counts) {
            let idx = m.index_of(cell);
            m.values[idx] += v;
        }
        m
    }

    fn relabel(&self, counts: Vec<f64>) -> Table3 {
        Table3 {
            counts,
            ..self.clone()
        }
    }
}

/// A marginal table over a subset of the three factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginTable {
    /// Sorted factor indices.
    pub subset: Vec<usize>,
    /// Level counts of the factors in `subset`.
    pub dims: Vec<usize>,
    /// Row-major over `subset`.
    pub values: Vec<f64>,
}

impl MarginTable {
    pub fn zeros(subset: &[usize], table_dims: [usize; 3]) -> Self {
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        let dims: Vec<usize> = subset.iter().map(|&f| table_dims[f]).collect();
        let size = dims.iter().product();
        MarginTable {
            subset,
            dims,
            values: vec![0.0; size],
        }
    }

    pub fn index_of(&self, cell: [usize; 3]) -> usize {
        self.subset
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&f, &d)| acc * d + cell[f])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> MarginTable {
        MarginTable {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Collapses onto a subset of this margin's factors.
    pub fn collapse(&self, onto: &[usize], table_dims: [usize; 3]) -> MarginTable {
        let mut out = MarginTable::zeros(onto, table_dims);
        for (idx, v) in self.values.iter().enumerate() {
            let cell = self.cell_of(idx);
            let j = out.index_of(cell);
            out.values[j] += v;
        }
        out
    }

    /// A full cell whose restriction to `subset` is entry `idx`; other factors are 0.
    fn cell_of(&self, mut idx: usize) -> [usize; 3] {
        let mut cell = [0; 3];
        for (&f, &d) in self.subset.iter().zip(&self.dims).rev() {
            cell[f] = idx % d;
            idx /= d;
        }
        cell
    }
}

/// Generating class of a hierarchical model, factor indices 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    margins: Vec<Vec<usize>>,
}

impl ModelSpec {
    pub fn new(margins: Vec<Vec<usize>>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::InvalidSpec("no margins".into()));
        }
        let mut norm = Vec::with_capacity(margins.len());
        for m in margins {
            let mut m = m.clone();
            m.sort_unstable();
            if m.is_empty() {
                return Err(Error::InvalidSpec("empty margin".into()));
            }
            if m.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSpec(format!("repeated factor in margin {m:?}")));
            }
            if m.iter().any(|&f| f > 2) {
                return Err(Error::InvalidSpec(format!("factor index out of range in {m:?}")));
            }
            norm.push(m);
        }
        for (a, ma) in norm.iter().enumerate() {
            for (b, mb) in norm.iter().enumerate() {
                if a != b && ma.iter().all(|f| mb.contains(f)) {
                    return Err(Error::InvalidSpec(format!("margin {ma:?} is contained in {mb:?}")));
                }
            }
        }
        Ok(ModelSpec { margins: norm })
    }

    /// Parses 1-based factor lists separated by `+`, e.g. `"1,3+2,3"`.
    pub fn parse(s: &str) -> Result<Self> {
        let margins = s
            .split('+')
            .map(|m| {
                m.split(',')
                    .map(|f| {
                        let f: usize = f
                            .trim()
                            .parse()
                            .map_err(|_| Error::InvalidSpec(format!("bad factor {f:?} in {s:?}")))?;
                        if f == 0 {
                            return Err(Error::InvalidSpec("factors are numbered from 1".into()));
                        }
                        Ok(f - 1)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(margins)
    }

    pub fn conditional_independence() -> Self {
        ModelSpec {
            margins: vec![vec![0, 2], vec![1, 2]],
        }
    }

    pub fn margins(&self) -> &[Vec<usize>] {
        &self.margins
    }

    /// Whether the factor subset belongs to the model's hierarchical closure.
    pub fn contains_term(&self, term: &[usize]) -> bool {
        self.margins.iter().any(|m| term.iter().all(|f| m.contains(f)))
    }

    /// A generator order with the running-intersection property, if one exists.
    fn decomposition(&self) -> Option<Vec<(Vec<usize>, Vec<usize>)>> {
        permutations(self.margins.len()).into_iter().find_map(|order| {
            let mut seen: Vec<usize> = Vec::new();
            let mut steps = Vec::new();
            for (t, &g) in order.iter().enumerate() {
                let gen = &self.margins[g];
                let sep: Vec<usize> = gen.iter().copied().filter(|f| seen.contains(f)).collect();
                if t > 0 && !order[..t].iter().any(|&u| sep.iter().all(|f| self.margins[u].contains(f))) {
                    return None;
                }
                for &f in gen {
                    if !seen.contains(&f) {
                        seen.push(f);
                    }
                }
                steps.push((gen.clone(), sep));
            }
            Some(steps)
        })
    }

    pub fn is_decomposable(&self) -> bool {
        self.decomposition().is_some()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// One term of the zero-sum decomposition of log expected counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTerm {
    /// Sorted factor indices, 0-based.
    pub factors: Vec<usize>,
    pub dims: Vec<usize>,
    /// Row-major over `factors`.
    pub values: Vec<f64>,
}

impl LambdaTerm {
    fn at(&self, cell: [usize; 3]) -> f64 {
        let idx = self
            .factors
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&f, &d)| acc * d + cell[f]);
        self.values[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub grand: f64,
    /// Main effects for all three factors, then interactions in the model.
    pub terms: Vec<LambdaTerm>,
}

impl Lambdas {
    pub fn term(&self, factors: &[usize]) -> Option<&LambdaTerm> {
        let mut f = factors.to_vec();
        f.sort_unstable();
        self.terms.iter().find(|t| t.factors == f)
    }

    pub fn first_interaction(&self) -> Option<&LambdaTerm> {
        self.terms.iter().find(|t| t.factors.len() == 2)
    }

    /// `grand + Σ term(cell)`, the log expected count of a cell.
    pub fn log_fitted(&self, cell: [usize; 3]) -> f64 {
        self.grand + self.terms.iter().map(|t| t.at(cell)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpfResult {
    pub table: Table3,
    pub iterations: usize,
    /// Largest absolute cell difference between a fitted and target margin.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    pub table: Table3,
    pub iterations: usize,
    /// Largest disagreement between raw margin estimates on their shared factors.
    pub cross_margin_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglinFit {
    pub fitted: Table3,
    pub lambdas: Lambdas,
    pub method: Method,
    pub iterations: usize,
    pub cross_margin_discrepancy: f64,
}

/// Expands integer counts into one record per unit.
pub fn table_to_records(t: &Table3) -> Result<CategoricalFrame> {
    let mut factors: [Vec<Option<usize>>; 3] = Default::default();
    for (cell, &v) in t.cells().zip(&t.counts) {
        if v.fract() != 0.0 {
            return Err(Error::NonIntegerCount { cell, value: v });
        }
        for _ in 0..v as usize {
            for f in 0..3 {
                factors[f].push(Some(cell[f]));
            }
        }
    }
    CategoricalFrame::with_names(t.factor_names.clone(), t.level_names.clone(), factors)
}

/// Tabulates the records intact on all three factors.
pub fn records_to_table(records: &CategoricalFrame) -> Result<Table3> {
    let dims = records.levels();
    let mut counts = vec![0.0; dims.iter().product()];
    for r in 0..records.n_rows() {
        if let [Some(i), Some(j), Some(k)] = records.record(r) {
            counts[(i * dims[1] + j) * dims[2] + k] += 1.0;
        }
    }
    Table3::with_names(records.names().clone(), records.level_names().clone(), counts)
        .map_err(|_| Error::NoIntactRecords(vec![0, 1, 2]))
}

/// Relative frequencies over the records intact on `subset`.
pub fn ac_margin_probs(records: &CategoricalFrame, subset: &[usize]) -> Result<MarginTable> {
    if subset.iter().any(|&f| f > 2) {
        return Err(Error::InvalidSpec(format!("factor index out of range in {subset:?}")));
    }
    let mut m = MarginTable::zeros(subset, records.levels());
    let mut n = 0usize;
    for r in 0..records.n_rows() {
        let rec = records.record(r);
        if m.subset.iter().all(|&f| rec[f].is_some()) {
            let cell = rec.map(|v| v.unwrap_or(0));
            let idx = m.index_of(cell);
            m.values[idx] += 1.0;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoIntactRecords(m.subset));
    }
    Ok(m.scaled(1.0 / n as f64))
}

fn max_cross_margin_discrepancy(margins: &[MarginTable], dims: [usize; 3]) -> f64 {
    let mut worst = 0.0f64;
    for (a, ma) in margins.iter().enumerate() {
        for mb in &margins[a + 1..] {
            let shared: Vec<usize> = ma.subset.iter().copied().filter(|f| mb.subset.contains(f)).collect();
            let ca = ma.collapse(&shared, dims);
            let cb = mb.collapse(&shared, dims);
            for (x, y) in ca.values.iter().zip(&cb.values) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// Rakes a two-way margin so its one-way margins equal the given ones.
fn rake_two_way(m: &MarginTable, rows: &MarginTable, cols: &MarginTable) -> Result<MarginTable> {
    let (a, b) = (m.dims[0], m.dims[1]);
    let mut v = m.values.clone();
    for _ in 0..DEFAULT_IPF_MAX_ITER {
        for i in 0..a {
            let s: f64 = v[i * b..(i + 1) * b].iter().sum();
            if s > 0.0 {
                v[i * b..(i + 1) * b].iter_mut().for_each(|x| *x *= rows.values[i] / s);
            }
        }
        let mut worst = 0.0f64;
        for j in 0..b {
            let s: f64 = (0..a).map(|i| v[i * b + j]).sum();
            if s > 0.0 {
                (0..a).for_each(|i| v[i * b + j] *= cols.values[j] / s);
            }
        }
        for i in 0..a {
            let s: f64 = v[i * b..(i + 1) * b].iter().sum();
            worst = worst.max((s - rows.values[i]).abs());
        }
        if worst <= 1e-14 {
            return Ok(MarginTable {
                values: v,
                ..m.clone()
            });
        }
    }
    Err(Error::IpfNotConverged {
        iterations: DEFAULT_IPF_MAX_ITER,
        discrepancy: f64::NAN,
    })
}

/// Available-cases expected cell counts under `spec`.
pub fn ac_expected_counts(records: &CategoricalFrame, spec: &ModelSpec) -> Result<ExpectedCounts> {
    let dims = records.levels();
    let n = records.n_rows() as f64;
    let raw: Vec<MarginTable> = spec
        .margins()
        .iter()
        .map(|m| ac_margin_probs(records, m))
        .collect::<Result<_>>()?;
    let cross_margin_discrepancy = n * max_cross_margin_discrepancy(&raw, dims);

    let targets: Vec<MarginTable> = match spec.decomposition() {
        Some(steps) => {
            let mut pseudo = vec![n; dims.iter().product()];
            let mut covered = [false; 3];
            for (gen, sep) in &steps {
                let pg = ac_margin_probs(records, gen)?;
                let ps = if sep.is_empty() {
                    None
                } else {
                    Some(ac_margin_probs(records, sep)?)
                };
                let template = Table3::new(dims, vec![1.0; pseudo.len()])?;
                for (cell, v) in template.cells().zip(pseudo.iter_mut()) {
                    let num = pg.values[pg.index_of(cell)];
                    let den = ps.as_ref().map_or(1.0, |s| s.values[s.index_of(cell)]);
                    *v = if num == 0.0 { 0.0 } else { *v * num / den };
                }
                gen.iter().for_each(|&f| covered[f] = true);
            }
            for f in (0..3).filter(|&f| !covered[f]) {
                pseudo.iter_mut().for_each(|v| *v /= dims[f] as f64);
            }
            let pseudo = Table3::new(dims, pseudo)?;
            spec.margins().iter().map(|m| pseudo.margin(m)).collect()
        }
        None => {
            let one_way: Vec<MarginTable> = (0..3)
                .map(|f| ac_margin_probs(records, &[f]))
                .collect::<Result<_>>()?;
            raw.iter()
                .map(|m| {
                    let raked = match m.subset.as_slice() {
                        &[f, g] => rake_two_way(m, &one_way[f], &one_way[g])?,
                        _ => m.clone(),
                    };
                    Ok(raked.scaled(n))
                })
                .collect::<Result<_>>()?
        }
    };

    let start = uniform_like(records, dims)?;
    let fit = ipf(&start, &targets, DEFAULT_IPF_TOL, DEFAULT_IPF_MAX_ITER)?;
    Ok(ExpectedCounts {
        table: fit.table,
        iterations: fit.iterations,
        cross_margin_discrepancy,
    })
}

fn uniform_like(records: &CategoricalFrame, dims: [usize; 3]) -> Result<Table3> {
    Table3::with_names(
        records.names().clone(),
        records.level_names().clone(),
        vec![1.0; dims.iter().product()],
    )
}

/// Complete-cases expected counts: the model fitted to the fully intact records.
pub fn cc_expected_counts(records: &CategoricalFrame, spec: &ModelSpec) -> Result<ExpectedCounts> {
    let observed = records_to_table(records)?;
    let targets: Vec<MarginTable> = spec.margins().iter().map(|m| observed.margin(m)).collect();
    let start = uniform_like(records, records.levels())?;
    let fit = ipf(&start, &targets, DEFAULT_IPF_TOL, DEFAULT_IPF_MAX_ITER)?;
    Ok(ExpectedCounts {
        table: fit.table,
        iterations: fit.iterations,
        cross_margin_discrepancy: 0.0,
    })
}

fn max_discrepancy(t: &Table3, targets: &[MarginTable]) -> f64 {
    targets
        .iter()
        .flat_map(|target| {
            let m = t.margin(&target.subset);
            m.values
                .iter()
                .zip(&target.values)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Iterative proportional fitting of `start` to the target margins.
///
/// Targets must agree on total mass. Cells that start at zero stay zero.
pub fn ipf(start: &Table3, targets: &[MarginTable], tol: f64, max_iter: usize) -> Result<IpfResult> {
    for t in targets {
        let expect = MarginTable::zeros(&t.subset, start.dims);
        if t.subset.iter().any(|&f| f > 2) || t.dims != expect.dims || t.values.len() != expect.values.len() {
            return Err(Error::Shape(format!("target over {:?} does not fit the table", t.subset)));
        }
        if t.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("target margins must be finite and nonnegative".into()));
        }
    }
    if let Some(first) = targets.first() {
        let total = first.total();
        if let Some(bad) = targets
            .iter()
            .find(|t| (t.total() - total).abs() > 1e-8 * total.abs().max(1.0))
        {
            return Err(Error::Invalid(format!(
                "target totals disagree: {total} vs {}",
                bad.total()
            )));
        }
    }

    let mut table = start.clone();
    let mut discrepancy = max_discrepancy(&table, targets);
    if discrepancy <= tol {
        return Ok(IpfResult {
            table,
            iterations: 0,
            discrepancy,
        });
    }
    for iteration in 1..=max_iter {
        for target in targets {
            let current = table.margin(&target.subset);
            let cells: Vec<[usize; 3]> = table.cells().collect();
            for cell in cells {
                let idx = current.index_of(cell);
                if current.values[idx] > 0.0 {
                    let c = table.index(cell);
                    table.counts[c] *= target.values[idx] / current.values[idx];
                }
            }
        }
        discrepancy = max_discrepancy(&table, targets);
        if discrepancy <= tol {
            return Ok(IpfResult {
                table,
                iterations: iteration,
                discrepancy,
            });
        }
    }
    Err(Error::IpfNotConverged {
        iterations: max_iter,
        discrepancy,
    })
}

/// Zero-sum decomposition of `ln fitted`.
///
/// Main effects are returned for every factor; interactions only for factor
/// sets inside some generator of `spec`.
pub fn extract_lambdas(fitted: &Table3, spec: &ModelSpec) -> Result<Lambdas> {
    if fitted.counts.iter().any(|&v| v <= 0.0) {
        return Err(Error::StructuralZero);
    }
    let dims = fitted.dims;
    let log = fitted.relabel(fitted.counts.iter().map(|v| v.ln()).collect());
    let size = log.counts.len() as f64;
    let grand = log.total() / size;

    // mean of log counts over each margin's cells, then successive centering
    let mean_over = |subset: &[usize]| -> MarginTable {
        let m = log.margin(subset);
        let per = size / m.values.len() as f64;
        m.scaled(1.0 / per)
    };
    let mains: Vec<MarginTable> = (0..3)
        .map(|f| {
            let mut m = mean_over(&[f]);
            m.values.iter_mut().for_each(|v| *v -= grand);
            m
        })
        .collect();
    let pairs = [[0, 1], [0, 2], [1, 2]];
    let two_way: Vec<MarginTable> = pairs
        .iter()
        .map(|pair| {
            let mut m = mean_over(pair);
            for idx in 0..m.values.len() {
                let cell = m.cell_of(idx);
                m.values[idx] -= grand
                    + mains[pair[0]].values[cell[pair[0]]]
                    + mains[pair[1]].values[cell[pair[1]]];
            }
            m
        })
        .collect();

    let to_term = |m: &MarginTable| LambdaTerm {
        factors: m.subset.clone(),
        dims: m.dims.clone(),
        values: m.values.clone(),
    };
    let mut terms: Vec<LambdaTerm> = mains.iter().map(to_term).collect();
    for (pair, m) in pairs.iter().zip(&two_way) {
        if spec.contains_term(pair) {
            terms.push(to_term(m));
        }
    }
    if spec.contains_term(&[0, 1, 2]) {
        let mut three = MarginTable::zeros(&[0, 1, 2], dims);
        for cell in log.cells() {
            let lower = grand
                + (0..3).map(|f| mains[f].values[cell[f]]).sum::<f64>()
                + pairs
                    .iter()
                    .zip(&two_way)
                    .map(|(_, m)| m.values[m.index_of(cell)])
                    .sum::<f64>();
            three.values[log.index(cell)] = log.get(cell) - lower;
        }
        terms.push(to_term(&three));
    }
    Ok(Lambdas { grand, terms })
}

pub fn fit_loglin_ac(records: &CategoricalFrame, spec: &ModelSpec) -> Result<LoglinFit> {
    let ec = ac_expected_counts(records, spec)?;
    let lambdas = extract_lambdas(&ec.table, spec)?;
    Ok(LoglinFit {
        fitted: ec.table,
        lambdas,
        method: Method::Ac,
        iterations: ec.iterations,
        cross_margin_discrepancy: ec.cross_margin_discrepancy,
    })
}

pub fn fit_loglin_cc(records: &CategoricalFrame, spec: &ModelSpec) -> Result<LoglinFit> {
    let ec = cc_expected_counts(records, spec)?;
    let lambdas = extract_lambdas(&ec.table, spec)?;
    Ok(LoglinFit {
        fitted: ec.table,
        lambdas,
        method: Method::Cc,
        iterations: ec.iterations,
        cross_margin_discrepancy: 0.0,
    })
}

/// The UCB admissions table: Admit (2) × Gender (2) × Dept (6).
pub fn ucb_admissions() -> Table3 {
    let admit = ["Admitted", "Rejected"];
    let gender = ["Male", "Female"];
    let dept = ["A", "B", "C", "D", "E", "F"];
    // [dept][gender][admit]
    let raw: [[[f64; 2]; 2]; 6] = [
        [[512.0, 313.0], [89.0, 19.0]],
        [[353.0, 207.0], [17.0, 8.0]],
        [[120.0, 205.0], [202.0, 391.0]],
        [[138.0, 279.0], [131.0, 244.0]],
        [[53.0, 138.0], [94.0, 299.0]],
        [[22.0, 351.0], [24.0, 317.0]],
    ];
    let mut counts = Vec::with_capacity(24);
    for a in 0..2 {
        for g in 0..2 {
            for d in 0..6 {
                counts.push(raw[d][g][a]);
            }
        }
    }
    let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    Table3::with_names(
        ["Admit".into(), "Gender".into(), "Dept".into()],
        [names(&admit), names(&gender), names(&dept)],
        counts,
    )
    .expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn recs(rows: &[[Option<usize>; 3]], levels: [usize; 3]) -> CategoricalFrame {
        let factors = [0, 1, 2].map(|f| rows.iter().map(|r| r[f]).collect());
        CategoricalFrame::new(levels, factors).unwrap()
    }

    #[test]
    fn records_expand_counts() {
        let t = Table3::new([2, 2, 2], vec![1.0; 8]).unwrap();
        let r = table_to_records(&t).unwrap();
        assert_eq!(r.n_rows(), 8);
        let mut counts = vec![0.0; 8];
        counts[0] = 3.0;
        let t = Table3::new([2, 2, 2], counts).unwrap();
        let r = table_to_records(&t).unwrap();
        assert_eq!(r.n_rows(), 3);
        assert!((0..3).all(|i| r.record(i) == [Some(0), Some(0), Some(0)]));
        let t = Table3::new([1, 1, 2], vec![1.5, 1.0]).unwrap();
        assert!(matches!(table_to_records(&t), Err(Error::NonIntegerCount { .. })));
    }

    #[test]
    fn ucb_round_trip() {
        let t = ucb_admissions();
        assert_eq!(t.total(), 4526.0);
        let r = table_to_records(&t).unwrap();
        assert_eq!(r.n_rows(), 4526);
        assert_eq!(records_to_table(&r).unwrap(), t);
    }

    #[test]
    fn margin_probs_hand_enumeration() {
        let r = recs(
            &[[Some(0), None, Some(0)], [Some(0), Some(0), Some(1)], [Some(1), Some(0), None]],
            [2, 2, 2],
        );
        let xz = ac_margin_probs(&r, &[0, 2]).unwrap();
        assert_eq!(xz.values, vec![0.5, 0.5, 0.0, 0.0]);
        let x = ac_margin_probs(&r, &[0]).unwrap();
        assert_abs_diff_eq!(x.values[0], 2.0 / 3.0, epsilon = 1e-15);
        let none = recs(&[[None, Some(0), Some(0)]], [2, 2, 2]);
        assert!(matches!(ac_margin_probs(&none, &[0]), Err(Error::NoIntactRecords(_))));
    }

    #[test]
    fn ipf_examples() {
        let uniform = Table3::new([2, 2, 1], vec![1.0; 4]).unwrap();
        let row = MarginTable { subset: vec![0], dims: vec![2], values: vec![30.0, 70.0] };
        let col = MarginTable { subset: vec![1], dims: vec![2], values: vec![40.0, 60.0] };
        let fit = ipf(&uniform, &[row, col], 1e-10, 1000).unwrap();
        for (got, want) in fit.table.counts().iter().zip([12.0, 18.0, 28.0, 42.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }

        let half = MarginTable { subset: vec![0], dims: vec![2], values: vec![0.5, 0.5] };
        let half_c = MarginTable { subset: vec![1], dims: vec![2], values: vec![0.5, 0.5] };
        let fit = ipf(&uniform, &[half, half_c], 1e-10, 1000).unwrap();
        assert!(fit.table.counts().iter().all(|&v| (v - 0.25).abs() < 1e-12));

        let start = Table3::new([2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let own = [start.margin(&[0]), start.margin(&[1])];
        let fit = ipf(&start, &own, 1e-10, 1000).unwrap();
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.table, start);
    }

    #[test]
    fn ipf_keeps_zeros_and_checks_totals() {
        let start = Table3::new([2, 2, 1], vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let row = MarginTable { subset: vec![0], dims: vec![2], values: vec![3.0, 5.0] };
        let col = MarginTable { subset: vec![1], dims: vec![2], values: vec![2.0, 6.0] };
        let fit = ipf(&start, &[row.clone(), col], 1e-10, 1000).unwrap();
        assert_eq!(fit.table.counts()[0], 0.0);
        let bad = MarginTable { subset: vec![1], dims: vec![2], values: vec![2.0, 7.0] };
        assert!(matches!(ipf(&start, &[row, bad], 1e-10, 1000), Err(Error::Invalid(_))));
    }

    #[test]
    fn ipf_reports_non_convergence() {
        // the zero pattern makes these margins unattainable
        let start = Table3::new([2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let row = MarginTable { subset: vec![0], dims: vec![2], values: vec![1.0, 1.0] };
        let col = MarginTable { subset: vec![1], dims: vec![2], values: vec![0.5, 1.5] };
        assert!(matches!(
            ipf(&start, &[row, col], 1e-10, 50),
            Err(Error::IpfNotConverged { iterations: 50, .. })
        ));
    }

    #[test]
    fn lambda_examples() {
        let spec = ModelSpec::parse("1,2,3").unwrap();
        let t = Table3::new([2, 2, 2], vec![7.0; 8]).unwrap();
        let l = extract_lambdas(&t, &spec).unwrap();
        assert_abs_diff_eq!(l.grand, 7f64.ln(), epsilon = 1e-14);
        assert!(l.terms.iter().all(|t| t.values.iter().all(|v| v.abs() < 1e-14)));

        // e^2 and e^0 along the first factor
        let e2 = 1f64.exp().powi(2);
        let t = Table3::new([2, 1, 1], vec![e2, 1.0]).unwrap();
        let l = extract_lambdas(&t, &ModelSpec::parse("1+2+3").unwrap()).unwrap();
        assert_abs_diff_eq!(l.grand, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l.term(&[0]).unwrap().values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l.term(&[0]).unwrap().values[1], -1.0, epsilon = 1e-14);

        let mut z = vec![1.0; 8];
        z[3] = 0.0;
        let t = Table3::new([2, 2, 2], z).unwrap();
        assert_eq!(extract_lambdas(&t, &spec), Err(Error::StructuralZero));
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            ModelSpec::parse("1,3+2,3").unwrap(),
            ModelSpec::conditional_independence()
        );
        assert!(ModelSpec::parse("1,3+3").is_err());
        assert!(ModelSpec::parse("1,4").is_err());
        assert!(ModelSpec::parse("0").is_err());
        assert!(ModelSpec::parse("1,1").is_err());
        assert!(ModelSpec::parse("").is_err());
        assert!(ModelSpec::parse("1,2+1,3+2,3").is_ok());
    }

    #[test]
    fn decomposability() {
        assert!(ModelSpec::parse("1,3+2,3").unwrap().is_decomposable());
        assert!(ModelSpec::parse("1+2+3").unwrap().is_decomposable());
        assert!(ModelSpec::parse("1,2+3").unwrap().is_decomposable());
        assert!(ModelSpec::parse("1,2,3").unwrap().is_decomposable());
        assert!(!ModelSpec::parse("1,2+1,3+2,3").unwrap().is_decomposable());
    }

    #[test]
    fn saturated_reproduces_observed() {
        let t = Table3::new([2, 3, 2], (1..=12).map(|v| v as f64).collect()).unwrap();
        let r = table_to_records(&t).unwrap();
        let spec = ModelSpec::parse("1,2,3").unwrap();
        let ac = ac_expected_counts(&r, &spec).unwrap();
        let cc = cc_expected_counts(&r, &spec).unwrap();
        for ((a, c), o) in ac.table.counts().iter().zip(cc.table.counts()).zip(t.counts()) {
            assert_abs_diff_eq!(*a, *o, epsilon = 1e-9);
            assert_abs_diff_eq!(*c, *o, epsilon = 1e-9);
        }
    }

    #[test]
    fn cc_uses_only_complete_records() {
        let t = Table3::new([2, 2, 2], vec![3.0, 1.0, 2.0, 4.0, 1.0, 2.0, 5.0, 2.0]).unwrap();
        let r = table_to_records(&t).unwrap();
        // hide Y of the first record (a (0,0,0) unit)
        let masked = r.masked(|row, f| row == 0 && f == 1);
        let spec = ModelSpec::conditional_independence();
        let got = cc_expected_counts(&masked, &spec).unwrap();
        let mut counts = t.counts().to_vec();
        counts[0] -= 1.0;
        let filtered = Table3::new([2, 2, 2], counts).unwrap();
        let want = cc_expected_counts(&table_to_records(&filtered).unwrap(), &spec).unwrap();
        for (a, b) in got.table.counts().iter().zip(want.table.counts()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(got.table.total(), 19.0, epsilon = 1e-9);
    }
}
