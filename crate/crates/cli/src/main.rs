//! `availcases`: available-cases vs complete-cases estimation from the command line.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure,
//! 4 a simulation arm produced no successful replicates.

mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use availcases::data::NumericFrame;
use availcases::io::{self, CsvDialect};
use availcases::loglinear::{fit_loglin_ac, fit_loglin_cc, table_to_records, LoglinFit, ModelSpec};
use availcases::moments::{pairwise_correlation, pairwise_moments, DenominatorPolicy};
use availcases::pca::{fit_pca_ac, fit_pca_cc, PcaFit};
use availcases::regression::{bootstrap_se, delta_se, fit_ac, fit_cc, split_response, Method, RegressionFit, RowUsage, SeMethod};
use availcases::sim::{
    mar_bias_study, run_variance_study, LinearGaussianPopulation, LoglinEstimand, LoglinTarget, MarSpec,
    PcaEstimand, RegressionEstimand, SimReport,
};
use availcases::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use table::{num, opt, TextTable};

#[derive(Debug, Parser, Serialize)]
#[command(name = "availcases", version, about = "Available-cases estimation with missing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Pairwise-complete counts, covariances and correlations.
    Cov(CovArgs),
    /// Linear regression (AC and/or CC) with optional standard errors.
    Lm(LmArgs),
    /// Principal components (AC and/or CC).
    Pca(PcaArgs),
    /// Three-factor log-linear model point estimates.
    Loglin(LoglinArgs),
    /// Monte-Carlo CC vs AC variance study under MCAR masking.
    Simulate(SimulateArgs),
    /// Complete-case bias under MAR masking of a synthetic population.
    Marstudy(MarArgs),
    /// Print a bundled dataset as CSV.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Input CSV file, or `@pima` / `@ucb` for a bundled dataset.
    #[arg(long)]
    data: String,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Missing-value tokens, matched after trimming whitespace.
    #[arg(long = "na", default_values = ["NA", ""])]
    na_tokens: Vec<String>,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
}

impl InputArgs {
    fn dialect(&self) -> CsvDialect {
        CsvDialect {
            delimiter: self.delimiter,
            na_tokens: self.na_tokens.clone(),
            header: !self.no_header,
        }
    }

    fn numeric(&self) -> Result<NumericFrame, Error> {
        match self.data.as_str() {
            "@pima" => Ok(io::pima()),
            "@ucb" => Err(Error::Invalid("@ucb is a count table, not numeric data".into())),
            path => io::read_numeric_csv(path, &self.dialect()),
        }
    }

    fn categorical(&self, count_column: Option<&str>) -> Result<availcases::data::CategoricalFrame, Error> {
        if self.data == "@ucb" {
            return table_to_records(&io::ucb_admissions_csv());
        }
        let text = std::fs::read_to_string(&self.data)?;
        let header: Vec<String> = text
            .lines()
            .next()
            .unwrap_or("")
            .split(self.delimiter)
            .map(|s| s.trim().to_string())
            .collect();
        let count = count_column.map(str::to_string).or_else(|| {
            ["Freq", "freq", "count", "Count", "n"]
                .iter()
                .find(|c| header.iter().any(|h| h == *c))
                .map(|c| c.to_string())
        });
        match count {
            Some(c) if !self.no_header => table_to_records(&io::parse_count_table(&text, &self.dialect(), &c)?),
            _ => io::parse_categorical(&text, &self.dialect()),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct OutputArgs {
    /// Print the structured report to stdout instead of the aligned table.
    #[arg(long)]
    json: bool,
    /// Also write the structured report (JSON) to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum MethodSel {
    Ac,
    Cc,
    Both,
}

impl MethodSel {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodSel::Ac => vec![Method::Ac],
            MethodSel::Cc => vec![Method::Cc],
            MethodSel::Both => vec![Method::Cc, Method::Ac],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum SeSel {
    None,
    Delta,
    Bootstrap,
}

#[derive(Debug, Args, Serialize)]
struct CovArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Divide by N_rs instead of N_rs - 1.
    #[arg(long)]
    population: bool,
    /// Report correlations instead of covariances.
    #[arg(long)]
    cor: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct LmArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Response column name.
    #[arg(long)]
    response: String,
    #[arg(long, value_enum, default_value = "ac")]
    method: MethodSel,
    /// Standard errors; delta and bootstrap apply to the AC fit.
    #[arg(long, value_enum, default_value = "none")]
    se: SeSel,
    #[arg(long, default_value_t = availcases::regression::DEFAULT_N_BOOT)]
    n_boot: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct PcaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Use the correlation matrix.
    #[arg(long)]
    scale: bool,
    #[arg(long, value_enum, default_value = "ac")]
    method: MethodSel,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct LoglinArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Model margins, 1-based, e.g. `1,3+2,3`.
    #[arg(long)]
    margins: String,
    /// Count column of a cell-count file (detected from Freq/count/n when omitted).
    #[arg(long)]
    count_column: Option<String>,
    #[arg(long, value_enum, default_value = "ac")]
    method: MethodSel,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `betaK` (K = 0 intercept, 1 first slope, ...), `pca`, `pca-scaled`,
    /// `lambda` (first two-factor interaction), `lambda:F,G:I` or `cell:I,J,K`.
    #[arg(long, default_value = "beta1")]
    estimand: String,
    /// Response column for regression estimands (default: last column).
    #[arg(long)]
    response: Option<String>,
    /// Model margins for log-linear estimands.
    #[arg(long, default_value = "1,3+2,3")]
    margins: String,
    #[arg(long)]
    count_column: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10])]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct MarArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    intercept: f64,
    #[arg(long, default_value_t = 2.0)]
    slope: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Logistic weight of the driver in P(Y missing | D).
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    weight: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct FixtureArgs {
    #[arg(value_parser = ["pima", "ucb"])]
    name: String,
}

enum Failure {
    Usage(String),
    Run(Error),
    NoSuccess,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

struct Output {
    table: String,
    report: Value,
    no_success: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
        Err(Failure::NoSuccess) => {
            eprintln!("error: at least one simulation arm produced no successful replicates");
            ExitCode::from(4)
        }
    }
}

// A closed pipe (`| head`) is not an error worth reporting.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage(format!("--seed is required for {what}")))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (out, output_args) = match &cli.command {
        Command::Cov(a) => (cmd_cov(a)?, &a.output),
        Command::Lm(a) => (cmd_lm(a)?, &a.output),
        Command::Pca(a) => (cmd_pca(a)?, &a.output),
        Command::Loglin(a) => (cmd_loglin(a)?, &a.output),
        Command::Simulate(a) => (cmd_simulate(a)?, &a.output),
        Command::Marstudy(a) => (cmd_mar(a)?, &a.output),
        Command::Fixture(a) => {
            match a.name.as_str() {
                "pima" => emit(&io::write_numeric(&io::pima(), &CsvDialect::default())),
                _ => emit(include_str!("../../core/data/ucb_admissions.csv")),
            }
            return Ok(());
        }
    };
    let report = json!({
        "command": serde_json::to_value(&cli.command).expect("args serialize"),
        "result": out.report,
    });
    if output_args.json {
        emit(&(serde_json::to_string_pretty(&report).expect("json") + "\n"));
    } else {
        emit(&out.table);
    }
    if let Some(path) = &output_args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report).expect("json") + "\n")
            .map_err(|e| Failure::Run(e.into()))?;
    }
    if out.no_success {
        return Err(Failure::NoSuccess);
    }
    Ok(())
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn cmd_cov(a: &CovArgs) -> Result<Output, Failure> {
    let frame = a.input.numeric()?;
    let policy = if a.population { DenominatorPolicy::Population } else { DenominatorPolicy::Sample };
    let pm = pairwise_moments(&frame, policy)?;
    let shown = if a.cor { pairwise_correlation(&pm)? } else { pm.cov.clone() };
    let names = frame.names();
    let mut t = TextTable::new(std::iter::once(String::new()).chain(names.iter().cloned()));
    for (r, name) in names.iter().enumerate() {
        t.row(std::iter::once(name.clone()).chain((0..names.len()).map(|c| num(shown[(r, c)]))));
    }
    let mut counts = TextTable::new(std::iter::once("N_rs".to_string()).chain(names.iter().cloned()));
    for (r, name) in names.iter().enumerate() {
        counts.row(std::iter::once(name.clone()).chain((0..names.len()).map(|c| pm.counts[(r, c)].to_string())));
    }
    let counts_json: Vec<Vec<usize>> = (0..pm.dim()).map(|r| (0..pm.dim()).map(|c| pm.counts[(r, c)]).collect()).collect();
    Ok(Output {
        table: format!("{}\n{}", t.render(), counts.render()),
        report: json!({
            "columns": names,
            "counts": counts_json,
            "cross_moments": matrix_json(&pm.cross),
            "covariance": matrix_json(&pm.cov),
            "correlation": if a.cor { matrix_json(&shown) } else { Value::Null },
        }),
        no_success: false,
    })
}

fn regression_json(names: &[String], fit: &RegressionFit) -> Value {
    json!({
        "method": fit.method,
        "se_method": fit.se_method,
        "terms": names,
        "coefficients": fit.coefficients(),
        "se": fit.se,
        "complete_rows": match &fit.n_used { RowUsage::CompleteRows(n) => Some(*n), _ => None },
        "min_pair_count": match &fit.n_used { RowUsage::PairCounts(m) => m.iter().min().copied(), _ => None },
    })
}

fn cmd_lm(a: &LmArgs) -> Result<Output, Failure> {
    let frame = a.input.numeric()?;
    let response = frame.column_index(&a.response)?;
    let (x, y) = split_response(&frame, response)?;
    let seed = match a.se {
        SeSel::Bootstrap => Some(require_seed(a.seed, "bootstrap standard errors")?),
        _ => a.seed,
    };
    let mut names = vec!["(intercept)".to_string()];
    names.extend(x.names().iter().cloned());

    let mut fits = Vec::new();
    for m in a.method.methods() {
        let fit = match m {
            Method::Ac => {
                let fit = fit_ac(&x, &y)?;
                match a.se {
                    SeSel::None => fit,
                    SeSel::Delta => {
                        let se = delta_se(&x, &y)?;
                        fit.with_se(se, SeMethod::Delta)
                    }
                    SeSel::Bootstrap => {
                        let b = bootstrap_se(&x, &y, a.n_boot, seed.unwrap())?;
                        fit.with_se(b.se, SeMethod::Bootstrap)
                    }
                }
            }
            Method::Cc => fit_cc(&x, &y)?,
        };
        fits.push(fit);
    }
    let mut header = vec!["term".to_string()];
    for f in &fits {
        let tag = method_tag(f.method);
        header.push(tag.to_string());
        if f.se.is_some() {
            header.push(format!("{tag} se"));
        }
    }
    let mut t = TextTable::new(header);
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        for f in &fits {
            row.push(num(f.coefficients()[i]));
            if let Some(se) = &f.se {
                row.push(num(se[i]));
            }
        }
        t.row(row);
    }
    Ok(Output {
        table: t.render(),
        report: json!({
            "response": a.response,
            "fits": fits.iter().map(|f| regression_json(&names, f)).collect::<Vec<_>>(),
        }),
        no_success: false,
    })
}

fn method_tag(m: Method) -> &'static str {
    match m {
        Method::Ac => "AC",
        Method::Cc => "CC",
    }
}

fn pca_json(fit: &PcaFit) -> Value {
    json!({
        "method": fit.method,
        "scaled": fit.scaled,
        "sdev": fit.sdev.iter().collect::<Vec<_>>(),
        "rotation": matrix_json(&fit.rotation),
        "clamped_eigenvalues": fit.clamped,
    })
}

fn cmd_pca(a: &PcaArgs) -> Result<Output, Failure> {
    let frame = a.input.numeric()?;
    let fits: Vec<PcaFit> = a
        .method
        .methods()
        .into_iter()
        .map(|m| match m {
            Method::Ac => fit_pca_ac(&frame, a.scale),
            Method::Cc => fit_pca_cc(&frame, a.scale),
        })
        .collect::<Result<_, _>>()?;
    let mut t = TextTable::new(
        std::iter::once("component".to_string()).chain(fits.iter().map(|f| format!("{} sdev", method_tag(f.method)))),
    );
    for k in 0..frame.n_cols() {
        t.row(std::iter::once(format!("PC{}", k + 1)).chain(fits.iter().map(|f| num(f.sdev[k]))));
    }
    Ok(Output {
        table: t.render(),
        report: json!({ "columns": frame.names(), "fits": fits.iter().map(pca_json).collect::<Vec<_>>() }),
        no_success: false,
    })
}

fn loglin_json(fit: &LoglinFit) -> Value {
    json!({
        "method": fit.method,
        "dims": fit.fitted.dims(),
        "factors": fit.fitted.factor_names(),
        "levels": fit.fitted.level_names(),
        "fitted": fit.fitted.counts(),
        "lambdas": fit.lambdas,
        "ipf_iterations": fit.iterations,
        "cross_margin_discrepancy": fit.cross_margin_discrepancy,
    })
}

fn cmd_loglin(a: &LoglinArgs) -> Result<Output, Failure> {
    let records = a.input.categorical(a.count_column.as_deref())?;
    let spec = ModelSpec::parse(&a.margins)?;
    let fits: Vec<LoglinFit> = a
        .method
        .methods()
        .into_iter()
        .map(|m| match m {
            Method::Ac => fit_loglin_ac(&records, &spec),
            Method::Cc => fit_loglin_cc(&records, &spec),
        })
        .collect::<Result<_, _>>()?;

    let names = records.names();
    let levels = records.level_names();
    let mut t = TextTable::new(
        names
            .iter()
            .cloned()
            .chain(fits.iter().map(|f| format!("{} fitted", method_tag(f.method)))),
    );
    for cell in fits[0].fitted.cells() {
        t.row(
            (0..3)
                .map(|f| levels[f][cell[f]].clone())
                .chain(fits.iter().map(|fit| num(fit.fitted.get(cell)))),
        );
    }
    let mut lt = TextTable::new(
        ["term".to_string(), "level".to_string()]
            .into_iter()
            .chain(fits.iter().map(|f| format!("{} lambda", method_tag(f.method)))),
    );
    lt.row(
        ["(grand)".to_string(), String::new()]
            .into_iter()
            .chain(fits.iter().map(|f| num(f.lambdas.grand))),
    );
    for (ti, term) in fits[0].lambdas.terms.iter().enumerate() {
        let label: Vec<&str> = term.factors.iter().map(|&f| names[f].as_str()).collect();
        for idx in 0..term.values.len() {
            let mut rem = idx;
            let mut lv = vec![String::new(); term.factors.len()];
            for (k, (&f, &d)) in term.factors.iter().zip(&term.dims).enumerate().rev() {
                lv[k] = levels[f][rem % d].clone();
                rem /= d;
            }
            lt.row(
                [label.join(":"), lv.join(":")]
                    .into_iter()
                    .chain(fits.iter().map(|f| num(f.lambdas.terms[ti].values[idx]))),
            );
        }
    }
    Ok(Output {
        table: format!("{}\n{}", t.render(), lt.render()),
        report: json!({
            "margins": spec.margins().iter().map(|m| m.iter().map(|f| f + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "n_records": records.n_rows(),
            "fits": fits.iter().map(loglin_json).collect::<Vec<_>>(),
        }),
        no_success: false,
    })
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("bad index list {s:?}"))))
        .collect()
}

fn loglin_target(estimand: &str) -> Result<Option<LoglinTarget>, Failure> {
    if estimand == "lambda" {
        return Ok(Some(LoglinTarget::FirstInteraction));
    }
    if let Some(rest) = estimand.strip_prefix("lambda:") {
        let (factors, index) = rest
            .split_once(':')
            .ok_or_else(|| Failure::Usage("expected lambda:F,G:I".into()))?;
        let factors = parse_usize_list(factors)?;
        if factors.contains(&0) {
            return Err(Failure::Usage("factors are numbered from 1".into()));
        }
        let index = index
            .parse()
            .map_err(|_| Failure::Usage(format!("bad lambda index {index:?}")))?;
        return Ok(Some(LoglinTarget::Lambda {
            factors: factors.iter().map(|f| f - 1).collect(),
            index,
        }));
    }
    if let Some(rest) = estimand.strip_prefix("cell:") {
        let cell = parse_usize_list(rest)?;
        let cell: [usize; 3] = cell.try_into().map_err(|_| Failure::Usage("expected cell:I,J,K".into()))?;
        return Ok(Some(LoglinTarget::Cell(cell)));
    }
    Ok(None)
}

fn sim_table(report: &SimReport) -> String {
    let mut rates: Vec<f64> = Vec::new();
    for r in &report.rows {
        if !rates.contains(&r.na_rate) {
            rates.push(r.na_rate);
        }
    }
    let mut t = TextTable::new(["NA rate", "CC var.", "AC var.", "CC/AC", "CC fail", "AC fail"]);
    for rate in rates {
        let cc = report.row(rate, Method::Cc).unwrap();
        let ac = report.row(rate, Method::Ac).unwrap();
        t.row([
            format!("{rate:.2}"),
            opt(cc.variance),
            opt(ac.variance),
            opt(report.variance_ratio(rate)),
            cc.n_failures.to_string(),
            ac.n_failures.to_string(),
        ]);
    }
    t.render()
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Output, Failure> {
    let seed = require_seed(a.seed, "simulate")?;
    let report = if let Some(target) = loglin_target(&a.estimand)? {
        let records = a.input.categorical(a.count_column.as_deref())?;
        let est = LoglinEstimand { spec: ModelSpec::parse(&a.margins)?, target };
        run_variance_study(&records, &est, &a.rates, a.reps, seed)?
    } else {
        let frame = a.input.numeric()?;
        match a.estimand.as_str() {
            "pca" | "pca-scaled" => {
                let est = PcaEstimand { scale: a.estimand == "pca-scaled" };
                run_variance_study(&frame, &est, &a.rates, a.reps, seed)?
            }
            other => {
                let coef = other
                    .strip_prefix("beta")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Failure::Usage(format!("unknown estimand {other:?}")))?;
                let response = match &a.response {
                    Some(name) => frame.column_index(name)?,
                    None => frame.n_cols() - 1,
                };
                if coef >= frame.n_cols() {
                    return Err(Failure::Usage(format!("no coefficient {coef}")));
                }
                let est = RegressionEstimand { response, coef };
                run_variance_study(&frame, &est, &a.rates, a.reps, seed)?
            }
        }
    };
    let no_success = report.rows.iter().any(|r| r.successes() == 0);
    Ok(Output {
        table: sim_table(&report),
        report: serde_json::to_value(&report).expect("report serializes"),
        no_success,
    })
}

fn cmd_mar(a: &MarArgs) -> Result<Output, Failure> {
    let seed = require_seed(a.seed, "marstudy")?;
    if !(a.noise > 0.0) {
        return Err(Failure::Usage("--noise must be positive".into()));
    }
    let population = LinearGaussianPopulation {
        intercept: a.intercept,
        slope: a.slope,
        noise_sd: a.noise,
        driver_mean: 0.0,
        driver_sd: 1.0,
    };
    let spec = MarSpec {
        target_col: 1,
        driver_cols: vec![0],
        weights: vec![a.weight],
        offset: a.offset,
        seed,
    };
    let r = mar_bias_study(&population, &spec, a.n, a.reps, seed)?;
    let mut t = TextTable::new(["quantity", "CC mean", "MC se", "truth", "bias/se"]);
    for (name, s) in [("slope", &r.slope), ("mean of Y", &r.mean_y)] {
        t.row([name.to_string(), num(s.mean), num(s.mc_se), num(s.truth), format!("{:.2}", s.z())]);
    }
    Ok(Output {
        table: t.render(),
        report: serde_json::to_value(&r).expect("report serializes"),
        no_success: false,
    })
}
