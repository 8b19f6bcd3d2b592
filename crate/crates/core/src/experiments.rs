//! Metrics and benchmark harnesses: the synthetic Monte Carlo study, the
//! repeated-split study on real datasets, and the rule explanation table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{friedman_synthetic, friedman_synthetic_with_noise, load_csv, train_test_split, Dataset, TargetStats};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Exec};
use crate::generators::Method;
use crate::pipeline::{fit_pipeline, FitOutcome, PipelineConfig};
use crate::rules::{rule_stats, RuleStats};
use crate::selection::Covering;
use crate::significance::RuleClass;

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

fn normalized_sq_error(pred: &[f64], reference: &[f64], var: f64) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: pred.len(),
        });
    }
    if reference.is_empty() || var.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = pred.iter().zip(reference).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sse / reference.len() as f64 / var)
}

/// Mean squared error on `target`, divided by the variance of `target`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    normalized_sq_error(pred, target, population_variance(target))
}

/// Squared deviation from the noiseless regression function, divided by its variance.
pub fn mse_star(pred: &[f64], truth: &[f64]) -> Result<f64> {
    normalized_sq_error(pred, truth, population_variance(truth))
}

/// Row label and accessor for the describe-style tables.
type StatRow<T> = (&'static str, fn(&T) -> Option<f64>);

/// describe()-style summary: sample std, linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    /// Absent for fewer than two values.
    pub std: Option<f64>,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Aggregate> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Aggregate {
            count: n,
            mean,
            std,
            min: s[0],
            q25: quantile(&s, 0.25),
            q50: quantile(&s, 0.5),
            q75: quantile(&s, 0.75),
            max: s[n - 1],
        })
    }
}

/// Selected-rule metrics of one fit, evaluated on one test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub nb_rules: usize,
    pub n_significant: usize,
    pub interpretability: usize,
    /// Union coverage on the training sample.
    pub coverage: f64,
    pub mse: f64,
    pub mse_star: Option<f64>,
    pub sigma2_hat: f64,
    /// Features constrained by at least one selected rule.
    pub variable_occurrence: BTreeMap<String, bool>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub timing: f64,
}

impl RunReport {
    pub fn features_used(&self) -> Vec<&str> {
        self.variable_occurrence
            .iter()
            .filter(|(_, v)| **v)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn variable_occurrence(cov: &Covering, names: &[String]) -> BTreeMap<String, bool> {
    let mut used = vec![false; names.len()];
    for r in cov.rule_list() {
        for (j, _) in r.conditions() {
            used[j] = true;
        }
    }
    names.iter().cloned().zip(used).collect()
}

fn run_report(
    run: usize,
    seed: u64,
    out: &FitOutcome,
    train: &Dataset,
    test: &Dataset,
    truth: Option<&[f64]>,
    exec: Exec,
) -> Result<RunReport> {
    let est = &out.estimator;
    let pred = est.predict_dataset(test, exec)?;
    Ok(RunReport {
        run,
        seed,
        nb_rules: est.covering.len(),
        n_significant: est.covering.n_significant(),
        interpretability: est.covering.interpretability(),
        coverage: est.covering.union_coverage,
        mse: mse(&pred, test.target())?,
        mse_star: truth.map(|t| mse_star(&pred, t)).transpose()?,
        sigma2_hat: out.significance.sigma2_hat,
        variable_occurrence: variable_occurrence(&est.covering, train.feature_names()),
        timing: 0.0,
    })
}

fn metric_aggregates(runs: &[RunReport]) -> BTreeMap<String, Aggregate> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: Vec<f64>| {
        if let Some(a) = Aggregate::of(&v) {
            m.insert(k.to_string(), a);
        }
    };
    put("nb_rules", runs.iter().map(|r| r.nb_rules as f64).collect());
    put("interpretability", runs.iter().map(|r| r.interpretability as f64).collect());
    put("coverage", runs.iter().map(|r| r.coverage).collect());
    put("mse", runs.iter().map(|r| r.mse).collect());
    put("mse_star", runs.iter().filter_map(|r| r.mse_star).collect());
    m
}

fn occurrence_frequency(runs: &[RunReport]) -> BTreeMap<String, f64> {
    let mut freq: BTreeMap<String, f64> = BTreeMap::new();
    for r in runs {
        for (k, v) in &r.variable_occurrence {
            *freq.entry(k.clone()).or_default() += if *v { 1.0 } else { 0.0 };
        }
    }
    for v in freq.values_mut() {
        *v /= runs.len() as f64;
    }
    freq
}

/// How the synthetic study sets the noise variance used by the significance tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseVariance {
    /// The minimum variance among coverage-eligible rules, as on real data.
    #[default]
    Estimated,
    /// The generating noise variance, known by construction.
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStudyConfig {
    pub runs: usize,
    pub n: usize,
    pub d: usize,
    pub n_test: usize,
    pub noise_variance: NoiseVariance,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for SyntheticStudyConfig {
    fn default() -> Self {
        SyntheticStudyConfig {
            runs: 10,
            n: 5000,
            d: 100,
            n_test: 10_000,
            noise_variance: NoiseVariance::Estimated,
            seed: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl SyntheticStudyConfig {
    /// 100 runs with 50000 test points each.
    pub fn paper_scale() -> Self {
        SyntheticStudyConfig {
            runs: 100,
            n_test: 50_000,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub runs: Vec<RunReport>,
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Share of runs in which each feature appears in a selected rule.
    pub variable_frequency: BTreeMap<String, f64>,
}

impl StudyReport {
    fn new(runs: Vec<RunReport>) -> StudyReport {
        StudyReport {
            aggregates: metric_aggregates(&runs),
            variable_frequency: occurrence_frequency(&runs),
            runs,
        }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregates.get(metric).map(|a| a.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_runs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "run",
            "seed",
            "nb_rules",
            "n_significant",
            "interpretability",
            "coverage",
            "mse",
            "mse_star",
            "sigma2_hat",
            "features_used",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                r.nb_rules.to_string(),
                r.n_significant.to_string(),
                r.interpretability.to_string(),
                r.coverage.to_string(),
                r.mse.to_string(),
                r.mse_star.map(|v| v.to_string()).unwrap_or_default(),
                r.sigma2_hat.to_string(),
                r.features_used().join(";"),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// mean/std/min/quartiles/max rows, one column per metric.
    pub fn summary_table(&self, title: &str) -> String {
        let cols: Vec<(&str, &str)> = [
            ("nb_rules", "Nb rules"),
            ("interpretability", "Interpretability"),
            ("coverage", "Cov"),
            ("mse", "MSE"),
            ("mse_star", "MSE*"),
        ]
        .into_iter()
        .filter(|(k, _)| self.aggregates.contains_key(*k))
        .collect();
        let mut out = String::new();
        let _ = write!(out, "{title:<8}");
        for (_, h) in &cols {
            let _ = write!(out, " {h:>16}");
        }
        out.push('\n');
        let rows: [StatRow<Aggregate>; 7] = [
            ("mean", |a| Some(a.mean)),
            ("std", |a| a.std),
            ("min", |a| Some(a.min)),
            ("25%", |a| Some(a.q25)),
            ("50%", |a| Some(a.q50)),
            ("75%", |a| Some(a.q75)),
            ("max", |a| Some(a.max)),
        ];
        for (label, f) in rows {
            let _ = write!(out, "{label:<8}");
            for (k, _) in &cols {
                match f(&self.aggregates[*k]) {
                    Some(v) => {
                        let _ = write!(out, " {v:>16.2}");
                    }
                    None => {
                        let _ = write!(out, " {:>16}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One fresh train and test sample per run; runs execute concurrently with
/// seeds derived from the master seed and the run index.
pub fn run_synthetic_study(cfg: &SyntheticStudyConfig, exec: Exec) -> Result<StudyReport> {
    if cfg.runs == 0 || cfg.n == 0 || cfg.n_test == 0 {
        return Err(Error::InvalidConfig("runs, n and n_test must be positive".into()));
    }
    let runs = exec.map_range(cfg.runs, |r| synthetic_run(cfg, r, exec));
    Ok(StudyReport::new(runs.into_iter().collect::<Result<Vec<_>>>()?))
}

fn synthetic_run(cfg: &SyntheticStudyConfig, r: usize, exec: Exec) -> Result<RunReport> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, r as u64);
    let train = friedman_synthetic(cfg.n, cfg.d, derive_seed(seed, 0))?;
    let test = friedman_synthetic_with_noise(cfg.n_test, cfg.d, train.noise_sd, derive_seed(seed, 1))?;
    let mut pc = cfg.pipeline.clone();
    pc.generator.seed = derive_seed(seed, 2);
    if cfg.noise_variance == NoiseVariance::Known {
        pc.sigma2 = Some(train.noise_sd * train.noise_sd);
    }
    let out = fit_pipeline(&train.data, &pc, exec)?;
    let mut rep = run_report(r, seed, &out, &train.data, &test.data, Some(&test.truth), exec)?;
    rep.timing = started.elapsed().as_secs_f64();
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataset {
    pub name: String,
    pub path: PathBuf,
    pub target: String,
    /// Columns removed before fitting.
    #[serde(default)]
    pub drop: Vec<String>,
}

impl RealDataset {
    pub fn load(&self) -> Result<Dataset> {
        let ds = load_csv(&self.path, &self.target)?;
        let drop: Vec<&str> = self.drop.iter().map(String::as_str).collect();
        ds.drop_columns(&drop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealStudyConfig {
    pub executions: usize,
    pub train_fraction: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for RealStudyConfig {
    fn default() -> Self {
        RealStudyConfig {
            executions: 20,
            train_fraction: 0.7,
            methods: vec![Method::Rf, Method::Gb, Method::Sgb],
            seed: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealStudyEntry {
    pub dataset: String,
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub report: StudyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealStudyReport {
    pub entries: Vec<RealStudyEntry>,
}

impl RealStudyReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Mean Nb rules, Cov, Int and MSE per dataset and generator.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:<6} {:>9} {:>6} {:>8} {:>6}\n",
            "Dataset", "CA", "Nb rules", "Cov", "Int", "MSE"
        );
        for e in &self.entries {
            let m = |k| e.report.mean(k).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{:<12} {:<6} {:>9.2} {:>6.2} {:>8.2} {:>6.2}",
                e.dataset,
                e.method.to_string().to_uppercase(),
                m("nb_rules"),
                m("coverage"),
                m("interpretability"),
                m("mse")
            );
        }
        out
    }
}

/// Repeated seeded train/test splits of one dataset with one generator.
/// `sigma2` is estimated from the rules unless the config supplies it.
pub fn run_split_study(ds: &Dataset, method: Method, cfg: &RealStudyConfig, exec: Exec) -> Result<StudyReport> {
    if cfg.executions == 0 {
        return Err(Error::InvalidConfig("executions must be positive".into()));
    }
    let runs = exec.map_range(cfg.executions, |e| {
        let started = Instant::now();
        let seed = derive_seed(cfg.seed, e as u64);
        let (train, test) = train_test_split(ds, cfg.train_fraction, derive_seed(seed, 0))?;
        let mut pc = cfg.pipeline.clone();
        pc.generator.method = method;
        pc.generator.seed = derive_seed(seed, 1);
        let out = fit_pipeline(&train, &pc, exec)?;
        let mut rep = run_report(e, seed, &out, &train, &test, None, exec)?;
        rep.timing = started.elapsed().as_secs_f64();
        Ok(rep)
    });
    Ok(StudyReport::new(runs.into_iter().collect::<Result<Vec<_>>>()?))
}

pub fn run_real_study(datasets: &[RealDataset], cfg: &RealStudyConfig, exec: Exec) -> Result<RealStudyReport> {
    let mut entries = Vec::new();
    for spec in datasets {
        let ds = spec.load()?;
        for &method in &cfg.methods {
            entries.push(RealStudyEntry {
                dataset: spec.name.clone(),
                method,
                n: ds.n_rows(),
                d: ds.n_features(),
                report: run_split_study(&ds, method, cfg, exec)?,
            });
        }
    }
    Ok(RealStudyReport { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRow {
    pub id: String,
    pub conditions: Vec<String>,
    pub tag: RuleClass,
    pub coverage: f64,
    pub prediction: Option<f64>,
    pub std: Option<f64>,
    /// `(prediction - mean(Y)) / |mean(Y)|`; absent when undefined.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    pub std: Option<f64>,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl VariableSummary {
    fn of(name: &str, values: &[f64]) -> VariableSummary {
        let a = Aggregate::of(values).expect("non-empty column");
        VariableSummary {
            name: name.to_string(),
            mean: a.mean,
            std: a.std,
            min: a.min,
            q25: a.q25,
            q50: a.q50,
            q75: a.q75,
            max: a.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub target_mean: f64,
    pub rules: Vec<ExplainRow>,
    pub all_significant: bool,
    /// Target first, then features in order of first use by a rule.
    pub variables: Vec<VariableSummary>,
}

fn fmt_bound(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

fn explain_rows(cov: &Covering, names: &[String], target_mean: f64, stats: &[RuleStats]) -> (Vec<ExplainRow>, Vec<usize>) {
    let mut order: Vec<usize> = Vec::new();
    let rows = cov
        .rules
        .iter()
        .zip(stats)
        .enumerate()
        .map(|(i, (s, st))| {
            let conditions = s
                .rule
                .conditions()
                .map(|(j, iv)| {
                    if !order.contains(&j) {
                        order.push(j);
                    }
                    format!("{} in [{}, {}]", names[j], fmt_bound(iv.lo()), fmt_bound(iv.hi()))
                })
                .collect();
            let delta = st
                .cond_mean
                .filter(|_| target_mean != 0.0)
                .map(|m| (m - target_mean) / target_mean.abs());
            ExplainRow {
                id: format!("R{}", i + 1),
                conditions,
                tag: s.tag,
                coverage: st.coverage,
                prediction: st.cond_mean,
                std: st.cond_std(),
                delta,
            }
        })
        .collect();
    (rows, order)
}

/// Rule table with statistics recomputed on `ds`.
pub fn explain_report(cov: &Covering, ds: &Dataset) -> ExplainReport {
    let target_mean = TargetStats::of(ds.target()).mean;
    let names = ds.feature_names();
    let stats: Vec<RuleStats> = cov.rule_list().map(|r| rule_stats(r, ds)).collect();
    let (rules, order) = explain_rows(cov, names, target_mean, &stats);
    let mut variables = vec![VariableSummary::of(ds.target_name(), ds.target())];
    for j in order {
        let col: Vec<f64> = ds.column(j).collect();
        variables.push(VariableSummary::of(&names[j], &col));
    }
    ExplainReport {
        target_mean,
        all_significant: cov.rules.iter().all(|s| s.tag == RuleClass::Significant),
        rules,
        variables,
    }
}

/// Rule table from the statistics stored with the covering; no variable summary.
pub fn explain_stored(cov: &Covering, names: &[String], target_mean: f64) -> ExplainReport {
    let stats: Vec<RuleStats> = cov.rules.iter().map(|s| s.stats).collect();
    let (rules, _) = explain_rows(cov, names, target_mean, &stats);
    ExplainReport {
        target_mean,
        all_significant: cov.rules.iter().all(|s| s.tag == RuleClass::Significant),
        rules,
        variables: Vec::new(),
    }
}

impl ExplainReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        let cond_w = self
            .rules
            .iter()
            .flat_map(|r| r.conditions.iter().map(String::len))
            .chain(["Conditions".len(), "(all space)".len()])
            .max()
            .unwrap_or(10);
        let mut out = format!(
            "{:<5} {:<cond_w$} {:>3} {:>9} {:>11} {:>9} {:>8}\n",
            "Rule", "Conditions", "Tag", "Coverage", "Prediction", "Std", "Delta_n"
        );
        for r in &self.rules {
            let tag = match r.tag {
                RuleClass::Significant => "S",
                RuleClass::Insignificant => "I",
            };
            let first = r.conditions.first().map_or("(all space)", String::as_str);
            let _ = writeln!(
                out,
                "{:<5} {:<cond_w$} {:>3} {:>9.2} {:>11} {:>9} {:>8}",
                r.id,
                first,
                tag,
                r.coverage,
                opt(r.prediction, 2),
                opt(r.std, 2),
                opt(r.delta, 1)
            );
            for c in r.conditions.iter().skip(1) {
                let _ = writeln!(out, "{:<5} {c:<cond_w$}", "");
            }
        }
        if self.all_significant {
            out.push_str("All rules are significant.\n");
        }
        if self.variables.is_empty() {
            return out;
        }
        out.push('\n');
        let _ = write!(out, "{:<6}", "");
        for v in &self.variables {
            let _ = write!(out, " {:>12}", v.name);
        }
        out.push('\n');
        let rows: [StatRow<VariableSummary>; 7] = [
            ("mean", |v| Some(v.mean)),
            ("std", |v| v.std),
            ("min", |v| Some(v.min)),
            ("25%", |v| Some(v.q25)),
            ("50%", |v| Some(v.q50)),
            ("75%", |v| Some(v.q75)),
            ("max", |v| Some(v.max)),
        ];
        for (label, f) in rows {
            let _ = write!(out, "{label:<6}");
            for v in &self.variables {
                let _ = write!(out, " {:>12}", opt(f(v), 2));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{Interval, Rule};
    use approx::assert_relative_eq;

    #[test]
    fn mse_identities() {
        let y = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        let m = y.iter().sum::<f64>() / 4.0;
        assert_relative_eq!(mse(&[m; 4], &y).unwrap(), 1.0, epsilon = 1e-12);
        // Shifted mean: 1 + c^2 / Var(Y).
        let c = 0.7;
        let var = population_variance(&y);
        assert_relative_eq!(mse(&[m + c; 4], &y).unwrap(), 1.0 + c * c / var, epsilon = 1e-12);
        assert_eq!(mse_star(&y, &y).unwrap(), 0.0);
        assert!(matches!(mse(&[1.0, 1.0], &[3.0, 3.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn aggregate_matches_describe() {
        // pandas: Series([3, 1, 4, 1, 5]).describe()
        let a = Aggregate::of(&[3.0, 1.0, 4.0, 1.0, 5.0]).unwrap();
        assert_eq!(a.mean, 2.8);
        assert_relative_eq!(a.std.unwrap(), 1.7888543819998317, epsilon = 1e-15);
        assert_eq!((a.min, a.q25, a.q50, a.q75, a.max), (1.0, 1.0, 3.0, 4.0, 5.0));
        let b = Aggregate::of(&[1.0, 2.0]).unwrap();
        assert_eq!(b.q25, 1.25);
        assert_eq!(Aggregate::of(&[2.0]).unwrap().std, None);
    }

    #[test]
    fn uncovered_points_decompose() {
        // Zero fallback: uncovered rows contribute y^2.
        let y = [1.0, 3.0, 2.0, 6.0];
        let pred = [1.5, 2.5, 0.0, 0.0];
        let var = population_variance(&y);
        let covered = ((1.0f64 - 1.5).powi(2) + (3.0f64 - 2.5).powi(2)) / 4.0 / var;
        let uncovered = (4.0 + 36.0) / 4.0 / var;
        assert_relative_eq!(mse(&pred, &y).unwrap(), covered + uncovered, epsilon = 1e-12);
    }

    #[test]
    fn synthetic_smoke_run() {
        let mut cfg = SyntheticStudyConfig {
            runs: 1,
            n: 200,
            d: 10,
            n_test: 500,
            ..Default::default()
        };
        cfg.pipeline.generator.n_trees = 20;
        let rep = run_synthetic_study(&cfg, Exec::Parallel).unwrap();
        let r = &rep.runs[0];
        assert!(r.mse.is_finite() && r.mse_star.unwrap().is_finite() && r.coverage.is_finite());
        assert!(r.interpretability >= r.nb_rules);
        let again = run_synthetic_study(&cfg, Exec::Sequential).unwrap();
        assert_eq!(again.to_json().unwrap(), rep.to_json().unwrap());
    }

    #[test]
    fn aggregate_recomputes_from_runs() {
        let mut cfg = SyntheticStudyConfig {
            runs: 3,
            n: 150,
            d: 9,
            n_test: 200,
            ..Default::default()
        };
        cfg.pipeline.generator.n_trees = 10;
        let rep = run_synthetic_study(&cfg, Exec::Parallel).unwrap();
        let mses: Vec<f64> = rep.runs.iter().map(|r| r.mse).collect();
        assert_eq!(rep.aggregates["mse"], Aggregate::of(&mses).unwrap());
    }

    #[test]
    fn explain_all_space_rule() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, (0..10).map(|i| i as f64 + 1.0).collect()).unwrap();
        let cov = Covering::from_tagged(vec![(Rule::all_space(), RuleClass::Significant)], &ds);
        let rep = explain_report(&cov, &ds);
        assert_eq!(rep.rules.len(), 1);
        assert_eq!(rep.rules[0].delta, Some(0.0));
        assert!(rep.all_significant);
        assert!(rep.to_text().contains("All rules are significant"));
        let stored = explain_stored(&cov, ds.feature_names(), rep.target_mean);
        assert_eq!(stored.rules, rep.rules);
        assert!(stored.variables.is_empty());
    }

    #[test]
    fn explain_delta_and_variables() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let ds = Dataset::from_rows(&rows, (0..10).map(|i| if i < 5 { 1.0 } else { 3.0 }).collect()).unwrap();
        let cov = Covering::from_tagged(
            vec![
                (Rule::from_conditions([(0, Interval::at_most(4.5))]).unwrap(), RuleClass::Significant),
                (Rule::all_space(), RuleClass::Insignificant),
            ],
            &ds,
        );
        let rep = explain_report(&cov, &ds);
        assert_eq!(rep.rules[0].delta, Some(-0.5));
        assert_eq!(rep.rules[0].prediction, Some(1.0));
        assert!(!rep.all_significant);
        assert!(!rep.to_text().contains("All rules are significant"));
        let names: Vec<_> = rep.variables.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["Y", "X1"]);
    }
}
