use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use covreg::dataset::{load_csv, load_feature_csv};
use covreg::diagnostics::{check_suitability, DEFAULT_UNCOVERED_TOLERANCE};
use covreg::estimator::Fallback;
use covreg::experiments::{
    explain_report, explain_stored, run_real_study, run_synthetic_study, NoiseVariance, RealDataset, RealStudyConfig,
    SyntheticStudyConfig,
};
use covreg::generators::Method;
use covreg::model::ModelFile;
use covreg::pipeline::{fit_pipeline, PipelineConfig};
use covreg::selection::StopCondition;
use covreg::significance::SignificanceConfig;
use covreg::{Error, Exec};

const EXIT_INPUT: u8 = 2;
const EXIT_PIPELINE: u8 = 3;
const EXIT_UNSUITABLE: u8 = 4;

#[derive(Parser)]
#[command(name = "covreg", version, about = "Interpretable regression by data-dependent coverings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a covering estimator and write the model file.
    Fit(FitCmd),
    /// Predict with a saved model.
    Predict(PredictCmd),
    /// Print the rule table of a saved model.
    Explain(ExplainCmd),
    /// Check the suitability conditions of a saved model on its training data.
    Diagnose(DiagnoseCmd),
    /// Monte Carlo study on the synthetic benchmark.
    BenchSynthetic(BenchSyntheticCmd),
    /// Repeated train/test splits on user-supplied datasets.
    BenchReal(BenchRealCmd),
}

/// Settings shared by the fitting commands. Every key may also come from a
/// TOML file given with `--config`; flags take precedence.
#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Settings {
    /// Target column name.
    #[arg(long)]
    target: Option<String>,
    /// Rule generator: rf, gb or sgb.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    l_max: Option<usize>,
    /// Maximum leaves per tree.
    #[arg(long)]
    tree_size: Option<usize>,
    #[arg(long)]
    max_rules: Option<usize>,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Noise variance; estimated from the rules when omitted.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Overrides the insignificance level.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prediction for unpopulated cells: zero or mean.
    #[arg(long)]
    fallback: Option<String>,
    /// Selection stop rule: union (full coverage) or sum (coverages add to 1).
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    mtry: Option<usize>,
    /// Run single-threaded.
    #[arg(long)]
    #[serde(skip)]
    sequential: bool,
    /// TOML file with default values for these options.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

impl Settings {
    fn merged(&self) -> Result<Settings, Error> {
        let Some(path) = &self.config else {
            return Ok(self.shallow_clone());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let file: Settings =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok(Settings {
            target: self.target.clone().or(file.target),
            generator: self.generator.clone().or(file.generator),
            alpha: self.alpha.or(file.alpha),
            gamma: self.gamma.or(file.gamma),
            l_max: self.l_max.or(file.l_max),
            tree_size: self.tree_size.or(file.tree_size),
            max_rules: self.max_rules.or(file.max_rules),
            n_trees: self.n_trees.or(file.n_trees),
            sigma2: self.sigma2.or(file.sigma2),
            epsilon: self.epsilon.or(file.epsilon),
            seed: self.seed.or(file.seed),
            fallback: self.fallback.clone().or(file.fallback),
            stop: self.stop.clone().or(file.stop),
            learning_rate: self.learning_rate.or(file.learning_rate),
            subsample: self.subsample.or(file.subsample),
            mtry: self.mtry.or(file.mtry),
            sequential: self.sequential,
            config: None,
        })
    }

    fn shallow_clone(&self) -> Settings {
        Settings {
            target: self.target.clone(),
            generator: self.generator.clone(),
            fallback: self.fallback.clone(),
            stop: self.stop.clone(),
            config: None,
            ..*self
        }
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn pipeline(&self) -> Result<PipelineConfig, Error> {
        let mut c = PipelineConfig::default();
        let g = &mut c.generator;
        if let Some(m) = &self.generator {
            g.method = m.parse::<Method>()?;
        }
        g.tree_size = self.tree_size.unwrap_or(g.tree_size);
        g.max_rules = self.max_rules.unwrap_or(g.max_rules);
        g.n_trees = self.n_trees.unwrap_or(g.n_trees);
        g.learning_rate = self.learning_rate.unwrap_or(g.learning_rate);
        g.subsample = self.subsample.unwrap_or(g.subsample);
        g.mtry = self.mtry.or(g.mtry);
        g.seed = self.seed.unwrap_or(g.seed);
        g.validate()?;
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.gamma = self.gamma.unwrap_or(c.gamma);
        c.l_max = self.l_max.unwrap_or(c.l_max);
        c.sigma2 = self.sigma2;
        c.epsilon = self.epsilon;
        if let Some(f) = &self.fallback {
            c.fallback = f.parse::<Fallback>()?;
        }
        if let Some(s) = &self.stop {
            c.stop = match s.as_str() {
                "union" => StopCondition::Union,
                "sum" => StopCondition::Sum,
                other => return Err(Error::InvalidConfig(format!("unknown stop rule `{other}`"))),
            };
        }
        Ok(c)
    }

    fn target(&self) -> &str {
        self.target.as_deref().unwrap_or("Y")
    }
}

#[derive(Args)]
struct FitCmd {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Significance diagnostics report; defaults to `<model>.diagnostics.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct PredictCmd {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the model's feature columns in training order; a target column is ignored.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ExplainCmd {
    #[arg(long)]
    model: PathBuf,
    /// Training CSV; when given, statistics are recomputed and variables summarized.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseCmd {
    #[arg(long)]
    model: PathBuf,
    /// Training CSV the model was fitted on.
    #[arg(long)]
    data: PathBuf,
    /// Largest uncovered share of the sample accepted for the collection coverage check.
    #[arg(long, default_value_t = DEFAULT_UNCOVERED_TOLERANCE)]
    uncovered_tolerance: f64,
    /// Exit with status 0 even when a check fails.
    #[arg(long)]
    soft_fail: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchSyntheticCmd {
    /// Number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Test points per run.
    #[arg(long)]
    test_size: Option<usize>,
    /// 100 runs with 50000 test points.
    #[arg(long)]
    paper_scale: bool,
    /// Use the generating noise variance instead of estimating it.
    #[arg(long)]
    known_sigma2: bool,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-run CSV.
    #[arg(long)]
    runs_csv: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct BenchRealCmd {
    /// Dataset CSV; repeat for several datasets.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Column to drop before fitting; repeatable.
    #[arg(long)]
    drop: Vec<String>,
    /// Number of splits per dataset.
    #[arg(long)]
    runs: Option<usize>,
    /// Test fraction of each split.
    #[arg(long)]
    test_size: Option<f64>,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn fit(cmd: &FitCmd) -> Result<(), Error> {
    let s = cmd.settings.merged()?;
    let cfg = s.pipeline()?;
    let ds = load_csv(&cmd.data, s.target())?;
    let out = fit_pipeline(&ds, &cfg, s.exec())?;
    let model = ModelFile::from_fit(&out, &cfg, &ds);
    model.save(&cmd.model)?;
    let diag_path = cmd.out.clone().unwrap_or_else(|| cmd.model.with_extension("diagnostics.json"));
    let mut report = serde_json::to_string_pretty(&out.report)?;
    report.push('\n');
    write_output(Some(&diag_path), &report)?;
    let cov = &out.estimator.covering;
    println!("nb_rules        {}", cov.len());
    println!("significant     {}", cov.n_significant());
    println!("interpretability {}", cov.interpretability());
    println!("union_coverage  {}", cov.union_coverage);
    println!("sigma2_hat      {}", out.significance.sigma2_hat);
    Ok(())
}

fn predict(cmd: &PredictCmd) -> Result<(), Error> {
    let model = ModelFile::load(&cmd.model)?;
    let table = load_feature_csv(&cmd.data, &model.target_name)?;
    model.check_schema(&table.names)?;
    let est = model.to_estimator()?;
    let ds = table.to_dataset(&model.target_name)?;
    let exec = if cmd.sequential { Exec::Sequential } else { Exec::Parallel };
    let pred = est.predict_dataset(&ds, exec)?;
    let mut text = String::from("prediction\n");
    for p in pred {
        text.push_str(&p.to_string());
        text.push('\n');
    }
    write_output(cmd.out.as_deref(), &text)
}

fn explain(cmd: &ExplainCmd) -> Result<(), Error> {
    let model = ModelFile::load(&cmd.model)?;
    let cov = model.covering()?;
    let report = match &cmd.data {
        Some(path) => {
            let ds = load_csv(path, &model.target_name)?;
            model.check_schema(ds.feature_names())?;
            explain_report(&cov, &ds)
        }
        None => explain_stored(&cov, &model.feature_names, model.target_stats.mean),
    };
    let text = if cmd.json { report.to_json()? } else { report.to_text() };
    write_output(cmd.out.as_deref(), &text)
}

fn diagnose(cmd: &DiagnoseCmd) -> Result<bool, Error> {
    let model = ModelFile::load(&cmd.model)?;
    let ds = load_csv(&cmd.data, &model.target_name)?;
    model.check_schema(ds.feature_names())?;
    let cov = model.covering()?;
    let m = &model.metadata;
    let sig = SignificanceConfig {
        alpha: m.alpha,
        l_max: m.l_max,
        beta_n: m.beta_n,
        epsilon_n: m.epsilon_n,
        sigma2_hat: m.sigma2_hat,
    };
    let report = check_suitability(&cov, &ds, &sig, m.gamma, cmd.uncovered_tolerance)?;
    let text = if cmd.json {
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        s
    } else {
        report.to_text()
    };
    write_output(cmd.out.as_deref(), &text)?;
    Ok(report.passed)
}

fn bench_synthetic(cmd: &BenchSyntheticCmd) -> Result<(), Error> {
    let s = cmd.settings.merged()?;
    let mut cfg = if cmd.paper_scale {
        SyntheticStudyConfig::paper_scale()
    } else {
        SyntheticStudyConfig::default()
    };
    cfg.pipeline = s.pipeline()?;
    cfg.seed = s.seed.unwrap_or(0);
    cfg.runs = cmd.runs.unwrap_or(cfg.runs);
    cfg.n = cmd.n.unwrap_or(cfg.n);
    cfg.d = cmd.d.unwrap_or(cfg.d);
    cfg.n_test = cmd.test_size.unwrap_or(cfg.n_test);
    if cmd.known_sigma2 {
        cfg.noise_variance = NoiseVariance::Known;
    }
    let report = run_synthetic_study(&cfg, s.exec())?;
    if let Some(p) = &cmd.out {
        write_output(Some(p), &report.to_json()?)?;
    }
    if let Some(p) = &cmd.runs_csv {
        report.write_runs_csv(p)?;
    }
    let mut text = report.summary_table("Covering");
    let informative = report
        .runs
        .iter()
        .filter(|r| r.features_used().iter().all(|f| informative_feature(f)))
        .count();
    text.push_str(&format!(
        "\nruns using only X1..X8: {informative} of {}\n",
        report.runs.len()
    ));
    write_output(None, &text)
}

fn informative_feature(name: &str) -> bool {
    name.strip_prefix('X')
        .and_then(|k| k.parse::<usize>().ok())
        .is_some_and(|k| (1..=8).contains(&k))
}

fn bench_real(cmd: &BenchRealCmd) -> Result<(), Error> {
    let s = cmd.settings.merged()?;
    let mut cfg = RealStudyConfig {
        pipeline: s.pipeline()?,
        seed: s.seed.unwrap_or(0),
        ..Default::default()
    };
    if s.generator.is_some() {
        cfg.methods = vec![cfg.pipeline.generator.method];
    }
    cfg.executions = cmd.runs.unwrap_or(cfg.executions);
    if let Some(t) = cmd.test_size {
        cfg.train_fraction = 1.0 - t;
    }
    let datasets: Vec<RealDataset> = cmd
        .data
        .iter()
        .map(|p| RealDataset {
            name: p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
            path: p.clone(),
            target: s.target().to_string(),
            drop: cmd.drop.clone(),
        })
        .collect();
    let report = run_real_study(&datasets, &cfg, s.exec())?;
    if let Some(p) = &cmd.out {
        write_output(Some(p), &report.to_json()?)?;
    }
    write_output(None, &report.summary_table())
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("COVREG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("COVREG_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Error::InvalidConfig("COVREG_THREADS must be positive".into()));
    }
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    configure_threads()?;
    match &cli.command {
        Command::Fit(c) => fit(c)?,
        Command::Predict(c) => predict(c)?,
        Command::Explain(c) => explain(c)?,
        Command::Diagnose(c) => {
            if !diagnose(c)? && !c.soft_fail {
                return Ok(ExitCode::from(EXIT_UNSUITABLE));
            }
        }
        Command::BenchSynthetic(c) => bench_synthetic(c)?,
        Command::BenchReal(c) => bench_real(c)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_PIPELINE })
        }
    }
}
