//! Coverage filtering, noise-variance plug-in and the significant /
//! insignificant split of candidate rules.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rules::ScoredRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscardReason {
    /// Empirical coverage not strictly above `n^-alpha`.
    Coverage,
    /// More constrained features than `l_max`.
    Length,
    /// Neither significant nor insignificant.
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discarded {
    pub scored: ScoredRule,
    pub reason: DiscardReason,
}

/// Coverage threshold `n^-alpha`.
pub fn coverage_threshold(n: usize, alpha: f64) -> f64 {
    (n as f64).powf(-alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1/2), got {alpha}")))
    }
}

/// Keeps rules with coverage strictly above `n^-alpha` and length at most
/// `l_max`. Returns `(kept, discarded)`, both in input order.
pub fn coverage_filter(
    rules: Vec<ScoredRule>,
    n: usize,
    alpha: f64,
    l_max: usize,
) -> Result<(Vec<ScoredRule>, Vec<Discarded>)> {
    check_alpha(alpha)?;
    let threshold = coverage_threshold(n, alpha);
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for scored in rules {
        let reason = if scored.rule.len() > l_max {
            Some(DiscardReason::Length)
        } else if scored.stats.coverage <= threshold {
            Some(DiscardReason::Coverage)
        } else {
            None
        };
        match reason {
            Some(reason) => discarded.push(Discarded { scored, reason }),
            None => kept.push(scored),
        }
    }
    Ok((kept, discarded))
}

/// Smallest conditional variance among rules holding at least two rows.
pub fn estimate_noise_variance(rules: &[ScoredRule]) -> Result<f64> {
    rules
        .iter()
        .filter(|s| s.stats.support_count >= 2)
        .filter_map(|s| s.stats.cond_var)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoVarianceEstimate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub l_max: usize,
    pub beta_n: f64,
    pub epsilon_n: f64,
    pub sigma2_hat: f64,
}

impl SignificanceConfig {
    /// `beta_n = n^(alpha/2 - 1/4)` and `epsilon_n = beta_n * s_n`.
    pub fn derive(alpha: f64, l_max: usize, n: usize, s_n: f64, sigma2_hat: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if l_max < 1 {
            return Err(Error::InvalidConfig("l_max must be >= 1".into()));
        }
        if !(sigma2_hat >= 0.0 && sigma2_hat.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma2 must be finite and >= 0, got {sigma2_hat}")));
        }
        let beta_n = (n as f64).powf(alpha / 2.0 - 0.25);
        Ok(SignificanceConfig {
            alpha,
            l_max,
            beta_n,
            epsilon_n: beta_n * s_n,
            sigma2_hat,
        })
    }

    pub fn with_epsilon(self, epsilon_n: f64) -> Self {
        SignificanceConfig { epsilon_n, ..self }
    }

    /// `sqrt((V_n - sigma2_hat)_+)`
    pub fn excess_sd(&self, cond_var: f64) -> f64 {
        (cond_var - self.sigma2_hat).max(0.0).sqrt()
    }

    pub fn is_significant(&self, cond_mean: f64, cond_var: f64, global_mean: f64) -> bool {
        self.beta_n * (cond_mean - global_mean).abs() >= self.excess_sd(cond_var)
    }

    pub fn is_insignificant_level(&self, cond_var: f64) -> bool {
        self.epsilon_n >= self.excess_sd(cond_var)
    }

    pub fn classify(&self, cond_mean: f64, cond_var: f64, global_mean: f64) -> Option<RuleClass> {
        if self.is_significant(cond_mean, cond_var, global_mean) {
            Some(RuleClass::Significant)
        } else if self.is_insignificant_level(cond_var) {
            Some(RuleClass::Insignificant)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleClass {
    #[serde(rename = "S")]
    Significant,
    #[serde(rename = "I")]
    Insignificant,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifiedRules {
    pub significant: Vec<ScoredRule>,
    pub insignificant: Vec<ScoredRule>,
    pub discarded: Vec<Discarded>,
}

impl ClassifiedRules {
    pub fn is_empty(&self) -> bool {
        self.significant.is_empty() && self.insignificant.is_empty()
    }
}

/// Splits coverage-filtered rules into significant and insignificant sets.
/// Rules failing both tests land in `discarded` with reason `Neither`.
pub fn classify_rules(rules: Vec<ScoredRule>, ds: &Dataset, cfg: &SignificanceConfig) -> ClassifiedRules {
    let global_mean = ds.target().iter().sum::<f64>() / ds.n_rows() as f64;
    let mut out = ClassifiedRules::default();
    for scored in rules {
        let class = match (scored.stats.cond_mean, scored.stats.cond_var) {
            (Some(m), Some(v)) => cfg.classify(m, v, global_mean),
            _ => None,
        };
        match class {
            Some(RuleClass::Significant) => out.significant.push(scored),
            Some(RuleClass::Insignificant) => out.insignificant.push(scored),
            None => out.discarded.push(Discarded {
                scored,
                reason: DiscardReason::Neither,
            }),
        }
    }
    out
}

/// Per-rule diagnostics entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDiagnostic {
    pub rule: String,
    pub length: usize,
    pub coverage: f64,
    pub mean: Option<f64>,
    pub var: Option<f64>,
    pub class: String,
    pub reason: Option<DiscardReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub n: usize,
    pub coverage_threshold: f64,
    pub config: SignificanceConfig,
    pub n_significant: usize,
    pub n_insignificant: usize,
    pub n_discarded: usize,
    pub rules: Vec<RuleDiagnostic>,
}

impl SignificanceReport {
    /// `pre_discarded` holds rules dropped before classification (coverage or length).
    pub fn new(
        classified: &ClassifiedRules,
        pre_discarded: &[Discarded],
        cfg: &SignificanceConfig,
        n: usize,
        names: &[String],
    ) -> Self {
        let entry = |s: &ScoredRule, class: &str, reason: Option<DiscardReason>| RuleDiagnostic {
            rule: s.rule.display_with(names),
            length: s.rule.len(),
            coverage: s.stats.coverage,
            mean: s.stats.cond_mean,
            var: s.stats.cond_var,
            class: class.to_string(),
            reason,
        };
        let mut rules = Vec::new();
        rules.extend(classified.significant.iter().map(|s| entry(s, "S", None)));
        rules.extend(classified.insignificant.iter().map(|s| entry(s, "I", None)));
        rules.extend(
            pre_discarded
                .iter()
                .chain(&classified.discarded)
                .map(|d| entry(&d.scored, "discarded", Some(d.reason))),
        );
        SignificanceReport {
            n,
            coverage_threshold: coverage_threshold(n, cfg.alpha),
            config: *cfg,
            n_significant: classified.significant.len(),
            n_insignificant: classified.insignificant.len(),
            n_discarded: pre_discarded.len() + classified.discarded.len(),
            rules,
        }
    }
}
