//! Pass/fail audits of the selective-debiasing constraint systems.
//!
//! Captioning: neutral captions stay free of gendered words, explicit captions
//! keep them, and embeddings move little. Generation: neutral prompts yield
//! balanced groups, explicit prompts stay faithful, and embeddings move little.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::read_text;
use crate::metrics::{misclassification_rate, BiasReport, DistanceKind, GenerationCountSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintBudget {
    /// Largest acceptable BR_n, in percent.
    pub neutral_bias_max: f64,
    /// Acceptable range for ratios that should be ≈ 1.
    pub faithfulness_band: (f64, f64),
    pub epsilon_semantic: f64,
    pub distance_kind: DistanceKind,
}

impl Default for ConstraintBudget {
    fn default() -> Self {
        ConstraintBudget {
            neutral_bias_max: 25.0,
            faithfulness_band: (0.8, 1.25),
            epsilon_semantic: 0.05,
            distance_kind: DistanceKind::FrobeniusRel,
        }
    }
}

impl ConstraintBudget {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.faithfulness_band;
        if !(lo <= 1.0 && 1.0 <= hi) || lo < 0.0 || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "faithfulness band must satisfy 0 ≤ low ≤ 1 ≤ high, got [{lo}, {hi}]"
            )));
        }
        if !(self.neutral_bias_max >= 0.0) || !(self.epsilon_semantic >= 0.0) {
            return Err(Error::InvalidArgument("budget tolerances must be non-negative".into()));
        }
        Ok(())
    }

    /// `key=value` lines; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut b = ConstraintBudget::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("budget file", format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::format("budget file", format!("{k}: {e}")))
            };
            match k {
                "neutral_bias_max" => b.neutral_bias_max = num(v)?,
                "faithfulness_low" => b.faithfulness_band.0 = num(v)?,
                "faithfulness_high" => b.faithfulness_band.1 = num(v)?,
                "epsilon_semantic" => b.epsilon_semantic = num(v)?,
                "distance_kind" => b.distance_kind = v.parse()?,
                other => return Err(Error::format("budget file", format!("unknown key {other:?}"))),
            }
        }
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "neutral_bias_max={}\nfaithfulness_low={}\nfaithfulness_high={}\nepsilon_semantic={}\ndistance_kind={}\n",
            self.neutral_bias_max,
            self.faithfulness_band.0,
            self.faithfulness_band.1,
            self.epsilon_semantic,
            self.distance_kind
        )
    }

    fn in_band(&self, v: f64) -> bool {
        self.faithfulness_band.0 <= v && v <= self.faithfulness_band.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditOutcome {
    pub checks: Vec<ConstraintCheck>,
    /// Conjunction of every check.
    pub verdict: bool,
}

impl AuditOutcome {
    fn new(checks: Vec<ConstraintCheck>) -> Self {
        let verdict = checks.iter().all(|c| c.pass);
        AuditOutcome { checks, verdict }
    }

    pub fn check(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One `name<TAB>pass|fail<TAB>value` line per constraint, then `verdict=pass|fail`.
    pub fn to_text(&self) -> String {
        let word = |b: bool| if b { "pass" } else { "fail" };
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{}\t{}\t{}\n", c.name, word(c.pass), c.value));
        }
        out.push_str(&format!("verdict={}\n", word(self.verdict)));
        out
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("audit serializes")
    }
}

fn require(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Validation(format!("report is missing {name}")))
}

fn semantic_check(dist: f64, budget: &ConstraintBudget) -> Result<ConstraintCheck> {
    if !dist.is_finite() || dist < 0.0 {
        return Err(Error::InvalidArgument(format!("semantic distance must be ≥ 0, got {dist}")));
    }
    Ok(ConstraintCheck {
        name: "semantic",
        value: dist,
        pass: dist <= budget.epsilon_semantic,
    })
}

/// Neutral fairness (`br_n ≤ max`), explicit faithfulness (`br_e / br_e_base` in band), semantic drift.
pub fn audit_captioning(report: &BiasReport, dist: f64, budget: &ConstraintBudget) -> Result<AuditOutcome> {
    budget.validate()?;
    let br_n = require(report.br_n, "br_n")?;
    let br_e = require(report.br_e, "br_e")?;
    let base = require(report.br_e_base, "br_e_base")?;
    if base <= 0.0 {
        return Err(Error::Validation("br_e_base must be positive for a faithfulness ratio".into()));
    }
    let ratio = br_e / base;
    Ok(AuditOutcome::new(vec![
        ConstraintCheck {
            name: "neutral_fairness",
            value: br_n,
            pass: br_n <= budget.neutral_bias_max,
        },
        ConstraintCheck {
            name: "explicit_faithfulness",
            value: ratio,
            pass: budget.in_band(ratio),
        },
        semantic_check(dist, budget)?,
    ]))
}

/// Per-category `n_a / n_b` in band (reported value: the worst ratio), `(100 − MR)/100` in band, semantic drift.
pub fn audit_generation(
    counts: &GenerationCountSet,
    dist: f64,
    budget: &ConstraintBudget,
) -> Result<AuditOutcome> {
    budget.validate()?;
    if counts.records().is_empty() {
        return Err(Error::Validation("no generation categories to audit".into()));
    }
    // distance from 1 on a log scale, so 0.5 and 2 are equally bad; 0/0 is worst of all
    let badness = |r: f64| if r.is_nan() { f64::INFINITY } else { r.ln().abs() };
    let mut worst = 1.0f64;
    let mut balanced = true;
    for r in counts.records() {
        let ratio = if r.n_b == 0 {
            if r.n_a == 0 { f64::NAN } else { f64::INFINITY }
        } else {
            r.n_a as f64 / r.n_b as f64
        };
        if !budget.in_band(ratio) {
            balanced = false;
        }
        if badness(ratio) > badness(worst) {
            worst = ratio;
        }
    }
    let faithful = (100.0 - misclassification_rate(counts)?) / 100.0;
    Ok(AuditOutcome::new(vec![
        ConstraintCheck {
            name: "neutral_balance",
            value: worst,
            pass: balanced,
        },
        ConstraintCheck {
            name: "explicit_faithfulness",
            value: faithful,
            pass: budget.in_band(faithful),
        },
        semantic_check(dist, budget)?,
    ]))
}

/// Generation audit from an existing report when per-category counts are unavailable.
///
/// Only faithfulness (via MR) and semantic drift can be checked; balance needs counts.
pub fn audit_generation_report(report: &BiasReport, dist: f64, budget: &ConstraintBudget) -> Result<AuditOutcome> {
    budget.validate()?;
    let mr = require(report.mr, "mr")?;
    let faithful = (100.0 - mr) / 100.0;
    Ok(AuditOutcome::new(vec![
        ConstraintCheck {
            name: "explicit_faithfulness",
            value: faithful,
            pass: budget.in_band(faithful),
        },
        semantic_check(dist, budget)?,
    ]))
}
