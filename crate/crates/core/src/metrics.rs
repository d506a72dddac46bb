//! Fairness metrics computed from pre-classified flags and counts.
//!
//! Gendered-word detection and image gender classification happen upstream;
//! these functions only count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::embedding::{EmbeddingMatrix, Group};
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};

/// Tolerance on `cbr` when a report re-derives it from its own fields.
pub const CBR_CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionFlag {
    pub source_id: String,
    pub group: Group,
    pub gendered_word_present: bool,
    /// Only meaningful for explicit samples.
    pub predicted_gender_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaptionFlagSet {
    records: Vec<CaptionFlag>,
}

impl CaptionFlagSet {
    pub fn new(records: Vec<CaptionFlag>) -> Result<Self> {
        for r in &records {
            if r.group == Group::Unlabeled {
                return Err(Error::Validation(format!(
                    "caption flag {:?} has no neutral/explicit group",
                    r.source_id
                )));
            }
            if r.predicted_gender_correct.is_some() && !r.group.is_explicit() {
                return Err(Error::Validation(format!(
                    "caption flag {:?}: correctness is only recorded for explicit samples",
                    r.source_id
                )));
            }
        }
        Ok(CaptionFlagSet { records })
    }

    pub fn records(&self) -> &[CaptionFlag] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFilter {
    Neutral,
    /// Both explicit groups.
    Explicit,
    ExplicitA,
    ExplicitB,
    All,
}

impl GroupFilter {
    pub fn accepts(self, g: Group) -> bool {
        match self {
            GroupFilter::Neutral => g == Group::Neutral,
            GroupFilter::Explicit => g.is_explicit(),
            GroupFilter::ExplicitA => g == Group::ExplicitA,
            GroupFilter::ExplicitB => g == Group::ExplicitB,
            GroupFilter::All => true,
        }
    }
}

/// Percentage of captions in the filtered group that contain a gendered word.
///
/// A caption counts once however many gendered words it holds.
pub fn bias_rate(flags: &CaptionFlagSet, filter: GroupFilter) -> Result<f64> {
    let (hits, total) = flags
        .records
        .iter()
        .filter(|r| filter.accepts(r.group))
        .fold((0usize, 0usize), |(h, t), r| (h + usize::from(r.gendered_word_present), t + 1));
    if total == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(100.0 * hits as f64 / total as f64)
}

fn check_percent(name: &str, v: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} = {v} is not a percentage in [0, 100]")));
    }
    Ok(())
}

/// `√(br_n² + (br_e − br_e_base)²)`.
pub fn composite_bias_rate(br_n: f64, br_e: f64, br_e_base: f64) -> Result<f64> {
    check_percent("br_n", br_n)?;
    check_percent("br_e", br_e)?;
    check_percent("br_e_base", br_e_base)?;
    Ok(br_n.hypot(br_e - br_e_base))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryCounts {
    pub category_id: String,
    pub n_a: u64,
    pub n_b: u64,
    /// All generations for the category, including ones the classifier abstained on.
    pub total: u64,
    pub explicit_mismatches: u64,
    pub explicit_total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GenerationCountSet {
    records: Vec<CategoryCounts>,
}

impl GenerationCountSet {
    pub fn new(records: Vec<CategoryCounts>) -> Result<Self> {
        for r in &records {
            if r.n_a + r.n_b > r.total {
                return Err(Error::Validation(format!(
                    "category {:?}: n_a + n_b = {} exceeds total {}",
                    r.category_id,
                    r.n_a + r.n_b,
                    r.total
                )));
            }
            if r.explicit_mismatches > r.explicit_total {
                return Err(Error::Validation(format!(
                    "category {:?}: {} mismatches out of {} explicit generations",
                    r.category_id, r.explicit_mismatches, r.explicit_total
                )));
            }
        }
        Ok(GenerationCountSet { records })
    }

    pub fn records(&self) -> &[CategoryCounts] {
        &self.records
    }

    /// Keeps only the named categories (e.g. a stereotype list).
    pub fn filter(&self, categories: &[&str]) -> Self {
        GenerationCountSet {
            records: self
                .records
                .iter()
                .filter(|r| categories.contains(&r.category_id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkewUnit {
    #[default]
    Percent,
    Fraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewSummary {
    pub per_category: Vec<(String, f64)>,
    pub mean: f64,
}

/// Per-category `max(n_a, n_b) / C` and their unweighted mean.
pub fn skew(counts: &GenerationCountSet, unit: SkewUnit) -> Result<SkewSummary> {
    if counts.records.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let scale = match unit {
        SkewUnit::Percent => 100.0,
        SkewUnit::Fraction => 1.0,
    };
    let mut per_category = Vec::with_capacity(counts.records.len());
    for r in &counts.records {
        if r.total == 0 {
            return Err(Error::InvalidArgument(format!(
                "category {:?} has zero generations",
                r.category_id
            )));
        }
        per_category.push((r.category_id.clone(), scale * r.n_a.max(r.n_b) as f64 / r.total as f64));
    }
    let mean = mean_skew(&per_category.iter().map(|(_, v)| *v).collect::<Vec<_>>())?;
    Ok(SkewSummary { per_category, mean })
}

/// Unweighted mean of already-computed skew values (e.g. stereotype-group means).
pub fn mean_skew(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// `100 · Σ explicit_mismatches / Σ explicit_total`.
pub fn misclassification_rate(counts: &GenerationCountSet) -> Result<f64> {
    let (bad, total) = counts
        .records
        .iter()
        .fold((0u64, 0u64), |(b, t), r| (b + r.explicit_mismatches, t + r.explicit_total));
    if total == 0 {
        return Err(Error::InvalidArgument("no explicit generations to score".into()));
    }
    Ok(100.0 * bad as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Cosine,
    #[default]
    FrobeniusRel,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Cosine => "cosine",
            DistanceKind::FrobeniusRel => "frobenius_rel",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(DistanceKind::Cosine),
            "frobenius_rel" | "frobenius-rel" => Ok(DistanceKind::FrobeniusRel),
            other => Err(Error::InvalidArgument(format!(
                "distance must be cosine or frobenius_rel, got {other:?}"
            ))),
        }
    }
}

/// cosine: mean of `1 − cos(h_j, h̃_j)`; frobenius_rel: `‖H − H̃‖_F / ‖H‖_F`.
pub fn semantic_distance(h: &EmbeddingMatrix, h_tilde: &EmbeddingMatrix, kind: DistanceKind) -> Result<f64> {
    let (a, b) = (h.values(), h_tilde.values());
    if a.shape() != b.shape() {
        return Err(Error::dims(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    match kind {
        DistanceKind::FrobeniusRel => {
            let denom = a.norm();
            if denom == 0.0 {
                return Err(Error::InvalidArgument("reference matrix has zero norm".into()));
            }
            Ok((a - b).norm() / denom)
        }
        DistanceKind::Cosine => {
            if a.ncols() == 0 {
                return Err(Error::TooFewSamples { needed: 1, got: 0 });
            }
            let mut sum = 0.0;
            for (j, (x, y)) in a.column_iter().zip(b.column_iter()).enumerate() {
                let (nx, ny) = (x.norm(), y.norm());
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "column {j} has zero norm; cosine distance undefined"
                    )));
                }
                // 1 − cos = ½‖x̂ − ŷ‖², which stays accurate for nearly parallel columns
                sum += 0.5 * (x / nx - y / ny).norm_squared();
            }
            Ok(sum / a.ncols() as f64)
        }
    }
}

/// `after / before`; ≈ 1 means the explicit signal survived.
pub fn faithfulness_ratio(prob_before: f64, prob_after: f64) -> Result<f64> {
    if !(prob_before > 0.0) || !prob_before.is_finite() || !prob_after.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "faithfulness ratio needs a positive finite denominator, got {prob_before}"
        )));
    }
    Ok(prob_after / prob_before)
}

/// Any subset of the metrics; unset fields are omitted from output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BiasReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub br_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub br_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub br_e_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_distance: Option<f64>,
}

impl BiasReport {
    /// BR_n, BR_e and (given the base BR_e) CBR from caption flags.
    pub fn from_captions(flags: &CaptionFlagSet, br_e_base: Option<f64>) -> Result<Self> {
        let br_n = bias_rate(flags, GroupFilter::Neutral)?;
        let br_e = bias_rate(flags, GroupFilter::Explicit)?;
        let cbr = br_e_base.map(|b| composite_bias_rate(br_n, br_e, b)).transpose()?;
        Ok(BiasReport {
            br_n: Some(br_n),
            br_e: Some(br_e),
            br_e_base,
            cbr,
            ..Default::default()
        })
    }

    /// Skew over all categories, per stereotype list when given, and MR when explicit counts exist.
    pub fn from_generation(
        counts: &GenerationCountSet,
        stereotypes_a: &[&str],
        stereotypes_b: &[&str],
    ) -> Result<Self> {
        let filtered = |list: &[&str]| -> Result<Option<f64>> {
            if list.is_empty() {
                return Ok(None);
            }
            let sub = counts.filter(list);
            if sub.records.is_empty() {
                return Ok(None);
            }
            Ok(Some(skew(&sub, SkewUnit::Percent)?.mean))
        };
        let has_explicit = counts.records.iter().any(|r| r.explicit_total > 0);
        Ok(BiasReport {
            skew: Some(skew(counts, SkewUnit::Percent)?.mean),
            skew_a: filtered(stereotypes_a)?,
            skew_b: filtered(stereotypes_b)?,
            mr: if has_explicit { Some(misclassification_rate(counts)?) } else { None },
            ..Default::default()
        })
    }

    /// Percent fields in range and `cbr` re-derivable from the BR fields.
    pub fn check(&self) -> Result<()> {
        let pct = [
            ("br_n", self.br_n),
            ("br_e", self.br_e),
            ("br_e_base", self.br_e_base),
            ("cbr", self.cbr),
            ("skew_a", self.skew_a),
            ("skew_b", self.skew_b),
            ("skew", self.skew),
            ("mr", self.mr),
        ];
        for (name, v) in pct {
            if let Some(v) = v {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::Validation(format!("{name} = {v} outside [0, 100]")));
                }
            }
        }
        if let (Some(cbr), Some(n), Some(e), Some(base)) = (self.cbr, self.br_n, self.br_e, self.br_e_base) {
            let expect = n.hypot(e - base);
            if (cbr - expect).abs() > CBR_CONSISTENCY_TOL {
                return Err(Error::Validation(format!(
                    "cbr {cbr} does not match its BR fields ({expect})"
                )));
            }
        }
        Ok(())
    }

    /// `key=value` lines for every set field.
    pub fn to_kv(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = v {
            for (k, v) in map {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

const FLAG_HEADER: &str = "source_id\tgroup\tgendered_word_present\tpredicted_gender_correct";
const COUNT_HEADER: &str = "category_id\tn_a\tn_b\ttotal\texplicit_mismatches\texplicit_total";

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::format("flag file", format!("line {line}: expected 0/1, got {other:?}"))),
    }
}

fn data_lines<'a>(text: &'a str, header: &str, what: &'static str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => {}
        _ => return Err(Error::format(what, format!("first line must be the header {header:?}"))),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)))
}

pub fn read_caption_flags(path: &Path) -> Result<CaptionFlagSet> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (line, l) in data_lines(&text, FLAG_HEADER, "flag file")? {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::format("flag file", format!("line {line}: expected 4 fields")));
        }
        records.push(CaptionFlag {
            source_id: f[0].to_string(),
            group: f[1].parse()?,
            gendered_word_present: parse_bool(f[2], line)?,
            predicted_gender_correct: if f[3].is_empty() { None } else { Some(parse_bool(f[3], line)?) },
        });
    }
    CaptionFlagSet::new(records)
}

pub fn write_caption_flags(flags: &CaptionFlagSet, path: &Path) -> Result<()> {
    let mut out = format!("{FLAG_HEADER}\n");
    for r in &flags.records {
        let correct = r.predicted_gender_correct.map(|b| u8::from(b).to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{correct}\n",
            r.source_id,
            r.group,
            u8::from(r.gendered_word_present)
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_generation_counts(path: &Path) -> Result<GenerationCountSet> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    for (line, l) in data_lines(&text, COUNT_HEADER, "count file")? {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::format("count file", format!("line {line}: expected 6 fields")));
        }
        let num = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|e| Error::format("count file", format!("line {line}: {s:?}: {e}")))
        };
        records.push(CategoryCounts {
            category_id: f[0].to_string(),
            n_a: num(f[1])?,
            n_b: num(f[2])?,
            total: num(f[3])?,
            explicit_mismatches: num(f[4])?,
            explicit_total: num(f[5])?,
        });
    }
    GenerationCountSet::new(records)
}

pub fn write_generation_counts(counts: &GenerationCountSet, path: &Path) -> Result<()> {
    let mut out = format!("{COUNT_HEADER}\n");
    for r in &counts.records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.category_id, r.n_a, r.n_b, r.total, r.explicit_mismatches, r.explicit_total
        ));
    }
    write_atomic(path, out.as_bytes())
}
