//! Column-oriented embedding matrices with per-sample labels.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

/// Which side of the neutral/explicit partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Neutral,
    ExplicitA,
    ExplicitB,
    Unlabeled,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Neutral => "neutral",
            Group::ExplicitA => "explicit_a",
            Group::ExplicitB => "explicit_b",
            Group::Unlabeled => "unlabeled",
        }
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, Group::ExplicitA | Group::ExplicitB)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Group::Neutral),
            "explicit_a" => Ok(Group::ExplicitA),
            "explicit_b" => Ok(Group::ExplicitB),
            "unlabeled" => Ok(Group::Unlabeled),
            other => Err(Error::format("group tag", format!("unknown group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub group: Group,
    /// Continuous bias value (e.g. scene brightness), when the sample carries one.
    pub attribute: Option<f64>,
    pub source_id: String,
}

impl LabelRecord {
    pub fn new(source_id: impl Into<String>, group: Group) -> Self {
        LabelRecord {
            group,
            attribute: None,
            source_id: source_id.into(),
        }
    }

    pub fn with_attribute(mut self, value: f64) -> Self {
        self.attribute = Some(value);
        self
    }
}

/// A d×n matrix whose column j is the embedding of sample j.
///
/// All entries are finite and there is exactly one label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: DMatrix<f64>,
    labels: Vec<LabelRecord>,
}

impl EmbeddingMatrix {
    pub fn new(values: DMatrix<f64>, labels: Vec<LabelRecord>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be positive".into(),
            ));
        }
        if labels.len() != values.ncols() {
            return Err(Error::dims(
                format!("{} columns", values.ncols()),
                format!("{} labels", labels.len()),
            ));
        }
        check_finite(&values)?;
        for (j, label) in labels.iter().enumerate() {
            if matches!(label.attribute, Some(a) if !a.is_finite()) {
                return Err(Error::Validation(format!(
                    "label {j} ({}) has a non-finite attribute",
                    label.source_id
                )));
            }
        }
        Ok(EmbeddingMatrix { values, labels })
    }

    /// Labels every column `unlabeled` with source ids `"0"`, `"1"`, ...
    pub fn unlabeled(values: DMatrix<f64>) -> Result<Self> {
        let labels = (0..values.ncols())
            .map(|j| LabelRecord::new(j.to_string(), Group::Unlabeled))
            .collect();
        Self::new(values, labels)
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[LabelRecord] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.values.column(j)
    }

    /// Same labels, new values of identical shape.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::dims(
                format!("{:?}", self.values.shape()),
                format!("{:?}", values.shape()),
            ));
        }
        Self::new(values, self.labels.clone())
    }

    /// Columns whose label satisfies `keep`, in original order.
    pub fn select<F>(&self, keep: F) -> Self
    where
        F: Fn(&LabelRecord) -> bool,
    {
        let idx: Vec<usize> = (0..self.len()).filter(|&j| keep(&self.labels[j])).collect();
        let values = self.values.select_columns(idx.iter());
        let labels = idx.iter().map(|&j| self.labels[j].clone()).collect();
        EmbeddingMatrix { values, labels }
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<LabelRecord>) {
        (self.values, self.labels)
    }
}

pub(crate) fn check_finite(values: &DMatrix<f64>) -> Result<()> {
    for (j, col) in values.column_iter().enumerate() {
        if let Some(row) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { column: j, row });
        }
    }
    Ok(())
}
