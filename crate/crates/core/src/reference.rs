//! Reference hyperparameters and reported numbers shipped as data.
//!
//! Per-category `λ_g` values, solved thresholds per `λ_c`, stereotype lists and
//! the reported metric rows used for arithmetic cross-checks.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::read_text;

const SHIPPED: &str = include_str!("../data/reference.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceConfig {
    /// Column labels for every `values` array below.
    pub models: Vec<String>,
    pub selection: SelectionReference,
    pub stereotypes: Stereotypes,
    pub lambda_g: Vec<ItemValues>,
    pub sensitivity: Sensitivity,
    pub captioning: Vec<CaptioningRow>,
    pub generation: Vec<GenerationRow>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SelectionReference {
    pub default_k: usize,
    pub default_lambda_c: f64,
    pub delta_c: Vec<DeltaRow>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DeltaRow {
    pub lambda_c: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Stereotypes {
    pub male: Vec<String>,
    pub female: Vec<String>,
    pub scene: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ItemValues {
    pub item: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Sensitivity {
    pub br_e_base: f64,
    pub cells: Vec<SensitivityCell>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SensitivityCell {
    pub k: usize,
    pub lambda_c: f64,
    pub br_n: f64,
    pub br_e: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CaptioningRow {
    pub method: String,
    pub br_n: f64,
    pub br_e: f64,
    pub br_e_base: f64,
    pub cbr: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GenerationRow {
    pub method: String,
    pub skew_male: f64,
    pub skew_female: f64,
    pub skew: f64,
    #[serde(default)]
    pub mr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stereotype {
    Male,
    Female,
    Scene,
}

impl ReferenceConfig {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped reference config parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ReferenceConfig =
            toml::from_str(text).map_err(|e| Error::format("reference config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    fn validate(&self) -> Result<()> {
        let width = self.models.len();
        let rows = self
            .selection
            .delta_c
            .iter()
            .map(|r| r.values.len())
            .chain(self.lambda_g.iter().map(|r| r.values.len()));
        for len in rows {
            if len != width {
                return Err(Error::format(
                    "reference config",
                    format!("row has {len} values but {width} models are declared"),
                ));
            }
        }
        if self.lambda_g.iter().flat_map(|r| &r.values).any(|v| !(*v >= 0.0)) {
            return Err(Error::format("reference config", "lambda_g values must be non-negative"));
        }
        Ok(())
    }

    pub fn model_index(&self, model: &str) -> Result<usize> {
        self.models.iter().position(|m| m == model).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown model {model:?}; known: {}", self.models.join(", ")))
        })
    }

    /// `λ_g` for one category under one model column.
    pub fn lambda_g(&self, item: &str, model: usize) -> Option<f64> {
        self.lambda_g
            .iter()
            .find(|r| r.item == item)
            .and_then(|r| r.values.get(model).copied())
    }

    pub fn delta_c(&self, lambda_c: f64, model: usize) -> Option<f64> {
        self.selection
            .delta_c
            .iter()
            .find(|r| r.lambda_c == lambda_c)
            .and_then(|r| r.values.get(model).copied())
    }

    pub fn stereotype_of(&self, item: &str) -> Option<Stereotype> {
        let has = |list: &[String]| list.iter().any(|s| s == item);
        if has(&self.stereotypes.male) {
            Some(Stereotype::Male)
        } else if has(&self.stereotypes.female) {
            Some(Stereotype::Female)
        } else if has(&self.stereotypes.scene) {
            Some(Stereotype::Scene)
        } else {
            None
        }
    }

    pub fn captioning_row(&self, method: &str) -> Option<&CaptioningRow> {
        self.captioning.iter().find(|r| r.method == method)
    }

    pub fn generation_row(&self, method: &str) -> Option<&GenerationRow> {
        self.generation.iter().find(|r| r.method == method)
    }
}
