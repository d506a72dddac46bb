//! Prompt templates and category lists for building paired prompts.
//!
//! Profession templates carry `[group]` and `[profession]` slots; scene templates
//! carry `[group]` and `[object]`. Gender expansion fills `[group]` with each
//! gender group (the last one is the neutral variant); scene expansion pairs the
//! two brightness groups and has no neutral variant.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};

const SHIPPED: &str = include_str!("../data/catalog.txt");

/// Template ids: profession templates are numbered from 1, scene templates continue after them.
pub const FIRST_TEMPLATE_ID: usize = 1;

const SECTIONS: [&str; 9] = [
    "profession_templates",
    "scene_templates",
    "groups_gender",
    "groups_scene",
    "training_professions",
    "testing_professions",
    "training_objects",
    "testing_objects",
    "baseline_prompts",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateCatalog {
    pub profession_templates: Vec<String>,
    pub scene_templates: Vec<String>,
    pub groups_gender: Vec<String>,
    pub groups_scene: Vec<String>,
    pub training_professions: Vec<String>,
    pub testing_professions: Vec<String>,
    pub training_objects: Vec<String>,
    pub testing_objects: Vec<String>,
    /// Instruction strings used by prompting baselines, keyed by name.
    pub baseline_prompts: BTreeMap<String, String>,
}

impl TemplateCatalog {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped catalog parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    /// Sectioned text: `[section]` headers, one entry per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let mut current: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !line.contains(' ') {
                    let known = SECTIONS.iter().find(|s| **s == name).ok_or_else(|| {
                        Error::format("catalog", format!("line {}: unknown section [{name}]", i + 1))
                    })?;
                    current = Some(known);
                    sections.entry(known).or_default();
                    continue;
                }
            }
            let section = current
                .ok_or_else(|| Error::format("catalog", format!("line {}: entry before any section", i + 1)))?;
            sections.entry(section).or_default().push(line.to_string());
        }
        let mut take = |name: &str| sections.remove(name).unwrap_or_default();
        let mut baseline_prompts = BTreeMap::new();
        for entry in take("baseline_prompts") {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::format("catalog", format!("baseline prompt {entry:?} is not key=value")))?;
            baseline_prompts.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(TemplateCatalog {
            profession_templates: take("profession_templates"),
            scene_templates: take("scene_templates"),
            groups_gender: take("groups_gender"),
            groups_scene: take("groups_scene"),
            training_professions: take("training_professions"),
            testing_professions: take("testing_professions"),
            training_objects: take("training_objects"),
            testing_objects: take("testing_objects"),
            baseline_prompts,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, items: &[String]| {
            out.push_str(&format!("[{name}]\n"));
            for i in items {
                out.push_str(i);
                out.push('\n');
            }
            out.push('\n');
        };
        section("profession_templates", &self.profession_templates);
        section("scene_templates", &self.scene_templates);
        section("groups_gender", &self.groups_gender);
        section("groups_scene", &self.groups_scene);
        section("training_professions", &self.training_professions);
        section("testing_professions", &self.testing_professions);
        section("training_objects", &self.training_objects);
        section("testing_objects", &self.testing_objects);
        let baseline: Vec<String> = self.baseline_prompts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        section("baseline_prompts", &baseline);
        out
    }

    fn templates(&self, mode: Mode) -> (&[String], usize) {
        match mode {
            Mode::Gender => (&self.profession_templates, FIRST_TEMPLATE_ID),
            Mode::Scene => (&self.scene_templates, FIRST_TEMPLATE_ID + self.profession_templates.len()),
        }
    }

    fn categories(&self, mode: Mode, split: Split) -> &[String] {
        match (mode, split) {
            (Mode::Gender, Split::Train) => &self.training_professions,
            (Mode::Gender, Split::Test) => &self.testing_professions,
            (Mode::Scene, Split::Train) => &self.training_objects,
            (Mode::Scene, Split::Test) => &self.testing_objects,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gender,
    Scene,
}

impl Mode {
    fn category_slot(self) -> &'static str {
        match self {
            Mode::Gender => "profession",
            Mode::Scene => "object",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Mode::Gender),
            "scene" => Ok(Mode::Scene),
            other => Err(Error::InvalidArgument(format!("mode must be gender or scene, got {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gender => "gender",
            Mode::Scene => "scene",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("split must be train or test, got {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTuple {
    pub template_id: usize,
    pub category: String,
    pub prompt_a: String,
    pub prompt_b: String,
    /// The person-variant for gender prompts; scene prompts have none.
    pub neutral: Option<String>,
}

/// Slot names appearing in `template`, in order.
fn slots(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('[') {
        let after = &rest[start + 1..];
        match after.find(']') {
            Some(end) => {
                out.push(&after[..end]);
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

fn starts_with_vowel(s: &str) -> bool {
    s.chars().next().is_some_and(|c| "aeiouAEIOU".contains(c))
}

/// Fills each `[slot]`; a standalone article `a` before a vowel-initial value becomes `an`.
pub fn fill(template: &str, values: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(start) = rest.find('[') {
        let end = rest[start..]
            .find(']')
            .map(|e| start + e)
            .ok_or_else(|| Error::format("template", format!("unclosed slot in {template:?}")))?;
        let name = &rest[start + 1..end];
        let value = values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::format("template", format!("unknown slot [{name}] in {template:?}")))?;
        out.push_str(&rest[..start]);
        if starts_with_vowel(value) && (out == "a " || out.ends_with(" a ")) {
            out.insert(out.len() - 1, 'n');
        }
        out.push_str(value);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Template-major, category-minor expansion.
pub fn expand(catalog: &TemplateCatalog, mode: Mode, split: Split) -> Result<Vec<PromptTuple>> {
    let (templates, first_id) = catalog.templates(mode);
    let categories = catalog.categories(mode, split);
    let slot = mode.category_slot();
    let groups = match mode {
        Mode::Gender => &catalog.groups_gender,
        Mode::Scene => &catalog.groups_scene,
    };
    let needed = match mode {
        Mode::Gender => 3,
        Mode::Scene => 2,
    };
    if groups.len() != needed {
        return Err(Error::Validation(format!(
            "{mode} expansion needs {needed} groups, catalog has {}",
            groups.len()
        )));
    }
    let mut out = Vec::with_capacity(templates.len() * categories.len());
    for (t, template) in templates.iter().enumerate() {
        for category in categories {
            let render = |g: &str| fill(template, &[("group", g), (slot, category)]);
            out.push(PromptTuple {
                template_id: first_id + t,
                category: category.clone(),
                prompt_a: render(&groups[0])?,
                prompt_b: render(&groups[1])?,
                neutral: if mode == Mode::Gender { Some(render(&groups[2])?) } else { None },
            });
        }
    }
    Ok(out)
}

const EXPANSION_HEADER: &str = "prompt_a\tprompt_b\tneutral\tcategory";

/// Tab-separated with a header; the neutral column is empty for scene prompts.
pub fn expansion_to_tsv(prompts: &[PromptTuple]) -> String {
    let mut out = format!("{EXPANSION_HEADER}\n");
    for p in prompts {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.prompt_a,
            p.prompt_b,
            p.neutral.as_deref().unwrap_or(""),
            p.category
        ));
    }
    out
}

pub fn write_expansion(prompts: &[PromptTuple], path: &Path) -> Result<()> {
    write_atomic(path, expansion_to_tsv(prompts).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A category appears in both the training and testing list.
    NotDisjoint { list: &'static str, item: String },
    SlotCount { section: &'static str, index: usize, slot: &'static str, count: usize },
    UnknownSlot { section: &'static str, index: usize, slot: String },
    Duplicate { section: &'static str, item: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotDisjoint { list, item } => {
                write!(f, "{list}: {item:?} is in both the training and testing split")
            }
            Violation::SlotCount { section, index, slot, count } => {
                write!(f, "{section}[{index}]: slot [{slot}] appears {count} times (expected 1)")
            }
            Violation::UnknownSlot { section, index, slot } => {
                write!(f, "{section}[{index}]: unknown slot [{slot}]")
            }
            Violation::Duplicate { section, item } => write!(f, "{section}: duplicate entry {item:?}"),
        }
    }
}

/// Report-only checks: split disjointness, one of each required slot per template, no duplicates.
pub fn validate_catalog(catalog: &TemplateCatalog) -> Vec<Violation> {
    let mut out = Vec::new();
    for (list, train, test) in [
        ("professions", &catalog.training_professions, &catalog.testing_professions),
        ("objects", &catalog.training_objects, &catalog.testing_objects),
    ] {
        let train: HashSet<&String> = train.iter().collect();
        for item in test {
            if train.contains(item) {
                out.push(Violation::NotDisjoint { list, item: item.clone() });
            }
        }
    }
    for (section, templates, required) in [
        ("profession_templates", &catalog.profession_templates, ["group", "profession"]),
        ("scene_templates", &catalog.scene_templates, ["group", "object"]),
    ] {
        for (index, t) in templates.iter().enumerate() {
            let found = slots(t);
            for slot in required {
                let count = found.iter().filter(|s| **s == slot).count();
                if count != 1 {
                    out.push(Violation::SlotCount { section, index, slot, count });
                }
            }
            for s in found.iter().filter(|s| !required.contains(s)) {
                out.push(Violation::UnknownSlot { section, index, slot: s.to_string() });
            }
        }
    }
    for (section, items) in [
        ("profession_templates", &catalog.profession_templates),
        ("scene_templates", &catalog.scene_templates),
        ("training_professions", &catalog.training_professions),
        ("testing_professions", &catalog.testing_professions),
        ("training_objects", &catalog.training_objects),
        ("testing_objects", &catalog.testing_objects),
    ] {
        let mut seen = HashSet::new();
        for i in items {
            if !seen.insert(i) {
                out.push(Violation::Duplicate { section, item: i.clone() });
            }
        }
    }
    out
}
