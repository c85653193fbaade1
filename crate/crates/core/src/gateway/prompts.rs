//! Versioned prompt templates.
//!
//! Each template is a text asset with a small header:
//!
//! ```text
//! id: PII.5
//! schema: verification
//! inputs: description
//! stage: reflection/verify-detected
//! ---
//! body with {{description}} placeholders
//! ```
//!
//! The declared `inputs` must equal the set of `{{placeholders}}` in the body;
//! this is checked when the registry is built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::SchemaId;
use crate::error::{Error, Result};

/// Appended to the prompt on a format re-ask.
pub const REASK_INSTRUCTION: &str =
    "Your previous answer could not be parsed. Return valid JSON only, with no other text.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "PI.1")]
    GlobalContext,
    #[serde(rename = "PI.2")]
    LocalContext,
    #[serde(rename = "PII.1")]
    CandidateRecognition,
    #[serde(rename = "PII.2")]
    DimensionRecognition,
    #[serde(rename = "PII.3")]
    QuestionFormulation,
    #[serde(rename = "PII.4")]
    CharacteristicsReasoning,
    #[serde(rename = "PII.5")]
    RegionVerification,
    #[serde(rename = "PII.6")]
    MissReflection,
    #[serde(rename = "PII.7")]
    Advisor,
    #[serde(rename = "PIII")]
    Interactability,
}

impl TemplateId {
    pub const ALL: [TemplateId; 10] = [
        TemplateId::GlobalContext,
        TemplateId::LocalContext,
        TemplateId::CandidateRecognition,
        TemplateId::DimensionRecognition,
        TemplateId::QuestionFormulation,
        TemplateId::CharacteristicsReasoning,
        TemplateId::RegionVerification,
        TemplateId::MissReflection,
        TemplateId::Advisor,
        TemplateId::Interactability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::GlobalContext => "PI.1",
            TemplateId::LocalContext => "PI.2",
            TemplateId::CandidateRecognition => "PII.1",
            TemplateId::DimensionRecognition => "PII.2",
            TemplateId::QuestionFormulation => "PII.3",
            TemplateId::CharacteristicsReasoning => "PII.4",
            TemplateId::RegionVerification => "PII.5",
            TemplateId::MissReflection => "PII.6",
            TemplateId::Advisor => "PII.7",
            TemplateId::Interactability => "PIII",
        }
    }

    pub fn schema(self) -> SchemaId {
        match self {
            TemplateId::GlobalContext => SchemaId::GlobalContext,
            TemplateId::LocalContext => SchemaId::LocalContext,
            TemplateId::CandidateRecognition => SchemaId::Candidates,
            TemplateId::DimensionRecognition => SchemaId::Dimensions,
            TemplateId::QuestionFormulation => SchemaId::Questions,
            TemplateId::CharacteristicsReasoning => SchemaId::Descriptions,
            TemplateId::RegionVerification => SchemaId::Verification,
            TemplateId::MissReflection => SchemaId::MissReflection,
            TemplateId::Advisor => SchemaId::Advisor,
            TemplateId::Interactability => SchemaId::Interactability,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub schema: SchemaId,
    pub inputs: BTreeSet<String>,
    pub stage: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = text
            .split_once("\n---\n")
            .ok_or_else(|| Error::Registry("template lacks a `---` header separator".into()))?;
        let mut fields = BTreeMap::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::Registry(format!("bad header line {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| {
            fields.get(k).cloned().ok_or_else(|| Error::Registry(format!("template header lacks `{k}`")))
        };
        let id: TemplateId = field("id")?.parse()?;
        let schema: SchemaId = field("schema")?.parse()?;
        if schema != id.schema() {
            return Err(Error::Registry(format!("{id} must declare schema {}", id.schema())));
        }
        let inputs: BTreeSet<String> = field("inputs")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let body = body.trim_end().to_string();
        let found = placeholders(&body);
        if found != inputs {
            return Err(Error::Registry(format!(
                "{id}: declared inputs {inputs:?} differ from placeholders {found:?}"
            )));
        }
        Ok(Self { id, schema, inputs, stage: fields.get("stage").cloned().unwrap_or_default(), body })
    }

    /// Fills every placeholder. Fails when a declared input has no slot.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String> {
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").expect("placeholders validated at parse time");
            let name = after[..end].trim();
            let value = slots.get(name).ok_or_else(|| Error::MissingSlot {
                template: self.id.to_string(),
                slot: name.to_string(),
            })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn placeholders(body: &str) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                found.insert(after[..end].trim().to_string());
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    found
}

const BUILTIN: [&str; 10] = [
    include_str!("../../prompts/pi1_global_context.txt"),
    include_str!("../../prompts/pi2_local_context.txt"),
    include_str!("../../prompts/pii1_candidates.txt"),
    include_str!("../../prompts/pii2_dimensions.txt"),
    include_str!("../../prompts/pii3_questions.txt"),
    include_str!("../../prompts/pii4_reasoning.txt"),
    include_str!("../../prompts/pii5_verify.txt"),
    include_str!("../../prompts/pii6_reflect_miss.txt"),
    include_str!("../../prompts/pii7_advisor.txt"),
    include_str!("../../prompts/piii_interactability.txt"),
];

const BUILTIN_DEMOS: &str = include_str!("../../prompts/demos.json");

/// One chain-of-thought demonstration for the interactability prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub app: String,
    pub element: String,
    pub reasoning: String,
    pub interactable: bool,
}

impl Demonstration {
    pub fn render(&self) -> String {
        format!(
            "App: {}\nElement: {}\nReasoning: {}\nAnswer: {{\"interactable\": {}}}",
            self.app, self.element, self.reasoning, self.interactable
        )
    }
}

#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
    demos: Vec<Demonstration>,
}

impl PromptRegistry {
    /// Registry backed by the templates compiled into the crate.
    pub fn builtin() -> Self {
        let templates: Vec<PromptTemplate> = BUILTIN
            .iter()
            .map(|t| PromptTemplate::parse(t).expect("builtin prompt templates are valid"))
            .collect();
        let demos = serde_json::from_str(BUILTIN_DEMOS).expect("builtin demonstrations are valid");
        Self::new(templates, demos).expect("builtin registry is complete")
    }

    /// Loads `*.txt` templates and an optional `demos.json` from a directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut templates = vec![];
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        paths.sort();
        for path in paths.iter().filter(|p| p.extension().is_some_and(|e| e == "txt")) {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            templates.push(
                PromptTemplate::parse(&text)
                    .map_err(|e| Error::Registry(format!("{}: {e}", path.display())))?,
            );
        }
        let demo_path = dir.join("demos.json");
        let demos = if demo_path.exists() {
            let text = std::fs::read_to_string(&demo_path).map_err(|e| Error::io(&demo_path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Registry(e.to_string()))?
        } else {
            serde_json::from_str(BUILTIN_DEMOS)?
        };
        Self::new(templates, demos)
    }

    pub fn new(templates: Vec<PromptTemplate>, demos: Vec<Demonstration>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for t in templates {
            if map.insert(t.id, t).is_some() {
                return Err(Error::Registry("duplicate template id".into()));
            }
        }
        for id in TemplateId::ALL {
            if !map.contains_key(&id) {
                return Err(Error::Registry(format!("missing template {id}")));
            }
        }
        Ok(Self { templates: map, demos })
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }
}
