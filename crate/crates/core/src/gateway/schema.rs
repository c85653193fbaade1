//! Structured outputs expected from each prompt, and tolerant extraction of
//! them from free-form model text.

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    GlobalContext,
    LocalContext,
    Candidates,
    Dimensions,
    Questions,
    Descriptions,
    Verification,
    MissReflection,
    Advisor,
    Interactability,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::GlobalContext => "global_context",
            SchemaId::LocalContext => "local_context",
            SchemaId::Candidates => "candidates",
            SchemaId::Dimensions => "dimensions",
            SchemaId::Questions => "questions",
            SchemaId::Descriptions => "descriptions",
            SchemaId::Verification => "verification",
            SchemaId::MissReflection => "miss_reflection",
            SchemaId::Advisor => "advisor",
            SchemaId::Interactability => "interactability",
        }
    }

    /// Key under which list-shaped outputs live; a bare top-level array is
    /// accepted and wrapped under it.
    fn list_key(self) -> Option<&'static str> {
        match self {
            SchemaId::Candidates | SchemaId::Dimensions | SchemaId::Questions | SchemaId::Descriptions => {
                Some("candidates")
            }
            _ => None,
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use SchemaId::*;
        [
            GlobalContext,
            LocalContext,
            Candidates,
            Dimensions,
            Questions,
            Descriptions,
            Verification,
            MissReflection,
            Advisor,
            Interactability,
        ]
        .into_iter()
        .find(|id| id.as_str() == s)
        .ok_or_else(|| Error::Registry(format!("unknown schema {s:?}")))
    }
}

/// Accepts a string, a list of strings (joined with ", "), or null.
fn flexible_text<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::Null => String::new(),
        Value::String(s) => s,
        Value::Array(items) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => s,
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
            .join(", "),
        other => other.to_string(),
    })
}

/// Accepts a list of strings, a single comma-separated string, or null.
fn flexible_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::Null => vec![],
        Value::String(s) => {
            s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
        }
        Value::Array(items) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => s,
                other => other.to_string(),
            })
            .collect(),
        other => vec![other.to_string()],
    })
}

/// Seven app-level attributes extracted from a store page.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalContext {
    #[serde(default, deserialize_with = "flexible_text")]
    pub app_name: String,
    #[serde(default, deserialize_with = "flexible_list")]
    pub genres: Vec<String>,
    #[serde(default, deserialize_with = "flexible_text")]
    pub content_theme: String,
    #[serde(default, deserialize_with = "flexible_text")]
    pub device_support: String,
    #[serde(default, deserialize_with = "flexible_text")]
    pub gameplay: String,
    #[serde(default, deserialize_with = "flexible_text")]
    pub interaction_mechanisms: String,
    #[serde(default, deserialize_with = "flexible_text")]
    pub language: String,
}

impl GlobalContext {
    pub fn is_empty(&self) -> bool {
        *self == GlobalContext::default()
    }

    pub fn render(&self) -> String {
        if self.is_empty() {
            return "Unknown app.".to_string();
        }
        format!(
            "App name: {}\nGenres: {}\nContent theme: {}\nDevice support: {}\nGameplay: {}\nInteraction mechanisms: {}\nLanguage: {}",
            self.app_name,
            self.genres.join(", "),
            self.content_theme,
            self.device_support,
            self.gameplay,
            self.interaction_mechanisms,
            self.language
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalContext {
    #[serde(deserialize_with = "flexible_text")]
    pub scene_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateItem {
    pub name: String,
    #[serde(default, deserialize_with = "flexible_text")]
    pub rationale: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatesOut {
    pub candidates: Vec<CandidateItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionItem {
    pub name: String,
    #[serde(deserialize_with = "flexible_list")]
    pub dimensions: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionsOut {
    pub candidates: Vec<DimensionItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub dimension: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub name: String,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionsOut {
    pub candidates: Vec<QuestionItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub dimension: String,
    #[serde(deserialize_with = "flexible_text")]
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionItem {
    pub name: String,
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionsOut {
    pub candidates: Vec<DescriptionItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationVerdict {
    Match,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOut {
    pub verdict: VerificationVerdict,
    #[serde(default, deserialize_with = "flexible_text")]
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissVerdict {
    Hallucination,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissReflectionOut {
    pub verdict: MissVerdict,
    #[serde(default, deserialize_with = "flexible_text")]
    pub analysis: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisorOut {
    pub confident: bool,
    #[serde(default, deserialize_with = "flexible_text")]
    pub concerns: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractabilityOut {
    pub interactable: bool,
    #[serde(default, deserialize_with = "flexible_text")]
    pub rationale: String,
}

/// Typed output bound to its schema id.
pub trait Structured: DeserializeOwned {
    const SCHEMA: SchemaId;

    /// Last-resort reading of a non-JSON answer.
    fn from_plain_text(_raw: &str) -> Option<Self> {
        None
    }

    fn check(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

impl Structured for GlobalContext {
    const SCHEMA: SchemaId = SchemaId::GlobalContext;
}

impl Structured for LocalContext {
    const SCHEMA: SchemaId = SchemaId::LocalContext;
    fn check(&self) -> std::result::Result<(), String> {
        if self.scene_summary.trim().is_empty() {
            Err("scene_summary is empty".into())
        } else {
            Ok(())
        }
    }
}

impl Structured for CandidatesOut {
    const SCHEMA: SchemaId = SchemaId::Candidates;
}

impl Structured for DimensionsOut {
    const SCHEMA: SchemaId = SchemaId::Dimensions;
}

impl Structured for QuestionsOut {
    const SCHEMA: SchemaId = SchemaId::Questions;
}

impl Structured for DescriptionsOut {
    const SCHEMA: SchemaId = SchemaId::Descriptions;
}

impl Structured for VerificationOut {
    const SCHEMA: SchemaId = SchemaId::Verification;
    fn from_plain_text(raw: &str) -> Option<Self> {
        let t = raw.trim().to_lowercase();
        let verdict = if t.contains("mismatch") || t.contains("no match") || t.contains("not match") {
            VerificationVerdict::Mismatch
        } else if t.contains("match") {
            VerificationVerdict::Match
        } else {
            return None;
        };
        Some(Self { verdict, reason: raw.trim().to_string() })
    }
}

impl Structured for MissReflectionOut {
    const SCHEMA: SchemaId = SchemaId::MissReflection;
    fn from_plain_text(raw: &str) -> Option<Self> {
        let t = raw.trim().to_lowercase();
        let verdict = if t.contains("hallucinat") {
            MissVerdict::Hallucination
        } else if t.contains("miss") {
            MissVerdict::Missed
        } else {
            return None;
        };
        Some(Self { verdict, analysis: raw.trim().to_string() })
    }
}

impl Structured for AdvisorOut {
    const SCHEMA: SchemaId = SchemaId::Advisor;
    fn from_plain_text(raw: &str) -> Option<Self> {
        let t = raw.trim().to_lowercase();
        if t.contains("no concern") {
            Some(Self { confident: true, concerns: String::new() })
        } else if t.contains("concern") {
            Some(Self { confident: false, concerns: raw.trim().to_string() })
        } else {
            None
        }
    }
}

impl Structured for InteractabilityOut {
    const SCHEMA: SchemaId = SchemaId::Interactability;
}

/// Strips Markdown code fences, keeping their contents.
fn strip_fences(raw: &str) -> String {
    raw.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}

/// Finds the end of the JSON value starting at `start` by bracket matching,
/// honoring string literals and escapes.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Every JSON object or array embedded in `text`, in order of appearance.
fn embedded_json(text: &str) -> impl Iterator<Item = Value> + '_ {
    let mut pos = 0;
    std::iter::from_fn(move || {
        while let Some(off) = text[pos..].find(['{', '[']) {
            let start = pos + off;
            if let Some(end) = balanced_end(text, start) {
                if let Ok(v) = serde_json::from_str::<Value>(&text[start..end]) {
                    pos = end;
                    return Some(v);
                }
            }
            pos = start + 1;
        }
        None
    })
}

/// Extracts the first JSON value in `raw` that validates against `schema`.
pub fn parse_structured(raw: &str, schema: SchemaId) -> Result<Value> {
    macro_rules! dispatch {
        ($($variant:ident => $ty:ty),* $(,)?) => {
            match schema {
                $(SchemaId::$variant => parse_as::<$ty>(raw).and_then(|v| Ok(serde_json::to_value(v)?)),)*
            }
        };
    }
    dispatch!(
        GlobalContext => GlobalContext,
        LocalContext => LocalContext,
        Candidates => CandidatesOut,
        Dimensions => DimensionsOut,
        Questions => QuestionsOut,
        Descriptions => DescriptionsOut,
        Verification => VerificationOut,
        MissReflection => MissReflectionOut,
        Advisor => AdvisorOut,
        Interactability => InteractabilityOut,
    )
}

/// Typed variant of [`parse_structured`].
pub fn parse_as<T: Structured>(raw: &str) -> Result<T> {
    let cleaned = strip_fences(raw);
    let mut last_problem = "no JSON object found".to_string();
    for value in embedded_json(&cleaned) {
        let value = match (value, T::SCHEMA.list_key()) {
            (Value::Array(items), Some(key)) => serde_json::json!({ key: items }),
            (Value::Array(_), None) => continue,
            (v, _) => v,
        };
        match serde_json::from_value::<T>(value) {
            Ok(parsed) => match parsed.check() {
                Ok(()) => return Ok(parsed),
                Err(e) => last_problem = e,
            },
            Err(e) => last_problem = e.to_string(),
        }
    }
    if let Some(parsed) = T::from_plain_text(&cleaned) {
        return Ok(parsed);
    }
    Err(Error::Parse { schema: T::SCHEMA.to_string(), message: last_problem, raw: raw.to_string() })
}
