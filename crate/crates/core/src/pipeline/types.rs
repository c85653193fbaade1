use serde::{Deserialize, Serialize};

use crate::gateway::schema::{GlobalContext, LocalContext};
use crate::geometry::{BoundingBox, ScoredBox};

/// App-level and scene-level context feeding every downstream prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneContext {
    pub global: GlobalContext,
    pub local: LocalContext,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SceneContext {
    pub fn global_text(&self) -> String {
        self.global.render()
    }

    pub fn local_text(&self) -> String {
        if self.local.scene_summary.trim().is_empty() {
            "Not available.".to_string()
        } else {
            self.local.scene_summary.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicDimension {
    pub dimension_name: String,
    pub question: String,
    pub answer: String,
}

/// Multi-perspective description that singles out one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicsDescription {
    pub candidate_name: String,
    pub dimensions: Vec<CharacteristicDimension>,
    pub cd_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Unground,
    Detected,
    Verified,
    Rejected,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateState {
    pub cd: CharacteristicsDescription,
    pub boxes: Vec<ScoredBox>,
    pub status: CandidateStatus,
    pub advisor_notes: String,
    /// Loop iteration (1-based) that produced this description.
    pub iteration: u32,
}

impl CandidateState {
    pub fn new(cd: CharacteristicsDescription, iteration: u32) -> Self {
        Self { cd, boxes: vec![], status: CandidateStatus::Unground, advisor_notes: String::new(), iteration }
    }

    pub(crate) fn key(&self) -> String {
        self.cd.candidate_name.trim().to_lowercase()
    }

    pub(crate) fn note(&mut self, note: impl AsRef<str>) {
        if !self.advisor_notes.is_empty() {
            self.advisor_notes.push_str("; ");
        }
        self.advisor_notes.push_str(note.as_ref());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisorVerdict {
    pub confident: bool,
    pub concerns: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interactability {
    pub interactable: bool,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub cd_text: String,
    pub iterations_used: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One final labeled detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub score: f64,
    pub category: String,
    pub interactable: bool,
    pub provenance: Provenance,
}

impl Detection {
    pub fn scored(&self) -> ScoredBox {
        ScoredBox { bbox: self.bbox, score: self.score }
    }
}

/// Chat calls attributed to each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCalls {
    pub context: u32,
    pub mining: u32,
    pub reflection: u32,
    pub classification: u32,
}

impl StageCalls {
    pub fn total(&self) -> u32 {
        self.context + self.mining + self.reflection + self.classification
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneStats {
    pub iterations: u32,
    pub chat_calls: u32,
    pub ground_calls: u32,
    pub stage_calls: StageCalls,
}

/// Per-scene detection output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDetections {
    pub scene_id: String,
    pub detections: Vec<Detection>,
    pub stats: SceneStats,
}

impl SceneDetections {
    /// Pretty JSON with a trailing newline; stable byte-for-byte for equal values.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detections serialize") + "\n"
    }
}
