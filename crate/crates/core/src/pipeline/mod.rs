//! Three-stage detection of interactable elements in one scene:
//! context comprehension, a mine/ground/verify loop gated by an advisor, and
//! context-sensitive interactability classification, followed by the two
//! geometric post-processing filters.
//!
//! Every model call goes through [`ChatClient`] and [`GroundClient`], so a
//! pipeline backed by replay stores is a pure function of its inputs.

mod classify;
mod context;
mod mining;
mod reflection;
mod types;

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use reflection::ReflectOutcome;
pub use types::{
    AdvisorVerdict, CandidateState, CandidateStatus, CharacteristicDimension, CharacteristicsDescription,
    Detection, Interactability, Provenance, SceneContext, SceneDetections, SceneStats, StageCalls,
};

use crate::dataset::{AppCatalog, Dataset, Scene};
use crate::error::Result;
use crate::gateway::{ChatClient, DecodeParams, GroundClient, ImagePayload};
use crate::geometry::{is_oversized, nms_by, DEFAULT_MAX_AREA_FRACTION, DEFAULT_NMS_IOU};

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;

/// Stages switched off for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    /// Skip context comprehension and feed an empty context downstream.
    #[serde(default)]
    pub context: bool,
    /// Single mine/ground pass; every grounded box counts as verified.
    #[serde(default)]
    pub reflection: bool,
    /// Skip classification; every detection is interactable.
    #[serde(default)]
    pub classification: bool,
}

impl Ablations {
    /// Parses a comma-separated stage list (`context`, `reflection`, `classify`).
    pub fn parse_list(list: &str) -> std::result::Result<Self, String> {
        let mut out = Self::default();
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "context" => out.context = true,
                "reflection" => out.reflection = true,
                "classify" | "classification" => out.classification = true,
                other => return Err(format!("unknown stage to ablate: {other}")),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_iterations: u32,
    pub ablations: Ablations,
    /// Seeds demonstration sampling.
    pub seed: u64,
    pub max_area_fraction: f64,
    pub nms_iou: f64,
    /// Margin added on each side of a box before cropping it for verification.
    pub crop_padding: f64,
    pub n_demos: usize,
    pub decode: DecodeParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            ablations: Ablations::default(),
            seed: 0,
            max_area_fraction: DEFAULT_MAX_AREA_FRACTION,
            nms_iou: DEFAULT_NMS_IOU,
            crop_padding: 0.1,
            n_demos: 3,
            decode: DecodeParams::default(),
        }
    }
}

/// Everything needed to process one scene.
#[derive(Debug, Clone)]
pub struct SceneInput {
    pub scene: Scene,
    pub image: ImagePayload,
    pub store_text: String,
}

impl SceneInput {
    /// Loads the screenshot of `scene` and looks up its app's store text
    /// (empty when the app is unknown).
    pub fn load(ds: &Dataset, scene: &Scene, apps: &AppCatalog) -> Result<Self> {
        let image = ImagePayload::from_path(&ds.image_path(scene))?;
        let store_text = apps.get(&scene.app_id).map(|a| a.store_page_text.clone()).unwrap_or_default();
        Ok(Self { scene: scene.clone(), image, store_text })
    }
}

/// Outcome of one scene inside a batch.
#[derive(Debug)]
pub struct BatchItem {
    pub scene_id: String,
    pub result: Result<SceneDetections>,
}

pub struct Pipeline {
    chat: Arc<ChatClient>,
    ground: Arc<GroundClient>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(chat: Arc<ChatClient>, ground: Arc<GroundClient>, config: PipelineConfig) -> Self {
        Self { chat, ground, config }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Runs all stages on one scene and returns the post-processed detections.
    pub fn run(&self, input: &SceneInput) -> Result<SceneDetections> {
        let scene = &input.scene;
        let image = &input.image;
        let ab = self.config.ablations;
        let mut stats = SceneStats::default();

        let ctx = if ab.context {
            SceneContext::default()
        } else {
            self.comprehend_context(&input.store_text, image, &mut stats.stage_calls.context)?
        };

        let mut ledger: Vec<CandidateState> = vec![];
        let mut feedback: Option<String> = None;
        for iteration in 1..=self.config.max_iterations.max(1) {
            stats.iterations = iteration;
            let settled: BTreeSet<String> = ledger
                .iter()
                .filter(|s| matches!(s.status, CandidateStatus::Verified | CandidateStatus::Rejected))
                .map(CandidateState::key)
                .collect();
            let cds =
                self.mine_characteristics(&ctx, image, feedback.as_deref(), &settled, &mut stats.stage_calls.mining)?;
            if cds.is_empty() {
                break;
            }
            let mut states =
                self.detect_candidates(cds, image, scene.width, scene.height, iteration, &mut stats.ground_calls)?;

            if ab.reflection {
                for st in &mut states {
                    if st.status == CandidateStatus::Detected {
                        st.status = CandidateStatus::Verified;
                    }
                }
                ledger.extend(states);
                break;
            }

            let fresh: HashSet<String> = states.iter().map(CandidateState::key).collect();
            ledger.retain(|s| !(s.status == CandidateStatus::Missed && fresh.contains(&s.key())));
            let outcome = self.reflect(states, &ledger, image, &ctx, &mut stats.stage_calls.reflection)?;
            ledger.extend(outcome.states);
            if outcome.verdict.confident {
                break;
            }
            feedback = Some(outcome.feedback);
        }

        let verified: Vec<&CandidateState> =
            ledger.iter().filter(|s| s.status == CandidateStatus::Verified).collect();
        let labels = if ab.classification {
            verified
                .iter()
                .map(|_| Interactability { interactable: true, rationale: String::new(), warning: None })
                .collect()
        } else {
            self.classify_interactability(&verified, &ctx, image, &scene.scene_id, &mut stats.stage_calls.classification)?
        };

        let mut detections = vec![];
        for (st, label) in verified.iter().zip(labels) {
            let mut warnings = ctx.warnings.clone();
            warnings.extend(label.warning.clone());
            for b in &st.boxes {
                detections.push(Detection {
                    bbox: b.bbox,
                    score: b.score,
                    category: st.cd.candidate_name.clone(),
                    interactable: label.interactable,
                    provenance: Provenance {
                        cd_text: st.cd.cd_text.clone(),
                        iterations_used: st.iteration,
                        warnings: warnings.clone(),
                    },
                });
            }
        }
        detections.retain(|d| !is_oversized(&d.bbox, scene.width, scene.height, self.config.max_area_fraction));
        let detections = nms_by(detections, self.config.nms_iou, Detection::scored);

        stats.chat_calls = stats.stage_calls.total();
        Ok(SceneDetections { scene_id: scene.scene_id.clone(), detections, stats })
    }

    /// Processes scenes on up to `jobs` threads. A failing scene is reported
    /// in its slot and does not stop the others. Output order follows input.
    pub fn run_batch(&self, inputs: &[SceneInput], jobs: usize) -> Vec<BatchItem> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<BatchItem>>> = Mutex::new((0..inputs.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..jobs.clamp(1, inputs.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(input) = inputs.get(i) else { break };
                    let result = self.run(input);
                    if let Err(e) = &result {
                        tracing::error!(scene = %input.scene.scene_id, error = %e, "scene failed");
                    }
                    let item = BatchItem { scene_id: input.scene.scene_id.clone(), result };
                    slots.lock().expect("batch slots")[i] = Some(item);
                });
            }
        });
        slots.into_inner().expect("batch slots").into_iter().map(|o| o.expect("every scene processed")).collect()
    }
}
