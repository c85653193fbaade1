use super::types::{AdvisorVerdict, CandidateState, CandidateStatus, CharacteristicsDescription, SceneContext};
use super::Pipeline;
use crate::error::{Error, Result};
use crate::gateway::schema::{AdvisorOut, MissReflectionOut, MissVerdict, VerificationOut, VerificationVerdict};
use crate::gateway::{GroundRequest, ImagePayload, TemplateId};
use crate::geometry::BoundingBox;

/// Result of one verification/reflection pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectOutcome {
    pub states: Vec<CandidateState>,
    pub verdict: AdvisorVerdict,
    /// Reflection analyses of missed candidates followed by advisor concerns;
    /// fed verbatim into the next mining round.
    pub feedback: String,
}

fn fmt_box(b: &BoundingBox) -> String {
    format!("(x={:.1}, y={:.1}, w={:.1}, h={:.1})", b.x, b.y, b.w, b.h)
}

fn status_name(s: CandidateStatus) -> &'static str {
    match s {
        CandidateStatus::Unground => "not grounded",
        CandidateStatus::Detected => "detected",
        CandidateStatus::Verified => "verified",
        CandidateStatus::Rejected => "rejected",
        CandidateStatus::Missed => "missed",
    }
}

impl Pipeline {
    /// Grounds all descriptions in one call. Candidates with at least one box
    /// become `Detected` (all boxes kept), the others `Missed`.
    pub fn detect_candidates(
        &self,
        cds: Vec<CharacteristicsDescription>,
        image: &ImagePayload,
        width: f64,
        height: f64,
        iteration: u32,
        ground_calls: &mut u32,
    ) -> Result<Vec<CandidateState>> {
        if cds.is_empty() {
            return Ok(vec![]);
        }
        let req = GroundRequest {
            image: image.clone(),
            width,
            height,
            descriptions: cds.iter().map(|c| c.cd_text.clone()).collect(),
        };
        *ground_calls += 1;
        let resp = self.ground.ground(&req)?;
        Ok(cds
            .into_iter()
            .zip(resp.results)
            .map(|(cd, boxes)| {
                let mut st = CandidateState::new(cd, iteration);
                st.status = if boxes.is_empty() { CandidateStatus::Missed } else { CandidateStatus::Detected };
                st.boxes = boxes;
                st
            })
            .collect())
    }

    /// Verifies detected candidates box by box against padded crops, reflects
    /// on missed ones, then asks the advisor for a verdict over the whole
    /// ledger (`settled` plus this round's states).
    pub fn reflect(
        &self,
        mut states: Vec<CandidateState>,
        settled: &[CandidateState],
        image: &ImagePayload,
        ctx: &SceneContext,
        calls: &mut u32,
    ) -> Result<ReflectOutcome> {
        let mut analyses = vec![];

        for st in states.iter_mut().filter(|s| s.status == CandidateStatus::Detected) {
            let mut kept = vec![];
            for b in std::mem::take(&mut st.boxes) {
                let crop = match image.crop(&b.bbox.padded(self.config.crop_padding)) {
                    Ok(c) => c,
                    Err(e @ Error::Crop(_)) => {
                        st.note(format!("box {} dropped: {e}", fmt_box(&b.bbox)));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let req = self
                    .request(TemplateId::RegionVerification)
                    .slot("description", &st.cd.cd_text)
                    .image(crop)
                    .image(image.clone());
                let out: VerificationOut = self.chat.ask(&req, calls)?;
                match out.verdict {
                    VerificationVerdict::Match => kept.push(b),
                    VerificationVerdict::Mismatch => {
                        st.note(format!("box {} failed verification: {}", fmt_box(&b.bbox), out.reason))
                    }
                }
            }
            st.status = if kept.is_empty() { CandidateStatus::Rejected } else { CandidateStatus::Verified };
            st.boxes = kept;
        }

        let found: Vec<(String, BoundingBox)> = settled
            .iter()
            .chain(states.iter())
            .filter(|s| s.status == CandidateStatus::Verified)
            .flat_map(|s| s.boxes.iter().map(move |b| (s.cd.candidate_name.clone(), b.bbox)))
            .collect();
        let has_missed = states.iter().any(|s| s.status == CandidateStatus::Missed);
        if has_missed {
            let overlay = image.with_boxes(&found.iter().map(|(_, b)| *b).collect::<Vec<_>>())?;
            let listing = if found.is_empty() {
                "None.".to_string()
            } else {
                found.iter().map(|(n, b)| format!("- {n} {}", fmt_box(b))).collect::<Vec<_>>().join("\n")
            };
            for st in states.iter_mut().filter(|s| s.status == CandidateStatus::Missed) {
                let req = self
                    .request(TemplateId::MissReflection)
                    .slot("description", &st.cd.cd_text)
                    .slot("detections", &listing)
                    .image(overlay.clone());
                let out: MissReflectionOut = self.chat.ask(&req, calls)?;
                match out.verdict {
                    MissVerdict::Hallucination => {
                        st.status = CandidateStatus::Rejected;
                        st.note(format!("judged a hallucination: {}", out.analysis));
                    }
                    MissVerdict::Missed => {
                        st.note(format!("possible detection miss: {}", out.analysis));
                        analyses.push(format!("{} (\"{}\"): {}", st.cd.candidate_name, st.cd.cd_text, out.analysis));
                    }
                }
            }
        }

        let mut ledger = format!("App: {}\n", if ctx.global.app_name.is_empty() { "unknown" } else { &ctx.global.app_name });
        for s in settled.iter().chain(states.iter()) {
            ledger.push_str(&format!(
                "- {} | description: {} | status: {} | boxes: {}",
                s.cd.candidate_name,
                s.cd.cd_text,
                status_name(s.status),
                s.boxes.iter().map(|b| fmt_box(&b.bbox)).collect::<Vec<_>>().join(" ")
            ));
            if !s.advisor_notes.is_empty() {
                ledger.push_str(&format!(" | notes: {}", s.advisor_notes));
            }
            ledger.push('\n');
        }
        let req = self.request(TemplateId::Advisor).slot("ledger", ledger.trim_end());
        let advice: AdvisorOut = self.chat.ask(&req, calls)?;

        let mut feedback = analyses.join("\n");
        if !advice.confident && !advice.concerns.trim().is_empty() {
            if !feedback.is_empty() {
                feedback.push('\n');
            }
            feedback.push_str(&format!("Advisor concerns: {}", advice.concerns.trim()));
        }
        Ok(ReflectOutcome {
            states,
            verdict: AdvisorVerdict { confident: advice.confident, concerns: advice.concerns },
            feedback,
        })
    }
}
