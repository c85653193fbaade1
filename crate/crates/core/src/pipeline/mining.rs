use std::collections::{BTreeSet, HashSet};

use super::types::{CharacteristicDimension, CharacteristicsDescription, SceneContext};
use super::Pipeline;
use crate::error::Result;
use crate::gateway::schema::{CandidatesOut, DescriptionsOut, DimensionsOut, QuestionsOut};
use crate::gateway::{ImagePayload, TemplateId};

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

const NO_FEEDBACK: &str = "None (first round).";

impl Pipeline {
    /// Recognizes candidates, their distinguishing dimensions, one question per
    /// dimension, and the in-context answers, and composes one description per
    /// candidate.
    ///
    /// Candidates whose folded name is in `settled` are dropped right after
    /// recognition. Descriptions are deduplicated by folded `cd_text`.
    pub fn mine_characteristics(
        &self,
        ctx: &SceneContext,
        image: &ImagePayload,
        feedback: Option<&str>,
        settled: &BTreeSet<String>,
        calls: &mut u32,
    ) -> Result<Vec<CharacteristicsDescription>> {
        let feedback = feedback.filter(|f| !f.trim().is_empty()).unwrap_or(NO_FEEDBACK);
        let global = ctx.global_text();
        let local = ctx.local_text();

        let req = self
            .request(TemplateId::CandidateRecognition)
            .slot("global_context", &global)
            .slot("local_context", &local)
            .slot("feedback", feedback)
            .image(image.clone());
        let recognized: CandidatesOut = self.chat.ask(&req, calls)?;
        let mut seen = HashSet::new();
        let candidates: Vec<_> = recognized
            .candidates
            .into_iter()
            .filter(|c| !c.name.trim().is_empty())
            .filter(|c| !settled.contains(&fold(&c.name)))
            .filter(|c| seen.insert(fold(&c.name)))
            .collect();
        if candidates.is_empty() {
            return Ok(vec![]);
        }

        let listing = candidates
            .iter()
            .map(|c| if c.rationale.is_empty() { format!("- {}", c.name) } else { format!("- {}: {}", c.name, c.rationale) })
            .collect::<Vec<_>>()
            .join("\n");
        let req = self
            .request(TemplateId::DimensionRecognition)
            .slot("global_context", &global)
            .slot("local_context", &local)
            .slot("candidates", listing)
            .image(image.clone());
        let dims: DimensionsOut = self.chat.ask(&req, calls)?;

        let dim_lists: Vec<Vec<String>> = candidates
            .iter()
            .map(|c| {
                let mut names: Vec<String> = dims
                    .candidates
                    .iter()
                    .find(|d| fold(&d.name) == fold(&c.name))
                    .map(|d| d.dimensions.clone())
                    .unwrap_or_default();
                let mut seen = HashSet::new();
                names.retain(|n| !n.trim().is_empty() && seen.insert(fold(n)));
                names
            })
            .collect();
        let dim_text = candidates
            .iter()
            .zip(&dim_lists)
            .map(|(c, d)| format!("- {}: {}", c.name, d.join(", ")))
            .collect::<Vec<_>>()
            .join("\n");
        let req = self.request(TemplateId::QuestionFormulation).slot("dimensions", dim_text);
        let questions: QuestionsOut = self.chat.ask(&req, calls)?;

        let question_lists: Vec<Vec<(String, String)>> = candidates
            .iter()
            .zip(&dim_lists)
            .map(|(c, dims)| {
                let asked = questions.candidates.iter().find(|q| fold(&q.name) == fold(&c.name));
                dims.iter()
                    .map(|d| {
                        let q = asked
                            .and_then(|a| a.questions.iter().find(|q| fold(&q.dimension) == fold(d)))
                            .map(|q| q.question.clone())
                            .unwrap_or_else(|| format!("What is the {d} of the {}?", c.name));
                        (d.clone(), q)
                    })
                    .collect()
            })
            .collect();
        let question_text = candidates
            .iter()
            .zip(&question_lists)
            .map(|(c, qs)| {
                let mut block = format!("{}:", c.name);
                for (d, q) in qs {
                    block.push_str(&format!("\n  [{d}] {q}"));
                }
                block
            })
            .collect::<Vec<_>>()
            .join("\n");
        let req = self
            .request(TemplateId::CharacteristicsReasoning)
            .slot("global_context", &global)
            .slot("local_context", &local)
            .slot("questions", question_text)
            .slot("feedback", feedback)
            .image(image.clone());
        let answers: DescriptionsOut = self.chat.ask(&req, calls)?;

        let mut seen_text = HashSet::new();
        let mut out = vec![];
        for (c, qs) in candidates.iter().zip(question_lists) {
            let answered = answers.candidates.iter().find(|a| fold(&a.name) == fold(&c.name));
            let dimensions: Vec<CharacteristicDimension> = qs
                .into_iter()
                .map(|(d, q)| {
                    let answer = answered
                        .and_then(|a| a.answers.iter().find(|x| fold(&x.dimension) == fold(&d)))
                        .map(|x| x.answer.trim().to_string())
                        .unwrap_or_default();
                    CharacteristicDimension { dimension_name: d, question: q, answer }
                })
                .collect();
            let parts: Vec<&str> =
                dimensions.iter().map(|d| d.answer.as_str()).filter(|a| !a.is_empty()).collect();
            let cd_text = if parts.is_empty() { c.name.trim().to_string() } else { parts.join(", ") };
            if seen_text.insert(fold(&cd_text)) {
                out.push(CharacteristicsDescription { candidate_name: c.name.trim().to_string(), dimensions, cd_text });
            }
        }
        Ok(out)
    }
}
