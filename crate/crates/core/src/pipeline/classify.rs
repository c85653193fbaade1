use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::types::{CandidateState, Interactability, SceneContext};
use super::Pipeline;
use crate::error::{Error, Result};
use crate::gateway::schema::InteractabilityOut;
use crate::gateway::{ImagePayload, TemplateId};

/// Seed for demonstration sampling, derived from the run seed and the scene.
pub(crate) fn demo_seed(seed: u64, scene_id: &str) -> u64 {
    let digest = Sha256::digest(scene_id.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(head)
}

impl Pipeline {
    /// Indices of the demonstrations used for one scene, in pool order.
    pub fn select_demos(&self, scene_id: &str) -> Vec<usize> {
        let pool = self.chat.registry().demos().len();
        let n = self.config.n_demos.min(pool);
        let mut rng = ChaCha8Rng::seed_from_u64(demo_seed(self.config.seed, scene_id));
        let mut picked = rand::seq::index::sample(&mut rng, pool, n).into_vec();
        picked.sort_unstable();
        picked
    }

    /// One interactability judgment per verified candidate, in input order.
    ///
    /// An answer that stays unparseable after the format re-asks defaults to
    /// interactable with a warning, favoring recall.
    pub fn classify_interactability(
        &self,
        verified: &[&CandidateState],
        ctx: &SceneContext,
        image: &ImagePayload,
        scene_id: &str,
        calls: &mut u32,
    ) -> Result<Vec<Interactability>> {
        if verified.is_empty() {
            return Ok(vec![]);
        }
        let demos: Vec<String> = {
            let pool = self.chat.registry().demos();
            self.select_demos(scene_id).into_iter().map(|i| pool[i].render()).collect()
        };
        let global = ctx.global_text();
        let local = ctx.local_text();
        let mut out = Vec::with_capacity(verified.len());
        for st in verified {
            let req = self
                .request(TemplateId::Interactability)
                .slot("global_context", &global)
                .slot("local_context", &local)
                .slot("candidate", &st.cd.candidate_name)
                .slot("description", &st.cd.cd_text)
                .demos(demos.clone())
                .image(image.clone());
            match self.chat.ask::<InteractabilityOut>(&req, calls) {
                Ok(v) => out.push(Interactability { interactable: v.interactable, rationale: v.rationale, warning: None }),
                Err(e @ Error::Parse { .. }) => {
                    tracing::warn!(candidate = %st.cd.candidate_name, "unparseable interactability answer; defaulting to interactable");
                    out.push(Interactability {
                        interactable: true,
                        rationale: String::new(),
                        warning: Some(format!("interactability defaulted to true: {e}")),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}
