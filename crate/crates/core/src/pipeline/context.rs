use super::types::SceneContext;
use super::Pipeline;
use crate::error::Result;
use crate::gateway::schema::{GlobalContext, LocalContext};
use crate::gateway::{ChatRequest, ImagePayload, TemplateId};

impl Pipeline {
    /// Global context from the store page, then a scene summary of the
    /// screenshot read in light of it.
    ///
    /// An empty store page yields an all-empty global context and a warning
    /// instead of a model call.
    pub fn comprehend_context(&self, store_text: &str, image: &ImagePayload, calls: &mut u32) -> Result<SceneContext> {
        let mut warnings = vec![];
        let global = if store_text.trim().is_empty() {
            tracing::warn!("empty store page text; global context left blank");
            warnings.push("empty store page text; global context is blank".to_string());
            GlobalContext::default()
        } else {
            let req = self.request(TemplateId::GlobalContext).slot("store_text", store_text);
            self.chat.ask::<GlobalContext>(&req, calls)?
        };
        let req = self
            .request(TemplateId::LocalContext)
            .slot("global_context", global.render())
            .image(image.clone());
        let local = self.chat.ask::<LocalContext>(&req, calls)?;
        Ok(SceneContext { global, local, warnings })
    }

    pub(crate) fn request(&self, template: TemplateId) -> ChatRequest {
        let mut req = ChatRequest::new(template);
        req.decode = self.config.decode;
        req
    }
}
