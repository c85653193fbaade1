//! Uniform access to the three external model capabilities (multimodal chat,
//! text embedding, description grounding), the prompt registry, structured
//! output parsing and the record/replay store.

mod chat;
mod embed;
mod ground;
mod http;
mod limiter;
mod payload;
pub mod prompts;
mod providers;
mod replay;
pub mod schema;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use chat::{
    ChatBackend, ChatClient, ChatRequest, ChatRule, DecodeParams, RecordingChat, RemoteChat,
    RenderedPrompt, ReplayChat, ScriptedChat, DEFAULT_MAX_REASKS,
};
pub use embed::{
    cosine, CachedEmbedder, Embedder, EmbeddingVector, HashEmbedder, RecordingEmbedder,
    RemoteEmbedder, ReplayEmbedder, TableEmbedder,
};
pub use ground::{
    GroundClient, GroundRequest, GroundResponse, GroundRule, Grounder, HttpGrounder,
    RecordingGrounder, ReplayGrounder, SyntheticGrounder, WireBox, WireError, WireRequest,
    WireResponse, WireResult,
};
pub use http::RetryPolicy;
pub use limiter::{ConcurrencyLimit, DEFAULT_CONCURRENCY};
pub use payload::ImagePayload;
pub use providers::{BackendKind, ProviderOptions, Providers};
pub use prompts::{Demonstration, PromptRegistry, PromptTemplate, TemplateId};
pub use replay::{canonical_json, ReplayKey, ReplayStore};
pub use schema::{parse_as, parse_structured, SchemaId, Structured};

use crate::error::{Error, Result};

/// Scripted chat answers plus synthetic grounding rules, as loaded from a
/// mock-script JSON file `{"chat": [...], "ground": [...]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub chat: Vec<ChatRule>,
    #[serde(default)]
    pub ground: Vec<GroundRule>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn chat_backend(&self) -> ScriptedChat {
        ScriptedChat::new(self.chat.clone())
    }

    pub fn grounder(&self) -> SyntheticGrounder {
        SyntheticGrounder::new(self.ground.clone())
    }
}
