use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CachedEmbedder, ChatBackend, ChatClient, ConcurrencyLimit, Embedder, GroundClient, Grounder, HashEmbedder,
    HttpGrounder, MockScript, PromptRegistry, RecordingChat, RecordingEmbedder, RecordingGrounder, RemoteChat,
    RemoteEmbedder, ReplayChat, ReplayEmbedder, ReplayGrounder, ReplayStore, DEFAULT_CONCURRENCY,
};
use crate::error::{Error, Result};

/// Where model answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Remote services configured through environment variables.
    Remote,
    /// Answers only from a replay store; unknown requests fail.
    Replay,
    /// Scripted chat, synthetic grounding, hash embeddings.
    Mock,
    /// Remote (or mock, when a script is given) with every answer recorded.
    Record,
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remote" => Ok(Self::Remote),
            "replay" => Ok(Self::Replay),
            "mock" => Ok(Self::Mock),
            "record" => Ok(Self::Record),
            other => Err(Error::Config(format!("unknown backend {other:?} (remote, replay, mock, record)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderOptions {
    pub backend: BackendKind,
    pub replay_dir: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    /// Directory of prompt assets replacing the built-in ones.
    pub prompts_dir: Option<PathBuf>,
    pub concurrency: usize,
}

impl Default for ProviderOptions {
    fn default() -> Self {
        Self { backend: BackendKind::Mock, replay_dir: None, mock_script: None, prompts_dir: None, concurrency: DEFAULT_CONCURRENCY }
    }
}

impl ProviderOptions {
    /// Checks option combinations without touching any provider.
    pub fn validate(&self) -> Result<()> {
        match self.backend {
            BackendKind::Replay | BackendKind::Record if self.replay_dir.is_none() => {
                Err(Error::Config("--replay-dir is required for replay and record backends".into()))
            }
            BackendKind::Mock if self.mock_script.is_none() => {
                Err(Error::Config("--mock-script is required for the mock backend".into()))
            }
            _ if self.concurrency == 0 => Err(Error::Config("concurrency must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// The three model capabilities, ready to use.
#[derive(Clone)]
pub struct Providers {
    pub chat: Arc<ChatClient>,
    pub ground: Arc<GroundClient>,
    pub embed: Arc<dyn Embedder>,
}

impl Providers {
    pub fn build(opts: &ProviderOptions) -> Result<Self> {
        opts.validate()?;
        let registry = Arc::new(match &opts.prompts_dir {
            Some(dir) => PromptRegistry::from_dir(dir)?,
            None => PromptRegistry::builtin(),
        });
        let store = opts.replay_dir.as_ref().map(|d| Arc::new(ReplayStore::open(d.clone())));
        let script = opts.mock_script.as_deref().map(MockScript::load).transpose()?;

        let (chat, ground, embed): (Arc<dyn ChatBackend>, Arc<dyn Grounder>, Arc<dyn Embedder>) = match opts.backend {
            BackendKind::Mock => {
                let script = script.expect("validated");
                (Arc::new(script.chat_backend()), Arc::new(script.grounder()), Arc::new(HashEmbedder::default()))
            }
            BackendKind::Replay => {
                let store = store.expect("validated");
                (
                    Arc::new(ReplayChat::new(store.clone())),
                    Arc::new(ReplayGrounder::new(store.clone())),
                    Arc::new(ReplayEmbedder::new(store)),
                )
            }
            BackendKind::Remote => {
                (Arc::new(RemoteChat::from_env()?), Arc::new(HttpGrounder::from_env()?), Arc::new(RemoteEmbedder::from_env()?))
            }
            BackendKind::Record => {
                let store = store.expect("validated");
                let (c, g, e): (Arc<dyn ChatBackend>, Arc<dyn Grounder>, Arc<dyn Embedder>) = match &script {
                    Some(s) => (Arc::new(s.chat_backend()), Arc::new(s.grounder()), Arc::new(HashEmbedder::default())),
                    None => (
                        Arc::new(RemoteChat::from_env()?),
                        Arc::new(HttpGrounder::from_env()?),
                        Arc::new(RemoteEmbedder::from_env()?),
                    ),
                };
                (
                    Arc::new(RecordingChat::new(c, store.clone())),
                    Arc::new(RecordingGrounder::new(g, store.clone())),
                    Arc::new(RecordingEmbedder::new(e, store)),
                )
            }
        };

        let chat_limit = Arc::new(ConcurrencyLimit::new(opts.concurrency));
        let ground_limit = Arc::new(ConcurrencyLimit::new(opts.concurrency));
        Ok(Self {
            chat: Arc::new(ChatClient::new(registry, chat).with_limit(chat_limit)),
            ground: Arc::new(GroundClient::new(ground).with_limit(ground_limit)),
            embed: Arc::new(CachedEmbedder::new(embed)),
        })
    }
}
