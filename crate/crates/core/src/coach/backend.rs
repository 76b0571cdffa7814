//! Model backends: the request/response contract and a remote HTTP client.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::schema::SchemaId;
use crate::error::{Error, Result};

/// Default environment variable holding the remote backend credential.
pub const CREDENTIAL_ENV: &str = "COACHSIM_BACKEND_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Frame,
    Timeline,
    Coach,
    Param,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Frame, Stage::Timeline, Stage::Coach, Stage::Param];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Frame => "frame",
            Stage::Timeline => "timeline",
            Stage::Coach => "coach",
            Stage::Param => "param",
        }
    }

    /// Prompt template a request for this stage carries.
    pub fn template(self) -> &'static str {
        match self {
            Stage::Frame => "frame_analysis",
            Stage::Timeline => "summarization_analysis",
            Stage::Coach => "coaching_generation",
            Stage::Param => "parameters_tuning",
        }
    }

    pub fn schema(self) -> SchemaId {
        match self {
            Stage::Frame => SchemaId::FrameState,
            Stage::Timeline => SchemaId::EpisodeDecision,
            Stage::Coach => SchemaId::CoachingAction,
            Stage::Param => SchemaId::RobotAdjustment,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub stage: Stage,
    pub template: String,
    /// Zero for the first call, one for the regeneration.
    pub attempt: u32,
    /// Why the previous response was rejected, on a regeneration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
    pub payload: Value,
}

impl BackendRequest {
    pub fn new(stage: Stage, payload: Value) -> Self {
        Self { stage, template: stage.template().to_string(), attempt: 0, rejection: None, payload }
    }
}

/// Raw text expected to contain one schema-conformant object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

/// A model service answering stage requests. Implementations must be
/// shareable across the worker threads of the frame stage.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the raw response text. `Transport` errors abort the episode;
    /// malformed text is handled by the caller's validation.
    fn complete(&self, request: &BackendRequest) -> Result<String>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Remote,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stub" => Ok(BackendKind::Stub),
            "remote" => Ok(BackendKind::Remote),
            other => Err(Error::InvalidArgument(format!("unknown backend {other:?} (expected stub or remote)"))),
        }
    }
}

/// JSON-over-HTTP backend: POSTs the serialized [`BackendRequest`] and
/// expects a [`BackendResponse`] body.
pub struct RemoteBackend {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self> {
        let endpoint = endpoint.into();
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(Error::Config(format!("backend endpoint must be an http(s) URL, got {endpoint:?}")));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(Self { endpoint, token, agent })
    }

    /// Reads the credential from `env_var`; a missing variable means no
    /// authorization header is sent.
    pub fn from_env(endpoint: impl Into<String>, env_var: &str, timeout: Duration) -> Result<Self> {
        Self::new(endpoint, std::env::var(env_var).ok(), timeout)
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call
            .send_json(request)
            .map_err(|e| Error::Transport(format!("{} request to {}: {e}", request.stage, self.endpoint)))?;
        let body: BackendResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("unreadable response envelope: {e}")))?;
        Ok(body.text)
    }
}
