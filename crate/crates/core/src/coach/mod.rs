//! Post-episode coaching: frame states, an episode summary, a coaching
//! action and a robot adjustment, each produced by a model backend under a
//! closed schema with repair, one regeneration and conservative fallbacks.

pub mod backend;
pub mod episode;
pub mod faults;
pub mod pipeline;
pub mod robot;
pub mod schema;
pub mod stub;
pub mod types;

pub use backend::{Backend, BackendKind, BackendRequest, BackendResponse, RemoteBackend, Stage, CREDENTIAL_ENV};
pub use episode::{episode_to_json, parse_episode, parse_robot_config, WORKED_EXAMPLE, WORKED_EXAMPLE_GOLDEN, WORKED_EXAMPLE_ROBOT};
pub use pipeline::{Pipeline, PipelineOutput};
pub use robot::{apply_adjustment, RobotConfigState};
pub use schema::{json_schema, validate_and_repair, validate_value, SchemaId, Validation};
pub use stub::StubBackend;
pub use types::*;
