//! Payload types exchanged between pipeline stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Closed string enum with a designated repair value.
macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident, repair = $repair:ident, { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $s)] $var,)+
        }

        impl $name {
            pub const VALUES: &'static [&'static str] = &[$($s),+];
            /// Value substituted for an unrecognized string.
            pub const REPAIR: Self = Self::$repair;

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$var => $s,)+
                }
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::REPAIR
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s {
                    $($s => Ok(Self::$var),)+
                    other => Err(Error::InvalidArgument(format!(
                        "{other:?} is not a valid {}",
                        stringify!($name)
                    ))),
                }
            }
        }
    };
}

closed_enum!(UserState, repair = Unknown, {
    Unknown => "unknown",
    Approaching => "approaching",
    Positioned => "positioned",
    Interacting => "interacting",
    Completed => "completed",
    Stuck => "stuck",
    Retreating => "retreating",
    Hesitant => "hesitant",
    Confused => "confused",
    Searching => "searching",
});

closed_enum!(RobotState, repair = Unknown, {
    Unknown => "unknown",
    Guiding => "guiding",
    Waiting => "waiting",
    Signaling => "signaling",
    Assisting => "assisting",
    Monitoring => "monitoring",
    Stopped => "stopped",
    Adjusting => "adjusting",
});

closed_enum!(ConnectionState, repair = Unknown, {
    Connected => "connected",
    Loose => "loose",
    Disconnected => "disconnected",
    Unknown => "unknown",
});

closed_enum!(EnvironmentState, repair = Unknown, {
    Unknown => "unknown",
    Clear => "clear",
    Cluttered => "cluttered",
    Hazardous => "hazardous",
    Changing => "changing",
});

closed_enum!(
    /// Has no "unknown" member; an unreadable value is taken as still in
    /// progress, which never claims success or failure.
    TaskProgress, repair = InProgress, {
    NotStarted => "not_started",
    InProgress => "in_progress",
    NearlyComplete => "nearly_complete",
    Complete => "complete",
    Failed => "failed",
    Interrupted => "interrupted",
});

closed_enum!(
    /// Five-level rating used by the episode decision.
    Rating, repair = Fair, {
    Excellent => "excellent",
    Good => "good",
    Fair => "fair",
    Poor => "poor",
    VeryPoor => "very_poor",
});

closed_enum!(
    /// Four-level rating used by the technique assessment.
    Assessment, repair = NeedsImprovement, {
    Excellent => "excellent",
    Good => "good",
    NeedsImprovement => "needs_improvement",
    Poor => "poor",
});

closed_enum!(DistanceAdjustment, repair = Maintain, {
    Closer => "closer",
    Farther => "farther",
    Maintain => "maintain",
});

closed_enum!(PointingAdjustment, repair = Maintain, {
    MoreLeft => "more_left",
    MoreRight => "more_right",
    Maintain => "maintain",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePayload {
    /// Pre-annotated text describing the frame.
    Description(String),
    /// Path of the captured image; only a vision backend can use it.
    ImagePath(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub timestamp_sec: f64,
    pub payload: FramePayload,
}

impl FrameObservation {
    pub fn description(&self) -> &str {
        match &self.payload {
            FramePayload::Description(d) => d,
            FramePayload::ImagePath(_) => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetadata {
    pub episode_id: String,
    pub sub_skill: String,
    pub target_time_sec: f64,
}

/// One recorded practice episode: metadata and frames in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub metadata: EpisodeMetadata,
    pub frames: Vec<FrameObservation>,
    /// Transcribed verbal feedback from the user, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub timestamp_sec: f64,
    pub user_state: UserState,
    pub robot_state: RobotState,
    pub connection_state: ConnectionState,
    pub environment_state: EnvironmentState,
    pub task_progress: TaskProgress,
    pub safety_concerns: bool,
    pub user_difficulties: bool,
    pub frame_description: String,
}

impl FrameState {
    /// Conservative state for a frame the backend could not describe.
    pub fn unknown(timestamp_sec: f64, description: impl Into<String>) -> Self {
        Self {
            timestamp_sec,
            user_state: UserState::Unknown,
            robot_state: RobotState::Unknown,
            connection_state: ConnectionState::Unknown,
            environment_state: EnvironmentState::Unknown,
            task_progress: TaskProgress::REPAIR,
            safety_concerns: false,
            user_difficulties: false,
            frame_description: description.into(),
        }
    }

    /// Enum fields by name, in schema order.
    pub fn enum_fields(&self) -> [(&'static str, &'static str); 5] {
        [
            ("user_state", self.user_state.as_str()),
            ("robot_state", self.robot_state.as_str()),
            ("connection_state", self.connection_state.as_str()),
            ("environment_state", self.environment_state.as_str()),
            ("task_progress", self.task_progress.as_str()),
        ]
    }
}

/// Judgment fields of an episode, as produced by the timeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDecision {
    pub success: bool,
    pub navigation_quality: Rating,
    pub time_efficiency: f64,
    pub safety_rating: Rating,
    pub following_technique: Rating,
    pub communication_effectiveness: bool,
    pub trust_level: Rating,
    pub issues_encountered: Vec<String>,
    pub result_summary: String,
    pub timeline_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub from: String,
    pub to: String,
}

/// A timestamped state transition. The first frame always yields an
/// initial event with no changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub timestamp_sec: f64,
    pub initial: bool,
    pub changes: Vec<FieldChange>,
}

impl TimelineEvent {
    pub fn changed_fields(&self) -> Vec<&str> {
        self.changes.iter().map(|c| c.field.as_str()).collect()
    }
}

/// Locally computed statistics; never taken from a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub duration_sec: f64,
    pub terminal_progress: TaskProgress,
    pub safety_flag_frames: usize,
    pub difficulty_frames: usize,
    pub events: Vec<TimelineEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub decision: EpisodeDecision,
    pub stats: EpisodeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueAssessment {
    pub following_technique: Assessment,
    pub distance_maintenance: Assessment,
    pub cue_response: Assessment,
    pub trust_level: Assessment,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpecificFeedback {
    pub strengths: Vec<String>,
    pub areas_for_improvement: Vec<String>,
    pub safety_notes: Vec<String>,
    pub communication_feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoachingRecommendations {
    pub immediate_practice: Vec<String>,
    pub technique_tips: Vec<String>,
    pub communication_tips: Vec<String>,
    pub safety_tips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoachingAction {
    pub technique_assessment: TechniqueAssessment,
    pub specific_feedback: SpecificFeedback,
    pub coaching_recommendations: CoachingRecommendations,
    pub result_summary: String,
    pub terminal_instruction_to_user: String,
    pub user_actionables: Vec<String>,
}

impl CoachingAction {
    /// Number of "step N" items in the instruction; the prompt asks for at
    /// most two but this is advisory only.
    pub fn step_count(&self) -> usize {
        self.terminal_instruction_to_user.to_lowercase().matches("step ").count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotAdjustment {
    pub distance_to_door_adjustment: DistanceAdjustment,
    pub pointing_direction_adjustment: PointingAdjustment,
    pub reasoning: String,
}

impl RobotAdjustment {
    pub fn maintain(reasoning: impl Into<String>) -> Self {
        Self {
            distance_to_door_adjustment: DistanceAdjustment::Maintain,
            pointing_direction_adjustment: PointingAdjustment::Maintain,
            reasoning: reasoning.into(),
        }
    }
}

/// Instruction-only payload of the single-call baseline prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalInstruction {
    pub terminal_instruction_to_user: String,
}
