//! Deterministic rule-based backend used for tests and offline runs.
//!
//! Every stage is a pure function of the request payload: keyword rules
//! over frame descriptions, threshold rules over episode statistics and a
//! fixed table of doorway failure modes with their corrections.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::backend::{Backend, BackendRequest, Stage};
use super::types::*;
use crate::error::{Error, Result};

/// Time-efficiency ratio above which a successful episode is only "fair".
pub const EFFICIENCY_THRESHOLD: f64 = 1.5;

#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl Backend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String> {
        if request.template != request.stage.template() {
            return Err(Error::Contract(format!(
                "template {:?} does not belong to the {} stage",
                request.template, request.stage
            )));
        }
        let out = match request.stage {
            Stage::Frame => serde_json::to_value(frame_stage(&parse(&request.payload)?)),
            Stage::Timeline => serde_json::to_value(timeline_stage(&parse(&request.payload)?)),
            Stage::Coach => serde_json::to_value(coach_stage(&parse(&request.payload)?)),
            Stage::Param => serde_json::to_value(param_stage(&parse(&request.payload)?)),
        }
        .map_err(|e| Error::Contract(e.to_string()))?;
        Ok(out.to_string())
    }
}

impl StubBackend {
    /// Answers a serialized request, as a server would.
    pub fn handle_raw(&self, body: &str) -> Result<String> {
        let request: BackendRequest =
            serde_json::from_str(body).map_err(|e| Error::Contract(format!("bad request: {e}")))?;
        self.complete(&request)
    }
}

fn parse<T: DeserializeOwned>(payload: &Value) -> Result<T> {
    serde_json::from_value(payload.clone()).map_err(|e| Error::Contract(format!("bad payload: {e}")))
}

#[derive(Debug, Deserialize)]
pub struct FramePayloadIn {
    pub timestamp_sec: f64,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct TimelinePayloadIn {
    pub sub_skill: String,
    pub target_time_sec: f64,
    pub stats: EpisodeStats,
    pub timeline: Vec<FrameState>,
}

#[derive(Debug, Deserialize)]
pub struct CoachPayloadIn {
    pub sub_skill: String,
    pub summary: EpisodeSummary,
    #[serde(default)]
    pub user_feedback: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ParamPayloadIn {
    pub coaching_action: CoachingAction,
    #[serde(default)]
    pub user_feedback: Option<String>,
}

fn has_any(text: &str, needles: &[&str]) -> bool {
    needles.iter().any(|n| text.contains(n))
}

/// Keyword rules mapping a frame description to a state; the first
/// matching user-state rule wins, so "searching" beats "hesitated".
pub fn frame_stage(p: &FramePayloadIn) -> FrameState {
    let raw = p.description.clone().unwrap_or_default();
    let d = raw.to_lowercase();
    if d.trim().is_empty() {
        return FrameState::unknown(p.timestamp_sec, raw);
    }
    let user_state = if d.contains("searching") {
        UserState::Searching
    } else if d.contains("hesitat") {
        UserState::Hesitant
    } else if d.contains("confus") {
        UserState::Confused
    } else if d.contains("stuck") {
        UserState::Stuck
    } else if has_any(&d, &["retreat", "backing away", "backed away"]) {
        UserState::Retreating
    } else if d.contains("grasp") && d.contains("handle") {
        UserState::Interacting
    } else if has_any(&d, &["completed", "door fully open", "entered the room"]) {
        UserState::Completed
    } else if d.contains("positioned") {
        UserState::Positioned
    } else if d.contains("approach") {
        UserState::Approaching
    } else {
        UserState::Unknown
    };
    let robot_state = [
        ("robot guiding", RobotState::Guiding),
        ("robot waiting", RobotState::Waiting),
        ("robot signal", RobotState::Signaling),
        ("robot assisting", RobotState::Assisting),
        ("robot monitoring", RobotState::Monitoring),
        ("robot stopped", RobotState::Stopped),
        ("robot adjusting", RobotState::Adjusting),
    ]
    .into_iter()
    .find(|(k, _)| d.contains(k))
    .map_or(RobotState::Unknown, |(_, s)| s);
    let connection_state = if has_any(&d, &["disconnected", "let go of the", "dropped the harness", "dropped the leash"]) {
        ConnectionState::Disconnected
    } else if has_any(&d, &["loose", "slack"]) {
        ConnectionState::Loose
    } else if has_any(&d, &["holding the harness", "holding the leash", "connected"]) {
        ConnectionState::Connected
    } else {
        ConnectionState::Unknown
    };
    let environment_state = if d.contains("hazard") {
        EnvironmentState::Hazardous
    } else if has_any(&d, &["clutter", "obstacle"]) {
        EnvironmentState::Cluttered
    } else if has_any(&d, &["people walking", "changing"]) {
        EnvironmentState::Changing
    } else if d.contains("clear") {
        EnvironmentState::Clear
    } else {
        EnvironmentState::Unknown
    };
    let task_progress = if d.contains("fail") {
        TaskProgress::Failed
    } else if d.contains("interrupt") {
        TaskProgress::Interrupted
    } else if has_any(&d, &["door fully open", "door is open", "entered the room"]) {
        TaskProgress::Complete
    } else if has_any(&d, &["door opening", "grasp"]) {
        TaskProgress::NearlyComplete
    } else if user_state == UserState::Unknown && d.contains("not started") {
        TaskProgress::NotStarted
    } else {
        TaskProgress::InProgress
    };
    let safety_concerns = has_any(&d, &["hazard", "collision", "unsafe", "trip", "fall"]);
    let user_difficulties = matches!(
        user_state,
        UserState::Searching | UserState::Hesitant | UserState::Confused | UserState::Stuck | UserState::Retreating
    ) || has_any(&d, &["too far", "far from", "far away", "struggl"]);
    FrameState {
        timestamp_sec: p.timestamp_sec,
        user_state,
        robot_state,
        connection_state,
        environment_state,
        task_progress,
        safety_concerns,
        user_difficulties,
        frame_description: raw,
    }
}

/// Doorway failure modes: detection keywords, the issue as reported, the
/// diagnosed cause and the correction given to the user.
struct FailureMode {
    keywords: &'static [&'static str],
    issue: &'static str,
    cause: &'static str,
    mistake: &'static str,
    steps: &'static str,
    actionable: &'static str,
}

// a static, not a const: modes are compared by address
static FAILURE_MODES: [FailureMode; 5] = [
    FailureMode {
        keywords: &["wrong region", "wrong place", "wrong spot"],
        issue: "searched the wrong region for the handle",
        cause: "search strategy: wrong region",
        mistake: "You searched for the handle in the wrong place.",
        steps: "Step 1: reach at waist height. Step 2: slide your hand along the door edge.",
        actionable: "Search at waist height along the door edge",
    },
    FailureMode {
        keywords: &["too far", "far from", "far away"],
        issue: "stood too far from the door",
        cause: "spatial misalignment: positioned too far from the door",
        mistake: "You stopped too far from the door.",
        steps: "Step 1: position yourself closer to the door, about arm's length away. Step 2: then grasp the handle.",
        actionable: "Stand about arm's length from the door before reaching",
    },
    FailureMode {
        keywords: &["wrong direction", "wrong side"],
        issue: "searched in the wrong direction",
        cause: "cue misinterpretation: searched in the wrong direction",
        mistake: "You searched on the wrong side.",
        steps: "Step 1: pause and feel where the robot points. Step 2: search on that side.",
        actionable: "Follow the robot's pointing before searching",
    },
    FailureMode {
        keywords: &["not fully open", "door closing", "door swung back"],
        issue: "did not keep the door fully open",
        cause: "door handling: door not held open for the robot",
        mistake: "The door closed before the robot passed.",
        steps: "Step 1: push the door fully open. Step 2: hold it until the robot is through.",
        actionable: "Hold the door fully open until the robot passes",
    },
    FailureMode {
        keywords: &["right behind the robot", "bumped the robot", "crowding the robot"],
        issue: "stayed right behind the robot while passing",
        cause: "spacing: interfered with the robot's turn",
        mistake: "You crowded the robot in the doorway.",
        steps: "Step 1: let the harness extend. Step 2: step through after the robot turns.",
        actionable: "Give the robot room to turn in the doorway",
    },
];

fn detect_modes(text: &str) -> Vec<&'static FailureMode> {
    FAILURE_MODES.iter().filter(|m| has_any(text, m.keywords)).collect()
}

/// Side mentioned in a description, used to qualify a wrong-direction issue.
fn side_of(text: &str) -> Option<&'static str> {
    match (text.contains("left"), text.contains("right")) {
        (true, false) => Some("to the left"),
        (false, true) => Some("to the right"),
        _ => None,
    }
}

fn hesitation_seconds(timeline: &[FrameState]) -> f64 {
    timeline
        .windows(2)
        .filter(|w| w[0].user_state == UserState::Hesitant)
        .map(|w| w[1].timestamp_sec - w[0].timestamp_sec)
        .sum()
}

fn short_name(field: &str) -> &str {
    match field {
        "user_state" => "user",
        "robot_state" => "robot",
        "connection_state" => "connection",
        "environment_state" => "environment",
        "task_progress" => "task",
        other => other,
    }
}

/// Chronological narrative built from the event list alone.
pub fn narrate_events(events: &[TimelineEvent], first: Option<&FrameState>) -> String {
    let mut parts = Vec::new();
    for ev in events {
        if ev.initial {
            let state = first
                .map(|f| {
                    f.enum_fields()
                        .iter()
                        .map(|(k, v)| format!("{} {v}", short_name(k)))
                        .collect::<Vec<_>>()
                        .join(", ")
                })
                .unwrap_or_else(|| "episode start".into());
            parts.push(format!("At {:.1}s: {state}.", ev.timestamp_sec));
        } else {
            let changes: Vec<String> =
                ev.changes.iter().map(|c| format!("{} {} -> {}", short_name(&c.field), c.from, c.to)).collect();
            parts.push(format!("At {:.1}s: {}.", ev.timestamp_sec, changes.join(", ")));
        }
    }
    parts.join(" ")
}

pub fn timeline_stage(p: &TimelinePayloadIn) -> EpisodeDecision {
    let success = p.stats.terminal_progress == TaskProgress::Complete;
    let time_efficiency = if p.target_time_sec > 0.0 { p.stats.duration_sec / p.target_time_sec } else { 0.0 };
    let navigation_quality = match (success, time_efficiency <= EFFICIENCY_THRESHOLD) {
        (false, _) => Rating::Poor,
        (true, true) => Rating::Good,
        (true, false) => Rating::Fair,
    };
    let loose = p
        .timeline
        .iter()
        .any(|f| matches!(f.connection_state, ConnectionState::Loose | ConnectionState::Disconnected));
    let descriptions: Vec<String> = p.timeline.iter().map(|f| f.frame_description.to_lowercase()).collect();
    let mut issues = Vec::new();
    for mode in &FAILURE_MODES {
        if let Some(d) = descriptions.iter().find(|d| has_any(d, mode.keywords)) {
            let side = if std::ptr::eq(mode, &FAILURE_MODES[2]) { side_of(d) } else { None };
            issues.push(match side {
                Some(s) => format!("{} ({s})", mode.issue),
                None => mode.issue.to_string(),
            });
        }
    }
    let hesitation = hesitation_seconds(&p.timeline);
    if hesitation > 0.0 {
        issues.push(format!("hesitated for {hesitation:.1} s"));
    }
    if !success {
        issues.push(format!("task ended as {}", p.stats.terminal_progress));
    }
    EpisodeDecision {
        success,
        navigation_quality,
        time_efficiency,
        safety_rating: if p.stats.safety_flag_frames == 0 { Rating::Good } else { Rating::Poor },
        following_technique: if loose { Rating::Fair } else { Rating::Good },
        communication_effectiveness: !p.timeline.iter().any(|f| f.user_state == UserState::Confused),
        trust_level: if hesitation > 0.0 { Rating::Fair } else { Rating::Good },
        issues_encountered: issues,
        result_summary: format!(
            "{}: {} took {:.1} s against a {:.1} s target.",
            if success { "Success" } else { "Failure" },
            p.sub_skill,
            p.stats.duration_sec,
            p.target_time_sec
        ),
        timeline_summary: narrate_events(&p.stats.events, p.timeline.first()),
    }
}

fn to_assessment(r: Rating) -> Assessment {
    match r {
        Rating::Excellent => Assessment::Excellent,
        Rating::Good => Assessment::Good,
        Rating::Fair => Assessment::NeedsImprovement,
        Rating::Poor | Rating::VeryPoor => Assessment::Poor,
    }
}

pub fn coach_stage(p: &CoachPayloadIn) -> CoachingAction {
    let d = &p.summary.decision;
    let feedback = p.user_feedback.as_deref().map(str::trim).filter(|f| !f.is_empty());
    let text = format!("{} {}", d.issues_encountered.join("; "), feedback.unwrap_or("")).to_lowercase();
    let modes = detect_modes(&text);
    let hesitated = d.issues_encountered.iter().any(|i| i.contains("hesitated"));
    let spacing = modes.iter().any(|m| std::ptr::eq(*m, &FAILURE_MODES[1]) || std::ptr::eq(*m, &FAILURE_MODES[4]));

    let mut strengths = Vec::new();
    if d.success {
        strengths.push(format!("completed the {}", p.sub_skill));
    }
    if matches!(d.following_technique, Rating::Excellent | Rating::Good) {
        strengths.push("kept a steady hold of the harness".to_string());
    }
    let mut areas: Vec<String> = d.issues_encountered.iter().filter(|i| !i.starts_with("task ended")).cloned().collect();
    for m in &modes {
        if !areas.iter().any(|a| a.starts_with(m.issue)) {
            areas.push(m.issue.to_string());
        }
    }
    let safety_notes = if d.safety_rating == Rating::Good {
        Vec::new()
    } else {
        vec![format!("safety concerns flagged in {} frame(s)", p.summary.stats.safety_flag_frames)]
    };
    let communication_feedback = if d.communication_effectiveness {
        Vec::new()
    } else {
        vec!["some robot cues were misread".to_string()]
    };

    let result_summary = match modes.first() {
        Some(m) => format!("Diagnosis: {}.", m.cause),
        None if d.success => format!("No major errors; {} completed.", p.sub_skill),
        None => "Task not completed; the timeline does not show a clear cause.".to_string(),
    };
    let mut instruction = match modes.first() {
        Some(m) => format!("{} {}", m.mistake, m.steps),
        None if d.success && !hesitated => "Well done. Keep the same approach next time.".to_string(),
        None => format!("Step 1: repeat the {} slowly. Step 2: follow the robot's cue to the door.", p.sub_skill),
    };
    if feedback.is_some() {
        instruction.push_str(" Thanks for your comment; the robot setup will be adjusted.");
    }
    let mut user_actionables: Vec<String> = modes.iter().map(|m| m.actionable.to_string()).collect();
    if hesitated {
        user_actionables.push("Move to the door without pausing once the robot stops".to_string());
    }
    if user_actionables.is_empty() {
        user_actionables.push(format!("Repeat the {} with the same technique", p.sub_skill));
    }

    CoachingAction {
        technique_assessment: TechniqueAssessment {
            following_technique: to_assessment(d.following_technique),
            distance_maintenance: if spacing { Assessment::NeedsImprovement } else { Assessment::Good },
            cue_response: if hesitated || !d.communication_effectiveness {
                Assessment::NeedsImprovement
            } else {
                Assessment::Good
            },
            trust_level: to_assessment(d.trust_level),
        },
        specific_feedback: SpecificFeedback {
            strengths,
            areas_for_improvement: areas,
            safety_notes,
            communication_feedback,
        },
        coaching_recommendations: CoachingRecommendations {
            immediate_practice: modes.iter().map(|m| m.actionable.to_string()).collect(),
            technique_tips: modes.iter().map(|m| m.steps.to_string()).collect(),
            communication_tips: if hesitated {
                vec!["Treat the robot's stop as the cue to reach for the door".to_string()]
            } else {
                Vec::new()
            },
            safety_tips: if d.safety_rating == Rating::Good {
                Vec::new()
            } else {
                vec!["Stop and wait for the robot when unsure".to_string()]
            },
        },
        result_summary,
        terminal_instruction_to_user: instruction,
        user_actionables,
    }
}

pub fn param_stage(p: &ParamPayloadIn) -> RobotAdjustment {
    let a = &p.coaching_action;
    let text = format!(
        "{} {} {} {}",
        a.result_summary,
        a.terminal_instruction_to_user,
        a.specific_feedback.areas_for_improvement.join("; "),
        p.user_feedback.as_deref().unwrap_or("")
    )
    .to_lowercase();
    let far = has_any(&text, &["too far", "closer"]);
    let near = has_any(&text, &["too close", "farther"]);
    let wrong_way = has_any(&text, &["wrong direction", "wrong side"]);
    let (left, right) = (text.contains("to the left"), text.contains("to the right"));
    if (far && near) || (wrong_way && left && right) {
        return RobotAdjustment::maintain("Contradictory cues; keeping the current configuration.");
    }
    let distance = match (far, near) {
        (true, _) => DistanceAdjustment::Closer,
        (_, true) => DistanceAdjustment::Farther,
        _ => DistanceAdjustment::Maintain,
    };
    // The user searched on one side, so the robot should point to the other.
    let pointing = match (wrong_way, left, right) {
        (true, true, false) => PointingAdjustment::MoreRight,
        (true, false, true) => PointingAdjustment::MoreLeft,
        _ => PointingAdjustment::Maintain,
    };
    let mut reasons = Vec::new();
    match distance {
        DistanceAdjustment::Closer => reasons.push("user stopped too far from the door, so stop the robot closer"),
        DistanceAdjustment::Farther => reasons.push("user was too close to the door, so stop the robot farther"),
        DistanceAdjustment::Maintain => {}
    }
    match pointing {
        PointingAdjustment::MoreLeft | PointingAdjustment::MoreRight => {
            reasons.push("user searched on the wrong side, so shift the pointing direction")
        }
        PointingAdjustment::Maintain => {}
    }
    let reasoning = if reasons.is_empty() {
        "No spatial issue diagnosed; keeping the current configuration.".to_string()
    } else {
        let mut r = reasons.join("; ");
        r[..1].make_ascii_uppercase();
        r + "."
    };
    RobotAdjustment { distance_to_door_adjustment: distance, pointing_direction_adjustment: pointing, reasoning }
}
