//! Closed schemas for backend responses, with field-level repair.
//!
//! A response is accepted when the first JSON object in its text has every
//! required field with the right type. Unrecognized enum strings are
//! replaced by the field's repair value and unknown extra fields are
//! dropped; anything else (missing fields, wrong types, no object at all)
//! makes the response invalid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::types::*;
use crate::error::Error;

/// Responses longer than this are rejected without parsing.
pub const MAX_RESPONSE_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    TerminalInstruction,
    FrameState,
    EpisodeDecision,
    CoachingAction,
    RobotAdjustment,
}

impl SchemaId {
    pub const ALL: [SchemaId; 5] = [
        SchemaId::TerminalInstruction,
        SchemaId::FrameState,
        SchemaId::EpisodeDecision,
        SchemaId::CoachingAction,
        SchemaId::RobotAdjustment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::TerminalInstruction => "terminal_instruction",
            SchemaId::FrameState => "frame_state",
            SchemaId::EpisodeDecision => "episode_decision",
            SchemaId::CoachingAction => "coaching_action",
            SchemaId::RobotAdjustment => "robot_adjustment",
        }
    }

    pub fn fields(self) -> &'static [Field] {
        match self {
            SchemaId::TerminalInstruction => TERMINAL_INSTRUCTION,
            SchemaId::FrameState => FRAME_STATE,
            SchemaId::EpisodeDecision => EPISODE_DECISION,
            SchemaId::CoachingAction => COACHING_ACTION,
            SchemaId::RobotAdjustment => ROBOT_ADJUSTMENT,
        }
    }

    fn description(self) -> &'static str {
        match self {
            SchemaId::TerminalInstruction => "Single terminal instruction for the user after an episode.",
            SchemaId::FrameState => "Observable state of one camera frame.",
            SchemaId::EpisodeDecision => "Outcome judgment and narrative summary of one episode.",
            SchemaId::CoachingAction => "Diagnosis and coaching feedback for the user.",
            SchemaId::RobotAdjustment => "Discrete adjustment of the robot's stopping point and pointing.",
        }
    }

    /// A payload that satisfies the schema as-is.
    pub fn example(self) -> Value {
        match self {
            SchemaId::TerminalInstruction => json!({
                "terminal_instruction_to_user": "You stopped too far from the door. Step 1: move closer. Step 2: reach for the handle."
            }),
            SchemaId::FrameState => json!({
                "timestamp_sec": 5.0,
                "user_state": "searching",
                "robot_state": "stopped",
                "connection_state": "connected",
                "environment_state": "clear",
                "task_progress": "in_progress",
                "safety_concerns": false,
                "user_difficulties": true,
                "frame_description": "user far from the door, hand searching on the wall"
            }),
            SchemaId::EpisodeDecision => json!({
                "success": true,
                "navigation_quality": "fair",
                "time_efficiency": 1.8,
                "safety_rating": "good",
                "following_technique": "good",
                "communication_effectiveness": true,
                "trust_level": "fair",
                "issues_encountered": ["User stands too far away from the door"],
                "result_summary": "Door opened after a long search for the handle.",
                "timeline_summary": "At 0.0s: user approaching. At 5.0s: user searching. At 12.0s: user grasped the handle."
            }),
            SchemaId::CoachingAction => json!({
                "technique_assessment": {
                    "following_technique": "good",
                    "distance_maintenance": "needs_improvement",
                    "cue_response": "good",
                    "trust_level": "good"
                },
                "specific_feedback": {
                    "strengths": ["kept hold of the harness"],
                    "areas_for_improvement": ["stopped too far from the door"],
                    "safety_notes": [],
                    "communication_feedback": []
                },
                "coaching_recommendations": {
                    "immediate_practice": ["approach the door to arm's length"],
                    "technique_tips": [],
                    "communication_tips": [],
                    "safety_tips": []
                },
                "result_summary": "Spatial misalignment: positioned too far from the door.",
                "terminal_instruction_to_user": "Step 1: move closer to the door. Step 2: grasp the handle.",
                "user_actionables": ["Stand about arm's length from the door"]
            }),
            SchemaId::RobotAdjustment => json!({
                "distance_to_door_adjustment": "closer",
                "pointing_direction_adjustment": "maintain",
                "reasoning": "User stopped too far from the door; stop the robot closer."
            }),
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        SchemaId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown schema {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Bool,
    /// Finite number, optionally bounded below.
    Number { min: Option<f64> },
    Text { non_empty: bool },
    TextList { min_items: usize },
    Enum { values: &'static [&'static str], repair: &'static str },
    Object(&'static [Field]),
}

#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub name: &'static str,
    pub kind: Kind,
    pub description: &'static str,
}

const fn field(name: &'static str, kind: Kind, description: &'static str) -> Field {
    Field { name, kind, description }
}

const TEXT: Kind = Kind::Text { non_empty: false };
const LIST: Kind = Kind::TextList { min_items: 0 };

// Repair strings are checked against the enum definitions in the tests.
const USER_STATE: Kind = Kind::Enum { values: UserState::VALUES, repair: "unknown" };
const ROBOT_STATE: Kind = Kind::Enum { values: RobotState::VALUES, repair: "unknown" };
const CONNECTION_STATE: Kind = Kind::Enum { values: ConnectionState::VALUES, repair: "unknown" };
const ENVIRONMENT_STATE: Kind = Kind::Enum { values: EnvironmentState::VALUES, repair: "unknown" };
const TASK_PROGRESS: Kind = Kind::Enum { values: TaskProgress::VALUES, repair: "in_progress" };
const RATING: Kind = Kind::Enum { values: Rating::VALUES, repair: "fair" };
const ASSESSMENT: Kind = Kind::Enum { values: Assessment::VALUES, repair: "needs_improvement" };
const DISTANCE: Kind = Kind::Enum { values: DistanceAdjustment::VALUES, repair: "maintain" };
const POINTING: Kind = Kind::Enum { values: PointingAdjustment::VALUES, repair: "maintain" };

const INSTRUCTION_DOC: &str = "Terminal instruction: point out mistakes, then at most two short relative steps; answer user feedback briefly if any.";

static TERMINAL_INSTRUCTION: &[Field] = &[field(
    "terminal_instruction_to_user",
    Kind::Text { non_empty: true },
    INSTRUCTION_DOC,
)];

static FRAME_STATE: &[Field] = &[
    field("timestamp_sec", Kind::Number { min: Some(0.0) }, "Frame time in seconds from episode start."),
    field("user_state", USER_STATE, "Physical state of the user."),
    field("robot_state", ROBOT_STATE, "Behavior of the robot."),
    field("connection_state", CONNECTION_STATE, "Status of the leash or harness between user and robot."),
    field("environment_state", ENVIRONMENT_STATE, "Condition of the surroundings."),
    field("task_progress", TASK_PROGRESS, "Progress of the sub-skill."),
    field("safety_concerns", Kind::Bool, "Whether any safety issue is visible."),
    field("user_difficulties", Kind::Bool, "Whether the user appears to struggle."),
    field("frame_description", TEXT, "Brief factual description of the frame."),
];

static EPISODE_DECISION: &[Field] = &[
    field("success", Kind::Bool, "Whether the sub-skill was completed."),
    field("navigation_quality", RATING, "Overall quality."),
    field("time_efficiency", Kind::Number { min: Some(0.0) }, "Actual time divided by target time."),
    field("safety_rating", RATING, "Safety of the episode."),
    field("following_technique", RATING, "How well the user followed the robot."),
    field("communication_effectiveness", Kind::Bool, "Whether user-robot communication was clear."),
    field("trust_level", RATING, "Apparent trust in the robot."),
    field("issues_encountered", LIST, "Problems observed."),
    field("result_summary", TEXT, "Brief outcome description."),
    field("timeline_summary", TEXT, "Chronological account of key moments with timestamps."),
];

static TECHNIQUE_ASSESSMENT: &[Field] = &[
    field("following_technique", ASSESSMENT, ""),
    field("distance_maintenance", ASSESSMENT, ""),
    field("cue_response", ASSESSMENT, ""),
    field("trust_level", ASSESSMENT, ""),
];

static SPECIFIC_FEEDBACK: &[Field] = &[
    field("strengths", LIST, "Things done well."),
    field("areas_for_improvement", LIST, "Technique improvements."),
    field("safety_notes", LIST, "Safety observations."),
    field("communication_feedback", LIST, "Feedback on communication with the robot."),
];

static COACHING_RECOMMENDATIONS: &[Field] = &[
    field("immediate_practice", LIST, "Skills to practice next."),
    field("technique_tips", LIST, ""),
    field("communication_tips", LIST, ""),
    field("safety_tips", LIST, ""),
];

static COACHING_ACTION: &[Field] = &[
    field("technique_assessment", Kind::Object(TECHNIQUE_ASSESSMENT), "Four-level technique ratings."),
    field("specific_feedback", Kind::Object(SPECIFIC_FEEDBACK), ""),
    field("coaching_recommendations", Kind::Object(COACHING_RECOMMENDATIONS), ""),
    field("result_summary", TEXT, "Coaching summary including the diagnosed error cause."),
    field("terminal_instruction_to_user", Kind::Text { non_empty: true }, INSTRUCTION_DOC),
    field("user_actionables", Kind::TextList { min_items: 1 }, "Concrete suggestions for the next attempt."),
];

static ROBOT_ADJUSTMENT: &[Field] = &[
    field("distance_to_door_adjustment", DISTANCE, "Change of the robot's stopping distance to the door."),
    field("pointing_direction_adjustment", POINTING, "Horizontal shift of the robot's pointing direction."),
    field("reasoning", TEXT, "Why the adjustment helps."),
];

/// Outcome of checking one backend response.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Valid(Value),
    Repaired { value: Value, repairs: Vec<String> },
    Invalid(String),
}

impl Validation {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Validation::Valid(v) | Validation::Repaired { value: v, .. } => Some(v),
            Validation::Invalid(_) => None,
        }
    }

    pub fn into_value(self) -> Option<Value> {
        match self {
            Validation::Valid(v) | Validation::Repaired { value: v, .. } => Some(v),
            Validation::Invalid(_) => None,
        }
    }
}

/// Opening braces tried before giving up; bounds the work on adversarial
/// input such as thousands of nested, never-closed objects.
pub const MAX_OBJECT_CANDIDATES: usize = 64;

/// First JSON object embedded in `raw`, skipping any surrounding prose or
/// code fences.
pub fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    for (i, _) in raw.match_indices('{').take(MAX_OBJECT_CANDIDATES) {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

/// Parses `raw` and checks it against the schema `id`.
pub fn validate_and_repair(raw: &str, id: SchemaId) -> Validation {
    if raw.len() > MAX_RESPONSE_BYTES {
        return Validation::Invalid(format!("response of {} bytes exceeds the limit", raw.len()));
    }
    let Some(map) = extract_object(raw) else {
        return Validation::Invalid("no JSON object found".into());
    };
    validate_object(&map, id)
}

/// Checks an already parsed object.
pub fn validate_value(value: &Value, id: SchemaId) -> Validation {
    match value {
        Value::Object(map) => validate_object(map, id),
        other => Validation::Invalid(format!("expected an object, got {}", type_name(other))),
    }
}

fn validate_object(map: &Map<String, Value>, id: SchemaId) -> Validation {
    let mut repairs = Vec::new();
    match check_object(map, id.fields(), "", &mut repairs) {
        Ok(out) if repairs.is_empty() => Validation::Valid(Value::Object(out)),
        Ok(out) => Validation::Repaired { value: Value::Object(out), repairs },
        Err(e) => Validation::Invalid(e),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn check_object(
    map: &Map<String, Value>,
    fields: &[Field],
    prefix: &str,
    repairs: &mut Vec<String>,
) -> Result<Map<String, Value>, String> {
    let mut out = Map::new();
    for f in fields {
        let path = format!("{prefix}{}", f.name);
        let value = match map.get(f.name) {
            None | Some(Value::Null) => return Err(format!("{path}: missing")),
            Some(v) => v,
        };
        out.insert(f.name.to_string(), check_field(value, f.kind, &path, repairs)?);
    }
    for key in map.keys() {
        if !fields.iter().any(|f| f.name == key) {
            repairs.push(format!("{prefix}{key}: extra field dropped"));
        }
    }
    Ok(out)
}

fn check_field(value: &Value, kind: Kind, path: &str, repairs: &mut Vec<String>) -> Result<Value, String> {
    let wrong = |expected: &str| format!("{path}: expected {expected}, got {}", type_name(value));
    match kind {
        Kind::Bool => match value {
            Value::Bool(_) => Ok(value.clone()),
            Value::String(s) if matches!(s.trim(), "true" | "false") => {
                repairs.push(format!("{path}: boolean given as string"));
                Ok(Value::Bool(s.trim() == "true"))
            }
            _ => Err(wrong("boolean")),
        },
        Kind::Number { min } => {
            let x = match value {
                Value::Number(n) => n.as_f64().ok_or_else(|| wrong("number"))?,
                Value::String(s) => {
                    let x: f64 = s.trim().parse().map_err(|_| wrong("number"))?;
                    repairs.push(format!("{path}: number given as string"));
                    x
                }
                _ => return Err(wrong("number")),
            };
            if !x.is_finite() {
                return Err(format!("{path}: not finite"));
            }
            if let Some(lo) = min {
                if x < lo {
                    return Err(format!("{path}: {x} is below {lo}"));
                }
            }
            Ok(json!(x))
        }
        Kind::Text { non_empty } => match value {
            Value::String(s) if non_empty && s.trim().is_empty() => Err(format!("{path}: must not be empty")),
            Value::String(_) => Ok(value.clone()),
            _ => Err(wrong("string")),
        },
        Kind::TextList { min_items } => {
            let items = match value {
                Value::Array(items) => items.clone(),
                Value::String(s) => {
                    repairs.push(format!("{path}: single string wrapped in a list"));
                    vec![Value::String(s.clone())]
                }
                _ => return Err(wrong("list of strings")),
            };
            if let Some(i) = items.iter().position(|v| !v.is_string()) {
                return Err(format!("{path}[{i}]: expected string, got {}", type_name(&items[i])));
            }
            if items.len() < min_items {
                return Err(format!("{path}: needs at least {min_items} item(s)"));
            }
            Ok(Value::Array(items))
        }
        Kind::Enum { values, repair } => {
            let Value::String(s) = value else {
                return Err(wrong("string"));
            };
            if values.contains(&s.as_str()) {
                return Ok(value.clone());
            }
            let normalized = s.trim().to_lowercase().replace([' ', '-'], "_");
            if let Some(v) = values.iter().find(|v| **v == normalized) {
                repairs.push(format!("{path}: {s:?} normalized to {v:?}"));
                return Ok(Value::String(v.to_string()));
            }
            repairs.push(format!("{path}: {s:?} is not allowed, replaced by {repair:?}"));
            Ok(Value::String(repair.to_string()))
        }
        Kind::Object(fields) => match value {
            Value::Object(m) => Ok(Value::Object(check_object(m, fields, &format!("{path}."), repairs)?)),
            _ => Err(wrong("object")),
        },
    }
}

fn kind_schema(kind: Kind, description: &str) -> Value {
    let mut s = match kind {
        Kind::Bool => json!({ "type": "boolean" }),
        Kind::Number { min: Some(lo) } => json!({ "type": "number", "minimum": lo }),
        Kind::Number { min: None } => json!({ "type": "number" }),
        Kind::Text { non_empty: true } => json!({ "type": "string", "minLength": 1 }),
        Kind::Text { non_empty: false } => json!({ "type": "string" }),
        Kind::TextList { min_items } => json!({ "type": "array", "items": { "type": "string" }, "minItems": min_items }),
        Kind::Enum { values, .. } => json!({ "type": "string", "enum": values }),
        Kind::Object(fields) => object_schema(fields),
    };
    if !description.is_empty() {
        s["description"] = json!(description);
    }
    s
}

fn object_schema(fields: &[Field]) -> Value {
    let properties: Map<String, Value> =
        fields.iter().map(|f| (f.name.to_string(), kind_schema(f.kind, f.description))).collect();
    json!({
        "type": "object",
        "properties": properties,
        "required": fields.iter().map(|f| f.name).collect::<Vec<_>>(),
        "additionalProperties": false,
    })
}

/// JSON Schema (draft 2020-12) document for `id`, with its example.
pub fn json_schema(id: SchemaId) -> Value {
    let mut s = object_schema(id.fields());
    s["$schema"] = json!("https://json-schema.org/draft/2020-12/schema");
    s["$id"] = json!(format!("{}.schema.json", id.as_str()));
    s["title"] = json!(id.as_str());
    s["description"] = json!(id.description());
    s["examples"] = json!([id.example()]);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repair_values_match_enum_defaults() {
        let pairs = [
            (USER_STATE, UserState::REPAIR.as_str()),
            (ROBOT_STATE, RobotState::REPAIR.as_str()),
            (CONNECTION_STATE, ConnectionState::REPAIR.as_str()),
            (ENVIRONMENT_STATE, EnvironmentState::REPAIR.as_str()),
            (TASK_PROGRESS, TaskProgress::REPAIR.as_str()),
            (RATING, Rating::REPAIR.as_str()),
            (ASSESSMENT, Assessment::REPAIR.as_str()),
            (DISTANCE, DistanceAdjustment::REPAIR.as_str()),
            (POINTING, PointingAdjustment::REPAIR.as_str()),
        ];
        for (kind, expected) in pairs {
            let Kind::Enum { values, repair } = kind else { unreachable!() };
            assert_eq!(repair, expected);
            assert!(values.contains(&repair));
        }
    }

    #[test]
    fn examples_are_valid_and_typed() {
        for id in SchemaId::ALL {
            let v = validate_value(&id.example(), id);
            assert!(matches!(v, Validation::Valid(_)), "{id}: {v:?}");
        }
        let ex = |id: SchemaId| id.example();
        serde_json::from_value::<TerminalInstruction>(ex(SchemaId::TerminalInstruction)).unwrap();
        serde_json::from_value::<FrameState>(ex(SchemaId::FrameState)).unwrap();
        serde_json::from_value::<EpisodeDecision>(ex(SchemaId::EpisodeDecision)).unwrap();
        serde_json::from_value::<CoachingAction>(ex(SchemaId::CoachingAction)).unwrap();
        serde_json::from_value::<RobotAdjustment>(ex(SchemaId::RobotAdjustment)).unwrap();
    }

    #[test]
    fn valid_payload_unchanged() {
        let raw = serde_json::to_string(&SchemaId::FrameState.example()).unwrap();
        assert_eq!(validate_and_repair(&raw, SchemaId::FrameState), Validation::Valid(SchemaId::FrameState.example()));
    }

    #[test]
    fn enum_typo_replaced_by_unknown() {
        let mut v = SchemaId::FrameState.example();
        v["user_state"] = json!("aproaching");
        let Validation::Repaired { value, repairs } = validate_value(&v, SchemaId::FrameState) else {
            panic!("expected a repair");
        };
        assert_eq!(value["user_state"], "unknown");
        assert_eq!(repairs.len(), 1);
        let mut expected = SchemaId::FrameState.example();
        expected["user_state"] = json!("unknown");
        assert_eq!(value, expected);
    }

    #[test]
    fn extra_fields_dropped_and_case_normalized() {
        let mut v = SchemaId::RobotAdjustment.example();
        v["confidence"] = json!(0.9);
        v["distance_to_door_adjustment"] = json!("Closer");
        let Validation::Repaired { value, repairs } = validate_value(&v, SchemaId::RobotAdjustment) else {
            panic!("expected a repair");
        };
        assert_eq!(value, SchemaId::RobotAdjustment.example());
        assert_eq!(repairs.len(), 2);
    }

    #[test]
    fn missing_and_mistyped_fields_are_invalid() {
        let mut v = SchemaId::FrameState.example();
        v.as_object_mut().unwrap().remove("safety_concerns");
        assert_eq!(validate_value(&v, SchemaId::FrameState), Validation::Invalid("safety_concerns: missing".into()));
        let mut v = SchemaId::CoachingAction.example();
        v["technique_assessment"]["cue_response"] = json!(3);
        let Validation::Invalid(msg) = validate_value(&v, SchemaId::CoachingAction) else { panic!() };
        assert!(msg.starts_with("technique_assessment.cue_response"), "{msg}");
        let mut v = SchemaId::CoachingAction.example();
        v["user_actionables"] = json!([]);
        assert!(matches!(validate_value(&v, SchemaId::CoachingAction), Validation::Invalid(_)));
        let mut v = SchemaId::CoachingAction.example();
        v["terminal_instruction_to_user"] = json!("  ");
        assert!(matches!(validate_value(&v, SchemaId::CoachingAction), Validation::Invalid(_)));
    }

    #[test]
    fn object_found_inside_prose() {
        let body = serde_json::to_string_pretty(&SchemaId::RobotAdjustment.example()).unwrap();
        let raw = format!("Sure! Here is the result:\n```json\n{body}\n```\nLet me know {{if}} needed.");
        assert_eq!(validate_and_repair(&raw, SchemaId::RobotAdjustment), Validation::Valid(SchemaId::RobotAdjustment.example()));
        assert!(matches!(validate_and_repair("no braces", SchemaId::RobotAdjustment), Validation::Invalid(_)));
        assert!(matches!(validate_and_repair("{\"a\": ", SchemaId::RobotAdjustment), Validation::Invalid(_)));
    }

    #[test]
    fn validation_is_idempotent() {
        let mut v = SchemaId::EpisodeDecision.example();
        v["trust_level"] = json!("medium");
        v["time_efficiency"] = json!("2.5");
        v["issues_encountered"] = json!("one issue");
        let first = validate_value(&v, SchemaId::EpisodeDecision).into_value().unwrap();
        assert_eq!(validate_value(&first, SchemaId::EpisodeDecision), Validation::Valid(first.clone()));
        assert_eq!(first["time_efficiency"], json!(2.5));
        assert_eq!(first["issues_encountered"], json!(["one issue"]));
    }

    #[test]
    fn exported_schema_shape() {
        let s = json_schema(SchemaId::RobotAdjustment);
        assert_eq!(s["required"].as_array().unwrap().len(), 3);
        assert_eq!(s["additionalProperties"], json!(false));
        assert_eq!(s["properties"]["distance_to_door_adjustment"]["enum"], json!(["closer", "farther", "maintain"]));
        let s = json_schema(SchemaId::CoachingAction);
        assert_eq!(s["properties"]["technique_assessment"]["type"], "object");
        assert_eq!(s["properties"]["user_actionables"]["minItems"], 1);
    }
}
