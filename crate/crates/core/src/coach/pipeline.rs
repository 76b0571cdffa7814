//! Post-episode coaching pipeline: frames → timeline → coaching → robot.
//!
//! Every stage asks the backend for one schema object. A response that
//! fails validation is regenerated exactly once; a second failure puts the
//! stage's conservative fallback in its place, so a misbehaving backend can
//! degrade the feedback but never abort the episode. Transport failures do
//! abort it: no partial feedback is produced.

use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{Backend, BackendRequest, Stage};
use super::robot::{apply_adjustment, RobotConfigState};
use super::schema::{validate_and_repair, Validation};
use super::stub::narrate_events;
use super::types::*;
use crate::error::{Error, Result};

/// Regenerations requested after an invalid response.
pub const MAX_REGENERATIONS: u32 = 1;
/// Frame spacing the capture side is expected to use.
pub const NOMINAL_FRAME_SPACING_SEC: f64 = 0.5;

/// A stage result together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Staged<T> {
    pub value: T,
    pub fallback: bool,
    pub calls: u32,
    pub repairs: Vec<String>,
}

struct Raw {
    value: Option<Value>,
    calls: u32,
    repairs: Vec<String>,
}

fn call_stage<B: Backend + ?Sized>(backend: &B, stage: Stage, payload: Value) -> Result<Raw> {
    let mut request = BackendRequest::new(stage, payload);
    for attempt in 0..=MAX_REGENERATIONS {
        request.attempt = attempt;
        let text = backend.complete(&request)?;
        match validate_and_repair(&text, stage.schema()) {
            Validation::Valid(v) => return Ok(Raw { value: Some(v), calls: attempt + 1, repairs: Vec::new() }),
            Validation::Repaired { value, repairs } => {
                log::debug!("{stage} response repaired: {}", repairs.join("; "));
                return Ok(Raw { value: Some(value), calls: attempt + 1, repairs });
            }
            Validation::Invalid(reason) => {
                log::warn!("{stage} response rejected (attempt {attempt}): {reason}");
                request.rejection = Some(reason);
            }
        }
    }
    Ok(Raw { value: None, calls: MAX_REGENERATIONS + 1, repairs: Vec::new() })
}

fn typed<T: DeserializeOwned>(raw: Raw, fallback: impl FnOnce() -> T) -> Staged<T> {
    match raw.value.map(serde_json::from_value::<T>) {
        Some(Ok(value)) => Staged { value, fallback: false, calls: raw.calls, repairs: raw.repairs },
        _ => Staged { value: fallback(), fallback: true, calls: raw.calls, repairs: raw.repairs },
    }
}

fn check_frames(frames: &[FrameObservation]) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::Input("episode has no frames".into()));
    }
    let mut prev: Option<f64> = None;
    for (i, f) in frames.iter().enumerate() {
        if !(f.timestamp_sec.is_finite() && f.timestamp_sec >= 0.0) {
            return Err(Error::Input(format!("frames[{i}].timestamp_sec: must be a finite number >= 0")));
        }
        if prev.is_some_and(|p| f.timestamp_sec <= p) {
            return Err(Error::Input(format!("frames[{i}].timestamp_sec: timestamps must be strictly increasing")));
        }
        prev = Some(f.timestamp_sec);
    }
    Ok(())
}

/// Every index where an enum field changes value, preceded by the initial
/// event of the first frame.
pub fn timeline_events(states: &[FrameState]) -> Vec<TimelineEvent> {
    let Some(first) = states.first() else {
        return Vec::new();
    };
    let mut events = vec![TimelineEvent { timestamp_sec: first.timestamp_sec, initial: true, changes: Vec::new() }];
    for w in states.windows(2) {
        let changes: Vec<FieldChange> = w[0]
            .enum_fields()
            .iter()
            .zip(w[1].enum_fields())
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| FieldChange { field: a.0.to_string(), from: a.1.to_string(), to: b.1.to_string() })
            .collect();
        if !changes.is_empty() {
            events.push(TimelineEvent { timestamp_sec: w[1].timestamp_sec, initial: false, changes });
        }
    }
    events
}

/// Statistics computed from the frame states alone.
pub fn episode_stats(states: &[FrameState]) -> Result<EpisodeStats> {
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return Err(Error::Input("timeline has no frame states".into()));
    };
    Ok(EpisodeStats {
        duration_sec: last.timestamp_sec - first.timestamp_sec,
        terminal_progress: last.task_progress,
        safety_flag_frames: states.iter().filter(|s| s.safety_concerns).count(),
        difficulty_frames: states.iter().filter(|s| s.user_difficulties).count(),
        events: timeline_events(states),
    })
}

pub fn fallback_decision(stats: &EpisodeStats, states: &[FrameState]) -> EpisodeDecision {
    EpisodeDecision {
        success: false,
        navigation_quality: Rating::Fair,
        time_efficiency: 0.0,
        safety_rating: Rating::Fair,
        following_technique: Rating::Fair,
        communication_effectiveness: false,
        trust_level: Rating::Fair,
        issues_encountered: Vec::new(),
        result_summary: "Fallback summary: the episode judgment could not be validated.".into(),
        timeline_summary: narrate_events(&stats.events, states.first()),
    }
}

pub fn fallback_coaching(sub_skill: &str) -> CoachingAction {
    let n = Assessment::NeedsImprovement;
    CoachingAction {
        technique_assessment: TechniqueAssessment {
            following_technique: n,
            distance_maintenance: n,
            cue_response: n,
            trust_level: n,
        },
        specific_feedback: SpecificFeedback::default(),
        coaching_recommendations: CoachingRecommendations {
            immediate_practice: vec![format!("repeat the {sub_skill}")],
            ..Default::default()
        },
        result_summary: "Fallback coaching: no validated diagnosis was available.".into(),
        terminal_instruction_to_user: format!("Repeat the {sub_skill}; focus on positioning."),
        user_actionables: vec![format!("Repeat the {sub_skill}"), "Focus on positioning".into()],
    }
}

pub fn fallback_adjustment() -> RobotAdjustment {
    RobotAdjustment::maintain("fallback")
}

/// Runs the stages against one backend.
#[derive(Debug, Clone)]
pub struct Pipeline<B> {
    backend: B,
}

impl<B: Backend> Pipeline<B> {
    pub fn new(backend: B) -> Self {
        Self { backend }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// One state per frame, in timestamp order. Frames are sent to the
    /// backend concurrently.
    pub fn extract_frame_states(&self, frames: &[FrameObservation], sub_skill: &str) -> Result<Vec<Staged<FrameState>>> {
        check_frames(frames)?;
        let mut out = frames
            .par_iter()
            .map(|f| {
                let (description, image_path) = match &f.payload {
                    FramePayload::Description(d) => (Some(d.as_str()), None),
                    FramePayload::ImagePath(p) => (None, Some(p.as_str())),
                };
                let payload = json!({
                    "sub_skill": sub_skill,
                    "timestamp_sec": f.timestamp_sec,
                    "description": description,
                    "image_path": image_path,
                });
                let raw = call_stage(&self.backend, Stage::Frame, payload)?;
                let mut staged = typed(raw, || FrameState::unknown(f.timestamp_sec, f.description()));
                staged.value.timestamp_sec = f.timestamp_sec;
                Ok(staged)
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| a.value.timestamp_sec.total_cmp(&b.value.timestamp_sec));
        Ok(out)
    }

    pub fn summarize_timeline(&self, states: &[FrameState], metadata: &EpisodeMetadata) -> Result<Staged<EpisodeSummary>> {
        let stats = episode_stats(states)?;
        let payload = json!({
            "sub_skill": metadata.sub_skill,
            "target_time_sec": metadata.target_time_sec,
            "stats": stats,
            "timeline": states,
        });
        let raw = call_stage(&self.backend, Stage::Timeline, payload)?;
        let staged = typed(raw, || fallback_decision(&stats, states));
        let mut decision = staged.value;
        // the ratio is recomputed locally; a backend cannot override it
        decision.time_efficiency = if metadata.target_time_sec > 0.0 {
            stats.duration_sec / metadata.target_time_sec
        } else {
            0.0
        };
        Ok(Staged {
            value: EpisodeSummary { decision, stats },
            fallback: staged.fallback,
            calls: staged.calls,
            repairs: staged.repairs,
        })
    }

    pub fn generate_coaching(
        &self,
        summary: &EpisodeSummary,
        user_feedback: Option<&str>,
        sub_skill: &str,
    ) -> Result<Staged<CoachingAction>> {
        let payload = json!({
            "sub_skill": sub_skill,
            "summary": summary,
            "user_feedback": user_feedback,
        });
        let raw = call_stage(&self.backend, Stage::Coach, payload)?;
        Ok(typed(raw, || fallback_coaching(sub_skill)))
    }

    pub fn adapt_robot(&self, action: &CoachingAction, user_feedback: Option<&str>) -> Result<Staged<RobotAdjustment>> {
        let payload = json!({
            "coaching_action": action,
            "user_feedback": user_feedback,
        });
        let raw = call_stage(&self.backend, Stage::Param, payload)?;
        Ok(typed(raw, fallback_adjustment))
    }

    /// Runs all four stages on a finished episode.
    pub fn run(&self, episode: &Episode, robot: RobotConfigState, user_feedback: Option<&str>) -> Result<PipelineOutput> {
        robot.validate()?;
        let meta = &episode.metadata;
        let feedback = user_feedback.or(episode.user_feedback.as_deref());

        let t = Instant::now();
        let frames = self.extract_frame_states(&episode.frames, &meta.sub_skill)?;
        let frame_sec = t.elapsed().as_secs_f64();
        let states: Vec<FrameState> = frames.iter().map(|s| s.value.clone()).collect();

        let t = Instant::now();
        let summary = self.summarize_timeline(&states, meta)?;
        let timeline_sec = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let coaching = self.generate_coaching(&summary.value, feedback, &meta.sub_skill)?;
        let coach_sec = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let adjustment = self.adapt_robot(&coaching.value, feedback)?;
        let param_sec = t.elapsed().as_secs_f64();

        let frame_fallbacks: Vec<usize> = frames.iter().enumerate().filter(|(_, s)| s.fallback).map(|(i, _)| i).collect();
        let calls = frames.iter().map(|s| s.calls).sum::<u32>() + summary.calls + coaching.calls + adjustment.calls;
        let repairs = frames.iter().map(|s| s.repairs.len()).sum::<usize>()
            + summary.repairs.len()
            + coaching.repairs.len()
            + adjustment.repairs.len();
        Ok(PipelineOutput {
            metadata: OutputMetadata {
                episode_id: meta.episode_id.clone(),
                sub_skill: meta.sub_skill.clone(),
                target_time_sec: meta.target_time_sec,
                frame_count: episode.frames.len(),
                nominal_frame_spacing_sec: NOMINAL_FRAME_SPACING_SEC,
                user_feedback: feedback.map(str::to_string),
            },
            frame_states: states,
            episode_summary: summary.value,
            robot_config_after: apply_adjustment(robot, &adjustment.value),
            coaching_action: coaching.value,
            robot_adjustment: adjustment.value,
            robot_config_before: robot,
            fallback_flags: FallbackFlags {
                frames: frame_fallbacks,
                timeline: summary.fallback,
                coach: coaching.fallback,
                param: adjustment.fallback,
                backend_calls: calls,
                repairs,
            },
            stage_latencies_sec: StageLatencies {
                frame: frame_sec,
                timeline: timeline_sec,
                coach: coach_sec,
                param: param_sec,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputMetadata {
    pub episode_id: String,
    pub sub_skill: String,
    pub target_time_sec: f64,
    pub frame_count: usize,
    pub nominal_frame_spacing_sec: f64,
    pub user_feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackFlags {
    /// Indices of frames whose state is the conservative fallback.
    pub frames: Vec<usize>,
    pub timeline: bool,
    pub coach: bool,
    pub param: bool,
    pub backend_calls: u32,
    pub repairs: usize,
}

impl FallbackFlags {
    pub fn any(&self) -> bool {
        !self.frames.is_empty() || self.timeline || self.coach || self.param
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageLatencies {
    pub frame: f64,
    pub timeline: f64,
    pub coach: f64,
    pub param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub metadata: OutputMetadata,
    pub frame_states: Vec<FrameState>,
    pub episode_summary: EpisodeSummary,
    pub coaching_action: CoachingAction,
    pub robot_adjustment: RobotAdjustment,
    pub robot_config_before: RobotConfigState,
    pub robot_config_after: RobotConfigState,
    pub fallback_flags: FallbackFlags,
    pub stage_latencies_sec: StageLatencies,
}

impl PipelineOutput {
    /// Copy with wall-clock latencies zeroed, for byte comparisons.
    pub fn without_timing(&self) -> Self {
        Self { stage_latencies_sec: StageLatencies::default(), ..self.clone() }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pipeline output serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(t: f64, user: UserState, progress: TaskProgress) -> FrameState {
        FrameState { user_state: user, task_progress: progress, ..FrameState::unknown(t, "") }
    }

    #[test]
    fn events_hand_example() {
        let states: Vec<FrameState> = [0.0, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&t| {
                let u = if t < 2.0 { UserState::Approaching } else { UserState::Hesitant };
                state(t, u, TaskProgress::InProgress)
            })
            .collect();
        let events = timeline_events(&states);
        assert_eq!(events.len(), 2);
        assert!(events[0].initial && events[0].timestamp_sec == 0.0 && events[0].changes.is_empty());
        assert_eq!(events[1].timestamp_sec, 2.0);
        assert_eq!(events[1].changed_fields(), vec!["user_state"]);
        assert_eq!(events[1].changes[0].from, "approaching");
    }

    #[test]
    fn constant_sequence_single_event() {
        let states: Vec<FrameState> =
            (0..6).map(|i| state(i as f64 * 0.5, UserState::Positioned, TaskProgress::InProgress)).collect();
        let events = timeline_events(&states);
        assert_eq!(events.len(), 1);
        assert!(events[0].initial);
    }

    #[test]
    fn stats_are_local() {
        let mut states: Vec<FrameState> =
            (0..=36).map(|i| state(i as f64 * 0.5, UserState::Approaching, TaskProgress::InProgress)).collect();
        states[36].task_progress = TaskProgress::Complete;
        states[3].safety_concerns = true;
        let s = episode_stats(&states).unwrap();
        assert_eq!(s.duration_sec, 18.0);
        assert_eq!(s.terminal_progress, TaskProgress::Complete);
        assert_eq!(s.safety_flag_frames, 1);
        assert!(episode_stats(&[]).is_err());
    }

    #[test]
    fn frame_checks() {
        let f = |t: f64| FrameObservation { timestamp_sec: t, payload: FramePayload::Description(String::new()) };
        assert!(check_frames(&[]).is_err());
        assert!(check_frames(&[f(0.0), f(0.5)]).is_ok());
        let e = check_frames(&[f(0.0), f(1.0), f(1.0)]).unwrap_err();
        assert!(e.to_string().contains("frames[2].timestamp_sec"), "{e}");
    }
}
