//! Deterministic response corruptions and a fault-injecting backend, used
//! to exercise validation, regeneration and fallbacks.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::{Map, Value};

use super::backend::{Backend, BackendRequest, Stage};
use crate::error::Result;

/// Names of the corruption patterns, indexed as accepted by [`corrupt`].
pub const PATTERNS: [&str; 50] = [
    "empty",
    "whitespace",
    "prose_only",
    "truncated_half",
    "truncated_last_brace",
    "json_null",
    "array_wrapped",
    "empty_array",
    "bare_number",
    "quoted_object",
    "fenced_with_prose",
    "single_quotes",
    "trailing_comma",
    "oversized",
    "deep_nesting",
    "html_error_page",
    "nan_value",
    "drop_first_field",
    "drop_last_field",
    "empty_object",
    "null_first_field",
    "null_all_fields",
    "string_suffix_typo",
    "uppercase_strings",
    "bool_as_word",
    "bool_as_string",
    "number_as_word",
    "number_as_string",
    "string_as_number",
    "string_as_bool",
    "array_as_object",
    "object_as_array",
    "array_as_string",
    "nested_nulls",
    "extra_fields",
    "camel_case_keys",
    "wrapped_in_result",
    "byte_order_mark",
    "duplicated_object",
    "broken_then_valid",
    "lone_surrogate",
    "raw_control_char",
    "line_comment",
    "empty_strings",
    "negative_numbers",
    "number_overflow",
    "emptied_lists",
    "nested_field_dropped",
    "padded_keys",
    "binary_garbage",
];

const RAW_MARK: &str = "\u{1}raw\u{1}";

fn map_top(obj: &Map<String, Value>, f: impl Fn(&Value) -> Option<Value>) -> Value {
    Value::Object(obj.iter().map(|(k, v)| (k.clone(), f(v).unwrap_or_else(|| v.clone()))).collect())
}

fn map_deep(v: &Value, f: &dyn Fn(&Value) -> Option<Value>) -> Value {
    if let Some(out) = f(v) {
        return out;
    }
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), map_deep(v, f))).collect()),
        Value::Array(a) => Value::Array(a.iter().map(|v| map_deep(v, f)).collect()),
        other => other.clone(),
    }
}

fn strings(f: impl Fn(&str) -> Value) -> impl Fn(&Value) -> Option<Value> {
    move |v| v.as_str().map(&f)
}

/// Serializes `obj` with the first field's value replaced by a raw token.
fn with_raw_first(obj: &Map<String, Value>, token: &str) -> String {
    let mut m = obj.clone();
    if let Some(k) = m.keys().next().cloned() {
        m.insert(k, Value::String(RAW_MARK.into()));
    }
    let s = Value::Object(m).to_string();
    s.replace(&Value::String(RAW_MARK.into()).to_string(), token)
}

/// Applies corruption pattern `index` (see [`PATTERNS`]) to a response that
/// holds one JSON object. Non-object input is returned with only the
/// text-level patterns applied.
pub fn corrupt(valid: &str, index: usize) -> String {
    let obj = match serde_json::from_str::<Value>(valid) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    let text = Value::Object(obj.clone()).to_string();
    let keys: Vec<String> = obj.keys().cloned().collect();
    let deep = |f: &dyn Fn(&Value) -> Option<Value>| map_deep(&Value::Object(obj.clone()), f).to_string();
    match index {
        0 => String::new(),
        1 => " \n\t ".into(),
        2 => "I'm sorry, I can't produce that analysis right now.".into(),
        3 => text[..text.len() / 2].to_string(),
        4 => text[..text.len().saturating_sub(1)].to_string(),
        5 => "null".into(),
        6 => format!("[{text}]"),
        7 => "[]".into(),
        8 => "42".into(),
        9 => Value::String(text).to_string(),
        10 => format!("Sure! Here is the result:\n```json\n{text}\n```\nLet me know if you need more."),
        11 => text.replace('"', "'"),
        12 => format!("{},}}", &text[..text.len().saturating_sub(1)]),
        13 => format!("{}{}", " ".repeat(2 << 20), text),
        14 => format!("{}{}", "{\"a\":".repeat(10_000), "1"),
        15 => "<html><body><h1>502 Bad Gateway</h1></body></html>".into(),
        16 => with_raw_first(&obj, "NaN"),
        17 => {
            let mut m = obj.clone();
            if let Some(k) = keys.first() {
                m.remove(k);
            }
            Value::Object(m).to_string()
        }
        18 => {
            let mut m = obj.clone();
            if let Some(k) = keys.last() {
                m.remove(k);
            }
            Value::Object(m).to_string()
        }
        19 => "{}".into(),
        20 => {
            let mut m = obj.clone();
            if let Some(k) = keys.first() {
                m.insert(k.clone(), Value::Null);
            }
            Value::Object(m).to_string()
        }
        21 => map_top(&obj, |_| Some(Value::Null)).to_string(),
        22 => deep(&strings(|s| Value::String(format!("{s}x")))),
        23 => deep(&strings(|s| Value::String(s.to_uppercase()))),
        24 => deep(&|v| v.as_bool().map(|_| Value::String("maybe".into()))),
        25 => deep(&|v| v.as_bool().map(|b| Value::String(b.to_string()))),
        26 => deep(&|v| v.as_f64().map(|_| Value::String("fast".into()))),
        27 => deep(&|v| v.as_f64().map(|x| Value::String(x.to_string()))),
        28 => map_top(&obj, |v| v.as_str().map(|_| Value::from(123))).to_string(),
        29 => map_top(&obj, |v| v.as_str().map(|_| Value::Bool(true))).to_string(),
        30 => deep(&|v| v.as_array().map(|a| Value::Object(a.iter().enumerate().map(|(i, x)| (i.to_string(), x.clone())).collect()))),
        31 => map_top(&obj, |v| v.as_object().map(|m| Value::Array(m.values().cloned().collect()))).to_string(),
        32 => deep(&|v| v.as_array().map(|a| Value::String(a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("; ")))),
        33 => map_top(&obj, |v| v.as_object().map(|m| Value::Object(m.keys().map(|k| (k.clone(), Value::Null)).collect())))
            .to_string(),
        34 => {
            let mut m = obj.clone();
            m.insert("confidence".into(), Value::from(0.93));
            m.insert("notes".into(), Value::String("extra commentary".into()));
            Value::Object(m).to_string()
        }
        35 => Value::Object(obj.iter().map(|(k, v)| (camel(k), v.clone())).collect()).to_string(),
        36 => serde_json::json!({ "result": Value::Object(obj.clone()) }).to_string(),
        37 => format!("\u{feff}{text}"),
        38 => format!("{text}\n{text}"),
        39 => format!("{{\"partial\": }}\n{text}"),
        40 => with_raw_first(&obj, "\"\\ud800\""),
        41 => with_raw_first(&obj, "\"line\nbreak\""),
        42 => format!("{{ // model output\n{}", &text[1.min(text.len())..]),
        43 => deep(&strings(|_| Value::String(String::new()))),
        44 => deep(&|v| v.as_f64().map(|_| Value::from(-1.0))),
        45 => with_raw_first(&obj, "1e400"),
        46 => deep(&|v| v.as_array().map(|_| Value::Array(Vec::new()))),
        47 => map_top(&obj, |v| {
            v.as_object().map(|m| {
                let mut m = m.clone();
                if let Some(k) = m.keys().next().cloned() {
                    m.remove(&k);
                }
                Value::Object(m)
            })
        })
        .to_string(),
        48 => Value::Object(obj.iter().map(|(k, v)| (format!(" {k} "), v.clone())).collect()).to_string(),
        _ => "\u{0}\u{1}\u{7f}}{\u{fffd}\u{2}".into(),
    }
}

fn camel(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut upper = false;
    for c in key.chars() {
        if c == '_' {
            upper = true;
        } else if upper {
            out.extend(c.to_uppercase());
            upper = false;
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// Every response is corrupted, so each stage ends in its fallback
    /// unless the corruption happens to be repairable.
    Persistent,
    /// Only the first attempt is corrupted; the regeneration is clean.
    FirstAttempt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultTarget {
    All,
    Stage(Stage),
    /// Frame-stage requests for the frame at this timestamp.
    Frame(f64),
}

/// Wraps a backend and corrupts selected responses.
#[derive(Debug)]
pub struct FaultyBackend<B> {
    inner: B,
    pattern: usize,
    mode: FaultMode,
    target: FaultTarget,
    calls: AtomicUsize,
    corrupted: AtomicUsize,
}

impl<B> FaultyBackend<B> {
    pub fn new(inner: B, pattern: usize, mode: FaultMode, target: FaultTarget) -> Self {
        Self { inner, pattern, mode, target, calls: AtomicUsize::new(0), corrupted: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn corrupted(&self) -> usize {
        self.corrupted.load(Ordering::SeqCst)
    }

    fn targets(&self, request: &BackendRequest) -> bool {
        let attempt_ok = match self.mode {
            FaultMode::Persistent => true,
            FaultMode::FirstAttempt => request.attempt == 0,
        };
        attempt_ok
            && match self.target {
                FaultTarget::All => true,
                FaultTarget::Stage(s) => request.stage == s,
                FaultTarget::Frame(t) => {
                    request.stage == Stage::Frame && request.payload["timestamp_sec"].as_f64() == Some(t)
                }
            }
    }
}

impl<B: Backend> Backend for FaultyBackend<B> {
    fn name(&self) -> &str {
        "faulty"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = self.inner.complete(request)?;
        if self.targets(request) {
            self.corrupted.fetch_add(1, Ordering::SeqCst);
            Ok(corrupt(&text, self.pattern))
        } else {
            Ok(text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coach::schema::{validate_and_repair, SchemaId, Validation};

    #[test]
    fn patterns_are_distinct_and_deterministic() {
        // type-specific patterns only touch schemas that have that type
        let examples: Vec<String> = SchemaId::ALL.iter().map(|id| id.example().to_string()).collect();
        for (i, name) in PATTERNS.iter().enumerate() {
            let mut changes_some = false;
            for valid in &examples {
                let out = corrupt(valid, i);
                assert_eq!(out, corrupt(valid, i), "pattern {name} not deterministic");
                changes_some |= &out != valid;
            }
            assert!(changes_some, "pattern {name} never changes a payload");
        }
        let mut names = PATTERNS.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 50);
    }

    #[test]
    fn validation_never_panics_on_any_pattern() {
        for id in SchemaId::ALL {
            let valid = id.example().to_string();
            for i in 0..PATTERNS.len() {
                let out = validate_and_repair(&corrupt(&valid, i), id);
                if let Some(v) = out.value() {
                    assert!(matches!(crate::coach::schema::validate_value(v, id), Validation::Valid(_)));
                }
            }
        }
    }
}
