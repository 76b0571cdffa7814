//! Python bindings. Structured results cross the boundary as JSON text so
//! the Python side needs nothing beyond the standard `json` module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use coachsim::coach::{
    json_schema, parse_episode, parse_robot_config, validate_and_repair, Pipeline, RobotConfigState, SchemaId,
    StubBackend, Validation, WORKED_EXAMPLE, WORKED_EXAMPLE_GOLDEN,
};
use coachsim::sim::stats;
use coachsim::sim::{run_experiment, ExperimentConfig};
use coachsim::tracer::{proficiency_of_mean, TracerConfig};
use coachsim::Error;

/// Plain-Rust implementations, callable without an interpreter.
pub mod api {
    use super::*;

    /// Runs the policy comparison; `config_json` holds any subset of the
    /// experiment fields. Returns the summary and significance tables.
    pub fn simulate(config_json: Option<&str>, seed: Option<u64>) -> Result<String, Error> {
        let mut cfg: ExperimentConfig = match config_json {
            Some(s) => serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = seed {
            cfg.master_seed = s;
        }
        let report = run_experiment(&cfg)?;
        let out = serde_json::json!({
            "config": cfg,
            "summary": report.summary,
            "significance": report.significance,
            "n_records": report.records.len(),
        });
        Ok(out.to_string())
    }

    /// Runs the coaching pipeline with the deterministic stub backend.
    pub fn coach(
        episode_json: &str,
        robot_config_json: Option<&str>,
        feedback: Option<&str>,
        zero_latencies: bool,
    ) -> Result<String, Error> {
        let episode = parse_episode(episode_json)?;
        let robot = robot_config_json.map(parse_robot_config).transpose()?.unwrap_or_default();
        let out = Pipeline::new(StubBackend).run(&episode, robot, feedback)?;
        let out = if zero_latencies { out.without_timing() } else { out };
        Ok(out.to_json_pretty())
    }

    /// `("valid" | "repaired" | "invalid", object JSON or rejection reason)`.
    pub fn validate(raw: &str, schema_id: &str) -> Result<(String, String), Error> {
        let id: SchemaId = schema_id.parse()?;
        Ok(match validate_and_repair(raw, id) {
            Validation::Valid(v) => ("valid".into(), v.to_string()),
            Validation::Repaired { value, .. } => ("repaired".into(), value.to_string()),
            Validation::Invalid(reason) => ("invalid".into(), reason),
        })
    }

    pub fn schema(schema_id: &str) -> Result<String, Error> {
        let id: SchemaId = schema_id.parse()?;
        Ok(serde_json::to_string_pretty(&json_schema(id)).expect("schema serializes"))
    }

    pub fn proficiency(mean: f64, expert_mean: f64, novice_mean: f64) -> Result<f64, Error> {
        let cfg = TracerConfig::calibrated(expert_mean, novice_mean)?;
        Ok(proficiency_of_mean(mean, &cfg))
    }
}

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Transport(_) | Error::Contract(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Runs the curriculum experiment and returns its tables as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None, seed=None))]
fn simulate(py: Python<'_>, config_json: Option<String>, seed: Option<u64>) -> PyResult<String> {
    py.detach(|| api::simulate(config_json.as_deref(), seed)).map_err(py_err)
}

/// Runs the coaching pipeline on an episode (JSON text) with the stub backend.
#[pyfunction]
#[pyo3(signature = (episode_json, robot_config_json=None, feedback=None, zero_latencies=false))]
fn coach(
    py: Python<'_>,
    episode_json: String,
    robot_config_json: Option<String>,
    feedback: Option<String>,
    zero_latencies: bool,
) -> PyResult<String> {
    py.detach(|| api::coach(&episode_json, robot_config_json.as_deref(), feedback.as_deref(), zero_latencies))
        .map_err(py_err)
}

#[pyfunction]
fn validate(raw: &str, schema_id: &str) -> PyResult<(String, String)> {
    api::validate(raw, schema_id).map_err(py_err)
}

#[pyfunction]
fn schema(schema_id: &str) -> PyResult<String> {
    api::schema(schema_id).map_err(py_err)
}

#[pyfunction]
fn schema_ids() -> Vec<&'static str> {
    SchemaId::ALL.iter().map(|id| id.as_str()).collect()
}

#[pyfunction]
fn proficiency(mean: f64, expert_mean: f64, novice_mean: f64) -> PyResult<f64> {
    api::proficiency(mean, expert_mean, novice_mean).map_err(py_err)
}

/// `(t, df, p)` of Welch's two-sample t-test.
#[pyfunction]
fn welch_t(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let w = stats::welch_t(&a, &b).map_err(py_err)?;
    Ok((w.t, w.df, w.p))
}

#[pyfunction]
fn cohens_d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::cohens_d(&a, &b).map_err(py_err)
}

#[pyfunction]
fn worked_example() -> &'static str {
    WORKED_EXAMPLE
}

#[pyfunction]
fn worked_example_golden() -> &'static str {
    WORKED_EXAMPLE_GOLDEN
}

#[pyfunction]
fn default_robot_config() -> (f64, f64) {
    let c = RobotConfigState::default();
    (c.stop_distance_to_door, c.pointing_angle)
}

#[pymodule]
fn coachsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(coach, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(schema, m)?)?;
    m.add_function(wrap_pyfunction!(schema_ids, m)?)?;
    m.add_function(wrap_pyfunction!(proficiency, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(worked_example, m)?)?;
    m.add_function(wrap_pyfunction!(worked_example_golden, m)?)?;
    m.add_function(wrap_pyfunction!(default_robot_config, m)?)?;
    Ok(())
}
