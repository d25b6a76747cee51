//! Python bindings. Structured values cross the boundary as JSON: arguments
//! may be a JSON string or any object `json.dumps` accepts, results come back
//! as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde_json::Value;

pub mod api;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts a JSON string or a Python object and returns its JSON text.
fn json_arg(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_str()?.to_owned());
    }
    let json = obj.py().import("json")?;
    json.call_method1("dumps", (obj,))?.extract()
}

fn opt_json_arg(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Option<String>> {
    obj.filter(|o| !o.is_none()).map(json_arg).transpose()
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

/// Completed run of a scenario.
#[pyclass(module = "gravis", frozen)]
struct Trace {
    inner: gravis_core::harness::Trace,
}

#[pymethods]
impl Trace {
    /// "completed", "failed" or "timeout".
    #[getter]
    fn outcome(&self) -> String {
        api::outcome_name(self.inner.outcome())
    }

    #[getter]
    fn sim_time(&self) -> u64 {
        self.inner.footer.sim_time
    }

    #[getter]
    fn stages(&self) -> Vec<u8> {
        self.inner.footer.stages.clone()
    }

    #[getter]
    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(&self.inner.header).map_err(err)?)
    }

    #[getter]
    fn footer<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(&self.inner.footer).map_err(err)?)
    }

    fn envelopes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(&self.inner.envelopes).map_err(err)?)
    }

    /// The trace as JSON Lines.
    fn jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    fn write(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.envelopes.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace(outcome={:?}, envelopes={}, sim_time={})", self.outcome(), self.inner.envelopes.len(), self.inner.footer.sim_time)
    }
}

/// A live session that advances one tick at a time.
#[pyclass(module = "gravis", unsendable)]
struct Session {
    inner: gravis_core::harness::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (scenario, seed=None, config=None))]
    fn new(scenario: &Bound<'_, PyAny>, seed: Option<u64>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let inner = api::session(&json_arg(scenario)?, seed, opt_json_arg(config)?.as_deref()).map_err(err)?;
        Ok(Session { inner })
    }

    #[getter]
    fn now(&self) -> u64 {
        self.inner.now()
    }

    #[getter]
    fn dialog_state(&self) -> String {
        format!("{:?}", self.inner.dialog_state().current)
    }

    /// Outcome once the session has terminated, else None.
    #[getter]
    fn finished(&self) -> Option<String> {
        self.inner.finished().map(api::outcome_name)
    }

    #[pyo3(signature = (ticks=1))]
    fn step(&mut self, ticks: u32) -> PyResult<u64> {
        for _ in 0..ticks {
            self.inner.step_tick().map_err(err)?;
        }
        Ok(self.inner.now())
    }

    /// Queues a script action at the current time, e.g.
    /// `{"type": "utterance", "text": "take the red cube"}`.
    fn inject(&mut self, action: &Bound<'_, PyAny>) -> PyResult<()> {
        let action = serde_json::from_str(&json_arg(action)?).map_err(err)?;
        self.inner.inject(action);
        Ok(())
    }

    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(self.inner.snapshot()).map_err(err)?)
    }

    /// Envelopes published so far, starting at index `start`.
    #[pyo3(signature = (start=0))]
    fn log<'py>(&self, py: Python<'py>, start: usize) -> PyResult<Bound<'py, PyAny>> {
        let log = self.inner.log();
        let tail: Vec<_> = log.iter().skip(start).map(|e| &**e).collect();
        to_py(py, &serde_json::to_value(tail).map_err(err)?)
    }

    fn run_to_end(&mut self) -> PyResult<String> {
        self.inner.run_to_end().map(api::outcome_name).map_err(err)
    }
}

/// Runs a scenario (JSON text, dict or file path) to the end.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None, config=None))]
fn run_scenario(scenario: &Bound<'_, PyAny>, seed: Option<u64>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Trace> {
    let text = match scenario.extract::<std::path::PathBuf>() {
        Ok(path) if path.extension().is_some_and(|e| e == "json") && path.is_file() => std::fs::read_to_string(path)?,
        _ => json_arg(scenario)?,
    };
    let inner = api::run(&text, seed, opt_json_arg(config)?.as_deref()).map_err(err)?;
    Ok(Trace { inner })
}

/// Re-runs a recorded JSON Lines trace and reports the first divergence.
#[pyfunction]
fn replay<'py>(py: Python<'py>, trace: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &api::replay(trace).map_err(err)?)
}

/// Parses an utterance into an instruction frame.
#[pyfunction]
#[pyo3(signature = (utterance, lexicon=None))]
fn understand<'py>(py: Python<'py>, utterance: &str, lexicon: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &api::understand(utterance, lexicon).map_err(err)?)
}

/// MAP fusion of a frame against a memory snapshot.
#[pyfunction]
#[pyo3(signature = (snapshot, frame, region=None, margin=None))]
fn fuse<'py>(
    py: Python<'py>,
    snapshot: &Bound<'py, PyAny>,
    frame: &Bound<'py, PyAny>,
    region: Option<&Bound<'py, PyAny>>,
    margin: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let out = api::fuse(&json_arg(snapshot)?, &json_arg(frame)?, opt_json_arg(region)?.as_deref(), margin).map_err(err)?;
    to_py(py, &out)
}

/// One dialog transition; `state=None` starts from Idle.
#[pyfunction]
#[pyo3(signature = (event, state=None))]
fn dialog_step<'py>(py: Python<'py>, event: &Bound<'py, PyAny>, state: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let out = api::dialog_step(opt_json_arg(state)?.as_deref(), &json_arg(event)?).map_err(err)?;
    to_py(py, &out)
}

/// The built-in configuration as a dict.
#[pyfunction]
fn default_config<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(gravis_core::Config::default()).map_err(err)?)
}

#[pymodule]
fn gravis(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trace>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(understand, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(dialog_step, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
