//! Python bindings: run scenarios and read back measurements as plain
//! dicts and lists.

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use serde_json::Value;

use srv6pm::collect::RecordFormat;
use srv6pm::packet::lm::{decode_lm_query, decode_lm_response, encode_lm_query, LmFlags, LmQuery, CTRL_IN_BAND, CTRL_OUT_OF_BAND};
use srv6pm::sim::{self, preset, SimError};
use srv6pm::time::SimTime;

fn sim_err(err: SimError) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Converts a JSON value into the matching Python object.
pub fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &json)
}

/// A loaded scenario, advanced with `run` or `run_until`.
#[pyclass(unsendable)]
pub struct Simulation {
    inner: sim::Simulation,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(scenario_toml: &str) -> PyResult<Self> {
        let inner = sim::load_scenario(scenario_toml).map_err(sim_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (name, seed=None))]
    fn preset(name: &str, seed: Option<u64>) -> PyResult<Self> {
        let p = preset::preset(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        let mut config = sim::ScenarioConfig::from_toml(p.text).map_err(sim_err)?;
        if let Some(seed) = seed {
            config.seed = seed;
        }
        let inner = sim::Simulation::from_config(config).map_err(sim_err)?;
        Ok(Self { inner })
    }

    /// Runs to the scenario's end time.
    fn run(&mut self) {
        self.inner.run();
    }

    fn run_until(&mut self, seconds: f64) -> PyResult<()> {
        if !(seconds.is_finite() && seconds >= 0.0) {
            return Err(PyValueError::new_err(format!("bad time {seconds}")));
        }
        self.inner.run_until(SimTime::from_secs_f64(seconds));
        Ok(())
    }

    #[getter]
    fn now(&self) -> f64 {
        self.inner.now().as_secs_f64()
    }

    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.inner.store().sorted_records())
    }

    /// Per-report measured loss next to the oracle's drops.
    fn block_checks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.inner.block_checks().map_err(sim_err)?)
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, self.inner.stats())
    }

    fn topology<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, self.inner.controller().topology())
    }

    fn trace_digest(&self) -> String {
        self.inner.trace_digest()
    }

    /// Writes the records to `path`; returns how many were written.
    #[pyo3(signature = (path, format="jsonl"))]
    fn export(&self, path: &str, format: &str) -> PyResult<usize> {
        let format: RecordFormat = format.parse().map_err(|e: srv6pm::collect::CollectError| {
            PyValueError::new_err(e.to_string())
        })?;
        self.inner
            .store()
            .export(std::path::Path::new(path), format)
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// (name, description) of every bundled scenario.
#[pyfunction]
fn scenarios() -> Vec<(&'static str, &'static str)> {
    preset::PRESETS.iter().map(|p| (p.name, p.description)).collect()
}

#[pyfunction]
fn scenario_text(name: &str) -> PyResult<&'static str> {
    preset::preset(name)
        .map(|p| p.text)
        .ok_or_else(|| PyKeyError::new_err(name.to_string()))
}

#[pyfunction]
#[pyo3(signature = (sender_seq, sender_tx_counter, block_number, in_band=true))]
fn encode_query<'py>(
    py: Python<'py>,
    sender_seq: u32,
    sender_tx_counter: u64,
    block_number: u8,
    in_band: bool,
) -> Bound<'py, PyBytes> {
    let q = LmQuery {
        sender_seq,
        sender_tx_counter,
        block_number,
        flags: LmFlags::default(),
        ctrl_code: if in_band { CTRL_IN_BAND } else { CTRL_OUT_OF_BAND },
    };
    PyBytes::new(py, &encode_lm_query(&q))
}

#[pyfunction]
fn decode_query<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let q = decode_lm_query(data).map_err(|e| PyValueError::new_err(e.to_string()))?;
    serialize(py, &q)
}

#[pyfunction]
fn decode_response<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let r = decode_lm_response(data).map_err(|e| PyValueError::new_err(e.to_string()))?;
    serialize(py, &r)
}

/// Adds the module contents to `m`.
pub fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_text, m)?)?;
    m.add_function(wrap_pyfunction!(encode_query, m)?)?;
    m.add_function(wrap_pyfunction!(decode_query, m)?)?;
    m.add_function(wrap_pyfunction!(decode_response, m)?)?;
    Ok(())
}

#[pymodule]
fn srv6pm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    init(m)
}
