//! Python module `prefpcp`.
//!
//! Structured results (radar grids, plot models) cross the boundary as JSON
//! strings with the same schema the CLI and HTTP service emit.

use prefpcp_core::embed::{EmbedMethod, EmbedOptions};
use prefpcp_core::ingest::{self, SyntheticSpec};
use prefpcp_core::pcpmodel::{self, DEFAULT_TOP_K};
use prefpcp_core::pipeline::{self, Selection};
use prefpcp_core::preference::{self, PreferencePoint};
use prefpcp_core::{pareto, Error};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(prefpcp, PrefpcpError, PyValueError, "Raised for any pipeline failure; the message starts with the error name.");

fn to_py_err(err: impl Into<Error>) -> PyErr {
    let err = err.into();
    PrefpcpError::new_err(format!("{}: {err}", err.name()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output types serialize")
}

/// Evaluated configurations: parameter values and the metrics they scored.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(ingest::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        ingest::parse_csv(text).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ingest::parse_json(text).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (params=5, metrics=3, records=1000, level=1.0, noise=0.3, seed=0))]
    fn synthetic(params: usize, metrics: usize, records: usize, level: f64, noise: f64, seed: u64) -> PyResult<Self> {
        let spec = SyntheticSpec {
            n_params: params,
            n_metrics: metrics,
            n_records: records,
            offsets: vec![0.0; metrics],
            level,
            noise,
            seed,
        };
        ingest::generate_synthetic(&spec).map(Self).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn param_names(&self) -> Vec<String> {
        self.0.param_names().to_vec()
    }

    #[getter]
    fn metric_names(&self) -> Vec<String> {
        self.0.metric_names().to_vec()
    }

    fn metrics(&self) -> Vec<Vec<f64>> {
        self.0.metric_vectors().map(<[f64]>::to_vec).collect()
    }

    fn params(&self) -> Vec<Vec<f64>> {
        self.0.records().iter().map(|r| r.params.clone()).collect()
    }

    /// Record indices of the non-dominated configurations.
    fn pareto_indices(&self) -> Vec<usize> {
        pareto::pareto_front(&self.0).indices
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={}, m={})", self.0.len(), self.0.n_params(), self.0.n_metrics())
    }
}

/// Fitted surrogate `prod(f_m - a_m) = b` of the Pareto front.
#[pyclass(name = "FrontModel", frozen)]
struct PyFrontModel(prefpcp_core::FrontModel);

#[pymethods]
impl PyFrontModel {
    #[new]
    fn new(a: Vec<f64>, b: f64) -> PyResult<Self> {
        prefpcp_core::FrontModel::new(a, b).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn fit(dataset: &PyDataset) -> PyResult<Self> {
        let front = pareto::pareto_front(&dataset.0);
        prefpcp_core::fit_front(&front).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.0.a().to_vec()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b()
    }

    #[getter]
    fn fit_rms(&self) -> f64 {
        self.0.fit_rms()
    }

    /// `g(f) - b`.
    fn eval(&self, f: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&f).map_err(to_py_err)
    }

    fn grad(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.grad(&f).map_err(to_py_err)
    }

    /// Nearest point on the front to `f_r`, returned as `(f_u, distance)`.
    fn project(&self, f_r: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
        let point = preference::project_to_front(&self.0, &f_r).map_err(to_py_err)?;
        Ok((point.f_u().to_vec(), point.distance()))
    }

    /// Normalized weights under which `f_u` (on the front) is optimal.
    fn weights(&self, f_u: Vec<f64>) -> PyResult<Vec<f64>> {
        let point = PreferencePoint::direct(&self.0, f_u).map_err(to_py_err)?;
        let w = preference::optimal_weights(&self.0, &point).map_err(to_py_err)?;
        Ok(w.as_slice().to_vec())
    }

    fn to_json(&self) -> String {
        to_json(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("FrontModel(a={:?}, b={}, fit_rms={})", self.0.a(), self.0.b(), self.0.fit_rms())
    }
}

/// Weights, preferred point and plot for one selection.
#[pyclass(name = "PreferenceOutcome", frozen)]
struct PyOutcome(pipeline::PreferenceOutcome);

#[pymethods]
impl PyOutcome {
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.as_slice().to_vec()
    }

    #[getter]
    fn f_u(&self) -> Vec<f64> {
        self.0.f_u.clone()
    }

    #[getter]
    fn distance(&self) -> f64 {
        self.0.distance
    }

    /// Plot model as JSON.
    fn pcp_json(&self) -> String {
        to_json(&self.0.pcp)
    }

    #[pyo3(signature = (width=960, height=540))]
    fn svg(&self, width: u32, height: u32) -> PyResult<String> {
        pcpmodel::render_svg(&self.0.pcp, width, height).map_err(to_py_err)
    }

    fn to_json(&self) -> String {
        to_json(&self.0)
    }
}

/// Pareto set, fitted front and radar grid of one dataset.
#[pyclass(name = "Analysis", frozen)]
struct PyAnalysis(pipeline::Analysis);

#[pymethods]
impl PyAnalysis {
    #[new]
    #[pyo3(signature = (dataset, method="pca", seed=0, grid=8))]
    fn new(dataset: &PyDataset, method: &str, seed: u64, grid: usize) -> PyResult<Self> {
        let method: EmbedMethod = method.parse().map_err(to_py_err)?;
        let options = EmbedOptions { method, seed, grid };
        pipeline::Analysis::build(dataset.0.clone(), options).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn front(&self) -> PyFrontModel {
        PyFrontModel(self.0.front().clone())
    }

    #[getter]
    fn pareto_indices(&self) -> Vec<usize> {
        self.0.pareto().indices.clone()
    }

    /// Occupied lattice cells as `(i, j)` pairs.
    fn cells(&self) -> Vec<(usize, usize)> {
        self.0.grid().cells.iter().map(|c| (c.i, c.j)).collect()
    }

    fn radar_grid_json(&self) -> String {
        to_json(self.0.grid())
    }

    /// Select either a lattice `cell` or a reference `point`.
    #[pyo3(signature = (*, cell=None, point=None, top_k=DEFAULT_TOP_K))]
    fn select(&self, cell: Option<(usize, usize)>, point: Option<Vec<f64>>, top_k: usize) -> PyResult<PyOutcome> {
        let selection = match (cell, point) {
            (Some((i, j)), None) => Selection::Cell(i, j),
            (None, Some(p)) => Selection::Point(p),
            _ => return Err(PyValueError::new_err("pass exactly one of `cell` or `point`")),
        };
        self.0.respond(&selection, top_k).map(PyOutcome).map_err(to_py_err)
    }
}

/// Indices of the non-dominated rows of `points` (all metrics minimized).
#[pyfunction]
fn pareto_indices(points: Vec<Vec<f64>>) -> Vec<usize> {
    pareto::non_dominated_indices(&points)
}

/// Closed-form weights for two metrics from the front slope at the chosen point.
#[pyfunction]
fn bi_metric_weights(slope: f64) -> PyResult<Vec<f64>> {
    preference::bi_metric_weights(slope).map(|w| w.as_slice().to_vec()).map_err(to_py_err)
}

/// Projects `f_r` onto the front and returns the weights at the projection.
#[pyfunction]
fn optimal_weights(model: &PyFrontModel, f_r: Vec<f64>) -> PyResult<Vec<f64>> {
    let point = preference::project_to_front(&model.0, &f_r).map_err(to_py_err)?;
    let w = preference::optimal_weights(&model.0, &point).map_err(to_py_err)?;
    Ok(w.as_slice().to_vec())
}

#[pymodule]
fn prefpcp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFrontModel>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(pareto_indices, m)?)?;
    m.add_function(wrap_pyfunction!(bi_metric_weights, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_weights, m)?)?;
    m.add("PrefpcpError", m.py().get_type::<PrefpcpError>())?;
    Ok(())
}
