//! Python bindings for chainscope.

use chainscope::chains::{build_chain_digraph, decompose, ChainDigraph, ComponentDecomposition};
use chainscope::config::RunConfig;
use chainscope::entropy::{
    entropy_slope, path_count_slope, restricted_spectral_entropy, separated_count,
    spectral_chain_entropy, CountMode, DEFAULT_EXACT_CAP,
};
use chainscope::error::Error;
use chainscope::harness::{run_checks, Context};
use chainscope::model::FiniteModel;
use chainscope::pointwise::{
    chain_sensitive_star, is_chain_continuous, is_sensitive, is_shadowable,
};
use chainscope::report::{analyze_documents, check_documents, write_documents, Stamp};
use chainscope::zoo;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

create_exception!(chainscope, CapacityError, PyException);
create_exception!(chainscope, ResolutionError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Capacity { .. } => CapacityError::new_err(e.to_string()),
        Error::Resolution { .. } => ResolutionError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<CountMode> {
    match mode {
        "greedy" => Ok(CountMode::Greedy),
        "exact" => Ok(CountMode::Exact),
        other => Err(PyValueError::new_err(format!(
            "count mode must be 'greedy' or 'exact', got {other:?}"
        ))),
    }
}

/// A finite model of a dynamical system: points, metric and map.
#[pyclass(name = "Model", module = "chainscope", frozen)]
struct PyModel {
    inner: FiniteModel,
}

#[pymethods]
impl PyModel {
    /// Model of a built-in system.
    #[staticmethod]
    fn from_zoo(name: &str) -> PyResult<Self> {
        let cfg = zoo::lookup(name).map_err(to_py)?.config();
        Ok(PyModel {
            inner: cfg.model.build().map_err(to_py)?,
        })
    }

    /// Model described by the `[model]` table of a TOML run configuration.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let cfg = RunConfig::from_toml(text).map_err(to_py)?;
        Ok(PyModel {
            inner: cfg.model.build().map_err(to_py)?,
        })
    }

    /// Exact map `i -> image[i]` on a finite metric space.
    #[staticmethod]
    #[pyo3(signature = (dist, image, name = "explicit"))]
    fn from_map(dist: Vec<Vec<f64>>, image: Vec<usize>, name: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: FiniteModel::from_map(name, dist, &image).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn mesh(&self) -> f64 {
        self.inner.mesh()
    }

    #[getter]
    fn proj_error(&self) -> f64 {
        self.inner.proj_error()
    }

    #[getter]
    fn resolution_floor(&self) -> f64 {
        self.inner.resolution_floor()
    }

    #[getter]
    fn chain_floor(&self) -> f64 {
        self.inner.chain_floor()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({:?}, {} points)",
            self.inner.name(),
            self.inner.len()
        )
    }

    fn label(&self, i: usize) -> PyResult<String> {
        self.check(i)?;
        Ok(self.inner.label(i).to_string())
    }

    fn image(&self, i: usize) -> PyResult<usize> {
        self.check(i)?;
        Ok(self.inner.image(i))
    }

    fn successors(&self, i: usize) -> PyResult<Vec<usize>> {
        self.check(i)?;
        Ok(self.inner.successors(i).to_vec())
    }

    fn dist(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.inner.dist(i, j))
    }

    fn ball(&self, x: usize, radius: f64) -> PyResult<Vec<usize>> {
        self.check(x)?;
        Ok(self.inner.ball(x, radius))
    }

    /// The δ-chain digraph: `i -> j` when `j` is within `delta` of the image of `i`.
    fn chain_digraph(&self, delta: f64) -> PyResult<PyChainDigraph> {
        let g = build_chain_digraph(&self.inner, delta).map_err(to_py)?;
        let d = decompose(&g);
        Ok(PyChainDigraph {
            graph: g,
            decomp: d,
        })
    }

    fn is_shadowable(
        &self,
        g: &PyChainDigraph,
        x: usize,
        epsilon: f64,
    ) -> PyResult<(bool, Option<Vec<usize>>)> {
        self.check(x)?;
        let v = is_shadowable(&self.inner, &g.graph, x, epsilon).map_err(to_py)?;
        Ok((v.holds, v.counterexample))
    }

    fn is_chain_continuous(
        &self,
        g: &PyChainDigraph,
        x: usize,
        epsilon: f64,
    ) -> PyResult<(bool, Option<Vec<usize>>)> {
        self.check(x)?;
        let v = is_chain_continuous(&self.inner, &g.graph, x, epsilon).map_err(to_py)?;
        Ok((v.holds, v.counterexample))
    }

    /// Sensitivity at `x` with separation `r`, tested on every ball radius in `radii`.
    fn is_sensitive(&self, x: usize, r: f64, radii: Vec<f64>) -> PyResult<bool> {
        self.check(x)?;
        Ok(is_sensitive(&self.inner, x, r, &radii)
            .map_err(to_py)?
            .sensitive)
    }

    /// Two δ-chains from `x` ending more than `r` apart, as `(left, right)`, or None.
    fn chain_sensitive(
        &self,
        g: &PyChainDigraph,
        x: usize,
        r: f64,
    ) -> PyResult<Option<(Vec<usize>, Vec<usize>)>> {
        self.check(x)?;
        let w = chain_sensitive_star(&self.inner, &g.graph, x, r).map_err(to_py)?;
        Ok(w.map(|w| (w.left, w.right)))
    }

    /// Largest `(n, r)`-separated family of orbit segments starting in `points`.
    #[pyo3(signature = (points, n, r, mode = "greedy"))]
    fn separated_count(&self, points: Vec<usize>, n: usize, r: f64, mode: &str) -> PyResult<usize> {
        separated_count(
            &self.inner,
            &points,
            n,
            r,
            parse_mode(mode)?,
            DEFAULT_EXACT_CAP,
        )
        .map_err(to_py)
    }

    /// Least-squares slope of `ln separated_count` over `n_min..=n_max`.
    #[pyo3(signature = (points, r, n_min, n_max, mode = "greedy"))]
    fn entropy_slope(
        &self,
        points: Vec<usize>,
        r: f64,
        n_min: usize,
        n_max: usize,
        mode: &str,
    ) -> PyResult<f64> {
        Ok(
            entropy_slope(&self.inner, &points, r, n_min, n_max, parse_mode(mode)?)
                .map_err(to_py)?
                .value,
        )
    }
}

impl PyModel {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "point {i} outside 0..{}",
                self.inner.len()
            )));
        }
        Ok(())
    }
}

/// A δ-chain digraph with its chain-component decomposition.
#[pyclass(name = "ChainDigraph", module = "chainscope", frozen)]
struct PyChainDigraph {
    graph: ChainDigraph,
    decomp: ComponentDecomposition,
}

#[pymethods]
impl PyChainDigraph {
    #[getter]
    fn delta(&self) -> f64 {
        self.graph.delta()
    }

    fn __len__(&self) -> usize {
        self.graph.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "ChainDigraph(delta={}, {} nodes, {} edges)",
            self.graph.delta(),
            self.graph.node_count(),
            self.graph.edge_count()
        )
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.graph.edges().collect()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        if i >= self.graph.node_count() {
            return Err(PyValueError::new_err(format!("node {i} out of range")));
        }
        Ok(self.graph.neighbors(i).to_vec())
    }

    fn reaches(&self, i: usize, j: usize) -> bool {
        i < self.graph.node_count() && j < self.graph.node_count() && self.graph.reaches(i, j)
    }

    /// Chain components (lists of nodes), ordered by smallest node.
    fn components(&self) -> Vec<Vec<usize>> {
        self.decomp.components.clone()
    }

    /// Indices of terminal components (no chain leaves them).
    fn terminal_components(&self) -> Vec<usize> {
        self.decomp.terminal_components()
    }

    fn chain_recurrent_nodes(&self) -> Vec<usize> {
        self.decomp.cr_nodes.clone()
    }

    /// `(a, b)` pairs: some chain leaves component `a` and enters `b`.
    fn condensation(&self) -> Vec<(usize, usize)> {
        self.decomp.condensation.clone()
    }

    /// Log spectral radius of the adjacency matrix.
    fn spectral_entropy(&self) -> f64 {
        spectral_chain_entropy(&self.graph).value
    }

    /// Spectral entropy of the subgraph induced on `nodes`.
    fn restricted_entropy(&self, nodes: Vec<usize>) -> f64 {
        restricted_spectral_entropy(&self.graph, &nodes).value
    }

    /// `ln P(n) - ln P(n - 1)` where `P(n)` counts paths with `n` nodes.
    fn path_count_slope(&self, n: usize) -> PyResult<f64> {
        Ok(path_count_slope(&self.graph, n).map_err(to_py)?.value)
    }
}

/// A configured system: model, schedule and analysis settings, with the
/// digraphs of every scheduled δ built up front.
#[pyclass(name = "Session", module = "chainscope", frozen)]
struct PySession {
    cfg: RunConfig,
    ctx: Context,
}

#[pymethods]
impl PySession {
    #[staticmethod]
    fn from_zoo(name: &str) -> PyResult<Self> {
        Self::build(zoo::lookup(name).map_err(to_py)?.config())
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Self::build(RunConfig::from_toml(text).map_err(to_py)?)
    }

    #[getter]
    fn system(&self) -> String {
        self.ctx.system.clone()
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.cfg.hash()
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel {
            inner: self.ctx.model.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Session({:?}, {} points)",
            self.ctx.system,
            self.ctx.model.len()
        )
    }

    fn config_toml(&self) -> String {
        self.cfg.to_toml()
    }

    /// Runs theorem checks (all when `ids` is empty) and returns the reports as dicts.
    #[pyo3(signature = (ids = Vec::new()))]
    fn check<'py>(&self, py: Python<'py>, ids: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
        let checks = py.detach(|| run_checks(&self.ctx, &ids)).map_err(to_py)?;
        json_to_py(py, &checks)
    }

    /// Writes the analyze reports to `out` and returns the file names.
    fn analyze(&self, py: Python<'_>, out: PathBuf) -> PyResult<Vec<String>> {
        let stamp = Stamp::new(&self.cfg, &self.ctx.system);
        let docs = py
            .detach(|| analyze_documents(&self.ctx, &stamp))
            .map_err(to_py)?;
        write_documents(&out, &docs).map_err(to_py)?;
        Ok(docs.into_iter().map(|d| d.name).collect())
    }

    /// Runs checks and writes their reports to `out`; returns the statuses.
    #[pyo3(signature = (out, ids = Vec::new()))]
    fn write_checks(
        &self,
        py: Python<'_>,
        out: PathBuf,
        ids: Vec<String>,
    ) -> PyResult<Vec<(String, String)>> {
        let stamp = Stamp::new(&self.cfg, &self.ctx.system);
        let (docs, checks) = py
            .detach(|| check_documents(&self.ctx, &ids, &stamp))
            .map_err(to_py)?;
        write_documents(&out, &docs).map_err(to_py)?;
        Ok(checks
            .into_iter()
            .map(|c| (c.theorem, c.status.as_str().to_string()))
            .collect())
    }
}

impl PySession {
    fn build(cfg: RunConfig) -> PyResult<Self> {
        let ctx = Context::from_config(&cfg).map_err(to_py)?;
        Ok(PySession { cfg, ctx })
    }
}

#[pyfunction]
fn zoo_names() -> Vec<&'static str> {
    zoo::names()
}

#[pyfunction]
fn zoo_describe(name: &str) -> PyResult<String> {
    Ok(zoo::lookup(name).map_err(to_py)?.describe())
}

#[pyfunction]
fn zoo_config(name: &str) -> PyResult<String> {
    Ok(zoo::lookup(name).map_err(to_py)?.config().to_toml())
}

#[pymodule]
#[pyo3(name = "chainscope")]
fn chainscope_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyChainDigraph>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(zoo_names, m)?)?;
    m.add_function(wrap_pyfunction!(zoo_describe, m)?)?;
    m.add_function(wrap_pyfunction!(zoo_config, m)?)?;
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    m.add("ResolutionError", m.py().get_type::<ResolutionError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
