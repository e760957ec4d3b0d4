//! Python bindings: a `Simulator` wrapping one simulated machine plus an
//! in-memory graph, and module-level helpers for edge generation.

use std::rc::Rc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pathsim::algos::{self, KernelOptions};
use pathsim::error::SimError;
use pathsim::graph::Graph;
use pathsim::machine::default_pathfinder_config;
use pathsim::memsys::SimMemory;
use pathsim::queries::{self, RunOptions, RunReport};
use pathsim::rmat::{self, RmatParams};

fn to_py_err(e: SimError) -> PyErr {
    match e {
        SimError::InvalidArgument(_) | SimError::InvalidAddress(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// One simulated machine with at most one resident graph.
#[pyclass(unsendable)]
struct Simulator {
    mem: Rc<SimMemory>,
    graph: Option<Rc<Graph>>,
}

impl Simulator {
    fn graph(&self) -> PyResult<&Rc<Graph>> {
        self.graph
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("no graph built yet; call build_graph first"))
    }

    fn kernel_options(&self, budget: Option<u64>) -> KernelOptions {
        let mut opts = KernelOptions::for_machine(self.mem.config());
        if let Some(b) = budget {
            opts = opts.with_budget(b);
        }
        opts
    }
}

#[pymethods]
impl Simulator {
    /// Create a machine with `nodes` nodes; `overrides` are
    /// `"key=value"` strings applied to the default configuration.
    #[new]
    #[pyo3(signature = (nodes = 8, overrides = None))]
    fn new(nodes: usize, overrides: Option<Vec<String>>) -> PyResult<Self> {
        let mut cfg = default_pathfinder_config(nodes).map_err(to_py_err)?;
        for kv in overrides.unwrap_or_default() {
            cfg.apply_override(&kv).map_err(to_py_err)?;
        }
        let cfg = cfg.validated().map_err(to_py_err)?;
        Ok(Simulator {
            mem: Rc::new(SimMemory::new(cfg)),
            graph: None,
        })
    }

    /// Build the striped in-memory graph from a canonical edge list.
    fn build_graph(&mut self, nvertices: u64, edges: Vec<(u64, u64)>) -> PyResult<()> {
        let g = Graph::build(&self.mem, nvertices, &edges).map_err(to_py_err)?;
        self.graph = Some(Rc::new(g));
        Ok(())
    }

    #[pyo3(signature = (source, job_contexts = None))]
    fn bfs<'py>(
        &self,
        py: Python<'py>,
        source: u64,
        job_contexts: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let g = self.graph()?;
        let r = algos::bfs(&self.mem, g, source, &self.kernel_options(job_contexts))
            .map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("source", r.source)?;
        d.set_item("levels", &r.levels)?;
        d.set_item("parents", &r.parents)?;
        d.set_item("levels_count", r.levels_count)?;
        d.set_item("unreached", algos::UNREACHED)?;
        Ok(d)
    }

    #[pyo3(signature = (max_iter = algos::DEFAULT_MAX_ITER, job_contexts = None))]
    fn connected_components<'py>(
        &self,
        py: Python<'py>,
        max_iter: u64,
        job_contexts: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let g = self.graph()?;
        let r = algos::connected_components(
            &self.mem,
            g,
            max_iter,
            &self.kernel_options(job_contexts),
        )
        .map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("labels", &r.labels)?;
        d.set_item("iterations", r.iterations)?;
        d.set_item("converged", r.converged)?;
        Ok(d)
    }

    /// Run a query mix sequentially, concurrently or both; returns the
    /// run reports plus end-to-end improvement and the CSV rendering.
    #[pyo3(signature = (queries_count, mix_bfs = 1.0, seed = 42, mode = "both", job_contexts = None))]
    fn bench<'py>(
        &self,
        py: Python<'py>,
        queries_count: u64,
        mix_bfs: f64,
        seed: u64,
        mode: &str,
        job_contexts: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let g = self.graph()?;
        let jobs = queries::make_mix(queries_count, mix_bfs, seed, g.nvertices)
            .map_err(to_py_err)?;
        let mut opts = RunOptions::for_machine(self.mem.config());
        if let Some(b) = job_contexts {
            opts.job_contexts = b.max(1);
        }
        let modes: Vec<&str> = match mode {
            "seq" => vec!["seq"],
            "conc" => vec!["conc"],
            "both" => vec!["seq", "conc"],
            other => {
                return Err(PyValueError::new_err(format!(
                    "mode must be seq, conc or both, got {other:?}"
                )))
            }
        };
        let mut runs = Vec::new();
        for m in modes {
            let run = if m == "seq" {
                queries::run_sequential(&self.mem, g, &jobs, &opts)
            } else {
                queries::run_concurrent(&self.mem, g, &jobs, &opts)
            }
            .map_err(to_py_err)?;
            runs.push(run);
        }
        let report = queries::BenchReport::new(seed, runs);
        let d = PyDict::new(py);
        d.set_item("seed", report.seed)?;
        d.set_item("improvement_pct", report.improvement_pct)?;
        d.set_item("csv", report.to_csv())?;
        let runs: Vec<Bound<'py, PyDict>> = report
            .runs
            .iter()
            .map(|r| run_to_dict(py, r))
            .collect::<PyResult<_>>()?;
        d.set_item("runs", runs)?;
        Ok(d)
    }

    /// Cumulative hardware event totals.
    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.mem.counters().snapshot();
        let d = PyDict::new(py);
        d.set_item("migrations", s.total_migrations())?;
        d.set_item("local_reads", s.total_local_reads())?;
        d.set_item("local_writes", s.total_local_writes())?;
        d.set_item("remote_min", s.total_remote_min())?;
        d.set_item("remote_add", s.total_remote_add())?;
        d.set_item("remote_write", s.total_remote_write())?;
        d.set_item("clock_cycles", self.mem.counters().clock_cycles())?;
        Ok(d)
    }

    fn machine<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = self.mem.config();
        let d = PyDict::new(py);
        d.set_item("nodes", cfg.nodes)?;
        d.set_item("cores_per_node", cfg.cores_per_node)?;
        d.set_item("contexts_per_core", cfg.contexts_per_core)?;
        d.set_item("contexts_per_node", cfg.contexts_per_node())?;
        d.set_item("total_contexts", cfg.total_contexts())?;
        d.set_item("msps_per_node", cfg.msps_per_node)?;
        d.set_item("clock_hz", cfg.clock_hz)?;
        d.set_item("cost_local_access", cfg.cost_local_access)?;
        d.set_item("cost_migration", cfg.cost_migration)?;
        d.set_item("cost_remote_op", cfg.cost_remote_op)?;
        Ok(d)
    }
}

fn run_to_dict<'py>(py: Python<'py>, r: &RunReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", r.mode)?;
    d.set_item("njobs", r.njobs)?;
    d.set_item("kind_mix", &r.kind_mix)?;
    d.set_item("makespan_cycles", r.makespan_cycles)?;
    d.set_item("makespan_s", r.makespan_s)?;
    d.set_item("quantiles", r.quantiles.to_vec())?;
    d.set_item("migrations", r.aggregate.migrations)?;
    d.set_item("remote_ops", r.aggregate.total_remote_ops())?;
    let jobs: Vec<Bound<'py, PyDict>> = r
        .jobs
        .iter()
        .map(|j| {
            let jd = PyDict::new(py);
            jd.set_item("id", j.id)?;
            jd.set_item("kind", j.kind)?;
            jd.set_item("source", j.source)?;
            jd.set_item("sim_time_s", j.sim_time_s)?;
            jd.set_item("migrations", j.migrations)?;
            jd.set_item("remote_ops", j.remote_min + j.remote_add + j.remote_write)?;
            Ok(jd)
        })
        .collect::<PyResult<_>>()?;
    d.set_item("jobs", jobs)?;
    Ok(d)
}

/// Generate the raw recursive-matrix tuple stream.
#[pyfunction]
#[pyo3(signature = (scale, edgefactor = 16, seed = 42, probs = None))]
fn generate_edges(
    scale: u32,
    edgefactor: u64,
    seed: u64,
    probs: Option<(f64, f64, f64, f64)>,
) -> PyResult<Vec<(u64, u64)>> {
    let mut params = RmatParams::new(scale, edgefactor, seed);
    if let Some((a, b, c, d)) = probs {
        params.a = a;
        params.b = b;
        params.c = c;
        params.d = d;
    }
    rmat::generate_edges(&params).map_err(to_py_err)
}

/// Undirected simple edge set: self-loops dropped, (min, max) order,
/// sorted, deduplicated.
#[pyfunction]
fn canonicalize(edges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    rmat::canonicalize(&edges)
}

#[pyfunction]
fn improvement_percent(seq_time: f64, conc_time: f64) -> PyResult<f64> {
    queries::improvement_percent(seq_time, conc_time).map_err(to_py_err)
}

#[pyfunction]
fn quantile_summary(samples: Vec<f64>) -> PyResult<Vec<f64>> {
    queries::quantile_summary(&samples)
        .map(|q| q.to_vec())
        .map_err(to_py_err)
}

#[pymodule]
fn pathsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulator>()?;
    m.add_function(wrap_pyfunction!(generate_edges, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_percent, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_summary, m)?)?;
    m.add("UNREACHED", algos::UNREACHED)?;
    Ok(())
}
