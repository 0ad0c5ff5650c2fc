//! Python bindings for `coordsim`.
//!
//! Parameter vectors cross the boundary as flat lists of floats in entry
//! order: nodes first, then edges in `Network.edges` order. `Network.labels`
//! names each position.

#![allow(clippy::useless_conversion)]

use coordsim::coord::{self, Algorithm, CoordParams, RunOptions};
use coordsim::game::{self, GameInstance};
use coordsim::graph::{build_topology, Network, NodeEdgeVector, TopologyKind};
use coordsim::harness::{load_scenario, verify, Scenario};
use coordsim::objective::{a1_bounds, builtin_objective, ObjectiveSpec, BOUND_EPSILON};
use coordsim::oracle::{self, ExactSolution, SolverOptions, DEFAULT_TOL};
use coordsim::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::TooLarge { .. } | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for coordsim::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "Network", module = "coordsim", frozen)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// Builds a line, star, complete or random topology. `m` is the edge
    /// count of a random graph; `seed` only affects random graphs.
    #[new]
    #[pyo3(signature = (kind, n, m=None, seed=0))]
    fn new(kind: &str, n: usize, m: Option<usize>, seed: u64) -> PyResult<Self> {
        let kind: TopologyKind = kind.parse().py()?;
        Ok(PyNetwork {
            inner: build_topology(kind, n, m, seed).py()?,
        })
    }

    /// Network from an explicit 0-based edge list.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: Network::new(n, &edges).py()?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels()
    }

    fn degree(&self, node: usize) -> PyResult<usize> {
        if node >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!("node {node} out of range")));
        }
        Ok(self.inner.degree(node))
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, edges={:?})",
            self.inner.node_count(),
            self.inner.edges()
        )
    }
}

#[pyclass(name = "Objective", module = "coordsim", frozen)]
#[derive(Clone)]
struct PyObjective {
    inner: ObjectiveSpec,
}

#[pymethods]
impl PyObjective {
    /// One of the builtin objectives: `C1`, `C2` or `line-example`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyObjective {
            inner: builtin_objective(name).py()?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Coordination gain of a rate vector.
    fn gain(&self, net: &PyNetwork, rates: Vec<f64>) -> PyResult<f64> {
        let v = vector(&net.inner, &rates)?;
        oracle::gain(&net.inner, &self.inner, &v).py()
    }

    /// `(theta_min, theta_max)` box used by the update algorithms at `beta`.
    fn bounds(&self, net: &PyNetwork, beta: f64) -> PyResult<(f64, f64)> {
        let b = a1_bounds(&net.inner, &self.inner, beta, BOUND_EPSILON).py()?;
        Ok((b.theta_min, b.theta_max))
    }

    fn __repr__(&self) -> String {
        format!("Objective({:?})", self.inner.name)
    }
}

#[pyclass(name = "Scenario", module = "coordsim", frozen)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn frames(&self) -> u64 {
        self.inner.frames
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    fn network(&self) -> PyResult<PyNetwork> {
        Ok(PyNetwork {
            inner: self.inner.network().py()?,
        })
    }

    fn objective(&self) -> PyResult<PyObjective> {
        Ok(PyObjective {
            inner: self.inner.objective_spec().py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.id)
    }
}

fn vector(net: &Network, flat: &[f64]) -> PyResult<NodeEdgeVector> {
    NodeEdgeVector::from_flat(net, flat).py()
}

/// Preset name or path of a scenario file.
#[pyfunction]
fn scenario(name: &str) -> PyResult<PyScenario> {
    Ok(PyScenario {
        inner: load_scenario(name).py()?,
    })
}

/// Probabilities of all `2^n` configurations; bit `i` of the index is node `i`.
#[pyfunction]
fn stationary_distribution(net: &PyNetwork, theta: Vec<f64>) -> PyResult<Vec<f64>> {
    let th = vector(&net.inner, &theta)?;
    oracle::stationary_distribution(&net.inner, &th).py()
}

#[pyfunction]
fn marginals(net: &PyNetwork, theta: Vec<f64>) -> PyResult<Vec<f64>> {
    let th = vector(&net.inner, &theta)?;
    Ok(oracle::marginals(&net.inner, &th).py()?.to_flat())
}

#[pyfunction]
fn log_partition(net: &PyNetwork, theta: Vec<f64>) -> PyResult<f64> {
    let th = vector(&net.inner, &theta)?;
    oracle::log_partition(&net.inner, &th).py()
}

/// Empirical configuration distribution of the simulated chain over
/// `duration` time units.
#[pyfunction]
#[pyo3(signature = (net, theta, duration, seed=0))]
fn empirical_distribution(py: Python<'_>, net: &PyNetwork, theta: Vec<f64>, duration: f64, seed: u64) -> PyResult<Vec<f64>> {
    let th = vector(&net.inner, &theta)?;
    let n = &net.inner;
    py.allow_threads(|| coordsim::cdm::empirical_distribution(n, &th, duration, seed))
        .py()
}

fn solution_dict<'py>(py: Python<'py>, sol: &ExactSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("beta", sol.beta)?;
    d.set_item("theta", sol.theta_star.to_flat())?;
    d.set_item("rates", sol.lambda_star.to_flat())?;
    d.set_item("gain", sol.gain)?;
    d.set_item("dual_value", sol.dual_value)?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("residual", sol.residual)?;
    Ok(d)
}

/// Exact solution of the entropy-regularized problem at `beta`.
#[pyfunction]
#[pyo3(signature = (net, objective, beta, tol=DEFAULT_TOL))]
fn solve<'py>(py: Python<'py>, net: &PyNetwork, objective: &PyObjective, beta: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    let sol = oracle::solve_a_cg_opt(&net.inner, &objective.inner, beta, &opts).py()?;
    solution_dict(py, &sol)
}

/// Unregularized optimum approached by warm-started solves along an
/// increasing `schedule` of beta values.
#[pyfunction]
#[pyo3(signature = (net, objective, schedule, tol=DEFAULT_TOL))]
fn solve_continuation<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    objective: &PyObjective,
    schedule: Vec<f64>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let res = oracle::solve_cg_opt(&net.inner, &objective.inner, &schedule, tol).py()?;
    let d = solution_dict(py, &res.solution)?;
    d.set_item("gap_bound", res.gap_bound)?;
    let path: PyResult<Vec<_>> = res.path.iter().map(|s| solution_dict(py, s)).collect();
    d.set_item("path", path?)?;
    Ok(d)
}

/// Runs one update algorithm (`dual`, `steep` or `ind`) on the simulated
/// chain and returns final parameters, final cumulative rates and the gain
/// of the cumulative rates after every frame.
#[pyfunction]
#[pyo3(signature = (
    net, objective, algorithm, beta, frames, seed=1,
    alpha=0.5, step_scale=3.0, frame_duration=10.0, theta0=None,
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    objective: &PyObjective,
    algorithm: &str,
    beta: f64,
    frames: u64,
    seed: u64,
    alpha: f64,
    step_scale: f64,
    frame_duration: f64,
    theta0: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let alg: Algorithm = algorithm.parse().py()?;
    let bounds = a1_bounds(&net.inner, &objective.inner, beta, BOUND_EPSILON).py()?;
    let params = CoordParams {
        beta,
        alpha,
        step_scale,
        frame_duration,
        bounds,
    };
    let mut opts = RunOptions::new(frames, seed);
    opts.record_every = frames.max(1);
    opts.theta0 = theta0.map(|t| vector(&net.inner, &t)).transpose()?;
    let (n, spec) = (&net.inner, &objective.inner);
    let trace = py.allow_threads(|| coord::run(n, spec, alg, params, &opts)).py()?;
    let d = PyDict::new_bound(py);
    d.set_item("algorithm", alg.to_string())?;
    d.set_item("frames", trace.frames)?;
    d.set_item("theta", trace.final_theta.to_flat())?;
    d.set_item("rates", trace.final_s_bar.to_flat())?;
    d.set_item("gains", trace.gains)?;
    d.set_item("events", trace.total_events)?;
    d.set_item("messages", trace.total_messages)?;
    d.set_item("clamp_events", trace.clamp_events)?;
    Ok(d)
}

/// Nash equilibrium of the coordination game by damped Jacobi best responses.
#[pyfunction]
#[pyo3(signature = (net, objective, beta, alpha=0.5, tol=1e-8, max_rounds=100_000))]
fn find_ne<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    objective: &PyObjective,
    beta: f64,
    alpha: f64,
    tol: f64,
    max_rounds: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let g = GameInstance::new(net.inner.clone(), objective.inner.clone(), beta).py()?;
    let ne = game::find_ne(&g, tol, max_rounds, alpha).py()?;
    let d = PyDict::new_bound(py);
    d.set_item("theta", ne.theta_ne.to_flat())?;
    d.set_item("rates", ne.lambda_ne.to_flat())?;
    d.set_item("potential", ne.potential_value)?;
    d.set_item("gain", ne.gain_ne)?;
    d.set_item("social_gain", ne.social_gain)?;
    d.set_item("gap", ne.gap_to_social_opt)?;
    d.set_item("gap_bound", ne.poa_bound)?;
    d.set_item("residual", ne.residual)?;
    d.set_item("rounds", ne.rounds)?;
    d.set_item("oracle_distance", ne.oracle_distance)?;
    Ok(d)
}

/// Runs the property suite; returns `(name, passed, detail)` triples.
#[pyfunction(name = "verify")]
fn run_verify(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.allow_threads(verify::run_verify)
        .into_iter()
        .map(|r| (r.name, r.passed, r.detail))
        .collect()
}

#[pymodule]
fn coordsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyObjective>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(marginals, m)?)?;
    m.add_function(wrap_pyfunction!(log_partition, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_continuation, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(find_ne, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
