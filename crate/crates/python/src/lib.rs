//! Python bindings for `mapf_ltm`.
//!
//! Coordinates cross the boundary as `(x, y)` tuples; paths are one list of
//! coordinates per agent.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mapf_ltm::anytime::PeStatus;
use mapf_ltm::report::{parse_paths, solution_coords};
use mapf_ltm::validate::sol_lower_bound;
use mapf_ltm::{
    parse_map, parse_scen, serialize_map, sum_of_loss, validate_solution, LossConvention, Mode, RestartStrategy,
    Solution, SolveConfig,
};

type Coord = (usize, usize);
type Paths = Vec<Vec<Coord>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn read_file(path: &str) -> PyResult<String> {
    std::fs::read_to_string(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

fn to_paths(grid: &mapf_ltm::Grid, sol: &Solution) -> Paths {
    solution_coords(grid, sol)
        .into_iter()
        .map(|p| p.into_iter().map(|[x, y]| (x, y)).collect())
        .collect()
}

fn from_paths(grid: &mapf_ltm::Grid, paths: &Paths) -> PyResult<Solution> {
    let text: String = paths
        .iter()
        .map(|p| {
            let cells: Vec<String> = p.iter().map(|(x, y)| format!("({x},{y})")).collect();
            cells.join(",") + "\n"
        })
        .collect();
    parse_paths(&text, grid).map_err(value_err)
}

fn snake<T: serde::Serialize>(v: T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

/// A 4-connected grid map.
#[pyclass(frozen, name = "Grid")]
struct PyGrid(Arc<mapf_ltm::Grid>);

#[pymethods]
impl PyGrid {
    /// Parses MovingAI `.map` text.
    #[staticmethod]
    fn from_map_text(text: &str) -> PyResult<Self> {
        Ok(PyGrid(Arc::new(parse_map(text).map_err(value_err)?)))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_map_text(&read_file(path)?)
    }

    /// Obstacle-free `width` x `height` grid.
    #[staticmethod]
    fn open(width: usize, height: usize) -> Self {
        PyGrid(Arc::new(mapf_ltm::Grid::open(width, height)))
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.0.num_vertices()
    }

    fn is_passable(&self, x: usize, y: usize) -> bool {
        self.0.is_passable(x, y)
    }

    fn to_map_text(&self) -> String {
        serialize_map(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Grid({}x{}, {} free cells)", self.0.width(), self.0.height(), self.0.num_vertices())
    }
}

/// Agents with start and goal cells on a grid.
#[pyclass(frozen, name = "Instance")]
struct PyInstance(mapf_ltm::Instance);

#[pymethods]
impl PyInstance {
    /// `agents` is a list of `((sx, sy), (gx, gy))`.
    #[new]
    fn new(grid: &PyGrid, agents: Vec<(Coord, Coord)>) -> PyResult<Self> {
        Ok(PyInstance(mapf_ltm::Instance::from_coords(grid.0.clone(), &agents).map_err(value_err)?))
    }

    /// First `agents` entries of a MovingAI `.scen` file.
    #[staticmethod]
    fn load(grid: &PyGrid, scen_path: &str, agents: usize) -> PyResult<Self> {
        let text = read_file(scen_path)?;
        Ok(PyInstance(parse_scen(&text, agents, grid.0.clone()).map_err(value_err)?))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid_arc().clone())
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.0.num_agents()
    }

    #[getter]
    fn starts(&self) -> Vec<Coord> {
        self.0.starts().as_slice().iter().map(|&v| self.0.grid().coord(v)).collect()
    }

    #[getter]
    fn goals(&self) -> Vec<Coord> {
        self.0.goals().as_slice().iter().map(|&v| self.0.grid().coord(v)).collect()
    }

    /// Sum of individual shortest-path lengths.
    fn sol_lower_bound(&self) -> u64 {
        sol_lower_bound(&self.0)
    }

    /// `(ok, message)`; the message describes the first violation.
    fn validate(&self, paths: Paths) -> PyResult<(bool, Option<String>)> {
        let sol = from_paths(self.0.grid(), &paths)?;
        let report = validate_solution(&self.0, &sol);
        Ok((report.ok, report.violation.map(|v| format!("{:?} at step {} agents {:?}", v.kind, v.step, v.agents))))
    }

    /// Sum of loss of a valid plan.
    fn sum_of_loss(&self, paths: Paths) -> PyResult<u64> {
        let sol = from_paths(self.0.grid(), &paths)?;
        match sum_of_loss(&self.0, &sol, LossConvention::FromVertex) {
            Ok(m) => Ok(m.sol),
            Err(e) => Err(value_err(format!("invalid plan: {:?}", e.0.kind))),
        }
    }

    fn __repr__(&self) -> String {
        format!("Instance({} agents)", self.0.num_agents())
    }
}

fn restart_from(name: Option<&str>) -> PyResult<Option<RestartStrategy>> {
    Ok(match name {
        None => None,
        Some("root") => Some(RestartStrategy::Root),
        Some("near-goal") | Some("near_goal") => Some(RestartStrategy::NearGoal),
        Some("resume") => Some(RestartStrategy::Resume),
        Some(other) => return Err(PyValueError::new_err(format!("unknown restart strategy `{other}`"))),
    })
}

/// Outcome of an anytime one-shot run.
#[pyclass(frozen, name = "OneShotResult")]
struct PyOneShot {
    #[pyo3(get)]
    sol: Option<u64>,
    #[pyo3(get)]
    first_sol: Option<u64>,
    /// "time_limit", "lower_bound" or "exhausted".
    #[pyo3(get)]
    stop: String,
    /// `(time_ns, sol, iteration)` per improvement.
    #[pyo3(get)]
    events: Vec<(u64, u64, u64)>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    paths: Option<Paths>,
    #[pyo3(get)]
    traffic: PyTraffic,
}

#[pymethods]
impl PyOneShot {
    fn __repr__(&self) -> String {
        format!("OneShotResult(sol={:?}, stop={}, events={})", self.sol, self.stop, self.events.len())
    }
}

/// Directed edge traffic counts and penalties of a finished run.
#[pyclass(frozen, skip_from_py_object, name = "TrafficMap")]
#[derive(Clone)]
struct PyTraffic(mapf_ltm::Ltm);

#[pymethods]
impl PyTraffic {
    /// Uniform traffic map on `grid`.
    #[new]
    #[pyo3(signature = (grid, w_lb=0.0, w_ub=10.0))]
    fn new(grid: &PyGrid, w_lb: f64, w_ub: f64) -> PyResult<Self> {
        Ok(PyTraffic(mapf_ltm::Ltm::new(grid.0.clone(), w_lb, w_ub).map_err(value_err)?))
    }

    #[getter]
    fn max_raw(&self) -> u64 {
        self.0.max_raw()
    }

    /// Raw count of the move `from -> to`.
    fn raw(&self, from: Coord, to: Coord) -> PyResult<u64> {
        let (u, v) = self.edge(from, to)?;
        self.0.raw(u, v).map_err(value_err)
    }

    fn penalty(&self, from: Coord, to: Coord) -> PyResult<f64> {
        let (u, v) = self.edge(from, to)?;
        Ok(self.0.penalty(u, v).map_err(value_err)?.as_f64())
    }

    /// `(from, to, raw, penalty)` for every directed edge.
    fn edges(&self) -> Vec<(Coord, Coord, u64, f64)> {
        let g = self.0.grid();
        g.directed_edges()
            .map(|(e, u, v)| (g.coord(u), g.coord(v), self.0.raw_counts()[e], self.0.penalties()[e].as_f64()))
            .collect()
    }
}

impl PyTraffic {
    fn edge(&self, from: Coord, to: Coord) -> PyResult<(u32, u32)> {
        let g = self.0.grid();
        let cell = |(x, y): Coord| g.vertex_at(x, y).ok_or_else(|| value_err(format!("({x},{y}) is not a free cell")));
        Ok((cell(from)?, cell(to)?))
    }
}

/// Outcome of planning and execution.
#[pyclass(frozen, name = "ExecutionTrace")]
struct PyTrace {
    /// "solved", "wall_cap_exceeded" or "unsolvable".
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    paths: Paths,
    #[pyo3(get)]
    sol: Option<u64>,
    #[pyo3(get)]
    windows: usize,
    /// Windows that committed waits for lack of a plan.
    #[pyo3(get)]
    waited_windows: usize,
}

#[pymethods]
impl PyTrace {
    fn __repr__(&self) -> String {
        format!("ExecutionTrace(status={}, sol={:?}, windows={})", self.status, self.sol, self.windows)
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    mode: Mode,
    time_limit: f64,
    exec_time: f64,
    commit: usize,
    budget_factor: u64,
    w_lb: f64,
    w_ub: f64,
    seed: u64,
    disable_ltm: bool,
    restart: Option<&str>,
    max_wall: Option<f64>,
) -> PyResult<SolveConfig> {
    let cfg = SolveConfig {
        mode,
        time_limit,
        exec_time,
        commit,
        budget_factor,
        w_lb,
        w_ub,
        seed,
        disable_ltm,
        restart: restart_from(restart)?,
        max_wall,
        first_window_generation_cap: None,
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Anytime one-shot solve. The GIL is released while searching.
#[pyfunction]
#[pyo3(signature = (instance, time_limit=30.0, budget_factor=10, w_lb=0.0, w_ub=10.0, seed=0, disable_ltm=false, restart=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    instance: &PyInstance,
    time_limit: f64,
    budget_factor: u64,
    w_lb: f64,
    w_ub: f64,
    seed: u64,
    disable_ltm: bool,
    restart: Option<&str>,
) -> PyResult<PyOneShot> {
    let cfg = config(Mode::Oneshot, time_limit, 0.1, 5, budget_factor, w_lb, w_ub, seed, disable_ltm, restart, None)?;
    let inst = &instance.0;
    let r = py.detach(|| mapf_ltm::solve_oneshot(inst, &cfg)).map_err(value_err)?;
    let grid = inst.grid();
    let first_sol = r
        .first_solution
        .as_ref()
        .and_then(|s| sum_of_loss(inst, s, LossConvention::FromVertex).ok())
        .map(|m| m.sol);
    Ok(PyOneShot {
        sol: r.sol,
        first_sol,
        stop: snake(r.stop),
        events: r.events.iter().map(|e| (e.time_ns, e.sol, e.iteration)).collect(),
        iterations: r.iterations.len(),
        paths: r.solution.as_ref().map(|s| to_paths(grid, s)),
        traffic: PyTraffic(r.ltm),
    })
}

/// Planning and execution: commit `commit` actions per window of
/// `exec_time * commit` seconds until every agent is at its goal.
#[pyfunction]
#[pyo3(signature = (instance, exec_time=0.1, commit=5, budget_factor=10, w_lb=0.0, w_ub=10.0, seed=0, disable_ltm=false, restart=None, max_wall=None))]
#[allow(clippy::too_many_arguments)]
fn solve_pe(
    py: Python<'_>,
    instance: &PyInstance,
    exec_time: f64,
    commit: usize,
    budget_factor: u64,
    w_lb: f64,
    w_ub: f64,
    seed: u64,
    disable_ltm: bool,
    restart: Option<&str>,
    max_wall: Option<f64>,
) -> PyResult<PyTrace> {
    let cfg = config(Mode::Pe, 30.0, exec_time, commit, budget_factor, w_lb, w_ub, seed, disable_ltm, restart, max_wall)?;
    let inst = &instance.0;
    let trace = py.detach(|| mapf_ltm::solve_pe(inst, &cfg)).map_err(value_err)?;
    Ok(PyTrace {
        status: snake(trace.status),
        paths: to_paths(inst.grid(), &trace.solution()),
        sol: (trace.status == PeStatus::Solved).then(|| trace.metrics.as_ref().map(|m| m.sol)).flatten(),
        windows: trace.windows.len(),
        waited_windows: trace.windows.iter().filter(|w| w.waited).count(),
    })
}

#[pymodule]
fn mapf_ltm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTraffic>()?;
    m.add_class::<PyOneShot>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pe, m)?)?;
    Ok(())
}
