//! Python bindings: scenarios, the potential, comparison pairs, capacity
//! scans and the singular solver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use singheat::comparison::{critical_exponents as core_critical, verify_signs};
use singheat::geometry::{MovingManifold, ParametricManifold};
use singheat::potential::{eval_u as core_eval_u, flat_plane_oracle as core_flat, QuadratureConfig};
use singheat::scenario::{Purpose, ScenarioConfig};

fn py_err(e: singheat::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn purpose(name: &str) -> PyResult<Purpose> {
    Ok(match name {
        "potential" => Purpose::Potential,
        "comparison" => Purpose::Comparison,
        "capacity" => Purpose::Capacity,
        "solve" => Purpose::Solve,
        _ => return Err(PyValueError::new_err(format!("unknown purpose {name:?}"))),
    })
}

/// A moving submanifold `M_t` with its lower time `T̲`.
#[pyclass(name = "Manifold", frozen)]
struct PyManifold {
    inner: MovingManifold,
}

#[pymethods]
impl PyManifold {
    /// Static round circle of the given radius in the `(e_1, e_2)` plane of `R^n`.
    #[staticmethod]
    #[pyo3(signature = (n, radius = 1.0, lower_time = -2.0))]
    fn circle(n: usize, radius: f64, lower_time: f64) -> PyResult<Self> {
        let base = ParametricManifold::circle(n, radius).map_err(py_err)?;
        Ok(PyManifold { inner: MovingManifold::static_manifold(base, lower_time) })
    }

    /// Static flat `m`-plane in `R^n`.
    #[staticmethod]
    #[pyo3(signature = (n, m, lower_time = -2.0))]
    fn flat(n: usize, m: usize, lower_time: f64) -> PyResult<Self> {
        let base = ParametricManifold::flat(n, m).map_err(py_err)?;
        Ok(PyManifold { inner: MovingManifold::static_manifold(base, lower_time) })
    }

    #[getter]
    fn ambient(&self) -> usize {
        self.inner.ambient()
    }

    #[getter]
    fn codim(&self) -> usize {
        self.inner.codim()
    }

    #[getter]
    fn lower_time(&self) -> f64 {
        self.inner.lower_time()
    }

    /// Distance from `x` to `M_t`.
    fn distance(&self, x: Vec<f64>, t: f64) -> PyResult<f64> {
        Ok(singheat::geometry::distance(&self.inner, &x, t, None).map_err(py_err)?.distance)
    }

    /// `U(x, t)` with gradient, time derivative and distance, as a dict.
    #[pyo3(signature = (x, t, lower = None))]
    fn potential<'py>(&self, py: Python<'py>, x: Vec<f64>, t: f64, lower: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
        let lower = lower.unwrap_or(self.inner.lower_time());
        let ev = core_eval_u(&self.inner, lower, &x, t, &QuadratureConfig::default()).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("value", ev.value)?;
        d.set_item("gradient", ev.gradient.iter().copied().collect::<Vec<f64>>())?;
        d.set_item("dt", ev.dt)?;
        d.set_item("laplacian", ev.laplacian())?;
        d.set_item("distance", ev.distance)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Manifold({:?}, codim {}, T̲ = {})", self.inner.base.shape, self.inner.codim(), self.inner.lower_time())
    }
}

/// A full scenario: geometry, exponents and every module's settings.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => ScenarioConfig::from_toml(t).map_err(py_err)?,
            None => ScenarioConfig::default(),
        };
        Ok(PyScenario { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    /// Raises `ValueError` when the scenario cannot serve `purpose`.
    fn validate(&self, purpose_name: &str) -> PyResult<()> {
        self.inner.validate(purpose(purpose_name)?).map_err(py_err)
    }

    fn manifold(&self) -> PyResult<PyManifold> {
        Ok(PyManifold { inner: self.inner.moving_manifold().map_err(py_err)? })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }
}

/// Critical exponents and the strong amplitude `L` for `(n, m, p)`.
#[pyfunction]
fn critical_exponents<'py>(py: Python<'py>, n: usize, m: usize, p: f64) -> PyResult<Bound<'py, PyDict>> {
    let ex = core_critical(n, m, p).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("p_sg", ex.p_sg)?;
    d.set_item("p_star", ex.p_star)?;
    d.set_item("beta", ex.beta)?;
    d.set_item("L", ex.l)?;
    d.set_item("subcritical", ex.require_subcritical().is_ok())?;
    Ok(d)
}

/// Closed-form `U` of a static flat plane of codimension `codim`.
#[pyfunction]
#[pyo3(signature = (d, codim, horizon = f64::INFINITY))]
fn flat_plane_oracle(d: f64, codim: usize, horizon: f64) -> PyResult<f64> {
    Ok(core_flat(d, codim, horizon).map_err(py_err)?.u)
}

/// Minimal admissible `Ã` of the weak or strong pair on the probe lattice.
#[pyfunction]
#[pyo3(signature = (scenario, strong = false))]
fn minimal_offset(py: Python<'_>, scenario: &PyScenario, strong: bool) -> PyResult<Option<f64>> {
    let cfg = scenario.inner.clone();
    cfg.validate(Purpose::Comparison).map_err(py_err)?;
    py.detach(move || {
        let mm = cfg.moving_manifold()?;
        let (sup, sub) = cfg.pair(strong)?;
        let rep = verify_signs(&mm, cfg.lower_time, (&sup, &sub), cfg.exponents.a, &cfg.comparison, &cfg.quadrature, cfg.seed)?;
        Ok(rep.a_tilde_min)
    })
    .map_err(py_err)
}

/// Capacity scan at exponent `p`: verdict and fitted exponents per component.
#[pyfunction]
fn capacity_scan<'py>(py: Python<'py>, scenario: &PyScenario, p: f64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = scenario.inner.clone();
    cfg.validate(Purpose::Capacity).map_err(py_err)?;
    let prof = py
        .detach(move || {
            let mm = cfg.moving_manifold()?;
            singheat::capacity::capacity_scan(&mm, p, &cfg.capacity.plan, &cfg.quadrature, cfg.seed)
        })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("verdict", format!("{:?}", prof.verdict).to_lowercase())?;
    let fits = PyDict::new(py);
    for f in &prof.fits {
        fits.set_item(f.component, f.exponent)?;
    }
    d.set_item("fits", fits)?;
    d.set_item("eps", prof.rows.iter().map(|r| r.eps).collect::<Vec<_>>())?;
    d.set_item("total", prof.rows.iter().map(|r| r.total).collect::<Vec<_>>())?;
    d.set_item("summary", prof.summary())?;
    Ok(d)
}

/// Singular solve; returns the run summary and the `2δ` shell ratio ranges
/// from sub- and super-solution data.
#[pyfunction]
#[pyo3(signature = (scenario, strong = false, a_tilde = None))]
fn solve<'py>(py: Python<'py>, scenario: &PyScenario, strong: bool, a_tilde: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = scenario.inner.clone();
    cfg.validate(Purpose::Solve).map_err(py_err)?;
    let run = py
        .detach(move || {
            let mm = cfg.moving_manifold()?;
            let (sup, sub) = cfg.pair(strong)?;
            let a = a_tilde.or(cfg.exponents.a_tilde).unwrap_or(sup.a_tilde);
            singheat::solver::solve_singular(&mm, (&sup.with_a_tilde(a), &sub.with_a_tilde(a)), &cfg.solver, &cfg.quadrature)
        })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("summary", run.summary())?;
    d.set_item("a_tilde", run.a_tilde)?;
    let shell = 2.0 * run.grid.delta_exc;
    for (key, rep) in [("sub_data", &run.laws), ("super_data", &run.laws_super_data)] {
        if let Some(sh) = rep.shell(shell) {
            d.set_item(key, (sh.min, sh.max, sh.spread))?;
        }
    }
    d.set_item("min_value", run.laws.min_value)?;
    Ok(d)
}

/// Max error of the spatially constant absorption run against the ODE.
#[pyfunction]
#[pyo3(signature = (p, u_star = 1.0, t_end = 5.0, dt = 1e-3))]
fn ode_sanity(p: f64, u_star: f64, t_end: f64, dt: f64) -> PyResult<f64> {
    Ok(singheat::solver::ode_sanity(p, u_star, t_end, dt).map_err(py_err)?.max_error)
}

#[pymodule]
fn singheat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifold>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(critical_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(flat_plane_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_offset, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_scan, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(ode_sanity, m)?)?;
    Ok(())
}
