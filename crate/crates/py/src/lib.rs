//! Python bindings: model specs, compiled effective families, and the
//! tabular experiment drivers. Matrices cross the boundary as nested lists
//! of complex numbers.

use std::collections::BTreeMap;

use adiabatic_core::experiments::{self, Cell};
use adiabatic_core::models::{self, builtins, Reduction};
use adiabatic_core::{effective, propagation, spectral, superop, C64};
use faer::Mat;
use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;

fn core_err(e: adiabatic_core::Error) -> PyErr {
    match e {
        adiabatic_core::Error::InvalidModel(_)
        | adiabatic_core::Error::InvalidArgument(_)
        | adiabatic_core::Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_rows(m: &Mat<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_rows(rows: &[Vec<C64>]) -> PyResult<Mat<C64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

fn parse_reduction(text: &str) -> PyResult<Reduction> {
    match text {
        "exact" => Ok(Reduction::Exact),
        "closed_form" => Ok(Reduction::ClosedForm),
        _ => text
            .strip_prefix("perturbative:")
            .and_then(|o| o.parse().ok())
            .map(Reduction::Perturbative)
            .ok_or_else(|| PyValueError::new_err(format!("unknown reduction '{text}'"))),
    }
}

/// Column-labelled table with CSV export.
#[pyclass(name = "Table", module = "adiabatic_elim", frozen)]
struct PyTable {
    inner: experiments::Table,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns.clone()
    }

    /// Rows as lists of floats and strings.
    #[getter]
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Vec<Bound<'py, PyAny>>>> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Num(x) => Ok(x.into_pyobject(py)?.into_any()),
                        Cell::Text(s) => Ok(s.into_pyobject(py)?.into_any()),
                    })
                    .collect()
            })
            .collect()
    }

    /// Numeric `column` on rows where text column `key` equals `value`.
    fn select(&self, key: &str, value: &str, column: &str) -> Vec<f64> {
        self.inner.select(key, value, column)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

fn table(inner: experiments::Table) -> PyTable {
    PyTable { inner }
}

/// Levels, couplings and rates of a model.
#[pyclass(name = "ModelSpec", module = "adiabatic_elim", skip_from_py_object)]
#[derive(Clone)]
struct PyModelSpec {
    inner: models::ModelSpec,
}

#[pymethods]
impl PyModelSpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        models::ModelSpec::from_json(text).map(|inner| Self { inner }).map_err(core_err)
    }

    /// Named parameter set; see `builtin_names()`.
    #[staticmethod]
    #[pyo3(signature = (name, params=None))]
    fn builtin(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        builtins::builtin(name, &params.unwrap_or_default())
            .map(|inner| Self { inner })
            .map_err(core_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n_ground(&self) -> usize {
        self.inner.n_ground()
    }

    #[getter]
    fn n_excited(&self) -> usize {
        self.inner.n_excited()
    }

    /// Continuum image of a one-level model at large decay.
    fn large_gamma_map(&self) -> PyResult<Self> {
        models::large_gamma_map(&self.inner).map(|inner| Self { inner }).map_err(core_err)
    }

    /// Ground-state vector annihilated by every fast coupling, if any.
    fn dark_state(&self) -> PyResult<Option<Vec<C64>>> {
        models::dark_state(&self.inner).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelSpec(name={:?}, n_ground={}, n_excited={}, continua={})",
            self.inner.name,
            self.inner.n_ground(),
            self.inner.n_excited(),
            self.inner.continua.len()
        )
    }
}

/// A model compiled to its effective family and exact slow dynamics.
#[pyclass(name = "CompiledModel", module = "adiabatic_elim")]
struct PyCompiledModel {
    inner: models::CompiledModel,
}

#[pymethods]
impl PyCompiledModel {
    /// `reduction`: "exact", "closed_form" or "perturbative:<order>".
    #[new]
    #[pyo3(signature = (spec, reduction="closed_form", policy_json=None))]
    fn new(spec: &PyModelSpec, reduction: &str, policy_json: Option<&str>) -> PyResult<Self> {
        let policy = match policy_json {
            Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => adiabatic_core::NumericPolicy::default(),
        };
        models::compile(&spec.inner, parse_reduction(reduction)?, &policy)
            .map(|inner| Self { inner })
            .map_err(core_err)
    }

    #[getter]
    fn slow_dim(&self) -> usize {
        self.inner.family.slow_dim()
    }

    fn l0(&self) -> Vec<Vec<C64>> {
        to_rows(self.inner.family.l0())
    }

    fn l1(&self) -> Vec<Vec<C64>> {
        to_rows(self.inner.family.l1())
    }

    /// `L_eff(z)`.
    fn eval(&self, z: C64) -> PyResult<Vec<Vec<C64>>> {
        self.inner.family.eval(z).map(|m| to_rows(&m)).map_err(core_err)
    }

    fn poles(&self) -> Vec<C64> {
        self.inner.family.poles()
    }

    /// Trace-correction factor of the `L0` steady state.
    fn alpha(&self) -> PyResult<f64> {
        effective::trace_correction(&self.inner.family, &self.inner.policy)
            .map(|t| t.alpha)
            .map_err(core_err)
    }

    /// Trace-one steady state of `L0` as a density matrix.
    fn rho_bar(&self) -> PyResult<Vec<Vec<C64>>> {
        let tc = effective::trace_correction(&self.inner.family, &self.inner.policy).map_err(core_err)?;
        superop::unvectorize(&tc.rho_bar).map(|m| to_rows(&m)).map_err(core_err)
    }

    fn nonlinear_eigenvalues(&self) -> PyResult<Vec<C64>> {
        spectral::complete_eigenpairs(&self.inner.family, &self.inner.policy)
            .map(|p| p.iter().map(|q| q.lambda).collect())
            .map_err(core_err)
    }

    /// Largest nonzero real part of the nonlinear spectrum.
    fn gap(&self) -> PyResult<f64> {
        let pairs = spectral::complete_eigenpairs(&self.inner.family, &self.inner.policy).map_err(core_err)?;
        spectral::spectral_gap(&pairs).map(|g| g.gap).map_err(core_err)
    }

    /// Exact slow density matrix at time `t` from ground level `initial_level`.
    #[pyo3(signature = (t, initial_level=0))]
    fn evolve_exact(&self, t: f64, initial_level: usize) -> PyResult<Vec<Vec<C64>>> {
        let x0 = self.initial(initial_level)?;
        let x = self.inner.exact.evolve(&x0, t).map_err(core_err)?;
        superop::unvectorize(&x).map(|m| to_rows(&m)).map_err(core_err)
    }

    /// Exact, `L0`, `alpha L0` and Keldysh trajectories with fidelities.
    #[pyo3(signature = (times, initial_level=0))]
    fn trajectories(&self, times: Vec<f64>, initial_level: usize) -> PyResult<PyTable> {
        let x0 = self.initial(initial_level)?;
        experiments::trajectory_table(&self.inner, &x0, &times)
            .map(|(t, _)| table(t))
            .map_err(core_err)
    }

    fn spectrum(&self) -> PyResult<PyTable> {
        experiments::spectrum_table(&self.inner).map(|(t, _)| table(t)).map_err(core_err)
    }

    fn steady(&self) -> PyResult<PyTable> {
        experiments::steady_table(&self.inner).map(|(t, _)| table(t)).map_err(core_err)
    }
}

impl PyCompiledModel {
    fn initial(&self, level: usize) -> PyResult<adiabatic_core::StateVec> {
        let r = self.inner.family.rank();
        if level >= r {
            return Err(PyValueError::new_err(format!("initial level {level} out of range for {r} ground levels")));
        }
        Ok(models::ground_population(r, level))
    }
}

#[pyfunction]
fn builtin_names() -> Vec<&'static str> {
    builtins::NAMES.to_vec()
}

/// Tables behind a named figure, keyed by file stem.
#[pyfunction]
#[pyo3(signature = (name, times=None))]
fn figure(name: &str, times: Option<Vec<f64>>) -> PyResult<BTreeMap<String, PyTable>> {
    let policy = adiabatic_core::NumericPolicy::default();
    let (tables, _) = experiments::figure(name, times.as_deref(), &policy).map_err(core_err)?;
    Ok(tables.into_iter().map(|(k, t)| (k, table(t))).collect())
}

/// Closed-form slow population of the single-level model.
#[pyfunction]
fn single_level_law(beta: f64, tau: f64) -> f64 {
    experiments::single_level_law(beta, tau)
}

/// Trace-rescaled Uhlmann fidelity of two density matrices.
#[pyfunction]
fn fidelity_rescaled(rho: Vec<Vec<C64>>, rho_exact: Vec<Vec<C64>>) -> PyResult<f64> {
    let a = superop::vectorize(from_rows(&rho)?.as_ref()).map_err(core_err)?;
    let b = superop::vectorize(from_rows(&rho_exact)?.as_ref()).map_err(core_err)?;
    propagation::fidelity_rescaled(&a, &b).map_err(core_err)
}

#[pymodule]
fn adiabatic_elim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA_VERSION", models::SCHEMA_VERSION)?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyModelSpec>()?;
    m.add_class::<PyCompiledModel>()?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_function(wrap_pyfunction!(single_level_law, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_rescaled, m)?)?;
    Ok(())
}
