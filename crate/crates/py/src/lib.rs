//! Python bindings: a `State` class wrapping both state formalisms plus
//! module-level functions for the algebraic relations, characterization,
//! and the closed-form protocol quantities. Reports are returned as plain
//! Python dicts/lists mirroring the CLI's JSON output.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use gsflab_core::casestudies;
use gsflab_core::channels::RelationParams;
use gsflab_core::characterize::{characterize as characterize_core, CharacterizationInput};
use gsflab_core::fidelity::{fef, gsf_dist, gsf_indist, FefOptions};
use gsflab_core::linalg::{cr, SeededSampler};
use gsflab_core::multidof::{build_dist_state, DofLayout};
use gsflab_core::statefile::{load_state_json, LoadedState};
use gsflab_core::teleport::{f_g, TeleportInput};
use gsflab_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::ContractViolation { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)?
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)?
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?
            }
        }
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, value_to_py(py, val)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialize: {e}")))?;
    value_to_py(py, &json)
}

/// A quantum state of either formalism, loaded from JSON or built by one
/// of the constructors.
#[pyclass]
struct State {
    inner: LoadedState,
}

impl State {
    fn indist_regions(state: &gsflab_core::indist::IndistState) -> PyResult<(String, String)> {
        match state.regions() {
            [x, y] => Ok((x.clone(), y.clone())),
            other => Err(PyValueError::new_err(format!(
                "state has {} regions; these bindings handle exactly two",
                other.len()
            ))),
        }
    }
}

#[pymethods]
impl State {
    /// Parses either JSON state-file schema.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(State {
            inner: load_state_json(text).map_err(to_py_err)?,
        })
    }

    /// The standard d-level maximally entangled pair as a distinguishable
    /// single-DoF state.
    #[staticmethod]
    fn bell(d: usize) -> PyResult<Self> {
        let layout = DofLayout::new(1, d).map_err(to_py_err)?;
        let amp = cr(1.0 / (d as f64).sqrt());
        let amplitudes: Vec<(Vec<usize>, _)> = (0..d).map(|a| (vec![a, a], amp)).collect();
        let state = build_dist_state(&layout, &amplitudes).map_err(to_py_err)?;
        Ok(State {
            inner: LoadedState::Distinguishable(state),
        })
    }

    /// The two-photon optical-circuit state at polarization angle θ.
    #[staticmethod]
    #[pyo3(signature = (theta, phi=0.0))]
    fn optical(theta: f64, phi: f64) -> PyResult<Self> {
        let params = casestudies::OpticalCircuitParams::new(theta, phi, 1).map_err(to_py_err)?;
        let state = casestudies::optical_circuit_state(&params).map_err(to_py_err)?;
        Ok(State {
            inner: LoadedState::Distinguishable(state),
        })
    }

    /// The maximally entangled state of two indistinguishable particles in
    /// distinct regions ("boson" or "fermion").
    #[staticmethod]
    fn indist_mes(d: usize, statistics: &str) -> PyResult<Self> {
        let stats = gsflab_core::indist::Statistics::parse(statistics).map_err(to_py_err)?;
        let state = gsflab_core::indist::indist_mes(d, stats).map_err(to_py_err)?;
        Ok(State {
            inner: LoadedState::Indistinguishable(state),
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Serializes back to the matching JSON schema.
    fn to_json(&self) -> PyResult<String> {
        match &self.inner {
            LoadedState::Distinguishable(s) => {
                gsflab_core::multidof::dist_state_to_json(s).map_err(to_py_err)
            }
            LoadedState::Indistinguishable(s) => {
                gsflab_core::indist::indist_state_to_json(s).map_err(to_py_err)
            }
        }
    }

    /// Fully entangled fraction of the state viewed as one bipartite pair
    /// (indistinguishable states are projected to one particle per region
    /// first). Returns (value, converged).
    #[pyo3(signature = (restarts=16, seed=7))]
    fn fef(&self, restarts: usize, seed: u64) -> PyResult<(f64, bool)> {
        let opts = FefOptions { restarts, seed };
        let rho = match &self.inner {
            LoadedState::Distinguishable(s) => {
                let side = s.d().pow(s.dofs_a() as u32);
                s.density()
                    .clone()
                    .with_dims(vec![side, side])
                    .map_err(to_py_err)?
            }
            LoadedState::Indistinguishable(s) => {
                let (rx, ry) = Self::indist_regions(s)?;
                let (projected, _) =
                    gsflab_core::indist::slocc_project(s, &rx, &ry).map_err(to_py_err)?;
                let side = projected.d().pow(projected.dofs_a() as u32);
                projected
                    .density()
                    .clone()
                    .with_dims(vec![side, side])
                    .map_err(to_py_err)?
            }
        };
        let result = fef(&rho, &opts).map_err(to_py_err)?;
        Ok((result.value, result.converged))
    }

    /// Full generalized-singlet-fraction report as a dict (pair FEF matrix,
    /// row/column sums, value, argmax, post-selection probabilities).
    #[pyo3(signature = (restarts=16, seed=7))]
    fn gsf(&self, py: Python<'_>, restarts: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let opts = FefOptions { restarts, seed };
        let report = match &self.inner {
            LoadedState::Distinguishable(s) => gsf_dist(s, &opts).map_err(to_py_err)?,
            LoadedState::Indistinguishable(s) => {
                let (rx, ry) = Self::indist_regions(s)?;
                gsf_indist(s, &rx, &ry, &opts).map_err(to_py_err)?
            }
        };
        serialize_to_py(py, &report)
    }

    /// Monte Carlo generalized teleportation fidelity: returns
    /// (mean, stderr, (best_i, best_j)).
    #[pyo3(signature = (samples=4000, seed=7))]
    fn teleport_fg(&self, samples: usize, seed: u64) -> PyResult<(f64, f64, (usize, usize))> {
        let mut sampler = SeededSampler::new(seed);
        let (estimate, argmax) = match &self.inner {
            LoadedState::Distinguishable(s) => {
                f_g(TeleportInput::Dist(s), samples, &mut sampler).map_err(to_py_err)?
            }
            LoadedState::Indistinguishable(s) => {
                let (rx, ry) = Self::indist_regions(s)?;
                f_g(
                    TeleportInput::Indist {
                        state: s,
                        region_x: &rx,
                        region_y: &ry,
                    },
                    samples,
                    &mut sampler,
                )
                .map_err(to_py_err)?
            }
        };
        Ok((estimate.mean, estimate.stderr, argmax))
    }

    fn __repr__(&self) -> String {
        format!(
            "State(kind={:?}, d={}, n={})",
            self.inner.kind(),
            self.inner.d(),
            self.inner.n()
        )
    }
}

/// f_g from F_g through the generalized fidelity relation.
#[pyfunction(name = "relation_fg")]
#[pyo3(signature = (n, d, f_max, big_f_max, big_f_g))]
fn relation_fg_py(n: usize, d: usize, f_max: f64, big_f_max: f64, big_f_g: f64) -> PyResult<f64> {
    let params = RelationParams::new(n, d, f_max, big_f_max).map_err(to_py_err)?;
    gsflab_core::channels::relation_fg(big_f_g, &params).map_err(to_py_err)
}

/// (f_g, F_g) of the depolarized maximal state at noise parameter p.
#[pyfunction(name = "relation_lemmas")]
#[pyo3(signature = (n, d, f_max, big_f_max, p))]
fn relation_lemmas_py(
    n: usize,
    d: usize,
    f_max: f64,
    big_f_max: f64,
    p: f64,
) -> PyResult<(f64, f64)> {
    let params = RelationParams::new(n, d, f_max, big_f_max).map_err(to_py_err)?;
    gsflab_core::channels::relation_lemmas(p, &params).map_err(to_py_err)
}

/// Theoretical F_g ceiling 1 + (n−1)/d for distinguishable states.
#[pyfunction(name = "gsf_upper_bound")]
fn gsf_upper_bound_py(n: usize, d: usize) -> PyResult<f64> {
    gsflab_core::fidelity::gsf_upper_bound(n, d).map_err(to_py_err)
}

/// Monogamy check on a row of pairwise singlet fractions: returns
/// (lhs, rhs, satisfied).
#[pyfunction(name = "kay_monogamy_check")]
fn kay_monogamy_check_py(fefs: Vec<f64>, d: usize) -> PyResult<(f64, f64, bool)> {
    gsflab_core::fidelity::kay_monogamy_check(&fefs, d).map_err(to_py_err)
}

/// Structural conclusions from (d, n, F_g, f_g) as a dict.
#[pyfunction(name = "characterize")]
#[pyo3(signature = (d, n=None, big_f_g=None, f_g=None))]
fn characterize_py(
    py: Python<'_>,
    d: usize,
    n: Option<usize>,
    big_f_g: Option<f64>,
    f_g: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let report = characterize_core(&CharacterizationInput {
        d,
        n,
        big_f_g,
        f_g,
    })
    .map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Closed-form singlet fractions (ancilla-as-particle, ancilla-as-DoF).
#[pyfunction(name = "qpq_closed_forms")]
fn qpq_closed_forms_py(theta: f64) -> PyResult<(f64, f64)> {
    casestudies::qpq_gsf_closed_forms(theta).map_err(to_py_err)
}

/// Analytic success probability of the local test.
#[pyfunction(name = "chsh_analytic")]
fn chsh_analytic_py(theta: f64, psi1: f64, psi2: f64) -> f64 {
    casestudies::chsh_analytic(theta, psi1, psi2)
}

/// Analytic win rate (3 + cosθ)/4 of the pseudo-telepathy game.
#[pyfunction(name = "pseudo_telepathy_analytic")]
fn pseudo_telepathy_analytic_py(theta: f64) -> f64 {
    casestudies::pseudo_telepathy_analytic(theta)
}

#[pymodule]
fn gsflab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<State>()?;
    m.add_function(wrap_pyfunction!(relation_fg_py, m)?)?;
    m.add_function(wrap_pyfunction!(relation_lemmas_py, m)?)?;
    m.add_function(wrap_pyfunction!(gsf_upper_bound_py, m)?)?;
    m.add_function(wrap_pyfunction!(kay_monogamy_check_py, m)?)?;
    m.add_function(wrap_pyfunction!(characterize_py, m)?)?;
    m.add_function(wrap_pyfunction!(qpq_closed_forms_py, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_analytic_py, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_telepathy_analytic_py, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
