//! Python bindings: truncated series, Lie algebras with their r-matrix
//! calculus, the function-algebra computations and the verification suites.
//! Rationals cross the boundary as strings ("1/2"); structured results come
//! back as plain dicts and lists.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;

use qtwist::cli::{self, BracketKind, Command, ProductKind, RunConfig, RunOptions, Suite, ALL_SUITES};
use qtwist::kernel::{self, parse_q, q_to_string, Q};
use qtwist::liebialg::{self, LieAlgebra as CoreAlgebra, LieTensor};
use qtwist::linalg::SparseVec;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts ints, strings like "3/4" and fractions.Fraction.
fn to_q(x: &Bound<'_, PyAny>) -> PyResult<Q> {
    let s = x.str()?.to_string();
    parse_q(&s).ok_or_else(|| value_err(format!("not a rational: {s:?}")))
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Truncated power series in ħ with rational coefficients.
#[pyclass(name = "Series", module = "qtwist_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySeries {
    inner: kernel::Series,
}

#[pymethods]
impl PySeries {
    #[new]
    fn new(coeffs: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        if coeffs.is_empty() {
            return Err(value_err("a series needs at least one coefficient"));
        }
        let c = coeffs.iter().map(to_q).collect::<PyResult<Vec<_>>>()?;
        Ok(PySeries { inner: kernel::Series::from_vec(c) })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn coeffs(&self) -> Vec<String> {
        self.inner.to_strings()
    }

    fn __add__(&self, o: &PySeries) -> PyResult<PySeries> {
        self.inner.check_order(&o.inner).map_err(value_err)?;
        Ok(PySeries { inner: &self.inner + &o.inner })
    }

    fn __sub__(&self, o: &PySeries) -> PyResult<PySeries> {
        self.inner.check_order(&o.inner).map_err(value_err)?;
        Ok(PySeries { inner: &self.inner - &o.inner })
    }

    fn __mul__(&self, o: &PySeries) -> PyResult<PySeries> {
        Ok(PySeries { inner: kernel::series_mul(&self.inner, &o.inner).map_err(value_err)? })
    }

    fn __neg__(&self) -> PySeries {
        PySeries { inner: -&self.inner }
    }

    fn inverse(&self) -> PyResult<PySeries> {
        kernel::series_inv(&self.inner)
            .map(|inner| PySeries { inner })
            .map_err(|e| PyZeroDivisionError::new_err(e.to_string()))
    }

    fn exp(&self) -> PyResult<PySeries> {
        Ok(PySeries { inner: kernel::exp_series(&self.inner).map_err(value_err)? })
    }

    fn __eq__(&self, o: &PySeries) -> bool {
        self.inner == o.inner
    }

    fn __repr__(&self) -> String {
        format!("Series({})", self.inner)
    }
}

/// [n]_q with q = e^{ħd/2}, truncated at `order`.
#[pyfunction]
#[pyo3(signature = (order, n, d = None))]
fn q_int(order: usize, n: i64, d: Option<Bound<'_, PyAny>>) -> PyResult<PySeries> {
    let d = d.map(|x| to_q(&x)).transpose()?.unwrap_or_else(|| kernel::q(2));
    Ok(PySeries { inner: kernel::q_int(order, n, &d) })
}

#[pyfunction]
#[pyo3(signature = (order, n, i, d = None))]
fn q_binom(order: usize, n: i64, i: i64, d: Option<Bound<'_, PyAny>>) -> PyResult<PySeries> {
    let d = d.map(|x| to_q(&x)).transpose()?.unwrap_or_else(|| kernel::q(2));
    Ok(PySeries { inner: kernel::q_binom(order, n, i, &d).map_err(value_err)? })
}

/// Element of g^⊗k for a fixed algebra.
#[pyclass(name = "Tensor", module = "qtwist_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTensor {
    g: Arc<CoreAlgebra>,
    inner: LieTensor,
}

#[pymethods]
impl PyTensor {
    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity
    }

    /// [(legs, coeff)] with basis labels and the coefficient as a string.
    fn terms(&self) -> Vec<(Vec<String>, String)> {
        self.inner
            .terms
            .iter()
            .map(|(idx, c)| (idx.iter().map(|&i| self.g.labels[i].clone()).collect(), q_to_string(c)))
            .collect()
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    fn symmetric_part(&self) -> PyTensor {
        PyTensor { g: self.g.clone(), inner: self.inner.symmetric_part() }
    }

    fn antisymmetric_part(&self) -> PyTensor {
        PyTensor { g: self.g.clone(), inner: self.inner.antisymmetric_part() }
    }

    fn __add__(&self, o: &PyTensor) -> PyResult<PyTensor> {
        self.same(o)?;
        Ok(PyTensor { g: self.g.clone(), inner: self.inner.add(&o.inner) })
    }

    fn __sub__(&self, o: &PyTensor) -> PyResult<PyTensor> {
        self.same(o)?;
        Ok(PyTensor { g: self.g.clone(), inner: self.inner.sub(&o.inner) })
    }

    fn __eq__(&self, o: &PyTensor) -> bool {
        self.g.labels == o.g.labels && self.inner == o.inner
    }

    fn __repr__(&self) -> String {
        format!("Tensor({})", self.inner.display(&self.g))
    }
}

impl PyTensor {
    fn same(&self, o: &PyTensor) -> PyResult<()> {
        if self.g.labels != o.g.labels || self.inner.arity != o.inner.arity {
            return Err(value_err("tensors live on different algebras or arities"));
        }
        Ok(())
    }
}

/// sl2 or sl3 with the trace form rescaled by `form_scale`.
#[pyclass(name = "LieAlgebra", module = "qtwist_py", frozen)]
struct PyLieAlgebra {
    g: Arc<CoreAlgebra>,
}

impl PyLieAlgebra {
    fn vec(&self, label: &str) -> PyResult<SparseVec> {
        Ok(self.g.basis_vec(self.g.index(label).map_err(value_err)?))
    }

    fn wrap(&self, g: Arc<CoreAlgebra>, t: LieTensor) -> PyTensor {
        PyTensor { g, inner: t }
    }

    fn r(&self) -> PyResult<LieTensor> {
        Ok(liebialg::standard_r(&self.g).map_err(value_err)?.r)
    }
}

#[pymethods]
impl PyLieAlgebra {
    #[new]
    #[pyo3(signature = (name = "sl2", form_scale = None))]
    fn new(name: &str, form_scale: Option<Bound<'_, PyAny>>) -> PyResult<Self> {
        let g = match form_scale {
            Some(s) => CoreAlgebra::with_form_scale(name, to_q(&s)?),
            None => CoreAlgebra::named(name),
        }
        .map_err(value_err)?;
        Ok(PyLieAlgebra { g: Arc::new(g) })
    }

    #[getter]
    fn name(&self) -> String {
        self.g.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.g.dim()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.g.labels.clone()
    }

    /// [x, y] as {label: coeff}.
    fn bracket(&self, x: &str, y: &str) -> PyResult<BTreeMap<String, String>> {
        let z = self.g.bracket(&self.vec(x)?, &self.vec(y)?);
        Ok(z.iter().map(|(i, c)| (self.g.labels[*i].clone(), q_to_string(c))).collect())
    }

    fn form(&self, x: &str, y: &str) -> PyResult<String> {
        Ok(q_to_string(&self.g.form(&self.vec(x)?, &self.vec(y)?)))
    }

    fn standard_r(&self) -> PyResult<PyTensor> {
        Ok(self.wrap(self.g.clone(), self.r()?))
    }

    /// δ(x) = [x⊗1 + 1⊗x, r_st]
    fn cobracket(&self, x: &str) -> PyResult<PyTensor> {
        Ok(self.wrap(self.g.clone(), liebialg::cobracket(&self.g, &self.r()?, &self.vec(x)?)))
    }

    /// Mix^m(r_st) on g^m
    fn mix(&self, m: usize) -> PyResult<PyTensor> {
        Ok(self.wrap(Arc::new(self.g.power(m)), liebialg::mix_tensor(&self.g, &self.r()?, m)))
    }

    /// r^(m) = (r_st, …, r_st) − Mix^m(r_st)
    fn twisted_r(&self, m: usize) -> PyResult<PyTensor> {
        Ok(self.wrap(Arc::new(self.g.power(m)), liebialg::twisted_r(&self.g, &self.r()?, m)))
    }

    /// CYBE left side of an arity-2 tensor on this algebra or a power of it.
    fn cybe_residual(&self, r: &PyTensor) -> PyResult<PyTensor> {
        if r.inner.arity != 2 {
            return Err(value_err("CYBE needs an arity-2 tensor"));
        }
        Ok(self.wrap(r.g.clone(), liebialg::cybe_residual(&r.g, &r.inner)))
    }

    fn __repr__(&self) -> String {
        format!("LieAlgebra({:?}, dim={})", self.g.name, self.g.dim())
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    algebra: &str,
    m: usize,
    hbar_order: usize,
    degree_bound: Option<usize>,
    weight_bound: i64,
    form_scale: Option<Bound<'_, PyAny>>,
    seed: u64,
    suites: Option<Vec<String>>,
) -> PyResult<RunConfig> {
    let suites = match suites {
        None => ALL_SUITES.to_vec(),
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                out.push(match n.as_str() {
                    "classical" => Suite::Classical,
                    "quantum" => Suite::Quantum,
                    "coiso" => Suite::Coiso,
                    "determinism" => Suite::Determinism,
                    other => return Err(value_err(format!("unknown suite {other:?}"))),
                });
            }
            out.sort();
            out.dedup();
            out
        }
    };
    let cfg = RunConfig {
        algebra: algebra.to_string(),
        m,
        hbar_order,
        degree_bound,
        weight_bound,
        form_scale: form_scale.map(|s| to_q(&s)).transpose()?.unwrap_or_else(|| kernel::q(1)),
        seed,
        suites,
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Run the verification suites; returns the report as a dict (same schema as the CLI).
#[pyfunction]
#[pyo3(signature = (algebra = "sl2", m = 2, hbar_order = 3, degree_bound = None, weight_bound = 2, form_scale = None, seed = cli::DEFAULT_SEED, suites = None))]
#[allow(clippy::too_many_arguments)]
fn run_suite(
    py: Python<'_>,
    algebra: &str,
    m: usize,
    hbar_order: usize,
    degree_bound: Option<usize>,
    weight_bound: i64,
    form_scale: Option<Bound<'_, PyAny>>,
    seed: u64,
    suites: Option<Vec<String>>,
) -> PyResult<Py<PyAny>> {
    let cfg = config(algebra, m, hbar_order, degree_bound, weight_bound, form_scale, seed, suites)?;
    let report = py.detach(|| cli::run_suite(&cfg, RunOptions::default())).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (report.to_json(),))?.unbind())
}

fn compute(py: Python<'_>, cmd: Command, cfg: RunConfig) -> PyResult<Py<PyAny>> {
    let v = py.detach(|| cli::compute(&cmd, &cfg)).map_err(value_err)?;
    json_to_py(py, &v)
}

fn plain_config(algebra: &str, m: usize, hbar_order: usize) -> PyResult<RunConfig> {
    config(algebra, m, hbar_order, None, 2, None, cli::DEFAULT_SEED, None)
}

/// Poisson bracket of two function terms such as "phi:1:0@0" or "c:1:0:1@1".
/// kind is "twisted" ({,}_r^(m) on G^m) or "mixed" ({,}^(m) on (N\G)^m).
#[pyfunction]
#[pyo3(signature = (kind, f, g, m = 2, algebra = "sl2"))]
fn bracket(py: Python<'_>, kind: &str, f: &str, g: &str, m: usize, algebra: &str) -> PyResult<Py<PyAny>> {
    let kind = match kind {
        "twisted" => BracketKind::Twisted,
        "mixed" => BracketKind::Mixed,
        other => return Err(value_err(format!("unknown bracket kind {other:?}"))),
    };
    compute(py, Command::Bracket { kind, f: f.into(), g: g.into() }, plain_config(algebra, m, 3)?)
}

/// Product of two quantized function terms (U_h(sl2) only).
#[pyfunction]
#[pyo3(signature = (f, g, product = "affine", m = 2, hbar_order = 3))]
fn qmultiply(py: Python<'_>, f: &str, g: &str, product: &str, m: usize, hbar_order: usize) -> PyResult<Py<PyAny>> {
    let product = match product {
        "plain" => ProductKind::Plain,
        "affine" => ProductKind::Affine,
        "twisted" => ProductKind::Twisted,
        "conjugated" => ProductKind::Conjugated,
        other => return Err(value_err(format!("unknown product {other:?}"))),
    };
    compute(py, Command::Qmultiply { f: f.into(), g: g.into(), product }, plain_config("sl2", m, hbar_order)?)
}

/// Twi^m(R) for U_h(sl2), truncated at ħ^hbar_order.
#[pyfunction]
#[pyo3(signature = (m, hbar_order = 3))]
fn twi(py: Python<'_>, m: usize, hbar_order: usize) -> PyResult<Py<PyAny>> {
    compute(py, Command::Twi { factors: m }, plain_config("sl2", m.max(1), hbar_order)?)
}

/// Windowed R-compatibility of U = ⟨gens⟩ and strong coisotropy of U^⊗m.
#[pyfunction]
#[pyo3(signature = (gens, m = 1, hbar_order = 3))]
fn coiso_check(py: Python<'_>, gens: &str, m: usize, hbar_order: usize) -> PyResult<Py<PyAny>> {
    compute(py, Command::CoisoCheck { gens: gens.into() }, plain_config("sl2", m, hbar_order)?)
}

#[pymodule]
fn qtwist_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySeries>()?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PyLieAlgebra>()?;
    m.add_function(wrap_pyfunction!(q_int, m)?)?;
    m.add_function(wrap_pyfunction!(q_binom, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(bracket, m)?)?;
    m.add_function(wrap_pyfunction!(qmultiply, m)?)?;
    m.add_function(wrap_pyfunction!(twi, m)?)?;
    m.add_function(wrap_pyfunction!(coiso_check, m)?)?;
    m.add("REPORT_SCHEMA", cli::REPORT_SCHEMA)?;
    Ok(())
}
