//! Python bindings: networks, the backward analysis, the estimators and the
//! end-to-end check.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use probrob::check::{check_probabilistic_robustness, RunConfig};
use probrob::{
    abstract_interpret, construct_product, estimate_closeness_mass, mc_baseline, parse_network,
    AxisBox, Distribution, NetworkSpec, PropertyConfig,
};

fn py_err(e: probrob::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed network in the text format.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    spec: NetworkSpec,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let spec = parse_network(text.as_bytes()).map_err(py_err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| py_err(e.into()))?;
        let spec = parse_network(&bytes).map_err(py_err)?;
        Ok(Self { spec })
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Number of leaves of the translated conditional affine tree.
    fn branch_count(&self) -> u128 {
        self.spec.to_cat().branch_count()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.spec.to_cat().eval(&x).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.spec.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(input_dim={}, output_dim={}, layers={})",
            self.spec.input_dim(),
            self.spec.output_dim(),
            self.spec.layers().len()
        )
    }
}

/// Polyhedra over input pairs `x ⊕ x′` that cover every violation.
#[pyclass(name = "PolySet", frozen)]
struct PyPolySet {
    set: probrob::PolySet,
    disjuncts: usize,
    before_merge: usize,
}

#[pymethods]
impl PyPolySet {
    fn __len__(&self) -> usize {
        self.set.len()
    }

    fn contains(&self, pair: Vec<f64>) -> bool {
        self.set.contains(&pair)
    }

    fn dump(&self) -> String {
        self.set.dump()
    }

    #[getter]
    fn disjuncts(&self) -> usize {
        self.disjuncts
    }

    #[getter]
    fn before_merge(&self) -> usize {
        self.before_merge
    }

    /// Constraints per polyhedron as `(coeffs, bound, strict)` tuples.
    fn constraints(&self) -> Vec<Vec<(Vec<f64>, f64, bool)>> {
        self.set
            .polys()
            .iter()
            .map(|p| {
                p.constraints()
                    .iter()
                    .map(|c| (c.coeffs.clone(), c.bound, c.strict))
                    .collect()
            })
            .collect()
    }
}

#[pyfunction]
#[pyo3(name = "abstract_interpret", signature = (network, k, delta, lo, hi, budget=64))]
fn py_abstract_interpret(
    network: &PyNetwork,
    k: f64,
    delta: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    budget: usize,
) -> PyResult<PyPolySet> {
    let spec = &network.spec;
    let cfg = PropertyConfig::new(k, delta, spec.input_dim(), spec.output_dim()).map_err(py_err)?;
    let domain = AxisBox::new(lo, hi).map_err(py_err)?;
    let pf = construct_product(&spec.to_cat());
    let r = abstract_interpret(&pf, &cfg, &domain, budget).map_err(py_err)?;
    Ok(PyPolySet {
        set: r.polys,
        disjuncts: r.disjuncts,
        before_merge: r.before_merge,
    })
}

/// `(probability, std_error)` of a violation under the uniform distribution
/// on `[lo, hi]`, conditioned on closeness, by plain Monte Carlo.
#[pyfunction]
#[pyo3(name = "mc_baseline", signature = (network, k, delta, lo, hi, samples, seed=0))]
fn py_mc_baseline(
    network: &PyNetwork,
    k: f64,
    delta: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let spec = &network.spec;
    let cfg = PropertyConfig::new(k, delta, spec.input_dim(), spec.output_dim()).map_err(py_err)?;
    let d = AxisBox::new(lo, hi)
        .and_then(Distribution::uniform)
        .map_err(py_err)?;
    let p = mc_baseline(&spec.to_cat(), &cfg, &d, samples, seed).map_err(py_err)?;
    Ok((p.probability, p.std_error))
}

/// `(probability, std_error)` that two uniform draws are within `delta`.
#[pyfunction]
#[pyo3(name = "closeness_mass", signature = (lo, hi, delta, samples, seed=0))]
fn py_closeness_mass(
    lo: Vec<f64>,
    hi: Vec<f64>,
    delta: f64,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let d = AxisBox::new(lo, hi)
        .and_then(Distribution::uniform)
        .map_err(py_err)?;
    let p = estimate_closeness_mass(&d, delta, samples, seed).map_err(py_err)?;
    Ok((p.probability, p.std_error))
}

/// Runs a TOML config end to end. Returns `(verdict, report_json)`; the
/// verdict is `"T"`, `"F"` or `None` for a failed run.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn check(config: PathBuf, seed: Option<u64>) -> PyResult<(Option<String>, String)> {
    let mut cfg = RunConfig::load(&config).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = check_probabilistic_robustness(&cfg);
    Ok((report.verdict.map(|v| v.to_string()), report.to_json()))
}

#[pymodule]
fn probrob_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyPolySet>()?;
    m.add_function(wrap_pyfunction!(py_abstract_interpret, m)?)?;
    m.add_function(wrap_pyfunction!(py_mc_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(py_closeness_mass, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
