use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use linkgreg::design::ht_exact_moments as exact;
use linkgreg::estimators::DiagnosticKind;
use linkgreg::harness::{
    drift_diagnostic, parse_scenarios, run_scenario, summarize_to_table, MonteCarloSummary,
};
use linkgreg::io;
use linkgreg::linkage::{build_linkage, WeightKind};
use linkgreg::{
    AuxDatabase, BestLinks, Error, Estimate, EstimationContext, EstimatorKind, Sample, Target,
    WeightScheme,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse_target(target: &str) -> PyResult<Target> {
    match target.to_ascii_lowercase().as_str() {
        "mean" => Ok(Target::Mean),
        "total" => Ok(Target::Total),
        _ => Err(PyValueError::new_err(format!(
            "target must be 'mean' or 'total', got '{target}'"
        ))),
    }
}

fn parse_kind(name: &str) -> PyResult<EstimatorKind> {
    name.parse().map_err(to_py)
}

/// A point estimate with its variance estimate.
#[pyclass(frozen, name = "Estimate")]
struct PyEstimate {
    #[pyo3(get)]
    estimator: String,
    #[pyo3(get)]
    target: String,
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    variance: Option<f64>,
    #[pyo3(get)]
    coefficients: Option<Vec<f64>>,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn se(&self) -> Option<f64> {
        self.variance.map(f64::sqrt)
    }

    fn __repr__(&self) -> String {
        format!(
            "Estimate(estimator='{}', target='{}', value={}, variance={})",
            self.estimator,
            self.target,
            self.value,
            self.variance.map_or_else(|| "None".into(), |v| v.to_string())
        )
    }
}

impl From<Estimate> for PyEstimate {
    fn from(e: Estimate) -> Self {
        Self {
            estimator: e.estimator.label().into(),
            target: match e.target {
                Target::Mean => "mean".into(),
                Target::Total => "total".into(),
            },
            value: e.value,
            variance: e.variance,
            coefficients: e.coefficients,
        }
    }
}

/// Linked auxiliary data, ready to estimate from any sample.
///
/// `links` are `(unit, record)` pairs with units in `0..population_size` and
/// records indexing the rows of `aux`. The optional per-link lists are
/// parallel to `links`.
#[pyclass(name = "Context")]
struct PyContext {
    inner: EstimationContext,
}

fn sample_of(population_size: usize, units: Vec<usize>, pi: Option<Vec<f64>>) -> PyResult<Sample> {
    match pi {
        None => Sample::srswor(population_size, units),
        Some(pi) => Sample::with_inclusion(population_size, units, pi),
    }
    .map_err(to_py)
}

/// Orders `y` like the sorted units of a [`Sample`].
fn align(units: &[usize], y: Vec<f64>) -> PyResult<Vec<f64>> {
    if units.len() != y.len() {
        return Err(PyValueError::new_err(format!(
            "{} units with {} y values",
            units.len(),
            y.len()
        )));
    }
    let mut pairs: Vec<(usize, f64)> = units.iter().copied().zip(y).collect();
    pairs.sort_by_key(|&(u, _)| u);
    Ok(pairs.into_iter().map(|(_, v)| v).collect())
}

#[pymethods]
impl PyContext {
    #[new]
    #[pyo3(signature = (aux, links, population_size, reverse_weights=None, incidence_weights=None, best=None, unit_x=None, intercept=true))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        aux: Vec<Vec<f64>>,
        links: Vec<(usize, usize)>,
        population_size: usize,
        reverse_weights: Option<Vec<f64>>,
        incidence_weights: Option<Vec<f64>>,
        best: Option<Vec<bool>>,
        unit_x: Option<Vec<f64>>,
        intercept: bool,
    ) -> PyResult<Self> {
        let aux = AuxDatabase::from_rows(&aux).map_err(to_py)?;
        let covered: Vec<usize> = links
            .iter()
            .map(|&(i, _)| i)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let linkage = build_linkage(&links, &covered, population_size, &aux).map_err(to_py)?;
        let triples = |w: &[f64]| -> PyResult<Vec<(usize, usize, f64)>> {
            if w.len() != links.len() {
                return Err(PyValueError::new_err(format!(
                    "{} weights for {} links",
                    w.len(),
                    links.len()
                )));
            }
            Ok(links.iter().zip(w).map(|(&(i, l), &w)| (i, l, w)).collect())
        };
        let mut ctx = EstimationContext::new(aux, linkage.clone()).map_err(to_py)?;
        if !intercept {
            ctx = ctx.without_intercept();
        }
        for (kind, w) in [
            (WeightKind::Reverse, reverse_weights),
            (WeightKind::Incidence, incidence_weights),
        ] {
            if let Some(w) = w {
                let scheme = WeightScheme::from_triples(kind, &linkage, &triples(&w)?).map_err(to_py)?;
                ctx = ctx.with_weights(scheme).map_err(to_py)?;
            }
        }
        if let Some(flags) = best {
            if flags.len() != links.len() {
                return Err(PyValueError::new_err("best flags must be parallel to links"));
            }
            let pairs: Vec<(usize, usize)> = links
                .iter()
                .zip(&flags)
                .filter(|(_, &b)| b)
                .map(|(&p, _)| p)
                .collect();
            let best = BestLinks::from_pairs(&linkage, &pairs).map_err(to_py)?;
            ctx = ctx.with_best_links(best).map_err(to_py)?;
        }
        if let Some(x) = unit_x {
            ctx = ctx.with_unit_covariates(x).map_err(to_py)?;
        }
        Ok(Self { inner: ctx })
    }

    #[getter]
    fn population_size(&self) -> usize {
        self.inner.linkage().population_size()
    }

    #[getter]
    fn n_links(&self) -> usize {
        self.inner.linkage().n_links()
    }

    #[getter]
    fn scope(&self) -> &'static str {
        match self.inner.linkage().scope() {
            linkgreg::linkage::Scope::Population => "population",
            linkgreg::linkage::Scope::Sample => "sample",
        }
    }

    /// Estimate for the sampled `units`; `pi` defaults to SRSWOR.
    #[pyo3(signature = (estimator, units, y, pi=None, target="mean"))]
    fn estimate(
        &self,
        estimator: &str,
        units: Vec<usize>,
        y: Vec<f64>,
        pi: Option<Vec<f64>>,
        target: &str,
    ) -> PyResult<PyEstimate> {
        let kind = parse_kind(estimator)?;
        let target = parse_target(target)?;
        let y = align(&units, y)?;
        let sample = sample_of(self.population_size(), units, pi)?;
        let e = self.inner.estimate(kind, &sample, &y).map_err(to_py)?;
        Ok(e.to_target(target).into())
    }

    /// `(difference, variance, z)` per auxiliary component.
    #[pyo3(signature = (kind, units, pi=None))]
    fn diagnose(
        &self,
        kind: &str,
        units: Vec<usize>,
        pi: Option<Vec<f64>>,
    ) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
        let kind = match kind.to_ascii_lowercase().as_str() {
            "sri" => DiagnosticKind::Sri,
            "sbl" => DiagnosticKind::Sbl,
            "sls" => DiagnosticKind::Sls,
            _ => return Err(PyValueError::new_err(format!("no diagnostic for '{kind}'"))),
        };
        let sample = sample_of(self.population_size(), units, pi)?;
        let report = self.inner.diagnose(kind, &sample).map_err(to_py)?;
        Ok(report
            .components
            .iter()
            .map(|c| (c.value, c.variance, c.z))
            .collect())
    }
}

/// Estimates from CSV files.
#[pyfunction]
#[pyo3(signature = (aux, links, sample, population_size, estimators, target="mean", incidence=None))]
fn estimate_files(
    aux: PathBuf,
    links: PathBuf,
    sample: PathBuf,
    population_size: usize,
    estimators: Vec<String>,
    target: &str,
    incidence: Option<PathBuf>,
) -> PyResult<Vec<PyEstimate>> {
    let target = parse_target(target)?;
    let inputs = io::load_inputs(&aux, &links, &sample, population_size).map_err(to_py)?;
    let incidence = match incidence {
        Some(p) => {
            let rows = io::read_links(File::open(p)?).map_err(to_py)?;
            Some(inputs.resolve_weights(&rows).map_err(to_py)?)
        }
        None => None,
    };
    estimators
        .iter()
        .map(|name| {
            let kind = parse_kind(name)?;
            let ctx = inputs.context_for(kind, incidence.as_deref()).map_err(to_py)?;
            let e = ctx.estimate(kind, &inputs.sample, &inputs.y).map_err(to_py)?;
            Ok(e.to_target(target).into())
        })
        .collect()
}

/// One simulated block.
#[pyclass(frozen, name = "BlockSummary")]
struct PyBlock {
    #[pyo3(get)]
    name: String,
    #[pyo3(get)]
    truth: f64,
    #[pyo3(get)]
    replicates: usize,
    metrics: HashMap<String, HashMap<String, f64>>,
    order: Vec<String>,
}

#[pymethods]
impl PyBlock {
    /// Estimator labels in table order.
    #[getter]
    fn estimators(&self) -> Vec<String> {
        self.order.clone()
    }

    /// `{metric: value}` for one estimator.
    fn metrics(&self, estimator: &str) -> PyResult<HashMap<String, f64>> {
        self.metrics
            .get(estimator)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("no estimator '{estimator}' in this block")))
    }
}

impl From<&MonteCarloSummary> for PyBlock {
    fn from(s: &MonteCarloSummary) -> Self {
        let metrics = s
            .estimators
            .iter()
            .map(|e| {
                let m: HashMap<String, f64> = [
                    ("mean", e.mean),
                    ("variance", e.variance),
                    ("mse", e.mse),
                    ("mean_variance_estimate", e.mean_variance_estimate),
                    ("se", e.se),
                    ("ese", e.ese),
                    ("re", e.re),
                    ("rmse", e.rmse),
                    ("failures", e.failures as f64),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
                (e.column.label().to_string(), m)
            })
            .collect();
        Self {
            name: s.config.name.clone(),
            truth: s.truth,
            replicates: s.replicates,
            metrics,
            order: s.estimators.iter().map(|e| e.column.label().to_string()).collect(),
        }
    }
}

#[pyclass(frozen, name = "Simulation")]
struct PySimulation {
    #[pyo3(get)]
    text: String,
    #[pyo3(get)]
    drift: Vec<String>,
    blocks: Vec<Py<PyBlock>>,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn blocks(&self, py: Python<'_>) -> Vec<Py<PyBlock>> {
        self.blocks.iter().map(|b| b.clone_ref(py)).collect()
    }
}

/// Runs every block of a scenario text.
#[pyfunction]
#[pyo3(signature = (scenario, replicates=None, seed=None))]
fn run_scenarios(
    py: Python<'_>,
    scenario: &str,
    replicates: Option<usize>,
    seed: Option<u64>,
) -> PyResult<PySimulation> {
    let mut configs = parse_scenarios(scenario).map_err(to_py)?;
    for (b, c) in configs.iter_mut().enumerate() {
        if let Some(k) = replicates {
            c.replicates = k;
        }
        if let Some(s) = seed {
            c.seed = s.wrapping_add(b as u64);
        }
    }
    let summaries = py
        .detach(|| configs.iter().map(run_scenario).collect::<linkgreg::Result<Vec<_>>>())
        .map_err(to_py)?;
    let blocks = summaries
        .iter()
        .map(|s| Py::new(py, PyBlock::from(s)))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PySimulation {
        text: summarize_to_table(&summaries).to_text(),
        drift: drift_diagnostic(&summaries).iter().map(ToString::to_string).collect(),
        blocks,
    })
}

/// Exact HT moments by enumeration: `(samples, E[t], Var[t], E[v])`.
#[pyfunction]
fn ht_exact_moments(y: Vec<f64>, n: usize) -> PyResult<(u64, f64, f64, Option<f64>)> {
    let m = exact(&y, n).map_err(to_py)?;
    Ok((m.samples, m.expectation, m.variance, m.expected_variance_estimate))
}

#[pymodule]
pub fn pylinkgreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyContext>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyBlock>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(estimate_files, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(ht_exact_moments, m)?)?;
    Ok(())
}
