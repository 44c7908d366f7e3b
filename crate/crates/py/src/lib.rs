//! Python bindings for the attrition-correction estimators: CSV loading,
//! the CiC and IPW estimator battery with bootstrap inference, the
//! random-assignment diagnostic, and the simulation engine.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use std::collections::HashMap;
use std::path::Path;

use cic_attrition::bootstrap::{self, BaseStatistic, BootstrapSpec, ResampleUnit, Statistic};
use cic_attrition::error::Error;
use cic_attrition::panel::{Cell, CsvSchema, PanelSample};
use cic_attrition::sim;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A validated two-period panel.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Panel {
    inner: PanelSample,
}

#[pymethods]
impl Panel {
    /// Load a panel from CSV (columns id,g,r,y0,y1[,cluster]).
    #[staticmethod]
    #[pyo3(signature = (path, cluster_col=None))]
    fn load_csv(path: &str, cluster_col: Option<String>) -> PyResult<Panel> {
        let schema = CsvSchema {
            cluster: cluster_col.or_else(|| CsvSchema::default().cluster),
            ..CsvSchema::default()
        };
        let inner = PanelSample::load_csv(Path::new(path), &schema).map_err(to_py_err)?;
        Ok(Panel { inner })
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        self.inner
            .save_csv(Path::new(path), &CsvSchema::default())
            .map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Cell counts as {(g, r): count}.
    fn cell_counts(&self) -> HashMap<(u8, u8), usize> {
        Cell::ALL
            .iter()
            .map(|cell| ((cell.g, cell.r), self.inner.cell_count(*cell)))
            .collect()
    }

    /// (overall, treatment, control) attrition rates.
    fn attrition(&self) -> (f64, f64, f64) {
        let summary = self.inner.attrition_summary();
        (summary.overall, summary.treatment, summary.control)
    }

    fn __repr__(&self) -> String {
        format!(
            "Panel(n={}, attrition={:.3})",
            self.inner.len(),
            self.inner.attrition_summary().overall
        )
    }
}

/// One estimator's result with percentile-bootstrap inference.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Estimate {
    #[pyo3(get)]
    estimand: String,
    #[pyo3(get)]
    estimator: String,
    #[pyo3(get)]
    route: String,
    #[pyo3(get)]
    point: f64,
    #[pyo3(get)]
    se: f64,
    #[pyo3(get)]
    ci: (f64, f64),
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate({}: {:.4} ± {:.4})",
            self.estimator, self.point, self.se
        )
    }
}

fn route_of(stat: BaseStatistic) -> &'static str {
    match stat {
        BaseStatistic::NaiveDeltaR => "uncorrected",
        BaseStatistic::AttR | BaseStatistic::AtuR | BaseStatistic::AteR => "respondents-only",
        BaseStatistic::AteRandomAssignment => "random-assignment",
        BaseStatistic::AteNoRandomAssignment => "no-random-assignment",
        BaseStatistic::IpwAteR { .. } | BaseStatistic::IpwAte { .. } => "missing-at-random",
    }
}

fn estimand_of(stat: BaseStatistic) -> &'static str {
    match stat {
        BaseStatistic::NaiveDeltaR | BaseStatistic::AteR | BaseStatistic::IpwAteR { .. } => "ATE-R",
        BaseStatistic::AttR => "ATT-R",
        BaseStatistic::AtuR => "ATU-R",
        BaseStatistic::AteRandomAssignment
        | BaseStatistic::AteNoRandomAssignment
        | BaseStatistic::IpwAte { .. } => "ATE",
    }
}

/// Run the full estimator battery with bootstrap SEs and 95% CIs.
/// Estimators whose preconditions fail are omitted.
#[pyfunction]
#[pyo3(signature = (panel, bootstrap_draws=199, seed=0, cluster=false))]
fn estimate(
    panel: &Panel,
    bootstrap_draws: usize,
    seed: u64,
    cluster: bool,
) -> PyResult<Vec<Estimate>> {
    let spec = BootstrapSpec {
        draws: bootstrap_draws,
        seed,
        resample_unit: if cluster {
            ResampleUnit::Cluster
        } else {
            ResampleUnit::Unit
        },
        ci_level: 0.95,
    };
    spec.validate(&panel.inner).map_err(to_py_err)?;
    let battery = [
        BaseStatistic::NaiveDeltaR,
        BaseStatistic::AttR,
        BaseStatistic::AtuR,
        BaseStatistic::AteR,
        BaseStatistic::AteRandomAssignment,
        BaseStatistic::AteNoRandomAssignment,
        BaseStatistic::IpwAteR { trimmed: false },
        BaseStatistic::IpwAteR { trimmed: true },
        BaseStatistic::IpwAte { trimmed: false },
        BaseStatistic::IpwAte { trimmed: true },
    ];
    let mut rows = Vec::new();
    for stat in battery {
        if let Ok(result) = bootstrap::bootstrap(&panel.inner, Statistic::Single(stat), &spec) {
            rows.push(Estimate {
                estimand: estimand_of(stat).into(),
                estimator: stat.label(),
                route: route_of(stat).into(),
                point: result.point,
                se: result.se,
                ci: result.ci,
            });
        }
    }
    Ok(rows)
}

/// Random-assignment diagnostic: (untreated_stat, untreated_p,
/// treated_stat, treated_p).
#[pyfunction]
#[pyo3(signature = (panel, bootstrap_draws=199, seed=0))]
fn diagnose(panel: &Panel, bootstrap_draws: usize, seed: u64) -> PyResult<(f64, f64, f64, f64)> {
    let spec = BootstrapSpec {
        draws: bootstrap_draws,
        seed,
        resample_unit: ResampleUnit::Unit,
        ci_level: 0.95,
    };
    let diag = bootstrap::diagnostic_pvalue(&panel.inner, &spec).map_err(to_py_err)?;
    Ok((
        diag.untreated_stat,
        diag.untreated_p,
        diag.treated_stat,
        diag.treated_p,
    ))
}

/// Draw one sample from a design preset (I, II, or III).
#[pyfunction]
#[pyo3(signature = (design, n=2000, sigma=2.0, beta2=0.0, seed=0, replication=0))]
fn draw_design(
    design: &str,
    n: usize,
    sigma: f64,
    beta2: f64,
    seed: u64,
    replication: u64,
) -> PyResult<Panel> {
    let d = sim::design_preset(design, n, sigma, beta2, seed).map_err(to_py_err)?;
    Ok(Panel {
        inner: sim::draw_sample(&d, replication).sample,
    })
}

/// Monte Carlo summary rows as dicts with keys estimand, estimator, true,
/// mean, bias, sd, rmse, failures.
#[pyfunction]
#[pyo3(signature = (design, n=2000, sigma=2.0, beta2=0.0, reps=100, seed=0, truth_mc_size=1_000_000))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    design: &str,
    n: usize,
    sigma: f64,
    beta2: f64,
    reps: usize,
    seed: u64,
    truth_mc_size: usize,
) -> PyResult<Vec<Py<pyo3::types::PyDict>>> {
    use pyo3::types::PyDict;
    let d = sim::design_preset(design, n, sigma, beta2, seed).map_err(to_py_err)?;
    let summary =
        sim::run_monte_carlo(&d, reps, &sim::default_estimators(), truth_mc_size).map_err(to_py_err)?;
    summary
        .rows
        .iter()
        .map(|row| {
            let dict = PyDict::new(py);
            dict.set_item("estimand", &row.estimand)?;
            dict.set_item("estimator", &row.estimator)?;
            dict.set_item("true", row.true_value)?;
            dict.set_item("mean", row.mean)?;
            dict.set_item("bias", row.bias)?;
            dict.set_item("sd", row.sd)?;
            dict.set_item("rmse", row.rmse)?;
            dict.set_item("failures", row.failures)?;
            Ok(dict.unbind())
        })
        .collect()
}

#[pymodule]
fn cic_attrition_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Panel>()?;
    m.add_class::<Estimate>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(draw_design, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
