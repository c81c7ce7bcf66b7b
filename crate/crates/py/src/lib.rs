//! Python bindings: networks, measurement sets, partitions and both solvers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mase::experiment::{self, Method};
use mase::linalg::Backend;
use mase::measurement::{self, GenerationConfig, MaskFamily, MeasurementType, StateVector};
use mase::network::{self as net, synthetic, BusBranchNetwork, CaseFormat};
use mase::partition as part;
use mase::solver::{self, SolveOutput, SolverConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(err)
}

#[pyclass(module = "mase_py", frozen)]
struct Network {
    inner: BusBranchNetwork,
}

#[pymethods]
impl Network {
    /// Parse a case file; the format is inferred from the extension unless given.
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn from_file(path: &str, format: Option<&str>) -> PyResult<Self> {
        let p = std::path::Path::new(path);
        let format = match format {
            Some(f) => f.parse::<CaseFormat>().map_err(err)?,
            None => CaseFormat::from_path(p),
        };
        let text = std::fs::read_to_string(p).map_err(err)?;
        Self::from_string(&text, format)
    }

    #[staticmethod]
    #[pyo3(name = "from_string", signature = (text, format="matpower"))]
    fn py_from_string(text: &str, format: &str) -> PyResult<Self> {
        Self::from_string(text, format.parse::<CaseFormat>().map_err(err)?)
    }

    #[staticmethod]
    #[pyo3(signature = (n_bus, seed=0))]
    fn synthetic(n_bus: usize, seed: u64) -> PyResult<Self> {
        let inner = synthetic::random_network(&synthetic::SyntheticConfig::new(n_bus, seed))
            .map_err(err)?;
        Ok(Network { inner })
    }

    #[getter]
    fn n_bus(&self) -> usize {
        self.inner.n_bus()
    }

    #[getter]
    fn n_branch(&self) -> usize {
        self.inner.n_branch()
    }

    #[getter]
    fn slack(&self) -> usize {
        self.inner.slack()
    }

    /// True voltage magnitudes and angles (radians) from the case.
    fn truth(&self) -> (Vec<f64>, Vec<f64>) {
        let x = StateVector::truth(&self.inner);
        (x.vm, x.va)
    }

    fn to_json(&self) -> String {
        net::to_native_json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n_bus={}, n_branch={})",
            self.inner.n_bus(),
            self.inner.n_branch()
        )
    }
}

impl Network {
    fn from_string(text: &str, format: CaseFormat) -> PyResult<Self> {
        Ok(Network {
            inner: net::parse_case(text, format).map_err(err)?,
        })
    }
}

#[pyclass(module = "mase_py", frozen)]
struct Measurements {
    inner: measurement::MeasurementSet,
}

#[pymethods]
impl Measurements {
    #[staticmethod]
    #[pyo3(signature = (network, seed=0, sigma_vm=0.01, sigma_power=0.02, noise_scale=1.0))]
    fn generate(
        network: &Network,
        seed: u64,
        sigma_vm: f64,
        sigma_power: f64,
        noise_scale: f64,
    ) -> Self {
        let cfg = GenerationConfig {
            sigma_vm,
            sigma_power,
            noise_scale,
            ..GenerationConfig::default().with_seed(seed)
        };
        Measurements {
            inner: measurement::generate_measurements(&network.inner, &cfg),
        }
    }

    #[staticmethod]
    fn from_json(network: &Network, text: &str) -> PyResult<Self> {
        Ok(Measurements {
            inner: measurement::MeasurementSet::from_json(&network.inner, text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_csv(network: &Network, text: &str) -> PyResult<Self> {
        Ok(Measurements {
            inner: measurement::MeasurementSet::from_csv(&network.inner, text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn active_count(&self) -> usize {
        self.inner.active_count()
    }

    /// Copy with every row of one measurement type deactivated.
    fn mask(&self, family: &str) -> PyResult<Self> {
        let t = family.parse::<MeasurementType>().map_err(err)?;
        Ok(Measurements {
            inner: measurement::apply_mask(&self.inner, MaskFamily::Type(t)),
        })
    }

    /// WLS objective at the given state (magnitudes, angles in radians).
    fn objective(&self, network: &Network, vm: Vec<f64>, va: Vec<f64>) -> PyResult<f64> {
        let n = network.inner.n_bus();
        if vm.len() != n || va.len() != n {
            return Err(err(format!("state vectors must have length {n}")));
        }
        Ok(measurement::objective(
            &network.inner,
            &self.inner,
            &StateVector { va, vm },
        ))
    }
}

#[pyclass(module = "mase_py", frozen)]
struct Partition {
    inner: part::Partition,
}

#[pymethods]
impl Partition {
    #[staticmethod]
    #[pyo3(signature = (network, k, seed=0))]
    fn auto(network: &Network, k: usize, seed: u64) -> PyResult<Self> {
        Ok(Partition {
            inner: part::partition_network(&network.inner, k, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_areas(network: &Network, area_of_bus: Vec<usize>) -> PyResult<Self> {
        Ok(Partition {
            inner: part::load_partition(&network.inner, &area_of_bus).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn area_of_bus(&self) -> Vec<usize> {
        self.inner.area_of_bus.clone()
    }

    #[getter]
    fn cut_branches(&self) -> Vec<usize> {
        self.inner.cut_branches.clone()
    }

    #[getter]
    fn boundary_buses(&self) -> Vec<usize> {
        self.inner.boundary_buses.clone()
    }

    /// Dimension of the coordinator's boundary system.
    fn n_gamma(&self, network: &Network) -> usize {
        part::boundary_dimension(
            self.inner.boundary_buses.len(),
            self.inner.is_boundary(network.inner.slack()),
        )
    }
}

#[pyclass(module = "mase_py", frozen)]
struct SolveResult {
    inner: SolveOutput,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn vm(&self) -> Vec<f64> {
        self.inner.state.vm.clone()
    }

    #[getter]
    fn va(&self) -> Vec<f64> {
        self.inner.state.va.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.report.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.report.converged
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.report.objective
    }

    #[getter]
    fn boundary_dim(&self) -> usize {
        self.inner.report.boundary_dim
    }

    /// Full report, timings included, as a JSON string.
    fn report_json(&self) -> PyResult<String> {
        json(&self.inner.report)
    }

    fn __repr__(&self) -> String {
        let r = &self.inner.report;
        format!(
            "SolveResult(method={}, iterations={}, converged={}, objective={})",
            r.method, r.iterations, r.converged, r.objective
        )
    }
}

fn config(
    max_iters: usize,
    inner_steps: usize,
    tol: f64,
    deterministic: bool,
    backend: &str,
) -> PyResult<SolverConfig> {
    Ok(SolverConfig {
        max_outer_iterations: max_iters,
        inner_gn_steps: inner_steps,
        convergence_tol: tol,
        deterministic,
        backend: backend.parse::<Backend>().map_err(err)?,
        record_iterates: false,
    })
}

#[pyfunction]
#[pyo3(signature = (network, measurements, max_iters=10, tol=1e-6, backend="auto"))]
fn solve_centralized(
    network: &Network,
    measurements: &Measurements,
    max_iters: usize,
    tol: f64,
    backend: &str,
) -> PyResult<SolveResult> {
    let cfg = config(max_iters, 1, tol, true, backend)?;
    let inner =
        solver::solve_centralized(&network.inner, &measurements.inner, &cfg).map_err(err)?;
    Ok(SolveResult { inner })
}

#[pyfunction]
#[pyo3(signature = (network, measurements, partition, max_iters=10, inner_steps=1, tol=1e-6, deterministic=true, backend="auto"))]
#[allow(clippy::too_many_arguments)]
fn solve_multiarea(
    py: Python<'_>,
    network: &Network,
    measurements: &Measurements,
    partition: &Partition,
    max_iters: usize,
    inner_steps: usize,
    tol: f64,
    deterministic: bool,
    backend: &str,
) -> PyResult<SolveResult> {
    let cfg = config(max_iters, inner_steps, tol, deterministic, backend)?;
    let (n, m, p) = (&network.inner, &measurements.inner, &partition.inner);
    let inner = py
        .detach(|| solver::MultiAreaSolver::new(n, m, p, &cfg).and_then(|mut s| s.solve()))
        .map_err(err)?;
    Ok(SolveResult { inner })
}

/// Partition-count sweep; returns the table as a JSON string.
#[pyfunction]
#[pyo3(signature = (network, measurements, ks, seed=0, repeats=3))]
fn sweep_k(
    network: &Network,
    measurements: &Measurements,
    ks: Vec<usize>,
    seed: u64,
    repeats: usize,
) -> PyResult<String> {
    let rows = experiment::sweep_k(
        &network.inner,
        &measurements.inner,
        &ks,
        seed,
        &SolverConfig::default(),
        repeats,
    );
    json(&rows)
}

/// Flow-family masking table; returns the table as a JSON string.
#[pyfunction]
#[pyo3(signature = (network, measurements, partition=None, repeats=1))]
fn mask_table(
    network: &Network,
    measurements: &Measurements,
    partition: Option<&Partition>,
    repeats: usize,
) -> PyResult<String> {
    let method = if partition.is_some() {
        Method::Multiarea
    } else {
        Method::Centralized
    };
    let rows = experiment::mask_table(
        &network.inner,
        &measurements.inner,
        &MeasurementType::FLOWS,
        method,
        partition.map(|p| &p.inner),
        &SolverConfig::default(),
        repeats,
    );
    json(&rows)
}

#[pymodule]
fn mase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Measurements>()?;
    m.add_class::<Partition>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(solve_centralized, m)?)?;
    m.add_function(wrap_pyfunction!(solve_multiarea, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_k, m)?)?;
    m.add_function(wrap_pyfunction!(mask_table, m)?)?;
    Ok(())
}
