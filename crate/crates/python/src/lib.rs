//! Python module `estc`: lattice numbering, model construction, solving,
//! verification and observables.

use estc_core::engine::{residual_map, verify_projectors, EngineOptions};
use estc_core::observables::{self, Quadratures};
use estc_core::schedule::{custom_model, model_spec, ModelSpec, Region, Schedule};
use estc_core::{solution_file, Bispinor, LatticePoint, SpinorBlock, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(estc, EstcError, PyException, "Error raised by the engine.");
create_exception!(estc, RankDeficiencyError, EstcError, "An equation lost rank and rank-deficient mode is off.");

fn to_py(e: estc_core::Error) -> PyErr {
    match e {
        estc_core::Error::RankDeficiency { .. } => RankDeficiencyError::new_err(e.to_string()),
        estc_core::Error::Io(io) => io.into(),
        estc_core::Error::OddSum(_)
        | estc_core::Error::Negative { .. }
        | estc_core::Error::InvalidArgument(_)
        | estc_core::Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => EstcError::new_err(other.to_string()),
    }
}

type Point = (i64, i64, i64, i64);

fn point(p: Point) -> PyResult<LatticePoint> {
    LatticePoint::new(p.0, p.1, p.2, p.3).map_err(to_py)
}

fn tuple(p: &LatticePoint) -> Point {
    let [a, b, c, d] = p.0;
    (a, b, c, d)
}

fn matrix(m: &SpinorBlock) -> Vec<Vec<C64>> {
    m.0.iter().map(|row| row.to_vec()).collect()
}

fn bispinor(a: Vec<C64>) -> PyResult<Bispinor> {
    a.try_into().map_err(|_| PyValueError::new_err("amplitude needs 4 complex components"))
}

/// Global index of an even lattice point.
#[pyfunction]
fn index_of(p: Point) -> PyResult<i64> {
    estc_core::index_of(point(p)?).map_err(to_py)
}

/// Lattice point with global index `i`.
#[pyfunction]
fn point_of(i: i64) -> PyResult<Point> {
    estc_core::point_of(i).map(|p| tuple(&p)).map_err(to_py)
}

/// Field amplitudes and kinematic parameters.
#[pyclass(name = "FieldConfig", module = "estc", skip_from_py_object)]
#[derive(Clone)]
struct PyFieldConfig(estc_core::FieldConfig);

#[pymethods]
impl PyFieldConfig {
    /// A field-free configuration.
    #[new]
    #[pyo3(signature = (q = (0.0, 0.0, 0.0), q4 = 0.0, omega = 1.0))]
    fn new(q: (f64, f64, f64), q4: f64, omega: f64) -> PyResult<Self> {
        estc_core::FieldConfig::free([q.0, q.1, q.2], q4, omega).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        estc_core::FieldConfig::from_json(text).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn with_q4(&self, q4: f64) -> Self {
        Self(self.0.with_q4(q4))
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega
    }

    #[getter]
    fn q(&self) -> (f64, f64, f64) {
        (self.0.q[0], self.0.q[1], self.0.q[2])
    }

    #[getter]
    fn q4(&self) -> f64 {
        self.0.q4
    }

    fn is_field_free(&self) -> bool {
        self.0.is_field_free()
    }

    fn __repr__(&self) -> String {
        format!("FieldConfig({})", self.0.to_json())
    }
}

fn build_model(p: Option<u8>, k_list: Option<Vec<usize>>) -> PyResult<ModelSpec> {
    let schedule = Schedule::build_cycle1().map_err(to_py)?;
    match (p, k_list) {
        (Some(p), None) => model_spec(&schedule, p).map_err(to_py),
        (None, Some(ks)) => custom_model(&schedule, "custom", &ks, Region::model_region()).map_err(to_py),
        (None, None) => model_spec(&schedule, 1).map_err(to_py),
        (Some(_), Some(_)) => Err(PyValueError::new_err("give p or k_list, not both")),
    }
}

/// `(k, site)` equations of a model in processing order.
#[pyfunction]
#[pyo3(signature = (p = None, k_list = None))]
fn model_equations(p: Option<u8>, k_list: Option<Vec<usize>>) -> PyResult<Vec<(usize, Point)>> {
    let model = build_model(p, k_list)?;
    Ok(model.equations().iter().map(|(k, n)| (*k, tuple(n))).collect())
}

/// Lattices added per `(stage, phase)` in the first cycle.
#[pyfunction]
fn stage_counts() -> PyResult<Vec<((u8, u8), usize)>> {
    Ok(Schedule::build_cycle1().map_err(to_py)?.stage_counts())
}

/// The blocks `S(n)` of a fundamental solution.
#[pyclass(name = "SolutionTable", module = "estc")]
struct PySolutionTable(estc_core::SolutionTable);

#[pymethods]
impl PySolutionTable {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        solution_file::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        solution_file::save(path, &self.0).map_err(to_py)
    }

    #[getter]
    fn model_name(&self) -> &str {
        &self.0.model_name
    }

    #[getter]
    fn field(&self) -> PyFieldConfig {
        PyFieldConfig(self.0.field.clone())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn points(&self) -> Vec<Point> {
        self.0.points().map(tuple).collect()
    }

    /// `S(n)` as a 4x4 nested list, or `None` outside the table.
    fn block(&self, n: Point) -> PyResult<Option<Vec<Vec<C64>>>> {
        Ok(self.0.get(&point(n)?).map(matrix))
    }

    fn u_e(&self) -> Vec<Vec<C64>> {
        matrix(&observables::u_e(&self.0))
    }

    fn u_d(&self) -> Vec<Vec<C64>> {
        matrix(&observables::u_d(&self.0))
    }

    /// `U_D` as the Gram matrix of the residual map.
    fn u_d_from_residuals(&self, py: Python<'_>) -> PyResult<Vec<Vec<C64>>> {
        py.detach(|| observables::u_d_from_residuals(&self.0)).map(|m| matrix(&m)).map_err(to_py)
    }

    /// `U_E` by the trapezoid rule on an `n^4` grid.
    fn grid_u_e(&self, py: Python<'_>, n: usize) -> PyResult<Vec<Vec<C64>>> {
        py.detach(|| observables::grid_u_e(&self.0, n)).map(|m| matrix(&m)).map_err(to_py)
    }

    /// The residual functional `R(a0)`.
    fn accuracy(&self, a0: Vec<C64>) -> PyResult<f64> {
        Quadratures::of(&self.0).accuracy(&bispinor(a0)?).map_err(to_py)
    }

    /// `(a0, R_min, rank of U_E)` for the amplitude minimizing `R`.
    fn best_amplitude(&self) -> PyResult<(Vec<C64>, f64, usize)> {
        let b = Quadratures::of(&self.0).best_amplitude().map_err(to_py)?;
        Ok((b.a0.to_vec(), b.r_min, b.u_e_rank))
    }

    /// Mean energy `<(q4 + n4 Omega)>` for amplitude `a0`.
    fn mean_energy(&self, a0: Vec<C64>) -> PyResult<C64> {
        observables::a_mean(&self.0, observables::energy_operator(&self.0.field), &bispinor(a0)?)
            .map_err(to_py)
    }

    /// Mean momentum along axis `k` in `0..3`.
    fn mean_momentum(&self, k: usize, a0: Vec<C64>) -> PyResult<C64> {
        if k > 2 {
            return Err(PyValueError::new_err("axis must be 0, 1 or 2"));
        }
        observables::a_mean(&self.0, observables::momentum_operator(&self.0.field, k), &bispinor(a0)?)
            .map_err(to_py)
    }

    /// Wave function `Psi(x) = E(x) a0` at `x` in unit-cube coordinates.
    fn wavefunction(&self, x: (f64, f64, f64, f64), a0: Vec<C64>) -> PyResult<Vec<C64>> {
        Ok(observables::wavefunction(&self.0, &[x.0, x.1, x.2, x.3], &bispinor(a0)?).to_vec())
    }

    /// Largest relative `||V_S(n)||` over the sites accepted by `sites` (all when `None`).
    #[pyo3(signature = (sites = None))]
    fn max_residual(&self, py: Python<'_>, sites: Option<Vec<Point>>) -> PyResult<f64> {
        let wanted = sites
            .map(|s| s.into_iter().map(point).collect::<PyResult<std::collections::HashSet<_>>>())
            .transpose()?;
        let map = py.detach(|| residual_map(&self.0.field, &self.0)).map_err(to_py)?;
        Ok(map.max_relative(|n| wanted.as_ref().is_none_or(|w| w.contains(n))))
    }

    fn __repr__(&self) -> String {
        format!("SolutionTable(model={:?}, entries={})", self.0.model_name, self.0.len())
    }
}

/// A solved model: the table plus projector records and cluster statistics.
#[pyclass(name = "Solution", module = "estc")]
struct PySolution {
    solution: estc_core::Solution,
    model: ModelSpec,
}

#[pymethods]
impl PySolution {
    /// A copy of the solution table.
    #[getter]
    fn table(&self) -> PySolutionTable {
        PySolutionTable(self.solution.table.clone())
    }

    #[getter]
    fn model_name(&self) -> &str {
        &self.model.name
    }

    fn equation_count(&self) -> usize {
        self.model.equation_count()
    }

    fn cluster_stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.solution.stats;
        let d = PyDict::new(py);
        d.set_item("final_clusters", s.final_clusters)?;
        d.set_item("max_clusters", s.max_clusters)?;
        d.set_item("sizes", s.sizes.clone())?;
        d.set_item("stored_vectors", s.stored_vectors)?;
        d.set_item("stored_entries", s.stored_entries)?;
        d.set_item("elapsed_seconds", s.elapsed_seconds)?;
        Ok(d)
    }

    /// Ranks of the per-equation projectors.
    fn ranks(&self) -> Vec<usize> {
        self.solution.records.iter().map(|r| r.rank).collect()
    }

    /// Trace, idempotency and pair-overlap defects of the projectors.
    fn verify_projectors<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = py.detach(|| verify_projectors(&self.solution)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("records", r.records)?;
        d.set_item("min_rank", r.min_rank)?;
        d.set_item("max_trace_deviation", r.max_trace_deviation)?;
        d.set_item("max_trace_deviation_from_4", r.max_trace_deviation_from_4)?;
        d.set_item("max_idempotency_defect", r.max_idempotency_defect)?;
        d.set_item("max_pair_overlap", r.max_pair_overlap)?;
        d.set_item("pairs_checked", r.pairs_checked)?;
        Ok(d)
    }

    /// Largest relative residual on the model sites.
    fn max_residual_on_model(&self, py: Python<'_>) -> PyResult<f64> {
        let map = py
            .detach(|| residual_map(&self.solution.table.field, &self.solution.table))
            .map_err(to_py)?;
        Ok(map.max_relative(|n| self.model.contains_site(n)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(model={:?}, equations={}, clusters={})",
            self.model.name,
            self.model.equation_count(),
            self.solution.stats.final_clusters
        )
    }
}

/// Solves the `p`-model (or an explicit family list) for a field configuration.
#[pyfunction]
#[pyo3(signature = (field, p = None, k_list = None, allow_rank_deficient = false, rank_tolerance = 1e-8))]
fn solve(
    py: Python<'_>,
    field: PyRef<'_, PyFieldConfig>,
    p: Option<u8>,
    k_list: Option<Vec<usize>>,
    allow_rank_deficient: bool,
    rank_tolerance: f64,
) -> PyResult<PySolution> {
    if !(rank_tolerance > 0.0) {
        return Err(PyValueError::new_err("rank_tolerance must be positive"));
    }
    let model = build_model(p, k_list)?;
    let cfg = field.0.clone();
    let opts = EngineOptions { rank_tolerance, allow_rank_deficient, ..EngineOptions::default() };
    let solution = py.detach(|| estc_core::run_model(&cfg, &model, &opts)).map_err(to_py)?;
    Ok(PySolution { solution, model })
}

#[pymodule]
fn estc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", estc_core::VERSION)?;
    m.add("EstcError", m.py().get_type::<EstcError>())?;
    m.add("RankDeficiencyError", m.py().get_type::<RankDeficiencyError>())?;
    m.add_class::<PyFieldConfig>()?;
    m.add_class::<PySolutionTable>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(index_of, m)?)?;
    m.add_function(wrap_pyfunction!(point_of, m)?)?;
    m.add_function(wrap_pyfunction!(model_equations, m)?)?;
    m.add_function(wrap_pyfunction!(stage_counts, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
