//! Python extension module exposing the stand simulator, valuation and the
//! schedule optimizer. Build with `cargo build -p thinlab-py --release` and
//! import the produced shared library as `_thinlab` (see python/smoke_test.py).

use std::path::Path;
use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use thinlab::economics::{
    expected_return_rate, simulate_rotation, Regime,
};
use thinlab::error::ThinlabError;
use thinlab::genstands;
use thinlab::grid::DiameterClassGrid;
use thinlab::market::relative_value_increment_profile;
use thinlab::optimizer::{compare_regimes, optimize, SearchConfig};
use thinlab::schedule::ManagementSchedule;
use thinlab::species::Species;
use thinlab::thinning;

fn to_py_err(err: ThinlabError) -> PyErr {
    match &err {
        ThinlabError::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_species(name: &str) -> PyResult<Species> {
    Species::from_str(name).map_err(to_py_err)
}

fn parse_regime(name: &str) -> PyResult<Regime> {
    Regime::from_str(name).map_err(to_py_err)
}

/// Stand state: per-species diameter-class cohorts.
#[pyclass(name = "Stand", skip_from_py_object)]
#[derive(Clone)]
struct PyStand {
    inner: thinlab::Stand,
}

#[pymethods]
impl PyStand {
    /// Empty stand on the default 25 mm grid.
    #[new]
    #[pyo3(signature = (age_months=0, site_index=1.0))]
    fn new(age_months: u32, site_index: f64) -> Self {
        PyStand {
            inner: thinlab::Stand::new(DiameterClassGrid::default(), age_months, site_index),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = thinlab::io::read_stand(Path::new(path), &DiameterClassGrid::default())
            .map_err(to_py_err)?;
        Ok(PyStand { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        thinlab::io::write_stand(&self.inner, Path::new(path)).map_err(to_py_err)
    }

    fn set_cohort(&mut self, species: &str, class_index: usize, stems: f64, quality: f64) -> PyResult<()> {
        self.inner
            .set_cohort(parse_species(species)?, class_index, stems, quality)
            .map_err(to_py_err)
    }

    #[getter]
    fn age_months(&self) -> u32 {
        self.inner.age_months
    }

    #[getter]
    fn site_index(&self) -> f64 {
        self.inner.site_index
    }

    fn total_stems(&self) -> f64 {
        self.inner.total_stems()
    }

    fn basal_area(&self) -> f64 {
        self.inner.basal_area()
    }

    fn ba_weighted_mean_diameter(&self) -> PyResult<f64> {
        self.inner.ba_weighted_mean_diameter().map_err(to_py_err)
    }

    /// Cohorts as a list of (species, midpoint_mm, stems, quality) tuples.
    fn cohorts(&self) -> Vec<(String, f64, f64, f64)> {
        let mut rows = Vec::new();
        for (species, cohorts) in self.inner.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    rows.push((
                        species.to_string(),
                        self.inner.grid().midpoint(i),
                        c.stems,
                        c.quality,
                    ));
                }
            }
        }
        rows
    }

    /// One 30-month growth step.
    fn grow_step(&self, kernel: &PyGrowthKernel, coupling_on: bool) -> PyResult<PyStand> {
        Ok(PyStand {
            inner: self.inner.grow_step(&kernel.inner, coupling_on).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Stand(age_months={}, stems={:.0}, basal_area={:.1})",
            self.inner.age_months,
            self.inner.total_stems(),
            self.inner.basal_area()
        )
    }
}

/// Diameter increment, mortality and ingrowth functions.
#[pyclass(name = "GrowthKernel", skip_from_py_object)]
#[derive(Clone)]
struct PyGrowthKernel {
    inner: thinlab::GrowthKernel,
}

#[pymethods]
impl PyGrowthKernel {
    /// Shipped synthetic default coefficients.
    #[staticmethod]
    fn default_boreal() -> Self {
        PyGrowthKernel {
            inner: thinlab::GrowthKernel::boreal_default(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyGrowthKernel {
            inner: thinlab::io::load_kernel(Path::new(path)).map_err(to_py_err)?,
        })
    }

    fn increment(&self, species: &str, diameter_mm: f64, basal_area: f64, site_index: f64) -> PyResult<f64> {
        self.inner
            .increment(parse_species(species)?, diameter_mm, basal_area, site_index)
            .map_err(to_py_err)
    }

    fn mortality(&self, species: &str, diameter_mm: f64, basal_area: f64) -> PyResult<f64> {
        self.inner
            .mortality(parse_species(species)?, diameter_mm, basal_area)
            .map_err(to_py_err)
    }

    fn ingrowth(&self, species: &str, basal_area: f64) -> PyResult<f64> {
        self.inner
            .ingrowth(parse_species(species)?, basal_area)
            .map_err(to_py_err)
    }
}

/// Assortment volumes, prices and harvesting costs.
#[pyclass(name = "MarketModel", skip_from_py_object)]
#[derive(Clone)]
struct PyMarketModel {
    inner: thinlab::MarketModel,
}

#[pymethods]
impl PyMarketModel {
    #[staticmethod]
    fn default_boreal() -> Self {
        PyMarketModel {
            inner: thinlab::MarketModel::boreal_default(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMarketModel {
            inner: thinlab::io::load_market(Path::new(path)).map_err(to_py_err)?,
        })
    }

    fn assortment_volumes(&self, species: &str, diameter_mm: f64) -> PyResult<(f64, f64)> {
        Ok(self.inner.assortment_volumes(parse_species(species)?, diameter_mm))
    }

    #[pyo3(signature = (species, diameter_mm, quality=1.0, clearcut=false))]
    fn tree_roadside_value(&self, species: &str, diameter_mm: f64, quality: f64, clearcut: bool) -> PyResult<f64> {
        Ok(self
            .inner
            .tree_roadside_value(parse_species(species)?, diameter_mm, quality, clearcut))
    }

    #[pyo3(signature = (species, diameter_mm, quality=1.0, clearcut=false))]
    fn tree_stumpage_value(&self, species: &str, diameter_mm: f64, quality: f64, clearcut: bool) -> PyResult<f64> {
        Ok(self
            .inner
            .tree_stumpage_value(parse_species(species)?, diameter_mm, quality, clearcut))
    }

    #[pyo3(signature = (species, trunk_volume, clearcut=false))]
    fn harvest_time_per_m3(&self, species: &str, trunk_volume: f64, clearcut: bool) -> PyResult<f64> {
        let kind = if clearcut {
            thinlab::HarvestKind::Clearcut
        } else {
            thinlab::HarvestKind::Thinning
        };
        self.inner
            .harvest_time_per_m3(parse_species(species)?, kind, trunk_volume)
            .map_err(to_py_err)
    }

    #[pyo3(signature = (stand, clearcut=false))]
    fn stand_capitalization(&self, stand: &PyStand, clearcut: bool) -> f64 {
        self.inner.stand_capitalization(&stand.inner, clearcut)
    }
}

/// Value correction for retained trees: `1 + b * (1 - p)`.
#[pyfunction]
fn quality_correction(half_width_b: f64, survival_p: f64) -> PyResult<f64> {
    thinning::quality_correction(half_width_b, survival_p).map_err(to_py_err)
}

/// Survival within the quality selection after strip roads: `p = s / a`.
#[pyfunction]
fn survival_after_strip_roads(total_survival: f64, road_survival: f64) -> PyResult<f64> {
    thinning::survival_after_strip_roads(total_survival, road_survival).map_err(to_py_err)
}

/// Relative change of the return rate for a bare-land value shift.
#[pyfunction]
fn bare_land_sensitivity(mean_capitalization: f64, delta_b: f64) -> PyResult<f64> {
    thinlab::economics::bare_land_sensitivity(mean_capitalization, delta_b).map_err(to_py_err)
}

/// Simulate one rotation; returns a dict with the return rate, the per-step
/// trace and the stand trajectory.
#[pyfunction]
#[pyo3(signature = (stand, kernel, market, schedule_json, mode="none"))]
fn simulate<'py>(
    py: Python<'py>,
    stand: &PyStand,
    kernel: &PyGrowthKernel,
    market: &PyMarketModel,
    schedule_json: &str,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let schedule =
        ManagementSchedule::from_json(schedule_json, "schedule").map_err(to_py_err)?;
    let regime = parse_regime(mode)?;
    let sim = simulate_rotation(&stand.inner, &schedule, &kernel.inner, &market.inner, regime)
        .map_err(to_py_err)?;
    let r = expected_return_rate(&sim.trace).map_err(to_py_err)?;

    let out = PyDict::new(py);
    out.set_item("expected_return_rate", r)?;
    out.set_item("mean_capitalization", sim.trace.mean_capitalization())?;
    out.set_item("total_dkappa", sim.trace.total_dkappa())?;

    let trace = PyList::empty(py);
    for s in &sim.trace.steps {
        let row = PyDict::new(py);
        row.set_item("step", s.index)?;
        row.set_item("age_end_months", s.age_end_months)?;
        row.set_item("k_start", s.k_start)?;
        row.set_item("k_end", s.k_end_post)?;
        row.set_item("dkappa", s.dkappa)?;
        row.set_item("net_cash", s.net_cash)?;
        row.set_item("event", s.event.to_string())?;
        trace.append(row)?;
    }
    out.set_item("trace", trace)?;

    let trajectory = PyList::empty(py);
    for p in &sim.trajectory {
        let row = PyDict::new(py);
        row.set_item("step", p.step)?;
        row.set_item("age_months", p.age_months)?;
        row.set_item("ba_weighted_diameter_mm", p.ba_weighted_diameter_mm)?;
        row.set_item("standing_volume_m3", p.standing_volume_m3)?;
        row.set_item("capitalization", p.capitalization)?;
        trajectory.append(row)?;
    }
    out.set_item("trajectory", trajectory)?;
    out.set_item(
        "terminal_stand",
        PyStand {
            inner: sim.terminal_stand.clone(),
        }
        .into_pyobject(py)?,
    )?;
    Ok(out)
}

fn search_config_from_kwargs(regime: Regime, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<SearchConfig> {
    let mut config = SearchConfig::new(regime);
    if let Some(kwargs) = kwargs {
        for (key, value) in kwargs.iter() {
            let key: String = key.extract()?;
            match key.as_str() {
                "min_rotation_steps" => config.rotation_steps_min = value.extract()?,
                "max_rotation_steps" => config.rotation_steps_max = value.extract()?,
                "max_thinnings" => config.max_thinnings = value.extract()?,
                "retention_step" => config.retention_step = value.extract()?,
                "strip_road_survival" => config.strip_road_survival = value.extract()?,
                "quality_half_width" => config.quality_half_width = value.extract()?,
                "max_sweeps" => config.max_sweeps = value.extract()?,
                "min_searchable_stems" => config.min_searchable_stems = value.extract()?,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown search option '{other}'"
                    )))
                }
            }
        }
    }
    Ok(config)
}

fn optim_result_to_py<'py>(
    py: Python<'py>,
    result: &thinlab::OptimResult,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("regime", result.regime.name())?;
    out.set_item("best_r", result.best_r)?;
    out.set_item("rotation_steps", result.best_schedule.rotation_steps)?;
    out.set_item("thinnings", result.best_schedule.events.len())?;
    out.set_item("evaluations", result.evaluations)?;
    out.set_item(
        "best_schedule_json",
        result.best_schedule.to_json(),
    )?;
    Ok(out)
}

/// Search thinning schedules and rotation length for the best return rate.
#[pyfunction]
#[pyo3(signature = (stand, kernel, market, mode="none", **kwargs))]
fn optimize_schedule<'py>(
    py: Python<'py>,
    stand: &PyStand,
    kernel: &PyGrowthKernel,
    market: &PyMarketModel,
    mode: &str,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = search_config_from_kwargs(parse_regime(mode)?, kwargs)?;
    let result =
        optimize(&stand.inner, &kernel.inner, &market.inner, &config).map_err(to_py_err)?;
    optim_result_to_py(py, &result)
}

/// Optimize under all three regimes; returns per-regime results plus deltas.
#[pyfunction]
#[pyo3(signature = (stand, kernel, market, **kwargs))]
fn compare<'py>(
    py: Python<'py>,
    stand: &PyStand,
    kernel: &PyGrowthKernel,
    market: &PyMarketModel,
    kwargs: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = search_config_from_kwargs(Regime::None, kwargs)?;
    let comparison =
        compare_regimes(&stand.inner, &kernel.inner, &market.inner, &config).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("none", optim_result_to_py(py, &comparison.none)?)?;
    out.set_item("quality", optim_result_to_py(py, &comparison.quality)?)?;
    out.set_item(
        "quality_growth",
        optim_result_to_py(py, &comparison.quality_growth)?,
    )?;
    out.set_item("delta_quality", comparison.delta_quality)?;
    out.set_item("delta_quality_growth", comparison.delta_quality_growth)?;
    Ok(out)
}

/// Relative value increment rate per species and class over one step.
#[pyfunction]
#[pyo3(signature = (stand, kernel, market, coupling_on=false, clearcut=false))]
fn value_increment_profile<'py>(
    py: Python<'py>,
    stand: &PyStand,
    kernel: &PyGrowthKernel,
    market: &PyMarketModel,
    coupling_on: bool,
    clearcut: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let profile = relative_value_increment_profile(
        &market.inner,
        &kernel.inner,
        &stand.inner,
        coupling_on,
        clearcut,
    )
    .map_err(to_py_err)?;
    let out = PyDict::new(py);
    for (species, points) in &profile {
        let rows: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.midpoint_mm, p.rate_per_year))
            .collect();
        out.set_item(species.to_string(), rows)?;
    }
    Ok(out)
}

/// Deterministic fixture stand generation.
#[pyfunction]
#[pyo3(signature = (seed, count, template="young-spruce"))]
fn generate_stands(seed: u64, count: usize, template: &str) -> PyResult<Vec<PyStand>> {
    let stands = genstands::generate_stands(seed, count, template, &DiameterClassGrid::default())
        .map_err(to_py_err)?;
    Ok(stands.into_iter().map(|inner| PyStand { inner }).collect())
}

#[pymodule]
fn _thinlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStand>()?;
    m.add_class::<PyGrowthKernel>()?;
    m.add_class::<PyMarketModel>()?;
    m.add_function(wrap_pyfunction!(quality_correction, m)?)?;
    m.add_function(wrap_pyfunction!(survival_after_strip_roads, m)?)?;
    m.add_function(wrap_pyfunction!(bare_land_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(value_increment_profile, m)?)?;
    m.add_function(wrap_pyfunction!(generate_stands, m)?)?;
    m.add("STEP_MONTHS", thinlab::STEP_MONTHS)?;
    m.add("STEP_YEARS", thinlab::STEP_YEARS)?;
    Ok(())
}
