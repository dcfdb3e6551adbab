//! Boreal stand development toolkit: coefficient-driven diameter-class growth,
//! thinning schedules with quality selection, rotation economics based on the
//! capital-weighted expected return rate, and a deterministic schedule
//! optimizer with figure-level CSV reporting.

pub mod economics;
pub mod error;
pub mod genstands;
pub mod grid;
pub mod growth;
pub mod io;
pub mod manifest;
pub mod market;
pub mod optimizer;
pub mod report;
pub mod schedule;
pub mod species;
pub mod stand;
pub mod thinning;

pub use economics::{
    bare_land_sensitivity, build_trace, expected_return_rate, rotation_trace_cached,
    simulate_rotation, simulate_rotation_cached, EconomicTrace, Regime, RotationSimulation,
    SimulationCache, TraceEvent, TraceStep, TrajectoryPoint,
};
pub use error::{Result, ThinlabError};
pub use grid::DiameterClassGrid;
pub use growth::{GrowthKernel, GrowthTable, SpeciesCoefficients};
pub use market::{
    local_maxima, relative_value_increment_profile, trunk_roadside_value, HarvestKind,
    MarketModel, ProfilePoint, SpeciesMarket, ValuationTable,
};
pub use optimizer::{
    compare_regimes, first_differing_significant_digit, optimize, simulate_best, OptimResult,
    RegimeComparison, SearchConfig,
};
pub use schedule::{ManagementSchedule, ScheduleEvent};
pub use species::Species;
pub use stand::{Cohort, Stand, StepPlan, STEP_MONTHS, STEP_YEARS};
pub use thinning::{
    apply_thinning, clearcut_all, evolve_quality, quality_correction, survival_after_strip_roads,
    HarvestRecord, ThinningRule, DEFAULT_QUALITY_HALF_WIDTH, DEFAULT_STRIP_ROAD_SURVIVAL,
};
