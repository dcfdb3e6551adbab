//! Schedule search: maximize the expected return rate over rotation length,
//! thinning placements and per-class retentions.
//!
//! The search is a deterministic two-phase procedure:
//!
//! 1. exhaustive grid over rotation length and thinning-step placements
//!    (subsets of the candidate steps up to `max_thinnings`);
//! 2. per placement, per-class retention search over the retention grid —
//!    exhaustive when the combination count is small, otherwise coordinate
//!    descent seeded with thinning from above (retain small classes, remove
//!    large ones).
//!
//! Candidate-set semantics (mirrored by the brute-force oracle in tests):
//!
//! * retention coordinates are the (event, species, class) triples for classes
//!   occupied in the initial stand, extended upward by
//!   `(rotation_steps_max + 2) / 3` classes to cover growth during the
//!   rotation; all other classes keep retention 1;
//! * the base retention grid is `0, step, 2*step, ... , 1`;
//! * in the quality regimes each placement with at least one event is searched
//!   twice: once with quality selection off, and once with the first event
//!   flagged for quality selection, its retention grid restricted to values
//!   not exceeding the strip-road survival (plus the untouched value 1);
//! * with a zero quality half-width the selection is arithmetically inert and
//!   the flagged branch is skipped entirely.
//!
//! Because the selection-off branch runs the identical procedure as the
//! no-quality regime, the best quality-regime rate can never fall below the
//! best no-quality rate on the same input.
//!
//! Ties are broken deterministically: shorter rotation, then fewer thinnings,
//! then lexicographically smaller canonical schedule text.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::economics::{
    expected_return_rate, rotation_trace_cached, simulate_rotation, Regime, RotationSimulation,
    SimulationCache,
};
use crate::error::{Result, ThinlabError};
use crate::growth::GrowthKernel;
use crate::market::MarketModel;
use crate::schedule::{ManagementSchedule, ScheduleEvent};
use crate::species::Species;
use crate::stand::Stand;
use crate::thinning::{DEFAULT_QUALITY_HALF_WIDTH, DEFAULT_STRIP_ROAD_SURVIVAL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub regime: Regime,
    pub rotation_steps_min: usize,
    pub rotation_steps_max: usize,
    /// Maximum number of thinning events per schedule.
    pub max_thinnings: usize,
    /// Granularity of the retention grid, in (0, 0.5].
    pub retention_step: f64,
    /// Candidate thinning steps; `None` means every step `1..rotation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning_steps: Option<Vec<usize>>,
    pub strip_road_survival: f64,
    pub quality_half_width: f64,
    /// Retention combination count up to which the search enumerates
    /// exhaustively instead of descending.
    pub exhaustive_threshold: u128,
    pub max_sweeps: usize,
    /// Convergence tolerance on the return rate for the coordinate descent.
    pub tolerance: f64,
    /// Classes with fewer initial stems are not searched (retention stays 1).
    pub min_searchable_stems: f64,
}

impl SearchConfig {
    pub fn new(regime: Regime) -> Self {
        SearchConfig {
            regime,
            rotation_steps_min: 4,
            rotation_steps_max: 12,
            max_thinnings: 2,
            retention_step: 0.1,
            thinning_steps: None,
            strip_road_survival: DEFAULT_STRIP_ROAD_SURVIVAL,
            quality_half_width: DEFAULT_QUALITY_HALF_WIDTH,
            exhaustive_threshold: 256,
            max_sweeps: 3,
            tolerance: 1e-12,
            min_searchable_stems: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation_steps_min < 1 || self.rotation_steps_min > self.rotation_steps_max {
            return Err(ThinlabError::Infeasible(format!(
                "empty rotation range {}..={}",
                self.rotation_steps_min, self.rotation_steps_max
            )));
        }
        if !(self.retention_step > 0.0 && self.retention_step <= 0.5) {
            return Err(ThinlabError::Infeasible(format!(
                "retention granularity must lie in (0, 0.5], got {}",
                self.retention_step
            )));
        }
        if !(self.strip_road_survival > 0.0 && self.strip_road_survival <= 1.0) {
            return Err(ThinlabError::Infeasible(
                "strip-road survival must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.quality_half_width) {
            return Err(ThinlabError::Infeasible(
                "quality half-width must lie in [0, 1)".into(),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(ThinlabError::Infeasible("max_sweeps must be positive".into()));
        }
        Ok(())
    }

    /// Upward extension of the searchable class range, in classes.
    pub fn class_reach(&self) -> usize {
        (self.rotation_steps_max + 2) / 3
    }

    /// Base retention grid.
    pub fn retention_values(&self) -> Vec<f64> {
        let mut values = Vec::new();
        let mut k = 0usize;
        loop {
            let v = round12(k as f64 * self.retention_step);
            if v >= 1.0 - 1e-9 {
                break;
            }
            values.push(v);
            k += 1;
        }
        values.push(1.0);
        values
    }

    /// Retention grid for a quality-flagged event: base values not exceeding
    /// the strip-road survival, plus the untouched value 1.
    pub fn quality_retention_values(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .retention_values()
            .into_iter()
            .filter(|&v| v <= self.strip_road_survival + 1e-9)
            .collect();
        if values.last() != Some(&1.0) {
            values.push(1.0);
        }
        values
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalLogEntry {
    pub schedule_hash: String,
    pub rotation_steps: usize,
    pub r_expected: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationBest {
    pub rotation_steps: usize,
    pub rotation_age_months: u32,
    pub r_expected: f64,
    pub mean_capitalization: f64,
    pub schedule_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimResult {
    pub regime: Regime,
    pub best_r: f64,
    pub best_schedule: ManagementSchedule,
    /// Best candidate per rotation length, for return-vs-rotation reporting.
    pub per_rotation: Vec<RotationBest>,
    pub evaluations: u64,
    /// Wall time is diagnostic only and deliberately not serialized: output
    /// files must be bit-identical across repeated runs.
    #[serde(skip, default)]
    pub wall_time_ms: u128,
    pub log: Vec<EvalLogEntry>,
}

/// Three-regime comparison with effect sizes.
#[derive(Clone, Debug, Serialize)]
pub struct RegimeComparison {
    pub none: OptimResult,
    pub quality: OptimResult,
    pub quality_growth: OptimResult,
    pub delta_quality: f64,
    pub delta_quality_growth: f64,
    /// Position of the first differing significant digit, if any.
    pub digit_quality: Option<u32>,
    pub digit_quality_growth: Option<u32>,
}

/// Significant-digit position at which two values first differ.
pub fn first_differing_significant_digit(a: f64, b: f64) -> Option<u32> {
    if a == b {
        return None;
    }
    for digits in 1..=15u32 {
        let fa = format!("{:.*e}", (digits - 1) as usize, a);
        let fb = format!("{:.*e}", (digits - 1) as usize, b);
        if fa != fb {
            return Some(digits);
        }
    }
    Some(16)
}

/// Run `f` inside a thread pool capped by the `THINLAB_THREADS` variable.
pub fn run_in_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var("THINLAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Coord {
    event: usize,
    species: Species,
    class: usize,
}

struct SearchContext<'a> {
    stand0: &'a Stand,
    market: &'a MarketModel,
    search: &'a SearchConfig,
    cache: SimulationCache,
    base_values: Vec<f64>,
    quality_values: Vec<f64>,
    /// Active (species, class) pairs, deterministic order.
    active: Vec<(Species, usize)>,
    seed_threshold_mm: f64,
}

impl<'a> SearchContext<'a> {
    fn new(
        stand0: &'a Stand,
        kernel: &'a GrowthKernel,
        market: &'a MarketModel,
        search: &'a SearchConfig,
    ) -> Result<Self> {
        let mut active = Vec::new();
        let last = stand0.grid().last_class();
        for (species, cohorts) in stand0.layers() {
            let occupied: Vec<usize> = cohorts
                .iter()
                .enumerate()
                .filter(|(_, c)| c.stems >= search.min_searchable_stems)
                .map(|(i, _)| i)
                .collect();
            if let (Some(&lo), Some(&hi)) = (occupied.first(), occupied.last()) {
                let hi = (hi + search.class_reach()).min(last);
                for class in lo..=hi {
                    active.push((species, class));
                }
            }
        }
        let seed_threshold_mm = stand0.ba_weighted_mean_diameter().unwrap_or(0.0);
        Ok(SearchContext {
            stand0,
            market,
            search,
            cache: SimulationCache::new(stand0, kernel, market)?,
            base_values: search.retention_values(),
            quality_values: search.quality_retention_values(),
            active,
            seed_threshold_mm,
        })
    }

    fn coords(&self, n_events: usize) -> Vec<Coord> {
        let mut coords = Vec::with_capacity(n_events * self.active.len());
        for event in 0..n_events {
            for &(species, class) in &self.active {
                coords.push(Coord {
                    event,
                    species,
                    class,
                });
            }
        }
        coords
    }

    fn grid_for(&self, event: usize, quality_on: bool) -> &[f64] {
        if quality_on && event == 0 {
            &self.quality_values
        } else {
            &self.base_values
        }
    }

    fn build_schedule(
        &self,
        rotation: usize,
        placement: &[usize],
        quality_on: bool,
        coords: &[Coord],
        assignment: &[f64],
    ) -> ManagementSchedule {
        let n = self.stand0.grid().class_count();
        let species_present: Vec<Species> = self.stand0.species().collect();
        let mut events = Vec::with_capacity(placement.len());
        for (event_idx, &step) in placement.iter().enumerate() {
            let mut overrides = BTreeMap::new();
            for &sp in &species_present {
                overrides.insert(sp, vec![1.0; n]);
            }
            for (coord, &value) in coords.iter().zip(assignment) {
                if coord.event == event_idx {
                    overrides.get_mut(&coord.species).unwrap()[coord.class] = value;
                }
            }
            events.push(ScheduleEvent {
                step,
                retention: vec![1.0; n],
                species_overrides: overrides,
                strip_road_survival: self.search.strip_road_survival,
                quality: quality_on && event_idx == 0,
                quality_half_width: self.search.quality_half_width,
            });
        }
        ManagementSchedule {
            rotation_steps: rotation,
            events,
        }
    }

    fn evaluate(&self, schedule: &ManagementSchedule) -> Result<f64> {
        let trace = rotation_trace_cached(
            self.stand0,
            schedule,
            self.market,
            self.search.regime,
            &self.cache,
        )?;
        match expected_return_rate(&trace) {
            Ok(r) => Ok(r),
            Err(ThinlabError::Domain(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn seed_value(&self, class: usize, grid: &[f64]) -> f64 {
        let mid = self.stand0.grid().midpoint(class);
        if mid <= self.seed_threshold_mm {
            1.0
        } else {
            snap_to_grid(0.2, grid)
        }
    }
}

fn snap_to_grid(value: f64, grid: &[f64]) -> f64 {
    *grid
        .iter()
        .min_by(|a, b| {
            let da = (*a - value).abs();
            let db = (*b - value).abs();
            da.partial_cmp(&db).unwrap().then(a.partial_cmp(b).unwrap())
        })
        .expect("non-empty grid")
}

/// Compare candidates: higher rate first, then the deterministic tie-break.
fn better(
    (r_a, sched_a, text_a): (f64, &ManagementSchedule, &str),
    (r_b, sched_b, text_b): (f64, &ManagementSchedule, &str),
) -> Ordering {
    r_b.partial_cmp(&r_a)
        .unwrap()
        .then(sched_a.rotation_steps.cmp(&sched_b.rotation_steps))
        .then(sched_a.events.len().cmp(&sched_b.events.len()))
        .then(text_a.cmp(text_b))
}

#[derive(Clone, Debug)]
struct BranchBest {
    r: f64,
    schedule: ManagementSchedule,
    text: String,
    assignment: Vec<f64>,
    evaluations: u64,
}

fn search_branch(
    ctx: &SearchContext<'_>,
    rotation: usize,
    placement: &[usize],
    quality_on: bool,
    seed_from: Option<&[f64]>,
) -> Result<BranchBest> {
    let coords = ctx.coords(placement.len());
    let grid_lens: Vec<usize> = coords
        .iter()
        .map(|c| ctx.grid_for(c.event, quality_on).len())
        .collect();
    let combos = grid_lens
        .iter()
        .try_fold(1u128, |acc, &len| acc.checked_mul(len as u128));

    let exhaustive = matches!(combos, Some(c) if c <= ctx.search.exhaustive_threshold);
    if exhaustive {
        search_exhaustive(ctx, rotation, placement, quality_on, &coords)
    } else {
        search_descent(ctx, rotation, placement, quality_on, &coords, seed_from)
    }
}

fn search_exhaustive(
    ctx: &SearchContext<'_>,
    rotation: usize,
    placement: &[usize],
    quality_on: bool,
    coords: &[Coord],
) -> Result<BranchBest> {
    let mut indices = vec![0usize; coords.len()];
    let mut assignment: Vec<f64> = coords
        .iter()
        .map(|c| ctx.grid_for(c.event, quality_on)[0])
        .collect();
    let mut best: Option<BranchBest> = None;
    let mut evaluations = 0u64;
    loop {
        let schedule = ctx.build_schedule(rotation, placement, quality_on, coords, &assignment);
        let r = ctx.evaluate(&schedule)?;
        evaluations += 1;
        let text = serde_json::to_string(&schedule).expect("schedule json");
        let candidate_is_better = match &best {
            None => true,
            Some(b) => {
                better((r, &schedule, &text), (b.r, &b.schedule, &b.text)) == Ordering::Less
            }
        };
        if candidate_is_better {
            best = Some(BranchBest {
                r,
                schedule,
                text,
                assignment: assignment.clone(),
                evaluations: 0,
            });
        }
        // odometer advance
        let mut pos = coords.len();
        loop {
            if pos == 0 {
                let mut best = best.expect("at least one candidate");
                best.evaluations = evaluations;
                return Ok(best);
            }
            pos -= 1;
            let grid = ctx.grid_for(coords[pos].event, quality_on);
            if indices[pos] + 1 < grid.len() {
                indices[pos] += 1;
                assignment[pos] = grid[indices[pos]];
                break;
            }
            indices[pos] = 0;
            assignment[pos] = grid[0];
        }
    }
}

fn search_descent(
    ctx: &SearchContext<'_>,
    rotation: usize,
    placement: &[usize],
    quality_on: bool,
    coords: &[Coord],
    seed_from: Option<&[f64]>,
) -> Result<BranchBest> {
    let mut assignment: Vec<f64> = match seed_from {
        Some(seed) => coords
            .iter()
            .zip(seed)
            .map(|(c, &v)| snap_down_to_grid(v, ctx.grid_for(c.event, quality_on)))
            .collect(),
        None => coords
            .iter()
            .map(|c| ctx.seed_value(c.class, ctx.grid_for(c.event, quality_on)))
            .collect(),
    };
    let mut evaluations = 0u64;
    let schedule = ctx.build_schedule(rotation, placement, quality_on, coords, &assignment);
    let mut best_r = ctx.evaluate(&schedule)?;
    evaluations += 1;

    for _sweep in 0..ctx.search.max_sweeps {
        let sweep_start = best_r;
        let mut improved = false;
        for (pos, coord) in coords.iter().enumerate() {
            let current = assignment[pos];
            let grid = ctx.grid_for(coord.event, quality_on);
            let mut best_here = current;
            for &v in grid {
                if v == current {
                    continue;
                }
                assignment[pos] = v;
                let schedule =
                    ctx.build_schedule(rotation, placement, quality_on, coords, &assignment);
                let r = ctx.evaluate(&schedule)?;
                evaluations += 1;
                if r > best_r {
                    best_r = r;
                    best_here = v;
                    improved = true;
                }
            }
            assignment[pos] = best_here;
        }
        if !improved || best_r - sweep_start <= ctx.search.tolerance {
            break;
        }
    }

    let schedule = ctx.build_schedule(rotation, placement, quality_on, coords, &assignment);
    let text = serde_json::to_string(&schedule).expect("schedule json");
    Ok(BranchBest {
        r: best_r,
        schedule,
        text,
        assignment,
        evaluations,
    })
}

fn snap_down_to_grid(value: f64, grid: &[f64]) -> f64 {
    // largest grid value not above `value` (1.0 maps to 1.0); falls back to
    // the smallest grid value
    let mut best = grid[0];
    for &v in grid {
        if v <= value + 1e-9 && v > best {
            best = v;
        }
    }
    best
}

fn k_subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        if items.len() - i < k {
            break;
        }
        for mut rest in k_subsets(&items[i + 1..], k - 1) {
            let mut subset = vec![first];
            subset.append(&mut rest);
            out.push(subset);
        }
    }
    out
}

/// Search for the schedule and rotation maximizing the expected return rate.
pub fn optimize(
    stand0: &Stand,
    kernel: &GrowthKernel,
    market: &MarketModel,
    search: &SearchConfig,
) -> Result<OptimResult> {
    search.validate()?;
    let started = Instant::now();
    let ctx = SearchContext::new(stand0, kernel, market, search)?;

    // phase (a): rotation lengths and thinning placements
    let mut placements: Vec<(usize, Vec<usize>)> = Vec::new();
    for rotation in search.rotation_steps_min..=search.rotation_steps_max {
        let candidate_steps: Vec<usize> = match &search.thinning_steps {
            Some(steps) => steps.iter().copied().filter(|&s| s < rotation && s >= 1).collect(),
            None => (1..rotation).collect(),
        };
        for k in 0..=search.max_thinnings.min(candidate_steps.len()) {
            for subset in k_subsets(&candidate_steps, k) {
                placements.push((rotation, subset));
            }
        }
    }

    let quality_branch_active =
        search.regime.quality_enabled() && search.quality_half_width > 0.0;

    // phase (b): per placement, retention search per branch
    let branch_results: Result<Vec<Vec<BranchBest>>> = run_in_thread_pool(|| {
        placements
            .par_iter()
            .map(|(rotation, placement)| {
                let off = search_branch(&ctx, *rotation, placement, false, None)?;
                let mut results = vec![off];
                if quality_branch_active && !placement.is_empty() {
                    let seed = results[0].assignment.clone();
                    let on = search_branch(&ctx, *rotation, placement, true, Some(&seed))?;
                    results.push(on);
                }
                Ok(results)
            })
            .collect()
    });
    let branch_results = branch_results?;

    let mut evaluations = 0u64;
    let mut log = Vec::new();
    let mut best: Option<&BranchBest> = None;
    for results in &branch_results {
        for b in results {
            evaluations += b.evaluations;
            log.push(EvalLogEntry {
                schedule_hash: b.schedule.content_hash(),
                rotation_steps: b.schedule.rotation_steps,
                r_expected: b.r,
            });
            let is_better = match best {
                None => true,
                Some(current) => {
                    better((b.r, &b.schedule, &b.text), (current.r, &current.schedule, &current.text))
                        == Ordering::Less
                }
            };
            if is_better {
                best = Some(b);
            }
        }
    }
    let best = best.ok_or_else(|| ThinlabError::Infeasible("empty search space".into()))?;

    // best candidate per rotation length, with the mean capitalization of a
    // re-simulation for reporting
    let mut per_rotation = Vec::new();
    for rotation in search.rotation_steps_min..=search.rotation_steps_max {
        let mut rotation_best: Option<&BranchBest> = None;
        for results in &branch_results {
            for b in results {
                if b.schedule.rotation_steps != rotation {
                    continue;
                }
                let is_better = match rotation_best {
                    None => true,
                    Some(current) => {
                        better(
                            (b.r, &b.schedule, &b.text),
                            (current.r, &current.schedule, &current.text),
                        ) == Ordering::Less
                    }
                };
                if is_better {
                    rotation_best = Some(b);
                }
            }
        }
        if let Some(b) = rotation_best {
            let sim = simulate_rotation(stand0, &b.schedule, kernel, market, search.regime)?;
            per_rotation.push(RotationBest {
                rotation_steps: rotation,
                rotation_age_months: stand0.age_months
                    + (rotation as u32) * crate::stand::STEP_MONTHS,
                r_expected: b.r,
                mean_capitalization: sim.trace.mean_capitalization(),
                schedule_hash: b.schedule.content_hash(),
            });
        }
    }

    Ok(OptimResult {
        regime: search.regime,
        best_r: best.r,
        best_schedule: best.schedule.clone(),
        per_rotation,
        evaluations,
        wall_time_ms: started.elapsed().as_millis(),
        log,
    })
}

/// Simulate the best schedule of an optimization result.
pub fn simulate_best(
    stand0: &Stand,
    kernel: &GrowthKernel,
    market: &MarketModel,
    result: &OptimResult,
) -> Result<RotationSimulation> {
    simulate_rotation(stand0, &result.best_schedule, kernel, market, result.regime)
}

/// Run all three regimes with a shared candidate set and report effect sizes.
pub fn compare_regimes(
    stand0: &Stand,
    kernel: &GrowthKernel,
    market: &MarketModel,
    base: &SearchConfig,
) -> Result<RegimeComparison> {
    let mut results = Vec::with_capacity(3);
    for regime in Regime::ALL {
        let mut search = base.clone();
        search.regime = regime;
        results.push(optimize(stand0, kernel, market, &search)?);
    }
    let quality_growth = results.pop().unwrap();
    let quality = results.pop().unwrap();
    let none = results.pop().unwrap();
    let delta_quality = quality.best_r - none.best_r;
    let delta_quality_growth = quality_growth.best_r - none.best_r;
    Ok(RegimeComparison {
        digit_quality: first_differing_significant_digit(none.best_r, quality.best_r),
        digit_quality_growth: first_differing_significant_digit(none.best_r, quality_growth.best_r),
        none,
        quality,
        quality_growth,
        delta_quality,
        delta_quality_growth,
    })
}
