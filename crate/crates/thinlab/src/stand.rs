//! Stand state: per-species diameter-class cohorts with quality multipliers,
//! and the 30-month growth step that moves stems between classes.

use std::collections::BTreeMap;

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::growth::GrowthKernel;
use crate::species::Species;
use crate::thinning::evolve_quality;

/// Length of one growth step.
pub const STEP_MONTHS: u32 = 30;
/// Step length in years, used wherever rates are reported per year.
pub const STEP_YEARS: f64 = 2.5;

/// One diameter-class cohort: expected stem count and the class mean quality
/// multiplier. Cohorts are real-valued; the model is an expectation machine,
/// not an individual-tree sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cohort {
    pub stems: f64,
    pub quality: f64,
}

impl Cohort {
    pub const EMPTY: Cohort = Cohort {
        stems: 0.0,
        quality: 1.0,
    };
}

impl Default for Cohort {
    fn default() -> Self {
        Cohort::EMPTY
    }
}

/// Per-class outcome of planning one growth step.
#[derive(Clone, Copy, Debug)]
pub struct ClassTransfer {
    /// Fraction of the cohort advancing one class (0 for the absorbing top class).
    pub advance_fraction: f64,
    /// Survival applied to the post-transfer population of this class.
    pub survival: f64,
}

/// Transfer fractions, survivals and ingrowth for one step, computed from the
/// pre-step state. Exposed so that per-cohort value paths can be tracked.
#[derive(Clone, Debug)]
pub struct StepPlan {
    pub transfers: BTreeMap<Species, Vec<ClassTransfer>>,
    pub ingrowth: BTreeMap<Species, f64>,
}

/// The evolving stand state.
#[derive(Clone, Debug, PartialEq)]
pub struct Stand {
    grid: DiameterClassGrid,
    layers: BTreeMap<Species, Vec<Cohort>>,
    pub age_months: u32,
    pub site_index: f64,
}

impl Stand {
    pub fn new(grid: DiameterClassGrid, age_months: u32, site_index: f64) -> Stand {
        Stand {
            grid,
            layers: BTreeMap::new(),
            age_months,
            site_index,
        }
    }

    pub fn grid(&self) -> &DiameterClassGrid {
        &self.grid
    }

    pub fn species(&self) -> impl Iterator<Item = Species> + '_ {
        self.layers.keys().copied()
    }

    pub fn layers(&self) -> impl Iterator<Item = (Species, &[Cohort])> {
        self.layers.iter().map(|(sp, v)| (*sp, v.as_slice()))
    }

    pub fn layer(&self, species: Species) -> Option<&[Cohort]> {
        self.layers.get(&species).map(|v| v.as_slice())
    }

    /// Ensure a (possibly all-empty) layer exists for `species`.
    pub fn ensure_layer(&mut self, species: Species) {
        let n = self.grid.class_count();
        self.layers
            .entry(species)
            .or_insert_with(|| vec![Cohort::EMPTY; n]);
    }

    pub fn cohort(&self, species: Species, class: usize) -> Cohort {
        self.layers
            .get(&species)
            .map(|v| v[class])
            .unwrap_or(Cohort::EMPTY)
    }

    pub fn set_cohort(
        &mut self,
        species: Species,
        class: usize,
        stems: f64,
        quality: f64,
    ) -> Result<()> {
        if class >= self.grid.class_count() {
            return Err(ThinlabError::Domain(format!(
                "class index {class} out of range (grid has {} classes)",
                self.grid.class_count()
            )));
        }
        if !stems.is_finite() || stems < 0.0 {
            return Err(ThinlabError::Domain(format!(
                "stems must be finite and non-negative, got {stems}"
            )));
        }
        if !quality.is_finite() || quality < 1.0 {
            return Err(ThinlabError::Domain(format!(
                "quality multiplier must be finite and at least 1, got {quality}"
            )));
        }
        self.ensure_layer(species);
        self.layers.get_mut(&species).unwrap()[class] = Cohort { stems, quality };
        Ok(())
    }

    pub(crate) fn set_cohort_unchecked(&mut self, species: Species, class: usize, cohort: Cohort) {
        self.ensure_layer(species);
        self.layers.get_mut(&species).unwrap()[class] = cohort;
    }

    pub fn total_stems(&self) -> f64 {
        self.layers
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.stems)
            .sum()
    }

    /// Count-weighted total of quality multipliers; conserved under pure transfer.
    pub fn quality_mass(&self) -> f64 {
        self.layers
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.stems * c.quality)
            .sum()
    }

    /// Stand basal area in m^2/ha.
    pub fn basal_area(&self) -> f64 {
        let mut total = 0.0;
        for cohorts in self.layers.values() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    let radius_m = self.grid.midpoint(i) / 2000.0;
                    total += c.stems * std::f64::consts::PI * radius_m * radius_m;
                }
            }
        }
        total
    }

    /// Basal-area-weighted mean breast-height diameter in mm.
    pub fn ba_weighted_mean_diameter(&self) -> Result<f64> {
        let mut ba_sum = 0.0;
        let mut weighted = 0.0;
        for cohorts in self.layers.values() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    let mid = self.grid.midpoint(i);
                    let radius_m = mid / 2000.0;
                    let ba = c.stems * std::f64::consts::PI * radius_m * radius_m;
                    ba_sum += ba;
                    weighted += ba * mid;
                }
            }
        }
        if ba_sum <= 0.0 {
            return Err(ThinlabError::Domain("no basal area".into()));
        }
        Ok(weighted / ba_sum)
    }

    /// Compute transfer fractions, survivals and ingrowth for one step from
    /// the current state. Covariates (basal area) are frozen at step start.
    pub fn step_plan(&self, kernel: &GrowthKernel, coupling_on: bool) -> Result<StepPlan> {
        let table = kernel.table(&self.grid, self.site_index)?;
        self.step_plan_with(&table, coupling_on)
    }

    /// [`Stand::step_plan`] against a precomputed growth table.
    pub fn step_plan_with(
        &self,
        table: &crate::growth::GrowthTable,
        coupling_on: bool,
    ) -> Result<StepPlan> {
        let ba = self.basal_area();
        let n = self.grid.class_count();
        let width = self.grid.class_width();
        let mut increments = vec![0.0; n];
        let mut survivals = vec![0.0; n];
        let mut transfers = BTreeMap::new();
        let mut ingrowth = BTreeMap::new();
        for (&species, cohorts) in &self.layers {
            let entering = table.step_row(species, ba, &mut increments, &mut survivals)?;
            let mut classes = Vec::with_capacity(n);
            for (i, cohort) in cohorts.iter().enumerate() {
                let delta = if coupling_on {
                    increments[i] * (1.0 + table.coupling_strength * (cohort.quality - 1.0))
                } else {
                    increments[i]
                };
                // top class is absorbing
                let advance_fraction = if i + 1 == n {
                    0.0
                } else {
                    (delta / width).clamp(0.0, 1.0)
                };
                classes.push(ClassTransfer {
                    advance_fraction,
                    survival: survivals[i],
                });
            }
            ingrowth.insert(species, entering);
            transfers.insert(species, classes);
        }
        Ok(StepPlan {
            transfers,
            ingrowth,
        })
    }

    /// Apply one 30-month growth step: class transfer, quality evolution,
    /// survival, then ingrowth into the smallest class with quality 1.
    pub fn grow_step(&self, kernel: &GrowthKernel, coupling_on: bool) -> Result<Stand> {
        let plan = self.step_plan(kernel, coupling_on)?;
        Ok(self.apply_step(&plan))
    }

    pub fn apply_step(&self, plan: &StepPlan) -> Stand {
        let n = self.grid.class_count();
        let mut out = Stand::new(
            self.grid.clone(),
            self.age_months + STEP_MONTHS,
            self.site_index,
        );
        for (&species, cohorts) in &self.layers {
            let classes = &plan.transfers[&species];
            let mut next = vec![Cohort::EMPTY; n];
            for i in 0..n {
                let (inflow, quality_in) = if i == 0 {
                    (0.0, 1.0)
                } else {
                    let up = cohorts[i - 1];
                    (up.stems * classes[i - 1].advance_fraction, up.quality)
                };
                let here = cohorts[i];
                let moving = here.stems * classes[i].advance_fraction;
                let staying = here.stems - moving;
                let quality = evolve_quality(inflow, quality_in, staying, here.quality);
                let stems = (inflow + staying) * classes[i].survival;
                next[i] = Cohort { stems, quality };
            }
            let entering = plan.ingrowth[&species];
            if entering > 0.0 {
                let c0 = next[0];
                let quality = evolve_quality(entering, 1.0, c0.stems, c0.quality);
                next[0] = Cohort {
                    stems: c0.stems + entering,
                    quality,
                };
            }
            out.layers.insert(species, next);
        }
        out
    }
}
