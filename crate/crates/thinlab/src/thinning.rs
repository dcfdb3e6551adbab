//! Thinning events: per-class stem removal under the strip-road constraint,
//! the quality-selection value correction for retained trees, and the
//! evolution of class quality multipliers across growth steps.
//!
//! Quality within a class is modeled as a uniform distribution of half-width
//! `b` around the class mean. A selective thinning that keeps the top `p`
//! fraction of the trees surviving the strip roads lifts the retained mean to
//! `1 + b(1 - p)` while the trees removed by selection carry the complementary
//! mean `1 - b*p`, so the count-weighted value books balance at the event.

use std::collections::BTreeMap;

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::market::{HarvestKind, MarketModel};
use crate::species::Species;
use crate::stand::{Cohort, Stand};

pub const DEFAULT_QUALITY_HALF_WIDTH: f64 = 0.5;
pub const DEFAULT_STRIP_ROAD_SURVIVAL: f64 = 0.85;

/// Value correction for trees retained by a quality thinning with survival
/// rate `p` among strip-road survivors: `j = 1 + b(1 - p)`.
pub fn quality_correction(half_width_b: f64, survival_p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&half_width_b) {
        return Err(ThinlabError::Domain(format!(
            "quality distribution half-width must lie in [0, 1), got {half_width_b}"
        )));
    }
    if survival_p <= 0.0 {
        return Err(ThinlabError::Domain(
            "full removal leaves no remaining trees to correct".into(),
        ));
    }
    if survival_p > 1.0 {
        return Err(ThinlabError::Domain(format!(
            "survival rate must not exceed 1, got {survival_p}"
        )));
    }
    Ok(1.0 + half_width_b * (1.0 - survival_p))
}

/// Survival rate within the quality selection once strip roads (survival `a`)
/// have been opened: `p = s / a` where `s` is the total survival.
pub fn survival_after_strip_roads(total_survival_s: f64, road_survival_a: f64) -> Result<f64> {
    if !(road_survival_a > 0.0 && road_survival_a <= 1.0) {
        return Err(ThinlabError::Domain(format!(
            "strip-road survival must lie in (0, 1], got {road_survival_a}"
        )));
    }
    if total_survival_s <= 0.0 {
        return Err(ThinlabError::Domain(format!(
            "total survival must be positive, got {total_survival_s}"
        )));
    }
    if total_survival_s > road_survival_a {
        return Err(ThinlabError::Domain(
            "retention exceeds strip-road survival".into(),
        ));
    }
    Ok(total_survival_s / road_survival_a)
}

/// Count-weighted quality mix of trees transferring into a class and trees
/// remaining in it. Empty classes reset to the unit multiplier.
pub fn evolve_quality(
    transferring: f64,
    quality_in: f64,
    remaining: f64,
    quality_resident: f64,
) -> f64 {
    if transferring <= 0.0 && remaining <= 0.0 {
        return 1.0;
    }
    if transferring <= 0.0 {
        return quality_resident;
    }
    if remaining <= 0.0 {
        return quality_in;
    }
    let mixed = (transferring * quality_in + remaining * quality_resident)
        / (transferring + remaining);
    mixed.clamp(
        quality_in.min(quality_resident),
        quality_in.max(quality_resident),
    )
}

/// One thinning event: per-class retention fractions, the strip-road survival
/// bound and the quality-selection switch.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinningRule {
    pub step: usize,
    retention: BTreeMap<Species, Vec<f64>>,
    pub strip_road_survival: f64,
    pub quality: bool,
    pub quality_half_width: f64,
}

impl ThinningRule {
    pub fn new(
        step: usize,
        retention: BTreeMap<Species, Vec<f64>>,
        strip_road_survival: f64,
        quality: bool,
        quality_half_width: f64,
    ) -> ThinningRule {
        ThinningRule {
            step,
            retention,
            strip_road_survival,
            quality,
            quality_half_width,
        }
    }

    pub fn retention(&self) -> &BTreeMap<Species, Vec<f64>> {
        &self.retention
    }

    pub fn retention_for(&self, species: Species, class: usize) -> f64 {
        self.retention
            .get(&species)
            .map(|v| v[class])
            .unwrap_or(1.0)
    }

    /// A copy with the quality machinery disabled; used by the schedule runner
    /// to gate the correction to the first commercial thinning.
    pub fn without_quality(&self) -> ThinningRule {
        ThinningRule {
            quality: false,
            ..self.clone()
        }
    }

    pub fn validate(&self, grid: &DiameterClassGrid) -> Result<()> {
        if !(self.strip_road_survival > 0.0 && self.strip_road_survival <= 1.0) {
            return Err(ThinlabError::Infeasible(format!(
                "strip_road_survival must lie in (0, 1], got {}",
                self.strip_road_survival
            )));
        }
        if !(0.0..1.0).contains(&self.quality_half_width) {
            return Err(ThinlabError::Infeasible(format!(
                "quality half-width must lie in [0, 1), got {}",
                self.quality_half_width
            )));
        }
        for (sp, values) in &self.retention {
            if values.len() != grid.class_count() {
                return Err(ThinlabError::Infeasible(format!(
                    "retention vector for '{sp}' has {} entries, grid has {} classes",
                    values.len(),
                    grid.class_count()
                )));
            }
            for (i, &s) in values.iter().enumerate() {
                if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                    return Err(ThinlabError::Infeasible(format!(
                        "retention for '{sp}' class {i} must lie in [0, 1], got {s}"
                    )));
                }
                // A partially retained class can only be quality-selected if the
                // removal at least covers the strip roads; untouched classes are exempt.
                if self.quality && s < 1.0 && s > self.strip_road_survival {
                    return Err(ThinlabError::Infeasible(format!(
                        "retention {s} for '{sp}' class {i} exceeds strip-road survival {}",
                        self.strip_road_survival
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether applying this rule to `stand` would remove commercially sized stems.
    pub fn removes_commercial(&self, stand: &Stand, market: &MarketModel) -> bool {
        for (species, cohorts) in stand.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 && self.retention_for(species, i) < 1.0 {
                    let mid = stand.grid().midpoint(i);
                    if market.is_commercial(species, mid) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Removal bookkeeping for one class.
#[derive(Clone, Copy, Debug)]
pub struct ClassHarvest {
    pub species: Species,
    pub class: usize,
    pub midpoint_mm: f64,
    pub stems_removed: f64,
    pub pulp_volume: f64,
    pub saw_volume: f64,
    pub revenue: f64,
    pub cost: f64,
    pub net_cash: f64,
}

/// Removal bookkeeping for a whole thinning or clearcut event.
#[derive(Clone, Debug, Default)]
pub struct HarvestRecord {
    pub classes: Vec<ClassHarvest>,
}

impl HarvestRecord {
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn total_stems_removed(&self) -> f64 {
        self.classes.iter().map(|c| c.stems_removed).sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.classes.iter().map(|c| c.pulp_volume + c.saw_volume).sum()
    }

    pub fn total_revenue(&self) -> f64 {
        self.classes.iter().map(|c| c.revenue).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.classes.iter().map(|c| c.cost).sum()
    }

    pub fn total_net_cash(&self) -> f64 {
        self.classes.iter().map(|c| c.net_cash).sum()
    }

    fn push_removal(
        &mut self,
        market: &MarketModel,
        kind: HarvestKind,
        clearcut_pricing: bool,
        species: Species,
        class: usize,
        midpoint_mm: f64,
        stems: f64,
        quality: f64,
    ) {
        if stems <= 0.0 {
            return;
        }
        let (vp, vs) = market.assortment_volumes(species, midpoint_mm);
        let per_tree_volume = vp + vs;
        let revenue =
            stems * market.tree_roadside_value(species, midpoint_mm, quality, clearcut_pricing);
        let cost = if per_tree_volume > 0.0 {
            stems
                * per_tree_volume
                * market
                    .harvest_cost_per_m3(species, kind, per_tree_volume)
                    .expect("positive volume")
        } else {
            0.0
        };
        self.classes.push(ClassHarvest {
            species,
            class,
            midpoint_mm,
            stems_removed: stems,
            pulp_volume: stems * vp,
            saw_volume: stems * vs,
            revenue,
            cost,
            net_cash: revenue - cost,
        });
    }
}

/// Apply a thinning rule. Returns the post-event stand and the harvest record.
///
/// When `rule.quality` is set, every partially retained class receives the
/// retained-tree correction and the removed trees are valued at their
/// selected-out mean, so no value appears or vanishes at the event itself.
pub fn apply_thinning(
    stand: &Stand,
    rule: &ThinningRule,
    market: &MarketModel,
) -> Result<(Stand, HarvestRecord)> {
    rule.validate(stand.grid())?;
    let mut out = stand.clone();
    let mut record = HarvestRecord::default();
    for (species, cohorts) in stand.layers() {
        for (class, cohort) in cohorts.iter().enumerate() {
            let s = rule.retention_for(species, class);
            if cohort.stems <= 0.0 || s >= 1.0 {
                continue;
            }
            let remaining = s * cohort.stems;
            let removed = cohort.stems - remaining;
            let (quality_removed, quality_remaining) = if rule.quality && s > 0.0 {
                let p = survival_after_strip_roads(s, rule.strip_road_survival)?;
                let correction = quality_correction(rule.quality_half_width, p)?;
                let a = rule.strip_road_survival;
                let selected_out_mean = 1.0 - rule.quality_half_width * p;
                let removed_mean =
                    cohort.quality * ((1.0 - a) + (a - s) * selected_out_mean) / (1.0 - s);
                (removed_mean, cohort.quality * correction)
            } else {
                (cohort.quality, cohort.quality)
            };
            let midpoint = stand.grid().midpoint(class);
            record.push_removal(
                market,
                HarvestKind::Thinning,
                false,
                species,
                class,
                midpoint,
                removed,
                quality_removed,
            );
            out.set_cohort_unchecked(
                species,
                class,
                Cohort {
                    stems: remaining,
                    quality: if remaining > 0.0 { quality_remaining } else { 1.0 },
                },
            );
        }
    }
    Ok((out, record))
}

/// Remove every stem at clearcut prices (sawlog premium included).
pub fn clearcut_all(stand: &Stand, market: &MarketModel) -> (Stand, HarvestRecord) {
    let mut out = stand.clone();
    let mut record = HarvestRecord::default();
    for (species, cohorts) in stand.layers() {
        for (class, cohort) in cohorts.iter().enumerate() {
            if cohort.stems <= 0.0 {
                continue;
            }
            let midpoint = stand.grid().midpoint(class);
            record.push_removal(
                market,
                HarvestKind::Clearcut,
                true,
                species,
                class,
                midpoint,
                cohort.stems,
                cohort.quality,
            );
            out.set_cohort_unchecked(species, class, Cohort::EMPTY);
        }
    }
    (out, record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_rule(step: usize, retention: f64, quality: bool) -> ThinningRule {
        let grid = DiameterClassGrid::default();
        let mut map = BTreeMap::new();
        for sp in Species::ALL {
            map.insert(sp, vec![retention; grid.class_count()]);
        }
        ThinningRule::new(step, map, 0.8, quality, DEFAULT_QUALITY_HALF_WIDTH)
    }

    fn demo_stand() -> Stand {
        let mut stand = Stand::new(DiameterClassGrid::default(), 400, 1.0);
        stand.set_cohort(Species::Spruce, 6, 500.0, 1.0).unwrap();
        stand.set_cohort(Species::Spruce, 8, 300.0, 1.0).unwrap();
        stand
    }

    #[test]
    fn quality_correction_examples() {
        assert_relative_eq!(quality_correction(0.5, 1.0).unwrap(), 1.0);
        assert_relative_eq!(quality_correction(0.5, 0.5).unwrap(), 1.25);
        // p -> 0+ approaches 1 + b
        assert_relative_eq!(quality_correction(0.5, 1e-12).unwrap(), 1.5, epsilon = 1e-9);
        assert!(quality_correction(0.5, 0.0).is_err());
        assert!(quality_correction(0.5, -0.1).is_err());
    }

    #[test]
    fn strip_road_survival_examples() {
        assert_relative_eq!(survival_after_strip_roads(0.8, 0.8).unwrap(), 1.0);
        assert_relative_eq!(survival_after_strip_roads(0.6, 0.8).unwrap(), 0.75);
        assert_relative_eq!(survival_after_strip_roads(0.4, 1.0).unwrap(), 0.4);
        let err = survival_after_strip_roads(0.9, 0.8).unwrap_err();
        assert!(err.to_string().contains("retention exceeds strip-road survival"));
    }

    #[test]
    fn evolve_quality_examples() {
        assert_eq!(evolve_quality(0.0, 1.0, 40.0, 1.3), 1.3);
        assert_relative_eq!(evolve_quality(10.0, 1.2, 10.0, 1.0), 1.1);
        assert_eq!(evolve_quality(0.0, 1.0, 0.0, 1.0), 1.0);
        assert_eq!(evolve_quality(25.0, 1.4, 0.0, 1.0), 1.4);
    }

    /// Three-class toy stand pushed through two steps; the expected multipliers
    /// were worked out by hand from the count-weighted mixing rule.
    #[test]
    fn multi_step_quality_propagation_matches_hand_transcript() {
        // classes hold (stems, quality): [100 @ 1.0], [50 @ 1.2], [20 @ 1.4]
        // transfer fraction is 0.5 everywhere, no mortality, no ingrowth.
        //
        // step 1:
        //   class0: 50 stay @ 1.0
        //   class1: 50 in @ 1.0 + 25 stay @ 1.2 -> 75 @ (50*1.0+25*1.2)/75 = 1.0666...
        //   class2 (top, absorbing): 25 in @ 1.2 + 20 stay @ 1.4 -> 45 @ (25*1.2+20*1.4)/45
        let j2_step1 = (25.0 * 1.2 + 20.0 * 1.4) / 45.0;
        // step 2:
        //   class0: 25 stay @ 1.0
        //   class1: 25 in @ 1.0 + 37.5 stay @ 1.0666... -> 62.5 @ (25 + 37.5*16/15)/62.5 = 1.04
        //   class2: 37.5 in @ 1.0666... + 45 stay @ j2_step1
        let j1_step1 = (50.0 * 1.0 + 25.0 * 1.2) / 75.0;
        let j2_step2 = (37.5 * j1_step1 + 45.0 * j2_step1) / 82.5;

        let grid = DiameterClassGrid::new(25.0, 100.0, 3).unwrap();
        let mut stand = Stand::new(grid, 0, 1.0);
        stand.set_cohort(Species::Spruce, 0, 100.0, 1.0).unwrap();
        stand.set_cohort(Species::Spruce, 1, 50.0, 1.2).unwrap();
        stand.set_cohort(Species::Spruce, 2, 20.0, 1.4).unwrap();

        let mut species = BTreeMap::new();
        species.insert(
            Species::Spruce,
            crate::growth::SpeciesCoefficients {
                increment: [12.5, 0.0, 0.0, 0.0, 0.0],
                mortality: [-60.0, 0.0, 0.0],
                ingrowth: [0.0, 0.0],
            },
        );
        let kernel = crate::growth::GrowthKernel::new(species, 1.0).unwrap();

        let s1 = stand.grow_step(&kernel, false).unwrap();
        let layer = s1.layer(Species::Spruce).unwrap();
        assert_relative_eq!(layer[1].quality, j1_step1, max_relative = 1e-12);
        assert_relative_eq!(layer[2].quality, j2_step1, max_relative = 1e-12);

        let s2 = s1.grow_step(&kernel, false).unwrap();
        let layer = s2.layer(Species::Spruce).unwrap();
        assert_relative_eq!(layer[1].quality, 1.04, max_relative = 1e-12);
        assert_relative_eq!(layer[2].quality, j2_step2, max_relative = 1e-12);
        assert_relative_eq!(layer[2].stems, 82.5, max_relative = 1e-12);
    }

    #[test]
    fn null_thinning_changes_nothing() {
        let stand = demo_stand();
        let market = MarketModel::boreal_default();
        let rule = uniform_rule(2, 1.0, false);
        let (after, record) = apply_thinning(&stand, &rule, &market).unwrap();
        assert_eq!(after, stand);
        assert!(record.is_empty());
    }

    #[test]
    fn composed_quality_correction_example() {
        // single class, s = 0.6, a = 0.8, b = 0.5 -> p = 0.75, j = 1.125
        let mut stand = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        stand.set_cohort(Species::Spruce, 8, 100.0, 1.0).unwrap();
        let market = MarketModel::boreal_default();
        let rule = uniform_rule(0, 0.6, true);
        let (after, record) = apply_thinning(&stand, &rule, &market).unwrap();
        let c = after.layer(Species::Spruce).unwrap()[8];
        assert_relative_eq!(c.stems, 60.0, max_relative = 1e-12);
        assert_relative_eq!(c.quality, 1.125, max_relative = 1e-12);
        assert_relative_eq!(record.total_stems_removed(), 40.0, max_relative = 1e-12);
        // removed + remaining = original, exactly
        assert_eq!(c.stems + record.total_stems_removed(), 100.0);
    }

    #[test]
    fn quality_flag_off_is_isolated() {
        let stand = demo_stand();
        let market = MarketModel::boreal_default();
        let with_quality_machinery_absent = {
            let rule = uniform_rule(0, 0.6, false);
            apply_thinning(&stand, &rule, &market).unwrap()
        };
        let (after, record) = with_quality_machinery_absent;
        for (_, cohorts) in after.layers() {
            for c in cohorts {
                assert_eq!(c.quality, 1.0);
            }
        }
        // same removal without the flag gives identical revenue
        let rule_q = uniform_rule(0, 0.6, true);
        let (_, record_q) = apply_thinning(&stand, &rule_q, &market).unwrap();
        assert_eq!(record.total_stems_removed(), record_q.total_stems_removed());
        // quality-selected removals are devalued, never inflated
        assert!(record_q.total_revenue() <= record.total_revenue());
    }

    #[test]
    fn quality_thinning_never_lowers_multipliers() {
        let mut stand = demo_stand();
        stand.set_cohort(Species::Spruce, 10, 150.0, 1.2).unwrap();
        let market = MarketModel::boreal_default();
        let rule = uniform_rule(0, 0.5, true);
        let (after, _) = apply_thinning(&stand, &rule, &market).unwrap();
        for (sp, cohorts) in after.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    assert!(
                        c.quality >= stand.cohort(sp, i).quality,
                        "class {i} lowered its multiplier"
                    );
                }
            }
        }
    }

    #[test]
    fn event_conserves_count_weighted_quality() {
        // removed mean and retained mean must blend back to the class mean
        let mut stand = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        stand.set_cohort(Species::Spruce, 9, 200.0, 1.1).unwrap();
        let market = MarketModel::boreal_default();
        let rule = uniform_rule(0, 0.6, true);
        let (after, _) = apply_thinning(&stand, &rule, &market).unwrap();
        let retained = after.layer(Species::Spruce).unwrap()[9];
        let p: f64 = 0.75;
        let removed_mean =
            1.1 * ((1.0 - 0.8) + (0.8 - 0.6) * (1.0 - 0.5 * p)) / 0.4;
        let blended = (retained.stems * retained.quality + 80.0 * removed_mean) / 200.0;
        assert_relative_eq!(blended, 1.1, max_relative = 1e-12);
    }

    #[test]
    fn invalid_rules_are_rejected_before_mutation() {
        let stand = demo_stand();
        let market = MarketModel::boreal_default();
        // retention above strip-road survival with quality selection
        let rule = uniform_rule(0, 0.9, true);
        assert!(apply_thinning(&stand, &rule, &market).is_err());
        // same retention without quality selection is fine
        let rule = uniform_rule(0, 0.9, false);
        assert!(apply_thinning(&stand, &rule, &market).is_ok());
    }
}
