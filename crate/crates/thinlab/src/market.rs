//! Valuation: assortment volumes, roadside and stumpage values, harvest cost,
//! stand capitalization and relative value increment profiles.
//!
//! Quality enters the books only through the sawlog unit price: the roadside
//! value of a trunk is `v_pulp * P_pulp + v_saw * j * (P_saw + premium)`, with
//! the premium active only under clearcut pricing. Harvester time per cubic
//! meter follows a power law `t = c * v^(-2/3)` in the trunk volume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::growth::GrowthKernel;
use crate::species::Species;
use crate::stand::{Stand, STEP_YEARS};

/// Which operation prices the harvesting work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HarvestKind {
    Thinning,
    Clearcut,
}

/// Per-species market parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesMarket {
    /// Commercial trunk volume `v = a * (d_mm / 100)^b` in m^3.
    pub volume_a: f64,
    pub volume_b: f64,
    /// Smallest commercially usable breast-height diameter, mm.
    pub pulpwood_min_mm: f64,
    /// Center of the pulpwood-to-sawlog transition, mm.
    pub sawlog_threshold_mm: f64,
    /// Width of the linear sawlog-share ramp, mm.
    pub sawlog_ramp_mm: f64,
    /// Sawlog share reached above the ramp, in (0, 1].
    pub sawlog_share_max: f64,
    /// Roadside unit prices, EUR/m^3.
    pub pulp_price: f64,
    pub saw_price: f64,
    /// Sawlog unit-price uplift applied under clearcut pricing, EUR/m^3.
    pub clearcut_premium: f64,
    /// Harvester time scales for `t = c * v^(-2/3)`, machine-minutes.
    pub time_scale_thinning: f64,
    pub time_scale_clearcut: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub species: BTreeMap<Species, SpeciesMarket>,
    /// Harvester cost rate, EUR per machine-minute.
    pub machine_rate_eur_min: f64,
    /// Stand establishment cost amortized at final harvest, EUR/ha.
    pub regeneration_expense: f64,
    /// Bare land value entering capitalization, EUR/ha.
    pub bare_land_value: f64,
}

/// Pure roadside-value arithmetic for a single trunk.
pub fn trunk_roadside_value(
    v_pulp: f64,
    pulp_price: f64,
    v_saw: f64,
    saw_price: f64,
    quality_j: f64,
    premium: f64,
) -> f64 {
    v_pulp * pulp_price + v_saw * quality_j * (saw_price + premium)
}

impl MarketModel {
    /// Synthetic 2019-level placeholder prices and costs for the three species.
    pub fn boreal_default() -> Self {
        let mut species = BTreeMap::new();
        species.insert(
            Species::Spruce,
            SpeciesMarket {
                volume_a: 0.030,
                volume_b: 3.0,
                pulpwood_min_mm: 100.0,
                sawlog_threshold_mm: 200.0,
                sawlog_ramp_mm: 40.0,
                sawlog_share_max: 0.85,
                pulp_price: 17.5,
                saw_price: 58.0,
                clearcut_premium: 6.0,
                time_scale_thinning: 1.15,
                time_scale_clearcut: 0.78,
            },
        );
        species.insert(
            Species::Pine,
            SpeciesMarket {
                volume_a: 0.028,
                volume_b: 2.95,
                pulpwood_min_mm: 100.0,
                sawlog_threshold_mm: 215.0,
                sawlog_ramp_mm: 60.0,
                sawlog_share_max: 0.80,
                pulp_price: 17.0,
                saw_price: 55.0,
                clearcut_premium: 5.0,
                time_scale_thinning: 1.25,
                time_scale_clearcut: 0.85,
            },
        );
        species.insert(
            Species::Birch,
            SpeciesMarket {
                volume_a: 0.035,
                volume_b: 3.1,
                pulpwood_min_mm: 100.0,
                sawlog_threshold_mm: 230.0,
                sawlog_ramp_mm: 100.0,
                sawlog_share_max: 0.60,
                pulp_price: 16.5,
                saw_price: 44.0,
                clearcut_premium: 3.0,
                time_scale_thinning: 1.30,
                time_scale_clearcut: 0.88,
            },
        );
        MarketModel {
            species,
            machine_rate_eur_min: 1.6,
            regeneration_expense: 1400.0,
            bare_land_value: 0.0,
        }
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        let market: MarketModel = serde_json::from_str(text)
            .map_err(|e| ThinlabError::parse(file, format!("invalid market json: {e}")))?;
        market
            .validate()
            .map_err(|e| ThinlabError::parse(file, e.to_string()))?;
        Ok(market)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        for sp in Species::ALL {
            let m = self.species.get(&sp).ok_or_else(|| {
                ThinlabError::Config(format!("market model is missing species '{sp}'"))
            })?;
            let named: [(&str, f64); 8] = [
                ("volume_a", m.volume_a),
                ("pulp_price", m.pulp_price),
                ("saw_price", m.saw_price),
                ("clearcut_premium", m.clearcut_premium),
                ("time_scale_thinning", m.time_scale_thinning),
                ("time_scale_clearcut", m.time_scale_clearcut),
                ("pulpwood_min_mm", m.pulpwood_min_mm),
                ("sawlog_threshold_mm", m.sawlog_threshold_mm),
            ];
            for (name, v) in named {
                if !v.is_finite() || v < 0.0 {
                    return Err(ThinlabError::Config(format!(
                        "species '{sp}' field '{name}' must be finite and non-negative, got {v}"
                    )));
                }
            }
            if m.pulpwood_min_mm >= m.sawlog_threshold_mm {
                return Err(ThinlabError::Config(format!(
                    "species '{sp}': pulpwood_min_mm must be below sawlog_threshold_mm"
                )));
            }
            if !(m.sawlog_ramp_mm > 0.0) {
                return Err(ThinlabError::Config(format!(
                    "species '{sp}': sawlog_ramp_mm must be positive"
                )));
            }
            if !(m.sawlog_share_max > 0.0 && m.sawlog_share_max <= 1.0) {
                return Err(ThinlabError::Config(format!(
                    "species '{sp}': sawlog_share_max must lie in (0, 1]"
                )));
            }
        }
        if !self.machine_rate_eur_min.is_finite()
            || self.machine_rate_eur_min < 0.0
            || self.regeneration_expense < 0.0
            || self.bare_land_value < 0.0
        {
            return Err(ThinlabError::Config(
                "machine rate, regeneration expense and bare land value must be non-negative"
                    .into(),
            ));
        }
        Ok(())
    }

    fn spec(&self, species: Species) -> &SpeciesMarket {
        // validate() guarantees completeness
        &self.species[&species]
    }

    pub fn is_commercial(&self, species: Species, diameter_mm: f64) -> bool {
        diameter_mm >= self.spec(species).pulpwood_min_mm
    }

    /// Sawlog share of commercial volume at the given diameter.
    pub fn sawlog_share(&self, species: Species, diameter_mm: f64) -> f64 {
        let m = self.spec(species);
        let lo = m.sawlog_threshold_mm - m.sawlog_ramp_mm / 2.0;
        m.sawlog_share_max * ((diameter_mm - lo) / m.sawlog_ramp_mm).clamp(0.0, 1.0)
    }

    /// Expected pulpwood and sawlog volumes of one trunk, m^3.
    pub fn assortment_volumes(&self, species: Species, diameter_mm: f64) -> (f64, f64) {
        let m = self.spec(species);
        if diameter_mm < m.pulpwood_min_mm {
            return (0.0, 0.0);
        }
        let volume = m.volume_a * (diameter_mm / 100.0).powf(m.volume_b);
        let share = self.sawlog_share(species, diameter_mm);
        (volume * (1.0 - share), volume * share)
    }

    /// Harvester time consumption per m^3 for a trunk of the given volume.
    pub fn harvest_time_per_m3(
        &self,
        species: Species,
        kind: HarvestKind,
        trunk_volume: f64,
    ) -> Result<f64> {
        if trunk_volume <= 0.0 {
            return Err(ThinlabError::Domain("non-commercial trunk".into()));
        }
        let scale = match kind {
            HarvestKind::Thinning => self.spec(species).time_scale_thinning,
            HarvestKind::Clearcut => self.spec(species).time_scale_clearcut,
        };
        Ok(scale * trunk_volume.powf(-2.0 / 3.0))
    }

    /// Harvesting cost per m^3, EUR.
    pub fn harvest_cost_per_m3(
        &self,
        species: Species,
        kind: HarvestKind,
        trunk_volume: f64,
    ) -> Result<f64> {
        Ok(self.machine_rate_eur_min * self.harvest_time_per_m3(species, kind, trunk_volume)?)
    }

    /// Roadside value of one trunk, EUR. The sawlog premium applies only under
    /// clearcut pricing.
    pub fn tree_roadside_value(
        &self,
        species: Species,
        diameter_mm: f64,
        quality_j: f64,
        clearcut: bool,
    ) -> f64 {
        let m = self.spec(species);
        let (vp, vs) = self.assortment_volumes(species, diameter_mm);
        let premium = if clearcut { m.clearcut_premium } else { 0.0 };
        trunk_roadside_value(vp, m.pulp_price, vs, m.saw_price, quality_j, premium)
    }

    /// Net realizable value of one standing trunk: roadside value minus the
    /// harvesting expense. Sub-commercial trunks are worth 0 by convention;
    /// small commercial trunks may be worth less than their harvesting cost.
    pub fn tree_stumpage_value(
        &self,
        species: Species,
        diameter_mm: f64,
        quality_j: f64,
        clearcut: bool,
    ) -> f64 {
        let kind = if clearcut {
            HarvestKind::Clearcut
        } else {
            HarvestKind::Thinning
        };
        self.stumpage_with(species, diameter_mm, quality_j, kind, clearcut)
    }

    /// Stumpage with the cost basis and the premium decoupled.
    pub(crate) fn stumpage_with(
        &self,
        species: Species,
        diameter_mm: f64,
        quality_j: f64,
        kind: HarvestKind,
        premium: bool,
    ) -> f64 {
        let (vp, vs) = self.assortment_volumes(species, diameter_mm);
        let volume = vp + vs;
        if volume <= 0.0 {
            return 0.0;
        }
        let cost = self
            .harvest_cost_per_m3(species, kind, volume)
            .expect("positive volume");
        self.tree_roadside_value(species, diameter_mm, quality_j, premium) - volume * cost
    }

    /// Balance-sheet capitalization: liquidation value of every cohort (floored
    /// at zero per class) plus the bare land value.
    pub fn stand_capitalization(&self, stand: &Stand, clearcut: bool) -> f64 {
        let mut total = self.bare_land_value;
        for (species, cohorts) in stand.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    let v = self.tree_stumpage_value(
                        species,
                        stand.grid().midpoint(i),
                        c.quality,
                        clearcut,
                    );
                    if v > 0.0 {
                        total += c.stems * v;
                    }
                }
            }
        }
        total
    }

    /// Total commercial standing volume, m^3/ha.
    pub fn standing_volume(&self, stand: &Stand) -> f64 {
        let mut total = 0.0;
        for (species, cohorts) in stand.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    let (vp, vs) = self.assortment_volumes(species, stand.grid().midpoint(i));
                    total += c.stems * (vp + vs);
                }
            }
        }
        total
    }

    /// Precompute per-class valuation terms for a grid; used by the hot paths.
    pub fn valuation_table(&self, grid: &DiameterClassGrid) -> ValuationTable {
        let mut per_species = BTreeMap::new();
        for sp in Species::ALL {
            let m = self.spec(sp);
            let mut classes = Vec::with_capacity(grid.class_count());
            for mid in grid.midpoints() {
                let (vp, vs) = self.assortment_volumes(sp, mid);
                let volume = vp + vs;
                let (cost_thin, cost_clear) = if volume > 0.0 {
                    (
                        volume * self.harvest_cost_per_m3(sp, HarvestKind::Thinning, volume).unwrap(),
                        volume * self.harvest_cost_per_m3(sp, HarvestKind::Clearcut, volume).unwrap(),
                    )
                } else {
                    (0.0, 0.0)
                };
                classes.push(ClassValuation {
                    pulp_revenue: vp * m.pulp_price,
                    saw_volume: vs,
                    saw_price: m.saw_price,
                    saw_price_clearcut: m.saw_price + m.clearcut_premium,
                    cost_thinning: cost_thin,
                    cost_clearcut: cost_clear,
                });
            }
            per_species.insert(sp, classes);
        }
        ValuationTable {
            per_species,
            bare_land_value: self.bare_land_value,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct ClassValuation {
    pulp_revenue: f64,
    saw_volume: f64,
    saw_price: f64,
    saw_price_clearcut: f64,
    cost_thinning: f64,
    cost_clearcut: f64,
}

/// Per-class cached valuation for a fixed grid and market.
#[derive(Clone, Debug)]
pub struct ValuationTable {
    per_species: BTreeMap<Species, Vec<ClassValuation>>,
    bare_land_value: f64,
}

impl ValuationTable {
    #[inline]
    pub fn stumpage(&self, species: Species, class: usize, quality_j: f64, clearcut: bool) -> f64 {
        let c = &self.per_species[&species][class];
        if c.pulp_revenue == 0.0 && c.saw_volume == 0.0 {
            return 0.0;
        }
        if clearcut {
            c.pulp_revenue + c.saw_volume * quality_j * c.saw_price_clearcut - c.cost_clearcut
        } else {
            c.pulp_revenue + c.saw_volume * quality_j * c.saw_price - c.cost_thinning
        }
    }

    /// Capitalization with per-class flooring, matching
    /// [`MarketModel::stand_capitalization`].
    pub fn capitalization(&self, stand: &Stand, clearcut: bool) -> f64 {
        let mut total = self.bare_land_value;
        for (species, cohorts) in stand.layers() {
            let table = &self.per_species[&species];
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    let v = if clearcut {
                        let cv = &table[i];
                        if cv.pulp_revenue == 0.0 && cv.saw_volume == 0.0 {
                            0.0
                        } else {
                            cv.pulp_revenue + cv.saw_volume * c.quality * cv.saw_price_clearcut
                                - cv.cost_clearcut
                        }
                    } else {
                        let cv = &table[i];
                        if cv.pulp_revenue == 0.0 && cv.saw_volume == 0.0 {
                            0.0
                        } else {
                            cv.pulp_revenue + cv.saw_volume * c.quality * cv.saw_price
                                - cv.cost_thinning
                        }
                    };
                    if v > 0.0 {
                        total += c.stems * v;
                    }
                }
            }
        }
        total
    }
}

/// One point of a relative value increment profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub midpoint_mm: f64,
    pub rate_per_year: f64,
}

/// Relative value increment rate per species and diameter class over one
/// growth step, tracking each cohort through its transfer fraction and
/// survival so the rate reflects the value path of the trees initially in
/// the class. Classes with no stems or non-positive standing value are
/// omitted.
///
/// With `clearcut` set the step is priced as the last one of the rotation:
/// the trunks start the step without the sawlog premium and end it with the
/// premium applied, on clearcut harvesting costs throughout.
pub fn relative_value_increment_profile(
    market: &MarketModel,
    kernel: &GrowthKernel,
    stand: &Stand,
    coupling_on: bool,
    clearcut: bool,
) -> Result<BTreeMap<Species, Vec<ProfilePoint>>> {
    let plan = stand.step_plan(kernel, coupling_on)?;
    let n = stand.grid().class_count();
    let kind = if clearcut {
        HarvestKind::Clearcut
    } else {
        HarvestKind::Thinning
    };
    let mut out = BTreeMap::new();
    for (species, cohorts) in stand.layers() {
        let transfers = &plan.transfers[&species];
        let mut points = Vec::new();
        for (i, cohort) in cohorts.iter().enumerate() {
            if cohort.stems <= 0.0 {
                continue;
            }
            let value_now = market.stumpage_with(
                species,
                stand.grid().midpoint(i),
                cohort.quality,
                kind,
                false,
            );
            if value_now <= 0.0 {
                continue;
            }
            let end_value = |class: usize| {
                market.stumpage_with(
                    species,
                    stand.grid().midpoint(class),
                    cohort.quality,
                    kind,
                    clearcut,
                )
            };
            let f = transfers[i].advance_fraction;
            let value_next = if i + 1 < n {
                f * transfers[i + 1].survival * end_value(i + 1)
                    + (1.0 - f) * transfers[i].survival * end_value(i)
            } else {
                transfers[i].survival * end_value(i)
            };
            points.push(ProfilePoint {
                midpoint_mm: stand.grid().midpoint(i),
                rate_per_year: (value_next - value_now) / (value_now * STEP_YEARS),
            });
        }
        if !points.is_empty() {
            out.insert(species, points);
        }
    }
    Ok(out)
}

/// Indexes of strict local maxima in a profile (interior or boundary).
pub fn local_maxima(points: &[ProfilePoint]) -> Vec<usize> {
    let n = points.len();
    let mut maxima = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || points[i].rate_per_year > points[i - 1].rate_per_year;
        let right_ok = i + 1 == n || points[i].rate_per_year > points[i + 1].rate_per_year;
        if left_ok && right_ok {
            maxima.push(i);
        }
    }
    maxima
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::SpeciesCoefficients;
    use approx::assert_relative_eq;

    #[test]
    fn sub_commercial_trees_have_no_volume() {
        let market = MarketModel::boreal_default();
        assert_eq!(market.assortment_volumes(Species::Spruce, 80.0), (0.0, 0.0));
    }

    #[test]
    fn sawlog_share_is_half_max_at_threshold() {
        let market = MarketModel::boreal_default();
        let m = &market.species[&Species::Spruce];
        let share = market.sawlog_share(Species::Spruce, m.sawlog_threshold_mm);
        assert_relative_eq!(share, m.sawlog_share_max / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn spruce_transition_is_sharper_than_birch() {
        // slope of the sawlog share at the threshold: share_max / ramp width
        let market = MarketModel::boreal_default();
        let slope = |sp: Species| {
            let m = &market.species[&sp];
            let eps = 0.5;
            (market.sawlog_share(sp, m.sawlog_threshold_mm + eps)
                - market.sawlog_share(sp, m.sawlog_threshold_mm - eps))
                / (2.0 * eps)
        };
        assert!(slope(Species::Spruce) > slope(Species::Birch));
    }

    #[test]
    fn harvest_time_power_law_examples() {
        let mut market = MarketModel::boreal_default();
        market.species.get_mut(&Species::Spruce).unwrap().time_scale_thinning = 1.0;
        let t = |v: f64| {
            market
                .harvest_time_per_m3(Species::Spruce, HarvestKind::Thinning, v)
                .unwrap()
        };
        assert_relative_eq!(t(1.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(t(0.1), 10f64.powf(2.0 / 3.0), max_relative = 1e-12);
        // doubling the volume scales time by 2^(-2/3) regardless of v
        for v in [0.05, 0.2, 0.9] {
            assert_relative_eq!(
                t(2.0 * v) / t(v),
                2f64.powf(-2.0 / 3.0),
                max_relative = 1e-12
            );
        }
        assert!(market
            .harvest_time_per_m3(Species::Spruce, HarvestKind::Thinning, 0.0)
            .is_err());
    }

    #[test]
    fn roadside_value_direct_evaluation() {
        // v_pulp=0.2 @ 17, v_saw=0.3 @ 58, j=1.2, no premium
        let value = trunk_roadside_value(0.2, 17.0, 0.3, 58.0, 1.2, 0.0);
        assert_relative_eq!(value, 24.28, max_relative = 1e-12);
    }

    #[test]
    fn pulpwood_only_tree_ignores_quality() {
        let market = MarketModel::boreal_default();
        // 125 mm spruce is below the ramp: pure pulpwood
        let v1 = market.tree_roadside_value(Species::Spruce, 125.0, 1.0, false);
        let v2 = market.tree_roadside_value(Species::Spruce, 125.0, 1.5, false);
        assert_eq!(v1, v2);
    }

    #[test]
    fn unit_quality_reduces_to_plain_price_sum() {
        let market = MarketModel::boreal_default();
        let (vp, vs) = market.assortment_volumes(Species::Spruce, 250.0);
        let m = &market.species[&Species::Spruce];
        let expected = vp * m.pulp_price + vs * m.saw_price;
        assert_relative_eq!(
            market.tree_roadside_value(Species::Spruce, 250.0, 1.0, false),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn quality_derivative_is_saw_revenue_exactly() {
        let market = MarketModel::boreal_default();
        for d in [150.0, 190.0, 210.0, 260.0, 400.0] {
            let (_, vs) = market.assortment_volumes(Species::Spruce, d);
            let m = &market.species[&Species::Spruce];
            for clearcut in [false, true] {
                let p1 = market.tree_roadside_value(Species::Spruce, d, 1.0, clearcut);
                let p2 = market.tree_roadside_value(Species::Spruce, d, 2.0, clearcut);
                let premium = if clearcut { m.clearcut_premium } else { 0.0 };
                assert_relative_eq!(
                    p2 - p1,
                    vs * (m.saw_price + premium),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn stumpage_convention_and_cost_gap() {
        let market = MarketModel::boreal_default();
        assert_eq!(market.tree_stumpage_value(Species::Spruce, 80.0, 1.0, false), 0.0);
        for d in [112.5, 162.5, 212.5, 287.5] {
            let stump = market.tree_stumpage_value(Species::Spruce, d, 1.0, false);
            let road = market.tree_roadside_value(Species::Spruce, d, 1.0, false);
            assert!(stump < road);
        }
    }

    #[test]
    fn small_class_relative_stumpage_gain_beats_roadside_gain() {
        let market = MarketModel::boreal_default();
        // adjacent small pulpwood classes on the default grid
        let (d0, d1) = (112.5, 137.5);
        let s0 = market.tree_stumpage_value(Species::Spruce, d0, 1.0, false);
        let s1 = market.tree_stumpage_value(Species::Spruce, d1, 1.0, false);
        let r0 = market.tree_roadside_value(Species::Spruce, d0, 1.0, false);
        let r1 = market.tree_roadside_value(Species::Spruce, d1, 1.0, false);
        assert!(s0 > 0.0, "smallest commercial class must carry positive value");
        assert!((s1 - s0) / s0 > (r1 - r0) / r0);
    }

    #[test]
    fn capitalization_trivials_and_linearity() {
        let mut market = MarketModel::boreal_default();
        let stand = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        assert_eq!(market.stand_capitalization(&stand, false), 0.0);
        market.bare_land_value = 500.0;
        assert_eq!(market.stand_capitalization(&stand, false), 500.0);

        market.bare_land_value = 0.0;
        let mut stand = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        stand.set_cohort(Species::Spruce, 6, 400.0, 1.0).unwrap();
        stand.set_cohort(Species::Birch, 8, 150.0, 1.1).unwrap();
        let k1 = market.stand_capitalization(&stand, false);
        let mut doubled = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        doubled.set_cohort(Species::Spruce, 6, 800.0, 1.0).unwrap();
        doubled.set_cohort(Species::Birch, 8, 300.0, 1.1).unwrap();
        assert_relative_eq!(
            market.stand_capitalization(&doubled, false),
            2.0 * k1,
            max_relative = 1e-12
        );
    }

    #[test]
    fn valuation_table_matches_direct_path() {
        let market = MarketModel::boreal_default();
        let grid = DiameterClassGrid::default();
        let table = market.valuation_table(&grid);
        let mut stand = Stand::new(grid.clone(), 0, 1.0);
        stand.set_cohort(Species::Spruce, 4, 120.0, 1.0).unwrap();
        stand.set_cohort(Species::Spruce, 9, 220.0, 1.25).unwrap();
        stand.set_cohort(Species::Pine, 7, 90.0, 1.0).unwrap();
        for clearcut in [false, true] {
            assert_relative_eq!(
                table.capitalization(&stand, clearcut),
                market.stand_capitalization(&stand, clearcut),
                max_relative = 1e-12
            );
            for i in 0..grid.class_count() {
                assert_relative_eq!(
                    table.stumpage(Species::Spruce, i, 1.17, clearcut),
                    market.tree_stumpage_value(Species::Spruce, grid.midpoint(i), 1.17, clearcut),
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn roadside_value_monotone_in_diameter_on_defaults() {
        let market = MarketModel::boreal_default();
        for sp in Species::ALL {
            let mut last = -1.0;
            for i in 0..400 {
                let d = 40.0 + i as f64;
                let v = market.tree_roadside_value(sp, d, 1.0, false);
                assert!(v >= last, "roadside value decreased at {d} mm for {sp}");
                last = v;
            }
        }
    }

    #[test]
    fn profile_is_zero_without_growth() {
        let market = MarketModel::boreal_default();
        let mut species = BTreeMap::new();
        for sp in Species::ALL {
            species.insert(
                sp,
                SpeciesCoefficients {
                    increment: [0.0; 5],
                    mortality: [-60.0, 0.0, 0.0],
                    ingrowth: [0.0, 0.0],
                },
            );
        }
        let kernel = GrowthKernel::new(species, 1.0).unwrap();
        let mut stand = Stand::new(DiameterClassGrid::default(), 0, 1.0);
        stand.set_cohort(Species::Spruce, 6, 300.0, 1.0).unwrap();
        stand.set_cohort(Species::Spruce, 10, 100.0, 1.0).unwrap();
        let profile =
            relative_value_increment_profile(&market, &kernel, &stand, false, false).unwrap();
        for p in &profile[&Species::Spruce] {
            assert_relative_eq!(p.rate_per_year, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn clearcut_pricing_lifts_sawlog_class_rates() {
        let market = MarketModel::boreal_default();
        let kernel = GrowthKernel::boreal_default();
        let mut stand = Stand::new(DiameterClassGrid::default(), 480, 1.0);
        for class in 5..14 {
            stand.set_cohort(Species::Spruce, class, 120.0, 1.0).unwrap();
        }
        let plain =
            relative_value_increment_profile(&market, &kernel, &stand, false, false).unwrap();
        let premium =
            relative_value_increment_profile(&market, &kernel, &stand, false, true).unwrap();
        let threshold = market.species[&Species::Spruce].sawlog_threshold_mm;
        let plain = &plain[&Species::Spruce];
        let premium = &premium[&Species::Spruce];
        for (a, b) in plain.iter().zip(premium.iter()) {
            assert_eq!(a.midpoint_mm, b.midpoint_mm);
            if a.midpoint_mm >= threshold {
                assert!(
                    b.rate_per_year > a.rate_per_year,
                    "clearcut pricing should lift the rate at {} mm",
                    a.midpoint_mm
                );
            }
        }
    }

    #[test]
    fn power_law_recovery_from_generated_table() {
        let market = MarketModel::boreal_default();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let v = 0.02 * 1.15f64.powi(i);
            let t = market
                .harvest_time_per_m3(Species::Pine, HarvestKind::Thinning, v)
                .unwrap();
            xs.push(v.ln());
            ys.push(t.ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        let slope = sxy / sxx;
        assert!((slope + 2.0 / 3.0).abs() < 1e-9, "slope {slope}");
    }

    #[test]
    fn market_json_round_trip_and_validation() {
        let market = MarketModel::boreal_default();
        let text = market.to_json();
        let back = MarketModel::from_json(&text, "market.json").unwrap();
        assert_eq!(market, back);

        let mut broken = market.clone();
        broken.species.get_mut(&Species::Pine).unwrap().sawlog_ramp_mm = 0.0;
        let err = MarketModel::from_json(&broken.to_json(), "market.json").unwrap_err();
        assert!(err.to_string().contains("sawlog_ramp_mm"), "{err}");
    }
}
