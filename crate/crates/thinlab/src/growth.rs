//! Coefficient-driven growth kernel: expected diameter increment, mortality
//! probability and ingrowth per species and 30-month step.
//!
//! The functional forms are deliberately simple and fully config-driven so
//! that coefficients fitted from inventory data can be dropped in later. The
//! shipped defaults are a synthetic calibration targeting 1-4 mm/yr diameter
//! increments and below-2%-per-step mortality in dense stands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::species::Species;

/// Per-species coefficient set.
///
/// * `increment`: `[c0, c1, c2, c3, c4]` giving
///   `max(0, c0 + c1*d + c2*d^2 + c3*BA + c4*SI)` mm per step.
/// * `mortality`: `[m0, m1, m2]` giving `logistic(m0 + m1*d + m2*BA)`.
/// * `ingrowth`: `[g0, g1]` giving `max(0, g0 - g1*BA)` stems/ha per step,
///   entering the smallest class with quality 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesCoefficients {
    pub increment: [f64; 5],
    pub mortality: [f64; 3],
    pub ingrowth: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthKernel {
    species: BTreeMap<Species, SpeciesCoefficients>,
    /// Scale of the quality-to-growth coupling in `[0, 1]`: an increment is
    /// multiplied by `1 + coupling_strength * (j - 1)` when coupling is on.
    pub coupling_strength: f64,
}

#[derive(Deserialize, Serialize)]
struct KernelFile {
    species: BTreeMap<Species, SpeciesCoefficients>,
    #[serde(default = "default_coupling")]
    quality_growth_coupling: f64,
}

fn default_coupling() -> f64 {
    1.0
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GrowthKernel {
    pub fn new(species: BTreeMap<Species, SpeciesCoefficients>, coupling_strength: f64) -> Result<Self> {
        let kernel = GrowthKernel {
            species,
            coupling_strength,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Synthetic default coefficients for spruce, pine and birch.
    pub fn boreal_default() -> Self {
        let mut species = BTreeMap::new();
        species.insert(
            Species::Spruce,
            SpeciesCoefficients {
                increment: [4.0, 0.04, -0.0001, -0.08, 1.0],
                mortality: [-5.0, 0.0005, 0.02],
                ingrowth: [8.0, 0.25],
            },
        );
        species.insert(
            Species::Pine,
            SpeciesCoefficients {
                increment: [3.5, 0.035, -0.00009, -0.09, 1.0],
                mortality: [-5.2, 0.0006, 0.02],
                ingrowth: [5.0, 0.2],
            },
        );
        species.insert(
            Species::Birch,
            SpeciesCoefficients {
                increment: [4.5, 0.02, -0.00008, -0.10, 1.0],
                mortality: [-4.8, 0.0007, 0.025],
                ingrowth: [10.0, 0.3],
            },
        );
        GrowthKernel {
            species,
            coupling_strength: 1.0,
        }
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        let raw: KernelFile = serde_json::from_str(text)
            .map_err(|e| ThinlabError::parse(file, format!("invalid kernel json: {e}")))?;
        let kernel = GrowthKernel {
            species: raw.species,
            coupling_strength: raw.quality_growth_coupling,
        };
        kernel
            .validate()
            .map_err(|e| ThinlabError::parse(file, e.to_string()))?;
        Ok(kernel)
    }

    pub fn to_json(&self) -> String {
        let raw = KernelFile {
            species: self.species.clone(),
            quality_growth_coupling: self.coupling_strength,
        };
        serde_json::to_string_pretty(&raw).expect("kernel serialization cannot fail")
    }

    fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(ThinlabError::Config("kernel defines no species".into()));
        }
        if !(0.0..=1.0).contains(&self.coupling_strength) {
            return Err(ThinlabError::Config(format!(
                "quality_growth_coupling must lie in [0, 1], got {}",
                self.coupling_strength
            )));
        }
        for (sp, c) in &self.species {
            for (name, values) in [
                ("increment", &c.increment[..]),
                ("mortality", &c.mortality[..]),
                ("ingrowth", &c.ingrowth[..]),
            ] {
                for (i, v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(ThinlabError::Config(format!(
                            "species '{sp}' field '{name}[{i}]' is not finite"
                        )));
                    }
                }
            }
            if c.ingrowth[0] < 0.0 {
                return Err(ThinlabError::Config(format!(
                    "species '{sp}' field 'ingrowth[0]' must be non-negative"
                )));
            }
        }
        Ok(())
    }

    fn coefficients(&self, species: Species) -> Result<&SpeciesCoefficients> {
        self.species.get(&species).ok_or_else(|| {
            ThinlabError::Config(format!("growth kernel has no coefficients for '{species}'"))
        })
    }

    pub fn has_species(&self, species: Species) -> bool {
        self.species.contains_key(&species)
    }

    /// Expected diameter increment in mm per 30-month step, clamped at 0.
    ///
    /// Evaluated as `(diameter and site terms) + basal-area term`, matching
    /// the precomputed form in [`GrowthTable`] bit for bit.
    pub fn increment(
        &self,
        species: Species,
        diameter_mm: f64,
        basal_area: f64,
        site_index: f64,
    ) -> Result<f64> {
        let c = &self.coefficients(species)?.increment;
        let base =
            c[0] + c[1] * diameter_mm + c[2] * diameter_mm * diameter_mm + c[4] * site_index;
        Ok((base + c[3] * basal_area).max(0.0))
    }

    /// Mortality probability per step, guaranteed in `[0, 1)`.
    pub fn mortality(&self, species: Species, diameter_mm: f64, basal_area: f64) -> Result<f64> {
        let m = &self.coefficients(species)?.mortality;
        // the logistic saturates to exactly 1.0 in f64 for large arguments
        Ok(logistic(m[0] + m[1] * diameter_mm + m[2] * basal_area).min(1.0 - f64::EPSILON))
    }

    /// Ingrowth into the smallest class, stems/ha per step.
    pub fn ingrowth(&self, species: Species, basal_area: f64) -> Result<f64> {
        let g = &self.coefficients(species)?.ingrowth;
        Ok((g[0] - g[1] * basal_area).max(0.0))
    }

    /// Precompute the per-class terms of the growth functions for a fixed
    /// grid and site index; the per-step stepping then needs one exponential
    /// per species instead of one per class.
    ///
    /// The increment matches [`GrowthKernel::increment`] bit for bit. The
    /// mortality logistic is evaluated in factored form
    /// `1 / (1 + e^-(m0 + m1 d) * e^-(m2 BA))`, which can differ from the
    /// direct form in the last units of precision.
    pub fn table(&self, grid: &DiameterClassGrid, site_index: f64) -> Result<GrowthTable> {
        let mut species = BTreeMap::new();
        for (&sp, c) in &self.species {
            let mut classes = Vec::with_capacity(grid.class_count());
            for d in grid.midpoints() {
                classes.push(ClassGrowth {
                    increment_base: c.increment[0]
                        + c.increment[1] * d
                        + c.increment[2] * d * d
                        + c.increment[4] * site_index,
                    mortality_base: (c.mortality[0] + c.mortality[1] * d).exp(),
                });
            }
            species.insert(
                sp,
                SpeciesGrowthTable {
                    classes,
                    increment_ba: c.increment[3],
                    mortality_ba: c.mortality[2],
                    ingrowth: c.ingrowth,
                },
            );
        }
        Ok(GrowthTable {
            species,
            coupling_strength: self.coupling_strength,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct ClassGrowth {
    /// Diameter and site terms of the increment predictor.
    increment_base: f64,
    /// `exp(m0 + m1 d)` of the mortality predictor.
    mortality_base: f64,
}

#[derive(Clone, Debug)]
struct SpeciesGrowthTable {
    classes: Vec<ClassGrowth>,
    increment_ba: f64,
    mortality_ba: f64,
    ingrowth: [f64; 2],
}

/// Per-class growth terms cached for one grid and site index.
#[derive(Clone, Debug)]
pub struct GrowthTable {
    species: BTreeMap<Species, SpeciesGrowthTable>,
    pub coupling_strength: f64,
}

impl GrowthTable {
    pub fn has_species(&self, species: Species) -> bool {
        self.species.contains_key(&species)
    }

    fn entry(&self, species: Species) -> Result<&SpeciesGrowthTable> {
        self.species.get(&species).ok_or_else(|| {
            ThinlabError::Config(format!("growth kernel has no coefficients for '{species}'"))
        })
    }

    /// Increment, survival and ingrowth of one species at the given basal
    /// area, written into `increments` and `survivals` (one slot per class).
    pub(crate) fn step_row(
        &self,
        species: Species,
        basal_area: f64,
        increments: &mut [f64],
        survivals: &mut [f64],
    ) -> Result<f64> {
        let t = self.entry(species)?;
        let mortality_step = (t.mortality_ba * basal_area).exp();
        let ba_term = t.increment_ba * basal_area;
        for (i, class) in t.classes.iter().enumerate() {
            increments[i] = (class.increment_base + ba_term).max(0.0);
            let odds = class.mortality_base * mortality_step;
            let mortality = if odds.is_finite() { odds / (1.0 + odds) } else { 1.0 };
            survivals[i] = 1.0 - mortality.min(1.0 - f64::EPSILON);
        }
        Ok((t.ingrowth[0] - t.ingrowth[1] * basal_area).max(0.0))
    }
}
