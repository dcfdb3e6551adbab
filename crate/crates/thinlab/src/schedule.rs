//! Management schedules: an ordered list of thinning events plus the rotation
//! length, as read and written by the optimizer and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::species::Species;
use crate::thinning::{ThinningRule, DEFAULT_QUALITY_HALF_WIDTH, DEFAULT_STRIP_ROAD_SURVIVAL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    /// Growth step index at which the event is applied (0 = before any growth).
    pub step: usize,
    /// Per-class retention applied to every species unless overridden.
    pub retention: Vec<f64>,
    /// Optional per-species retention vectors.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub species_overrides: BTreeMap<Species, Vec<f64>>,
    #[serde(default = "default_strip_road_survival")]
    pub strip_road_survival: f64,
    #[serde(default)]
    pub quality: bool,
    #[serde(default = "default_quality_half_width")]
    pub quality_half_width: f64,
}

fn default_strip_road_survival() -> f64 {
    DEFAULT_STRIP_ROAD_SURVIVAL
}

fn default_quality_half_width() -> f64 {
    DEFAULT_QUALITY_HALF_WIDTH
}

impl ScheduleEvent {
    pub fn rule(&self) -> ThinningRule {
        let mut retention = BTreeMap::new();
        for sp in Species::ALL {
            let values = self
                .species_overrides
                .get(&sp)
                .cloned()
                .unwrap_or_else(|| self.retention.clone());
            retention.insert(sp, values);
        }
        ThinningRule::new(
            self.step,
            retention,
            self.strip_road_survival,
            self.quality,
            self.quality_half_width,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManagementSchedule {
    pub rotation_steps: usize,
    #[serde(default)]
    pub events: Vec<ScheduleEvent>,
}

impl ManagementSchedule {
    pub fn unthinned(rotation_steps: usize) -> Self {
        ManagementSchedule {
            rotation_steps,
            events: Vec::new(),
        }
    }

    pub fn validate(&self, grid: &DiameterClassGrid) -> Result<()> {
        if self.rotation_steps < 1 {
            return Err(ThinlabError::Infeasible(
                "rotation must span at least one step".into(),
            ));
        }
        let mut last_step = None;
        for event in &self.events {
            if event.step >= self.rotation_steps {
                return Err(ThinlabError::Infeasible(format!(
                    "thinning at step {} lies beyond the rotation ({} steps)",
                    event.step, self.rotation_steps
                )));
            }
            if let Some(prev) = last_step {
                if event.step <= prev {
                    return Err(ThinlabError::Infeasible(
                        "thinning events must be ordered by strictly increasing step".into(),
                    ));
                }
            }
            last_step = Some(event.step);
            event.rule().validate(grid)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| ThinlabError::parse(file, format!("invalid schedule json: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization cannot fail")
    }

    /// Stable content hash used in evaluation logs.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("schedule serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
