use serde::{Deserialize, Serialize};

use crate::error::{Result, ThinlabError};

/// Breast-height diameter class grid.
///
/// Classes are equal-width bins identified by their midpoints; the default
/// grid spans 37.5 mm to 512.5 mm in 25 mm classes, which resolves the
/// pulpwood/sawlog transition while keeping the state vector small.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterClassGrid {
    class_width_mm: f64,
    min_midpoint_mm: f64,
    class_count: usize,
}

impl Default for DiameterClassGrid {
    fn default() -> Self {
        DiameterClassGrid {
            class_width_mm: 25.0,
            min_midpoint_mm: 37.5,
            class_count: 20,
        }
    }
}

impl DiameterClassGrid {
    pub fn new(class_width_mm: f64, min_midpoint_mm: f64, class_count: usize) -> Result<Self> {
        if !(class_width_mm > 0.0) || !class_width_mm.is_finite() {
            return Err(ThinlabError::Config(format!(
                "class_width_mm must be positive, got {class_width_mm}"
            )));
        }
        if class_count < 2 {
            return Err(ThinlabError::Config(format!(
                "class_count must be at least 2, got {class_count}"
            )));
        }
        if !min_midpoint_mm.is_finite() || min_midpoint_mm <= 0.0 {
            return Err(ThinlabError::Config(format!(
                "min_midpoint_mm must be positive, got {min_midpoint_mm}"
            )));
        }
        Ok(DiameterClassGrid {
            class_width_mm,
            min_midpoint_mm,
            class_count,
        })
    }

    pub fn class_width(&self) -> f64 {
        self.class_width_mm
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Midpoint diameter (mm) of class `index`.
    pub fn midpoint(&self, index: usize) -> f64 {
        debug_assert!(index < self.class_count);
        self.min_midpoint_mm + index as f64 * self.class_width_mm
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.class_count).map(|i| self.midpoint(i))
    }

    /// Class whose midpoint matches `midpoint_mm` to within a small tolerance.
    pub fn class_of_midpoint(&self, midpoint_mm: f64) -> Option<usize> {
        let raw = (midpoint_mm - self.min_midpoint_mm) / self.class_width_mm;
        let idx = raw.round();
        if idx < 0.0 || idx >= self.class_count as f64 {
            return None;
        }
        let idx = idx as usize;
        if (self.midpoint(idx) - midpoint_mm).abs() < 1e-6 * self.class_width_mm {
            Some(idx)
        } else {
            None
        }
    }

    pub fn last_class(&self) -> usize {
        self.class_count - 1
    }
}
