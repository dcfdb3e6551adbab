//! File formats: stand CSV with front-matter metadata, config JSON loading,
//! and CSV writing helpers used by the CLI.
//!
//! Stand files are delimited text with a comment front-matter line:
//!
//! ```text
//! # age_months=432, site_index=1.05
//! species,diameter_class_midpoint_mm,stems_per_ha,quality
//! spruce,137.5,412,1
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so re-read
//! values are bit-identical.

use std::fs;
use std::path::Path;

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::growth::GrowthKernel;
use crate::market::MarketModel;
use crate::schedule::ManagementSchedule;
use crate::species::Species;
use crate::stand::Stand;

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ThinlabError::io(path, e))
}

pub fn write_string(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ThinlabError::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| ThinlabError::io(path, e))
}

pub fn load_kernel(path: &Path) -> Result<GrowthKernel> {
    GrowthKernel::from_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_market(path: &Path) -> Result<MarketModel> {
    MarketModel::from_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_schedule(path: &Path) -> Result<ManagementSchedule> {
    ManagementSchedule::from_json(&read_to_string(path)?, &path.display().to_string())
}

/// Parse a stand file against the given diameter grid.
pub fn parse_stand(text: &str, file: &str, grid: &DiameterClassGrid) -> Result<Stand> {
    let mut age_months: Option<u32> = None;
    let mut site_index: Option<f64> = None;
    let mut header_seen = false;
    let mut stand: Option<Stand> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for pair in meta.split(',') {
                let pair = pair.trim();
                if pair.is_empty() {
                    continue;
                }
                let (key, value) = pair.split_once('=').ok_or_else(|| {
                    ThinlabError::parse(
                        file,
                        format!("line {}: expected key=value in front matter, got '{pair}'", lineno + 1),
                    )
                })?;
                match key.trim() {
                    "age_months" => {
                        age_months = Some(value.trim().parse().map_err(|_| {
                            ThinlabError::parse(
                                file,
                                format!("line {}: invalid age_months '{value}'", lineno + 1),
                            )
                        })?)
                    }
                    "site_index" => {
                        site_index = Some(value.trim().parse().map_err(|_| {
                            ThinlabError::parse(
                                file,
                                format!("line {}: invalid site_index '{value}'", lineno + 1),
                            )
                        })?)
                    }
                    other => {
                        return Err(ThinlabError::parse(
                            file,
                            format!("line {}: unknown front-matter key '{other}'", lineno + 1),
                        ))
                    }
                }
            }
            continue;
        }
        if !header_seen {
            let expected = "species,diameter_class_midpoint_mm,stems_per_ha,quality";
            if line != expected {
                return Err(ThinlabError::parse(
                    file,
                    format!("line {}: expected header '{expected}', got '{line}'", lineno + 1),
                ));
            }
            header_seen = true;
            let age = age_months.ok_or_else(|| {
                ThinlabError::parse(file, "front matter must define age_months".to_string())
            })?;
            let site = site_index.ok_or_else(|| {
                ThinlabError::parse(file, "front matter must define site_index".to_string())
            })?;
            stand = Some(Stand::new(grid.clone(), age, site));
            continue;
        }
        let stand = stand.as_mut().expect("header precedes rows");
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(ThinlabError::parse(
                file,
                format!("line {}: expected 4 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let species: Species = fields[0].parse().map_err(|_| {
            ThinlabError::parse(
                file,
                format!("line {}: unknown species '{}'", lineno + 1, fields[0]),
            )
        })?;
        let midpoint: f64 = fields[1].trim().parse().map_err(|_| {
            ThinlabError::parse(
                file,
                format!("line {}: invalid diameter midpoint '{}'", lineno + 1, fields[1]),
            )
        })?;
        let class = grid.class_of_midpoint(midpoint).ok_or_else(|| {
            ThinlabError::parse(
                file,
                format!(
                    "line {}: midpoint {midpoint} mm does not lie on the class grid",
                    lineno + 1
                ),
            )
        })?;
        let stems: f64 = fields[2].trim().parse().map_err(|_| {
            ThinlabError::parse(
                file,
                format!("line {}: invalid stems_per_ha '{}'", lineno + 1, fields[2]),
            )
        })?;
        let quality: f64 = fields[3].trim().parse().map_err(|_| {
            ThinlabError::parse(
                file,
                format!("line {}: invalid quality '{}'", lineno + 1, fields[3]),
            )
        })?;
        stand
            .set_cohort(species, class, stems, quality)
            .map_err(|e| ThinlabError::parse(file, format!("line {}: {e}", lineno + 1)))?;
    }

    stand.ok_or_else(|| ThinlabError::parse(file, "missing header row".to_string()))
}

pub fn read_stand(path: &Path, grid: &DiameterClassGrid) -> Result<Stand> {
    parse_stand(&read_to_string(path)?, &path.display().to_string(), grid)
}

/// Serialize a stand; one row per non-empty cohort.
pub fn stand_to_csv(stand: &Stand) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# age_months={}, site_index={}\n",
        stand.age_months, stand.site_index
    ));
    out.push_str("species,diameter_class_midpoint_mm,stems_per_ha,quality\n");
    for (species, cohorts) in stand.layers() {
        for (i, c) in cohorts.iter().enumerate() {
            if c.stems > 0.0 {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    species,
                    stand.grid().midpoint(i),
                    c.stems,
                    c.quality
                ));
            }
        }
    }
    out
}

pub fn write_stand(stand: &Stand, path: &Path) -> Result<()> {
    write_string(path, &stand_to_csv(stand))
}
