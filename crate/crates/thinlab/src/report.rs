//! Output writers: per-run CSV/JSON artifacts and the figure-level datasets
//! assembled from completed runs.

use std::path::Path;

use crate::economics::{Regime, RotationSimulation, TrajectoryPoint};
use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::growth::GrowthKernel;
use crate::io::{read_stand, read_to_string, write_string};
use crate::manifest::RunManifest;
use crate::market::{relative_value_increment_profile, HarvestKind, MarketModel};
use crate::optimizer::OptimResult;
use crate::species::Species;
use crate::stand::Stand;

/// Write `trajectory.csv`, `trace.csv` and `terminal_stand.csv` for one
/// simulated rotation.
pub fn write_simulation_outputs(
    dir: &Path,
    manifest: &RunManifest,
    sim: &RotationSimulation,
) -> Result<()> {
    let mut trajectory = String::from("step,age_months,ba_weighted_diameter_mm,standing_volume_m3,K_eur_ha\n");
    for p in &sim.trajectory {
        trajectory.push_str(&format!(
            "{},{},{},{},{}\n",
            p.step, p.age_months, p.ba_weighted_diameter_mm, p.standing_volume_m3, p.capitalization
        ));
    }
    write_string(&dir.join("trajectory.csv"), &manifest.stamp_csv(&trajectory))?;

    let mut trace = String::from("step,age_months,K_eur_ha,dkappa_eur_ha,event\n");
    let age0 = sim
        .trace
        .steps
        .first()
        .map(|s| s.age_end_months - crate::stand::STEP_MONTHS)
        .unwrap_or(0);
    trace.push_str(&format!("0,{},{},0,\n", age0, sim.trace.k_initial));
    for s in &sim.trace.steps {
        trace.push_str(&format!(
            "{},{},{},{},{}\n",
            s.index + 1,
            s.age_end_months,
            s.k_end_post,
            s.dkappa,
            s.event
        ));
    }
    write_string(&dir.join("trace.csv"), &manifest.stamp_csv(&trace))?;

    write_string(
        &dir.join("terminal_stand.csv"),
        &crate::io::stand_to_csv(&sim.terminal_stand),
    )
}

/// Write `optim_result.json`, `best_schedule.json` and `evaluation_log.csv`.
pub fn write_optimizer_outputs(
    dir: &Path,
    manifest: &RunManifest,
    result: &OptimResult,
) -> Result<()> {
    let mut value = serde_json::to_value(result).expect("result serialization");
    value["manifest"] = serde_json::Value::String(manifest.digest());
    write_string(
        &dir.join("optim_result.json"),
        &serde_json::to_string_pretty(&value).expect("json"),
    )?;

    let mut schedule = serde_json::to_value(&result.best_schedule).expect("schedule serialization");
    schedule["manifest"] = serde_json::Value::String(manifest.digest());
    write_string(
        &dir.join("best_schedule.json"),
        &serde_json::to_string_pretty(&schedule).expect("json"),
    )?;

    let mut log = String::from("schedule_hash,rotation_steps,r_expected\n");
    for entry in &result.log {
        log.push_str(&format!(
            "{},{},{}\n",
            entry.schedule_hash, entry.rotation_steps, entry.r_expected
        ));
    }
    write_string(&dir.join("evaluation_log.csv"), &manifest.stamp_csv(&log))
}

/// Parse a trajectory CSV written by [`write_simulation_outputs`].
pub fn parse_trajectory_csv(text: &str, file: &str) -> Result<Vec<TrajectoryPoint>> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("step,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(ThinlabError::parse(
                file,
                format!("line {}: expected 5 fields", lineno + 1),
            ));
        }
        let parse_f = |s: &str, name: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                ThinlabError::parse(file, format!("line {}: invalid {name} '{s}'", lineno + 1))
            })
        };
        points.push(TrajectoryPoint {
            step: fields[0].parse().map_err(|_| {
                ThinlabError::parse(file, format!("line {}: invalid step", lineno + 1))
            })?,
            age_months: fields[1].parse().map_err(|_| {
                ThinlabError::parse(file, format!("line {}: invalid age", lineno + 1))
            })?,
            ba_weighted_diameter_mm: parse_f(fields[2], "diameter")?,
            standing_volume_m3: parse_f(fields[3], "volume")?,
            capitalization: parse_f(fields[4], "capitalization")?,
        });
    }
    Ok(points)
}

fn regime_dir(runs_dir: &Path, regime: Regime) -> std::path::PathBuf {
    runs_dir.join(regime.name())
}

fn load_regime_result(runs_dir: &Path, regime: Regime) -> Result<OptimResult> {
    let path = regime_dir(runs_dir, regime).join("optim_result.json");
    if !path.exists() {
        return Err(ThinlabError::Missing(format!(
            "no completed '{regime}' optimization under {} (run `thinlab compare` first)",
            runs_dir.display()
        )));
    }
    let text = read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| ThinlabError::parse(path.display().to_string(), e.to_string()))
}

fn load_regime_trajectory(runs_dir: &Path, regime: Regime) -> Result<Vec<TrajectoryPoint>> {
    let path = regime_dir(runs_dir, regime).join("trajectory.csv");
    if !path.exists() {
        return Err(ThinlabError::Missing(format!(
            "no trajectory for regime '{regime}' under {}",
            runs_dir.display()
        )));
    }
    parse_trajectory_csv(&read_to_string(&path)?, &path.display().to_string())
}

fn load_regime_terminal_stand(
    runs_dir: &Path,
    regime: Regime,
    grid: &DiameterClassGrid,
) -> Result<Stand> {
    let path = regime_dir(runs_dir, regime).join("terminal_stand.csv");
    if !path.exists() {
        return Err(ThinlabError::Missing(format!(
            "no terminal stand for regime '{regime}' under {}",
            runs_dir.display()
        )));
    }
    read_stand(&path, grid)
}

/// Assemble the figure datasets from a completed `compare` run.
pub fn write_figure_datasets(
    out_dir: &Path,
    manifest: &RunManifest,
    runs_dir: &Path,
    stand0: &Stand,
    kernel: &GrowthKernel,
    market: &MarketModel,
) -> Result<()> {
    // f1: best return rate per rotation length and regime
    let mut f1 = String::from("regime,rotation_steps,rotation_age_months,r_expected\n");
    // f3: mean capitalization of the same candidates
    let mut f3 = String::from("regime,rotation_steps,rotation_age_months,mean_capitalization_eur_ha\n");
    for regime in Regime::ALL {
        let result = load_regime_result(runs_dir, regime)?;
        for row in &result.per_rotation {
            f1.push_str(&format!(
                "{},{},{},{}\n",
                regime, row.rotation_steps, row.rotation_age_months, row.r_expected
            ));
            f3.push_str(&format!(
                "{},{},{},{}\n",
                regime, row.rotation_steps, row.rotation_age_months, row.mean_capitalization
            ));
        }
    }
    write_string(&out_dir.join("f1_return_vs_rotation.csv"), &manifest.stamp_csv(&f1))?;
    write_string(&out_dir.join("f3_capitalization_vs_rotation.csv"), &manifest.stamp_csv(&f3))?;

    // f2: diameter development of the best schedule per regime
    // f4: terminal diameter against terminal commercial volume
    let mut f2 = String::from("regime,step,age_months,ba_weighted_diameter_mm\n");
    let mut f4 = String::from("regime,terminal_volume_m3_ha,terminal_ba_diameter_mm\n");
    for regime in Regime::ALL {
        let trajectory = load_regime_trajectory(runs_dir, regime)?;
        for p in &trajectory {
            f2.push_str(&format!(
                "{},{},{},{}\n",
                regime, p.step, p.age_months, p.ba_weighted_diameter_mm
            ));
        }
        if let Some(last) = trajectory.last() {
            f4.push_str(&format!(
                "{},{},{}\n",
                regime, last.standing_volume_m3, last.ba_weighted_diameter_mm
            ));
        }
    }
    write_string(&out_dir.join("f2_diameter_trajectory.csv"), &manifest.stamp_csv(&f2))?;
    write_string(&out_dir.join("f4_diameter_vs_volume.csv"), &manifest.stamp_csv(&f4))?;

    // f5: quality multipliers by class just before clearcut
    let mut f5 = String::from("regime,species,midpoint_mm,quality\n");
    for regime in Regime::ALL {
        let terminal = load_regime_terminal_stand(runs_dir, regime, stand0.grid())?;
        for (species, cohorts) in terminal.layers() {
            for (i, c) in cohorts.iter().enumerate() {
                if c.stems > 0.0 {
                    f5.push_str(&format!(
                        "{},{},{},{}\n",
                        regime,
                        species,
                        terminal.grid().midpoint(i),
                        c.quality
                    ));
                }
            }
        }
    }
    write_string(&out_dir.join("f5_terminal_quality_by_class.csv"), &manifest.stamp_csv(&f5))?;

    // f7: relative value increment profiles, at observation and before clearcut
    let mut f7 = String::from("variant,regime,species,midpoint_mm,rate_per_yr\n");
    let initial = relative_value_increment_profile(market, kernel, stand0, false, false)?;
    for (species, points) in &initial {
        for p in points {
            f7.push_str(&format!(
                "initial,none,{},{},{}\n",
                species, p.midpoint_mm, p.rate_per_year
            ));
        }
    }
    for regime in Regime::ALL {
        let terminal = load_regime_terminal_stand(runs_dir, regime, stand0.grid())?;
        let profile = relative_value_increment_profile(
            market,
            kernel,
            &terminal,
            regime.growth_coupling(),
            true,
        )?;
        for (species, points) in &profile {
            for p in points {
                f7.push_str(&format!(
                    "preclearcut,{},{},{},{}\n",
                    regime, species, p.midpoint_mm, p.rate_per_year
                ));
            }
        }
    }
    write_string(&out_dir.join("f7_value_increment_profile.csv"), &manifest.stamp_csv(&f7))?;

    // f12: harvester time consumption per volume across trunk sizes
    let f12 = harvest_time_dataset(market)?;
    write_string(&out_dir.join("f12_harvest_time_curve.csv"), &manifest.stamp_csv(&f12))
}

/// Harvester time-per-volume table over a log-spaced trunk volume grid, one
/// curve per species and operation.
pub fn harvest_time_dataset(market: &MarketModel) -> Result<String> {
    let mut f12 = String::from("species,operation,volume_m3,time_min_per_m3\n");
    let points = 24usize;
    for species in Species::ALL {
        for (kind, name) in [(HarvestKind::Thinning, "thinning"), (HarvestKind::Clearcut, "clearcut")]
        {
            for i in 0..points {
                let v = 0.02 * (2.0f64 / 0.02).powf(i as f64 / (points as f64 - 1.0));
                let t = market.harvest_time_per_m3(species, kind, v)?;
                f12.push_str(&format!("{species},{name},{v},{t}\n"));
            }
        }
    }
    Ok(f12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_csv_round_trips() {
        let manifest = RunManifest::new("test");
        let text = manifest.stamp_csv(
            "step,age_months,ba_weighted_diameter_mm,standing_volume_m3,K_eur_ha\n0,360,151.25,112.5,950.125\n1,390,158.75,130.25,1100.5\n",
        );
        let points = parse_trajectory_csv(&text, "trajectory.csv").unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].age_months, 390);
        assert_eq!(points[0].ba_weighted_diameter_mm, 151.25);
    }

    #[test]
    fn missing_runs_yield_missing_dependency() {
        let tmp = tempfile::tempdir().unwrap();
        let err = load_regime_result(tmp.path(), Regime::None).unwrap_err();
        assert!(matches!(err, ThinlabError::Missing(_)));
        assert_eq!(err.exit_code(), 4);
    }
}
