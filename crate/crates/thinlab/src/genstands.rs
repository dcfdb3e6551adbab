//! Deterministic synthesis of never-thinned, spruce-dominated fixture stands.
//!
//! Draws are seeded and sequential, so a given `(seed, template)` pair always
//! yields the same stand files, and the first `k` stands of a longer batch
//! match a shorter one. Stem counts are integers so that per-tree flat lists
//! can serve as brute-force oracles in tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ThinlabError};
use crate::grid::DiameterClassGrid;
use crate::species::Species;
use crate::stand::Stand;

pub const DEFAULT_TEMPLATE: &str = "young-spruce";

/// Weibull CDF used for the per-species diameter distributions.
fn weibull_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-(x / scale).powf(shape)).exp()
    }
}

fn fill_species_layer(
    stand: &mut Stand,
    species: Species,
    total_stems: f64,
    shape: f64,
    scale: f64,
) {
    let grid = stand.grid().clone();
    for i in 0..grid.class_count() {
        let mid = grid.midpoint(i);
        let lo = mid - grid.class_width() / 2.0;
        let hi = mid + grid.class_width() / 2.0;
        let mass = weibull_cdf(hi, shape, scale) - weibull_cdf(lo, shape, scale);
        let stems = (total_stems * mass).round();
        if stems > 0.0 {
            stand.set_cohort(species, i, stems, 1.0).expect("valid cohort");
        }
    }
}

/// Generate `count` fixture stands from a seed.
///
/// The `young-spruce` template draws a stand age of 30-45 years, total
/// density of 1400-2400 stems/ha, a spruce stem share of 62-85% and smaller
/// admixed birch and pine, with per-species Weibull diameter distributions
/// whose scales keep the spruce basal-area share above one half.
pub fn generate_stands(
    seed: u64,
    count: usize,
    template: &str,
    grid: &DiameterClassGrid,
) -> Result<Vec<Stand>> {
    if template != DEFAULT_TEMPLATE {
        return Err(ThinlabError::Config(format!(
            "unknown stand template '{template}' (available: {DEFAULT_TEMPLATE})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stands = Vec::with_capacity(count);
    for _ in 0..count {
        let age_months: u32 = rng.random_range(360..=540);
        let site_index = (rng.random_range(0.9..1.15_f64) * 100.0).round() / 100.0;
        let total_stems = rng.random_range(1400.0..2400.0_f64).round();
        let spruce_share = rng.random_range(0.62..0.85);
        let birch_share = rng.random_range(0.4..1.0) * (1.0 - spruce_share);
        let pine_share = 1.0 - spruce_share - birch_share;

        let spruce_shape = rng.random_range(1.9..2.7);
        let spruce_scale = rng.random_range(130.0..180.0);
        let birch_shape = rng.random_range(1.9..2.7);
        let birch_scale = rng.random_range(100.0..0.9 * spruce_scale);
        let pine_shape = rng.random_range(1.9..2.7);
        let pine_scale = rng.random_range(100.0..150.0);

        let mut stand = Stand::new(grid.clone(), age_months, site_index);
        fill_species_layer(
            &mut stand,
            Species::Spruce,
            total_stems * spruce_share,
            spruce_shape,
            spruce_scale,
        );
        fill_species_layer(
            &mut stand,
            Species::Birch,
            total_stems * birch_share,
            birch_shape,
            birch_scale,
        );
        if pine_share > 0.02 {
            fill_species_layer(
                &mut stand,
                Species::Pine,
                total_stems * pine_share,
                pine_shape,
                pine_scale,
            );
        }
        stands.push(stand);
    }
    Ok(stands)
}

/// Basal-area share of one species within a stand.
pub fn basal_area_share(stand: &Stand, species: Species) -> f64 {
    let total = stand.basal_area();
    if total <= 0.0 {
        return 0.0;
    }
    let mut own = 0.0;
    if let Some(cohorts) = stand.layer(species) {
        for (i, c) in cohorts.iter().enumerate() {
            let radius_m = stand.grid().midpoint(i) / 2000.0;
            own += c.stems * std::f64::consts::PI * radius_m * radius_m;
        }
    }
    own / total
}
