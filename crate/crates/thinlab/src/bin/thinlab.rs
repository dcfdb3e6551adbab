//! Command-line front end: stand generation, simulation, optimization,
//! regime comparison and figure-level reporting.
//!
//! Exit codes: 0 success, 2 malformed input, 3 infeasible request,
//! 4 missing upstream run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thinlab::economics::Regime;
use thinlab::error::{Result, ThinlabError};
use thinlab::genstands::{generate_stands, DEFAULT_TEMPLATE};
use thinlab::grid::DiameterClassGrid;
use thinlab::io::{load_kernel, load_market, load_schedule, read_stand, write_stand};
use thinlab::manifest::RunManifest;
use thinlab::optimizer::{compare_regimes, optimize, simulate_best, SearchConfig};
use thinlab::report::{write_figure_datasets, write_optimizer_outputs, write_simulation_outputs};
use thinlab::simulate_rotation;

#[derive(Parser)]
#[command(
    name = "thinlab",
    version,
    about = "Boreal stand development: thinning schedules and capital return rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate deterministic fixture stands.
    Genstands(GenstandsArgs),
    /// Simulate one rotation of a given schedule.
    Simulate(SimulateArgs),
    /// Search for the schedule maximizing the expected return rate.
    Optimize(OptimizeArgs),
    /// Optimize under all three regimes and report effect sizes.
    Compare(CompareArgs),
    /// Assemble figure datasets from a completed compare run.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenstandsArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    count: usize,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    stand: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    market: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    schedule: PathBuf,
    /// Management regime: none, quality or quality-growth.
    #[arg(long, default_value = "none")]
    mode: Regime,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 4)]
    min_rotation_steps: usize,
    #[arg(long, default_value_t = 12)]
    max_rotation_steps: usize,
    #[arg(long, default_value_t = 2)]
    max_thinnings: usize,
    #[arg(long, default_value_t = 0.1)]
    retention_step: f64,
    #[arg(long, default_value_t = 0.85)]
    strip_road_survival: f64,
    #[arg(long, default_value_t = 0.5)]
    quality_half_width: f64,
    /// Force exhaustive retention enumeration regardless of size.
    #[arg(long, hide = true, default_value_t = false)]
    exhaustive: bool,
}

impl SearchArgs {
    fn to_config(&self, regime: Regime) -> SearchConfig {
        let mut config = SearchConfig::new(regime);
        config.rotation_steps_min = self.min_rotation_steps;
        config.rotation_steps_max = self.max_rotation_steps;
        config.max_thinnings = self.max_thinnings;
        config.retention_step = self.retention_step;
        config.strip_road_survival = self.strip_road_survival;
        config.quality_half_width = self.quality_half_width;
        if self.exhaustive {
            config.exhaustive_threshold = u128::MAX;
        }
        config
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long, default_value = "none")]
    mode: Regime,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a completed `thinlab compare` run.
    #[arg(long)]
    runs: PathBuf,
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    out: PathBuf,
}

struct LoadedInputs {
    stand: thinlab::Stand,
    kernel: thinlab::GrowthKernel,
    market: thinlab::MarketModel,
}

fn load_inputs(args: &InputArgs, manifest: &mut RunManifest) -> Result<LoadedInputs> {
    manifest.add_input("stand", &args.stand)?;
    manifest.add_input("kernel", &args.kernel)?;
    manifest.add_input("market", &args.market)?;
    Ok(LoadedInputs {
        stand: read_stand(&args.stand, &DiameterClassGrid::default())?,
        kernel: load_kernel(&args.kernel)?,
        market: load_market(&args.market)?,
    })
}

fn cmd_genstands(args: &GenstandsArgs) -> Result<()> {
    let grid = DiameterClassGrid::default();
    let stands = generate_stands(args.seed, args.count, &args.template, &grid)?;
    let mut manifest = RunManifest::new("genstands");
    manifest.seed = Some(args.seed);
    manifest.save(&args.out)?;
    for (i, stand) in stands.iter().enumerate() {
        write_stand(stand, &args.out.join(format!("stand_{:02}.csv", i + 1)))?;
    }
    println!("wrote {} stands to {}", stands.len(), args.out.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest.mode = Some(args.mode.name().to_string());
    let inputs = load_inputs(&args.inputs, &mut manifest)?;
    manifest.add_input("schedule", &args.schedule)?;
    let schedule = load_schedule(&args.schedule)?;
    let sim = simulate_rotation(&inputs.stand, &schedule, &inputs.kernel, &inputs.market, args.mode)?;
    manifest.save(&args.out)?;
    write_simulation_outputs(&args.out, &manifest, &sim)?;
    let r = thinlab::expected_return_rate(&sim.trace)?;
    println!(
        "simulated {} steps, expected return rate {:.6}/yr, outputs in {}",
        schedule.rotation_steps,
        r,
        args.out.display()
    );
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let mut manifest = RunManifest::new("optimize");
    manifest.mode = Some(args.mode.name().to_string());
    let inputs = load_inputs(&args.inputs, &mut manifest)?;
    let config = args.search.to_config(args.mode);
    manifest.search = Some(config.clone());
    let result = optimize(&inputs.stand, &inputs.kernel, &inputs.market, &config)?;
    manifest.save(&args.out)?;
    write_optimizer_outputs(&args.out, &manifest, &result)?;
    let sim = simulate_best(&inputs.stand, &inputs.kernel, &inputs.market, &result)?;
    write_simulation_outputs(&args.out, &manifest, &sim)?;
    println!(
        "best r = {:.6}/yr at rotation {} steps ({} thinnings), {} evaluations",
        result.best_r,
        result.best_schedule.rotation_steps,
        result.best_schedule.events.len(),
        result.evaluations
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut manifest = RunManifest::new("compare");
    let inputs = load_inputs(&args.inputs, &mut manifest)?;
    let config = args.search.to_config(Regime::None);
    manifest.search = Some(config.clone());
    let comparison = compare_regimes(&inputs.stand, &inputs.kernel, &inputs.market, &config)?;
    manifest.save(&args.out)?;

    for result in [&comparison.none, &comparison.quality, &comparison.quality_growth] {
        let dir = args.out.join(result.regime.name());
        write_optimizer_outputs(&dir, &manifest, result)?;
        let sim = simulate_best(&inputs.stand, &inputs.kernel, &inputs.market, result)?;
        write_simulation_outputs(&dir, &manifest, &sim)?;
    }

    let mut value = serde_json::to_value(&comparison).expect("comparison serialization");
    value["manifest"] = serde_json::Value::String(manifest.digest());
    thinlab::io::write_string(
        &args.out.join("comparison.json"),
        &serde_json::to_string_pretty(&value).expect("json"),
    )?;

    println!(
        "r(none) = {:.6}, r(quality) = {:.6} (delta {:+.2e}), r(quality-growth) = {:.6} (delta {:+.2e})",
        comparison.none.best_r,
        comparison.quality.best_r,
        comparison.delta_quality,
        comparison.quality_growth.best_r,
        comparison.delta_quality_growth,
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut manifest = RunManifest::new("report");
    let inputs = load_inputs(&args.inputs, &mut manifest)?;
    let comparison_file = args.runs.join("comparison.json");
    if !comparison_file.exists() {
        return Err(ThinlabError::Missing(format!(
            "{} does not contain a completed compare run",
            args.runs.display()
        )));
    }
    manifest.add_input("comparison", &comparison_file)?;
    manifest.save(&args.out)?;
    write_figure_datasets(
        &args.out,
        &manifest,
        &args.runs,
        &inputs.stand,
        &inputs.kernel,
        &inputs.market,
    )?;
    println!("figure datasets written to {}", args.out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Genstands(args) => cmd_genstands(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
