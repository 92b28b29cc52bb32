use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmwave_assoc::harness::{
    compare, export_comparison, export_results, export_scaling, run_experiment, scaling_study, ExperimentResult,
    ExperimentSpec, ScaleAxis, ScalingSpec, Scheme,
};
use mmwave_assoc::mimo::UtilityKind;
use mmwave_assoc::topology::{CsiMode, InterferenceMode, Panel, Scenario};

#[derive(Parser)]
#[command(name = "mmassoc", version, about = "mmWave MIMO user association simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme over a number of slots.
    Run(RunArgs),
    /// Run several schemes on the same channel realizations.
    Compare(CompareArgs),
    /// Iteration and runtime scaling study.
    Scale(ScaleArgs),
    /// Check a scenario file and report every violated invariant.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file. The built-in 3 BS / 12 UE layout when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Utility::SumRate)]
    utility: Utility,
    /// Defaults to the scenario setting.
    #[arg(long, value_enum)]
    csi: Option<Csi>,
    /// Defaults to full for the baselines, the scenario setting otherwise.
    #[arg(long, value_enum)]
    interference: Option<Interference>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for result files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "wcs")]
    scheme: Scheme,
    /// Defaults to the scenario's `slots`.
    #[arg(long)]
    slots: Option<usize>,
    /// Largest J^K the exhaustive search may enumerate.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated list of schemes.
    #[arg(long, value_delimiter = ',', default_value = "wcs,max-sinr-drop,max-sinr-share-drop")]
    scheme: Vec<Scheme>,
    /// Defaults to the scenario's `slots`.
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "wcs")]
    scheme: Scheme,
    #[arg(long, value_enum, default_value_t = Axis::UeCount)]
    axis: Axis,
    /// UE counts, or panels such as 4x4, separated by commas.
    #[arg(long, value_delimiter = ',', default_value = "6,12,18,24")]
    sizes: Vec<String>,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Utility {
    SumRate,
    MinRate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Csi {
    Instantaneous,
    LargeScaleOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interference {
    AssociationDependent,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    UeCount,
    BsPanel,
    UePanel,
}

impl From<Utility> for UtilityKind {
    fn from(u: Utility) -> Self {
        match u {
            Utility::SumRate => UtilityKind::SumRate,
            Utility::MinRate => UtilityKind::MinRate,
        }
    }
}

impl From<Csi> for CsiMode {
    fn from(c: Csi) -> Self {
        match c {
            Csi::Instantaneous => CsiMode::Instantaneous,
            Csi::LargeScaleOnly => CsiMode::LargeScaleOnly,
        }
    }
}

impl From<Interference> for InterferenceMode {
    fn from(i: Interference) -> Self {
        match i {
            Interference::AssociationDependent => InterferenceMode::AssociationDependent,
            Interference::Full => InterferenceMode::Full,
        }
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    let scenario = match path {
        Some(p) => Scenario::load(p)?,
        None => Scenario::paper_default(),
    };
    scenario.ensure_valid()?;
    Ok(scenario)
}

fn experiment(scenario: &Scenario, common: &Common, scheme: Scheme, slots: Option<usize>, budget: Option<u64>) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(scenario, scheme, common.seed)
        .with_slots(slots.unwrap_or(scenario.slots))
        .with_utility(common.utility.into());
    if let Some(csi) = common.csi {
        spec = spec.with_csi(csi.into());
    }
    if let Some(mode) = common.interference {
        spec = spec.with_interference(mode.into());
    }
    if let Some(b) = budget {
        spec.exhaustive_budget = b;
    }
    spec.scenario = common.scenario.clone();
    spec.out = common.out.clone();
    spec
}

fn summary_line(r: &ExperimentResult) -> String {
    let iters = r
        .mean_iterations()
        .map_or_else(|| "-".to_string(), |m| format!("{m:.1}"));
    format!(
        "{:<48} se {:>8.3}  min-rate {:>7.3}  dropped {:>4}  iterations {:>6}",
        r.spec.label(),
        r.mean_spectral_efficiency,
        r.mean_min_rate,
        r.dropped,
        iters
    )
}

fn parse_panel(s: &str) -> Result<Panel> {
    let (u, v) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("panel '{s}' is not of the form UxV"))?;
    let side = |x: &str| x.trim().parse::<usize>().map_err(|e| anyhow::anyhow!("panel '{s}': {e}"));
    let panel = Panel::new(side(u)?, side(v)?);
    if panel.elements() == 0 {
        bail!("panel '{s}' has no elements");
    }
    Ok(panel)
}

fn parse_axis(axis: Axis, sizes: &[String]) -> Result<ScaleAxis> {
    Ok(match axis {
        Axis::UeCount => ScaleAxis::UeCount(
            sizes
                .iter()
                .map(|s| s.trim().parse().map_err(|e| anyhow::anyhow!("UE count '{s}': {e}")))
                .collect::<Result<_>>()?,
        ),
        Axis::BsPanel => ScaleAxis::BsPanel(sizes.iter().map(|s| parse_panel(s)).collect::<Result<_>>()?),
        Axis::UePanel => ScaleAxis::UePanel(sizes.iter().map(|s| parse_panel(s)).collect::<Result<_>>()?),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            let diags = s.validate();
            if !diags.is_empty() {
                for d in &diags {
                    eprintln!("  {d}");
                }
                bail!("{}: {} problem(s)", scenario.display(), diags.len());
            }
            println!("{}: ok ({} BS, {} UE)", scenario.display(), s.num_bs(), s.num_ue());
        }
        Command::Run(args) => {
            let scenario = load_scenario(args.common.scenario.as_deref())?;
            let spec = experiment(&scenario, &args.common, args.scheme, args.slots, args.budget);
            let result = run_experiment(&scenario, &spec)?;
            println!("{}", summary_line(&result));
            if let Some(out) = &args.common.out {
                export_results(&result, out)?;
            }
        }
        Command::Compare(args) => {
            if args.scheme.is_empty() {
                bail!("no schemes given");
            }
            let scenario = load_scenario(args.common.scenario.as_deref())?;
            let specs: Vec<_> = args
                .scheme
                .iter()
                .map(|&s| experiment(&scenario, &args.common, s, args.slots, args.budget))
                .collect();
            let results = compare(&scenario, &specs)?;
            for r in &results {
                println!("{}", summary_line(r));
            }
            if let Some(out) = &args.common.out {
                export_comparison(&results, out)?;
            }
        }
        Command::Scale(args) => {
            let scenario = load_scenario(args.common.scenario.as_deref())?;
            let mut spec = ScalingSpec::new(parse_axis(args.axis, &args.sizes)?, args.repetitions, args.common.seed);
            spec.scheme = args.scheme;
            spec.utility = args.common.utility.into();
            if let Some(csi) = args.common.csi {
                spec.csi_mode = csi.into();
            }
            spec.interference_mode = args.common.interference.map(Into::into);
            let study = scaling_study(&scenario, &spec)?;
            for row in &study.rows {
                println!(
                    "{:<12} iterations {:>8.1} [{}, {}]  time {:>10.6} s  se {:>8.3}",
                    row.label,
                    row.mean_iterations,
                    row.min_iterations,
                    row.max_iterations,
                    row.mean_wall_time,
                    row.mean_spectral_efficiency
                );
            }
            if let Some(fit) = &study.iteration_fit {
                println!("iterations linear fit R^2 {:.4}", fit.r_squared);
            }
            if let Some(fit) = &study.runtime_fit {
                println!("runtime fit R^2 {:.4}", fit.r_squared);
            }
            if let Some(note) = &study.note {
                println!("note: {note}");
            }
            if let Some(out) = &args.common.out {
                export_scaling(&study, out)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
