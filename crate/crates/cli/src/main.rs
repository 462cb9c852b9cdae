use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nelson_core::harness::{load_preset_reports, run_pipeline, run_presets, verify_suite, Report, Stage};
use nelson_core::scenario::{parse_scenario, preset, preset_names, Scenario};

#[derive(Parser)]
#[command(name = "nelson", version, about = "Controlled coherent and squeezed wave-packet scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state and shape function.
    Ground(RunArgs),
    /// Classical centre trajectory.
    Classical(RunArgs),
    /// Dispersion envelope (squeezed scenarios).
    Envelope(RunArgs),
    /// Packet family and control potential.
    Synth(RunArgs),
    /// Full pipeline with the Schrödinger run only.
    Propagate(RunArgs),
    /// Full pipeline with the Nelson ensemble forced on.
    Nelson(RunArgs),
    /// Full pipeline as configured.
    Run(RunArgs),
    /// Run (or collect) the preset suite and print the check table.
    Verify(VerifyArgs),
    /// List bundled presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for CSVs and the report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides nelson.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Collect existing `<DIR>/<preset>/report.json` files instead of running.
    #[arg(long, conflicts_with_all = ["out", "preset"])]
    reports: Option<PathBuf>,
    /// Output directory; each preset writes into its own subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict the run to these presets.
    #[arg(long)]
    preset: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
}

fn init_threads(n: Option<usize>) -> Result<(), String> {
    match n {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string()),
        None => Ok(()),
    }
}

fn load(args: &RunArgs) -> Result<Scenario, String> {
    let mut s = match (&args.config, &args.preset) {
        (Some(path), _) => parse_scenario(path).map_err(|e| e.to_string())?,
        (None, Some(name)) => preset(name).map_err(|e| e.to_string())?,
        (None, None) => return Err("one of --config or --preset is required".into()),
    };
    if let Some(seed) = args.seed {
        s.nelson.seed = seed;
    }
    Ok(s)
}

fn print_report(r: &Report, out: Option<&Path>) {
    println!("scenario {} (stage {:?})", r.name, r.stage);
    let sm = &r.summary;
    if let (Some(e), Some(s0)) = (sm.ground_energy, sm.sigma0) {
        println!("  ground energy {e:.12}  sigma0 {s0:.10}  K2 {:.10}", sm.k2.unwrap_or(f64::NAN));
    }
    if let (Some(lo), Some(hi)) = (sm.sigma_min, sm.sigma_max) {
        println!("  envelope sigma in [{lo:.6}, {hi:.6}]");
    }
    if let Some(n) = sm.steps {
        println!("  {n} steps, {} samples", sm.samples.unwrap_or(0));
    }
    if !r.checks.is_empty() {
        print!("{}", verify_suite(&[(r.name.clone(), Some(r.clone()))]).table);
    }
    if let Some(d) = out {
        println!("  outputs in {}", d.display());
    }
}

fn run_stage(args: &RunArgs, stage: Stage, nelson: Option<bool>) -> ExitCode {
    let result = init_threads(args.threads).and_then(|_| load(args)).and_then(|mut s| {
        if let Some(on) = nelson {
            s.nelson.enabled = on;
        }
        run_pipeline(&s, args.out.as_deref(), stage).map_err(|e| e.to_string())
    });
    match result {
        Ok(a) => {
            print_report(&a.report, args.out.as_deref());
            if a.report.nominal {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn verify(args: &VerifyArgs) -> ExitCode {
    if let Err(e) = init_threads(args.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let results = match &args.reports {
        Some(dir) => load_preset_reports(dir),
        None => {
            let all = preset_names();
            let names: Vec<&str> = if args.preset.is_empty() { all } else { args.preset.iter().map(String::as_str).collect() };
            run_presets(args.out.as_deref(), &names)
                .into_iter()
                .map(|(name, report, err)| {
                    if let Some(e) = err {
                        eprintln!("{name}: {e}");
                    }
                    (name, report)
                })
                .collect()
        }
    };
    let outcome = verify_suite(&results);
    print!("{}", outcome.table);
    if let Some(d) = &args.out {
        if let Err(e) = std::fs::write(d.join("suite.txt"), &outcome.table) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ground(a) => run_stage(a, Stage::Ground, None),
        Command::Classical(a) => run_stage(a, Stage::Classical, None),
        Command::Envelope(a) => run_stage(a, Stage::Envelope, None),
        Command::Synth(a) => run_stage(a, Stage::Synth, None),
        Command::Propagate(a) => run_stage(a, Stage::Full, Some(false)),
        Command::Nelson(a) => run_stage(a, Stage::Full, Some(true)),
        Command::Run(a) => run_stage(a, Stage::Full, None),
        Command::Verify(a) => verify(a),
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Presets { name: Some(n) } => match nelson_core::scenario::preset_source(n) {
            Some(src) => {
                print!("{src}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset {n:?}");
                ExitCode::from(2)
            }
        },
    }
}
