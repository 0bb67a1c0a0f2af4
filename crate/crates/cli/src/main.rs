use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nzgate::scenario::Scenario;
use nzgate::{Error, Result};
use nzgate_cli::goldens::{update_goldens, verify_goldens};
use nzgate_cli::{error_record, exit_code, parse_assignment, run, Command, Mask, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "nzgate", version, about = "Transmon-coupler-transmon CPhase simulator")]
struct Cli {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long, global = true, default_value = "device-2q")]
    scenario: String,
    /// Output directory (default: the scenario's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    svg: bool,
    /// Override a scenario parameter, e.g. `--set system.g_12=0.015`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Dressed levels against a swept parameter.
    Spectrum,
    /// Exchange and ZZ rates over g_12 and the coupler frequency.
    ZzMap,
    /// Coupler admixture of the computational states and the CZ coupling.
    OverlapScan,
    /// CZ exchange rate from spectral gaps and fitted oscillations.
    SwapScan,
    /// Conditional Ramsey angle accumulated while idling.
    ZzRamsey,
    /// Coupler leakage of the calibrated noiseless gate against pulse length.
    Leakage,
    /// Gate error with decoherence on selected elements.
    GateError {
        #[arg(long, value_enum, default_value_t)]
        mask: Mask,
    },
    /// Idle point, strong-pulse and weak-pulse calibration.
    Calibrate,
    /// Simulated reference and interleaved cross-entropy benchmarking.
    Xeb,
    /// Regenerate the golden artifacts and compare them with the committed copies.
    VerifyGoldens {
        #[arg(long, default_value = "crates/cli/goldens")]
        dir: PathBuf,
        /// Overwrite the goldens instead of comparing.
        #[arg(long)]
        update: bool,
    },
}

fn load(cli: &Cli) -> Result<Scenario> {
    let mut sc = Scenario::load(&cli.scenario)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
        sc.xeb.seed = seed;
    }
    for (path, v) in &cli.set {
        sc.set_path(path, *v)?;
    }
    sc.validate()?;
    Ok(sc)
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Scenario(format!("worker pool: {e}")))?;
    }
    let cmd = match &cli.command {
        Sub::Spectrum => Command::Spectrum,
        Sub::ZzMap => Command::ZzMap,
        Sub::OverlapScan => Command::OverlapScan,
        Sub::SwapScan => Command::SwapScan,
        Sub::ZzRamsey => Command::ZzRamsey,
        Sub::Leakage => Command::Leakage,
        Sub::GateError { mask } => Command::GateError(*mask),
        Sub::Calibrate => Command::Calibrate,
        Sub::Xeb => Command::Xeb,
        Sub::VerifyGoldens { dir, update: true } => {
            for f in update_goldens(dir)? {
                println!("updated {}", dir.join(f).display());
            }
            return Ok(());
        }
        Sub::VerifyGoldens { dir, update: false } => {
            let report = verify_goldens(dir, &cli.set)?;
            print!("{report}");
            report.into_result()?;
            return Ok(());
        }
    };
    let sc = load(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| sc.output_dir.clone());
    let art = run(cmd, &sc, &RunOptions { out, svg: cli.svg })?;
    for f in &art.files {
        println!("{}", f.display());
    }
    if cmd == Command::Calibrate {
        if let Some(t) = art.table("calibrate") {
            for row in &t.rows {
                let cells: Vec<String> = t.schema.columns.iter().zip(row).map(|(c, v)| format!("{c}={v}")).collect();
                println!("{}", cells.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
