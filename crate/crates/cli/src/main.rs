use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridrisk_cli::{
    cmd_da_assess, cmd_gen_fixtures, cmd_report, cmd_rt_assess, cmd_train, run_pipeline, Case,
    CliResult, RunConfig,
};

#[derive(Parser)]
#[command(name = "gridrisk", version, about = "Operational risk assessment with dispatch simulation and ML surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for simulation and training.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Risk case for rt-assess; all three when omitted.
    #[arg(long, global = true, value_enum)]
    case: Option<Case>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the desk system, base days and commitment schedule.
    GenFixtures,
    /// Day-ahead scenarios, oracle simulation and risk profile.
    DaAssess,
    /// Train and validate the three surrogate banks.
    Train,
    /// Short-term assessment in the stress windows, oracle against surrogates.
    RtAssess,
    /// Collect plot data and tables into report/.
    Report,
    /// All of the above in order.
    Pipeline,
    /// Print the effective configuration as JSON.
    ShowConfig,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(p) = cli.parallelism {
        config.parallelism = p.max(1);
    }
    config.validate()?;
    if let Command::ShowConfig = cli.command {
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&config).expect("config serializes"));
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| gridrisk_core::Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GenFixtures => cmd_gen_fixtures(&config),
        Command::DaAssess => cmd_da_assess(&config),
        Command::Train => {
            let m = cmd_train(&config)?;
            if let Some(kind) = m.selected {
                println!("selected model: {}", kind.id());
            }
            Ok(())
        }
        Command::RtAssess => {
            for m in cmd_rt_assess(&config, cli.case)? {
                let t = &m.timing;
                println!(
                    "{}: oracle {:.1} us/scenario, {} {:.2} us/scenario, speedup {:.1}x",
                    m.choice.case.name(),
                    t.oracle_us_per_scenario,
                    t.model.id(),
                    t.surrogate_us_per_scenario,
                    t.speedup
                );
            }
            Ok(())
        }
        Command::Report => {
            for p in cmd_report(&config)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Pipeline => run_pipeline(&config),
        Command::ShowConfig => unreachable!("handled before the pool starts"),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
