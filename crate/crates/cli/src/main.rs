use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnp_cli::commands::output_dir;
use dnp_cli::config::{parse_config_str, MALONIC_ACID};
use dnp_cli::{parse_config, run, CliError, Command, Invocation};

#[derive(Parser)]
#[command(name = "dnp", version, about = "Dynamic nuclear polarization simulations and pulse design")]
struct Cli {
    /// Run configuration (TOML). Defaults to the bundled malonic-acid profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Validate every relaxation channel and evolution step.
    ChannelCheck,
    /// Optimize on/off pulse sequences.
    Optimize,
    /// Saturation-train buildup curve.
    Buildup {
        /// `hard`, `optimized-open`, `optimized-closed` or a pulse file.
        #[arg(long)]
        pulse: Option<String>,
    },
    /// Transition-angle enhancement maps.
    AngleMap,
    /// Parameter sweep of asymptotic enhancements.
    Sweep,
    /// Enhancements with and without double-quantum relaxation.
    DqLeakage,
}

fn invocation(cli: Cli) -> Result<Invocation, CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path),
        None => parse_config_str(MALONIC_ACID, std::path::Path::new(".")),
    }
    .map_err(CliError::Config)?;
    let command = match cli.command {
        Sub::ChannelCheck => Command::ChannelCheck,
        Sub::Optimize => Command::Optimize,
        Sub::Buildup { pulse } => {
            if let Some(p) = pulse {
                config.buildup.pulse =
                    dnp_cli::config::PulseRef::parse(&p, std::path::Path::new(".")).map_err(|e| CliError::Config(vec![format!("--pulse: {e}")]))?;
            }
            Command::Buildup
        }
        Sub::AngleMap => Command::AngleMap,
        Sub::Sweep => Command::Sweep,
        Sub::DqLeakage => Command::DqLeakage,
    };
    Ok(Invocation {
        command,
        out: output_dir(cli.out.as_deref(), &config),
        seed: cli.seed.unwrap_or(config.seed),
        threads: cli.threads,
        config_path: cli.config,
        config,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = invocation(cli).and_then(|inv| {
        let written = run(&inv)?;
        for path in written {
            println!("{}", path.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{e}");
            if !matches!(e, CliError::Config(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
