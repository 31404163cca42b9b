use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mpdo_lab::{parse_config_file, run, CliError, Command};

#[derive(Parser)]
#[command(name = "mpdo-lab", version, about = "Numerical experiments for multilinear pseudo-differential operators")]
struct Args {
    command: Command,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match go(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn go(args: &Args) -> Result<(), CliError> {
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
    }
    let cfg = parse_config_file(&args.config)?.materialize(Some(args.command), args.seed)?;
    let rec = run(&cfg, &args.out)?;
    println!("{}: wrote {} ({:.3} s)", rec.command, args.out.join("result.json").display(), rec.wall_time_s);
    Ok(())
}
