use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use eigenpath_cli::{emit, exit, run, CliError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "eigenpath", version, about = "Run eigenpath experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its tables and residual report.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; 0 lets the runtime decide.
        #[arg(long, env = "EIGENPATH_THREADS", default_value_t = 0)]
        threads: usize,
    },
}

fn execute(config: &Path, out: &Path, format: Format, threads: usize) -> Result<i32, CliError> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("global pool is built once");
    }
    let cfg = ExperimentConfig::load(config)?;
    let start = Instant::now();
    let bundle = run(&cfg)?;
    let files = emit(&bundle, format, out)?;
    eprintln!(
        "route {} finished in {:.3}s, wrote {} files to {}",
        bundle.metadata.route,
        start.elapsed().as_secs_f64(),
        files.len(),
        out.display()
    );
    for (name, r) in &bundle.residuals {
        let mark = if r.pass { "ok" } else { "FAIL" };
        eprintln!("  {mark:<4} {name} = {:.3e} (tol {:.1e})", r.value, r.tol);
    }
    Ok(if bundle.pass { exit::PASS } else { exit::RESIDUAL_FAILURE })
}

fn main() -> ExitCode {
    let Cli {
        command: Command::Run {
            config,
            out,
            format,
            threads,
        },
    } = Cli::parse();
    let code = execute(&config, &out, format, threads).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
