use std::path::PathBuf;
use std::process::ExitCode;

use chainrec::cli;
use chainrec::config::RunConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainrec", version, about = "Chain recurrence and Lyapunov pipelines on sampled systems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set epsilon.constant=0.05`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, set, jobs, out } = Args::parse().command;
    let result = RunConfig::load(&config, &set).and_then(|cfg| {
        println!("{}", cfg.echo());
        let out = cli::output_dir(&cfg, out);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(0))
            .build()
            .map_err(|e| chainrec::Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cli::run(&cfg, &out)).map(|o| (o, out))
    });
    match result {
        Ok((outcome, out)) => {
            for c in outcome.checks.iter().filter(|c| !c.passed) {
                eprintln!("{} {}: {} witness(es)", if c.hard { "FAIL" } else { "note" }, c.name, c.failures);
            }
            println!("wrote {} ({}), exit {}", out.display(), outcome.files.join(", "), outcome.exit);
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
