use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perfed_cli::run;
use perfed_cli::spec::{load_run_spec, Profile, RunSpec};
use perfed_cli::CliError;
use perfed_core::diagnostics::render_table;

#[derive(Parser)]
#[command(name = "perfed", version, about = "Personalized federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write the round log, model and summary.
    Train(Common),
    /// Check every computable bound and print a report table.
    Diagnose(Common),
    /// Split a dataset across users and report similarity measures.
    Partition(Common),
    /// Compare algorithms over several seeds.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Default-value profile.
    #[arg(long, value_parser = ["desk", "paper"])]
    profile: Option<String>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "PERFED_WORKERS")]
    workers: Option<usize>,
}

impl Common {
    fn spec(&self) -> Result<RunSpec, CliError> {
        let profile = self
            .profile
            .as_deref()
            .map(str::parse::<Profile>)
            .transpose()?;
        let mut spec = match &self.config {
            Some(p) => load_run_spec(p, profile)?,
            None => RunSpec::defaults(profile.unwrap_or_default()),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(d) = &self.out_dir {
            spec.output.dir = d.clone();
        }
        Ok(spec)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (Command::Train(c) | Command::Diagnose(c) | Command::Partition(c) | Command::Compare(c)) = &cli.command;
    if let Some(w) = c.workers {
        if w == 0 {
            return Err(CliError::Config("PERFED_WORKERS: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("PERFED_WORKERS: {e}")))?;
    }
    let spec = c.spec()?;
    let dir = spec.output.dir.clone();
    match cli.command {
        Command::Train(_) => print!("{}", run::render_train_summary(&run::train(&spec, &dir)?)),
        Command::Diagnose(_) => {
            let reports = run::diagnose(&spec, &dir)?;
            print!("{}", render_table(&run::condensed(&reports)));
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} of {} bounds hold", reports.len() - failed, reports.len());
        }
        Command::Partition(_) => {
            let s = run::partition(&spec, &dir)?;
            println!("users {}", s.users);
            for (i, (c, tv)) in s.counts.iter().zip(&s.similarity.tv).enumerate() {
                println!("user {i:>3}  tv {tv:.4}  counts {c:?}");
            }
            println!("gamma_G^2 {:.6e}  gamma_H^2 >= {:.6e}", s.similarity.gamma_g2, s.similarity.gamma_h2);
        }
        Command::Compare(_) => print!("{}", perfed_cli::output::render_summary(&run::compare(&spec, &dir)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perfed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
