use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use smelab::experiment::{self, ExperimentSpec};
use smelab::{Error, Result};

/// Run a configured or preset experiment and write CSV/JSON outputs plus a
/// manifest.
#[derive(Parser, Debug)]
#[command(name = "smelab", version)]
struct Cli {
    /// JSON experiment spec (a manifest.json from an earlier run also works).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset; see --list-presets.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads, 0 = automatic.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    list_presets: bool,
    /// Print the resolved spec and exit.
    #[arg(long)]
    dry_run: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match (&cli.config, &cli.preset) {
        (Some(path), None) => experiment::load_spec(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => experiment::preset(name)?,
        _ => return Err(Error::Config("pass exactly one of --config or --preset".into())),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out = Some(out.to_string_lossy().into_owned());
    }
    if let Some(m) = cli.replicas {
        spec.task.set_replicas(m);
    }
    spec.validate()?;
    Ok(spec)
}

fn main_inner(cli: Cli) -> Result<()> {
    if cli.list_presets {
        for name in experiment::preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let spec = resolve(&cli)?;
    if cli.dry_run {
        println!("{}", spec.to_json()?);
        return Ok(());
    }
    let (dir, manifest) = smelab::exec::with_threads(cli.threads, || experiment::run_to_dir(&spec))??;
    for a in &manifest.artifacts {
        println!("{}  {}", a.sha256, dir.join(&a.file).display());
    }
    eprintln!("{} finished in {:.2}s", spec.name, manifest.wall_clock_seconds);
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
