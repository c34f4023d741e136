use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracsym::{configure_threads, run, CliError, Experiment, ExperimentConfig, Result};

/// Run one named experiment and write its outputs and manifest to DIR.
#[derive(Parser, Debug)]
#[command(name = "fracsym", version = fracsym::VERSION)]
#[command(override_usage = "fracsym <EXPERIMENT> [--config FILE] [--key value ...] --out DIR")]
#[command(after_help = "Experiments: rearrange, apply-op, solve-elliptic, elliptic-symmetrize, elliptic-counterexample, \
evolve, parabolic-symmetrize, fpme-counterexample, barenblatt, oracle-check.\n\
Overrides take the form `--key value` or `key=value`. FRACSYM_THREADS caps worker threads.\n\
Exit codes: 0 all checks passed, 1 error, 2 a check failed.")]
struct Cli {
    experiment: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    rest: Vec<String>,
}

/// Splits trailing arguments into overrides, pulling out `--config`/`--out`.
fn split_overrides(cli: &mut Cli) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = std::mem::take(&mut cli.rest).into_iter();
    while let Some(arg) = it.next() {
        let (key, value) = if let Some(flag) = arg.strip_prefix("--") {
            match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| CliError::Usage(format!("missing value for --{flag}")))?;
                    (flag.to_string(), v)
                }
            }
        } else if let Some((k, v)) = arg.split_once('=') {
            (k.to_string(), v.to_string())
        } else {
            return Err(CliError::Usage(format!("unexpected argument `{arg}`; use --key value")));
        };
        match key.as_str() {
            "out" => cli.out = Some(PathBuf::from(value)),
            "config" => cli.config = Some(PathBuf::from(value)),
            _ => pairs.push((key, value)),
        }
    }
    Ok(pairs)
}

fn main_inner() -> Result<i32> {
    let mut cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(0);
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let overrides = split_overrides(&mut cli)?;
    let experiment: Experiment = cli.experiment.parse()?;
    let out = cli.out.clone().ok_or_else(|| CliError::Usage("--out DIR is required".into()))?;
    let file = cli.config.as_ref().map(std::fs::read_to_string).transpose()?;
    let config = ExperimentConfig::resolve(experiment, file.as_deref(), &overrides)?;
    configure_threads()?;
    let manifest = run(&config, &out)?;
    for c in &manifest.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("manifest: {}", out.join(fracsym::MANIFEST_FILE).display());
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
