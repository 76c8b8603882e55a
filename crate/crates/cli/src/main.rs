mod commands;
mod config;
mod emit;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Context;
use config::{overlay, Cli, Command, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hubbard_core::Error),
    Io(String),
    /// Named checks that did not pass.
    Failed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_invariant_failure() => 2,
            CliError::Failed(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) if e.is_invariant_failure() => write!(f, "invariant failure: {e}"),
            CliError::Core(e) => write!(f, "error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Failed(names) => write!(f, "checks failed: {}", names.join(", ")),
        }
    }
}

impl From<hubbard_core::Error> for CliError {
    fn from(e: hubbard_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let env = std::env::var("HUBBARD_LAB_THREADS").ok();
    let threads = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(
            v.parse()
                .map_err(|_| CliError::Usage(format!("HUBBARD_LAB_THREADS must be a positive integer, got `{v}`")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        // A pool already built (e.g. by an earlier call in-process) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let global = overlay(&cli.global, &file.global)?;
    init_threads(global.threads)?;
    let ctx = Context::new(&global)?;
    let emission = match &cli.command {
        Command::Scatter(a) => commands::scatter(&ctx, &overlay(a, &file.scatter)?)?,
        Command::Free(a) => commands::free(&ctx, &overlay(a, &file.free)?)?,
        Command::Lemmas(a) => commands::lemmas(&ctx, &overlay(a, &file.lemmas)?)?,
        Command::Trial(a) => commands::trial(&ctx, &overlay(a, &file.trial)?)?,
        Command::Ed(a) => commands::ed(&ctx, &overlay(a, &file.ed)?)?,
        Command::Var(a) => commands::var(&ctx, &overlay(a, &file.var)?)?,
        Command::Bound(a) => commands::bound(&ctx, &overlay(a, &file.bound)?)?,
        Command::VerifyAll(a) => {
            let report = commands::verify_all(&ctx, &overlay(a, &file.verify_all)?)?;
            write_out(ctx.output.as_deref(), &commands::render_verify(&report).body)?;
            let failures = report.failures();
            return if failures.is_empty() { Ok(()) } else { Err(CliError::Failed(failures)) };
        }
    };
    write_out(ctx.output.as_deref(), &emission.body)?;
    for (path, text) in &emission.side_files {
        write_out(Some(path), text)?;
    }
    Ok(())
}

fn run(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
