//! Command-line front end. Every run leaves a `.run.json` record holding the
//! arguments, the parsed configuration, the seed and the tool version, from
//! which `pvtiles replay` re-runs it.

mod args;
mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

pub use args::{Cli, Command, EXCHANGE_ENV};

/// Bad flag combinations found after parsing; exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub exit_code: i32,
}

/// Record location: `--record`, else beside the main output, else the
/// working directory.
pub fn record_path(cli: &Cli) -> PathBuf {
    if let Some(p) = &cli.record {
        return p.clone();
    }
    let name = cli.command.name();
    match cli.command.output() {
        Some(out) if matches!(cli.command, Command::Tile(_)) => out.join(format!("{name}.run.json")),
        Some(out) => {
            let mut s = out.clone().into_os_string();
            s.push(".run.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("{name}.run.json")),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let code = match commands::execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    };
    if !matches!(cli.command, Command::Replay(_)) {
        let rec = RunRecord {
            tool: "pvtiles".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: cli.command.name().into(),
            argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            cwd: std::env::current_dir().unwrap_or_default(),
            seed: cli.command.seed(),
            config: serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null),
            exit_code: code,
        };
        if let Err(e) = write_record(&record_path(&cli), &rec) {
            eprintln!("warning: could not write run record: {e}");
        }
    }
    code
}

fn write_record(path: &Path, rec: &RunRecord) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(rec).expect("record serializes");
    text.push('\n');
    std::fs::write(path, text)
}

pub fn read_record(path: &Path) -> anyhow::Result<RunRecord> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
