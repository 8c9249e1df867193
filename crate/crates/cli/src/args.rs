//! Command-line flags and the optional `key = value` config file.
//!
//! The config file is turned into synthetic `--key value` arguments placed
//! before the real ones, so any flag given on the command line wins.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use sdfreg_core::SignMode;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "sdfreg",
    version,
    about = "Non-rigid mesh registration by signed distance matching in an adaptive skinning subspace",
    args_override_self = true
)]
pub struct Args {
    /// Source mesh (OBJ) to deform.
    #[arg(long)]
    pub source: Option<PathBuf>,

    /// Target mesh (OBJ).
    #[arg(long)]
    pub target: Option<PathBuf>,

    /// Registered mesh output (OBJ).
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Quadrature grid resolution per axis.
    #[arg(long, value_name = "RX,RY,RZ", default_value = "32,32,32", value_parser = parse_grid)]
    pub grid: [usize; 3],

    /// Grid padding as a fraction of the longest joint bounding box edge.
    #[arg(long, value_name = "F", default_value_t = 0.05)]
    pub pad: f64,

    /// Maximum number of skinning modes.
    #[arg(long, value_name = "M", default_value_t = 30)]
    pub modes: usize,

    /// Stall threshold of the first stage, relative to the bounding box diagonal.
    #[arg(long, value_name = "F", default_value_t = 0.1)]
    pub stall_start: f64,

    /// Stall threshold of the last stage, relative to the bounding box diagonal.
    #[arg(long, value_name = "F", default_value_t = 0.001)]
    pub stall_end: f64,

    /// Dirichlet regularization weight.
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    pub reg_lambda: f64,

    /// Inside/outside rule for the target signed distance.
    #[arg(long, value_name = "MODE", default_value = "pseudonormal", value_parser = parse_sign)]
    pub sign: SignMode,

    /// Scale both meshes to unit joint bounding box diagonal while solving.
    #[arg(long)]
    pub normalize: bool,

    /// Write an OBJ snapshot every N iterations (0 disables).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub snapshot_every: usize,

    /// Directory for snapshots [default: directory of --output].
    #[arg(long, value_name = "DIR")]
    pub snapshot_dir: Option<PathBuf>,

    /// Per-iteration trace CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,

    /// Worker threads (0 uses all cores).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub threads: usize,

    /// Write the target signed distance samples as a raw volume (plus .hdr).
    #[arg(long, value_name = "PATH")]
    pub dump_sdf: Option<PathBuf>,

    /// Write the skinning weights as CSV.
    #[arg(long, value_name = "PATH")]
    pub dump_modes: Option<PathBuf>,

    /// Read defaults from a `key = value` file; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Run the built-in oracle checks and exit.
    #[arg(long)]
    pub selftest: bool,

    #[arg(long, hide = true)]
    pub selftest_corrupt_gradient: bool,
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected RX,RY,RZ, got {s:?}"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("bad grid resolution {p:?}"))?;
        if *o < 2 {
            return Err(format!("grid resolution must be >= 2, got {o}"));
        }
    }
    Ok(out)
}

fn parse_sign(s: &str) -> std::result::Result<SignMode, String> {
    s.parse()
}

/// Keys accepted by the config file that are plain switches.
const SWITCHES: [&str; 2] = ["normalize", "selftest"];

/// Converts config file text into `--key value` arguments.
pub fn config_to_args(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            bail!("config line {}: nested config files are not supported", i + 1);
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" | "1" | "yes" => out.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => bail!("config line {}: {key} expects true or false", i + 1),
            }
        } else {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}

/// Parses the command line, merging in `--config` when present.
pub fn parse_from(argv: Vec<OsString>) -> std::result::Result<Args, clap::Error> {
    let first = Args::try_parse_from(&argv)?;
    let Some(path) = &first.config else {
        return Ok(first);
    };
    let extra = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))
        .and_then(|text| config_to_args(&text))
        .map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e:#}\n")))?;
    let mut merged = Vec::with_capacity(argv.len() + extra.len());
    merged.push(argv.first().cloned().unwrap_or_else(|| "sdfreg".into()));
    merged.extend(extra);
    merged.extend(argv.into_iter().skip(1));
    Args::try_parse_from(merged)
}
