//! `rfchain` command-line front end.
//!
//! Exit status: 0 success, 1 invalid configuration, 2 simulation or output
//! failure, 3 a self-test criterion failed, 64 usage error.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfchain::config::{parse_override, ScenarioConfig};
use rfchain::Error;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_SIMULATION: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "RFCHAIN_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "rfchain",
    version,
    about = "Energy and data chain models for RF-powered sensor nodes",
    after_help = "Any config key can also be overridden as --section.key VALUE, e.g. --dcdc.inductance 100e-6.\n\
                  Exit status: 0 ok, 1 invalid config, 2 simulation error, 3 self-test failure, 64 usage."
)]
struct Cli {
    /// Scenario file (TOML). Built-in defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; takes precedence over RFCHAIN_OUT and the config.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rectifier efficiency and output voltage over input power x load.
    HarvestSweep,
    /// DC-DC efficiency against the reference data set.
    DcdcEff,
    /// Closed-loop MPPT run on the harvester model.
    MpptRun,
    /// LNA noise figure over the interface impedance grid.
    LnaSweep,
    /// UWB pulse waveform, PSD and emission mask verdict.
    UwbPulse {
        /// Mask file; overrides `uwb.mask`.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Received PSD for every link geometry.
    LinkPsd,
    /// Level-crossing encode of the test signal and its backscatter burst.
    LcadcEncode,
    /// Run the acceptance suite.
    Selftest,
}

/// Pulls `--a.b VALUE` and `--a.b=VALUE` pairs out of the argument list so
/// clap only sees the fixed flags.
fn split_dotted(args: Vec<OsString>) -> (Vec<OsString>, Vec<(String, String)>, Option<String>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg
            .to_str()
            .and_then(|s| s.strip_prefix("--"))
            .map(str::to_owned)
        else {
            rest.push(arg);
            continue;
        };
        let key = flag.split('=').next().unwrap_or_default();
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        match flag.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => match it.next().and_then(|v| v.into_string().ok()) {
                Some(v) => overrides.push((flag, v)),
                None => return (rest, overrides, Some(format!("missing value for --{flag}"))),
            },
        }
    }
    (rest, overrides, None)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_VALIDATION,
        _ => EXIT_SIMULATION,
    }
}

fn main() -> ExitCode {
    let (args, mut overrides, usage) = split_dotted(std::env::args_os().collect());
    if let Some(msg) = usage {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    for o in &cli.overrides {
        match parse_override(o) {
            Ok(kv) => overrides.push(kv),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    let loaded = match &cli.config {
        Some(path) => ScenarioConfig::load(path, &overrides),
        None => ScenarioConfig::defaults_with(&overrides),
    };
    let mut cfg = match loaded {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if let Some(dir) = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
    {
        cfg.output.dir = dir;
    }
    let result = match &cli.command {
        Command::HarvestSweep => commands::harvest_sweep(&cfg),
        Command::DcdcEff => commands::dcdc_eff(&cfg),
        Command::MpptRun => commands::mppt_run(&cfg),
        Command::LnaSweep => commands::lna_sweep(&cfg),
        Command::UwbPulse { mask } => commands::uwb_pulse(&cfg, mask.as_deref()),
        Command::LinkPsd => commands::link_psd(&cfg),
        Command::LcadcEncode => commands::lcadc_encode(&cfg),
        Command::Selftest => commands::selftest(&cfg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn dotted_flags_become_overrides() {
        let (rest, ov, err) = split_dotted(os(&[
            "rfchain",
            "--dcdc.inductance",
            "1e-4",
            "dcdc-eff",
            "--uwb.prf=2e6",
        ]));
        assert!(err.is_none());
        assert_eq!(rest, os(&["rfchain", "dcdc-eff"]));
        assert_eq!(
            ov,
            vec![
                ("dcdc.inductance".to_string(), "1e-4".to_string()),
                ("uwb.prf".to_string(), "2e6".to_string())
            ]
        );
    }

    #[test]
    fn plain_flags_pass_through() {
        let (rest, ov, _) = split_dotted(os(&[
            "rfchain",
            "--config",
            "a.toml",
            "--out=x.d",
            "selftest",
        ]));
        assert_eq!(
            rest,
            os(&["rfchain", "--config", "a.toml", "--out=x.d", "selftest"])
        );
        assert!(ov.is_empty());
    }

    #[test]
    fn dangling_dotted_flag_is_usage_error() {
        let (_, _, err) = split_dotted(os(&["rfchain", "selftest", "--dcdc.inductance"]));
        assert!(err.is_some());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
