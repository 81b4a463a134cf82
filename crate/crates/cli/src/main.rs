//! `vlmc`: build variable-length Markov chain models of web navigation and
//! evaluate how well they summarise and predict sessions.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::Outputs;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "vlmc", version, about = "Navigation models from web logs: sessions, VLMCs, trails, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Parse, filter and sessionize the input; write sessions.txt, pages.tsv, summary.csv.
    Sessionize,
    /// Build models of orders 1..=order; write model.txt and state_counts.csv.
    Build,
    /// Extract the top-m trails for each mtl and length mode.
    Trails,
    /// Compare model trails with n-gram frequencies over the parameter grid.
    Summarize,
    /// Score next-page prediction over temporal folds.
    Predict,
    /// Run every stage into one output directory.
    Report,
}

/// Flags override the configuration file; lists are comma-separated.
#[derive(Args, Debug, Default)]
struct Flags {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input files (comma-separated)
    #[arg(long, global = true)]
    input: Option<String>,
    /// raw-log or sessions
    #[arg(long, global = true)]
    input_kind: Option<String>,
    /// Column roles, e.g. source,timestamp,url,status (use - to skip a column)
    #[arg(long, global = true)]
    log_format: Option<String>,
    /// comma, tab, space, semicolon or a single character
    #[arg(long, global = true)]
    delimiter: Option<String>,
    #[arg(long, global = true)]
    gap_seconds: Option<String>,
    #[arg(long, global = true)]
    max_session_len: Option<String>,
    /// Model orders (list); models are built up to the largest
    #[arg(long, global = true)]
    order: Option<String>,
    /// Accuracy thresholds (list)
    #[arg(long, global = true)]
    gamma: Option<String>,
    /// max or avg
    #[arg(long, global = true)]
    gamma_mode: Option<String>,
    /// Minimum page views before a page may be cloned
    #[arg(long, global = true)]
    num_visits: Option<String>,
    /// Trail probability cut-point
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// Maximum trail lengths (list)
    #[arg(long, global = true)]
    mtl: Option<String>,
    /// strict and/or nonstrict (list)
    #[arg(long, global = true)]
    length_mode: Option<String>,
    #[arg(long, global = true)]
    top_m: Option<String>,
    /// Number of temporal partitions
    #[arg(long, global = true)]
    folds: Option<String>,
    /// Shuffle sessions (seeded) instead of ordering them by time
    #[arg(long, global = true)]
    shuffle: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// exact or float
    #[arg(long, global = true)]
    arithmetic: Option<String>,
    /// Model file for `trails`
    #[arg(long, global = true)]
    model: Option<String>,
    /// Explicit test sessions for `predict`
    #[arg(long, global = true)]
    test_input: Option<String>,
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// Any configuration key, as key=value (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects key=value, got {kv:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        let named = [
            ("input", &self.input),
            ("input_kind", &self.input_kind),
            ("log_format", &self.log_format),
            ("delimiter", &self.delimiter),
            ("gap_seconds", &self.gap_seconds),
            ("max_session_len", &self.max_session_len),
            ("order", &self.order),
            ("gamma", &self.gamma),
            ("gamma_mode", &self.gamma_mode),
            ("num_visits", &self.num_visits),
            ("lambda", &self.lambda),
            ("mtl", &self.mtl),
            ("length_mode", &self.length_mode),
            ("top_m", &self.top_m),
            ("folds", &self.folds),
            ("shuffle", &self.shuffle),
            ("seed", &self.seed),
            ("arithmetic", &self.arithmetic),
            ("model", &self.model),
            ("test_input", &self.test_input),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.flags.resolve()?;
    let mut out = Outputs::default();
    let msg = match cli.command {
        Command::Sessionize => commands::sessionize_cmd(&cfg, &mut out)?,
        Command::Build => commands::build_cmd(&cfg, &mut out)?,
        Command::Trails => commands::trails_cmd(&cfg, &mut out)?,
        Command::Summarize => commands::summarize_cmd(&cfg, &mut out)?,
        Command::Predict => commands::predict_cmd(&cfg, &mut out)?,
        Command::Report => commands::report_cmd(&cfg, &mut out)?,
    };
    out.write(&cfg)?;
    Ok(msg)
}

/// Runs one invocation and returns `(exit status, stdout, stderr)`.
/// Failures produce a single diagnostic line.
fn invoke<I, T>(args: I) -> (u8, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        // --help and --version
        Err(e) if !e.use_stderr() => return (0, e.to_string(), String::new()),
        Err(e) => {
            let text = e.to_string();
            return (2, String::new(), format!("{}\n", text.lines().next().unwrap_or("invalid arguments")));
        }
    };
    match run(&cli) {
        Ok(msg) => (0, msg, String::new()),
        Err(e) => (1, String::new(), format!("error: {}\n", format!("{e:#}").replace('\n', " "))),
    }
}

fn main() -> ExitCode {
    let (code, out, err) = invoke(std::env::args_os());
    print!("{out}");
    eprint!("{err}");
    ExitCode::from(code)
}
