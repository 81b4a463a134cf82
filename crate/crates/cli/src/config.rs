//! Run configuration: a flat `key = value` file that command-line flags
//! override.
//!
//! Every key has a default mirroring the published experiments. Grid keys
//! (`order`, `gamma`, `mtl`, `length_mode`) take comma-separated lists.
//! `RunConfig::to_text` writes every key, so a resolved configuration can
//! be stored next to its outputs and replayed exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use vlmc_core::ingest::{FilterRules, LogFormat, SessionConfig, StatusRange};
use vlmc_core::{BuildParams, GammaMode, LengthMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    RawLog,
    Sessions,
}

impl FromStr for InputKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-log" => Ok(InputKind::RawLog),
            "sessions" => Ok(InputKind::Sessions),
            _ => bail!("input kind must be raw-log or sessions, got {s:?}"),
        }
    }
}

impl std::fmt::Display for InputKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputKind::RawLog => "raw-log",
            InputKind::Sessions => "sessions",
        })
    }
}

/// Number type used for model building and trail probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Exact,
    Float,
}

impl FromStr for Arithmetic {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Arithmetic::Exact),
            "float" => Ok(Arithmetic::Float),
            _ => bail!("arithmetic must be exact or float, got {s:?}"),
        }
    }
}

impl std::fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arithmetic::Exact => "exact",
            Arithmetic::Float => "float",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Vec<PathBuf>,
    pub input_kind: InputKind,
    pub log_format: String,
    pub delimiter: u8,
    pub gap_seconds: f64,
    pub max_session_len: usize,
    pub exclude_suffixes: Vec<String>,
    pub keep_suffixes: Vec<String>,
    pub exclude_status: Vec<StatusRange>,
    pub order: Vec<usize>,
    pub gamma: Vec<f64>,
    pub gamma_mode: GammaMode,
    pub num_visits: u64,
    pub lambda: f64,
    pub mtl: Vec<usize>,
    pub length_mode: Vec<LengthMode>,
    pub top_m: usize,
    pub folds: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub out_dir: PathBuf,
    /// Model file for `trails`; built from the input when absent.
    pub model: Option<PathBuf>,
    /// Explicit test sessions for `predict`, replacing the fold scheme.
    pub test_input: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rules = FilterRules::standard();
        RunConfig {
            input: Vec::new(),
            input_kind: InputKind::RawLog,
            log_format: LogFormat::default().roles(),
            delimiter: b',',
            gap_seconds: 1800.0,
            max_session_len: 15,
            exclude_suffixes: rules.exclude_suffixes,
            keep_suffixes: rules.keep_suffixes,
            exclude_status: rules.exclude_status,
            order: vec![1],
            gamma: vec![0.0],
            gamma_mode: GammaMode::Avg,
            num_visits: 30,
            lambda: 1e-4,
            mtl: vec![4],
            length_mode: vec![LengthMode::Strict],
            top_m: 250,
            folds: 4,
            shuffle: false,
            seed: 0,
            arithmetic: Arithmetic::Exact,
            out_dir: PathBuf::from("out"),
            model: None,
            test_input: Vec::new(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "input",
    "input_kind",
    "log_format",
    "delimiter",
    "gap_seconds",
    "max_session_len",
    "exclude_suffixes",
    "keep_suffixes",
    "exclude_status",
    "order",
    "gamma",
    "gamma_mode",
    "num_visits",
    "lambda",
    "mtl",
    "length_mode",
    "top_m",
    "folds",
    "shuffle",
    "seed",
    "arithmetic",
    "out_dir",
    "model",
    "test_input",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn paths(v: &str) -> Vec<PathBuf> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
}

fn join_paths(p: &[PathBuf]) -> String {
    join(&p.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn delimiter_name(d: u8) -> String {
    match d {
        b',' => "comma".into(),
        b'\t' => "tab".into(),
        b' ' => "space".into(),
        b';' => "semicolon".into(),
        other => (other as char).to_string(),
    }
}

fn parse_delimiter(v: &str) -> Result<u8> {
    Ok(match v {
        "comma" | "," => b',',
        "tab" | "\\t" => b'\t',
        "space" => b' ',
        "semicolon" | ";" => b';',
        s if s.len() == 1 && s.is_ascii() => s.as_bytes()[0],
        _ => bail!("delimiter must be a single ASCII character or comma/tab/space/semicolon, got {v:?}"),
    })
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "input" => self.input = paths(v),
            "test_input" => self.test_input = paths(v),
            "model" => self.model = (!v.is_empty()).then(|| PathBuf::from(v)),
            "input_kind" => self.input_kind = parse(key, v)?,
            "log_format" => self.log_format = v.to_string(),
            "delimiter" => self.delimiter = parse_delimiter(v)?,
            "gap_seconds" => self.gap_seconds = parse(key, v)?,
            "max_session_len" => self.max_session_len = parse(key, v)?,
            "exclude_suffixes" => self.exclude_suffixes = list(key, v)?,
            "keep_suffixes" => self.keep_suffixes = list(key, v)?,
            "exclude_status" => self.exclude_status = list(key, v)?,
            "order" => self.order = list(key, v)?,
            "gamma" => self.gamma = list(key, v)?,
            "gamma_mode" => self.gamma_mode = parse(key, v)?,
            "num_visits" => self.num_visits = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "mtl" => self.mtl = list(key, v)?,
            "length_mode" => self.length_mode = list(key, v)?,
            "top_m" => self.top_m = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "shuffle" => self.shuffle = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "arithmetic" => self.arithmetic = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "input" => join_paths(&self.input),
            "test_input" => join_paths(&self.test_input),
            "model" => self.model.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "input_kind" => self.input_kind.to_string(),
            "log_format" => self.log_format.clone(),
            "delimiter" => delimiter_name(self.delimiter),
            "gap_seconds" => self.gap_seconds.to_string(),
            "max_session_len" => self.max_session_len.to_string(),
            "exclude_suffixes" => join(&self.exclude_suffixes),
            "keep_suffixes" => join(&self.keep_suffixes),
            "exclude_status" => join(&self.exclude_status),
            "order" => join(&self.order),
            "gamma" => join(&self.gamma),
            "gamma_mode" => self.gamma_mode.to_string(),
            "num_visits" => self.num_visits.to_string(),
            "lambda" => self.lambda.to_string(),
            "mtl" => join(&self.mtl),
            "length_mode" => join(&self.length_mode),
            "top_m" => self.top_m.to_string(),
            "folds" => self.folds.to_string(),
            "shuffle" => self.shuffle.to_string(),
            "seed" => self.seed.to_string(),
            "arithmetic" => self.arithmetic.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment
    /// line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').with_context(|| format!("config line {}: expected key = value", n + 1))?;
            cfg.set(k.trim(), v).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("every key renders"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.order.is_empty() || self.order.contains(&0) {
            bail!("order must list one or more values of at least 1");
        }
        if self.gamma.is_empty() || self.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            bail!("gamma must list one or more values in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            bail!("lambda must lie in [0, 1]");
        }
        if self.mtl.is_empty() || self.mtl.contains(&0) {
            bail!("mtl must list one or more values of at least 1");
        }
        if self.length_mode.is_empty() {
            bail!("length_mode must list strict and/or nonstrict");
        }
        if self.top_m == 0 {
            bail!("top_m must be at least 1");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        if self.max_session_len == 0 {
            bail!("max_session_len must be at least 1");
        }
        if !(self.gap_seconds >= 0.0) {
            bail!("gap_seconds must be non-negative");
        }
        self.format()?;
        Ok(())
    }

    pub fn format(&self) -> Result<LogFormat> {
        Ok(LogFormat::from_roles(&self.log_format, self.delimiter)?)
    }

    pub fn filter_rules(&self) -> FilterRules {
        FilterRules {
            exclude_suffixes: self.exclude_suffixes.clone(),
            keep_suffixes: self.keep_suffixes.clone(),
            exclude_status: self.exclude_status.clone(),
        }
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig { gap_seconds: self.gap_seconds, max_session_len: self.max_session_len }
    }

    pub fn max_order(&self) -> usize {
        self.order.iter().copied().max().unwrap_or(1)
    }

    pub fn build_params(&self, order: usize, gamma: f64) -> BuildParams {
        BuildParams { target_order: order, gamma, gamma_mode: self.gamma_mode, num_visits: self.num_visits }
    }
}
