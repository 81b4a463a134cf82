//! The pipeline stages behind each subcommand.
//!
//! Every command reads its inputs, computes in memory and then writes its
//! outputs under `out_dir`, together with the resolved `config.txt`, so a
//! run can be replayed byte for byte.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vlmc_core::eval::{evaluate_predictions, shuffled_folds, summarisation_eval, temporal_folds};
use vlmc_core::ingest::{
    filter_requests, parse_log, read_sessions, sessionize, write_sessions, PageTable, Session, SessionSummary,
};
use vlmc_core::trails::{extract_trails, top_m_trails, write_trails_csv, TrailQuery};
use vlmc_core::{build_vlmc_orders, Exact, ModelGraph, Scalar};

use crate::config::{Arithmetic, InputKind, RunConfig};

/// Sessions loaded from the configured inputs.
pub struct Dataset {
    pub sessions: Vec<Session>,
    pub table: PageTable,
    pub skipped_lines: usize,
}

fn load(cfg: &RunConfig, paths: &[PathBuf], table: &mut PageTable) -> Result<(Vec<Session>, usize)> {
    if paths.is_empty() {
        bail!("no input given (set input or pass --input)");
    }
    match cfg.input_kind {
        InputKind::RawLog => {
            let format = cfg.format()?;
            let mut records = Vec::new();
            let mut skipped = 0;
            for p in paths {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                let parsed =
                    parse_log(BufReader::new(f), &format).with_context(|| format!("parsing {}", p.display()))?;
                records.extend(parsed.records);
                skipped += parsed.skipped;
            }
            let records = filter_requests(records, &cfg.filter_rules());
            Ok((sessionize(&records, table, &cfg.session_config()), skipped))
        }
        InputKind::Sessions => {
            let mut sessions = Vec::new();
            for p in paths {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                let mut part =
                    read_sessions(BufReader::new(f), table).with_context(|| format!("reading {}", p.display()))?;
                let cap = cfg.max_session_len;
                if part.iter().any(|s| s.len() > cap) {
                    part = part.into_iter().flat_map(|s| s.split(cap)).collect();
                }
                sessions.extend(part);
            }
            Ok((sessions, 0))
        }
    }
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let mut table = PageTable::new();
    let (sessions, skipped_lines) = load(cfg, &cfg.input, &mut table)?;
    Ok(Dataset { sessions, table, skipped_lines })
}

/// Output files produced by one command, written only once everything is
/// computed.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn write(&self, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
        let dir = &cfg.out_dir;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files.iter().chain([&("config.txt".to_string(), cfg.to_text().into_bytes())]) {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn summary_csv(s: &SessionSummary) -> String {
    format!(
        "pages,requests,sessions,len1,len2,len3\n{},{},{},{},{},{}\n",
        s.pages, s.requests, s.sessions, s.len1, s.len2, s.len3
    )
}

pub fn sessionize_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let data = load_dataset(cfg)?;
    let mut sessions = Vec::new();
    write_sessions(&mut sessions, &data.sessions)?;
    let mut pages = Vec::new();
    data.table.write(&mut pages)?;
    let summary = summary_csv(&SessionSummary::of(&data.sessions));
    out.add("sessions.txt", sessions);
    out.add("pages.tsv", pages);
    out.add("summary.csv", summary.clone().into_bytes());
    let mut msg = summary;
    if data.skipped_lines > 0 {
        let _ = writeln!(msg, "skipped {} malformed log lines", data.skipped_lines);
    }
    Ok(msg)
}

fn state_counts_csv(models: &[ModelGraph]) -> String {
    let mut s = String::from("order,states\n");
    for m in models {
        let _ = writeln!(s, "{},{}", m.order(), m.state_count());
    }
    s
}

fn build_orders(cfg: &RunConfig, sessions: &[Session], gamma: f64) -> Result<Vec<ModelGraph>> {
    let params = cfg.build_params(cfg.max_order(), gamma);
    Ok(match cfg.arithmetic {
        Arithmetic::Exact => build_vlmc_orders::<Exact>(sessions, params)?,
        Arithmetic::Float => build_vlmc_orders::<f64>(sessions, params)?,
    })
}

/// Models of orders `1..=max(order)` at the first configured gamma; writes
/// the highest-order model and the state count of every order.
pub fn build_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let data = load_dataset(cfg)?;
    let models = build_orders(cfg, &data.sessions, cfg.gamma[0])?;
    let top = models.last().expect("at least order 1");
    let counts = state_counts_csv(&models);
    out.add("model.txt", top.to_text().into_bytes());
    out.add("state_counts.csv", counts.clone().into_bytes());
    Ok(counts)
}

fn trail_file(mtl: usize, mode: impl std::fmt::Display) -> String {
    format!("trails_mtl{mtl}_{mode}.csv")
}

fn trails_with<T: Scalar>(cfg: &RunConfig, model: &ModelGraph, out: &mut Outputs) -> Result<String> {
    let mut msg = String::new();
    for &mtl in &cfg.mtl {
        for &length_mode in &cfg.length_mode {
            let q = TrailQuery { lambda: cfg.lambda, mtl, length_mode, m: cfg.top_m };
            let found = extract_trails::<T>(model, &q)?;
            let total = found.len();
            let list = top_m_trails(found, cfg.top_m);
            let mut buf = Vec::new();
            write_trails_csv(&list, &mut buf)?;
            let name = trail_file(mtl, length_mode);
            let _ = writeln!(msg, "{name}: {} of {total} trails", list.len());
            out.add(name, buf);
        }
    }
    Ok(msg)
}

fn trail_model(cfg: &RunConfig) -> Result<ModelGraph> {
    match &cfg.model {
        Some(p) => read_model(p),
        None => {
            let data = load_dataset(cfg)?;
            Ok(build_orders(cfg, &data.sessions, cfg.gamma[0])?.pop().expect("at least order 1"))
        }
    }
}

pub fn read_model(path: &Path) -> Result<ModelGraph> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ModelGraph::read(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Top-m trails for every configured `mtl` and length mode.
pub fn trails_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let model = trail_model(cfg)?;
    match cfg.arithmetic {
        Arithmetic::Exact => trails_with::<Exact>(cfg, &model, out),
        Arithmetic::Float => trails_with::<f64>(cfg, &model, out),
    }
}

fn summarize_with<T: Scalar>(cfg: &RunConfig, sessions: &[Session]) -> Result<String> {
    let mut csv = String::from("order,gamma,mode,mtl,length_mode,m,footrule,overlap\n");
    for &gamma in &cfg.gamma {
        let models = build_orders(cfg, sessions, gamma)?;
        for &order in &cfg.order {
            let model = &models[order - 1];
            for &mtl in &cfg.mtl {
                for &length_mode in &cfg.length_mode {
                    let q = TrailQuery { lambda: cfg.lambda, mtl, length_mode, m: cfg.top_m };
                    let c = summarisation_eval::<T>(model, sessions, mtl, &q)
                        .with_context(|| format!("order {order}, gamma {gamma}, mtl {mtl}, {length_mode}"))?;
                    let _ = writeln!(
                        csv,
                        "{order},{gamma},{},{mtl},{length_mode},{},{:.4},{:.4}",
                        cfg.gamma_mode,
                        cfg.top_m,
                        c.footrule.to_f64(),
                        c.overlap.to_f64()
                    );
                }
            }
        }
    }
    Ok(csv)
}

/// Footrule and overlap of model trails against n-gram frequencies over the
/// grid order × gamma × mtl × length mode.
pub fn summarize_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let data = load_dataset(cfg)?;
    let csv = match cfg.arithmetic {
        Arithmetic::Exact => summarize_with::<Exact>(cfg, &data.sessions)?,
        Arithmetic::Float => summarize_with::<f64>(cfg, &data.sessions)?,
    };
    out.add("summarize.csv", csv.clone().into_bytes());
    Ok(csv)
}

fn predict_rows<T: Scalar>(cfg: &RunConfig, folds: &[(usize, Vec<Session>, Vec<Session>)]) -> Result<String> {
    let mut csv = String::from("fold,order,gamma,states,MAE,st_MAE,scored,skipped,fallbacks\n");
    for (fold, train, test) in folds {
        for &gamma in &cfg.gamma {
            let params = cfg.build_params(cfg.max_order(), gamma);
            for model in build_vlmc_orders::<T>(train, params)? {
                let (r, _) = evaluate_predictions::<T>(&model, test)
                    .with_context(|| format!("fold {fold}, order {}", model.order()))?;
                let _ = writeln!(
                    csv,
                    "{fold},{},{gamma},{},{:.4},{:.4},{},{},{}",
                    r.order, r.states, r.mae, r.st_mae, r.scored, r.skipped, r.fallbacks
                );
            }
        }
    }
    Ok(csv)
}

/// Next-page prediction over temporal folds (or a seeded shuffle), or over
/// an explicit test set when `test_input` is given.
pub fn predict_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let mut data = load_dataset(cfg)?;
    let folds: Vec<(usize, Vec<Session>, Vec<Session>)> = if cfg.test_input.is_empty() {
        let parts = if cfg.shuffle {
            shuffled_folds(&data.sessions, cfg.folds, cfg.seed)?
        } else {
            temporal_folds(&data.sessions, cfg.folds)?
        };
        parts.plans().into_iter().map(|plan| (plan.train_upto, parts.train(plan), parts.test(plan).to_vec())).collect()
    } else {
        let (test, _) = load(cfg, &cfg.test_input, &mut data.table)?;
        vec![(1, data.sessions, test)]
    };
    let csv = match cfg.arithmetic {
        Arithmetic::Exact => predict_rows::<Exact>(cfg, &folds)?,
        Arithmetic::Float => predict_rows::<f64>(cfg, &folds)?,
    };
    out.add("predict.csv", csv.clone().into_bytes());
    Ok(csv)
}

/// Every stage in sequence into one output directory.
pub fn report_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let mut msg = sessionize_cmd(cfg, out)?;
    msg.push_str(&build_cmd(cfg, out)?);
    msg.push_str(&trails_cmd(&RunConfig { model: None, ..cfg.clone() }, out)?);
    msg.push_str(&summarize_cmd(cfg, out)?);
    msg.push_str(&predict_cmd(cfg, out)?);
    Ok(msg)
}
