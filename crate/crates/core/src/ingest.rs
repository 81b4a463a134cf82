//! Request-log parsing, noise filtering and session reconstruction.
//!
//! A raw log becomes a list of [`Session`]s in three steps: [`parse_log`]
//! turns delimited lines into [`LogRecord`]s, [`filter_requests`] drops
//! images and failed requests, and [`sessionize`] groups the survivors per
//! visitor, cuts on inactivity gaps and caps session length.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::token::PageId;

/// One parsed request line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    /// Visitor identity: an IP address or a cookie/session id.
    pub source_key: String,
    /// Seconds since the epoch.
    pub timestamp: f64,
    /// Normalized request path.
    pub url: String,
    pub status: Option<u16>,
}

/// Column layout of a delimited request log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogFormat {
    pub delimiter: u8,
    pub source: usize,
    pub timestamp: usize,
    pub url: usize,
    pub status: Option<usize>,
}

impl Default for LogFormat {
    /// `source,timestamp,url,status` separated by commas.
    fn default() -> Self {
        LogFormat { delimiter: b',', source: 0, timestamp: 1, url: 2, status: Some(3) }
    }
}

impl LogFormat {
    /// Builds a format from a comma-separated list of column roles in column
    /// order, e.g. `"source,-,timestamp,url,status"`. `-` marks an ignored
    /// column. `source`, `timestamp` and `url` are required.
    pub fn from_roles(roles: &str, delimiter: u8) -> Result<Self> {
        let mut source = None;
        let mut timestamp = None;
        let mut url = None;
        let mut status = None;
        for (col, role) in roles.split(',').map(str::trim).enumerate() {
            let slot = match role {
                "source" => &mut source,
                "timestamp" => &mut timestamp,
                "url" => &mut url,
                "status" => &mut status,
                "-" | "" => continue,
                other => return Err(Error::Config(format!("unknown column role {other:?}"))),
            };
            if slot.replace(col).is_some() {
                return Err(Error::Config(format!("column role {role:?} given twice")));
            }
        }
        let missing = |name: &str| Error::Config(format!("log format is missing the {name} column"));
        Ok(LogFormat {
            delimiter,
            source: source.ok_or_else(|| missing("source"))?,
            timestamp: timestamp.ok_or_else(|| missing("timestamp"))?,
            url: url.ok_or_else(|| missing("url"))?,
            status,
        })
    }

    /// Inverse of [`LogFormat::from_roles`] (without the delimiter).
    pub fn roles(&self) -> String {
        let width = [Some(self.source), Some(self.timestamp), Some(self.url), self.status]
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0)
            + 1;
        let mut cols = vec!["-"; width];
        cols[self.source] = "source";
        cols[self.timestamp] = "timestamp";
        cols[self.url] = "url";
        if let Some(s) = self.status {
            cols[s] = "status";
        }
        cols.join(",")
    }
}

/// Records read from a log plus the number of malformed lines dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<LogRecord>,
    pub skipped: usize,
}

/// Parses a delimited request log.
///
/// Lines with a missing column, an unparsable or negative timestamp, or an
/// empty url are skipped and counted. Read failures are fatal.
pub fn parse_log<R: Read>(reader: R, format: &LogFormat) -> Result<ParsedLog> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).delimiter(format.delimiter).from_reader(reader);
    let mut out = ParsedLog::default();
    let mut row = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => match record_from_row(&row, format) {
                Some(rec) => out.records.push(rec),
                None => out.skipped += 1,
            },
            Err(e) => match e.into_kind() {
                csv::ErrorKind::Io(io) => return Err(Error::Io(io)),
                _ => out.skipped += 1,
            },
        }
    }
    Ok(out)
}

fn record_from_row(row: &csv::ByteRecord, format: &LogFormat) -> Option<LogRecord> {
    let field = |i: usize| row.get(i).map(|b| String::from_utf8_lossy(b).trim().to_string());
    let source_key = field(format.source)?;
    if source_key.is_empty() {
        return None;
    }
    let timestamp: f64 = field(format.timestamp)?.parse().ok()?;
    if !timestamp.is_finite() || timestamp < 0.0 {
        return None;
    }
    let url = normalize_url(&field(format.url)?)?;
    let status = format.status.and_then(|i| field(i)).and_then(|s| s.parse::<u16>().ok());
    Some(LogRecord { source_key, timestamp, url, status })
}

/// Strips the query string, fragment and trailing slashes. The root path
/// stays `/`. Returns `None` for an empty path.
pub fn normalize_url(raw: &str) -> Option<String> {
    let path = raw.trim();
    let path = path.split(['?', '#']).next().unwrap_or("");
    if path.is_empty() {
        return None;
    }
    let trimmed = path.trim_end_matches('/');
    if trimmed.is_empty() {
        return Some("/".to_string());
    }
    Some(trimmed.to_string())
}

/// Inclusive range of HTTP status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatusRange {
    pub lo: u16,
    pub hi: u16,
}

impl StatusRange {
    pub fn contains(&self, status: u16) -> bool {
        (self.lo..=self.hi).contains(&status)
    }
}

impl FromStr for StatusRange {
    type Err = Error;

    /// Accepts `404`, `4xx`, `>=400` and `400-499`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad status rule {s:?}"));
        let num = |t: &str| t.trim().parse::<u16>().map_err(|_| bad());
        let s = s.trim();
        if let Some(rest) = s.strip_prefix(">=") {
            return Ok(StatusRange { lo: num(rest)?, hi: u16::MAX });
        }
        if let Some(class) = s.strip_suffix("xx") {
            let c = num(class)?;
            if !(1..=9).contains(&c) {
                return Err(bad());
            }
            return Ok(StatusRange { lo: c * 100, hi: c * 100 + 99 });
        }
        if let Some((a, b)) = s.split_once('-') {
            let (lo, hi) = (num(a)?, num(b)?);
            if lo > hi {
                return Err(bad());
            }
            return Ok(StatusRange { lo, hi });
        }
        let v = num(s)?;
        Ok(StatusRange { lo: v, hi: v })
    }
}

impl fmt::Display for StatusRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi == u16::MAX {
            write!(f, ">={}", self.lo)
        } else if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

/// Request exclusion rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterRules {
    /// Url suffixes to drop (case-insensitive), e.g. `.gif`.
    pub exclude_suffixes: Vec<String>,
    /// Suffixes kept even if an exclusion matches, e.g. `.jpg` for a site
    /// whose pages are images.
    pub keep_suffixes: Vec<String>,
    pub exclude_status: Vec<StatusRange>,
}

impl FilterRules {
    /// Image requests and every status of 400 or above.
    pub fn standard() -> Self {
        FilterRules {
            exclude_suffixes: [".gif", ".jpg", ".jpeg", ".png", ".bmp", ".ico"].into_iter().map(String::from).collect(),
            keep_suffixes: Vec::new(),
            exclude_status: vec![StatusRange { lo: 400, hi: u16::MAX }],
        }
    }

    pub fn keeps(&self, record: &LogRecord) -> bool {
        if let Some(status) = record.status {
            if self.exclude_status.iter().any(|r| r.contains(status)) {
                return false;
            }
        }
        let url = record.url.to_ascii_lowercase();
        let ends = |s: &String| url.ends_with(&s.to_ascii_lowercase());
        !self.exclude_suffixes.iter().any(ends) || self.keep_suffixes.iter().any(ends)
    }
}

/// Drops records that violate any rule, preserving order.
pub fn filter_requests(records: Vec<LogRecord>, rules: &FilterRules) -> Vec<LogRecord> {
    records.into_iter().filter(|r| rules.keeps(r)).collect()
}

/// Bidirectional url ↔ [`PageId`] mapping. Ids are dense and start at
/// [`PageId::FIRST`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageTable {
    by_url: HashMap<String, PageId>,
    urls: Vec<String>,
}

impl PageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, url: &str) -> PageId {
        if let Some(&id) = self.by_url.get(url) {
            return id;
        }
        let id = PageId::new(PageId::FIRST + self.urls.len() as u32).expect("ids start past reserved range");
        self.urls.push(url.to_string());
        self.by_url.insert(url.to_string(), id);
        id
    }

    pub fn id(&self, url: &str) -> Option<PageId> {
        self.by_url.get(url).copied()
    }

    pub fn url(&self, id: PageId) -> Option<&str> {
        let idx = id.get().checked_sub(PageId::FIRST)? as usize;
        self.urls.get(idx).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    /// `(id, url)` pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (PageId, &str)> {
        self.urls
            .iter()
            .enumerate()
            .map(|(i, u)| (PageId::new(PageId::FIRST + i as u32).expect("valid id"), u.as_str()))
    }

    /// Writes `id<TAB>url` lines.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (id, url) in self.iter() {
            writeln!(w, "{id}\t{url}")?;
        }
        Ok(())
    }
}

/// A navigation session: the pages one visitor requested during one visit.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pages: Vec<PageId>,
    first_timestamp: f64,
}

impl Session {
    pub fn new(pages: Vec<PageId>, first_timestamp: f64) -> Result<Self> {
        if pages.is_empty() {
            return Err(Error::Contract("a session needs at least one page".into()));
        }
        Ok(Session { pages, first_timestamp })
    }

    pub fn pages(&self) -> &[PageId] {
        &self.pages
    }

    pub fn first_timestamp(&self) -> f64 {
        self.first_timestamp
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    /// Cuts the session into consecutive non-overlapping chunks of at most
    /// `max_len` pages. Every chunk keeps the original start time.
    pub fn split(self, max_len: usize) -> Vec<Session> {
        let max_len = max_len.max(1);
        if self.pages.len() <= max_len {
            return vec![self];
        }
        self.pages
            .chunks(max_len)
            .map(|c| Session { pages: c.to_vec(), first_timestamp: self.first_timestamp })
            .collect()
    }
}

/// Session reconstruction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    /// A gap strictly longer than this between consecutive requests of the
    /// same visitor starts a new session.
    pub gap_seconds: f64,
    pub max_session_len: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { gap_seconds: 1800.0, max_session_len: 15 }
    }
}

/// Groups records into sessions.
///
/// Records are grouped by `source_key` and stably sorted by timestamp within
/// a group, so equal timestamps keep log order. Pages are registered in
/// `table` in order of first appearance in `records`. The result is ordered
/// by first timestamp; a session cut to the length cap starts each piece at
/// the time of its own first request.
pub fn sessionize(records: &[LogRecord], table: &mut PageTable, config: &SessionConfig) -> Vec<Session> {
    let ids: Vec<PageId> = records.iter().map(|r| table.register(&r.url)).collect();

    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let g = *group_of.entry(r.source_key.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let mut sessions = Vec::new();
    let mut flush = |run: &mut Vec<(PageId, f64)>| {
        for chunk in run.chunks(config.max_session_len.max(1)) {
            sessions.push(Session { pages: chunk.iter().map(|&(p, _)| p).collect(), first_timestamp: chunk[0].1 });
        }
        run.clear();
    };
    for mut members in groups {
        members.sort_by(|&a, &b| records[a].timestamp.total_cmp(&records[b].timestamp));
        let mut run: Vec<(PageId, f64)> = Vec::new();
        for &i in &members {
            let ts = records[i].timestamp;
            if run.last().is_some_and(|&(_, last)| ts - last > config.gap_seconds) {
                flush(&mut run);
            }
            run.push((ids[i], ts));
        }
        flush(&mut run);
    }
    sessions.sort_by(|a, b| a.first_timestamp.total_cmp(&b.first_timestamp));
    sessions
}

/// Writes the canonical session file: `first_timestamp<TAB>id id ...`.
pub fn write_sessions<W: Write>(mut w: W, sessions: &[Session]) -> io::Result<()> {
    for s in sessions {
        write!(w, "{}\t", s.first_timestamp)?;
        for (i, p) in s.pages.iter().enumerate() {
            if i > 0 {
                w.write_all(b" ")?;
            }
            write!(w, "{p}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a pre-sessionized file, one session per line.
///
/// A line is either `first_timestamp<TAB>tokens` or bare tokens, in which
/// case the line number serves as the timestamp. If every token in the file
/// is an integer the tokens are page ids; otherwise every token is a url and
/// is registered in `table`. Blank lines and lines starting with `#` are
/// ignored.
pub fn read_sessions<R: BufRead>(reader: R, table: &mut PageTable) -> Result<Vec<Session>> {
    let mut lines: Vec<(usize, f64, Vec<String>)> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (ts, body) = match line.split_once('\t') {
            Some((ts, body)) => {
                let ts: f64 = ts
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { line: line_no, message: format!("bad timestamp {:?}", ts.trim()) })?;
                (ts, body)
            }
            None => (line_no as f64, trimmed),
        };
        let tokens: Vec<String> = body.split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            return Err(Error::Parse { line: line_no, message: "session without pages".into() });
        }
        lines.push((line_no, ts, tokens));
    }

    let numeric = lines.iter().all(|(_, _, toks)| toks.iter().all(|t| t.parse::<u32>().is_ok()));
    let mut sessions = Vec::with_capacity(lines.len());
    for (line_no, ts, toks) in lines {
        let pages = if numeric {
            toks.iter()
                .map(|t| {
                    PageId::new(t.parse().expect("checked numeric"))
                        .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            toks.iter()
                .map(|t| {
                    normalize_url(t)
                        .map(|u| table.register(&u))
                        .ok_or_else(|| Error::Parse { line: line_no, message: format!("bad url token {t:?}") })
                })
                .collect::<Result<Vec<_>>>()?
        };
        sessions.push(Session { pages, first_timestamp: ts });
    }
    Ok(sessions)
}

/// Dataset summary: distinct pages, requests, sessions and the number of
/// sessions of length one, two and three.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub pages: usize,
    pub requests: usize,
    pub sessions: usize,
    pub len1: usize,
    pub len2: usize,
    pub len3: usize,
}

impl SessionSummary {
    pub fn of(sessions: &[Session]) -> Self {
        let mut pages: Vec<PageId> = sessions.iter().flat_map(|s| s.pages.iter().copied()).collect();
        pages.sort_unstable();
        pages.dedup();
        let by_len = |l: usize| sessions.iter().filter(|s| s.len() == l).count();
        SessionSummary {
            pages: pages.len(),
            requests: sessions.iter().map(Session::len).sum(),
            sessions: sessions.len(),
            len1: by_len(1),
            len2: by_len(2),
            len3: by_len(3),
        }
    }
}
