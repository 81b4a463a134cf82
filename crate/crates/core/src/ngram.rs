//! N-gram counts over start/finish-augmented sessions and top-m rankings.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::ingest::Session;
use crate::token::{format_tokens, PageId, Token};

/// `S · pages · F`.
pub fn augment(pages: &[PageId]) -> Vec<Token> {
    let mut out = Vec::with_capacity(pages.len() + 2);
    out.push(Token::Start);
    out.extend(pages.iter().map(|&p| Token::Page(p)));
    out.push(Token::Finish);
    out
}

/// Frequency of every length-`n` window of the augmented sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramTable {
    n: usize,
    counts: HashMap<Vec<Token>, u64>,
}

impl NGramTable {
    pub fn new(n: usize) -> Self {
        NGramTable { n, counts: HashMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Count of `gram`, zero when absent or of the wrong length.
    pub fn count(&self, gram: &[Token]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Token], u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Adds `times` occurrences of `gram`.
    pub fn add(&mut self, gram: &[Token], times: u64) {
        debug_assert_eq!(gram.len(), self.n);
        if times > 0 {
            *self.counts.entry(gram.to_vec()).or_insert(0) += times;
        }
    }

    /// Sums another table of the same length into this one.
    pub fn merge(&mut self, other: &NGramTable) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Contract(format!("cannot merge {}-gram table into {}-gram table", other.n, self.n)));
        }
        for (k, v) in other.iter() {
            self.add(k, v);
        }
        Ok(())
    }

    /// Entries in ascending token order.
    pub fn sorted(&self) -> Vec<(&[Token], u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Audit CSV: `n,tokens,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,tokens,count")?;
        for (k, c) in self.sorted() {
            writeln!(w, "{},{},{}", self.n, format_tokens(k), c)?;
        }
        Ok(())
    }
}

/// Counts the length-`n` windows of every augmented session.
pub fn count_ngrams(sessions: &[Session], n: usize) -> Result<NGramTable> {
    if n == 0 {
        return Err(Error::Config("n-gram length must be at least 1".into()));
    }
    let mut table = NGramTable::new(n);
    for s in sessions {
        for w in augment(s.pages()).windows(n) {
            table.add(w, 1);
        }
    }
    Ok(table)
}

/// One row of a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry<S> {
    pub items: Vec<Token>,
    pub score: S,
}

/// A top-m list: scores non-increasing, equal scores in ascending token
/// order, at most `m` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<S = ()> {
    m: usize,
    entries: Vec<RankedEntry<S>>,
}

impl<S: PartialOrd> RankedList<S> {
    /// Ranks `(items, score)` pairs and keeps the best `m`.
    pub fn rank(m: usize, mut scored: Vec<(Vec<Token>, S)>) -> Self {
        scored.sort_by(|a, b| crate::scalar::cmp_desc(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(m);
        RankedList { m, entries: scored.into_iter().map(|(items, score)| RankedEntry { items, score }).collect() }
    }
}

impl RankedList<()> {
    /// A list whose order is given, without scores.
    pub fn from_order(m: usize, items: Vec<Vec<Token>>) -> Result<Self> {
        if items.len() > m {
            return Err(Error::Contract(format!("{} items exceed list size {m}", items.len())));
        }
        Ok(RankedList { m, entries: items.into_iter().map(|items| RankedEntry { items, score: () }).collect() })
    }
}

impl<S> RankedList<S> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[RankedEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = &[Token]> {
        self.entries.iter().map(|e| e.items.as_slice())
    }

    /// 1-based rank of `items`.
    pub fn rank_of(&self, items: &[Token]) -> Option<usize> {
        self.entries.iter().position(|e| e.items == items).map(|i| i + 1)
    }

    /// CSV `rank,<label>,<score>` with scores rendered by `fmt_score`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &str, fmt_score: impl Fn(&S) -> String) -> io::Result<()> {
        writeln!(w, "{header}")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, format_tokens(&e.items), fmt_score(&e.score))?;
        }
        Ok(())
    }
}

/// The `m` most frequent n-grams.
pub fn top_m_ngrams(table: &NGramTable, m: usize) -> RankedList<u64> {
    RankedList::rank(m, table.iter().map(|(k, c)| (k.to_vec(), c)).collect())
}

/// N-gram tables for every length `1..=max_n` with neighbour lookups.
///
/// The model builder reads all of its counts from here: `#(w)` for any
/// token string `w` of length at most `max_n`, the tokens that can precede
/// a string and the tokens that can follow it.
#[derive(Debug, Clone)]
pub struct NGramIndex {
    tables: Vec<NGramTable>,
    left: Vec<HashMap<Vec<Token>, Vec<Token>>>,
    right: Vec<HashMap<Vec<Token>, Vec<(Token, u64)>>>,
}

impl NGramIndex {
    pub fn build(sessions: &[Session], max_n: usize) -> Result<Self> {
        let tables = (1..=max_n).map(|n| count_ngrams(sessions, n)).collect::<Result<Vec<_>>>()?;
        let mut left = Vec::with_capacity(max_n);
        let mut right = Vec::with_capacity(max_n);
        for t in &tables {
            let mut l: HashMap<Vec<Token>, Vec<Token>> = HashMap::new();
            let mut r: HashMap<Vec<Token>, Vec<(Token, u64)>> = HashMap::new();
            if t.n() >= 2 {
                for (gram, c) in t.iter() {
                    l.entry(gram[1..].to_vec()).or_default().push(gram[0]);
                    r.entry(gram[..gram.len() - 1].to_vec()).or_default().push((gram[gram.len() - 1], c));
                }
            }
            l.values_mut().for_each(|v| v.sort_unstable());
            r.values_mut().for_each(|v| v.sort_unstable());
            left.push(l);
            right.push(r);
        }
        Ok(NGramIndex { tables, left, right })
    }

    pub fn max_n(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, n: usize) -> Option<&NGramTable> {
        n.checked_sub(1).and_then(|i| self.tables.get(i))
    }

    /// `#(gram)`. Panics if `gram` is longer than the index covers.
    pub fn count(&self, gram: &[Token]) -> u64 {
        assert!(gram.len() <= self.max_n(), "{}-gram requested from an index of depth {}", gram.len(), self.max_n());
        if gram.is_empty() {
            return 0;
        }
        self.tables[gram.len() - 1].count(gram)
    }

    /// Tokens `y` with `#(y · suffix) > 0`, ascending.
    pub fn preceding(&self, suffix: &[Token]) -> &[Token] {
        self.left.get(suffix.len()).and_then(|m| m.get(suffix)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(t, #(prefix · t))` for every observed continuation, ascending.
    pub fn following(&self, prefix: &[Token]) -> &[(Token, u64)] {
        self.right.get(prefix.len()).and_then(|m| m.get(prefix)).map(Vec::as_slice).unwrap_or(&[])
    }
}
