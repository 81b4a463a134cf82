//! High-probability trail extraction by pruned breadth-first search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelGraph, StateId};
use crate::ngram::RankedList;
use crate::scalar::{self, Scalar};
use crate::token::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthMode {
    /// Only trails of exactly `mtl` tokens.
    #[default]
    Strict,
    /// Trails of at most `mtl` tokens that no longer returned trail extends.
    Nonstrict,
}

impl FromStr for LengthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(LengthMode::Strict),
            "nonstrict" => Ok(LengthMode::Nonstrict),
            other => Err(Error::Config(format!("length mode must be strict or nonstrict, got {other:?}"))),
        }
    }
}

impl fmt::Display for LengthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthMode::Strict => "strict",
            LengthMode::Nonstrict => "nonstrict",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailQuery {
    /// Cut-point: a trail survives only while its probability is above it.
    pub lambda: f64,
    /// Maximum trail length in tokens; a final `F` counts.
    pub mtl: usize,
    pub length_mode: LengthMode,
    pub m: usize,
}

impl TrailQuery {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.mtl < 1 {
            return Err(Error::Config("mtl must be at least 1".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trail<T> {
    pub tokens: Vec<Token>,
    pub probability: T,
}

/// All trails whose probability exceeds `query.lambda`, sorted by tokens.
///
/// Expansion starts from every page (weighted by the views of each of its
/// states) and follows all outgoing transitions level by level. Because a
/// trail is never more probable than its prefix, a branch is cut as soon
/// as it drops to `lambda` or below.
pub fn extract_trails<T: Scalar>(model: &ModelGraph, query: &TrailQuery) -> Result<Vec<Trail<T>>> {
    query.validate()?;
    if query.lambda <= 0.0 && model.has_cycle() {
        return Err(Error::Config("lambda must be positive on a model with cycles".into()));
    }
    let lambda = T::from_f64(query.lambda);

    let mut found: Vec<Trail<T>> = Vec::new();
    let mut frontier: Vec<(Vec<Token>, BTreeMap<StateId, T>)> = Vec::new();
    for page in model.pages() {
        let t = Token::Page(page);
        let mass = model.initial_mass::<T>(t);
        frontier.push((vec![t], mass));
    }

    for len in 1..=query.mtl {
        let mut next = Vec::new();
        for (tokens, mass) in frontier {
            let p = scalar::sum(mass.values().cloned());
            if p <= lambda {
                continue;
            }
            let last = *tokens.last().expect("trails are non-empty");
            if len < query.mtl && last != Token::Finish {
                for (tok, m) in model.advance(&mass) {
                    let mut ext = tokens.clone();
                    ext.push(tok);
                    next.push((ext, m));
                }
            }
            found.push(Trail { tokens, probability: p });
        }
        frontier = next;
    }

    match query.length_mode {
        LengthMode::Strict => found.retain(|t| t.tokens.len() == query.mtl),
        LengthMode::Nonstrict => {
            let extended: BTreeSet<Vec<Token>> =
                found.iter().filter(|t| t.tokens.len() > 1).map(|t| t.tokens[..t.tokens.len() - 1].to_vec()).collect();
            found.retain(|t| !extended.contains(&t.tokens));
        }
    }
    found.sort_by(|a, b| a.tokens.cmp(&b.tokens));
    Ok(found)
}

/// Probability-descending, ties in ascending token order, at most `m`.
pub fn top_m_trails<T: Scalar>(trails: Vec<Trail<T>>, m: usize) -> RankedList<T> {
    RankedList::rank(m, trails.into_iter().map(|t| (t.tokens, t.probability)).collect())
}

/// CSV `rank,trail,probability`, probabilities at four decimals.
pub fn write_trails_csv<T: Scalar, W: Write>(list: &RankedList<T>, w: W) -> io::Result<()> {
    list.write_csv(w, "rank,trail,probability", |p| format!("{:.4}", p.to_f64()))
}
