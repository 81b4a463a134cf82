//! Summarisation and prediction metrics.
//!
//! Summarisation compares the model's top-m trails with the top-m n-grams
//! of the data (Spearman footrule with location parameter, and overlap).
//! Prediction walks a session prefix through the model and scores where the
//! real next page lands among the reachable pages.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Session;
use crate::model::{build_vlmc, BuildParams, ModelGraph, StateId};
use crate::ngram::{count_ngrams, RankedList};
use crate::scalar::Scalar;
use crate::token::Token;
use crate::trails::{extract_trails, top_m_trails, TrailQuery};

/// Footrule proximity of two top-m lists: `1 − Σ|f(i) − g(i)| / (m(m+1))`
/// over the union of their items, where an item missing from a list sits
/// at rank `m + 1`.
pub fn footrule<T: Scalar, A, B>(l1: &RankedList<A>, l2: &RankedList<B>) -> Result<T> {
    let m = l1.m();
    if m == 0 {
        return Err(Error::Domain("footrule of lists with m = 0".into()));
    }
    if l2.m() != m {
        return Err(Error::Domain(format!("footrule of lists with m = {m} and m = {}", l2.m())));
    }
    let d = displacement(l1, l2);
    let max = (m * (m + 1)) as u128;
    Ok(T::one() - T::ratio(d as u128, max))
}

fn displacement<A, B>(l1: &RankedList<A>, l2: &RankedList<B>) -> usize {
    let absent = l1.m() + 1;
    let mut ranks: BTreeMap<&[Token], (usize, usize)> = BTreeMap::new();
    for (i, items) in l1.items().enumerate() {
        ranks.entry(items).or_insert((absent, absent)).0 = i + 1;
    }
    for (i, items) in l2.items().enumerate() {
        ranks.entry(items).or_insert((absent, absent)).1 = i + 1;
    }
    ranks.values().map(|&(f, g)| f.abs_diff(g)).sum()
}

/// Share of the reference items that the assessed list also contains.
pub fn overlap<T: Scalar, A, B>(reference: &RankedList<A>, assessed: &RankedList<B>) -> Result<T> {
    if reference.is_empty() {
        return Err(Error::Domain("overlap against an empty reference list".into()));
    }
    let hits = reference.items().filter(|r| assessed.rank_of(r).is_some()).count();
    Ok(T::ratio(hits as u128, reference.len() as u128))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListComparison<T> {
    pub footrule: T,
    pub overlap: T,
    pub m: usize,
    pub union_size: usize,
}

impl<T: Scalar> ListComparison<T> {
    pub fn compare<A, B>(reference: &RankedList<A>, assessed: &RankedList<B>) -> Result<Self> {
        let mut union: Vec<&[Token]> = reference.items().chain(assessed.items()).collect();
        union.sort();
        union.dedup();
        Ok(ListComparison {
            footrule: footrule(reference, assessed)?,
            overlap: overlap(reference, assessed)?,
            m: reference.m(),
            union_size: union.len(),
        })
    }
}

/// The m most frequent `n`-grams that can be trails, i.e. do not begin
/// with `S`.
pub fn reference_ranking(sessions: &[Session], n: usize, m: usize) -> Result<RankedList<u64>> {
    let table = count_ngrams(sessions, n)?;
    Ok(RankedList::rank(m, table.iter().filter(|(g, _)| g[0] != Token::Start).map(|(g, c)| (g.to_vec(), c)).collect()))
}

/// How well the model's top trails of length `n` reproduce the top `n`-gram
/// frequencies of `sessions`.
pub fn summarisation_eval<T: Scalar>(
    model: &ModelGraph,
    sessions: &[Session],
    n: usize,
    query: &TrailQuery,
) -> Result<ListComparison<T>> {
    if query.mtl != n {
        return Err(Error::Contract(format!("trail length {} differs from n-gram length {n}", query.mtl)));
    }
    let reference = reference_ranking(sessions, n, query.m)?;
    let assessed = top_m_trails(extract_trails::<T>(model, query)?, query.m);
    ListComparison::compare(&reference, &assessed)
}

/// Train on partitions `1..=train_upto`, test on partition `train_upto + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldPlan {
    pub k_total: usize,
    pub train_upto: usize,
}

/// Sessions split into contiguous partitions.
#[derive(Debug, Clone)]
pub struct Partitions {
    parts: Vec<Vec<Session>>,
}

impl Partitions {
    fn split(sessions: Vec<Session>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config("at least two folds are needed".into()));
        }
        if sessions.len() < k {
            return Err(Error::Domain(format!("{} sessions cannot fill {k} folds", sessions.len())));
        }
        let (base, extra) = (sessions.len() / k, sessions.len() % k);
        let mut rest = sessions.into_iter();
        let parts = (0..k).map(|i| rest.by_ref().take(base + usize::from(i < extra)).collect()).collect();
        Ok(Partitions { parts })
    }

    pub fn k_total(&self) -> usize {
        self.parts.len()
    }

    pub fn part(&self, i: usize) -> &[Session] {
        &self.parts[i]
    }

    /// Every plan `train_upto = 1..k_total`.
    pub fn plans(&self) -> Vec<FoldPlan> {
        let k_total = self.k_total();
        (1..k_total).map(|train_upto| FoldPlan { k_total, train_upto }).collect()
    }

    pub fn train(&self, plan: FoldPlan) -> Vec<Session> {
        self.parts[..plan.train_upto].iter().flatten().cloned().collect()
    }

    pub fn test(&self, plan: FoldPlan) -> &[Session] {
        &self.parts[plan.train_upto]
    }
}

/// Sorts sessions by first timestamp (stable) and cuts them into `k`
/// contiguous partitions whose sizes differ by at most one, the larger ones
/// first.
pub fn temporal_folds(sessions: &[Session], k: usize) -> Result<Partitions> {
    let mut sorted = sessions.to_vec();
    sorted.sort_by(|a, b| a.first_timestamp().total_cmp(&b.first_timestamp()));
    Partitions::split(sorted, k)
}

/// Like [`temporal_folds`] but over a seeded random permutation of the
/// sessions instead of time order.
pub fn shuffled_folds(sessions: &[Session], k: usize, seed: u64) -> Result<Partitions> {
    let mut shuffled = sessions.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Partitions::split(shuffled, k)
}

/// How a prediction was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionSource {
    /// The whole prefix was walked.
    Full,
    /// The prefix was walked after dropping this many leading pages.
    Shortened(usize),
    /// No suffix of the prefix was traversable; pages are ranked by their
    /// initial probability.
    Unconditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// Candidates by descending probability, ties in ascending token order.
    pub reachable: Vec<(Token, T)>,
    pub source: PredictionSource,
}

impl<T: Scalar> Prediction<T> {
    /// Competition ranks of `target`: `(rank, ae, ae_c)`. A target that is
    /// not reachable ranks one past the last candidate with `ae_c = 0`.
    pub fn score(&self, target: Token) -> (usize, usize, usize) {
        match self.reachable.iter().find(|(t, _)| *t == target) {
            Some((_, p)) => {
                let above = self.reachable.iter().filter(|(_, q)| q > p).count();
                let below = self.reachable.iter().filter(|(_, q)| q < p).count();
                (above + 1, above, below)
            }
            None => (self.reachable.len() + 1, self.reachable.len(), 0),
        }
    }
}

fn rank_candidates<T: Scalar>(mut v: Vec<(Token, T)>) -> Vec<(Token, T)> {
    v.sort_by(|a, b| crate::scalar::cmp_desc(&a.1, &b.1).then(a.0.cmp(&b.0)));
    v
}

/// The state reached by the most probable state path spelling `prefix`,
/// starting from any state of its first page.
fn walk<T: Scalar>(model: &ModelGraph, prefix: &[Token]) -> Option<StateId> {
    let mut best: BTreeMap<StateId, T> = model.initial_mass::<T>(prefix[0]);
    for &page in &prefix[1..] {
        let mut next: BTreeMap<StateId, T> = BTreeMap::new();
        for (&u, score) in &best {
            for (v, _) in model.out_edges(u) {
                if model.state(v).token != page {
                    continue;
                }
                let s = score.clone() * model.transition_probability::<T>(u, v);
                match next.get(&v) {
                    Some(old) if *old >= s => {}
                    _ => {
                        next.insert(v, s);
                    }
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        best = next;
    }
    let mut winner: Option<(StateId, T)> = None;
    for (id, s) in best {
        let better = match &winner {
            None => true,
            Some((w, ws)) => s > *ws || (s == *ws && model.state(id) < model.state(*w)),
        };
        if better {
            winner = Some((id, s));
        }
    }
    winner.map(|(id, _)| id)
}

/// Ranks the pages (and `F`) reachable after `prefix`.
///
/// If the model cannot follow the whole prefix, leading pages are dropped
/// until it can; if no suffix works, all pages are ranked by initial
/// probability.
pub fn predict_next<T: Scalar>(model: &ModelGraph, prefix: &[Token]) -> Result<Prediction<T>> {
    if prefix.is_empty() {
        return Err(Error::Contract("prediction needs a non-empty prefix".into()));
    }
    for start in 0..prefix.len() {
        if let Some(state) = walk::<T>(model, &prefix[start..]) {
            let mut by_token: BTreeMap<Token, T> = BTreeMap::new();
            for (v, _) in model.out_edges(state) {
                let slot = by_token.entry(model.state(v).token).or_insert_with(T::zero);
                *slot = slot.clone() + model.transition_probability::<T>(state, v);
            }
            let source = if start == 0 { PredictionSource::Full } else { PredictionSource::Shortened(start) };
            return Ok(Prediction { reachable: rank_candidates(by_token.into_iter().collect()), source });
        }
    }
    let reachable =
        model.pages().map(|p| Ok((Token::Page(p), model.initial_probability::<T>(p)?))).collect::<Result<Vec<_>>>()?;
    Ok(Prediction { reachable: rank_candidates(reachable), source: PredictionSource::Unconditional })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutcome<T> {
    pub prefix: Vec<Token>,
    pub target: Token,
    pub reachable: Vec<(Token, T)>,
    pub source: PredictionSource,
    pub rank: usize,
    /// `rank − 1`.
    pub ae: usize,
    /// Rank of the target counted from the least probable candidate, minus one.
    pub ae_c: usize,
}

impl<T: Scalar> PredictionOutcome<T> {
    pub fn new(prefix: Vec<Token>, target: Token, prediction: Prediction<T>) -> Self {
        let (rank, ae, ae_c) = prediction.score(target);
        PredictionOutcome { prefix, target, reachable: prediction.reachable, source: prediction.source, rank, ae, ae_c }
    }
}

/// Mean absolute error: the average `ae`.
pub fn mae<T>(outcomes: &[PredictionOutcome<T>]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Domain("mean absolute error of zero predictions".into()));
    }
    let sum: usize = outcomes.iter().map(|o| o.ae).sum();
    Ok(sum as f64 / outcomes.len() as f64)
}

/// `Σae / (Σae + Σae_c)`, zero when both sums are zero.
pub fn st_mae<T>(outcomes: &[PredictionOutcome<T>]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Domain("standardised error of zero predictions".into()));
    }
    let ae: usize = outcomes.iter().map(|o| o.ae).sum();
    let ae_c: usize = outcomes.iter().map(|o| o.ae_c).sum();
    if ae + ae_c == 0 {
        return Ok(0.0);
    }
    Ok(ae as f64 / (ae + ae_c) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub order: usize,
    pub states: usize,
    pub scored: usize,
    /// Test sessions too short to have a prefix.
    pub skipped: usize,
    /// Predictions that needed a shortened prefix or the unconditional
    /// ranking.
    pub fallbacks: usize,
    pub mae: f64,
    pub st_mae: f64,
}

/// Predicts the last page of every test session of two or more pages from
/// the pages before it.
pub fn evaluate_predictions<T: Scalar>(
    model: &ModelGraph,
    test: &[Session],
) -> Result<(PredictionReport, Vec<PredictionOutcome<T>>)> {
    let mut outcomes = Vec::new();
    let mut skipped = 0;
    for s in test {
        let pages: Vec<Token> = s.pages().iter().map(|&p| Token::Page(p)).collect();
        let Some((&target, prefix)) = pages.split_last().filter(|(_, p)| !p.is_empty()) else {
            skipped += 1;
            continue;
        };
        let prediction = predict_next::<T>(model, prefix)?;
        outcomes.push(PredictionOutcome::new(prefix.to_vec(), target, prediction));
    }
    if outcomes.is_empty() {
        return Err(Error::Domain("no test session has two or more pages".into()));
    }
    let report = PredictionReport {
        order: model.order(),
        states: model.state_count(),
        scored: outcomes.len(),
        skipped,
        fallbacks: outcomes.iter().filter(|o| o.source != PredictionSource::Full).count(),
        mae: mae(&outcomes)?,
        st_mae: st_mae(&outcomes)?,
    };
    Ok((report, outcomes))
}

/// Builds a model from the plan's training partitions and scores it on the
/// test partition.
pub fn prediction_eval<T: Scalar>(
    partitions: &Partitions,
    plan: FoldPlan,
    params: BuildParams,
) -> Result<PredictionReport> {
    let model = build_vlmc::<T>(&partitions.train(plan), params)?;
    Ok(evaluate_predictions::<T>(&model, partitions.test(plan))?.0)
}
