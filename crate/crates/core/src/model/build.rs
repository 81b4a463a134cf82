//! Construction of first-order and variable-order models.
//!
//! Every page state owns a set of *contexts*: token strings that end in the
//! state's page (and may start with `S`). The contexts of all states of one
//! page cover every observed history of that page exactly once, in the
//! sense that each history has exactly one context as a suffix. All weights
//! follow from the n-gram counts of the contexts:
//!
//! ```text
//! visits(u)      = Σ_{c ∈ u} #(c)
//! weight(u → t)  = Σ_{c ∈ u} #(c · t)
//! ```
//!
//! which keeps outgoing weights normalised and clone visits summing to page
//! views by construction.
//!
//! Transitions are deterministic: from a state, each next page leads to one
//! state. After a clone that can fail for a predecessor whose context
//! reaches histories owned by different clones; the predecessor's contexts
//! are then lengthened, and if they still disagree the predecessor itself
//! is split. Splits propagate backwards until the automaton is consistent,
//! which is what makes an order-`n` model reproduce `n`-gram conditionals
//! exactly when `γ = 0`. Pages below the `num_visits` threshold are never
//! split; their states keep one edge per reachable clone instead, weighted
//! by how often each clone's histories follow them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::divergence::{cluster_inpaths, DivergenceTable, InPath};
use super::{BuildParams, ModelGraph, State, StateId};
use crate::error::{Error, Result};
use crate::ingest::Session;
use crate::ngram::NGramIndex;
use crate::scalar::Scalar;
use crate::token::Token;

enum Resolution {
    Unique(StateId),
    Ambiguous,
    Missing,
}

/// Incrementally extends a first-order model to higher orders.
#[derive(Debug, Clone)]
pub struct VlmcBuilder {
    graph: ModelGraph,
    ngrams: NGramIndex,
    contexts: Vec<BTreeSet<Vec<Token>>>,
    /// Reversed context → owning state, for every page-state context.
    owner: BTreeMap<Vec<Token>, StateId>,
    params: BuildParams,
}

fn reversed(c: &[Token]) -> Vec<Token> {
    c.iter().rev().copied().collect()
}

impl VlmcBuilder {
    /// The first-order model of `sessions`, ready to be extended up to
    /// `params.target_order`.
    pub fn new(sessions: &[Session], params: BuildParams) -> Result<Self> {
        params.validate()?;
        if sessions.is_empty() {
            return Err(Error::Domain("cannot build a model from zero sessions".into()));
        }
        let ngrams = NGramIndex::build(sessions, params.target_order + 1)?;
        let mut tokens: Vec<(Token, u64)> =
            ngrams.table(1).expect("index has unigrams").iter().map(|(g, c)| (g[0], c)).collect();
        tokens.sort();

        let mut graph = ModelGraph::empty(params);
        let mut contexts = Vec::new();
        let mut owner = BTreeMap::new();
        for &(t, c) in &tokens {
            let id = graph.push_state(State::original(t), c)?;
            contexts.push(match t {
                Token::Finish => BTreeSet::new(),
                _ => BTreeSet::from([vec![t]]),
            });
            if let Token::Page(p) = t {
                owner.insert(vec![t], id);
                graph.page_views.insert(p, c);
            }
        }
        graph.total_views = graph.page_views.values().sum();
        let mut b = VlmcBuilder { graph, ngrams, contexts, owner, params };
        for id in b.graph.state_ids().collect::<Vec<_>>() {
            b.recompute_out(id);
        }
        Ok(b)
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    pub fn ngrams(&self) -> &NGramIndex {
        &self.ngrams
    }

    /// The contexts currently owned by a state.
    pub fn contexts(&self, id: StateId) -> &BTreeSet<Vec<Token>> {
        &self.contexts[id.0]
    }

    pub fn into_graph(self) -> ModelGraph {
        self.graph.canonicalize()
    }

    /// Which state a history suffix `query` (ending in a page) reaches.
    fn resolve(&self, query: &[Token]) -> Resolution {
        let rev = reversed(query);
        for len in 1..=rev.len() {
            if let Some(&id) = self.owner.get(&rev[..len]) {
                return Resolution::Unique(id);
            }
        }
        let mut found = None;
        for (k, &id) in self.owner.range(rev.clone()..) {
            if !k.starts_with(&rev) {
                break;
            }
            match found {
                None => found = Some(id),
                Some(f) if f != id => return Resolution::Ambiguous,
                _ => {}
            }
        }
        found.map_or(Resolution::Missing, Resolution::Unique)
    }

    fn target(&self, context: &[Token], next: Token) -> StateId {
        if next == Token::Finish {
            return self.graph.finish();
        }
        let mut q = context.to_vec();
        q.push(next);
        match self.resolve(&q) {
            Resolution::Unique(id) => id,
            _ => panic!("unresolved transition after {context:?} to {next}"),
        }
    }

    fn recompute_out(&mut self, id: StateId) {
        if self.graph.state(id).token == Token::Finish {
            return;
        }
        let mut edges = BTreeMap::new();
        let mut visits = 0;
        for c in &self.contexts[id.0] {
            visits += self.ngrams.count(c);
            for &(t, n) in self.ngrams.following(c) {
                *edges.entry(self.target(c, t)).or_insert(0) += n;
            }
        }
        self.graph.visits[id.0] = visits;
        self.graph.set_out_edges(id, edges);
    }

    /// A context of `id` whose continuation to some page reaches histories
    /// owned by more than one state.
    fn ambiguous_context(&self, id: StateId) -> Option<Vec<Token>> {
        for c in &self.contexts[id.0] {
            for &(t, _) in self.ngrams.following(c) {
                if !t.is_page() {
                    continue;
                }
                let mut q = c.clone();
                q.push(t);
                match self.resolve(&q) {
                    Resolution::Unique(_) => {}
                    Resolution::Ambiguous => return Some(c.clone()),
                    Resolution::Missing => panic!("observed history {q:?} has no owner"),
                }
            }
        }
        None
    }

    fn set_owner(&mut self, c: &[Token], id: StateId) {
        if self.graph.state(id).token.is_page() {
            self.owner.insert(reversed(c), id);
        }
    }

    /// Replaces context `c` of `id` by its one-token left extensions.
    fn refine(&mut self, id: StateId, c: &[Token]) {
        assert!(c[0] != Token::Start, "S-anchored context {c:?} cannot be refined");
        let ext: Vec<Vec<Token>> =
            self.ngrams.preceding(c).iter().map(|&y| std::iter::once(y).chain(c.iter().copied()).collect()).collect();
        self.contexts[id.0].remove(c);
        self.owner.remove(&reversed(c));
        for e in ext {
            self.set_owner(&e, id);
            self.contexts[id.0].insert(e);
        }
    }

    /// Gives `parts[0]` to `id` and every further part to a fresh clone.
    fn split(&mut self, id: StateId, parts: Vec<BTreeSet<Vec<Token>>>) -> Vec<StateId> {
        let token = self.graph.state(id).token;
        let mut parts = parts.into_iter();
        self.contexts[id.0] = parts.next().expect("at least one part");
        let mut created = Vec::new();
        for part in parts {
            let index = self.graph.states_of(token).len() as u32;
            let new = self.graph.push_state(State::new(token, index), 0).expect("fresh clone index");
            for c in &part {
                self.set_owner(c, new);
            }
            self.contexts.push(part);
            created.push(new);
        }
        self.recompute_out(id);
        for &n in &created {
            self.recompute_out(n);
        }
        created
    }

    /// Restores deterministic transitions for the queued states and every
    /// predecessor of a state split along the way. Returns the states
    /// created or split.
    fn settle(&mut self, queue: impl IntoIterator<Item = StateId>) -> BTreeSet<StateId> {
        let mut queue: VecDeque<StateId> = queue.into_iter().collect();
        let mut touched = BTreeSet::new();
        while let Some(u) = queue.pop_front() {
            while let Some(c) = self.ambiguous_context(u) {
                self.refine(u, &c);
            }
            let mut by_signature: BTreeMap<Vec<(Token, StateId)>, BTreeSet<Vec<Token>>> = BTreeMap::new();
            for c in &self.contexts[u.0] {
                let sig = self
                    .ngrams
                    .following(c)
                    .iter()
                    .filter(|(t, _)| t.is_page())
                    .map(|&(t, _)| (t, self.target(c, t)))
                    .collect();
                by_signature.entry(sig).or_default().insert(c.clone());
            }
            if by_signature.len() < 2 || !self.eligible(u) {
                self.recompute_out(u);
                continue;
            }
            let preds: Vec<StateId> = self.graph.predecessors(u).collect();
            let mut parts: Vec<BTreeSet<Vec<Token>>> = by_signature.into_values().collect();
            parts.sort_by_cached_key(|p| {
                let count: u64 = p.iter().map(|c| self.ngrams.count(c)).sum();
                (std::cmp::Reverse(count), p.iter().next().cloned())
            });
            let created = self.split(u, parts);
            touched.insert(u);
            touched.extend(created.iter().copied());
            // Through a self-loop the pieces can be each other's predecessors.
            for q in preds.into_iter().chain([u]).chain(created) {
                if !queue.contains(&q) {
                    queue.push_back(q);
                }
            }
        }
        touched
    }

    /// Whether the page of `id` has enough views to be cloned.
    fn eligible(&self, id: StateId) -> bool {
        self.graph.state(id).token.page().is_some_and(|p| self.graph.page_views(p) >= self.params.num_visits)
    }

    /// The contexts of `id` lengthened to `k` tokens (shorter only when
    /// they start with `S`).
    fn refined_contexts(&self, id: StateId, k: usize) -> Result<Vec<Vec<Token>>> {
        if k > self.params.target_order {
            return Err(Error::Contract(format!(
                "order {k} exceeds the {} the builder was prepared for",
                self.params.target_order
            )));
        }
        let mut out = Vec::new();
        let mut stack: Vec<Vec<Token>> = self.contexts[id.0].iter().cloned().collect();
        while let Some(c) = stack.pop() {
            if c.len() >= k || c[0] == Token::Start {
                out.push(c);
            } else {
                for &y in self.ngrams.preceding(&c) {
                    stack.push(std::iter::once(y).chain(c.iter().copied()).collect());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// In-paths of a page state at order `k`, with their counts.
    pub fn in_paths(&self, id: StateId, k: usize) -> Result<Vec<InPath>> {
        if !self.graph.state(id).token.is_page() {
            return Err(Error::Contract(format!("{} has no in-paths", self.graph.state(id))));
        }
        Ok(self
            .refined_contexts(id, k)?
            .into_iter()
            .map(|path| InPath { count: self.ngrams.count(&path), next: self.ngrams.following(&path).to_vec(), path })
            .collect())
    }

    /// Compares the state's transition probabilities with the order-`k`
    /// conditional estimates of each of its in-paths.
    pub fn divergence<T: Scalar>(&self, id: StateId, k: usize) -> Result<DivergenceTable<T>> {
        let paths = self.in_paths(id, k)?;
        Ok(self.table_for(id, k, &paths))
    }

    fn table_for<T: Scalar>(&self, id: StateId, k: usize, paths: &[InPath]) -> DivergenceTable<T> {
        let mut current: BTreeMap<Token, u64> = BTreeMap::new();
        for (to, w) in self.graph.out_edges(id) {
            *current.entry(self.graph.state(to).token).or_insert(0) += w;
        }
        DivergenceTable::new(self.graph.state(id), k, paths, &current, self.graph.out_weight(id))
    }

    /// Splits a page state by a partition of its order-`k` in-paths.
    ///
    /// The first group keeps the state, each further group becomes a new
    /// clone. Returns the group states followed by any predecessor states
    /// that had to be split to keep transitions deterministic.
    pub fn clone_state(&mut self, id: StateId, k: usize, partition: &[Vec<Vec<Token>>]) -> Result<Vec<StateId>> {
        let paths = self.refined_contexts(id, k)?;
        let known: BTreeSet<&Vec<Token>> = paths.iter().collect();
        let mut seen = BTreeSet::new();
        for p in partition.iter().flatten() {
            if !known.contains(p) {
                return Err(Error::Contract(format!("{p:?} is not an order-{k} in-path of {}", self.graph.state(id))));
            }
            if !seen.insert(p) {
                return Err(Error::Contract(format!("in-path {p:?} appears twice in the partition")));
            }
        }
        if seen.len() != known.len() {
            return Err(Error::Contract("partition does not cover every in-path".into()));
        }
        if partition.iter().any(Vec::is_empty) {
            return Err(Error::Contract("partition has an empty group".into()));
        }
        if partition.len() < 2 {
            return Ok(vec![id]);
        }

        for c in std::mem::take(&mut self.contexts[id.0]) {
            self.owner.remove(&reversed(&c));
        }
        for c in &paths {
            self.set_owner(c, id);
        }
        let preds: Vec<StateId> = self.graph.predecessors(id).collect();
        let parts = partition.iter().map(|g| g.iter().cloned().collect()).collect();
        let created = self.split(id, parts);
        let mut touched = self.settle(preds.into_iter().chain([id]).chain(created.iter().copied()));
        let mut result = vec![id];
        result.extend(&created);
        touched.retain(|t| !result.contains(t));
        result.extend(touched);
        Ok(result)
    }

    /// One extension pass: assesses every eligible page state at order `k`
    /// in ascending `(page, clone_index)` order and clones where the
    /// divergence exceeds γ.
    pub fn extend_to<T: Scalar>(&mut self, k: usize) -> Result<()> {
        let params = self.params;
        let gamma = T::from_f64(params.gamma);
        let mut pending: BTreeSet<(State, StateId)> = self
            .graph
            .state_ids()
            .filter(|&s| self.graph.state(s).token.is_page())
            .map(|s| (self.graph.state(s), s))
            .collect();
        while let Some((state, id)) = pending.pop_first() {
            let page = state.token.page().expect("page state");
            if self.graph.page_views(page) < params.num_visits {
                continue;
            }
            let paths = self.in_paths(id, k)?;
            if paths.len() < 2 {
                continue;
            }
            if self.table_for::<T>(id, k, &paths).summary(params.gamma_mode) <= gamma {
                continue;
            }
            let partition = if params.gamma > 0.0 && paths.len() == 2 {
                paths.iter().map(|p| vec![p.path.clone()]).collect()
            } else {
                cluster_inpaths::<T>(&paths, params.gamma, params.gamma_mode)
            };
            if partition.len() < 2 {
                continue;
            }
            for s in self.clone_state(id, k, &partition)? {
                pending.insert((self.graph.state(s), s));
            }
        }
        self.graph.order = k;
        Ok(())
    }
}

/// The first-order model: one state per page plus `S` and `F`, with weights
/// counting how often one token immediately follows another.
pub fn build_first_order(sessions: &[Session]) -> Result<ModelGraph> {
    Ok(VlmcBuilder::new(sessions, BuildParams::default())?.into_graph())
}

/// Builds the first-order model and extends it order by order up to
/// `params.target_order`. The scalar type decides the γ comparisons; use an
/// exact type when thresholds must be honoured to the last digit.
pub fn build_vlmc<T: Scalar>(sessions: &[Session], params: BuildParams) -> Result<ModelGraph> {
    let mut b = VlmcBuilder::new(sessions, params)?;
    for k in 2..=params.target_order {
        b.extend_to::<T>(k)?;
    }
    Ok(b.into_graph())
}

/// Like [`build_vlmc`], returning the model after every order `1..=target`.
pub fn build_vlmc_orders<T: Scalar>(sessions: &[Session], params: BuildParams) -> Result<Vec<ModelGraph>> {
    let mut b = VlmcBuilder::new(sessions, params)?;
    let mut out = vec![b.graph.clone().canonicalize()];
    for k in 2..=params.target_order {
        b.extend_to::<T>(k)?;
        out.push(b.graph.clone().canonicalize());
    }
    Ok(out)
}
