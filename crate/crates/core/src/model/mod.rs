//! Variable-length Markov chain models over page states.
//!
//! A [`ModelGraph`] is a weighted directed graph whose nodes are
//! `(page, clone_index)` states plus the artificial start `S` and finish
//! `F`. Every weight is an integer traversal count, so each probability the
//! model answers is an exact ratio. Higher-order structure comes from
//! cloning: a page may be represented by several states, each standing for
//! the subset of navigation histories that reach the page along particular
//! in-paths.
//!
//! Models are built by [`build_first_order`] and [`build_vlmc`] (see
//! [`build`]), queried with [`ModelGraph::trail_probability`] and friends,
//! and stored in the flat text format of [`ModelGraph::write`].

pub mod build;
pub mod divergence;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};
use crate::token::{PageId, Token};

pub use build::{build_first_order, build_vlmc, build_vlmc_orders, VlmcBuilder};
pub use divergence::{cluster_inpaths, DivergenceRow, DivergenceTable, InPath};

/// A node of the model: a page (or `S`/`F`) and which clone of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub token: Token,
    pub clone_index: u32,
}

impl State {
    pub fn new(token: Token, clone_index: u32) -> Self {
        State { token, clone_index }
    }

    pub fn original(token: Token) -> Self {
        State { token, clone_index: 0 }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clone_index == 0 {
            write!(f, "{}", self.token)
        } else {
            write!(f, "{}'{}", self.token, self.clone_index)
        }
    }
}

/// Index of a state inside one [`ModelGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub(crate) usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the divergence table of a state is summarised against γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaMode {
    /// Largest row difference.
    #[default]
    Max,
    /// Mean row difference.
    Avg,
}

impl FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(GammaMode::Max),
            "avg" => Ok(GammaMode::Avg),
            other => Err(Error::Config(format!("gamma mode must be max or avg, got {other:?}"))),
        }
    }
}

impl fmt::Display for GammaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaMode::Max => "max",
            GammaMode::Avg => "avg",
        })
    }
}

/// Parameters of [`build_vlmc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildParams {
    pub target_order: usize,
    /// Highest admissible divergence between a state's transition
    /// probabilities and the next-order conditional estimates.
    pub gamma: f64,
    pub gamma_mode: GammaMode,
    /// A page must have been requested at least this often to be cloned.
    pub num_visits: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams { target_order: 1, gamma: 0.0, gamma_mode: GammaMode::Max, num_visits: 0 }
    }
}

impl BuildParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_order < 1 {
            return Err(Error::Config("target order must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// The state graph of a first- or higher-order model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    states: Vec<State>,
    visits: Vec<u64>,
    out: Vec<BTreeMap<StateId, u64>>,
    out_total: Vec<u64>,
    incoming: Vec<BTreeSet<StateId>>,
    index: HashMap<State, StateId>,
    by_token: BTreeMap<Token, Vec<StateId>>,
    page_views: BTreeMap<PageId, u64>,
    total_views: u64,
    order: usize,
    params: BuildParams,
}

impl ModelGraph {
    fn empty(params: BuildParams) -> Self {
        ModelGraph {
            states: Vec::new(),
            visits: Vec::new(),
            out: Vec::new(),
            out_total: Vec::new(),
            incoming: Vec::new(),
            index: HashMap::new(),
            by_token: BTreeMap::new(),
            page_views: BTreeMap::new(),
            total_views: 0,
            order: 1,
            params,
        }
    }

    fn push_state(&mut self, state: State, visits: u64) -> Result<StateId> {
        if self.index.contains_key(&state) {
            return Err(Error::Contract(format!("duplicate state {state}")));
        }
        if !state.token.is_page() && state.clone_index != 0 {
            return Err(Error::Contract(format!("{state}: S and F are never cloned")));
        }
        let id = StateId(self.states.len());
        self.states.push(state);
        self.visits.push(visits);
        self.out.push(BTreeMap::new());
        self.out_total.push(0);
        self.incoming.push(BTreeSet::new());
        self.index.insert(state, id);
        let clones = self.by_token.entry(state.token).or_default();
        clones.push(id);
        clones.sort_by_key(|&i| self.states[i.0].clone_index);
        Ok(id)
    }

    fn set_out_edges(&mut self, from: StateId, edges: BTreeMap<StateId, u64>) {
        let old = std::mem::take(&mut self.out[from.0]);
        for to in old.keys() {
            self.incoming[to.0].remove(&from);
        }
        for to in edges.keys() {
            self.incoming[to.0].insert(from);
        }
        self.out_total[from.0] = edges.values().sum();
        self.out[from.0] = edges;
    }

    /// Renumbers states in ascending `(token, clone_index)` order.
    fn canonicalize(self) -> Self {
        let mut order: Vec<StateId> = (0..self.states.len()).map(StateId).collect();
        order.sort_by_key(|&i| self.states[i.0]);
        let mut remap = vec![StateId(0); order.len()];
        for (new, old) in order.iter().enumerate() {
            remap[old.0] = StateId(new);
        }
        let mut g = ModelGraph::empty(self.params);
        g.order = self.order;
        g.page_views = self.page_views.clone();
        g.total_views = self.total_views;
        for &old in &order {
            g.push_state(self.states[old.0], self.visits[old.0]).expect("states are unique");
        }
        for &old in &order {
            let edges = self.out[old.0].iter().map(|(to, &w)| (remap[to.0], w)).collect();
            g.set_out_edges(remap[old.0], edges);
        }
        g
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The parameters the model was built with.
    pub fn params(&self) -> &BuildParams {
        &self.params
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: StateId) -> State {
        self.states[id.0]
    }

    pub fn id_of(&self, state: State) -> Option<StateId> {
        self.index.get(&state).copied()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn start(&self) -> StateId {
        self.id_of(State::original(Token::Start)).expect("every model has S")
    }

    pub fn finish(&self) -> StateId {
        self.id_of(State::original(Token::Finish)).expect("every model has F")
    }

    /// Every state of `token`, ordered by clone index.
    pub fn states_of(&self, token: Token) -> &[StateId] {
        self.by_token.get(&token).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of extra states beyond the original for `page`.
    pub fn clone_count(&self, page: PageId) -> usize {
        self.states_of(Token::Page(page)).len().saturating_sub(1)
    }

    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.page_views.keys().copied()
    }

    pub fn visits(&self, id: StateId) -> u64 {
        self.visits[id.0]
    }

    pub fn page_views(&self, page: PageId) -> u64 {
        self.page_views.get(&page).copied().unwrap_or(0)
    }

    pub fn total_views(&self) -> u64 {
        self.total_views
    }

    pub fn out_edges(&self, id: StateId) -> impl Iterator<Item = (StateId, u64)> + '_ {
        self.out[id.0].iter().map(|(&k, &v)| (k, v))
    }

    pub fn out_weight(&self, id: StateId) -> u64 {
        self.out_total[id.0]
    }

    pub fn weight(&self, from: StateId, to: StateId) -> u64 {
        self.out[from.0].get(&to).copied().unwrap_or(0)
    }

    pub fn predecessors(&self, id: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.incoming[id.0].iter().copied()
    }

    pub fn transition_count(&self) -> usize {
        self.out.iter().map(BTreeMap::len).sum()
    }

    /// `weight(from, to) / Σ weight(from, ·)`, zero for a state without
    /// out-links.
    pub fn transition_probability<T: Scalar>(&self, from: StateId, to: StateId) -> T {
        let total = self.out_total[from.0];
        if total == 0 {
            return T::zero();
        }
        T::ratio(u128::from(self.weight(from, to)), u128::from(total))
    }

    /// Probability of choosing `page` among all page views.
    pub fn initial_probability<T: Scalar>(&self, page: PageId) -> Result<T> {
        match self.page_views.get(&page) {
            Some(_) if self.total_views == 0 => Ok(T::zero()),
            Some(&v) => Ok(T::ratio(u128::from(v), u128::from(self.total_views))),
            None => Err(Error::UnknownPage(page)),
        }
    }

    /// Share of all page views that landed in this particular state.
    pub fn state_initial_probability<T: Scalar>(&self, id: StateId) -> T {
        if self.total_views == 0 || !self.states[id.0].token.is_page() {
            return T::zero();
        }
        T::ratio(u128::from(self.visits[id.0]), u128::from(self.total_views))
    }

    /// Probability mass over the states of `token` at the start of a trail.
    pub(crate) fn initial_mass<T: Scalar>(&self, token: Token) -> BTreeMap<StateId, T> {
        if !token.is_page() {
            return BTreeMap::new();
        }
        self.states_of(token)
            .iter()
            .map(|&s| (s, self.state_initial_probability::<T>(s)))
            .filter(|(_, p)| !p.is_zero())
            .collect()
    }

    /// Pushes `mass` one step forward, grouped by the token of the state
    /// reached.
    pub(crate) fn advance<T: Scalar>(&self, mass: &BTreeMap<StateId, T>) -> BTreeMap<Token, BTreeMap<StateId, T>> {
        let mut next: BTreeMap<Token, BTreeMap<StateId, T>> = BTreeMap::new();
        for (&u, m) in mass {
            let total = self.out_total[u.0];
            if total == 0 {
                continue;
            }
            for (&v, &w) in &self.out[u.0] {
                let p = m.clone() * T::ratio(u128::from(w), u128::from(total));
                let slot = next.entry(self.states[v.0].token).or_default().entry(v).or_insert_with(T::zero);
                *slot = slot.clone() + p;
            }
        }
        next
    }

    /// Probability of a trail of pages, optionally ending in `F`.
    ///
    /// Sums `initial(first state) · Π transition probabilities` over every
    /// state path whose page sequence equals `trail`, so clones of a page
    /// all contribute. Zero when no such path exists.
    pub fn trail_probability<T: Scalar>(&self, trail: &[Token]) -> T {
        let Some((&first, rest)) = trail.split_first() else {
            return T::zero();
        };
        let mut mass = self.initial_mass::<T>(first);
        for &t in rest {
            if mass.is_empty() {
                break;
            }
            mass = self.advance(&mass).remove(&t).unwrap_or_default();
        }
        scalar::sum(mass.into_values())
    }

    /// Checks the structural invariants of a built model: outgoing weights
    /// of every non-`F` state sum to its visits, the clones of each page
    /// partition its views, and every page state lies on an `S`→`F` path.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Contract(m));
        let finish = self.finish();
        for id in self.state_ids() {
            if id != finish && self.visits[id.0] > 0 && self.out_total[id.0] != self.visits[id.0] {
                return fail(format!(
                    "state {} has {} visits but {} outgoing traversals",
                    self.states[id.0], self.visits[id.0], self.out_total[id.0]
                ));
            }
        }
        if self.out_total[finish.0] != 0 {
            return fail("F has outgoing transitions".into());
        }
        for (&page, &views) in &self.page_views {
            let sum: u64 = self.states_of(Token::Page(page)).iter().map(|&s| self.visits[s.0]).sum();
            if sum != views {
                return fail(format!("clones of page {page} hold {sum} of its {views} views"));
            }
        }
        let forward = self.reachable(self.start(), |g, u| g.out[u.0].keys().copied().collect());
        let backward = self.reachable(finish, |g, u| g.incoming[u.0].iter().copied().collect());
        for id in self.state_ids() {
            if self.states[id.0].token.is_page() && !(forward.contains(&id) && backward.contains(&id)) {
                return fail(format!("state {} is not on a path from S to F", self.states[id.0]));
            }
        }
        Ok(())
    }

    fn reachable(&self, from: StateId, next: impl Fn(&Self, StateId) -> Vec<StateId>) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for v in next(self, u) {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Whether some page state can reach itself.
    pub fn has_cycle(&self) -> bool {
        // Kahn's algorithm over the whole graph.
        let mut indeg: Vec<usize> = self.incoming.iter().map(BTreeSet::len).collect();
        let mut queue: VecDeque<usize> = (0..indeg.len()).filter(|&i| indeg[i] == 0).collect();
        let mut removed = 0;
        while let Some(u) = queue.pop_front() {
            removed += 1;
            for v in self.out[u].keys() {
                indeg[v.0] -= 1;
                if indeg[v.0] == 0 {
                    queue.push_back(v.0);
                }
            }
        }
        removed != self.states.len()
    }
}

/// Assembles a [`ModelGraph`] by hand, e.g. to transcribe a published
/// example or to generate random test models.
#[derive(Debug, Clone, Default)]
pub struct ModelGraphBuilder {
    states: Vec<(State, u64)>,
    edges: Vec<(State, State, u64)>,
    total_views: Option<u64>,
    params: BuildParams,
}

impl ModelGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(mut self, token: Token, clone_index: u32, visits: u64) -> Self {
        self.states.push((State::new(token, clone_index), visits));
        self
    }

    pub fn transition(mut self, from: State, to: State, weight: u64) -> Self {
        self.edges.push((from, to, weight));
        self
    }

    /// Overrides the total page-view count, which otherwise is the sum of
    /// all page-state visits.
    pub fn total_views(mut self, total: u64) -> Self {
        self.total_views = Some(total);
        self
    }

    pub fn params(mut self, params: BuildParams) -> Self {
        self.params = params;
        self
    }

    pub fn build(self) -> Result<ModelGraph> {
        let mut g = ModelGraph::empty(self.params);
        g.order = self.params.target_order.max(1);
        for (state, visits) in self.states {
            g.push_state(state, visits)?;
        }
        for t in [Token::Start, Token::Finish] {
            if g.id_of(State::original(t)).is_none() {
                g.push_state(State::original(t), 0)?;
            }
        }
        let mut out: Vec<BTreeMap<StateId, u64>> = vec![BTreeMap::new(); g.state_count()];
        for (from, to, w) in self.edges {
            let f = g.id_of(from).ok_or_else(|| Error::Contract(format!("unknown state {from}")))?;
            let t = g.id_of(to).ok_or_else(|| Error::Contract(format!("unknown state {to}")))?;
            if from.token == Token::Finish {
                return Err(Error::Contract("F cannot have outgoing transitions".into()));
            }
            if to.token == Token::Start {
                return Err(Error::Contract("S cannot be a transition target".into()));
            }
            if w > 0 {
                *out[f.0].entry(t).or_insert(0) += w;
            }
        }
        for (i, edges) in out.into_iter().enumerate() {
            g.set_out_edges(StateId(i), edges);
        }
        for id in g.state_ids().collect::<Vec<_>>() {
            if let Token::Page(p) = g.states[id.0].token {
                *g.page_views.entry(p).or_insert(0) += g.visits[id.0];
            }
        }
        g.total_views = self.total_views.unwrap_or_else(|| g.page_views.values().sum());
        Ok(g.canonicalize())
    }
}
