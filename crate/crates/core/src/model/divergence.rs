//! Divergence between a state's transition probabilities and higher-order
//! conditional estimates, and the clustering of in-paths that decides how a
//! state is cloned.

use std::collections::{BTreeMap, BTreeSet};

use super::{GammaMode, State};
use crate::scalar::{self, Scalar};
use crate::token::Token;

/// One history that lands on a state, with what followed it.
///
/// `path` is the full context including the state's own page, e.g. `(1,2)`
/// for an order-2 in-path of page 2; it may begin with `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InPath {
    pub path: Vec<Token>,
    /// `#(path)`.
    pub count: u64,
    /// `(t, #(path · t))` for every observed continuation, ascending by `t`.
    pub next: Vec<(Token, u64)>,
}

impl InPath {
    pub fn next_count(&self, t: Token) -> u64 {
        self.next.binary_search_by_key(&t, |&(tok, _)| tok).map(|i| self.next[i].1).unwrap_or(0)
    }

    fn probability<T: Scalar>(&self, t: Token) -> T {
        T::ratio(u128::from(self.next_count(t)), u128::from(self.count))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRow<T> {
    pub in_path: Vec<Token>,
    pub target: Token,
    /// Conditional estimate `#(in_path · target) / #(in_path)`.
    pub higher: T,
    /// The state's current transition probability to `target`.
    pub current: T,
    pub diff: T,
}

/// Row-by-row comparison of a state against one order of history.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceTable<T> {
    pub state: State,
    pub order: usize,
    pub rows: Vec<DivergenceRow<T>>,
}

impl<T: Scalar> DivergenceTable<T> {
    /// Rows for every in-path against every out-target of the state,
    /// including targets an in-path never leads to.
    pub(crate) fn new(
        state: State,
        order: usize,
        paths: &[InPath],
        current: &BTreeMap<Token, u64>,
        visits: u64,
    ) -> Self {
        let mut rows = Vec::new();
        for p in paths.iter().filter(|p| p.count > 0) {
            for (&target, &w) in current {
                let higher: T = p.probability(target);
                let cur = T::ratio(u128::from(w), u128::from(visits.max(1)));
                let diff = (higher.clone() - cur.clone()).abs();
                rows.push(DivergenceRow { in_path: p.path.clone(), target, higher, current: cur, diff });
            }
        }
        DivergenceTable { state, order, rows }
    }

    pub fn max(&self) -> T {
        scalar::max(self.rows.iter().map(|r| r.diff.clone()))
    }

    /// Mean difference, every row weighted equally; zero without rows.
    pub fn avg(&self) -> T {
        if self.rows.is_empty() {
            return T::zero();
        }
        scalar::sum(self.rows.iter().map(|r| r.diff.clone())) / T::from_count(self.rows.len() as u64)
    }

    pub fn summary(&self, mode: GammaMode) -> T {
        match mode {
            GammaMode::Max => self.max(),
            GammaMode::Avg => self.avg(),
        }
    }

    pub fn in_path_count(&self) -> usize {
        self.rows.iter().map(|r| &r.in_path).collect::<BTreeSet<_>>().len()
    }
}

/// Summary of a group: pooled vector against each member over the union of
/// the members' targets.
fn group_summary<T: Scalar>(members: &[&InPath], mode: GammaMode) -> T {
    let total: u64 = members.iter().map(|p| p.count).sum();
    let mut pooled: BTreeMap<Token, u64> = BTreeMap::new();
    for p in members {
        for &(t, c) in &p.next {
            *pooled.entry(t).or_insert(0) += c;
        }
    }
    let mut diffs = Vec::with_capacity(members.len() * pooled.len());
    for p in members {
        for (&t, &c) in &pooled {
            let pool = T::ratio(u128::from(c), u128::from(total));
            diffs.push((pool - p.probability::<T>(t)).abs());
        }
    }
    match mode {
        GammaMode::Max => scalar::max(diffs),
        GammaMode::Avg if diffs.is_empty() => T::zero(),
        GammaMode::Avg => {
            let n = diffs.len() as u64;
            scalar::sum(diffs) / T::from_count(n)
        }
    }
}

fn same_vector(a: &InPath, b: &InPath) -> bool {
    let targets: BTreeSet<Token> = a.next.iter().chain(&b.next).map(|&(t, _)| t).collect();
    targets
        .into_iter()
        .all(|t| u128::from(a.next_count(t)) * u128::from(b.count) == u128::from(b.next_count(t)) * u128::from(a.count))
}

/// Orders groups by descending pooled count, then by their smallest path.
fn sort_groups(groups: &mut [Vec<usize>], paths: &[InPath]) {
    for g in groups.iter_mut() {
        g.sort_by(|&a, &b| paths[a].path.cmp(&paths[b].path));
    }
    let key = |g: &Vec<usize>| {
        let count: u64 = g.iter().map(|&i| paths[i].count).sum();
        (std::cmp::Reverse(count), paths[g[0]].path.clone())
    };
    groups.sort_by_cached_key(key);
}

/// Partitions in-paths into groups that may share one state.
///
/// With `gamma = 0` only in-paths whose conditional vectors are exactly
/// equal share a group. Otherwise groups are merged greedily: starting from
/// singletons, the pair whose union has the smallest γ-mode summary is
/// merged while that summary stays within `gamma`.
///
/// Groups come back ordered by descending total count (ties by smallest
/// path); the first group is the one that keeps the original state.
pub fn cluster_inpaths<T: Scalar>(paths: &[InPath], gamma: f64, mode: GammaMode) -> Vec<Vec<Vec<Token>>> {
    let mut groups: Vec<Vec<usize>> = (0..paths.len()).map(|i| vec![i]).collect();
    sort_groups(&mut groups, paths);

    if gamma <= 0.0 {
        let mut exact: Vec<Vec<usize>> = Vec::new();
        for g in groups {
            let i = g[0];
            match exact.iter_mut().find(|e| same_vector(&paths[e[0]], &paths[i])) {
                Some(e) => e.push(i),
                None => exact.push(vec![i]),
            }
        }
        groups = exact;
    } else {
        let limit = T::from_f64(gamma);
        loop {
            let mut best: Option<(T, usize, usize)> = None;
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    let members: Vec<&InPath> = groups[i].iter().chain(&groups[j]).map(|&k| &paths[k]).collect();
                    let cost: T = group_summary(&members, mode);
                    if cost <= limit && best.as_ref().map_or(true, |(b, _, _)| cost < *b) {
                        best = Some((cost, i, j));
                    }
                }
            }
            let Some((_, i, j)) = best else { break };
            let moved = groups.remove(j);
            groups[i].extend(moved);
            sort_groups(&mut groups, paths);
        }
    }

    sort_groups(&mut groups, paths);
    groups.into_iter().map(|g| g.into_iter().map(|i| paths[i].path.clone()).collect()).collect()
}
