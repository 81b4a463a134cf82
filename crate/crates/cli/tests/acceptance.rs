//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no test harness) so every line is printed even
//! when all criteria pass; the process exits non-zero if any criterion
//! fails. Tolerances are pinned next to each check.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlmc_core::eval::{predict_next, PredictionOutcome};
use vlmc_core::ingest::Session;
use vlmc_core::{
    build_first_order, build_vlmc, extract_trails, footrule, overlap, top_m_trails, BuildParams, Exact, GammaMode,
    LengthMode, ModelGraph, ModelGraphBuilder, PageId, RankedList, Scalar, State, Token, TrailQuery, VlmcBuilder,
};

type Outcome = Result<String, String>;

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn near(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    check((got - want).abs() <= tol, format!("{what} = {got:.4}, expected {want} ± {tol}"))
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

/// Pages are labelled as in the hand-worked examples, shifted past the
/// reserved ids.
fn pg(label: u32) -> Token {
    Token::Page(PageId::new(label + 100).unwrap())
}

/// `"2,3,4,F"` → tokens.
fn trail(text: &str) -> Vec<Token> {
    text.split(',').map(|t| if t == "F" { Token::Finish } else { pg(t.parse().unwrap()) }).collect()
}

fn list(m: usize, items: &[&str]) -> RankedList {
    RankedList::from_order(m, items.iter().map(|t| trail(t)).collect()).unwrap()
}

fn sessions_of(groups: &[(&[u32], usize)]) -> Vec<Session> {
    let mut out = Vec::new();
    for &(labels, times) in groups {
        for _ in 0..times {
            let pages = labels.iter().map(|&l| PageId::new(l + 100).unwrap()).collect();
            out.push(Session::new(pages, out.len() as f64).unwrap());
        }
    }
    out
}

/// Fourteen sessions through page 2 from pages 1, 4 and 6.
fn fixture_a() -> Vec<Session> {
    sessions_of(&[(&[1, 2, 3], 3), (&[1, 2, 5], 1), (&[4, 2, 3], 4), (&[4, 2, 5], 2), (&[6, 2, 3], 1), (&[6, 2, 5], 3)])
}

fn ratio(n: u128, d: u128) -> Exact {
    Exact::ratio(n, d)
}

fn params(order: usize, gamma: f64, mode: GammaMode) -> BuildParams {
    BuildParams { target_order: order, gamma, gamma_mode: mode, num_visits: 0 }
}

// ------------------------------------------------------------------ 1

fn divergence_and_clone() -> Outcome {
    let started = Instant::now();
    let mut b = VlmcBuilder::new(&fixture_a(), params(2, 0.0, GammaMode::Avg)).map_err(|e| e.to_string())?;
    let two = b.graph().id_of(State::original(pg(2))).unwrap();
    let before = b.divergence::<Exact>(two, 2).map_err(|e| e.to_string())?;
    let (max1, avg1) = (before.max().to_f64(), before.avg().to_f64());

    let partition = vec![vec![trail("1,2"), trail("4,2")], vec![trail("6,2")]];
    let states = b.clone_state(two, 2, &partition).map_err(|e| e.to_string())?;
    let g = b.graph();
    let p = |from: State, to: u32| -> Exact {
        g.transition_probability(g.id_of(from).unwrap(), g.id_of(State::original(pg(to))).unwrap())
    };
    let (c0, c1) = (State::new(pg(2), 0), State::new(pg(2), 1));
    let clone_probs = [p(c0, 3), p(c0, 5), p(c1, 3), p(c1, 5)];

    let mut rows = Vec::new();
    for s in &states {
        rows.extend(b.divergence::<Exact>(*s, 2).map_err(|e| e.to_string())?.rows);
    }
    let max2 = rows.iter().map(|r| r.diff.clone()).max().unwrap();
    let avg2 =
        rows.iter().map(|r| r.diff.clone()).fold(Exact::zero(), |a, d| a + d) / Exact::from_count(rows.len() as u64);
    let elapsed = started.elapsed();

    near(max1, 0.32, 0.005, "first-order max")?;
    near(avg1, 0.20, 0.005, "first-order avg")?;
    check(
        clone_probs == [ratio(7, 10), ratio(3, 10), ratio(1, 4), ratio(3, 4)],
        format!("clone probabilities {clone_probs:?}, expected 7/10, 3/10, 1/4, 3/4"),
    )?;
    let residual = format!("residual max {max2} ({:.4}), avg {avg2} ({:.4})", max2.to_f64(), avg2.to_f64());
    near(max2.to_f64(), 0.20, 0.005, "residual max").map_err(|e| format!("{e}; {residual}"))?;
    near(avg2.to_f64(), 0.06, 0.005, "residual avg").map_err(|e| format!("{e}; {residual}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("max {max1:.4}, avg {avg1:.4}; clones 7/10 3/10 1/4 3/4; {residual}"))
}

// ------------------------------------------------------------------ 2

fn avg_gamma_thresholds() -> Outcome {
    let clones = |gamma| -> Result<usize, String> {
        let g = build_vlmc::<Exact>(&fixture_a(), params(2, gamma, GammaMode::Avg)).map_err(|e| e.to_string())?;
        Ok(g.clone_count(PageId::new(102).unwrap()))
    };
    let (at5, at7) = (clones(0.05)?, clones(0.07)?);
    let detail = format!("gamma_a 0.05 -> {at5} clone(s), 0.07 -> {at7} clone(s)");
    check(at7 == 1, format!("{detail}; expected one clone at 0.07"))?;
    check(at5 == 2, format!("{detail}; expected two clones at 0.05"))?;
    Ok(detail)
}

// ------------------------------------------------------------------ 3

fn list_metrics() -> Outcome {
    let f = |a: &RankedList, b: &RankedList| footrule::<Exact, _, _>(a, b).unwrap();
    let o = |a: &RankedList, b: &RankedList| overlap::<Exact, _, _>(a, b).unwrap();

    // Trigrams, top 5.
    let ref3 = list(5, &["2,3,4", "4,6,F", "1,3,5", "3,4,F", "3,5,F"]);
    let first3 = list(5, &["4,6,F", "3,4,F", "2,3,4", "2,3,5", "6,7,F"]);
    near(f(&ref3, &first3).to_f64(), 0.60, 0.005, "3-gram first-order footrule")?;
    near(o(&ref3, &first3).to_f64(), 0.60, 0.005, "3-gram first-order overlap")?;
    check(f(&ref3, &ref3).is_one() && o(&ref3, &ref3).is_one(), "3-gram second-order list should match exactly")?;

    // Four-grams, top 5.
    let ref4 = list(5, &["1,3,5,F", "2,3,4,F", "5,6,7,F", "2,3,4,6", "3,4,6,F"]);
    let first4 = list(5, &["2,3,4,F", "3,5,6,F", "3,4,6,F", "4,6,7,F", "2,3,5,6"]);
    let second4 = list(5, &["2,3,4,F", "1,3,5,F", "5,6,7,F", "3,4,6,F", "2,3,4,6"]);
    let f4 = f(&ref4, &first4);
    check(f4 == Exact::one() - ratio(20, 30), format!("4-gram first-order footrule {f4}, expected 1 - 20/30"))?;
    near(o(&ref4, &first4).to_f64(), 0.40, 0.005, "4-gram first-order overlap")?;
    near(f(&ref4, &second4).to_f64(), 0.87, 0.005, "4-gram second-order footrule")?;
    near(o(&ref4, &second4).to_f64(), 1.00, 0.005, "4-gram second-order overlap")?;

    // Five-grams, top 3.
    let ref5 = list(3, &["2,3,4,6,F", "1,2,3,4,F", "2,3,5,6,F"]);
    let by_order = [
        (list(3, &["2,3,5,6,F", "2,3,4,6,F", "3,5,6,7,F"]), 0.50, 0.67),
        (list(3, &["2,3,4,6,F", "3,5,6,7,F", "1,2,3,4,F"]), 0.67, 0.67),
        (list(3, &["2,3,4,6,F", "2,3,5,6,F", "1,2,3,4,F"]), 0.83, 1.00),
    ];
    for (i, (l, fr, ov)) in by_order.iter().enumerate() {
        near(f(&ref5, l).to_f64(), *fr, 0.005, &format!("5-gram order-{} footrule", i + 1))?;
        near(o(&ref5, l).to_f64(), *ov, 0.005, &format!("5-gram order-{} overlap", i + 1))?;
    }

    let disjoint = list(5, &["7,8,F", "8,9,F", "9,7,F", "7,9,F", "9,8,F"]);
    check(f(&ref3, &disjoint).is_zero(), "disjoint lists should have footrule 0")?;

    // The printed first-order 4-gram footrule is 0.34; 1 - 20/30 rounds to 0.33.
    near(f4.to_f64(), 0.34, 0.005, "4-gram first-order footrule against printed 0.34")?;
    Ok(format!(
        "3-gram 0.60/0.60; 4-gram {:.4}/0.40 and 0.87/1.00; 5-gram 0.50/0.67, 0.67/0.67, 0.83/1.00",
        f4.to_f64()
    ))
}

// ------------------------------------------------------------------ 4

fn clone_marginalisation() -> Outcome {
    let s = |l: u32, c: u32| State::new(pg(l), c);
    let fin = State::original(Token::Finish);
    let g = ModelGraphBuilder::new()
        .state(pg(1), 0, 11)
        .state(pg(3), 0, 9)
        .state(pg(3), 1, 12)
        .state(pg(4), 0, 22)
        .state(pg(5), 0, 14)
        .transition(s(1, 0), s(3, 0), 9)
        .transition(s(1, 0), fin, 2)
        .transition(s(3, 0), s(4, 0), 2)
        .transition(s(3, 0), s(5, 0), 7)
        .transition(s(3, 1), s(4, 0), 8)
        .transition(s(3, 1), s(5, 0), 2)
        .transition(s(3, 1), fin, 2)
        .total_views(101)
        .build()
        .map_err(|e| e.to_string())?;
    let p34: f64 = g.trail_probability(&trail("3,4"));
    let p135: f64 = g.trail_probability(&trail("1,3,5"));
    near(p34, 0.099, 0.0005, "trail (3,4)")?;
    near(p135, 0.069, 0.0005, "trail (1,3,5)")?;
    let exact: Exact = g.trail_probability(&trail("3,4"));
    check(exact == ratio(9, 101) * ratio(2, 9) + ratio(12, 101) * ratio(8, 12), "trail (3,4) should sum both clones")?;
    Ok(format!("(3,4) = {p34:.4}, (1,3,5) = {p135:.4}"))
}

// ------------------------------------------------------------------ 5

/// A model given as weighted edges between `(page, clone)` states; `0`
/// stands for `F`.
fn hand_model(edges: &[((u32, u32), (u32, u32), u64)]) -> ModelGraph {
    let state = |(l, c): (u32, u32)| if l == 0 { State::original(Token::Finish) } else { State::new(pg(l), c) };
    let mut b = ModelGraphBuilder::new();
    let mut seen = std::collections::BTreeSet::new();
    for &(u, v, w) in edges {
        for s in [state(u), state(v)] {
            if s.token != Token::Finish && seen.insert(s) {
                b = b.state(s.token, s.clone_index, 1);
            }
        }
        b = b.transition(state(u), state(v), w);
    }
    b.build().unwrap()
}

fn outcomes(model: &ModelGraph, tests: &[&str]) -> Vec<PredictionOutcome<Exact>> {
    tests
        .iter()
        .map(|t| {
            let tokens = trail(t);
            let (target, prefix) = tokens.split_last().unwrap();
            PredictionOutcome::new(prefix.to_vec(), *target, predict_next::<Exact>(model, prefix).unwrap())
        })
        .collect()
}

fn prediction_metrics() -> Outcome {
    let tests = ["1,3,5", "2,3,5,6", "1,3,5,6,7"];
    // First order: one state per page; the reachable sets after 3, 5 and 6
    // carry the quoted weights.
    let first = hand_model(&[
        ((1, 0), (3, 0), 1),
        ((2, 0), (3, 0), 1),
        ((3, 0), (4, 0), 10),
        ((3, 0), (5, 0), 9),
        ((3, 0), (0, 0), 2),
        ((5, 0), (6, 0), 7),
        ((5, 0), (0, 0), 7),
        ((6, 0), (0, 0), 11),
        ((6, 0), (7, 0), 5),
    ]);
    // Second order: pages 3, 5 and 6 are cloned by where they were entered from.
    let second = hand_model(&[
        ((1, 0), (3, 0), 1),
        ((2, 0), (3, 1), 1),
        ((3, 0), (5, 0), 7),
        ((3, 0), (4, 0), 2),
        ((3, 1), (5, 1), 1),
        ((5, 1), (0, 0), 7),
        ((5, 1), (6, 1), 2),
        ((5, 0), (6, 0), 1),
        ((6, 0), (7, 0), 4),
        ((6, 0), (0, 0), 3),
    ]);
    let mut details = Vec::new();
    for (model, want_ae, want_mae) in [(&first, [1, 0, 1], 0.667), (&second, [0, 1, 0], 0.333)] {
        let outs = outcomes(model, &tests);
        let ae: Vec<usize> = outs.iter().map(|o| o.ae).collect();
        check(ae == want_ae, format!("AE {ae:?}, expected {want_ae:?}"))?;
        let mae = vlmc_core::eval::mae(&outs).map_err(|e| e.to_string())?;
        near(mae, want_mae, 0.001, "MAE")?;
        details.push(format!("AE {ae:?} MAE {mae:.3}"));
    }
    // The tie between 6 and F after (2,3,5) shares rank 1.
    let tied = &outcomes(&first, &tests)[1];
    check(tied.rank == 1 && tied.reachable.len() == 2, "tied candidates should share rank 1")?;
    Ok(details.join("; "))
}

// ------------------------------------------------------------------ 6

/// Brute-force counts of every `n`-token window of `S session F`.
fn brute_ngrams(sessions: &[Session], n: usize) -> HashMap<Vec<Token>, u64> {
    let mut counts = HashMap::new();
    for s in sessions {
        let mut a = vec![Token::Start];
        a.extend(s.pages().iter().map(|&p| Token::Page(p)));
        a.push(Token::Finish);
        for w in a.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn random_sessions(rng: &mut ChaCha8Rng, pages: u32, max_sessions: usize, max_len: usize) -> Vec<Session> {
    let n = rng.gen_range(1..=max_sessions);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=max_len);
            let p = (0..len).map(|_| PageId::new(rng.gen_range(0..pages) + 100).unwrap()).collect();
            Session::new(p, i as f64).unwrap()
        })
        .collect()
}

fn exact_representation() -> Outcome {
    const SETS: usize = 200;
    const M: usize = 10;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut degenerate = 0;
    for set in 0..SETS {
        let sessions = random_sessions(&mut rng, 10, 50, 6);
        for n in 1..=3 {
            let model = build_vlmc::<Exact>(&sessions, params(n, 0.0, GammaMode::Max)).map_err(|e| e.to_string())?;
            let grams: Vec<(Vec<Token>, u64)> =
                brute_ngrams(&sessions, n + 1).into_iter().filter(|(g, _)| g[0] != Token::Start).collect();
            let reference = RankedList::rank(M, grams);
            let total: u64 = sessions.iter().map(|s| s.len() as u64).sum();
            // Every reference trail has probability at least 1/total.
            let q = TrailQuery { lambda: 0.5 / total as f64, mtl: n + 1, length_mode: LengthMode::Strict, m: M };
            let found = extract_trails::<Exact>(&model, &q).map_err(|e| e.to_string())?;
            let assessed = top_m_trails(found, M);
            if reference.is_empty() {
                // Every session is shorter than n: no trail may appear either.
                check(assessed.is_empty(), format!("set {set}, order {n}: trails without any {}-gram", n + 1))?;
                degenerate += 1;
                continue;
            }
            let fr: Exact = footrule(&reference, &assessed).map_err(|e| e.to_string())?;
            let ov: Exact = overlap(&reference, &assessed).map_err(|e| e.to_string())?;
            check(fr.is_one() && ov.is_one(), format!("set {set}, order {n}: footrule {fr}, overlap {ov}"))?;
        }
    }
    let elapsed = started.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{SETS} session sets x orders 1-3 all 1.0 ({degenerate} cells with no long enough session) in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ------------------------------------------------------------------ 7

struct HandModel {
    graph: ModelGraph,
    visits: Vec<(State, u64)>,
    edges: BTreeMap<State, Vec<(State, u64)>>,
}

fn random_model(rng: &mut ChaCha8Rng) -> HandModel {
    let budget = rng.gen_range(1..=6);
    let mut states = Vec::new();
    let mut label = 0;
    while states.len() < budget {
        let clones = if rng.gen_bool(0.3) { 2 } else { 1 };
        for c in 0..clones {
            if states.len() < budget {
                states.push(State::new(pg(label), c));
            }
        }
        label += 1;
    }
    let fin = State::original(Token::Finish);
    let visits: Vec<(State, u64)> = states.iter().map(|&s| (s, rng.gen_range(0..6))).collect();
    let mut edges: BTreeMap<State, Vec<(State, u64)>> = BTreeMap::new();
    for &u in &states {
        for &v in states.iter().chain([&fin]) {
            if rng.gen_bool(0.45) {
                edges.entry(u).or_default().push((v, rng.gen_range(1..5)));
            }
        }
    }
    let mut b = ModelGraphBuilder::new();
    for &(s, v) in &visits {
        b = b.state(s.token, s.clone_index, v);
    }
    for (&u, out) in &edges {
        for &(v, w) in out {
            b = b.transition(u, v, w);
        }
    }
    HandModel { graph: b.build().unwrap(), visits, edges }
}

/// Every token sequence of at most `mtl` tokens with its probability summed
/// over all state paths spelling it.
fn enumerate(m: &HandModel, mtl: usize) -> BTreeMap<Vec<Token>, Exact> {
    fn go(m: &HandModel, s: State, toks: &mut Vec<Token>, p: Exact, mtl: usize, out: &mut BTreeMap<Vec<Token>, Exact>) {
        *out.entry(toks.clone()).or_insert_with(Exact::zero) += p.clone();
        if toks.len() == mtl {
            return;
        }
        let Some(edges) = m.edges.get(&s) else { return };
        let sum: u64 = edges.iter().map(|e| e.1).sum();
        for &(v, w) in edges {
            toks.push(v.token);
            go(m, v, toks, p.clone() * ratio(w.into(), sum.into()), mtl, out);
            toks.pop();
        }
    }
    let total: u64 = m.visits.iter().map(|v| v.1).sum();
    let mut out = BTreeMap::new();
    for &(s, v) in &m.visits {
        if v > 0 {
            go(m, s, &mut vec![s.token], ratio(v.into(), total.into()), mtl, &mut out);
        }
    }
    out
}

fn bfs_oracle() -> Outcome {
    const MODELS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for i in 0..MODELS {
        let m = random_model(&mut rng);
        let lambda = [0.001, 0.01, 0.05, 0.2][rng.gen_range(0..4)];
        let mtl = rng.gen_range(1..=5);
        let mode = if rng.gen_bool(0.5) { LengthMode::Strict } else { LengthMode::Nonstrict };
        let q = TrailQuery { lambda, mtl, length_mode: mode, m: 10 };

        let cut = Exact::from_f64(lambda);
        let above: BTreeMap<Vec<Token>, Exact> = enumerate(&m, mtl).into_iter().filter(|(_, p)| *p > cut).collect();
        let expected: BTreeMap<Vec<Token>, Exact> = match mode {
            LengthMode::Strict => above.into_iter().filter(|(t, _)| t.len() == mtl).collect(),
            LengthMode::Nonstrict => {
                let keys: Vec<Vec<Token>> = above.keys().cloned().collect();
                above.into_iter().filter(|(t, _)| !keys.iter().any(|k| k.len() > t.len() && k.starts_with(t))).collect()
            }
        };

        let got = extract_trails::<Exact>(&m.graph, &q).map_err(|e| format!("model {i}: {e}"))?;
        let got_keys: Vec<&Vec<Token>> = got.iter().map(|t| &t.tokens).collect();
        check(got_keys == expected.keys().collect::<Vec<_>>(), format!("model {i}: trail sets differ"))?;
        for t in &got {
            check(t.probability == expected[&t.tokens], format!("model {i}: probability of {:?}", t.tokens))?;
        }
        for t in extract_trails::<f64>(&m.graph, &q).map_err(|e| e.to_string())? {
            if let Some(p) = expected.get(&t.tokens) {
                check((t.probability - p.to_f64()).abs() <= 1e-12, format!("model {i}: float {:?}", t.tokens))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{MODELS} models, {compared} float trails within 1e-12"))
}

// ------------------------------------------------------------------ 8

fn conservation() -> Outcome {
    const SETS: usize = 150;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut models = 0;
    for set in 0..SETS {
        let sessions = random_sessions(&mut rng, 6, 30, 6);
        let first = build_first_order(&sessions).map_err(|e| e.to_string())?;
        let p = BuildParams {
            target_order: rng.gen_range(1..=3),
            gamma: [0.0, 0.02, 0.1, 0.3][rng.gen_range(0..4)],
            gamma_mode: if rng.gen_bool(0.5) { GammaMode::Max } else { GammaMode::Avg },
            num_visits: [0, 4][rng.gen_range(0..2)],
        };
        let g = build_vlmc::<f64>(&sessions, p).map_err(|e| e.to_string())?;
        let tag = format!("set {set} ({p:?})");
        g.check_invariants().map_err(|e| format!("{tag}: {e}"))?;
        for id in g.state_ids() {
            if g.state(id).token == Token::Finish || g.out_weight(id) == 0 {
                continue;
            }
            let sum: f64 = g.out_edges(id).map(|(v, _)| g.transition_probability::<f64>(id, v)).sum();
            check((sum - 1.0).abs() <= 1e-9, format!("{tag}: {} sums to {sum}", g.state(id)))?;
        }
        for page in first.pages() {
            let views: u64 = g.states_of(Token::Page(page)).iter().map(|&s| g.visits(s)).sum();
            check(
                views == first.page_views(page),
                format!("{tag}: clone visits of {page} do not partition its views"),
            )?;
        }
        let mut targets: Vec<Token> = first.pages().map(Token::Page).collect();
        targets.push(Token::Finish);
        for a in first.pages() {
            for &b in &targets {
                let t = [Token::Page(a), b];
                let (hi, lo): (f64, f64) = (g.trail_probability(&t), first.trail_probability(&t));
                check((hi - lo).abs() <= 1e-9, format!("{tag}: trail {t:?} {hi} vs {lo}"))?;
            }
        }
        models += 1;
    }
    Ok(format!("{models} models: normalisation, visit partition, length-2 trails"))
}

// ------------------------------------------------------------------ 9

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_vlmc"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), format!("vlmc {args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut log = String::new();
    for host in 0..40 {
        let mut t = rng.gen_range(0..100_000);
        for _ in 0..rng.gen_range(1..8) {
            t += rng.gen_range(1..600);
            log.push_str(&format!("10.0.0.{host},{t},/page{}.html,200\n", rng.gen_range(0..8)));
        }
    }
    let input = tmp.path().join("access.log");
    std::fs::write(&input, log).map_err(|e| e.to_string())?;
    let input = input.to_str().unwrap();

    let mut files = 0;
    for (cmd, extra) in [
        ("build", vec!["--order", "3", "--gamma", "0,0.05", "--num-visits", "0"]),
        ("predict", vec!["--order", "3", "--gamma", "0,0.05", "--num-visits", "0", "--folds", "4"]),
    ] {
        let mut args = vec![cmd, "--input", input];
        args.extend(extra);
        let out = tmp.path().join(cmd);
        run_cli(&args, &out)?;
        let ba = dir_bytes(&out);
        std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        run_cli(&args, &out)?;
        let bb = dir_bytes(&out);
        check(!ba.is_empty() && ba == bb, format!("{cmd} outputs differ between runs"))?;
        files += ba.len();
    }
    Ok(format!("build and predict twice each, {files} files byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("divergence summary and one-clone refinement", divergence_and_clone),
        ("average-divergence thresholds 0.05 / 0.07", avg_gamma_thresholds),
        ("footrule and overlap of worked rankings", list_metrics),
        ("trail probability marginalises over clones", clone_marginalisation),
        ("prediction AE and MAE on three test trails", prediction_metrics),
        ("order-n models reproduce (n+1)-gram rankings", exact_representation),
        ("trail search matches exhaustive enumeration", bfs_oracle),
        ("probability conservation under cloning", conservation),
        ("repeated CLI runs are byte-identical", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
