//! Reference implementations used as test oracles. They favour the most
//! direct formulation (full DP tables, exhaustive enumeration) over speed and
//! share no code with the library beyond its public data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use kgresolve::blocking::{CandidatePair, Scope};
use kgresolve::grounding::HingePotential;
use kgresolve::kg::{EntityId, KnowledgeGraph, Origin};
use kgresolve::rules::{ArgKind, Predicate, RuleSet, RuleTemplate, Term};
use kgresolve::similarity::{canonical_pair, SimilarityProfile};
use rand::Rng;

pub fn chars(s: &str) -> Vec<char> {
    s.to_lowercase().chars().collect()
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

fn align(a: &[char], b: &[char], local: bool) -> i64 {
    let sub = |x: char, y: char| if x == y { 1 } else { -1 };
    let mut h = vec![vec![0i64; b.len() + 1]; a.len() + 1];
    if !local {
        for i in 0..=a.len() {
            h[i][0] = -(i as i64);
        }
        for j in 0..=b.len() {
            h[0][j] = -(j as i64);
        }
    }
    let mut best = 0;
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let mut v = (h[i - 1][j - 1] + sub(a[i - 1], b[j - 1]))
                .max(h[i - 1][j] - 1)
                .max(h[i][j - 1] - 1);
            if local {
                v = v.max(0);
                best = best.max(v);
            }
            h[i][j] = v;
        }
    }
    if local {
        best
    } else {
        h[a.len()][b.len()]
    }
}

pub fn needleman_wunsch(a: &[char], b: &[char]) -> i64 {
    align(a, b, false)
}

pub fn smith_waterman(a: &[char], b: &[char]) -> i64 {
    align(a, b, true)
}

fn by_longest(score: f64, a: &[char], b: &[char]) -> f64 {
    let n = a.len().max(b.len());
    if n == 0 {
        1.0
    } else {
        (score / n as f64).clamp(0.0, 1.0)
    }
}

/// Jaro similarity straight from its definition: matches are equal characters
/// within the window, t is half the out-of-order matches.
pub fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1) as i64;
    let mut taken = vec![false; b.len()];
    let mut a_hits = Vec::new();
    for (i, &c) in a.iter().enumerate() {
        if let Some(j) = (0..b.len())
            .find(|&j| !taken[j] && b[j] == c && (i as i64 - j as i64).abs() <= window)
        {
            taken[j] = true;
            a_hits.push(c);
        }
    }
    let b_hits: Vec<char> = (0..b.len()).filter(|&j| taken[j]).map(|j| b[j]).collect();
    let m = a_hits.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let t = (a_hits.iter().zip(&b_hits).filter(|(x, y)| x != y).count() / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

pub fn jaro_winkler(a: &[char], b: &[char]) -> f64 {
    let j = jaro(a, b);
    let l = a.iter().zip(b).take(4).take_while(|(x, y)| x == y).count() as f64;
    j + 0.1 * l * (1.0 - j)
}

pub fn trigram_jaccard(a: &[char], b: &[char]) -> f64 {
    let grams = |s: &[char]| -> BTreeSet<String> {
        let padded: Vec<char> = "^^".chars().chain(s.iter().copied()).chain("$$".chars()).collect();
        padded.windows(3).map(|w| w.iter().collect()).collect()
    };
    let (x, y) = (grams(a), grams(b));
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

pub fn monge_elkan(a: &[char], b: &[char]) -> f64 {
    let split = |s: &[char]| -> Vec<Vec<char>> {
        s.iter()
            .collect::<String>()
            .split_whitespace()
            .map(|t| t.chars().collect())
            .collect()
    };
    let (ta, tb) = (split(a), split(b));
    if ta.is_empty() || tb.is_empty() {
        return if ta.is_empty() && tb.is_empty() { 1.0 } else { 0.0 };
    }
    let directed = |x: &[Vec<char>], y: &[Vec<char>]| {
        x.iter()
            .map(|s| y.iter().map(|t| jaro_winkler(s, t)).fold(0.0, f64::max))
            .sum::<f64>()
            / x.len() as f64
    };
    (directed(&ta, &tb) + directed(&tb, &ta)) / 2.0
}

/// Oracle value for each metric, keyed by its library name.
pub fn metric_oracles(s: &str, t: &str) -> BTreeMap<&'static str, f64> {
    let (a, b) = (chars(s), chars(t));
    let lev = levenshtein(&a, &b) as f64;
    BTreeMap::from([
        ("levenshtein", by_longest(a.len().max(b.len()) as f64 - lev, &a, &b)),
        ("jaro", jaro(&a, &b)),
        ("jaro_winkler", jaro_winkler(&a, &b)),
        ("jaccard_char3", trigram_jaccard(&a, &b)),
        ("monge_elkan", monge_elkan(&a, &b)),
        ("smith_waterman", by_longest(smith_waterman(&a, &b) as f64, &a, &b)),
        ("needleman_wunsch", by_longest(needleman_wunsch(&a, &b) as f64, &a, &b)),
    ])
}

pub fn random_name(rng: &mut impl Rng) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', 'e', 'A', 'B', ' ', 'x', 'y'];
    let len = rng.gen_range(0..=12);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

/// max(0, Σ body − (n − 1) − head), evaluated literally.
pub fn lukasiewicz(body: &[f64], head: f64) -> f64 {
    let mut s = 0.0;
    for v in body {
        s += v;
    }
    let d = s - (body.len() as f64 - 1.0) - head;
    if d > 0.0 {
        d
    } else {
        0.0
    }
}

/// Entity partition of a decision graph by breadth-first search.
pub fn components(decisions: &BTreeSet<(EntityId, EntityId)>, entities: &[EntityId]) -> Vec<BTreeSet<EntityId>> {
    let mut adj: BTreeMap<&EntityId, Vec<&EntityId>> = entities.iter().map(|e| (e, Vec::new())).collect();
    for (a, b) in decisions {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen: BTreeSet<&EntityId> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start.clone()]);
        let mut queue = vec![start];
        while let Some(x) = queue.pop() {
            for &y in &adj[x] {
                if seen.insert(y) {
                    comp.insert(y.clone());
                    queue.push(y);
                }
            }
        }
        out.push(comp);
    }
    out.sort();
    out
}

/// Triangles of candidate pairs with exactly two positive decisions.
pub fn violated_triangles(pairs: &[(EntityId, EntityId)], decisions: &BTreeSet<(EntityId, EntityId)>) -> usize {
    let edges: BTreeSet<(EntityId, EntityId)> = pairs.iter().map(|(a, b)| canonical_pair(a, b)).collect();
    let mut nbrs: BTreeMap<&EntityId, BTreeSet<&EntityId>> = BTreeMap::new();
    for (a, b) in &edges {
        nbrs.entry(a).or_default().insert(b);
        nbrs.entry(b).or_default().insert(a);
    }
    let mut count = 0;
    for (a, b) in &edges {
        for c in nbrs[a].intersection(&nbrs[b]) {
            if *c <= b {
                continue;
            }
            let on = [canonical_pair(a, b), canonical_pair(b, c), canonical_pair(a, c)]
                .iter()
                .filter(|p| decisions.contains(*p))
                .count();
            count += usize::from(on == 2);
        }
    }
    count
}

pub fn candidate(a: &str, b: &str, sim: f64) -> CandidatePair {
    let (a, b) = canonical_pair(&EntityId::new(a), &EntityId::new(b));
    CandidatePair {
        a: a.clone(),
        b: b.clone(),
        profile: SimilarityProfile {
            pair: (a, b),
            scores: BTreeMap::new(),
            combined: sim,
        },
        scope: Scope::CrossGraph,
    }
}

pub const ORACLE_LABELS: [&str; 4] = ["artist", "album", "person", "city"];
pub const ORACLE_RELATIONS: [&str; 6] = ["releaseType", "releaseAlbum", "albumArtist", "albumGenre", "artistGenre", "livesIn"];

/// A small random graph with skolems, labels, relations, mutexes and candidates.
pub struct SmallInstance {
    pub graph: KnowledgeGraph,
    pub candidates: Vec<CandidatePair>,
}

pub fn small_instance(rng: &mut impl Rng, max_entities: usize) -> SmallInstance {
    let n = rng.gen_range(2..=max_entities);
    let mut g = KnowledgeGraph::new();
    let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    for id in &ids {
        let origin = if rng.gen_bool(0.2) { Origin::Skolem } else { Origin::GraphA };
        g.add_entity(EntityId::new(id), origin);
    }
    for id in &ids {
        if g.is_skolem(&EntityId::new(id)) {
            continue;
        }
        for l in ORACLE_LABELS {
            if rng.gen_bool(0.3) {
                let c = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.1..1.0) };
                g.add_label(EntityId::new(id), l, c, Origin::GraphA);
            }
        }
    }
    for _ in 0..rng.gen_range(0..=3 * n) {
        let s = &ids[rng.gen_range(0..n)];
        let o = &ids[rng.gen_range(0..n)];
        if s == o || g.is_skolem(&EntityId::new(s)) || g.is_skolem(&EntityId::new(o)) {
            continue;
        }
        let r = ORACLE_RELATIONS[rng.gen_range(0..ORACLE_RELATIONS.len())];
        let c = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.1..1.0) };
        g.add_triple(EntityId::new(s), r, EntityId::new(o), c, Origin::GraphA);
    }
    for (i, a) in ORACLE_LABELS.iter().enumerate() {
        for b in &ORACLE_LABELS[i + 1..] {
            if rng.gen_bool(0.3) {
                g.ontology.add_mutex_label(a, b).unwrap();
            }
        }
    }
    for (i, a) in ORACLE_RELATIONS.iter().enumerate() {
        for b in &ORACLE_RELATIONS[i + 1..] {
            if rng.gen_bool(0.1) {
                g.ontology.add_mutex_relation(a, b).unwrap();
            }
        }
    }
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.6) {
                let sim = if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.0..1.0) };
                candidates.push(candidate(&ids[i], &ids[j], sim));
            }
        }
    }
    SmallInstance { graph: g, candidates }
}

/// One literal after binding: predicate, negation and constant arguments.
type GroundLit = (Predicate, bool, Vec<String>);

/// What one complete binding of a rule folds to; the key identifies the
/// ground rule up to body order and argument order of symmetric predicates.
pub struct NaiveGround {
    pub key: (Vec<GroundLit>, GroundLit),
    pub potential: HingePotential,
    /// Unfolded literals: (is head, negated, value).
    pub literals: Vec<(bool, bool, Lv)>,
}

impl NaiveGround {
    /// Rule distance computed from the unfolded literal values at `x`.
    pub fn unfolded_distance(&self, x: &[f64]) -> f64 {
        let truth = |negated: bool, v: &Lv| {
            let v = match *v {
                Lv::Obs(v) => v,
                Lv::Atom(a) => x[a],
            };
            if negated {
                1.0 - v
            } else {
                v
            }
        };
        let body: Vec<f64> = self.literals.iter().filter(|l| !l.0).map(|l| truth(l.1, &l.2)).collect();
        let head = self.literals.iter().find(|l| l.0).map(|l| truth(l.1, &l.2)).expect("head");
        kgresolve::grounding::lukasiewicz_distance(&body, head).expect("truth values in [0,1]")
    }
}

/// Grounds every rule by enumerating all assignments of variables to
/// constants of the right kind (distinct variables of one kind take distinct
/// constants) and evaluating each literal directly.
pub fn naive_ground(rs: &RuleSet, g: &KnowledgeGraph, candidates: &[CandidatePair]) -> Vec<HingePotential> {
    naive_ground_records(rs, g, candidates).into_iter().map(|r| r.potential).collect()
}

pub fn naive_ground_records(rs: &RuleSet, g: &KnowledgeGraph, candidates: &[CandidatePair]) -> Vec<NaiveGround> {
    let mut entities: BTreeSet<String> = g.entities.keys().map(|e| e.as_str().to_string()).collect();
    for c in candidates {
        entities.insert(c.a.as_str().to_string());
        entities.insert(c.b.as_str().to_string());
    }
    let mut labels: BTreeSet<String> = g.labels.keys().map(|(_, l)| l.clone()).collect();
    for (a, b) in &g.ontology.mutex_labels {
        labels.insert(a.clone());
        labels.insert(b.clone());
    }
    let mut relations: BTreeSet<String> = g.triples.keys().map(|(_, r, _)| r.clone()).collect();
    for (a, b) in &g.ontology.mutex_relations {
        relations.insert(a.clone());
        relations.insert(b.clone());
    }
    let pairs: BTreeSet<(EntityId, EntityId)> = candidates.iter().map(|c| canonical_pair(&c.a, &c.b)).collect();
    let atom_of: HashMap<(EntityId, EntityId), usize> =
        pairs.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let sim_of: HashMap<(EntityId, EntityId), f64> = candidates
        .iter()
        .map(|c| (canonical_pair(&c.a, &c.b), c.profile.combined))
        .collect();
    let domain = |k: ArgKind| -> Vec<String> {
        let set = match k {
            ArgKind::Entity => &entities,
            ArgKind::Label => &labels,
            ArgKind::Relation => &relations,
        };
        set.iter().cloned().collect()
    };

    let mut out = Vec::new();
    for rule in &rs.rules {
        let mut vars: Vec<(String, ArgKind)> = Vec::new();
        for l in rule.body.iter().chain(std::iter::once(&rule.head)) {
            for (t, &k) in l.args.iter().zip(l.predicate.signature()) {
                if let Term::Var(v) = t {
                    if !vars.iter().any(|(w, _)| w == v) {
                        vars.push((v.clone(), k));
                    }
                }
            }
        }
        let domains: Vec<Vec<String>> = vars.iter().map(|(_, k)| domain(*k)).collect();
        let mut seen = BTreeSet::new();
        let mut binding: Vec<usize> = vec![0; vars.len()];
        if domains.iter().any(|d| d.is_empty()) {
            continue;
        }
        loop {
            let distinct = (0..vars.len()).all(|i| {
                (0..i).all(|j| vars[i].1 != vars[j].1 || domains[i][binding[i]] != domains[j][binding[j]])
            });
            if distinct {
                let values: HashMap<&str, &str> = vars
                    .iter()
                    .enumerate()
                    .map(|(i, (v, _))| (v.as_str(), domains[i][binding[i]].as_str()))
                    .collect();
                if let Some(ng) = fold_rule(rule, &values, g, &atom_of, &sim_of) {
                    if seen.insert(ng.key.clone()) {
                        out.push(ng);
                    }
                }
            }
            // Odometer over the cartesian product.
            let mut d = vars.len();
            let done = loop {
                if d == 0 {
                    break true;
                }
                d -= 1;
                binding[d] += 1;
                if binding[d] < domains[d].len() {
                    break false;
                }
                binding[d] = 0;
            };
            if done {
                break;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub enum Lv {
    Obs(f64),
    Atom(usize),
}

fn fold_rule(
    rule: &RuleTemplate,
    values: &HashMap<&str, &str>,
    g: &KnowledgeGraph,
    atom_of: &HashMap<(EntityId, EntityId), usize>,
    sim_of: &HashMap<(EntityId, EntityId), f64>,
) -> Option<NaiveGround> {
    let resolve = |t: &Term| -> String {
        match t {
            Term::Var(v) => values[v.as_str()].to_string(),
            Term::Const(c) => c.clone(),
        }
    };
    let eval = |p: Predicate, a: &[String]| -> Lv {
        let e = |i: usize| EntityId::new(a[i].as_str());
        let ind = |b: bool| Lv::Obs(if b { 1.0 } else { 0.0 });
        match p {
            Predicate::Same if a[0] == a[1] => Lv::Obs(1.0),
            Predicate::Same => match atom_of.get(&canonical_pair(&e(0), &e(1))) {
                Some(&i) => Lv::Atom(i),
                None => Lv::Obs(0.0),
            },
            Predicate::CandSame => ind(atom_of.contains_key(&canonical_pair(&e(0), &e(1)))),
            Predicate::Sim if a[0] == a[1] => Lv::Obs(1.0),
            // Every builtin rule guards Sim with CandSame on the same pair, so
            // the value off the candidate set never matters.
            Predicate::Sim => Lv::Obs(sim_of.get(&canonical_pair(&e(0), &e(1))).copied().unwrap_or(0.0)),
            Predicate::Label => Lv::Obs(g.labels.get(&(e(0), a[1].clone())).copied().unwrap_or(0.0)),
            Predicate::Rel => Lv::Obs(g.triples.get(&(e(0), a[2].clone(), e(1))).copied().unwrap_or(0.0)),
            Predicate::NewEnt => ind(g.is_skolem(&e(0))),
            Predicate::MutexLabel => ind(g.ontology.is_mutex_label(&a[0], &a[1])),
            Predicate::MutexRel => ind(g.ontology.is_mutex_relation(&a[0], &a[1])),
        }
    };
    let lits: Vec<(bool, &kgresolve::rules::Literal)> = rule
        .body
        .iter()
        .map(|l| (false, l))
        .chain(std::iter::once((true, &rule.head)))
        .collect();
    let mut constant = 1.0 - rule.body.len() as f64;
    let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
    let mut key_body = Vec::new();
    let mut key_head = None;
    let mut literals = Vec::new();
    for (is_head, l) in lits {
        let args: Vec<String> = l.args.iter().map(resolve).collect();
        let sign = if is_head { -1.0 } else { 1.0 };
        let value = eval(l.predicate, &args);
        literals.push((is_head, l.negated, value));
        match value {
            Lv::Obs(v) => constant += sign * if l.negated { 1.0 - v } else { v },
            Lv::Atom(i) => {
                let c = if l.negated {
                    constant += sign;
                    -sign
                } else {
                    sign
                };
                *coeffs.entry(i).or_insert(0.0) += c;
            }
        }
        let mut key_args = args;
        let symmetric = matches!(
            l.predicate,
            Predicate::Same | Predicate::CandSame | Predicate::Sim | Predicate::MutexLabel | Predicate::MutexRel
        );
        if symmetric && key_args[0] > key_args[1] {
            key_args.swap(0, 1);
        }
        let lit = (l.predicate, l.negated, key_args);
        if is_head {
            key_head = Some(lit);
        } else {
            key_body.push(lit);
        }
    }
    let coeffs: Vec<(usize, f64)> = coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect();
    let best = constant + coeffs.iter().map(|&(_, c)| c.max(0.0)).sum::<f64>();
    if coeffs.is_empty() || best <= 0.0 {
        return None;
    }
    key_body.sort_by(|x, y| format!("{x:?}").cmp(&format!("{y:?}")));
    Some(NaiveGround {
        key: (key_body, key_head.expect("head")),
        potential: HingePotential {
            rule: rule.name.as_str().into(),
            weight: rule.weight,
            coeffs,
            constant,
            exponent: rule.exponent,
        },
        literals,
    })
}

/// Potentials in a canonical order for comparison.
pub fn canonical(mut ps: Vec<HingePotential>) -> Vec<HingePotential> {
    ps.sort_by_cached_key(sort_key);
    ps
}

/// Ordering key that tolerates last-bit differences in folded constants.
pub fn sort_key(p: &HingePotential) -> (String, Vec<(usize, i64)>, i64) {
    let q = |v: f64| (v * 1e6).round() as i64;
    let coeffs = p.coeffs.iter().map(|&(a, c)| (a, q(c))).collect();
    (p.rule.to_string(), coeffs, q(p.constant))
}

/// Pairs the two sorted lists and reports the first mismatch.
pub fn same_potentials(got: &[HingePotential], want: &[HingePotential], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} potentials, oracle has {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        let ok = g.rule == w.rule
            && g.weight == w.weight
            && g.exponent == w.exponent
            && g.coeffs.len() == w.coeffs.len()
            && g.coeffs.iter().zip(&w.coeffs).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol)
            && (g.constant - w.constant).abs() <= tol;
        if !ok {
            return Err(format!("mismatch: {g:?} vs oracle {w:?}"));
        }
    }
    Ok(())
}

/// Number of ordered wedges (a; b, c) with b ≠ c and both pairs candidates.
pub fn wedge_count(candidates: &[CandidatePair]) -> usize {
    let mut degree: BTreeMap<&EntityId, usize> = BTreeMap::new();
    for c in candidates {
        *degree.entry(&c.a).or_default() += 1;
        *degree.entry(&c.b).or_default() += 1;
    }
    degree.values().map(|d| d * d.saturating_sub(1)).sum()
}
