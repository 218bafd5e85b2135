//! Grounding: rule templates instantiated over the candidate universe become
//! hinge-loss potentials under Łukasiewicz semantics.
//!
//! Co-reference atoms exist only for candidate pairs and are unordered, so a
//! `Same` literal over a non-candidate pair is the observed constant 0 and the
//! symmetry rule grounds to nothing. Observed literals are folded into each
//! potential's constant; only `Same` atoms carry coefficients.
//!
//! Enumeration is a nested-loop join. Positive body literals (other than
//! `Sim`) generate bindings, everything else is checked once its variables are
//! bound, and a partial binding is abandoned as soon as the evaluated literals
//! already guarantee the rule cannot be violated.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::blocking::CandidatePair;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::par;
use crate::rules::{ArgKind, Exponent, Literal, Predicate, RuleSet, RuleTemplate, Term};
use crate::similarity::{canonical_pair, similarity_profile, SimilarityCache, SimilarityConfig};

pub const DEFAULT_ATOM_CAP: usize = 5_000_000;

/// max(0, Σ body − (n − 1) − head).
pub fn lukasiewicz_distance(body: &[f64], head: f64) -> Result<f64> {
    for &v in body.iter().chain(std::iter::once(&head)) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(v));
        }
    }
    let n = body.len() as f64;
    Ok((body.iter().sum::<f64>() - (n - 1.0) - head).max(0.0))
}

/// Index of co-reference atoms, one per canonical candidate pair, in sorted order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomTable {
    pairs: Vec<(EntityId, EntityId)>,
    index: HashMap<(EntityId, EntityId), usize>,
}

impl AtomTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (EntityId, EntityId)>) -> Self {
        let mut pairs: Vec<(EntityId, EntityId)> =
            pairs.into_iter().map(|(a, b)| canonical_pair(&a, &b)).collect();
        pairs.sort();
        pairs.dedup();
        let index = pairs.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        AtomTable { pairs, index }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Atom index of the unordered pair, in either argument order.
    pub fn get(&self, a: &EntityId, b: &EntityId) -> Option<usize> {
        self.index.get(&canonical_pair(a, b)).copied()
    }

    pub fn pair(&self, atom: usize) -> &(EntityId, EntityId) {
        &self.pairs[atom]
    }

    pub fn pairs(&self) -> &[(EntityId, EntityId)] {
        &self.pairs
    }
}

/// w · max(0, Σ coeffs·x + constant)^p for one ground rule.
#[derive(Clone, Debug, PartialEq)]
pub struct HingePotential {
    pub rule: Arc<str>,
    pub weight: f64,
    /// Sorted by atom, no zero entries.
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
    pub exponent: Exponent,
}

impl HingePotential {
    pub fn affine(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(a, c)| c * x[a]).sum::<f64>() + self.constant
    }

    /// Rule distance (before the exponent).
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.affine(x).max(0.0)
    }

    /// Weighted contribution to the objective.
    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.distance(x);
        match self.exponent {
            Exponent::Linear => self.weight * d,
            Exponent::Squared => self.weight * d * d,
        }
    }

    /// Largest value of the affine form over the unit box.
    pub fn max_affine(&self) -> f64 {
        self.constant + self.coeffs.iter().map(|&(_, c)| c.max(0.0)).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundingConfig {
    pub atom_cap: usize,
    /// Used for `Sim` literals over pairs that were not blocked together.
    pub similarity: SimilarityConfig,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            atom_cap: DEFAULT_ATOM_CAP,
            similarity: SimilarityConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Grounding {
    pub atoms: AtomTable,
    pub potentials: Vec<HingePotential>,
    /// Potentials per rule name, including rules that produced none.
    pub counts: BTreeMap<String, usize>,
}

impl Grounding {
    /// `rule<TAB>weight<TAB>exponent<TAB>constant<TAB>atom:coeff,...`
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.potentials {
            let coeffs: Vec<String> = p.coeffs.iter().map(|(a, c)| format!("{a}:{c}")).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                p.rule,
                p.weight,
                p.exponent.power(),
                p.constant,
                coeffs.join(",")
            );
        }
        out
    }
}

/// Grounds every rule of `rs` and returns the potentials in rule order.
pub fn ground(
    rs: &RuleSet,
    graph: &KnowledgeGraph,
    candidates: &[CandidatePair],
    triangles: &[[EntityId; 3]],
    config: &GroundingConfig,
) -> Result<Grounding> {
    let universe = Universe::build(graph, candidates, triangles, config)?;
    let per_rule: Vec<Vec<HingePotential>> = rs
        .rules
        .iter()
        .map(|rule| universe.ground_rule(rule, true).map(|(_, p)| p))
        .collect::<Result<_>>()?;
    let counts = rs
        .rules
        .iter()
        .zip(&per_rule)
        .map(|(r, p)| (r.name.clone(), p.len()))
        .collect();
    Ok(Grounding {
        atoms: universe.atoms.clone(),
        potentials: per_rule.into_iter().flatten().collect(),
        counts,
    })
}

/// Potentials each rule would produce, without keeping them.
pub fn count_groundings(
    rs: &RuleSet,
    graph: &KnowledgeGraph,
    candidates: &[CandidatePair],
    triangles: &[[EntityId; 3]],
    config: &GroundingConfig,
) -> Result<BTreeMap<String, usize>> {
    let universe = Universe::build(graph, candidates, triangles, config)?;
    let mut counts = BTreeMap::new();
    for rule in &rs.rules {
        let (n, _) = universe.ground_rule(rule, false)?;
        counts.insert(rule.name.clone(), n);
    }
    Ok(counts)
}

const MISSING: u32 = u32::MAX - 1;
const UNBOUND: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Val {
    Obs(f64),
    Atom(usize),
}

struct Universe<'a> {
    graph: &'a KnowledgeGraph,
    config: &'a GroundingConfig,
    entities: Vec<EntityId>,
    entity_ix: HashMap<EntityId, u32>,
    label_ix: HashMap<String, u32>,
    relation_ix: HashMap<String, u32>,
    atoms: AtomTable,
    /// Keyed by (low, high) entity index.
    atom_of: HashMap<(u32, u32), usize>,
    sim_of: HashMap<(u32, u32), f64>,
    adj: Vec<Vec<(u32, usize)>>,
    all_atoms: Vec<(u32, u32, usize)>,
    skolems: Vec<u32>,
    is_skolem: Vec<bool>,
    labels_of: Vec<Vec<(u32, f64)>>,
    members_of: Vec<Vec<(u32, f64)>>,
    label_val: HashMap<(u32, u32), f64>,
    all_labels: Vec<(u32, u32, f64)>,
    rel_by_subj: Vec<Vec<(u32, u32, u32, f64)>>,
    rel_by_obj: Vec<Vec<(u32, u32, u32, f64)>>,
    rel_by_rel: Vec<Vec<(u32, u32, u32, f64)>>,
    rel_val: HashMap<(u32, u32, u32), f64>,
    all_rels: Vec<(u32, u32, u32, f64)>,
    mutex_labels: Vec<(u32, u32)>,
    mutex_relations: Vec<(u32, u32)>,
    triangles: Vec<[u32; 3]>,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn intern(ix: &mut HashMap<String, u32>, s: &str) -> u32 {
    let next = ix.len() as u32;
    *ix.entry(s.to_string()).or_insert(next)
}

impl<'a> Universe<'a> {
    fn build(
        graph: &'a KnowledgeGraph,
        candidates: &[CandidatePair],
        triangles: &[[EntityId; 3]],
        config: &'a GroundingConfig,
    ) -> Result<Self> {
        if candidates.len() > config.atom_cap {
            return Err(Error::Capacity(format!(
                "{} candidate pairs exceed the atom cap of {}; raise tau or lower max-per-entity",
                candidates.len(),
                config.atom_cap
            )));
        }
        let mut ids: Vec<EntityId> = graph.entities.keys().cloned().collect();
        for c in candidates {
            ids.push(c.a.clone());
            ids.push(c.b.clone());
        }
        ids.sort();
        ids.dedup();
        let entity_ix: HashMap<EntityId, u32> =
            ids.iter().cloned().enumerate().map(|(i, e)| (e, i as u32)).collect();
        let n = ids.len();
        let ent = |e: &EntityId| entity_ix[e];

        let atoms = AtomTable::from_pairs(candidates.iter().map(|c| (c.a.clone(), c.b.clone())));
        let mut atom_of = HashMap::new();
        let mut sim_of = HashMap::new();
        let mut adj = vec![Vec::new(); n];
        let mut all_atoms = Vec::new();
        for (i, (a, b)) in atoms.pairs().iter().enumerate() {
            let (x, y) = (ent(a), ent(b));
            atom_of.insert(key(x, y), i);
            adj[x as usize].push((y, i));
            adj[y as usize].push((x, i));
            all_atoms.push((x, y, i));
        }
        for c in candidates {
            sim_of.insert(key(ent(&c.a), ent(&c.b)), c.profile.combined);
        }
        for row in &mut adj {
            row.sort_unstable();
        }

        let is_skolem: Vec<bool> = ids.iter().map(|e| graph.is_skolem(e)).collect();
        let skolems = (0..n as u32).filter(|&i| is_skolem[i as usize]).collect();

        let mut label_ix = HashMap::new();
        let mut relation_ix = HashMap::new();
        let mut labels_of = vec![Vec::new(); n];
        let mut label_val = HashMap::new();
        let mut all_labels = Vec::new();
        for ((e, l), &v) in &graph.labels {
            let (x, li) = (ent(e), intern(&mut label_ix, l));
            labels_of[x as usize].push((li, v));
            label_val.insert((x, li), v);
            all_labels.push((x, li, v));
        }
        let mut rels = Vec::new();
        for ((s, r, o), &v) in &graph.triples {
            rels.push((ent(s), ent(o), intern(&mut relation_ix, r), v));
        }
        let mut mutex_labels = Vec::new();
        for (l1, l2) in &graph.ontology.mutex_labels {
            let (a, b) = (intern(&mut label_ix, l1), intern(&mut label_ix, l2));
            mutex_labels.extend([(a, b), (b, a)]);
        }
        let mut mutex_relations = Vec::new();
        for (r1, r2) in &graph.ontology.mutex_relations {
            let (a, b) = (intern(&mut relation_ix, r1), intern(&mut relation_ix, r2));
            mutex_relations.extend([(a, b), (b, a)]);
        }
        mutex_labels.sort_unstable();
        mutex_labels.dedup();
        mutex_relations.sort_unstable();
        mutex_relations.dedup();

        let nl = label_ix.len();
        let mut members_of = vec![Vec::new(); nl];
        for &(x, l, v) in &all_labels {
            members_of[l as usize].push((x, v));
        }
        for row in &mut labels_of {
            row.sort_by_key(|p| p.0);
        }
        let nr = relation_ix.len();
        let mut rel_by_subj = vec![Vec::new(); n];
        let mut rel_by_obj = vec![Vec::new(); n];
        let mut rel_by_rel = vec![Vec::new(); nr];
        let mut rel_val = HashMap::new();
        for &t in &rels {
            rel_by_subj[t.0 as usize].push(t);
            rel_by_obj[t.1 as usize].push(t);
            rel_by_rel[t.2 as usize].push(t);
            rel_val.insert((t.0, t.1, t.2), t.3);
        }
        for rows in [&mut rel_by_subj, &mut rel_by_obj, &mut rel_by_rel] {
            for row in rows.iter_mut() {
                row.sort_by_key(|a| (a.0, a.1, a.2));
            }
        }

        let mut tri = Vec::new();
        for t in triangles {
            let Some(ix) = t
                .iter()
                .map(|e| entity_ix.get(e).copied())
                .collect::<Option<Vec<u32>>>()
            else {
                continue;
            };
            let closed = [(0, 1), (1, 2), (0, 2)]
                .iter()
                .all(|&(i, j)| ix[i] != ix[j] && atom_of.contains_key(&key(ix[i], ix[j])));
            if closed {
                let mut s = [ix[0], ix[1], ix[2]];
                s.sort_unstable();
                tri.push(s);
            }
        }
        tri.sort_unstable();
        tri.dedup();

        Ok(Universe {
            graph,
            config,
            entities: ids,
            entity_ix,
            label_ix,
            relation_ix,
            atoms,
            atom_of,
            sim_of,
            adj,
            all_atoms,
            skolems,
            is_skolem,
            labels_of,
            members_of,
            label_val,
            all_labels,
            rel_by_subj,
            rel_by_obj,
            rel_by_rel,
            rel_val,
            all_rels: rels,
            mutex_labels,
            mutex_relations,
            triangles: tri,
        })
    }

    fn constant(&self, kind: ArgKind, c: &str) -> u32 {
        let found = match kind {
            ArgKind::Entity => self.entity_ix.get(&EntityId::new(c)).copied(),
            ArgKind::Label => self.label_ix.get(c).copied(),
            ArgKind::Relation => self.relation_ix.get(c).copied(),
        };
        found.unwrap_or(MISSING)
    }

    fn sim(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 1.0;
        }
        if let Some(&s) = self.sim_of.get(&key(a, b)) {
            return s;
        }
        if self.is_skolem[a as usize] || self.is_skolem[b as usize] {
            return 0.0;
        }
        let (ea, eb) = (&self.entities[a as usize], &self.entities[b as usize]);
        let mut names = BTreeMap::new();
        for e in [ea, eb] {
            names.insert(e.clone(), self.graph.name(e).unwrap_or(e.as_str()).to_string());
        }
        similarity_profile(ea, eb, &names, &self.config.similarity, &SimilarityCache::default())
            .map(|p| p.combined)
            .unwrap_or(0.0)
    }

    /// Value of a fully bound literal, before negation.
    fn value(&self, pred: Predicate, args: &[u32]) -> Val {
        if args.contains(&MISSING) {
            return Val::Obs(0.0);
        }
        let ind = |b: bool| Val::Obs(if b { 1.0 } else { 0.0 });
        match pred {
            Predicate::Same => {
                if args[0] == args[1] {
                    Val::Obs(1.0)
                } else {
                    match self.atom_of.get(&key(args[0], args[1])) {
                        Some(&a) => Val::Atom(a),
                        None => Val::Obs(0.0),
                    }
                }
            }
            Predicate::CandSame => ind(self.atom_of.contains_key(&key(args[0], args[1]))),
            Predicate::Sim => Val::Obs(self.sim(args[0], args[1])),
            Predicate::Label => Val::Obs(self.label_val.get(&(args[0], args[1])).copied().unwrap_or(0.0)),
            Predicate::Rel => Val::Obs(
                self.rel_val
                    .get(&(args[0], args[1], args[2]))
                    .copied()
                    .unwrap_or(0.0),
            ),
            Predicate::NewEnt => ind(self.is_skolem[args[0] as usize]),
            Predicate::MutexLabel => ind(self.mutex_labels.binary_search(&(args[0], args[1])).is_ok()),
            Predicate::MutexRel => ind(self.mutex_relations.binary_search(&(args[0], args[1])).is_ok()),
        }
    }

    /// Tuples of a positive generator literal consistent with `pat`
    /// (`UNBOUND` marks free positions).
    fn generate(&self, pred: Predicate, pat: &[u32], out: &mut Vec<[u32; 3]>) {
        out.clear();
        if pat.contains(&MISSING) {
            return;
        }
        let fits = |t: &[u32]| pat.iter().zip(t).all(|(&p, &v)| p == UNBOUND || p == v);
        match pred {
            Predicate::Same | Predicate::CandSame => match (pat[0], pat[1]) {
                (UNBOUND, UNBOUND) => {
                    for &(x, y, _) in &self.all_atoms {
                        out.push([x, y, 0]);
                        out.push([y, x, 0]);
                    }
                }
                (x, UNBOUND) => out.extend(self.adj[x as usize].iter().map(|&(y, _)| [x, y, 0])),
                (UNBOUND, y) => out.extend(self.adj[y as usize].iter().map(|&(x, _)| [x, y, 0])),
                (x, y) => {
                    if x != y && self.atom_of.contains_key(&key(x, y)) {
                        out.push([x, y, 0]);
                    }
                }
            },
            Predicate::Label => match (pat[0], pat[1]) {
                (UNBOUND, UNBOUND) => out.extend(self.all_labels.iter().map(|&(e, l, _)| [e, l, 0])),
                (e, UNBOUND) => out.extend(self.labels_of[e as usize].iter().map(|&(l, _)| [e, l, 0])),
                (UNBOUND, l) => out.extend(self.members_of[l as usize].iter().map(|&(e, _)| [e, l, 0])),
                (e, l) => {
                    if self.label_val.contains_key(&(e, l)) {
                        out.push([e, l, 0]);
                    }
                }
            },
            Predicate::Rel => {
                let rows: &[(u32, u32, u32, f64)] = if pat[0] != UNBOUND {
                    &self.rel_by_subj[pat[0] as usize]
                } else if pat[1] != UNBOUND {
                    &self.rel_by_obj[pat[1] as usize]
                } else if pat[2] != UNBOUND {
                    &self.rel_by_rel[pat[2] as usize]
                } else {
                    &self.all_rels
                };
                out.extend(
                    rows.iter()
                        .map(|&(s, o, r, _)| [s, o, r])
                        .filter(|t| fits(t)),
                );
            }
            Predicate::NewEnt => {
                if pat[0] == UNBOUND {
                    out.extend(self.skolems.iter().map(|&s| [s, 0, 0]));
                } else if self.is_skolem[pat[0] as usize] {
                    out.push([pat[0], 0, 0]);
                }
            }
            Predicate::MutexLabel | Predicate::MutexRel => {
                let set = if pred == Predicate::MutexLabel {
                    &self.mutex_labels
                } else {
                    &self.mutex_relations
                };
                out.extend(set.iter().map(|&(a, b)| [a, b, 0]).filter(|t| fits(&t[..2])));
            }
            Predicate::Sim => unreachable!("Sim never generates bindings"),
        }
    }

    fn ground_rule(&self, rule: &RuleTemplate, build: bool) -> Result<(usize, Vec<HingePotential>)> {
        let plan = Plan::compile(rule, self);
        let name: Arc<str> = Arc::from(rule.name.as_str());

        // Seeds are the bindings produced by the first stage; they are
        // processed in parallel chunks and merged in seed order.
        let seeds = plan.seeds(self);
        let chunks: Vec<&[State]> = seeds.chunks(256).collect();
        let found: Vec<Vec<(GroundKey, Option<HingePotential>)>> = par::map(&chunks, |chunk| {
            let mut out = Vec::new();
            for seed in chunk.iter() {
                plan.descend(self, 2, seed.clone(), &mut |s| {
                    if let Some(item) = plan.finish(self, &s, rule, &name, build) {
                        out.push(item);
                    }
                });
            }
            out
        });
        let mut seen: HashSet<GroundKey> = HashSet::new();
        let mut potentials = Vec::new();
        let mut count = 0;
        for (k, p) in found.into_iter().flatten() {
            if seen.insert(k) {
                count += 1;
                if let Some(p) = p {
                    potentials.push(p);
                }
            }
        }
        Ok((count, potentials))
    }
}

#[derive(Clone, Debug)]
enum Arg {
    Var(usize),
    Const(u32),
}

#[derive(Clone, Debug)]
struct CLit {
    pred: Predicate,
    negated: bool,
    args: Vec<Arg>,
}

enum Generator {
    Root,
    Lit(usize),
    /// Three `CandSame` literals over a 3-cycle of variables, bound from the
    /// supplied triangles.
    Triangle([usize; 3]),
}

struct Stage {
    generator: Generator,
    /// Literals whose variables are all bound after this stage.
    checks: Vec<usize>,
}

struct Plan {
    lits: Vec<CLit>,
    n_body: usize,
    kinds: Vec<ArgKind>,
    stages: Vec<Stage>,
}

#[derive(Clone, Debug)]
struct State {
    binding: Vec<u32>,
    vals: Vec<Option<Val>>,
    /// 1 + Σ (max value − 1) over evaluated body literals.
    bound: f64,
}

impl State {
    fn new(plan: &Plan) -> Self {
        State {
            binding: vec![UNBOUND; plan.kinds.len()],
            vals: vec![None; plan.lits.len()],
            bound: 1.0,
        }
    }
}

/// Canonical identity of a ground rule: sorted body literals plus head.
type GroundKey = (Vec<(u8, bool, [u32; 3])>, (u8, bool, [u32; 3]));

fn symmetric(p: Predicate) -> bool {
    matches!(
        p,
        Predicate::Same | Predicate::CandSame | Predicate::Sim | Predicate::MutexLabel | Predicate::MutexRel
    )
}

fn cost_rank(p: Predicate) -> u8 {
    match p {
        Predicate::NewEnt => 0,
        Predicate::MutexLabel | Predicate::MutexRel => 1,
        Predicate::CandSame | Predicate::Same => 2,
        Predicate::Label => 3,
        Predicate::Rel => 4,
        Predicate::Sim => 5,
    }
}

impl Plan {
    fn compile(rule: &RuleTemplate, u: &Universe) -> Plan {
        let mut var_ix: HashMap<String, usize> = HashMap::new();
        let mut kinds = Vec::new();
        let mut lits = Vec::new();
        let compile_lit = |l: &Literal, var_ix: &mut HashMap<String, usize>, kinds: &mut Vec<ArgKind>| {
            let args = l
                .args
                .iter()
                .zip(l.predicate.signature())
                .map(|(t, &k)| match t {
                    Term::Var(v) => {
                        let next = var_ix.len();
                        let i = *var_ix.entry(v.clone()).or_insert(next);
                        if i == kinds.len() {
                            kinds.push(k);
                        }
                        Arg::Var(i)
                    }
                    Term::Const(c) => Arg::Const(u.constant(k, c)),
                })
                .collect();
            CLit {
                pred: l.predicate,
                negated: l.negated,
                args,
            }
        };
        for l in &rule.body {
            lits.push(compile_lit(l, &mut var_ix, &mut kinds));
        }
        lits.push(compile_lit(&rule.head, &mut var_ix, &mut kinds));
        let n_body = rule.body.len();

        let vars_of = |l: &CLit| -> Vec<usize> {
            l.args
                .iter()
                .filter_map(|a| match a {
                    Arg::Var(v) => Some(*v),
                    Arg::Const(_) => None,
                })
                .collect()
        };

        let mut bound = vec![false; kinds.len()];
        let mut done = vec![false; lits.len()];
        let mut stages = Vec::new();
        let take_checks = |bound: &[bool], done: &mut [bool]| -> Vec<usize> {
            let mut out = Vec::new();
            for (i, l) in lits.iter().enumerate() {
                if !done[i] && vars_of(l).iter().all(|&v| bound[v]) {
                    done[i] = true;
                    out.push(i);
                }
            }
            out
        };
        let checks = take_checks(&bound, &mut done);
        stages.push(Stage {
            generator: Generator::Root,
            checks,
        });

        if let Some((tl, tv)) = find_triangle(&lits[..n_body]) {
            for &v in &tv {
                bound[v] = true;
            }
            let mut checks = Vec::new();
            for &i in &tl {
                done[i] = true;
                checks.push(i);
            }
            checks.extend(take_checks(&bound, &mut done));
            stages.push(Stage {
                generator: Generator::Triangle(tv),
                checks,
            });
        }

        let is_generator = |i: usize| i < n_body && !lits[i].negated && lits[i].pred != Predicate::Sim;
        loop {
            let next = (0..lits.len())
                .filter(|&i| !done[i] && is_generator(i))
                .min_by_key(|&i| {
                    let l = &lits[i];
                    let bound_args = l
                        .args
                        .iter()
                        .filter(|a| match a {
                            Arg::Var(v) => bound[*v],
                            Arg::Const(_) => true,
                        })
                        .count();
                    (std::cmp::Reverse(bound_args), cost_rank(l.pred), i)
                });
            let gen = match next {
                Some(i) => i,
                None if n_body == 0 && !done[n_body] => n_body,
                None => break,
            };
            done[gen] = true;
            for v in vars_of(&lits[gen]) {
                bound[v] = true;
            }
            let mut checks = vec![gen];
            checks.extend(take_checks(&bound, &mut done));
            stages.push(Stage {
                generator: Generator::Lit(gen),
                checks,
            });
        }
        debug_assert!(done.iter().all(|&d| d), "safe rules bind every variable");
        Plan {
            lits,
            n_body,
            kinds,
            stages,
        }
    }

    fn arg_val(&self, a: &Arg, binding: &[u32]) -> u32 {
        match a {
            Arg::Var(v) => binding[*v],
            Arg::Const(c) => *c,
        }
    }

    /// Binds `v := c`, enforcing that distinct variables of one kind take
    /// distinct constants.
    fn bind(&self, binding: &mut [u32], v: usize, c: u32) -> bool {
        if binding[v] != UNBOUND {
            return binding[v] == c;
        }
        let kind = self.kinds[v];
        if (0..binding.len()).any(|w| w != v && binding[w] == c && self.kinds[w] == kind) {
            return false;
        }
        binding[v] = c;
        true
    }

    /// Evaluates the stage's checks; false when the binding can be abandoned.
    fn check(&self, u: &Universe, stage: &Stage, s: &mut State) -> bool {
        for &i in &stage.checks {
            let l = &self.lits[i];
            let args: Vec<u32> = l.args.iter().map(|a| self.arg_val(a, &s.binding)).collect();
            let val = u.value(l.pred, &args);
            s.vals[i] = Some(val);
            if i < self.n_body {
                let max = match val {
                    Val::Atom(_) => 1.0,
                    Val::Obs(v) => {
                        if l.negated {
                            1.0 - v
                        } else {
                            v
                        }
                    }
                };
                s.bound += max - 1.0;
            } else if let Val::Obs(v) = val {
                s.bound -= if l.negated { 1.0 - v } else { v };
            }
            if s.bound <= -1e-9 {
                return false;
            }
        }
        true
    }

    /// Applies stage `k` (k ≥ 1) to `s`, passing each surviving extension to `f`.
    fn step(&self, u: &Universe, k: usize, s: &State, f: &mut dyn FnMut(State)) {
        let stage = &self.stages[k];
        let next = |binding: Vec<u32>, f: &mut dyn FnMut(State)| {
            let mut t = State {
                binding,
                vals: s.vals.clone(),
                bound: s.bound,
            };
            if self.check(u, stage, &mut t) {
                f(t);
            }
        };
        match &stage.generator {
            Generator::Root => unreachable!("root is stage 0"),
            Generator::Triangle(vars) => {
                for t in &u.triangles {
                    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                        let mut b = s.binding.clone();
                        if (0..3).all(|j| self.bind(&mut b, vars[j], t[perm[j]])) {
                            next(b, f);
                        }
                    }
                }
            }
            Generator::Lit(i) => {
                let l = &self.lits[*i];
                let pat: Vec<u32> = l.args.iter().map(|a| self.arg_val(a, &s.binding)).collect();
                let mut tuples = Vec::new();
                u.generate(l.pred, &pat, &mut tuples);
                for t in &tuples {
                    let mut b = s.binding.clone();
                    let ok = l.args.iter().enumerate().all(|(j, a)| match a {
                        Arg::Var(v) => self.bind(&mut b, *v, t[j]),
                        Arg::Const(c) => *c == t[j],
                    });
                    if ok {
                        next(b, f);
                    }
                }
            }
        }
    }

    /// Runs stages `k..` depth-first, emitting complete bindings.
    fn descend(&self, u: &Universe, k: usize, s: State, emit: &mut dyn FnMut(State)) {
        if k >= self.stages.len() {
            emit(s);
            return;
        }
        self.step(u, k, &s, &mut |t| self.descend(u, k + 1, t, emit));
    }

    /// Bindings after the root checks and the first generator.
    fn seeds(&self, u: &Universe) -> Vec<State> {
        let mut root = State::new(self);
        if !self.check(u, &self.stages[0], &mut root) {
            return Vec::new();
        }
        if self.stages.len() == 1 {
            return vec![root];
        }
        let mut out = Vec::new();
        self.step(u, 1, &root, &mut |t| out.push(t));
        out
    }

    fn ground_key(&self, s: &State) -> GroundKey {
        let lit_key = |l: &CLit| {
            let mut a = [0u32; 3];
            for (j, arg) in l.args.iter().enumerate() {
                a[j] = self.arg_val(arg, &s.binding);
            }
            if symmetric(l.pred) && a[0] > a[1] {
                a.swap(0, 1);
            }
            (l.pred as u8, l.negated, a)
        };
        let mut body: Vec<_> = self.lits[..self.n_body].iter().map(lit_key).collect();
        body.sort_unstable();
        (body, lit_key(&self.lits[self.n_body]))
    }

    /// Folds a complete binding into a potential, or `None` if the ground
    /// rule can never be violated.
    fn finish(
        &self,
        _u: &Universe,
        s: &State,
        rule: &RuleTemplate,
        name: &Arc<str>,
        build: bool,
    ) -> Option<(GroundKey, Option<HingePotential>)> {
        let mut terms: Vec<f64> = Vec::with_capacity(self.lits.len() + 1);
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (i, l) in self.lits.iter().enumerate() {
            let head = i == self.n_body;
            let sign = if head { -1.0 } else { 1.0 };
            match s.vals[i].expect("every literal evaluated") {
                Val::Obs(v) => terms.push(sign * if l.negated { 1.0 - v } else { v }),
                Val::Atom(a) => {
                    if l.negated {
                        terms.push(sign);
                        coeffs.push((a, -sign));
                    } else {
                        coeffs.push((a, sign));
                    }
                }
            }
        }
        terms.push(1.0 - self.n_body as f64);
        terms.sort_by(f64::total_cmp);
        let constant: f64 = terms.iter().sum();
        coeffs.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (a, c) in coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == a => last.1 += c,
                _ => merged.push((a, c)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        let p = HingePotential {
            rule: name.clone(),
            weight: rule.weight,
            coeffs: merged,
            constant,
            exponent: rule.exponent,
        };
        if p.coeffs.is_empty() || p.max_affine() <= 0.0 {
            return None;
        }
        Some((self.ground_key(s), build.then_some(p)))
    }
}

/// Finds three positive `CandSame` body literals forming a cycle over three
/// distinct variables.
fn find_triangle(body: &[CLit]) -> Option<([usize; 3], [usize; 3])> {
    let edges: Vec<(usize, usize, usize)> = body
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.negated && l.pred == Predicate::CandSame)
        .filter_map(|(i, l)| match (&l.args[0], &l.args[1]) {
            (Arg::Var(a), Arg::Var(b)) if a != b => Some((i, *a, *b)),
            _ => None,
        })
        .collect();
    let joins = |e: &(usize, usize, usize), x: usize, y: usize| (e.1 == x && e.2 == y) || (e.1 == y && e.2 == x);
    for (i, e1) in edges.iter().enumerate() {
        for (j, e2) in edges.iter().enumerate().skip(i + 1) {
            let shared = [e1.1, e1.2].into_iter().find(|v| *v == e2.1 || *v == e2.2);
            let Some(b) = shared else { continue };
            let a = if e1.1 == b { e1.2 } else { e1.1 };
            let c = if e2.1 == b { e2.2 } else { e2.1 };
            if a == c {
                continue;
            }
            if let Some(e3) = edges.iter().skip(j + 1).find(|e| joins(e, a, c)) {
                return Some(([e1.0, e2.0, e3.0], [a, b, c]));
            }
        }
    }
    None
}
