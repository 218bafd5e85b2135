//! Candidate generation. Entities are indexed by padded character trigrams
//! and scored with an IDF-weighted trigram cosine, so that names sharing only
//! very frequent trigrams do not become candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::par;
use crate::similarity::{
    canonical_pair, fold, padded_trigrams, similarity_profile, SimilarityCache, SimilarityConfig,
    SimilarityProfile,
};
use crate::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    WithinExtractions,
    CrossGraph,
    ToSkolem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: EntityId,
    pub b: EntityId,
    pub profile: SimilarityProfile,
    pub scope: Scope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingConfig {
    pub tau: f64,
    pub max_per_entity: usize,
    pub similarity: SimilarityConfig,
    /// `Sim` value assigned to every reference/placeholder pair.
    pub skolem_similarity: f64,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        BlockingConfig {
            tau: 0.3,
            max_per_entity: 50,
            similarity: SimilarityConfig::default(),
            skolem_similarity: 0.5,
        }
    }
}

impl BlockingConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0,1]", self.tau)));
        }
        if self.max_per_entity == 0 {
            return Err(Error::Config("max-per-entity must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.skolem_similarity) {
            return Err(Error::Config(format!(
                "skolem similarity {} outside [0,1]",
                self.skolem_similarity
            )));
        }
        self.similarity.check()
    }
}

type Trigram = [char; 3];

/// Document frequency of each trigram over a corpus of names.
pub fn trigram_doc_freq<'a>(names: impl IntoIterator<Item = &'a str>) -> (HashMap<Trigram, usize>, usize) {
    let mut df = HashMap::new();
    let mut n = 0;
    for name in names {
        n += 1;
        let grams: BTreeSet<Trigram> = padded_trigrams(&fold(name)).into_iter().collect();
        for g in grams {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    (df, n)
}

fn idf(df: usize, n: usize) -> f64 {
    (1.0 + n as f64 / df.max(1) as f64).ln()
}

/// IDF-weighted cosine between the trigram sets of two names.
pub fn frequency_normalized_score(a: &str, b: &str, doc_freq: &HashMap<Trigram, usize>, n: usize) -> f64 {
    let ga: BTreeSet<Trigram> = padded_trigrams(&fold(a)).into_iter().collect();
    let gb: BTreeSet<Trigram> = padded_trigrams(&fold(b)).into_iter().collect();
    let weight = |g: &Trigram| idf(doc_freq.get(g).copied().unwrap_or(1), n.max(1));
    let norm = |s: &BTreeSet<Trigram>| s.iter().map(|g| weight(g).powi(2)).sum::<f64>().sqrt();
    let (na, nb) = (norm(&ga), norm(&gb));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = ga.intersection(&gb).map(|g| weight(g).powi(2)).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

struct TrigramIndex {
    /// Sorted trigram ids per entity, with their squared idf weights.
    grams: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
    postings: Vec<Vec<u32>>,
}

impl TrigramIndex {
    fn build(names: &[String], indexed: &[bool]) -> Self {
        let mut vocab: HashMap<Trigram, u32> = HashMap::new();
        let mut ids: Vec<Vec<u32>> = Vec::with_capacity(names.len());
        for name in names {
            let grams: BTreeSet<Trigram> = padded_trigrams(&fold(name)).into_iter().collect();
            let mut row: Vec<u32> = grams
                .into_iter()
                .map(|g| {
                    let next = vocab.len() as u32;
                    *vocab.entry(g).or_insert(next)
                })
                .collect();
            row.sort_unstable();
            ids.push(row);
        }
        let mut df = vec![0usize; vocab.len()];
        for row in &ids {
            for &g in row {
                df[g as usize] += 1;
            }
        }
        let n = names.len();
        let weights: Vec<f64> = df.iter().map(|&d| idf(d, n).powi(2)).collect();
        let mut postings = vec![Vec::new(); vocab.len()];
        for (e, row) in ids.iter().enumerate() {
            if indexed[e] {
                for &g in row {
                    postings[g as usize].push(e as u32);
                }
            }
        }
        let grams: Vec<Vec<(u32, f64)>> = ids
            .into_iter()
            .map(|row| row.into_iter().map(|g| (g, weights[g as usize])).collect())
            .collect();
        let norms = grams
            .iter()
            .map(|row| row.iter().map(|(_, w)| w).sum::<f64>().sqrt())
            .collect();
        TrigramIndex {
            grams,
            norms,
            postings,
        }
    }

    /// Scores every indexed entity sharing a trigram with `query`, accepting those
    /// for which `keep` holds.
    fn neighbours(&self, query: usize, tau: f64, keep: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for &(g, w) in &self.grams[query] {
            for &e in &self.postings[g as usize] {
                if keep(e as usize) {
                    *acc.entry(e).or_insert(0.0) += w;
                }
            }
        }
        let nq = self.norms[query];
        let mut out: Vec<(usize, f64)> = acc
            .into_iter()
            .filter_map(|(e, dot)| {
                let denom = nq * self.norms[e as usize];
                let score = if denom > 0.0 { (dot / denom).clamp(0.0, 1.0) } else { 0.0 };
                (score >= tau).then_some((e as usize, score))
            })
            .collect();
        out.sort_by_key(|x| x.0);
        out
    }
}

/// Generates scoped candidate pairs. For `Extend`/`Merge`, `target` must already
/// contain a skolem placeholder for every source reference (entities present in
/// both graphs are treated as already resolved and are not blocked).
pub fn block_candidates(
    source: &KnowledgeGraph,
    target: Option<&KnowledgeGraph>,
    scenario: Scenario,
    config: &BlockingConfig,
    cache: &SimilarityCache,
    extra: &[(EntityId, EntityId)],
) -> Result<Vec<CandidatePair>> {
    config.check()?;

    let (queries, indexed_targets): (Vec<EntityId>, Vec<EntityId>) = match (scenario, target) {
        (Scenario::Extractions, None) => {
            let all: Vec<EntityId> = source.concrete_entities().cloned().collect();
            (all.clone(), all)
        }
        (Scenario::Extractions, Some(_)) => {
            return Err(Error::Precondition(
                "the extractions scenario takes no target graph".into(),
            ))
        }
        (_, None) => {
            return Err(Error::Precondition(format!(
                "the {scenario} scenario requires a target graph"
            )))
        }
        (_, Some(target)) => {
            let refs: Vec<EntityId> = reference_ids(source, target);
            for r in &refs {
                if !target.is_skolem(&r.skolem()) {
                    return Err(Error::Precondition(format!(
                        "target graph lacks skolem placeholder for `{r}`"
                    )));
                }
            }
            let targets: Vec<EntityId> = target
                .concrete_entities()
                .filter(|e| !source.entities.contains_key(*e))
                .cloned()
                .collect();
            (refs, targets)
        }
    };

    let mut names: BTreeMap<EntityId, String> = BTreeMap::new();
    let lookup_name = |id: &EntityId| -> String {
        source
            .name(id)
            .or_else(|| target.and_then(|t| t.name(id)))
            .unwrap_or(id.as_str())
            .to_string()
    };

    // Universe: queries followed by (for cross-graph scenarios) targets.
    let cross = scenario != Scenario::Extractions;
    let mut universe: Vec<EntityId> = queries.clone();
    if cross {
        universe.extend(indexed_targets.iter().cloned());
    }
    let universe_names: Vec<String> = universe.iter().map(lookup_name).collect();
    for (id, name) in universe.iter().zip(&universe_names) {
        names.insert(id.clone(), name.clone());
    }
    let nq = queries.len();
    let indexed: Vec<bool> = (0..universe.len()).map(|i| !cross || i >= nq).collect();
    let index = TrigramIndex::build(&universe_names, &indexed);

    let query_ids: Vec<usize> = (0..nq).collect();
    let scored: Vec<Vec<(usize, f64)>> = par::map(&query_ids, |&q| {
        if cross {
            index.neighbours(q, config.tau, |_| true)
        } else {
            index.neighbours(q, config.tau, |e| e > q)
        }
    });

    let mut fuzzy: Vec<(f64, usize, usize)> = Vec::new();
    for (q, row) in scored.into_iter().enumerate() {
        for (e, s) in row {
            let (x, y) = if universe[q] <= universe[e] { (q, e) } else { (e, q) };
            fuzzy.push((s, x, y));
        }
    }
    fuzzy.sort_by(|l, r| {
        r.0.total_cmp(&l.0)
            .then_with(|| universe[l.1].cmp(&universe[r.1]))
            .then_with(|| universe[l.2].cmp(&universe[r.2]))
    });

    let mut counts = vec![0usize; universe.len()];
    let mut chosen: Vec<(EntityId, EntityId, Scope)> = Vec::new();
    if cross {
        for (q, reference) in queries.iter().enumerate() {
            counts[q] += 1;
            let (a, b) = canonical_pair(reference, &reference.skolem());
            chosen.push((a, b, Scope::ToSkolem));
        }
    }
    let scope = if cross { Scope::CrossGraph } else { Scope::WithinExtractions };
    for (_, x, y) in fuzzy {
        if counts[x] < config.max_per_entity && counts[y] < config.max_per_entity {
            counts[x] += 1;
            counts[y] += 1;
            chosen.push((universe[x].clone(), universe[y].clone(), scope));
        }
    }

    let mut seen: BTreeSet<(EntityId, EntityId)> =
        chosen.iter().map(|(a, b, _)| (a.clone(), b.clone())).collect();
    for (a, b) in extra {
        if a == b {
            return Err(Error::Precondition(format!("candidate override pairs `{a}` with itself")));
        }
        let known = |e: &EntityId| {
            source.entities.contains_key(e) || target.is_some_and(|t| t.entities.contains_key(e))
        };
        if !known(a) || !known(b) {
            return Err(Error::Precondition(format!(
                "candidate override ({a}, {b}) names an unknown entity"
            )));
        }
        let (a, b) = canonical_pair(a, b);
        if seen.insert((a.clone(), b.clone())) {
            let is_skolem = |e: &EntityId| target.is_some_and(|t| t.is_skolem(e));
            let scope = if is_skolem(&a) || is_skolem(&b) {
                Scope::ToSkolem
            } else if source.entities.contains_key(&a) && source.entities.contains_key(&b) {
                Scope::WithinExtractions
            } else {
                Scope::CrossGraph
            };
            for e in [&a, &b] {
                if !names.contains_key(e) && !is_skolem(e) {
                    names.insert(e.clone(), lookup_name(e));
                }
            }
            chosen.push((a, b, scope));
        }
    }

    chosen.sort_by(|l, r| (&l.0, &l.1).cmp(&(&r.0, &r.1)));
    let pairs: Vec<Result<CandidatePair>> = par::map(&chosen, |(a, b, scope)| {
        let profile = if *scope == Scope::ToSkolem {
            SimilarityProfile {
                pair: (a.clone(), b.clone()),
                scores: BTreeMap::new(),
                combined: config.skolem_similarity,
            }
        } else {
            similarity_profile(a, b, &names, &config.similarity, cache)?
        };
        Ok(CandidatePair {
            a: a.clone(),
            b: b.clone(),
            profile,
            scope: *scope,
        })
    });
    pairs.into_iter().collect()
}

/// Source entities that need resolving against `target`: every concrete source
/// entity not already present in the target.
pub fn reference_ids(source: &KnowledgeGraph, target: &KnowledgeGraph) -> Vec<EntityId> {
    source
        .concrete_entities()
        .filter(|e| !target.entities.contains_key(*e))
        .cloned()
        .collect()
}

/// Every entity triple whose three pairs are all candidates, each sorted.
pub fn candidate_triangles(pairs: &[CandidatePair]) -> Vec<[EntityId; 3]> {
    let mut adj: BTreeMap<&EntityId, BTreeSet<&EntityId>> = BTreeMap::new();
    for p in pairs {
        if p.a != p.b {
            adj.entry(&p.a).or_default().insert(&p.b);
            adj.entry(&p.b).or_default().insert(&p.a);
        }
    }
    let mut out = Vec::new();
    for (&u, nu) in &adj {
        for &v in nu.range::<&EntityId, _>((std::ops::Bound::Excluded(u), std::ops::Bound::Unbounded)) {
            let nv = &adj[v];
            for &w in nu.range::<&EntityId, _>((std::ops::Bound::Excluded(v), std::ops::Bound::Unbounded)) {
                if nv.contains(w) {
                    out.push([u.clone(), v.clone(), w.clone()]);
                }
            }
        }
    }
    out
}
