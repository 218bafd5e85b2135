//! Decision layer: thresholded pair decisions, connected-component clusters,
//! and greedy reference-to-entity matching with skolem fallback.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::AtomTable;
use crate::inference::Assignment;
use crate::kg::EntityId;
use crate::similarity::canonical_pair;

pub type Pair = (EntityId, EntityId);
pub type Scores = BTreeMap<Pair, f64>;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolutionResult {
    pub scores: Scores,
    pub decisions: BTreeSet<Pair>,
    /// Entity to cluster id (extractions).
    pub clusters: Option<BTreeMap<EntityId, EntityId>>,
    /// Reference to target entity (extend/merge).
    pub matching: Option<BTreeMap<EntityId, EntityId>>,
    pub new_entities: BTreeSet<EntityId>,
}

/// Copies soft values into per-pair scores and thresholds them.
pub fn decide(assignment: &Assignment, atoms: &AtomTable, threshold: f64) -> (Scores, BTreeSet<Pair>) {
    let scores: Scores = atoms
        .pairs()
        .iter()
        .cloned()
        .zip(assignment.values.iter().copied())
        .collect();
    let decisions = threshold_scores(&scores, threshold);
    (scores, decisions)
}

pub fn threshold_scores(scores: &Scores, threshold: f64) -> BTreeSet<Pair> {
    scores
        .iter()
        .filter(|(_, &s)| s >= threshold)
        .map(|(p, _)| p.clone())
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Keep the smaller index as root so roots are smallest members.
        if ra < rb {
            self.parent[rb] = ra;
        } else if rb < ra {
            self.parent[ra] = rb;
        }
    }
}

/// Connected components of the decision graph over `entities` (plus every
/// entity named by a decision). Cluster ids are the smallest member id.
pub fn cluster<'a>(
    decisions: &BTreeSet<Pair>,
    entities: impl IntoIterator<Item = &'a EntityId>,
) -> BTreeMap<EntityId, EntityId> {
    let mut all: BTreeSet<&EntityId> = entities.into_iter().collect();
    for (a, b) in decisions {
        all.insert(a);
        all.insert(b);
    }
    let ids: Vec<&EntityId> = all.into_iter().collect();
    let index: BTreeMap<&EntityId, usize> = ids.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in decisions {
        uf.union(index[a], index[b]);
    }
    (0..ids.len())
        .map(|i| (ids[i].clone(), ids[uf.find(i)].clone()))
        .collect()
}

/// Greedy one-to-one matching of sources to existing targets in descending
/// score order; sources left without a match at or above `threshold` are
/// assigned their skolem placeholder.
pub fn bipartite_match(
    scores: &Scores,
    sources: &BTreeSet<EntityId>,
    threshold: f64,
) -> Result<BTreeMap<EntityId, EntityId>> {
    for s in sources {
        if !scores.contains_key(&canonical_pair(s, &s.skolem())) {
            return Err(Error::Precondition(format!(
                "no score for reference `{s}` and its placeholder"
            )));
        }
    }
    let mut options: Vec<(f64, &EntityId, &EntityId)> = Vec::new();
    for ((a, b), &score) in scores {
        for (src, tgt) in [(a, b), (b, a)] {
            if sources.contains(src) && !sources.contains(tgt) {
                let skolem_of_other = tgt.has_skolem_prefix() && tgt.skolem_reference().as_ref() != Some(src);
                if !skolem_of_other {
                    options.push((score, src, tgt));
                }
            }
        }
    }
    options.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| x.2.cmp(y.2))
            .then_with(|| x.1.cmp(y.1))
    });
    let mut matching: BTreeMap<EntityId, EntityId> = BTreeMap::new();
    let mut used: BTreeSet<&EntityId> = BTreeSet::new();
    for (score, src, tgt) in options {
        if score < threshold {
            break;
        }
        if matching.contains_key(src) {
            continue;
        }
        let is_skolem = tgt.has_skolem_prefix();
        if !is_skolem && used.contains(tgt) {
            continue;
        }
        if !is_skolem {
            used.insert(tgt);
        }
        matching.insert(src.clone(), tgt.clone());
    }
    for s in sources {
        matching.entry(s.clone()).or_insert_with(|| s.skolem());
    }
    Ok(matching)
}

/// Candidate triangles whose decisions have exactly two positive edges.
pub fn transitivity_violations(triangles: &[[EntityId; 3]], decisions: &BTreeSet<Pair>) -> usize {
    triangles
        .iter()
        .filter(|[a, b, c]| {
            let on = [(a, b), (b, c), (a, c)]
                .iter()
                .filter(|(x, y)| decisions.contains(&canonical_pair(x, y)))
                .count();
            on == 2
        })
        .count()
}
