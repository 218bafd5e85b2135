//! String similarity metrics and their weighted combination into the
//! `Sim` evidence used by the rules.
//!
//! All metrics compare case-folded text and return a value in `[0, 1]`.
//! Two empty strings are considered identical.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{tsv_rows, EntityId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Levenshtein,
    Jaro,
    JaroWinkler,
    JaccardChar3,
    MongeElkan,
    SmithWaterman,
    NeedlemanWunsch,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Levenshtein,
        Metric::Jaro,
        Metric::JaroWinkler,
        Metric::JaccardChar3,
        Metric::MongeElkan,
        Metric::SmithWaterman,
        Metric::NeedlemanWunsch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Levenshtein => "levenshtein",
            Metric::Jaro => "jaro",
            Metric::JaroWinkler => "jaro_winkler",
            Metric::JaccardChar3 => "jaccard_char3",
            Metric::MongeElkan => "monge_elkan",
            Metric::SmithWaterman => "smith_waterman",
            Metric::NeedlemanWunsch => "needleman_wunsch",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown similarity metric `{s}`")))
    }
}

pub(crate) fn fold(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

pub fn string_similarity(metric: Metric, s: &str, t: &str) -> f64 {
    let (a, b) = (fold(s), fold(t));
    match metric {
        Metric::Levenshtein => levenshtein_similarity(&a, &b),
        Metric::Jaro => jaro(&a, &b),
        Metric::JaroWinkler => jaro_winkler(&a, &b),
        Metric::JaccardChar3 => jaccard_char3(&a, &b),
        Metric::MongeElkan => monge_elkan(&a, &b),
        Metric::SmithWaterman => smith_waterman(&a, &b),
        Metric::NeedlemanWunsch => needleman_wunsch(&a, &b),
    }
}

pub fn levenshtein_distance(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn levenshtein_similarity(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein_distance(a, b) as f64 / longest as f64
}

const MATCH: i64 = 1;
const MISMATCH: i64 = -1;
const GAP: i64 = -1;

/// Global alignment score with unit match/mismatch/gap costs.
pub fn needleman_wunsch_score(a: &[char], b: &[char]) -> i64 {
    let mut prev: Vec<i64> = (0..=b.len() as i64).map(|j| j * GAP).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = (i as i64 + 1) * GAP;
        for (j, cb) in b.iter().enumerate() {
            let diag = prev[j] + if ca == cb { MATCH } else { MISMATCH };
            cur[j + 1] = diag.max(prev[j + 1] + GAP).max(cur[j] + GAP);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best local alignment score (never negative).
pub fn smith_waterman_score(a: &[char], b: &[char]) -> i64 {
    let mut best = 0;
    let mut prev = vec![0i64; b.len() + 1];
    let mut cur = vec![0i64; b.len() + 1];
    for ca in a {
        cur[0] = 0;
        for (j, cb) in b.iter().enumerate() {
            let diag = prev[j] + if ca == cb { MATCH } else { MISMATCH };
            cur[j + 1] = 0.max(diag).max(prev[j + 1] + GAP).max(cur[j] + GAP);
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

fn normalize_alignment(score: i64, a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    (score as f64 / longest as f64).clamp(0.0, 1.0)
}

fn needleman_wunsch(a: &[char], b: &[char]) -> f64 {
    normalize_alignment(needleman_wunsch_score(a, b), a, b)
}

fn smith_waterman(a: &[char], b: &[char]) -> f64 {
    normalize_alignment(smith_waterman_score(a, b), a, b)
}

pub(crate) fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut a_matched = Vec::with_capacity(a.len());
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_used[j] && b[j] == *ca {
                b_used[j] = true;
                a_matched.push(*ca);
                break;
            }
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let b_matched = b.iter().zip(&b_used).filter(|(_, used)| **used).map(|(c, _)| c);
    let half_transpositions = a_matched
        .iter()
        .zip(b_matched)
        .filter(|(x, y)| x != y)
        .count();
    let m = m as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

const WINKLER_SCALE: f64 = 0.1;
const WINKLER_MAX_PREFIX: usize = 4;

pub(crate) fn jaro_winkler(a: &[char], b: &[char]) -> f64 {
    let j = jaro(a, b);
    let prefix = a
        .iter()
        .zip(b)
        .take(WINKLER_MAX_PREFIX)
        .take_while(|(x, y)| x == y)
        .count();
    j + prefix as f64 * WINKLER_SCALE * (1.0 - j)
}

/// Character trigrams of `^^s$$`.
pub fn padded_trigrams(s: &[char]) -> Vec<[char; 3]> {
    let mut padded = Vec::with_capacity(s.len() + 4);
    padded.extend(['^', '^']);
    padded.extend_from_slice(s);
    padded.extend(['$', '$']);
    padded.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
}

fn jaccard_char3(a: &[char], b: &[char]) -> f64 {
    let ga: HashSet<[char; 3]> = padded_trigrams(a).into_iter().collect();
    let gb: HashSet<[char; 3]> = padded_trigrams(b).into_iter().collect();
    let inter = ga.intersection(&gb).count();
    let union = ga.len() + gb.len() - inter;
    inter as f64 / union as f64
}

fn tokens(s: &[char]) -> Vec<Vec<char>> {
    s.split(|c| c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(<[char]>::to_vec)
        .collect()
}

fn monge_elkan_directed(a: &[Vec<char>], b: &[Vec<char>]) -> f64 {
    let total: f64 = a
        .iter()
        .map(|ta| b.iter().map(|tb| jaro_winkler(ta, tb)).fold(0.0, f64::max))
        .sum();
    total / a.len() as f64
}

fn monge_elkan(a: &[char], b: &[char]) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => 0.5 * (monge_elkan_directed(&ta, &tb) + monge_elkan_directed(&tb, &ta)),
    }
}

/// Canonical (lexicographically ordered) unordered pair.
pub fn canonical_pair(a: &EntityId, b: &EntityId) -> (EntityId, EntityId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    pub pair: (EntityId, EntityId),
    /// Component scores keyed by metric name.
    pub scores: BTreeMap<String, f64>,
    pub combined: f64,
}

/// Which metrics to compute and how to weight them in the combined score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    /// Metric name to weight. Builtin names are computed; any other name is
    /// looked up in the external score cache.
    pub weights: BTreeMap<String, f64>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            weights: Metric::ALL.iter().map(|m| (m.name().to_string(), 1.0)).collect(),
        }
    }
}

impl SimilarityConfig {
    pub fn uniform(metrics: &[Metric]) -> Self {
        SimilarityConfig {
            weights: metrics.iter().map(|m| (m.name().to_string(), 1.0)).collect(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if let Some((name, w)) = self.weights.iter().find(|(_, w)| !(**w >= 0.0)) {
            return Err(Error::Config(format!("metric `{name}` has negative weight {w}")));
        }
        let sum: f64 = self.weights.values().sum();
        if !(sum > 0.0) {
            return Err(Error::Config("similarity weights sum to zero".into()));
        }
        Ok(())
    }
}

/// Externally supplied scores, keyed by canonical pair and metric name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarityCache {
    scores: HashMap<(EntityId, EntityId), BTreeMap<String, f64>>,
}

impl SimilarityCache {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut cache = SimilarityCache::default();
        for (line, cols) in tsv_rows(text) {
            if cols.len() != 4 {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line,
                    message: format!("expected 4 tab-separated columns, found {}", cols.len()),
                });
            }
            let score: f64 = cols[3].trim().parse().map_err(|_| Error::Parse {
                path: path.to_string(),
                line,
                message: format!("invalid score `{}`", cols[3]),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Range {
                    path: path.to_string(),
                    line,
                    value: score,
                });
            }
            cache.insert(&cols[0].into(), &cols[1].into(), cols[2], score);
        }
        Ok(cache)
    }

    pub fn insert(&mut self, a: &EntityId, b: &EntityId, metric: &str, score: f64) {
        self.scores
            .entry(canonical_pair(a, b))
            .or_default()
            .insert(metric.to_string(), score);
    }

    pub fn get(&self, a: &EntityId, b: &EntityId, metric: &str) -> Option<f64> {
        self.scores
            .get(&canonical_pair(a, b))
            .and_then(|m| m.get(metric))
            .copied()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn similarity_profile(
    a: &EntityId,
    b: &EntityId,
    names: &BTreeMap<EntityId, String>,
    config: &SimilarityConfig,
    cache: &SimilarityCache,
) -> Result<SimilarityProfile> {
    config.check()?;
    let name_a = names.get(a).ok_or_else(|| Error::MissingName(a.to_string()))?;
    let name_b = names.get(b).ok_or_else(|| Error::MissingName(b.to_string()))?;
    let (fa, fb) = (fold(name_a), fold(name_b));
    let mut scores = BTreeMap::new();
    for name in config.weights.keys() {
        let score = match cache.get(a, b, name) {
            Some(s) => s,
            None => match name.parse::<Metric>() {
                Ok(metric) => score_folded(metric, &fa, &fb),
                Err(_) => 0.0,
            },
        };
        scores.insert(name.clone(), score);
    }
    let combined = combine(&scores, config);
    Ok(SimilarityProfile {
        pair: canonical_pair(a, b),
        scores,
        combined,
    })
}

pub(crate) fn score_folded(metric: Metric, a: &[char], b: &[char]) -> f64 {
    match metric {
        Metric::Levenshtein => levenshtein_similarity(a, b),
        Metric::Jaro => jaro(a, b),
        Metric::JaroWinkler => jaro_winkler(a, b),
        Metric::JaccardChar3 => jaccard_char3(a, b),
        Metric::MongeElkan => monge_elkan(a, b),
        Metric::SmithWaterman => smith_waterman(a, b),
        Metric::NeedlemanWunsch => needleman_wunsch(a, b),
    }
}

fn combine(scores: &BTreeMap<String, f64>, config: &SimilarityConfig) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (name, w) in &config.weights {
        num += w * scores[name];
        den += w;
    }
    (num / den).clamp(0.0, 1.0)
}
