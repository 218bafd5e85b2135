//! Evaluation metrics: precision/recall/F1 over pair decisions, step-wise
//! AUPRC over ranked scores, and F1 split by existing vs new entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{read_file, tsv_rows, EntityId};
use crate::resolution::{Pair, Scores};
use crate::similarity::canonical_pair;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub pairs: BTreeMap<Pair, bool>,
    /// Gold target per reference; a skolem target means "new entity".
    pub targets: BTreeMap<EntityId, EntityId>,
    /// Treat pairs absent from `pairs` as negatives.
    pub closed_world: bool,
}

impl GoldLabels {
    pub fn label(&self, a: &EntityId, b: &EntityId) -> Option<bool> {
        match self.pairs.get(&canonical_pair(a, b)) {
            Some(&l) => Some(l),
            None if self.closed_world => Some(false),
            None => None,
        }
    }

    pub fn positives(&self) -> usize {
        self.pairs.values().filter(|&&l| l).count()
    }

    /// Whether the reference's gold target is an existing entity.
    pub fn existing(&self, reference: &EntityId) -> Option<bool> {
        self.targets.get(reference).map(|t| !t.has_skolem_prefix())
    }

    pub fn insert_pair(&mut self, a: &EntityId, b: &EntityId, label: bool) -> Result<()> {
        let key = canonical_pair(a, b);
        match self.pairs.get(&key) {
            Some(&old) if old != label => Err(Error::Config(format!(
                "pair ({}, {}) labelled both positive and negative",
                key.0, key.1
            ))),
            _ => {
                self.pairs.insert(key, label);
                Ok(())
            }
        }
    }

    /// Parses `a<TAB>b<TAB>{0,1}` lines.
    pub fn parse_pairs(&mut self, text: &str, path: &str) -> Result<()> {
        for (line, cols) in tsv_rows(text) {
            let label = match cols.as_slice() {
                [_, _, l] if l.trim() == "1" => true,
                [_, _, l] if l.trim() == "0" => false,
                _ => {
                    return Err(Error::Parse {
                        path: path.to_string(),
                        line,
                        message: "expected `a<TAB>b<TAB>0|1`".into(),
                    })
                }
            };
            self.insert_pair(&cols[0].into(), &cols[1].into(), label)?;
        }
        Ok(())
    }

    /// Parses `reference<TAB>target` lines.
    pub fn parse_targets(&mut self, text: &str, path: &str) -> Result<()> {
        for (line, cols) in tsv_rows(text) {
            if cols.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line,
                    message: format!("expected 2 tab-separated columns, found {}", cols.len()),
                });
            }
            let (r, t) = (EntityId::new(cols[0]), EntityId::new(cols[1]));
            if let Some(old) = self.targets.get(&r) {
                if *old != t {
                    return Err(Error::Config(format!("reference `{r}` has two gold targets")));
                }
            }
            self.targets.insert(r, t);
        }
        Ok(())
    }

    pub fn load(pairs: Option<&Path>, targets: Option<&Path>) -> Result<Self> {
        let mut gold = GoldLabels::default();
        if let Some(p) = pairs {
            gold.parse_pairs(&read_file(p)?, &p.display().to_string())?;
        }
        if let Some(p) = targets {
            gold.parse_targets(&read_file(p)?, &p.display().to_string())?;
        }
        Ok(gold)
    }

    pub fn pairs_tsv(&self) -> String {
        let mut out = String::new();
        for ((a, b), l) in &self.pairs {
            let _ = writeln!(out, "{a}\t{b}\t{}", u8::from(*l));
        }
        out
    }

    pub fn targets_tsv(&self) -> String {
        let mut out = String::new();
        for (r, t) in &self.targets {
            let _ = writeln!(out, "{r}\t{t}");
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Decisions on pairs without a gold label (excluded).
    pub unlabeled: usize,
}

/// 2·tp / (predicted + actual): the harmonic mean of precision and recall,
/// computed from counts so that it is a single correctly rounded division.
fn f1(tp: usize, predicted: usize, actual: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (predicted + actual) as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision_recall_f1(decisions: &BTreeSet<Pair>, gold: &GoldLabels) -> Prf {
    let (mut tp, mut fp, mut unlabeled) = (0, 0, 0);
    for (a, b) in decisions {
        match gold.label(a, b) {
            Some(true) => tp += 1,
            Some(false) => fp += 1,
            None => unlabeled += 1,
        }
    }
    let fn_ = gold.positives() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Prf {
        precision,
        recall,
        f1: f1(tp, tp + fp, tp + fn_),
        tp,
        fp,
        fn_,
        unlabeled,
    }
}

/// Labelled scored pairs ranked by descending score, ties by pair id.
fn ranked(scores: &Scores, gold: &GoldLabels) -> Vec<(f64, bool)> {
    let mut rows: Vec<(&Pair, f64, bool)> = scores
        .iter()
        .filter_map(|(p, &s)| gold.label(&p.0, &p.1).map(|l| (p, s, l)))
        .collect();
    rows.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    rows.into_iter().map(|(_, s, l)| (s, l)).collect()
}

/// Non-interpolated area under the precision-recall curve. Recall is measured
/// against every gold positive, scored or not.
pub fn auprc(scores: &Scores, gold: &GoldLabels) -> Result<f64> {
    let total = gold.positives();
    if total == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one gold positive".into()));
    }
    let mut tp = 0;
    let mut precision_sum = 0.0;
    let mut exact = Some(Ratio::ZERO);
    for (rank, (_, label)) in ranked(scores, gold).into_iter().enumerate() {
        if label {
            tp += 1;
            precision_sum += tp as f64 / (rank + 1) as f64;
            exact = exact.and_then(|r| r.add(tp as u128, rank as u128 + 1));
        }
    }
    // Small rankings are summed exactly so the result is correctly rounded;
    // otherwise dividing once keeps a perfect ranking at exactly 1.
    if let Some(v) = exact.and_then(|r| r.scaled_down(total as u128)) {
        return Ok(v);
    }
    Ok((precision_sum / total as f64).min(1.0))
}

/// Non-negative rational that gives up (None) instead of overflowing.
#[derive(Clone, Copy)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    const ZERO: Ratio = Ratio { num: 0, den: 1 };
    /// Largest integer that converts to f64 without rounding.
    const EXACT: u128 = 1 << 53;

    fn add(self, num: u128, den: u128) -> Option<Ratio> {
        let g = gcd(self.den, den);
        let den_out = (self.den / g).checked_mul(den)?;
        let num_out = self.num.checked_mul(den / g)?.checked_add(num.checked_mul(self.den / g)?)?;
        let h = gcd(num_out, den_out);
        Some(Ratio {
            num: num_out / h,
            den: den_out / h,
        })
    }

    /// self / k as a correctly rounded f64, if both parts stay exact.
    fn scaled_down(self, k: u128) -> Option<f64> {
        let g = gcd(self.num, k);
        let (num, den) = (self.num / g, self.den.checked_mul(k / g)?);
        (num <= Self::EXACT && den <= Self::EXACT).then(|| num as f64 / den as f64)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Best F1 over every distinct score threshold, with the threshold used.
pub fn best_f1(scores: &Scores, gold: &GoldLabels) -> (f64, Prf) {
    let rows = ranked(scores, gold);
    let total = gold.positives();
    let mut best = (1.0, precision_recall_f1(&BTreeSet::new(), gold));
    let (mut tp, mut fp) = (0, 0);
    for (i, &(s, l)) in rows.iter().enumerate() {
        if l {
            tp += 1;
        } else {
            fp += 1;
        }
        // Only cut between distinct scores.
        if rows.get(i + 1).is_some_and(|n| n.0 == s) {
            continue;
        }
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, total);
        let f = f1(tp, tp + fp, total);
        if f > best.1.f1 {
            best = (
                s,
                Prf {
                    precision: p,
                    recall: r,
                    f1: f,
                    tp,
                    fp,
                    fn_: total - tp,
                    unlabeled: 0,
                },
            );
        }
    }
    best
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitF1 {
    pub f1_existing: f64,
    pub f1_new: f64,
    pub f1_overall: f64,
    /// Matched references absent from the gold targets (excluded).
    pub uncovered: usize,
}

/// F1 of the "matched to an existing entity" and "matched to a new entity"
/// classes over references, and exact-target F1 overall.
pub fn split_f1(matching: &BTreeMap<EntityId, EntityId>, gold: &GoldLabels) -> SplitF1 {
    let mut uncovered = 0;
    let (mut pred_exist, mut pred_new, mut tp_exist, mut tp_new, mut correct) = (0, 0, 0, 0, 0);
    let mut matched = 0;
    for (r, t) in matching {
        let Some(gt) = gold.targets.get(r) else {
            uncovered += 1;
            continue;
        };
        matched += 1;
        let gold_exist = !gt.has_skolem_prefix();
        if t.has_skolem_prefix() {
            pred_new += 1;
            tp_new += usize::from(!gold_exist);
        } else {
            pred_exist += 1;
            tp_exist += usize::from(gold_exist);
        }
        correct += usize::from(t == gt);
    }
    let gold_exist = gold.targets.values().filter(|t| !t.has_skolem_prefix()).count();
    let gold_new = gold.targets.len() - gold_exist;
    SplitF1 {
        f1_existing: f1(tp_exist, pred_exist, gold_exist),
        f1_new: f1(tp_new, pred_new, gold_new),
        f1_overall: f1(correct, matched, gold.targets.len()),
        uncovered,
    }
}

/// Renders `(key, value)` metrics as an aligned table and as `key<TAB>value`.
pub fn render_metrics(rows: &[(String, f64)]) -> (String, String) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut table = String::new();
    let mut kv = String::new();
    for (k, v) in rows {
        let _ = writeln!(table, "{k:<width$}  {v:.4}");
        let _ = writeln!(kv, "{k}\t{v}");
    }
    (table, kv)
}
