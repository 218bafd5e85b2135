//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset.

#[path = "../common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kgresolve::blocking::candidate_triangles;
use kgresolve::datagen::{generate, GenConfig, Instance};
use kgresolve::eval::{auprc, best_f1, precision_recall_f1, split_f1, GoldLabels};
use kgresolve::grounding::{count_groundings, ground, lukasiewicz_distance, GroundingConfig, HingePotential};
use kgresolve::inference::{map_inference, SolverConfig};
use kgresolve::kg::EntityId;
use kgresolve::pipeline::{run, Inputs, PipelineConfig};
use kgresolve::resolution::{cluster, Pair, ResolutionResult, Scores};
use kgresolve::rules::{builtin_ruleset, Exponent, FamilySet};
use kgresolve::similarity::{
    canonical_pair, levenshtein_distance, needleman_wunsch_score, smith_waterman_score, string_similarity, Metric,
};
use kgresolve::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

// 1 ------------------------------------------------------------------------

fn similarity_oracles() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (s, u) = (random_name(&mut rng), random_name(&mut rng));
        let (a, b) = (chars(&s), chars(&u));
        ensure(levenshtein_distance(&a, &b) == levenshtein(&a, &b), || format!("levenshtein({s:?}, {u:?})"))?;
        ensure(needleman_wunsch_score(&a, &b) == needleman_wunsch(&a, &b), || {
            format!("needleman-wunsch({s:?}, {u:?})")
        })?;
        ensure(smith_waterman_score(&a, &b) == smith_waterman(&a, &b), || {
            format!("smith-waterman({s:?}, {u:?})")
        })?;
        let oracle = metric_oracles(&s, &u);
        for m in Metric::ALL {
            let got = string_similarity(m, &s, &u);
            let want = oracle[m.name()];
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("{m}({s:?}, {u:?}) = {got}, oracle {want}"))?;
        }
    }
    within(t.elapsed(), 5.0)?;
    Ok(format!("1000 pairs x 7 metrics, max error {worst:.1e}"))
}

// 2 ------------------------------------------------------------------------

fn lukasiewicz_suite() -> Check {
    let table: [(&[f64], f64, f64); 3] = [(&[1.0, 1.0], 1.0, 0.0), (&[1.0, 1.0], 0.0, 1.0), (&[0.9, 0.8], 0.5, 0.2)];
    for (body, head, want) in table {
        let got = lukasiewicz_distance(body, head).map_err(|e| e.to_string())?;
        ensure((got - want).abs() < 1e-12, || format!("{body:?} -> {head}: {got}, expected {want}"))?;
        ensure(got == lukasiewicz(body, head), || format!("{body:?} -> {head} differs from formula"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4);
        let body: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let head = rng.gen_range(0.0..=1.0);
        let got = lukasiewicz_distance(&body, head).map_err(|e| e.to_string())?;
        ensure(got == lukasiewicz(&body, head), || {
            format!("{body:?} -> {head}: {got} vs {}", lukasiewicz(&body, head))
        })?;
    }
    Ok("3 tabulated + 1000 random cases exact".into())
}

// 3 ------------------------------------------------------------------------

fn grounding_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rules = builtin_ruleset(Scenario::Merge, &FamilySet::all());
    ensure(rules.rules.len() == 18, || format!("{} merge rules", rules.rules.len()))?;
    let cfg = GroundingConfig::default();
    let mut total = 0;
    for i in 0..50 {
        let inst = small_instance(&mut rng, 6);
        let tri = candidate_triangles(&inst.candidates);
        let got = ground(&rules, &inst.graph, &inst.candidates, &tri, &cfg).map_err(|e| e.to_string())?;
        let want = naive_ground(&rules, &inst.graph, &inst.candidates);
        same_potentials(&canonical(got.potentials.clone()), &canonical(want.clone()), 1e-9)
            .map_err(|e| format!("instance {i}: {e}"))?;
        let counts =
            count_groundings(&rules, &inst.graph, &inst.candidates, &tri, &cfg).map_err(|e| e.to_string())?;
        let mut oracle_counts: BTreeMap<String, usize> = rules.rules.iter().map(|r| (r.name.clone(), 0)).collect();
        for p in &want {
            *oracle_counts.get_mut(p.rule.as_ref()).unwrap() += 1;
        }
        ensure(counts == oracle_counts, || format!("instance {i}: counts {counts:?} vs {oracle_counts:?}"))?;
        ensure(counts["transitivity"] == 3 * tri.len(), || {
            format!("instance {i}: transitivity {} vs 3 x {}", counts["transitivity"], tri.len())
        })?;
        let wedges = wedge_count(&inst.candidates);
        ensure(counts["sparsity"] == wedges, || {
            format!("instance {i}: sparsity {} vs {wedges} wedges", counts["sparsity"])
        })?;
        total += want.len();
    }
    within(t.elapsed(), 30.0)?;
    Ok(format!("50 instances, {total} potentials matched"))
}

// 4 ------------------------------------------------------------------------

fn objective(ps: &[HingePotential], x: &[f64]) -> f64 {
    ps.iter()
        .map(|p| {
            let d: f64 = (p.coeffs.iter().map(|&(a, c)| c * x[a]).sum::<f64>() + p.constant).max(0.0);
            p.weight * if p.exponent == Exponent::Squared { d * d } else { d }
        })
        .sum()
}

/// Grid minimum over points k·step inside [lo, hi]ⁿ.
fn grid_min(ps: &[HingePotential], lo: &[f64], hi: &[f64], step: f64) -> (f64, Vec<f64>) {
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| {
            let (a, b) = (((l / step) - 1e-9).ceil() as i64, ((h / step) + 1e-9).floor() as i64);
            (a..=b).map(|k| (k as f64 * step).clamp(0.0, 1.0)).collect()
        })
        .collect();
    let mut idx = vec![0; axes.len()];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let x: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        let v = objective(ps, &x);
        if v < best.0 {
            best = (v, x);
        }
        let mut d = 0;
        loop {
            if d == axes.len() {
                return best;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Grid search ending at step 1e−3: exhaustive for up to two atoms, otherwise
/// refined around the best coarse point of each round.
fn brute_force(ps: &[HingePotential], n: usize) -> f64 {
    if n <= 2 {
        return grid_min(ps, &vec![0.0; n], &vec![1.0; n], 1e-3).0;
    }
    let mut best = grid_min(ps, &vec![0.0; n], &vec![1.0; n], 0.02);
    for (radius, step) in [(0.04, 0.005), (0.01, 0.001)] {
        let lo: Vec<f64> = best.1.iter().map(|v| (v - radius).max(0.0)).collect();
        let hi: Vec<f64> = best.1.iter().map(|v| (v + radius).min(1.0)).collect();
        let refined = grid_min(ps, &lo, &hi, step);
        if refined.0 <= best.0 {
            best = refined;
        }
    }
    best.0
}

fn random_potentials(rng: &mut impl Rng, n: usize) -> Vec<HingePotential> {
    let m = rng.gen_range(1..=8);
    (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=n);
            let mut atoms: Vec<usize> = (0..n).collect();
            for i in 0..n {
                atoms.swap(i, rng.gen_range(i..n));
            }
            let mut coeffs: Vec<(usize, f64)> = atoms[..k]
                .iter()
                .map(|&a| (a, if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.2..=1.0)))
                .collect();
            coeffs.sort_by_key(|c| c.0);
            HingePotential {
                rule: "random".into(),
                weight: rng.gen_range(0.1..=10.0),
                coeffs,
                constant: rng.gen_range(-1.0..=1.0),
                exponent: if rng.gen_bool(0.5) { Exponent::Linear } else { Exponent::Squared },
            }
        })
        .collect()
}

fn prior(weight: f64, positive: bool) -> HingePotential {
    HingePotential {
        rule: if positive { "positive_prior" } else { "negative_prior" }.into(),
        weight,
        coeffs: vec![(0, if positive { -1.0 } else { 1.0 })],
        constant: if positive { 1.0 } else { 0.0 },
        exponent: Exponent::Squared,
    }
}

fn inference_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(1..=4);
        let ps = random_potentials(&mut rng, n);
        let a = map_inference(&ps, n, &cfg).map_err(|e| e.to_string())?;
        let admm = objective(&ps, &a.values);
        let grid = brute_force(&ps, n);
        let gap = (admm - grid).abs();
        worst = worst.max(gap);
        ensure(gap <= 4e-3, || format!("instance {i}: ADMM {admm}, grid {grid}"))?;
    }
    let mut closed: f64 = 0.0;
    for _ in 0..20 {
        let (w1, w2) = (rng.gen_range(0.1..=10.0), rng.gen_range(0.1..=10.0));
        let a = map_inference(&[prior(w1, false), prior(w2, true)], 1, &cfg).map_err(|e| e.to_string())?;
        let want = w2 / (w1 + w2);
        closed = closed.max((a.values[0] - want).abs());
        ensure((a.values[0] - want).abs() <= 1e-4, || format!("priors {w1}/{w2}: {} vs {want}", a.values[0]))?;
    }
    within(t.elapsed(), 60.0)?;
    Ok(format!("max objective gap {worst:.1e}; two-prior error {closed:.1e}"))
}

// 5 ------------------------------------------------------------------------

const SEEDS: u64 = 5;
const EXTRACTION_CONFIGS: [(&str, &str); 4] = [
    ("Basic, Local", "basic-local"),
    ("Basic & KG, Local", "basic-local,abstract-kg-local"),
    ("Basic, All", "basic"),
    ("Basic & KG, All", "basic,abstract-kg"),
];
const MERGE_CONFIGS: [(&str, &str); 3] = [
    ("Basic & NewEntity, Local", "basic-local,new-entity-local"),
    ("Basic & Domain, All; NewEntity, Local", "basic,domain,new-entity-local"),
    ("Basic & Domain & NewEntity, All", "basic,domain,new-entity"),
];

struct Resolved {
    result: ResolutionResult,
}

struct Runs {
    instances: Vec<Instance>,
    /// Per configuration, one result per seed (groundings are dropped).
    outcomes: Vec<Vec<Resolved>>,
    elapsed: Duration,
}

fn run_all(instances: Vec<Instance>, scenario: Scenario, configs: &[(&str, &str)]) -> Runs {
    let t = Instant::now();
    let outcomes = configs
        .iter()
        .map(|(_, fams)| {
            let cfg = PipelineConfig::new(scenario).with_families(FamilySet::parse(fams).expect("family list"));
            instances
                .iter()
                .map(|inst| {
                    let out = run(&cfg, Inputs::new(&inst.source, inst.target.as_ref())).expect("pipeline run");
                    Resolved { result: out.result }
                })
                .collect()
        })
        .collect();
    Runs {
        instances,
        outcomes,
        elapsed: t.elapsed(),
    }
}

fn extraction_runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let instances = (0..SEEDS)
            .map(|seed| {
                let cfg = GenConfig {
                    seed,
                    num_entities: 500,
                    refs_per_entity: 2,
                    name_noise: 0.15,
                    label_dropout: 0.2,
                    ..GenConfig::for_scenario(Scenario::Extractions, false)
                };
                generate(&cfg).expect("generator")
            })
            .collect();
        run_all(instances, Scenario::Extractions, &EXTRACTION_CONFIGS)
    })
}

fn merge_runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let instances = (0..SEEDS)
            .map(|seed| {
                let cfg = GenConfig {
                    seed,
                    num_entities: 1000,
                    new_entity_fraction: 0.75,
                    ..GenConfig::for_scenario(Scenario::Merge, true)
                };
                generate(&cfg).expect("generator")
            })
            .collect();
        run_all(instances, Scenario::Merge, &MERGE_CONFIGS)
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn extraction_trend() -> Check {
    let runs = extraction_runs();
    let scores: Vec<f64> = runs
        .outcomes
        .iter()
        .map(|per_seed| {
            mean(per_seed
                .iter()
                .zip(&runs.instances)
                .map(|(o, inst)| auprc(&o.result.scores, &inst.gold).expect("gold positives")))
        })
        .collect();
    let table: Vec<String> = EXTRACTION_CONFIGS
        .iter()
        .zip(&scores)
        .map(|((name, _), s)| format!("{name} {s:.4}"))
        .collect();
    let detail = format!("AUPRC: {}", table.join("; "));
    let [basic_local, kg_local, _, kg_all] = [scores[0], scores[1], scores[2], scores[3]];
    ensure(kg_all > kg_local, || format!("{detail}: Basic & KG All not above Local"))?;
    ensure(kg_local >= basic_local, || format!("{detail}: KG Local below Basic Local"))?;
    ensure(kg_all - basic_local >= 0.03, || format!("{detail}: gap {:.4} < 0.03", kg_all - basic_local))?;
    within(runs.elapsed, 300.0).map_err(|e| format!("{detail}: {e}"))?;
    Ok(detail)
}

// 6 ------------------------------------------------------------------------

fn merge_trend() -> Check {
    let runs = merge_runs();
    let splits: Vec<[f64; 3]> = runs
        .outcomes
        .iter()
        .map(|per_seed| {
            let s: Vec<_> = per_seed
                .iter()
                .zip(&runs.instances)
                .map(|(o, inst)| split_f1(o.result.matching.as_ref().expect("matching"), &inst.gold))
                .collect();
            [
                mean(s.iter().map(|x| x.f1_overall)),
                mean(s.iter().map(|x| x.f1_existing)),
                mean(s.iter().map(|x| x.f1_new)),
            ]
        })
        .collect();
    let table: Vec<String> = MERGE_CONFIGS
        .iter()
        .zip(&splits)
        .map(|((name, _), s)| format!("{name}: F1 {:.4} (exist {:.4}, new {:.4})", s[0], s[1], s[2]))
        .collect();
    let detail = table.join("; ");
    let (local, domain, collective) = (splits[0][0], splits[1][0], splits[2][0]);
    ensure(domain - local >= 0.02, || format!("{detail}: domain gap {:.4} < 0.02", domain - local))?;
    ensure(collective - domain >= 0.02, || {
        format!("{detail}: new-entity gap {:.4} < 0.02", collective - domain)
    })?;
    within(runs.elapsed, 600.0).map_err(|e| format!("{detail}: {e}"))?;
    Ok(detail)
}

// 7 ------------------------------------------------------------------------

fn random_decisions(rng: &mut impl Rng) -> (Vec<EntityId>, BTreeSet<Pair>) {
    let n = rng.gen_range(1..=30);
    let ents: Vec<EntityId> = (0..n).map(|i| EntityId::new(format!("v{i:02}"))).collect();
    let p = rng.gen_range(0.0..0.15);
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.insert(canonical_pair(&ents[i], &ents[j]));
            }
        }
    }
    (ents, edges)
}

fn decision_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for g in 0..100 {
        let (ents, edges) = random_decisions(&mut rng);
        let c = cluster(&edges, ents.iter());
        let mut groups: BTreeMap<&EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        for (e, id) in &c {
            ensure(c.get(id) == Some(id), || format!("graph {g}: cluster id {id} is not its own representative"))?;
            groups.entry(id).or_default().insert(e.clone());
        }
        let mut mine: Vec<BTreeSet<EntityId>> = groups.into_values().collect();
        mine.sort();
        ensure(mine == components(&edges, &ents), || format!("graph {g}: partition differs from oracle"))?;
    }

    let ext = extraction_runs();
    let mut violations = Vec::new();
    for (ci, (name, fams)) in EXTRACTION_CONFIGS.iter().enumerate() {
        if fams.contains("local") {
            continue;
        }
        let total: usize = ext.outcomes[ci]
            .iter()
            .map(|o| {
                let pairs: Vec<Pair> = o.result.scores.keys().cloned().collect();
                violated_triangles(&pairs, &o.result.decisions)
            })
            .sum();
        violations.push(format!("{name} {total}"));
    }
    let all_zero = violations.iter().all(|v| v.ends_with(" 0"));

    let merge = merge_runs();
    for (ci, per_seed) in merge.outcomes.iter().enumerate() {
        for (seed, o) in per_seed.iter().enumerate() {
            let m = o.result.matching.as_ref().expect("matching");
            let mut used = BTreeSet::new();
            for t in m.values().filter(|t| !t.has_skolem_prefix()) {
                ensure(used.insert(t), || format!("{} seed {seed}: {t} matched twice", MERGE_CONFIGS[ci].0))?;
            }
            let refs: BTreeSet<&EntityId> = merge.instances[seed].gold.targets.keys().collect();
            ensure(m.keys().collect::<BTreeSet<_>>() == refs, || {
                format!("{} seed {seed}: matching not total", MERGE_CONFIGS[ci].0)
            })?;
        }
    }
    let detail = format!(
        "100 clusterings match oracle; matchings injective; violated triangles: {}",
        violations.join(", ")
    );
    ensure(all_zero, || detail.clone())?;
    Ok(detail)
}

// 8 ------------------------------------------------------------------------

fn gold(rows: &[(&str, &str, bool)]) -> GoldLabels {
    let mut g = GoldLabels::default();
    for (a, b, l) in rows {
        g.insert_pair(&EntityId::new(*a), &EntityId::new(*b), *l).expect("distinct pair");
    }
    g
}

fn pair(a: &str, b: &str) -> Pair {
    canonical_pair(&EntityId::new(a), &EntityId::new(b))
}

fn metric_fixtures() -> Check {
    let g = gold(&[("a", "b", true), ("c", "d", true)]);
    let r = precision_recall_f1(&[pair("a", "b")].into(), &g);
    ensure((r.precision, r.recall, r.f1) == (1.0, 0.5, 2.0 / 3.0), || format!("prf {r:?}"))?;

    // Positives at ranks 1 and 3: (1/1 + 2/3) / 2.
    let g = gold(&[("a", "b", true), ("c", "d", false), ("e", "f", true)]);
    let s: Scores = [(pair("a", "b"), 0.9), (pair("c", "d"), 0.8), (pair("e", "f"), 0.7)].into();
    let a = auprc(&s, &g).map_err(|e| e.to_string())?;
    ensure(a == 5.0 / 6.0, || format!("AUPRC {a:?}, expected 5/6"))?;
    // Best cut keeps everything: P = 2/3, R = 1.
    let (cut, best) = best_f1(&s, &g);
    ensure(cut == 0.7 && best.f1 == 0.8, || format!("best F1 {} at {cut}", best.f1))?;

    let perfect: Scores = [(pair("a", "b"), 0.9), (pair("e", "f"), 0.8), (pair("c", "d"), 0.1)].into();
    ensure(auprc(&perfect, &g).map_err(|e| e.to_string())? == 1.0, || "perfect ranking".into())?;

    let mut g = GoldLabels::default();
    let targets = |rows: &[(&str, &str)]| -> BTreeMap<EntityId, EntityId> {
        rows.iter().map(|(r, t)| (EntityId::new(*r), EntityId::new(*t))).collect()
    };
    g.targets = targets(&[("x", "t"), ("n1", "__new__n1"), ("n2", "__new__n2"), ("n3", "__new__n3")]);
    let m = targets(&[("x", "t"), ("n1", "u"), ("n2", "__new__n2"), ("n3", "__new__n3")]);
    let s = split_f1(&m, &g);
    // Existing: P 1/2, R 1. New: P 1, R 2/3. Overall: 3 of 4 correct.
    ensure((s.f1_existing, s.f1_new, s.f1_overall) == (2.0 / 3.0, 0.8, 0.75), || format!("split {s:?}"))?;

    g.targets = targets(&[("r1", "__new__r1"), ("r2", "__new__r2")]);
    let s = split_f1(&g.targets.clone(), &g);
    ensure((s.f1_existing, s.f1_new, s.f1_overall) == (0.0, 1.0, 1.0), || format!("all-new split {s:?}"))?;
    Ok("PRF, AUPRC = 5/6, best F1, split F1 fixtures exact".into())
}

// 9 ------------------------------------------------------------------------

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn scale_smoke() -> Check {
    // Reset the peak-RSS counter so earlier criteria do not count.
    let _ = std::fs::write("/proc/self/clear_refs", "5");
    let inst = generate(&GenConfig {
        seed: 9,
        num_entities: 1000,
        new_entity_fraction: 0.75,
        ..GenConfig::for_scenario(Scenario::Merge, true)
    })
    .map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        workers: Some(4),
        ..PipelineConfig::new(Scenario::Merge)
    };
    let mut runs = Vec::new();
    let mut times = Vec::new();
    for _ in 0..2 {
        let t = Instant::now();
        let out = run(&cfg, Inputs::new(&inst.source, inst.target.as_ref())).map_err(|e| e.to_string())?;
        times.push(t.elapsed());
        runs.push(out);
    }
    let (a, b) = (&runs[0], &runs[1]);
    let candidates = a.report.candidates;
    ensure(candidates >= 10_000, || format!("only {candidates} candidate pairs"))?;
    for t in &times {
        within(*t, 60.0)?;
    }
    let scores_equal = a.result.scores.len() == b.result.scores.len()
        && a.result.scores.iter().zip(&b.result.scores).all(|(x, y)| x.0 == y.0 && x.1.to_bits() == y.1.to_bits());
    ensure(scores_equal && a.result == b.result, || "two runs differ".into())?;
    ensure(a.report.iterations == b.report.iterations, || "iteration counts differ".into())?;
    let rss = peak_rss_bytes().ok_or("peak memory unavailable")?;
    ensure(rss < 2 << 30, || format!("peak memory {} MiB", rss >> 20))?;
    Ok(format!(
        "{candidates} candidates, {} potentials, runs {:.1}s / {:.1}s, peak {} MiB, identical",
        a.report.potentials,
        times[0].as_secs_f64(),
        times[1].as_secs_f64(),
        rss >> 20
    ))
}

fn main() {
    let criteria: [(u8, &str, fn() -> Check); 9] = [
        (1, "similarity oracle equivalence", similarity_oracles),
        (2, "Lukasiewicz unit suite", lukasiewicz_suite),
        (3, "grounding oracle", grounding_oracle),
        (4, "inference oracle", inference_oracle),
        (5, "extraction trend", extraction_trend),
        (6, "merge trend", merge_trend),
        (7, "decision-layer invariants", decision_invariants),
        (8, "metric fixtures", metric_fixtures),
        (9, "scale smoke test", scale_smoke),
    ];
    let wanted: BTreeSet<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
