use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use kgresolve::datagen::{generate, GenConfig};
use kgresolve::eval::GoldLabels;
use kgresolve::io::{
    clusters_tsv, decisions_tsv, matching_tsv, read_matching, read_pairs, read_scores, report_tsv, scores_tsv,
    trace_tsv, write_file,
};
use kgresolve::kg::{load_graph, GraphFiles, KnowledgeGraph, Origin};
use kgresolve::pipeline::{metrics, run, Inputs, Outcome, PipelineConfig, RuleSource};
use kgresolve::resolution::{threshold_scores, ResolutionResult};
use kgresolve::rules::{parse_rules, FamilySet};
use kgresolve::similarity::{canonical_pair, SimilarityCache};
use kgresolve::Scenario;
use sha2::{Digest, Sha256};

use crate::args::{AblateArgs, EvalArgs, GenArgs, GoldFlags, InputFlags, ResolveArgs, RunFlags};
use crate::settings::ConfigFile;

pub const WORKERS_ENV: &str = "KGRESOLVE_WORKERS";

/// How a command finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

struct Settings {
    pipeline: PipelineConfig,
    seed: Option<u64>,
}

fn settings(run: &RunFlags) -> Result<Settings> {
    let file = match &run.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    let scenario: Scenario = file
        .pick(run.scenario.clone(), "scenario")?
        .map(|s: String| s.parse())
        .transpose()?
        .unwrap_or(Scenario::Extractions);
    let mut cfg = PipelineConfig::new(scenario);

    // A rule-source flag replaces whichever source the file names.
    let (rules, families) = match (&run.rules, &run.families) {
        (None, None) => (file.get::<PathBuf>("rules")?, file.get::<String>("families")?),
        (r, f) => (r.clone(), f.clone()),
    };
    match (rules, families) {
        (Some(_), Some(_)) => bail!("the settings file names both `rules` and `families`"),
        (Some(path), None) => cfg.rules = RuleSource::Program(read_rules(&path)?),
        (None, Some(list)) => cfg = cfg.with_families(FamilySet::parse(&list)?),
        (None, None) => {}
    }

    if let Some(v) = file.pick(run.tau, "tau")? {
        cfg.blocking.tau = v;
    }
    if let Some(v) = file.pick(run.max_per_entity, "max_per_entity")? {
        cfg.blocking.max_per_entity = v;
    }
    if let Some(v) = file.get("skolem_similarity")? {
        cfg.blocking.skolem_similarity = v;
    }
    if let Some(v) = file.pick(run.threshold, "threshold")? {
        cfg.threshold = v;
    }
    if let Some(v) = file.pick(run.max_iter, "max_iter")? {
        cfg.solver.max_iterations = v;
    }
    if let Some(v) = file.pick(run.tol, "tol")? {
        cfg.solver.primal_tol = v;
        cfg.solver.dual_tol = v;
    }
    if let Some(v) = file.get("rho")? {
        cfg.solver.rho = v;
    }
    if let Some(v) = file.get("init")? {
        cfg.solver.initial_value = v;
    }
    cfg.workers = match file.pick(run.workers, "workers")? {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(raw) => Some(raw.trim().parse().with_context(|| format!("{WORKERS_ENV}=`{raw}`"))?),
            Err(_) => None,
        },
    };
    cfg.solver.trace = run.solver_trace.is_some();
    cfg.check()?;
    Ok(Settings {
        pipeline: cfg,
        seed: file.pick(run.seed, "seed")?,
    })
}

fn read_rules(path: &Path) -> Result<kgresolve::rules::RuleSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_rules(&text).with_context(|| format!("in rule program {}", path.display()))
}

/// The explicit path, else `name` inside the input directory (optional
/// files must also exist there).
fn locate(explicit: &Option<PathBuf>, dir: &Option<PathBuf>, name: &str, optional: bool) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        let p = dir.as_ref()?.join(name);
        (!optional || p.exists()).then_some(p)
    })
}

struct LoadedInputs {
    source: KnowledgeGraph,
    target: Option<KnowledgeGraph>,
    cache: SimilarityCache,
    paths: Vec<PathBuf>,
}

fn graph_files(
    inputs: &InputFlags,
    prefix: &str,
    [triples, labels, ontology, names]: [&Option<PathBuf>; 4],
) -> Result<GraphFiles> {
    let dir = &inputs.input;
    let required = |flag: &Option<PathBuf>, name: &str| {
        locate(flag, dir, &format!("{prefix}{name}"), false)
            .with_context(|| format!("no {prefix}{name}: pass --input or --{}{}", prefix.replace('_', "-"), name.trim_end_matches(".tsv")))
    };
    Ok(GraphFiles {
        triples: required(triples, "triples.tsv")?,
        labels: required(labels, "labels.tsv")?,
        ontology: locate(ontology, dir, &format!("{prefix}ontology.tsv"), true),
        names: locate(names, dir, &format!("{prefix}names.tsv"), true),
    })
}

fn load_inputs(inputs: &InputFlags, scenario: Scenario) -> Result<LoadedInputs> {
    let mut paths = Vec::new();
    let mut load = |files: GraphFiles, origin| -> Result<KnowledgeGraph> {
        paths.extend([files.triples.clone(), files.labels.clone()]);
        paths.extend(files.ontology.iter().chain(&files.names).cloned());
        Ok(load_graph(&files, origin)?)
    };
    let source_origin = match scenario {
        Scenario::Extractions => Origin::Extraction,
        _ => Origin::GraphA,
    };
    let source = load(
        graph_files(inputs, "", [&inputs.triples, &inputs.labels, &inputs.ontology, &inputs.names])?,
        source_origin,
    )?;
    let target = match scenario {
        Scenario::Extractions => None,
        _ => Some(load(
            graph_files(
                inputs,
                "target_",
                [&inputs.target_triples, &inputs.target_labels, &inputs.target_ontology, &inputs.target_names],
            )?,
            Origin::GraphB,
        )?),
    };
    let cache = match &inputs.sim_cache {
        Some(p) => {
            paths.push(p.clone());
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimilarityCache::parse(&text, &p.display().to_string())?
        }
        None => SimilarityCache::default(),
    };
    Ok(LoadedInputs {
        source,
        target,
        cache,
        paths,
    })
}

fn load_gold(flags: &GoldFlags, dir: &Option<PathBuf>) -> Result<Option<GoldLabels>> {
    let pairs = locate(&flags.gold, dir, "gold.tsv", true);
    let targets = locate(&flags.gold_match, dir, "goldmatch.tsv", true);
    if pairs.is_none() && targets.is_none() {
        return Ok(None);
    }
    let mut gold = GoldLabels::load(pairs.as_deref(), targets.as_deref())?;
    gold.closed_world = !flags.open_world;
    Ok(Some(gold))
}

/// Fails when two outputs, or an output and an input, share a path.
fn check_distinct(outputs: &[PathBuf], inputs: &[PathBuf]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in outputs {
        if !seen.insert(p) {
            bail!("output path {} is used twice", p.display());
        }
    }
    if let Some(p) = inputs.iter().find(|p| seen.contains(p)) {
        bail!("output path {} would overwrite an input", p.display());
    }
    Ok(())
}

fn run_once(cfg: &PipelineConfig, loaded: &LoadedInputs) -> Result<Outcome> {
    let inputs = Inputs {
        cache: &loaded.cache,
        ..Inputs::new(&loaded.source, loaded.target.as_ref())
    };
    Ok(run(cfg, inputs)?)
}

fn print_metrics(rows: &[(String, f64)]) {
    let (table, kv) = kgresolve::eval::render_metrics(rows);
    print!("{table}\n{kv}");
}

pub fn resolve(args: &ResolveArgs) -> Result<Status> {
    let started = Instant::now();
    let s = settings(&args.run)?;
    let scenario = s.pipeline.scenario;
    let loaded = load_inputs(&args.inputs, scenario)?;

    let scores_path = args.out.join("scores.tsv");
    let decisions_path = args.out.join("decisions.tsv");
    let grouping_path = args.out.join(match scenario {
        Scenario::Extractions => "clusters.tsv",
        _ => "matching.tsv",
    });
    let report_path = args.out.join("report.tsv");
    let mut outputs = vec![scores_path.clone(), decisions_path.clone(), grouping_path.clone(), report_path.clone()];
    outputs.extend(args.run.dump_groundings.iter().chain(&args.run.solver_trace).cloned());
    check_distinct(&outputs, &loaded.paths)?;
    let gold = load_gold(&args.gold, &args.inputs.input)?;

    let out = run_once(&s.pipeline, &loaded)?;
    let result = &out.result;
    write_file(&scores_path, &scores_tsv(&result.scores))?;
    write_file(&decisions_path, &decisions_tsv(&result.decisions))?;
    match (&result.clusters, &result.matching) {
        (Some(c), _) => write_file(&grouping_path, &clusters_tsv(c))?,
        (None, Some(m)) => write_file(&grouping_path, &matching_tsv(m))?,
        (None, None) => unreachable!("every scenario yields clusters or a matching"),
    }
    if let Some(p) = &args.run.dump_groundings {
        write_file(p, &out.grounding.dump())?;
    }
    if let Some(p) = &args.run.solver_trace {
        write_file(p, &trace_tsv(&out.assignment.trace))?;
    }
    let mut rows = out.report.rows();
    if let Some(seed) = s.seed {
        rows.push(("seed".into(), seed.to_string()));
    }
    rows.push(("seconds.total".into(), format!("{:.3}", started.elapsed().as_secs_f64())));
    write_file(&report_path, &report_tsv(&rows))?;

    let r = &out.report;
    eprintln!(
        "{} candidates, {} potentials, {} iterations, {} decisions",
        r.candidates, r.potentials, r.iterations, r.decisions
    );
    if let Some(gold) = gold {
        print_metrics(&metrics(result, &gold)?);
    }
    if r.converged {
        Ok(Status::Done)
    } else {
        eprintln!(
            "warning: solver stopped after {} iterations without converging; outputs are flagged converged=false",
            r.iterations
        );
        Ok(Status::NotConverged)
    }
}

pub fn eval(args: &EvalArgs) -> Result<Status> {
    let scores = read_scores(&args.scores)?;
    let decisions = match &args.decisions {
        Some(p) => read_pairs(p)?.iter().map(|(a, b)| canonical_pair(a, b)).collect(),
        None => threshold_scores(&scores, args.threshold),
    };
    let matching = args.matching.as_deref().map(read_matching).transpose()?;
    let flags = GoldFlags {
        gold: Some(args.gold.clone()),
        gold_match: args.gold_match.clone(),
        open_world: args.open_world,
    };
    let gold = load_gold(&flags, &None)?.expect("gold path given");
    if matching.is_some() && gold.targets.is_empty() {
        bail!("--matching needs --gold-match for split F1");
    }
    let result = ResolutionResult {
        scores,
        decisions,
        matching,
        ..ResolutionResult::default()
    };
    print_metrics(&metrics(&result, &gold)?);
    Ok(Status::Done)
}

pub fn gen(args: &GenArgs) -> Result<Status> {
    let scenario: Scenario = args.scenario.parse()?;
    let mut cfg = GenConfig {
        seed: args.seed,
        ..GenConfig::for_scenario(scenario, args.domain)
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = args.$flag { cfg.$field = v; })*
        };
    }
    set!(
        entities => num_entities,
        refs_per_entity => refs_per_entity,
        name_noise => name_noise,
        label_dropout => label_dropout,
        relation_dropout => relation_dropout,
        new_entity_fraction => new_entity_fraction,
        labels => num_labels,
        relations => num_relations,
        homonym_rate => homonym_rate,
    );
    let labels = cfg.effective_labels();
    cfg.num_mutex_pairs = args
        .mutex_pairs
        .unwrap_or(labels * labels.saturating_sub(1) / 2);
    let inst = generate(&cfg)?;
    inst.write(&args.out)?;
    let manifest = inst.manifest();
    println!("{}", hex::encode(Sha256::digest(manifest.as_bytes())));
    eprintln!("wrote {} files to {}", inst.files().len() + 1, args.out.display());
    Ok(Status::Done)
}

/// `NAME=FAMILIES`, or bare families named after themselves.
fn parse_variant(spec: &str) -> Result<(String, FamilySet)> {
    let (name, list) = spec.split_once('=').unwrap_or((spec, spec));
    let families = FamilySet::parse(list).with_context(|| format!("variant `{spec}`"))?;
    if families.0.is_empty() {
        bail!("variant `{spec}` enables no rule family");
    }
    Ok((name.trim().to_string(), families))
}

pub fn ablate(args: &AblateArgs) -> Result<Status> {
    if args.variants.len() < 2 {
        bail!("ablate compares configurations; give at least two --variant");
    }
    if args.run.rules.is_some() {
        bail!("ablate varies builtin families; --rules is not allowed");
    }
    if args.run.dump_groundings.is_some() || args.run.solver_trace.is_some() {
        bail!("--dump-groundings and --solver-trace apply to resolve only");
    }
    let variants: Vec<(String, FamilySet)> = args.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    let base = settings(&args.run)?.pipeline;
    let loaded = load_inputs(&args.inputs, base.scenario)?;
    if let Some(out) = &args.out {
        check_distinct(std::slice::from_ref(out), &loaded.paths)?;
    }
    let gold = load_gold(&args.gold, &args.inputs.input)?
        .context("ablate needs gold labels: pass --gold or an --input directory with gold.tsv")?;

    let mut header: Vec<String> = vec!["configuration".into()];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut status = Status::Done;
    for (name, families) in &variants {
        let cfg = base.clone().with_families(families.clone());
        let out = run_once(&cfg, &loaded)?;
        let m = metrics(&out.result, &gold)?;
        let keep: Vec<&(String, f64)> = m
            .iter()
            .filter(|(k, _)| !k.starts_with("best_f1"))
            .collect();
        if rows.is_empty() {
            header.extend(keep.iter().map(|(k, _)| k.clone()));
            header.push("converged".into());
        }
        let mut row = vec![name.clone()];
        row.extend(keep.iter().map(|(_, v)| format!("{v:.4}")));
        row.push(out.report.converged.to_string());
        if !out.report.converged {
            status = Status::NotConverged;
        }
        eprintln!("{name}: {} iterations", out.report.iterations);
        rows.push(row);
    }
    print!("{}", aligned(&header, &rows));
    if let Some(path) = &args.out {
        let mut tsv = header.join("\t") + "\n";
        for r in &rows {
            tsv.push_str(&r.join("\t"));
            tsv.push('\n');
        }
        write_file(path, &tsv)?;
    }
    Ok(status)
}

fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, &w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
