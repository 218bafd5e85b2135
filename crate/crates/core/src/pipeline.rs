//! End-to-end resolution: block, ground, infer, decide.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::blocking::{block_candidates, candidate_triangles, reference_ids, BlockingConfig};
use crate::error::{Error, Result};
use crate::eval::{auprc, best_f1, precision_recall_f1, split_f1, GoldLabels};
use crate::grounding::{ground, Grounding, GroundingConfig};
use crate::inference::{map_inference, Assignment, SolverConfig};
use crate::kg::{self, skolemize, EntityId, KnowledgeGraph};
use crate::par;
use crate::resolution::{
    bipartite_match, cluster, decide, transitivity_violations, ResolutionResult, DEFAULT_THRESHOLD,
};
use crate::rules::{builtin_ruleset, validate_ruleset, FamilySet, RuleSet};
use crate::similarity::SimilarityCache;
use crate::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub enum RuleSource {
    Builtin(FamilySet),
    Program(RuleSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub scenario: Scenario,
    pub rules: RuleSource,
    pub blocking: BlockingConfig,
    pub grounding: GroundingConfig,
    pub solver: SolverConfig,
    pub threshold: f64,
    /// Worker threads for blocking, grounding and inference (`None`: ambient pool).
    pub workers: Option<usize>,
}

impl PipelineConfig {
    pub fn new(scenario: Scenario) -> Self {
        PipelineConfig {
            scenario,
            rules: RuleSource::Builtin(FamilySet::all()),
            blocking: BlockingConfig::default(),
            grounding: GroundingConfig::default(),
            solver: SolverConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            workers: None,
        }
    }

    pub fn with_families(mut self, families: FamilySet) -> Self {
        self.rules = RuleSource::Builtin(families);
        self
    }

    pub fn ruleset(&self) -> RuleSet {
        match &self.rules {
            RuleSource::Builtin(f) => builtin_ruleset(self.scenario, f),
            RuleSource::Program(rs) => rs.clone(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0,1]", self.threshold)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.blocking.check()?;
        self.solver.check()
    }
}

/// Graph inputs of one run.
#[derive(Clone, Copy, Debug)]
pub struct Inputs<'a> {
    pub source: &'a KnowledgeGraph,
    pub target: Option<&'a KnowledgeGraph>,
    pub cache: &'a SimilarityCache,
    /// Extra candidate pairs injected after blocking.
    pub extra: &'a [(EntityId, EntityId)],
}

impl<'a> Inputs<'a> {
    pub fn new(source: &'a KnowledgeGraph, target: Option<&'a KnowledgeGraph>) -> Self {
        static EMPTY: std::sync::OnceLock<SimilarityCache> = std::sync::OnceLock::new();
        Inputs {
            source,
            target,
            cache: EMPTY.get_or_init(SimilarityCache::default),
            extra: &[],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub rules: Vec<String>,
    pub candidates: usize,
    pub triangles: usize,
    pub atoms: usize,
    pub potentials: usize,
    pub groundings: BTreeMap<String, usize>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub decisions: usize,
    pub new_entities: usize,
    pub transitivity_violations: usize,
    /// Stage name to wall-clock seconds.
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    /// Flat `key`/`value` rows for the run-report file.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("scenario".to_string(), self.scenario.clone()),
            ("rules".to_string(), self.rules.join(",")),
            ("candidates".to_string(), self.candidates.to_string()),
            ("triangles".to_string(), self.triangles.to_string()),
            ("atoms".to_string(), self.atoms.to_string()),
            ("potentials".to_string(), self.potentials.to_string()),
        ];
        for (rule, n) in &self.groundings {
            rows.push((format!("groundings.{rule}"), n.to_string()));
        }
        rows.extend([
            ("iterations".to_string(), self.iterations.to_string()),
            ("converged".to_string(), self.converged.to_string()),
            ("objective".to_string(), self.objective.to_string()),
            ("primal_residual".to_string(), self.primal_residual.to_string()),
            ("dual_residual".to_string(), self.dual_residual.to_string()),
            ("decisions".to_string(), self.decisions.to_string()),
            ("new_entities".to_string(), self.new_entities.to_string()),
            ("transitivity_violations".to_string(), self.transitivity_violations.to_string()),
        ]);
        for (stage, secs) in &self.timings {
            rows.push((format!("seconds.{stage}"), format!("{secs:.3}")));
        }
        rows
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub result: ResolutionResult,
    pub report: RunReport,
    pub grounding: Grounding,
    pub assignment: Assignment,
}

fn reject(diags: Vec<kg::Diagnostic>, what: &str) -> Result<()> {
    match diags.first() {
        None => Ok(()),
        Some(d) => Err(Error::Precondition(format!("{what}: {d}"))),
    }
}

pub fn run(cfg: &PipelineConfig, inputs: Inputs<'_>) -> Result<Outcome> {
    cfg.check()?;
    let rules = cfg.ruleset();
    reject(validate_ruleset(&rules), "rule program")?;
    reject(kg::validate(inputs.source), "source graph")?;
    if let Some(t) = inputs.target {
        reject(kg::validate(t), "target graph")?;
    }
    if let (Some(s), Some(&scenario)) = (rules.scenario.as_ref(), Some(&cfg.scenario)) {
        if *s != scenario {
            return Err(Error::Config(format!(
                "rule program declares scenario {s} but the run is {scenario}"
            )));
        }
    }
    par::with_workers(cfg.workers, || run_stages(cfg, &rules, inputs))
}

/// Bare wasm32 has no monotonic clock; stage timings read 0 there.
fn now() -> Option<Instant> {
    (!cfg!(all(target_arch = "wasm32", target_os = "unknown"))).then(Instant::now)
}

fn run_stages(cfg: &PipelineConfig, rules: &RuleSet, inputs: Inputs<'_>) -> Result<Outcome> {
    let mut timings = Vec::new();
    let mut clock = now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        let secs = clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        timings.push((name.to_string(), secs));
        clock = now();
    };

    let (graph, skolemized, references) = match (cfg.scenario, inputs.target) {
        (Scenario::Extractions, _) => (inputs.source.clone(), None, None),
        (_, None) => {
            return Err(Error::Precondition(format!(
                "the {} scenario requires a target graph",
                cfg.scenario
            )))
        }
        (_, Some(target)) => {
            let refs: BTreeSet<EntityId> = reference_ids(inputs.source, target).into_iter().collect();
            let sk = skolemize(&refs, target)?;
            (inputs.source.union(&sk)?, Some(sk), Some(refs))
        }
    };
    let candidates = block_candidates(
        inputs.source,
        skolemized.as_ref(),
        cfg.scenario,
        &cfg.blocking,
        inputs.cache,
        inputs.extra,
    )?;
    let triangles = candidate_triangles(&candidates);
    lap("blocking", &mut timings);

    let grounding = ground(rules, &graph, &candidates, &triangles, &cfg.grounding)?;
    lap("grounding", &mut timings);

    let assignment = map_inference(&grounding.potentials, grounding.atoms.len(), &cfg.solver)?;
    lap("inference", &mut timings);

    let (scores, decisions) = decide(&assignment, &grounding.atoms, cfg.threshold);
    let mut result = ResolutionResult {
        scores,
        decisions,
        ..ResolutionResult::default()
    };
    match &references {
        None => {
            result.clusters = Some(cluster(&result.decisions, graph.concrete_entities()));
        }
        Some(refs) => {
            let matching = bipartite_match(&result.scores, refs, cfg.threshold)?;
            result.new_entities = matching
                .iter()
                .filter(|(_, t)| t.has_skolem_prefix())
                .map(|(r, _)| r.clone())
                .collect();
            result.matching = Some(matching);
        }
    }
    let violations = transitivity_violations(&triangles, &result.decisions);
    lap("decision", &mut timings);

    let report = RunReport {
        scenario: cfg.scenario.to_string(),
        rules: rules.names().into_iter().map(str::to_string).collect(),
        candidates: candidates.len(),
        triangles: triangles.len(),
        atoms: grounding.atoms.len(),
        potentials: grounding.potentials.len(),
        groundings: grounding.counts.clone(),
        iterations: assignment.iterations,
        converged: assignment.converged,
        objective: assignment.objective,
        primal_residual: assignment.primal_residual,
        dual_residual: assignment.dual_residual,
        decisions: result.decisions.len(),
        new_entities: result.new_entities.len(),
        transitivity_violations: violations,
        timings,
    };
    Ok(Outcome {
        result,
        report,
        grounding,
        assignment,
    })
}

/// Evaluation metrics of one run against gold labels, as named values.
pub fn metrics(result: &ResolutionResult, gold: &GoldLabels) -> Result<Vec<(String, f64)>> {
    let mut rows = vec![("auprc".to_string(), auprc(&result.scores, gold)?)];
    let prf = precision_recall_f1(&result.decisions, gold);
    rows.extend([
        ("precision".to_string(), prf.precision),
        ("recall".to_string(), prf.recall),
        ("f1".to_string(), prf.f1),
    ]);
    let (thr, best) = best_f1(&result.scores, gold);
    rows.push(("best_f1".to_string(), best.f1));
    rows.push(("best_f1_threshold".to_string(), thr));
    if let Some(m) = &result.matching {
        let s = split_f1(m, gold);
        rows.extend([
            ("f1_existing".to_string(), s.f1_existing),
            ("f1_new".to_string(), s.f1_new),
            ("f1_overall".to_string(), s.f1_overall),
        ]);
    }
    Ok(rows)
}
