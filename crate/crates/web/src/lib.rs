//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The logic lives in plain functions
//! returning `Result<serde_json::Value, String>` so it can be tested natively.

use std::collections::BTreeMap;

use kgresolve::datagen::{generate, GenConfig};
use kgresolve::kg::EntityId;
use kgresolve::pipeline::{metrics, run, Inputs, PipelineConfig};
use kgresolve::rules::{builtin_ruleset, parse_rules, validate_ruleset, FamilySet};
use kgresolve::similarity::{similarity_profile, SimilarityCache, SimilarityConfig};
use kgresolve::Scenario;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Pipeline runs in the page are capped to keep the tab responsive.
pub const MAX_DEMO_ENTITIES: usize = 300;
const TOP_PAIRS: usize = 12;

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Every string metric plus the combined score for two names.
pub fn name_similarity(a: &str, b: &str) -> Result<Value, String> {
    let (ia, ib) = (EntityId::new("a"), EntityId::new("b"));
    let names = BTreeMap::from([(ia.clone(), a.to_string()), (ib.clone(), b.to_string())]);
    let p = similarity_profile(&ia, &ib, &names, &SimilarityConfig::default(), &SimilarityCache::default())
        .map_err(|e| e.to_string())?;
    Ok(json!({ "metrics": p.scores, "combined": p.combined }))
}

/// Generates a seeded instance, resolves it and reports quality and the
/// highest-scoring pairs next to their gold labels.
pub fn resolve_synthetic(
    scenario: &str,
    families: &str,
    seed: u64,
    entities: usize,
    name_noise: f64,
) -> Result<Value, String> {
    let scenario: Scenario = scenario.parse().map_err(|e: kgresolve::Error| e.to_string())?;
    if entities > MAX_DEMO_ENTITIES {
        return Err(format!("at most {MAX_DEMO_ENTITIES} entities in the browser"));
    }
    let inst = generate(&GenConfig {
        seed,
        num_entities: entities,
        name_noise,
        ..GenConfig::for_scenario(scenario, scenario != Scenario::Extractions)
    })
    .map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::new(scenario).with_families(FamilySet::parse(families).map_err(|e| e.to_string())?);
    let out = run(&cfg, Inputs::new(&inst.source, inst.target.as_ref())).map_err(|e| e.to_string())?;
    let quality: BTreeMap<String, f64> = metrics(&out.result, &inst.gold)
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect();

    let name = |id: &EntityId| {
        inst.source
            .name(id)
            .or_else(|| inst.target.as_ref().and_then(|t| t.name(id)))
            .unwrap_or(if id.has_skolem_prefix() { "(new entity)" } else { "" })
            .to_string()
    };
    let mut ranked: Vec<_> = out.result.scores.iter().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(x.1).then_with(|| x.0.cmp(y.0)));
    let top: Vec<Value> = ranked
        .into_iter()
        .take(TOP_PAIRS)
        .map(|((a, b), s)| {
            json!({
                "a": a.as_str(), "b": b.as_str(),
                "name_a": name(a), "name_b": name(b),
                "score": s,
                "gold": inst.gold.label(a, b),
            })
        })
        .collect();
    let r = &out.report;
    Ok(json!({
        "candidates": r.candidates,
        "potentials": r.potentials,
        "iterations": r.iterations,
        "converged": r.converged,
        "decisions": r.decisions,
        "groundings": r.groundings,
        "metrics": quality,
        "top": top,
    }))
}

/// Parses and validates a rule program.
pub fn rule_check(text: &str) -> Result<Value, String> {
    let rs = parse_rules(text).map_err(|e| e.to_string())?;
    let problems: Vec<String> = validate_ruleset(&rs).iter().map(ToString::to_string).collect();
    let rules: Vec<String> = rs.rules.iter().map(ToString::to_string).collect();
    Ok(json!({ "rules": rules, "problems": problems }))
}

/// The builtin program for a scenario and family list, as rule text.
pub fn builtin_program(scenario: &str, families: &str) -> Result<String, String> {
    let scenario: Scenario = scenario.parse().map_err(|e: kgresolve::Error| e.to_string())?;
    let families = FamilySet::parse(families).map_err(|e| e.to_string())?;
    Ok(builtin_ruleset(scenario, &families).render())
}

#[wasm_bindgen(js_name = compareNames)]
pub fn compare_names(a: &str, b: &str) -> Result<String, JsError> {
    to_js(name_similarity(a, b))
}

#[wasm_bindgen(js_name = resolveSynthetic)]
pub fn resolve_synthetic_js(
    scenario: &str,
    families: &str,
    seed: u32,
    entities: u32,
    name_noise: f64,
) -> Result<String, JsError> {
    to_js(resolve_synthetic(scenario, families, seed.into(), entities as usize, name_noise))
}

#[wasm_bindgen(js_name = checkRules)]
pub fn check_rules(text: &str) -> Result<String, JsError> {
    to_js(rule_check(text))
}

#[wasm_bindgen(js_name = builtinRules)]
pub fn builtin_rules(scenario: &str, families: &str) -> Result<String, JsError> {
    builtin_program(scenario, families).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_names_score_one() {
        let v = name_similarity("Miles Davis", "miles davis").unwrap();
        assert_eq!(v["combined"], 1.0);
        assert_eq!(v["metrics"].as_object().unwrap().len(), 7);
    }

    #[test]
    fn synthetic_run_reports_metrics() {
        let v = resolve_synthetic("extractions", "basic,abstract-kg", 1, 40, 0.1).unwrap();
        assert!(v["converged"].as_bool().unwrap());
        let auprc = v["metrics"]["auprc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auprc));
        assert!(v["top"].as_array().unwrap().len() <= TOP_PAIRS);

        let m = resolve_synthetic("merge", "basic,new-entity", 1, 30, 0.1).unwrap();
        assert!(m["metrics"]["f1_overall"].is_number());
        assert!(resolve_synthetic("merge", "basic", 1, MAX_DEMO_ENTITIES + 1, 0.1).is_err());
        assert!(resolve_synthetic("sideways", "basic", 1, 30, 0.1).is_err());
    }

    #[test]
    fn builtin_programs_pass_the_checker() {
        for scenario in ["extractions", "extend", "merge"] {
            let text = builtin_program(scenario, "all").unwrap();
            let v = rule_check(&text).unwrap();
            assert!(v["problems"].as_array().unwrap().is_empty(), "{v}");
            assert_eq!(v["rules"].as_array().unwrap().len(), text.lines().count());
        }
        assert!(rule_check("[broken] 1.0 : Same(A").is_err());
    }
}
