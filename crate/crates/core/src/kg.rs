//! Knowledge graph data model: entities, soft label and relation assertions,
//! ontology mutex constraints and skolemized new-entity placeholders.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix of every skolem placeholder id.
pub const SKOLEM_PREFIX: &str = "__new__";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The placeholder id standing for "this reference is a new entity".
    pub fn skolem(&self) -> EntityId {
        EntityId(format!("{SKOLEM_PREFIX}{}", self.0))
    }

    pub fn has_skolem_prefix(&self) -> bool {
        self.0.starts_with(SKOLEM_PREFIX)
    }

    /// For a skolem id, the id of the reference it was created for.
    pub fn skolem_reference(&self) -> Option<EntityId> {
        self.0.strip_prefix(SKOLEM_PREFIX).map(EntityId::new)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    GraphA,
    GraphB,
    Extraction,
    Skolem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAssertion {
    pub entity: EntityId,
    pub label: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: EntityId,
    pub object: EntityId,
    pub relation: String,
    pub confidence: f64,
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Mutually exclusive labels and relations, stored as unordered pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub mutex_labels: BTreeSet<(String, String)>,
    pub mutex_relations: BTreeSet<(String, String)>,
}

impl Ontology {
    pub fn add_mutex_label(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(Error::Ontology(format!("label `{a}` cannot be mutex with itself")));
        }
        self.mutex_labels.insert(unordered(a, b));
        Ok(())
    }

    pub fn add_mutex_relation(&mut self, a: &str, b: &str) -> Result<()> {
        if a == b {
            return Err(Error::Ontology(format!(
                "relation `{a}` cannot be mutex with itself"
            )));
        }
        self.mutex_relations.insert(unordered(a, b));
        Ok(())
    }

    pub fn is_mutex_label(&self, a: &str, b: &str) -> bool {
        self.mutex_labels.contains(&unordered(a, b))
    }

    pub fn is_mutex_relation(&self, a: &str, b: &str) -> bool {
        self.mutex_relations.contains(&unordered(a, b))
    }

    fn extend(&mut self, other: &Ontology) {
        self.mutex_labels.extend(other.mutex_labels.iter().cloned());
        self.mutex_relations
            .extend(other.mutex_relations.iter().cloned());
    }
}

/// A knowledge graph. Assertions are keyed so that each (entity, label) and
/// (subject, relation, object) occurs at most once.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub entities: BTreeMap<EntityId, Origin>,
    pub labels: BTreeMap<(EntityId, String), f64>,
    /// Keyed by (subject, relation, object).
    pub triples: BTreeMap<(EntityId, String, EntityId), f64>,
    pub ontology: Ontology,
    pub names: BTreeMap<EntityId, String>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an entity if absent; returns whether it was new.
    pub fn add_entity(&mut self, id: EntityId, origin: Origin) -> bool {
        if self.entities.contains_key(&id) {
            return false;
        }
        self.entities.insert(id, origin);
        true
    }

    /// Adds a label assertion, registering the entity and max-merging duplicates.
    pub fn add_label(&mut self, entity: EntityId, label: &str, confidence: f64, origin: Origin) {
        self.add_entity(entity.clone(), origin);
        let slot = self.labels.entry((entity, label.to_string())).or_insert(confidence);
        *slot = slot.max(confidence);
    }

    pub fn add_triple(
        &mut self,
        subject: EntityId,
        relation: &str,
        object: EntityId,
        confidence: f64,
        origin: Origin,
    ) {
        self.add_entity(subject.clone(), origin);
        self.add_entity(object.clone(), origin);
        let slot = self
            .triples
            .entry((subject, relation.to_string(), object))
            .or_insert(confidence);
        *slot = slot.max(confidence);
    }

    pub fn label(&self, entity: &EntityId, label: &str) -> f64 {
        // BTreeMap lookup needs an owned key; graphs in the hot path use the
        // grounding index instead.
        self.labels
            .get(&(entity.clone(), label.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn name(&self, entity: &EntityId) -> Option<&str> {
        self.names.get(entity).map(String::as_str)
    }

    pub fn origin(&self, entity: &EntityId) -> Option<Origin> {
        self.entities.get(entity).copied()
    }

    pub fn is_skolem(&self, entity: &EntityId) -> bool {
        self.origin(entity) == Some(Origin::Skolem)
    }

    pub fn label_assertions(&self) -> impl Iterator<Item = LabelAssertion> + '_ {
        self.labels.iter().map(|((entity, label), &confidence)| LabelAssertion {
            entity: entity.clone(),
            label: label.clone(),
            confidence,
        })
    }

    pub fn relation_triples(&self) -> impl Iterator<Item = RelationTriple> + '_ {
        self.triples
            .iter()
            .map(|((subject, relation, object), &confidence)| RelationTriple {
                subject: subject.clone(),
                object: object.clone(),
                relation: relation.clone(),
                confidence,
            })
    }

    /// Entities that are not skolem placeholders.
    pub fn concrete_entities(&self) -> impl Iterator<Item = &EntityId> + '_ {
        self.entities
            .iter()
            .filter(|(_, origin)| **origin != Origin::Skolem)
            .map(|(id, _)| id)
    }

    /// Combines two graphs into one view. Entities present in both are treated
    /// as already-resolved shared entities; their origin is taken from `self`.
    pub fn union(&self, other: &KnowledgeGraph) -> Result<KnowledgeGraph> {
        let mut out = self.clone();
        for (id, &origin) in &other.entities {
            match out.entities.get(id) {
                Some(&existing) if (existing == Origin::Skolem) != (origin == Origin::Skolem) => {
                    return Err(Error::Collision(format!(
                        "entity `{id}` is a skolem in one graph but not the other"
                    )));
                }
                Some(_) => {}
                None => {
                    out.entities.insert(id.clone(), origin);
                }
            }
        }
        for (key, &c) in &other.labels {
            let slot = out.labels.entry(key.clone()).or_insert(c);
            *slot = slot.max(c);
        }
        for (key, &c) in &other.triples {
            let slot = out.triples.entry(key.clone()).or_insert(c);
            *slot = slot.max(c);
        }
        for (id, name) in &other.names {
            out.names.entry(id.clone()).or_insert_with(|| name.clone());
        }
        out.ontology.extend(&other.ontology);
        Ok(out)
    }

    /// Parses the four TSV formats. `source` is used in error messages only.
    pub fn from_tsv(
        texts: &GraphTexts<'_>,
        origin: Origin,
    ) -> Result<KnowledgeGraph> {
        let mut graph = KnowledgeGraph::new();

        for (line_no, cols) in tsv_rows(texts.triples) {
            if !(3..=4).contains(&cols.len()) {
                return Err(parse_error(texts.triples_path, line_no, &cols, "3 or 4"));
            }
            let confidence = parse_confidence(cols.get(3).copied(), texts.triples_path, line_no)?;
            let (subject, relation, object) = (cols[0], cols[1], cols[2]);
            check_id(subject, texts.triples_path, line_no)?;
            check_id(object, texts.triples_path, line_no)?;
            graph.add_triple(
                EntityId::new(subject),
                relation,
                EntityId::new(object),
                confidence,
                origin,
            );
        }

        for (line_no, cols) in tsv_rows(texts.labels) {
            if !(2..=3).contains(&cols.len()) {
                return Err(parse_error(texts.labels_path, line_no, &cols, "2 or 3"));
            }
            let confidence = parse_confidence(cols.get(2).copied(), texts.labels_path, line_no)?;
            check_id(cols[0], texts.labels_path, line_no)?;
            graph.add_label(EntityId::new(cols[0]), cols[1], confidence, origin);
        }

        if let Some(text) = texts.ontology {
            for (line_no, cols) in tsv_rows(text) {
                if cols.len() != 3 {
                    return Err(parse_error(texts.ontology_path, line_no, &cols, "3"));
                }
                match cols[0] {
                    "MUTEX_LABEL" => graph.ontology.add_mutex_label(cols[1], cols[2])?,
                    "MUTEX_REL" => graph.ontology.add_mutex_relation(cols[1], cols[2])?,
                    other => {
                        return Err(Error::Parse {
                            path: texts.ontology_path.to_string(),
                            line: line_no,
                            message: format!("unknown ontology directive `{other}`"),
                        })
                    }
                }
            }
        }

        if let Some(text) = texts.names {
            for (line_no, cols) in tsv_rows(text) {
                if cols.len() != 2 {
                    return Err(parse_error(texts.names_path, line_no, &cols, "2"));
                }
                check_id(cols[0], texts.names_path, line_no)?;
                let id = EntityId::new(cols[0]);
                graph.add_entity(id.clone(), origin);
                graph.names.insert(id, cols[1].to_string());
            }
        }

        let unnamed: Vec<EntityId> = graph
            .entities
            .keys()
            .filter(|id| !graph.names.contains_key(*id))
            .cloned()
            .collect();
        for id in unnamed {
            let name = id.as_str().to_string();
            graph.names.insert(id, name);
        }
        Ok(graph)
    }

    /// Renders the graph back to the TSV formats: (triples, labels, ontology, names).
    pub fn to_tsv(&self) -> (String, String, String, String) {
        let mut triples = String::new();
        for ((s, r, o), c) in &self.triples {
            triples.push_str(&format!("{s}\t{r}\t{o}\t{c}\n"));
        }
        let mut labels = String::new();
        for ((e, l), c) in &self.labels {
            labels.push_str(&format!("{e}\t{l}\t{c}\n"));
        }
        let mut ontology = String::new();
        for (a, b) in &self.ontology.mutex_labels {
            ontology.push_str(&format!("MUTEX_LABEL\t{a}\t{b}\n"));
        }
        for (a, b) in &self.ontology.mutex_relations {
            ontology.push_str(&format!("MUTEX_REL\t{a}\t{b}\n"));
        }
        let mut names = String::new();
        for (e, n) in &self.names {
            names.push_str(&format!("{e}\t{n}\n"));
        }
        (triples, labels, ontology, names)
    }
}

/// In-memory contents of the graph files, with the paths used for diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct GraphTexts<'a> {
    pub triples: &'a str,
    pub triples_path: &'a str,
    pub labels: &'a str,
    pub labels_path: &'a str,
    pub ontology: Option<&'a str>,
    pub ontology_path: &'a str,
    pub names: Option<&'a str>,
    pub names_path: &'a str,
}

impl<'a> GraphTexts<'a> {
    pub fn new(triples: &'a str, labels: &'a str) -> Self {
        GraphTexts {
            triples,
            triples_path: "triples",
            labels,
            labels_path: "labels",
            ontology: None,
            ontology_path: "ontology",
            names: None,
            names_path: "names",
        }
    }

    pub fn with_ontology(mut self, text: &'a str) -> Self {
        self.ontology = Some(text);
        self
    }

    pub fn with_names(mut self, text: &'a str) -> Self {
        self.names = Some(text);
        self
    }
}

/// Paths of the files making up one graph on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphFiles {
    pub triples: PathBuf,
    pub labels: PathBuf,
    pub ontology: Option<PathBuf>,
    pub names: Option<PathBuf>,
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_graph(files: &GraphFiles, origin: Origin) -> Result<KnowledgeGraph> {
    let triples = read_file(&files.triples)?;
    let labels = read_file(&files.labels)?;
    let ontology = files.ontology.as_deref().map(read_file).transpose()?;
    let names = files.names.as_deref().map(read_file).transpose()?;
    let triples_path = files.triples.display().to_string();
    let labels_path = files.labels.display().to_string();
    let ontology_path = files
        .ontology
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default();
    let names_path = files
        .names
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default();
    KnowledgeGraph::from_tsv(
        &GraphTexts {
            triples: &triples,
            triples_path: &triples_path,
            labels: &labels,
            labels_path: &labels_path,
            ontology: ontology.as_deref(),
            ontology_path: &ontology_path,
            names: names.as_deref(),
            names_path: &names_path,
        },
        origin,
    )
}

/// Yields (1-based line number, columns) for every non-comment, non-blank line.
pub(crate) fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn parse_error(path: &str, line: usize, cols: &[&str], expected: &str) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: format!("expected {expected} tab-separated columns, found {}", cols.len()),
    }
}

fn check_id(id: &str, path: &str, line: usize) -> Result<()> {
    if id.is_empty() {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            message: "empty entity id".into(),
        });
    }
    Ok(())
}

fn parse_confidence(col: Option<&str>, path: &str, line: usize) -> Result<f64> {
    let Some(raw) = col else { return Ok(1.0) };
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        message: format!("invalid confidence `{raw}`"),
    })?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Range {
            path: path.to_string(),
            line,
            value,
        });
    }
    Ok(value)
}

/// Extends `target` with one skolem placeholder per reference.
pub fn skolemize(references: &BTreeSet<EntityId>, target: &KnowledgeGraph) -> Result<KnowledgeGraph> {
    let mut out = target.clone();
    for reference in references {
        if target.entities.contains_key(reference) {
            return Err(Error::Collision(format!(
                "reference `{reference}` already exists in the target graph"
            )));
        }
        let skolem = reference.skolem();
        if out.entities.contains_key(&skolem) {
            return Err(Error::Collision(format!(
                "skolem `{skolem}` already exists in the target graph"
            )));
        }
        out.entities.insert(skolem, Origin::Skolem);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, message: String) {
    out.push(Diagnostic { message });
}

/// Checks every graph invariant; an empty list means the graph is well formed.
pub fn validate(graph: &KnowledgeGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (id, origin) in &graph.entities {
        if id.as_str().is_empty() {
            diag(&mut out, "entity with empty id".into());
        }
        if (*origin == Origin::Skolem) != id.has_skolem_prefix() {
            diag(
                &mut out,
                format!("entity `{id}` has origin {origin:?} inconsistent with its id"),
            );
        }
    }
    let check_conf = |out: &mut Vec<Diagnostic>, what: String, c: f64| {
        if !(0.0..=1.0).contains(&c) {
            diag(out, format!("{what} has confidence {c} outside [0,1]"));
        }
    };
    for ((entity, label), &c) in &graph.labels {
        match graph.entities.get(entity) {
            None => diag(&mut out, format!("label `{label}` on unknown entity `{entity}`")),
            Some(Origin::Skolem) => {
                diag(&mut out, format!("skolem entity `{entity}` carries label `{label}`"))
            }
            Some(_) => {}
        }
        check_conf(&mut out, format!("label ({entity}, {label})"), c);
    }
    for ((subject, relation, object), &c) in &graph.triples {
        for (role, id) in [("subject", subject), ("object", object)] {
            match graph.entities.get(id) {
                None => diag(
                    &mut out,
                    format!("triple `{relation}` references unknown {role} `{id}`"),
                ),
                Some(Origin::Skolem) => diag(
                    &mut out,
                    format!("skolem entity `{id}` appears as {role} of `{relation}`"),
                ),
                Some(_) => {}
            }
        }
        check_conf(&mut out, format!("triple ({subject}, {relation}, {object})"), c);
    }
    for (a, b) in graph
        .ontology
        .mutex_labels
        .iter()
        .chain(graph.ontology.mutex_relations.iter())
    {
        if a == b {
            diag(&mut out, format!("`{a}` is mutex with itself"));
        }
    }
    for id in graph.names.keys() {
        if !graph.entities.contains_key(id) {
            diag(&mut out, format!("name given for unknown entity `{id}`"));
        }
    }
    out
}
