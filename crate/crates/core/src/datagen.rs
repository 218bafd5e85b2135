//! Seeded synthetic benchmark instances with ground truth.
//!
//! A latent world of typed entities with names and relations is generated
//! first. Scenario writers then turn it into observed graphs: noisy references
//! for extractions, or a noisy source graph and a clean target graph for
//! extend/merge. Names are deliberately ambiguous (homonyms within and across
//! types) so that label and relational evidence carry information that string
//! similarity alone does not.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::GoldLabels;
use crate::io::write_file;
use crate::kg::{EntityId, KnowledgeGraph, Origin};
use crate::similarity::canonical_pair;
use crate::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub num_entities: usize,
    /// References per latent entity (extractions only; cross-graph scenarios
    /// emit one source entity per latent entity).
    pub refs_per_entity: usize,
    /// Per-character corruption probability.
    pub name_noise: f64,
    pub label_dropout: f64,
    pub relation_dropout: f64,
    pub new_entity_fraction: f64,
    pub num_labels: usize,
    pub num_relations: usize,
    pub num_mutex_pairs: usize,
    /// Probability that a latent entity reuses the name of an earlier one.
    pub homonym_rate: f64,
    pub scenario: Scenario,
    /// Music-catalogue structure (artists, albums, releases) for merge.
    pub domain: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::for_scenario(Scenario::Extractions, false)
    }
}

impl GenConfig {
    /// Defaults for `scenario`, with every pair of labels declared mutex.
    pub fn for_scenario(scenario: Scenario, domain: bool) -> Self {
        let mut cfg = GenConfig {
            seed: 0,
            num_entities: 500,
            refs_per_entity: 2,
            name_noise: 0.15,
            label_dropout: 0.2,
            relation_dropout: 0.2,
            new_entity_fraction: 0.75,
            num_labels: 6,
            num_relations: 6,
            num_mutex_pairs: 0,
            homonym_rate: 0.2,
            scenario,
            domain,
        };
        let labels = cfg.effective_labels();
        cfg.num_mutex_pairs = labels * labels.saturating_sub(1) / 2;
        cfg
    }

    fn uses_domain(&self) -> bool {
        self.domain && self.scenario != Scenario::Extractions
    }

    /// Number of distinct labels the generated instance will use.
    pub fn effective_labels(&self) -> usize {
        if self.uses_domain() {
            DOMAIN_LABELS.len()
        } else {
            self.num_labels
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, p) in [
            ("name-noise", self.name_noise),
            ("label-dropout", self.label_dropout),
            ("relation-dropout", self.relation_dropout),
            ("new-entity-fraction", self.new_entity_fraction),
            ("homonym-rate", self.homonym_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0,1]")));
            }
        }
        if self.num_entities < 2 {
            return Err(Error::Config("at least 2 entities are required".into()));
        }
        if self.refs_per_entity == 0 {
            return Err(Error::Config("refs-per-entity must be positive".into()));
        }
        let labels = self.effective_labels();
        if labels == 0 {
            return Err(Error::Config("at least one label is required".into()));
        }
        let pairs = labels * (labels - 1) / 2;
        if self.num_mutex_pairs > pairs {
            return Err(Error::Config(format!(
                "{} mutex pairs requested but only {pairs} label pairs exist",
                self.num_mutex_pairs
            )));
        }
        Ok(())
    }
}

/// Generated graphs plus ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub config: GenConfig,
    /// Extraction references, or the source graph for extend/merge.
    pub source: KnowledgeGraph,
    pub target: Option<KnowledgeGraph>,
    pub gold: GoldLabels,
}

impl Instance {
    /// Every output file as (relative name, contents), in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let push_graph = |prefix: &str, g: &KnowledgeGraph, out: &mut Vec<(String, String)>| {
            let (triples, labels, ontology, names) = g.to_tsv();
            out.push((format!("{prefix}triples.tsv"), triples));
            out.push((format!("{prefix}labels.tsv"), labels));
            out.push((format!("{prefix}ontology.tsv"), ontology));
            out.push((format!("{prefix}names.tsv"), names));
        };
        push_graph("", &self.source, &mut out);
        if let Some(t) = &self.target {
            push_graph("target_", t, &mut out);
        }
        out.push(("gold.tsv".into(), self.gold.pairs_tsv()));
        if self.target.is_some() {
            out.push(("goldmatch.tsv".into(), self.gold.targets_tsv()));
        }
        out
    }

    /// `key<TAB>value` description of the instance, including a sha256 per file.
    pub fn manifest(&self) -> String {
        let c = &self.config;
        let mut m = String::new();
        let rows: Vec<(&str, String)> = vec![
            ("scenario", c.scenario.to_string()),
            ("seed", c.seed.to_string()),
            ("num_entities", c.num_entities.to_string()),
            ("refs_per_entity", c.refs_per_entity.to_string()),
            ("name_noise", c.name_noise.to_string()),
            ("label_dropout", c.label_dropout.to_string()),
            ("relation_dropout", c.relation_dropout.to_string()),
            ("new_entity_fraction", c.new_entity_fraction.to_string()),
            ("num_labels", c.effective_labels().to_string()),
            ("num_relations", c.num_relations.to_string()),
            ("num_mutex_pairs", c.num_mutex_pairs.to_string()),
            ("homonym_rate", c.homonym_rate.to_string()),
            ("domain", c.uses_domain().to_string()),
            ("source_entities", self.source.entities.len().to_string()),
            (
                "target_entities",
                self.target.as_ref().map_or(0, |t| t.entities.len()).to_string(),
            ),
            ("gold_positives", self.gold.positives().to_string()),
            (
                "gold_new",
                self.gold.targets.values().filter(|t| t.has_skolem_prefix()).count().to_string(),
            ),
        ];
        for (k, v) in rows {
            let _ = writeln!(m, "{k}\t{v}");
        }
        for (name, contents) in self.files() {
            let digest = Sha256::digest(contents.as_bytes());
            let _ = writeln!(m, "sha256:{name}\t{}", hex::encode(digest));
        }
        m
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, contents) in self.files() {
            write_file(&dir.join(name), &contents)?;
        }
        write_file(&dir.join("manifest.tsv"), &self.manifest())
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Instance> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.scenario {
        Scenario::Extractions => {
            let world = generic_world(cfg, cfg.num_entities, &mut rng)?;
            Ok(extractions(cfg, &world, &mut rng))
        }
        Scenario::Extend | Scenario::Merge => {
            let fillers = cfg.num_entities.div_ceil(2);
            let world = if cfg.uses_domain() {
                domain_world(cfg, cfg.num_entities, fillers, &mut rng)?
            } else {
                generic_world(cfg, cfg.num_entities + fillers, &mut rng)?
            };
            cross_graph(cfg, &world, &mut rng)
        }
    }
}

// ---------------------------------------------------------------------------
// Name pools and corruption

const FIRST: &[&str] = &[
    "john", "mary", "ahmed", "lucia", "kenji", "fatima", "oliver", "ingrid", "rafael", "amara",
    "dmitri", "chloe", "tobias", "priya", "mateo", "sigrid", "yusuf", "helena", "bruno", "noor",
    "elliot", "marisol", "viktor", "anouk", "desmond", "rosalind", "caspar", "imogen", "lorcan",
    "beatriz", "osman", "wilhelmina", "jasper", "zofia", "thaddeus", "genevieve", "quentin",
    "odessa", "bartholomew", "celestine", "ignatius", "philippa", "ezekiel", "magdalena",
    "horatio", "cordelia", "leopold", "esperanza", "alistair", "henrietta", "barnaby", "ottoline",
    "cyprian", "theodora", "ambrose", "seraphina", "lysander", "perpetua",
];

const LAST: &[&str] = &[
    "smith", "garcia", "nakamura", "okafor", "lindqvist", "moreau", "kowalski", "haddad", "obrien",
    "castellano", "petrov", "fitzgerald", "yamamoto", "abernathy", "delacroix", "mbeki",
    "thornbury", "vasquez", "holloway", "rasmussen", "quigley", "featherstone", "oyelaran",
    "brandt", "santoro", "mcallister", "ivanova", "blackwood", "ferreira", "whitcombe",
    "zielinski", "achterberg", "papadopoulos", "gunnarsson", "okonkwo", "villanueva", "hargreaves",
    "szymanski", "devereaux", "murakami", "lindgren", "bellweather", "castaneda", "pemberton",
    "kristiansen", "ramaswamy", "dunwoody", "esterhazy", "calloway", "wojcik",
];

/// Alternate spellings used by the corruption operator.
const VARIANTS: &[(&str, &str)] = &[
    ("john", "jon"),
    ("mary", "marie"),
    ("ahmed", "ahmad"),
    ("smith", "smyth"),
    ("garcia", "garsia"),
    ("obrien", "o'brien"),
    ("petrov", "petroff"),
    ("yusuf", "yousef"),
    ("mateo", "matteo"),
    ("ivanova", "ivanowa"),
    ("zofia", "sophia"),
    ("chloe", "khloe"),
];

const PLACE_HEAD: &[&str] = &[
    "spring", "green", "oak", "river", "stone", "maple", "north", "fair", "ash", "bright", "cedar",
    "elm", "glen", "hazel", "iron", "kings", "lake", "mill", "pine", "red", "silver", "west",
    "amber", "brook", "copper", "dover", "falcon", "granite", "heron", "juniper", "lark", "marsh",
    "oxen", "quarry", "raven", "sable", "thistle", "umber", "willow", "yarrow",
];

const PLACE_TAIL: &[&str] = &[
    "field", "ville", "ton", "burg", "ford", "dale", "port", "wood", "haven", "mouth", "stead",
    "bridge", "crest",
];

const ADJ: &[&str] = &[
    "crimson", "silent", "electric", "velvet", "broken", "golden", "hollow", "neon", "wild",
    "lunar", "frozen", "savage", "gentle", "burning", "paper", "glass", "midnight", "rusty",
    "amber", "cobalt", "distant", "drifting", "emerald", "faded", "gilded", "hidden", "ivory",
    "jagged", "kinetic", "lonely", "mellow", "nocturnal", "obsidian", "painted", "quiet",
    "radiant", "scarlet", "tangled", "violet", "wandering",
];

const NOUN: &[&str] = &[
    "wolves", "echoes", "horizons", "machines", "sparrows", "tides", "lanterns", "giants",
    "rivers", "ghosts", "satellites", "kings", "orchards", "engines", "monsters", "pilots",
    "anchors", "badgers", "cathedrals", "daggers", "embers", "falcons", "gardens", "harbors",
    "islands", "jackals", "kites", "lighthouses", "meadows", "nomads", "oceans", "prophets",
    "quarrels", "ravens", "shadows", "thrones", "umbrellas", "voyagers", "whispers", "zeppelins",
];

const COMPANY_TAIL: &[&str] = &["industries", "labs", "group", "systems", "holdings", "works"];

const MASCOT: &[&str] = &["rovers", "united", "athletic", "wanderers", "rangers", "city"];

const SUFFIXES: &[&str] = &["jr", "inc", "ltd", "sr", "co", "the"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Person,
    Place,
    Band,
    Company,
    Region,
    Team,
    Album,
}

const GENERIC_LABELS: &[(&str, Kind)] = &[
    ("person", Kind::Person),
    ("city", Kind::Place),
    ("band", Kind::Band),
    ("company", Kind::Company),
    ("country", Kind::Region),
    ("team", Kind::Team),
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// A random name plus the pool pieces it was built from.
fn fresh_name(kind: Kind, rng: &mut ChaCha8Rng) -> (String, Vec<&'static str>) {
    let parts: Vec<&'static str> = match kind {
        Kind::Person => vec![pick(rng, FIRST), pick(rng, LAST)],
        Kind::Place => vec![pick(rng, PLACE_HEAD), pick(rng, PLACE_TAIL)],
        Kind::Band | Kind::Album => vec![pick(rng, ADJ), pick(rng, NOUN)],
        Kind::Company => vec![pick(rng, LAST), pick(rng, COMPANY_TAIL)],
        Kind::Region => vec![pick(rng, PLACE_HEAD), pick(rng, &["l", "n", "r", "v"])],
        Kind::Team => vec![pick(rng, PLACE_HEAD), pick(rng, PLACE_TAIL), pick(rng, MASCOT)],
    };
    let name = match kind {
        Kind::Person | Kind::Company | Kind::Album => format!("{} {}", parts[0], parts[1]),
        Kind::Place => format!("{}{}", parts[0], parts[1]),
        Kind::Band => format!("the {} {}", parts[0], parts[1]),
        Kind::Region => format!("{}{}ia", parts[0], parts[1]),
        Kind::Team => format!("{}{} {}", parts[0], parts[1], parts[2]),
    };
    (name, parts)
}

/// Leading pieces that identify a name; later ones come from small suffix pools.
fn distinctive_pieces(kind: Kind) -> usize {
    match kind {
        Kind::Person | Kind::Band | Kind::Album => 2,
        Kind::Place | Kind::Company | Kind::Region | Kind::Team => 1,
    }
}

/// Clean names handed out so far, and the pool pieces they used.
#[derive(Default)]
struct NamePool {
    names: BTreeSet<String>,
    pieces: BTreeSet<(u8, &'static str)>,
}

impl NamePool {
    /// A name not used before. Names sharing no piece with earlier names of
    /// the same kind are preferred while the pools last, so that small
    /// noiseless instances are separable by string similarity alone.
    fn unique(&mut self, kind: Kind, rng: &mut ChaCha8Rng) -> String {
        let tag = kind as u8;
        for _ in 0..50 {
            let (name, parts) = fresh_name(kind, rng);
            let distinctive = &parts[..distinctive_pieces(kind)];
            if !self.names.contains(&name) && distinctive.iter().all(|p| !self.pieces.contains(&(tag, *p))) {
                return self.take(tag, name, parts);
            }
        }
        for _ in 0..50 {
            let (name, parts) = fresh_name(kind, rng);
            if !self.names.contains(&name) {
                return self.take(tag, name, parts);
            }
        }
        let (base, parts) = fresh_name(kind, rng);
        let mut n = 2;
        loop {
            let name = format!("{base} {n}");
            if !self.names.contains(&name) {
                return self.take(tag, name, parts);
            }
            n += 1;
        }
    }

    fn take(&mut self, tag: u8, name: String, parts: Vec<&'static str>) -> String {
        self.pieces.extend(parts.into_iter().map(|p| (tag, p)));
        self.names.insert(name.clone());
        name
    }
}

/// Applies the corruption operators: alternate spelling, token abbreviation,
/// per-character substitution or deletion, and an appended suffix.
fn corrupt(name: &str, noise: f64, rng: &mut ChaCha8Rng) -> String {
    if noise == 0.0 {
        return name.to_string();
    }
    let mut tokens: Vec<String> = name.split(' ').map(str::to_string).collect();
    for t in tokens.iter_mut() {
        if let Some((_, v)) = VARIANTS.iter().find(|(a, _)| a == t) {
            if rng.gen_bool((2.0 * noise).min(1.0)) {
                *t = v.to_string();
            }
        }
    }
    if tokens.len() > 1 && rng.gen_bool(noise.min(1.0)) {
        let first: String = tokens[0].chars().take(1).collect();
        tokens[0] = format!("{first}.");
    }
    let joined = tokens.join(" ");
    let mut out = String::with_capacity(joined.len());
    for ch in joined.chars() {
        if ch != ' ' && rng.gen_bool(noise) {
            if rng.gen_bool(0.5) {
                out.push(rng.gen_range(b'a'..=b'z') as char);
            }
        } else {
            out.push(ch);
        }
    }
    if rng.gen_bool((noise / 2.0).min(1.0)) {
        out.push(' ');
        out.push_str(pick(rng, SUFFIXES));
    }
    let out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    if out.is_empty() {
        name.to_string()
    } else {
        out
    }
}

// ---------------------------------------------------------------------------
// Latent worlds

struct Latent {
    label: String,
    name: String,
    /// Entities that must exist in the target whenever this one does.
    parents: Vec<usize>,
}

struct World {
    entities: Vec<Latent>,
    relations: Vec<(usize, String, usize)>,
    /// Known constants (genres, release types) shared verbatim by both graphs.
    shared: Vec<(EntityId, String)>,
    /// Relations whose object is a shared constant.
    shared_relations: Vec<(usize, String, usize)>,
    labels: Vec<String>,
    /// Subject label of each relation name.
    relation_subjects: BTreeMap<String, String>,
    /// Number of leading entities that belong to the source side.
    source_len: usize,
}

struct RelationSpec {
    name: String,
    subject: usize,
    object: usize,
}

const GENERIC_RELATIONS: &[(&str, usize, usize)] = &[
    ("parentOf", 0, 0),
    ("livesIn", 0, 1),
    ("memberOf", 0, 2),
    ("basedIn", 2, 1),
    ("worksFor", 0, 3),
    ("locatedIn", 1, 4),
    ("playsFor", 0, 5),
    ("headquarteredIn", 3, 1),
];

fn relation_specs(num_labels: usize, num_relations: usize) -> Vec<RelationSpec> {
    let mut specs: Vec<RelationSpec> = GENERIC_RELATIONS
        .iter()
        .filter(|(_, s, o)| *s < num_labels && *o < num_labels)
        .take(num_relations)
        .map(|(n, s, o)| RelationSpec {
            name: n.to_string(),
            subject: *s,
            object: *o,
        })
        .collect();
    let mut j = specs.len();
    while specs.len() < num_relations {
        specs.push(RelationSpec {
            name: format!("rel{j}"),
            subject: j % num_labels,
            object: (j + 1) % num_labels,
        });
        j += 1;
    }
    specs
}

fn generic_label(i: usize) -> (String, Kind) {
    match GENERIC_LABELS.get(i) {
        Some((name, kind)) => (name.to_string(), *kind),
        None => (format!("type{i}"), GENERIC_LABELS[i % GENERIC_LABELS.len()].1),
    }
}

/// Draws a name: either a homonym of an earlier entity or a fresh unique one.
fn latent_name(
    kind: Kind,
    names: &[String],
    pool: &mut NamePool,
    homonym_rate: f64,
    rng: &mut ChaCha8Rng,
) -> String {
    if !names.is_empty() && rng.gen_bool(homonym_rate) {
        names[rng.gen_range(0..names.len())].clone()
    } else {
        pool.unique(kind, rng)
    }
}

fn generic_world(cfg: &GenConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<World> {
    let labels: Vec<(String, Kind)> = (0..cfg.num_labels).map(generic_label).collect();
    let mut used = NamePool::default();
    let mut names: Vec<String> = Vec::new();
    let mut entities = Vec::with_capacity(n);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    for i in 0..n {
        // Persons are the most common type, as in extracted text.
        let t = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(0..labels.len()) };
        let name = latent_name(labels[t].1, &names, &mut used, cfg.homonym_rate, rng);
        names.push(name.clone());
        by_label[t].push(i);
        entities.push(Latent {
            label: labels[t].0.clone(),
            name,
            parents: Vec::new(),
        });
    }

    let specs = relation_specs(labels.len(), cfg.num_relations);
    let mut relations = Vec::new();
    for spec in &specs {
        for &s in &by_label[spec.subject] {
            let pool = &by_label[spec.object];
            let objects: Vec<usize> = if spec.subject == spec.object {
                // Parent-style relations point at earlier entities so that
                // chains form (grandparents are two hops away).
                pool.iter().copied().filter(|&o| o < s).collect()
            } else {
                pool.clone()
            };
            if let Some(&o) = objects.choose(rng) {
                relations.push((s, spec.name.clone(), o));
            }
        }
    }
    Ok(World {
        entities,
        relations,
        shared: Vec::new(),
        shared_relations: Vec::new(),
        labels: labels.into_iter().map(|(l, _)| l).collect(),
        relation_subjects: specs
            .iter()
            .map(|s| (s.name.clone(), generic_label(s.subject).0))
            .collect(),
        source_len: n.min(cfg.num_entities),
    })
}

const DOMAIN_LABELS: &[&str] = &["artist", "album", "release"];
const GENRES: &[&str] = &["rock", "jazz", "folk", "electronic", "hiphop", "classical", "metal", "soul"];
const RELEASE_TYPES: &[&str] = &["album", "single", "ep"];

/// Artist, album and release families. The first `n` entities form the source
/// side; `fillers` more follow for the target only. Homonyms within a type are
/// disambiguated by their structure (different artist, different genre).
fn domain_world(cfg: &GenConfig, n: usize, fillers: usize, rng: &mut ChaCha8Rng) -> Result<World> {
    let shared: Vec<(EntityId, String)> = GENRES
        .iter()
        .map(|g| (EntityId::new(format!("genre_{g}")), g.to_string()))
        .chain(
            RELEASE_TYPES
                .iter()
                .map(|t| (EntityId::new(format!("type_{t}")), t.to_string())),
        )
        .collect();
    let genre = |g: usize| g;
    let release_type = |t: usize| GENRES.len() + t;

    let mut entities: Vec<Latent> = Vec::new();
    let mut relations = Vec::new();
    let mut shared_relations = Vec::new();
    let mut used_artists = NamePool::default();
    let mut used_titles = NamePool::default();
    let mut artist_names: Vec<String> = Vec::new();
    let mut titles: Vec<String> = Vec::new();

    let mut side_end = n;
    for total in [n, n + fillers] {
        while entities.len() < total {
            let artist = entities.len();
            let name = latent_name(Kind::Band, &artist_names, &mut used_artists, cfg.homonym_rate, rng);
            artist_names.push(name.clone());
            let g = rng.gen_range(0..GENRES.len());
            entities.push(Latent {
                label: "artist".into(),
                name,
                parents: Vec::new(),
            });
            shared_relations.push((artist, "artistGenre".to_string(), genre(g)));
            for _ in 0..rng.gen_range(1..=3) {
                if entities.len() >= total {
                    break;
                }
                let album = entities.len();
                let title = latent_name(Kind::Album, &titles, &mut used_titles, cfg.homonym_rate, rng);
                titles.push(title.clone());
                entities.push(Latent {
                    label: "album".into(),
                    name: title.clone(),
                    parents: vec![artist],
                });
                relations.push((album, "albumArtist".to_string(), artist));
                let album_genre = if rng.gen_bool(0.8) { g } else { rng.gen_range(0..GENRES.len()) };
                shared_relations.push((album, "albumGenre".to_string(), genre(album_genre)));
                for _ in 0..rng.gen_range(1..=2) {
                    if entities.len() >= total {
                        break;
                    }
                    let release = entities.len();
                    let t = rng.gen_range(0..RELEASE_TYPES.len());
                    let name = match RELEASE_TYPES[t] {
                        "ep" => format!("{title} ep"),
                        "single" => format!("{title} single"),
                        _ => title.clone(),
                    };
                    entities.push(Latent {
                        label: "release".into(),
                        name,
                        parents: vec![album],
                    });
                    relations.push((release, "releaseAlbum".to_string(), album));
                    shared_relations.push((release, "releaseType".to_string(), release_type(t)));
                }
            }
        }
        side_end = side_end.min(entities.len());
    }

    let relation_subjects: BTreeMap<String, String> = [
        ("albumArtist", "album"),
        ("albumGenre", "album"),
        ("artistGenre", "artist"),
        ("releaseAlbum", "release"),
        ("releaseType", "release"),
    ]
    .iter()
    .map(|(r, s)| (r.to_string(), s.to_string()))
    .collect();
    Ok(World {
        entities,
        relations,
        shared,
        shared_relations,
        labels: DOMAIN_LABELS.iter().map(|s| s.to_string()).collect(),
        relation_subjects,
        source_len: side_end,
    })
}

/// Mutex label pairs drawn from the (disjoint) type labels, plus every pair of
/// relations whose subject labels are mutex.
fn ontology(cfg: &GenConfig, world: &World, rng: &mut ChaCha8Rng) -> Result<crate::kg::Ontology> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..world.labels.len() {
        for j in i + 1..world.labels.len() {
            pairs.push((i, j));
        }
    }
    pairs.shuffle(rng);
    let mut ont = crate::kg::Ontology::default();
    for &(i, j) in pairs.iter().take(cfg.num_mutex_pairs) {
        ont.add_mutex_label(&world.labels[i], &world.labels[j])?;
    }
    let rels: Vec<(&String, &String)> = world.relation_subjects.iter().collect();
    for (x, (r1, s1)) in rels.iter().enumerate() {
        for (r2, s2) in &rels[x + 1..] {
            if ont.is_mutex_label(s1, s2) {
                ont.add_mutex_relation(r1, r2)?;
            }
        }
    }
    Ok(ont)
}

fn confidence(rng: &mut ChaCha8Rng) -> f64 {
    // Two decimals keep the TSV files short and exact to round-trip.
    (rng.gen_range(70..=100) as f64) / 100.0
}

// ---------------------------------------------------------------------------
// Scenario writers

fn extractions(cfg: &GenConfig, world: &World, rng: &mut ChaCha8Rng) -> Instance {
    let k = cfg.refs_per_entity;
    let rid = |e: usize, i: usize| EntityId::new(format!("r{e}_{i}"));
    let mut g = KnowledgeGraph::new();
    for (e, latent) in world.entities.iter().enumerate() {
        for i in 0..k {
            let id = rid(e, i);
            g.add_entity(id.clone(), Origin::Extraction);
            g.names.insert(id.clone(), corrupt(&latent.name, cfg.name_noise, rng));
            if !rng.gen_bool(cfg.label_dropout) {
                g.add_label(id, &latent.label, confidence(rng), Origin::Extraction);
            }
        }
    }
    for (s, rel, o) in &world.relations {
        for i in 0..k {
            if !rng.gen_bool(cfg.relation_dropout) {
                g.add_triple(rid(*s, i), rel, rid(*o, i % k), confidence(rng), Origin::Extraction);
            }
        }
    }
    g.ontology = ontology(cfg, world, rng).expect("generated labels are distinct");

    let mut gold = GoldLabels {
        closed_world: true,
        ..GoldLabels::default()
    };
    for e in 0..world.entities.len() {
        for i in 0..k {
            for j in i + 1..k {
                gold.pairs.insert(canonical_pair(&rid(e, i), &rid(e, j)), true);
            }
        }
    }
    Instance {
        config: cfg.clone(),
        source: g,
        target: None,
        gold,
    }
}

/// Picks exactly `m` source entities such that every chosen entity's parents
/// are chosen too, growing the set from its frontier at random.
fn ancestor_closed(world: &World, m: usize, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
    let n = world.source_len;
    let mut chosen = BTreeSet::new();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut frontier: Vec<usize> = Vec::new();
    for (i, e) in world.entities[..n].iter().enumerate() {
        if e.parents.is_empty() {
            frontier.push(i);
        }
        for &p in &e.parents {
            children[p].push(i);
        }
    }
    while chosen.len() < m && !frontier.is_empty() {
        let x = frontier.swap_remove(rng.gen_range(0..frontier.len()));
        chosen.insert(x);
        for &c in &children[x] {
            if world.entities[c].parents.iter().all(|p| chosen.contains(p)) {
                frontier.push(c);
            }
        }
    }
    chosen
}

fn cross_graph(cfg: &GenConfig, world: &World, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let n = world.source_len;
    let new_count = (cfg.new_entity_fraction * n as f64).round() as usize;
    let existing = ancestor_closed(world, n - new_count, rng);
    if existing.len() != n - new_count {
        return Err(Error::Config(format!(
            "could not select {} existing entities",
            n - new_count
        )));
    }

    // Target ids are shuffled so that id order leaks nothing about the matching.
    let in_target: Vec<usize> = (0..world.entities.len())
        .filter(|i| *i >= n || existing.contains(i))
        .collect();
    let mut slots: Vec<usize> = (0..in_target.len()).collect();
    slots.shuffle(rng);
    let tid: BTreeMap<usize, EntityId> = in_target
        .iter()
        .zip(&slots)
        .map(|(&e, &s)| (e, EntityId::new(format!("t{s}"))))
        .collect();
    let sid = |e: usize| EntityId::new(format!("s{e}"));

    let ont = ontology(cfg, world, rng)?;
    let mut source = KnowledgeGraph::new();
    let mut target = KnowledgeGraph::new();
    for (id, name) in &world.shared {
        for g in [&mut source, &mut target] {
            g.add_entity(id.clone(), Origin::GraphB);
            g.names.insert(id.clone(), name.clone());
        }
    }
    for (e, latent) in world.entities.iter().enumerate() {
        if e < n {
            let id = sid(e);
            source.add_entity(id.clone(), Origin::GraphA);
            source.names.insert(id.clone(), corrupt(&latent.name, cfg.name_noise, rng));
            if !rng.gen_bool(cfg.label_dropout) {
                source.add_label(id, &latent.label, confidence(rng), Origin::GraphA);
            }
        }
        if let Some(id) = tid.get(&e) {
            target.add_entity(id.clone(), Origin::GraphB);
            target.names.insert(id.clone(), latent.name.clone());
            target.add_label(id.clone(), &latent.label, 1.0, Origin::GraphB);
        }
    }
    for (s, rel, o) in &world.relations {
        if *s < n && *o < n && !rng.gen_bool(cfg.relation_dropout) {
            source.add_triple(sid(*s), rel, sid(*o), confidence(rng), Origin::GraphA);
        }
        if let (Some(ts), Some(to)) = (tid.get(s), tid.get(o)) {
            target.add_triple(ts.clone(), rel, to.clone(), 1.0, Origin::GraphB);
        }
    }
    for (s, rel, c) in &world.shared_relations {
        let object = world.shared[*c].0.clone();
        if *s < n && !rng.gen_bool(cfg.relation_dropout) {
            source.add_triple(sid(*s), rel, object.clone(), confidence(rng), Origin::GraphA);
        }
        if let Some(ts) = tid.get(s) {
            target.add_triple(ts.clone(), rel, object, 1.0, Origin::GraphB);
        }
    }
    source.ontology = ont.clone();
    target.ontology = ont;

    let mut gold = GoldLabels {
        closed_world: true,
        ..GoldLabels::default()
    };
    for e in 0..n {
        let r = sid(e);
        let t = tid.get(&e).cloned().unwrap_or_else(|| r.skolem());
        gold.insert_pair(&r, &t, true)?;
        gold.targets.insert(r, t);
    }
    Ok(Instance {
        config: cfg.clone(),
        source,
        target: Some(target),
        gold,
    })
}
