use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "kgresolve", version, about = "Collective entity resolution for knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Resolve references and write scores, decisions and clusters or a matching.
    Resolve(ResolveArgs),
    /// Score resolution outputs against gold labels.
    Eval(EvalArgs),
    /// Generate a synthetic instance with ground truth.
    Gen(GenArgs),
    /// Compare rule-family configurations on the same inputs.
    Ablate(AblateArgs),
}

/// Settings shared by every command that runs the pipeline.
#[derive(Args, Debug, Clone, Default)]
pub struct RunFlags {
    /// Flat key=value settings file; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// extractions, extend or merge.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Rule program in the rule language, instead of builtin families.
    #[arg(long, value_name = "FILE", conflicts_with = "families")]
    pub rules: Option<PathBuf>,
    /// Comma-separated builtin rule families, e.g. `basic,abstract-kg-local`.
    #[arg(long, value_name = "LIST")]
    pub families: Option<String>,
    /// Minimum blocking score for a candidate pair.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Candidate pairs kept per entity.
    #[arg(long)]
    pub max_per_entity: Option<usize>,
    /// Score at or above which a pair is declared co-referent.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Primal and dual residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads (default: $KGRESOLVE_WORKERS, else all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Recorded in the run report; drives generation where relevant.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write every ground potential as text.
    #[arg(long, value_name = "FILE")]
    pub dump_groundings: Option<PathBuf>,
    /// Write objective and residuals per solver iteration.
    #[arg(long, value_name = "FILE")]
    pub solver_trace: Option<PathBuf>,
}

/// Graph inputs. `--input` names a directory laid out like `gen` output;
/// individual file flags override it.
#[derive(Args, Debug, Clone, Default)]
pub struct InputFlags {
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub triples: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub ontology: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub target_triples: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub target_labels: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub target_ontology: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub target_names: Option<PathBuf>,
    /// Precomputed similarity scores (`a<TAB>b<TAB>metric<TAB>score`).
    #[arg(long, value_name = "FILE")]
    pub sim_cache: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GoldFlags {
    /// Pair labels (`a<TAB>b<TAB>0|1`); defaults to gold.tsv in the input directory.
    #[arg(long, value_name = "FILE")]
    pub gold: Option<PathBuf>,
    /// Reference targets; defaults to goldmatch.tsv in the input directory.
    #[arg(long, value_name = "FILE")]
    pub gold_match: Option<PathBuf>,
    /// Treat pairs missing from the gold file as unlabeled rather than negative.
    #[arg(long)]
    pub open_world: bool,
}

#[derive(Args, Debug)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub run: RunFlags,
    #[command(flatten)]
    pub inputs: InputFlags,
    #[command(flatten)]
    pub gold: GoldFlags,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// Pair decisions; without it, scores are thresholded.
    #[arg(long, value_name = "FILE", conflicts_with = "matching")]
    pub decisions: Option<PathBuf>,
    /// Reference matching for split F1.
    #[arg(long, value_name = "FILE")]
    pub matching: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub gold_match: Option<PathBuf>,
    /// Treat pairs missing from the gold file as unlabeled rather than negative.
    #[arg(long)]
    pub open_world: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value = "extractions")]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Latent entities.
    #[arg(long)]
    pub entities: Option<usize>,
    #[arg(long)]
    pub refs_per_entity: Option<usize>,
    #[arg(long)]
    pub name_noise: Option<f64>,
    #[arg(long)]
    pub label_dropout: Option<f64>,
    #[arg(long)]
    pub relation_dropout: Option<f64>,
    #[arg(long)]
    pub new_entity_fraction: Option<f64>,
    #[arg(long)]
    pub labels: Option<usize>,
    #[arg(long)]
    pub relations: Option<usize>,
    /// Mutually exclusive label pairs (default: every pair).
    #[arg(long)]
    pub mutex_pairs: Option<usize>,
    #[arg(long)]
    pub homonym_rate: Option<f64>,
    /// Music-catalogue structure for extend/merge.
    #[arg(long)]
    pub domain: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunFlags,
    #[command(flatten)]
    pub inputs: InputFlags,
    #[command(flatten)]
    pub gold: GoldFlags,
    /// One configuration as `[NAME=]FAMILIES`; give at least two.
    #[arg(long = "variant", value_name = "SPEC", required = true)]
    pub variants: Vec<String>,
    /// Also write the table as TSV.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
