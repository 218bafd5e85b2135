//! Flat-file formats for resolution outputs and their readers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::TraceRow;
use crate::kg::{read_file, tsv_rows, EntityId};
use crate::resolution::{Pair, Scores};
use crate::similarity::canonical_pair;

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn scores_tsv(scores: &Scores) -> String {
    let mut out = String::new();
    for ((a, b), s) in scores {
        let _ = writeln!(out, "{a}\t{b}\t{s}");
    }
    out
}

pub fn decisions_tsv(decisions: &BTreeSet<Pair>) -> String {
    let mut out = String::new();
    for (a, b) in decisions {
        let _ = writeln!(out, "{a}\t{b}");
    }
    out
}

pub fn clusters_tsv(clusters: &BTreeMap<EntityId, EntityId>) -> String {
    let mut out = String::new();
    for (e, c) in clusters {
        let _ = writeln!(out, "{e}\t{c}");
    }
    out
}

pub fn matching_tsv(matching: &BTreeMap<EntityId, EntityId>) -> String {
    let mut out = String::new();
    for (r, t) in matching {
        let _ = writeln!(out, "{r}\t{t}\t{}", u8::from(t.has_skolem_prefix()));
    }
    out
}

pub fn report_tsv(rows: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

pub fn trace_tsv(trace: &[TraceRow]) -> String {
    let mut out = String::new();
    for t in trace {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            t.iteration, t.objective, t.primal_residual, t.dual_residual
        );
    }
    out
}

fn columns(cols: &[&str], n: usize, path: &str, line: usize) -> Result<()> {
    if cols.len() != n {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            message: format!("expected {n} tab-separated columns, found {}", cols.len()),
        });
    }
    Ok(())
}

pub fn parse_scores(text: &str, path: &str) -> Result<Scores> {
    let mut out = Scores::new();
    for (line, cols) in tsv_rows(text) {
        columns(&cols, 3, path, line)?;
        let s: f64 = cols[2].trim().parse().map_err(|_| Error::Parse {
            path: path.to_string(),
            line,
            message: format!("invalid score `{}`", cols[2]),
        })?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Range {
                path: path.to_string(),
                line,
                value: s,
            });
        }
        out.insert(canonical_pair(&cols[0].into(), &cols[1].into()), s);
    }
    Ok(out)
}

/// Pairs in `a<TAB>b` form (decisions or candidate overrides).
pub fn parse_pairs(text: &str, path: &str) -> Result<Vec<Pair>> {
    let mut out = Vec::new();
    for (line, cols) in tsv_rows(text) {
        columns(&cols, 2, path, line)?;
        out.push((EntityId::new(cols[0]), EntityId::new(cols[1])));
    }
    Ok(out)
}

/// `reference<TAB>target[<TAB>isNew]`.
pub fn parse_matching(text: &str, path: &str) -> Result<BTreeMap<EntityId, EntityId>> {
    let mut out = BTreeMap::new();
    for (line, cols) in tsv_rows(text) {
        if !(2..=3).contains(&cols.len()) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
            });
        }
        out.insert(EntityId::new(cols[0]), EntityId::new(cols[1]));
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Scores> {
    parse_scores(&read_file(path)?, &path.display().to_string())
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    parse_pairs(&read_file(path)?, &path.display().to_string())
}

pub fn read_matching(path: &Path) -> Result<BTreeMap<EntityId, EntityId>> {
    parse_matching(&read_file(path)?, &path.display().to_string())
}
