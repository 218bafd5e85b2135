//! Weighted first-order rules: representation, a line-oriented text syntax,
//! and the builtin rule library organised by feature family.
//!
//! Syntax, one rule per line (`#` starts a comment):
//!
//! ```text
//! [similarity] 10.0 : CandSame(A,B) & Sim(A,B) -> Same(A,B) ^2
//! [negative_prior] 1 : !Same(A,B) ^2
//! ```
//!
//! The `[name]` prefix is optional (unnamed rules are called `ruleN`), and a
//! rule with no body ranges over all candidate co-reference atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Diagnostic;
use crate::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    Same,
    CandSame,
    Sim,
    Label,
    Rel,
    NewEnt,
    MutexLabel,
    MutexRel,
}

/// What kind of constant a predicate argument ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArgKind {
    Entity,
    Label,
    Relation,
}

impl Predicate {
    pub const ALL: [Predicate; 8] = [
        Predicate::Same,
        Predicate::CandSame,
        Predicate::Sim,
        Predicate::Label,
        Predicate::Rel,
        Predicate::NewEnt,
        Predicate::MutexLabel,
        Predicate::MutexRel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Same => "Same",
            Predicate::CandSame => "CandSame",
            Predicate::Sim => "Sim",
            Predicate::Label => "Label",
            Predicate::Rel => "Rel",
            Predicate::NewEnt => "NewEnt",
            Predicate::MutexLabel => "MutexLabel",
            Predicate::MutexRel => "MutexRel",
        }
    }

    pub fn signature(self) -> &'static [ArgKind] {
        use ArgKind::*;
        match self {
            Predicate::Same | Predicate::CandSame | Predicate::Sim => &[Entity, Entity],
            Predicate::Label => &[Entity, Label],
            Predicate::Rel => &[Entity, Entity, Relation],
            Predicate::NewEnt => &[Entity],
            Predicate::MutexLabel => &[Label, Label],
            Predicate::MutexRel => &[Relation, Relation],
        }
    }

    pub fn arity(self) -> usize {
        self.signature().len()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown predicate `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "\"{c}\""),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub negated: bool,
    pub predicate: Predicate,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(negated: bool, predicate: Predicate, args: &[&str]) -> Self {
        let args = args
            .iter()
            .map(|a| match a.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
                Some(c) => Term::Const(c.to_string()),
                None => Term::Var(a.to_string()),
            })
            .collect();
        Literal {
            negated,
            predicate,
            args,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> + '_ {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Exponent {
    Linear,
    Squared,
}

impl Exponent {
    pub fn power(self) -> u32 {
        match self {
            Exponent::Linear => 1,
            Exponent::Squared => 2,
        }
    }

    pub fn from_power(p: u32) -> Option<Self> {
        match p {
            1 => Some(Exponent::Linear),
            2 => Some(Exponent::Squared),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleTemplate {
    pub name: String,
    pub weight: f64,
    pub body: Vec<Literal>,
    pub head: Literal,
    pub exponent: Exponent,
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} : ", self.name, self.weight)?;
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{l}")?;
        }
        if !self.body.is_empty() {
            f.write_str(" -> ")?;
        }
        write!(f, "{}", self.head)?;
        if self.exponent == Exponent::Squared {
            f.write_str(" ^2")?;
        }
        Ok(())
    }
}

impl RuleTemplate {
    /// Invariant violations of this single rule.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            out.push(format!("weight {} must be a finite nonnegative number", self.weight));
        }
        if self.head.predicate != Predicate::Same {
            out.push(format!(
                "head predicate must be Same or !Same, found {}",
                self.head.predicate
            ));
        }
        let mut kinds: BTreeMap<&str, ArgKind> = BTreeMap::new();
        for lit in self.body.iter().chain(std::iter::once(&self.head)) {
            if lit.args.len() != lit.predicate.arity() {
                out.push(format!(
                    "{} takes {} arguments, found {}",
                    lit.predicate,
                    lit.predicate.arity(),
                    lit.args.len()
                ));
                continue;
            }
            for (term, kind) in lit.args.iter().zip(lit.predicate.signature()) {
                if let Term::Var(v) = term {
                    match kinds.get(v.as_str()) {
                        Some(k) if k != kind => out.push(format!(
                            "variable {v} used both as {k:?} and as {kind:?}"
                        )),
                        Some(_) => {}
                        None => {
                            kinds.insert(v, *kind);
                        }
                    }
                }
            }
        }
        if self.body.is_empty() {
            return out;
        }
        let bound: BTreeSet<&str> = self
            .body
            .iter()
            .filter(|l| !l.negated && l.predicate != Predicate::Sim)
            .flat_map(Literal::vars)
            .collect();
        let in_body: BTreeSet<&str> = self.body.iter().flat_map(Literal::vars).collect();
        let head_only: BTreeSet<&str> = self.head.vars().filter(|v| !in_body.contains(v)).collect();
        for v in &head_only {
            out.push(format!("unsafe variable {v}: it does not occur in the body"));
        }
        let unbound: BTreeSet<&str> = self
            .body
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(Literal::vars)
            .filter(|v| !bound.contains(v) && !head_only.contains(v))
            .collect();
        for v in unbound {
            out.push(format!(
                "unsafe variable {v}: it must occur in a positive body literal other than Sim"
            ));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<RuleTemplate>,
    pub scenario: Option<Scenario>,
}

impl RuleSet {
    pub fn render(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }

    pub fn get(&self, name: &str) -> Option<&RuleTemplate> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.name.as_str()).collect()
    }
}

pub fn validate_ruleset(rs: &RuleSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for rule in &rs.rules {
        if !seen.insert(rule.name.as_str()) {
            out.push(Diagnostic {
                message: format!("duplicate rule name `{}`", rule.name),
            });
        }
        for p in rule.problems() {
            out.push(Diagnostic {
                message: format!("rule `{}`: {p}", rule.name),
            });
        }
    }
    out
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || matches!(self.chars[self.pos], '_' | '-' | '.'))
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if self.chars.get(self.pos) == Some(&'-') {
            self.pos += 1;
        }
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_digit() || matches!(self.chars[self.pos], '.' | 'e' | 'E' | '+'))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map_err(|_| Error::Syntax {
            line: self.line,
            column: start + 1,
            message: format!("expected a weight, found `{text}`"),
        })
    }

    fn term(&mut self) -> Result<Term> {
        if self.eat('"') {
            let start = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos] != '"' {
                self.pos += 1;
            }
            if self.pos == self.chars.len() {
                return Err(self.err("unterminated constant"));
            }
            let c: String = self.chars[start..self.pos].iter().collect();
            self.pos += 1;
            return Ok(Term::Const(c));
        }
        let col = self.pos;
        let id = self.ident()?;
        if !id.starts_with(|c: char| c.is_uppercase()) {
            return Err(Error::Syntax {
                line: self.line,
                column: col + 1,
                message: format!("variable `{id}` must start with an uppercase letter (quote constants)"),
            });
        }
        Ok(Term::Var(id))
    }

    fn literal(&mut self) -> Result<Literal> {
        let negated = self.eat('!');
        self.skip_ws();
        let col = self.pos;
        let name = self.ident()?;
        let predicate: Predicate = name.parse().map_err(|_| Error::Syntax {
            line: self.line,
            column: col + 1,
            message: format!("unknown predicate `{name}`"),
        })?;
        self.expect('(')?;
        let mut args = vec![self.term()?];
        while self.eat(',') {
            args.push(self.term()?);
        }
        self.expect(')')?;
        if args.len() != predicate.arity() {
            return Err(Error::Syntax {
                line: self.line,
                column: col + 1,
                message: format!(
                    "arity mismatch: {predicate} takes {} arguments, found {}",
                    predicate.arity(),
                    args.len()
                ),
            });
        }
        Ok(Literal {
            negated,
            predicate,
            args,
        })
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a rule program, preserving rule order.
pub fn parse_rules(text: &str) -> Result<RuleSet> {
    let mut rules: Vec<RuleTemplate> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor::new(line, line_no);
        let name = if cur.eat('[') {
            let n = cur.ident()?;
            cur.expect(']')?;
            n
        } else {
            format!("rule{}", rules.len() + 1)
        };
        let weight_col = {
            cur.skip_ws();
            cur.pos + 1
        };
        let weight = cur.number()?;
        cur.expect(':')?;
        let mut literals = vec![cur.literal()?];
        let mut head = None;
        loop {
            if cur.eat('&') {
                literals.push(cur.literal()?);
            } else if cur.eat_str("->") {
                head = Some(cur.literal()?);
                break;
            } else {
                break;
            }
        }
        let (body, head) = match head {
            Some(h) => (literals, h),
            None if literals.len() == 1 => (Vec::new(), literals.pop().expect("one literal")),
            None => return Err(cur.err("expected `&` or `->`")),
        };
        let exponent = if cur.eat('^') {
            let col = cur.pos;
            let p = cur.number()?;
            Exponent::from_power(p as u32)
                .filter(|_| p.fract() == 0.0)
                .ok_or(Error::Syntax {
                    line: line_no,
                    column: col + 1,
                    message: format!("exponent must be 1 or 2, found {p}"),
                })?
        } else {
            Exponent::Linear
        };
        if !cur.at_end() {
            return Err(cur.err("unexpected trailing input"));
        }
        let rule = RuleTemplate {
            name,
            weight,
            body,
            head,
            exponent,
        };
        if !(weight >= 0.0) {
            return Err(Error::Syntax {
                line: line_no,
                column: weight_col,
                message: format!("negative weight {weight}"),
            });
        }
        if let Some(problem) = rule.problems().into_iter().next() {
            return Err(Error::InvalidRule {
                rule: rule.name,
                message: format!("line {line_no}: {problem}"),
            });
        }
        if rules.iter().any(|r| r.name == rule.name) {
            return Err(Error::InvalidRule {
                rule: rule.name,
                message: format!("line {line_no}: duplicate rule name"),
            });
        }
        rules.push(rule);
    }
    Ok(RuleSet {
        rules,
        scenario: None,
    })
}

/// Feature families: granularity crossed with local/collective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    BasicLocal,
    BasicCollective,
    NewEntityLocal,
    NewEntityCollective,
    AbstractKgLocal,
    AbstractKgCollective,
    DomainLocal,
    DomainCollective,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::BasicLocal,
        Family::BasicCollective,
        Family::NewEntityLocal,
        Family::NewEntityCollective,
        Family::AbstractKgLocal,
        Family::AbstractKgCollective,
        Family::DomainLocal,
        Family::DomainCollective,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Family::BasicLocal => "basic-local",
            Family::BasicCollective => "basic-collective",
            Family::NewEntityLocal => "new-entity-local",
            Family::NewEntityCollective => "new-entity-collective",
            Family::AbstractKgLocal => "abstract-kg-local",
            Family::AbstractKgCollective => "abstract-kg-collective",
            Family::DomainLocal => "domain-local",
            Family::DomainCollective => "domain-collective",
        }
    }

    /// Families named by a flag key; group keys expand to both halves.
    pub fn from_key(key: &str) -> Result<Vec<Family>> {
        use Family::*;
        Ok(match key {
            "all" => Family::ALL.to_vec(),
            "basic" => vec![BasicLocal, BasicCollective],
            "new-entity" => vec![NewEntityLocal, NewEntityCollective],
            "abstract-kg" => vec![AbstractKgLocal, AbstractKgCollective],
            "domain" => vec![DomainLocal, DomainCollective],
            other => vec![Family::ALL
                .into_iter()
                .find(|f| f.key() == other)
                .ok_or_else(|| Error::Config(format!("unknown rule family `{other}`")))?],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FamilySet(pub BTreeSet<Family>);

impl FamilySet {
    pub fn all() -> Self {
        FamilySet(Family::ALL.into_iter().collect())
    }

    pub fn none() -> Self {
        FamilySet::default()
    }

    pub fn contains(&self, f: Family) -> bool {
        self.0.contains(&f)
    }

    /// Comma-separated family keys, e.g. `basic-local,abstract-kg-local`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut out = FamilySet::none();
        for key in list.split(',').map(str::trim).filter(|k| !k.is_empty()) {
            out.0.extend(Family::from_key(key)?);
        }
        Ok(out)
    }

    /// Starts from every family enabled and applies the boolean overrides.
    pub fn from_flags(flags: &BTreeMap<String, bool>) -> Result<Self> {
        let mut out = FamilySet::all();
        for (key, &on) in flags {
            for f in Family::from_key(key)? {
                if on {
                    out.0.insert(f);
                } else {
                    out.0.remove(&f);
                }
            }
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|f| f.key()).collect::<Vec<_>>().join(",")
    }
}

/// One rule of the builtin library.
pub struct BuiltinRule {
    pub number: u8,
    pub family: Family,
    pub text: &'static str,
}

/// Default weights order hard constraints above evidence above priors.
pub const BUILTIN_RULES: [BuiltinRule; 18] = [
    BuiltinRule { number: 1, family: Family::BasicLocal,
        text: "[negative_prior] 1 : !Same(A,B) ^2" },
    BuiltinRule { number: 2, family: Family::BasicLocal,
        text: "[positive_prior] 0.5 : CandSame(A,B) -> Same(A,B) ^2" },
    BuiltinRule { number: 3, family: Family::BasicLocal,
        text: "[similarity] 10 : CandSame(A,B) & Sim(A,B) -> Same(A,B) ^2" },
    BuiltinRule { number: 4, family: Family::BasicCollective,
        text: "[symmetry] 100 : Same(A,B) -> Same(B,A)" },
    BuiltinRule { number: 5, family: Family::BasicCollective,
        text: "[transitivity] 50 : CandSame(A,B) & CandSame(B,C) & CandSame(A,C) & Same(A,B) & Same(B,C) -> Same(A,C)" },
    BuiltinRule { number: 6, family: Family::BasicCollective,
        text: "[sparsity] 20 : CandSame(A,B) & CandSame(A,C) & Same(A,B) -> !Same(A,C)" },
    BuiltinRule { number: 7, family: Family::NewEntityLocal,
        text: "[new_entity_prior] 2 : CandSame(A,B) & NewEnt(B) -> Same(A,B) ^2" },
    BuiltinRule { number: 8, family: Family::NewEntityCollective,
        text: "[new_entity_penalty] 20 : Same(A,B) & CandSame(A,C) & NewEnt(C) -> !Same(A,C)" },
    BuiltinRule { number: 9, family: Family::AbstractKgLocal,
        text: "[label_agreement] 5 : CandSame(A,B) & Sim(A,B) & Label(A,L) & Label(B,L) -> Same(A,B) ^2" },
    BuiltinRule { number: 10, family: Family::AbstractKgLocal,
        text: "[label_disagreement] 2.5 : CandSame(A,B) & Label(A,L) & !Label(B,L) & !NewEnt(B) -> !Same(A,B)" },
    BuiltinRule { number: 11, family: Family::AbstractKgLocal,
        text: "[label_mutex] 100 : CandSame(A,B) & Label(A,L1) & Label(B,L2) & MutexLabel(L1,L2) -> !Same(A,B)" },
    BuiltinRule { number: 12, family: Family::AbstractKgCollective,
        text: "[relational_agreement] 5 : CandSame(A,B) & CandSame(C,D) & Sim(A,B) & Same(C,D) & Rel(A,C,R) & Rel(B,D,R) -> Same(A,B) ^2" },
    BuiltinRule { number: 13, family: Family::AbstractKgCollective,
        text: "[relational_disagreement] 2.5 : CandSame(A,B) & CandSame(C,D) & Same(C,D) & !Rel(A,C,R) & !NewEnt(A) & !NewEnt(C) & Rel(B,D,R) -> !Same(A,B)" },
    BuiltinRule { number: 14, family: Family::AbstractKgCollective,
        text: "[relational_mutex] 100 : CandSame(A,B) & CandSame(C,D) & Same(C,D) & Rel(A,C,R1) & Rel(B,D,R2) & MutexRel(R1,R2) -> !Same(A,B)" },
    BuiltinRule { number: 15, family: Family::DomainLocal,
        text: "[domain_release_type] 10 : CandSame(A,B) & Sim(A,B) & Rel(A,C,\"releaseType\") & Rel(B,C,\"releaseType\") -> Same(A,B) ^2" },
    BuiltinRule { number: 16, family: Family::DomainLocal,
        text: "[domain_artist] 10 : CandSame(A,B) & Sim(A,B) & Label(A,\"artist\") & Label(B,\"artist\") -> Same(A,B) ^2" },
    BuiltinRule { number: 17, family: Family::DomainCollective,
        text: "[domain_release_album] 10 : CandSame(A,B) & Sim(A,B) & CandSame(C,D) & Same(B,A) & Rel(A,C,\"releaseAlbum\") & Rel(B,D,\"releaseAlbum\") -> Same(C,D) ^2" },
    BuiltinRule { number: 18, family: Family::DomainCollective,
        text: "[domain_album_artist_genre] 10 : CandSame(A,B) & CandSame(C,D) & Sim(A,B) & Sim(C,D) & Rel(A,C,\"albumArtist\") & Rel(B,D,\"albumArtist\") & Rel(A,G,\"albumGenre\") & Rel(B,G,\"albumGenre\") & Rel(C,G,\"artistGenre\") & Rel(D,G,\"artistGenre\") & Same(C,D) -> Same(A,B) ^2" },
];

/// Builtin rule numbers applicable to each scenario.
pub fn applicable_rules(scenario: Scenario) -> &'static [u8] {
    match scenario {
        Scenario::Extractions => &[1, 2, 3, 4, 5, 9, 11, 12, 14],
        Scenario::Extend => &[1, 2, 3, 4, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18],
        Scenario::Merge => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18],
    }
}

pub fn builtin_rule(number: u8) -> Option<RuleTemplate> {
    BUILTIN_RULES
        .iter()
        .find(|r| r.number == number)
        .map(|r| parse_rules(r.text).expect("builtin rules parse").rules.remove(0))
}

/// The builtin rules applicable to `scenario`, restricted to enabled families.
pub fn builtin_ruleset(scenario: Scenario, families: &FamilySet) -> RuleSet {
    let applicable = applicable_rules(scenario);
    let rules = BUILTIN_RULES
        .iter()
        .filter(|r| applicable.contains(&r.number) && families.contains(r.family))
        .map(|r| builtin_rule(r.number).expect("known rule"))
        .collect();
    RuleSet {
        rules,
        scenario: Some(scenario),
    }
}

/// Same as [`builtin_ruleset`] with flag-map semantics (unknown keys rejected).
pub fn builtin_ruleset_with_flags(scenario: Scenario, flags: &BTreeMap<String, bool>) -> Result<RuleSet> {
    Ok(builtin_ruleset(scenario, &FamilySet::from_flags(flags)?))
}

/// Builtin number of a rule name, if it is a library rule.
pub fn builtin_number(name: &str) -> Option<u8> {
    BUILTIN_RULES.iter().find_map(|r| {
        let tail = r.text.strip_prefix('[')?;
        let end = tail.find(']')?;
        (tail[..end] == *name).then_some(r.number)
    })
}
