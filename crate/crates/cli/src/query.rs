//! Pattern queries over stored knowledge graphs.
//!
//! A pattern looks like an atom whose positions may be variables:
//! `change(male,?x)`, `?p(man)`, `hold(?x,?x)`. Constants match a term's
//! surface form, or its full `surface#synset` key when they carry a synset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use vid2kg_core::ontology::{closure, Ontology};
use vid2kg_core::{Atom, KnowledgeGraph, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Var(String),
    Const(Term),
}

impl Slot {
    fn parse(raw: &str) -> Result<Self, PatternError> {
        let raw = raw.trim();
        match raw.strip_prefix('?') {
            Some(name) if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                Ok(Slot::Var(name.to_owned()))
            }
            Some(_) => Err(PatternError(format!("bad variable name {raw:?}"))),
            None => raw
                .parse::<Term>()
                .map(Slot::Const)
                .map_err(|e| PatternError(e.to_string())),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Var(v) => write!(f, "?{v}"),
            Slot::Const(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPattern {
    pub predicate: Slot,
    pub args: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternError(pub String);

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid query pattern: {}", self.0)
    }
}

impl std::error::Error for PatternError {}

impl FromStr for QueryPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, PatternError> {
        let s = s.trim();
        let (head, rest) = s
            .split_once('(')
            .ok_or_else(|| PatternError(format!("{s:?} has no argument list")))?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| PatternError(format!("{s:?} is missing a closing parenthesis")))?;
        if inner.contains(['(', ')']) {
            return Err(PatternError(format!("{s:?} has nested parentheses")));
        }
        let args = inner.split(',').map(Slot::parse).collect::<Result<Vec<_>, _>>()?;
        if !matches!(args.len(), 1 | 2) {
            return Err(PatternError(format!("{s:?} has arity {}, expected 1 or 2", args.len())));
        }
        Ok(QueryPattern {
            predicate: Slot::parse(head)?,
            args,
        })
    }
}

impl fmt::Display for QueryPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
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

/// Variable name to bound surface form.
pub type Bindings = BTreeMap<String, String>;

fn const_matches(pattern: &Term, term: &Term) -> bool {
    match pattern.synset() {
        Some(_) => pattern == term,
        None => pattern.surface() == term.surface(),
    }
}

impl QueryPattern {
    /// Bindings under which `atom` instantiates the pattern, if any.
    pub fn unify(&self, atom: &Atom) -> Option<Bindings> {
        if atom.is_negated() || atom.arity() != self.args.len() {
            return None;
        }
        let mut bindings = Bindings::new();
        let slots = std::iter::once(&self.predicate).chain(&self.args);
        let terms = std::iter::once(atom.predicate()).chain(atom.args());
        for (slot, term) in slots.zip(terms) {
            match slot {
                Slot::Const(c) if !const_matches(c, term) => return None,
                Slot::Const(_) => {}
                Slot::Var(v) => match bindings.get(v) {
                    Some(bound) if bound != term.surface() => return None,
                    Some(_) => {}
                    None => {
                        bindings.insert(v.clone(), term.surface().to_owned());
                    }
                },
            }
        }
        Some(bindings)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueryMatch {
    pub video_id: String,
    pub bindings: Bindings,
}

impl fmt::Display for QueryMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.video_id)?;
        for (k, v) in &self.bindings {
            write!(f, "\t?{k}={v}")?;
        }
        Ok(())
    }
}

/// All matches of `pattern` in `store`, deduplicated and sorted by video id
/// then bindings. With an ontology, each graph is first extended with its
/// inferred facts.
pub fn run_query(store: &[KnowledgeGraph], pattern: &QueryPattern, ontology: Option<&Ontology>) -> Vec<QueryMatch> {
    let mut out = BTreeSet::new();
    for kg in store {
        let inferred = ontology.map(|ont| closure(&kg.facts, ont, None)).unwrap_or_default();
        for atom in kg.facts.iter().chain(&inferred) {
            if let Some(bindings) = pattern.unify(atom) {
                out.insert(QueryMatch {
                    video_id: kg.video_id.clone(),
                    bindings,
                });
            }
        }
    }
    out.into_iter().collect()
}
