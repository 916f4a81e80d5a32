//! Rule-based atom extraction over a dependency parse.
//!
//! Root atoms come from the `nsubj`/`obj`/`cop`/`case` structure around the
//! sentence root, further clauses from `cc` conjunctions, attributes from
//! `amod`, and `compound` modifiers are merged into the word they modify.

use std::collections::HashSet;

use log::warn;

use super::conllu::DependencySentence;
use crate::kg::{Atom, Pos, Term};

/// Which reading of the extraction rules to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtractionMode {
    /// Literal rules: nothing is extracted unless the root has an `obj`
    /// dependent, and only compounds immediately before their target merge.
    Faithful,
    /// Intransitive roots still yield atoms; compounds immediately after
    /// their target merge as `target·compound`.
    #[default]
    Repaired,
}

impl std::str::FromStr for ExtractionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faithful" => Ok(ExtractionMode::Faithful),
            "repaired" => Ok(ExtractionMode::Repaired),
            other => Err(format!("unknown extraction mode {other:?} (faithful|repaired)")),
        }
    }
}

/// An extracted atom plus the part of speech of its predicate word, which
/// ontology linking needs. Prepositional predicates carry no part of speech.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedAtom {
    pub atom: Atom,
    pub predicate_pos: Option<Pos>,
}

/// Atom over token indices, resolved to terms once compounds are merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TokenAtom {
    predicate: usize,
    args: Vec<usize>,
    pos: Option<Pos>,
}

fn word_class(upos: &str) -> Option<Pos> {
    match upos {
        "VERB" => Some(Pos::Verb),
        "ADJ" => Some(Pos::Adj),
        "NOUN" | "PROPN" => Some(Pos::Noun),
        _ => None,
    }
}

fn root_token_atom(
    sent: &DependencySentence,
    root: usize,
    subject_head: Option<usize>,
    mode: ExtractionMode,
) -> Option<TokenAtom> {
    let tok = sent.token(root)?;
    let subj = sent
        .dependent(root, "nsubj")
        .or_else(|| subject_head.and_then(|h| sent.dependent(h, "nsubj")))?;
    match word_class(&tok.upos)? {
        Pos::Verb => {
            let args = match sent.dependent(root, "obj") {
                Some(obj) => vec![subj, obj],
                None => vec![subj],
            };
            Some(TokenAtom {
                predicate: root,
                args,
                pos: Some(Pos::Verb),
            })
        }
        Pos::Adj => sent.dependent(root, "cop").map(|_| TokenAtom {
            predicate: root,
            args: vec![subj],
            pos: Some(Pos::Adj),
        }),
        Pos::Noun => {
            sent.dependent(root, "cop")?;
            let case = sent
                .dependents(root, "case")
                .find(|&i| sent.token(i).is_some_and(|t| t.upos == "ADP"))?;
            if mode == ExtractionMode::Faithful {
                warn!(
                    "prepositional root atom in {:?}: reading the undefined first argument as the subject",
                    sent.text
                );
            }
            Some(TokenAtom {
                predicate: case,
                args: vec![subj, root],
                pos: None,
            })
        }
    }
}

/// Atom rooted at token `root` (1-based). The subject is the `nsubj`
/// dependent of `root`, or failing that the `nsubj` dependent of
/// `subject_head`, which lets a conjoined clause inherit its subject.
pub fn extract_root_atom(
    sent: &DependencySentence,
    root: usize,
    subject_head: Option<usize>,
) -> Option<Atom> {
    let raw = root_token_atom(sent, root, subject_head, ExtractionMode::Repaired)?;
    let surfaces = lemmas(sent);
    resolve(&raw, &surfaces).map(|e| e.atom)
}

fn lemmas(sent: &DependencySentence) -> Vec<String> {
    sent.tokens.iter().map(|t| t.lemma.clone()).collect()
}

fn resolve(raw: &TokenAtom, surfaces: &[String]) -> Option<ExtractedAtom> {
    let term = |i: usize| Term::new(surfaces[i - 1].clone()).ok();
    let predicate = term(raw.predicate)?;
    let args = raw.args.iter().map(|&i| term(i)).collect::<Option<Vec<_>>>()?;
    Some(ExtractedAtom {
        atom: Atom::new(predicate, args, false).ok()?,
        predicate_pos: raw.pos,
    })
}

pub fn extract_all_atoms(sent: &DependencySentence, mode: ExtractionMode) -> Vec<ExtractedAtom> {
    let Some(root) = sent.root() else {
        return Vec::new();
    };
    if mode == ExtractionMode::Faithful && sent.dependent(root, "obj").is_none() {
        return Vec::new();
    }

    let mut raw = Vec::new();
    raw.extend(root_token_atom(sent, root, None, mode));

    for conj in sent.tokens.iter().filter(|t| t.relation() == "cc") {
        let clause_root = conj.head;
        let Some(clause_tok) = sent.token(clause_root) else {
            continue;
        };
        let parent = Some(clause_tok.head).filter(|&h| h != 0);
        raw.extend(root_token_atom(sent, clause_root, parent, mode));
    }

    for modifier in sent.tokens.iter().filter(|t| t.relation() == "amod" && t.head != 0) {
        raw.push(TokenAtom {
            predicate: modifier.index,
            args: vec![modifier.head],
            pos: Some(Pos::Adj),
        });
    }

    let mut surfaces = lemmas(sent);
    for comp in sent.tokens.iter().filter(|t| t.relation() == "compound" && t.head != 0) {
        let (c, target) = (comp.index, comp.head);
        if c + 1 == target {
            surfaces[target - 1] = format!("{}{}", surfaces[c - 1], surfaces[target - 1]);
        } else if mode == ExtractionMode::Repaired && c == target + 1 {
            surfaces[target - 1] = format!("{}{}", surfaces[target - 1], surfaces[c - 1]);
        }
    }

    let mut seen = HashSet::new();
    raw.iter()
        .filter_map(|r| resolve(r, &surfaces))
        .filter(|e| seen.insert(e.atom.clone()))
        .collect()
}
