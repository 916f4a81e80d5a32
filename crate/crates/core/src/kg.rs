//! Atoms, knowledge graphs, vocabularies and dataset records, plus their
//! JSONL wire forms.
//!
//! A [`Term`] is a lowercase lemma optionally linked to an ontology synset.
//! Its canonical text form is `surface` or `surface#synset`; an [`Atom`]
//! renders as `pred(a)` / `pred(a,b)`, prefixed with `!` when negated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RESERVED: &[char] = &['(', ')', ',', '#', '!', '?'];

/// Coarse part of speech used for ontology lookups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adj => "adj",
        })
    }
}

/// A lowercase lemma, optionally linked to an ontology synset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    surface: String,
    synset: Option<String>,
}

impl Term {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if !valid_surface(&surface) {
            return Err(Error::InvalidTerm(surface));
        }
        Ok(Term {
            surface,
            synset: None,
        })
    }

    pub fn linked(surface: impl Into<String>, synset: impl Into<String>) -> Result<Self> {
        Term::new(surface)?.with_synset(synset)
    }

    pub fn with_synset(mut self, synset: impl Into<String>) -> Result<Self> {
        let synset = synset.into();
        if !valid_synset_id(&synset) {
            return Err(Error::InvalidTerm(format!("{}#{}", self.surface, synset)));
        }
        self.synset = Some(synset);
        Ok(self)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn synset(&self) -> Option<&str> {
        self.synset.as_deref()
    }

    pub fn unlinked(&self) -> Term {
        Term {
            surface: self.surface.clone(),
            synset: None,
        }
    }

    /// Canonical text key: `surface` or `surface#synset`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

fn valid_surface(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c.is_uppercase() || RESERVED.contains(&c))
}

fn valid_synset_id(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.synset {
            Some(syn) => write!(f, "{}#{}", self.surface, syn),
            None => f.write_str(&self.surface),
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once('#') {
            Some((surface, syn)) => Term::linked(surface, syn),
            None => Term::new(s),
        }
    }
}

/// A predicate applied to one or two terms, possibly negated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    predicate: Term,
    args: Vec<Term>,
    negated: bool,
}

impl Atom {
    pub fn new(predicate: Term, args: Vec<Term>, negated: bool) -> Result<Self> {
        if args.is_empty() || args.len() > 2 {
            return Err(Error::InvalidAtom(format!(
                "{} has arity {}; only unary and binary predicates are supported",
                predicate,
                args.len()
            )));
        }
        Ok(Atom {
            predicate,
            args,
            negated,
        })
    }

    pub fn unary(predicate: Term, arg: Term) -> Self {
        Atom {
            predicate,
            args: vec![arg],
            negated: false,
        }
    }

    pub fn binary(predicate: Term, subject: Term, object: Term) -> Self {
        Atom {
            predicate,
            args: vec![subject, object],
            negated: false,
        }
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn negated(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn with_polarity(mut self, negated: bool) -> Self {
        self.negated = negated;
        self
    }

    /// Same predicate and arguments with the given predicate substituted.
    pub fn with_predicate(&self, predicate: Term) -> Self {
        Atom {
            predicate,
            args: self.args.clone(),
            negated: self.negated,
        }
    }

    pub fn with_args(&self, args: Vec<Term>) -> Self {
        debug_assert!(!args.is_empty() && args.len() <= 2);
        Atom {
            predicate: self.predicate.clone(),
            args,
            negated: self.negated,
        }
    }
}

/// Display form: `pred(a)`, `pred(a,b)`, `!pred(a,b)`.
pub fn canonical_atom_string(atom: &Atom) -> String {
    atom.to_string()
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidAtom(format!("cannot parse {s:?}"));
        let body = s.trim();
        let (negated, body) = match body.strip_prefix('!') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, body),
        };
        let open = body.find('(').ok_or_else(bad)?;
        let inner = body[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let predicate: Term = body[..open].parse()?;
        let args = inner
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Term>>>()?;
        Atom::new(predicate, args, negated)
    }
}

/// Per-video knowledge graph: individuals, facts `T` and negated facts `F`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    pub video_id: String,
    pub individuals: BTreeSet<Term>,
    pub facts: BTreeSet<Atom>,
    pub negated_facts: BTreeSet<Atom>,
}

impl KnowledgeGraph {
    pub fn new(video_id: impl Into<String>) -> Self {
        KnowledgeGraph {
            video_id: video_id.into(),
            ..Default::default()
        }
    }

    /// Inserts an atom into `T` or `F` by polarity and registers its
    /// arguments as individuals. Returns whether the atom was new.
    pub fn insert(&mut self, atom: Atom) -> Result<bool> {
        let flipped = atom.clone().negated();
        let clash = if atom.is_negated() {
            self.facts.contains(&flipped)
        } else {
            self.negated_facts.contains(&flipped)
        };
        if clash {
            return Err(Error::InvalidAtom(format!(
                "{atom} contradicts {flipped} in {}",
                self.video_id
            )));
        }
        self.individuals.extend(atom.args().iter().cloned());
        Ok(if atom.is_negated() {
            self.negated_facts.insert(atom)
        } else {
            self.facts.insert(atom)
        })
    }

    /// True when the graph has no (positive) facts.
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter().chain(self.negated_facts.iter())
    }
}

/// Vocabulary retained after count filtering: individuals `A` and
/// predicates `P` split by arity, with per-video presence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub individuals: BTreeSet<Term>,
    pub unary_predicates: BTreeSet<Term>,
    pub binary_predicates: BTreeSet<Term>,
    pub individual_counts: BTreeMap<Term, usize>,
    pub predicate_counts: BTreeMap<Term, usize>,
}

impl Vocabulary {
    /// Vocabulary spanning everything mentioned by a set of records.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Self {
        let mut vocab = Vocabulary::default();
        for record in records {
            for term in &record.individuals {
                *vocab.individual_counts.entry(term.clone()).or_default() += 1;
            }
            let mut seen = BTreeSet::new();
            for atom in record.facts.iter().chain(&record.negated_facts) {
                vocab.individuals.extend(atom.args().iter().cloned());
                match atom.arity() {
                    1 => vocab.unary_predicates.insert(atom.predicate().clone()),
                    _ => vocab.binary_predicates.insert(atom.predicate().clone()),
                };
                if seen.insert(atom.predicate().clone()) {
                    *vocab
                        .predicate_counts
                        .entry(atom.predicate().clone())
                        .or_default() += 1;
                }
            }
            vocab.individuals.extend(record.individuals.iter().cloned());
        }
        vocab
    }

    pub fn predicates_of_arity(&self, arity: usize) -> &BTreeSet<Term> {
        if arity == 1 {
            &self.unary_predicates
        } else {
            &self.binary_predicates
        }
    }

    pub fn admits(&self, atom: &Atom) -> bool {
        self.predicates_of_arity(atom.arity())
            .contains(atom.predicate())
            && atom.args().iter().all(|a| self.individuals.contains(a))
    }
}

/// One training/evaluation example: `(video, individuals, T, F)` plus an
/// optional precomputed video encoding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetRecord {
    pub video_id: String,
    pub individuals: BTreeSet<Term>,
    pub facts: BTreeSet<Atom>,
    pub negated_facts: BTreeSet<Atom>,
    pub feature: Option<Vec<f64>>,
}

impl From<KnowledgeGraph> for DatasetRecord {
    fn from(kg: KnowledgeGraph) -> Self {
        DatasetRecord {
            video_id: kg.video_id,
            individuals: kg.individuals,
            facts: kg.facts,
            negated_facts: kg.negated_facts,
            feature: None,
        }
    }
}

impl From<DatasetRecord> for KnowledgeGraph {
    fn from(r: DatasetRecord) -> Self {
        KnowledgeGraph {
            video_id: r.video_id,
            individuals: r.individuals,
            facts: r.facts,
            negated_facts: r.negated_facts,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON wire forms

/// One fact object in KG / dataset JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactJson {
    pub pred: String,
    pub args: Vec<String>,
    #[serde(default)]
    pub neg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_syn: Option<String>,
    #[serde(default, skip_serializing_if = "all_none")]
    pub arg_syns: Vec<Option<String>>,
    /// Part of speech of the predicate word, when known from extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_pos: Option<Pos>,
}

fn all_none(v: &[Option<String>]) -> bool {
    v.iter().all(Option::is_none)
}

impl FactJson {
    pub fn from_atom(atom: &Atom) -> Self {
        FactJson {
            pred: atom.predicate().surface().to_owned(),
            args: atom.args().iter().map(|a| a.surface().to_owned()).collect(),
            neg: atom.is_negated(),
            pred_syn: atom.predicate().synset().map(str::to_owned),
            arg_syns: atom
                .args()
                .iter()
                .map(|a| a.synset().map(str::to_owned))
                .collect(),
            pred_pos: None,
        }
    }

    pub fn to_atom(&self) -> Result<Atom> {
        if !self.arg_syns.is_empty() && self.arg_syns.len() != self.args.len() {
            return Err(Error::InvalidAtom(format!(
                "{}: {} args but {} arg_syns",
                self.pred,
                self.args.len(),
                self.arg_syns.len()
            )));
        }
        let term = |surface: &str, syn: Option<&String>| -> Result<Term> {
            let t = Term::new(surface)?;
            match syn {
                Some(s) => t.with_synset(s.clone()),
                None => Ok(t),
            }
        };
        let predicate = term(&self.pred, self.pred_syn.as_ref())?;
        let args = self
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| term(a, self.arg_syns.get(i).and_then(Option::as_ref)))
            .collect::<Result<Vec<_>>>()?;
        Atom::new(predicate, args, self.neg)
    }
}

/// One line of KG JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgJson {
    pub video_id: String,
    #[serde(default)]
    pub individuals: Vec<String>,
    #[serde(default)]
    pub facts: Vec<FactJson>,
    /// Source caption, carried by per-caption parser output for linking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

impl KgJson {
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        KgJson {
            video_id: kg.video_id.clone(),
            individuals: kg.individuals.iter().map(Term::key).collect(),
            facts: kg.atoms().map(FactJson::from_atom).collect(),
            caption: None,
        }
    }

    pub fn to_kg(&self) -> Result<KnowledgeGraph> {
        let mut kg = KnowledgeGraph::new(self.video_id.clone());
        for ind in &self.individuals {
            kg.individuals.insert(ind.parse()?);
        }
        for fact in &self.facts {
            kg.insert(fact.to_atom()?)?;
        }
        Ok(kg)
    }
}

/// One line of dataset JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    pub video_id: String,
    #[serde(default)]
    pub individuals: Vec<String>,
    #[serde(default)]
    pub facts: Vec<FactJson>,
    #[serde(default)]
    pub negated_facts: Vec<FactJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl RecordJson {
    pub fn from_record(r: &DatasetRecord) -> Self {
        RecordJson {
            video_id: r.video_id.clone(),
            individuals: r.individuals.iter().map(Term::key).collect(),
            facts: r.facts.iter().map(FactJson::from_atom).collect(),
            negated_facts: r.negated_facts.iter().map(FactJson::from_atom).collect(),
            features: r.feature.clone(),
        }
    }

    pub fn to_record(&self) -> Result<DatasetRecord> {
        let mut kg = KnowledgeGraph::new(self.video_id.clone());
        for ind in &self.individuals {
            kg.individuals.insert(ind.parse()?);
        }
        for fact in &self.facts {
            kg.insert(fact.to_atom()?.with_polarity(false))?;
        }
        for fact in &self.negated_facts {
            kg.insert(fact.to_atom()?.with_polarity(true))?;
        }
        let mut record = DatasetRecord::from(kg);
        record.feature = self.features.clone();
        Ok(record)
    }
}

/// Reads JSON-lines, skipping blank lines; errors carry 1-based line numbers.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(&line).map_err(|source| Error::Json { line: i + 1, source })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| Error::Stream(e.into()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_kgs<R: BufRead>(reader: R) -> Result<Vec<KnowledgeGraph>> {
    read_jsonl::<KgJson, _>(reader)?
        .iter()
        .map(KgJson::to_kg)
        .collect()
}

pub fn write_kgs<W: Write>(writer: W, kgs: &[KnowledgeGraph]) -> Result<()> {
    let lines: Vec<KgJson> = kgs.iter().map(KgJson::from_kg).collect();
    write_jsonl(writer, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Term {
        Term::new(s).unwrap()
    }

    #[test]
    fn canonical_strings() {
        let fold = Atom::binary(t("fold"), t("person"), t("piece"));
        assert_eq!(canonical_atom_string(&fold), "fold(person,piece)");
        assert_eq!(Atom::unary(t("stand"), t("man")).to_string(), "stand(man)");
        let neg = Atom::binary(t("throw"), t("person"), t("piece")).negated();
        assert_eq!(neg.to_string(), "!throw(person,piece)");
    }

    #[test]
    fn parse_tolerates_spaces_and_synsets() {
        let a: Atom = "fold(person, piece)".parse().unwrap();
        assert_eq!(a, Atom::binary(t("fold"), t("person"), t("piece")));
        let b: Atom = "!stand#stand.v.01(man#man.n.01)".parse().unwrap();
        assert!(b.is_negated());
        assert_eq!(b.predicate().synset(), Some("stand.v.01"));
        assert_eq!(b.args()[0].synset(), Some("man.n.01"));
    }

    #[test]
    fn rejects_bad_arity_and_terms() {
        assert!("p()".parse::<Atom>().is_err());
        assert!("p(a,b,c)".parse::<Atom>().is_err());
        assert!(Atom::new(t("p"), vec![], false).is_err());
        assert!(Term::new("Man").is_err());
        assert!(Term::new("ice cream").is_err());
        assert!(Term::new("").is_err());
    }

    #[test]
    fn duplicate_insert_is_noop() {
        let mut kg = KnowledgeGraph::new("v1");
        let a = Atom::unary(t("stand"), t("man"));
        assert!(kg.insert(a.clone()).unwrap());
        let before = kg.clone();
        assert!(!kg.insert(a).unwrap());
        assert_eq!(kg, before);
    }

    #[test]
    fn contradiction_is_rejected() {
        let mut kg = KnowledgeGraph::new("v1");
        let a = Atom::binary(t("fold"), t("person"), t("paper"));
        kg.insert(a.clone()).unwrap();
        assert!(kg.insert(a.negated()).is_err());
    }

    #[test]
    fn kg_json_round_trip_keeps_synsets() {
        let mut kg = KnowledgeGraph::new("vid7");
        kg.insert(Atom::binary(
            Term::linked("fold", "fold.v.01").unwrap(),
            Term::linked("person", "person.n.01").unwrap(),
            t("paper"),
        ))
        .unwrap();
        kg.insert(Atom::unary(t("white"), t("paper")).negated()).unwrap();
        let mut buf = Vec::new();
        write_kgs(&mut buf, std::slice::from_ref(&kg)).unwrap();
        let back = read_kgs(&buf[..]).unwrap();
        assert_eq!(back, vec![kg]);
    }

    #[test]
    fn jsonl_errors_name_line() {
        let input = "{\"video_id\":\"a\"}\n\n{\"individuals\":[]}\n";
        match read_kgs(input.as_bytes()) {
            Err(Error::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_surface() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_'-]{0,8}"
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        (arb_surface(), proptest::option::of("[a-z]{1,6}\\.[nva]\\.0[1-9]")).prop_map(
            |(s, syn)| match syn {
                Some(syn) => Term::linked(s, syn).unwrap(),
                None => Term::new(s).unwrap(),
            },
        )
    }

    proptest! {
        #[test]
        fn canonical_string_round_trips(
            pred in arb_term(),
            args in proptest::collection::vec(arb_term(), 1..=2),
            neg in any::<bool>(),
        ) {
            let atom = Atom::new(pred, args, neg).unwrap();
            let parsed: Atom = canonical_atom_string(&atom).parse().unwrap();
            prop_assert_eq!(parsed, atom);
        }
    }
}
