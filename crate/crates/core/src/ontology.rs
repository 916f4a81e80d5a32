//! Ontology and embedding loading, context-sensitive synset linking, and
//! hypernym-based inference closure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Atom, Pos, Term};
use crate::semparse::CaptionEntry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    /// Lowercase lemmas; the first is used as the surface of inferred terms.
    pub lemmas: Vec<String>,
    pub pos: Pos,
    #[serde(default)]
    pub gloss: String,
    #[serde(default)]
    pub hypernyms: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OntologyJson {
    synsets: Vec<Synset>,
}

#[derive(Debug, Clone, Default)]
pub struct Ontology {
    synsets: BTreeMap<String, Synset>,
    lemma_index: BTreeMap<(String, Pos), BTreeSet<String>>,
}

impl Ontology {
    /// Validates ids, lemmas, hypernym references and acyclicity.
    pub fn new(synsets: Vec<Synset>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for mut syn in synsets {
            if syn.lemmas.is_empty() {
                return Err(Error::Ontology(format!("synset {} has no lemmas", syn.id)));
            }
            let mut lemmas: Vec<String> = Vec::with_capacity(syn.lemmas.len());
            for lemma in &syn.lemmas {
                let lemma = lemma.trim().to_lowercase().replace(char::is_whitespace, "_");
                Term::new(lemma.clone()).map_err(|_| {
                    Error::Ontology(format!("synset {} has invalid lemma {lemma:?}", syn.id))
                })?;
                if !lemmas.contains(&lemma) {
                    lemmas.push(lemma);
                }
            }
            syn.lemmas = lemmas;
            Term::linked("x", syn.id.clone())
                .map_err(|_| Error::Ontology(format!("invalid synset id {:?}", syn.id)))?;
            if let Some(dup) = by_id.insert(syn.id.clone(), syn) {
                return Err(Error::Ontology(format!("duplicate synset id {}", dup.id)));
            }
        }
        for syn in by_id.values() {
            for h in &syn.hypernyms {
                let target = by_id.get(h).ok_or_else(|| {
                    Error::Ontology(format!("synset {} cites unknown hypernym {h}", syn.id))
                })?;
                if target.pos != syn.pos {
                    return Err(Error::Ontology(format!(
                        "hypernym {h} of {} has part of speech {} (expected {})",
                        syn.id, target.pos, syn.pos
                    )));
                }
            }
        }
        check_acyclic(&by_id)?;

        let mut lemma_index: BTreeMap<(String, Pos), BTreeSet<String>> = BTreeMap::new();
        for syn in by_id.values() {
            for lemma in &syn.lemmas {
                lemma_index
                    .entry((lemma.clone(), syn.pos))
                    .or_default()
                    .insert(syn.id.clone());
            }
        }
        Ok(Ontology {
            synsets: by_id,
            lemma_index,
        })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let doc: OntologyJson = serde_json::from_reader(reader)
            .map_err(|e| Error::Ontology(format!("invalid ontology JSON: {e}")))?;
        Ontology::new(doc.synsets)
    }

    pub fn get(&self, id: &str) -> Option<&Synset> {
        self.synsets.get(id)
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    /// Synset ids containing `lemma` with part of speech `pos`.
    pub fn candidates(&self, lemma: &str, pos: Pos) -> Option<&BTreeSet<String>> {
        self.lemma_index.get(&(lemma.to_owned(), pos))
    }

    /// Term naming a synset: its first lemma, linked to the synset.
    pub fn term_for(&self, id: &str) -> Option<Term> {
        let syn = self.synsets.get(id)?;
        Term::linked(syn.lemmas[0].clone(), id).ok()
    }

    /// Strict transitive hypernyms of `id`.
    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = vec![id];
        while let Some(cur) = stack.pop() {
            if let Some(syn) = self.synsets.get(cur) {
                for h in &syn.hypernyms {
                    if seen.insert(h.clone()) {
                        stack.push(h);
                    }
                }
            }
        }
        seen
    }
}

fn check_acyclic(synsets: &BTreeMap<String, Synset>) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    for start in synsets.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // Iterative DFS; each frame holds a node and its remaining hypernyms.
        let mut stack: Vec<(&str, Vec<&str>)> = Vec::new();
        marks.insert(start, Mark::Open);
        stack.push((start, synsets[start].hypernyms.iter().map(String::as_str).collect()));
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match marks.get(next) {
                    Some(Mark::Open) => {
                        return Err(Error::Ontology(format!(
                            "cyclic hypernymy through {next} (reached from {node})"
                        )))
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        let hs = synsets[next].hypernyms.iter().map(String::as_str).collect();
                        stack.push((next, hs));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

pub fn load_ontology(path: &Path) -> Result<Ontology> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ontology::from_reader(BufReader::new(file))
}

/// Word vectors in word2vec text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::Embedding(format!(
                "vector for {token:?} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.vectors.contains_key(&token) {
            return Err(Error::Embedding(format!("duplicate token {token:?}")));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        EmbeddingTable {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(Error::Embedding("missing `count dim` header".into())),
            }
        };
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Embedding(format!("invalid header {header:?}")))?;
        let [count, dim] = nums[..] else {
            return Err(Error::Embedding(format!("invalid header {header:?}")));
        };
        if dim == 0 {
            return Err(Error::Embedding("dimension must be positive".into()));
        }
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let line = line?;
            let mut fields = line.split(' ').filter(|s| !s.is_empty());
            let Some(token) = fields.next() else { continue };
            let vector = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("non-numeric value in vector for {token:?}"),
                })?;
            table.insert(token, vector)?;
        }
        if table.len() != count {
            return Err(Error::Embedding(format!(
                "header declares {count} vectors, file has {}",
                table.len()
            )));
        }
        Ok(table)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::from_reader(BufReader::new(file))
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Mean of the in-vocabulary word vectors; zero vector when none are known.
pub fn sentence_vector<S: AsRef<str>>(words: &[S], emb: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; emb.dim()];
    let mut n = 0usize;
    for w in words {
        if let Some(v) = emb.get(w.as_ref()) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Picks the synset of `word` whose gloss vector is most cosine-similar to
/// the context vector. Ties go to the smallest synset id.
pub fn link_word(
    word: &str,
    pos: Pos,
    context: &str,
    ont: &Ontology,
    emb: &EmbeddingTable,
) -> Option<String> {
    let candidates = ont.candidates(word, pos)?;
    if candidates.len() == 1 {
        return candidates.first().cloned();
    }
    let ctx = sentence_vector(&tokenize(context), emb);
    let mut best: Option<(&String, f64)> = None;
    for id in candidates {
        let gloss = &ont.get(id)?.gloss;
        let sim = cosine(&sentence_vector(&tokenize(gloss), emb), &ctx);
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((id, sim));
        }
    }
    best.map(|(id, _)| id.clone())
}

fn link_term(term: &Term, pos: Option<Pos>, context: &str, ont: &Ontology, emb: &EmbeddingTable) -> Term {
    let plain = term.unlinked();
    pos.and_then(|pos| link_word(term.surface(), pos, context, ont, emb))
        .and_then(|id| plain.clone().with_synset(id).ok())
        .unwrap_or(plain)
}

/// Links predicates (by their extracted part of speech) and arguments (as
/// nouns) using each caption as context. Unlinkable terms stay surface-only.
pub fn link_atoms(entries: &[CaptionEntry], ont: &Ontology, emb: &EmbeddingTable) -> Vec<CaptionEntry> {
    entries
        .par_iter()
        .map(|entry| {
            let atoms = entry
                .atoms
                .iter()
                .map(|e| {
                    let a = &e.atom;
                    let predicate = link_term(a.predicate(), e.predicate_pos, &entry.caption, ont, emb);
                    let args = a
                        .args()
                        .iter()
                        .map(|t| link_term(t, Some(Pos::Noun), &entry.caption, ont, emb))
                        .collect();
                    crate::semparse::ExtractedAtom {
                        atom: a.with_predicate(predicate).with_args(args),
                        predicate_pos: e.predicate_pos,
                    }
                })
                .collect();
            CaptionEntry {
                atoms,
                ..entry.clone()
            }
        })
        .collect()
}

/// Inferred facts `T'`: every generalization of the input facts obtained by
/// replacing the predicate and/or any argument with one of its (transitive)
/// hypernyms, excluding the input facts themselves. Negated inputs are
/// ignored. With `restrict_to`, only facts whose arguments all lie in the
/// given set are returned.
pub fn closure(facts: &BTreeSet<Atom>, ont: &Ontology, restrict_to: Option<&BTreeSet<Term>>) -> BTreeSet<Atom> {
    let mut lifted: HashMap<Term, Vec<Term>> = HashMap::new();
    let mut generalize = |t: &Term| -> Vec<Term> {
        lifted
            .entry(t.clone())
            .or_insert_with(|| {
                let mut out = vec![t.clone()];
                if let Some(syn) = t.synset() {
                    out.extend(ont.ancestors(syn).iter().filter_map(|h| ont.term_for(h)));
                }
                out
            })
            .clone()
    };

    let mut inferred = BTreeSet::new();
    for fact in facts.iter().filter(|f| !f.is_negated()) {
        let preds = generalize(fact.predicate());
        let arg_choices: Vec<Vec<Term>> = fact.args().iter().map(&mut generalize).collect();
        for p in &preds {
            for args in cartesian(&arg_choices) {
                let atom = fact.with_predicate(p.clone()).with_args(args);
                if !facts.contains(&atom) {
                    inferred.insert(atom);
                }
            }
        }
    }
    if let Some(allowed) = restrict_to {
        inferred.retain(|a| a.args().iter().all(|t| allowed.contains(t)));
    }
    inferred
}

fn cartesian(choices: &[Vec<Term>]) -> Vec<Vec<Term>> {
    choices.iter().fold(vec![Vec::new()], |acc, options| {
        acc.iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o.clone());
                    next
                })
            })
            .collect()
    })
}
