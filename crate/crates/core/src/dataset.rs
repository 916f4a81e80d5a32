//! Corpus assembly: merge per-caption atoms into per-video graphs, filter
//! the vocabulary by presence counts, sample closed-world negatives, and
//! read/write the dataset JSONL.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{read_jsonl, write_jsonl, Atom, DatasetRecord, KnowledgeGraph, RecordJson, Term, Vocabulary};

/// Resampling attempts per negative before the draw is skipped.
pub const MAX_NEGATIVE_RETRIES: usize = 32;

fn default_min_count() -> usize {
    50
}

fn default_excluded() -> BTreeSet<String> {
    ["take", "do", "be", "have"].into_iter().map(String::from).collect()
}

fn default_negatives() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_excluded")]
    pub excluded_verbs: BTreeSet<String>,
    #[serde(default = "default_negatives")]
    pub negatives_per_fact: usize,
    pub rng_seed: u64,
}

impl BuildConfig {
    pub fn new(rng_seed: u64) -> Self {
        BuildConfig {
            min_count: default_min_count(),
            excluded_verbs: default_excluded(),
            negatives_per_fact: default_negatives(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_count == 0 {
            return Err(Error::Invalid("min_count must be at least 1".into()));
        }
        if self.negatives_per_fact == 0 {
            return Err(Error::Invalid("negatives_per_fact must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_examples: usize,
    pub num_individuals: usize,
    pub num_attributes: usize,
    pub num_relations: usize,
    pub num_nonempty_examples: usize,
    /// `num_attributes + num_relations`.
    pub num_predicates: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Num Examples", self.num_examples),
            ("Num Non-empty Examples", self.num_nonempty_examples),
            ("Num Individuals", self.num_individuals),
            ("Num Attributes", self.num_attributes),
            ("Num Relations", self.num_relations),
            ("Num Predicates", self.num_predicates),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<24}{value:>8}")?;
        }
        Ok(())
    }
}

/// One graph per distinct video id (sorted), facts unioned across captions.
pub fn merge_annotations<I>(entries: I) -> Vec<KnowledgeGraph>
where
    I: IntoIterator<Item = (String, Vec<Atom>)>,
{
    let mut by_video: BTreeMap<String, KnowledgeGraph> = BTreeMap::new();
    for (video_id, atoms) in entries {
        let kg = by_video
            .entry(video_id.clone())
            .or_insert_with(|| KnowledgeGraph::new(video_id));
        for atom in atoms {
            kg.individuals.extend(atom.args().iter().cloned());
            if atom.is_negated() {
                kg.negated_facts.insert(atom);
            } else {
                kg.facts.insert(atom);
            }
        }
    }
    by_video.into_values().collect()
}

/// Counts in how many videos each individual and predicate occurs and keeps
/// those reaching `min_count`; excluded verbs never survive.
pub fn build_vocabulary(kgs: &[KnowledgeGraph], cfg: &BuildConfig) -> Vocabulary {
    let mut individual_counts: BTreeMap<Term, usize> = BTreeMap::new();
    let mut predicate_counts: BTreeMap<Term, usize> = BTreeMap::new();
    let mut arities: BTreeMap<Term, BTreeSet<usize>> = BTreeMap::new();
    for kg in kgs {
        let mut individuals = BTreeSet::new();
        let mut predicates = BTreeSet::new();
        for atom in &kg.facts {
            individuals.extend(atom.args());
            predicates.insert(atom.predicate());
            arities
                .entry(atom.predicate().clone())
                .or_default()
                .insert(atom.arity());
        }
        for t in individuals {
            *individual_counts.entry(t.clone()).or_default() += 1;
        }
        for p in predicates {
            *predicate_counts.entry(p.clone()).or_default() += 1;
        }
    }

    let mut vocab = Vocabulary::default();
    for (term, &n) in &individual_counts {
        if n >= cfg.min_count {
            vocab.individuals.insert(term.clone());
        }
    }
    for (term, &n) in &predicate_counts {
        if n < cfg.min_count || cfg.excluded_verbs.contains(term.surface()) {
            continue;
        }
        for &arity in &arities[term] {
            match arity {
                1 => vocab.unary_predicates.insert(term.clone()),
                _ => vocab.binary_predicates.insert(term.clone()),
            };
        }
    }
    vocab.individual_counts = individual_counts;
    vocab.predicate_counts = predicate_counts;
    vocab
}

/// Drops atoms mentioning out-of-vocabulary terms and out-of-vocabulary
/// individuals. Graphs left without facts are kept.
pub fn filter_kgs(kgs: &[KnowledgeGraph], vocab: &Vocabulary) -> Vec<KnowledgeGraph> {
    kgs.iter()
        .map(|kg| KnowledgeGraph {
            video_id: kg.video_id.clone(),
            individuals: kg
                .individuals
                .iter()
                .filter(|t| vocab.individuals.contains(t))
                .cloned()
                .collect(),
            facts: kg.facts.iter().filter(|a| vocab.admits(a)).cloned().collect(),
            negated_facts: kg
                .negated_facts
                .iter()
                .filter(|a| vocab.admits(a))
                .cloned()
                .collect(),
        })
        .collect()
}

fn video_seed(seed: u64, video_id: &str) -> u64 {
    // FNV-1a over the id, folded with the run seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in video_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Adds `negatives_per_fact` corruptions per fact by swapping in a different
/// predicate of the same arity. Corruptions equal to a true fact or to an
/// already drawn negative are resampled; after [`MAX_NEGATIVE_RETRIES`]
/// failed attempts the draw is skipped. Returns the graph and the number of
/// skipped draws.
pub fn generate_negatives(
    kg: &KnowledgeGraph,
    vocab: &Vocabulary,
    cfg: &BuildConfig,
) -> Result<(KnowledgeGraph, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(video_seed(cfg.rng_seed, &kg.video_id));
    let mut out = kg.clone();
    let mut skipped = 0;
    for fact in &kg.facts {
        let pool: Vec<&Term> = vocab.predicates_of_arity(fact.arity()).iter().collect();
        if pool.len() < 2 {
            return Err(Error::NoCorruption {
                arity: fact.arity(),
                available: pool.len(),
            });
        }
        for _ in 0..cfg.negatives_per_fact {
            let mut drawn = None;
            for _ in 0..MAX_NEGATIVE_RETRIES {
                let candidate = pool[rng.gen_range(0..pool.len())];
                if candidate == fact.predicate() {
                    continue;
                }
                let positive = fact.with_predicate(candidate.clone());
                let negative = positive.clone().negated();
                if kg.facts.contains(&positive) || out.negated_facts.contains(&negative) {
                    continue;
                }
                drawn = Some(negative);
                break;
            }
            match drawn {
                Some(neg) => {
                    out.negated_facts.insert(neg);
                }
                None => {
                    skipped += 1;
                    debug!("{}: no admissible corruption of {fact}", kg.video_id);
                }
            }
        }
    }
    Ok((out, skipped))
}

pub fn compute_stats(kgs: &[KnowledgeGraph]) -> CorpusStats {
    let mut individuals = BTreeSet::new();
    let mut unary = BTreeSet::new();
    let mut binary = BTreeSet::new();
    for kg in kgs {
        individuals.extend(kg.individuals.iter());
        for atom in kg.atoms() {
            individuals.extend(atom.args());
            match atom.arity() {
                1 => unary.insert(atom.predicate()),
                _ => binary.insert(atom.predicate()),
            };
        }
    }
    CorpusStats {
        num_examples: kgs.len(),
        num_individuals: individuals.len(),
        num_attributes: unary.len(),
        num_relations: binary.len(),
        num_nonempty_examples: kgs.iter().filter(|k| !k.is_empty()).count(),
        num_predicates: unary.len() + binary.len(),
    }
}

/// Output of [`build_dataset`].
#[derive(Debug, Clone)]
pub struct BuiltDataset {
    pub kgs: Vec<KnowledgeGraph>,
    pub vocabulary: Vocabulary,
    pub skipped_negatives: usize,
}

/// Merge, count, filter and corrupt in one pass. Output is sorted by video.
pub fn build_dataset<I>(entries: I, cfg: &BuildConfig) -> Result<BuiltDataset>
where
    I: IntoIterator<Item = (String, Vec<Atom>)>,
{
    cfg.validate()?;
    let merged = merge_annotations(entries);
    let vocabulary = build_vocabulary(&merged, cfg);
    let filtered = filter_kgs(&merged, &vocabulary);
    let sampled = filtered
        .par_iter()
        .map(|kg| generate_negatives(kg, &vocabulary, cfg))
        .collect::<Result<Vec<_>>>()?;
    let skipped_negatives = sampled.iter().map(|(_, s)| s).sum();
    Ok(BuiltDataset {
        kgs: sampled.into_iter().map(|(kg, _)| kg).collect(),
        vocabulary,
        skipped_negatives,
    })
}

pub fn write_records<W: Write>(writer: W, records: &[DatasetRecord]) -> Result<()> {
    let lines: Vec<RecordJson> = records.iter().map(RecordJson::from_record).collect();
    write_jsonl(writer, &lines)
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<DatasetRecord>> {
    read_jsonl::<RecordJson, _>(reader)?
        .iter()
        .map(RecordJson::to_record)
        .collect()
}

pub fn write_dataset(kgs: &[KnowledgeGraph], path: &Path) -> Result<()> {
    let records: Vec<DatasetRecord> = kgs.iter().cloned().map(DatasetRecord::from).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(BufWriter::new(file), &records)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Term {
        Term::new(s).unwrap()
    }

    fn a(s: &str) -> Atom {
        s.parse().unwrap()
    }

    fn cfg(min_count: usize) -> BuildConfig {
        BuildConfig {
            min_count,
            ..BuildConfig::new(11)
        }
    }

    #[test]
    fn merge_unions_captions() {
        let kgs = merge_annotations(vec![
            ("v1".to_string(), vec![a("eat(man,banana)")]),
            ("v1".to_string(), vec![a("stand(man)"), a("eat(man,banana)")]),
            ("v0".to_string(), vec![]),
        ]);
        assert_eq!(kgs.len(), 2);
        assert_eq!(kgs[0].video_id, "v0");
        assert!(kgs[0].is_empty());
        assert_eq!(kgs[1].facts.len(), 2);
        assert_eq!(kgs[1].individuals, BTreeSet::from([t("man"), t("banana")]));
    }

    fn corpus(n_man: usize, n_banana: usize) -> Vec<KnowledgeGraph> {
        let mut entries = Vec::new();
        for i in 0..n_man.max(n_banana) {
            let mut atoms = Vec::new();
            if i < n_man {
                atoms.push(a("stand(man)"));
                atoms.push(a("be(man)"));
            }
            if i < n_banana {
                atoms.push(a("eat(man,banana)"));
            }
            entries.push((format!("v{i:03}"), atoms));
        }
        merge_annotations(entries)
    }

    #[test]
    fn vocabulary_boundaries() {
        let kgs = corpus(5, 4);
        let vocab = build_vocabulary(&kgs, &cfg(5));
        assert!(vocab.individuals.contains(&t("man")));
        assert!(!vocab.individuals.contains(&t("banana"))); // 4 = min_count - 1
        assert!(vocab.unary_predicates.contains(&t("stand"))); // exactly min_count
        assert!(!vocab.unary_predicates.contains(&t("be"))); // excluded verb
        assert!(!vocab.binary_predicates.contains(&t("eat")));
        assert_eq!(vocab.predicate_counts[&t("be")], 5);
    }

    #[test]
    fn vocabulary_counts_presence_not_tokens() {
        let kgs = merge_annotations(vec![(
            "v1".to_string(),
            vec![a("stand(man)"), a("stand(woman)"), a("hold(man,cup)")],
        )]);
        let vocab = build_vocabulary(&kgs, &cfg(1));
        assert_eq!(vocab.predicate_counts[&t("stand")], 1);
        assert_eq!(vocab.individual_counts[&t("man")], 1);
    }

    #[test]
    fn filter_drops_oov_atoms() {
        let kgs = corpus(5, 4);
        let vocab = build_vocabulary(&kgs, &cfg(5));
        let filtered = filter_kgs(&kgs, &vocab);
        assert_eq!(filtered.len(), kgs.len());
        for kg in &filtered {
            assert!(!kg.facts.iter().any(|f| f.to_string() == "eat(man,banana)"));
            assert!(kg.facts.iter().all(|f| vocab.admits(f)));
            assert!(!kg.individuals.contains(&t("banana")));
        }
        // everything in-vocabulary survives unchanged
        let vocab_all = build_vocabulary(&kgs, &BuildConfig { excluded_verbs: BTreeSet::new(), ..cfg(1) });
        assert_eq!(filter_kgs(&kgs, &vocab_all), kgs);
    }

    fn three_predicate_vocab() -> Vocabulary {
        Vocabulary {
            individuals: BTreeSet::from([t("person"), t("paper")]),
            binary_predicates: BTreeSet::from([t("fold"), t("throw"), t("hold")]),
            ..Default::default()
        }
    }

    #[test]
    fn negatives_never_collide_with_facts() {
        let vocab = three_predicate_vocab();
        let mut kg = KnowledgeGraph::new("v1");
        kg.insert(a("fold(person,paper)")).unwrap();
        kg.insert(a("hold(person,paper)")).unwrap();
        // fold can only corrupt to throw (hold is a true fact), and so can
        // hold; the second draw must then be skipped as a duplicate.
        for seed in 0..200 {
            let c = BuildConfig { negatives_per_fact: 1, ..BuildConfig::new(seed) };
            let (out, skipped) = generate_negatives(&kg, &vocab, &c).unwrap();
            assert_eq!(out.negated_facts, BTreeSet::from([a("!throw(person,paper)")]));
            assert_eq!(skipped, 1);
        }
    }

    #[test]
    fn negatives_corrupt_predicate_only() {
        let vocab = three_predicate_vocab();
        let mut kg = KnowledgeGraph::new("v1");
        kg.insert(a("fold(person,paper)")).unwrap();
        let (out, skipped) = generate_negatives(&kg, &vocab, &BuildConfig::new(3)).unwrap();
        assert_eq!(skipped, 0);
        let neg = out.negated_facts.iter().next().unwrap();
        assert!(neg.is_negated());
        assert_ne!(neg.predicate(), &t("fold"));
        assert_eq!(neg.args(), &[t("person"), t("paper")]);

        let empty = KnowledgeGraph::new("v2");
        let (out, _) = generate_negatives(&empty, &vocab, &BuildConfig::new(3)).unwrap();
        assert!(out.negated_facts.is_empty());
    }

    #[test]
    fn too_few_predicates_is_error() {
        let vocab = Vocabulary {
            individuals: BTreeSet::from([t("man")]),
            unary_predicates: BTreeSet::from([t("stand")]),
            ..Default::default()
        };
        let mut kg = KnowledgeGraph::new("v1");
        kg.insert(a("stand(man)")).unwrap();
        assert!(matches!(
            generate_negatives(&kg, &vocab, &BuildConfig::new(1)),
            Err(Error::NoCorruption { arity: 1, available: 1 })
        ));
    }

    #[test]
    fn stats_counts() {
        let mut k1 = KnowledgeGraph::new("a");
        k1.insert(a("white(paper)")).unwrap();
        k1.insert(a("fold(person,paper)")).unwrap();
        let k2 = KnowledgeGraph::new("b");
        let s = compute_stats(&[k1, k2]);
        assert_eq!(s.num_examples, 2);
        assert_eq!(s.num_nonempty_examples, 1);
        assert_eq!(s.num_attributes, 1);
        assert_eq!(s.num_relations, 1);
        assert_eq!(s.num_predicates, 2);
        assert_eq!(s.num_individuals, 2);
        assert!(s.to_string().contains("Num Relations"));
    }

    #[test]
    fn dataset_round_trip_and_errors() {
        let mut k1 = KnowledgeGraph::new("a");
        k1.insert(a("fold(person,paper)")).unwrap();
        k1.insert(a("!throw(person,paper)")).unwrap();
        let mut k2 = KnowledgeGraph::new("b");
        k2.insert(Atom::unary(Term::linked("stand", "stand.v.01").unwrap(), t("man"))).unwrap();
        let k3 = KnowledgeGraph::new("c");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&[k1.clone(), k2.clone(), k3.clone()], &path).unwrap();
        let back = read_dataset(&path).unwrap();
        let expected: Vec<DatasetRecord> = [k1, k2, k3].into_iter().map(DatasetRecord::from).collect();
        assert_eq!(back, expected);

        let missing = "{\"individuals\": [], \"facts\": []}\n";
        assert!(matches!(read_records(missing.as_bytes()), Err(Error::Json { line: 1, .. })));
        assert!(read_records("".as_bytes()).unwrap().is_empty());
    }
}
