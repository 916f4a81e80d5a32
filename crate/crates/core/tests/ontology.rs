use std::collections::BTreeSet;

use proptest::prelude::*;
use vid2kg_core::ontology::{closure, link_atoms, EmbeddingTable, Ontology, Synset};
use vid2kg_core::semparse::{CaptionEntry, ExtractedAtom};
use vid2kg_core::{Atom, Pos, Term};

fn syn(id: &str, lemmas: &[&str], pos: Pos, gloss: &str, hyper: &[&str]) -> Synset {
    Synset {
        id: id.into(),
        lemmas: lemmas.iter().map(|s| s.to_string()).collect(),
        pos,
        gloss: gloss.into(),
        hypernyms: hyper.iter().map(|s| s.to_string()).collect(),
    }
}

fn linked(surface: &str, id: &str) -> Term {
    Term::linked(surface, id).unwrap()
}

/// Applies one generalization step at a time until nothing new appears.
fn fixpoint_oracle(facts: &BTreeSet<Atom>, ont: &Ontology) -> BTreeSet<Atom> {
    let lift = |t: &Term| -> Vec<Term> {
        let Some(id) = t.synset() else { return Vec::new() };
        ont.get(id)
            .unwrap()
            .hypernyms
            .iter()
            .map(|h| linked(&ont.get(h).unwrap().lemmas[0], h))
            .collect()
    };
    let mut known: BTreeSet<Atom> = facts.iter().filter(|f| !f.is_negated()).cloned().collect();
    loop {
        let mut fresh = Vec::new();
        for f in &known {
            for p in lift(f.predicate()) {
                fresh.push(f.with_predicate(p));
            }
            for (i, a) in f.args().iter().enumerate() {
                for h in lift(a) {
                    let mut args = f.args().to_vec();
                    args[i] = h;
                    fresh.push(f.with_args(args));
                }
            }
        }
        let before = known.len();
        known.extend(fresh);
        if known.len() == before {
            break;
        }
    }
    known.difference(facts).cloned().collect()
}

/// Random ontology as a hypernym DAG (edges only point to earlier synsets of
/// the same part of speech) plus facts over its terms.
fn scenario() -> impl Strategy<Value = (Ontology, BTreeSet<Atom>)> {
    let synsets = prop::collection::vec((0usize..3, prop::collection::vec(any::<prop::sample::Index>(), 0..3)), 1..=20);
    (synsets, prop::collection::vec((any::<prop::sample::Index>(), 1usize..=2, any::<[prop::sample::Index; 2]>(), any::<[bool; 3]>()), 0..=10))
        .prop_map(|(specs, fact_specs)| {
            let pos_of = |k: usize| [Pos::Noun, Pos::Verb, Pos::Adj][k];
            let mut list: Vec<Synset> = Vec::new();
            for (i, (k, parents)) in specs.iter().enumerate() {
                let pos = pos_of(*k);
                let same: Vec<&Synset> = list.iter().filter(|s| s.pos == pos).collect();
                let hyper: BTreeSet<String> = if same.is_empty() {
                    BTreeSet::new()
                } else {
                    parents.iter().map(|ix| ix.get(&same).id.clone()).collect()
                };
                list.push(Synset {
                    id: format!("w{i}.{}.01", &pos.to_string()[..1]),
                    lemmas: vec![format!("w{i}"), format!("alt{i}")],
                    pos,
                    gloss: String::new(),
                    hypernyms: hyper,
                });
            }
            let nouns: Vec<&Synset> = list.iter().filter(|s| s.pos == Pos::Noun).collect();
            let preds: Vec<&Synset> = list.iter().filter(|s| s.pos != Pos::Noun).collect();
            let pick = |pool: &[&Synset], ix: &prop::sample::Index, alt: bool, fallback: &str| -> Term {
                if pool.is_empty() || alt && ix.index(4) == 0 {
                    return Term::new(fallback).unwrap();
                }
                let s = ix.get(pool);
                // Some terms use a non-primary lemma as their surface.
                let surface = if alt { &s.lemmas[1] } else { &s.lemmas[0] };
                linked(surface, &s.id)
            };
            let facts = fact_specs
                .iter()
                .map(|(p, arity, args, alt)| {
                    let pred = pick(&preds, p, alt[0], "plain");
                    let args = (0..*arity).map(|j| pick(&nouns, &args[j], alt[1 + j], "thing")).collect();
                    Atom::new(pred, args, false).unwrap()
                })
                .collect();
            (Ontology::new(list).unwrap(), facts)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closure_matches_single_step_fixpoint((ont, facts) in scenario()) {
        let got = closure(&facts, &ont, None);
        prop_assert_eq!(&got, &fixpoint_oracle(&facts, &ont));
        prop_assert!(got.is_disjoint(&facts));

        let union: BTreeSet<Atom> = facts.union(&got).cloned().collect();
        prop_assert!(closure(&union, &ont, None).is_subset(&union), "closure is idempotent");
    }

    #[test]
    fn closure_is_monotone((ont, facts) in scenario(), keep in any::<u16>()) {
        let subset: BTreeSet<Atom> = facts
            .iter()
            .enumerate()
            .filter(|(i, _)| keep >> (i % 16) & 1 == 1)
            .map(|(_, f)| f.clone())
            .collect();
        let small = closure(&subset, &ont, None);
        let large = closure(&facts, &ont, None);
        let reach: BTreeSet<Atom> = large.union(&facts).cloned().collect();
        prop_assert!(small.is_subset(&reach));
    }

    #[test]
    fn restriction_only_filters((ont, facts) in scenario()) {
        let all = closure(&facts, &ont, None);
        let allowed: BTreeSet<Term> = facts.iter().flat_map(|f| f.args().iter().cloned()).collect();
        let restricted = closure(&facts, &ont, Some(&allowed));
        let expected: BTreeSet<Atom> = all
            .into_iter()
            .filter(|a| a.args().iter().all(|t| allowed.contains(t)))
            .collect();
        prop_assert_eq!(restricted, expected);
    }
}

fn figure_ontology() -> Ontology {
    Ontology::new(vec![
        syn("man.n.01", &["man"], Pos::Noun, "an adult person who is male", &["person.n.01", "male.n.02"]),
        syn("person.n.01", &["person"], Pos::Noun, "a human being", &[]),
        syn("male.n.02", &["male"], Pos::Noun, "a person who is male", &[]),
        syn("car.n.01", &["car", "auto"], Pos::Noun, "a motor vehicle with four wheels", &["vehicle.n.01"]),
        syn("vehicle.n.01", &["vehicle"], Pos::Noun, "a conveyance that transports people", &[]),
        syn("paper.n.01", &["paper"], Pos::Noun, "a material made of cellulose pulp", &[]),
        syn("fold.v.01", &["fold"], Pos::Verb, "bend so that one part covers the other", &["change.v.01"]),
        syn("change.v.01", &["change"], Pos::Verb, "undergo a change", &[]),
        syn("stand.v.01", &["stand"], Pos::Verb, "be upright on the feet", &[]),
        syn("drive.v.01", &["drive"], Pos::Verb, "operate a vehicle", &[]),
        syn("white.a.01", &["white"], Pos::Adj, "of the color of snow", &[]),
    ])
    .unwrap()
}

#[test]
fn worked_closure_examples() {
    let ont = figure_ontology();
    let stand = closure(
        &[Atom::unary(linked("stand", "stand.v.01"), linked("man", "man.n.01"))].into(),
        &ont,
        None,
    );
    let shown: BTreeSet<String> = stand.iter().map(|a| a.to_string()).collect();
    assert_eq!(
        shown,
        ["stand#stand.v.01(male#male.n.02)", "stand#stand.v.01(person#person.n.01)"]
            .map(String::from)
            .into()
    );

    let fold = Atom::binary(linked("fold", "fold.v.01"), linked("person", "person.n.01"), linked("paper", "paper.n.01"));
    let inferred = closure(&[fold].into(), &ont, None);
    let change = Atom::binary(linked("change", "change.v.01"), linked("person", "person.n.01"), linked("paper", "paper.n.01"));
    assert_eq!(inferred, [change].into());

    let drive = Atom::binary(linked("drive", "drive.v.01"), linked("man", "man.n.01"), linked("car", "car.n.01"));
    let inferred = closure(&[drive].into(), &ont, None);
    assert!(inferred.contains(&Atom::binary(
        linked("drive", "drive.v.01"),
        linked("man", "man.n.01"),
        linked("vehicle", "vehicle.n.01")
    )));
    // 3 choices for the subject times 2 for the object, minus the input.
    assert_eq!(inferred.len(), 5);

    assert!(closure(&BTreeSet::new(), &ont, None).is_empty());
}

#[test]
fn linking_a_caption() {
    let ont = figure_ontology();
    let mut emb = EmbeddingTable::new(2);
    for (w, v) in [("man", [1.0, 0.0]), ("car", [0.0, 1.0]), ("vehicle", [0.1, 0.9])] {
        emb.insert(w, v.to_vec()).unwrap();
    }
    let entry = CaptionEntry {
        sentence_index: 0,
        video_id: "vid1".into(),
        caption: "a man is driving a car on the road".into(),
        atoms: vec![
            ExtractedAtom {
                atom: Atom::binary(Term::new("drive").unwrap(), Term::new("man").unwrap(), Term::new("car").unwrap()),
                predicate_pos: Some(Pos::Verb),
            },
            ExtractedAtom {
                atom: Atom::binary(Term::new("on").unwrap(), Term::new("car").unwrap(), Term::new("road").unwrap()),
                predicate_pos: None,
            },
        ],
    };
    let linked_entries = link_atoms(std::slice::from_ref(&entry), &ont, &emb);
    assert_eq!(linked_entries.len(), 1);
    let out = &linked_entries[0];
    assert_eq!(out.video_id, entry.video_id);
    assert_eq!(out.atoms[0].atom.to_string(), "drive#drive.v.01(man#man.n.01,car#car.n.01)");
    // Prepositions stay unlinked, as do words missing from the ontology.
    assert_eq!(out.atoms[1].atom.to_string(), "on(car#car.n.01,road)");
    assert_eq!(out.atoms[1].predicate_pos, None);
}
