//! Seeded synthetic datasets with known structure, for training checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::factmodel::{FeatureEntry, FeatureStore};
use crate::kg::{Atom, DatasetRecord, KnowledgeGraph, Term};

pub struct SyntheticData {
    pub records: Vec<DatasetRecord>,
    pub features: FeatureStore,
}

fn term(s: &str) -> Term {
    Term::new(s).expect("synthetic terms are valid")
}

pub const OVERFIT_INDIVIDUALS: [&str; 6] = ["ball", "car", "dog", "man", "paper", "woman"];
pub const OVERFIT_UNARY: [&str; 3] = ["red", "small", "white"];
pub const OVERFIT_BINARY: [&str; 2] = ["hold", "push"];

/// Encoding width of [`overfit_dataset`]: one slot per individual, per
/// possible unary fact and per possible binary fact.
pub const OVERFIT_ENCODING_DIM: usize = 6 + 3 * 6 + 2 * 36;

/// 20 videos over 6 individuals, 3 unary and 2 binary predicates. Each video
/// shows 2–4 individuals; every predicate/argument combination over them is
/// labelled true or false. The encoding holds an indicator per individual
/// and per possible fact plus ±0.05 noise, so every label is a linear
/// function of the encoding.
pub fn overfit_dataset(seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ind = OVERFIT_INDIVIDUALS.len();
    let mut records = Vec::new();
    let mut features = FeatureStore::new(OVERFIT_ENCODING_DIM);
    for v in 0..20 {
        let video_id = format!("synth{v:02}");
        let mut present: Vec<usize> = (0..n_ind).collect();
        rand::seq::SliceRandom::shuffle(&mut present[..], &mut rng);
        present.truncate(rng.gen_range(2..=4));
        present.sort_unstable();

        let mut kg = KnowledgeGraph::new(video_id.clone());
        let mut e: Vec<f64> = (0..OVERFIT_ENCODING_DIM).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        for &a in &present {
            e[a] += 1.0;
            kg.individuals.insert(term(OVERFIT_INDIVIDUALS[a]));
        }
        for (u, pred) in OVERFIT_UNARY.iter().enumerate() {
            for &a in &present {
                let holds = rng.gen_bool(0.4);
                if holds {
                    e[n_ind + u * n_ind + a] += 1.0;
                }
                let atom = Atom::unary(term(pred), term(OVERFIT_INDIVIDUALS[a]));
                kg.insert(atom.with_polarity(!holds)).expect("no contradictions");
            }
        }
        let base = n_ind + OVERFIT_UNARY.len() * n_ind;
        for (p, pred) in OVERFIT_BINARY.iter().enumerate() {
            for &a in &present {
                for &b in &present {
                    if a == b {
                        continue;
                    }
                    let holds = rng.gen_bool(0.3);
                    if holds {
                        e[base + p * n_ind * n_ind + a * n_ind + b] += 1.0;
                    }
                    let atom = Atom::binary(
                        term(pred),
                        term(OVERFIT_INDIVIDUALS[a]),
                        term(OVERFIT_INDIVIDUALS[b]),
                    );
                    kg.insert(atom.with_polarity(!holds)).expect("no contradictions");
                }
            }
        }
        features
            .insert(video_id, FeatureEntry::Vector(e))
            .expect("consistent dimension");
        records.push(DatasetRecord::from(kg));
    }
    SyntheticData { records, features }
}

pub const ABLATION_ENCODING_DIM: usize = 8;

/// 20 videos, each showing `man` and `woman`, with a hidden bit `r` (half
/// the videos each way) written into the first two encoding dimensions.
/// Labels: `happy(man) = r`, `happy(woman) = ¬r`, `sad(x) = ¬happy(x)`,
/// `push(man,woman) = r`, `push(woman,man) = ¬r`, `pull(x,y) = ¬push(x,y)`.
/// Telling the two predicates of each arity apart needs distinct MLPs,
/// telling the individuals apart needs distinct vectors, and every fact
/// depends on the video encoding.
pub fn ablation_dataset(seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (man, woman) = (term("man"), term("woman"));
    let mut records = Vec::new();
    let mut features = FeatureStore::new(ABLATION_ENCODING_DIM);
    for v in 0..20 {
        let r = v % 2 == 0;
        let video_id = format!("abl{v:02}");
        let sign = if r { 1.0 } else { -1.0 };
        let mut e: Vec<f64> = (0..ABLATION_ENCODING_DIM).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        e[0] += sign;
        e[1] += sign;

        let mut kg = KnowledgeGraph::new(video_id.clone());
        let facts = [
            (Atom::unary(term("happy"), man.clone()), r),
            (Atom::unary(term("happy"), woman.clone()), !r),
            (Atom::unary(term("sad"), man.clone()), !r),
            (Atom::unary(term("sad"), woman.clone()), r),
            (Atom::binary(term("push"), man.clone(), woman.clone()), r),
            (Atom::binary(term("push"), woman.clone(), man.clone()), !r),
            (Atom::binary(term("pull"), man.clone(), woman.clone()), !r),
            (Atom::binary(term("pull"), woman.clone(), man.clone()), r),
        ];
        for (atom, holds) in facts {
            kg.insert(atom.with_polarity(!holds)).expect("no contradictions");
        }
        features
            .insert(video_id, FeatureEntry::Vector(e))
            .expect("consistent dimension");
        records.push(DatasetRecord::from(kg));
    }
    SyntheticData { records, features }
}
