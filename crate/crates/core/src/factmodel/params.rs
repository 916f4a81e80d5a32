use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::kg::{Term, Vocabulary};
use crate::ontology::EmbeddingTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    #[default]
    Adam,
    Sgd,
}

fn d_encoding() -> usize {
    64
}
fn d_individual() -> usize {
    300
}
fn d_hidden() -> usize {
    64
}
fn d_threshold() -> f64 {
    0.5
}
fn d_lr() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    100
}
fn d_batch() -> usize {
    1
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "d_encoding")]
    pub encoding_dim: usize,
    #[serde(default = "d_individual")]
    pub individual_dim: usize,
    #[serde(default = "d_hidden")]
    pub classifier_hidden: usize,
    #[serde(default = "d_hidden")]
    pub predicate_hidden: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Videos per optimizer step; gradients are summed over the batch.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Score binary predicates on `(a, a)` pairs at prediction time.
    #[serde(default = "d_true")]
    pub reflexive_pairs: bool,
    pub rng_seed: u64,
}

impl ModelConfig {
    pub fn new(rng_seed: u64) -> Self {
        ModelConfig {
            encoding_dim: d_encoding(),
            individual_dim: d_individual(),
            classifier_hidden: d_hidden(),
            predicate_hidden: d_hidden(),
            threshold: d_threshold(),
            learning_rate: d_lr(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            optimizer: OptimizerKind::Adam,
            reflexive_pairs: true,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("encoding_dim", self.encoding_dim),
            ("individual_dim", self.individual_dim),
            ("classifier_hidden", self.classifier_hidden),
            ("predicate_hidden", self.predicate_hidden),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Invalid(format!("{name} must be positive")));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Invalid(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// How the video encoding is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EncoderMode {
    /// Look up the feature store.
    #[default]
    Features,
    /// Replace every lookup with a fresh seeded random vector.
    Random { seed: u64 },
}

/// Architecture variants for ablation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    SingleMlp,
    SingleIndividualVector,
    RandomEncoder,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single_mlp" => Ok(Ablation::SingleMlp),
            "single_individual_vector" => Ok(Ablation::SingleIndividualVector),
            "random_encoder" => Ok(Ablation::RandomEncoder),
            other => Err(format!("unknown ablation {other:?}")),
        }
    }
}

/// Trainable tensors, in the fixed order used by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensors {
    pub classifier: Mlp,
    pub unary_mlps: Vec<Mlp>,
    pub binary_mlps: Vec<Mlp>,
    pub individual_vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_pool_weights: Option<Vec<f64>>,
}

impl Tensors {
    pub fn zeros_like(&self) -> Self {
        Tensors {
            classifier: self.classifier.zeros_like(),
            unary_mlps: self.unary_mlps.iter().map(Mlp::zeros_like).collect(),
            binary_mlps: self.binary_mlps.iter().map(Mlp::zeros_like).collect(),
            individual_vectors: self
                .individual_vectors
                .iter()
                .map(|v| vec![0.0; v.len()])
                .collect(),
            frame_pool_weights: self.frame_pool_weights.as_ref().map(|w| vec![0.0; w.len()]),
        }
    }

    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = self.classifier.buffers().into();
        for m in self.unary_mlps.iter().chain(&self.binary_mlps) {
            out.extend(m.buffers());
        }
        out.extend(self.individual_vectors.iter());
        out.extend(self.frame_pool_weights.iter());
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = self.classifier.buffers_mut().into();
        for m in self.unary_mlps.iter_mut().chain(self.binary_mlps.iter_mut()) {
            out.extend(m.buffers_mut());
        }
        out.extend(self.individual_vectors.iter_mut());
        out.extend(self.frame_pool_weights.iter_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }
}

/// Model parameters plus the vocabulary-to-tensor maps. Predicates and
/// individuals index into their tensors through slot tables, so ablations
/// can share one MLP or one vector across many names.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoder: EncoderMode,
    /// Individuals `A`, in classifier output order.
    pub individuals: Vec<Term>,
    pub individual_index: BTreeMap<Term, usize>,
    /// Per individual (classifier order), its slot in `individual_vectors`.
    pub individual_slots: Vec<usize>,
    pub unary_slots: BTreeMap<Term, usize>,
    pub binary_slots: BTreeMap<Term, usize>,
    pub tensors: Tensors,
}

impl ModelParams {
    pub fn individual_vector(&self, term: &Term) -> Option<&[f64]> {
        let i = *self.individual_index.get(term)?;
        Some(&self.tensors.individual_vectors[self.individual_slots[i]])
    }

    pub(crate) fn predicate_mlp(&self, predicate: &Term, arity: usize) -> Option<(usize, &Mlp)> {
        let (slots, mlps) = match arity {
            1 => (&self.unary_slots, &self.tensors.unary_mlps),
            2 => (&self.binary_slots, &self.tensors.binary_mlps),
            _ => return None,
        };
        slots.get(predicate).map(|&s| (s, &mlps[s]))
    }

    pub fn unary_predicates(&self) -> impl Iterator<Item = &Term> {
        self.unary_slots.keys()
    }

    pub fn binary_predicates(&self) -> impl Iterator<Item = &Term> {
        self.binary_slots.keys()
    }
}

/// Fresh parameters for `vocab`. Individual vectors start from the word
/// vector of their surface lemma when available, otherwise uniform in
/// `[-0.05, 0.05]`.
pub fn init_params(cfg: &ModelConfig, vocab: &Vocabulary, emb: Option<&EmbeddingTable>) -> Result<ModelParams> {
    cfg.validate()?;
    if let Some(emb) = emb {
        if emb.dim() != cfg.individual_dim {
            return Err(Error::Dimension {
                what: "word embeddings vs individual_dim".into(),
                expected: cfg.individual_dim,
                actual: emb.dim(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (e, d) = (cfg.encoding_dim, cfg.individual_dim);
    let individuals: Vec<Term> = vocab.individuals.iter().cloned().collect();
    let classifier = Mlp::init(e, cfg.classifier_hidden, individuals.len(), &mut rng);
    let unary_mlps: Vec<Mlp> = vocab
        .unary_predicates
        .iter()
        .map(|_| Mlp::init(e + d, cfg.predicate_hidden, 1, &mut rng))
        .collect();
    let binary_mlps: Vec<Mlp> = vocab
        .binary_predicates
        .iter()
        .map(|_| Mlp::init(e + 2 * d, cfg.predicate_hidden, 1, &mut rng))
        .collect();
    let individual_vectors = individuals
        .iter()
        .map(|t| match emb.and_then(|emb| emb.get(t.surface())) {
            Some(v) => v.to_vec(),
            None => (0..d).map(|_| rng.gen_range(-0.05..=0.05)).collect(),
        })
        .collect();

    Ok(ModelParams {
        config: cfg.clone(),
        encoder: EncoderMode::Features,
        individual_index: individuals.iter().cloned().zip(0..).collect(),
        individual_slots: (0..individuals.len()).collect(),
        individuals,
        unary_slots: vocab.unary_predicates.iter().cloned().zip(0..).collect(),
        binary_slots: vocab.binary_predicates.iter().cloned().zip(0..).collect(),
        tensors: Tensors {
            classifier,
            unary_mlps,
            binary_mlps,
            individual_vectors,
            frame_pool_weights: None,
        },
    })
}

/// Rewires `params` into an ablated architecture: one MLP per arity shared
/// by every predicate, one vector shared by every individual, or a random
/// encoder in place of the video features.
pub fn ablate(mut params: ModelParams, mode: Ablation) -> ModelParams {
    match mode {
        Ablation::SingleMlp => {
            let t = &mut params.tensors;
            t.unary_mlps.truncate(1);
            t.binary_mlps.truncate(1);
            params.unary_slots.values_mut().for_each(|s| *s = 0);
            params.binary_slots.values_mut().for_each(|s| *s = 0);
        }
        Ablation::SingleIndividualVector => {
            params.tensors.individual_vectors.truncate(1);
            params.individual_slots.iter_mut().for_each(|s| *s = 0);
        }
        Ablation::RandomEncoder => {
            params.encoder = EncoderMode::Random {
                seed: params.config.rng_seed,
            };
        }
    }
    params
}

#[derive(Serialize, Deserialize)]
struct ParamsDocument {
    format_version: u32,
    config: ModelConfig,
    encoder: EncoderMode,
    individuals: Vec<String>,
    individual_slots: Vec<usize>,
    unary_predicates: BTreeMap<String, usize>,
    binary_predicates: BTreeMap<String, usize>,
    tensors: Tensors,
}

impl ModelParams {
    pub fn to_json(&self) -> String {
        let doc = ParamsDocument {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            encoder: self.encoder,
            individuals: self.individuals.iter().map(Term::key).collect(),
            individual_slots: self.individual_slots.clone(),
            unary_predicates: self.unary_slots.iter().map(|(t, &s)| (t.key(), s)).collect(),
            binary_predicates: self.binary_slots.iter().map(|(t, &s)| (t.key(), s)).collect(),
            tensors: self.tensors.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamsDocument =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("invalid parameter file: {e}")))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported parameter format version {}",
                doc.format_version
            )));
        }
        let parse_map = |m: BTreeMap<String, usize>, len: usize| -> Result<BTreeMap<Term, usize>> {
            m.into_iter()
                .map(|(k, s)| {
                    if s >= len {
                        return Err(Error::Model(format!("slot {s} of {k} out of range")));
                    }
                    Ok((k.parse()?, s))
                })
                .collect()
        };
        let individuals = doc
            .individuals
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Term>>>()?;
        let t = &doc.tensors;
        if doc.individual_slots.len() != individuals.len()
            || doc.individual_slots.iter().any(|&s| s >= t.individual_vectors.len())
        {
            return Err(Error::Model("individual slots inconsistent with vectors".into()));
        }
        Ok(ModelParams {
            unary_slots: parse_map(doc.unary_predicates, t.unary_mlps.len())?,
            binary_slots: parse_map(doc.binary_predicates, t.binary_mlps.len())?,
            individual_index: individuals.iter().cloned().zip(0..).collect(),
            individuals,
            individual_slots: doc.individual_slots,
            config: doc.config,
            encoder: doc.encoder,
            tensors: doc.tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_json().as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        std::io::Read::read_to_string(&mut BufReader::new(file), &mut text).map_err(|e| Error::io(path, e))?;
        ModelParams::from_json(&text)
    }
}
