use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{ablate, init_params, Ablation, ModelConfig, ModelParams, OptimizerKind, Tensors};
use super::{encode, fact_input, loss_classifier, loss_facts, video_encoding, EncodingInput, FeatureStore, PROB_EPS};
use crate::error::{Error, Result};
use crate::kg::{Atom, DatasetRecord, Vocabulary};
use crate::ontology::EmbeddingTable;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Denominator floor of the relative error reported by [`gradient_check`].
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Parameters checked per tensor by [`gradient_check`].
const CHECKS_PER_BUFFER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// `L_c`
    pub classifier: f64,
    /// `L_p`
    pub facts: f64,
    /// `L = L_c + L_p`
    pub total: f64,
}

fn in_range(p: f64) -> bool {
    (PROB_EPS..=1.0 - PROB_EPS).contains(&p)
}

/// Loss of one record, accumulating `∂L/∂θ` into `grads` when given. Facts
/// are scored only on the record's own `T` and `F` lists.
pub fn loss_and_gradients(
    params: &ModelParams,
    record: &DatasetRecord,
    input: EncodingInput<'_>,
    grads: Option<&mut Tensors>,
) -> Result<LossBreakdown> {
    let e = encode(params, input)?;
    let dim_e = e.len();
    let dim_d = params.config.individual_dim;

    let targets: Vec<f64> = params
        .individuals
        .iter()
        .map(|a| if record.individuals.contains(a) { 1.0 } else { 0.0 })
        .collect();
    let cls = params.tensors.classifier.forward(e.clone());
    let classifier = loss_classifier(&cls.probs, &targets);

    struct Scored<'a> {
        atom: &'a Atom,
        slot: usize,
        trace: super::MlpTrace,
    }
    let mut scored_true = Vec::with_capacity(record.facts.len());
    let mut scored_false = Vec::with_capacity(record.negated_facts.len());
    for (set, out) in [(&record.facts, &mut scored_true), (&record.negated_facts, &mut scored_false)] {
        for atom in set {
            let (slot, mlp) = params
                .predicate_mlp(atom.predicate(), atom.arity())
                .ok_or_else(|| Error::Unknown {
                    kind: "predicate",
                    name: atom.predicate().key(),
                })?;
            let trace = mlp.forward(fact_input(params, &e, atom.args())?);
            out.push(Scored { atom, slot, trace });
        }
    }
    let probs = |v: &[Scored]| v.iter().map(|s| s.trace.probs[0]).collect::<Vec<_>>();
    let facts = loss_facts(&probs(&scored_true), &probs(&scored_false));

    if let Some(g) = grads {
        let d_logits: Vec<f64> = cls
            .probs
            .iter()
            .zip(&targets)
            .map(|(&p, &c)| if in_range(p) { p - c } else { 0.0 })
            .collect();
        let mut d_e = params.tensors.classifier.backward(&cls, &d_logits, &mut g.classifier);

        let n_true = scored_true.len() as f64;
        let n_false = scored_false.len() as f64;
        let sides = [(&scored_true, true, n_true), (&scored_false, false, n_false)];
        for (scored, positive, n) in sides {
            for s in scored.iter() {
                let p = s.trace.probs[0];
                let d_logit = match (in_range(p), positive) {
                    (false, _) => 0.0,
                    (true, true) => -(1.0 - p) / (2.0 * n),
                    (true, false) => p / (2.0 * n),
                };
                let (mlp, grad) = match s.atom.arity() {
                    1 => (&params.tensors.unary_mlps[s.slot], &mut g.unary_mlps[s.slot]),
                    _ => (&params.tensors.binary_mlps[s.slot], &mut g.binary_mlps[s.slot]),
                };
                let d_x = mlp.backward(&s.trace, &[d_logit], grad);
                for (d, x) in d_e.iter_mut().zip(&d_x[..dim_e]) {
                    *d += x;
                }
                for (k, arg) in s.atom.args().iter().enumerate() {
                    let idx = params.individual_index[arg];
                    let slot = params.individual_slots[idx];
                    let part = &d_x[dim_e + k * dim_d..dim_e + (k + 1) * dim_d];
                    for (gv, d) in g.individual_vectors[slot].iter_mut().zip(part) {
                        *gv += d;
                    }
                }
            }
        }

        if let (EncodingInput::Frames(frames), Some(gw)) = (input, g.frame_pool_weights.as_mut()) {
            for (gw_i, frame) in gw.iter_mut().zip(frames) {
                *gw_i += frame.iter().zip(&d_e).map(|(f, d)| f * d).sum::<f64>();
            }
        }
    }

    Ok(LossBreakdown {
        classifier,
        facts,
        total: classifier + facts,
    })
}

enum Optimizer {
    Sgd,
    Adam {
        step: i32,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    fn new(kind: OptimizerKind, tensors: &Tensors) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = tensors.buffers().iter().map(|b| vec![0.0; b.len()]).collect();
                Optimizer::Adam {
                    step: 0,
                    first: zeros.clone(),
                    second: zeros,
                }
            }
        }
    }

    fn apply(&mut self, lr: f64, params: &mut Tensors, grads: &Tensors) {
        let grads = grads.buffers();
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.buffers_mut().into_iter().zip(grads) {
                    for (w, d) in p.iter_mut().zip(g) {
                        *w -= lr * d;
                    }
                }
            }
            Optimizer::Adam { step, first, second } => {
                *step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*step);
                let c2 = 1.0 - ADAM_BETA2.powi(*step);
                let buffers = params.buffers_mut().into_iter().zip(grads).zip(first.iter_mut().zip(second.iter_mut()));
                for ((p, g), (m, v)) in buffers {
                    for i in 0..p.len() {
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean per-video loss over the whole dataset after each epoch.
    pub loss_trace: Vec<f64>,
}

pub fn train(dataset: &[DatasetRecord], features: &FeatureStore, cfg: &ModelConfig) -> Result<TrainOutcome> {
    train_with(dataset, features, cfg, None, None)
}

/// Trains from scratch, optionally initialising individual vectors from
/// word embeddings and under an ablated architecture. The vocabulary is
/// everything the dataset mentions.
pub fn train_with(
    dataset: &[DatasetRecord],
    features: &FeatureStore,
    cfg: &ModelConfig,
    emb: Option<&EmbeddingTable>,
    ablation: Option<Ablation>,
) -> Result<TrainOutcome> {
    let vocab = Vocabulary::from_records(dataset);
    let mut params = init_params(cfg, &vocab, emb)?;
    if let Some(mode) = ablation {
        params = ablate(params, mode);
    }
    if let Some(n) = features.frame_count() {
        params.tensors.frame_pool_weights = Some(vec![1.0 / n as f64; n]);
    }
    // Fail early on any record without an encoding.
    for r in dataset {
        video_encoding(&params, features, r.feature.as_deref(), &r.video_id, 0)?;
    }

    let mut optimizer = Optimizer::new(cfg.optimizer, &params.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x7261_696e);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut lookups: u64 = 0;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.tensors.zeros_like();
            for &i in batch {
                lookups += 1;
                let r = &dataset[i];
                with_input(&params, features, r, lookups, |input| {
                    loss_and_gradients(&params, r, input, Some(&mut grads)).map(|_| ())
                })?;
            }
            optimizer.apply(cfg.learning_rate, &mut params.tensors, &grads);
        }
        let mut total = 0.0;
        for r in dataset {
            lookups += 1;
            total += with_input(&params, features, r, lookups, |input| {
                loss_and_gradients(&params, r, input, None).map(|l| l.total)
            })?;
        }
        loss_trace.push(if dataset.is_empty() { 0.0 } else { total / dataset.len() as f64 });
    }
    Ok(TrainOutcome { params, loss_trace })
}

fn with_input<T>(
    params: &ModelParams,
    features: &FeatureStore,
    record: &DatasetRecord,
    nonce: u64,
    f: impl FnOnce(EncodingInput<'_>) -> Result<T>,
) -> Result<T> {
    use super::{EncoderMode, FeatureEntry};
    match (params.encoder, features.get(&record.video_id)) {
        (EncoderMode::Features, Some(FeatureEntry::Frames(frames))) => f(EncodingInput::Frames(frames)),
        (EncoderMode::Features, Some(FeatureEntry::Vector(v))) => f(EncodingInput::Vector(v)),
        (EncoderMode::Features, None) => match &record.feature {
            Some(v) => f(EncodingInput::Vector(v)),
            None => Err(Error::MissingFeatures(record.video_id.clone())),
        },
        (EncoderMode::Random { .. }, _) => {
            let e = video_encoding(params, features, None, &record.video_id, nonce)?;
            f(EncodingInput::Vector(&e))
        }
    }
}

/// Maximum relative error between analytic gradients and central finite
/// differences, over a seeded sample of up to 32 entries per tensor.
/// Relative error is `|a - n| / max(|a|, |n|, GRADIENT_CHECK_FLOOR)`.
pub fn gradient_check(
    params: &ModelParams,
    record: &DatasetRecord,
    input: EncodingInput<'_>,
    epsilon: f64,
) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let mut analytic = params.tensors.zeros_like();
    loss_and_gradients(params, record, input, Some(&mut analytic))?;
    let analytic = analytic.buffers().into_iter().cloned().collect::<Vec<_>>();

    let mut rng = ChaCha8Rng::seed_from_u64(params.config.rng_seed ^ 0x6772_6164);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (b, grad) in analytic.iter().enumerate() {
        let picks: Vec<usize> = if grad.len() <= CHECKS_PER_BUFFER {
            (0..grad.len()).collect()
        } else {
            (0..CHECKS_PER_BUFFER).map(|_| rng.gen_range(0..grad.len())).collect()
        };
        for i in picks {
            let original = probe.tensors.buffers()[b][i];
            probe.tensors.buffers_mut()[b][i] = original + epsilon;
            let plus = loss_and_gradients(&probe, record, input, None)?.total;
            probe.tensors.buffers_mut()[b][i] = original - epsilon;
            let minus = loss_and_gradients(&probe, record, input, None)?.total;
            probe.tensors.buffers_mut()[b][i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = grad[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
