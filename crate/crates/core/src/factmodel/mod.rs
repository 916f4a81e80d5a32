//! Fact-prediction head over precomputed video encodings.
//!
//! A multi-label classifier predicts which individuals appear in a video;
//! one small MLP per predicate scores facts from the concatenation of the
//! video encoding and the arguments' learnable individual vectors.

mod features;
mod mlp;
mod params;
mod train;

use std::collections::BTreeSet;

pub use features::{load_features, pool_frames, random_encoding, FeatureEntry, FeatureStore};
pub use mlp::{sigmoid, Dense, Mlp, MlpTrace};
pub use params::{
    ablate, init_params, Ablation, EncoderMode, ModelConfig, ModelParams, OptimizerKind, Tensors,
    FORMAT_VERSION,
};
pub use train::{
    gradient_check, loss_and_gradients, train, train_with, LossBreakdown, TrainOutcome,
    GRADIENT_CHECK_FLOOR,
};

use crate::error::{Error, Result};
use crate::kg::{Atom, Term};

/// Probability clamp applied before every logarithm.
pub const PROB_EPS: f64 = 1e-12;

/// Nonce used for random-encoder lookups at prediction time.
pub const PREDICT_NONCE: u64 = u64::MAX;

/// Where a video encoding comes from.
#[derive(Debug, Clone, Copy)]
pub enum EncodingInput<'a> {
    Vector(&'a [f64]),
    /// Per-frame vectors, pooled with the model's frame weights.
    Frames(&'a [Vec<f64>]),
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `L_c = Σ_j BCE(ĉ_j, c_j)` with probabilities clamped to `[ε, 1-ε]`.
pub fn loss_classifier(predicted: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), targets.len());
    predicted
        .iter()
        .zip(targets)
        .map(|(&p, &c)| {
            let p = clamp_prob(p);
            -(c * p.ln() + (1.0 - c) * (1.0 - p).ln())
        })
        .sum()
}

/// Class-balanced fact loss
/// `L_p = -(1/2|T|) Σ_T ln t - (1/2|F|) Σ_F ln(1 - f)`; an empty side adds 0.
pub fn loss_facts(scores_true: &[f64], scores_false: &[f64]) -> f64 {
    let mut loss = 0.0;
    if !scores_true.is_empty() {
        let w = 1.0 / (2.0 * scores_true.len() as f64);
        loss -= w * scores_true.iter().map(|&t| clamp_prob(t).ln()).sum::<f64>();
    }
    if !scores_false.is_empty() {
        let w = 1.0 / (2.0 * scores_false.len() as f64);
        loss -= w * scores_false.iter().map(|&f| (1.0 - clamp_prob(f)).ln()).sum::<f64>();
    }
    loss
}

pub(crate) fn check_encoding(params: &ModelParams, e: &[f64]) -> Result<()> {
    if e.len() != params.config.encoding_dim {
        return Err(Error::Dimension {
            what: "video encoding".into(),
            expected: params.config.encoding_dim,
            actual: e.len(),
        });
    }
    Ok(())
}

/// Resolves an encoding input to the vector `e`.
pub fn encode(params: &ModelParams, input: EncodingInput<'_>) -> Result<Vec<f64>> {
    let e = match input {
        EncodingInput::Vector(v) => v.to_vec(),
        EncodingInput::Frames(frames) => {
            let w = params
                .tensors
                .frame_pool_weights
                .as_ref()
                .ok_or_else(|| Error::Model("model has no frame pooling weights".into()))?;
            pool_frames(frames, w)?
        }
    };
    check_encoding(params, &e)?;
    Ok(e)
}

/// Classifier output `ĉ`: one probability per individual, in `params.individuals` order.
pub fn classify_individuals(e: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_encoding(params, e)?;
    Ok(params.tensors.classifier.probs(e))
}

pub(crate) fn fact_input(params: &ModelParams, e: &[f64], args: &[Term]) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(e.len() + args.len() * params.config.individual_dim);
    x.extend_from_slice(e);
    for a in args {
        let v = params.individual_vector(a).ok_or_else(|| Error::Unknown {
            kind: "individual",
            name: a.key(),
        })?;
        x.extend_from_slice(v);
    }
    Ok(x)
}

/// Probability that `predicate(args)` holds, from the predicate's MLP over
/// `(e, v_a[, v_b])`.
pub fn score_fact(e: &[f64], predicate: &Term, args: &[Term], params: &ModelParams) -> Result<f64> {
    check_encoding(params, e)?;
    let (_, mlp) = params
        .predicate_mlp(predicate, args.len())
        .ok_or_else(|| Error::Unknown {
            kind: if args.len() == 1 { "unary predicate" } else { "binary predicate" },
            name: predicate.key(),
        })?;
    Ok(mlp.probs(&fact_input(params, e, args)?)[0])
}

/// Thresholded prediction for one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prediction {
    /// `Î`: individuals whose classifier probability exceeds the threshold.
    pub individuals: BTreeSet<Term>,
    /// `T̂ = U ∪ B`.
    pub facts: BTreeSet<Atom>,
    /// Number of predicate-MLP evaluations performed.
    pub evaluated: usize,
}

/// Predicts `Î` from the classifier, then scores unary predicates on each
/// `a ∈ Î` and binary predicates on each ordered pair over `Î`. All
/// comparisons are strict (`> threshold`).
pub fn predict(e: &[f64], params: &ModelParams, cfg: &ModelConfig) -> Result<Prediction> {
    let probs = classify_individuals(e, params)?;
    let present: Vec<&Term> = params
        .individuals
        .iter()
        .zip(&probs)
        .filter(|(_, &p)| p > cfg.threshold)
        .map(|(t, _)| t)
        .collect();

    let mut out = Prediction {
        individuals: present.iter().map(|&t| t.clone()).collect(),
        ..Default::default()
    };
    for (pred, &slot) in &params.unary_slots {
        let mlp = &params.tensors.unary_mlps[slot];
        for &a in &present {
            out.evaluated += 1;
            let x = fact_input(params, e, std::slice::from_ref(a))?;
            if mlp.probs(&x)[0] > cfg.threshold {
                out.facts.insert(Atom::unary(pred.clone(), a.clone()));
            }
        }
    }
    for (pred, &slot) in &params.binary_slots {
        let mlp = &params.tensors.binary_mlps[slot];
        for &a in &present {
            for &b in &present {
                if a == b && !cfg.reflexive_pairs {
                    continue;
                }
                out.evaluated += 1;
                let x = fact_input(params, e, &[a.clone(), b.clone()])?;
                if mlp.probs(&x)[0] > cfg.threshold {
                    out.facts.insert(Atom::binary(pred.clone(), a.clone(), b.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Encoding of `video_id` under the model's encoder: the feature store, the
/// record's embedded vector, or a seeded random vector.
pub fn video_encoding(
    params: &ModelParams,
    store: &FeatureStore,
    fallback: Option<&[f64]>,
    video_id: &str,
    nonce: u64,
) -> Result<Vec<f64>> {
    match params.encoder {
        EncoderMode::Random { seed } => Ok(random_encoding(seed, video_id, nonce, params.config.encoding_dim)),
        EncoderMode::Features => match (store.get(video_id), fallback) {
            (Some(FeatureEntry::Vector(v)), _) => encode(params, EncodingInput::Vector(v)),
            (Some(FeatureEntry::Frames(f)), _) => encode(params, EncodingInput::Frames(f)),
            (None, Some(v)) => encode(params, EncodingInput::Vector(v)),
            (None, None) => Err(Error::MissingFeatures(video_id.to_owned())),
        },
    }
}

/// Prediction for a stored video.
pub fn predict_video(params: &ModelParams, store: &FeatureStore, video_id: &str) -> Result<Prediction> {
    let e = video_encoding(params, store, None, video_id, PREDICT_NONCE)?;
    predict(&e, params, &params.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Vocabulary;

    #[test]
    fn classifier_loss_values() {
        let half = vec![0.5; 7];
        let targets = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        assert!((loss_classifier(&half, &targets) - 7.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(loss_classifier(&[1.0, 0.0], &[1.0, 0.0]) < 1e-11);
        let l = loss_classifier(&[0.8, 0.3], &[1.0, 0.0]);
        assert!((l - (-(0.8f64.ln()) - 0.7f64.ln())).abs() < 1e-15);
        assert!((l - 0.579_818_495_252_942).abs() < 1e-12);
    }

    #[test]
    fn fact_loss_values() {
        let l = loss_facts(&[0.8], &[0.2]);
        assert!((l + 0.8f64.ln()).abs() < 1e-12);
        assert!((l - 0.223_143_551_314_209_7).abs() < 1e-12);
        assert!(loss_facts(&[1.0], &[0.0]) < 1e-11);
        let many = vec![0.5; 100];
        let l = loss_facts(&[1.0], &many);
        assert!((l - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(loss_facts(&[], &[]), 0.0);
    }

    fn vocab() -> Vocabulary {
        let t = |s: &str| Term::new(s).unwrap();
        Vocabulary {
            individuals: [t("man"), t("paper"), t("dog")].into(),
            unary_predicates: [t("white")].into(),
            binary_predicates: [t("fold")].into(),
            ..Default::default()
        }
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            encoding_dim: 4,
            individual_dim: 3,
            classifier_hidden: 5,
            predicate_hidden: 6,
            ..ModelConfig::new(9)
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let mut p = init_params(&small_cfg(), &vocab(), None).unwrap();
        for b in p.tensors.buffers_mut() {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
        let probs = classify_individuals(&[0.3, -1.0, 2.0, 0.0], &p).unwrap();
        assert_eq!(probs, vec![0.5; 3]);
        assert!(classify_individuals(&[0.0; 3], &p).is_err());
    }

    #[test]
    fn binary_input_width_and_order() {
        let p = init_params(&small_cfg(), &vocab(), None).unwrap();
        let fold = Term::new("fold").unwrap();
        assert_eq!(p.predicate_mlp(&fold, 2).unwrap().1.in_dim(), 4 + 2 * 3);
        let e = [0.1, 0.2, -0.3, 0.4];
        let man = Term::new("man").unwrap();
        let paper = Term::new("paper").unwrap();
        let ab = score_fact(&e, &fold, &[man.clone(), paper.clone()], &p).unwrap();
        let ba = score_fact(&e, &fold, &[paper.clone(), man.clone()], &p).unwrap();
        assert_ne!(ab, ba);
        assert!(ab > 0.0 && ab < 1.0);
        assert!(score_fact(&e, &fold, std::slice::from_ref(&man), &p).is_err());
        assert!(score_fact(&e, &Term::new("eat").unwrap(), &[man.clone(), paper], &p).is_err());
        assert!(score_fact(&e, &fold, &[man, Term::new("cat").unwrap()], &p).is_err());
    }

    #[test]
    fn predict_threshold_is_strict_and_counts_evaluations() {
        let mut p = init_params(&small_cfg(), &vocab(), None).unwrap();
        // Classifier: zero weights; bias decides each individual exactly.
        let out = &mut p.tensors.classifier.output;
        out.weights.iter_mut().for_each(|w| *w = 0.0);
        out.bias = vec![0.0, 0.0, 0.0];
        let e = [0.5, -0.5, 1.0, 0.0];
        let none = predict(&e, &p, &p.config).unwrap();
        assert!(none.individuals.is_empty() && none.facts.is_empty());
        assert_eq!(none.evaluated, 0);

        // dog < 0.5, man and paper > 0.5 (individuals are sorted: dog, man, paper)
        p.tensors.classifier.output.bias = vec![-3.0, 3.0, 3.0];
        let two = predict(&e, &p, &p.config).unwrap();
        assert_eq!(two.individuals.len(), 2);
        assert_eq!(two.evaluated, 2 + 4);
        let no_reflexive = ModelConfig { reflexive_pairs: false, ..p.config.clone() };
        assert_eq!(predict(&e, &p, &no_reflexive).unwrap().evaluated, 2 + 2);
    }
}
