//! File-level drivers for each subcommand. Every function reads its inputs,
//! runs one stage and writes one output file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use vid2kg_core::dataset::{build_dataset, compute_stats, read_dataset, write_dataset, BuildConfig, CorpusStats};
use vid2kg_core::factmodel::{
    load_features, predict, train_with, video_encoding, Ablation, FeatureStore, ModelConfig, ModelParams,
    TrainOutcome, PREDICT_NONCE,
};
use vid2kg_core::kg::{read_jsonl, read_kgs, write_jsonl, write_kgs, KgJson};
use vid2kg_core::metrics::{evaluate_corpus, evaluate_example, evaluate_example_strict, Aggregation, EvalResult};
use vid2kg_core::ontology::{closure, link_atoms, load_embeddings, load_ontology};
use vid2kg_core::semparse::{parse_caption_file, CaptionEntry, ExtractionMode};
use vid2kg_core::{DatasetRecord, KnowledgeGraph};

use crate::query::{run_query, QueryMatch, QueryPattern};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_store(path: &Path) -> Result<Vec<KnowledgeGraph>> {
    read_kgs(open(path)?).with_context(|| format!("in {}", path.display()))
}

fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    read_dataset(path).with_context(|| format!("in {}", path.display()))
}

/// Per-caption parser output, one KG JSONL line per mapped sentence.
pub fn parse(conllu: &Path, video_map: &Path, mode: ExtractionMode, out: &Path) -> Result<Vec<CaptionEntry>> {
    let entries = parse_caption_file(conllu, video_map, mode)?;
    let lines: Vec<KgJson> = entries.iter().map(CaptionEntry::to_json).collect();
    write_jsonl(create(out)?, &lines)?;
    info!("parsed {} captions into {}", entries.len(), out.display());
    Ok(entries)
}

pub fn read_caption_entries(path: &Path) -> Result<Vec<CaptionEntry>> {
    let lines: Vec<KgJson> = read_jsonl(open(path)?).with_context(|| format!("in {}", path.display()))?;
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| CaptionEntry::from_json(i, l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

/// Links every atom of the parser output to ontology synsets.
pub fn link(input: &Path, ontology: &Path, embeddings: &Path, out: &Path) -> Result<Vec<CaptionEntry>> {
    let entries = read_caption_entries(input)?;
    let ont = load_ontology(ontology)?;
    let emb = load_embeddings(embeddings)?;
    let linked = link_atoms(&entries, &ont, &emb);
    let lines: Vec<KgJson> = linked.iter().map(CaptionEntry::to_json).collect();
    write_jsonl(create(out)?, &lines)?;
    Ok(linked)
}

/// Merges per-caption graphs into a filtered dataset with negatives.
pub fn build(input: &Path, cfg: &BuildConfig, out: &Path) -> Result<CorpusStats> {
    let entries = read_caption_entries(input)?;
    let built = build_dataset(entries.iter().map(|e| (e.video_id.clone(), e.plain_atoms())), cfg)?;
    if built.skipped_negatives > 0 {
        log::warn!("{} negative draws found no admissible corruption", built.skipped_negatives);
    }
    write_dataset(&built.kgs, out)?;
    Ok(compute_stats(&built.kgs))
}

/// Corpus statistics of a dataset or KG JSONL file.
pub fn stats(input: &Path) -> Result<CorpusStats> {
    let kgs: Vec<KnowledgeGraph> = read_records(input)?.into_iter().map(KnowledgeGraph::from).collect();
    Ok(compute_stats(&kgs))
}

pub fn train(
    dataset: &Path,
    features: Option<&Path>,
    cfg: &ModelConfig,
    embeddings: Option<&Path>,
    ablation: Option<Ablation>,
    out: &Path,
) -> Result<TrainOutcome> {
    let records = read_records(dataset)?;
    let store = match features {
        Some(p) => load_features(p)?,
        None => FeatureStore::new(cfg.encoding_dim),
    };
    let emb = embeddings.map(load_embeddings).transpose()?;
    let outcome = train_with(&records, &store, cfg, emb.as_ref(), ablation)?;
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        log::debug!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    }
    outcome.params.save(out)?;
    Ok(outcome)
}

/// Predicted graphs (`Î`, `T̂`) for every video of `dataset`, or for every
/// video in the feature store when no dataset is given.
pub fn predict_graphs(params: &ModelParams, store: &FeatureStore, records: Option<&[DatasetRecord]>) -> Result<Vec<KnowledgeGraph>> {
    let targets: Vec<(String, Option<Vec<f64>>)> = match records {
        Some(rs) => rs.iter().map(|r| (r.video_id.clone(), r.feature.clone())).collect(),
        None => store.video_ids().map(|id| (id.to_owned(), None)).collect(),
    };
    targets
        .iter()
        .map(|(id, fallback)| {
            let e = video_encoding(params, store, fallback.as_deref(), id, PREDICT_NONCE)?;
            let p = predict(&e, params, &params.config)?;
            let mut kg = KnowledgeGraph::new(id.clone());
            kg.individuals = p.individuals;
            kg.facts = p.facts;
            Ok(kg)
        })
        .collect()
}

pub fn predict_file(model: &Path, features: Option<&Path>, dataset: Option<&Path>, out: &Path) -> Result<Vec<KnowledgeGraph>> {
    let params = ModelParams::load(model)?;
    let store = match features {
        Some(p) => load_features(p)?,
        None => FeatureStore::new(params.config.encoding_dim),
    };
    let records = dataset.map(read_records).transpose()?;
    let graphs = predict_graphs(&params, &store, records.as_deref())?;
    write_kgs(create(out)?, &graphs)?;
    Ok(graphs)
}

/// Each graph extended with its inferred facts (`T̂ ∪ T'`). With `restrict`,
/// inferred facts must stay within the graph's individuals.
pub fn infer(input: &Path, ontology: &Path, restrict: bool, out: &Path) -> Result<Vec<KnowledgeGraph>> {
    let ont = load_ontology(ontology)?;
    let graphs: Vec<KnowledgeGraph> = read_store(input)?
        .into_iter()
        .map(|mut kg| {
            let inferred = closure(&kg.facts, &ont, restrict.then_some(&kg.individuals));
            kg.facts.extend(inferred);
            kg
        })
        .collect();
    write_kgs(create(out)?, &graphs)?;
    Ok(graphs)
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoScore {
    pub video_id: String,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub aggregation: Aggregation,
    pub strict: bool,
    pub overall: EvalResult,
    pub per_video: Vec<VideoScore>,
}

/// Scores predicted graphs against the dataset's `(T, F)`. Videos without a
/// prediction count as predicting nothing.
pub fn evaluate(predicted: &[KnowledgeGraph], truth: &[DatasetRecord], aggregation: Aggregation, strict: bool) -> Result<EvalReport> {
    let by_video: BTreeMap<&str, &KnowledgeGraph> = predicted.iter().map(|k| (k.video_id.as_str(), k)).collect();
    let empty = Default::default();
    let per_video: Vec<VideoScore> = truth
        .iter()
        .map(|r| {
            let facts = by_video.get(r.video_id.as_str()).map_or(&empty, |k| &k.facts);
            let result = if strict {
                evaluate_example_strict(facts, &r.facts, &r.negated_facts)
            } else {
                evaluate_example(facts, &r.facts, &r.negated_facts)
            };
            VideoScore {
                video_id: r.video_id.clone(),
                result,
            }
        })
        .collect();
    let results: Vec<EvalResult> = per_video.iter().map(|v| v.result).collect();
    Ok(EvalReport {
        aggregation,
        strict,
        overall: evaluate_corpus(&results, aggregation)?,
        per_video,
    })
}

pub fn eval(predictions: &Path, dataset: &Path, aggregation: Aggregation, strict: bool, out: &Path) -> Result<EvalReport> {
    let report = evaluate(&read_store(predictions)?, &read_records(dataset)?, aggregation, strict)?;
    write_json(out, &report)?;
    Ok(report)
}

pub fn query(store: &Path, pattern: &QueryPattern, ontology: Option<&Path>) -> Result<Vec<QueryMatch>> {
    let graphs = read_store(store)?;
    let ont = ontology.map(load_ontology).transpose()?;
    Ok(run_query(&graphs, pattern, ont.as_ref()))
}
