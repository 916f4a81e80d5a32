//! End-to-end runs driven by a TOML or JSON configuration file.
//!
//! Relative paths in the configuration are resolved against the directory
//! holding the file. The run writes seven stage outputs plus
//! `manifest.json`, which records seeds and SHA-256 content hashes but no
//! timestamps or absolute paths, so identical inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use vid2kg_core::dataset::BuildConfig;
use vid2kg_core::factmodel::{Ablation, ModelConfig, FORMAT_VERSION};
use vid2kg_core::metrics::Aggregation;
use vid2kg_core::semparse::ExtractionMode;

use crate::{commands, DataError};

fn invalid(message: impl Into<String>) -> anyhow::Error {
    DataError(message.into()).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub conllu: PathBuf,
    pub video_map: PathBuf,
    pub ontology: PathBuf,
    pub embeddings: PathBuf,
    pub features: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    /// Start individual vectors from the word embeddings.
    #[serde(default)]
    pub embedding_init: bool,
    #[serde(default)]
    pub ablation: Option<Ablation>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferOptions {
    #[serde(default)]
    pub restrict: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: String,
    pub inputs: Inputs,
    pub build: BuildConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub infer: InferOptions,
    #[serde(default)]
    pub eval: EvalOptions,
}

fn default_mode() -> String {
    "repaired".into()
}

impl RunConfig {
    /// Parses a configuration, TOML unless the extension is `.json`. The
    /// top-level `rng_seed` is mandatory and seeds the build and model
    /// sections unless they set their own.
    pub fn parse_text(text: &str, json: bool) -> Result<Self> {
        let mut doc: Value = if json {
            serde_json::from_str(text).context("invalid JSON configuration")?
        } else {
            let parsed: toml::Value = toml::from_str(text).context("invalid TOML configuration")?;
            serde_json::to_value(parsed)?
        };
        let root = doc
            .as_object_mut()
            .ok_or_else(|| invalid("configuration must be a table"))?;
        let seed = match root.get("rng_seed") {
            Some(v) => v.clone(),
            None => return Err(invalid("configuration is missing rng_seed; seeds are never implicit")),
        };
        for section in ["build", "model"] {
            let entry = root.entry(section).or_insert_with(|| Value::Object(Default::default()));
            let table = entry
                .as_object_mut()
                .ok_or_else(|| invalid(format!("[{section}] must be a table")))?;
            table.entry("rng_seed").or_insert_with(|| seed.clone());
        }
        let cfg: RunConfig = serde_json::from_value(doc).context("invalid configuration")?;
        cfg.extraction_mode()?;
        cfg.build.validate()?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse_text(&text, json).with_context(|| format!("in {}", path.display()))
    }

    pub fn extraction_mode(&self) -> Result<ExtractionMode> {
        self.mode.parse().map_err(|e: String| invalid(e))
    }
}

pub const STAGES: [(&str, &str); 7] = [
    ("parse", "parsed.jsonl"),
    ("link", "linked.jsonl"),
    ("build", "dataset.jsonl"),
    ("train", "model.json"),
    ("predict", "predictions.jsonl"),
    ("infer", "inferred.jsonl"),
    ("eval", "eval.json"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    #[serde(flatten)]
    pub output: HashedFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub model_format_version: u32,
    pub rng_seed: u64,
    pub build_seed: u64,
    pub model_seed: u64,
    pub extraction_mode: String,
    pub config: HashedFile,
    pub inputs: Vec<(String, HashedFile)>,
    pub stages: Vec<StageRecord>,
}

pub fn hash_file(path: &Path, label: String) -> Result<HashedFile> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(HashedFile {
        file: label,
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Runs every stage in order and writes the manifest. Returns it along with
/// the output directory.
pub fn run(config_path: &Path) -> Result<(Manifest, PathBuf)> {
    let cfg = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let at = |p: &Path| base.join(p);
    let out_dir = at(&cfg.output_dir);
    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let out = |name: &str| out_dir.join(name);
    let inp = &cfg.inputs;

    let stage = |name: &'static str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        info!("stage {name}");
        f().with_context(|| format!("stage {name} failed"))
    };

    stage("parse", &mut || {
        commands::parse(&at(&inp.conllu), &at(&inp.video_map), cfg.extraction_mode()?, &out("parsed.jsonl")).map(drop)
    })?;
    stage("link", &mut || {
        commands::link(&out("parsed.jsonl"), &at(&inp.ontology), &at(&inp.embeddings), &out("linked.jsonl")).map(drop)
    })?;
    stage("build", &mut || {
        let stats = commands::build(&out("linked.jsonl"), &cfg.build, &out("dataset.jsonl"))?;
        info!("dataset:\n{stats}");
        Ok(())
    })?;
    stage("train", &mut || {
        let emb = cfg.train.embedding_init.then(|| at(&inp.embeddings));
        let outcome = commands::train(
            &out("dataset.jsonl"),
            Some(&at(&inp.features)),
            &cfg.model,
            emb.as_deref(),
            cfg.train.ablation,
            &out("model.json"),
        )?;
        if let Some(last) = outcome.loss_trace.last() {
            info!("final training loss {last:.6}");
        }
        Ok(())
    })?;
    stage("predict", &mut || {
        commands::predict_file(
            &out("model.json"),
            Some(&at(&inp.features)),
            Some(&out("dataset.jsonl")),
            &out("predictions.jsonl"),
        )
        .map(drop)
    })?;
    stage("infer", &mut || {
        commands::infer(&out("predictions.jsonl"), &at(&inp.ontology), cfg.infer.restrict, &out("inferred.jsonl")).map(drop)
    })?;
    stage("eval", &mut || {
        let report = commands::eval(
            &out("predictions.jsonl"),
            &out("dataset.jsonl"),
            cfg.eval.aggregation,
            cfg.eval.strict,
            &out("eval.json"),
        )?;
        info!("evaluation:\n{}", vid2kg_core::metrics::report_table(&report.overall));
        Ok(())
    })?;

    let label = |p: &Path| p.to_string_lossy().replace('\\', "/");
    let inputs = [
        ("conllu", &inp.conllu),
        ("video_map", &inp.video_map),
        ("ontology", &inp.ontology),
        ("embeddings", &inp.embeddings),
        ("features", &inp.features),
    ]
    .into_iter()
    .map(|(name, p)| Ok((name.to_owned(), hash_file(&at(p), label(p))?)))
    .collect::<Result<Vec<_>>>()?;
    let stages = STAGES
        .iter()
        .map(|(stage, file)| {
            Ok(StageRecord {
                stage: (*stage).to_owned(),
                output: hash_file(&out(file), (*file).to_owned())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config_name = config_path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let manifest = Manifest {
        tool: "vid2kg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model_format_version: FORMAT_VERSION,
        rng_seed: cfg.rng_seed,
        build_seed: cfg.build.rng_seed,
        model_seed: cfg.model.rng_seed,
        extraction_mode: cfg.mode.clone(),
        config: hash_file(config_path, config_name)?,
        inputs,
        stages,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(out("manifest.json"), text).context("cannot write manifest.json")?;
    Ok((manifest, out_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        rng_seed = 5
        output_dir = "out"
        [inputs]
        conllu = "c.conllu"
        video_map = "m.tsv"
        ontology = "o.json"
        embeddings = "e.txt"
        features = "f.jsonl"
        [model]
        epochs = 3
    "#;

    #[test]
    fn seeds_flow_into_sections() {
        let cfg = RunConfig::parse_text(MINIMAL, false).unwrap();
        assert_eq!(cfg.build.rng_seed, 5);
        assert_eq!(cfg.model.rng_seed, 5);
        assert_eq!(cfg.model.epochs, 3);
        assert_eq!(cfg.extraction_mode().unwrap(), ExtractionMode::Repaired);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let text = MINIMAL.replace("rng_seed = 5", "");
        let err = RunConfig::parse_text(&text, false).unwrap_err();
        assert!(err.to_string().contains("rng_seed"), "{err}");
    }

    #[test]
    fn section_seed_overrides_and_json_works() {
        let text = MINIMAL.replace("epochs = 3", "epochs = 3\nrng_seed = 9");
        assert_eq!(RunConfig::parse_text(&text, false).unwrap().model.rng_seed, 9);
        let json = r#"{"rng_seed": 1, "output_dir": "o", "mode": "faithful",
            "inputs": {"conllu": "a", "video_map": "b", "ontology": "c", "embeddings": "d", "features": "e"}}"#;
        let cfg = RunConfig::parse_text(json, true).unwrap();
        assert_eq!(cfg.extraction_mode().unwrap(), ExtractionMode::Faithful);
        assert!(RunConfig::parse_text(&json.replace("faithful", "loose"), true).is_err());
        assert!(RunConfig::parse_text(&MINIMAL.replace("[model]", "[modle]"), false).is_err());
    }
}
