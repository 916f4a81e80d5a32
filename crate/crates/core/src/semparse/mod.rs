//! Dependency-parse ingestion and rule-based atom extraction.

mod conllu;
mod extract;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

pub use conllu::{parse_conllu, DependencySentence, DependencyToken};
pub use extract::{extract_all_atoms, extract_root_atom, ExtractedAtom, ExtractionMode};

use crate::error::{Error, Result};
use crate::kg::{Atom, FactJson, KgJson, Term};

/// Atoms extracted from one caption, tagged with its video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionEntry {
    pub sentence_index: usize,
    pub video_id: String,
    pub caption: String,
    pub atoms: Vec<ExtractedAtom>,
}

impl CaptionEntry {
    pub fn plain_atoms(&self) -> Vec<Atom> {
        self.atoms.iter().map(|e| e.atom.clone()).collect()
    }

    /// KG JSONL line: facts plus the caption and predicate parts of speech.
    pub fn to_json(&self) -> KgJson {
        let mut individuals: Vec<Term> = self
            .atoms
            .iter()
            .flat_map(|e| e.atom.args().iter().cloned())
            .collect();
        individuals.sort();
        individuals.dedup();
        KgJson {
            video_id: self.video_id.clone(),
            individuals: individuals.iter().map(Term::key).collect(),
            facts: self
                .atoms
                .iter()
                .map(|e| FactJson {
                    pred_pos: e.predicate_pos,
                    ..FactJson::from_atom(&e.atom)
                })
                .collect(),
            caption: Some(self.caption.clone()),
        }
    }

    pub fn from_json(sentence_index: usize, line: &KgJson) -> Result<Self> {
        Ok(CaptionEntry {
            sentence_index,
            video_id: line.video_id.clone(),
            caption: line.caption.clone().unwrap_or_default(),
            atoms: line
                .facts
                .iter()
                .map(|f| {
                    Ok(ExtractedAtom {
                        atom: f.to_atom()?,
                        predicate_pos: f.pred_pos,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Reads a `sentence_index<TAB>video_id` map. Indices are 0-based positions
/// of CoNLL-U blocks; blank lines and `#` comments are ignored.
pub fn read_video_map<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (idx, vid) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected sentence_index<TAB>video_id".into(),
        })?;
        let idx = idx.trim().parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("invalid sentence index {idx:?}"),
        })?;
        let vid = vid.trim();
        if vid.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty video id".into(),
            });
        }
        out.push((idx, vid.to_owned()));
    }
    Ok(out)
}

/// Extracts atoms for every mapped sentence, in map order.
pub fn align_captions(
    sentences: &[DependencySentence],
    video_map: &[(usize, String)],
    mode: ExtractionMode,
) -> Result<Vec<CaptionEntry>> {
    if let Some(&(index, _)) = video_map.iter().find(|(i, _)| *i >= sentences.len()) {
        return Err(Error::SentenceOutOfRange {
            index,
            len: sentences.len(),
        });
    }
    Ok(video_map
        .par_iter()
        .map(|(index, video_id)| {
            let sent = &sentences[*index];
            CaptionEntry {
                sentence_index: *index,
                video_id: video_id.clone(),
                caption: sent.text.clone(),
                atoms: extract_all_atoms(sent, mode),
            }
        })
        .collect())
}

pub fn parse_caption_file(
    conllu: &Path,
    video_map: &Path,
    mode: ExtractionMode,
) -> Result<Vec<CaptionEntry>> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
    let sentences = parse_conllu(open(conllu)?)?;
    let map = read_video_map(open(video_map)?)?;
    align_captions(&sentences, &map, mode)
}
