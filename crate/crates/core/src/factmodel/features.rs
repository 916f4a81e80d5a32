//! Precomputed video encodings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::read_jsonl;

/// Either a fixed-length encoding or per-frame vectors to be pooled.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEntry {
    Vector(Vec<f64>),
    Frames(Vec<Vec<f64>>),
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureJson {
    video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<Vec<f64>>>,
}

/// Map from video id to its encoding, all of dimension `dim`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    frame_count: Option<usize>,
    entries: BTreeMap<String, FeatureEntry>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of frames per video when the store holds frame lists.
    pub fn frame_count(&self) -> Option<usize> {
        self.frame_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&FeatureEntry> {
        self.entries.get(video_id)
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, video_id: impl Into<String>, entry: FeatureEntry) -> Result<()> {
        let video_id = video_id.into();
        let dim_error = |actual| Error::Dimension {
            what: format!("features of {video_id}"),
            expected: self.dim,
            actual,
        };
        match &entry {
            FeatureEntry::Vector(v) if v.len() != self.dim => return Err(dim_error(v.len())),
            FeatureEntry::Frames(frames) => {
                if frames.is_empty() {
                    return Err(Error::Invalid(format!("{video_id} has no frames")));
                }
                if let Some(f) = frames.iter().find(|f| f.len() != self.dim) {
                    return Err(dim_error(f.len()));
                }
                match self.frame_count {
                    Some(n) if n != frames.len() => {
                        return Err(Error::Invalid(format!(
                            "{video_id} has {} frames, other videos have {n}",
                            frames.len()
                        )))
                    }
                    _ => self.frame_count = Some(frames.len()),
                }
            }
            FeatureEntry::Vector(_) => {}
        }
        if self.entries.insert(video_id.clone(), entry).is_some() {
            return Err(Error::Invalid(format!("duplicate features for {video_id}")));
        }
        Ok(())
    }

    /// Reads feature JSONL; the dimension is taken from the first record.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let rows: Vec<FeatureJson> = read_jsonl(reader)?;
        let mut store: Option<FeatureStore> = None;
        for row in rows {
            let entry = match (row.features, row.frames) {
                (Some(v), None) => FeatureEntry::Vector(v),
                (None, Some(f)) => FeatureEntry::Frames(f),
                _ => {
                    return Err(Error::Invalid(format!(
                        "{}: exactly one of \"features\" or \"frames\" is required",
                        row.video_id
                    )))
                }
            };
            let dim = match &entry {
                FeatureEntry::Vector(v) => v.len(),
                FeatureEntry::Frames(f) => f.first().map_or(0, Vec::len),
            };
            store
                .get_or_insert_with(|| FeatureStore::new(dim))
                .insert(row.video_id, entry)?;
        }
        Ok(store.unwrap_or_default())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, entry) in &self.entries {
            let row = FeatureJson {
                video_id: id.clone(),
                features: match entry {
                    FeatureEntry::Vector(v) => Some(v.clone()),
                    FeatureEntry::Frames(_) => None,
                },
                frames: match entry {
                    FeatureEntry::Frames(f) => Some(f.clone()),
                    FeatureEntry::Vector(_) => None,
                },
            };
            out.push_str(&serde_json::to_string(&row).expect("feature rows serialize"));
            out.push('\n');
        }
        out
    }
}

pub fn load_features(path: &Path) -> Result<FeatureStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureStore::from_reader(BufReader::new(file))
}

/// Weighted sum of frame vectors, `Σ_i w_i · frame_i`.
pub fn pool_frames(frames: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if frames.len() != weights.len() {
        return Err(Error::Dimension {
            what: "frame pooling weights".into(),
            expected: frames.len(),
            actual: weights.len(),
        });
    }
    let dim = frames.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (frame, &w) in frames.iter().zip(weights) {
        if frame.len() != dim {
            return Err(Error::Dimension {
                what: "frame".into(),
                expected: dim,
                actual: frame.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(frame) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Seeded stand-in encoding in `[-1, 1]^dim`, distinct per `(video, nonce)`.
pub fn random_encoding(seed: u64, video_id: &str, nonce: u64, dim: usize) -> Vec<f64> {
    let mut h = seed ^ 0x5851_f42d_4c95_7f2d;
    for b in video_id.bytes().chain(nonce.to_le_bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling() {
        let frames = vec![vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.5]];
        assert_eq!(pool_frames(&frames, &[0.0, 1.0, 0.0]).unwrap(), frames[1]);
        assert_eq!(pool_frames(&frames, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        let two = &frames[..2];
        assert_eq!(pool_frames(two, &[0.5, 0.5]).unwrap(), vec![2.0, -1.0]);
        assert!(pool_frames(&frames, &[1.0]).is_err());
    }

    #[test]
    fn feature_jsonl() {
        let input = "{\"video_id\":\"a\",\"features\":[1.0,2.0]}\n{\"video_id\":\"b\",\"features\":[0.5,-1.5]}\n";
        let store = FeatureStore::from_reader(input.as_bytes()).unwrap();
        assert_eq!(store.dim(), 2);
        assert_eq!(store.get("b"), Some(&FeatureEntry::Vector(vec![0.5, -1.5])));
        let back = FeatureStore::from_reader(store.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, store);

        let ragged = "{\"video_id\":\"a\",\"features\":[1.0,2.0]}\n{\"video_id\":\"b\",\"features\":[0.5]}\n";
        assert!(matches!(FeatureStore::from_reader(ragged.as_bytes()), Err(Error::Dimension { .. })));
        let frames = "{\"video_id\":\"a\",\"frames\":[[1.0],[2.0]]}\n{\"video_id\":\"b\",\"frames\":[[1.0]]}\n";
        assert!(FeatureStore::from_reader(frames.as_bytes()).is_err());
        let both = "{\"video_id\":\"a\",\"frames\":[[1.0]],\"features\":[1.0]}\n";
        assert!(FeatureStore::from_reader(both.as_bytes()).is_err());
    }

    #[test]
    fn random_encodings_are_seeded() {
        let a = random_encoding(1, "v", 0, 8);
        assert_eq!(a, random_encoding(1, "v", 0, 8));
        assert_ne!(a, random_encoding(1, "v", 1, 8));
        assert_ne!(a, random_encoding(2, "v", 0, 8));
        assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
    }
}
