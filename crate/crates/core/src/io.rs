//! JSONL graph records, vocabulary files and mapping sidecars.
//!
//! One graph per line:
//!
//! ```json
//! {"image_id":"1","triplets":[{"sub":{"cls":"person","idx":0},"pred":"holding","obj":{"cls":"cup","idx":0}}]}
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityInstance, Quintuple, SceneGraph, Vocabulary};
use crate::matcher::InstanceMapping;

pub const DEFAULT_MAX_INSTANCES: u32 = 32;

fn default_max_instances() -> u32 {
    DEFAULT_MAX_INSTANCES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub classes: Vec<String>,
    pub predicates: Vec<String>,
    #[serde(default = "default_max_instances")]
    pub max_instances: u32,
}

const VG150: &str = include_str!("../fixtures/vg150.json");
const PSG: &str = include_str!("../fixtures/psg.json");

impl VocabularyFile {
    pub fn into_vocabulary(self) -> Result<Vocabulary> {
        if self.classes.is_empty() || self.predicates.is_empty() {
            return Err(Error::InvalidVocabulary("class and predicate lists must be non-empty".into()));
        }
        Vocabulary::new(self.classes, self.predicates, self.max_instances)
    }

    pub fn from_vocabulary(v: &Vocabulary) -> Self {
        Self {
            classes: v.classes().to_vec(),
            predicates: v.predicates().to_vec(),
            max_instances: v.max_instance_count(),
        }
    }

    /// Built-in label sets: `vg150` (150 objects, 50 predicates) and
    /// `psg` (133 objects, 56 predicates).
    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "vg150" => VG150,
            "psg" => PSG,
            _ => return None,
        };
        Some(serde_json::from_str(text).expect("bundled vocabulary is valid"))
    }

    /// Collects every label used by `records`, sorted.
    pub fn infer(records: &[GraphRecord]) -> Self {
        let mut classes = BTreeSet::new();
        let mut predicates = BTreeSet::new();
        let mut max_idx = 0;
        for r in records {
            for t in &r.triplets {
                classes.insert(t.sub.cls.clone());
                classes.insert(t.obj.cls.clone());
                predicates.insert(t.pred.clone());
                max_idx = max_idx.max(t.sub.idx).max(t.obj.idx);
            }
        }
        Self {
            classes: classes.into_iter().collect(),
            predicates: predicates.into_iter().collect(),
            max_instances: DEFAULT_MAX_INSTANCES.max(max_idx + 1),
        }
    }
}

/// Reads a vocabulary file, or a preset when `source` is `preset:<name>`.
pub fn load_vocabulary(source: &str) -> Result<Vocabulary> {
    if let Some(name) = source.strip_prefix("preset:") {
        return VocabularyFile::preset(name)
            .ok_or_else(|| Error::InvalidVocabulary(format!("unknown preset `{name}`")))?
            .into_vocabulary();
    }
    let text = std::fs::read_to_string(source)?;
    let file: VocabularyFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{source}: {e}"),
    })?;
    file.into_vocabulary()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub cls: String,
    pub idx: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub sub: NodeRef,
    pub pred: String,
    pub obj: NodeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub image_id: String,
    pub triplets: Vec<Triplet>,
}

impl GraphRecord {
    pub fn resolve(&self, vocab: &Vocabulary) -> Result<SceneGraph> {
        let node = |n: &NodeRef| -> Result<EntityInstance> {
            Ok(EntityInstance {
                cls: vocab.class_id(&n.cls)?,
                idx: n.idx,
            })
        };
        let quintuples = self
            .triplets
            .iter()
            .map(|t| {
                Ok(Quintuple {
                    sub: node(&t.sub)?,
                    obj: node(&t.obj)?,
                    pred: vocab.predicate_id(&t.pred)?,
                    score: t.score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneGraph::new(self.image_id.clone(), quintuples))
    }

    pub fn from_graph(g: &SceneGraph, vocab: &Vocabulary) -> Result<Self> {
        let node = |n: EntityInstance| -> Result<NodeRef> {
            Ok(NodeRef {
                cls: vocab.class_label(n.cls)?.to_owned(),
                idx: n.idx,
            })
        };
        let triplets = g
            .quintuples
            .iter()
            .map(|q| {
                Ok(Triplet {
                    sub: node(q.sub)?,
                    pred: vocab.predicate_label(q.pred)?.to_owned(),
                    obj: node(q.obj)?,
                    score: q.score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            image_id: g.image_id.clone(),
            triplets,
        })
    }
}

/// Parses JSON lines, skipping blank ones. Errors carry 1-based line numbers.
pub fn parse_lines<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<(usize, GraphRecord)>> {
    parse_lines(BufReader::new(File::open(path)?))
}

/// Resolves labels; failures are reported with the record's line number.
pub fn resolve_records(records: &[(usize, GraphRecord)], vocab: &Vocabulary) -> Result<Vec<SceneGraph>> {
    records
        .iter()
        .map(|(line, r)| {
            r.resolve(vocab).map_err(|e| Error::AtLine {
                line: *line,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn read_graphs(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<SceneGraph>> {
    resolve_records(&read_records(path)?, vocab)
}

pub fn write_json_line<T: Serialize>(mut out: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut out, value).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_graphs(mut out: impl Write, graphs: &[SceneGraph], vocab: &Vocabulary) -> Result<()> {
    for g in graphs {
        write_json_line(&mut out, &GraphRecord::from_graph(g, vocab)?)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingPair {
    pub gt: NodeRef,
    pub pred: NodeRef,
}

/// Sidecar line describing an instance mapping for one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingRecord {
    pub image_id: String,
    pub pairs: Vec<MappingPair>,
    pub unmatched_gt: Vec<NodeRef>,
    pub matched: usize,
    pub gt_total: usize,
    pub recall: f64,
}

impl MappingRecord {
    pub fn new(image_id: &str, m: &InstanceMapping, vocab: &Vocabulary) -> Result<Self> {
        let node = |n: &EntityInstance| -> Result<NodeRef> {
            Ok(NodeRef {
                cls: vocab.class_label(n.cls)?.to_owned(),
                idx: n.idx,
            })
        };
        Ok(Self {
            image_id: image_id.to_owned(),
            pairs: m
                .pairs
                .iter()
                .map(|(g, p)| Ok(MappingPair { gt: node(g)?, pred: node(p)? }))
                .collect::<Result<Vec<_>>>()?,
            unmatched_gt: m.unmatched_gt.iter().map(node).collect::<Result<Vec<_>>>()?,
            matched: m.matched,
            gt_total: m.gt_total,
            recall: m.recall,
        })
    }
}
