//! Location-free scene graph types.
//!
//! A scene graph is a list of directed relationships between entity
//! instances. Nodes carry only a class label and a per-class instance index;
//! there are no spatial fields anywhere.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into [`Vocabulary::classes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

/// Index into [`Vocabulary::predicates`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredicateId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PredicateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Closed label sets for entity classes and predicates.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    classes: Vec<String>,
    predicates: Vec<String>,
    max_instance_count: u32,
    class_lookup: HashMap<String, ClassId>,
    predicate_lookup: HashMap<String, PredicateId>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.predicates == other.predicates
            && self.max_instance_count == other.max_instance_count
    }
}

impl Vocabulary {
    pub fn new(classes: Vec<String>, predicates: Vec<String>, max_instance_count: u32) -> Result<Self> {
        if max_instance_count == 0 {
            return Err(Error::InvalidVocabulary("max_instance_count must be at least 1".into()));
        }
        let class_lookup = index_labels(&classes, "class", ClassId)?;
        let predicate_lookup = index_labels(&predicates, "predicate", PredicateId)?;
        Ok(Self {
            classes,
            predicates,
            max_instance_count,
            class_lookup,
            predicate_lookup,
        })
    }

    /// Vocabulary with generated labels `c0..`, `p0..`; used by the synthetic corpus.
    pub fn synthetic(n_classes: u32, n_predicates: u32, max_instance_count: u32) -> Result<Self> {
        Self::new(
            (0..n_classes).map(|i| format!("c{i}")).collect(),
            (0..n_predicates).map(|i| format!("p{i}")).collect(),
            max_instance_count,
        )
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn predicates(&self) -> &[String] {
        &self.predicates
    }

    pub fn max_instance_count(&self) -> u32 {
        self.max_instance_count
    }

    pub fn num_classes(&self) -> u32 {
        self.classes.len() as u32
    }

    pub fn num_predicates(&self) -> u32 {
        self.predicates.len() as u32
    }

    pub fn class_id(&self, label: &str) -> Result<ClassId> {
        self.class_lookup.get(label).copied().ok_or_else(|| Error::UnknownLabel {
            kind: "class",
            label: label.to_owned(),
        })
    }

    pub fn predicate_id(&self, label: &str) -> Result<PredicateId> {
        self.predicate_lookup.get(label).copied().ok_or_else(|| Error::UnknownLabel {
            kind: "predicate",
            label: label.to_owned(),
        })
    }

    pub fn class_label(&self, id: ClassId) -> Result<&str> {
        self.classes
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or(Error::IndexOutOfRange { kind: "class", index: id.0 })
    }

    pub fn predicate_label(&self, id: PredicateId) -> Result<&str> {
        self.predicates
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or(Error::IndexOutOfRange { kind: "predicate", index: id.0 })
    }

    /// Checks that every class and predicate index in `g` exists.
    pub fn check_graph(&self, g: &SceneGraph) -> Result<()> {
        for q in &g.quintuples {
            for cls in [q.sub.cls, q.obj.cls] {
                if cls.0 >= self.num_classes() {
                    return Err(Error::IndexOutOfRange { kind: "class", index: cls.0 });
                }
            }
            if q.pred.0 >= self.num_predicates() {
                return Err(Error::IndexOutOfRange { kind: "predicate", index: q.pred.0 });
            }
        }
        Ok(())
    }
}

fn index_labels<T: Copy>(labels: &[String], kind: &str, wrap: fn(u32) -> T) -> Result<HashMap<String, T>> {
    let mut lookup = HashMap::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        if lookup.insert(label.clone(), wrap(i as u32)).is_some() {
            return Err(Error::InvalidVocabulary(format!("duplicate {kind} label `{label}`")));
        }
    }
    Ok(lookup)
}

/// One node: a class plus the per-class instance index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityInstance {
    pub cls: ClassId,
    pub idx: u32,
}

impl EntityInstance {
    pub const fn new(cls: u32, idx: u32) -> Self {
        Self { cls: ClassId(cls), idx }
    }
}

impl fmt::Display for EntityInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.cls, self.idx)
    }
}

/// A directed relationship `sub --pred--> obj`, with an optional confidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quintuple {
    pub sub: EntityInstance,
    pub obj: EntityInstance,
    pub pred: PredicateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// The five label fields of a quintuple; the score is not part of identity.
pub type RelationKey = (EntityInstance, PredicateId, EntityInstance);

impl Quintuple {
    pub fn new(sub: EntityInstance, pred: u32, obj: EntityInstance) -> Self {
        Self {
            sub,
            obj,
            pred: PredicateId(pred),
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn key(&self) -> RelationKey {
        (self.sub, self.pred, self.obj)
    }

    pub fn is_self_loop(&self) -> bool {
        self.sub == self.obj
    }
}

/// Whether the anchor node is the subject (`Out`) or the object (`In`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Out,
    In,
}

/// One entry of a one-hop neighborhood: the predicate and the class at the
/// other end, optionally with the edge direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeighborTuple {
    pub pred: PredicateId,
    pub cls: ClassId,
    pub dir: Option<Direction>,
}

impl NeighborTuple {
    pub(crate) fn of(q: &Quintuple, anchor: EntityInstance, directed: bool) -> Self {
        let (other, dir) = if q.sub == anchor {
            (q.obj, Direction::Out)
        } else {
            (q.sub, Direction::In)
        };
        Self {
            pred: q.pred,
            cls: other.cls,
            dir: directed.then_some(dir),
        }
    }
}

/// A scene graph for one image. Quintuple order is the prediction rank for
/// predicted graphs and carries no meaning for ground truth.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub image_id: String,
    pub quintuples: Vec<Quintuple>,
}

impl SceneGraph {
    pub fn new(image_id: impl Into<String>, quintuples: Vec<Quintuple>) -> Self {
        Self {
            image_id: image_id.into(),
            quintuples,
        }
    }

    pub fn len(&self) -> usize {
        self.quintuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quintuples.is_empty()
    }

    /// Every instance that occurs as subject or object.
    pub fn nodes(&self) -> BTreeSet<EntityInstance> {
        self.quintuples.iter().flat_map(|q| [q.sub, q.obj]).collect()
    }

    /// Number of quintuples touching `n`; a self-loop counts once.
    pub fn degree(&self, n: EntityInstance) -> usize {
        self.quintuples.iter().filter(|q| q.sub == n || q.obj == n).count()
    }

    /// One tuple per incident quintuple, sorted so that it can be compared
    /// as a multiset.
    pub fn neighborhood(&self, n: EntityInstance, directed: bool) -> Vec<NeighborTuple> {
        let mut out: Vec<_> = self
            .quintuples
            .iter()
            .filter(|q| q.sub == n || q.obj == n)
            .map(|q| NeighborTuple::of(q, n, directed))
            .collect();
        out.sort_unstable();
        out
    }

    /// Per-class instance counts of the node set.
    pub fn class_counts(&self) -> HashMap<ClassId, usize> {
        let mut counts = HashMap::new();
        for n in self.nodes() {
            *counts.entry(n.cls).or_insert(0) += 1;
        }
        counts
    }

    /// Relabels instance indices per class in order of first appearance
    /// (subject before object within a quintuple).
    pub fn canonicalize(&self, vocab: &Vocabulary) -> Result<SceneGraph> {
        let g = self.canonical();
        for (cls, count) in g.class_counts() {
            if count > vocab.max_instance_count() as usize {
                return Err(Error::VocabularyOverflow {
                    class: cls,
                    count,
                    max: vocab.max_instance_count(),
                });
            }
        }
        Ok(g)
    }

    /// [`SceneGraph::canonicalize`] without an instance-count limit.
    pub fn canonical(&self) -> SceneGraph {
        let mut relabel: HashMap<EntityInstance, u32> = HashMap::new();
        let mut next: HashMap<ClassId, u32> = HashMap::new();
        let mut assign = |n: EntityInstance| -> EntityInstance {
            let idx = *relabel.entry(n).or_insert_with(|| {
                let slot = next.entry(n.cls).or_insert(0);
                *slot += 1;
                *slot - 1
            });
            EntityInstance { cls: n.cls, idx }
        };
        let quintuples = self
            .quintuples
            .iter()
            .map(|q| {
                let sub = assign(q.sub);
                let obj = assign(q.obj);
                Quintuple { sub, obj, ..*q }
            })
            .collect();
        SceneGraph {
            image_id: self.image_id.clone(),
            quintuples,
        }
    }

    /// Multiset of relation keys as `key -> count`.
    pub fn relation_counts(&self) -> HashMap<RelationKey, usize> {
        let mut counts = HashMap::new();
        for q in &self.quintuples {
            *counts.entry(q.key()).or_insert(0) += 1;
        }
        counts
    }

    /// Copy with repeated relations removed, keeping the first occurrence.
    pub fn deduplicated(&self) -> SceneGraph {
        let mut seen = std::collections::HashSet::new();
        SceneGraph {
            image_id: self.image_id.clone(),
            quintuples: self.quintuples.iter().filter(|q| seen.insert(q.key())).copied().collect(),
        }
    }
}
