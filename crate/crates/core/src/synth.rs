//! Seeded synthetic corpora: random ground-truth graphs and predictions
//! derived from them through a known instance permutation plus edge noise.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClassId, EntityInstance, PredicateId, Quintuple, SceneGraph, Vocabulary};
use crate::matcher::{exhaustive_match, first_order_match, hts_match, mapping_matched, InstanceMapping, MatchConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_images: usize,
    pub n_classes: u32,
    pub n_predicates: u32,
    /// Inclusive range of entity instances per image.
    pub nodes_per_image: (usize, usize),
    pub max_instances_per_class: u32,
    /// Inclusive range of ground-truth quintuples per image.
    pub quintuples_per_image: (usize, usize),
    /// Restrict ground-truth predicates to the first `n`; label noise then
    /// draws only from the remaining ones.
    pub gt_predicates: Option<u32>,
    /// Probability that a class gets its instance ids permuted.
    pub instance_shuffle: f64,
    pub edge_drop: f64,
    /// Expected number of spurious edges per ground-truth edge.
    pub edge_add: f64,
    pub label_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_images: 200,
            n_classes: 10,
            n_predicates: 8,
            nodes_per_image: (4, 16),
            max_instances_per_class: 8,
            quintuples_per_image: (6, 30),
            gt_predicates: None,
            instance_shuffle: 1.0,
            edge_drop: 0.0,
            edge_add: 0.0,
            label_noise: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, rate) in [
            ("instance_shuffle", self.instance_shuffle),
            ("edge_drop", self.edge_drop),
            ("edge_add", self.edge_add),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} = {rate} is outside [0, 1]"));
            }
        }
        if self.n_classes == 0 || self.n_predicates == 0 {
            return bad("need at least one class and one predicate".into());
        }
        if self.max_instances_per_class == 0 {
            return bad("max_instances_per_class must be positive".into());
        }
        let (lo, hi) = self.nodes_per_image;
        if lo < 2 || lo > hi {
            return bad(format!("nodes_per_image ({lo}, {hi}) must satisfy 2 <= lo <= hi"));
        }
        let (qlo, qhi) = self.quintuples_per_image;
        if qlo > qhi {
            return bad(format!("quintuples_per_image ({qlo}, {qhi}) is empty"));
        }
        if let Some(n) = self.gt_predicates {
            if n == 0 || n > self.n_predicates {
                return bad(format!("gt_predicates {n} must be in 1..={}", self.n_predicates));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::synthetic(self.n_classes, self.n_predicates, self.max_instances_per_class.max(32))
    }
}

/// One generated image: ground truth, its perturbed prediction, and the
/// instance permutation used to build the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    pub gt: SceneGraph,
    pub pred: SceneGraph,
    pub planted: InstanceMapping,
}

pub fn image_seed(seed: u64, image: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ image.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<SyntheticPair>> {
    cfg.validate()?;
    Ok((0..cfg.n_images)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(image_seed(cfg.seed, i as u64));
            generate_pair(cfg, format!("img{i:05}"), &mut rng)
        })
        .collect())
}

fn generate_pair(cfg: &SynthConfig, image_id: String, rng: &mut ChaCha8Rng) -> SyntheticPair {
    let gt = random_graph(cfg, image_id.clone(), rng);

    // Instance indices in `gt` need not be contiguous once unused nodes are
    // dropped, so permute the indices actually present.
    let mut by_class: BTreeMap<ClassId, Vec<u32>> = BTreeMap::new();
    for n in gt.nodes() {
        by_class.entry(n.cls).or_default().push(n.idx);
    }
    let mut relabel: BTreeMap<EntityInstance, EntityInstance> = BTreeMap::new();
    for (&cls, present) in &by_class {
        let mut ids = present.clone();
        if rng.gen_bool(cfg.instance_shuffle) {
            ids.shuffle(rng);
        }
        for (&idx, new) in present.iter().zip(ids) {
            relabel.insert(EntityInstance { cls, idx }, EntityInstance { cls, idx: new });
        }
    }

    let gt_preds = cfg.gt_predicates.unwrap_or(cfg.n_predicates);
    let mut quintuples = Vec::with_capacity(gt.len());
    for q in &gt.quintuples {
        if rng.gen_bool(cfg.edge_drop) {
            continue;
        }
        let mut pred = q.pred;
        if rng.gen_bool(cfg.label_noise) {
            pred = noisy_predicate(cfg, gt_preds, q.pred, rng);
        }
        quintuples.push(Quintuple {
            sub: relabel[&q.sub],
            obj: relabel[&q.obj],
            pred,
            score: None,
        });
    }
    let mapped_nodes: Vec<EntityInstance> = relabel.values().copied().collect();
    for _ in 0..gt.len() {
        if mapped_nodes.len() >= 2 && rng.gen_bool(cfg.edge_add) {
            let (sub, obj) = distinct_pair(mapped_nodes.len(), rng);
            quintuples.push(Quintuple {
                sub: mapped_nodes[sub],
                obj: mapped_nodes[obj],
                pred: PredicateId(rng.gen_range(0..cfg.n_predicates)),
                score: None,
            });
        }
    }
    quintuples.shuffle(rng);
    let n = quintuples.len().max(1) as f64;
    for (rank, q) in quintuples.iter_mut().enumerate() {
        q.score = Some(1.0 - rank as f64 / n);
    }
    let pred = SceneGraph::new(image_id, quintuples);

    let planted = planted_mapping(&gt, &pred, &relabel);
    SyntheticPair { gt, pred, planted }
}

fn noisy_predicate(cfg: &SynthConfig, gt_preds: u32, original: PredicateId, rng: &mut ChaCha8Rng) -> PredicateId {
    if gt_preds < cfg.n_predicates {
        PredicateId(rng.gen_range(gt_preds..cfg.n_predicates))
    } else if cfg.n_predicates > 1 {
        let shift = rng.gen_range(1..cfg.n_predicates);
        PredicateId((original.0 + shift) % cfg.n_predicates)
    } else {
        original
    }
}

fn distinct_pair(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    let b = (a + rng.gen_range(1..n)) % n;
    (a, b)
}

fn random_graph(cfg: &SynthConfig, image_id: String, rng: &mut ChaCha8Rng) -> SceneGraph {
    let n_nodes = rng.gen_range(cfg.nodes_per_image.0..=cfg.nodes_per_image.1);
    let mut counts = vec![0u32; cfg.n_classes as usize];
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let open: Vec<u32> = (0..cfg.n_classes)
            .filter(|&c| counts[c as usize] < cfg.max_instances_per_class)
            .collect();
        let Some(&cls) = open.choose(rng) else { break };
        nodes.push(EntityInstance {
            cls: ClassId(cls),
            idx: counts[cls as usize],
        });
        counts[cls as usize] += 1;
    }

    let gt_preds = cfg.gt_predicates.unwrap_or(cfg.n_predicates);
    let n_quintuples = rng.gen_range(cfg.quintuples_per_image.0..=cfg.quintuples_per_image.1);
    // Ground truth never repeats a relation: with top-K deduplication a
    // repeated GT quintuple could never be recalled in full.
    let mut seen = HashSet::new();
    let mut quintuples = Vec::with_capacity(n_quintuples);
    for i in 0..n_quintuples {
        for _ in 0..32 {
            // The first edges give every node at least one relation.
            let (sub, obj) = if i < nodes.len() {
                let other = (i + rng.gen_range(1..nodes.len())) % nodes.len();
                (i, other)
            } else {
                distinct_pair(nodes.len(), rng)
            };
            let (sub, obj) = if rng.gen_bool(0.5) { (sub, obj) } else { (obj, sub) };
            let q = Quintuple {
                sub: nodes[sub],
                obj: nodes[obj],
                pred: PredicateId(rng.gen_range(0..gt_preds)),
                score: None,
            };
            if seen.insert(q.key()) {
                quintuples.push(q);
                break;
            }
        }
    }
    SceneGraph::new(image_id, quintuples)
}

fn planted_mapping(
    gt: &SceneGraph,
    pred: &SceneGraph,
    relabel: &BTreeMap<EntityInstance, EntityInstance>,
) -> InstanceMapping {
    let present = pred.nodes();
    let mut pairs = Vec::new();
    let mut unmatched_gt = Vec::new();
    for g in gt.nodes() {
        let p = relabel[&g];
        if present.contains(&p) {
            pairs.push((g, p));
        } else {
            unmatched_gt.push(g);
        }
    }
    let matched = mapping_matched(gt, pred, &pairs, false);
    let gt_total = gt.len();
    InstanceMapping {
        pairs,
        unmatched_gt,
        matched,
        gt_total,
        recall: if gt_total == 0 { 1.0 } else { matched as f64 / gt_total as f64 },
    }
}

/// Shape of the pairs produced by [`adversarial_tie_case`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    /// Instances of the ambiguous class (and of the anchor class they point at).
    pub instances_per_class: u32,
    pub n_predicates: u32,
    /// Extra random relations among the anchors and their decorations.
    pub extra_edges: usize,
    pub max_attempts: usize,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            instances_per_class: 2,
            n_predicates: 4,
            extra_edges: 2,
            max_attempts: 64,
        }
    }
}

/// Builds a pair on which per-node assignment goes wrong: several instances
/// of one class have identical one-hop neighborhoods and are told apart only
/// by where their neighbors lead. Each candidate is verified before it is
/// returned: the first-order matcher must score strictly below the
/// exhaustive optimum, and tree search with two branches must reach it.
pub fn adversarial_tie_case(seed: u64, cfg: &AdversarialConfig) -> Result<(SceneGraph, SceneGraph)> {
    let k = cfg.instances_per_class;
    let n_pred = cfg.n_predicates.max(2);
    for attempt in 0..cfg.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(image_seed(seed, attempt as u64));
        let ambiguous = ClassId(0);
        let anchor = ClassId(1);
        let holds = PredicateId(0);

        let mut gt = Vec::new();
        let mut anchors = Vec::new();
        let mut decorated = Vec::new();
        for i in 0..k {
            let a = EntityInstance { cls: ambiguous, idx: i };
            let b = EntityInstance { cls: anchor, idx: i };
            let d = EntityInstance::new(2 + i, 0);
            gt.push(Quintuple::new(a, holds.0, b));
            gt.push(Quintuple::new(b, rng.gen_range(1..n_pred), d));
            anchors.push(b);
            decorated.push(d);
        }
        let others: Vec<EntityInstance> = anchors.iter().chain(&decorated).copied().collect();
        for _ in 0..cfg.extra_edges {
            if others.len() < 2 {
                break;
            }
            let (s, o) = distinct_pair(others.len(), &mut rng);
            gt.push(Quintuple::new(others[s], rng.gen_range(1..n_pred), others[o]));
        }
        let gt = SceneGraph::new(format!("adversarial-{seed}-{attempt}"), gt);

        let mut perm_a: Vec<u32> = (0..k).collect();
        let mut perm_b: Vec<u32> = (0..k).collect();
        perm_a.shuffle(&mut rng);
        perm_b.shuffle(&mut rng);
        let relabel = |n: EntityInstance| match n.cls {
            c if c == ambiguous => EntityInstance { cls: c, idx: perm_a[n.idx as usize] },
            c if c == anchor => EntityInstance { cls: c, idx: perm_b[n.idx as usize] },
            _ => n,
        };
        let mut pred: Vec<Quintuple> = gt
            .quintuples
            .iter()
            .map(|q| Quintuple {
                sub: relabel(q.sub),
                obj: relabel(q.obj),
                ..*q
            })
            .collect();
        pred.shuffle(&mut rng);
        let pred = SceneGraph::new(gt.image_id.clone(), pred);

        if is_first_order_trap(&gt, &pred)? {
            return Ok((gt, pred));
        }
    }
    Err(Error::GenerationFailed {
        attempts: cfg.max_attempts,
    })
}

fn is_first_order_trap(gt: &SceneGraph, pred: &SceneGraph) -> Result<bool> {
    let nodes: Vec<EntityInstance> = gt.nodes().into_iter().collect();
    let has_tie = nodes.iter().enumerate().any(|(i, a)| {
        nodes[i + 1..]
            .iter()
            .any(|b| a.cls == b.cls && gt.neighborhood(*a, false) == gt.neighborhood(*b, false))
    });
    if !has_tie {
        return Ok(false);
    }
    let exact = exhaustive_match(gt, pred)?;
    let first_order = first_order_match(gt, pred);
    let tree = hts_match(gt, pred, &MatchConfig::with_branching_factor(2))?;
    Ok(first_order.matched < exact.matched && tree.matched == exact.matched)
}
