#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use lfsgg_core::{EntityInstance, Quintuple, SceneGraph};
use proptest::prelude::*;

pub type Edge = (u32, u32, u32, u32, u32);
type Slots = Vec<Option<EntityInstance>>;

pub fn node(cls: u32, idx: u32) -> EntityInstance {
    EntityInstance::new(cls, idx)
}

pub fn graph(id: &str, edges: &[Edge]) -> SceneGraph {
    SceneGraph::new(
        id,
        edges
            .iter()
            .map(|&(sc, si, p, oc, oi)| Quintuple::new(node(sc, si), p, node(oc, oi)))
            .collect(),
    )
}

/// Small random graphs: few classes, at most `max_inst` instances each.
pub fn small_graph(classes: u32, max_inst: u32, preds: u32, max_edges: usize) -> impl Strategy<Value = SceneGraph> {
    prop::collection::vec(
        (0..classes, 0..max_inst, 0..preds, 0..classes, 0..max_inst),
        0..=max_edges,
    )
    .prop_map(|edges| {
        let edges: Vec<Edge> = edges
            .into_iter()
            .filter(|&(sc, si, _, oc, oi)| (sc, si) != (oc, oi))
            .collect();
        graph("g", &edges)
    })
}

/// Multiset of `(sub, pred, obj)` keys.
fn bag(g: &SceneGraph, dedup: bool) -> HashMap<(EntityInstance, u32, EntityInstance), usize> {
    let mut out = HashMap::new();
    for q in &g.quintuples {
        let c = out.entry((q.sub, q.pred.0, q.obj)).or_insert(0);
        *c = if dedup { 1 } else { *c + 1 };
    }
    out
}

/// Matched GT quintuples when `pairs` (gt -> pred) is applied, by rewriting
/// predicted endpoints into GT names and intersecting multisets.
pub fn matched_under(gt: &SceneGraph, pred: &SceneGraph, pairs: &[(EntityInstance, EntityInstance)], dedup_gt: bool) -> usize {
    let back: HashMap<EntityInstance, EntityInstance> = pairs.iter().map(|(g, p)| (*p, *g)).collect();
    let mut renamed: HashMap<(EntityInstance, u32, EntityInstance), usize> = HashMap::new();
    for q in &pred.quintuples {
        if let (Some(s), Some(o)) = (back.get(&q.sub), back.get(&q.obj)) {
            *renamed.entry((*s, q.pred.0, *o)).or_insert(0) += 1;
        }
    }
    bag(gt, dedup_gt)
        .iter()
        .map(|(k, c)| (*c).min(renamed.get(k).copied().unwrap_or(0)))
        .sum()
}

fn by_class(g: &SceneGraph) -> BTreeMap<u32, Vec<EntityInstance>> {
    let mut out: BTreeMap<u32, Vec<EntityInstance>> = BTreeMap::new();
    for n in g.nodes() {
        out.entry(n.cls.0).or_default().push(n);
    }
    out
}

/// Every maximal class-consistent injection, as per-GT-node slots in sorted
/// GT order, built from plain permutations.
pub fn maximal_injections(gt: &SceneGraph, pred: &SceneGraph) -> (Vec<EntityInstance>, Vec<Vec<Option<EntityInstance>>>) {
    let gt_nodes: Vec<EntityInstance> = gt.nodes().into_iter().collect();
    let pred_classes = by_class(pred);
    let mut per_class: Vec<(Vec<usize>, Vec<Slots>)> = Vec::new();
    for (cls, members) in by_class(gt) {
        let positions: Vec<usize> = members
            .iter()
            .map(|m| gt_nodes.iter().position(|n| n == m).unwrap())
            .collect();
        let avail = pred_classes.get(&cls).cloned().unwrap_or_default();
        let mut pool: Vec<Option<EntityInstance>> = avail.iter().copied().map(Some).collect();
        pool.extend(std::iter::repeat_n(None, members.len().saturating_sub(avail.len())));
        let options: BTreeSet<Vec<Option<EntityInstance>>> =
            pool.into_iter().permutations(members.len()).collect();
        per_class.push((positions, options.into_iter().collect()));
    }
    let mut all = vec![vec![None; gt_nodes.len()]];
    for (positions, options) in &per_class {
        let mut next = Vec::new();
        for partial in &all {
            for opt in options {
                let mut slots = partial.clone();
                for (pos, v) in positions.iter().zip(opt) {
                    slots[*pos] = *v;
                }
                next.push(slots);
            }
        }
        all = next;
    }
    (gt_nodes, all)
}

/// Best matched count, and the lexicographically smallest pair list that
/// reaches it (mapped before unmapped at each GT node).
pub fn brute_force(gt: &SceneGraph, pred: &SceneGraph, dedup_gt: bool) -> (usize, Vec<(EntityInstance, EntityInstance)>) {
    let (gt_nodes, all) = maximal_injections(gt, pred);
    let key = |slots: &Vec<Option<EntityInstance>>| -> Vec<(u8, Option<EntityInstance>)> {
        slots.iter().map(|s| (s.is_none() as u8, *s)).collect()
    };
    let mut best: Option<(usize, Vec<Option<EntityInstance>>)> = None;
    for slots in all {
        let pairs: Vec<_> = gt_nodes
            .iter()
            .zip(&slots)
            .filter_map(|(g, p)| p.map(|p| (*g, p)))
            .collect();
        let m = matched_under(gt, pred, &pairs, dedup_gt);
        let better = match &best {
            None => true,
            Some((bm, bs)) => m > *bm || (m == *bm && key(&slots) < key(bs)),
        };
        if better {
            best = Some((m, slots));
        }
    }
    let (m, slots) = best.unwrap();
    let pairs = gt_nodes
        .iter()
        .zip(&slots)
        .filter_map(|(g, p)| p.map(|p| (*g, p)))
        .collect();
    (m, pairs)
}

/// Copy of `g` with instance ids permuted within each class by `seed`.
pub fn permuted(g: &SceneGraph, seed: u64) -> SceneGraph {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut relabel = HashMap::new();
    for (_, members) in by_class(g) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (a, b) in members.into_iter().zip(shuffled) {
            relabel.insert(a, b);
        }
    }
    SceneGraph::new(
        g.image_id.clone(),
        g.quintuples
            .iter()
            .map(|q| Quintuple {
                sub: relabel[&q.sub],
                obj: relabel[&q.obj],
                ..*q
            })
            .collect(),
    )
}

pub fn max_class_count(gt: &SceneGraph, pred: &SceneGraph) -> usize {
    let a = by_class(gt).values().map(Vec::len).max().unwrap_or(0);
    let b = by_class(pred).values().map(Vec::len).max().unwrap_or(0);
    a.max(b).max(1)
}
