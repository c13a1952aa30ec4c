//! Instance matching between a ground-truth and a predicted scene graph.
//!
//! Predicted instance indices carry no meaning of their own, so before any
//! recall can be computed the predicted instances have to be aligned with the
//! ground-truth ones. Three matchers are provided:
//!
//! * [`hts_match`]: heuristic tree search with a branching factor, the
//!   default evaluator.
//! * [`exhaustive_match`]: enumerates every maximal class-consistent
//!   injection; exact, used as an oracle.
//! * [`first_order_match`]: per-class optimal assignment on local overlap
//!   scores, a one-shot baseline that ignores global consistency.
//!
//! All three return the mapping with the most matched ground-truth
//! quintuples. Ties are broken by the lexicographically smallest list of
//! `(gt, pred)` pairs sorted by ground-truth instance.

mod assignment;
mod exhaustive;
mod first_order;
mod hts;
mod prepared;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClassId, EntityInstance, NeighborTuple, Quintuple, SceneGraph};

pub use assignment::max_weight_assignment;
pub use exhaustive::{exhaustive_match, exhaustive_match_with, search_space_size, EXHAUSTIVE_LIMIT};
pub use first_order::{first_order_match, first_order_match_with};
pub use hts::hts_match;

use prepared::Prepared;

/// Tree-search settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Number of top-scoring candidates explored per ground-truth instance.
    pub branching_factor: usize,
    /// Include edge direction in neighborhood tuples.
    pub directed_neighborhood: bool,
    /// Upper limit on completed search branches.
    pub max_branches: usize,
    /// Score candidates and order ground-truth instances on the graphs with
    /// already-visited instances removed, instead of on the full graphs.
    pub reduced_neighborhoods: bool,
    /// Count ground-truth quintuples as a set rather than a multiset.
    pub dedup_gt: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            branching_factor: 3,
            directed_neighborhood: false,
            max_branches: 1_000_000,
            reduced_neighborhoods: false,
            dedup_gt: false,
        }
    }
}

impl MatchConfig {
    pub fn with_branching_factor(branching_factor: usize) -> Self {
        Self {
            branching_factor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching_factor == 0 {
            return Err(Error::InvalidConfig("branching factor must be at least 1".into()));
        }
        if self.max_branches == 0 {
            return Err(Error::InvalidConfig("max_branches must be at least 1".into()));
        }
        Ok(())
    }
}

/// Injective, class-consistent partial map from ground-truth instances to
/// predicted instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMapping {
    /// Sorted by ground-truth instance.
    pub pairs: Vec<(EntityInstance, EntityInstance)>,
    /// Ground-truth instances left without a partner.
    pub unmatched_gt: Vec<EntityInstance>,
    /// Ground-truth quintuples reproduced by the mapped prediction.
    pub matched: usize,
    /// Ground-truth quintuple count (a set count when `dedup_gt` is on).
    pub gt_total: usize,
    pub recall: f64,
}

impl InstanceMapping {
    fn from_assignment(gt: &Prepared, pred: &Prepared, assign: &[Option<u32>], matched: usize) -> Self {
        let mut pairs = Vec::new();
        let mut unmatched_gt = Vec::new();
        for (g, slot) in assign.iter().enumerate() {
            match slot {
                Some(p) => pairs.push((gt.nodes[g], pred.nodes[*p as usize])),
                None => unmatched_gt.push(gt.nodes[g]),
            }
        }
        Self {
            pairs,
            unmatched_gt,
            matched,
            gt_total: gt.total,
            recall: ratio(matched, gt.total),
        }
    }

    pub fn get(&self, gt: EntityInstance) -> Option<EntityInstance> {
        self.pairs
            .binary_search_by_key(&gt, |(g, _)| *g)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.pairs.iter().all(|(_, p)| seen.insert(*p))
    }

    pub fn is_class_consistent(&self) -> bool {
        self.pairs.iter().all(|(g, p)| g.cls == p.cls)
    }
}

/// Matched fraction, with an empty ground truth counting as fully recalled.
pub(crate) fn ratio(matched: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        matched as f64 / total as f64
    }
}

/// Slot ordering used for tie-breaks: a mapped instance sorts before an
/// unmapped one, mapped instances by predicted node index.
pub(crate) fn slot_key(slot: Option<u32>) -> u64 {
    slot.map_or(u64::MAX, u64::from)
}

/// `|gt ∩ pred| / |gt|` on neighborhood multisets. Returns 0 for an empty
/// ground-truth neighborhood.
pub fn overlap_score(gt_nbhd: &[NeighborTuple], pred_nbhd: &[NeighborTuple]) -> f64 {
    if gt_nbhd.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<NeighborTuple, usize> = HashMap::new();
    for t in pred_nbhd {
        *counts.entry(*t).or_insert(0) += 1;
    }
    let mut shared = 0;
    for t in gt_nbhd {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared as f64 / gt_nbhd.len() as f64
}

/// Relabels predicted instances onto their ground-truth partners. Predicted
/// instances without a partner get fresh indices above every ground-truth
/// index of their class.
pub fn apply_mapping(pred: &SceneGraph, m: &InstanceMapping) -> SceneGraph {
    let mut relabel: HashMap<EntityInstance, EntityInstance> =
        m.pairs.iter().map(|(g, p)| (*p, *g)).collect();

    let mut next_free: BTreeMap<ClassId, u32> = BTreeMap::new();
    for g in m.pairs.iter().map(|(g, _)| g).chain(&m.unmatched_gt) {
        let slot = next_free.entry(g.cls).or_insert(0);
        *slot = (*slot).max(g.idx + 1);
    }
    for n in pred.nodes() {
        relabel.entry(n).or_insert_with(|| {
            let slot = next_free.entry(n.cls).or_insert(0);
            *slot += 1;
            EntityInstance {
                cls: n.cls,
                idx: *slot - 1,
            }
        });
    }

    SceneGraph {
        image_id: pred.image_id.clone(),
        quintuples: pred
            .quintuples
            .iter()
            .map(|q| Quintuple {
                sub: relabel[&q.sub],
                obj: relabel[&q.obj],
                ..*q
            })
            .collect(),
    }
}

/// Recomputes the matched count of an arbitrary mapping from scratch.
pub fn mapping_matched(gt: &SceneGraph, pred: &SceneGraph, pairs: &[(EntityInstance, EntityInstance)], dedup_gt: bool) -> usize {
    let gtp = Prepared::new(gt, dedup_gt);
    let pp = Prepared::new(pred, false);
    let mut assign = vec![None; gtp.nodes.len()];
    for (g, p) in pairs {
        if let (Some(&gi), Some(&pi)) = (gtp.index.get(g), pp.index.get(p)) {
            assign[gi as usize] = Some(pi);
        }
    }
    prepared::matched_count(&gtp, &pp, &assign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ClassId, PredicateId};

    fn t(pred: u32, cls: u32) -> NeighborTuple {
        NeighborTuple {
            pred: PredicateId(pred),
            cls: ClassId(cls),
            dir: None,
        }
    }

    #[test]
    fn overlap_examples() {
        let n = vec![t(0, 1), t(1, 2), t(2, 3)];
        assert_eq!(overlap_score(&n, &n), 1.0);
        assert_eq!(overlap_score(&[t(0, 1), t(0, 1), t(1, 2)], &[t(0, 1)]), 1.0 / 3.0);
        assert_eq!(overlap_score(&[t(0, 1)], &[t(1, 1), t(0, 2)]), 0.0);
        assert_eq!(overlap_score(&[], &[t(0, 1)]), 0.0);
    }

    #[test]
    fn overlap_is_order_independent() {
        let gt = vec![t(1, 2), t(0, 1), t(0, 1)];
        let pred = vec![t(0, 1), t(3, 3), t(1, 2)];
        assert!((overlap_score(&gt, &pred) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn apply_identity_and_swap() {
        let a0 = EntityInstance::new(0, 0);
        let a1 = EntityInstance::new(0, 1);
        let b0 = EntityInstance::new(1, 0);
        let pred = SceneGraph::new("x", vec![Quintuple::new(a0, 0, b0), Quintuple::new(a1, 1, b0)]);
        let identity = InstanceMapping {
            pairs: vec![(a0, a0), (a1, a1), (b0, b0)],
            unmatched_gt: vec![],
            matched: 0,
            gt_total: 0,
            recall: 1.0,
        };
        assert_eq!(apply_mapping(&pred, &identity), pred);

        let swap = InstanceMapping {
            pairs: vec![(a0, a1), (a1, a0), (b0, b0)],
            ..identity
        };
        let swapped = apply_mapping(&pred, &swap);
        assert_eq!(swapped.quintuples[0].sub, a1);
        assert_eq!(swapped.quintuples[1].sub, a0);
    }

    #[test]
    fn apply_gives_unmatched_fresh_indices() {
        let a0 = EntityInstance::new(0, 0);
        let a1 = EntityInstance::new(0, 1);
        let a3 = EntityInstance::new(0, 3);
        let b0 = EntityInstance::new(1, 0);
        let pred = SceneGraph::new("x", vec![Quintuple::new(a0, 0, b0), Quintuple::new(a1, 0, b0)]);
        let m = InstanceMapping {
            pairs: vec![(a0, a1), (b0, b0)],
            unmatched_gt: vec![a3],
            matched: 0,
            gt_total: 0,
            recall: 0.0,
        };
        let out = apply_mapping(&pred, &m);
        // pred a1 -> gt a0; pred a0 is unmatched and must avoid gt indices 0 and 3.
        assert_eq!(out.quintuples[1].sub, a0);
        assert_eq!(out.quintuples[0].sub, EntityInstance::new(0, 4));
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig::default().validate().is_ok());
        assert!(MatchConfig::with_branching_factor(0).validate().is_err());
        assert_eq!(MatchConfig::default().branching_factor, 3);
    }
}
