use crate::error::Result;
use crate::graph::SceneGraph;

use super::assignment::max_weight_assignment;
use super::prepared::{intersection, matched_count, Prepared};
use super::{InstanceMapping, MatchConfig};

/// Per-class assignment maximizing summed overlap scores, with default settings.
pub fn first_order_match(gt: &SceneGraph, pred: &SceneGraph) -> InstanceMapping {
    first_order_match_with(gt, pred, &MatchConfig::default()).expect("default config is valid")
}

/// One-shot node-to-node assignment: each class is solved independently on
/// the full-graph overlap scores, without looking at how the choices
/// interact.
pub fn first_order_match_with(gt: &SceneGraph, pred: &SceneGraph, cfg: &MatchConfig) -> Result<InstanceMapping> {
    cfg.validate()?;
    let gtp = Prepared::new(gt, cfg.dedup_gt);
    let pp = Prepared::new(pred, false);
    let directed = cfg.directed_neighborhood;
    let mut assign = vec![None; gtp.nodes.len()];

    for (cls, gt_nodes) in &gtp.by_class {
        let Some(pred_nodes) = pp.by_class.get(cls) else { continue };
        let pred_nbhds: Vec<_> = pred_nodes.iter().map(|&q| pp.neighborhood(q, directed, |_| true)).collect();
        let weights: Vec<Vec<f64>> = gt_nodes
            .iter()
            .map(|&g| {
                let gn = gtp.neighborhood(g, directed, |_| true);
                let size: u32 = gn.iter().map(|(_, c)| c).sum();
                pred_nbhds
                    .iter()
                    .map(|pn| {
                        if size == 0 {
                            0.0
                        } else {
                            f64::from(intersection(&gn, pn)) / f64::from(size)
                        }
                    })
                    .collect()
            })
            .collect();
        for (row, col) in max_weight_assignment(&weights).into_iter().enumerate() {
            assign[gt_nodes[row] as usize] = col.map(|c| pred_nodes[c]);
        }
    }

    let matched = matched_count(&gtp, &pp, &assign);
    Ok(InstanceMapping::from_assignment(&gtp, &pp, &assign, matched))
}
