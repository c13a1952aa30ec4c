use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{ClassId, SceneGraph};

use super::hts::lex_less;
use super::prepared::Prepared;
use super::InstanceMapping;

/// Largest number of candidate mappings [`exhaustive_match`] will enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Number of maximal class-consistent injections between the two node sets.
pub fn search_space_size(gt: &SceneGraph, pred: &SceneGraph) -> f64 {
    per_class_counts(&Prepared::new(gt, false), &Prepared::new(pred, false))
        .iter()
        .map(|&(_, g, p)| falling_factorial(g.max(p), g.min(p)))
        .product()
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn per_class_counts(gt: &Prepared, pred: &Prepared) -> Vec<(ClassId, usize, usize)> {
    gt.by_class
        .iter()
        .map(|(c, v)| (*c, v.len(), pred.by_class.get(c).map_or(0, Vec::len)))
        .collect()
}

/// Exact best mapping by enumeration, with multiset ground truth.
pub fn exhaustive_match(gt: &SceneGraph, pred: &SceneGraph) -> Result<InstanceMapping> {
    exhaustive_match_with(gt, pred, false, EXHAUSTIVE_LIMIT)
}

/// Enumerates every maximal class-consistent injection (a mapping that
/// leaves a ground-truth instance unpaired only when its class has run out
/// of predicted instances) and keeps the best one.
pub fn exhaustive_match_with(gt: &SceneGraph, pred: &SceneGraph, dedup_gt: bool, limit: f64) -> Result<InstanceMapping> {
    let gtp = Prepared::new(gt, dedup_gt);
    let pp = Prepared::new(pred, false);
    let counts = per_class_counts(&gtp, &pp);
    let size: f64 = counts
        .iter()
        .map(|&(_, g, p)| falling_factorial(g.max(p), g.min(p)))
        .product();
    if size > limit {
        return Err(Error::SearchSpaceTooLarge { size, limit, counts });
    }

    let mut state = Enumeration {
        gt: &gtp,
        pred: &pp,
        assign: vec![None; gtp.nodes.len()],
        used: vec![false; pp.nodes.len()],
        gt_left: counts.iter().map(|&(c, g, _)| (c, g)).collect(),
        pred_left: counts.iter().map(|&(c, _, p)| (c, p)).collect(),
        best_matched: 0,
        best: None,
    };
    state.visit(0, 0);
    let best = state.best.expect("enumeration always completes one mapping");
    let matched = state.best_matched;
    Ok(InstanceMapping::from_assignment(&gtp, &pp, &best, matched))
}

struct Enumeration<'a> {
    gt: &'a Prepared,
    pred: &'a Prepared,
    assign: Vec<Option<u32>>,
    used: Vec<bool>,
    gt_left: HashMap<ClassId, usize>,
    pred_left: HashMap<ClassId, usize>,
    best_matched: usize,
    best: Option<Vec<Option<u32>>>,
}

impl Enumeration<'_> {
    fn visit(&mut self, g: usize, matched: usize) {
        if g == self.gt.nodes.len() {
            let better = match &self.best {
                None => true,
                Some(best) => {
                    matched > self.best_matched || (matched == self.best_matched && lex_less(&self.assign, best))
                }
            };
            if better {
                self.best_matched = matched;
                self.best = Some(self.assign.clone());
            }
            return;
        }

        let cls = self.gt.nodes[g].cls;
        let may_skip = self.gt_left[&cls] > self.pred_left[&cls];
        *self.gt_left.get_mut(&cls).unwrap() -= 1;

        if let Some(candidates) = self.pred.by_class.get(&cls) {
            for &q in candidates {
                if self.used[q as usize] {
                    continue;
                }
                self.used[q as usize] = true;
                *self.pred_left.get_mut(&cls).unwrap() -= 1;
                self.assign[g] = Some(q);
                let gain = self.gain(g as u32, q);
                self.visit(g + 1, matched + gain);
                self.assign[g] = None;
                *self.pred_left.get_mut(&cls).unwrap() += 1;
                self.used[q as usize] = false;
            }
        }
        if may_skip {
            self.visit(g + 1, matched);
        }
        *self.gt_left.get_mut(&cls).unwrap() += 1;
    }

    /// Edges between `g` and earlier (already decided) nodes, plus self-loops.
    fn gain(&self, g: u32, q: u32) -> usize {
        self.gt.incident[g as usize]
            .iter()
            .map(|&e| &self.gt.edges[e as usize])
            .filter_map(|e| {
                let s = if e.sub == g { Some(q) } else if e.sub < g { self.assign[e.sub as usize] } else { None }?;
                let o = if e.obj == g { Some(q) } else if e.obj < g { self.assign[e.obj as usize] } else { None }?;
                Some(e.count.min(self.pred.count(s, e.pred, o)) as usize)
            })
            .sum()
    }
}
