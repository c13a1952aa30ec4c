//! Heuristic tree search.
//!
//! Ground-truth instances are visited one at a time, highest degree first.
//! For each one the same-class predicted instances that are still free are
//! ranked by neighborhood overlap and the best `B` of them become branches.
//! Every completed branch is a full mapping; the one with the most matched
//! quintuples wins.
//!
//! The search is exact with respect to that tree: subtrees are cut only when
//! an admissible upper bound on their matched count proves that no leaf below
//! can beat (or tie-break ahead of) the best leaf found so far.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{ClassId, PredicateId, SceneGraph};

use super::prepared::{intersection, Prepared};
use super::{slot_key, InstanceMapping, MatchConfig};

/// Best-recall mapping over the branches explored with `cfg.branching_factor`.
pub fn hts_match(gt: &SceneGraph, pred: &SceneGraph, cfg: &MatchConfig) -> Result<InstanceMapping> {
    cfg.validate()?;
    let gtp = Prepared::new(gt, cfg.dedup_gt);
    let pp = Prepared::new(pred, false);
    let mut search = Search::new(&gtp, &pp, cfg);
    search.descend(0)?;
    let best = search.best.take().expect("the search tree always has a leaf");
    Ok(InstanceMapping::from_assignment(&gtp, &pp, &best.assign, best.matched))
}

struct Leaf {
    matched: usize,
    assign: Vec<Option<u32>>,
}

struct Search<'a> {
    gt: &'a Prepared,
    pred: &'a Prepared,
    cfg: &'a MatchConfig,
    order: Vec<u32>,
    visited: Vec<bool>,
    assign: Vec<Option<u32>>,
    used: Vec<bool>,
    gt_left: HashMap<ClassId, usize>,
    matched: usize,
    leaves: usize,
    best: Option<Leaf>,
}

impl<'a> Search<'a> {
    fn new(gt: &'a Prepared, pred: &'a Prepared, cfg: &'a MatchConfig) -> Self {
        let order = visit_order(gt, cfg.reduced_neighborhoods);
        let gt_left = gt.by_class.iter().map(|(c, v)| (*c, v.len())).collect();
        Self {
            gt,
            pred,
            cfg,
            order,
            visited: vec![false; gt.nodes.len()],
            assign: vec![None; gt.nodes.len()],
            used: vec![false; pred.nodes.len()],
            gt_left,
            matched: 0,
            leaves: 0,
            best: None,
        }
    }

    fn descend(&mut self, depth: usize) -> Result<()> {
        if depth == self.order.len() {
            return self.complete();
        }
        if self.can_prune(depth) {
            return Ok(());
        }

        let u = self.order[depth];
        let cls = self.gt.class_of(u);
        let options = self.branch_options(u, cls);

        *self.gt_left.get_mut(&cls).unwrap() -= 1;
        self.visited[u as usize] = true;
        for option in options {
            let gain = match option {
                Some(q) => {
                    self.used[q as usize] = true;
                    self.assign[u as usize] = Some(q);
                    self.gain(u, q)
                }
                None => 0,
            };
            self.matched += gain;
            let outcome = self.descend(depth + 1);
            self.matched -= gain;
            if let Some(q) = option {
                self.used[q as usize] = false;
                self.assign[u as usize] = None;
            }
            outcome?;
        }
        self.visited[u as usize] = false;
        *self.gt_left.get_mut(&cls).unwrap() += 1;
        Ok(())
    }

    /// Candidates for `u` in branch order, truncated to the branching factor.
    /// "No partner" is appended when the class has more unvisited
    /// ground-truth instances than free predicted ones, so that every
    /// maximal mapping stays reachable.
    fn branch_options(&self, u: u32, cls: ClassId) -> Vec<Option<u32>> {
        let directed = self.cfg.directed_neighborhood;
        let reduced = self.cfg.reduced_neighborhoods;
        let free: Vec<u32> = self
            .pred
            .by_class
            .get(&cls)
            .map(|v| v.iter().copied().filter(|&q| !self.used[q as usize]).collect())
            .unwrap_or_default();

        let gt_nbhd = self
            .gt
            .neighborhood(u, directed, |o| !reduced || !self.visited[o as usize]);
        let mut scored: Vec<(u32, u32)> = free
            .iter()
            .map(|&q| {
                let shared = if gt_nbhd.is_empty() {
                    0
                } else {
                    let nbhd = self
                        .pred
                        .neighborhood(q, directed, |o| !reduced || !self.used[o as usize]);
                    intersection(&gt_nbhd, &nbhd)
                };
                (q, shared)
            })
            .collect();
        // The overlap denominator is |gt_nbhd| for every candidate, so the
        // shared count orders them exactly.
        scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut options: Vec<Option<u32>> = scored.into_iter().map(|(q, _)| Some(q)).collect();
        if self.gt_left[&cls] > free.len() {
            options.push(None);
        }
        options.truncate(self.cfg.branching_factor);
        options
    }

    /// Quintuples newly determined by mapping `u -> q`.
    fn gain(&self, u: u32, q: u32) -> usize {
        let mut gain = 0;
        for &e in &self.gt.incident[u as usize] {
            let edge = &self.gt.edges[e as usize];
            let key = if edge.sub == edge.obj {
                (q, edge.pred, q)
            } else {
                let (other, _) = edge.other(u);
                let Some(o) = self.assign[other as usize] else { continue };
                if edge.sub == u {
                    (q, edge.pred, o)
                } else {
                    (o, edge.pred, q)
                }
            };
            gain += edge.count.min(self.pred.count(key.0, key.1, key.2)) as usize;
        }
        gain
    }

    fn complete(&mut self) -> Result<()> {
        self.leaves += 1;
        if self.leaves > self.cfg.max_branches {
            return Err(Error::BranchBudgetExceeded {
                limit: self.cfg.max_branches,
            });
        }
        let better = match &self.best {
            None => true,
            Some(best) => {
                self.matched > best.matched
                    || (self.matched == best.matched && lex_less(&self.assign, &best.assign))
            }
        };
        if better {
            self.best = Some(Leaf {
                matched: self.matched,
                assign: self.assign.clone(),
            });
        }
        Ok(())
    }

    fn can_prune(&self, depth: usize) -> bool {
        let Some(best) = &self.best else { return false };
        let bound = self.upper_bound(depth);
        if bound != best.matched {
            return bound < best.matched;
        }
        // Equal bound: only a lexicographically smaller mapping could still win.
        for g in 0..self.assign.len() {
            if !self.visited[g] {
                return false;
            }
            match slot_key(self.assign[g]).cmp(&slot_key(best.assign[g])) {
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Greater => return true,
                std::cmp::Ordering::Equal => {}
            }
        }
        true
    }

    /// Matched so far plus an optimistic count for every undetermined
    /// ground-truth quintuple.
    fn upper_bound(&self, depth: usize) -> usize {
        let mut bound = self.matched;

        // Edges from a mapped instance to an unvisited one can only be served
        // by edges from its partner to a free predicted instance.
        for &g in &self.order[..depth] {
            let Some(p) = self.assign[g as usize] else { continue };
            let gn = self.gt.neighborhood(g, true, |o| !self.visited[o as usize]);
            if gn.is_empty() {
                continue;
            }
            let pn = self.pred.neighborhood(p, true, |o| !self.used[o as usize]);
            bound += intersection(&gn, &pn) as usize;
        }

        // Edges between two unvisited instances, pooled by class signature.
        let mut pool: HashMap<(ClassId, PredicateId, ClassId, bool), (usize, usize)> = HashMap::new();
        for e in &self.gt.edges {
            if !self.visited[e.sub as usize] && !self.visited[e.obj as usize] {
                let key = (self.gt.class_of(e.sub), e.pred, self.gt.class_of(e.obj), e.sub == e.obj);
                pool.entry(key).or_default().0 += e.count as usize;
            }
        }
        if !pool.is_empty() {
            for e in &self.pred.edges {
                if !self.used[e.sub as usize] && !self.used[e.obj as usize] {
                    let key = (self.pred.class_of(e.sub), e.pred, self.pred.class_of(e.obj), e.sub == e.obj);
                    if let Some(slot) = pool.get_mut(&key) {
                        slot.1 += e.count as usize;
                    }
                }
            }
            bound += pool.values().map(|(g, p)| g.min(p)).sum::<usize>();
        }
        bound
    }
}

pub(super) fn lex_less(a: &[Option<u32>], b: &[Option<u32>]) -> bool {
    a.iter().map(|s| slot_key(*s)).lt(b.iter().map(|s| slot_key(*s)))
}

/// Highest degree first, ties by (class, instance). With reduced graphs the
/// degree only counts edges to instances not yet visited; since visiting
/// never depends on the prediction, the order is fixed up front.
fn visit_order(gt: &Prepared, reduced: bool) -> Vec<u32> {
    let n = gt.nodes.len() as u32;
    if !reduced {
        let mut order: Vec<u32> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(gt.live_degree(v, |_| true)), v));
        return order;
    }
    let mut removed = vec![false; n as usize];
    let mut order = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !removed[v as usize])
            .max_by_key(|&v| (gt.live_degree(v, |o| !removed[o as usize]), std::cmp::Reverse(v)))
            .expect("unvisited node remains");
        removed[next as usize] = true;
        order.push(next);
    }
    order
}
