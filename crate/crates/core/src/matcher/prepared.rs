use std::collections::{BTreeMap, HashMap};

use crate::graph::{ClassId, Direction, EntityInstance, NeighborTuple, PredicateId, SceneGraph};

/// One distinct relation key with its multiplicity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub sub: u32,
    pub obj: u32,
    pub pred: PredicateId,
    pub count: u32,
}

impl Edge {
    /// The endpoint opposite `v` (itself for a self-loop) and the direction seen from `v`.
    #[inline]
    pub fn other(&self, v: u32) -> (u32, Direction) {
        if self.sub == v {
            (self.obj, Direction::Out)
        } else {
            (self.sub, Direction::In)
        }
    }
}

/// Index-based view of a scene graph used by all matchers.
#[derive(Debug)]
pub(crate) struct Prepared {
    /// Sorted by (class, instance index).
    pub nodes: Vec<EntityInstance>,
    pub index: HashMap<EntityInstance, u32>,
    pub edges: Vec<Edge>,
    pub incident: Vec<Vec<u32>>,
    pub lookup: HashMap<(u32, PredicateId, u32), u32>,
    pub by_class: BTreeMap<ClassId, Vec<u32>>,
    /// Quintuple count, after optional deduplication.
    pub total: usize,
}

impl Prepared {
    pub fn new(g: &SceneGraph, dedup: bool) -> Self {
        let nodes: Vec<EntityInstance> = g.nodes().into_iter().collect();
        let index: HashMap<EntityInstance, u32> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();

        let mut lookup: HashMap<(u32, PredicateId, u32), u32> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for q in &g.quintuples {
            let key = (index[&q.sub], q.pred, index[&q.obj]);
            match lookup.get(&key) {
                Some(&e) => {
                    if !dedup {
                        edges[e as usize].count += 1;
                    }
                }
                None => {
                    lookup.insert(key, edges.len() as u32);
                    edges.push(Edge {
                        sub: key.0,
                        obj: key.2,
                        pred: key.1,
                        count: 1,
                    });
                }
            }
        }
        // Replace edge ids by counts in the lookup table.
        for v in lookup.values_mut() {
            *v = edges[*v as usize].count;
        }

        let mut incident = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            incident[e.sub as usize].push(i as u32);
            if e.obj != e.sub {
                incident[e.obj as usize].push(i as u32);
            }
        }

        let mut by_class: BTreeMap<ClassId, Vec<u32>> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            by_class.entry(n.cls).or_default().push(i as u32);
        }

        let total = edges.iter().map(|e| e.count as usize).sum();
        Self {
            nodes,
            index,
            edges,
            incident,
            lookup,
            by_class,
            total,
        }
    }

    #[inline]
    pub fn class_of(&self, v: u32) -> ClassId {
        self.nodes[v as usize].cls
    }

    #[inline]
    pub fn count(&self, sub: u32, pred: PredicateId, obj: u32) -> u32 {
        self.lookup.get(&(sub, pred, obj)).copied().unwrap_or(0)
    }

    /// Neighborhood of `v` restricted to edges whose other endpoint passes
    /// `live`, as a sorted list of (tuple, multiplicity).
    pub fn neighborhood(
        &self,
        v: u32,
        directed: bool,
        live: impl Fn(u32) -> bool,
    ) -> Vec<(NeighborTuple, u32)> {
        let mut out: Vec<(NeighborTuple, u32)> = self.incident[v as usize]
            .iter()
            .filter_map(|&e| {
                let edge = &self.edges[e as usize];
                let (other, dir) = edge.other(v);
                live(other).then(|| {
                    (
                        NeighborTuple {
                            pred: edge.pred,
                            cls: self.class_of(other),
                            dir: directed.then_some(dir),
                        },
                        edge.count,
                    )
                })
            })
            .collect();
        out.sort_unstable_by_key(|(t, _)| *t);
        // Merge equal tuples.
        out.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        out
    }

    /// Quintuples touching `v` whose other endpoint passes `live`.
    pub fn live_degree(&self, v: u32, live: impl Fn(u32) -> bool) -> usize {
        self.incident[v as usize]
            .iter()
            .map(|&e| &self.edges[e as usize])
            .filter(|e| live(e.other(v).0))
            .map(|e| e.count as usize)
            .sum()
    }
}

/// Size of the multiset intersection of two merged neighborhoods.
pub(crate) fn intersection(a: &[(NeighborTuple, u32)], b: &[(NeighborTuple, u32)]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += a[i].1.min(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Matched quintuple count of a complete assignment `gt node -> pred node`.
pub(crate) fn matched_count(gt: &Prepared, pred: &Prepared, assign: &[Option<u32>]) -> usize {
    gt.edges
        .iter()
        .filter_map(|e| {
            let s = assign[e.sub as usize]?;
            let o = assign[e.obj as usize]?;
            Some(e.count.min(pred.count(s, e.pred, o)) as usize)
        })
        .sum()
}
