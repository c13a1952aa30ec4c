//! Graph-to-graph retrieval: rank a gallery of scene graphs against a query
//! by matched F1.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClassId, PredicateId, SceneGraph};
use crate::matcher::MatchConfig;
use crate::metrics::precision_recall_f1;

#[derive(Clone, Debug, Default)]
pub struct Gallery {
    entries: Vec<(String, SceneGraph)>,
}

impl Gallery {
    pub fn new(entries: Vec<(String, SceneGraph)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateImageId(id.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// Uses each graph's image id as its gallery id.
    pub fn from_graphs(graphs: Vec<SceneGraph>) -> Result<Self> {
        Self::new(graphs.into_iter().map(|g| (g.image_id.clone(), g)).collect())
    }

    pub fn entries(&self) -> &[(String, SceneGraph)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// F1 of the candidate scored against the query as ground truth.
pub fn similarity(query: &SceneGraph, candidate: &SceneGraph, cfg: &MatchConfig) -> Result<f64> {
    Ok(precision_recall_f1(query, candidate, cfg)?.f1)
}

/// Gallery entries by descending similarity, ties by ascending id, cut to `top_n`.
pub fn rank(query: &SceneGraph, gallery: &Gallery, cfg: &MatchConfig, top_n: usize) -> Result<Vec<(String, f64)>> {
    let mut scored = gallery
        .entries
        .par_iter()
        .map(|(id, g)| Ok((id.clone(), similarity(query, g, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    sort_ranking(&mut scored);
    scored.truncate(top_n);
    Ok(scored)
}

fn sort_ranking(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

type LabelTriple = (ClassId, PredicateId, ClassId);

fn label_bag(g: &SceneGraph) -> HashMap<LabelTriple, usize> {
    let mut bag = HashMap::new();
    for q in &g.quintuples {
        *bag.entry((q.sub.cls, q.pred, q.obj.cls)).or_insert(0) += 1;
    }
    bag
}

/// Upper bound on [`similarity`]: any mapping matches at most the shared
/// (class, predicate, class) label triples.
fn similarity_bound(query: &SceneGraph, query_bag: &HashMap<LabelTriple, usize>, candidate: &SceneGraph, cfg: &MatchConfig) -> f64 {
    let cand = candidate.deduplicated();
    let gt_total = if cfg.dedup_gt { query.deduplicated().len() } else { query.len() };
    if gt_total == 0 || cand.is_empty() {
        // Cheap to score exactly; force evaluation.
        return f64::INFINITY;
    }
    let shared: usize = label_bag(&cand)
        .iter()
        .map(|(k, c)| {
            let q = query_bag.get(k).copied().unwrap_or(0);
            let q = if cfg.dedup_gt { q.min(1) } else { q };
            q.min(*c)
        })
        .sum();
    2.0 * shared as f64 / (gt_total + cand.len()) as f64
}

/// Same result as [`rank`], but candidates are scored in order of a label
/// overlap bound and scoring stops once no remaining candidate can enter
/// the top `top_n`.
pub fn rank_pruned(query: &SceneGraph, gallery: &Gallery, cfg: &MatchConfig, top_n: usize) -> Result<Vec<(String, f64)>> {
    if top_n == 0 {
        return Ok(Vec::new());
    }
    let query_bag = label_bag(query);
    let mut bounded: Vec<(f64, usize)> = gallery
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, (_, g))| (similarity_bound(query, &query_bag, g, cfg), i))
        .collect();
    bounded.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    const BATCH: usize = 64;
    let mut kept: Vec<(String, f64)> = Vec::new();
    for chunk in bounded.chunks(BATCH) {
        if kept.len() >= top_n {
            let threshold = kept[top_n - 1].1;
            // A bound equal to the threshold can still win on the id tie-break.
            if chunk[0].0 < threshold {
                break;
            }
        }
        let scored = chunk
            .par_iter()
            .map(|&(_, i)| {
                let (id, g) = &gallery.entries[i];
                Ok((id.clone(), similarity(query, g, cfg)?))
            })
            .collect::<Result<Vec<_>>>()?;
        kept.extend(scored);
        sort_ranking(&mut kept);
        kept.truncate(top_n);
    }
    Ok(kept)
}

/// A query with the gallery id it was derived from.
#[derive(Clone, Debug)]
pub struct RetrievalQuery {
    pub query_id: String,
    pub target_id: String,
    pub graph: SceneGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedQuery {
    pub query_id: String,
    pub target_id: String,
    /// 1-based position of the target in the full ranking, if it made the cut.
    pub target_rank: Option<usize>,
    pub ranked: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub queries: usize,
    pub gallery_size: usize,
    /// Fraction of queries whose target appears within the top K.
    pub recall: BTreeMap<usize, f64>,
    pub results: Vec<RankedQuery>,
}

/// Ranks every query and reports retrieval Recall@K for each `k`.
pub fn benchmark(
    queries: &[RetrievalQuery],
    gallery: &Gallery,
    cfg: &MatchConfig,
    ks: &[usize],
    top_n: usize,
) -> Result<RetrievalSummary> {
    let depth = ks.iter().copied().max().unwrap_or(0).max(top_n);
    let results = queries
        .iter()
        .map(|q| {
            let ranked = rank_pruned(&q.graph, gallery, cfg, depth)?;
            let target_rank = ranked.iter().position(|(id, _)| *id == q.target_id).map(|p| p + 1);
            Ok(RankedQuery {
                query_id: q.query_id.clone(),
                target_id: q.target_id.clone(),
                target_rank,
                ranked: ranked.into_iter().take(top_n).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let recall = ks
        .iter()
        .map(|&k| {
            let hits = results.iter().filter(|r| r.target_rank.is_some_and(|p| p <= k)).count();
            let rate = if results.is_empty() { 0.0 } else { hits as f64 / results.len() as f64 };
            (k, rate)
        })
        .collect();
    Ok(RetrievalSummary {
        queries: queries.len(),
        gallery_size: gallery.len(),
        recall,
        results,
    })
}
