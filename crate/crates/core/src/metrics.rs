//! Recall@K, precision and F1 for location-free predictions.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::top_k_unique;
use crate::error::{Error, Result};
use crate::graph::SceneGraph;
use crate::matcher::{hts_match, MatchConfig};

/// Matched fraction of `gt` after aligning the top-`k` unique predictions.
/// An empty ground truth scores 1.
pub fn recall_at_k(gt: &SceneGraph, pred: &SceneGraph, k: usize, cfg: &MatchConfig) -> Result<f64> {
    let top = top_k_unique(pred, k);
    Ok(hts_match(gt, &top, cfg)?.recall)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecall {
    pub fn new(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 on the full graphs. Repeated predictions are
/// collapsed before matching, so the precision denominator counts unique
/// predicted quintuples.
pub fn precision_recall_f1(gt: &SceneGraph, pred: &SceneGraph, cfg: &MatchConfig) -> Result<PrecisionRecall> {
    let unique = pred.deduplicated();
    let m = hts_match(gt, &unique, cfg)?;
    let precision = match (unique.len(), m.gt_total) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => m.matched as f64 / n as f64,
    };
    Ok(PrecisionRecall::new(precision, m.recall))
}

/// What to compute in [`evaluate_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub cfg: MatchConfig,
    /// Also score the full prediction for precision/recall/F1.
    pub with_precision: bool,
    /// Record matcher wall time per image. Timings make reports
    /// non-reproducible, so they are off by default.
    pub record_timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ks: vec![20, 50, 100],
            cfg: MatchConfig::default(),
            with_precision: false,
            record_timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub image_id: String,
    pub recall: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PrecisionRecall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matcher_time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub images: usize,
    /// Macro average of per-image Recall@K.
    pub recall: BTreeMap<usize, f64>,
    /// Macro-averaged precision and recall; F1 is their harmonic mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PrecisionRecall>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregate: Aggregate,
    /// Sorted by image id.
    pub per_image: Vec<ImageEval>,
}

/// Scores every ground-truth image. Images without a prediction are scored
/// against an empty prediction. Per-image work runs on the current rayon
/// pool; the report does not depend on scheduling.
pub fn evaluate_dataset(gt_set: &[SceneGraph], pred_set: &[SceneGraph], opts: &EvalOptions) -> Result<EvalReport> {
    opts.cfg.validate()?;
    if opts.ks.contains(&0) {
        return Err(Error::InvalidConfig("K must be positive".into()));
    }

    let mut gt_ids: HashMap<&str, &SceneGraph> = HashMap::with_capacity(gt_set.len());
    for g in gt_set {
        if gt_ids.insert(&g.image_id, g).is_some() {
            return Err(Error::DuplicateImageId(g.image_id.clone()));
        }
    }
    let mut preds: HashMap<&str, &SceneGraph> = HashMap::with_capacity(pred_set.len());
    for p in pred_set {
        if !gt_ids.contains_key(p.image_id.as_str()) {
            return Err(Error::UnknownImageId(p.image_id.clone()));
        }
        if preds.insert(&p.image_id, p).is_some() {
            return Err(Error::DuplicateImageId(p.image_id.clone()));
        }
    }

    let mut ordered: Vec<&SceneGraph> = gt_set.iter().collect();
    ordered.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let empty = SceneGraph::default();
    let per_image = ordered
        .par_iter()
        .map(|gt| {
            let pred = preds.get(gt.image_id.as_str()).copied().unwrap_or(&empty);
            evaluate_image(gt, pred, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        aggregate: aggregate(&per_image, opts),
        per_image,
    })
}

fn evaluate_image(gt: &SceneGraph, pred: &SceneGraph, opts: &EvalOptions) -> Result<ImageEval> {
    let start = Instant::now();
    let mut recall = BTreeMap::new();
    for &k in &opts.ks {
        recall.insert(k, recall_at_k(gt, pred, k, &opts.cfg)?);
    }
    let scores = if opts.with_precision {
        Some(precision_recall_f1(gt, pred, &opts.cfg)?)
    } else {
        None
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(ImageEval {
        image_id: gt.image_id.clone(),
        recall,
        scores,
        matcher_time_ms: opts.record_timings.then_some(elapsed),
    })
}

fn aggregate(per_image: &[ImageEval], opts: &EvalOptions) -> Aggregate {
    let n = per_image.len();
    let mean = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        if n == 0 {
            0.0
        } else {
            values.sum::<f64>() / n as f64
        }
    };
    let recall = opts
        .ks
        .iter()
        .map(|&k| (k, mean(&mut per_image.iter().map(|e| e.recall[&k]))))
        .collect();
    let scores = opts.with_precision.then(|| {
        PrecisionRecall::new(
            mean(&mut per_image.iter().filter_map(|e| e.scores).map(|s| s.precision)),
            mean(&mut per_image.iter().filter_map(|e| e.scores).map(|s| s.recall)),
        )
    });
    Aggregate {
        images: n,
        recall,
        scores,
    }
}
