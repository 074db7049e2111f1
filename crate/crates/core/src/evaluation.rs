//! IOU-based matching of detections to ground truth and precision / recall /
//! F1 scoring.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::io::PageRecord;

/// Detections count as correct at or above this IOU.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub detection: usize,
    pub groundtruth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_groundtruth: Vec<usize>,
}

fn canonical_order(boxes: &[BBox]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..boxes.len()).collect();
    idx.sort_by_key(|&i| (boxes[i].to_array(), i));
    idx
}

/// Greedy one-to-one matching in descending IOU order among pairs reaching
/// `iou_threshold`.
///
/// Both inputs are first put in a canonical order (by box coordinates), and
/// equal IOUs are resolved by that order, so the matched boxes do not depend
/// on how the inputs were listed. Returned indices refer to the caller's
/// original ordering.
pub fn match_detections(dets: &[BBox], gts: &[BBox], iou_threshold: f64) -> MatchResult {
    let det_order = canonical_order(dets);
    let gt_order = canonical_order(gts);

    let mut candidates = Vec::new();
    for (di, &d) in det_order.iter().enumerate() {
        for (gi, &g) in gt_order.iter().enumerate() {
            let score = iou(&dets[d], &gts[g]);
            if score >= iou_threshold {
                candidates.push((score, di, gi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (score, di, gi) in candidates {
        if det_used[di] || gt_used[gi] {
            continue;
        }
        det_used[di] = true;
        gt_used[gi] = true;
        pairs.push(MatchPair {
            detection: det_order[di],
            groundtruth: gt_order[gi],
            iou: score,
        });
    }

    let unmatched = |order: &[usize], used: &[bool]| -> Vec<usize> {
        let mut v: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(_, &i)| i)
            .collect();
        v.sort_unstable();
        v
    };
    MatchResult {
        unmatched_detections: unmatched(&det_order, &det_used),
        unmatched_groundtruth: unmatched(&gt_order, &gt_used),
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Metrics from raw counts.
    ///
    /// Conventions for empty denominators: precision is 1 without
    /// detections, recall is 1 without ground truth, and F1 is 0 when
    /// precision and recall are both 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// The two-line text summary printed by the command-line tool.
    pub fn summary(&self) -> String {
        format!(
            "tp {} fp {} fn {}\nprecision {:.6} recall {:.6} f1 {:.6}",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1
        )
    }
}

pub fn compute_metrics(result: &MatchResult, num_dets: usize, num_gts: usize) -> Metrics {
    let tp = result.pairs.len();
    debug_assert!(tp <= num_dets && tp <= num_gts);
    Metrics::from_counts(tp, num_dets - tp, num_gts - tp)
}

/// Region kinds taking part in an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KindFilter {
    /// `table` detections against `table` ground truth
    #[default]
    TablesOnly,
    /// `table` and `tabular_structure` on both sides
    WithStructures,
}

impl KindFilter {
    pub fn accepts(&self, kind: &str) -> bool {
        match self {
            KindFilter::TablesOnly => kind == "table",
            KindFilter::WithStructures => kind == "table" || kind == "tabular_structure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    /// fail on page sets that differ instead of warning
    pub strict: bool,
    pub kinds: KindFilter,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            strict: false,
            kinds: KindFilter::TablesOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageOutcome {
    pub page: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub iou_threshold: f64,
    pub metrics: Metrics,
    pub pages: Vec<PageOutcome>,
}

fn boxes_of(page: &PageRecord, kinds: KindFilter) -> Vec<BBox> {
    page.regions
        .iter()
        .filter(|r| kinds.accepts(&r.kind))
        .map(|r| r.bbox)
        .collect()
}

fn index_pages(pages: &[PageRecord]) -> Result<BTreeMap<&str, &PageRecord>> {
    let mut map = BTreeMap::new();
    for p in pages {
        if map.insert(p.page.as_str(), p).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate page id `{}`",
                p.page
            )));
        }
    }
    Ok(map)
}

/// Micro-averaged metrics over a corpus: per-page counts are summed and the
/// ratios computed once.
///
/// A detection page without ground truth is an error in strict mode and is
/// skipped with a warning otherwise. A ground-truth page without detections
/// is an error in strict mode and counts all its regions as misses otherwise.
pub fn evaluate_corpus(
    detections: &[PageRecord],
    groundtruth: &[PageRecord],
    opts: &EvalOptions,
) -> Result<CorpusReport> {
    if !(opts.iou_threshold > 0.0 && opts.iou_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "iou_threshold must lie in (0, 1], got {}",
            opts.iou_threshold
        )));
    }
    let dets = index_pages(detections)?;
    let gts = index_pages(groundtruth)?;

    for page in dets.keys() {
        if !gts.contains_key(page) {
            if opts.strict {
                return Err(Error::UnknownPage((*page).to_string()));
            }
            warn!("skipping detections for page `{page}`: no ground truth");
        }
    }
    if opts.strict {
        if let Some(page) = gts.keys().find(|p| !dets.contains_key(*p)) {
            return Err(Error::MissingPage((*page).to_string()));
        }
    }

    let all_pages: BTreeSet<&str> = gts.keys().copied().collect();
    let mut outcomes = Vec::with_capacity(all_pages.len());
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for page in all_pages {
        let gt_boxes = boxes_of(gts[page], opts.kinds);
        let det_boxes = dets
            .get(page)
            .map(|d| boxes_of(d, opts.kinds))
            .unwrap_or_default();
        let m = match_detections(&det_boxes, &gt_boxes, opts.iou_threshold);
        let page_m = compute_metrics(&m, det_boxes.len(), gt_boxes.len());
        tp += page_m.tp;
        fp += page_m.fp;
        fn_ += page_m.fn_;
        outcomes.push(PageOutcome {
            page: page.to_string(),
            tp: page_m.tp,
            fp: page_m.fp,
            fn_: page_m.fn_,
        });
    }
    Ok(CorpusReport {
        iou_threshold: opts.iou_threshold,
        metrics: Metrics::from_counts(tp, fp, fn_),
        pages: outcomes,
    })
}
