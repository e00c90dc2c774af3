//! Rotated-detection evaluation: greedy matching, average precision, mAP and
//! the confusion matrix.
//!
//! Matching follows PASCAL VOC semantics with rotated IoU: detections are
//! visited in descending score, each claims its best-overlapping unmatched
//! ground truth when the IoU reaches the threshold, and matches against
//! `difficult` objects are ignored rather than counted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RotatedBox;
use crate::overlap::{rotated_iou, PreparedBox};

pub const DEFAULT_IOU_THR: f64 = 0.5;
pub const DEFAULT_CONFUSION_SCORE_THR: f64 = 0.3;

/// Slack for comparing a recall value against an 11-point threshold, so that
/// e.g. recall 3/10 counts at threshold 0.3.
const RECALL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("records span several images or categories ({0})")]
    MixedImageOrCategory(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub rbox: RotatedBox,
    pub category: String,
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub rbox: RotatedBox,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchLabel {
    Tp,
    Fp,
    /// Matched a difficult ground truth; neither TP nor FP.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// 11-point interpolated AP (PASCAL VOC 2007, DOTA v1.0).
    #[default]
    Voc07,
    /// Area under the monotone precision envelope.
    Continuous,
}

impl std::str::FromStr for ApMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "voc07" => Ok(Self::Voc07),
            "continuous" => Ok(Self::Continuous),
            other => Err(format!("unknown AP mode `{other}` (expected voc07 or continuous)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// One label per detection, aligned with the input order.
    pub labels: Vec<MatchLabel>,
    /// Whether each ground truth was claimed by a TP.
    pub gt_matched: Vec<bool>,
}

fn check_thr(thr: f64) -> Result<(), EvalError> {
    if (0.0..=1.0).contains(&thr) {
        Ok(())
    } else {
        Err(EvalError::InvalidThreshold(thr))
    }
}

/// Indices of `scores` sorted by descending score; ties keep input order.
fn score_rank(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

fn match_group(dets: &[&DetectionRecord], gts: &[&GroundTruthRecord], iou_thr: f64) -> MatchResult {
    let gt_boxes: Vec<PreparedBox> = gts.iter().map(|g| PreparedBox::new(&g.rbox)).collect();
    let mut labels = vec![MatchLabel::Fp; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for di in score_rank(dets.iter().map(|d| d.score)) {
        let db = PreparedBox::new(&dets[di].rbox);
        let mut best: Option<(usize, f64)> = None;
        for (gi, gb) in gt_boxes.iter().enumerate() {
            if gt_matched[gi] {
                continue;
            }
            let iou = crate::overlap::prepared_iou(&db, gb);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        labels[di] = match best {
            Some((gi, iou)) if iou >= iou_thr => {
                if gts[gi].difficult {
                    MatchLabel::Ignored
                } else {
                    gt_matched[gi] = true;
                    MatchLabel::Tp
                }
            }
            _ => MatchLabel::Fp,
        };
    }
    MatchResult { labels, gt_matched }
}

/// Matches the detections of one (image, category) group against its ground
/// truth.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_thr: f64,
) -> Result<MatchResult, EvalError> {
    check_thr(iou_thr)?;
    let mut keys = dets
        .iter()
        .map(|d| (d.image_id.as_str(), d.category.as_str()))
        .chain(gts.iter().map(|g| (g.image_id.as_str(), g.category.as_str())));
    if let Some(first) = keys.next() {
        if let Some(other) = keys.find(|k| *k != first) {
            return Err(EvalError::MixedImageOrCategory(format!("{}/{} vs {}/{}", first.0, first.1, other.0, other.1)));
        }
    }
    let d: Vec<&DetectionRecord> = dets.iter().collect();
    let g: Vec<&GroundTruthRecord> = gts.iter().collect();
    Ok(match_group(&d, &g, iou_thr))
}

/// Cumulative `(recall, precision)` points for score-ordered TP/FP labels.
/// `Ignored` labels are skipped.
pub fn pr_curve(labels: &[MatchLabel], num_gt: usize) -> Vec<(f64, f64)> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut out = Vec::with_capacity(labels.len());
    for l in labels {
        match l {
            MatchLabel::Tp => tp += 1,
            MatchLabel::Fp => fp += 1,
            MatchLabel::Ignored => continue,
        }
        let recall = if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 };
        out.push((recall, tp as f64 / (tp + fp) as f64));
    }
    out
}

/// Average precision of a score-ordered label list. `None` when `num_gt` is 0
/// (AP undefined).
pub fn average_precision(labels: &[MatchLabel], num_gt: usize, mode: ApMode) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let curve = pr_curve(labels, num_gt);
    let ap = match mode {
        ApMode::Voc07 => {
            let sum: f64 = (0..=10)
                .map(|i| {
                    let t = i as f64 / 10.0;
                    curve.iter().filter(|(r, _)| *r >= t - RECALL_EPS).map(|&(_, p)| p).fold(0.0, f64::max)
                })
                .sum();
            sum / 11.0
        }
        ApMode::Continuous => {
            let mut recall = Vec::with_capacity(curve.len() + 2);
            let mut precision = Vec::with_capacity(curve.len() + 2);
            recall.push(0.0);
            precision.push(0.0);
            for &(r, p) in &curve {
                recall.push(r);
                precision.push(p);
            }
            recall.push(1.0);
            precision.push(0.0);
            for i in (0..precision.len() - 1).rev() {
                precision[i] = precision[i].max(precision[i + 1]);
            }
            (1..recall.len())
                .filter(|&i| recall[i] != recall[i - 1])
                .map(|i| (recall[i] - recall[i - 1]) * precision[i])
                .sum()
        }
    };
    Some(ap.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub category: String,
    pub num_gt: usize,
    pub num_det: usize,
    pub ap: f64,
}

/// `(C+1) x (C+1)` counts; rows are ground-truth classes, columns detected
/// classes, and index `C` is background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn background(&self) -> usize {
        self.categories.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// CSV with a header row `gt\det,<categories...>,background`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gt\\det");
        for c in &self.categories {
            let _ = write!(out, ",{c}");
        }
        out.push_str(",background\n");
        let names = self.categories.iter().map(String::as_str).chain(["background"]);
        for (name, row) in names.zip(&self.counts) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thr: f64,
    pub mode: ApMode,
    /// Only categories with at least one non-difficult ground truth.
    pub per_class_ap: BTreeMap<String, f64>,
    pub map: f64,
    pub classes: Vec<ClassSummary>,
    pub pr_curves: BTreeMap<String, Vec<(f64, f64)>>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    /// Per-class rows `category,num_gt,num_det,ap` followed by an `mAP` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,num_gt,num_det,ap\n");
        for c in &self.classes {
            let _ = writeln!(out, "{},{},{},{:.6}", c.category, c.num_gt, c.num_det, c.ap);
        }
        let gt: usize = self.classes.iter().map(|c| c.num_gt).sum();
        let det: usize = self.classes.iter().map(|c| c.num_det).sum();
        let _ = writeln!(out, "mAP,{gt},{det},{:.6}", self.map);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Full evaluation over a dataset.
///
/// Detections are matched per (image, category), then pooled per category in
/// descending score (ties by position in `dets`) to build PR curves. The
/// confusion matrix uses the sorted union of categories and
/// [`DEFAULT_CONFUSION_SCORE_THR`].
pub fn evaluate(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_thr: f64,
    mode: ApMode,
) -> Result<EvalReport, EvalError> {
    check_thr(iou_thr)?;
    // (image, category) -> (detection indices, ground truth)
    type Group<'a> = (Vec<usize>, Vec<&'a GroundTruthRecord>);
    let mut groups: BTreeMap<(&str, &str), Group> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry((&d.image_id, &d.category)).or_default().0.push(i);
    }
    for g in gts {
        groups.entry((&g.image_id, &g.category)).or_default().1.push(g);
    }

    let mut labels = vec![MatchLabel::Fp; dets.len()];
    for (det_idx, group_gts) in groups.values() {
        let group_dets: Vec<&DetectionRecord> = det_idx.iter().map(|&i| &dets[i]).collect();
        let res = match_group(&group_dets, group_gts, iou_thr);
        for (&i, l) in det_idx.iter().zip(res.labels) {
            labels[i] = l;
        }
    }

    let mut num_gt: BTreeMap<&str, usize> = BTreeMap::new();
    for g in gts {
        let n = num_gt.entry(&g.category).or_default();
        if !g.difficult {
            *n += 1;
        }
    }
    let mut by_cat: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_cat.entry(&d.category).or_default().push(i);
    }

    let mut per_class_ap = BTreeMap::new();
    let mut pr_curves = BTreeMap::new();
    let mut classes = Vec::new();
    for (&cat, &n_gt) in &num_gt {
        if n_gt == 0 {
            continue;
        }
        let idx = by_cat.get(cat).map(Vec::as_slice).unwrap_or(&[]);
        let ranked: Vec<MatchLabel> =
            score_rank(idx.iter().map(|&i| dets[i].score)).into_iter().map(|k| labels[idx[k]]).collect();
        let ap = average_precision(&ranked, n_gt, mode).unwrap_or(0.0);
        per_class_ap.insert(cat.to_string(), ap);
        pr_curves.insert(cat.to_string(), pr_curve(&ranked, n_gt));
        classes.push(ClassSummary { category: cat.to_string(), num_gt: n_gt, num_det: idx.len(), ap });
    }
    let map =
        if per_class_ap.is_empty() { 0.0 } else { per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64 };

    let vocab: BTreeSet<&str> =
        gts.iter().map(|g| g.category.as_str()).chain(dets.iter().map(|d| d.category.as_str())).collect();
    let vocab: Vec<String> = vocab.into_iter().map(str::to_string).collect();
    let confusion = confusion_matrix(dets, gts, &vocab, iou_thr, DEFAULT_CONFUSION_SCORE_THR)?;

    Ok(EvalReport { iou_thr, mode, per_class_ap, map, classes, pr_curves, confusion })
}

/// Class-agnostic confusion analysis.
///
/// Per image, detections scoring at least `score_thr` are paired with ground
/// truth greedily by descending IoU (ties: ground-truth order, then detection
/// order), counting only pairs with IoU ≥ `iou_thr`.
pub fn confusion_matrix(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    categories: &[String],
    iou_thr: f64,
    score_thr: f64,
) -> Result<ConfusionMatrix, EvalError> {
    check_thr(iou_thr)?;
    let index: HashMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let class_of = |c: &str| index.get(c).copied().ok_or_else(|| EvalError::UnknownCategory(c.to_string()));

    let bg = categories.len();
    let mut counts = vec![vec![0u64; bg + 1]; bg + 1];

    let mut images: BTreeMap<&str, (Vec<&GroundTruthRecord>, Vec<&DetectionRecord>)> = BTreeMap::new();
    for g in gts {
        class_of(&g.category)?;
        images.entry(&g.image_id).or_default().0.push(g);
    }
    for d in dets {
        class_of(&d.category)?;
        if d.score >= score_thr {
            images.entry(&d.image_id).or_default().1.push(d);
        }
    }

    for (img_gts, img_dets) in images.values() {
        let mut pairs = Vec::new();
        for (gi, g) in img_gts.iter().enumerate() {
            for (di, d) in img_dets.iter().enumerate() {
                let iou = rotated_iou(&g.rbox, &d.rbox);
                if iou >= iou_thr && iou > 0.0 {
                    pairs.push((iou, gi, di));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut gt_used = vec![false; img_gts.len()];
        let mut det_used = vec![false; img_dets.len()];
        for (_, gi, di) in pairs {
            if gt_used[gi] || det_used[di] {
                continue;
            }
            gt_used[gi] = true;
            det_used[di] = true;
            counts[class_of(&img_gts[gi].category)?][class_of(&img_dets[di].category)?] += 1;
        }
        for (g, used) in img_gts.iter().zip(&gt_used) {
            if !used {
                counts[class_of(&g.category)?][bg] += 1;
            }
        }
        for (d, used) in img_dets.iter().zip(&det_used) {
            if !used {
                counts[bg][class_of(&d.category)?] += 1;
            }
        }
    }
    Ok(ConfusionMatrix { categories: categories.to_vec(), counts })
}
