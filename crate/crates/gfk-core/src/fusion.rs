//! CADe candidate post-processing (lung filter, centroid merging) and the
//! gaze-conditioned combination of candidates with radiologist marks.

use serde::{Deserialize, Serialize};

use crate::analytics::attention_time;
use crate::attention::AttentionVolume;
use crate::error::{Error, Result};
use crate::evaluation::{match_marks, MatchParams, UNION_DEDUP_MM};
use crate::model::{distance_mm, Candidate, Mark, MarkKind, MarkSource, NoduleTruth, NonNodule};
use crate::volume::{LungMask, ScanVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Add every thresholded candidate.
    All,
    /// Add only candidates the reader barely looked at.
    LowAttention,
}

/// How CADe candidates get folded into a reader's marks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FusionPolicy {
    pub mode: FusionMode,
    /// Candidates below this normalized attention time are added in
    /// low-attention mode.
    pub attention_threshold: f64,
    /// Candidates below this score are discarded before fusion.
    pub score_threshold: f64,
    /// Calibration target for the operating point, FP per scan.
    pub fp_budget_per_scan: f64,
}

impl Default for FusionPolicy {
    fn default() -> Self {
        FusionPolicy {
            mode: FusionMode::All,
            attention_threshold: 0.10,
            score_threshold: 0.0,
            fp_budget_per_scan: 0.34,
        }
    }
}

impl FusionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.attention_threshold) {
            return Err(Error::Parameter(format!(
                "attention threshold {} outside [0, 1]",
                self.attention_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Parameter(format!(
                "score threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

fn merge_threshold(a: &Candidate, b: &Candidate) -> f64 {
    // half the mean of the two bounding boxes' max dimensions
    (a.max_bbox_dim() + b.max_bbox_dim()) / 4.0
}

/// Drop candidates whose centroid lies outside the lung mask, then merge
/// candidate pairs closer than half the mean of their bbox max-dimensions
/// until fixpoint. Pairs merge in ascending distance order (ties by id);
/// a merged candidate keeps the lower id, the averaged centroid, the max
/// score and the elementwise-max bbox.
pub fn postprocess_candidates(
    cands: &[Candidate],
    mask: &LungMask,
    scan: &ScanVolume,
) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = cands
        .iter()
        .filter(|c| {
            scan.world_to_voxel((c.centroid_mm[0], c.centroid_mm[1], c.centroid_mm[2]))
                .map(|(x, y, z)| mask.contains(x as i64, y as i64, z as i64))
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    // keep id order == index order so pair ties resolve on indices
    kept.sort_by(|a, b| a.id.cmp(&b.id));

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..kept.len() {
            for j in (i + 1)..kept.len() {
                let d = distance_mm(kept[i].centroid_mm, kept[j].centroid_mm);
                if d >= merge_threshold(&kept[i], &kept[j]) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        (d, &kept[i].id, &kept[j].id) < (*bd, &kept[*bi].id, &kept[*bj].id)
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let (a, b) = (kept[i].clone(), kept[j].clone());
        let merged = Candidate {
            id: a.id.clone(),
            scan_id: a.scan_id.clone(),
            centroid_mm: [
                (a.centroid_mm[0] + b.centroid_mm[0]) / 2.0,
                (a.centroid_mm[1] + b.centroid_mm[1]) / 2.0,
                (a.centroid_mm[2] + b.centroid_mm[2]) / 2.0,
            ],
            bbox_mm: [a.bbox_mm[0].max(b.bbox_mm[0]), a.bbox_mm[1].max(b.bbox_mm[1])],
            score: a.score.max(b.score),
        };
        kept.remove(j);
        kept.remove(i);
        kept.push(merged);
        kept.sort_by(|x, y| x.id.cmp(&y.id));
    }
    kept
}

/// Smallest score threshold whose kept candidates (score >= threshold)
/// produce at most `target_fp_per_scan` false positives per scan.
///
/// Candidate thresholds are swept over the observed scores plus {0, 1};
/// an unattainable target (FPs remain above target even at threshold 1.0)
/// is a calibration error.
pub fn calibrate_operating_point(
    scans: &[(Vec<NoduleTruth>, Vec<Candidate>, Vec<NonNodule>)],
    target_fp_per_scan: f64,
    params: MatchParams,
) -> Result<f64> {
    if scans.is_empty() {
        return Err(Error::Calibration("no calibration scans".into()));
    }
    if target_fp_per_scan < 0.0 {
        return Err(Error::Calibration("target FP/scan must be non-negative".into()));
    }
    let mut thresholds: Vec<f64> = scans
        .iter()
        .flat_map(|(_, cands, _)| cands.iter().map(|c| c.score))
        .chain([0.0, 1.0])
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let fp_per_scan_at = |threshold: f64| -> f64 {
        let total_fp: usize = scans
            .iter()
            .map(|(truths, cands, nns)| {
                let marks: Vec<Mark> = cands
                    .iter()
                    .filter(|c| c.score >= threshold)
                    .map(|c| candidate_to_mark(c, "cade"))
                    .collect();
                match_marks(truths, &marks, nns, params).fp.len()
            })
            .sum();
        total_fp as f64 / scans.len() as f64
    };

    for &threshold in &thresholds {
        if fp_per_scan_at(threshold) <= target_fp_per_scan {
            return Ok(threshold);
        }
    }
    Err(Error::Calibration(format!(
        "no threshold reaches {target_fp_per_scan} FP/scan (even 1.0 leaves {:.3})",
        fp_per_scan_at(1.0)
    )))
}

/// Represent a CADe candidate as a mark for evaluation or fusion.
pub fn candidate_to_mark(c: &Candidate, annotator: &str) -> Mark {
    Mark {
        id: format!("cade-{}", c.id),
        scan_id: c.scan_id.clone(),
        annotator: annotator.to_string(),
        centroid_mm: c.centroid_mm,
        kind: MarkKind::Nodule,
        scores: None,
        source: MarkSource::Cade,
    }
}

/// Combine a reader's marks with CADe candidates under the policy.
///
/// Radiologist marks are always kept. A candidate is added when its score
/// clears the policy threshold, it is not within 1 mm of an existing mark,
/// and - in low-attention mode - the reader spent less than
/// `attention_threshold` normalized attention time on its cylinder
/// (diameter 5.2 cm, height = bbox max dimension).
pub fn fuse(
    marks: &[Mark],
    cands: &[Candidate],
    att: Option<&AttentionVolume>,
    scan: &ScanVolume,
    total_time: f64,
    policy: &FusionPolicy,
) -> Result<Vec<Mark>> {
    policy.validate()?;
    let att = match policy.mode {
        FusionMode::All => None,
        FusionMode::LowAttention => Some(att.ok_or_else(|| {
            Error::Config("low-attention fusion requires an attention volume".into())
        })?),
    };

    let mut out = marks.to_vec();
    for c in cands {
        if c.score < policy.score_threshold {
            continue;
        }
        if let Some(att) = att {
            let (_, t_norm) =
                attention_time(att, scan, c.centroid_mm, c.max_bbox_dim(), total_time)?;
            if t_norm >= policy.attention_threshold {
                continue;
            }
        }
        let duplicate =
            out.iter().any(|m| distance_mm(m.centroid_mm, c.centroid_mm) <= UNION_DEDUP_MM);
        if !duplicate {
            out.push(candidate_to_mark(c, "cade"));
        }
    }
    Ok(out)
}
