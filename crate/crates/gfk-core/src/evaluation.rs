//! Detection matching, sensitivity / FP-per-scan metrics, and annotator-set
//! combination.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance_mm, Mark, NoduleTruth, NonNodule};

/// Matching rule parameters. The default hit criterion is the literal
/// "distance less than the nodule's diameter"; `use_radius` switches the
/// threshold to the equivalent radius instead.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatchParams {
    pub use_radius: bool,
}

impl MatchParams {
    fn hit_distance(&self, truth: &NoduleTruth) -> f64 {
        if self.use_radius {
            truth.equivalent_radius_mm
        } else {
            truth.diameter_mm()
        }
    }
}

/// Outcome of matching one scan's marks against its ground truth.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// (truth id, mark id) pairs.
    pub tp: Vec<(String, String)>,
    /// Marks hitting no truth and no listed non-nodule.
    pub fp: Vec<String>,
    /// Truths without a matched mark.
    pub fn_: Vec<String>,
    /// Marks neither TP nor FP: duplicate hits on matched truths and hits
    /// on listed non-nodules.
    pub ignored: Vec<String>,
}

impl MatchOutcome {
    pub fn detected_truths(&self) -> HashSet<&str> {
        self.tp.iter().map(|(t, _)| t.as_str()).collect()
    }
}

/// Match marks to ground-truth nodules.
///
/// A mark can hit a truth when their centroid distance is strictly below the
/// truth's diameter. Assignment is greedy over all eligible (truth, mark)
/// pairs in ascending distance, ties broken by mark id then truth id; each
/// truth and each mark is used at most once. Leftover marks within range of
/// an already-matched truth or of a listed non-nodule are ignored.
pub fn match_marks(
    truths: &[NoduleTruth],
    marks: &[Mark],
    non_nodules: &[NonNodule],
    params: MatchParams,
) -> MatchOutcome {
    // all eligible pairs
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (mi, mark) in marks.iter().enumerate() {
        for (ti, truth) in truths.iter().enumerate() {
            let d = distance_mm(mark.centroid_mm, truth.centroid_mm);
            if d < params.hit_distance(truth) {
                pairs.push((d, mi, ti));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| marks[a.1].id.cmp(&marks[b.1].id))
            .then_with(|| truths[a.2].id.cmp(&truths[b.2].id))
    });

    let mut truth_taken = vec![false; truths.len()];
    let mut mark_taken = vec![false; marks.len()];
    let mut outcome = MatchOutcome::default();

    for &(_, mi, ti) in &pairs {
        if truth_taken[ti] || mark_taken[mi] {
            continue;
        }
        truth_taken[ti] = true;
        mark_taken[mi] = true;
        outcome.tp.push((truths[ti].id.clone(), marks[mi].id.clone()));
    }

    for (ti, truth) in truths.iter().enumerate() {
        if !truth_taken[ti] {
            outcome.fn_.push(truth.id.clone());
        }
    }

    for (mi, mark) in marks.iter().enumerate() {
        if mark_taken[mi] {
            continue;
        }
        let hits_matched_truth = truths.iter().enumerate().any(|(ti, truth)| {
            truth_taken[ti] && distance_mm(mark.centroid_mm, truth.centroid_mm) < params.hit_distance(truth)
        });
        let hits_non_nodule = non_nodules
            .iter()
            .any(|nn| distance_mm(mark.centroid_mm, nn.centroid_mm) < nn.hit_distance_mm());
        if hits_matched_truth || hits_non_nodule {
            outcome.ignored.push(mark.id.clone());
        } else {
            outcome.fp.push(mark.id.clone());
        }
    }

    outcome
}

/// Distance at which marks from different annotators count as the same
/// physical finding during union.
pub const UNION_DEDUP_MM: f64 = 1.0;

/// Union of two annotators' mark sets; B marks within [`UNION_DEDUP_MM`] of
/// an A mark are dropped (A's copy wins).
pub fn combine(marks_a: &[Mark], marks_b: &[Mark]) -> Vec<Mark> {
    let mut merged: Vec<Mark> = marks_a.to_vec();
    for b in marks_b {
        let duplicate = marks_a
            .iter()
            .any(|a| distance_mm(a.centroid_mm, b.centroid_mm) <= UNION_DEDUP_MM);
        if !duplicate {
            merged.push(b.clone());
        }
    }
    merged
}

/// One scan's inputs for evaluation.
#[derive(Debug, Clone)]
pub struct ScanCase {
    pub scan_id: String,
    pub truths: Vec<NoduleTruth>,
    pub marks: Vec<Mark>,
    pub non_nodules: Vec<NonNodule>,
}

/// Per-scan outcome row of an [`EvalReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub scan_id: String,
    pub n_truths: usize,
    pub outcome: MatchOutcome,
}

/// Pooled detection performance over a set of scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub sensitivity: f64,
    pub fp_per_scan: f64,
    pub n_scans: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub scans: Vec<ScanOutcome>,
}

/// Evaluate marks over scans: pooled sensitivity = sum TP / (sum TP + sum FN),
/// fp_per_scan = sum FP / number of scans. Scans are reported in id order.
pub fn evaluate(cases: &[ScanCase], params: MatchParams) -> Result<EvalReport> {
    if cases.is_empty() {
        return Err(Error::Parameter("evaluate requires at least one scan".into()));
    }
    let mut scans: Vec<ScanOutcome> = cases
        .iter()
        .map(|case| ScanOutcome {
            scan_id: case.scan_id.clone(),
            n_truths: case.truths.len(),
            outcome: match_marks(&case.truths, &case.marks, &case.non_nodules, params),
        })
        .collect();
    scans.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));

    let tp: usize = scans.iter().map(|s| s.outcome.tp.len()).sum();
    let fp: usize = scans.iter().map(|s| s.outcome.fp.len()).sum();
    let fn_: usize = scans.iter().map(|s| s.outcome.fn_.len()).sum();
    if tp + fn_ == 0 {
        return Err(Error::NoTruths);
    }

    Ok(EvalReport {
        sensitivity: tp as f64 / (tp + fn_) as f64,
        fp_per_scan: fp as f64 / scans.len() as f64,
        n_scans: scans.len(),
        tp,
        fp,
        fn_,
        scans,
    })
}

impl EvalReport {
    /// Per-truth detection flags over the given truth ids (for paired tests).
    pub fn detection_flags(&self, truth_ids: &[String]) -> Vec<bool> {
        let detected: HashSet<&str> = self
            .scans
            .iter()
            .flat_map(|s| s.outcome.tp.iter().map(|(t, _)| t.as_str()))
            .collect();
        truth_ids.iter().map(|id| detected.contains(id.as_str())).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        Ok(())
    }

    /// CSV with one row per scan plus a pooled summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scan_id,n_truths,tp,fp,fn,ignored,sensitivity,fp_count\n");
        for s in &self.scans {
            let tp = s.outcome.tp.len();
            let fn_ = s.outcome.fn_.len();
            let sens = if tp + fn_ > 0 {
                format!("{:.4}", tp as f64 / (tp + fn_) as f64)
            } else {
                String::from("")
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.scan_id,
                s.n_truths,
                tp,
                s.outcome.fp.len(),
                fn_,
                s.outcome.ignored.len(),
                sens,
                s.outcome.fp.len()
            )
            .unwrap();
        }
        writeln!(
            out,
            "TOTAL,{},{},{},{},,{:.4},{:.4}",
            self.tp + self.fn_,
            self.tp,
            self.fp,
            self.fn_,
            self.sensitivity,
            self.fp_per_scan
        )
        .unwrap();
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
