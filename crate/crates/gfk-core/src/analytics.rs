//! Search-strategy and attention analytics: right-lung probability curve,
//! reading times, per-finding attention time and characterization agreement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionVolume, Region, FOVEAL_DIAMETER_MM};
use crate::error::{Error, Result};
use crate::evaluation::MatchOutcome;
use crate::gaze::VoxelGazePoint;
use crate::model::{CharacteristicScores, Mark, NoduleTruth, ORDINAL_CHARACTERISTICS};
use crate::stats::{student_t_quantile, Z_975};
use crate::volume::{LungMask, ScanVolume, Side};

/// Cylinder height used for FP marks, which carry no equivalent diameter
/// (the 3 mm point-annotation bound).
pub const FP_FINDING_HEIGHT_MM: f64 = 3.0;

/// One reading session's mapped gaze, tagged by reader and scan.
#[derive(Debug, Clone)]
pub struct Session {
    pub annotator: String,
    pub scan_id: String,
    /// In-mask voxel gaze points, sorted by time.
    pub points: Vec<VoxelGazePoint>,
    pub f: f64,
}

impl Session {
    /// Total scan reading time: last minus first gaze timestamp.
    pub fn total_time(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

pub const CURVE_BINS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveBin {
    pub bin: usize,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Sessions contributing points to this bin.
    pub n: usize,
}

/// P(gaze on the right lung) over 100 normalized-time bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RightLungCurve {
    pub bins: Vec<CurveBin>,
}

impl RightLungCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,p,ci_lo,ci_hi,n_sessions\n");
        for b in &self.bins {
            writeln!(out, "{},{:.6},{:.6},{:.6},{}", b.bin, b.p, b.ci_lo, b.ci_hi, b.n).unwrap();
        }
        out
    }
}

fn bin_of(t_norm: f64) -> usize {
    if t_norm <= 0.0 {
        1
    } else {
        (t_norm * CURVE_BINS as f64).ceil().min(CURVE_BINS as f64) as usize
    }
}

/// Per-session right-lung fractions per normalized-time bin, averaged over
/// sessions with a normal-approximation confidence interval at p = 0.05.
///
/// Each session's time axis is normalized by that session's total reading
/// time. Sessions without in-lung points are excluded with a warning; bins
/// average only the sessions that contributed points there.
pub fn right_lung_curve(sessions: &[(&Session, &LungMask)]) -> Result<RightLungCurve> {
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); CURVE_BINS];

    let mut used = 0usize;
    for (session, mask) in sessions {
        if session.points.is_empty() {
            log::warn!(
                "session {}/{} has no in-lung gaze points; excluded from the curve",
                session.annotator,
                session.scan_id
            );
            continue;
        }
        let t0 = session.points.first().unwrap().t;
        let total = session.total_time();
        if total <= 0.0 {
            log::warn!(
                "session {}/{} has zero reading time; excluded from the curve",
                session.annotator,
                session.scan_id
            );
            continue;
        }
        used += 1;
        let mut right = [0usize; CURVE_BINS];
        let mut count = [0usize; CURVE_BINS];
        for p in &session.points {
            let b = bin_of((p.t - t0) / total) - 1;
            count[b] += 1;
            if mask.side_of(p.x as i64, p.y as i64, p.z as i64)? == Side::Right {
                right[b] += 1;
            }
        }
        for b in 0..CURVE_BINS {
            if count[b] > 0 {
                per_bin[b].push(right[b] as f64 / count[b] as f64);
            }
        }
    }
    if used == 0 {
        return Err(Error::EmptySession("no usable sessions for the right-lung curve".into()));
    }

    let bins = per_bin
        .iter()
        .enumerate()
        .map(|(i, fracs)| {
            let n = fracs.len();
            if n == 0 {
                return CurveBin { bin: i + 1, p: f64::NAN, ci_lo: f64::NAN, ci_hi: f64::NAN, n };
            }
            let p = fracs.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (fracs.iter().map(|x| (x - p).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let half = Z_975 * sd / (n as f64).sqrt();
            CurveBin {
                bin: i + 1,
                p,
                ci_lo: (p - half).max(0.0),
                ci_hi: (p + half).min(1.0),
                n,
            }
        })
        .collect();
    Ok(RightLungCurve { bins })
}

/// Reading-time summary for one annotator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadingTimeRow {
    pub annotator: String,
    pub n_sessions: usize,
    pub mean_total_s: f64,
    pub sd_total_s: f64,
    pub mean_right_s: f64,
    pub mean_left_s: f64,
    /// Total right-side seconds over total left-side seconds.
    pub right_left_ratio: f64,
}

/// Per-annotator reading times plus an aggregate `(all)` row. Side time is
/// the side's point count over the sampling frequency.
pub fn reading_time_stats(sessions: &[(&Session, &LungMask)]) -> Result<Vec<ReadingTimeRow>> {
    let mut groups: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (session, mask) in sessions {
        if session.points.is_empty() {
            continue;
        }
        let mut right = 0usize;
        let mut left = 0usize;
        for p in &session.points {
            match mask.side_of(p.x as i64, p.y as i64, p.z as i64)? {
                Side::Right => right += 1,
                Side::Left => left += 1,
            }
        }
        let entry = (session.total_time(), right as f64 / session.f, left as f64 / session.f);
        groups.entry(session.annotator.clone()).or_default().push(entry);
        groups.entry("(all)".to_string()).or_default().push(entry);
    }
    if groups.is_empty() {
        return Err(Error::EmptySession("no sessions with gaze points".into()));
    }

    let mut rows: Vec<ReadingTimeRow> = groups
        .into_iter()
        .map(|(annotator, entries)| {
            let n = entries.len();
            let mean_total = entries.iter().map(|e| e.0).sum::<f64>() / n as f64;
            let sd_total = if n > 1 {
                (entries.iter().map(|e| (e.0 - mean_total).powi(2)).sum::<f64>() / (n - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            let sum_right: f64 = entries.iter().map(|e| e.1).sum();
            let sum_left: f64 = entries.iter().map(|e| e.2).sum();
            ReadingTimeRow {
                annotator,
                n_sessions: n,
                mean_total_s: mean_total,
                sd_total_s: sd_total,
                mean_right_s: sum_right / n as f64,
                mean_left_s: sum_left / n as f64,
                right_left_ratio: if sum_left > 0.0 { sum_right / sum_left } else { f64::INFINITY },
            }
        })
        .collect();
    // keep the aggregate row last
    rows.sort_by(|a, b| {
        (a.annotator == "(all)").cmp(&(b.annotator == "(all)")).then(a.annotator.cmp(&b.annotator))
    });
    Ok(rows)
}

pub fn reading_times_csv(rows: &[ReadingTimeRow]) -> String {
    let mut out = String::from(
        "annotator,n_sessions,mean_total_s,sd_total_s,mean_right_s,mean_left_s,right_left_ratio\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.4}",
            r.annotator,
            r.n_sessions,
            r.mean_total_s,
            r.sd_total_s,
            r.mean_right_s,
            r.mean_left_s,
            r.right_left_ratio
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FindingOutcome {
    Tp,
    Fp,
    Fn,
}

impl FindingOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            FindingOutcome::Tp => "TP",
            FindingOutcome::Fp => "FP",
            FindingOutcome::Fn => "FN",
        }
    }
}

/// Attention spent deciding about one finding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionStat {
    pub finding_id: String,
    pub outcome: FindingOutcome,
    pub t_attention: f64,
    pub t_norm: f64,
}

/// Sum the attention volume inside a cylinder of physical diameter 5.2 cm
/// (the foveal circle) and the given height, centered on the finding's
/// center of mass with its axis along z. Returns (seconds, seconds / T).
pub fn attention_time(
    att: &AttentionVolume,
    scan: &ScanVolume,
    centroid_mm: [f64; 3],
    height_mm: f64,
    total_time: f64,
) -> Result<(f64, f64)> {
    if total_time <= 0.0 {
        return Err(Error::Parameter("total reading time must be positive".into()));
    }
    if height_mm <= 0.0 {
        return Err(Error::Parameter("cylinder height must be positive".into()));
    }
    let (cx, cy, cz) = scan.world_to_voxel_f64((centroid_mm[0], centroid_mm[1], centroid_mm[2]));
    let (sx, sy, sz) = scan.spacing();
    let nz = scan.dims().2;

    let half_h_vox = height_mm / 2.0 / sz;
    let z_lo = (cz - half_h_vox).ceil().max(0.0);
    let z_hi = (cz + half_h_vox).floor().min(nz as f64 - 1.0);
    let t_attention = if z_lo > z_hi {
        log::warn!("finding cylinder at {centroid_mm:?} lies outside the volume");
        0.0
    } else {
        att.attention_at(&Region::CylinderZ {
            center_x_vox: cx,
            center_y_vox: cy,
            radius_x_vox: FOVEAL_DIAMETER_MM / 2.0 / sx,
            radius_y_vox: FOVEAL_DIAMETER_MM / 2.0 / sy,
            z: z_lo as usize..(z_hi as usize + 1),
        })
    };
    Ok((t_attention, t_attention / total_time))
}

/// Attention stats for every finding of one evaluated scan: matched truths
/// are TP, unmatched truths FN, and false-positive marks FP (with the
/// 3 mm default cylinder height).
pub fn finding_attention_stats(
    att: &AttentionVolume,
    scan: &ScanVolume,
    truths: &[NoduleTruth],
    marks: &[Mark],
    outcome: &MatchOutcome,
    total_time: f64,
) -> Result<Vec<AttentionStat>> {
    let mut stats = Vec::new();
    let detected = outcome.detected_truths();
    for truth in truths {
        let (t_att, t_norm) =
            attention_time(att, scan, truth.centroid_mm, truth.diameter_mm(), total_time)?;
        stats.push(AttentionStat {
            finding_id: truth.id.clone(),
            outcome: if detected.contains(truth.id.as_str()) {
                FindingOutcome::Tp
            } else {
                FindingOutcome::Fn
            },
            t_attention: t_att,
            t_norm,
        });
    }
    for fp_id in &outcome.fp {
        let mark = marks
            .iter()
            .find(|m| &m.id == fp_id)
            .ok_or_else(|| Error::Parameter(format!("outcome references unknown mark {fp_id}")))?;
        let (t_att, t_norm) =
            attention_time(att, scan, mark.centroid_mm, FP_FINDING_HEIGHT_MM, total_time)?;
        stats.push(AttentionStat {
            finding_id: mark.id.clone(),
            outcome: FindingOutcome::Fp,
            t_attention: t_att,
            t_norm,
        });
    }
    Ok(stats)
}

/// Mean normalized attention time (%) with a t-distribution confidence
/// interval at p = 0.05, per annotator and outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionTimeRow {
    pub annotator: String,
    pub outcome: FindingOutcome,
    pub n: usize,
    pub mean_pct: f64,
    pub ci_half_width_pct: f64,
}

pub fn attention_time_table(stats: &[(String, AttentionStat)]) -> Vec<AttentionTimeRow> {
    let mut groups: BTreeMap<(String, FindingOutcome), Vec<f64>> = BTreeMap::new();
    for (annotator, stat) in stats {
        groups.entry((annotator.clone(), stat.outcome)).or_default().push(stat.t_norm * 100.0);
    }
    groups
        .into_iter()
        .map(|((annotator, outcome), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n > 1 {
                let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
                    .sqrt();
                student_t_quantile(0.975, (n - 1) as f64) * sd / (n as f64).sqrt()
            } else {
                0.0
            };
            AttentionTimeRow { annotator, outcome, n, mean_pct: mean, ci_half_width_pct: half }
        })
        .collect()
}

/// CSV in the attention-time table layout: one annotator per row, one
/// outcome per column as "mean±ci".
pub fn attention_table_csv(rows: &[AttentionTimeRow]) -> String {
    let mut annotators: Vec<&String> = rows.iter().map(|r| &r.annotator).collect();
    annotators.sort();
    annotators.dedup();
    let mut out = String::from("annotator,TP,FP,FN\n");
    for a in annotators {
        let cell = |o: FindingOutcome| {
            rows.iter()
                .find(|r| &r.annotator == a && r.outcome == o)
                .map(|r| format!("{:.2}±{:.2}", r.mean_pct, r.ci_half_width_pct))
                .unwrap_or_default()
        };
        writeln!(
            out,
            "{},{},{},{}",
            a,
            cell(FindingOutcome::Tp),
            cell(FindingOutcome::Fp),
            cell(FindingOutcome::Fn)
        )
        .unwrap();
    }
    out
}

/// One row of the characterization-agreement table: percentage of matched
/// nodules whose score falls outside mean ± sd of the reference raters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementRow {
    pub label: String,
    /// One percentage per annotator, in table order.
    pub pct: Vec<f64>,
    pub avg: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementTable {
    pub annotators: Vec<String>,
    pub n_nodules: Vec<usize>,
    pub characteristics: Vec<AgreementRow>,
    pub aggregates: Vec<AgreementRow>,
}

/// Pair each annotator's matched marks (carrying scores) with their truths.
pub fn matched_scored_pairs<'a>(
    truths: &'a [NoduleTruth],
    marks: &'a [Mark],
    outcome: &MatchOutcome,
) -> Vec<(&'a NoduleTruth, &'a CharacteristicScores)> {
    outcome
        .tp
        .iter()
        .filter_map(|(tid, mid)| {
            let truth = truths.iter().find(|t| &t.id == tid)?;
            let scores = marks.iter().find(|m| &m.id == mid)?.scores.as_ref()?;
            Some((truth, scores))
        })
        .collect()
}

fn rater_mean_sd(truth: &NoduleTruth, ch: crate::model::OrdinalCharacteristic) -> (f64, f64) {
    let values: Vec<f64> = truth.raters.iter().map(|r| ch.of(r) as f64).collect();
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Aggregate thresholds over the 7 characteristics: All, and the ceilings
/// of 3/4, 1/2 and 1/4 of 7 (>= 6, 4, 2), plus "at least one".
const AGGREGATE_THRESHOLDS: [(usize, &str); 5] = [
    (7, "all_7"),
    (6, "ge_6_of_7"),
    (4, "ge_4_of_7"),
    (2, "ge_2_of_7"),
    (1, "at_least_one"),
];

/// Percentage of matched nodules whose annotator characterization falls
/// outside the reference raters' mean ± sample sd, per characteristic and
/// per aggregate threshold. Annotators without matched scored nodules are
/// excluded.
pub fn characterization_agreement(
    per_annotator: &[(String, Vec<(&NoduleTruth, &CharacteristicScores)>)],
) -> Result<AgreementTable> {
    let included: Vec<&(String, Vec<(&NoduleTruth, &CharacteristicScores)>)> =
        per_annotator.iter().filter(|(_, pairs)| !pairs.is_empty()).collect();
    if included.is_empty() {
        return Err(Error::Parameter(
            "characterization agreement requires at least one annotator with matched scored nodules"
                .into(),
        ));
    }

    let annotators: Vec<String> = included.iter().map(|(a, _)| a.clone()).collect();
    let n_nodules: Vec<usize> = included.iter().map(|(_, p)| p.len()).collect();

    let finish = |label: &str, pct: Vec<f64>| {
        let n = pct.len();
        let avg = pct.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (pct.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        AgreementRow { label: label.to_string(), pct, avg, sd }
    };

    let outside = |truth: &NoduleTruth,
                   scores: &CharacteristicScores,
                   ch: crate::model::OrdinalCharacteristic| {
        let (mean, sd) = rater_mean_sd(truth, ch);
        let v = ch.of(scores) as f64;
        v < mean - sd || v > mean + sd
    };

    let mut characteristics = Vec::new();
    for ch in ORDINAL_CHARACTERISTICS {
        let pct: Vec<f64> = included
            .iter()
            .map(|(_, pairs)| {
                let hits = pairs.iter().filter(|(t, s)| outside(t, s, ch)).count();
                100.0 * hits as f64 / pairs.len() as f64
            })
            .collect();
        characteristics.push(finish(ch.name(), pct));
    }

    let mut aggregates = Vec::new();
    for (k, label) in AGGREGATE_THRESHOLDS {
        let pct: Vec<f64> = included
            .iter()
            .map(|(_, pairs)| {
                let hits = pairs
                    .iter()
                    .filter(|(t, s)| {
                        ORDINAL_CHARACTERISTICS.iter().filter(|ch| outside(t, s, **ch)).count()
                            >= k
                    })
                    .count();
                100.0 * hits as f64 / pairs.len() as f64
            })
            .collect();
        aggregates.push(finish(label, pct));
    }

    Ok(AgreementTable { annotators, n_nodules, characteristics, aggregates })
}

impl AgreementTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("characteristic");
        for (a, n) in self.annotators.iter().zip(&self.n_nodules) {
            write!(out, ",{a} (n={n})").unwrap();
        }
        out.push_str(",avg,sd\n");
        for row in self.characteristics.iter().chain(&self.aggregates) {
            write!(out, "{}", row.label).unwrap();
            for p in &row.pct {
                write!(out, ",{p:.0}").unwrap();
            }
            writeln!(out, ",{:.0},{:.0}", row.avg, row.sd).unwrap();
        }
        out.push_str("# outside = score beyond rater mean +- sample sd; ge_6/ge_4/ge_2 are ceil(3/4*7), ceil(1/2*7), ceil(1/4*7)\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{splat, GazeGroup};
    use crate::model::{test_scores, MarkKind, OrdinalCharacteristic};
    use crate::volume::LungMask;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn split_mask(dims: (usize, usize, usize)) -> LungMask {
        // full mask; split falls in the middle column
        LungMask::from_bits(dims, vec![true; dims.0 * dims.1 * dims.2]).unwrap()
    }

    fn session(annotator: &str, scan: &str, points: Vec<VoxelGazePoint>, f: f64) -> Session {
        Session { annotator: annotator.into(), scan_id: scan.into(), points, f }
    }

    fn pt(t: f64, x: usize) -> VoxelGazePoint {
        VoxelGazePoint { t, x, y: 4, z: 0 }
    }

    #[test]
    fn right_first_30_percent_gives_unit_bins() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims); // split_x = 32, x < 32 is Right
        let mut stores = Vec::new();
        for s in 0..5 {
            let total = 100.0 + s as f64 * 10.0;
            let points: Vec<VoxelGazePoint> = (0..1000)
                .map(|i| {
                    let t = i as f64 / 999.0 * total;
                    let x = if t / total <= 0.3 { 10 } else { 50 };
                    pt(t, x)
                })
                .collect();
            stores.push(session(&format!("rad{s}"), "s0", points, 90.0));
        }
        let sessions: Vec<(&Session, &LungMask)> = stores.iter().map(|s| (s, &mask)).collect();
        let curve = right_lung_curve(&sessions).unwrap();
        for b in 0..30 {
            assert_eq!(curve.bins[b].p, 1.0, "bin {}", b + 1);
        }
        for b in 31..100 {
            assert_eq!(curve.bins[b].p, 0.0, "bin {}", b + 1);
        }
        let csv = curve.to_csv();
        assert!(csv.starts_with("bin,p,ci_lo,ci_hi,n_sessions\n"));
        assert_eq!(csv.lines().count(), 101);
    }

    #[test]
    fn alternating_sides_give_half() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        let points: Vec<VoxelGazePoint> =
            (0..2000).map(|i| pt(i as f64 * 0.05, if i % 2 == 0 { 10 } else { 50 })).collect();
        let s = session("rad1", "s0", points, 20.0);
        let curve = right_lung_curve(&[(&s, &mask)]).unwrap();
        for b in &curve.bins {
            assert_abs_diff_eq!(b.p, 0.5, epsilon = 0.05);
        }
    }

    #[test]
    fn single_all_left_session_is_zero() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        let points: Vec<VoxelGazePoint> = (0..500).map(|i| pt(i as f64 * 0.1, 50)).collect();
        let s = session("rad1", "s0", points, 10.0);
        let curve = right_lung_curve(&[(&s, &mask)]).unwrap();
        for b in &curve.bins {
            assert_eq!(b.p, 0.0);
            assert_eq!(b.n, 1);
        }
    }

    #[test]
    fn empty_sessions_are_excluded() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        let good = session("rad1", "s0", (0..100).map(|i| pt(i as f64, 10)).collect(), 1.0);
        let empty = session("rad2", "s1", vec![], 90.0);
        let curve = right_lung_curve(&[(&good, &mask), (&empty, &mask)]).unwrap();
        assert!(curve.bins.iter().all(|b| b.n <= 1));
        assert!(matches!(right_lung_curve(&[(&empty, &mask)]), Err(Error::EmptySession(_))));
    }

    #[test]
    fn reading_ratio_matches_construction() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        // 1.2:1 right:left split of 2200 points
        let f = 90.0;
        let points: Vec<VoxelGazePoint> =
            (0..2200).map(|i| pt(i as f64 / f, if i < 1200 { 10 } else { 50 })).collect();
        let s = session("rad1", "s0", points, f);
        let rows = reading_time_stats(&[(&s, &mask)]).unwrap();
        let rad1 = rows.iter().find(|r| r.annotator == "rad1").unwrap();
        assert_relative_eq!(rad1.right_left_ratio, 1.2, max_relative = 0.02);
        assert_relative_eq!(rad1.mean_right_s, 1200.0 / 90.0, max_relative = 1e-9);
        assert!(reading_times_csv(&rows).contains("rad1"));
    }

    #[test]
    fn equal_sides_ratio_is_one() {
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        let points: Vec<VoxelGazePoint> =
            (0..1000).map(|i| pt(i as f64 * 0.01, if i % 2 == 0 { 10 } else { 50 })).collect();
        let s = session("rad1", "s0", points, 100.0);
        let rows = reading_time_stats(&[(&s, &mask)]).unwrap();
        assert_relative_eq!(rows[0].right_left_ratio, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn reading_time_mean_tracks_gaussian_fixture() {
        // 20 sessions with totals drawn from N(181, 84^2)
        let dims = (64, 8, 2);
        let mask = split_mask(dims);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut stores = Vec::new();
        for i in 0..20 {
            // Box-Muller
            let u1: f64 = rng.gen_range(1e-9..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let total = (181.0 + 84.0 * z).max(20.0);
            let points: Vec<VoxelGazePoint> =
                (0..200).map(|j| pt(j as f64 / 199.0 * total, 10)).collect();
            stores.push(session("rad1", &format!("s{i}"), points, 90.0));
        }
        let pairs: Vec<(&Session, &LungMask)> = stores.iter().map(|s| (s, &mask)).collect();
        let rows = reading_time_stats(&pairs).unwrap();
        let rad1 = rows.iter().find(|r| r.annotator == "rad1").unwrap();
        assert_eq!(rad1.n_sessions, 20);
        // mean within the population CI around 181
        let ci = 1.96 * 84.0 / (20.0f64).sqrt();
        assert!((rad1.mean_total_s - 181.0).abs() < ci, "mean {}", rad1.mean_total_s);
    }

    #[test]
    fn attention_time_geometry_and_errors() {
        let dims = (40, 40, 10);
        let scan = ScanVolume::new(dims, (1.0, 1.0, 2.0), (0.0, 0.0, 0.0), vec![0; 16000]).unwrap();
        let att = AttentionVolume::zeros(dims, 90.0);
        let (t, tn) = attention_time(&att, &scan, [20.0, 20.0, 10.0], 4.0, 100.0).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(tn, 0.0);
        // fully outside in z: warns and returns zero
        let (t, _) = attention_time(&att, &scan, [20.0, 20.0, 500.0], 4.0, 100.0).unwrap();
        assert_eq!(t, 0.0);
        assert!(attention_time(&att, &scan, [0.0; 3], 4.0, 0.0).is_err());
        assert!(attention_time(&att, &scan, [0.0; 3], -1.0, 10.0).is_err());
    }

    #[test]
    fn attention_time_captures_concentrated_gaze() {
        let dims = (64, 64, 16);
        let scan =
            ScanVolume::new(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), vec![0; 64 * 64 * 16]).unwrap();
        // all gaze dwells at voxel (32, 32, 8)
        let n = 450;
        let f = 90.0;
        let points: Vec<VoxelGazePoint> =
            (0..n).map(|i| VoxelGazePoint { t: i as f64 / f, x: 32, y: 32, z: 8 }).collect();
        let att = splat(&[GazeGroup { sigma_vox: 1.5, points }], f, dims).unwrap();
        let total_time = n as f64 / f;
        let (t_att, t_norm) =
            attention_time(&att, &scan, [32.0, 32.0, 8.0], 6.0, total_time).unwrap();
        // cylinder radius 26 voxels easily covers the 3-sigma kernel
        assert_relative_eq!(t_att, total_time, max_relative = 1e-6);
        assert_relative_eq!(t_norm, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn attention_additive_over_disjoint_cylinders() {
        let dims = (64, 64, 8);
        let scan =
            ScanVolume::new(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), vec![0; 64 * 64 * 8]).unwrap();
        let points: Vec<VoxelGazePoint> = (0..100)
            .map(|i| VoxelGazePoint {
                t: i as f64,
                x: if i % 2 == 0 { 10 } else { 50 },
                y: 32,
                z: 4,
            })
            .collect();
        let att = splat(&[GazeGroup { sigma_vox: 1.0, points }], 90.0, dims).unwrap();
        // two disjoint 10mm cylinders; sum bounded by total mass
        let (a, _) = attention_time(&att, &scan, [10.0, 32.0, 4.0], 8.0, 10.0).unwrap();
        let (b, _) = attention_time(&att, &scan, [50.0, 32.0, 4.0], 8.0, 10.0).unwrap();
        assert!(a > 0.0 && b > 0.0);
        assert!(a + b <= att.total_mass() * (1.0 + 1e-12));
    }

    #[test]
    fn attention_table_orders_tp_above_fp() {
        // fixture tuned so TP findings dwell ~10% and FP ~3%
        let mut stats = Vec::new();
        for i in 0..10 {
            stats.push((
                "rad1".to_string(),
                AttentionStat {
                    finding_id: format!("tp{i}"),
                    outcome: FindingOutcome::Tp,
                    t_attention: 10.0,
                    t_norm: 0.10 + (i as f64 - 5.0) * 0.002,
                },
            ));
            stats.push((
                "rad1".to_string(),
                AttentionStat {
                    finding_id: format!("fp{i}"),
                    outcome: FindingOutcome::Fp,
                    t_attention: 3.0,
                    t_norm: 0.03 + (i as f64 - 5.0) * 0.002,
                },
            ));
        }
        let rows = attention_time_table(&stats);
        let tp = rows.iter().find(|r| r.outcome == FindingOutcome::Tp).unwrap();
        let fp = rows.iter().find(|r| r.outcome == FindingOutcome::Fp).unwrap();
        assert!(tp.mean_pct > fp.mean_pct);
        assert_abs_diff_eq!(tp.mean_pct, 9.9, epsilon = 0.2);
        assert!(tp.ci_half_width_pct > 0.0);
        let csv = attention_table_csv(&rows);
        assert!(csv.contains("rad1"));
    }

    fn truth_with_raters(id: &str, rater_vals: &[u8]) -> NoduleTruth {
        NoduleTruth {
            id: id.into(),
            scan_id: "s0".into(),
            centroid_mm: [0.0; 3],
            equivalent_radius_mm: 3.0,
            raters: rater_vals.iter().map(|&v| test_scores(v)).collect(),
        }
    }

    #[test]
    fn agreement_hand_example() {
        // rater scores {4,4,5,5}: mean 4.5, sd 0.577 -> inside is (3.92, 5.08)
        let truth = truth_with_raters("n1", &[4, 4, 5, 5]);
        let inside = test_scores(4);
        let outside = test_scores(3);
        let table = characterization_agreement(&[
            ("rad_in".into(), vec![(&truth, &inside)]),
            ("rad_out".into(), vec![(&truth, &outside)]),
        ])
        .unwrap();
        for row in &table.characteristics {
            assert_eq!(row.pct[0], 0.0, "{} rad_in", row.label);
            assert_eq!(row.pct[1], 100.0, "{} rad_out", row.label);
        }
    }

    #[test]
    fn agreement_identical_to_mean_is_zero_everywhere() {
        let truth = truth_with_raters("n1", &[3, 3, 3]);
        let same = test_scores(3);
        let table = characterization_agreement(&[("rad1".into(), vec![(&truth, &same)])]).unwrap();
        for row in table.characteristics.iter().chain(&table.aggregates) {
            assert_eq!(row.pct[0], 0.0, "{}", row.label);
        }
    }

    #[test]
    fn agreement_exactly_one_characteristic_outside() {
        // every nodule outside on exactly one characteristic:
        // at_least_one = 100, ge_2 = 0
        let truths: Vec<NoduleTruth> =
            (0..4).map(|i| truth_with_raters(&format!("n{i}"), &[3, 3])).collect();
        let scored: Vec<CharacteristicScores> = (0..4)
            .map(|_| {
                let mut s = test_scores(3);
                s.texture = 5; // single deviation
                s
            })
            .collect();
        let pairs: Vec<(&NoduleTruth, &CharacteristicScores)> =
            truths.iter().zip(scored.iter()).collect();
        let table = characterization_agreement(&[("rad1".into(), pairs)]).unwrap();
        let get = |label: &str| {
            table.aggregates.iter().find(|r| r.label == label).map(|r| r.pct[0]).unwrap()
        };
        assert_eq!(get("at_least_one"), 100.0);
        assert_eq!(get("ge_2_of_7"), 0.0);
        assert_eq!(get("all_7"), 0.0);
        let texture = table.characteristics.iter().find(|r| r.label == "texture").unwrap();
        assert_eq!(texture.pct[0], 100.0);
    }

    #[test]
    fn agreement_aggregates_are_monotone() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let truths: Vec<NoduleTruth> = (0..12)
            .map(|i| {
                truth_with_raters(
                    &format!("n{i}"),
                    &[rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=5)],
                )
            })
            .collect();
        let scored: Vec<CharacteristicScores> =
            (0..12).map(|_| test_scores(rng.gen_range(1..=5))).collect();
        let pairs: Vec<(&NoduleTruth, &CharacteristicScores)> =
            truths.iter().zip(scored.iter()).collect();
        let table = characterization_agreement(&[("rad1".into(), pairs)]).unwrap();
        let vals: Vec<f64> = ["at_least_one", "ge_2_of_7", "ge_4_of_7", "ge_6_of_7", "all_7"]
            .iter()
            .map(|l| table.aggregates.iter().find(|r| &r.label == l).unwrap().pct[0])
            .collect();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1], "aggregates must be monotone: {vals:?}");
        }
        let csv = table.to_csv();
        assert!(csv.contains("lobulation"));
        assert!(csv.lines().last().unwrap().starts_with('#'));
    }

    #[test]
    fn agreement_zero_sd_raters() {
        // single rater: sd = 0, outside iff score != mean
        let truth = truth_with_raters("n1", &[4]);
        let same = test_scores(4);
        let off = test_scores(5);
        let table = characterization_agreement(&[
            ("a".into(), vec![(&truth, &same)]),
            ("b".into(), vec![(&truth, &off)]),
        ])
        .unwrap();
        for row in &table.characteristics {
            assert_eq!(row.pct[0], 0.0);
            assert_eq!(row.pct[1], 100.0);
        }
    }

    #[test]
    fn agreement_excludes_empty_annotators() {
        let truth = truth_with_raters("n1", &[3, 4]);
        let s = test_scores(3);
        let table = characterization_agreement(&[
            ("rad1".into(), vec![(&truth, &s)]),
            ("rad2".into(), vec![]),
        ])
        .unwrap();
        assert_eq!(table.annotators, vec!["rad1".to_string()]);
        assert!(characterization_agreement(&[("rad2".into(), vec![])]).is_err());
    }

    #[test]
    fn matched_pairs_follow_outcome() {
        let truths = vec![truth_with_raters("n1", &[3, 4])];
        let marks = vec![Mark {
            id: "m1".into(),
            scan_id: "s0".into(),
            annotator: "rad1".into(),
            centroid_mm: [0.5, 0.0, 0.0],
            kind: MarkKind::Nodule,
            scores: Some(test_scores(4)),
            source: Default::default(),
        }];
        let outcome = crate::evaluation::match_marks(
            &truths,
            &marks,
            &[],
            crate::evaluation::MatchParams::default(),
        );
        let pairs = matched_scored_pairs(&truths, &marks, &outcome);
        assert_eq!(pairs.len(), 1);
        assert_eq!(OrdinalCharacteristic::Texture.of(pairs[0].1), 4);
    }
}
