//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gfk_core::analytics::{
    attention_table_csv, attention_time_table, characterization_agreement,
    finding_attention_stats, matched_scored_pairs, reading_time_stats, reading_times_csv,
    right_lung_curve, AttentionStat, Session,
};
use gfk_core::attention::build_attention;
use gfk_core::evaluation::{combine, evaluate, match_marks, EvalReport, MatchParams, ScanCase};
use gfk_core::fusion::{
    calibrate_operating_point, candidate_to_mark, fuse, postprocess_candidates, FusionMode,
    FusionPolicy,
};
use gfk_core::model::{Candidate, Mark, NoduleTruth, NonNodule};
use gfk_core::simulate::{simulate_study, SimConfig};
use gfk_core::stats::{anova, mcnemar, significance, AnovaInput, ContingencyCounts, StatReport};
use gfk_core::volume::{estimate_lung_mask, LungMask};
use gfk_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::study::{by_scan, Study};

pub fn cmd_simulate(out: &Path, cfg: &SimConfig) -> Result<()> {
    let study = simulate_study(cfg)?;
    study.write(out)?;
    let n_truths: usize = study.scans.iter().map(|s| s.truths.len()).sum();
    println!(
        "simulated {} scans, {} annotators, {} nodules -> {}",
        cfg.n_scans,
        cfg.n_annotators,
        n_truths,
        out.display()
    );
    Ok(())
}

pub fn cmd_mask(study: &Study, hu_threshold: f64, closing_mm: f64) -> Result<()> {
    let out_dir = study.derived().join("masks");
    fs::create_dir_all(&out_dir)?;
    let results: Result<Vec<(String, usize)>> = study
        .manifest
        .scan_ids
        .iter()
        .map(|scan_id| {
            let scan = study.load_scan(scan_id)?;
            let mask = estimate_lung_mask(&scan, hu_threshold, closing_mm)?;
            mask.write_metaimage(
                &out_dir.join(format!("{scan_id}.mask.mhd")),
                scan.spacing(),
                scan.origin(),
            )?;
            Ok((scan_id.clone(), mask.volume()))
        })
        .collect();
    for (scan_id, volume) in results? {
        println!("mask {scan_id}: {volume} voxels");
    }
    Ok(())
}

pub fn cmd_attention(study: &Study, annotator: &Option<String>) -> Result<()> {
    for annotator in study.annotators_or(annotator) {
        let out_dir = study.attention_dir(&annotator);
        fs::create_dir_all(&out_dir)?;
        for scan_id in &study.manifest.scan_ids {
            let scan = study.load_scan(scan_id)?;
            let mask = study.load_mask(scan_id)?;
            let (_, mapped, parsed) = study.load_session(&annotator, scan_id, &scan, &mask)?;
            let att = build_attention(&mapped, &parsed.states, &scan, parsed.f)?;
            att.write_metaimage(
                &out_dir.join(format!("{scan_id}.att.mhd")),
                scan.spacing(),
                scan.origin(),
            )?;
            println!(
                "attention {annotator}/{scan_id}: {:.2} s over {} gaze points",
                att.total_mass(),
                mapped.len()
            );
        }
    }
    Ok(())
}

/// Assemble per-scan evaluation cases for a mark set.
fn cases_for(study: &Study, marks: &[Mark]) -> Result<Vec<ScanCase>> {
    let truths = study.truths()?;
    let non_nodules = study.non_nodules()?;
    let truth_map = by_scan(&study.manifest.scan_ids, &truths, |t| &t.scan_id);
    let nn_map = by_scan(&study.manifest.scan_ids, &non_nodules, |n| &n.scan_id);
    let mark_map = by_scan(&study.manifest.scan_ids, marks, |m| &m.scan_id);
    Ok(study
        .manifest
        .scan_ids
        .iter()
        .map(|scan_id| ScanCase {
            scan_id: scan_id.clone(),
            truths: truth_map[scan_id].iter().map(|&t| t.clone()).collect(),
            marks: mark_map[scan_id].iter().map(|&m| m.clone()).collect(),
            non_nodules: nn_map[scan_id].iter().map(|&n| n.clone()).collect(),
        })
        .collect())
}

fn write_eval(study: &Study, label: &str, report: &EvalReport) -> Result<()> {
    let dir = study.derived().join("eval");
    fs::create_dir_all(&dir)?;
    report.write_json(&dir.join(format!("{label}.eval.json")))?;
    report.write_csv(&dir.join(format!("{label}.eval.csv")))?;
    println!(
        "eval {label}: sensitivity {:.3}, {:.3} FP/scan ({} TP / {} FP / {} FN)",
        report.sensitivity, report.fp_per_scan, report.tp, report.fp, report.fn_
    );
    Ok(())
}

/// Post-process the raw candidate file against the lung masks.
fn postprocessed_candidates(study: &Study) -> Result<Vec<Candidate>> {
    let raw = study.candidates()?;
    let cand_map = by_scan(&study.manifest.scan_ids, &raw, |c| &c.scan_id);
    let mut out = Vec::new();
    for scan_id in &study.manifest.scan_ids {
        let scan = study.load_scan(scan_id)?;
        let mask = study.load_mask(scan_id)?;
        let cands: Vec<Candidate> = cand_map[scan_id].iter().map(|&c| c.clone()).collect();
        out.extend(postprocess_candidates(&cands, &mask, &scan));
    }
    Ok(out)
}

pub fn cmd_eval(study: &Study, annotator: &Option<String>, params: MatchParams) -> Result<()> {
    for annotator in study.annotators_or(annotator) {
        let marks = study.marks(&annotator)?;
        let report = evaluate(&cases_for(study, &marks)?, params)?;
        write_eval(study, &annotator, &report)?;
    }
    // the automatic system is evaluated on its post-processed candidates
    let cands = postprocessed_candidates(study)?;
    let cade_marks: Vec<Mark> = cands.iter().map(|c| candidate_to_mark(c, "cade")).collect();
    let report = evaluate(&cases_for(study, &cade_marks)?, params)?;
    write_eval(study, "cade", &report)?;
    Ok(())
}

pub fn cmd_combine(study: &Study, annotators: &str, params: MatchParams) -> Result<()> {
    let names: Vec<&str> = annotators.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.len() != 2 {
        return Err(Error::Parameter(format!(
            "--annotators expects two comma-separated names, got `{annotators}`"
        )));
    }
    let marks_a = study.marks(names[0])?;
    let marks_b = study.marks(names[1])?;
    let a_map = by_scan(&study.manifest.scan_ids, &marks_a, |m| &m.scan_id);
    let b_map = by_scan(&study.manifest.scan_ids, &marks_b, |m| &m.scan_id);
    let mut merged = Vec::new();
    for scan_id in &study.manifest.scan_ids {
        let a: Vec<Mark> = a_map[scan_id].iter().map(|&m| m.clone()).collect();
        let b: Vec<Mark> = b_map[scan_id].iter().map(|&m| m.clone()).collect();
        merged.extend(combine(&a, &b));
    }
    let label = format!("combined_{}_{}", names[0], names[1]);
    fs::create_dir_all(study.derived().join("marks"))?;
    gfk_core::model::save_marks(&study.derived_marks_path(&label), &merged)?;
    let report = evaluate(&cases_for(study, &merged)?, params)?;
    write_eval(study, &label, &report)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FuseSummary {
    pub annotator: String,
    pub mode: FusionMode,
    pub attention_threshold: f64,
    pub score_threshold: f64,
    pub baseline_sensitivity: f64,
    pub baseline_fp_per_scan: f64,
    pub fused_sensitivity: f64,
    pub fused_fp_per_scan: f64,
}

pub fn cmd_fuse(
    study: &Study,
    annotator: &str,
    mode: FusionMode,
    attention_threshold: f64,
    fp_target: Option<f64>,
    params: MatchParams,
) -> Result<()> {
    let marks = study.marks(annotator)?;
    let truths = study.truths()?;
    let non_nodules = study.non_nodules()?;
    let truth_map = by_scan(&study.manifest.scan_ids, &truths, |t| &t.scan_id);
    let nn_map = by_scan(&study.manifest.scan_ids, &non_nodules, |n| &n.scan_id);
    let mark_map = by_scan(&study.manifest.scan_ids, &marks, |m| &m.scan_id);

    // post-process candidates per scan, keeping the scan association
    let raw = study.candidates()?;
    let cand_map = by_scan(&study.manifest.scan_ids, &raw, |c| &c.scan_id);
    let mut per_scan: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    for scan_id in &study.manifest.scan_ids {
        let scan = study.load_scan(scan_id)?;
        let mask = study.load_mask(scan_id)?;
        let cands: Vec<Candidate> = cand_map[scan_id].iter().map(|&c| c.clone()).collect();
        per_scan.insert(scan_id.clone(), postprocess_candidates(&cands, &mask, &scan));
    }

    let score_threshold = match fp_target {
        None => 0.0,
        Some(target) => {
            let calib: Vec<(Vec<NoduleTruth>, Vec<Candidate>, Vec<NonNodule>)> = study
                .manifest
                .scan_ids
                .iter()
                .map(|scan_id| {
                    (
                        truth_map[scan_id].iter().map(|&t| t.clone()).collect(),
                        per_scan[scan_id].clone(),
                        nn_map[scan_id].iter().map(|&n| n.clone()).collect(),
                    )
                })
                .collect();
            calibrate_operating_point(&calib, target, params)?
        }
    };

    let policy = FusionPolicy {
        mode,
        attention_threshold,
        score_threshold,
        fp_budget_per_scan: fp_target.unwrap_or(0.0),
    };

    let mut fused_all = Vec::new();
    for scan_id in &study.manifest.scan_ids {
        let scan = study.load_scan(scan_id)?;
        let mask = study.load_mask(scan_id)?;
        let scan_marks: Vec<Mark> = mark_map[scan_id].iter().map(|&m| m.clone()).collect();
        let cands = &per_scan[scan_id];
        let fused = match mode {
            FusionMode::All => fuse(&scan_marks, cands, None, &scan, 1.0, &policy)?,
            FusionMode::LowAttention => {
                let (session, mapped, parsed) =
                    study.load_session(annotator, scan_id, &scan, &mask)?;
                let att = build_attention(&mapped, &parsed.states, &scan, parsed.f)?;
                let total = session.total_time().max(f64::MIN_POSITIVE);
                fuse(&scan_marks, cands, Some(&att), &scan, total, &policy)?
            }
        };
        fused_all.extend(fused);
    }

    let label = format!("fused_{annotator}_cade");
    fs::create_dir_all(study.derived().join("marks"))?;
    gfk_core::model::save_marks(&study.derived_marks_path(&label), &fused_all)?;

    let baseline = evaluate(&cases_for(study, &marks)?, params)?;
    let fused_report = evaluate(&cases_for(study, &fused_all)?, params)?;
    write_eval(study, &label, &fused_report)?;

    let summary = FuseSummary {
        annotator: annotator.to_string(),
        mode,
        attention_threshold,
        score_threshold,
        baseline_sensitivity: baseline.sensitivity,
        baseline_fp_per_scan: baseline.fp_per_scan,
        fused_sensitivity: fused_report.sensitivity,
        fused_fp_per_scan: fused_report.fp_per_scan,
    };
    let dir = study.derived().join("eval");
    fs::create_dir_all(&dir)?;
    fs::write(
        dir.join(format!("{label}.summary.json")),
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    println!(
        "fuse {annotator}+cade mode={} threshold={:.2}: sensitivity {:.3} -> {:.3}, FP/scan {:.3} -> {:.3}",
        match mode {
            FusionMode::All => "all",
            FusionMode::LowAttention => "low-attention",
        },
        attention_threshold,
        baseline.sensitivity,
        fused_report.sensitivity,
        baseline.fp_per_scan,
        fused_report.fp_per_scan
    );
    Ok(())
}

pub fn cmd_analytics(study: &Study, params: MatchParams, flip_lr: bool) -> Result<()> {
    let out_dir = study.derived().join("analytics");
    fs::create_dir_all(&out_dir)?;

    let truths = study.truths()?;
    let non_nodules = study.non_nodules()?;
    let truth_map = by_scan(&study.manifest.scan_ids, &truths, |t| &t.scan_id);
    let nn_map = by_scan(&study.manifest.scan_ids, &non_nodules, |n| &n.scan_id);

    let mut sessions: Vec<Session> = Vec::new();
    let mut masks: BTreeMap<String, LungMask> = BTreeMap::new();
    let mut attention_rows: Vec<(String, AttentionStat)> = Vec::new();
    let mut agreement_inputs: Vec<(String, Vec<(NoduleTruth, gfk_core::model::CharacteristicScores)>)> =
        Vec::new();

    for annotator in &study.manifest.annotators {
        let marks = study.marks(annotator)?;
        let mark_map = by_scan(&study.manifest.scan_ids, &marks, |m| &m.scan_id);
        let mut scored_pairs: Vec<(NoduleTruth, gfk_core::model::CharacteristicScores)> = Vec::new();

        for scan_id in &study.manifest.scan_ids {
            let scan = study.load_scan(scan_id)?;
            if !masks.contains_key(scan_id) {
                let mut mask = study.load_mask(scan_id)?;
                mask.set_flip_lr(flip_lr);
                masks.insert(scan_id.clone(), mask);
            }
            let mask = &masks[scan_id];
            let (session, mapped, parsed) = study.load_session(annotator, scan_id, &scan, mask)?;

            let scan_truths: Vec<NoduleTruth> =
                truth_map[scan_id].iter().map(|&t| t.clone()).collect();
            let scan_marks: Vec<Mark> = mark_map[scan_id].iter().map(|&m| m.clone()).collect();
            let scan_nns: Vec<NonNodule> = nn_map[scan_id].iter().map(|&n| n.clone()).collect();
            let outcome = match_marks(&scan_truths, &scan_marks, &scan_nns, params);

            let att = build_attention(&mapped, &parsed.states, &scan, parsed.f)?;
            let total = session.total_time();
            if total > 0.0 {
                for stat in
                    finding_attention_stats(&att, &scan, &scan_truths, &scan_marks, &outcome, total)?
                {
                    attention_rows.push((annotator.clone(), stat));
                }
            }
            for (t, s) in matched_scored_pairs(&scan_truths, &scan_marks, &outcome) {
                scored_pairs.push((t.clone(), *s));
            }
            sessions.push(session);
        }
        agreement_inputs.push((annotator.clone(), scored_pairs));
    }

    // right-lung curve + reading times over all sessions
    let pairs: Vec<(&Session, &LungMask)> =
        sessions.iter().map(|s| (s, &masks[&s.scan_id])).collect();
    let curve = right_lung_curve(&pairs)?;
    fs::write(out_dir.join("right_lung_curve.csv"), curve.to_csv())?;
    fs::write(out_dir.join("right_lung_curve.svg"), gfk_core::plot::right_lung_curve_svg(&curve))?;

    let reading = reading_time_stats(&pairs)?;
    fs::write(out_dir.join("reading_times.csv"), reading_times_csv(&reading))?;

    // attention-time table (Table II analog)
    let table2 = attention_time_table(&attention_rows);
    fs::write(out_dir.join("table2.csv"), attention_table_csv(&table2))?;

    // characterization agreement (Table I analog)
    let ref_inputs: Vec<(String, Vec<(&NoduleTruth, &gfk_core::model::CharacteristicScores)>)> =
        agreement_inputs
            .iter()
            .map(|(a, pairs)| (a.clone(), pairs.iter().map(|(t, s)| (t, s)).collect()))
            .collect();
    match characterization_agreement(&ref_inputs) {
        Ok(table) => fs::write(out_dir.join("table1.csv"), table.to_csv())?,
        Err(e) => log::warn!("agreement table skipped: {e}"),
    }

    println!(
        "analytics: {} sessions, {} finding rows -> {}",
        sessions.len(),
        attention_rows.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabeledReport {
    pub comparison: String,
    #[serde(flatten)]
    pub report: StatReport,
}

pub fn cmd_stats(study: &Study, _params: MatchParams) -> Result<()> {
    let truths = study.truths()?;
    let mut truth_ids: Vec<String> = truths.iter().map(|t| t.id.clone()).collect();
    truth_ids.sort();

    // detection flags per evaluated annotator (plus the automatic system)
    let mut labels = study.manifest.annotators.clone();
    labels.push("cade".to_string());
    let mut flags: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for label in &labels {
        let path = study.require(study.eval_json_path(label), "eval")?;
        let report: EvalReport = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        flags.insert(label.clone(), report.detection_flags(&truth_ids));
    }

    let mut reports: Vec<LabeledReport> = Vec::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let c = ContingencyCounts::from_paired(&flags[&labels[i]], &flags[&labels[j]])?;
            match mcnemar(&c) {
                Ok(r) => reports.push(LabeledReport {
                    comparison: format!("{}-vs-{}", labels[i], labels[j]),
                    report: StatReport::from_mcnemar(&r),
                }),
                Err(e) => log::warn!("mcnemar {} vs {}: {e}", labels[i], labels[j]),
            }
        }
    }

    // ANOVA over per-scan reading times by annotator
    let mut groups = Vec::new();
    for annotator in &study.manifest.annotators {
        let mut times = Vec::new();
        for scan_id in &study.manifest.scan_ids {
            let (gaze_path, view_path) = study.session_paths(annotator, scan_id);
            let parsed = gfk_core::gaze::parse_session(
                &study.require(gaze_path, "simulate")?,
                &study.require(view_path, "simulate")?,
            )?;
            let span = match (parsed.samples.first(), parsed.samples.last()) {
                (Some(a), Some(b)) => b.t - a.t,
                _ => 0.0,
            };
            times.push(span);
        }
        groups.push(times);
    }
    if groups.len() >= 2 {
        match AnovaInput::new(groups).and_then(|input| anova(&input)) {
            Ok(r) => reports.push(LabeledReport {
                comparison: "reading-time-by-annotator".to_string(),
                report: StatReport::from_anova(&r),
            }),
            Err(e) => log::warn!("reading-time ANOVA skipped: {e}"),
        }
    }

    let dir = study.derived().join("stats");
    fs::create_dir_all(&dir)?;
    fs::write(
        dir.join("stats.json"),
        serde_json::to_string_pretty(&reports).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    for r in &reports {
        println!(
            "{}: {} statistic {:.4}, p {:.4}{}",
            r.comparison,
            r.report.test,
            r.report.statistic,
            r.report.p,
            if significance(r.report.p) { " (significant)" } else { "" }
        );
    }
    Ok(())
}

pub fn cmd_report(study: &Study) -> Result<()> {
    crate::report::build(study)
}
