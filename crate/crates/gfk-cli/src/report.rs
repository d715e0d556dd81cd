//! HTML study report: bundles the derived artifacts into one page.
//! Never recomputes; missing upstream artifacts are an error.

use std::fmt::Write as _;
use std::fs;

use gfk_core::evaluation::EvalReport;
use gfk_core::{Error, Result};

use crate::study::Study;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn csv_to_table(csv: &str) -> String {
    let mut html = String::from("<table>\n");
    for (i, line) in csv.lines().enumerate() {
        if line.starts_with('#') {
            write!(html, "<caption class=\"footnote\">{}</caption>\n", esc(line.trim_start_matches('#'))).unwrap();
            continue;
        }
        let tag = if i == 0 { "th" } else { "td" };
        html.push_str("<tr>");
        for cell in line.split(',') {
            write!(html, "<{tag}>{}</{tag}>", esc(cell)).unwrap();
        }
        html.push_str("</tr>\n");
    }
    html.push_str("</table>\n");
    html
}

pub fn build(study: &Study) -> Result<()> {
    let derived = study.derived();
    let analytics_dir = derived.join("analytics");

    // evaluation reports: annotators + cade are required, derived sets are
    // included when present
    let mut eval_rows: Vec<(String, EvalReport)> = Vec::new();
    let mut labels = study.manifest.annotators.clone();
    labels.push("cade".into());
    for label in &labels {
        let path = study.require(study.eval_json_path(label), "eval")?;
        let report: EvalReport = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        eval_rows.push((label.clone(), report));
    }
    let eval_dir = derived.join("eval");
    if eval_dir.exists() {
        let mut extra: Vec<_> = fs::read_dir(&eval_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| {
                        n.ends_with(".eval.json")
                            && (n.starts_with("combined_") || n.starts_with("fused_"))
                    })
                    .unwrap_or(false)
            })
            .collect();
        extra.sort();
        for path in extra {
            let label = path
                .file_name()
                .unwrap()
                .to_string_lossy()
                .trim_end_matches(".eval.json")
                .to_string();
            let report: EvalReport = serde_json::from_str(&fs::read_to_string(&path)?)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            eval_rows.push((label, report));
        }
    }

    let table1 = fs::read_to_string(study.require(analytics_dir.join("table1.csv"), "analytics")?)?;
    let table2 = fs::read_to_string(study.require(analytics_dir.join("table2.csv"), "analytics")?)?;
    let reading =
        fs::read_to_string(study.require(analytics_dir.join("reading_times.csv"), "analytics")?)?;
    let curve_svg =
        fs::read_to_string(study.require(analytics_dir.join("right_lung_curve.svg"), "analytics")?)?;
    let stats_json = derived.join("stats").join("stats.json");
    let stats: Vec<crate::commands::LabeledReport> = if stats_json.exists() {
        serde_json::from_str(&fs::read_to_string(&stats_json)?)
            .map_err(|e| Error::Format(format!("{}: {e}", stats_json.display())))?
    } else {
        Vec::new()
    };

    let bars: Vec<(String, f64, Option<f64>)> =
        eval_rows.iter().map(|(l, r)| (l.clone(), r.sensitivity, None)).collect();
    let sens_svg = gfk_core::plot::bar_chart("Detection sensitivity", "sensitivity", &bars, "#5470c6");

    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>gfk study report</title>\n\
         <style>body{font-family:sans-serif;margin:2em;max-width:70em}table{border-collapse:collapse;margin:1em 0}\n\
         td,th{border:1px solid #999;padding:4px 8px;text-align:right}th{background:#eee}\n\
         td:first-child,th:first-child{text-align:left}caption.footnote{caption-side:bottom;font-size:0.8em;text-align:left}\n\
         </style></head><body>\n<h1>Screening study report</h1>\n",
    );
    writeln!(
        html,
        "<p>{} scans, annotators: {}.</p>",
        study.manifest.scan_ids.len(),
        esc(&study.manifest.annotators.join(", "))
    )
    .unwrap();

    html.push_str("<h2>Detection performance</h2>\n<table>\n<tr><th>annotator</th><th>sensitivity</th><th>FP/scan</th><th>TP</th><th>FP</th><th>FN</th></tr>\n");
    for (label, r) in &eval_rows {
        writeln!(
            html,
            "<tr><td>{}</td><td>{:.3}</td><td>{:.3}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            esc(label),
            r.sensitivity,
            r.fp_per_scan,
            r.tp,
            r.fp,
            r.fn_
        )
        .unwrap();
    }
    html.push_str("</table>\n");
    html.push_str(&sens_svg);

    html.push_str("<h2>Search strategy</h2>\n");
    html.push_str(&curve_svg);
    html.push_str("<h3>Reading times</h3>\n");
    html.push_str(&csv_to_table(&reading));

    html.push_str("<h2>Attention time per finding (%)</h2>\n");
    html.push_str(&csv_to_table(&table2));

    html.push_str("<h2>Characterization agreement (%)</h2>\n");
    html.push_str(&csv_to_table(&table1));

    if !stats.is_empty() {
        html.push_str("<h2>Statistical tests</h2>\n<table>\n<tr><th>comparison</th><th>test</th><th>statistic</th><th>dof</th><th>p</th><th>significant</th></tr>\n");
        for s in &stats {
            writeln!(
                html,
                "<tr><td>{}</td><td>{}</td><td>{:.4}</td><td>{}</td><td>{:.4}</td><td>{}</td></tr>",
                esc(&s.comparison),
                esc(&s.report.test),
                s.report.statistic,
                s.report
                    .dof
                    .iter()
                    .map(|d| format!("{d}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                s.report.p,
                s.report.significant
            )
            .unwrap();
        }
        html.push_str("</table>\n");
    }
    html.push_str("</body></html>\n");

    let out = derived.join("report.html");
    fs::write(&out, html)?;
    println!("report -> {}", out.display());
    Ok(())
}
