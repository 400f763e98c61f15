use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Mitigation;
use super::report::{AttributeReport, AuditReport, Cell};
use crate::ensemble::BinaryTask;
use crate::error::{Error, Result};
use crate::fairness::Aggregate;

type Pick = fn(&Cell) -> Option<Aggregate>;

/// Table rows in display order.
pub const TABLE_METRICS: [&str; 11] = [
    "Demographic Parity",
    "Equalized Odds",
    "Balanced Accuracy Parity",
    "F1-score Parity",
    "TPR Ratio",
    "FPR Ratio",
    "FNR Ratio",
    "TNR Ratio",
    "Weighted F1-score",
    "Harmonic Mean",
    "Counterfactual Consistency",
];

fn metric_value(metric: usize, c: &Cell) -> Option<Aggregate> {
    let s = &c.summary;
    Some(match metric {
        0 => s.demographic_parity_ratio,
        1 => s.equalized_odds_ratio,
        2 => s.balanced_accuracy_parity,
        3 => s.f1_parity,
        4 => s.tpr_ratio,
        5 => s.fpr_ratio,
        6 => s.fnr_ratio,
        7 => s.tnr_ratio,
        8 => s.weighted_f1,
        9 => s.harmonic_mean,
        _ => return c.counterfactual.map(|cf| cf.overall),
    })
}

fn cell_text(v: Option<Aggregate>) -> String {
    v.map(|a| a.to_string()).unwrap_or_else(|| "n/a".into())
}

fn mitigation_order(r: &AttributeReport) -> Vec<Mitigation> {
    r.mitigations.iter().map(|m| m.mitigation).collect()
}

/// The per-attribute table as CSV: one row per metric × task, one column per mitigation.
pub fn attribute_csv(r: &AttributeReport) -> Result<String> {
    let mits = mitigation_order(r);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![r.attribute.title().to_string(), "Task".to_string()];
    header.extend(mits.iter().map(|m| m.title(r.attribute)));
    w.write_record(&header)?;
    for (k, name) in TABLE_METRICS.iter().enumerate() {
        for task in BinaryTask::ALL {
            let mut row = vec![name.to_string(), task.to_string()];
            for &m in &mits {
                let cell = r
                    .cell(task, m)
                    .ok_or_else(|| Error::Contract(format!("missing cell {} / {task} / {m}", r.attribute)))?;
                row.push(cell_text(metric_value(k, cell)));
            }
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 5] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"];
const CHART_METRICS: [(&str, Pick); 3] = [
    ("Weighted F1", |c| Some(c.summary.weighted_f1)),
    ("Equalized Odds", |c| Some(c.summary.equalized_odds_ratio)),
    ("Harmonic Mean", |c| Some(c.summary.harmonic_mean)),
];

/// Grouped bar chart: one panel per task, metric groups within a panel, one bar per mitigation.
pub fn attribute_svg(r: &AttributeReport) -> String {
    let mits = mitigation_order(r);
    let (panel_w, panel_h, top, left, bottom) = (300.0, 240.0, 50.0, 50.0, 90.0);
    let width = left + panel_w * 3.0 + 20.0;
    let height = top + panel_h + bottom;
    let group_w = panel_w / 3.0;
    let bar_w = (group_w - 20.0) / mits.len().max(1) as f64;
    let y_of = |v: f64| top + panel_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        r.attribute.title()
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(t);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{t:.2}</text>"##,
            left + panel_w * 3.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (p, task) in BinaryTask::ALL.into_iter().enumerate() {
        let x0 = left + panel_w * p as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{task}</text>"#,
            x0 + panel_w / 2.0,
            top - 8.0
        );
        for (g, (label, pick)) in CHART_METRICS.iter().enumerate() {
            let gx = x0 + group_w * g as f64 + 10.0;
            for (b, &m) in mits.iter().enumerate() {
                let agg = r.cell(task, m).and_then(pick);
                let Some(mean) = agg.and_then(|a| a.mean) else { continue };
                let x = gx + bar_w * b as f64;
                let y = y_of(mean);
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{} {label}: {}</title></rect>"#,
                    bar_w * 0.9,
                    top + panel_h - y,
                    PALETTE[b % PALETTE.len()],
                    m.short(),
                    agg.map(|a| a.to_string()).unwrap_or_default()
                );
                if let Some(sd) = agg.and_then(|a| a.std) {
                    let cx = x + bar_w * 0.45;
                    let _ = writeln!(
                        s,
                        r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                        y_of(mean - sd),
                        y_of(mean + sd)
                    );
                }
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{label}</text>"#,
                gx + (group_w - 20.0) / 2.0,
                top + panel_h + 16.0
            );
        }
    }
    for (b, &m) in mits.iter().enumerate() {
        let x = left + 150.0 * b as f64;
        let y = top + panel_h + 45.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{y}">{}</text>"#,
            y - 10.0,
            PALETTE[b % PALETTE.len()],
            x + 16.0,
            xml_escape(&m.title(r.attribute))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn csv_file_name(r: &AttributeReport) -> String {
    format!("{}_fairness.csv", r.attribute)
}

pub fn svg_file_name(r: &AttributeReport) -> String {
    format!("{}_chart.svg", r.attribute)
}

/// Writes the per-attribute tables and charts; returns the paths written.
/// On failure, files already written by this call are removed.
pub fn render_tables(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let result = (|| {
        for r in &report.attributes {
            for (name, body) in [(csv_file_name(r), attribute_csv(r)?), (svg_file_name(r), attribute_svg(r))] {
                let path = dir.join(name);
                std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            remove_all(&written);
            Err(e)
        }
    }
}

pub(crate) fn remove_all(paths: &[PathBuf]) {
    for p in paths {
        let _ = std::fs::remove_file(p);
    }
}

/// Re-renders tables and charts from an existing report.json without recomputing anything.
pub fn render_from_report(report_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let report: AuditReport = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", report_path.display())))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    render_tables(&report, out_dir)
}
