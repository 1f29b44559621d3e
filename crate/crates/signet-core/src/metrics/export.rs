//! Report artifacts: metrics.csv, report.txt, the ranked-pair and
//! C-distribution tables, and their SVG renderings.

use std::fs;
use std::io;
use std::path::Path;

use super::report::{EvalReport, PolarRow};
use crate::graph::Polarity;

/// Write every report artifact into `dir`.
///
/// Emits `metrics.csv`, `report.txt`, `paired_ranks.csv`, `paired_ranks.svg`,
/// `c_distribution.csv`, and `c_histogram.svg`. Output bytes are a pure
/// function of the report, so reruns are byte-identical.
pub fn write_report_files(report: &EvalReport, dir: &Path, header: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    fs::write(dir.join("report.txt"), report_txt(report, header))?;
    fs::write(dir.join("paired_ranks.csv"), paired_ranks_csv(&report.polar_rows))?;
    fs::write(
        dir.join("paired_ranks.svg"),
        render_paired_ranks_svg(&report.polar_rows),
    )?;
    fs::write(
        dir.join("c_distribution.csv"),
        c_distribution_csv(&report.polar_rows),
    )?;
    fs::write(
        dir.join("c_histogram.svg"),
        render_c_histogram_svg(&report.polar_rows),
    )?;
    Ok(())
}

pub fn metrics_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,value\n");
    for (name, value) in report.headline_metrics() {
        out.push_str(&format!("{name},{value:.6}\n"));
    }
    out
}

fn pair_id(row: &PolarRow) -> String {
    format!("c{}-g{}", row.chem, row.gene)
}

pub fn paired_ranks_csv(rows: &[PolarRow]) -> String {
    let mut out = String::from("pair_id,log2_rank_decrease,log2_rank_increase\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            pair_id(row),
            row.log2_rank_decrease,
            row.log2_rank_increase
        ));
    }
    out
}

pub fn c_distribution_csv(rows: &[PolarRow]) -> String {
    let mut out = String::from("pair_id,C,C_prime,correct\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            pair_id(row),
            row.c,
            row.c_prime,
            row.correct as u8
        ));
    }
    out
}

pub fn report_txt(report: &EvalReport, header: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    if !header.is_empty() && !header.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("\n== headline metrics ==\n");
    for (name, value) in report.headline_metrics() {
        out.push_str(&format!("{name:<14} {value:.6}\n"));
    }
    out.push_str(&format!(
        "\ntest positives: {}\nscored records: {}\npolar pairs: {}\n",
        report.n_test_positives,
        report.records.len(),
        report.polar_rows.len()
    ));
    if report.ap_clamped {
        out.push_str(&format!(
            "note: fewer than {} records; AP computed over all of them\n",
            report.ap_k
        ));
    }
    if report.cp_clamped {
        out.push_str(&format!(
            "note: fewer than {} polar pairs; CP@k divides by the pair count\n",
            report.cp_k
        ));
    }
    if !report.excluded_from_macro.is_empty() {
        out.push_str(&format!(
            "note: excluded from macro means (single class): {}\n",
            report.excluded_from_macro.join(", ")
        ));
    }
    out.push_str("\n== per relation ==\nrelation  n_pos  n_neg  auroc  auprc\n");
    for row in &report.per_relation {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<9} {:<6} {:<6} {:<6} {}\n",
            row.relation,
            row.n_pos,
            row.n_neg,
            fmt(row.auroc),
            fmt(row.auprc)
        ));
    }
    out
}

/// Paired-line plot: Decrease ranks on the left axis, Increase ranks on the
/// right, one line per polar pair (the log2 scale matches the csv).
pub fn render_paired_ranks_svg(rows: &[PolarRow]) -> String {
    let (width, height, margin) = (420.0, 320.0, 30.0);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"12\" text-anchor=\"middle\">Decrease</text>\n",
        margin + 30.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"12\" text-anchor=\"middle\">Increase</text>\n",
        width - margin - 30.0
    ));
    let max_rank = rows
        .iter()
        .map(|r| r.log2_rank_decrease.max(r.log2_rank_increase))
        .fold(1e-9, f64::max);
    let y_of = |v: f64| margin + (height - 2.0 * margin) * (v / max_rank);
    let (x_left, x_right) = (margin + 30.0, width - margin - 30.0);
    for row in rows {
        let color = if row.truth == Polarity::Positive {
            "#c0392b"
        } else {
            "#2980b9"
        };
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"1\" opacity=\"0.6\"/>\n",
            x_left,
            y_of(row.log2_rank_decrease),
            x_right,
            y_of(row.log2_rank_increase),
            color
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Side-by-side 20-bin histograms of C and C'.
pub fn render_c_histogram_svg(rows: &[PolarRow]) -> String {
    const BINS: usize = 20;
    let mut c_bins = [0usize; BINS];
    let mut cp_bins = [0usize; BINS];
    for row in rows {
        let b = ((row.c * BINS as f64) as usize).min(BINS - 1);
        c_bins[b] += 1;
        let b = ((row.c_prime * BINS as f64) as usize).min(BINS - 1);
        cp_bins[b] += 1;
    }
    let peak = c_bins.iter().chain(cp_bins.iter()).max().copied().unwrap_or(0).max(1) as f64;

    let (panel_w, height, margin) = (200.0, 220.0, 24.0);
    let width = 2.0 * panel_w + 3.0 * margin;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let panel = |svg: &mut String, x0: f64, bins: &[usize; BINS], label: &str| {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"16\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            x0 + panel_w / 2.0,
            label
        ));
        let bar_w = panel_w / BINS as f64;
        for (i, &count) in bins.iter().enumerate() {
            let h = (height - 2.0 * margin) * count as f64 / peak;
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#34495e\"/>\n",
                x0 + i as f64 * bar_w,
                height - margin - h,
                bar_w.max(1.0) - 0.5,
                h
            ));
        }
    };
    panel(&mut svg, margin, &c_bins, "C");
    panel(&mut svg, 2.0 * margin + panel_w, &cp_bins, "C'");
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: f64, rank_dec: f64, rank_inc: f64) -> PolarRow {
        PolarRow {
            chem: 1,
            gene: 2,
            truth: Polarity::Positive,
            p_increase: 0.5 + c / 2.0,
            p_decrease: 0.5 - c / 2.0,
            c,
            c_prime: crate::metrics::transform_c(c).unwrap(),
            correct: true,
            log2_rank_decrease: rank_dec,
            log2_rank_increase: rank_inc,
        }
    }

    #[test]
    fn one_pair_gives_one_csv_row_and_one_line() {
        let rows = vec![row(0.4, 0.0, 0.0)];
        let csv = paired_ranks_csv(&rows);
        assert_eq!(csv.lines().count(), 2); // header + 1 row
        let svg = render_paired_ranks_svg(&rows);
        assert_eq!(svg.matches("<line ").count(), 1);
    }

    #[test]
    fn outputs_are_deterministic() {
        let rows = vec![row(0.4, 1.0, 2.0), row(0.1, 2.0, 1.0)];
        assert_eq!(paired_ranks_csv(&rows), paired_ranks_csv(&rows));
        assert_eq!(render_paired_ranks_svg(&rows), render_paired_ranks_svg(&rows));
        assert_eq!(render_c_histogram_svg(&rows), render_c_histogram_svg(&rows));
        assert_eq!(c_distribution_csv(&rows), c_distribution_csv(&rows));
    }

    #[test]
    fn c_distribution_has_correct_flag() {
        let rows = vec![row(0.25, 0.0, 0.0)];
        let csv = c_distribution_csv(&rows);
        assert!(csv.starts_with("pair_id,C,C_prime,correct\n"));
        assert!(csv.contains("c1-g2,0.250000,"));
        assert!(csv.trim_end().ends_with(",1"));
    }
}
