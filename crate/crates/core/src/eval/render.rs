use std::fmt::Write;

use super::ComparisonTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
    SvgBars,
}

/// Decimal with 6 significant digits, no exponent.
fn format_sig6(value: f64) -> String {
    if value == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

pub fn render_table(table: &ComparisonTable, format: TableFormat) -> String {
    match format {
        TableFormat::Text => render_text(table),
        TableFormat::Csv => render_csv(table),
        TableFormat::SvgBars => render_svg(table),
    }
}

fn render_csv(table: &ComparisonTable) -> String {
    let mut out = String::new();
    out.push_str("dataset");
    for variant in &table.variants {
        out.push(',');
        out.push_str(variant);
    }
    out.push('\n');
    for (row, dataset) in table.datasets.iter().enumerate() {
        out.push_str(dataset);
        for col in 0..table.variants.len() {
            out.push(',');
            if let Some(report) = &table.cells[row][col] {
                out.push_str(&format_sig6(report.perplexity));
            }
        }
        out.push('\n');
    }
    out
}

fn render_text(table: &ComparisonTable) -> String {
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["dataset".to_string()];
    header.extend(table.variants.iter().cloned());
    grid.push(header);
    for (row, dataset) in table.datasets.iter().enumerate() {
        let mut line = vec![dataset.clone()];
        for col in 0..table.variants.len() {
            line.push(match &table.cells[row][col] {
                Some(r) => format_sig6(r.perplexity),
                None => "\u{2014}".to_string(),
            });
        }
        grid.push(line);
    }
    let columns = grid[0].len();
    let widths: Vec<usize> = (0..columns)
        .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in &grid {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            let pad = widths[c] - cell.chars().count();
            if c == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}

const BAR_PALETTE: &[&str] = &[
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
];

const PLOT_HEIGHT: f64 = 240.0;
const BAR_WIDTH: f64 = 28.0;
const BAR_GAP: f64 = 6.0;
const GROUP_GAP: f64 = 34.0;
const MARGIN_LEFT: f64 = 52.0;
const BASELINE_Y: f64 = 300.0;

/// Grouped bars per dataset, one bar per variant, heights proportional to
/// perplexity scaled by the table's maximum.
fn render_svg(table: &ComparisonTable) -> String {
    let max_value = table
        .cells
        .iter()
        .flatten()
        .flatten()
        .map(|r| r.perplexity)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let group_width = table.variants.len() as f64 * (BAR_WIDTH + BAR_GAP) - BAR_GAP;
    let width = MARGIN_LEFT + table.datasets.len() as f64 * (group_width + GROUP_GAP) + 20.0;
    let height = BASELINE_Y + 60.0;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">"
    )
    .unwrap();
    writeln!(svg, "  <style>text {{ font: 11px sans-serif; }}</style>").unwrap();
    writeln!(
        svg,
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{BASELINE_Y}\" x2=\"{:.2}\" y2=\"{BASELINE_Y}\" stroke=\"#333\"/>",
        width - 10.0
    )
    .unwrap();

    // legend
    for (i, variant) in table.variants.iter().enumerate() {
        let color = BAR_PALETTE[i % BAR_PALETTE.len()];
        let x = MARGIN_LEFT + i as f64 * 110.0;
        writeln!(
            svg,
            "  <rect x=\"{x:.2}\" y=\"8\" width=\"10\" height=\"10\" fill=\"{color}\"/>"
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"17\">{}</text>",
            x + 14.0,
            escape_xml(variant)
        )
        .unwrap();
    }

    for (row, dataset) in table.datasets.iter().enumerate() {
        let group_x = MARGIN_LEFT + row as f64 * (group_width + GROUP_GAP);
        for (col, _) in table.variants.iter().enumerate() {
            if let Some(report) = &table.cells[row][col] {
                let bar_height = report.perplexity / max_value * PLOT_HEIGHT;
                let x = group_x + col as f64 * (BAR_WIDTH + BAR_GAP);
                let y = BASELINE_Y - bar_height;
                let color = BAR_PALETTE[col % BAR_PALETTE.len()];
                writeln!(
                    svg,
                    "  <rect class=\"bar\" data-dataset=\"{}\" data-variant=\"{}\" \
                     x=\"{x:.3}\" y=\"{y:.3}\" width=\"{BAR_WIDTH}\" height=\"{bar_height:.3}\" \
                     fill=\"{color}\"/>",
                    escape_xml(dataset),
                    escape_xml(&table.variants[col]),
                )
                .unwrap();
            }
        }
        writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            group_x + group_width / 2.0,
            BASELINE_Y + 16.0,
            escape_xml(dataset)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
