//! Deterministic report rendering: phase-diagram heatmaps as hand-emitted
//! SVG plus a markdown summary, all pure functions of the sweep CSV.

use crate::{Error, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Parsed sweep CSV.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub gamma: f64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub algorithms: Vec<String>,
    /// `values[alg][metric][iy * lambdas.len() + ix]`, metrics ordered
    /// (rejection_rate, mean_overlap, mean_cov_overlap).
    pub values: Vec<[Vec<f64>; 3]>,
}

const SCHEMA_LINE: &str = "# csbm-sweep v1";

fn ordered_key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Parses and validates a `csbm-sweep v1` CSV.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first.trim() == SCHEMA_LINE => {}
        other => {
            return Err(Error::Schema(format!(
                "expected schema line `{SCHEMA_LINE}`, found {other:?}"
            )))
        }
    }

    let mut gamma = None;
    let mut header: Option<Vec<String>> = None;
    let mut records: Vec<(f64, f64, String, f64, f64, f64)> = Vec::new();

    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some(v) = token.strip_prefix("gamma=") {
                    gamma = v.parse::<f64>().ok();
                }
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            let h = header.as_ref().unwrap();
            for need in ["lambda", "mu", "algorithm", "rejection_rate", "mean_overlap",
                "mean_cov_overlap"]
            {
                if !h.iter().any(|c| c == need) {
                    return Err(Error::Schema(format!("missing column `{need}`")));
                }
            }
            continue;
        }
        let h = header.as_ref().unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != h.len() {
            return Err(Error::Schema(format!(
                "row has {} fields, header has {}",
                fields.len(),
                h.len()
            )));
        }
        let get = |name: &str| -> Result<&str> {
            let idx = h.iter().position(|c| c == name).unwrap();
            Ok(fields[idx])
        };
        let parse = |name: &str| -> Result<f64> {
            get(name)?
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("bad numeric field `{name}`")))
        };
        records.push((
            parse("lambda")?,
            parse("mu")?,
            get("algorithm")?.to_string(),
            parse("rejection_rate")?,
            parse("mean_overlap")?,
            parse("mean_cov_overlap")?,
        ));
    }

    if records.is_empty() {
        return Err(Error::Schema("no cells".into()));
    }
    let gamma = gamma.ok_or_else(|| Error::Schema("missing `gamma=` params comment".into()))?;

    let lambda_keys: BTreeSet<i64> = records.iter().map(|r| ordered_key(r.0)).collect();
    let mu_keys: BTreeSet<i64> = records.iter().map(|r| ordered_key(r.1)).collect();
    let lambdas: Vec<f64> = lambda_keys.iter().map(|&k| k as f64 / 1e9).collect();
    let mus: Vec<f64> = mu_keys.iter().map(|&k| k as f64 / 1e9).collect();
    let mut algorithms: Vec<String> = Vec::new();
    for r in &records {
        if !algorithms.contains(&r.2) {
            algorithms.push(r.2.clone());
        }
    }
    algorithms.sort();

    let (nx, ny) = (lambdas.len(), mus.len());
    let mut values: Vec<[Vec<f64>; 3]> = algorithms
        .iter()
        .map(|_| [vec![f64::NAN; nx * ny], vec![f64::NAN; nx * ny], vec![f64::NAN; nx * ny]])
        .collect();
    let lx: Vec<i64> = lambdas.iter().map(|&x| ordered_key(x)).collect();
    let my: Vec<i64> = mus.iter().map(|&x| ordered_key(x)).collect();
    for r in &records {
        let ix = lx.iter().position(|&k| k == ordered_key(r.0)).unwrap();
        let iy = my.iter().position(|&k| k == ordered_key(r.1)).unwrap();
        let ai = algorithms.iter().position(|a| *a == r.2).unwrap();
        values[ai][0][iy * nx + ix] = r.3;
        values[ai][1][iy * nx + ix] = r.4;
        values[ai][2][iy * nx + ix] = r.5;
    }
    Ok(SweepTable { gamma, lambdas, mus, algorithms, values })
}

/// Five-anchor approximation of the viridis colormap.
fn colormap(t: f64) -> (u8, u8, u8) {
    const ANCHORS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let k = (t.floor() as usize).min(3);
    let frac = t - k as f64;
    let lerp = |a: f64, b: f64| a + (b - a) * frac;
    (
        lerp(ANCHORS[k].0, ANCHORS[k + 1].0).round() as u8,
        lerp(ANCHORS[k].1, ANCHORS[k + 1].1).round() as u8,
        lerp(ANCHORS[k].2, ANCHORS[k + 1].2).round() as u8,
    )
}

const CELL: f64 = 34.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_B: f64 = 46.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_R: f64 = 70.0;

/// Renders one heatmap (values on a fixed [0, 1] color scale) with the
/// threshold curve `lambda^2 + mu^2/gamma = 1` overlaid.
pub fn render_heatmap(table: &SweepTable, alg_index: usize, metric: usize, title: &str) -> String {
    let nx = table.lambdas.len();
    let ny = table.mus.len();
    let plot_w = CELL * nx as f64;
    let plot_h = CELL * ny as f64;
    let width = MARGIN_L + plot_w + MARGIN_R;
    let height = MARGIN_T + plot_h + MARGIN_B;
    let vals = &table.values[alg_index][metric];

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        title
    );

    // Cells; mu increases upward.
    for iy in 0..ny {
        for ix in 0..nx {
            let v = vals[iy * nx + ix];
            let (r, g, b) = if v.is_nan() { (200, 200, 200) } else { colormap(v) };
            let x = MARGIN_L + CELL * ix as f64;
            let y = MARGIN_T + plot_h - CELL * (iy + 1) as f64;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
                 fill=\"rgb({r},{g},{b})\"/>"
            );
        }
    }

    // Axis labels at first/last grid values.
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"middle\">lambda</text>",
        MARGIN_L + plot_w / 2.0,
        MARGIN_T + plot_h + 34.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">mu</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );
    for (pos, val) in [(0usize, table.lambdas[0]), (nx - 1, table.lambdas[nx - 1])] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"middle\">{val:.2}</text>",
            MARGIN_L + CELL * (pos as f64 + 0.5),
            MARGIN_T + plot_h + 14.0
        );
    }
    for (pos, val) in [(0usize, table.mus[0]), (ny - 1, table.mus[ny - 1])] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"end\">{val:.2}</text>",
            MARGIN_L - 6.0,
            MARGIN_T + plot_h - CELL * (pos as f64 + 0.5) + 3.5
        );
    }

    // Color scale.
    for k in 0..=40 {
        let t = k as f64 / 40.0;
        let (r, g, b) = colormap(t);
        let x = MARGIN_L + plot_w + 18.0;
        let y = MARGIN_T + plot_h * (1.0 - t) - plot_h / 41.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"12\" height=\"{:.2}\" \
             fill=\"rgb({r},{g},{b})\"/>",
            plot_h / 41.0 + 0.5
        );
    }
    for (t, label) in [(0.0, "0.0"), (1.0, "1.0")] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"10\">{label}</text>",
            MARGIN_L + plot_w + 34.0,
            MARGIN_T + plot_h * (1.0 - t) + 3.5
        );
    }

    // Analytic threshold curve lambda = sqrt(1 - mu^2/gamma), drawn in the
    // cell-center coordinate system of the grid.
    if nx > 1 && ny > 1 {
        let (l0, l1) = (table.lambdas[0], table.lambdas[nx - 1]);
        let (m0, m1) = (table.mus[0], table.mus[ny - 1]);
        let sx = plot_w - CELL; // span between first and last cell centers
        let sy = plot_h - CELL;
        let mut path = String::new();
        let mut started = false;
        for k in 0..=256 {
            let mu = m0 + (m1 - m0) * k as f64 / 256.0;
            let l2 = 1.0 - mu * mu / table.gamma;
            if l2 < 0.0 {
                continue;
            }
            let lambda = l2.sqrt();
            if lambda < l0.min(l1) || lambda > l0.max(l1) {
                continue;
            }
            let x = MARGIN_L + CELL / 2.0 + sx * (lambda - l0) / (l1 - l0);
            let y = MARGIN_T + plot_h - CELL / 2.0 - sy * (mu - m0) / (m1 - m0);
            let _ = write!(path, "{}{x:.2},{y:.2} ", if started { "L" } else { "M" });
            started = true;
        }
        if started {
            let _ = writeln!(
                svg,
                "<path d=\"{}\" fill=\"none\" stroke=\"red\" stroke-width=\"1.8\"/>",
                path.trim_end()
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}

/// Markdown summary table of the sweep.
pub fn render_summary(table: &SweepTable) -> String {
    let mut md = String::new();
    md.push_str("# Sweep summary\n\n");
    let _ = writeln!(
        md,
        "Grid: {} lambda x {} mu cells, gamma = {:.4}.\n",
        table.lambdas.len(),
        table.mus.len(),
        table.gamma
    );
    md.push_str(
        "| algorithm | region | cells | mean rejection | mean overlap | mean cov overlap |\n",
    );
    md.push_str("|---|---|---|---|---|---|\n");
    let nx = table.lambdas.len();
    for (ai, alg) in table.algorithms.iter().enumerate() {
        for (region, below) in [("subcritical", true), ("supercritical", false)] {
            let mut count = 0usize;
            let mut sums = [0.0f64; 3];
            for (iy, &mu) in table.mus.iter().enumerate() {
                for (ix, &lambda) in table.lambdas.iter().enumerate() {
                    let snr = lambda * lambda + mu * mu / table.gamma;
                    if (snr < 1.0) == below {
                        count += 1;
                        for (metric, acc) in sums.iter_mut().enumerate() {
                            *acc += table.values[ai][metric][iy * nx + ix];
                        }
                    }
                }
            }
            if count == 0 {
                let _ = writeln!(md, "| {alg} | {region} | 0 | - | - | - |");
            } else {
                let _ = writeln!(
                    md,
                    "| {alg} | {region} | {count} | {:.4} | {:.4} | {:.4} |",
                    sums[0] / count as f64,
                    sums[1] / count as f64,
                    sums[2] / count as f64
                );
            }
        }
    }
    md
}

/// Renders the three per-algorithm heatmaps plus `summary.md` into
/// `out_dir`; returns the written paths.
pub fn report(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(csv_path)?;
    let table = parse_sweep_csv(&text)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let metrics = ["rejection_rate", "mean_overlap", "mean_cov_overlap"];
    for (ai, alg) in table.algorithms.iter().enumerate() {
        for (metric, name) in metrics.iter().enumerate() {
            let title = format!("{name} ({alg})");
            let svg = render_heatmap(&table, ai, metric, &title);
            let path = out_dir.join(format!("{name}_{alg}.svg"));
            std::fs::write(&path, svg)?;
            written.push(path);
        }
    }
    let summary = out_dir.join("summary.md");
    std::fs::write(&summary, render_summary(&table))?;
    written.push(summary);
    Ok(written)
}
