//! SVG chart of head height per node from a simulator trace.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use plotters::prelude::*;
use serde_json::Value;

pub struct PlotSummary {
    pub nodes: usize,
    pub points: usize,
}

/// `(t_ms, height)` steps per node, taken from `HeadChanged` lines.
pub fn head_series(trace: &[u8]) -> Result<BTreeMap<u64, Vec<(u64, u64)>>> {
    let mut series: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    for (i, line) in trace.split(|b| *b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let v: Value = serde_json::from_slice(line).with_context(|| format!("trace line {}", i + 1))?;
        if v["event"] != "HeadChanged" {
            continue;
        }
        let field = |k: &str| v[k].as_u64().ok_or_else(|| anyhow!("trace line {}: missing {k}", i + 1));
        series.entry(field("node")?).or_default().push((field("t")?, field("height")?));
    }
    Ok(series)
}

pub fn plot_trace(trace: &[u8], out: &Path) -> Result<PlotSummary> {
    let series = head_series(trace)?;
    if series.is_empty() {
        bail!("trace has no head changes");
    }
    let points = series.values().map(Vec::len).sum();
    let t_max = series.values().flatten().map(|p| p.0).max().unwrap_or(0).max(1) as f64 / 1000.0;
    let h_max = series.values().flatten().map(|p| p.1).max().unwrap_or(0).max(1);

    let root = SVGBackend::new(out, (960, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("head height per node", ("sans-serif", 20))
        .margin(16)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(0f64..t_max, 0u64..h_max + 1)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("simulated time (s)")
        .y_desc("height")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (i, (node, steps)) in series.iter().enumerate() {
        let color = Palette99::pick(i);
        let mut line = Vec::with_capacity(steps.len() * 2);
        for w in steps.windows(2) {
            line.push((w[0].0 as f64 / 1000.0, w[0].1));
            line.push((w[1].0 as f64 / 1000.0, w[0].1));
        }
        if let Some(last) = steps.last() {
            line.push((last.0 as f64 / 1000.0, last.1));
        }
        chart
            .draw_series(LineSeries::new(line, color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(format!("node {node}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().border_style(BLACK).draw().map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(PlotSummary { nodes: series.len(), points })
}
