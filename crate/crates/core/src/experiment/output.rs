//! Result persistence: deterministic CSV and JSON writers, the run
//! manifest, and minimal self-contained SVG line plots.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Provenance record tying outputs to (config, seed, version).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub created_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        let now = unix_now();
        Self {
            config_hash,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: now,
            finished_unix: now,
            outputs: Vec::new(),
        }
    }

    /// Record a written file in the inventory.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let data = fs::read(path)?;
        let digest = Sha256::digest(&data);
        self.outputs.push(OutputFile {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            bytes: data.len() as u64,
        });
        Ok(())
    }

    /// Finalize and write `manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        write_json(&path, &self)?;
        Ok(path)
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Fixed-precision float rendering shared by all CSV output; infinities
/// render as `inf`/`-inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

/// UTF-8, comma-delimited, `.` decimal separator, `\n` line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Config(format!(
                "CSV row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("JSON serialization failed: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// One named series for an SVG plot.
pub struct Series<'a> {
    pub label: &'a str,
    pub ys: &'a [f64],
}

const SVG_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Self-contained SVG line plot of one or more series against a shared
/// x axis, linearly scaled to the data range.
pub fn write_svg(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    series: &[Series],
) -> Result<()> {
    if xs.len() < 2 || series.is_empty() || series.iter().any(|s| s.ys.len() != xs.len()) {
        return Err(Error::Config("SVG plot needs matching series of length >= 2".into()));
    }
    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let finite = |v: f64| v.is_finite();
    let x_min = xs.iter().cloned().filter(|&v| finite(v)).fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().filter(|&v| finite(v)).fold(f64::NEG_INFINITY, f64::max);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &y in s.ys {
            if finite(y) {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    let x_span = (x_max - x_min).max(f64::MIN_POSITIVE);
    let y_span = (y_max - y_min).max(f64::MIN_POSITIVE);
    let px = |x: f64| ml + (x - x_min) / x_span * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y_min) / y_span * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    // axis labels and range ticks
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (mt + h - mb) / 2.0,
        xml_escape(y_label)
    ));
    for (x, anchor) in [(x_min, "start"), (x_max, "end")] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\">{:.4e}</text>\n",
            px(x),
            h - mb + 16.0,
            x
        ));
    }
    for y in [y_min, y_max] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{:.4e}</text>\n",
            ml - 6.0,
            py(y) + 4.0,
            y
        ));
    }
    for (k, s) in series.iter().enumerate() {
        let color = SVG_COLORS[k % SVG_COLORS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(s.ys.iter())
            .filter(|(&x, &y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (k as f64 + 1.0),
            xml_escape(s.label)
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
