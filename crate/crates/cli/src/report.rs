use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use polyloom::sparse::SweepRow;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// First line of every results table; bump the number when columns change.
pub const RESULTS_SCHEMA: &str = "# polyloom results v1";
pub const SWEEP_SCHEMA: &str = "# polyloom sweep v1";

/// One timed experiment. `speedup` is relative to the first row of the
/// same table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub params: String,
    pub median_ns: u64,
    pub checksum: String,
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub density: f64,
    pub nnz: usize,
    pub dense_ns: u64,
    pub sparse_ns: u64,
    pub ratio: f64,
    pub rel_err: f64,
    pub checksum: String,
}

/// Leading 16 hex digits of the SHA-256 of the values' little-endian bytes.
pub fn checksum_f32(values: &[f32]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex16(&h.finalize())
}

pub fn checksum_f64(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex16(&h.finalize())
}

fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<SweepCsvRow> {
    rows.iter()
        .map(|r| SweepCsvRow {
            density: r.density,
            nnz: r.nnz,
            dense_ns: r.dense_ns,
            sparse_ns: r.sparse_ns,
            ratio: r.ratio,
            rel_err: r.rel_err,
            checksum: checksum_f32(r.sparse_out.data()),
        })
        .collect()
}

/// Schema line followed by a header row and one line per record.
pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{schema}").with_context(|| format!("writing {}", path.display()))?;
    let mut c = csv::Writer::from_writer(w);
    for r in rows {
        c.serialize(r).with_context(|| format!("writing {}", path.display()))?;
    }
    c.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a table written by [`write_csv`], checking its schema line.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    anyhow::ensure!(first == schema, "{}: expected schema {schema:?}, found {first:?}", path.display());
    csv::Reader::from_reader(rest.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot of sparse/dense time ratio against density, with the
/// break-even line at ratio 1 and the crossover marked.
pub fn sweep_svg(rows: &[SweepCsvRow], crossover: Option<f64>, title: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let ymax = rows.iter().map(|r| r.ratio).fold(1.2f64, f64::max) * 1.05;
    let x = |d: f64| left + d.clamp(0.0, 1.0) * pw;
    let y = |r: f64| top + ph - (r / ymax).clamp(0.0, 1.0) * ph;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for i in 0..=10 {
        let d = i as f64 / 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            x(d),
            top + ph + 16.0,
            i * 10
        );
    }
    for i in 0..=4 {
        let r = ymax * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{r:.2}</text>"#,
            left - 6.0,
            y(r) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">weight density (%)</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle" font-size="12">sparse / dense time</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{y1:.1}" x2="{:.1}" y2="{y1:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
        left + pw,
        y1 = y(1.0)
    );
    let pts: Vec<String> = rows.iter().map(|r| format!("{:.1},{:.1}", x(r.density), y(r.ratio))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##, pts.join(" "));
    for r in rows {
        let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#1f5fa8"/>"##, x(r.density), y(r.ratio));
    }
    if let Some(c) = crossover {
        let _ = writeln!(
            s,
            r##"<line x1="{cx:.1}" y1="{top}" x2="{cx:.1}" y2="{:.1}" stroke="#c0392b"/>"##,
            top + ph,
            cx = x(c)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#c0392b">crossover {:.1}%</text>"##,
            x(c) + 4.0,
            top + 14.0,
            c * 100.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: f64, ratio: f64) -> SweepCsvRow {
        SweepCsvRow { density: d, nnz: 1, dense_ns: 10, sparse_ns: 5, ratio, rel_err: 0.0, checksum: "00".into() }
    }

    #[test]
    fn checksums_are_stable_and_sensitive() {
        assert_eq!(checksum_f32(&[1.0, 2.0]), checksum_f32(&[1.0, 2.0]));
        assert_ne!(checksum_f32(&[1.0, 2.0]), checksum_f32(&[2.0, 1.0]));
        assert_eq!(checksum_f32(&[]).len(), 16);
        // sha256 of the empty input starts with e3b0c442
        assert!(checksum_f64([]).starts_with("e3b0c442"));
    }

    #[test]
    fn csv_round_trip_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = vec![row(0.01, 0.1), row(1.0, 2.0)];
        write_csv(&p, SWEEP_SCHEMA, &rows).unwrap();
        assert_eq!(read_csv::<SweepCsvRow>(&p, SWEEP_SCHEMA).unwrap(), rows);
        assert!(read_csv::<SweepCsvRow>(&p, RESULTS_SCHEMA).is_err());
    }

    #[test]
    fn svg_marks_crossover_and_escapes() {
        let s = sweep_svg(&[row(0.01, 0.1), row(0.5, 1.5)], Some(0.5), "a < b & c");
        assert!(s.contains("crossover 50.0%"));
        assert!(s.contains("a &lt; b &amp; c"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(!sweep_svg(&[row(0.01, 0.1)], None, "t").contains("crossover"));
    }
}
