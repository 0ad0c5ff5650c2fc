//! CSV and JSON emission. Every CSV starts with a comment row carrying the
//! SHA-256 of its header, so a reader can detect schema drift.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::ser::{Serialize, SerializeMap, Serializer};
use sha2::{Digest, Sha256};

use crate::coord::Trace;
use crate::error::Result;
use crate::graph::{Network, NodeEdgeVector};

/// A node/edge vector serialized as `{"n1": .., "e1_2": ..}` in entry order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVector(pub Vec<(String, f64)>);

impl LabeledVector {
    pub fn new(net: &Network, v: &NodeEdgeVector) -> Self {
        LabeledVector(net.labels().into_iter().zip(v.iter()).collect())
    }
}

impl Serialize for LabeledVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub fn schema_line(header: &str) -> String {
    let digest = Sha256::digest(header.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("# schema-sha256: {hex}")
}

pub fn trace_header(net: &Network) -> String {
    let labels = net.labels();
    let mut cols = vec!["t".to_string(), "gain".to_string()];
    for prefix in ["theta", "sbar", "shat"] {
        cols.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    cols.join(",")
}

fn push_all(row: &mut String, v: &NodeEdgeVector) {
    for x in v.iter() {
        row.push(',');
        row.push_str(&x.to_string());
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, net: &Network, trace: &Trace) -> Result<()> {
    let header = trace_header(net);
    writeln!(w, "{}", schema_line(&header))?;
    writeln!(w, "{header}")?;
    let mut row = String::new();
    for r in &trace.records {
        row.clear();
        row.push_str(&r.t.to_string());
        row.push(',');
        row.push_str(&r.gain.to_string());
        push_all(&mut row, &r.theta);
        push_all(&mut row, &r.s_bar);
        push_all(&mut row, &r.s_hat);
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV with the schema comment, a header and preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", schema_line(header))?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// First non-comment line of a CSV document.
pub fn csv_header(text: &str) -> Option<&str> {
    text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))
}

/// gnuplot `using` clauses plotting every column against the first.
pub fn gnuplot_columns(header: &str, file: &str) -> String {
    let cols: Vec<&str> = header.split(',').collect();
    let mut out = String::from("set datafile separator ','\nset datafile commentschars '#'\n");
    for (k, name) in cols.iter().enumerate() {
        out.push_str(&format!("# column {} = {}\n", k + 1, name));
    }
    if cols.len() > 1 {
        let plots: Vec<String> = cols
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, name)| format!("'{file}' using 1:{} every ::1 with lines title '{name}'", k + 1))
            .collect();
        out.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    }
    out
}
