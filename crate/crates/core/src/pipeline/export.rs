//! Graph and matrix exports, plus re-import of labeled matrix CSVs.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::netanalysis::Partition;
use crate::simbuild::{SimilarityKind, SimilarityLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    EdgeList,
    Graphml,
    CsvMatrix,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::EdgeList => "edges.csv",
            ExportFormat::Graphml => "graphml",
            ExportFormat::CsvMatrix => "matrix.csv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-list" => Ok(ExportFormat::EdgeList),
            "graphml" => Ok(ExportFormat::Graphml),
            "csv-matrix" => Ok(ExportFormat::CsvMatrix),
            other => Err(Error::InvalidParameter(format!(
                "unknown export format `{other}`"
            ))),
        }
    }
}

/// Shortest decimal text that parses back to the same `f64`.
///
/// Uses positional notation in `[1e-5, 1e16)` and exponent notation outside it.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// `source,target,weight` for every `i < j` with weight above `threshold`.
pub fn render_edge_list(s: &SimilarityLayer, threshold: f64) -> String {
    let mut out = String::from("source,target,weight\n");
    let labels = s.labels();
    for i in 0..s.n() {
        for j in (i + 1)..s.n() {
            let w = s.matrix().get(i, j);
            if w > threshold {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    csv_field(&labels[i]),
                    csv_field(&labels[j]),
                    format_float(w)
                );
            }
        }
    }
    out
}

pub fn render_matrix_csv(labels: &[String], m: &SymMatrix) -> String {
    let mut out = String::from("node");
    for l in labels {
        out.push(',');
        out.push_str(&csv_field(l));
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&csv_field(l));
        for j in 0..m.n() {
            out.push(',');
            out.push_str(&format_float(m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn render_graphml(
    s: &SimilarityLayer,
    partition: &Partition,
    threshold: f64,
) -> Result<String> {
    if partition.labels() != s.labels() {
        return Err(Error::InvalidInput(
            "partition labels do not match the network".into(),
        ));
    }
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str(
        "  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n",
    );
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for (label, c) in s.labels().iter().zip(partition.community()) {
        let _ = writeln!(
            out,
            "    <node id=\"{}\"><data key=\"community\">{c}</data></node>",
            xml_escape(label)
        );
    }
    for i in 0..s.n() {
        for j in (i + 1)..s.n() {
            let w = s.matrix().get(i, j);
            if w > threshold {
                let _ = writeln!(
                    out,
                    "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data></edge>",
                    xml_escape(&s.labels()[i]),
                    xml_escape(&s.labels()[j]),
                    format_float(w)
                );
            }
        }
    }
    out.push_str("  </graph>\n</graphml>\n");
    Ok(out)
}

/// Renders `s` in `format`; `partition` is only consulted for GraphML.
pub fn render_graph(
    s: &SimilarityLayer,
    partition: &Partition,
    format: ExportFormat,
    threshold: f64,
) -> Result<String> {
    match format {
        ExportFormat::EdgeList => Ok(render_edge_list(s, threshold)),
        ExportFormat::Graphml => render_graphml(s, partition, threshold),
        ExportFormat::CsvMatrix => Ok(render_matrix_csv(s.labels(), s.matrix())),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn export_graph(
    s: &SimilarityLayer,
    partition: &Partition,
    format: ExportFormat,
    threshold: f64,
    path: &Path,
) -> Result<()> {
    write_text(path, &render_graph(s, partition, format, threshold)?)
}

/// Reads a labeled square matrix as written by the `csv-matrix` export.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, SymMatrix)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    if n == 0 {
        return Err(Error::parse(path, 1, "matrix header has no node labels"));
    }
    let mut rows = Vec::with_capacity(n);
    for record in reader.records() {
        let record = record
            .map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if rows.len() == n {
            return Err(Error::parse(path, line, "more rows than columns"));
        }
        if record.get(0) != Some(labels[rows.len()].as_str()) {
            return Err(Error::parse(
                path,
                line,
                format!("row label does not match column `{}`", labels[rows.len()]),
            ));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("`{cell}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::parse(
            path,
            rows.len() as u64 + 1,
            format!("expected {n} rows"),
        ));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rows[i][j] != rows[j][i] {
                return Err(Error::parse(
                    path,
                    i as u64 + 2,
                    format!("matrix is not symmetric at ({i}, {j})"),
                ));
            }
        }
    }
    Ok((labels, SymMatrix::from_rows(&rows)?))
}

/// Reads a `csv-matrix` file as a similarity network.
pub fn read_similarity_csv(path: &Path) -> Result<SimilarityLayer> {
    let (labels, m) = read_matrix_csv(path)?;
    SimilarityLayer::new(labels, m, SimilarityKind::External)
}
