//! On-disk datasets: a JSON manifest naming one file per column plus a label
//! file. Relative paths are resolved against the manifest's directory.
//!
//! ```json
//! {"labels": {"file": "labels.csv"},
//!  "columns": [{"name": "x", "kind": "numeric", "measure": "euclidean", "file": "x.csv"}]}
//! ```
//!
//! Column files have no header row. Numeric columns and labels are
//! single-column CSV, time series are CSV with one (possibly ragged) row per
//! example, precomputed columns are an n x n CSV matrix, and set sequences and
//! graphs are JSON Lines.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, Dataset, DistanceMatrix, FeatureColumn, FeatureValue, Graph, ItemSet, ValueKind};
use crate::distances;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub name: String,
    pub kind: String,
    pub measure: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<FileRef>,
    pub columns: Vec<ColumnEntry>,
    /// Free-form provenance, carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn resolve_path(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_records(path: &Path, column: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    reader
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::record(column, i, e)))
        .collect()
}

fn parse_f64(field: &str, column: &str, record: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::record(column, record, format!("'{field}': {e}")))
}

fn single_field<'a>(rec: &'a csv::StringRecord, column: &str, record: usize) -> Result<&'a str> {
    match rec.len() {
        1 => Ok(&rec[0]),
        n => Err(Error::record(column, record, format!("expected 1 field, found {n}"))),
    }
}

/// Non-blank lines, numbered from 0.
fn json_lines<T: serde::de::DeserializeOwned>(path: &Path, column: &str) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::record(column, i, e)))
        .collect()
}

fn load_column(entry: &ColumnEntry, path: &Path) -> Result<FeatureColumn> {
    let kind: ValueKind = entry.kind.parse()?;
    distances::resolve(kind, &entry.measure)?;
    let name = entry.name.as_str();
    let mut matrix = None;
    let values = match kind {
        ValueKind::Numeric => csv_records(path, name)?
            .iter()
            .enumerate()
            .map(|(i, r)| Ok(FeatureValue::Numeric(parse_f64(single_field(r, name, i)?, name, i)?)))
            .collect::<Result<_>>()?,
        ValueKind::TimeSeries => csv_records(path, name)?
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let xs = r.iter().map(|f| parse_f64(f, name, i)).collect::<Result<Vec<_>>>()?;
                Ok(FeatureValue::TimeSeries(xs))
            })
            .collect::<Result<_>>()?,
        ValueKind::SetSeq => json_lines::<Vec<Vec<String>>>(path, name)?
            .into_iter()
            .map(|seq| FeatureValue::SetSequence(seq.into_iter().map(ItemSet::new).collect()))
            .collect(),
        ValueKind::Graph => json_lines::<Graph>(path, name)?.into_iter().map(FeatureValue::Graph).collect(),
        ValueKind::Precomputed => {
            let rows = csv_records(path, name)?
                .iter()
                .enumerate()
                .map(|(i, r)| r.iter().map(|f| parse_f64(f, name, i)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let m = DistanceMatrix::from_rows(rows).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            let n = m.size();
            matrix = Some(m);
            (0..n).map(FeatureValue::PrecomputedRef).collect()
        }
    };
    Ok(FeatureColumn {
        name: entry.name.clone(),
        kind,
        values,
        measure: entry.measure.clone(),
        matrix,
    })
}

fn load_labels(path: &Path) -> Result<Vec<String>> {
    csv_records(path, "labels")?
        .iter()
        .enumerate()
        .map(|(i, r)| single_field(r, "labels", i).map(str::to_string))
        .collect()
}

/// Feature columns and, when the manifest names a label file, the labels.
pub fn load_columns(path: impl AsRef<Path>) -> Result<(Vec<FeatureColumn>, Option<Vec<String>>)> {
    let path = path.as_ref();
    let manifest = Manifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let columns = manifest
        .columns
        .iter()
        .map(|c| load_column(c, &resolve_path(base, &c.file)))
        .collect::<Result<Vec<_>>>()?;
    let labels = manifest
        .labels
        .as_ref()
        .map(|l| load_labels(&resolve_path(base, &l.file)))
        .transpose()?;
    Ok((columns, labels))
}

/// Loads and validates a labelled dataset.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (columns, labels) = load_columns(path)?;
    let labels = labels.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "manifest has no labels".into(),
    })?;
    let ds = Dataset::from_labels(columns, &labels);
    validate_dataset(&ds)?;
    Ok(ds)
}

fn file_stem(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:03}_{clean}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut line = fields.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn column_file(col: &FeatureColumn) -> (String, &'static str) {
    let mut out = String::new();
    let ext = match col.kind {
        ValueKind::SetSeq | ValueKind::Graph => "jsonl",
        _ => "csv",
    };
    if let Some(m) = &col.matrix {
        for i in 0..m.size() {
            out += &csv_line(m.row(i).iter().map(f64::to_string));
        }
        return (out, ext);
    }
    for v in &col.values {
        match v {
            FeatureValue::Numeric(x) => out += &csv_line([x.to_string()]),
            FeatureValue::TimeSeries(xs) => out += &csv_line(xs.iter().map(f64::to_string)),
            FeatureValue::SetSequence(seq) => {
                out += &serde_json::to_string(seq).expect("string sets serialize");
                out.push('\n');
            }
            FeatureValue::Graph(g) => {
                out += &serde_json::to_string(g).expect("graphs serialize");
                out.push('\n');
            }
            FeatureValue::PrecomputedRef(_) => {}
        }
    }
    (out, ext)
}

/// Writes `ds` as a manifest plus column files into `dir`, returning the
/// manifest path. Precomputed columns are written as their full matrix, so
/// their values must be the references `0..n` in order.
pub fn write_manifest(ds: &Dataset, dir: impl AsRef<Path>, meta: Option<serde_json::Value>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut labels = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for l in ds.labels() {
        labels.write_record([l]).map_err(|e| Error::Config(e.to_string()))?;
    }
    let labels = labels.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("labels.csv"), labels).map_err(|e| Error::io(dir.join("labels.csv"), e))?;
    let mut columns = Vec::new();
    for (i, col) in ds.columns.iter().enumerate() {
        if col.kind == ValueKind::Precomputed
            && !col.values.iter().enumerate().all(|(k, v)| *v == FeatureValue::PrecomputedRef(k))
        {
            return Err(Error::Config(format!(
                "column '{}': only identity-ordered precomputed columns can be written",
                col.name
            )));
        }
        let (contents, ext) = column_file(col);
        let file = format!("{}.{ext}", file_stem(i, &col.name));
        write_file(&dir.join(&file), &contents)?;
        columns.push(ColumnEntry {
            name: col.name.clone(),
            kind: col.kind.to_string(),
            measure: col.measure.clone(),
            file,
        });
    }
    let manifest = Manifest {
        labels: Some(FileRef {
            file: "labels.csv".into(),
        }),
        columns,
        meta,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write_file(&path, &text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn manifest(dir: &Path, columns: &str) -> PathBuf {
        let text = format!(r#"{{"labels": {{"file": "labels.csv"}}, "columns": [{columns}]}}"#);
        write(dir, "manifest.json", &text);
        dir.join("manifest.json")
    }

    #[test]
    fn numeric_column() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "labels.csv", "a\nb\na\nb\n");
        write(dir.path(), "x.csv", "1.5\n2\n-3\n4e2\n");
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "numeric", "measure": "euclidean", "file": "x.csv"}"#);
        let ds = load_manifest(&m).unwrap();
        assert_eq!((ds.n_examples(), ds.n_features()), (4, 1));
        assert_eq!(ds.columns[0].values[3], FeatureValue::Numeric(400.0));
        assert_eq!(load_manifest(&m).unwrap(), ds);
    }

    #[test]
    fn bad_graph_names_column_and_row() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "labels.csv", "a\nb\n");
        write(dir.path(), "g.jsonl", "{\"n\": 5, \"edges\": [[0, 1]]}\n{\"n\": 5, \"edges\": [[0, 7]]}\n");
        let m = manifest(dir.path(), r#"{"name": "net", "kind": "graph", "measure": "graphjaccard", "file": "g.jsonl"}"#);
        let err = load_manifest(&m).unwrap_err();
        assert!(matches!(&err, Error::Record { column, record: 1, .. } if column == "net"), "{err}");
    }

    #[test]
    fn three_classes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "labels.csv", "a\nb\nc\n");
        write(dir.path(), "x.csv", "1\n2\n3\n");
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "numeric", "measure": "euclidean", "file": "x.csv"}"#);
        let err = load_manifest(&m).unwrap_err().to_string();
        assert!(err.contains("binary classification only"), "{err}");
    }

    #[test]
    fn lookup_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "labels.csv", "a\nb\n");
        write(dir.path(), "x.csv", "1\nz\n");
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "numeric", "measure": "euclidean", "file": "x.csv"}"#);
        assert!(matches!(load_manifest(&m), Err(Error::Record { record: 1, .. })));
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "vector", "measure": "euclidean", "file": "x.csv"}"#);
        assert!(matches!(load_manifest(&m), Err(Error::UnknownKind(_))));
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "numeric", "measure": "dtw", "file": "x.csv"}"#);
        assert!(matches!(load_manifest(&m), Err(Error::UnknownMeasure { .. })));
        let m = manifest(dir.path(), r#"{"name": "x", "kind": "numeric", "measure": "euclidean", "file": "missing.csv"}"#);
        assert!(matches!(load_manifest(&m), Err(Error::Io { .. })));
        assert!(matches!(load_manifest(dir.path().join("nope.json")), Err(Error::Io { .. })));
    }

    #[test]
    fn round_trip_every_kind() {
        let seq = |s: &[&[&str]]| FeatureValue::SetSequence(s.iter().map(|x| ItemSet::new(x.iter().copied())).collect());
        let columns = vec![
            FeatureColumn::numeric("num", [0.1, -2.5, 1e-300]),
            FeatureColumn::new(
                "ts",
                ValueKind::TimeSeries,
                "dtw",
                vec![
                    FeatureValue::TimeSeries(vec![1.0, 2.0]),
                    FeatureValue::TimeSeries(vec![0.3]),
                    FeatureValue::TimeSeries(vec![1.0, 2.0, 3.0]),
                ],
            ),
            FeatureColumn::new("sets", ValueKind::SetSeq, "editjaccard", vec![seq(&[&["a", "b"]]), seq(&[&["a"], &["c"]]), seq(&[&["x,y"]])]),
            FeatureColumn::new(
                "g",
                ValueKind::Graph,
                "degreedivergence",
                vec![
                    FeatureValue::Graph(Graph::new(3, [(0, 1)]).unwrap()),
                    FeatureValue::Graph(Graph::new(2, []).unwrap()),
                    FeatureValue::Graph(Graph::new(4, [(3, 1), (0, 2)]).unwrap()),
                ],
            ),
            FeatureColumn::precomputed(
                "d m",
                DistanceMatrix::from_rows(vec![vec![0.0, 0.5, 2.0], vec![0.5, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap(),
            ),
        ];
        let ds = Dataset::new(columns, &["no, really", "yes", "yes"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(&ds, dir.path(), Some(serde_json::json!({"seed": 7}))).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), ds);
        assert_eq!(Manifest::read(&path).unwrap().meta, Some(serde_json::json!({"seed": 7})));
        let (cols, labels) = load_columns(&path).unwrap();
        assert_eq!(cols, ds.columns);
        assert_eq!(labels.unwrap().len(), 3);
    }
}
