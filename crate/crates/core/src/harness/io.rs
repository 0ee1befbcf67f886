//! CSV formats: cluster maps, dense vectors, score matrices and rankings.

use std::fs::File;
use std::path::Path;

use crate::base::{ClusterMap, ExampleId, Ranking, ScoreMatrix, SparseVector};
use crate::error::{Error, Result};

/// Formats with six significant digits, shortest form.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("valid float");
    format!("{rounded}")
}

fn parse_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn bad_field(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    if got.iter().ne(want.iter().copied()) {
        return Err(bad_field(path, 1, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec.get(i).ok_or_else(|| bad_field(path, line, format!("missing column {i}")))?;
    raw.parse()
        .map_err(|_| bad_field(path, line, format!("cannot parse {raw:?}")))
}

/// `example_id,cluster_id`. Absent ids are singletons.
pub fn read_cluster_csv(path: &Path) -> Result<Vec<(ExampleId, u64)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers().map_err(|e| parse_err(path, e))?, &["example_id", "cluster_id"])?;
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| parse_err(path, e))?;
            Ok((ExampleId(field(path, &rec, 0)?), field(path, &rec, 1)?))
        })
        .collect()
}

pub fn write_cluster_csv(path: &Path, map: &ClusterMap) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e: csv::Error| parse_err(path, e);
    w.write_record(["example_id", "cluster_id"]).map_err(io)?;
    for (id, c) in map.iter() {
        w.write_record([id.to_string(), c.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `example_id,v0,v1,...`.
pub fn read_vectors_csv(path: &Path) -> Result<Vec<(ExampleId, SparseVector)>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| parse_err(path, e))?.clone();
    let dim = header.len().saturating_sub(1);
    let expected = std::iter::once("example_id".to_string()).chain((0..dim).map(|j| format!("v{j}")));
    if dim == 0 || header.iter().ne(expected.collect::<Vec<_>>().iter().map(String::as_str)) {
        return Err(bad_field(path, 1, "expected header example_id,v0,v1,..."));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| parse_err(path, e))?;
            let id = ExampleId(field(path, &rec, 0)?);
            let values = (1..=dim).map(|j| field(path, &rec, j)).collect::<Result<Vec<f64>>>()?;
            Ok((id, SparseVector::from_dense(&values)?))
        })
        .collect()
}

/// `example_id,seed_<s1>,seed_<s2>,...`.
pub fn read_score_csv(path: &Path) -> Result<ScoreMatrix<f64>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| parse_err(path, e))?.clone();
    if header.get(0) != Some("example_id") || header.len() < 2 {
        return Err(bad_field(path, 1, "expected header example_id,seed_<s>,..."));
    }
    let seeds = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("seed_")
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| bad_field(path, 1, format!("bad seed column {h:?}")))
        })
        .collect::<Result<Vec<u64>>>()?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        ids.push(ExampleId(field(path, &rec, 0)?));
        rows.push((1..=seeds.len()).map(|j| field(path, &rec, j)).collect::<Result<Vec<f64>>>()?);
    }
    ScoreMatrix::from_rows(ids, seeds, &rows)
}

pub fn write_score_csv(path: &Path, m: &ScoreMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e: csv::Error| parse_err(path, e);
    let header: Vec<String> = std::iter::once("example_id".to_string())
        .chain(m.seed_labels().iter().map(|s| format!("seed_{s}")))
        .collect();
    w.write_record(&header).map_err(io)?;
    for (i, id) in m.example_ids().iter().enumerate() {
        let row: Vec<String> = std::iter::once(id.to_string())
            .chain(m.row(i).into_iter().map(fmt_float))
            .collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `position,example_id,score`, positions starting at 1.
pub fn write_ranking_csv(path: &Path, r: &Ranking<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e: csv::Error| parse_err(path, e);
    w.write_record(["position", "example_id", "score"]).map_err(io)?;
    for (p, id) in r.order().iter().enumerate() {
        let score = r.scores().map_or(String::new(), |s| fmt_float(s[p]));
        w.write_record([(p + 1).to_string(), id.to_string(), score]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ranking_csv(path: &Path) -> Result<Ranking<f64>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers().map_err(|e| parse_err(path, e))?, &["position", "example_id", "score"])?;
    let mut rows: Vec<(usize, ExampleId, Option<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let score = match rec.get(2) {
            Some("") | None => None,
            Some(_) => Some(field(path, &rec, 2)?),
        };
        rows.push((field(path, &rec, 0)?, ExampleId(field(path, &rec, 1)?), score));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
        return Err(bad_field(path, 0, "positions must run 1..n"));
    }
    let order: Vec<ExampleId> = rows.iter().map(|r| r.1).collect();
    match rows.iter().map(|r| r.2).collect::<Option<Vec<f64>>>() {
        Some(scores) if !scores.is_empty() => Ranking::with_scores(order, scores),
        _ => Ranking::from_order(order),
    }
}
