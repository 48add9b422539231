//! Fingerprint CSV files: header `x1,x2,rss_0,...,rss_{M-1}`, one fingerprint
//! per row, UTF-8, LF line endings.

use std::path::Path;

use crate::channel::RssVector;
use crate::error::{Error, Result};
use crate::gpr::TrainingSet;
use crate::scenario::Position;

pub fn fingerprints_to_csv(train: &TrainingSet) -> String {
    let m = train.dim();
    let mut out = String::with_capacity(train.len() * (m + 2) * 20);
    out.push_str("x1,x2");
    for j in 0..m {
        out.push_str(&format!(",rss_{j}"));
    }
    out.push('\n');
    for (p, pos) in train.inputs().iter().zip(train.positions()) {
        out.push_str(&format!("{},{}", pos.x1, pos.x2));
        for v in p.values() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn fingerprints_from_csv(text: &str, path: &Path) -> Result<TrainingSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(path, format!("header: {e}")))?.clone();
    if header.len() < 3 || &header[0] != "x1" || &header[1] != "x2" {
        return Err(Error::parse(path, "header must start with x1,x2 and list at least one rss_ column"));
    }
    let m = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("rss_{j}") {
            return Err(Error::parse(path, format!("header column {} is {name:?}, expected rss_{j}", j + 2)));
        }
    }
    let mut inputs = Vec::new();
    let mut positions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::parse(path, format!("row {row}: {e}")))?;
        if record.len() != m + 2 {
            return Err(Error::parse(
                path,
                format!("row {row} has {} RSS values, header declares M={m}", record.len().saturating_sub(2)),
            ));
        }
        let mut values = Vec::with_capacity(m + 2);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("row {row} column {}: {field:?} is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(Error::parse(path, format!("row {row} column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
        positions.push(Position::new(values[0], values[1]));
        values.drain(..2);
        inputs.push(RssVector::new(values).map_err(|e| Error::parse(path, format!("row {row}: {e}")))?);
    }
    if inputs.is_empty() {
        return Err(Error::parse(path, "no fingerprint rows"));
    }
    TrainingSet::new(inputs, positions).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn save_fingerprints(train: &TrainingSet, path: &Path) -> Result<()> {
    std::fs::write(path, fingerprints_to_csv(train)).map_err(|e| Error::io(path, e))
}

pub fn load_fingerprints(path: &Path) -> Result<TrainingSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    fingerprints_from_csv(&text, path)
}
