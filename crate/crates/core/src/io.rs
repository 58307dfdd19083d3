//! Matrix input (CSV or JSON) and report serialization helpers.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::array::RawMatrix;
use crate::error::{Error, Result};
use crate::involution::ExactDistribution;
use crate::distances::StepCdf;

#[derive(Deserialize)]
struct JsonMatrix {
    n: usize,
    entries: Vec<Vec<f64>>,
}

/// Parses either `{"n": .., "entries": [[..]]}` or `n` lines of `n`
/// comma-separated decimals. The format is sniffed from the first
/// non-whitespace character.
pub fn parse_matrix(text: &str) -> Result<RawMatrix> {
    if text.trim_start().starts_with('{') {
        let m: JsonMatrix = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if m.entries.len() != m.n {
            return Err(Error::DimensionMismatch { expected: m.n, found: m.entries.len() });
        }
        return Ok(RawMatrix { n: m.n, entries: m.entries });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(RawMatrix::from_rows(rows))
}

pub fn read_matrix(path: &Path) -> Result<RawMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// `value,probability` rows.
pub fn write_distribution_csv<W: Write>(dist: &ExactDistribution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "probability"]).map_err(csv_err)?;
    for atom in dist.atoms() {
        w.write_record([fmt_f64(atom.value), fmt_f64(dist.probability(atom))])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,F,Phi` rows at every jump point.
pub fn write_cdf_csv<W: Write>(cdf: &StepCdf, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "F", "Phi"]).map_err(csv_err)?;
    for (&t, &c) in cdf.points().iter().zip(cdf.cumulative()) {
        w.write_record([fmt_f64(t), fmt_f64(c), fmt_f64(crate::distances::normal_cdf(t))])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let csv_text = "0, 1, 2, 3\n1,0,4,5\n2,4,0,6\n3,5,6,0\n";
        let json_text = r#"{"n": 4, "entries": [[0,1,2,3],[1,0,4,5],[2,4,0,6],[3,5,6,0]]}"#;
        assert_eq!(parse_matrix(csv_text).unwrap(), parse_matrix(json_text).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_matrix("0,1\nx,0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix(""), Err(Error::Parse(_))));
        assert!(matches!(
            parse_matrix(r#"{"n": 3, "entries": [[0]]}"#),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
