//! Writing run records as CSV or JSON Lines, and reading them back.
//!
//! Values are printed with 17 significant digits, which is enough for every
//! `f64` to survive a round trip unchanged. Missing values are an empty CSV
//! field or a JSON `null`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::record::RunRecord;
use crate::{io_error, CliError};

/// A parsed table: column names and rows.
pub type Columns = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Overrides `output.dir` from the config when set.
pub const OUTPUT_DIR_ENV: &str = "TIMEMACHINE_OUTPUT_DIR";

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(record: &RunRecord) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Record {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(&record.columns).map_err(csv_err)?;
    for row in &record.rows {
        w.write_record(row.iter().map(|v| v.map(format_value).unwrap_or_default()))
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Record {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

pub fn to_jsonl(record: &RunRecord) -> Vec<u8> {
    let mut out = Vec::new();
    for row in &record.rows {
        let fields: Vec<String> = record
            .columns
            .iter()
            .zip(row)
            .map(|(c, v)| {
                let key = serde_json::to_string(c).expect("strings serialize");
                format!("{key}:{}", v.map(format_value).unwrap_or_else(|| "null".into()))
            })
            .collect();
        out.extend_from_slice(format!("{{{}}}\n", fields.join(",")).as_bytes());
    }
    out
}

pub fn render(record: &RunRecord, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => to_csv(record),
        Format::Jsonl => Ok(to_jsonl(record)),
    }
}

/// Parses CSV produced by [`to_csv`] into `(columns, rows)`.
pub fn read_csv(bytes: &[u8]) -> Result<Columns, CliError> {
    let bad = |message: String| CliError::Record {
        path: "<csv>".into(),
        message,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|e| bad(format!("`{f}`: {e}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

pub fn read_record(path: &Path) -> Result<RunRecord, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let mut f = fs::File::create(path).map_err(io_error(path))?;
    f.write_all(bytes).map_err(io_error(path))
}

pub fn output_dir(configured: &str) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(configured))
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub record: PathBuf,
    pub table: PathBuf,
}

/// Writes `<dir>/<stem>.record.json` and the table in the configured format.
pub fn write_run(record: &RunRecord, dir: &Path) -> Result<Written, CliError> {
    let stem = record.config.file_stem();
    let written = Written {
        record: dir.join(format!("{stem}.record.json")),
        table: dir.join(format!("{stem}.{}", record.config.output.format.extension())),
    };
    let mut json = serde_json::to_vec_pretty(record).map_err(|source| CliError::Json {
        path: written.record.display().to_string(),
        source,
    })?;
    json.push(b'\n');
    write_bytes(&written.record, &json)?;
    write_bytes(&written.table, &render(record, record.config.output.format)?)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::record::Metadata;

    fn record(rows: Vec<Vec<Option<f64>>>) -> RunRecord {
        RunRecord {
            metadata: Metadata {
                version: "0".into(),
                scenario: "free-discrete".into(),
                convention: None,
                seed: None,
                rng: None,
                wall_time_s: 0.0,
            },
            config: ScenarioConfig::from_toml("scenario = \"free-discrete\"", "test").unwrap(),
            columns: vec!["a".into(), "b".into()],
            rows,
        }
    }

    #[test]
    fn empty_record_gives_header_only() {
        assert_eq!(to_csv(&record(vec![])).unwrap(), b"a,b\n");
        assert!(to_jsonl(&record(vec![])).is_empty());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            vec![Some(0.1), None],
            vec![Some(-1.0 / 3.0), Some(f64::MIN_POSITIVE)],
            vec![Some(1e300), Some(-0.0)],
        ];
        let r = record(rows.clone());
        let (cols, back) = read_csv(&to_csv(&r).unwrap()).unwrap();
        assert_eq!(cols, r.columns);
        for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }

    #[test]
    fn jsonl_rows_parse_as_json() {
        let bytes = to_jsonl(&record(vec![vec![Some(2.5), None]]));
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["a"], 2.5);
        assert!(v["b"].is_null());
    }
}
