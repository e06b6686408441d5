//! JSONL and CSV record files.
//!
//! Both formats carry the [`MeasurementRecord`] fields in declaration order:
//! `measure_id, sid_list, direction, epoch, color, interval_tx, interval_rx,
//! interval_loss, cumulative_tx, cumulative_rx, cumulative_loss, timestamp,
//! baseline_epoch, negative_loss, active_read, margin_suspect`.
//! CSV files start with that header; an absent `baseline_epoch` is an empty
//! cell in CSV and `null` in JSONL.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{CollectError, MeasurementRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RecordFormat {
    #[default]
    Jsonl,
    Csv,
}

impl RecordFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RecordFormat::Jsonl => "jsonl",
            RecordFormat::Csv => "csv",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for RecordFormat {
    type Err = CollectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(CollectError::UnknownFormat(other.into())),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

fn csv_error(err: csv::Error) -> CollectError {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => CollectError::Io(io),
        kind => CollectError::Format {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn write_records<W: Write>(records: &[MeasurementRecord], out: W, format: RecordFormat) -> Result<usize, CollectError> {
    match format {
        RecordFormat::Jsonl => {
            let mut out = BufWriter::new(out);
            for record in records {
                serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        RecordFormat::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            writer
                .write_record(CSV_HEADER)
                .map_err(csv_error)?;
            for record in records {
                writer.serialize(record).map_err(csv_error)?;
            }
            writer.flush()?;
        }
    }
    Ok(records.len())
}

const CSV_HEADER: [&str; 16] = [
    "measure_id",
    "sid_list",
    "direction",
    "epoch",
    "color",
    "interval_tx",
    "interval_rx",
    "interval_loss",
    "cumulative_tx",
    "cumulative_rx",
    "cumulative_loss",
    "timestamp",
    "baseline_epoch",
    "negative_loss",
    "active_read",
    "margin_suspect",
];

pub fn read_records<R: Read>(input: R, format: RecordFormat) -> Result<Vec<MeasurementRecord>, CollectError> {
    match format {
        RecordFormat::Jsonl => {
            let mut records = Vec::new();
            for (i, line) in BufReader::new(input).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(&line).map_err(|e| CollectError::Format {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                records.push(record);
            }
            Ok(records)
        }
        RecordFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
            let headers = reader.headers().map_err(csv_error)?.clone();
            if !headers.is_empty() && headers.iter().ne(CSV_HEADER) {
                return Err(CollectError::Format {
                    line: 1,
                    message: "unexpected csv header".into(),
                });
            }
            reader
                .deserialize()
                .map(|r| r.map_err(csv_error))
                .collect()
        }
    }
}

/// Writes `records` to `path`, returning how many were written.
pub fn export_records(records: &[MeasurementRecord], path: &Path, format: RecordFormat) -> Result<usize, CollectError> {
    write_records(records, File::create(path)?, format)
}

/// Reads a record file, choosing the format from the extension or, failing
/// that, from the first non-blank character (`{` means JSONL).
pub fn import_records(path: &Path) -> Result<Vec<MeasurementRecord>, CollectError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let format = RecordFormat::from_path(path).unwrap_or_else(|| {
        if text.trim_start().starts_with('{') {
            RecordFormat::Jsonl
        } else {
            RecordFormat::Csv
        }
    });
    read_records(text.as_bytes(), format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collect::tests::record;
    use crate::control::session::PathDirection;

    fn sample() -> Vec<MeasurementRecord> {
        let mut second = record(2, PathDirection::Reverse, 0, 1);
        second.baseline_epoch = None;
        second.margin_suspect = true;
        second.timestamp = 0.1 + 0.2;
        vec![record(1, PathDirection::Forward, 4, 3), second]
    }

    #[test]
    fn roundtrip_both_formats() {
        for format in [RecordFormat::Jsonl, RecordFormat::Csv] {
            let mut buf = Vec::new();
            assert_eq!(write_records(&sample(), &mut buf, format).unwrap(), 2);
            assert_eq!(read_records(buf.as_slice(), format).unwrap(), sample());
        }
    }

    #[test]
    fn empty_exports() {
        let mut csv_out = Vec::new();
        write_records(&[], &mut csv_out, RecordFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(csv_out).unwrap(), CSV_HEADER.join(",") + "\n");
        let mut jsonl = Vec::new();
        write_records(&[], &mut jsonl, RecordFormat::Jsonl).unwrap();
        assert!(jsonl.is_empty());
        assert!(read_records(&b""[..], RecordFormat::Csv).unwrap().is_empty());
        assert!(read_records(&b""[..], RecordFormat::Jsonl).unwrap().is_empty());
    }

    #[test]
    fn jsonl_key_order_is_fixed() {
        let mut buf = Vec::new();
        write_records(&sample()[..1], &mut buf, RecordFormat::Jsonl).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let positions: Vec<usize> = CSV_HEADER
            .iter()
            .map(|k| line.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn malformed_line_reports_number() {
        let mut buf = Vec::new();
        write_records(&sample(), &mut buf, RecordFormat::Jsonl).unwrap();
        buf.extend_from_slice(b"{not json}\n");
        match read_records(buf.as_slice(), RecordFormat::Jsonl) {
            Err(CollectError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let mut csv_buf = Vec::new();
        write_records(&sample(), &mut csv_buf, RecordFormat::Csv).unwrap();
        csv_buf.extend_from_slice(b"1,x,sideways,0,R,0,0,0,0,0,0,0,,false,false,false\n");
        match read_records(csv_buf.as_slice(), RecordFormat::Csv) {
            Err(CollectError::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
