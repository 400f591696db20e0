use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{DatasetRow, LabeledDataset};
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_SENSORS};

pub const CSV_HEADER: [&str; N_SENSORS + 2] =
    ["timestamp_ms", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "label"];

pub fn write_csv_to<W: Write>(ds: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let mut record = Vec::with_capacity(CSV_HEADER.len());
    for row in &ds.rows {
        record.clear();
        record.push(row.timestamp_ms.to_string());
        record.extend(row.counts.iter().map(u16::to_string));
        record.push(row.label.name().to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    write_csv_to(ds, BufWriter::new(File::create(path)?))
}

/// A header-only input yields an empty dataset.
pub fn read_csv_from<R: Read>(reader: R, provenance: impl Into<String>) -> Result<LabeledDataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = r.records();
    let mut ds = LabeledDataset::new(provenance);
    match records.next() {
        None => return Ok(ds),
        Some(header) => {
            let header = header?;
            if header.iter().map(str::trim).ne(CSV_HEADER) {
                return Err(Error::Parse { line: 1, message: format!("expected header {}", CSV_HEADER.join(",")) });
            }
        }
    }
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let parse_err = |what: &str, v: &str| Error::Parse { line, message: format!("bad {what} {v:?}") };
        let timestamp_ms = record[0].trim().parse().map_err(|_| parse_err("timestamp", &record[0]))?;
        let mut counts = [0u16; N_SENSORS];
        for (k, c) in counts.iter_mut().enumerate() {
            let v = &record[k + 1];
            *c = v.trim().parse().map_err(|_| parse_err("count", v))?;
        }
        let label: PostureLabel = record[N_SENSORS + 1].trim().parse()?;
        ds.rows.push(DatasetRow { timestamp_ms, counts, label });
    }
    Ok(ds)
}

pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
    read_csv_from(File::open(path)?, path.display().to_string())
}
