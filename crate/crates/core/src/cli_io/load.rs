//! Readers and writers for epoched recordings.
//!
//! * `csv_long`: header `epoch,sample,<chan1>,<chan2>,...`, one row per
//!   (epoch, sample). Rows may come in any order.
//! * `raw_f64`: magic `LCH1`, then little-endian `u32` N_E, N_T and channel
//!   count, then little-endian `f64` values in `[epoch][sample][channel]`
//!   order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::EpochedTimeSeries;

pub const RAW_MAGIC: &[u8; 4] = b"LCH1";
pub const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DataFormat {
    CsvLong,
    RawF64,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv_long" => Ok(DataFormat::CsvLong),
            "raw_f64" => Ok(DataFormat::RawF64),
            other => Err(Error::Config(format!("unknown data format '{other}'"))),
        }
    }
}

pub fn load_epochs(path: impl AsRef<Path>, format: DataFormat) -> Result<EpochedTimeSeries> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = match format {
        DataFormat::CsvLong => read_csv_long(bytes.as_slice()),
        DataFormat::RawF64 => read_raw_f64(&bytes),
    };
    parsed.map_err(|e| e.with_context(path.display().to_string()))
}

pub fn save_epochs(ts: &EpochedTimeSeries, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        DataFormat::CsvLong => {
            let mut buf = Vec::new();
            write_csv_long(ts, &mut buf)?;
            buf
        }
        DataFormat::RawF64 => write_raw_f64(ts)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_csv_long<R: Read>(reader: R) -> Result<EpochedTimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "epoch" || &header[1] != "sample" {
        return Err(Error::Format("header must be 'epoch,sample,<channel>,...'".into()));
    }
    let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let n_channels = labels.len();

    let mut epochs: BTreeMap<i64, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Format(format!("line {line}: {e}")))?;
        if record.len() != n_channels + 2 {
            return Err(Error::Format(format!(
                "line {line}: expected {} fields, found {}",
                n_channels + 2,
                record.len()
            )));
        }
        let epoch: i64 = record[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: bad epoch '{}'", &record[0])))?;
        let sample: usize = record[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: bad sample '{}'", &record[1])))?;
        let values = record
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("line {line}: bad value '{f}'"))))
            .collect::<Result<Vec<f64>>>()?;
        if epochs.entry(epoch).or_default().insert(sample, values).is_some() {
            return Err(Error::Format(format!("line {line}: duplicate row for epoch {epoch}, sample {sample}")));
        }
    }
    if epochs.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }

    let n_samples = epochs.values().next().map(BTreeMap::len).unwrap_or(0);
    let mut flat = Vec::with_capacity(epochs.len() * n_samples * n_channels);
    for (epoch, rows) in &epochs {
        if rows.len() != n_samples {
            return Err(Error::RaggedData(format!(
                "epoch {epoch} has {} samples, expected {n_samples}",
                rows.len()
            )));
        }
        for (expected, (&sample, values)) in rows.iter().enumerate() {
            if sample != expected {
                return Err(Error::RaggedData(format!(
                    "epoch {epoch} is missing sample {expected}"
                )));
            }
            flat.extend_from_slice(values);
        }
    }
    let data = Array3::from_shape_vec((epochs.len(), n_samples, n_channels), flat)
        .map_err(|e| Error::Internal(e.to_string()))?;
    EpochedTimeSeries::new(data, labels)
}

pub fn write_csv_long<W: Write>(ts: &EpochedTimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["epoch".to_string(), "sample".to_string()];
    header.extend(ts.channel_labels().iter().cloned());
    let fail = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(fail)?;
    let (n_e, n_t, n_c) = ts.data().dim();
    for e in 0..n_e {
        for t in 0..n_t {
            let mut row = vec![e.to_string(), t.to_string()];
            row.extend((0..n_c).map(|c| format_real(ts.data()[[e, t, c]])));
            w.write_record(&row).map_err(fail)?;
        }
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_raw_f64(bytes: &[u8]) -> Result<EpochedTimeSeries> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(Error::Format(format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(Error::Format("bad magic, expected 'LCH1'".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4-byte slice")) as usize;
    let (n_e, n_t, n_c) = (word(1), word(2), word(3));
    let count = n_e
        .checked_mul(n_t)
        .and_then(|v| v.checked_mul(n_c))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let expected = count
        .checked_mul(8)
        .and_then(|v| v.checked_add(RAW_HEADER_LEN))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Format(format!("truncated: {} bytes, header implies {expected}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after the data", bytes.len() - expected)));
    }
    let values: Vec<f64> = bytes[RAW_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let data = Array3::from_shape_vec((n_e, n_t, n_c), values).map_err(|e| Error::Internal(e.to_string()))?;
    EpochedTimeSeries::from_array(data)
}

pub fn write_raw_f64(ts: &EpochedTimeSeries) -> Result<Vec<u8>> {
    let (n_e, n_t, n_c) = ts.data().dim();
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} does not fit in u32")));
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 8 * n_e * n_t * n_c);
    out.extend_from_slice(RAW_MAGIC);
    for v in [n_e, n_t, n_c] {
        out.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    // standard layout iterates [epoch][sample][channel]
    for v in ts.data().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "epoch,sample,a\n0,0,1.5\n0,1,2\n0,2,-3\n1,0,4\n1,1,5\n1,2,6e-1\n";

    #[test]
    fn csv_shape() {
        let ts = read_csv_long(SMALL.as_bytes()).unwrap();
        assert_eq!(ts.data().dim(), (2, 3, 1));
        assert_eq!(ts.channel_labels(), ["a"]);
        assert_eq!(ts.data()[[1, 2, 0]], 0.6);
    }

    #[test]
    fn csv_rows_may_be_shuffled() {
        let shuffled = "epoch,sample,a\n1,2,6e-1\n0,1,2\n1,0,4\n0,0,1.5\n1,1,5\n0,2,-3\n";
        assert_eq!(read_csv_long(shuffled.as_bytes()).unwrap(), read_csv_long(SMALL.as_bytes()).unwrap());
    }

    #[test]
    fn raw_matches_csv_twin() {
        let ts = read_csv_long(SMALL.as_bytes()).unwrap();
        let raw = write_raw_f64(&ts).unwrap();
        assert_eq!(raw.len(), 16 + 2 * 3 * 8);
        let back = read_raw_f64(&raw).unwrap();
        assert_eq!(back.data(), ts.data());
    }

    #[test]
    fn ragged_epochs() {
        let ragged = "epoch,sample,a\n0,0,1\n0,1,1\n0,2,1\n1,0,1\n1,1,1\n1,2,1\n1,3,1\n";
        assert!(matches!(read_csv_long(ragged.as_bytes()), Err(Error::RaggedData(_))));
        let gap = "epoch,sample,a\n0,0,1\n0,2,1\n1,0,1\n1,2,1\n";
        assert!(matches!(read_csv_long(gap.as_bytes()), Err(Error::RaggedData(_))));
    }

    #[test]
    fn csv_format_errors() {
        for bad in [
            "time,sample,a\n0,0,1\n",
            "epoch,sample\n0,0\n",
            "epoch,sample,a\n0,0,x\n0,1,1\n",
            "epoch,sample,a\n0,0,1\n0,0,1\n",
            "epoch,sample,a\n",
        ] {
            assert!(matches!(read_csv_long(bad.as_bytes()), Err(Error::Format(_))), "{bad:?}");
        }
        let nan = "epoch,sample,a\n0,0,NaN\n0,1,1\n";
        assert!(matches!(read_csv_long(nan.as_bytes()), Err(Error::InvalidData(_))));
    }

    #[test]
    fn raw_format_errors() {
        let ts = read_csv_long(SMALL.as_bytes()).unwrap();
        let raw = write_raw_f64(&ts).unwrap();
        let mut bad_magic = raw.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_raw_f64(&bad_magic), Err(Error::Format(_))));
        assert!(matches!(read_raw_f64(&raw[..raw.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(read_raw_f64(&raw[..10]), Err(Error::Format(_))));
        let mut extra = raw.clone();
        extra.push(0);
        assert!(matches!(read_raw_f64(&extra), Err(Error::Format(_))));
    }

    #[test]
    fn csv_writer_roundtrips_exactly() {
        let ts = read_csv_long(SMALL.as_bytes()).unwrap();
        let data = ts.data().mapv(|v| v / 3.0);
        let ts = EpochedTimeSeries::new(data, vec!["a".into()]).unwrap();
        let mut buf = Vec::new();
        write_csv_long(&ts, &mut buf).unwrap();
        assert_eq!(read_csv_long(buf.as_slice()).unwrap(), ts);
    }

    #[test]
    fn missing_file_is_data_error() {
        let err = load_epochs("/nonexistent/file.csv", DataFormat::CsvLong).unwrap_err();
        assert_eq!(err.class().exit_code(), 3);
    }
}
