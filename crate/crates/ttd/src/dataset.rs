//! Labeled feature sets and their on-disk formats.
//!
//! TTDF is little-endian: magic `TTDF`, `u16` version, `u32` dim, `u64`
//! count, then `count` records of an `i32` label (`-1` = unlabeled) followed
//! by `dim` `f32` values. CSV files carry a `label,f0,...` header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TTDF_MAGIC: [u8; 4] = *b"TTDF";
pub const TTDF_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub dim: usize,
    /// `None` for unlabeled samples.
    pub labels: Vec<Option<u32>>,
    pub features: Vec<Vec<f32>>,
}

impl LabeledFeatures {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            labels: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn push(&mut self, label: Option<u32>, feature: Vec<f32>) {
        debug_assert_eq!(feature.len(), self.dim);
        self.labels.push(label);
        self.features.push(feature);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Option<u32>, &[f32])> {
        self.labels
            .iter()
            .copied()
            .zip(self.features.iter().map(Vec::as_slice))
    }

    /// Dimension agreement and finiteness of every record.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.len() {
            return Err(Error::Data("label and feature counts differ".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.len() != self.dim {
                return Err(Error::Data(format!(
                    "record {i} has {} values, expected {}",
                    f.len(),
                    self.dim
                )));
            }
            if let Some(j) = f.iter().position(|x| !x.is_finite()) {
                return Err(ttd_core::Error::InvalidFeature(format!(
                    "record {i} component {j} is not finite"
                ))
                .into());
            }
        }
        Ok(())
    }
}

fn encode_label(label: Option<u32>) -> Result<i32> {
    match label {
        None => Ok(-1),
        Some(l) => i32::try_from(l).map_err(|_| Error::Data(format!("label {l} exceeds i32"))),
    }
}

fn decode_label(raw: i32) -> Result<Option<u32>, String> {
    match raw {
        -1 => Ok(None),
        l if l >= 0 => Ok(Some(l as u32)),
        l => Err(format!("invalid label {l}")),
    }
}

pub fn write_ttdf<W: Write>(w: &mut W, data: &LabeledFeatures) -> Result<()> {
    data.validate()?;
    let mut buf = Vec::with_capacity(18 + data.len() * (4 + 4 * data.dim));
    buf.extend_from_slice(&TTDF_MAGIC);
    buf.extend_from_slice(&TTDF_VERSION.to_le_bytes());
    let dim = u32::try_from(data.dim).map_err(|_| Error::Data("dimension exceeds u32".into()))?;
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&(data.len() as u64).to_le_bytes());
    for (label, f) in data.iter() {
        buf.extend_from_slice(&encode_label(label)?.to_le_bytes());
        for x in f {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(|e| Error::io("<ttdf writer>", e))
}

/// Parses a TTDF image. `path` is only used in error messages.
pub fn parse_ttdf(bytes: &[u8], path: &Path) -> Result<LabeledFeatures> {
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 4 || bytes[..4] != TTDF_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < 18 {
        return Err(corrupt("truncated header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TTDF_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let record = 4 + 4 * dim;
    let body = &bytes[18..];
    let expected = (count as u128) * (record as u128);
    if expected != body.len() as u128 {
        return Err(corrupt(format!(
            "header declares {count} records of dim {dim} ({expected} bytes), body has {} bytes",
            body.len()
        )));
    }
    let mut out = LabeledFeatures::new(dim);
    for rec in body.chunks_exact(record) {
        let label =
            decode_label(i32::from_le_bytes(rec[..4].try_into().unwrap())).map_err(corrupt)?;
        let f = rec[4..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(label, f);
    }
    out.validate()?;
    Ok(out)
}

pub fn write_csv<W: Write>(w: W, data: &LabeledFeatures) -> Result<()> {
    data.validate()?;
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((0..data.dim).map(|i| format!("f{i}")));
    let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    wr.write_record(&header).map_err(csv_err)?;
    for (label, f) in data.iter() {
        let mut row = vec![encode_label(label)?.to_string()];
        row.extend(f.iter().map(|x| x.to_string()));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::io("<csv writer>", e))
}

pub fn parse_csv<R: Read>(r: R, path: &Path) -> Result<LabeledFeatures> {
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| corrupt(e.to_string()))?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::Format {
            path: path.to_path_buf(),
        });
    }
    let dim = header.len() - 1;
    let mut out = LabeledFeatures::new(dim);
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(|e| corrupt(format!("row {i}: {e}")))?;
        if row.len() != dim + 1 {
            return Err(corrupt(format!("row {i} has {} columns", row.len())));
        }
        let raw: i32 = row[0]
            .trim()
            .parse()
            .map_err(|e| corrupt(format!("row {i} label: {e}")))?;
        let label = decode_label(raw).map_err(corrupt)?;
        let f = row
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| corrupt(format!("row {i}: {e}")))?;
        out.push(label, f);
    }
    out.validate()?;
    Ok(out)
}

/// Reads a `.csv` file as CSV and anything else as TTDF.
pub fn load_features(path: impl AsRef<Path>) -> Result<LabeledFeatures> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return parse_csv(BufReader::new(file), path);
    }
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_ttdf(&bytes, path)
}

/// Writes CSV for a `.csv` path and TTDF otherwise.
pub fn save_features(path: impl AsRef<Path>, data: &LabeledFeatures) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        write_csv(&mut w, data)?;
    } else {
        write_ttdf(&mut w, data)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
