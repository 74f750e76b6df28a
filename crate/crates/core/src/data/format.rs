use std::fs;
use std::path::Path;

use super::FeatureSet;
use crate::{Error, Result};

pub const AVF1_MAGIC: &[u8; 4] = b"AVF1";
pub const AVF1_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4;

/// Encodes the AVF1 layout: magic, version u32, N u64, H u32, C u32, then
/// row-major f32 features and i32 labels, all little-endian.
pub fn encode_features(set: &FeatureSet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * set.raw_features().len() + 4 * set.len());
    buf.extend_from_slice(AVF1_MAGIC);
    buf.extend_from_slice(&AVF1_VERSION.to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(set.classes() as u32).to_le_bytes());
    for v in set.raw_features() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for y in set.labels() {
        buf.extend_from_slice(&y.to_le_bytes());
    }
    buf
}

pub fn write_features(path: impl AsRef<Path>, set: &FeatureSet) -> Result<()> {
    fs::write(path, encode_features(set))?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let bytes = fs::read(path)?;
    parse_features(&bytes)
}

pub fn parse_features(bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(format!(
            "AVF1 header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != AVF1_MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?}, expected \"AVF1\"",
            &bytes[0..4]
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != AVF1_VERSION {
        return Err(Error::format(format!("unsupported AVF1 version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let h = u32_at(16) as u64;
    let c = u32_at(20) as usize;
    let expected = n
        .checked_mul(h)
        .and_then(|nh| nh.checked_mul(4))
        .and_then(|f| f.checked_add(n.checked_mul(4)?))
        .and_then(|p| p.checked_add(HEADER_LEN as u64));
    match expected {
        Some(e) if e == bytes.len() as u64 => {}
        _ => {
            return Err(Error::format(format!(
                "size mismatch: header says N={n}, H={h} but file has {} bytes",
                bytes.len()
            )))
        }
    }
    let (n, h) = (n as usize, h as usize);
    let payload = &bytes[HEADER_LEN..];
    let (feat_bytes, label_bytes) = payload.split_at(n * h * 4);
    let features = feat_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let labels = label_bytes
        .chunks_exact(4)
        .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureSet::new(h, c, features, labels)
}

/// Reads `label,f0,...,f{H-1}` CSV with a header row. `classes` defaults to
/// one past the largest label.
pub fn read_csv(path: impl AsRef<Path>, classes: Option<usize>) -> Result<FeatureSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.get(0) != Some("label") {
        return Err(Error::format("CSV header must start with `label`"));
    }
    let dim = headers.len() - 1;
    for (i, name) in headers.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::format(format!(
                "CSV column {} should be `f{i}`, got `{name}`",
                i + 1
            )));
        }
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != dim + 1 {
            return Err(Error::Dimension(format!(
                "CSV row {} has {} fields, expected {}",
                row + 1,
                record.len(),
                dim + 1
            )));
        }
        let parse_err = |what: &str| Error::format(format!("CSV row {}: bad {what}", row + 1));
        labels.push(record[0].parse::<i32>().map_err(|_| parse_err("label"))?);
        for field in record.iter().skip(1) {
            features.push(field.parse::<f32>().map_err(|_| parse_err("feature"))?);
        }
    }
    let classes = classes.unwrap_or_else(|| {
        labels
            .iter()
            .copied()
            .max()
            .map_or(0, |m| (m + 1).max(0) as usize)
    });
    FeatureSet::new(dim, classes, features, labels)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("CSV: {other:?}")),
    }
}
