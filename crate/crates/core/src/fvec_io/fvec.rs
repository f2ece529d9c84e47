//! FVEC: little-endian binary container for labeled feature matrices.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "FVEC"
//! 4       1         version (1)
//! 5       1         dtype (0 = f32, 1 = f64)
//! 6       4         n   (u32)
//! 10      4         d   (u32)
//! 14      4         C   (u32)
//! 18      n*d*w     features, row-major
//! ...     4*n       labels (u32)
//! ```

use std::fs;
use std::io::{self, ErrorKind};
use std::path::Path;

use ndarray::Array2;

use super::dataset::{FeatureDataset, Precision};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FVEC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

/// Number of bytes `save_fvec` writes for a dataset of this shape.
pub fn encoded_len(n: usize, d: usize, precision: Precision) -> usize {
    HEADER_LEN + n * d * precision.byte_width() + 4 * n
}

pub fn encode(ds: &FeatureDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let (n, d, c) = (ds.n(), ds.d(), ds.n_classes());
    let as_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(encoded_len(n, d, ds.precision()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(match ds.precision() {
        Precision::F32 => 0,
        Precision::F64 => 1,
    });
    out.extend_from_slice(&as_u32(n, "n")?.to_le_bytes());
    out.extend_from_slice(&as_u32(d, "d")?.to_le_bytes());
    out.extend_from_slice(&as_u32(c, "C")?.to_le_bytes());
    for &v in ds.features().iter() {
        match ds.precision() {
            Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    for &y in ds.labels() {
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> io::Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(io::Error::new(
                ErrorKind::UnexpectedEof,
                format!(
                    "truncated FVEC payload: need {} bytes at offset {}, have {}",
                    len,
                    self.pos,
                    self.buf.len().saturating_sub(self.pos)
                ),
            )),
        }
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes an in-memory FVEC buffer. `origin` is used for error messages
/// and as the dataset name.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<FeatureDataset> {
    let io_err = |e: io::Error| Error::io(origin, e);
    let mut cur = Cursor { buf: bytes, pos: 0 };

    let magic = cur.take(4).map_err(io_err)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}, expected \"FVEC\"")));
    }
    let header = cur.take(2).map_err(io_err)?;
    if header[0] != VERSION {
        return Err(Error::Format(format!("unsupported FVEC version {}", header[0])));
    }
    let precision = match header[1] {
        0 => Precision::F32,
        1 => Precision::F64,
        other => return Err(Error::Format(format!("unknown dtype flag {other}"))),
    };
    let n = cur.u32().map_err(io_err)? as usize;
    let d = cur.u32().map_err(io_err)? as usize;
    let c = cur.u32().map_err(io_err)? as usize;

    let width = precision.byte_width();
    let payload = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(width))
        .ok_or_else(|| Error::Format("feature payload size overflows".into()))?;
    let raw = cur.take(payload).map_err(io_err)?;
    let values: Vec<f64> = match precision {
        Precision::F32 => raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        Precision::F64 => raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    };
    let raw_labels = cur.take(4 * n).map_err(io_err)?;
    let labels: Vec<usize> = raw_labels
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after FVEC payload",
            bytes.len() - cur.pos
        )));
    }

    let features = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    let name = origin
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = FeatureDataset::from_parts_unchecked(name, features, labels, c, precision);
    ds.validate()?;
    Ok(ds)
}

pub fn load_fvec(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn save_fvec(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn small() -> FeatureDataset {
        FeatureDataset::new(
            "small",
            array![[0.5, -1.0, 2.0], [3.25, 0.0, -0.125]],
            vec![0, 1],
            2,
        )
        .unwrap()
        .into_f32()
    }

    #[test]
    fn f32_file_is_fifty_bytes() {
        let bytes = encode(&small()).unwrap();
        assert_eq!(bytes.len(), 4 + 1 + 1 + 12 + 24 + 8);
        assert_eq!(bytes.len(), encoded_len(2, 3, Precision::F32));
        assert_eq!(&bytes[..4], b"FVEC");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 0);
    }

    #[test]
    fn f64_payload_doubles() {
        let f32_len = encode(&small()).unwrap().len();
        let f64_len = encode(&small().into_f64()).unwrap().len();
        assert_eq!(f64_len - HEADER_LEN - 8, 2 * (f32_len - HEADER_LEN - 8));
    }

    #[test]
    fn smallest_file_decodes() {
        let bytes = encode(&small()).unwrap();
        let ds = decode(&bytes, Path::new("small.fvec")).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.n_classes()), (2, 3, 2));
        assert_eq!(ds, small());
    }

    #[test]
    fn label_beyond_class_count_is_validation_error() {
        let mut bytes = encode(&small()).unwrap();
        let len = bytes.len();
        bytes[len - 4..].copy_from_slice(&5u32.to_le_bytes());
        let err = decode(&bytes, Path::new("x.fvec")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn header_errors() {
        let good = encode(&small()).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic, Path::new("x")), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode(&bad_version, Path::new("x")), Err(Error::Format(_))));

        let mut bad_dtype = good.clone();
        bad_dtype[5] = 7;
        assert!(matches!(decode(&bad_dtype, Path::new("x")), Err(Error::Format(_))));

        let truncated = &good[..good.len() - 3];
        match decode(truncated, Path::new("x")) {
            Err(Error::Io { source, .. }) => assert_eq!(source.kind(), ErrorKind::UnexpectedEof),
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = encode(&small()).unwrap();
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode(&bytes, Path::new("x")), Err(Error::Validation(_))));
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("small.fvec");
        save_fvec(&small(), &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_fvec(&path).unwrap();
        assert_eq!(loaded, small());
        assert_eq!(loaded.name(), "small");
        let again = dir.path().join("again.fvec");
        save_fvec(&loaded, &again).unwrap();
        assert_eq!(first, fs::read(&again).unwrap());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = save_fvec(&small(), "/nonexistent-dir/x/y.fvec").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            n in 1usize..12,
            d in 1usize..6,
            c in 1usize..5,
            wide in any::<bool>(),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let feats = Array2::from_shape_fn((n, d), |_| rng.random_range(-1e6..1e6));
            let labels = (0..n).map(|_| rng.random_range(0..c)).collect();
            let mut ds = FeatureDataset::new("p", feats, labels, c).unwrap();
            if !wide { ds = ds.into_f32(); }
            let bytes = encode(&ds).unwrap();
            prop_assert_eq!(bytes.len(), encoded_len(n, d, ds.precision()));
            let back = decode(&bytes, Path::new("p.fvec")).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(encode(&back).unwrap(), bytes);
        }
    }
}
