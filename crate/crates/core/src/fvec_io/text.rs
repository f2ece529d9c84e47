//! CSV ingestion: comma-separated numeric cells, optional header row, last
//! column is the integer class label.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use super::dataset::FeatureDataset;
use crate::error::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, has_header, name)
}

pub fn read_csv<R: Read>(reader: R, has_header: bool, name: String) -> Result<FeatureDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cells = record.len();
        match width {
            None => {
                if cells < 2 {
                    return Err(Error::Parse {
                        line,
                        msg: "need at least one feature column and a label column".into(),
                    });
                }
                width = Some(cells);
            }
            Some(w) if w != cells => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {w} cells, found {cells}"),
                })
            }
            _ => {}
        }
        for cell in record.iter().take(cells - 1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric feature cell `{cell}`"),
            })?;
            values.push(v);
        }
        let raw = &record[cells - 1];
        let y: usize = raw.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("label `{raw}` is not a non-negative integer"),
        })?;
        labels.push(y);
    }

    let n = labels.len();
    let d = width.map_or(0, |w| w - 1);
    let features =
        Array2::from_shape_vec((n, d), values).map_err(|e| Error::Format(e.to_string()))?;
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let ds = FeatureDataset::new(name, features, labels, n_classes)?;
    let empty = ds.empty_classes();
    if !empty.is_empty() {
        log::warn!(
            "dataset `{}`: inferred {} classes but classes {:?} have no rows",
            ds.name(),
            n_classes,
            empty
        );
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, header: bool) -> Result<FeatureDataset> {
        read_csv(s.as_bytes(), header, "t".into())
    }

    #[test]
    fn two_rows() {
        let ds = parse("1.0,2.0,0\n3.0,4.0,1", false).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.n_classes()), (2, 2, 2));
        assert_eq!(ds.features()[[1, 0]], 3.0);
    }

    #[test]
    fn header_skipped() {
        let ds = parse("a,b,label\n1,2,0\n", true).unwrap();
        assert_eq!(ds.n(), 1);
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let err = parse("1,2,3,0\n1,2,0\n1,2,3,1\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn non_numeric_cell_is_parse_error() {
        assert!(matches!(parse("1,x,0\n", false), Err(Error::Parse { .. })));
        assert!(matches!(parse("1,2,-1\n", false), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_class_inferred() {
        let ds = parse("0.1,0\n0.2,2\n", false).unwrap();
        assert_eq!(ds.n_classes(), 3);
        assert_eq!(ds.empty_classes(), vec![1]);
    }

    #[test]
    fn matches_equivalent_fvec() {
        let ds = parse("1.5,2.0,0\n3.0,-4.0,1\n", false).unwrap();
        let bytes = super::super::fvec::encode(&ds).unwrap();
        let back = super::super::fvec::decode(&bytes, Path::new("t.fvec")).unwrap();
        assert_eq!(back, ds);
    }
}
