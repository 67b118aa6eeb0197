use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Column routing for [`load_csv`]. All other columns are numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub label_column: String,
    pub sensitive_column: Option<String>,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        CsvOptions {
            label_column: label_column.into(),
            sensitive_column: None,
        }
    }

    pub fn sensitive(mut self, column: impl Into<String>) -> Self {
        self.sensitive_column = Some(column.into());
        self
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

/// Loads a headered CSV file. Classes are numbered by first appearance.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("no column named {name:?}"),
        })
    };
    let label_col = find(&opts.label_column)?;
    let sensitive_col = opts.sensitive_column.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != label_col && Some(c) != sensitive_col)
        .collect();

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_of: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut x = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!("column {:?}: non-numeric value {cell:?}", &headers[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("column {:?}: non-finite value", &headers[c]),
                ));
            }
            x.push(v);
        }
        let label = record[label_col].to_string();
        let next = class_names.len();
        let class = *class_of.entry(label.clone()).or_insert_with(|| {
            class_names.push(label);
            next
        });
        points.push(x);
        labels.push(class);
        if let Some(c) = sensitive_col {
            let s = &record[c];
            if s.is_empty() {
                return Err(parse_err(path, line, "missing sensitive value"));
            }
            sensitive.push(s.to_string());
        }
    }
    if points.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let ds = Dataset::new(points, labels, class_names)?;
    if sensitive_col.is_some() {
        ds.with_sensitive(sensitive)
    } else {
        Ok(ds)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            parse_err(path, line, format!("expected {expected_len} fields, found {len}"))
        }
        other => parse_err(path, line, format!("{other:?}")),
    }
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Header<'a> {
    dims: Vec<usize>,
    body: &'a [u8],
}

fn idx_header<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<Header<'a>> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| fmt("file truncated in header".into()))
    };
    let found = word(0)?;
    if found != magic {
        return Err(fmt(format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|d| word(4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let body = &bytes[4 + 4 * ndims..];
    let expected: usize = dims.iter().product();
    if body.len() != expected {
        return Err(fmt(format!("expected {expected} data bytes, found {}", body.len())));
    }
    Ok(Header { dims, body })
}

/// Loads an IDX image/label pair (unsigned bytes). Pixels are scaled to
/// `[0, 1]`; classes are the distinct label values in ascending order.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref().to_path_buf();
    let labels_path = labels_path.as_ref().to_path_buf();
    let image_bytes = read_bytes(&images_path)?;
    let label_bytes = read_bytes(&labels_path)?;
    let images = idx_header(&images_path, &image_bytes, IMAGES_MAGIC)?;
    let labels = idx_header(&labels_path, &label_bytes, LABELS_MAGIC)?;
    let count = images.dims[0];
    if labels.dims[0] != count {
        return Err(Error::data(format!(
            "{} holds {count} images but {} holds {} labels",
            images_path.display(),
            labels_path.display(),
            labels.dims[0]
        )));
    }
    if count == 0 {
        return Err(Error::Format {
            path: images_path,
            message: "no images".into(),
        });
    }
    let dim = images.dims[1] * images.dims[2];
    let points: Vec<Vec<f64>> = images
        .body
        .chunks(dim.max(1))
        .take(count)
        .map(|px| px.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    let values: BTreeSet<u8> = labels.body.iter().copied().collect();
    let values: Vec<u8> = values.into_iter().collect();
    let class_of = |b: u8| values.binary_search(&b).unwrap();
    let ys = labels.body.iter().map(|&b| class_of(b)).collect();
    Dataset::new(points, ys, values.iter().map(u8::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::path::PathBuf;

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn csv_labels_by_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"f1,f2,label\n1,2,a\n3,4,b\n5,6,a\n");
        let d = load_csv(&p, &CsvOptions::new("label")).unwrap();
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.class_sizes(), vec![2, 1]);
        assert_eq!(d.class_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.point(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_sensitive_column_is_not_a_feature() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.csv", b"x,gender,y\n1,f,0\n2,m,1\n");
        let d = load_csv(&p, &CsvOptions::new("y").sensitive("gender")).unwrap();
        assert_eq!(d.feature_dim(), 1);
        assert_eq!(d.sensitive().unwrap(), &["f".to_string(), "m".to_string()]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", b"x,y\n1,a\nfoo,b\n");
        let err = load_csv(&p, &CsvOptions::new("y")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let p = write(&dir, "ragged.csv", b"x,y\n1,a\n2,b,3\n");
        let err = load_csv(&p, &CsvOptions::new("y")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(load_csv(&p, &CsvOptions::new("nope")).is_err());
    }

    fn idx_images(count: u32, rows: u32, cols: u32, px: &[u8]) -> Vec<u8> {
        let mut b = IMAGES_MAGIC.to_be_bytes().to_vec();
        for d in [count, rows, cols] {
            b.extend(d.to_be_bytes());
        }
        b.extend(px);
        b
    }

    fn idx_labels(ys: &[u8]) -> Vec<u8> {
        let mut b = LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend((ys.len() as u32).to_be_bytes());
        b.extend(ys);
        b
    }

    #[test]
    fn idx_scales_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let im = write(&dir, "im", &idx_images(1, 2, 2, &[0, 255, 128, 0]));
        let lb = write(&dir, "lb", &idx_labels(&[7]));
        let d = load_idx(&im, &lb).unwrap();
        assert_eq!(d.point(0), &[0.0, 1.0, 128.0 / 255.0, 0.0]);
        assert_eq!(d.class_names(), &["7".to_string()]);
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(&dir, "empty", b"");
        let lb = write(&dir, "lb", &idx_labels(&[1, 2]));
        assert!(matches!(load_idx(&empty, &lb), Err(Error::Format { .. })));
        let im = write(&dir, "im", &idx_images(1, 1, 1, &[3]));
        assert!(matches!(load_idx(&im, &lb), Err(Error::Data(_))));
        assert!(matches!(load_idx(&lb, &im), Err(Error::Format { .. })));
    }
}
