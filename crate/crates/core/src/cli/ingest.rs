//! Reading two-sample data from delimited text.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linstat::DataMatrix;

/// Where the source of the colon tissue data documents the files.
pub const COLON_URL: &str = "http://genomics-pubs.princeton.edu/oncology/affydata/index.html";
pub const COLON_MATRIX_FILE: &str = "I2000";
pub const COLON_TISSUES_FILE: &str = "tissues";
pub const COLON_SHAPE: (usize, usize) = (62, 2000);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    None,
    /// Natural logarithm; every entry must be positive.
    Log,
}

/// Column holding group labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// `None` picks comma, tab or runs of whitespace from the first line.
    pub delimiter: Option<u8>,
    pub has_header: bool,
    /// Rows are observations and this column labels the groups. Without it,
    /// a file holds a single sample.
    pub label_column: Option<LabelColumn>,
    /// Label of the first sample; defaults to the first label seen.
    pub x_label: Option<String>,
    pub transform: Transform,
}

/// A table of observations, optionally labelled.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

fn split_line(line: &str, delim: Option<u8>) -> Vec<String> {
    match delim {
        Some(d) => line.split(d as char).map(|s| s.trim().to_string()).collect(),
        None => line.split_whitespace().map(str::to_string).collect(),
    }
}

fn detect_delimiter(first: &str) -> Option<u8> {
    if first.contains(',') {
        Some(b',')
    } else if first.contains('\t') {
        Some(b'\t')
    } else if first.contains(';') {
        Some(b';')
    } else {
        None
    }
}

type Records = (Option<Vec<String>>, Vec<Vec<String>>);

fn read_records(path: &Path, opts: &IngestOptions) -> Result<Records> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.clone().next().ok_or_else(|| Error::Input(format!("{} is empty", path.display())))?;
    let delim = opts.delimiter.or_else(|| detect_delimiter(first));
    let records = if delim.is_some_and(|d| d != b' ') {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delim.unwrap())
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect::<Vec<_>>()))
            .filter(|r| !matches!(r, Ok(v) if v.iter().all(String::is_empty)))
            .collect::<std::result::Result<Vec<_>, _>>()?
    } else {
        lines.by_ref().map(|l| split_line(l, None)).collect()
    };
    let mut records = records.into_iter();
    let header = if opts.has_header { records.next() } else { None };
    Ok((header, records.collect()))
}

/// Reads one delimited file.
pub fn read_dataset(path: &Path, opts: &IngestOptions) -> Result<Dataset> {
    let (header, records) = read_records(path, opts)?;
    let width = records
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Input(format!("{} has no data rows", path.display())))?;
    if let Some(bad) = records.iter().position(|r| r.len() != width) {
        return Err(Error::Input(format!(
            "{}: row {} has {} fields, expected {width}",
            path.display(),
            bad + 1,
            records[bad].len()
        )));
    }
    let label_idx = match &opts.label_column {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Index(i)) => {
            return Err(Error::Input(format!("label column {i} is out of range (width {width})")))
        }
        Some(LabelColumn::Name(name)) => {
            let h = header
                .as_ref()
                .ok_or_else(|| Error::Input("a named label column needs a header row".into()))?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| {
                Error::Input(format!("no column named {name:?} in the header"))
            })?)
        }
    };
    let cols = width - label_idx.is_some() as usize;
    let mut values = Vec::with_capacity(records.len() * cols);
    let mut labels = label_idx.map(|_| Vec::with_capacity(records.len()));
    for (r, rec) in records.iter().enumerate() {
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                labels.as_mut().expect("labels allocated").push(cell.clone());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Input(format!(
                    "{}: non-numeric value {cell:?} at row {}, column {}",
                    path.display(),
                    r + 1,
                    c + 1
                ))
            })?;
            let v = match opts.transform {
                Transform::None => v,
                Transform::Log if v > 0.0 => v.ln(),
                Transform::Log => {
                    return Err(Error::Input(format!(
                        "{}: cannot take the log of {v} at row {}, column {}",
                        path.display(),
                        r + 1,
                        c + 1
                    )))
                }
            };
            values.push(v);
        }
    }
    Ok(Dataset {
        matrix: DMatrix::from_row_slice(records.len(), cols, &values),
        labels,
    })
}

/// Splits a labelled dataset into its two groups.
pub fn split_groups(data: &Dataset, x_label: Option<&str>) -> Result<(DataMatrix, DataMatrix, [String; 2])> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::Input("no label column given".into()))?;
    let mut distinct: Vec<&str> = Vec::new();
    for l in labels {
        if !distinct.contains(&l.as_str()) {
            distinct.push(l);
        }
    }
    if distinct.len() != 2 {
        return Err(Error::Input(format!(
            "expected exactly two groups, found {}: {:?}",
            distinct.len(),
            distinct
        )));
    }
    let first = match x_label {
        Some(x) if distinct.contains(&x) => x,
        Some(x) => return Err(Error::Input(format!("label {x:?} does not occur"))),
        None => distinct[0],
    };
    let second = *distinct.iter().find(|l| **l != first).expect("two groups");
    let rows = |want: &str| -> Vec<usize> {
        labels.iter().enumerate().filter(|(_, l)| *l == want).map(|(i, _)| i).collect()
    };
    let x = DataMatrix::new(data.matrix.select_rows(&rows(first)))?;
    let y = DataMatrix::new(data.matrix.select_rows(&rows(second)))?;
    Ok((x, y, [first.to_string(), second.to_string()]))
}

/// Reads the two samples from a labelled file.
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<(DataMatrix, DataMatrix)> {
    if opts.label_column.is_none() {
        return Err(Error::Input("single-file input needs a label column".into()));
    }
    let data = read_dataset(path, opts)?;
    let (x, y, _) = split_groups(&data, opts.x_label.as_deref())?;
    Ok((x, y))
}

/// Reads the two samples from two files.
pub fn ingest_two_files(x: &Path, y: &Path, opts: &IngestOptions) -> Result<(DataMatrix, DataMatrix)> {
    let opts = IngestOptions {
        label_column: None,
        ..opts.clone()
    };
    let a = DataMatrix::new(read_dataset(x, &opts)?.matrix)?;
    let b = DataMatrix::new(read_dataset(y, &opts)?.matrix)?;
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} columns but {} has {}",
            x.display(),
            a.p(),
            y.display(),
            b.p()
        )));
    }
    Ok((a, b))
}

/// Loads the colon tissue data from a directory holding `I2000` (genes in
/// rows, tissues in columns, or the transpose) and `tissues` (one signed
/// tissue id per sample; negative ids are tumors). Returns log-transformed
/// `(tumor, normal)` samples.
pub fn load_colon(dir: &Path) -> Result<(DataMatrix, DataMatrix)> {
    let opts = IngestOptions {
        delimiter: None,
        transform: Transform::Log,
        ..Default::default()
    };
    let raw = read_dataset(&dir.join(COLON_MATRIX_FILE), &opts)?.matrix;
    let (n, p) = COLON_SHAPE;
    let m = match raw.shape() {
        s if s == (n, p) => raw,
        s if s == (p, n) => raw.transpose(),
        (r, c) => {
            return Err(Error::Input(format!(
                "colon matrix is {r}x{c}, expected {n}x{p} or {p}x{n}"
            )))
        }
    };
    let text = std::fs::read_to_string(dir.join(COLON_TISSUES_FILE))?;
    let ids: Vec<i64> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Input(format!("bad tissue id {t:?}"))))
        .collect::<Result<_>>()?;
    if ids.len() != n {
        return Err(Error::Input(format!("expected {n} tissue ids, got {}", ids.len())));
    }
    let tumor: Vec<usize> = (0..n).filter(|&i| ids[i] < 0).collect();
    let normal: Vec<usize> = (0..n).filter(|&i| ids[i] > 0).collect();
    Ok((
        DataMatrix::new(m.select_rows(&tumor))?,
        DataMatrix::new(m.select_rows(&normal))?,
    ))
}
