use std::io::{BufRead, Read, Write};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Parses LIBSVM regression text: `<target> <index>:<value> ...` with
/// 1-based, strictly increasing indices. Missing indices are zero.
pub fn parse_libsvm<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Dataset> {
    let mut targets = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let target_tok = tokens.next().expect("non-empty line has a token");
        let target: f64 = target_tok
            .parse()
            .map_err(|_| err(format!("invalid target {target_tok:?}")))?;
        if !target.is_finite() {
            return Err(err("non-finite target".into()));
        }
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("invalid feature index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("invalid feature value {val:?}")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("feature index {idx} does not increase (previous {last})")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value for feature {idx}")));
            }
            if let Some(dim) = expected_dim {
                if idx > dim {
                    return Err(err(format!("feature index {idx} exceeds expected dimension {dim}")));
                }
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        targets.push(target);
        sparse_rows.push(row);
    }
    let dim = expected_dim.unwrap_or(max_index);
    let mut data = vec![0.0; sparse_rows.len() * dim];
    for (i, row) in sparse_rows.iter().enumerate() {
        for &(j, v) in row {
            data[i * dim + j] = v;
        }
    }
    let meta = DatasetMeta {
        source: "libsvm".into(),
        ..Default::default()
    };
    Dataset::new(DenseMatrix::new(targets.len(), dim, data)?, targets, meta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Bare integers are column indices, anything else a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

/// Column selection for [`parse_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub target: TargetColumn,
    /// Optional column of noise-free targets (kept out of the features).
    pub clean_target: Option<TargetColumn>,
    /// Columns to ignore entirely.
    pub drop: Vec<TargetColumn>,
}

impl CsvOptions {
    pub fn new(target: TargetColumn) -> Self {
        CsvOptions {
            target,
            clean_target: None,
            drop: Vec::new(),
        }
    }
}

fn resolve(col: &TargetColumn, header: Option<&[String]>, width: usize) -> Result<usize> {
    let idx = match col {
        TargetColumn::Index(i) => *i,
        TargetColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::invalid(format!("column {name:?} not found in CSV header")))?,
    };
    if idx >= width {
        return Err(Error::invalid(format!("column index {idx} out of range for {width} columns")));
    }
    Ok(idx)
}

/// Parses a rectangular numeric CSV. The header row is optional and is
/// detected by any non-numeric cell in the first record.
pub fn parse_csv<R: Read>(reader: R, target: TargetColumn) -> Result<Dataset> {
    parse_csv_with(reader, &CsvOptions::new(target))
}

struct Table {
    header: Option<Vec<String>>,
    width: Option<usize>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if i == 0 && rec.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect());
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                line,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(w);
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: non-numeric value {cell:?}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value", j + 1),
                });
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    Ok(Table { header, width, rows })
}

pub fn parse_csv_with<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let Table { header, width, rows } = read_table(reader)?;
    let meta = DatasetMeta {
        source: "csv".into(),
        ..Default::default()
    };
    let Some(width) = width else {
        return Dataset::new(DenseMatrix::zeros(0, 0), Vec::new(), meta);
    };
    let h = header.as_deref();
    let target = resolve(&opts.target, h, width)?;
    let clean = opts.clean_target.as_ref().map(|c| resolve(c, h, width)).transpose()?;
    let mut skip = vec![false; width];
    skip[target] = true;
    if let Some(c) = clean {
        skip[c] = true;
    }
    for d in &opts.drop {
        skip[resolve(d, h, width)?] = true;
    }
    let dim = skip.iter().filter(|s| !**s).count();
    let mut data = Vec::with_capacity(rows.len() * dim);
    let mut targets = Vec::with_capacity(rows.len());
    let mut clean_vals = Vec::new();
    for r in &rows {
        data.extend(r.iter().zip(&skip).filter(|(_, s)| !**s).map(|(v, _)| *v));
        targets.push(r[target]);
        if let Some(c) = clean {
            clean_vals.push(r[c]);
        }
    }
    let ds = Dataset::new(DenseMatrix::new(rows.len(), dim, data)?, targets, meta)?;
    if clean.is_some() {
        ds.with_clean_targets(clean_vals)
    } else {
        Ok(ds)
    }
}

/// Parses a numeric CSV in which every column not listed in `drop` is a
/// feature. An input without data rows yields a `0 × 0` matrix.
pub fn parse_csv_features<R: Read>(reader: R, drop: &[TargetColumn]) -> Result<DenseMatrix> {
    let Table { header, width, rows } = read_table(reader)?;
    let Some(width) = width else {
        return Ok(DenseMatrix::zeros(0, 0));
    };
    let mut skip = vec![false; width];
    for d in drop {
        skip[resolve(d, header.as_deref(), width)?] = true;
    }
    let dim = skip.iter().filter(|s| !**s).count();
    let data: Vec<f64> = rows
        .iter()
        .flat_map(|r| r.iter().zip(&skip).filter(|(_, s)| !**s).map(|(v, _)| *v))
        .collect();
    DenseMatrix::new(rows.len(), dim, data)
}

/// Reads only the header row, if the first record is one.
pub fn csv_header<R: Read>(reader: R) -> Result<Option<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    match rdr.records().next() {
        Some(rec) => {
            let rec = rec?;
            Ok(rec
                .iter()
                .any(|c| c.parse::<f64>().is_err())
                .then(|| rec.iter().map(str::to_string).collect()))
        }
        None => Ok(None),
    }
}

/// Writes `x1..xd,y` (plus `f` when noise-free targets exist). Values use
/// the shortest representation that parses back to the same bits.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if data.clean_targets.is_some() {
        header.push("f".into());
    }
    w.write_record(&header)?;
    let mut buf = Vec::with_capacity(header.len());
    for (i, r) in data.features.iter_rows().enumerate() {
        buf.clear();
        buf.extend(r.iter().map(|v| v.to_string()));
        buf.push(data.targets[i].to_string());
        if let Some(c) = &data.clean_targets {
            buf.push(c[i].to_string());
        }
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}
