//! Dataset CSV: header `label,f0,f1,...`, one sample per row, features
//! written with 17 significant digits so a round trip is lossless.

use std::io::Read;
use std::path::Path;

use super::{write_atomic, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn to_csv_string(data: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..data.dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| Error::invalid(e.to_string()))?;
    for (row, &y) in data.x.iter_rows().zip(&data.y) {
        let mut rec = vec![y.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, to_csv_string(data)?.as_bytes())
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse(file, path, name)
}

fn parse<R: Read>(reader: R, path: &Path, name: String) -> Result<Dataset> {
    let err = |line: u64, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.is_empty() || header[0].is_empty() {
        return Err(err(1, "empty file".into()));
    }
    if &header[0] != "label" {
        return Err(err(
            1,
            format!("first column must be \"label\", found {:?}", &header[0]),
        ));
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(err(1, "no feature columns".into()));
    }
    for (j, h) in header.iter().skip(1).enumerate() {
        if h != format!("f{j}") {
            return Err(err(1, format!("column {} must be \"f{j}\", found {h:?}", j + 1)));
        }
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dim + 1 {
            return Err(err(line, format!("expected {} fields, found {}", dim + 1, rec.len())));
        }
        let y: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("label {:?} is not a non-negative integer", &rec[0])))?;
        ys.push(y);
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(line, format!("feature f{j} {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(line, format!("feature f{j} is not finite")));
            }
            xs.push(v);
        }
    }
    if ys.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    let k = ys.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(Matrix::from_vec(ys.len(), dim, xs)?, ys, k, name)
}
