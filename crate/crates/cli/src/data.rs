//! CSV ingestion: column typing, dummy coding of categorical columns,
//! outcome transforms, standardization and the seeded train/test split.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::args::Transform;
use crate::error::{usage, Result};

/// Raw CSV contents: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if headers.is_empty() || headers.iter().any(|h| h.is_empty()) {
        return Err(usage("CSV header has an empty column name"));
    }
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(usage(format!("duplicate column '{h}'")));
        }
    }
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    if rows.is_empty() {
        return Err(usage("CSV has no data rows"));
    }
    Ok(Table { headers, rows })
}

pub fn read_table_path(path: &Path) -> Result<Table> {
    let f = std::fs::File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    read_table(std::io::BufReader::new(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Numeric { name: String },
    /// One dummy per level after the first.
    Categorical { name: String, levels: Vec<String> },
}

/// How predictor columns map to model features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub columns: Vec<ColumnEncoding>,
    pub target: Option<String>,
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl Encoding {
    /// Numeric columns stay as they are; any column with a non-numeric cell
    /// is categorical with its levels in sorted order.
    pub fn infer(table: &Table, target: Option<&str>) -> Result<Self> {
        if let Some(t) = target {
            let j = table.column(t).ok_or_else(|| usage(format!("no column named '{t}'")))?;
            if let Some((i, r)) = table.rows.iter().enumerate().find(|(_, r)| parse_number(&r[j]).is_none()) {
                return Err(usage(format!("outcome '{t}' is not numeric at row {}: '{}'", i + 1, r[j])));
            }
        }
        let mut columns = Vec::new();
        for (j, name) in table.headers.iter().enumerate() {
            if Some(name.as_str()) == target {
                continue;
            }
            if let Some(i) = table.rows.iter().position(|r| r[j].is_empty()) {
                return Err(usage(format!("missing value in column '{name}' at row {}", i + 1)));
            }
            if table.rows.iter().all(|r| parse_number(&r[j]).is_some()) {
                columns.push(ColumnEncoding::Numeric { name: name.clone() });
            } else {
                let mut levels: Vec<String> = table.rows.iter().map(|r| r[j].clone()).collect();
                levels.sort();
                levels.dedup();
                columns.push(ColumnEncoding::Categorical { name: name.clone(), levels });
            }
        }
        if columns.iter().all(|c| matches!(c, ColumnEncoding::Categorical { levels, .. } if levels.len() < 2)) {
            return Err(usage("no usable predictor columns"));
        }
        Ok(Self { columns, target: target.map(String::from) })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c {
                ColumnEncoding::Numeric { name } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, levels } => {
                    out.extend(levels.iter().skip(1).map(|l| format!("{name}={l}")));
                }
            }
        }
        out
    }

    /// Predictor matrix, and the outcome when the table has the target column.
    pub fn apply(&self, table: &Table) -> Result<(DMatrix<f64>, Option<DVector<f64>>)> {
        let n = table.rows.len();
        let names = self.feature_names();
        let mut x = DMatrix::zeros(n, names.len());
        let mut col = 0;
        for c in &self.columns {
            let name = match c {
                ColumnEncoding::Numeric { name } | ColumnEncoding::Categorical { name, .. } => name,
            };
            let j = table.column(name).ok_or_else(|| usage(format!("no column named '{name}'")))?;
            match c {
                ColumnEncoding::Numeric { .. } => {
                    for (i, r) in table.rows.iter().enumerate() {
                        x[(i, col)] = parse_number(&r[j])
                            .ok_or_else(|| usage(format!("column '{name}' row {}: '{}' is not a number", i + 1, r[j])))?;
                    }
                    col += 1;
                }
                ColumnEncoding::Categorical { levels, .. } => {
                    for (i, r) in table.rows.iter().enumerate() {
                        let k = levels
                            .iter()
                            .position(|l| *l == r[j])
                            .ok_or_else(|| usage(format!("column '{name}' row {}: unknown level '{}'", i + 1, r[j])))?;
                        if k > 0 {
                            x[(i, col + k - 1)] = 1.0;
                        }
                    }
                    col += levels.len() - 1;
                }
            }
        }
        let y = match self.target.as_deref().and_then(|t| table.column(t)) {
            Some(j) => Some(DVector::from_iterator(
                n,
                table.rows.iter().enumerate().map(|(i, r)| {
                    parse_number(&r[j]).ok_or_else(|| usage(format!("outcome row {}: '{}' is not a number", i + 1, r[j])))
                }).collect::<Result<Vec<f64>>>()?,
            )),
            None => None,
        };
        Ok((x, y))
    }
}

pub fn apply_transform(y: &DVector<f64>, t: Transform) -> Result<DVector<f64>> {
    match t {
        Transform::None => Ok(y.clone()),
        Transform::Log => {
            if y.iter().any(|&v| v <= 0.0) {
                return Err(usage("log transform needs a positive outcome"));
            }
            Ok(y.map(f64::ln))
        }
        Transform::Sqrt => {
            if y.iter().any(|&v| v < 0.0) {
                return Err(usage("sqrt transform needs a nonnegative outcome"));
            }
            Ok(y.map(f64::sqrt))
        }
    }
}

/// Affine map to the modelling scale: `(y − mean)/sd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling { mean: 0.0, sd: 1.0 };

    /// Sample mean and sd; a constant outcome keeps unit sd.
    pub fn fit(y: &DVector<f64>) -> Self {
        let n = y.len();
        let mean = y.mean();
        let sd = if n > 1 { (y.map(|v| (v - mean).powi(2)).sum() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, sd: if sd > 0.0 { sd } else { 1.0 } }
    }

    pub fn forward(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.mean) / self.sd)
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.sd + self.mean
    }
}

/// Seeded permutation split with `ratio` train rows per test row; both
/// index lists are returned sorted.
pub fn split_rows(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(usage(format!("train ratio must be finite and > 0, got {ratio}")));
    }
    let n_test = ((n as f64) / (ratio + 1.0)).round() as usize;
    if n_test == 0 || n - n_test < 3 {
        return Err(usage(format!("{n} rows cannot be split {ratio}:1 into a nonempty test set and >= 3 training rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

pub fn select(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| y[rows[i]])
}

/// Friedman's benchmark mean `10 sin(π x₁x₂) + 20(x₃ − ½)² + 10x₄ + 5x₅`
/// on uniform predictors, plus an optional categorical shift and Gaussian noise.
pub fn friedman(n: usize, p: usize, noise: f64, categorical: bool, seed: u64) -> Result<Table> {
    if p < 5 {
        return Err(usage("the Friedman mean needs p >= 5"));
    }
    if n == 0 || !(noise >= 0.0 && noise.is_finite()) {
        return Err(usage("need n >= 1 and a finite noise sd >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut headers: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    if categorical {
        headers.push("g".into());
    }
    headers.push("y".into());
    let levels = [("a", 0.0), ("b", 2.0), ("c", -1.0)];
    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
            let mut mean = 10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                + 20.0 * (x[2] - 0.5).powi(2)
                + 10.0 * x[3]
                + 5.0 * x[4];
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
            if categorical {
                let (name, shift) = levels[rng.gen_range(0..levels.len())];
                mean += shift;
                row.push(name.into());
            }
            let e: f64 = rng.sample(StandardNormal);
            row.push(format!("{:.6}", mean + noise * e));
            row
        })
        .collect();
    Ok(Table { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> Table {
        read_table(csv.as_bytes()).unwrap()
    }

    #[test]
    fn dummies_and_target() {
        let t = table("a,g,y\n1.5,red,1\n2,blue,2\n3,red,3\n4,green,5\n");
        let e = Encoding::infer(&t, Some("y")).unwrap();
        assert_eq!(e.feature_names(), ["a", "g=green", "g=red"]);
        let (x, y) = e.apply(&t).unwrap();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), [1.5, 0.0, 1.0]);
        assert_eq!(x.row(1).iter().copied().collect::<Vec<_>>(), [2.0, 0.0, 0.0]);
        assert_eq!(y.unwrap()[3], 5.0);
        let new = table("a,g\n1,purple\n");
        assert!(e.apply(&new).is_err());
        let (_, y) = e.apply(&table("g,a\nred,7\n")).unwrap();
        assert!(y.is_none());
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(read_table("a,a\n1,2\n".as_bytes()).is_err());
        assert!(read_table("a,b\n".as_bytes()).is_err());
        assert!(read_table("a,b\n1,2,3\n".as_bytes()).is_err());
        let t = table("a,y\n1,x\n");
        assert!(Encoding::infer(&t, Some("y")).is_err());
        assert!(Encoding::infer(&t, Some("z")).is_err());
        let t = table("a,y\n,1\n2,2\n");
        assert!(Encoding::infer(&t, Some("y")).is_err());
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let (tr, te) = split_rows(240, 5.0, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (200, 40));
        assert_eq!(split_rows(240, 5.0, 3).unwrap(), (tr.clone(), te.clone()));
        assert_ne!(split_rows(240, 5.0, 4).unwrap().1, te);
        let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
        all.sort_unstable();
        assert_eq!(all, (0..240).collect::<Vec<_>>());
        assert!(split_rows(3, 5.0, 0).is_err());
    }

    #[test]
    fn transforms_and_scaling() {
        let y = DVector::from_vec(vec![1.0, 4.0, 9.0]);
        assert_eq!(apply_transform(&y, Transform::Sqrt).unwrap(), DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!(apply_transform(&DVector::from_vec(vec![0.0]), Transform::Log).is_err());
        let s = Scaling::fit(&y);
        let z = s.forward(&y);
        assert!(z.mean().abs() < 1e-15);
        assert!((s.inverse(z[2]) - 9.0).abs() < 1e-12);
        assert_eq!(Scaling::fit(&DVector::from_vec(vec![2.0, 2.0])).sd, 1.0);
    }
}
