//! Labeled tables carrying black-box predictions.
//!
//! The black-box classifier never appears as code: it is the column of hard
//! labels it produced. Everything downstream reads a [`Dataset`] immutably.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// +1.0 or -1.0.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    /// Parses a true-label cell: `-1`/`+1` or `0`/`1`.
    pub fn parse_truth(cell: &str) -> Option<Self> {
        let v: f64 = cell.trim().parse().ok()?;
        if v == 1.0 {
            Some(Label::Positive)
        } else if v == 0.0 || v == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }

    /// Parses a black-box cell: `-1`/`+1`, `0`/`1`, or a probability in
    /// `[0, 1]` thresholded at 0.5.
    pub fn parse_blackbox(cell: &str) -> Option<Self> {
        let v: f64 = cell.trim().parse().ok()?;
        if v == -1.0 {
            Some(Label::Negative)
        } else if (0.0..=1.0).contains(&v) {
            Some(Label::from_sign(v >= 0.5))
        } else {
            None
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// One feature column. Every cell keeps its raw token; `numeric` is present
/// when every token parses as a finite number.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub cells: Vec<String>,
    pub numeric: Option<Vec<f64>>,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, cells: Vec<String>) -> Self {
        let numeric = cells
            .iter()
            .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>();
        FeatureColumn {
            name: name.into(),
            cells,
            numeric,
        }
    }

    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let cells = values.iter().map(|v| v.to_string()).collect();
        FeatureColumn {
            name: name.into(),
            cells,
            numeric: Some(values),
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric.is_some()
    }

    fn subset(&self, rows: &[usize]) -> Self {
        FeatureColumn {
            name: self.name.clone(),
            cells: rows.iter().map(|&i| self.cells[i].clone()).collect(),
            numeric: self.numeric.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Feature columns without labels; what `predict` consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<FeatureColumn>,
    index: HashMap<String, usize>,
    n: usize,
}

impl FeatureTable {
    pub fn new(columns: Vec<FeatureColumn>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.cells.len());
        let mut index = HashMap::with_capacity(columns.len());
        for (pos, col) in columns.iter().enumerate() {
            if col.cells.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} cells, expected {n}",
                    col.name,
                    col.cells.len()
                )));
            }
            if let Some(first) = index.insert(col.name.clone(), pos) {
                return Err(Error::DuplicateColumn {
                    name: col.name.clone(),
                    first,
                    second: pos,
                });
            }
        }
        Ok(FeatureTable { columns, index, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&FeatureColumn> {
        self.index.get(name).map(|&i| &self.columns[i])
    }

    pub fn row(&self, index: usize) -> Row<'_> {
        assert!(index < self.n, "row {index} out of range for {} rows", self.n);
        Row { table: self, index }
    }

    fn subset(&self, rows: &[usize]) -> Self {
        FeatureTable {
            columns: self.columns.iter().map(|c| c.subset(rows)).collect(),
            index: self.index.clone(),
            n: rows.len(),
        }
    }
}

/// Borrowed view of one instance.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    table: &'a FeatureTable,
    index: usize,
}

impl<'a> Row<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn cell(&self, feature: &str) -> Option<&'a str> {
        self.table.column(feature).map(|c| c.cells[self.index].as_str())
    }

    /// `Ok(None)` when the feature exists but is not numeric.
    pub fn number(&self, feature: &str) -> Result<Option<f64>> {
        let col = self
            .table
            .column(feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
        Ok(col.numeric.as_ref().map(|v| v[self.index]))
    }
}

/// Feature table plus true labels and black-box labels, all of length `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    table: FeatureTable,
    labels: Vec<Label>,
    blackbox: Vec<Label>,
}

impl Dataset {
    pub fn new(table: FeatureTable, labels: Vec<Label>, blackbox: Vec<Label>) -> Result<Self> {
        let n = table.n();
        if n == 0 {
            return Err(Error::Empty);
        }
        if labels.len() != n || blackbox.len() != n {
            return Err(Error::Schema(format!(
                "{n} rows but {} labels and {} black-box labels",
                labels.len(),
                blackbox.len()
            )));
        }
        Ok(Dataset {
            table,
            labels,
            blackbox,
        })
    }

    pub fn load(path: impl AsRef<Path>, label_column: &str, blackbox_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, label_column, blackbox_column)
    }

    pub fn from_reader(reader: impl Read, label_column: &str, blackbox_column: &str) -> Result<Self> {
        let raw = RawTable::read(reader)?;
        let label_pos = raw.position(label_column)?;
        let bb_pos = raw.position(blackbox_column)?;
        if label_pos == bb_pos {
            return Err(Error::invalid("label and black-box columns must be different"));
        }
        let labels = raw.parse_column(label_pos, Label::parse_truth, "expected -1/+1 or 0/1")?;
        let blackbox = raw.parse_column(
            bb_pos,
            Label::parse_blackbox,
            "expected -1/+1, 0/1 or a probability in [0, 1]",
        )?;
        let table = raw.into_table(&[label_pos, bb_pos])?;
        Dataset::new(table, labels, blackbox)
    }

    /// Writes the canonical CSV: features in order, then the label and
    /// black-box columns as `-1`/`1`.
    pub fn write_csv(&self, writer: impl Write, label_column: &str, blackbox_column: &str) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.table.feature_names().collect();
        header.push(label_column);
        header.push(blackbox_column);
        out.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = self.table.columns().iter().map(|c| c.cells[i].clone()).collect();
            record.push(self.labels[i].to_string());
            record.push(self.blackbox[i].to_string());
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, label_column: &str, blackbox_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), label_column, blackbox_column)
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn blackbox(&self) -> &[Label] {
        &self.blackbox
    }

    pub fn row(&self, index: usize) -> Row<'_> {
        self.table.row(index)
    }

    /// Fraction of rows where the black-box agrees with the true label.
    pub fn blackbox_accuracy(&self) -> f64 {
        let agree = self.labels.iter().zip(&self.blackbox).filter(|(y, b)| y == b).count();
        agree as f64 / self.n() as f64
    }

    /// Rows in the given order. Panics on out-of-range indices.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Dataset::new(
            self.table.subset(rows),
            rows.iter().map(|&i| self.labels[i]).collect(),
            rows.iter().map(|&i| self.blackbox[i]).collect(),
        )
    }
}

/// Loads only the feature columns and black-box labels, dropping `ignore`
/// columns when present.
pub fn load_for_prediction(
    reader: impl Read,
    blackbox_column: &str,
    ignore: &[&str],
) -> Result<(FeatureTable, Vec<Label>)> {
    let raw = RawTable::read(reader)?;
    let bb_pos = raw.position(blackbox_column)?;
    let blackbox = raw.parse_column(
        bb_pos,
        Label::parse_blackbox,
        "expected -1/+1, 0/1 or a probability in [0, 1]",
    )?;
    let mut drop = vec![bb_pos];
    drop.extend(ignore.iter().filter_map(|name| raw.position(name).ok()));
    Ok((raw.into_table(&drop)?, blackbox))
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl RawTable {
    fn read(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Empty);
        }
        let mut seen = HashMap::new();
        for (pos, name) in header.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Cell {
                    row: 0,
                    column: format!("#{}", pos + 1),
                    message: "empty column name".into(),
                });
            }
            if let Some(first) = seen.insert(name.as_str(), pos) {
                return Err(Error::DuplicateColumn {
                    name: name.clone(),
                    first,
                    second: pos,
                });
            }
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
            if let Some(pos) = row.iter().position(|c| c.is_empty()) {
                return Err(Error::Cell {
                    row: i + 1,
                    column: header[pos].clone(),
                    message: "missing value".into(),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        Ok(RawTable { header, rows })
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn parse_column(&self, pos: usize, parse: fn(&str) -> Option<Label>, expected: &str) -> Result<Vec<Label>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                parse(&row[pos]).ok_or_else(|| Error::Cell {
                    row: i + 1,
                    column: self.header[pos].clone(),
                    message: format!("cannot parse `{}`: {expected}", row[pos]),
                })
            })
            .collect()
    }

    fn into_table(self, drop: &[usize]) -> Result<FeatureTable> {
        let RawTable { header, rows } = self;
        let columns = header
            .into_iter()
            .enumerate()
            .filter(|(pos, _)| !drop.contains(pos))
            .map(|(pos, name)| {
                let cells = rows.iter().map(|r| r[pos].clone()).collect();
                FeatureColumn::new(name, cells)
            })
            .collect();
        FeatureTable::new(columns)
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

/// Seeded random partition into `floor(n * fraction)` training rows and the
/// rest. Each side keeps the original row order.
pub fn split(d: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = d.n();
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = (n as f64 * spec.train_fraction).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "train fraction {} leaves an empty side for {n} rows",
            spec.train_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train, test) = perm.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.subset(train)?, d.subset(test)?))
}
