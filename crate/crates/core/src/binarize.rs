//! Conditions and the binary condition matrix used for rule mining.

use std::collections::BTreeSet;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureColumn, FeatureTable, Label, Row};
use crate::error::{Error, Result};

/// Default numeric cut points.
pub const DEFAULT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Operator {
    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Le => "<=",
            Operator::Gt => ">",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Operator::Le | Operator::Gt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionValue {
    Threshold(f64),
    Category(String),
}

/// A single feature test, e.g. `age<=41` or `color!=red`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub op: Operator,
    pub value: ConditionValue,
}

impl Condition {
    pub fn category(feature: impl Into<String>, op: Operator, token: impl Into<String>) -> Self {
        debug_assert!(!op.is_numeric());
        Condition {
            feature: feature.into(),
            op,
            value: ConditionValue::Category(token.into()),
        }
    }

    pub fn threshold(feature: impl Into<String>, op: Operator, threshold: f64) -> Self {
        debug_assert!(op.is_numeric());
        Condition {
            feature: feature.into(),
            op,
            value: ConditionValue::Threshold(threshold),
        }
    }

    fn check_kind(&self) -> Result<()> {
        match (&self.value, self.op.is_numeric()) {
            (ConditionValue::Threshold(t), true) if t.is_finite() => Ok(()),
            (ConditionValue::Category(_), false) => Ok(()),
            _ => Err(Error::Schema(format!(
                "operator `{}` does not fit the value of condition on `{}`",
                self.op.symbol(),
                self.feature
            ))),
        }
    }

    pub fn evaluate(&self, row: &Row<'_>) -> Result<bool> {
        self.check_kind()?;
        match &self.value {
            ConditionValue::Category(token) => {
                let cell = row
                    .cell(&self.feature)
                    .ok_or_else(|| Error::UnknownFeature(self.feature.clone()))?;
                Ok((cell == token) == (self.op == Operator::Eq))
            }
            ConditionValue::Threshold(t) => {
                let x = row
                    .number(&self.feature)?
                    .ok_or_else(|| Error::Schema(format!("feature `{}` is not numeric", self.feature)))?;
                Ok(if self.op == Operator::Le { x <= *t } else { x > *t })
            }
        }
    }

    /// Bit column of this condition over every row of `table`.
    pub fn column_bits(&self, table: &FeatureTable) -> Result<FixedBitSet> {
        self.check_kind()?;
        let col = table
            .column(&self.feature)
            .ok_or_else(|| Error::UnknownFeature(self.feature.clone()))?;
        let mut bits = FixedBitSet::with_capacity(table.n());
        match &self.value {
            ConditionValue::Category(token) => {
                let want_eq = self.op == Operator::Eq;
                for (i, cell) in col.cells.iter().enumerate() {
                    bits.set(i, (cell == token) == want_eq);
                }
            }
            ConditionValue::Threshold(t) => {
                let values = col
                    .numeric
                    .as_ref()
                    .ok_or_else(|| Error::Schema(format!("feature `{}` is not numeric", self.feature)))?;
                for (i, &x) in values.iter().enumerate() {
                    bits.set(i, if self.op == Operator::Le { x <= *t } else { x > *t });
                }
            }
        }
        Ok(bits)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            ConditionValue::Threshold(t) => write!(f, "{}{}{}", self.feature, self.op.symbol(), t),
            ConditionValue::Category(c) => write!(f, "{}{}{}", self.feature, self.op.symbol(), c),
        }
    }
}

/// The ordered list of conditions a binary matrix was built from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinarySchema {
    conditions: Vec<Condition>,
}

impl BinarySchema {
    pub fn new(conditions: Vec<Condition>) -> Self {
        BinarySchema { conditions }
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn position(&self, condition: &Condition) -> Option<usize> {
        self.conditions.iter().position(|c| c == condition)
    }

    /// Evaluates every condition on a (possibly different) dataset.
    pub fn apply(&self, d: &Dataset) -> Result<BinaryDataset> {
        let columns = self
            .conditions
            .iter()
            .map(|c| c.column_bits(d.table()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BinaryDataset {
            schema: self.clone(),
            columns,
            labels: d.labels().to_vec(),
            blackbox: d.blackbox().to_vec(),
        })
    }
}

/// Rows as bit vectors over condition columns, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    schema: BinarySchema,
    columns: Vec<FixedBitSet>,
    labels: Vec<Label>,
    blackbox: Vec<Label>,
}

impl BinaryDataset {
    /// Builds a binary dataset directly from bit columns named `b0`, `b1`, ...
    /// (each condition reads `bJ==1`). Used for synthetic fixtures.
    pub fn from_bits(columns: Vec<FixedBitSet>, labels: Vec<Label>, blackbox: Vec<Label>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if blackbox.len() != n || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Schema("bit columns and labels disagree in length".into()));
        }
        let conditions = (0..columns.len())
            .map(|j| Condition::category(format!("b{j}"), Operator::Eq, "1"))
            .collect();
        Ok(BinaryDataset {
            schema: BinarySchema::new(conditions),
            columns,
            labels,
            blackbox,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn schema(&self) -> &BinarySchema {
        &self.schema
    }

    pub fn condition_names(&self) -> &[Condition] {
        self.schema.conditions()
    }

    pub fn columns(&self) -> &[FixedBitSet] {
        &self.columns
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn blackbox(&self) -> &[Label] {
        &self.blackbox
    }

    pub fn bit(&self, row: usize, condition: usize) -> bool {
        self.columns[condition].contains(row)
    }

    /// Indices of the conditions instance `row` satisfies.
    pub fn row_items(&self, row: usize) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| self.columns[j].contains(row))
            .collect()
    }

    /// The synthetic-fixture feature table matching [`BinaryDataset::from_bits`].
    pub fn to_dataset(&self) -> Result<Dataset> {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, bits)| {
                let cells = (0..self.n())
                    .map(|i| if bits.contains(i) { "1" } else { "0" }.to_string())
                    .collect();
                FeatureColumn {
                    name: format!("b{j}"),
                    cells,
                    numeric: None,
                }
            })
            .collect();
        Dataset::new(FeatureTable::new(columns)?, self.labels.clone(), self.blackbox.clone())
    }
}

/// Nearest-rank empirical quantile: the smallest sample value with at least
/// `q * m` samples at or below it.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = (q * m as f64).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

fn column_conditions(col: &FeatureColumn, quantiles: &[f64]) -> Vec<Condition> {
    match &col.numeric {
        Some(values) => {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let max = *sorted.last().expect("nonempty column");
            let mut thresholds: Vec<f64> = quantiles
                .iter()
                .map(|&q| empirical_quantile(&sorted, q))
                .filter(|&t| t < max)
                .collect();
            thresholds.dedup();
            thresholds
                .into_iter()
                .flat_map(|t| {
                    [
                        Condition::threshold(&col.name, Operator::Le, t),
                        Condition::threshold(&col.name, Operator::Gt, t),
                    ]
                })
                .collect()
        }
        None => {
            let values: BTreeSet<&str> = col.cells.iter().map(String::as_str).collect();
            if values.len() < 2 {
                return Vec::new();
            }
            let eq = values.iter().map(|v| Condition::category(&col.name, Operator::Eq, *v));
            let ne = values.iter().map(|v| Condition::category(&col.name, Operator::Ne, *v));
            eq.chain(ne).collect()
        }
    }
}

/// Categorical features yield `f==v` and `f!=v` for every observed value;
/// numeric features yield `f<=t` and `f>t` at each distinct empirical quantile
/// below the maximum. Constant features contribute nothing.
pub fn binarize(d: &Dataset, quantiles: &[f64]) -> Result<BinaryDataset> {
    if quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(Error::invalid("quantiles must lie in (0, 1)"));
    }
    if quantiles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("quantiles must be sorted and distinct"));
    }
    let conditions: Vec<Condition> = d
        .table()
        .columns()
        .iter()
        .flat_map(|c| column_conditions(c, quantiles))
        .collect();
    if conditions.is_empty() {
        return Err(Error::invalid(
            "binarization produced no conditions (all features constant?)",
        ));
    }
    BinarySchema::new(conditions).apply(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(csv: &str) -> Dataset {
        Dataset::from_reader(csv.as_bytes(), "y", "bb").unwrap()
    }

    #[test]
    fn categorical_two_values() {
        let d = data("f,y,bb\na,1,1\nb,0,1\na,1,0\n");
        let b = binarize(&d, &DEFAULT_QUANTILES).unwrap();
        let names: Vec<String> = b.condition_names().iter().map(|c| c.to_string()).collect();
        assert_eq!(names, ["f==a", "f==b", "f!=a", "f!=b"]);
        assert_eq!(b.row_items(0), vec![0, 3]);
        assert_eq!(b.row_items(1), vec![1, 2]);
    }

    #[test]
    fn numeric_median_threshold() {
        let d = data("age,y,bb\n25,1,1\n41,0,1\n33,1,0\n60,0,0\n52,1,1\n");
        let b = binarize(&d, &[0.5]).unwrap();
        let names: Vec<String> = b.condition_names().iter().map(|c| c.to_string()).collect();
        assert_eq!(names, ["age<=41", "age>41"]);
        // 25, 41, 33 fall at or below the median
        assert_eq!(b.columns()[0].ones().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn constant_feature_contributes_nothing() {
        let d = data("c,k,f,y,bb\n5,z,a,1,1\n5,z,b,0,0\n");
        let b = binarize(&d, &DEFAULT_QUANTILES).unwrap();
        assert!(b.condition_names().iter().all(|c| c.feature == "f"));
        let only_constant = data("c,y,bb\n5,1,1\n5,0,0\n");
        assert!(binarize(&only_constant, &DEFAULT_QUANTILES).is_err());
    }

    #[test]
    fn quantiles_validated() {
        let d = data("x,y,bb\n1,1,1\n2,0,0\n");
        assert!(binarize(&d, &[0.5, 0.25]).is_err());
        assert!(binarize(&d, &[0.5, 0.5]).is_err());
        assert!(binarize(&d, &[1.0]).is_err());
    }

    #[test]
    fn nearest_rank_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&s, 0.25), 1.0);
        assert_eq!(empirical_quantile(&s, 0.5), 2.0);
        assert_eq!(empirical_quantile(&s, 0.75), 3.0);
        assert_eq!(empirical_quantile(&s, 0.01), 1.0);
    }

    #[test]
    fn evaluate_matches_bits() {
        let d = data("age,f,y,bb\n41,a,1,1\n42,b,0,1\n");
        let le = Condition::threshold("age", Operator::Le, 41.0);
        assert!(le.evaluate(&d.row(0)).unwrap());
        assert!(!le.evaluate(&d.row(1)).unwrap());
        let bad = Condition::threshold("f", Operator::Le, 1.0);
        assert!(bad.evaluate(&d.row(0)).is_err());
        let unknown = Condition::category("zzz", Operator::Eq, "a");
        assert!(matches!(unknown.evaluate(&d.row(0)), Err(Error::UnknownFeature(_))));
    }

    #[test]
    fn serde_shape() {
        let c = Condition::threshold("age", Operator::Le, 41.0);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"feature":"age","op":"<=","value":41.0}"#);
        let back: Condition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let cat: Condition = serde_json::from_str(r#"{"feature":"f","op":"==","value":"41"}"#).unwrap();
        assert_eq!(cat.value, ConditionValue::Category("41".into()));
    }
}
