//! Hybrid linear models.
//!
//! A linear score `s = w'x` with two thresholds `theta_plus >= theta_minus`
//! routes an instance: `s >= theta_plus` gives `+1`, `s <= theta_minus` gives
//! `-1`, and the band in between defers to the black-box. Training minimizes
//!
//! ```text
//! F = L_mu(w, theta_plus, theta_minus) + alpha1 |w|_1 + alpha2 (theta_plus - theta_minus)
//! ```
//!
//! where the loss scores an instance the black-box calls positive against
//! `theta_minus` (the only boundary that can overturn that call) and one it
//! calls negative against `theta_plus`.

mod apg;
mod loss;

pub use apg::{apg_solve, apg_train, momentum_update, prox_l1, threshold_step, ApgConfig, ApgRun};
pub use loss::{loss_phi, smoothed_phi, smoothed_phi_grad, LossKind, LossSpec, DEFAULT_MU};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureTable, Label, Row};
use crate::error::{Error, Result};
use crate::route::Route;

/// How one model input is computed from a raw feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Encoding {
    /// The feature's numeric value.
    Numeric { feature: String },
    /// 1 when the feature's token equals `value`, else 0.
    Indicator { feature: String, value: String },
}

impl Encoding {
    pub fn name(&self) -> String {
        match self {
            Encoding::Numeric { feature } => feature.clone(),
            Encoding::Indicator { feature, value } => format!("{feature}=={value}"),
        }
    }

    fn raw(&self, row: &Row<'_>) -> Result<f64> {
        match self {
            Encoding::Numeric { feature } => {
                let cell = row
                    .cell(feature)
                    .ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Cell {
                        row: row.index() + 1,
                        column: feature.clone(),
                        message: format!("expected a number, found `{cell}`"),
                    })
            }
            Encoding::Indicator { feature, value } => {
                let cell = row
                    .cell(feature)
                    .ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
                Ok(if cell == value { 1.0 } else { 0.0 })
            }
        }
    }
}

/// Z-score parameters for one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    /// Population standard deviation, or 1 for a constant input.
    pub scale: f64,
}

/// Maps raw feature rows to standardized model inputs: numeric features pass
/// through, categorical ones are one-hot encoded over their training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub inputs: Vec<Encoding>,
    pub standardization: Vec<Standardization>,
}

impl Design {
    /// Fits encodings and z-score parameters on `table`.
    pub fn fit(table: &FeatureTable) -> Result<Design> {
        let mut inputs = Vec::new();
        let mut raw_columns: Vec<Vec<f64>> = Vec::new();
        for col in table.columns() {
            if let Some(values) = &col.numeric {
                inputs.push(Encoding::Numeric {
                    feature: col.name.clone(),
                });
                raw_columns.push(values.clone());
            } else {
                let levels: BTreeSet<&str> = col.cells.iter().map(String::as_str).collect();
                for level in levels {
                    inputs.push(Encoding::Indicator {
                        feature: col.name.clone(),
                        value: level.to_string(),
                    });
                    raw_columns.push(col.cells.iter().map(|c| (c == level) as u8 as f64).collect());
                }
            }
        }
        if inputs.is_empty() {
            return Err(Error::invalid("dataset has no feature columns"));
        }
        let standardization = raw_columns
            .iter()
            .map(|values| {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                Standardization {
                    mean,
                    scale: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
                }
            })
            .collect();
        Ok(Design {
            inputs,
            standardization,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.inputs.iter().map(Encoding::name).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.standardization.len() {
            return Err(Error::Format("standardization length differs from input count".into()));
        }
        for s in &self.standardization {
            if !(s.scale > 0.0 && s.scale.is_finite() && s.mean.is_finite()) {
                return Err(Error::Format(format!(
                    "invalid standardization (mean {}, scale {})",
                    s.mean, s.scale
                )));
            }
        }
        Ok(())
    }

    /// Standardized inputs for one row.
    pub fn encode(&self, row: &Row<'_>) -> Result<Vec<f64>> {
        self.inputs
            .iter()
            .zip(&self.standardization)
            .map(|(enc, s)| Ok((enc.raw(row)? - s.mean) / s.scale))
            .collect()
    }

    /// Row-major standardized matrix for a whole table.
    pub fn transform(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(table.n() * self.len());
        for i in 0..table.n() {
            out.extend(self.encode(&table.row(i))?);
        }
        Ok(out)
    }
}

/// Standardized training matrix with labels as signs and the black-box
/// partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearData {
    x: Vec<f64>,
    p: usize,
    y: Vec<f64>,
    bb_positive: Vec<bool>,
}

impl LinearData {
    /// `x` is row-major with `p` columns.
    pub fn new(x: Vec<f64>, p: usize, labels: &[Label], blackbox: &[Label]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if blackbox.len() != n || x.len() != n * p {
            return Err(Error::invalid("matrix, labels and black-box lengths disagree"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix has non-finite entries"));
        }
        Ok(LinearData {
            x,
            p,
            y: labels.iter().map(|l| l.sign()).collect(),
            bb_positive: blackbox.iter().map(|l| l.is_positive()).collect(),
        })
    }

    pub fn from_dataset(design: &Design, d: &Dataset) -> Result<Self> {
        LinearData::new(design.transform(d.table())?, design.len(), d.labels(), d.blackbox())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn blackbox_positive(&self, i: usize) -> bool {
        self.bb_positive[i]
    }

    /// Margin of instance `i` against the boundary that governs it.
    pub fn margin(&self, i: usize, w: &[f64], theta_plus: f64, theta_minus: f64) -> f64 {
        let theta = if self.bb_positive[i] { theta_minus } else { theta_plus };
        self.y[i] * (dot(w, self.row(i)) - theta)
    }

    fn check_dims(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.p {
            return Err(Error::Schema(format!("{} coefficients for {} inputs", w.len(), self.p)));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean smoothed loss over the black-box partition.
pub fn smoothed_loss(w: &[f64], theta_plus: f64, theta_minus: f64, d: &LinearData, spec: &LossSpec) -> Result<f64> {
    d.check_dims(w)?;
    let mut total = 0.0;
    for i in 0..d.n() {
        total += smoothed_phi(spec.kind, d.margin(i, w, theta_plus, theta_minus), spec.mu)?;
    }
    Ok(total / d.n() as f64)
}

/// Gradient of [`smoothed_loss`]: `(d/dw, d/dtheta_plus, d/dtheta_minus)`.
pub fn loss_gradient(
    w: &[f64],
    theta_plus: f64,
    theta_minus: f64,
    d: &LinearData,
    spec: &LossSpec,
) -> Result<(Vec<f64>, f64, f64)> {
    d.check_dims(w)?;
    let n = d.n() as f64;
    let mut gw = vec![0.0; d.p];
    let (mut g_plus, mut g_minus) = (0.0, 0.0);
    for i in 0..d.n() {
        let z = d.margin(i, w, theta_plus, theta_minus);
        let g = smoothed_phi_grad(spec.kind, z, spec.mu)? / n;
        if g == 0.0 {
            continue;
        }
        let gy = g * d.y[i];
        for (acc, x) in gw.iter_mut().zip(d.row(i)) {
            *acc += gy * x;
        }
        if d.bb_positive[i] {
            g_minus -= gy;
        } else {
            g_plus -= gy;
        }
    }
    Ok((gw, g_plus, g_minus))
}

/// `smoothed_loss + alpha1 |w|_1 + alpha2 (theta_plus - theta_minus)`.
#[allow(clippy::too_many_arguments)]
pub fn objective_at(
    w: &[f64],
    theta_plus: f64,
    theta_minus: f64,
    d: &LinearData,
    alpha1: f64,
    alpha2: f64,
    spec: &LossSpec,
) -> Result<f64> {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    Ok(smoothed_loss(w, theta_plus, theta_minus, d, spec)? + alpha1 * l1 + alpha2 * (theta_plus - theta_minus))
}

/// A trained hybrid linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridLinearModel {
    pub design: Design,
    pub w: Vec<f64>,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub loss: LossSpec,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Training objective of the returned iterate.
    pub objective: f64,
}

impl HybridLinearModel {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.w.len() != self.design.len() {
            return Err(Error::Format(format!(
                "{} coefficients for {} inputs",
                self.w.len(),
                self.design.len()
            )));
        }
        if self.w.iter().any(|v| !v.is_finite()) || !self.theta_plus.is_finite() || !self.theta_minus.is_finite() {
            return Err(Error::Format("non-finite parameter".into()));
        }
        if self.theta_plus < self.theta_minus {
            return Err(Error::Format("theta_plus is below theta_minus".into()));
        }
        Ok(())
    }

    /// Number of nonzero coefficients.
    pub fn complexity(&self) -> usize {
        self.w.iter().filter(|v| **v != 0.0).count()
    }

    pub fn score(&self, x: &Row<'_>) -> Result<f64> {
        Ok(dot(&self.w, &self.design.encode(x)?))
    }

    pub fn predict(&self, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
        Ok(route_score(self.score(x)?, self.theta_plus, self.theta_minus, yb))
    }
}

/// Two-threshold routing of a score.
pub fn route_score(score: f64, theta_plus: f64, theta_minus: f64, yb: Label) -> (Label, Route) {
    if score >= theta_plus {
        (Label::Positive, Route::Linear)
    } else if score <= theta_minus {
        (Label::Negative, Route::Linear)
    } else {
        (yb, Route::BlackBox)
    }
}

/// Routes `x` through `m`.
pub fn predict_linear(m: &HybridLinearModel, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
    m.predict(x, yb)
}

/// `F` of a trained model on a raw dataset, using the model's standardization.
pub fn objective(m: &HybridLinearModel, d: &Dataset, alpha1: f64, alpha2: f64, spec: &LossSpec) -> Result<f64> {
    let data = LinearData::from_dataset(&m.design, d)?;
    objective_at(&m.w, m.theta_plus, m.theta_minus, &data, alpha1, alpha2, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureColumn;
    use Label::*;

    fn data(x: &[f64], labels: &[Label], bb: &[Label]) -> LinearData {
        LinearData::new(x.to_vec(), 1, labels, bb).unwrap()
    }

    #[test]
    fn zero_model_smoothed_hinge_loss_is_half() {
        let d = data(
            &[0.3, -1.0, 2.0],
            &[Positive, Negative, Positive],
            &[Negative, Positive, Positive],
        );
        let spec = LossSpec::new(LossKind::SmoothedHinge, 0.0).unwrap();
        assert_eq!(smoothed_loss(&[0.0], 0.0, 0.0, &d, &spec).unwrap(), 0.5);
    }

    #[test]
    fn blackbox_positive_uses_theta_minus_only() {
        let d = data(&[1.0], &[Positive], &[Positive]);
        let spec = LossSpec::new(LossKind::Logistic, 0.0).unwrap();
        let a = smoothed_loss(&[0.5], 7.0, -0.25, &d, &spec).unwrap();
        let b = smoothed_loss(&[0.5], -3.0, -0.25, &d, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, loss_phi(LossKind::Logistic, 0.75));
        let (_, g_plus, g_minus) = loss_gradient(&[0.5], 7.0, -0.25, &d, &spec).unwrap();
        assert_eq!(g_plus, 0.0);
        assert!(g_minus > 0.0);
    }

    #[test]
    fn hand_summed_fixture() {
        // three instances: margins against the governing threshold
        let d = data(
            &[2.0, -1.0, 0.5],
            &[Positive, Negative, Negative],
            &[Positive, Negative, Positive],
        );
        let spec = LossSpec::new(LossKind::Hinge, 0.2).unwrap();
        let (w, tp, tm) = ([0.5], 0.4, -0.3);
        let z0 = 1.0 * (1.0 - tm);
        let z1 = -(-0.5 - tp);
        let z2 = -(0.25 - tm);
        let expected = (smoothed_phi(LossKind::Hinge, z0, 0.2).unwrap()
            + smoothed_phi(LossKind::Hinge, z1, 0.2).unwrap()
            + smoothed_phi(LossKind::Hinge, z2, 0.2).unwrap())
            / 3.0;
        let got = smoothed_loss(&w, tp, tm, &d, &spec).unwrap();
        assert!((got - expected).abs() < 1e-15);
        let f = objective_at(&w, tp, tm, &d, 0.1, 0.3, &spec).unwrap();
        assert!((f - (expected + 0.1 * 0.5 + 0.3 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn flat_region_has_zero_gradient() {
        let d = data(&[3.0, -3.0], &[Positive, Negative], &[Positive, Negative]);
        let spec = LossSpec::new(LossKind::Hinge, 0.1).unwrap();
        let (gw, gp, gm) = loss_gradient(&[1.0], 0.0, 0.0, &d, &spec).unwrap();
        assert_eq!((gw[0], gp, gm), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mirrored_instances_cancel() {
        let x = [1.0, -1.0, 0.4, -0.4];
        // each pair shares label and black-box call, so margins agree at w = 0
        let labels = [Positive, Positive, Negative, Negative];
        let bb = [Positive, Positive, Negative, Negative];
        let d = data(&x, &labels, &bb);
        for kind in [LossKind::Hinge, LossKind::SmoothedHinge, LossKind::Logistic] {
            let spec = LossSpec::new(kind, 0.2).unwrap();
            let (gw, _, _) = loss_gradient(&[0.0], 0.3, -0.3, &d, &spec).unwrap();
            assert!(gw[0].abs() < 1e-15, "{kind:?}: {}", gw[0]);
        }
    }

    #[test]
    fn routing() {
        assert_eq!(route_score(2.0, 1.0, 0.0, Negative), (Positive, Route::Linear));
        assert_eq!(route_score(0.5, 1.0, 0.0, Negative), (Negative, Route::BlackBox));
        assert_eq!(route_score(-0.1, 1.0, 0.0, Positive), (Negative, Route::Linear));
        for s in [-1.0, 0.2, 0.2000001, 3.0] {
            assert_eq!(route_score(s, 0.2, 0.2, Positive).1, Route::Linear);
        }
    }

    #[test]
    fn design_one_hot_and_standardize() {
        let table = FeatureTable::new(vec![
            FeatureColumn::numeric("age", vec![1.0, 3.0, 5.0, 7.0]),
            FeatureColumn::new("color", vec!["red".into(), "blue".into(), "red".into(), "red".into()]),
            FeatureColumn::numeric("const", vec![2.0; 4]),
        ])
        .unwrap();
        let design = Design::fit(&table).unwrap();
        assert_eq!(design.names(), ["age", "color==blue", "color==red", "const"]);
        let x = design.transform(&table).unwrap();
        let p = design.len();
        for j in 0..p {
            let col: Vec<f64> = (0..4).map(|i| x[i * p + j]).collect();
            assert!(col.iter().sum::<f64>().abs() < 1e-12);
        }
        assert_eq!(design.standardization[3].scale, 1.0);
        let age: Vec<f64> = (0..4).map(|i| x[i * p]).collect();
        let var = age.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_input_leaves_objective_unchanged() {
        let d1 = data(&[0.5, -1.5], &[Positive, Negative], &[Negative, Negative]);
        let d2 = LinearData::new(
            vec![0.5, 9.0, -1.5, -4.0],
            2,
            &[Positive, Negative],
            &[Negative, Negative],
        )
        .unwrap();
        let spec = LossSpec::default();
        let a = objective_at(&[0.7], 0.3, -0.2, &d1, 0.05, 0.1, &spec).unwrap();
        let b = objective_at(&[0.7, 0.0], 0.3, -0.2, &d2, 0.05, 0.1, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let d = data(&[0.5], &[Positive], &[Positive]);
        assert!(matches!(
            smoothed_loss(&[1.0, 2.0], 0.0, 0.0, &d, &LossSpec::default()),
            Err(Error::Schema(_))
        ));
    }
}
