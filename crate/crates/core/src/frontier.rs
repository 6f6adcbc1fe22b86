//! Transparency/accuracy frontiers: hyperparameter sweeps, Pareto
//! extraction and CSV export.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::binarize::{binarize, BinaryDataset, DEFAULT_QUANTILES};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linear::{apg_train, ApgConfig, LossSpec};
use crate::model_io::{Model, ModelKind};
use crate::route::Route;
use crate::rules::{mine_candidates_with, MiningConfig};
use crate::ruleset::{train, SearchConfig};

pub const CSV_HEADER: [&str; 7] = [
    "transparency",
    "accuracy",
    "complexity",
    "alpha1",
    "alpha2",
    "kind",
    "model_path",
];

/// One evaluated model. A failed sweep cell has NaN metrics and `failure` set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub transparency: f64,
    pub accuracy: f64,
    pub complexity: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kind: ModelKind,
    pub model_path: Option<String>,
    /// Accuracy on instances the substitute answered; `None` if it answered none.
    pub interpretable_accuracy: Option<f64>,
    /// Accuracy on instances deferred to the black-box; `None` if none were.
    pub blackbox_accuracy: Option<f64>,
    pub failure: Option<String>,
}

impl FrontierPoint {
    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }

    fn failed(kind: ModelKind, alpha1: f64, alpha2: f64, message: String) -> Self {
        FrontierPoint {
            transparency: f64::NAN,
            accuracy: f64::NAN,
            complexity: 0,
            alpha1,
            alpha2,
            kind,
            model_path: None,
            interpretable_accuracy: None,
            blackbox_accuracy: None,
            failure: Some(message),
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Routes every row of `test` through `model` and reports end-to-end metrics.
pub fn evaluate(model: &Model, test: &Dataset) -> Result<FrontierPoint> {
    let (mut routed, mut correct, mut routed_correct) = (0usize, 0usize, 0usize);
    for i in 0..test.n() {
        let (label, route) = model.predict(&test.row(i), test.blackbox()[i])?;
        let hit = label == test.labels()[i];
        correct += hit as usize;
        if route != Route::BlackBox {
            routed += 1;
            routed_correct += hit as usize;
        }
    }
    let n = test.n();
    let (alpha1, alpha2) = model.alphas();
    Ok(FrontierPoint {
        transparency: routed as f64 / n as f64,
        accuracy: correct as f64 / n as f64,
        complexity: model.complexity(),
        alpha1,
        alpha2,
        kind: model.kind(),
        model_path: None,
        interpretable_accuracy: ratio(routed_correct, routed),
        blackbox_accuracy: ratio(correct - routed_correct, n - routed),
        failure: None,
    })
}

/// The black-box-only endpoint: transparency 0, complexity 0.
pub fn blackbox_endpoint(test: &Dataset, kind: ModelKind) -> FrontierPoint {
    FrontierPoint {
        transparency: 0.0,
        accuracy: test.blackbox_accuracy(),
        complexity: 0,
        alpha1: 0.0,
        alpha2: 0.0,
        kind,
        model_path: None,
        interpretable_accuracy: None,
        blackbox_accuracy: Some(test.blackbox_accuracy()),
        failure: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSettings {
    pub quantiles: Vec<f64>,
    pub mining: MiningConfig,
    pub search: SearchConfig,
}

impl Default for RuleSettings {
    fn default() -> Self {
        RuleSettings {
            quantiles: DEFAULT_QUANTILES.to_vec(),
            mining: MiningConfig::default(),
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearSettings {
    pub loss: LossSpec,
    pub apg: ApgConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub rules: RuleSettings,
    pub linear: LinearSettings,
}

impl SweepGrid {
    pub fn new(alpha1: Vec<f64>, alpha2: Vec<f64>) -> Self {
        SweepGrid {
            alpha1,
            alpha2,
            rules: RuleSettings::default(),
            linear: LinearSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha1.is_empty() || self.alpha2.is_empty() {
            return Err(Error::invalid("sweep grids must be nonempty"));
        }
        for v in self.alpha1.iter().chain(&self.alpha2) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::invalid(format!("grid value {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Cells ordered by `(alpha2, alpha1)`.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut a1 = self.alpha1.clone();
        let mut a2 = self.alpha2.clone();
        a1.sort_by(f64::total_cmp);
        a2.sort_by(f64::total_cmp);
        a2.iter().flat_map(|&b| a1.iter().map(move |&a| (a, b))).collect()
    }
}

/// A sweep cell: its point plus the trained model, when training succeeded.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub point: FrontierPoint,
    pub model: Option<Model>,
}

/// Runs `f` on a dedicated pool of `jobs` threads (at least one).
pub fn with_threads<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

enum Prepared {
    Rules(BinaryDataset),
    Linear,
}

fn train_cell(
    prepared: &Prepared,
    train_set: &Dataset,
    grid: &SweepGrid,
    seed: u64,
    alpha1: f64,
    alpha2: f64,
) -> Result<Model> {
    match prepared {
        Prepared::Rules(binary) => {
            let pool = mine_candidates_with(binary, &grid.rules.mining, alpha1, alpha2)?;
            let cfg = SearchConfig {
                seed,
                ..grid.rules.search
            };
            Ok(Model::Rules(train(binary, &pool, alpha1, alpha2, &cfg)?))
        }
        Prepared::Linear => Ok(Model::Linear(apg_train(
            train_set,
            alpha1,
            alpha2,
            &grid.linear.loss,
            &grid.linear.apg,
        )?)),
    }
}

/// Trains and evaluates one model per grid cell on `jobs` threads. The
/// black-box endpoint comes first, then cells in `(alpha2, alpha1)` order;
/// the output does not depend on `jobs`. A failing cell yields a failure
/// point and the sweep continues.
pub fn sweep_models(
    train_set: &Dataset,
    test: &Dataset,
    grid: &SweepGrid,
    kind: ModelKind,
    seed: u64,
    jobs: usize,
) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let prepared = match kind {
        ModelKind::Rules => Prepared::Rules(binarize(train_set, &grid.rules.quantiles)?),
        ModelKind::Linear => Prepared::Linear,
    };
    let cells = grid.cells();
    let trained: Vec<SweepCell> = with_threads(jobs, || {
        cells
            .par_iter()
            .map(|&(a1, a2)| {
                let outcome = train_cell(&prepared, train_set, grid, seed, a1, a2)
                    .and_then(|m| evaluate(&m, test).map(|p| (p, m)));
                match outcome {
                    Ok((point, model)) => SweepCell {
                        point,
                        model: Some(model),
                    },
                    Err(e) => SweepCell {
                        point: FrontierPoint::failed(kind, a1, a2, e.to_string()),
                        model: None,
                    },
                }
            })
            .collect()
    })?;
    let mut out = Vec::with_capacity(trained.len() + 1);
    out.push(SweepCell {
        point: blackbox_endpoint(test, kind),
        model: None,
    });
    out.extend(trained);
    Ok(out)
}

/// [`sweep_models`] without the models.
pub fn sweep(
    train_set: &Dataset,
    test: &Dataset,
    grid: &SweepGrid,
    kind: ModelKind,
    seed: u64,
    jobs: usize,
) -> Result<Vec<FrontierPoint>> {
    Ok(sweep_models(train_set, test, grid, kind, seed, jobs)?
        .into_iter()
        .map(|c| c.point)
        .collect())
}

fn dominates(q: &FrontierPoint, p: &FrontierPoint) -> bool {
    q.transparency >= p.transparency
        && q.accuracy >= p.accuracy
        && (q.transparency > p.transparency || q.accuracy > p.accuracy)
}

/// Points not dominated in (transparency, accuracy). Among points with equal
/// metrics only the lowest complexity survives (the first on a full tie).
/// Failed points are dropped. Sorted by transparency, then accuracy.
pub fn pareto(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let valid: Vec<&FrontierPoint> = points
        .iter()
        .filter(|p| !p.is_failure() && p.transparency.is_finite() && p.accuracy.is_finite())
        .collect();
    let mut out: Vec<FrontierPoint> = Vec::new();
    for (i, p) in valid.iter().enumerate() {
        let beaten = valid.iter().enumerate().any(|(j, q)| {
            dominates(q, p)
                || (q.transparency == p.transparency
                    && q.accuracy == p.accuracy
                    && (q.complexity < p.complexity || (q.complexity == p.complexity && j < i)))
        });
        if !beaten {
            out.push((*p).clone());
        }
    }
    out.sort_by(|a, b| {
        a.transparency
            .total_cmp(&b.transparency)
            .then(a.accuracy.total_cmp(&b.accuracy))
    });
    out
}

/// Writes the frontier CSV: fixed header, reals with six decimals.
pub fn export_frontier(points: &[FrontierPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            format!("{:.6}", p.transparency),
            format!("{:.6}", p.accuracy),
            p.complexity.to_string(),
            format!("{:.6}", p.alpha1),
            format!("{:.6}", p.alpha2),
            p.kind.to_string(),
            p.model_path.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn export_frontier_file(points: &[FrontierPoint], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    export_frontier(points, std::io::BufWriter::new(file))
}

/// Reads a frontier CSV written by [`export_frontier`]. NaN metrics mark a
/// failed cell.
pub fn parse_frontier(input: impl Read) -> Result<Vec<FrontierPoint>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!(
            "frontier header must be `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let real = |k: usize| -> Result<f64> {
            let cell = rec.get(k).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| Error::Cell {
                row,
                column: CSV_HEADER[k].to_string(),
                message: format!("expected a number, found `{cell}`"),
            })
        };
        let transparency = real(0)?;
        let accuracy = real(1)?;
        let complexity_cell = rec.get(2).unwrap_or("").trim();
        let complexity = complexity_cell.parse::<usize>().map_err(|_| Error::Cell {
            row,
            column: "complexity".into(),
            message: format!("expected a count, found `{complexity_cell}`"),
        })?;
        let kind = rec.get(5).unwrap_or("").trim().parse::<ModelKind>()?;
        let path = rec.get(6).unwrap_or("").to_string();
        let failed = transparency.is_nan() || accuracy.is_nan();
        points.push(FrontierPoint {
            transparency,
            accuracy,
            complexity,
            alpha1: real(3)?,
            alpha2: real(4)?,
            kind,
            model_path: (!path.is_empty()).then_some(path),
            interpretable_accuracy: None,
            blackbox_accuracy: None,
            failure: failed.then(|| "failed cell".to_string()),
        });
    }
    Ok(points)
}
