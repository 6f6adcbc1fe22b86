//! Synthetic datasets with known structure, for checks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, FeatureColumn, FeatureTable, Label};
use crate::error::Result;

fn noisy_copy(rng: &mut ChaCha8Rng, labels: &[Label], flip: f64) -> Vec<Label> {
    labels
        .iter()
        .map(|&y| if rng.gen_bool(flip) { y.flip() } else { y })
        .collect()
}

/// Two Gaussian blobs centered at `+-separation` on every axis of `features`
/// numeric columns `x0, x1, ...`; the black-box flips each label with
/// probability `blackbox_noise`.
pub fn two_blobs(n: usize, features: usize, separation: f64, blackbox_noise: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..n).map(|_| Label::from_sign(rng.gen_bool(0.5))).collect();
    let mut columns = vec![Vec::with_capacity(n); features];
    for y in &labels {
        for col in columns.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            col.push(y.sign() * separation + noise);
        }
    }
    let blackbox = noisy_copy(&mut rng, &labels, blackbox_noise);
    let table = FeatureTable::new(
        columns
            .into_iter()
            .enumerate()
            .map(|(j, v)| FeatureColumn::numeric(format!("x{j}"), v))
            .collect(),
    )?;
    Dataset::new(table, labels, blackbox)
}

/// One numeric feature `x`; the label is the sign of `x` plus Gaussian noise
/// of scale `label_noise`, and the black-box flips labels with probability
/// `blackbox_noise`.
pub fn one_feature(n: usize, label_noise: f64, blackbox_noise: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        xs.push(x);
        labels.push(Label::from_sign(x + label_noise * e > 0.0));
    }
    let blackbox = noisy_copy(&mut rng, &labels, blackbox_noise);
    Dataset::new(
        FeatureTable::new(vec![FeatureColumn::numeric("x", xs)])?,
        labels,
        blackbox,
    )
}

/// A fraction `zone_a` of instances has `zone = A` and is always negative,
/// so the single rule `zone==A` classifies them perfectly. The rest has
/// `zone = B` and a label driven by `x1` with 10% label noise. Extra columns
/// `x2` (numeric) and `color` (categorical) carry no signal. The black-box
/// flips each true label with probability `blackbox_noise`.
pub fn zoned(n: usize, zone_a: f64, blackbox_noise: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = ["red", "green", "blue"];
    let (mut zone, mut x1, mut x2, mut color, mut labels) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let in_a = rng.gen_bool(zone_a);
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..1.0);
        let y = if in_a {
            Label::Negative
        } else {
            let clean = Label::from_sign(a > 0.5);
            if rng.gen_bool(0.1) {
                clean.flip()
            } else {
                clean
            }
        };
        zone.push(if in_a { "A" } else { "B" }.to_string());
        x1.push((a * 1000.0).round() / 1000.0);
        x2.push((b * 1000.0).round() / 1000.0);
        color.push(colors[rng.gen_range(0..colors.len())].to_string());
        labels.push(y);
    }
    let blackbox = noisy_copy(&mut rng, &labels, blackbox_noise);
    let table = FeatureTable::new(vec![
        FeatureColumn::new("zone", zone),
        FeatureColumn::numeric("x1", x1),
        FeatureColumn::numeric("x2", x2),
        FeatureColumn::new("color", color),
    ])?;
    Dataset::new(table, labels, blackbox)
}
