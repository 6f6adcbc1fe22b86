//! Slow, simple reference implementations used to check the fast paths.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binarize::BinaryDataset;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::linear::{objective_at, smoothed_phi, Design, HybridLinearModel, LinearData, LossSpec};
use crate::route::Route;
use crate::rules::{mine_candidates_with, Candidate, CandidatePool, MiningConfig, RuleData};
use crate::ruleset::{compose_objective, predict_pair, RuleSetPair, Selection};

/// Largest number of subset pairs [`brute_force_ruleset`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Row-by-row error and transparency of a rule-set pair.
pub fn simulate_rules(pair: &RuleSetPair, d: &Dataset) -> Result<(f64, f64)> {
    simulate(d, |i| predict_pair(pair, &d.row(i), d.blackbox()[i]))
}

/// Row-by-row error and transparency of a linear model.
pub fn simulate_linear(m: &HybridLinearModel, d: &Dataset) -> Result<(f64, f64)> {
    simulate(d, |i| m.predict(&d.row(i), d.blackbox()[i]))
}

fn simulate(d: &Dataset, predict: impl Fn(usize) -> Result<(Label, Route)>) -> Result<(f64, f64)> {
    let (mut wrong, mut routed) = (0usize, 0usize);
    for i in 0..d.n() {
        let (label, route) = predict(i)?;
        wrong += (label != d.labels()[i]) as usize;
        routed += route.is_interpretable() as usize;
    }
    let n = d.n() as f64;
    Ok((wrong as f64 / n, routed as f64 / n))
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Exact minimizer found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptimum {
    pub selection: Selection,
    pub pair: RuleSetPair,
    pub objective: f64,
}

fn binomial_prefix(m: usize, cap: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=cap.min(m) {
        if k > 0 {
            c = c * (m - k + 1) as u128 / k as u128;
        }
        total = total.saturating_add(c);
    }
    total
}

/// All subsets of `0..m` with at most `cap` elements, in lexicographic order
/// of their sorted index lists (the empty set first).
fn subsets(m: usize, cap: usize) -> Vec<Vec<usize>> {
    fn walk(m: usize, cap: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() == cap {
            return;
        }
        for i in start..m {
            cur.push(i);
            walk(m, cap, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    walk(m, cap, 0, &mut Vec::new(), &mut out);
    out
}

struct SideTable {
    subsets: Vec<Vec<usize>>,
    covers: Vec<Vec<bool>>,
    conditions: Vec<usize>,
}

fn side_table(side: &[Candidate], d: &BinaryDataset, cap: usize) -> Result<SideTable> {
    let rule_cover: Vec<FixedBitSet> = side.iter().map(|c| d.coverage(&c.rule)).collect::<Result<_>>()?;
    let subsets = subsets(side.len(), cap);
    let covers = subsets
        .iter()
        .map(|s| {
            (0..d.n())
                .map(|i| s.iter().any(|&r| rule_cover[r].contains(i)))
                .collect()
        })
        .collect();
    let conditions = subsets
        .iter()
        .map(|s| s.iter().map(|&r| side[r].rule.len()).sum())
        .collect();
    Ok(SideTable {
        subsets,
        covers,
        conditions,
    })
}

/// Global minimizer of the rule-set objective over all pairs of subsets of
/// the pool with at most `max_rules_per_side` rules per side. Ties go to the
/// first pair in (positive subset, negative subset) lexicographic order.
pub fn brute_force_ruleset(
    pool: &CandidatePool,
    d: &BinaryDataset,
    alpha1: f64,
    alpha2: f64,
    max_rules_per_side: Option<usize>,
) -> Result<BruteForceOptimum> {
    let cap_pos = max_rules_per_side.unwrap_or(pool.positive.len());
    let cap_neg = max_rules_per_side.unwrap_or(pool.negative.len());
    let space =
        binomial_prefix(pool.positive.len(), cap_pos).saturating_mul(binomial_prefix(pool.negative.len(), cap_neg));
    if space > BRUTE_FORCE_LIMIT {
        return Err(Error::SpaceTooLarge(space));
    }
    let pos = side_table(&pool.positive, d, cap_pos)?;
    let neg = side_table(&pool.negative, d, cap_neg)?;
    let n = d.n();
    let mut best: Option<(usize, usize, f64)> = None;
    for (a, pos_cover) in pos.covers.iter().enumerate() {
        for (b, neg_cover) in neg.covers.iter().enumerate() {
            let (mut wrong, mut covered) = (0usize, 0usize);
            for i in 0..n {
                let y = d.labels()[i];
                let predicted = if pos_cover[i] {
                    Label::Positive
                } else if neg_cover[i] {
                    Label::Negative
                } else {
                    d.blackbox()[i]
                };
                wrong += (predicted != y) as usize;
                covered += (pos_cover[i] || neg_cover[i]) as usize;
            }
            let obj = compose_objective(wrong, pos.conditions[a] + neg.conditions[b], covered, n, alpha1, alpha2);
            if best.is_none_or(|(_, _, v)| obj < v) {
                best = Some((a, b, obj));
            }
        }
    }
    let (a, b, objective) = best.expect("the empty pair is always enumerated");
    let selection = Selection {
        positive: pos.subsets[a].clone(),
        negative: neg.subsets[b].clone(),
    };
    let pair = RuleSetPair {
        positive: selection
            .positive
            .iter()
            .map(|&i| pool.positive[i].rule.clone())
            .collect(),
        negative: selection
            .negative
            .iter()
            .map(|&i| pool.negative[i].rule.clone())
            .collect(),
    };
    Ok(BruteForceOptimum {
        selection,
        pair,
        objective,
    })
}

/// Every rule of length `1..=max_len` covering at least one instance, on both
/// sides, with no support pruning.
pub fn rule_universe(d: &BinaryDataset, max_len: usize) -> Result<CandidatePool> {
    let k = d.schema().len();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for items in subsets(k, max_len).into_iter().filter(|s| !s.is_empty()) {
        let pos = Candidate::from_items(items.clone(), d, Label::Positive)?;
        if pos.support == 0 {
            continue;
        }
        positive.push(pos);
        negative.push(Candidate::from_items(items, d, Label::Negative)?);
    }
    Ok(CandidatePool {
        positive,
        negative,
        min_support_pos: 0,
        min_support_neg: 0,
    })
}

/// Dense-grid minimum of the linear objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub w: Vec<f64>,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub objective: f64,
}

fn linspace(extent: f64, resolution: usize) -> Vec<f64> {
    let step = 2.0 * extent / (resolution - 1) as f64;
    (0..resolution).map(|i| -extent + step * i as f64).collect()
}

/// Minimizes the linear objective over a grid of `resolution` evenly spaced
/// values in `[-extent, extent]` for each coefficient and threshold, with
/// `theta_plus >= theta_minus`. Uses the same standardization as training.
/// Grids nest when `resolution - 1` divides the finer grid's `resolution - 1`.
pub fn grid_minimize_linear(
    d: &Dataset,
    alpha1: f64,
    alpha2: f64,
    spec: &LossSpec,
    resolution: usize,
    extent: f64,
) -> Result<GridOptimum> {
    let design = Design::fit(d.table())?;
    if design.len() > 2 {
        return Err(Error::invalid("grid search supports at most 2 model inputs"));
    }
    if resolution < 2 || !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid("grid needs resolution >= 2 and a positive extent"));
    }
    let data = LinearData::from_dataset(&design, d)?;
    let grid = linspace(extent, resolution);
    let n = data.n() as f64;
    let p = design.len();

    let mut w_points: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..p {
        w_points = w_points
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }

    let mut best: Option<(Vec<f64>, f64, f64, f64)> = None;
    for w in &w_points {
        let scores: Vec<f64> = (0..data.n())
            .map(|i| w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum())
            .collect();
        // terms depending on theta_minus only, and on theta_plus only
        let mut lower = Vec::with_capacity(resolution);
        let mut upper = Vec::with_capacity(resolution);
        for &theta in &grid {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, score) in scores.iter().enumerate() {
                let z = data.label(i) * (score - theta);
                let v = smoothed_phi(spec.kind, z, spec.mu)?;
                if data.blackbox_positive(i) {
                    a += v;
                } else {
                    b += v;
                }
            }
            lower.push(a / n - alpha2 * theta);
            upper.push(b / n + alpha2 * theta);
        }
        // best theta_plus index at or above each theta_minus index
        let mut suffix = vec![resolution - 1; resolution];
        for k in (0..resolution - 1).rev() {
            let next = suffix[k + 1];
            suffix[k] = if upper[k] <= upper[next] { k } else { next };
        }
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        for j in 0..resolution {
            let k = suffix[j];
            let value = lower[j] + upper[k] + alpha1 * l1;
            if best.as_ref().is_none_or(|b| value < b.3) {
                best = Some((w.clone(), grid[k], grid[j], value));
            }
        }
    }
    let (w, theta_plus, theta_minus, _) = best.expect("grid is nonempty");
    let objective = objective_at(&w, theta_plus, theta_minus, &data, alpha1, alpha2, spec)?;
    Ok(GridOptimum {
        w,
        theta_plus,
        theta_minus,
        objective,
    })
}

/// Generator for small random rule-set problems that brute force can solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstanceSpec {
    pub min_n: usize,
    pub max_n: usize,
    pub features: usize,
    pub max_rule_len: usize,
    /// Per side.
    pub max_pool: usize,
    pub alpha1: (f64, f64),
    pub alpha2: (f64, f64),
    /// Probability the simulated black-box disagrees with the label.
    pub blackbox_noise: f64,
    pub seed: u64,
}

impl Default for TinyInstanceSpec {
    fn default() -> Self {
        TinyInstanceSpec {
            min_n: 20,
            max_n: 40,
            features: 5,
            max_rule_len: 2,
            max_pool: 6,
            alpha1: (0.01, 0.06),
            alpha2: (0.01, 0.5),
            blackbox_noise: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub data: BinaryDataset,
    pub pool: CandidatePool,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl TinyInstanceSpec {
    /// Random binary data with labels from a noisy linear threshold of the
    /// bits, a noisy copy of the labels as black-box, and a mined pool.
    pub fn generate(&self) -> Result<TinyInstance> {
        if self.min_n == 0 || self.min_n > self.max_n || self.features == 0 {
            return Err(Error::invalid(
                "tiny instance needs 1 <= min_n <= max_n and features >= 1",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = rng.gen_range(self.min_n..=self.max_n);
        let mut columns = vec![FixedBitSet::with_capacity(n); self.features];
        for col in &mut columns {
            for i in 0..n {
                col.set(i, rng.gen_bool(0.5));
            }
        }
        let weights: Vec<f64> = (0..self.features).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let offset = weights.iter().sum::<f64>() / 2.0;
        let mut labels = Vec::with_capacity(n);
        let mut blackbox = Vec::with_capacity(n);
        for i in 0..n {
            let score: f64 = (0..self.features)
                .filter(|&j| columns[j].contains(i))
                .map(|j| weights[j])
                .sum::<f64>()
                - offset
                + rng.gen_range(-0.3..0.3);
            let y = Label::from_sign(score > 0.0);
            labels.push(y);
            blackbox.push(if rng.gen_bool(self.blackbox_noise) { y.flip() } else { y });
        }
        let alpha1 = rng.gen_range(self.alpha1.0..=self.alpha1.1);
        let alpha2 = rng.gen_range(self.alpha2.0..=self.alpha2.1);
        let data = BinaryDataset::from_bits(columns, labels, blackbox)?;
        let pool = mine_candidates_with(
            &data,
            &MiningConfig {
                max_len: self.max_rule_len,
                max_pool: self.max_pool,
            },
            alpha1,
            alpha2,
        )?;
        Ok(TinyInstance {
            data,
            pool,
            alpha1,
            alpha2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruleset::{misclassification_error, objective};

    #[test]
    fn subsets_are_lexicographic() {
        let s = subsets(3, 2);
        let expected: Vec<Vec<usize>> = vec![vec![], vec![0], vec![0, 1], vec![0, 2], vec![1], vec![1, 2], vec![2]];
        assert_eq!(s, expected);
        assert_eq!(binomial_prefix(3, 2), 7);
        assert_eq!(binomial_prefix(12, 12), 4096);
    }

    #[test]
    fn finite_diff_basics() {
        let g = finite_diff(|x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(), &[1.0, -2.0, 0.5], 1e-4);
        for (a, b) in g.iter().zip([1.0, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(finite_diff(|_| 3.0, &[1.0, 2.0], 1e-3), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_pool_gives_blackbox_error() {
        let inst = TinyInstanceSpec {
            seed: 3,
            ..TinyInstanceSpec::default()
        }
        .generate()
        .unwrap();
        let opt = brute_force_ruleset(&CandidatePool::default(), &inst.data, 0.02, 0.1, None).unwrap();
        assert!(opt.pair.is_empty());
        let (bb_error, _) = simulate_rules(&RuleSetPair::empty(), &inst.data.to_dataset().unwrap()).unwrap();
        assert_eq!(opt.objective, bb_error);
    }

    #[test]
    fn heavy_penalty_makes_empty_optimal() {
        let inst = TinyInstanceSpec {
            seed: 4,
            ..TinyInstanceSpec::default()
        }
        .generate()
        .unwrap();
        let universe = rule_universe(&inst.data, 1).unwrap();
        let opt = brute_force_ruleset(&universe, &inst.data, 1.2, 0.1, Some(2)).unwrap();
        assert!(opt.pair.is_empty());
    }

    #[test]
    fn brute_force_objective_matches_closed_form() {
        for seed in 0..5 {
            let inst = TinyInstanceSpec {
                seed,
                ..TinyInstanceSpec::default()
            }
            .generate()
            .unwrap();
            let opt = brute_force_ruleset(&inst.pool, &inst.data, inst.alpha1, inst.alpha2, None).unwrap();
            let closed = objective(&opt.pair, &inst.data, inst.alpha1, inst.alpha2).unwrap();
            assert_eq!(opt.objective, closed);
        }
    }

    #[test]
    fn perfect_rule_enters_the_optimum() {
        use Label::*;
        let n = 10;
        let mut col = FixedBitSet::with_capacity(n);
        col.insert_range(0..4);
        let labels: Vec<Label> = (0..n).map(|i| Label::from_sign(i < 4)).collect();
        // black-box wrong on every positive
        let bb = vec![Negative; n];
        let d = BinaryDataset::from_bits(vec![col], labels, bb).unwrap();
        let pool = CandidatePool {
            positive: vec![Candidate::from_items(vec![0], &d, Positive).unwrap()],
            ..CandidatePool::default()
        };
        // gain 0.4 error + 0.05 * 0.4 transparency against cost alpha1
        let opt = brute_force_ruleset(&pool, &d, 0.3, 0.05, None).unwrap();
        assert_eq!(opt.selection.positive, vec![0]);
        let opt = brute_force_ruleset(&pool, &d, 0.5, 0.05, None).unwrap();
        assert!(opt.pair.is_empty());
    }

    #[test]
    fn simulation_agrees_with_closed_form() {
        let inst = TinyInstanceSpec {
            seed: 11,
            ..TinyInstanceSpec::default()
        }
        .generate()
        .unwrap();
        let raw = inst.data.to_dataset().unwrap();
        let pair = RuleSetPair {
            positive: inst.pool.positive.iter().take(2).map(|c| c.rule.clone()).collect(),
            negative: inst.pool.negative.iter().take(2).map(|c| c.rule.clone()).collect(),
        };
        let (err, _) = simulate_rules(&pair, &raw).unwrap();
        assert_eq!(err, misclassification_error(&pair, &inst.data).unwrap());
        let (err, t) = simulate_rules(&RuleSetPair::empty(), &raw).unwrap();
        assert!((err - (1.0 - raw.blackbox_accuracy())).abs() < 1e-12);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn space_limit() {
        let inst = TinyInstanceSpec {
            seed: 1,
            features: 6,
            ..TinyInstanceSpec::default()
        }
        .generate()
        .unwrap();
        let universe = rule_universe(&inst.data, 3).unwrap();
        assert!(matches!(
            brute_force_ruleset(&universe, &inst.data, 0.01, 0.1, None),
            Err(Error::SpaceTooLarge(_))
        ));
    }

    #[test]
    fn grid_nesting_and_l1_dominance() {
        use crate::data::{FeatureColumn, FeatureTable};
        use crate::linear::LossKind;
        use Label::*;
        let xs = vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let labels: Vec<Label> = xs.iter().map(|&x| Label::from_sign(x > 0.0)).collect();
        let bb = vec![Positive, Negative, Positive, Negative, Positive, Positive];
        let d = Dataset::new(
            FeatureTable::new(vec![FeatureColumn::numeric("x", xs)]).unwrap(),
            labels,
            bb,
        )
        .unwrap();
        let spec = LossSpec::new(LossKind::Logistic, 0.0).unwrap();
        let coarse = grid_minimize_linear(&d, 0.01, 0.1, &spec, 9, 2.0).unwrap();
        let fine = grid_minimize_linear(&d, 0.01, 0.1, &spec, 33, 2.0).unwrap();
        assert!(fine.objective <= coarse.objective);
        assert!(fine.theta_plus >= fine.theta_minus);
        let heavy = grid_minimize_linear(&d, 50.0, 0.1, &spec, 17, 2.0).unwrap();
        assert_eq!(heavy.w, vec![0.0]);
    }
}
