//! Rules, coverage and support, and candidate-rule mining.

use std::fmt;
use std::io::Write;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::binarize::{BinaryDataset, Condition};
use crate::data::{Dataset, Label, Row};
use crate::error::{Error, Result};
use crate::fpgrowth::frequent_itemsets;

/// Default cap on conditions per mined rule.
pub const DEFAULT_MAX_RULE_LEN: usize = 4;
/// Default cap on rules kept per side of the candidate pool.
pub const DEFAULT_MAX_POOL: usize = 5000;

/// A conjunction of one or more distinct conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Condition>", into = "Vec<Condition>")]
pub struct Rule {
    conditions: Vec<Condition>,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>) -> Result<Self> {
        if conditions.is_empty() {
            return Err(Error::invalid("a rule needs at least one condition"));
        }
        for (i, c) in conditions.iter().enumerate() {
            if conditions[..i].contains(c) {
                return Err(Error::invalid(format!("condition `{c}` repeated in rule")));
            }
        }
        Ok(Rule { conditions })
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    /// Number of conditions.
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn covers(&self, x: &Row<'_>) -> Result<bool> {
        for c in &self.conditions {
            if !c.evaluate(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl TryFrom<Vec<Condition>> for Rule {
    type Error = Error;

    fn try_from(conditions: Vec<Condition>) -> Result<Self> {
        Rule::new(conditions)
    }
}

impl From<Rule> for Vec<Condition> {
    fn from(rule: Rule) -> Self {
        rule.conditions
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// True iff every condition of `r` holds on `x`.
pub fn covers_rule(r: &Rule, x: &Row<'_>) -> Result<bool> {
    r.covers(x)
}

/// True iff some rule in `rules` covers `x`; false for an empty set.
pub fn covers_set(rules: &[Rule], x: &Row<'_>) -> Result<bool> {
    for r in rules {
        if r.covers(x)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Anything rule coverage can be computed over: raw tables or binary matrices.
pub trait RuleData {
    fn n(&self) -> usize;
    fn labels(&self) -> &[Label];
    fn blackbox(&self) -> &[Label];
    /// Rows covered by a single rule.
    fn coverage(&self, rule: &Rule) -> Result<FixedBitSet>;

    /// Rows covered by at least one rule.
    fn set_coverage(&self, rules: &[Rule]) -> Result<FixedBitSet> {
        let mut union = FixedBitSet::with_capacity(self.n());
        for r in rules {
            union.union_with(&self.coverage(r)?);
        }
        Ok(union)
    }
}

impl RuleData for Dataset {
    fn n(&self) -> usize {
        Dataset::n(self)
    }

    fn labels(&self) -> &[Label] {
        Dataset::labels(self)
    }

    fn blackbox(&self) -> &[Label] {
        Dataset::blackbox(self)
    }

    fn coverage(&self, rule: &Rule) -> Result<FixedBitSet> {
        let mut bits = FixedBitSet::with_capacity(self.n());
        bits.insert_range(..);
        for c in rule.conditions() {
            bits.intersect_with(&c.column_bits(self.table())?);
        }
        Ok(bits)
    }
}

impl RuleData for BinaryDataset {
    fn n(&self) -> usize {
        BinaryDataset::n(self)
    }

    fn labels(&self) -> &[Label] {
        BinaryDataset::labels(self)
    }

    fn blackbox(&self) -> &[Label] {
        BinaryDataset::blackbox(self)
    }

    fn coverage(&self, rule: &Rule) -> Result<FixedBitSet> {
        let mut bits = FixedBitSet::with_capacity(self.n());
        bits.insert_range(..);
        for c in rule.conditions() {
            let j = self
                .schema()
                .position(c)
                .ok_or_else(|| Error::Schema(format!("condition `{c}` is not part of the binarization")))?;
            bits.intersect_with(&self.columns()[j]);
        }
        Ok(bits)
    }
}

/// Number of instances covered by at least one rule of `rules`.
pub fn support<D: RuleData + ?Sized>(rules: &[Rule], d: &D) -> Result<usize> {
    Ok(d.set_coverage(rules)?.count_ones(..))
}

/// Fraction of covered instances whose true label is `cls`; 0 when nothing is covered.
pub fn precision<D: RuleData + ?Sized>(rule: &Rule, d: &D, cls: Label) -> Result<f64> {
    let cover = d.coverage(rule)?;
    let covered = cover.count_ones(..);
    if covered == 0 {
        return Ok(0.0);
    }
    let hits = cover.ones().filter(|&i| d.labels()[i] == cls).count();
    Ok(hits as f64 / covered as f64)
}

fn ceil_count(x: f64) -> usize {
    // absorb representation error such as 30 * 0.1 = 3.0000000000000004
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

/// Minimum support a positive and a negative rule need to possibly belong to
/// an optimal model: `ceil(n * alpha1)` and `ceil(n * alpha1 / (1 - alpha2))`.
pub fn min_support_bounds(n: usize, alpha1: f64, alpha2: f64) -> Result<(usize, usize)> {
    if !(alpha1 >= 0.0 && alpha1.is_finite()) {
        return Err(Error::invalid(format!("alpha1 = {alpha1} must be finite and >= 0")));
    }
    if !(0.0..1.0).contains(&alpha2) {
        return Err(Error::invalid(format!(
            "alpha2 = {alpha2} must lie in [0, 1) for rule pruning"
        )));
    }
    let pos = n as f64 * alpha1;
    let neg = pos / (1.0 - alpha2);
    Ok((ceil_count(pos), ceil_count(neg)))
}

/// A mined rule with its statistics on the mining data.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub rule: Rule,
    /// Condition indices into the binarization, ascending.
    pub items: Vec<usize>,
    /// Instances covered, any label.
    pub support: usize,
    /// Covered instances carrying the candidate's class.
    pub class_support: usize,
    pub precision: f64,
}

impl Candidate {
    /// Builds a candidate from condition indices of `d`. `items` must be
    /// nonempty, distinct and in range.
    pub fn from_items(items: Vec<usize>, d: &BinaryDataset, cls: Label) -> Result<Self> {
        let conditions = items
            .iter()
            .map(|&j| {
                d.condition_names()
                    .get(j)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("condition index {j} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rule = Rule::new(conditions)?;
        let cover = d.coverage(&rule)?;
        let support = cover.count_ones(..);
        let class_support = cover.ones().filter(|&i| d.labels()[i] == cls).count();
        let precision = if support == 0 {
            0.0
        } else {
            class_support as f64 / support as f64
        };
        Ok(Candidate {
            rule,
            items,
            support,
            class_support,
            precision,
        })
    }
}

/// Candidate rules for each side of a rule-set pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidatePool {
    pub positive: Vec<Candidate>,
    pub negative: Vec<Candidate>,
    pub min_support_pos: usize,
    pub min_support_neg: usize,
}

impl CandidatePool {
    pub fn side(&self, cls: Label) -> &[Candidate] {
        match cls {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        }
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human-readable listing, one rule per line. Not meant to be parsed back.
    pub fn dump(&self, mut out: impl Write) -> std::io::Result<()> {
        for (title, side) in [("positive", &self.positive), ("negative", &self.negative)] {
            writeln!(out, "# {title} rules ({})", side.len())?;
            for c in side {
                writeln!(out, "{}\tsupport={}\tprecision={:.4}", c.rule, c.support, c.precision)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningConfig {
    pub max_len: usize,
    /// Per side; the highest-precision rules are kept.
    pub max_pool: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            max_len: DEFAULT_MAX_RULE_LEN,
            max_pool: DEFAULT_MAX_POOL,
        }
    }
}

/// Mines candidates with the default pool cap. See [`mine_candidates_with`].
pub fn mine_candidates(d: &BinaryDataset, max_len: usize, alpha1: f64, alpha2: f64) -> Result<CandidatePool> {
    mine_candidates_with(
        d,
        &MiningConfig {
            max_len,
            ..MiningConfig::default()
        },
        alpha1,
        alpha2,
    )
}

/// A rule enters the positive pool when it covers at least one positive
/// instance and its support over all of `d` reaches the positive bound; the
/// negative pool mirrors this. Pools are ordered lexicographically by
/// condition indices.
pub fn mine_candidates_with(d: &BinaryDataset, cfg: &MiningConfig, alpha1: f64, alpha2: f64) -> Result<CandidatePool> {
    if cfg.max_len == 0 {
        return Err(Error::invalid("max rule length must be at least 1"));
    }
    let (min_pos, min_neg) = min_support_bounds(d.n(), alpha1, alpha2)?;
    let transactions: Vec<(Vec<usize>, [usize; 2])> = (0..d.n())
        .map(|i| {
            let counts = if d.labels()[i].is_positive() { [0, 1] } else { [1, 0] };
            (d.row_items(i), counts)
        })
        .collect();
    let itemsets = frequent_itemsets(&transactions, min_pos, cfg.max_len);

    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for set in itemsets {
        let total = set.total();
        for (class_count, bound, side) in [
            (set.counts[1], min_pos, &mut positive),
            (set.counts[0], min_neg, &mut negative),
        ] {
            if class_count >= 1 && total >= bound {
                let conditions = set.items.iter().map(|&j| d.condition_names()[j].clone()).collect();
                side.push(Candidate {
                    rule: Rule::new(conditions)?,
                    items: set.items.clone(),
                    support: total,
                    class_support: class_count,
                    precision: class_count as f64 / total as f64,
                });
            }
        }
    }
    cap_pool(&mut positive, cfg.max_pool);
    cap_pool(&mut negative, cfg.max_pool);
    Ok(CandidatePool {
        positive,
        negative,
        min_support_pos: min_pos,
        min_support_neg: min_neg,
    })
}

fn cap_pool(side: &mut Vec<Candidate>, cap: usize) {
    if side.len() <= cap {
        return;
    }
    side.sort_by(|a, b| b.precision.total_cmp(&a.precision).then_with(|| a.items.cmp(&b.items)));
    side.truncate(cap);
    side.sort_by(|a, b| a.items.cmp(&b.items));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::Operator;
    use crate::data::{FeatureColumn, FeatureTable};

    fn ab_table() -> Dataset {
        let table = FeatureTable::new(vec![
            FeatureColumn::new("a", vec!["1".into(), "1".into()]),
            FeatureColumn::new("b", vec!["0".into(), "1".into()]),
        ])
        .unwrap();
        Dataset::new(table, vec![Label::Positive; 2], vec![Label::Positive; 2]).unwrap()
    }

    fn a1_b0() -> Rule {
        Rule::new(vec![
            Condition::category("a", Operator::Eq, "1"),
            Condition::category("b", Operator::Eq, "0"),
        ])
        .unwrap()
    }

    #[test]
    fn rule_coverage_by_definition() {
        let d = ab_table();
        assert!(covers_rule(&a1_b0(), &d.row(0)).unwrap());
        assert!(!covers_rule(&a1_b0(), &d.row(1)).unwrap());
    }

    #[test]
    fn numeric_boundary_inclusive() {
        let table = FeatureTable::new(vec![FeatureColumn::new("age", vec!["41".into()])]).unwrap();
        let d = Dataset::new(table, vec![Label::Positive], vec![Label::Positive]).unwrap();
        let r = Rule::new(vec![Condition::threshold("age", Operator::Le, 41.0)]).unwrap();
        assert!(covers_rule(&r, &d.row(0)).unwrap());
    }

    #[test]
    fn unknown_feature_errors() {
        let d = ab_table();
        let r = Rule::new(vec![Condition::category("zz", Operator::Eq, "1")]).unwrap();
        assert!(matches!(covers_rule(&r, &d.row(0)), Err(Error::UnknownFeature(_))));
    }

    #[test]
    fn set_coverage_is_disjunction() {
        let d = ab_table();
        assert!(!covers_set(&[], &d.row(0)).unwrap());
        let r2 = Rule::new(vec![Condition::category("b", Operator::Eq, "1")]).unwrap();
        assert!(covers_set(&[a1_b0(), r2.clone()], &d.row(1)).unwrap());
        assert!(covers_set(&[r2], &d.row(1)).unwrap());
    }

    #[test]
    fn rules_reject_empty_and_repeats() {
        assert!(Rule::new(vec![]).is_err());
        let c = Condition::category("a", Operator::Eq, "1");
        assert!(Rule::new(vec![c.clone(), c]).is_err());
    }

    fn ten_rows() -> BinaryDataset {
        // column 0 covers rows {0,1,2}; column 1 covers rows {2,3}
        let mut c0 = FixedBitSet::with_capacity(10);
        c0.insert_range(0..3);
        let mut c1 = FixedBitSet::with_capacity(10);
        c1.insert_range(2..4);
        let labels = (0..10).map(|i| Label::from_sign(i < 2)).collect();
        BinaryDataset::from_bits(vec![c0, c1], labels, vec![Label::Negative; 10]).unwrap()
    }

    fn single(d: &BinaryDataset, j: usize) -> Rule {
        Rule::new(vec![d.condition_names()[j].clone()]).unwrap()
    }

    #[test]
    fn support_counts_union() {
        let d = ten_rows();
        assert_eq!(support(&[], &d).unwrap(), 0);
        assert_eq!(support(&[single(&d, 0)], &d).unwrap(), 3);
        assert_eq!(support(&[single(&d, 0), single(&d, 1)], &d).unwrap(), 4);
        // raw-table route agrees
        let raw = d.to_dataset().unwrap();
        assert_eq!(support(&[single(&d, 0), single(&d, 1)], &raw).unwrap(), 4);
    }

    #[test]
    fn precision_ratio_and_empty_convention() {
        let d = ten_rows();
        let r0 = single(&d, 0);
        assert!((precision(&r0, &d, Label::Positive).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let both = Rule::new(vec![d.condition_names()[0].clone(), d.condition_names()[1].clone()]).unwrap();
        assert_eq!(precision(&both, &d, Label::Negative).unwrap(), 1.0);
        let mut none = FixedBitSet::with_capacity(10);
        none.clear();
        let empty = BinaryDataset::from_bits(vec![none], vec![Label::Positive; 10], vec![Label::Positive; 10]).unwrap();
        assert_eq!(precision(&single(&empty, 0), &empty, Label::Positive).unwrap(), 0.0);
    }

    #[test]
    fn precision_seven_of_ten() {
        let mut all = FixedBitSet::with_capacity(10);
        all.insert_range(..);
        let labels = (0..10).map(|i| Label::from_sign(i < 7)).collect();
        let d = BinaryDataset::from_bits(vec![all], labels, vec![Label::Positive; 10]).unwrap();
        assert!((precision(&single(&d, 0), &d, Label::Positive).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn support_bounds() {
        assert_eq!(min_support_bounds(1000, 0.005, 0.5).unwrap(), (5, 10));
        assert_eq!(min_support_bounds(1000, 0.0, 0.3).unwrap(), (0, 0));
        assert_eq!(min_support_bounds(100, 0.033, 0.1).unwrap(), (4, 4));
        assert_eq!(min_support_bounds(30, 0.1, 0.0).unwrap(), (3, 3));
        assert!(min_support_bounds(100, 0.01, 1.0).is_err());
        assert!(min_support_bounds(100, -0.01, 0.1).is_err());
    }

    #[test]
    fn length_cap_restricts_to_singletons() {
        let d = ten_rows();
        let pool = mine_candidates(&d, 1, 0.0, 0.0).unwrap();
        for c in pool.positive.iter().chain(&pool.negative) {
            assert_eq!(c.items.len(), 1);
        }
        assert_eq!(pool.positive.len(), 1); // only column 0 touches positive rows
        assert_eq!(pool.negative.len(), 2);
    }

    #[test]
    fn bound_beyond_n_empties_pools() {
        let d = ten_rows();
        let pool = mine_candidates(&d, 2, 1.5, 0.0).unwrap();
        assert!(pool.positive.is_empty() && pool.negative.is_empty());
        assert_eq!(pool.min_support_pos, 15);
    }

    #[test]
    fn pool_cap_keeps_precise_rules_in_index_order() {
        let d = ten_rows();
        let cfg = MiningConfig {
            max_len: 2,
            max_pool: 1,
        };
        let pool = mine_candidates_with(&d, &cfg, 0.0, 0.0).unwrap();
        assert_eq!(pool.negative.len(), 1);
        // {0,1} covers only row 2 (negative): precision 1
        assert_eq!(pool.negative[0].items, vec![0, 1]);
    }

    #[test]
    fn rule_serde_round_trip() {
        let r = a1_b0();
        let json = serde_json::to_string(&r).unwrap();
        let back: Rule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<Rule>("[]").is_err());
    }
}
