//! Hybrid rule sets.
//!
//! A positive rule set `R+` and a negative rule set `R-` sit in front of the
//! black-box: an instance covered by `R+` is labeled positive, otherwise one
//! covered by `R-` is labeled negative, and anything left falls through to
//! the black-box prediction. Training minimizes
//!
//! ```text
//! error(R) + alpha1 * conditions(R) - alpha2 * transparency(R)
//! ```
//!
//! by stochastic local search over a mined [`CandidatePool`], starting from
//! the empty pair and returning the best pair ever visited.

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binarize::{BinaryDataset, BinarySchema};
use crate::data::{Label, Row};
use crate::error::{Error, Result};
use crate::route::Route;
use crate::rules::{covers_set, CandidatePool, Rule, RuleData};

/// Positive and negative rule sets; `positive` takes precedence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSetPair {
    pub positive: Vec<Rule>,
    pub negative: Vec<Rule>,
}

impl RuleSetPair {
    pub fn new(positive: Vec<Rule>, negative: Vec<Rule>) -> Result<Self> {
        for (name, side) in [("positive", &positive), ("negative", &negative)] {
            for (i, r) in side.iter().enumerate() {
                if side[..i].contains(r) {
                    return Err(Error::invalid(format!("rule `{r}` repeated in {name} set")));
                }
            }
        }
        Ok(RuleSetPair { positive, negative })
    }

    pub fn empty() -> Self {
        RuleSetPair::default()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn rule_count(&self) -> usize {
        self.positive.len() + self.negative.len()
    }
}

/// Routes one instance through a rule-set pair.
pub fn predict_pair(pair: &RuleSetPair, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
    if covers_set(&pair.positive, x)? {
        Ok((Label::Positive, Route::PositiveRules))
    } else if covers_set(&pair.negative, x)? {
        Ok((Label::Negative, Route::NegativeRules))
    } else {
        Ok((yb, Route::BlackBox))
    }
}

/// Total number of conditions over both sides.
pub fn complexity(p: &RuleSetPair) -> usize {
    p.positive.iter().chain(&p.negative).map(Rule::len).sum()
}

fn indicator(b: bool) -> i64 {
    b as i64
}

/// Misclassification count as the three-term sum: false positives from `R+`,
/// positives caught by `R-` but not `R+`, and black-box mistakes on
/// uncovered instances. Labels enter as `(1 -/+ y) / 2` with `y` in {-1, +1}.
fn error_count<D: RuleData + ?Sized>(p: &RuleSetPair, d: &D) -> Result<usize> {
    let cov_pos = d.set_coverage(&p.positive)?;
    let cov_neg = d.set_coverage(&p.negative)?;
    let mut total: i64 = 0;
    for i in 0..d.n() {
        let y = d.labels()[i].sign() as i64;
        let yb = d.blackbox()[i].sign() as i64;
        let c_pos = indicator(cov_pos.contains(i));
        let c_neg = indicator(cov_neg.contains(i));
        // each product below is 0 or 2^k, so halve exactly
        let from_pos = (1 - y) * c_pos;
        let from_neg = (1 + y) * (1 - c_pos) * c_neg;
        let uncovered = (1 - c_pos) * (1 - c_neg);
        let from_bb = uncovered * ((1 + y) * (1 - yb) + (1 - y) * (1 + yb));
        total += from_pos / 2 + from_neg / 2 + from_bb / 4;
    }
    Ok(total as usize)
}

/// Fraction of instances the hybrid model gets wrong.
pub fn misclassification_error<D: RuleData + ?Sized>(p: &RuleSetPair, d: &D) -> Result<f64> {
    Ok(error_count(p, d)? as f64 / d.n() as f64)
}

/// Fraction of instances covered by either rule set.
pub fn transparency<D: RuleData + ?Sized>(p: &RuleSetPair, d: &D) -> Result<f64> {
    let mut cover = d.set_coverage(&p.positive)?;
    cover.union_with(&d.set_coverage(&p.negative)?);
    Ok(cover.count_ones(..) as f64 / d.n() as f64)
}

/// The single place the three objective terms are combined. Every route
/// (closed form, search, brute force) goes through here so results compare
/// bit-exactly.
pub fn compose_objective(errors: usize, conditions: usize, covered: usize, n: usize, alpha1: f64, alpha2: f64) -> f64 {
    let n = n as f64;
    errors as f64 / n + alpha1 * conditions as f64 - alpha2 * (covered as f64 / n)
}

/// `error + alpha1 * complexity - alpha2 * transparency`.
pub fn objective<D: RuleData + ?Sized>(p: &RuleSetPair, d: &D, alpha1: f64, alpha2: f64) -> Result<f64> {
    let mut cover = d.set_coverage(&p.positive)?;
    cover.union_with(&d.set_coverage(&p.negative)?);
    Ok(compose_objective(
        error_count(p, d)?,
        complexity(p),
        cover.count_ones(..),
        d.n(),
        alpha1,
        alpha2,
    ))
}

/// A trained hybrid rule-set model.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridRuleSetModel {
    pub pair: RuleSetPair,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Objective of `pair` on the training data.
    pub training_objective: f64,
    /// Conditions the model was mined over; carried for provenance and so
    /// raw data can be re-binarized the same way.
    pub schema: BinarySchema,
}

impl HybridRuleSetModel {
    pub fn predict(&self, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
        predict_pair(&self.pair, x, yb)
    }

    pub fn complexity(&self) -> usize {
        complexity(&self.pair)
    }
}

/// Routes `x` through `m`; see [`predict_pair`].
pub fn predict(m: &HybridRuleSetModel, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
    m.predict(x, yb)
}

/// Pool indices chosen on each side, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Selection {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    fn side(&self, cls: Label) -> &Vec<usize> {
        match cls {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        }
    }

    fn side_mut(&mut self, cls: Label) -> &mut Vec<usize> {
        match cls {
            Label::Positive => &mut self.positive,
            Label::Negative => &mut self.negative,
        }
    }

    fn with_added(&self, cls: Label, idx: usize) -> Selection {
        let mut next = self.clone();
        let side = next.side_mut(cls);
        if let Err(pos) = side.binary_search(&idx) {
            side.insert(pos, idx);
        }
        next
    }

    fn with_removed(&self, cls: Label, idx: usize) -> Selection {
        let mut next = self.clone();
        next.side_mut(cls).retain(|&i| i != idx);
        next
    }
}

#[derive(Debug, Clone)]
struct PoolEntry {
    cover: FixedBitSet,
    len: usize,
    precision: f64,
}

/// Everything a search chain reads: candidate coverage on the training rows,
/// labels as bitsets, and the objective weights. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    n: usize,
    truth_pos: FixedBitSet,
    truth_neg: FixedBitSet,
    /// Rows where the black-box is wrong.
    bb_wrong: FixedBitSet,
    positive: Vec<PoolEntry>,
    negative: Vec<PoolEntry>,
    pool: CandidatePool,
    alpha1: f64,
    alpha2: f64,
}

/// Statistics of one selection.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub errors: usize,
    pub conditions: usize,
    pub covered: usize,
    pub objective: f64,
    cov_pos: FixedBitSet,
    cov_neg: FixedBitSet,
}

impl SearchSpace {
    pub fn new(d: &BinaryDataset, pool: &CandidatePool, alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
            return Err(Error::invalid("alpha1 and alpha2 must be finite and >= 0"));
        }
        let n = d.n();
        let mut truth_pos = FixedBitSet::with_capacity(n);
        let mut bb_wrong = FixedBitSet::with_capacity(n);
        for i in 0..n {
            truth_pos.set(i, d.labels()[i].is_positive());
            bb_wrong.set(i, d.labels()[i] != d.blackbox()[i]);
        }
        let mut truth_neg = truth_pos.clone();
        truth_neg.toggle_range(..);
        let entries = |side: &[crate::rules::Candidate], cls: Label| -> Result<Vec<PoolEntry>> {
            side.iter()
                .map(|c| {
                    let cover = d.coverage(&c.rule)?;
                    let covered = cover.count_ones(..);
                    let hits = cover.ones().filter(|&i| d.labels()[i] == cls).count();
                    let precision = if covered == 0 {
                        0.0
                    } else {
                        hits as f64 / covered as f64
                    };
                    Ok(PoolEntry {
                        cover,
                        len: c.rule.len(),
                        precision,
                    })
                })
                .collect()
        };
        Ok(SearchSpace {
            n,
            positive: entries(&pool.positive, Label::Positive)?,
            negative: entries(&pool.negative, Label::Negative)?,
            truth_pos,
            truth_neg,
            bb_wrong,
            pool: pool.clone(),
            alpha1,
            alpha2,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphas(&self) -> (f64, f64) {
        (self.alpha1, self.alpha2)
    }

    fn entries(&self, cls: Label) -> &[PoolEntry] {
        match cls {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        }
    }

    pub fn evaluate(&self, s: &Selection) -> Evaluation {
        let union = |cls: Label| {
            let mut acc = FixedBitSet::with_capacity(self.n);
            for &i in s.side(cls) {
                acc.union_with(&self.entries(cls)[i].cover);
            }
            acc
        };
        let cov_pos = union(Label::Positive);
        let mut cov_neg = union(Label::Negative);
        cov_neg.difference_with(&cov_pos);
        let mut covered_any = cov_pos.clone();
        covered_any.union_with(&cov_neg);
        let covered = covered_any.count_ones(..);

        let mut uncovered_wrong = self.bb_wrong.clone();
        uncovered_wrong.difference_with(&covered_any);
        let errors = cov_pos.intersection_count(&self.truth_neg)
            + cov_neg.intersection_count(&self.truth_pos)
            + uncovered_wrong.count_ones(..);
        let conditions = s
            .positive
            .iter()
            .map(|&i| self.positive[i].len)
            .chain(s.negative.iter().map(|&i| self.negative[i].len))
            .sum();
        Evaluation {
            errors,
            conditions,
            covered,
            objective: compose_objective(errors, conditions, covered, self.n, self.alpha1, self.alpha2),
            cov_pos,
            cov_neg,
        }
    }

    pub fn objective(&self, s: &Selection) -> f64 {
        self.evaluate(s).objective
    }

    pub fn to_pair(&self, s: &Selection) -> RuleSetPair {
        RuleSetPair {
            positive: s.positive.iter().map(|&i| self.pool.positive[i].rule.clone()).collect(),
            negative: s.negative.iter().map(|&i| self.pool.negative[i].rule.clone()).collect(),
        }
    }

    /// Largest condition count an optimal model can have given the best
    /// objective seen so far; `None` when `alpha1 = 0`.
    pub fn size_bound(&self, lambda_best: f64) -> Option<f64> {
        (self.alpha1 > 0.0).then(|| (lambda_best + self.alpha2) / self.alpha1)
    }

    /// Smallest support a nonempty optimal model can have given the best
    /// objective seen so far; `None` when `alpha2 = 0` or the bound is trivial.
    pub fn support_bound(&self, lambda_best: f64) -> Option<f64> {
        if self.alpha2 <= 0.0 {
            return None;
        }
        let bound = self.n as f64 * (self.alpha1 - lambda_best) / self.alpha2;
        (bound > 0.0).then_some(bound)
    }
}

/// Search-chain knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub iterations: usize,
    /// Base temperature; the temperature at step `t` is `c0^(1 - t/T)`.
    pub c0: f64,
    pub restarts: usize,
    /// Probability of picking a random rule instead of the best-precision one.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: 5000,
            c0: 0.01,
            restarts: 3,
            epsilon: 0.1,
            seed: 42,
        }
    }
}

/// State of one annealing chain.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub current: Selection,
    pub current_objective: f64,
    pub best: Selection,
    /// Best objective seen so far.
    pub lambda_best: f64,
    pub t: usize,
    pub total_iterations: usize,
    pub c0: f64,
    pub epsilon: f64,
    pub rng: ChaCha8Rng,
}

impl SearchState {
    /// Chain at the empty pair. `stream` selects an independent random
    /// stream for the same seed.
    pub fn start(space: &SearchSpace, cfg: &SearchConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let empty = Selection::default();
        let obj = space.objective(&empty);
        SearchState {
            current: empty.clone(),
            current_objective: obj,
            best: empty,
            lambda_best: obj,
            t: 0,
            total_iterations: cfg.iterations,
            c0: cfg.c0,
            epsilon: cfg.epsilon,
            rng,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.c0.powf(1.0 - self.t as f64 / self.total_iterations as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Remove,
    Add,
    Fix,
}

/// Picks among `(index, precision)` options: with probability `1 - epsilon`
/// the best by `better` (first wins ties), otherwise uniformly.
fn pick<R: Rng>(
    rng: &mut R,
    epsilon: f64,
    options: &[(Label, usize, f64)],
    better: impl Fn(f64, f64) -> bool,
) -> Option<(Label, usize)> {
    if options.is_empty() {
        return None;
    }
    if rng.gen::<f64>() < epsilon {
        let (cls, i, _) = options[rng.gen_range(0..options.len())];
        return Some((cls, i));
    }
    let mut best = options[0];
    for &o in &options[1..] {
        if better(o.2, best.2) {
            best = o;
        }
    }
    Some((best.0, best.1))
}

fn pick_removal<R: Rng>(rng: &mut R, epsilon: f64, options: &[(Label, usize, f64)]) -> Option<(Label, usize)> {
    pick(rng, epsilon, options, |a, b| a < b)
}

fn pick_addition<R: Rng>(rng: &mut R, epsilon: f64, options: &[(Label, usize, f64)]) -> Option<(Label, usize)> {
    pick(rng, epsilon, options, |a, b| a > b)
}

impl SearchSpace {
    fn selected(&self, s: &Selection, cls: Label, covering: Option<usize>) -> Vec<(Label, usize, f64)> {
        s.side(cls)
            .iter()
            .filter(|&&i| covering.is_none_or(|row| self.entries(cls)[i].cover.contains(row)))
            .map(|&i| (cls, i, self.entries(cls)[i].precision))
            .collect()
    }

    fn unselected(&self, s: &Selection, cls: Label, covering: Option<usize>) -> Vec<(Label, usize, f64)> {
        let chosen = s.side(cls);
        self.entries(cls)
            .iter()
            .enumerate()
            .filter(|(i, e)| chosen.binary_search(i).is_err() && covering.is_none_or(|row| e.cover.contains(row)))
            .map(|(i, e)| (cls, i, e.precision))
            .collect()
    }

    fn try_remove(&self, state: &mut SearchState) -> Option<Selection> {
        let mut options = self.selected(&state.current, Label::Positive, None);
        options.extend(self.selected(&state.current, Label::Negative, None));
        let (cls, i) = pick_removal(&mut state.rng, state.epsilon, &options)?;
        Some(state.current.with_removed(cls, i))
    }

    fn try_add(&self, state: &mut SearchState, eval: &Evaluation) -> Option<Selection> {
        let mut sides: Vec<Label> = [Label::Positive, Label::Negative]
            .into_iter()
            .filter(|&cls| !self.unselected(&state.current, cls, None).is_empty())
            .collect();
        if sides.is_empty() {
            return None;
        }
        sides.shuffle(&mut state.rng);
        let cls = sides[0];
        let mut covered = eval.cov_pos.clone();
        covered.union_with(&eval.cov_neg);
        let all = self.unselected(&state.current, cls, None);
        let widening: Vec<_> = all
            .iter()
            .copied()
            .filter(|&(_, i, _)| !self.entries(cls)[i].cover.is_subset(&covered))
            .collect();
        let options = if widening.is_empty() { all } else { widening };
        let (cls, i) = pick_addition(&mut state.rng, state.epsilon, &options)?;
        Some(state.current.with_added(cls, i))
    }

    fn try_fix(&self, state: &mut SearchState, eval: &Evaluation) -> Option<Selection> {
        let mut wrong = eval.cov_pos.clone();
        wrong.intersect_with(&self.truth_neg);
        let mut neg_wrong = eval.cov_neg.clone();
        neg_wrong.intersect_with(&self.truth_pos);
        wrong.union_with(&neg_wrong);
        let mut uncovered_wrong = self.bb_wrong.clone();
        uncovered_wrong.difference_with(&eval.cov_pos);
        uncovered_wrong.difference_with(&eval.cov_neg);
        wrong.union_with(&uncovered_wrong);

        let misclassified: Vec<usize> = wrong.ones().collect();
        if misclassified.is_empty() {
            return None;
        }
        let row = misclassified[state.rng.gen_range(0..misclassified.len())];
        let eps = state.epsilon;

        if eval.cov_pos.contains(row) {
            // negative instance claimed by R+
            let options = self.selected(&state.current, Label::Positive, Some(row));
            let (cls, i) = pick_removal(&mut state.rng, eps, &options)?;
            Some(state.current.with_removed(cls, i))
        } else if eval.cov_neg.contains(row) {
            // positive instance claimed by R-: cover it with R+ or release it to the black-box
            let add_first = state.rng.gen_bool(0.5);
            for add in [add_first, !add_first] {
                let next = if add {
                    let options = self.unselected(&state.current, Label::Positive, Some(row));
                    pick_addition(&mut state.rng, eps, &options).map(|(cls, i)| state.current.with_added(cls, i))
                } else {
                    let options = self.selected(&state.current, Label::Negative, Some(row));
                    pick_removal(&mut state.rng, eps, &options).map(|(cls, i)| state.current.with_removed(cls, i))
                };
                if next.is_some() {
                    return next;
                }
            }
            None
        } else {
            let cls = if self.truth_pos.contains(row) {
                Label::Positive
            } else {
                Label::Negative
            };
            let options = self.unselected(&state.current, cls, Some(row));
            let (cls, i) = pick_addition(&mut state.rng, eps, &options)?;
            Some(state.current.with_added(cls, i))
        }
    }
}

/// Proposes a neighbor of `state.current` differing by one rule.
///
/// A model larger than the size bound is forced to shrink; a nonempty model
/// below the support bound is forced to grow. Otherwise one of remove, add
/// and fix-a-mistake is drawn uniformly. An action with no legal move falls
/// through to the remaining ones in random order; with no legal move at all
/// the current selection is returned.
pub fn propose(state: &mut SearchState, space: &SearchSpace) -> Selection {
    let eval = space.evaluate(&state.current);
    let forced = if space
        .size_bound(state.lambda_best)
        .is_some_and(|b| eval.conditions as f64 > b)
    {
        Some(Action::Remove)
    } else if !state.current.is_empty()
        && space
            .support_bound(state.lambda_best)
            .is_some_and(|b| (eval.covered as f64) < b)
    {
        Some(Action::Add)
    } else {
        None
    };

    let mut order = vec![Action::Remove, Action::Add, Action::Fix];
    order.shuffle(&mut state.rng);
    if let Some(first) = forced {
        order.retain(|&a| a != first);
        order.insert(0, first);
    }
    for action in order {
        let next = match action {
            Action::Remove => space.try_remove(state),
            Action::Add => space.try_add(state, &eval),
            Action::Fix => space.try_fix(state, &eval),
        };
        if let Some(next) = next {
            return next;
        }
    }
    state.current.clone()
}

/// Runs one chain for `state.total_iterations` steps, recording the best
/// objective after every step.
pub fn run_chain(state: &mut SearchState, space: &SearchSpace) -> Vec<f64> {
    let mut trace = Vec::with_capacity(state.total_iterations + 1);
    trace.push(state.lambda_best);
    while state.t < state.total_iterations {
        let temperature = state.temperature();
        let proposal = propose(state, space);
        let obj = space.objective(&proposal);
        let accept = obj <= state.current_objective
            || state.rng.gen::<f64>() < ((state.current_objective - obj) / temperature).exp();
        if accept {
            if obj < state.lambda_best {
                state.lambda_best = obj;
                state.best = proposal.clone();
            }
            state.current = proposal;
            state.current_objective = obj;
        }
        state.t += 1;
        trace.push(state.lambda_best);
    }
    trace
}

/// Best selection over all restarts with each chain's best-objective trace.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Selection,
    pub objective: f64,
    pub traces: Vec<Vec<f64>>,
}

/// Runs `cfg.restarts` independent chains (at least one) and keeps the best;
/// ties go to the lowest restart index.
pub fn search(space: &SearchSpace, cfg: &SearchConfig) -> Result<SearchOutcome> {
    if cfg.iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if !(cfg.c0 > 0.0 && cfg.c0.is_finite()) {
        return Err(Error::invalid("base temperature must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::invalid("epsilon must lie in [0, 1]"));
    }
    let chains: Vec<(Selection, f64, Vec<f64>)> = (0..cfg.restarts.max(1) as u64)
        .into_par_iter()
        .map(|stream| {
            let mut state = SearchState::start(space, cfg, stream);
            let trace = run_chain(&mut state, space);
            (state.best, state.lambda_best, trace)
        })
        .collect();
    let mut best = 0;
    for (k, chain) in chains.iter().enumerate() {
        if chain.1 < chains[best].1 {
            best = k;
        }
    }
    let objective = chains[best].1;
    let selection = chains[best].0.clone();
    Ok(SearchOutcome {
        best: selection,
        objective,
        traces: chains.into_iter().map(|c| c.2).collect(),
    })
}

/// Trains a hybrid rule-set model on `d` from candidates in `pool`.
pub fn train(
    d: &BinaryDataset,
    pool: &CandidatePool,
    alpha1: f64,
    alpha2: f64,
    cfg: &SearchConfig,
) -> Result<HybridRuleSetModel> {
    train_traced(d, pool, alpha1, alpha2, cfg).map(|(m, _)| m)
}

/// [`train`], also returning the search outcome with per-chain traces.
pub fn train_traced(
    d: &BinaryDataset,
    pool: &CandidatePool,
    alpha1: f64,
    alpha2: f64,
    cfg: &SearchConfig,
) -> Result<(HybridRuleSetModel, SearchOutcome)> {
    let space = SearchSpace::new(d, pool, alpha1, alpha2)?;
    let outcome = search(&space, cfg)?;
    let model = HybridRuleSetModel {
        pair: space.to_pair(&outcome.best),
        alpha1,
        alpha2,
        training_objective: outcome.objective,
        schema: d.schema().clone(),
    };
    Ok((model, outcome))
}
