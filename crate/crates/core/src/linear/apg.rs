//! Smoothed accelerated proximal gradient with backtracking line search.

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::{loss_gradient, objective_at, smoothed_loss, Design, HybridLinearModel, LinearData, LossSpec};

/// Soft thresholding: `sign(v) max(|v| - t, 0)` per component.
pub fn prox_l1(v: &[f64], t: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let m = x.abs() - t;
            if m > 0.0 {
                m.copysign(x)
            } else {
                0.0
            }
        })
        .collect()
}

/// Gradient step on the thresholds followed by projection onto
/// `theta_plus >= theta_minus`.
pub fn threshold_step(hat_plus: f64, hat_minus: f64, g_plus: f64, g_minus: f64, alpha2: f64, eta: f64) -> (f64, f64) {
    let u_plus = hat_plus - eta * (g_plus + alpha2);
    let u_minus = hat_minus - eta * (g_minus - alpha2);
    if u_plus >= u_minus {
        (u_plus, u_minus)
    } else {
        let mid = 0.5 * (u_plus + u_minus);
        (mid, mid)
    }
}

/// Next momentum weight `a` solving `a^2 = (1 - a) prev^2`, and the
/// extrapolation factor `prev (1 - prev) / (prev^2 + a)`.
pub fn momentum_update(prev: f64) -> (f64, f64) {
    let p2 = prev * prev;
    // positive root of a^2 + p2 a - p2 = 0, written to avoid cancellation
    let a = 2.0 * p2 / (p2 + (p2 * p2 + 4.0 * p2).sqrt());
    let beta = prev * (1.0 - prev) / (p2 + a);
    (a, beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApgConfig {
    pub eta0: f64,
    /// Initial momentum weight in (0, 1).
    pub alpha0: f64,
    pub max_iter: usize,
    /// Relative change of the objective over `window` iterations that stops the run.
    pub tol: f64,
    pub window: usize,
    /// Iterations run before the stopping test applies. The initial point
    /// puts many margins on the hinge kink, where early steps are tiny.
    pub min_iter: usize,
    pub shrink: f64,
    pub grow: f64,
}

impl Default for ApgConfig {
    fn default() -> Self {
        ApgConfig {
            eta0: 1.0,
            alpha0: 0.5,
            max_iter: 5000,
            tol: 1e-4,
            window: 10,
            min_iter: 200,
            shrink: 0.5,
            grow: 2.0,
        }
    }
}

impl ApgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid("eta0 must be positive"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::invalid("alpha0 must lie in (0, 1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("shrink must lie in (0, 1)"));
        }
        if !(self.grow >= 1.0 && self.grow.is_finite()) {
            return Err(Error::invalid("grow must be >= 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::invalid("tol must be >= 0"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be >= 1"));
        }
        Ok(())
    }
}

/// Result of one solver run on standardized data.
#[derive(Debug, Clone, PartialEq)]
pub struct ApgRun {
    pub w: Vec<f64>,
    pub theta_plus: f64,
    pub theta_minus: f64,
    /// Objective at the returned (best) iterate.
    pub objective: f64,
    /// Objective at the initial point and after every iteration.
    pub history: Vec<f64>,
    /// Smallest `theta_plus - theta_minus` over all stored iterates.
    pub min_gap: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

const MAX_BACKTRACKS: usize = 80;

/// Minimizes the smoothed objective from `w = 0, theta_plus = 1, theta_minus = -1`.
pub fn apg_solve(d: &LinearData, alpha1: f64, alpha2: f64, spec: &LossSpec, cfg: &ApgConfig) -> Result<ApgRun> {
    if !(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
        return Err(Error::invalid("alpha1 and alpha2 must be finite and >= 0"));
    }
    let spec = LossSpec::new(spec.kind, spec.mu)?;
    cfg.validate()?;
    let p = d.p();

    let mut w = vec![0.0; p];
    let (mut tp, mut tm) = (1.0, -1.0);
    let mut w_hat = w.clone();
    let (mut tp_hat, mut tm_hat) = (tp, tm);
    let mut momentum = cfg.alpha0;
    let mut eta = cfg.eta0;

    let f0 = objective_at(&w, tp, tm, d, alpha1, alpha2, &spec)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut history = vec![f0];
    let mut best = (w.clone(), tp, tm, f0);
    let mut f_cur = f0;
    let mut min_gap = tp - tm;
    let mut restarts = 0;
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iter {
        iterations = t;
        eta *= cfg.grow;
        let l_hat = smoothed_loss(&w_hat, tp_hat, tm_hat, d, &spec)?;
        let (gw, g_plus, g_minus) = loss_gradient(&w_hat, tp_hat, tm_hat, d, &spec)?;
        if !l_hat.is_finite() {
            return Err(Error::NonFinite { iteration: t });
        }

        let (w_new, tp_new, tm_new, l_new) = {
            let mut tries = 0;
            loop {
                let step: Vec<f64> = w_hat.iter().zip(&gw).map(|(x, g)| x - eta * g).collect();
                let w_try = prox_l1(&step, eta * alpha1);
                let (tp_try, tm_try) = threshold_step(tp_hat, tm_hat, g_plus, g_minus, alpha2, eta);
                let l_try = smoothed_loss(&w_try, tp_try, tm_try, d, &spec)?;
                let mut lin = (tp_try - tp_hat) * g_plus + (tm_try - tm_hat) * g_minus;
                let mut sq = (tp_try - tp_hat).powi(2) + (tm_try - tm_hat).powi(2);
                for j in 0..p {
                    let dj = w_try[j] - w_hat[j];
                    lin += gw[j] * dj;
                    sq += dj * dj;
                }
                let model = l_hat + lin + sq / (2.0 * eta);
                tries += 1;
                if l_try <= model + 1e-12 * (1.0 + l_hat.abs()) || tries >= MAX_BACKTRACKS {
                    break (w_try, tp_try, tm_try, l_try);
                }
                eta *= cfg.shrink;
            }
        };

        let l1: f64 = w_new.iter().map(|v| v.abs()).sum();
        let f_new = l_new + alpha1 * l1 + alpha2 * (tp_new - tm_new);
        if !f_new.is_finite() {
            return Err(Error::NonFinite { iteration: t });
        }
        min_gap = min_gap.min(tp_new - tm_new);
        if f_new < best.3 {
            best = (w_new.clone(), tp_new, tm_new, f_new);
        }
        let restart = f_new - f_cur > 10.0 * cfg.tol * f_cur.abs();

        let w_prev = std::mem::replace(&mut w, w_new);
        let tp_prev = std::mem::replace(&mut tp, tp_new);
        let tm_prev = std::mem::replace(&mut tm, tm_new);
        f_cur = f_new;
        history.push(f_new);

        let beta = if restart {
            restarts += 1;
            momentum = cfg.alpha0;
            0.0
        } else {
            let (next, beta) = momentum_update(momentum);
            momentum = next;
            beta
        };
        w_hat = w.iter().zip(&w_prev).map(|(x, xp)| x + beta * (x - xp)).collect();
        tp_hat = tp + beta * (tp - tp_prev);
        tm_hat = tm + beta * (tm - tm_prev);

        if t >= cfg.window.max(cfg.min_iter) {
            let old = history[t - cfg.window];
            let change = (f_new - old).abs();
            if change <= cfg.tol * old.abs() {
                converged = true;
                break;
            }
        }
    }

    Ok(ApgRun {
        w: best.0,
        theta_plus: best.1,
        theta_minus: best.2,
        objective: best.3,
        history,
        min_gap,
        iterations,
        restarts,
        converged,
    })
}

/// Fits the standardization on `d`, then solves.
pub fn apg_train(d: &Dataset, alpha1: f64, alpha2: f64, spec: &LossSpec, cfg: &ApgConfig) -> Result<HybridLinearModel> {
    let design = Design::fit(d.table())?;
    let data = LinearData::from_dataset(&design, d)?;
    let run = apg_solve(&data, alpha1, alpha2, spec, cfg)?;
    Ok(HybridLinearModel {
        design,
        w: run.w,
        theta_plus: run.theta_plus,
        theta_minus: run.theta_minus,
        loss: *spec,
        alpha1,
        alpha2,
        objective: run.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label::{self, *};
    use crate::linear::LossKind;

    #[test]
    fn soft_threshold() {
        let v = prox_l1(&[0.5, -0.05, -1.2], 0.2);
        let expected = [0.3, 0.0, -1.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(prox_l1(&[0.5, -2.0], 0.0), vec![0.5, -2.0]);
        assert_eq!(prox_l1(&[0.1, -0.2], 0.2), vec![0.0, 0.0]);
    }

    #[test]
    fn threshold_projection() {
        assert_eq!(threshold_step(1.0, -1.0, 0.0, 0.0, 0.0, 0.1), (1.0, -1.0));
        // u_plus = 0.1, u_minus = 0.4
        let (a, b) = threshold_step(0.1, 0.4, 0.0, 0.0, 0.0, 1.0);
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.25).abs() < 1e-15);
        let (a, b) = threshold_step(2.0, -2.0, 0.0, 0.0, 0.3, 0.5);
        assert!(((a - b) - (4.0 - 2.0 * 0.5 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn momentum_values() {
        let (a, b) = momentum_update(1.0);
        assert!((a - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(b, 0.0);
        let (a, b) = momentum_update(0.5);
        assert!((a - 0.390388).abs() < 1e-6);
        assert!((b - 0.390388).abs() < 1e-6);
        let mut prev = 0.9;
        for _ in 0..200 {
            let (a, _) = momentum_update(prev);
            assert!(a > 0.0 && a < prev);
            assert!((a * a - (1.0 - a) * prev * prev).abs() < 1e-15);
            prev = a;
        }
    }

    fn blobs() -> LinearData {
        let xs = [-2.0, -1.5, -1.0, -0.3, 0.2, 0.9, 1.4, 2.1];
        let labels: Vec<Label> = xs.iter().map(|&x| Label::from_sign(x > 0.0)).collect();
        let bb: Vec<Label> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| if i % 3 == 0 { l.flip() } else { *l })
            .collect();
        LinearData::new(xs.to_vec(), 1, &labels, &bb).unwrap()
    }

    #[test]
    fn large_gap_weight_collapses_thresholds() {
        let spec = LossSpec::new(LossKind::Hinge, 1e-4).unwrap();
        let run = apg_solve(&blobs(), 0.01, 5.0, &spec, &ApgConfig::default()).unwrap();
        assert_eq!(run.theta_plus, run.theta_minus);
    }

    #[test]
    fn bookkeeping_and_feasibility() {
        for kind in [LossKind::Hinge, LossKind::SmoothedHinge, LossKind::Logistic] {
            let spec = LossSpec::new(kind, 1e-2).unwrap();
            let run = apg_solve(&blobs(), 0.02, 0.05, &spec, &ApgConfig::default()).unwrap();
            assert!(run.min_gap >= 0.0);
            assert!(run.objective <= run.history[0]);
            assert!(run.objective <= *run.history.last().unwrap());
            let f = objective_at(&run.w, run.theta_plus, run.theta_minus, &blobs(), 0.02, 0.05, &spec).unwrap();
            assert_eq!(f, run.objective);
        }
    }

    #[test]
    fn deterministic() {
        let spec = LossSpec::default();
        let a = apg_solve(&blobs(), 0.02, 0.1, &spec, &ApgConfig::default()).unwrap();
        let b = apg_solve(&blobs(), 0.02, 0.1, &spec, &ApgConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = LossSpec::default();
        assert!(apg_solve(&blobs(), -1.0, 0.1, &spec, &ApgConfig::default()).is_err());
        let bad = ApgConfig {
            alpha0: 1.0,
            ..ApgConfig::default()
        };
        assert!(apg_solve(&blobs(), 0.1, 0.1, &spec, &bad).is_err());
        let hinge0 = LossSpec {
            kind: LossKind::Hinge,
            mu: 0.0,
        };
        assert!(apg_solve(&blobs(), 0.1, 0.1, &hinge0, &ApgConfig::default()).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        // the summed gradient overflows to infinity on the first step
        let d = LinearData::new(vec![1e308, 1e308], 1, &[Positive, Positive], &[Negative, Negative]).unwrap();
        let spec = LossSpec::new(LossKind::SmoothedHinge, 0.0).unwrap();
        let err = apg_solve(&d, 0.0, 0.0, &spec, &ApgConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
