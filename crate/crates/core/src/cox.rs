//! Cox negative log partial likelihood with Breslow ties, its gradient with
//! respect to per-sample risk scores, the L2 weight penalty, and a
//! Newton-Raphson fitter for the linear Cox model.
//!
//! The risk set of an event at time `T_i` is `{j : T_j >= T_i}`. Samples are
//! sorted by descending time once ([`RiskSetIndex`]); every risk set is then a
//! prefix of that order, so all sums are single sweeps.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Risk-set bookkeeping shared by the loss and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetIndex {
    /// Sample indices sorted by descending time (stable for ties).
    pub order: Vec<usize>,
    /// Positions in `order` that hold an event.
    pub event_positions: Vec<usize>,
    pub n_events: usize,
    /// Ranges of equal times within `order`.
    pub tie_groups: Vec<Range<usize>>,
    events_sorted: Vec<bool>,
    group_events: Vec<usize>,
}

impl RiskSetIndex {
    pub fn build(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: events.len(),
            });
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        let events_sorted: Vec<bool> = order.iter().map(|&i| events[i]).collect();
        let event_positions: Vec<usize> = (0..order.len()).filter(|&k| events_sorted[k]).collect();
        if event_positions.is_empty() {
            return Err(Error::NoEvents);
        }
        let mut tie_groups = Vec::new();
        let mut start = 0;
        for k in 1..=order.len() {
            if k == order.len() || times[order[k]] != times[order[start]] {
                tie_groups.push(start..k);
                start = k;
            }
        }
        let group_events = tie_groups
            .iter()
            .map(|g| events_sorted[g.clone()].iter().filter(|&&e| e).count())
            .collect();
        Ok(Self {
            n_events: event_positions.len(),
            order,
            event_positions,
            tie_groups,
            events_sorted,
            group_events,
        })
    }

    pub fn from_dataset(ds: &SurvivalDataset) -> Result<Self> {
        Self::build(ds.times(), ds.events())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Sample indices in the risk set of sample `i`.
    pub fn risk_set(&self, i: usize) -> Vec<usize> {
        let pos = self
            .order
            .iter()
            .position(|&j| j == i)
            .expect("sample in index");
        let group = self
            .tie_groups
            .iter()
            .find(|g| g.contains(&pos))
            .expect("position in a tie group");
        self.order[..group.end].to_vec()
    }

    /// `ln Σ_{j in risk set} exp(h_j)` for each tie group, via a running
    /// log-sum-exp over the descending-time prefix.
    fn group_log_denominators(&self, h: &[f64]) -> Vec<f64> {
        let mut max = f64::NEG_INFINITY;
        let mut scaled_sum = 0.0;
        self.tie_groups
            .iter()
            .map(|g| {
                for &i in &self.order[g.clone()] {
                    let v = h[i];
                    if v > max {
                        scaled_sum = scaled_sum * (max - v).exp() + 1.0;
                        max = v;
                    } else {
                        scaled_sum += (v - max).exp();
                    }
                }
                max + scaled_sum.ln()
            })
            .collect()
    }
}

fn check_len(h: &[f64], idx: &RiskSetIndex) {
    assert_eq!(
        h.len(),
        idx.len(),
        "risk scores and risk-set index disagree on n"
    );
}

/// `-(1/N_E) Σ_{i: E_i} (h_i - ln Σ_{j: T_j >= T_i} exp(h_j))`.
pub fn neg_log_partial_likelihood(h: &[f64], idx: &RiskSetIndex) -> f64 {
    check_len(h, idx);
    let log_den = idx.group_log_denominators(h);
    let mut total = 0.0;
    for (g, range) in idx.tie_groups.iter().enumerate() {
        for k in range.clone() {
            if idx.events_sorted[k] {
                total += h[idx.order[k]] - log_den[g];
            }
        }
    }
    -total / idx.n_events as f64
}

/// Gradient of [`neg_log_partial_likelihood`] with respect to each `h_i`.
pub fn nll_gradient(h: &[f64], idx: &RiskSetIndex) -> Vec<f64> {
    check_len(h, idx);
    let log_den = idx.group_log_denominators(h);
    // acc[g] = ln Σ_{g' >= g} d_g' / D_g': every event at or before time T_i
    // whose risk set contains sample i.
    let mut acc = vec![f64::NEG_INFINITY; log_den.len()];
    let mut running = f64::NEG_INFINITY;
    for g in (0..log_den.len()).rev() {
        let d = idx.group_events[g];
        if d > 0 {
            running = log_add(running, (d as f64).ln() - log_den[g]);
        }
        acc[g] = running;
    }
    let scale = -1.0 / idx.n_events as f64;
    let mut grad = vec![0.0; h.len()];
    for (g, range) in idx.tie_groups.iter().enumerate() {
        for k in range.clone() {
            let i = idx.order[k];
            let event = if idx.events_sorted[k] { 1.0 } else { 0.0 };
            grad[i] = scale * (event - (h[i] + acc[g]).exp());
        }
    }
    grad
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `λ Σ w²` over the entries selected by `is_weight`, and its gradient `2λw`
/// (zero elsewhere).
pub fn l2_penalty(params: &[f64], is_weight: &[bool], lambda: f64) -> (f64, Vec<f64>) {
    assert_eq!(params.len(), is_weight.len());
    let mut loss = 0.0;
    let grad = params
        .iter()
        .zip(is_weight)
        .map(|(&w, &sel)| {
            if sel && lambda != 0.0 {
                loss += w * w;
                2.0 * lambda * w
            } else {
                0.0
            }
        })
        .collect();
    (lambda * loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCoxFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub final_loss: f64,
    pub converged: bool,
}

impl LinearCoxFit {
    pub fn predict(&self, features: &Array2<f64>) -> Vec<f64> {
        features.dot(&Array1::from(self.beta.clone())).to_vec()
    }
}

fn linear_scores(x: ArrayView2<f64>, beta: &Array1<f64>) -> Vec<f64> {
    x.dot(beta).to_vec()
}

/// Hessian of the normalised NLL with respect to β for `h = Xβ`:
/// `(1/N_E) Σ_g d_g (S2/S0 - (S1/S0)(S1/S0)ᵀ)` with Breslow ties.
fn linear_hessian(x: ArrayView2<f64>, h: &[f64], idx: &RiskSetIndex) -> Array2<f64> {
    let p = x.ncols();
    let mut hess = Array2::<f64>::zeros((p, p));
    let mut max = f64::NEG_INFINITY;
    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(p);
    let mut s2 = Array2::<f64>::zeros((p, p));
    for (g, range) in idx.tie_groups.iter().enumerate() {
        for &i in &idx.order[range.clone()] {
            let v = h[i];
            if v > max {
                let r = (max - v).exp();
                s0 *= r;
                s1 *= r;
                s2 *= r;
                max = v;
            }
            let w = (v - max).exp();
            let xi = x.row(i);
            s0 += w;
            s1.scaled_add(w, &xi);
            for a in 0..p {
                for b in 0..p {
                    s2[[a, b]] += w * xi[a] * xi[b];
                }
            }
        }
        let d = idx.group_events[g];
        if d > 0 {
            let mean = &s1 / s0;
            for a in 0..p {
                for b in 0..p {
                    hess[[a, b]] += d as f64 * (s2[[a, b]] / s0 - mean[a] * mean[b]);
                }
            }
        }
    }
    hess / idx.n_events as f64
}

/// Solve `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` if `A` is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum > 1e-14 * a[[i, i]].abs().max(1e-300)) {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[[i, k]] * y[k]).sum();
        y[i] = (b[i] - s) / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (y[i] - s) / l[[i, i]];
    }
    Some(x)
}

/// Newton direction `-H⁻¹ g`, adding diagonal damping when `H` is singular
/// and falling back to `-g` if even heavy damping fails.
fn newton_direction(hess: &Array2<f64>, grad: &Array1<f64>) -> Array1<f64> {
    let neg = grad.mapv(|v| -v);
    if let Some(d) = cholesky_solve(hess, &neg) {
        return d;
    }
    let p = hess.nrows();
    let mut damping = 1e-8 * (hess.diag().sum().abs() / p as f64).max(1.0);
    for _ in 0..20 {
        let mut damped = hess.clone();
        for a in 0..p {
            damped[[a, a]] += damping;
        }
        if let Some(d) = cholesky_solve(&damped, &neg) {
            return d;
        }
        damping *= 10.0;
    }
    neg
}

const MAX_HALVINGS: usize = 30;

/// Maximise the Cox partial likelihood of the linear model `h = Xβ` by
/// Newton-Raphson with step halving. Converged once `‖∇‖∞ <= tol`.
pub fn fit_linear_cox_newton(
    ds: &SurvivalDataset,
    max_iter: usize,
    tol: f64,
) -> Result<LinearCoxFit> {
    let idx = RiskSetIndex::from_dataset(ds)?;
    let x = ds.features().view();
    let mut beta = Array1::<f64>::zeros(ds.n_features());
    let mut h = linear_scores(x, &beta);
    let mut loss = neg_log_partial_likelihood(&h, &idx);
    let gradient = |h: &[f64]| x.t().dot(&Array1::from(nll_gradient(h, &idx)));
    let mut grad = gradient(&h);
    let mut iterations = 0;

    while iterations < max_iter {
        if grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            break;
        }
        iterations += 1;
        let direction = newton_direction(&linear_hessian(x, &h, &idx), &grad);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &beta + &(&direction * step);
            let ch = linear_scores(x, &candidate);
            let cl = neg_log_partial_likelihood(&ch, &idx);
            if cl <= loss {
                accepted = Some((candidate, ch, cl));
                break;
            }
            step *= 0.5;
        }
        let Some((b, hh, l)) = accepted else { break };
        beta = b;
        h = hh;
        loss = l;
        grad = gradient(&h);
    }

    let final_gradient_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LinearCoxFit {
        beta: beta.to_vec(),
        iterations,
        final_gradient_norm,
        final_loss: loss,
        converged: final_gradient_norm <= tol,
    })
}
