//! Per-user power updates shared by every solver.
//!
//! For user `k` the Lagrangian, as a function of its own power `x` with the
//! others held fixed, is
//!
//! ```text
//! phi(x) = [ -w_k ln(a x + b) + sum_{j != k} w_j ln(R_j + x) ] / ln 2 - c x
//! ```
//!
//! where `a, b` are the slope and intercept of the SINR model, `w = 1 + Gamma`,
//! `R_j = sum_{i != j, k} p_i + 1/ze` and `c = q + Psi` (the price of power).
//! Setting `phi'(x) = 0` is the stationarity condition; solving it for the
//! `x` inside `a x + b` while freezing the interference sum gives the
//! explicit closed-form update.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::metrics::SinrModel;

/// Smallest denominator accepted by the explicit update.
pub(crate) const SINGULAR_EPS: f64 = 1e-12;

/// Number of log-spaced probes used to bracket local maxima of `phi`.
const PROBES: usize = 24;
/// Smallest probe relative to the cap.
const PROBE_FLOOR: f64 = 1e-9;

/// Everything the update of one user needs, with the interference sums
/// `R_j` precomputed.
pub(crate) struct UserProblem<'a> {
    model: &'a SinrModel,
    own_weight: f64,
    price: f64,
    others: Vec<(f64, f64)>,
}

impl<'a> UserProblem<'a> {
    pub(crate) fn new(
        model: &'a SinrModel,
        p: &[f64],
        k: usize,
        weights: &[f64],
        price: f64,
        inv_eve: f64,
    ) -> Self {
        let total: f64 = p.iter().sum();
        let rest = total - p[k];
        let others = (0..p.len())
            .filter(|&j| j != k)
            .map(|j| (weights[j], (rest - p[j]).max(0.0) + inv_eve))
            .collect();
        UserProblem {
            model,
            own_weight: weights[k],
            price,
            others,
        }
    }

    /// Interference term `S_k` of the stationarity condition at own power `x`.
    pub(crate) fn interference(&self, x: f64) -> f64 {
        self.others.iter().map(|&(w, r)| w / (r + x)).sum::<f64>() / LN_2
    }

    fn own_slope(&self, x: f64) -> f64 {
        let m = self.model;
        self.own_weight * m.slope / ((m.slope * x + m.intercept) * LN_2)
    }

    /// `phi(x)` up to a constant.
    pub(crate) fn value(&self, x: f64) -> f64 {
        let m = self.model;
        let own = -self.own_weight * libm::log(m.slope * x + m.intercept);
        let rest: f64 = self.others.iter().map(|&(w, r)| w * libm::log(r + x)).sum();
        (own + rest) / LN_2 - self.price * x
    }

    /// `phi'(x)`. Its negative is the stationarity residual.
    pub(crate) fn slope(&self, x: f64) -> f64 {
        self.interference(x) - self.own_slope(x) - self.price
    }

    fn curvature(&self, x: f64) -> f64 {
        let m = self.model;
        let den = m.slope * x + m.intercept;
        let own = self.own_weight * m.slope * m.slope / (den * den);
        let rest: f64 = self
            .others
            .iter()
            .map(|&(w, r)| w / ((r + x) * (r + x)))
            .sum();
        (own - rest) / LN_2
    }

    /// Stationarity residual `w_k a / ((a x + b) ln 2) - S_k + c`.
    pub(crate) fn residual(&self, x: f64) -> f64 {
        -self.slope(x)
    }

    /// Closed-form update with `S_k` frozen at own power `x`:
    /// `(w_k / ((S_k - c) ln 2)) - b / a`, not clamped.
    pub(crate) fn explicit(&self, x: f64, user: usize) -> Result<f64> {
        let den = self.interference(x) - self.price;
        if den.abs() < SINGULAR_EPS {
            return Err(Error::UpdateSingular { user });
        }
        let m = self.model;
        Ok(self.own_weight / (den * LN_2) - m.intercept / m.slope)
    }

    /// Maximizer of `phi` over `[0, cap]`.
    ///
    /// Local maxima are bracketed by sign changes of `phi'` on a log-spaced
    /// probe grid, refined by safeguarded Newton steps, and compared with
    /// the two end points.
    pub(crate) fn best_response(&self, cap: f64) -> f64 {
        if !(cap > 0.0) {
            return 0.0;
        }
        let mut best_x = 0.0;
        let mut best_v = self.value(0.0);
        let consider = |x: f64, best_x: &mut f64, best_v: &mut f64| {
            let v = self.value(x);
            if v > *best_v {
                *best_v = v;
                *best_x = x;
            }
        };

        let mut prev_x = 0.0;
        let mut prev_d = self.slope(0.0);
        for i in 0..PROBES {
            let t = i as f64 / (PROBES - 1) as f64;
            let x = cap * libm::pow(PROBE_FLOOR, 1.0 - t);
            let d = self.slope(x);
            if prev_d > 0.0 && d <= 0.0 {
                let root = self.refine(prev_x, x);
                consider(root, &mut best_x, &mut best_v);
            }
            prev_x = x;
            prev_d = d;
        }
        consider(cap, &mut best_x, &mut best_v);
        best_x
    }

    /// Root of `phi'` in `[lo, hi]` given `phi'(lo) > 0 >= phi'(hi)`.
    fn refine(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let d = self.slope(x);
            if d == 0.0 {
                return x;
            }
            if d > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let c = self.curvature(x);
            let newton = x - d / c;
            x = if c < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
            if (x - lo).min(hi - x) <= 4.0 * f64::EPSILON * x && d.abs() < 1e-13 {
                break;
            }
        }
        x
    }
}

/// Lagrangian of all users at once, for fixed multipliers and prices.
///
/// `L(p) = sum_k w_k [ln(s_k) - ln(a p_k + b)] / ln 2 - sum_k c_k p_k` with
/// `s_k = sum_{i != k} p_i + 1/ze`.
pub(crate) struct JointProblem<'a> {
    pub model: &'a SinrModel,
    pub weights: &'a [f64],
    pub prices: &'a [f64],
    pub inv_eve: f64,
}

impl JointProblem<'_> {
    fn spreads(&self, p: &[f64]) -> Vec<f64> {
        let total: f64 = p.iter().sum();
        p.iter()
            .map(|&v| (total - v).max(0.0) + self.inv_eve)
            .collect()
    }

    pub(crate) fn value(&self, p: &[f64]) -> f64 {
        let m = self.model;
        let s = self.spreads(p);
        let mut v = 0.0;
        for k in 0..p.len() {
            v += self.weights[k] * (libm::log(s[k]) - libm::log(m.slope * p[k] + m.intercept))
                / LN_2;
            v -= self.prices[k] * p[k];
        }
        v
    }

    /// Gradient and Hessian of `L` at `p`.
    fn derivatives(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = p.len();
        let m = self.model;
        let s = self.spreads(p);
        let a: Vec<f64> = (0..n).map(|k| self.weights[k] / (s[k] * LN_2)).collect();
        let b: Vec<f64> = (0..n).map(|k| a[k] / s[k]).collect();
        let sum_a: f64 = a.iter().sum();
        let sum_b: f64 = b.iter().sum();
        let mut grad = Vec::with_capacity(n);
        let mut hess = alloc::vec![0.0; n * n];
        for j in 0..n {
            let den = m.slope * p[j] + m.intercept;
            grad.push(sum_a - a[j] - self.weights[j] * m.slope / (den * LN_2) - self.prices[j]);
            for l in 0..n {
                hess[j * n + l] = if j == l {
                    -(sum_b - b[j]) + self.weights[j] * m.slope * m.slope / (den * den * LN_2)
                } else {
                    -(sum_b - b[j] - b[l])
                };
            }
        }
        (grad, hess)
    }

    /// One safeguarded Newton step on the users flagged in `free`, kept
    /// inside `[0, inf)` and under every `(members, budget)` limit. Does
    /// nothing unless the free block of the Hessian is negative definite
    /// and the step does not decrease `L`.
    pub(crate) fn newton_step(&self, p: &mut [f64], free: &[bool], limits: &[(&[usize], f64)]) {
        let idx: Vec<usize> = (0..p.len()).filter(|&k| free[k]).collect();
        let n = idx.len();
        if n == 0 {
            return;
        }
        let (grad, hess) = self.derivatives(p);
        let full = p.len();
        // Solve (-H) d = g on the free block.
        let mut mat: Vec<f64> = Vec::with_capacity(n * n);
        for &j in &idx {
            for &l in &idx {
                mat.push(-hess[j * full + l]);
            }
        }
        let rhs: Vec<f64> = idx.iter().map(|&j| grad[j]).collect();
        let Some(dir) = cholesky_solve(&mut mat, rhs, n) else {
            return;
        };
        let mut step = alloc::vec![0.0; full];
        for (i, &k) in idx.iter().enumerate() {
            step[k] = dir[i];
        }
        let mut t: f64 = 1.0;
        for k in 0..full {
            if step[k] < 0.0 {
                t = t.min(-p[k] / step[k]);
            }
        }
        for &(members, budget) in limits {
            let used: f64 = members.iter().map(|&j| p[j]).sum();
            let rise: f64 = members.iter().map(|&j| step[j]).sum();
            if rise > 0.0 {
                t = t.min(((budget - used) / rise).max(0.0));
            }
        }
        if !(t > 0.0) {
            return;
        }
        let base = self.value(p);
        let mut trial = p.to_vec();
        for _ in 0..30 {
            for k in 0..full {
                trial[k] = (p[k] + t * step[k]).max(0.0);
            }
            if self.value(&trial) >= base {
                p.copy_from_slice(&trial);
                return;
            }
            t *= 0.5;
        }
    }
}

/// Solve `A x = b` for symmetric positive-definite `A` (row-major, `n x n`),
/// overwriting `A` with its Cholesky factor. `None` if `A` is not positive
/// definite.
fn cholesky_solve(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    Some(b)
}

/// Explicit update clamped to `[0, cap]`. Shared by the public closed-form
/// update functions.
pub(crate) fn clamped_explicit(
    model: &SinrModel,
    p: &[f64],
    k: usize,
    weights: &[f64],
    price: f64,
    inv_eve: f64,
    cap: f64,
) -> Result<f64> {
    let prob = UserProblem::new(model, p, k, weights, price, inv_eve);
    let raw = prob.explicit(p[k], k)?;
    Ok(if raw.is_nan() {
        0.0
    } else {
        raw.clamp(0.0, cap)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mrt_model(k: f64, delta: f64, m: f64) -> SinrModel {
        SinrModel {
            gain: delta * m,
            slope: k - delta * delta,
            intercept: k,
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let model = mrt_model(3.0, 0.9, 50.0);
        let p = vec![0.2, 0.7, 0.4];
        let w = vec![1.0, 1.3, 1.1];
        let prob = UserProblem::new(&model, &p, 1, &w, 0.8, 1e-3);
        for &x in &[0.01, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (prob.value(x + h) - prob.value(x - h)) / (2.0 * h);
            assert!((fd - prob.slope(x)).abs() < 1e-6, "x={x}");
            let fd2 = (prob.slope(x + h) - prob.slope(x - h)) / (2.0 * h);
            assert!((fd2 - prob.curvature(x)).abs() < 1e-5, "x={x}");
        }
    }

    #[test]
    fn best_response_beats_dense_scan() {
        let model = mrt_model(4.0, 0.8, 64.0);
        let p = vec![0.5, 0.1, 0.9, 0.3];
        let w = vec![1.0; 4];
        for &price in &[0.0, 0.5, 2.0, 10.0] {
            let prob = UserProblem::new(&model, &p, 2, &w, price, 1e-9);
            let cap = 3.0;
            let x = prob.best_response(cap);
            let scan = (0..=30_000)
                .map(|i| prob.value(cap * i as f64 / 30_000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(prob.value(x) >= scan - 1e-9, "price={price}");
            if x > 0.0 && x < cap {
                assert!(prob.residual(x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interior_best_response_is_explicit_fixed_point() {
        let model = mrt_model(3.0, 0.9, 40.0);
        let p = vec![0.4, 0.4, 0.4];
        let w = vec![1.0; 3];
        let prob = UserProblem::new(&model, &p, 0, &w, 1.0, 1e-12);
        let x = prob.best_response(10.0);
        assert!(x > 0.0 && x < 10.0);
        assert!((prob.explicit(x, 0).unwrap() - x).abs() < 1e-8);
    }

    #[test]
    fn joint_derivatives_match_finite_differences() {
        let model = mrt_model(3.0, 0.9, 50.0);
        let w = [1.0, 1.2, 1.05];
        let c = [0.4, 0.5, 0.6];
        let joint = JointProblem {
            model: &model,
            weights: &w,
            prices: &c,
            inv_eve: 1e-2,
        };
        let p = [0.3, 0.8, 0.5];
        let (g, h) = joint.derivatives(&p);
        let e = 1e-6;
        for j in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[j] += e;
            lo[j] -= e;
            let fd = (joint.value(&hi) - joint.value(&lo)) / (2.0 * e);
            assert!((fd - g[j]).abs() < 1e-6);
            let (gh, _) = joint.derivatives(&hi);
            let (gl, _) = joint.derivatives(&lo);
            for l in 0..3 {
                let fd2 = (gh[l] - gl[l]) / (2.0 * e);
                assert!((fd2 - h[l * 3 + j]).abs() < 1e-5, "{j} {l}");
            }
        }
    }

    #[test]
    fn zero_cap_gives_zero() {
        let model = mrt_model(2.0, 0.9, 10.0);
        let prob = UserProblem::new(&model, &[0.1, 0.1], 0, &[1.0, 1.0], 0.0, 1.0);
        assert_eq!(prob.best_response(0.0), 0.0);
    }
}
