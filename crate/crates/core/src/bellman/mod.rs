//! The Bliss functional and numerical lower bounds for the Bellman function
//!
//! ```text
//! B(x, y, s, t) = sup { ∫_0^{t^{p/q}} u^{q/p-1} ((1/u) ∫_0^u φ)^q du :
//!                       φ >= 0 on [0, s], (1/s)∫φ = x, (1/s)∫φ^p = y }
//! ```
//!
//! on the domain `x^p <= y`, `t^{p/q} <= s`. Integrals are taken in the variable
//! `w = u^{q/p}`, where the integrand `(p/q) A(w^{p/q})^q` with `A` the running
//! average of `φ` is bounded.

pub mod simplex;
pub mod step;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use step::{Piece, StepFunction};

use crate::constants::cpq;
use crate::error::{Error, Result};
use crate::quad::{gauss_kronrod_adaptive, gauss_legendre_8};
use crate::weights::InequalityCheck;

/// Relative slack allowed on the domain constraints `x^p <= y`, `t^{p/q} <= s`.
pub const DOMAIN_SLACK: f64 = 1e-12;

const MAX_SUB_PANELS: usize = 40;

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite() && p > 1.0 && q >= p) {
        return Err(Error::InvalidExponents(format!("need 1 < p <= q < ∞, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// A point `(x, y, s, t)` of the Bellman domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanPoint {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub t: f64,
}

impl BellmanPoint {
    pub fn new(x: f64, y: f64, s: f64, t: f64) -> Self {
        Self { x, y, s, t }
    }

    /// Validates `x, y, t >= 0`, `s > 0`, `x^p <= y` and `t^{p/q} <= s`.
    pub fn check(&self, p: f64, q: f64) -> Result<()> {
        check_pq(p, q)?;
        let Self { x, y, s, t } = *self;
        if !(x.is_finite() && y.is_finite() && s.is_finite() && t.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {self:?}")));
        }
        if x < 0.0 || y < 0.0 || t < 0.0 || s <= 0.0 {
            return Err(Error::Domain(format!("need x, y, t >= 0 and s > 0, got {self:?}")));
        }
        if t.powf(p / q) > s * (1.0 + DOMAIN_SLACK) {
            return Err(Error::Domain(format!("t^(p/q) = {} exceeds s = {s}", t.powf(p / q))));
        }
        if x.powf(p) > y * (1.0 + DOMAIN_SLACK) {
            return Err(Error::Infeasible(format!("x^p = {} exceeds y = {y}", x.powf(p))));
        }
        Ok(())
    }

    /// `y / x^p`, at least 1 on the domain.
    fn moment_ratio(&self, p: f64) -> f64 {
        self.y / self.x.powf(p)
    }
}

/// `(p/q) C(p, q)^q (s y)^{q/p}`, the upper bound for `B`.
pub fn bellman_cap(pt: &BellmanPoint, p: f64, q: f64) -> Result<f64> {
    Ok(p / q * cpq(p, q)?.powf(q) * (pt.s * pt.y).powf(q / p))
}

/// Integrand `A(w^{p/q})^q` on a piece starting at `r` with prefix integral `c`
/// and value `v`.
#[inline]
fn integrand(w: f64, r: f64, c: f64, v: f64, pq: f64, q: f64) -> f64 {
    let u = w.powf(pq);
    ((c + v * (u - r)) / u).powf(q)
}

/// Shared piece walk; `panel(r, c, v, w_lo, w_hi)` integrates the integrand on
/// one piece past the first.
fn bliss_walk(lengths: &[f64], values: &[f64], t: f64, p: f64, q: f64, mut panel: impl FnMut(f64, f64, f64, f64, f64) -> f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (pq, qp) = (p / q, q / p);
    let last = lengths.len() - 1;
    let mut total = 0.0;
    let mut r = 0.0;
    let mut c = 0.0;
    let mut w_lo = 0.0;
    for (k, (&h, &v)) in lengths.iter().zip(values).enumerate() {
        let r_next = r + h;
        let mut w_hi = r_next.powf(qp);
        let done = k == last || t <= w_hi;
        if done {
            w_hi = t;
        }
        if k == 0 {
            total += pq * v.powf(q) * w_hi;
        } else if w_hi > w_lo {
            total += pq * panel(r, c, v, w_lo, w_hi);
        }
        if done {
            break;
        }
        c += v * h;
        r = r_next;
        w_lo = w_hi;
    }
    total
}

/// `∫_lo^hi u^{q/p-1} (a/u + v)^q du` for integer `q`, by binomial expansion.
/// All terms are nonnegative when `a >= 0`, which holds for nonincreasing `φ`.
fn piece_closed_form(a: f64, v: f64, lo: f64, hi: f64, q: u32, qp: f64) -> f64 {
    let (base_lo, base_hi) = (lo.powf(qp), hi.powf(qp));
    let (mut inv_lo, mut inv_hi) = (1.0, 1.0);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=q {
        let kappa = qp - j as f64;
        let term = if kappa.abs() < 1e-12 {
            (hi / lo).ln()
        } else {
            (base_hi * inv_hi - base_lo * inv_lo) / kappa
        };
        sum += binom * a.powi(j as i32) * v.powi((q - j) as i32) * term;
        binom = binom * (q - j) as f64 / (j + 1) as f64;
        inv_lo /= lo;
        inv_hi /= hi;
    }
    sum
}

/// Fixed-rule evaluation used inside the search: closed form for integer `q`,
/// otherwise eight-point Gauss–Legendre on geometric sub-panels.
fn bliss_fast(lengths: &[f64], values: &[f64], t: f64, p: f64, q: f64) -> f64 {
    let (pq, qp) = (p / q, q / p);
    let integer_q = (q.fract() == 0.0 && q <= 16.0).then_some(q as u32);
    bliss_walk(lengths, values, t, p, q, |r, c, v, w_lo, w_hi| {
        if let Some(qi) = integer_q {
            return qp * piece_closed_form(c - v * r, v, r, w_hi.powf(pq), qi, qp);
        }
        let n = ((w_hi / w_lo).log2().ceil() as usize).clamp(1, MAX_SUB_PANELS);
        let rho = (w_hi / w_lo).powf(1.0 / n as f64);
        let mut acc = 0.0;
        let mut a = w_lo;
        for j in 0..n {
            let b = if j + 1 == n { w_hi } else { a * rho };
            acc += gauss_legendre_8(|w| integrand(w, r, c, v, pq, q), a, b);
            a = b;
        }
        acc
    })
}

/// `∫_0^{t^{p/q}} u^{q/p-1} ((1/u) ∫_0^u φ)^q du`, evaluated as
/// `(p/q) ∫_0^t A(w^{p/q})^q dw` by adaptive Gauss–Kronrod to absolute tolerance `tol`.
pub fn bliss_functional(phi: &StepFunction, t: f64, p: f64, q: f64, tol: f64) -> Result<f64> {
    check_pq(p, q)?;
    let s = phi.total_length();
    if !(t.is_finite() && t >= 0.0) || t.powf(p / q) > s * (1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!("t = {t} outside [0, s^(q/p)] for s = {s}")));
    }
    let pq = p / q;
    let lengths = phi.lengths();
    let values = phi.values();
    Ok(bliss_walk(&lengths, &values, t, p, q, |r, c, v, w_lo, w_hi| {
        let share = tol * (w_hi - w_lo) / t;
        gauss_kronrod_adaptive(|w| integrand(w, r, c, v, pq, q), w_lo, w_hi, share)
    }))
}

/// `bliss_functional(φ, s^{q/p})^{1/q}` against `(p/q)^{1/q} C(p, q) ‖φ‖_p`.
pub fn bliss_inequality_check(phi: &StepFunction, p: f64, q: f64, tol: f64) -> Result<InequalityCheck> {
    check_pq(p, q)?;
    let t = phi.total_length().powf(q / p);
    let lhs = bliss_functional(phi, t, p, q, tol)?.powf(1.0 / q);
    let rhs = (p / q).powf(1.0 / q) * cpq(p, q)? * phi.p_integral(p).powf(1.0 / p);
    Ok(InequalityCheck::new(lhs, rhs))
}

/// Settings for [`bellman_lower`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanSearch {
    /// Number of pieces `m` of the trial functions.
    pub pieces: usize,
    /// Evaluations per start.
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
    /// Tolerance for the final evaluation of the witness.
    pub tol: f64,
    /// A feasible nonincreasing function with at most `pieces` pieces whose
    /// value the result must match or beat.
    pub warm_start: Option<StepFunction>,
}

impl Default for BellmanSearch {
    fn default() -> Self {
        Self { pieces: 32, budget: 2000, starts: 16, seed: 0, tol: 1e-9, warm_start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanEstimate {
    /// Bliss functional of the witness, a lower bound for `B`.
    pub value: f64,
    /// Nonincreasing, with mean `x` and p-mean `y` on `[0, s]`.
    pub witness: StepFunction,
    /// Best value of the fixed-rule objective seen by the search.
    pub search_value: f64,
    pub evaluations: usize,
}

/// Nonincreasing m-piece functions with prescribed mean and p-mean.
///
/// Lengths are `s · softmax(ℓ)`. Values are `A e^{γ ζ_i}` with
/// `ζ_1 = 0 > ζ_2 > ... > ζ_m`, gaps `e^{θ_i}`. The exponent `γ >= 0` is fixed by
/// `ln mean(e^{pγζ}) - p ln mean(e^{γζ}) = ln(y/x^p)`; the left side increases
/// from 0 to `(p-1) ln(s/h_1)`, so a solution exists iff `y/x^p < (s/h_1)^{p-1}`.
/// `A` then restores the mean.
struct Parametrization {
    x: f64,
    s: f64,
    p: f64,
    log_ratio: f64,
    m: usize,
}

impl Parametrization {
    fn decode(&self, z: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = self.m;
        let logits = &z[..m];
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return None;
        }
        let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let norm: f64 = exps.iter().sum();
        let weights: Vec<f64> = exps.iter().map(|e| e / norm).collect();
        if weights.iter().any(|&w| w <= 0.0) {
            return None;
        }
        if (self.p - 1.0) * (-weights[0].ln()) <= self.log_ratio * (1.0 + 1e-12) {
            return None;
        }
        let mut zeta = vec![0.0; m];
        for i in 1..m {
            zeta[i] = zeta[i - 1] - z[m + i - 1].clamp(-60.0, 60.0).exp();
        }
        let gamma = solve_gamma(&weights, &zeta, self.p, self.log_ratio)?;
        let shape: Vec<f64> = zeta.iter().map(|zi| (gamma * zi).exp()).collect();
        let mean: f64 = weights.iter().zip(&shape).map(|(w, e)| w * e).sum();
        let amplitude = self.x / mean;
        let values: Vec<f64> = shape.iter().map(|e| amplitude * e).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((weights.iter().map(|w| w * self.s).collect(), values))
    }
}

/// `F(γ) = ln Σ w e^{pγζ} - p ln Σ w e^{γζ}` and `F'(γ)`.
fn moment_gap(weights: &[f64], zeta: &[f64], p: f64, gamma: f64) -> (f64, f64) {
    let (mut s1, mut d1, mut sp, mut dp) = (0.0, 0.0, 0.0, 0.0);
    let integer_p = (p.fract() == 0.0 && p <= 8.0).then_some(p as i32);
    for (&w, &z) in weights.iter().zip(zeta) {
        let base = (gamma * z).exp();
        let e1 = w * base;
        let ep = w * integer_p.map_or_else(|| (p * gamma * z).exp(), |k| base.powi(k));
        s1 += e1;
        d1 += e1 * z;
        sp += ep;
        dp += ep * z;
    }
    (sp.ln() - p * s1.ln(), p * (dp / sp - d1 / s1))
}

fn solve_gamma(weights: &[f64], zeta: &[f64], p: f64, target: f64) -> Option<f64> {
    if target <= 0.0 {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while moment_gap(weights, zeta, p, hi).0 < target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return None;
        }
    }
    let mut g = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = moment_gap(weights, zeta, p, g);
        let err = f - target;
        if err.abs() <= 1e-15 * target.max(1.0) {
            return Some(g);
        }
        if err < 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        let newton = g - err / df;
        g = if df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            return Some(g);
        }
    }
    Some(g)
}

/// Geometric lengths `h_i ∝ ρ^i` with `h_1/s` at most `first`.
fn geometric_lengths(m: usize, first: f64) -> Vec<f64> {
    if first >= 1.0 / m as f64 {
        return vec![1.0 / m as f64; m];
    }
    let share = |rho: f64| (rho - 1.0) / (rho.powi(m as i32) - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while share(hi) > first {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if share(mid) > first {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = hi;
    let raw: Vec<f64> = (0..m).map(|i| rho.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

fn constant_estimate(pt: &BellmanPoint, p: f64, q: f64) -> Result<BellmanEstimate> {
    let value = p / q * pt.x.powf(q) * pt.t;
    Ok(BellmanEstimate {
        value,
        witness: StepFunction::constant(pt.s, pt.x)?,
        search_value: value,
        evaluations: 0,
    })
}

fn check_warm_start(warm: &StepFunction, pt: &BellmanPoint, p: f64, m: usize) -> Result<StepFunction> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    if !(close(warm.total_length(), pt.s) && close(warm.mean(), pt.x) && close(warm.p_mean(p), pt.y)) {
        return Err(Error::Domain("warm start does not match the point's moments".into()));
    }
    let sorted = warm.rearrange_decreasing();
    if sorted.piece_count() > m {
        return Err(Error::Domain(format!("warm start has {} distinct pieces, more than {m}", sorted.piece_count())));
    }
    Ok(sorted.refine_to(m))
}

/// Lower bound for `B(x, y, s, t)` by multi-start Nelder–Mead over nonincreasing
/// m-piece functions with exact moments. Deterministic in the seed; starts are
/// searched in parallel and merged by value, then by start index.
pub fn bellman_lower(pt: &BellmanPoint, p: f64, q: f64, search: &BellmanSearch) -> Result<BellmanEstimate> {
    pt.check(p, q)?;
    let m = search.pieces;
    if m < 2 {
        return Err(Error::Domain(format!("need at least 2 pieces, got {m}")));
    }
    if pt.x == 0.0 {
        if pt.y > 0.0 {
            return Err(Error::Infeasible("mean 0 forces φ = 0, so y must vanish".into()));
        }
        return constant_estimate(pt, p, q);
    }
    let ratio = pt.moment_ratio(p);
    if ratio <= 1.0 + DOMAIN_SLACK {
        return constant_estimate(pt, p, q);
    }
    let warm = search.warm_start.as_ref().map(|w| check_warm_start(w, pt, p, m)).transpose()?;

    let param = Parametrization { x: pt.x, s: pt.s, p, log_ratio: ratio.ln(), m };
    let first = 0.5 * ratio.powf(-1.0 / (p - 1.0));
    let base_logits: Vec<f64> = geometric_lengths(m, first).iter().map(|h| h.ln()).collect();

    let run_start = |start: usize| -> (f64, Vec<f64>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
        rng.set_stream(start as u64);
        let mut z: Vec<f64> = base_logits.clone();
        z.extend(std::iter::repeat(0.0).take(m - 1));
        if start > 0 {
            for zi in z[..m].iter_mut() {
                *zi += rng.gen_range(-0.75..0.75);
            }
            for zi in z[m..].iter_mut() {
                *zi += rng.gen_range(-1.5..1.5);
            }
        }
        for _ in 0..200 {
            if param.decode(&z).is_some() {
                break;
            }
            z[0] -= 0.5;
        }
        if pt.t == 0.0 {
            return (0.0, z, 0);
        }
        let objective = |z: &[f64]| match param.decode(z) {
            Some((h, v)) => bliss_fast(&h, &v, pt.t, p, q),
            None => f64::NEG_INFINITY,
        };
        let r = simplex::maximize(objective, &z, 0.5, search.budget.max(1));
        (r.value, r.point, r.evaluations)
    };

    let results: Vec<(f64, Vec<f64>, usize)> = (0..search.starts.max(1)).into_par_iter().map(run_start).collect();
    let evaluations = results.iter().map(|r| r.2).sum();
    let (search_value, z, _) = results
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one start");
    let (h, v) = param
        .decode(&z)
        .ok_or_else(|| Error::Infeasible("no feasible trial function found".into()))?;
    let witness = StepFunction::new(h.into_iter().zip(v).map(|(length, value)| Piece { length, value }).collect())?;
    let mut best = BellmanEstimate {
        value: bliss_functional(&witness, pt.t, p, q, search.tol)?,
        witness,
        search_value,
        evaluations,
    };
    if let Some(warm) = warm {
        let warm_value = bliss_functional(&warm, pt.t, p, q, search.tol)?;
        if warm_value > best.value {
            best.value = warm_value;
            best.witness = warm;
        }
    }
    Ok(best)
}

/// `bliss(φ̃, t0 + u) - (p/q) x^q u - bliss(φ̃, t0)`, where `φ̃` is the decreasing
/// rearrangement of `φ` and `x` its mean. Nonnegative because the running
/// averages of `φ̃` never drop below `x`.
pub fn extension_margin(phi: &StepFunction, t0: f64, u: f64, p: f64, q: f64, tol: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("extension length u = {u} must be nonnegative")));
    }
    let sorted = phi.rearrange_decreasing();
    let x = sorted.mean();
    let after = bliss_functional(&sorted, t0 + u, p, q, tol)?;
    let before = bliss_functional(&sorted, t0, p, q, tol)?;
    Ok(after - p / q * x.powf(q) * u - before)
}

/// `bliss(rearrange(φ1 ⧺ φ2), t1 + t2) - bliss(φ1, t1) - bliss(φ2, t2)`.
pub fn merge_margin(phi1: &StepFunction, t1: f64, phi2: &StepFunction, t2: f64, p: f64, q: f64, tol: f64) -> Result<f64> {
    let merged = phi1.concat(phi2).rearrange_decreasing();
    let whole = bliss_functional(&merged, t1 + t2, p, q, tol)?;
    Ok(whole - bliss_functional(phi1, t1, p, q, tol)? - bliss_functional(phi2, t2, p, q, tol)?)
}

/// Outcome of a constructive property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// Value of the constructed function at the larger point.
    pub constructed: f64,
    /// What the property requires the constructed value to reach.
    pub required: f64,
    /// `constructed - required`.
    pub margin: f64,
}

/// Checks `B(x, y, s, t) >= (p/q) x^q u + B(x, y, s, t - u)` with the witness at
/// `t - u`, rearranged and evaluated at `t`.
pub fn check_property_3prime(pt: &BellmanPoint, u: f64, p: f64, q: f64, search: &BellmanSearch) -> Result<PropertyReport> {
    pt.check(p, q)?;
    if !(0.0..=pt.t).contains(&u) {
        return Err(Error::Domain(format!("u = {u} outside [0, t = {}]", pt.t)));
    }
    let lower = BellmanPoint { t: pt.t - u, ..*pt };
    let est = bellman_lower(&lower, p, q, search)?;
    let sorted = est.witness.rearrange_decreasing();
    let constructed = bliss_functional(&sorted, pt.t, p, q, search.tol)?;
    let required = p / q * pt.x.powf(q) * u + bliss_functional(&sorted, lower.t, p, q, search.tol)?;
    Ok(PropertyReport { constructed, required, margin: constructed - required })
}

/// The parent `(x, y, s, t)` of two points: lengths and `t` add, `x` and `y`
/// average with weights `s_i`.
pub fn compose_parent(pt1: &BellmanPoint, pt2: &BellmanPoint) -> BellmanPoint {
    let s = pt1.s + pt2.s;
    BellmanPoint {
        x: (pt1.s * pt1.x + pt2.s * pt2.x) / s,
        y: (pt1.s * pt1.y + pt2.s * pt2.y) / s,
        s,
        t: pt1.t + pt2.t,
    }
}

/// Checks `B(parent) >= B(pt1) + B(pt2)` by merging the two witnesses.
pub fn check_property_3doubleprime(
    parent: &BellmanPoint,
    pt1: &BellmanPoint,
    pt2: &BellmanPoint,
    p: f64,
    q: f64,
    search: &BellmanSearch,
) -> Result<PropertyReport> {
    pt1.check(p, q)?;
    pt2.check(p, q)?;
    parent.check(p, q)?;
    let expected = compose_parent(pt1, pt2);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
    if !(close(parent.s, expected.s) && close(parent.x, expected.x) && close(parent.y, expected.y) && close(parent.t, expected.t)) {
        return Err(Error::IncompatibleSplit(format!("{parent:?} is not composed of {pt1:?} and {pt2:?}")));
    }
    let e1 = bellman_lower(pt1, p, q, search)?;
    let e2 = bellman_lower(pt2, p, q, search)?;
    let merged = e1.witness.concat(&e2.witness).rearrange_decreasing();
    let constructed = bliss_functional(&merged, parent.t.min(pt1.t + pt2.t), p, q, search.tol)?;
    let required = e1.value + e2.value;
    Ok(PropertyReport { constructed, required, margin: constructed - required })
}
