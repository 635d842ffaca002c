//! The sharp constant `C(p, q)` and exponent bookkeeping.
//!
//! ```text
//! C(p, q) = (p-1)^(-1/q) [ Γ(pq/(q-p)) / (Γ(q/(q-p)) Γ(p(q-1)/(q-p))) ]^(1/p - 1/q),   p < q
//! C(p, p) = p / (p-1)
//! ```
//!
//! The bracket is evaluated through log-Gamma. Its largest argument `pq/(q-p)`
//! blows up near the diagonal, but the outer exponent `1/p - 1/q = 1/(pq/(q-p))`
//! shrinks at the same rate, so the log-domain evaluation stays accurate until
//! `q - p` is below [`DIAGONAL_GAP`], where the exact limit takes over.

use serde::Serialize;

use crate::error::{Error, Result};

/// Below this gap `q - p` the diagonal value `p/(p-1)` is returned.
pub const DIAGONAL_GAP: f64 = 1e-6;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_series(z: f64) -> f64 {
    LANCZOS_COEF[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS_COEF[0], |acc, (i, c)| acc + c / (z + (i + 1) as f64))
}

/// `ln Γ(z)` for `z > 0` (Lanczos, g = 7).
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + lanczos_series(z).ln()
}

/// `Γ(z)` evaluated directly; overflows to infinity past `z ≈ 171.6`.
pub fn gamma(z: f64) -> f64 {
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * z).sin() * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * std::f64::consts::PI).sqrt() * half * (-t).exp() * half * lanczos_series(z)
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite() && p > 1.0 && q >= p) {
        return Err(Error::InvalidExponents(format!("need 1 < p <= q < ∞, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// Gamma arguments `(pq/(q-p), q/(q-p), p(q-1)/(q-p))` of the bracket.
fn gamma_arguments(p: f64, q: f64) -> (f64, f64, f64) {
    let gap = q - p;
    (p * q / gap, q / gap, p * (q - 1.0) / gap)
}

/// The sharp constant `C(p, q)`.
pub fn cpq(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    if q - p < DIAGONAL_GAP {
        return Ok(p / (p - 1.0));
    }
    let (a, b, c) = gamma_arguments(p, q);
    let log_bracket = ln_gamma(a) - ln_gamma(b) - ln_gamma(c);
    Ok((-(p - 1.0).ln() / q + log_bracket * (1.0 / p - 1.0 / q)).exp())
}

/// `C(p, q)` through direct Gamma values; `None` when a Gamma value overflows
/// or `p = q`.
pub fn cpq_direct(p: f64, q: f64) -> Result<Option<f64>> {
    check_pq(p, q)?;
    if q == p {
        return Ok(None);
    }
    let (a, b, c) = gamma_arguments(p, q);
    let bracket = gamma(a) / (gamma(b) * gamma(c));
    if !bracket.is_finite() || bracket <= 0.0 {
        return Ok(None);
    }
    Ok(Some((p - 1.0).powf(-1.0 / q) * bracket.powf(1.0 / p - 1.0 / q)))
}

/// `α >= 1/p - 1/q`: the range where `C(p, q)` is optimal.
pub fn sharpness_regime(p: f64, q: f64, alpha: f64) -> bool {
    alpha >= 1.0 / p - 1.0 / q - 1e-12
}

/// `p' = p/(p-1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// A validated exponent triple with its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub p_prime: f64,
    pub c_pq: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<Self> {
        check_pq(p, q)?;
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidExponents(format!("α = {alpha} must lie in [0, 1)")));
        }
        Ok(Self { p, q, alpha, p_prime: conjugate(p), c_pq: cpq(p, q)? })
    }

    pub fn sharp_regime(&self) -> bool {
        sharpness_regime(self.p, self.q, self.alpha)
    }

    /// `1 - p'`, the exponent turning `v` into its dual weight.
    pub fn dual_exponent(&self) -> f64 {
        1.0 - self.p_prime
    }
}
