//! The power-law extremal construction on the prefix tree of `[0, 1]`.
//!
//! With `e_u = q(1-α)/p` and `e_v = α(p-1) + 1` the weights are
//!
//! ```text
//! u(ω) = ((1-α)q/p) ω^{e_u - 1},   v(ω) = (1-α)^{1-p} ω^{α(p-1)},   σ(ω) = (1-α) ω^{-α}
//! ```
//!
//! and every quantity is computed from their antiderivatives, so `σ` is never
//! evaluated at its singularity.

use serde::{Deserialize, Serialize};

use crate::bellman::{bliss_functional, StepFunction};
use crate::constants::{cpq, sharpness_regime, Exponents};
use crate::error::{Error, Result};
use crate::maximal::{check_alpha, frac_maximal, SimpleFunction};
use crate::quad::gauss_kronrod_adaptive;
use crate::tree::{Interval, NodeId, TreeSpace};
use crate::weights::{testing_from_integrals, weighted_lp_norm, WeightPair};

/// Closed-form integrals of the extremal weights over `[a, b] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalWeights {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl ExtremalWeights {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        Exponents::new(p, q, alpha)?;
        Ok(Self { alpha, p, q })
    }

    fn u_exponent(&self) -> f64 {
        self.q * (1.0 - self.alpha) / self.p
    }

    fn v_exponent(&self) -> f64 {
        self.alpha * (self.p - 1.0) + 1.0
    }

    pub fn u_integral(&self, a: f64, b: f64) -> f64 {
        let e = self.u_exponent();
        b.powf(e) - a.powf(e)
    }

    pub fn sigma_integral(&self, a: f64, b: f64) -> f64 {
        let e = 1.0 - self.alpha;
        b.powf(e) - a.powf(e)
    }

    pub fn v_integral(&self, a: f64, b: f64) -> f64 {
        let e = self.v_exponent();
        (1.0 - self.alpha).powf(1.0 - self.p) * (b.powf(e) - a.powf(e)) / e
    }

    fn on_interval(&self, interval: &Interval, integral: impl Fn(&Self, f64, f64) -> f64) -> f64 {
        integral(self, interval.start(), interval.end())
    }
}

fn intervals(tree: &TreeSpace) -> Result<Vec<Interval>> {
    tree.nodes()
        .iter()
        .map(|node| node.interval.ok_or(Error::MissingInterval(node.id)))
        .collect()
}

/// Leaf values chosen so that value × leaf mass is the exact integral of `u`,
/// `v` and `σ` over the leaf interval.
pub fn extremal_pair<'t>(tree: &'t TreeSpace, alpha: f64, p: f64, q: f64) -> Result<WeightPair<'t>> {
    let w = ExtremalWeights::new(alpha, p, q)?;
    let iv = intervals(tree)?;
    let leaf_values = |integral: fn(&ExtremalWeights, f64, f64) -> f64| -> Result<SimpleFunction<'t>> {
        let values = tree
            .leaves()
            .iter()
            .map(|&id| w.on_interval(&iv[id], integral) / tree.mass(id))
            .collect();
        SimpleFunction::new(tree, values)
    };
    let u = leaf_values(ExtremalWeights::u_integral)?;
    let v = leaf_values(ExtremalWeights::v_integral)?;
    let sigma = leaf_values(ExtremalWeights::sigma_integral)?;
    WeightPair::from_parts(u, v, sigma, p)
}

/// `F(a, b) = (b-a)^{α-1} (b^{1-α} - a^{1-α})`, the fractional `σ`-average of `[a, b]`.
pub fn fractional_sigma_average(a: f64, b: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::Domain(format!("need 0 <= a < b, got a = {a}, b = {b}")));
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    Ok((b - a).powf(alpha - 1.0) * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)))
}

fn check_technical(x: f64, s: f64) -> Result<()> {
    if !(x > 1.0 && x.is_finite() && s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("need x > 1 and s > 0, got x = {x}, s = {s}")));
    }
    Ok(())
}

/// `D(x) = (x^{1/s} + 1) ln x - 2s (x^{1/s} - 1)`, nonnegative for `x > 1`, `s > 0`.
pub fn lemma_technical(x: f64, s: f64) -> Result<f64> {
    check_technical(x, s)?;
    let lx = x.ln();
    let em1 = (lx / s).exp_m1();
    Ok((em1 + 2.0) * lx - 2.0 * s * em1)
}

/// `E(x) = (1/s) x^{1/s} ln x + 1 - x^{1/s}`, with `D'(x) = E(x)/x`.
pub fn lemma_technical_slope(x: f64, s: f64) -> Result<f64> {
    check_technical(x, s)?;
    let lx = x.ln();
    let em1 = (lx / s).exp_m1();
    Ok((em1 + 1.0) * lx / s - em1)
}

/// `(1-1/p)/(x^{1-α}-1) + (1/p)/(x^{q(1-α)/p}-1) - 1/(x-1)`: nonnegative when the
/// prefix-tree weights satisfy the testing condition on `(ℓ, r]` with `x = r/ℓ`.
pub fn jensen_route_margin(x: f64, p: f64, q: f64, alpha: f64) -> Result<f64> {
    Exponents::new(p, q, alpha)?;
    if !(x > 1.0 && x.is_finite()) {
        return Err(Error::Domain(format!("need x > 1, got {x}")));
    }
    let lx = x.ln();
    let g = |e: f64| 1.0 / (e * lx).exp_m1();
    Ok((1.0 - 1.0 / p) * g(1.0 - alpha) + g(q * (1.0 - alpha) / p) / p - g(1.0))
}

/// One node of the extremal testing report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalRow {
    pub node: NodeId,
    pub interval: String,
    pub is_prefix: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalTesting {
    pub constant: f64,
    pub witness: NodeId,
    pub rows: Vec<ExtremalRow>,
}

/// Testing constant of the extremal weights from closed-form node integrals.
pub fn verify_extremal_testing(tree: &TreeSpace, alpha: f64, p: f64, q: f64) -> Result<ExtremalTesting> {
    let w = ExtremalWeights::new(alpha, p, q)?;
    let iv = intervals(tree)?;
    let sigma_node: Vec<f64> = iv.iter().map(|i| w.on_interval(i, ExtremalWeights::sigma_integral)).collect();
    let u_leaf: Vec<f64> = tree.leaves().iter().map(|&id| w.on_interval(&iv[id], ExtremalWeights::u_integral)).collect();
    let report = testing_from_integrals(tree, &sigma_node, &u_leaf, alpha, p, q);
    let rows = report
        .nodes
        .iter()
        .map(|n| ExtremalRow {
            node: n.node,
            interval: iv[n.node].to_string(),
            is_prefix: iv[n.node].is_prefix(),
            lhs: n.lhs,
            rhs: n.rhs,
            ratio: n.ratio,
        })
        .collect();
    Ok(ExtremalTesting { constant: report.constant, witness: report.witness, rows })
}

/// Prefix node `[0, hi/denom]` for each leaf slot, where `hi/denom` is the
/// right end of the leaf.
fn prefix_cover(tree: &TreeSpace) -> Result<Vec<NodeId>> {
    let iv = intervals(tree)?;
    let mut by_end = std::collections::HashMap::new();
    for (id, i) in iv.iter().enumerate() {
        if i.is_prefix() {
            by_end.insert((i.hi, i.denom), id);
        }
    }
    tree.leaves()
        .iter()
        .map(|&leaf| {
            let i = iv[leaf];
            by_end
                .get(&(i.hi, i.denom))
                .copied()
                .ok_or_else(|| Error::Domain(format!("no prefix node ends where leaf {leaf} ends")))
        })
        .collect()
}

/// The lower envelope `μ([0, r])^{α-1} ∫_0^r φ dμ` with `[0, r]` the smallest
/// prefix node containing the leaf. Never exceeds `M^α_T φ`.
pub fn lower_bound_trial<'t>(tree: &'t TreeSpace, phi: &SimpleFunction<'t>, alpha: f64) -> Result<SimpleFunction<'t>> {
    check_alpha(alpha)?;
    if !phi.is_nonnegative() {
        return Err(Error::Domain("trial function must be nonnegative".into()));
    }
    let cover = prefix_cover(tree)?;
    let integrals = phi.node_integrals();
    let values = cover
        .iter()
        .map(|&id| tree.mass(id).powf(alpha - 1.0) * integrals[id])
        .collect();
    SimpleFunction::new(tree, values)
}

/// Trial family and ascent settings for [`best_ratio_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSearch {
    /// Exponents `γ` of the power profiles `((k+1)/N)^{-γ}` scanned on `[0, gamma_max]`.
    pub gamma_max: f64,
    pub gamma_steps: usize,
    /// Ratio evaluations allowed for the coordinate ascent.
    pub budget: usize,
    /// Tail-scaling knots per doubling of the leaf index.
    pub knots_per_octave: usize,
}

impl Default for TrialSearch {
    fn default() -> Self {
        Self { gamma_max: 3.0, gamma_steps: 30, budget: 3000, knots_per_octave: 4 }
    }
}

/// `‖M^α_T φ‖_{L^q(u)} / ‖φ‖_{L^p(v)}` for nonincreasing leaf values on the
/// prefix tree. For such `φ` the best node containing leaf `k` is a prefix
/// `[0, j/N]` with `j > k`, so the maximal function is a suffix maximum.
struct PrefixRatio {
    prefix_factor: Vec<f64>,
    u_cell: Vec<f64>,
    v_cell: Vec<f64>,
    p: f64,
    q: f64,
}

impl PrefixRatio {
    fn new(n: usize, w: &ExtremalWeights) -> Self {
        let nf = n as f64;
        let cell = |k: usize| (k as f64 / nf, (k + 1) as f64 / nf);
        Self {
            prefix_factor: (1..=n).map(|j| (j as f64 / nf).powf(w.alpha - 1.0) / nf).collect(),
            u_cell: (0..n).map(|k| w.u_integral(cell(k).0, cell(k).1)).collect(),
            v_cell: (0..n).map(|k| w.v_integral(cell(k).0, cell(k).1)).collect(),
            p: w.p,
            q: w.q,
        }
    }

    fn ratio(&self, phi: &[f64]) -> f64 {
        let n = phi.len();
        let mut prefix = vec![0.0; n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += phi[j];
            prefix[j] = acc * self.prefix_factor[j];
        }
        let (mut num, mut den, mut m) = (0.0, 0.0, 0.0f64);
        for k in (0..n).rev() {
            m = m.max(prefix[k]);
            num += m.powf(self.q) * self.u_cell[k];
            den += phi[k].powf(self.p) * self.v_cell[k];
        }
        num.powf(1.0 / self.q) / den.powf(1.0 / self.p)
    }
}

fn from_log_gaps(gaps: &[f64]) -> Vec<f64> {
    let mut level = 0.0;
    gaps.iter()
        .map(|g| {
            level -= g;
            level.exp()
        })
        .collect()
}

fn knots(n: usize, per_octave: usize) -> Vec<usize> {
    let growth = 2f64.powf(1.0 / per_octave.max(1) as f64);
    let mut out = Vec::new();
    let mut i = 1usize;
    while i < n {
        out.push(i);
        i = (i + 1).max((i as f64 * growth).ceil() as usize);
    }
    out
}

/// Best trial found at one `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestRatio {
    pub n: usize,
    /// Ratio of the witness, evaluated on the tree.
    pub ratio: f64,
    /// Testing constant of the extremal pair.
    pub testing: f64,
    /// `C(p, q) · testing`.
    pub bound: f64,
    /// Best power-profile exponent.
    pub gamma: f64,
    /// Nonincreasing leaf values of the witness.
    pub witness: Vec<f64>,
    pub evaluations: usize,
}

/// Maximizes the operator ratio for the extremal pair on the prefix tree with
/// `N` cells over nonincreasing trial functions: the best power profile, then
/// coordinate ascent by tail scaling. A coarser witness (on `N/r` cells) may be
/// passed in; it is refined and used as a start, so the result never falls
/// below its ratio.
pub fn best_ratio_at(n: usize, alpha: f64, p: f64, q: f64, search: &TrialSearch, coarse: Option<&[f64]>) -> Result<BestRatio> {
    let e = Exponents::new(p, q, alpha)?;
    let tree = TreeSpace::build_sharpness_tree(n)?;
    let w = ExtremalWeights::new(alpha, p, q)?;
    let testing = verify_extremal_testing(&tree, alpha, p, q)?.constant;
    let eval = PrefixRatio::new(n, &w);
    let evaluations = std::cell::Cell::new(0usize);
    let score = |gaps: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        eval.ratio(&from_log_gaps(gaps))
    };

    let power_gaps = |gamma: f64| -> Vec<f64> {
        (0..n).map(|i| if i == 0 { 0.0 } else { gamma * ((i + 1) as f64 / i as f64).ln() }).collect()
    };
    let steps = search.gamma_steps.max(1);
    let (mut gamma, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..=steps {
        let g = search.gamma_max * k as f64 / steps as f64;
        let r = score(&power_gaps(g));
        if r > best {
            best = r;
            gamma = g;
        }
    }
    let h = search.gamma_max / steps as f64;
    let (mut lo, mut hi) = ((gamma - h).max(0.0), (gamma + h).min(search.gamma_max));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let a = hi - inv_phi * (hi - lo);
        let b = lo + inv_phi * (hi - lo);
        let (ra, rb) = (score(&power_gaps(a)), score(&power_gaps(b)));
        for (g, r) in [(a, ra), (b, rb)] {
            if r > best {
                best = r;
                gamma = g;
            }
        }
        if ra >= rb {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mut gaps = power_gaps(gamma);

    if let Some(coarse) = coarse {
        if coarse.is_empty() || n % coarse.len() != 0 || coarse.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::ShapeMismatch(format!("coarse witness of length {} does not refine to {n} cells", coarse.len())));
        }
        let r = n / coarse.len();
        let refined: Vec<f64> = (0..n).map(|k| coarse[k / r]).collect();
        let refined_gaps: Vec<f64> = (0..n)
            .map(|k| if k == 0 { 0.0 } else { (refined[k - 1].ln() - refined[k].ln()).max(0.0) })
            .collect();
        let rr = score(&refined_gaps);
        if rr > best {
            best = rr;
            gaps = refined_gaps;
        }
    }

    let knots = knots(n, search.knots_per_octave);
    let mut step = vec![0.5f64; knots.len()];
    let start_evals = evaluations.get();
    'ascent: while step.iter().any(|&s| s > 1e-9) {
        for (slot, &i) in knots.iter().enumerate() {
            if step[slot] <= 1e-9 {
                continue;
            }
            let original = gaps[i];
            let mut improved = false;
            for candidate in [original + step[slot], (original - step[slot]).max(0.0)] {
                if candidate == original {
                    continue;
                }
                if evaluations.get() - start_evals >= search.budget {
                    gaps[i] = original;
                    break 'ascent;
                }
                gaps[i] = candidate;
                let r = score(&gaps);
                if r > best {
                    best = r;
                    improved = true;
                    break;
                }
            }
            if !improved {
                gaps[i] = original;
                step[slot] *= 0.5;
            }
        }
    }

    let witness = from_log_gaps(&gaps);
    let pair = extremal_pair(&tree, alpha, p, q)?;
    let phi = SimpleFunction::new(&tree, witness.clone())?;
    let m = frac_maximal(&phi, alpha)?;
    let ratio = weighted_lp_norm(&m, &pair.u, q) / weighted_lp_norm(&phi, &pair.v, p);
    Ok(BestRatio { n, ratio, testing, bound: e.c_pq * testing, gamma, witness, evaluations: evaluations.get() })
}

/// One point of the ratio-versus-N curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub best_ratio: f64,
    pub bound: f64,
    /// `C(p, q) - best_ratio`.
    pub gap: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessCurve {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub c_pq: f64,
    /// Whether `α >= 1/p - 1/q`; outside that range the curve is exploratory.
    pub sharp_regime: bool,
    pub points: Vec<CurvePoint>,
}

/// Runs [`best_ratio_at`] along `ns`, feeding each witness to the next `N`
/// whenever it refines evenly.
pub fn ratio_experiment(ns: &[usize], alpha: f64, p: f64, q: f64, search: &TrialSearch) -> Result<SharpnessCurve> {
    let c_pq = cpq(p, q)?;
    let mut points = Vec::with_capacity(ns.len());
    let mut previous: Option<Vec<f64>> = None;
    for &n in ns {
        let coarse = previous.as_deref().filter(|w| n % w.len() == 0);
        let best = best_ratio_at(n, alpha, p, q, search, coarse)?;
        points.push(CurvePoint { n, best_ratio: best.ratio, bound: best.bound, gap: c_pq - best.ratio, gamma: best.gamma });
        previous = Some(best.witness);
    }
    Ok(SharpnessCurve { alpha, p, q, c_pq, sharp_regime: sharpness_regime(p, q, alpha), points })
}

/// Both sides of the substitution `t = r^β`, `β = 1/(1-α)`, `f(r) = φ(r^β) r^{β-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    /// `∫_0^1 (t^{α-1} ∫_0^t φ)^q u(t) dt`
    pub weighted: f64,
    /// `β^q (q/p) ∫_0^1 r^{q/p-1} ((1/r)∫_0^r f)^q dr`, with `∫_0^r f` by quadrature of `f`.
    pub substituted: f64,
    /// `∫_0^1 φ^p v`
    pub weighted_norm: f64,
    /// `β^p ∫_0^1 f^p`
    pub substituted_norm: f64,
    /// Full-line Bliss ratio of `φ` and of `φ(·/T)`.
    pub bliss_ratio: f64,
    pub dilated_bliss_ratio: f64,
}

impl BetaReport {
    pub fn identity_error(&self) -> f64 {
        (self.weighted - self.substituted).abs()
    }

    pub fn norm_error(&self) -> f64 {
        (self.weighted_norm - self.substituted_norm).abs()
    }

    pub fn dilation_error(&self) -> f64 {
        (self.bliss_ratio - self.dilated_bliss_ratio).abs()
    }
}

/// `(∫_0^∞ u^{q/p-1} A(u)^q du)^{1/q} / ‖φ‖_p` for `φ` extended by zero past `s`.
/// Past `s` the running average is `∫φ / u`, whose tail integrates in closed form.
pub fn full_line_bliss_ratio(phi: &StepFunction, p: f64, q: f64, tol: f64) -> Result<f64> {
    let s = phi.total_length();
    let inner = bliss_functional(phi, s.powf(q / p), p, q, tol)?;
    let tail = phi.integral().powf(q) * s.powf(q / p - q) / (q - q / p);
    Ok((inner + tail).powf(1.0 / q) / phi.p_integral(p).powf(1.0 / p))
}

/// Checks the change of variables that turns the weighted inequality on the
/// prefix tree into Bliss' inequality, the matching identity for the norms, and
/// dilation invariance (`T = dilation`) of the full-line Bliss ratio.
pub fn beta_substitution_check(phi: &StepFunction, alpha: f64, p: f64, q: f64, tol: f64, dilation: f64) -> Result<BetaReport> {
    let w = ExtremalWeights::new(alpha, p, q)?;
    if (phi.total_length() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("φ must live on [0, 1], got length {}", phi.total_length())));
    }
    let beta = 1.0 / (1.0 - alpha);
    let e_u = w.u_exponent();
    let mut ends = Vec::with_capacity(phi.piece_count() + 1);
    ends.push(0.0);
    let mut r = 0.0;
    for piece in phi.pieces() {
        r += piece.length;
        ends.push(r.min(1.0));
    }

    // In W = t^{e_u} the weight u dt becomes dW.
    let mut weighted = 0.0;
    for k in 1..ends.len() {
        let (a, b) = (ends[k - 1].powf(e_u), ends[k].powf(e_u));
        weighted += gauss_kronrod_adaptive(
            |big_w| {
                let t = big_w.powf(1.0 / e_u);
                if t <= 0.0 {
                    return 0.0;
                }
                (t.powf(alpha - 1.0) * phi.cumulative(t)).powf(q)
            },
            a,
            b,
            tol * (b - a),
        );
    }

    // f(r) = φ(r^β) r^{β-1}; its pieces end at r_k^{1/β}.
    let f = |r: f64| phi.value_at(r.powf(beta)) * r.powf(beta - 1.0);
    let f_ends: Vec<f64> = ends.iter().map(|e| e.powf(1.0 / beta)).collect();
    let f_integral = |upto: f64| -> f64 {
        let mut acc = 0.0;
        for k in 1..f_ends.len() {
            let (a, b) = (f_ends[k - 1], f_ends[k].min(upto));
            if b <= a {
                break;
            }
            acc += gauss_kronrod_adaptive(&f, a, b, 1e-2 * tol * (b - a));
        }
        acc
    };
    // In w = r^{q/p}: ∫_0^1 r^{q/p-1} A_f(r)^q dr = (p/q) ∫_0^1 A_f(w^{p/q})^q dw.
    let mut bliss_f = 0.0;
    for k in 1..f_ends.len() {
        let (a, b) = (f_ends[k - 1].powf(q / p), f_ends[k].powf(q / p));
        bliss_f += gauss_kronrod_adaptive(
            |wv| {
                let r = wv.powf(p / q);
                if r <= 0.0 {
                    return (f(0.0)).powf(q);
                }
                (f_integral(r) / r).powf(q)
            },
            a,
            b,
            tol * (b - a),
        );
    }
    let substituted = beta.powf(q) * bliss_f;

    let weighted_norm: f64 = (1..ends.len())
        .map(|k| phi.pieces()[k - 1].value.powf(p) * w.v_integral(ends[k - 1], ends[k]))
        .sum();
    let mut f_p = 0.0;
    for k in 1..f_ends.len() {
        let (a, b) = (f_ends[k - 1], f_ends[k]);
        f_p += gauss_kronrod_adaptive(|r| f(r).powf(p), a, b, tol * (b - a));
    }
    let substituted_norm = beta.powf(p) * f_p;

    let bliss_ratio = full_line_bliss_ratio(phi, p, q, tol)?;
    let dilated_bliss_ratio = full_line_bliss_ratio(&phi.dilate(dilation)?, p, q, tol)?;
    Ok(BetaReport { weighted, substituted, weighted_norm, substituted_norm, bliss_ratio, dilated_bliss_ratio })
}

/// One shrinking prefix node under flat weights `u = v = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyRow {
    pub mass: f64,
    /// `μ(Q)^{α+1/q-1/p}`, the lower bound for the ratio of `χ_Q`.
    pub predicted: f64,
    /// `‖M^α_T χ_Q‖_q / ‖χ_Q‖_p` on the tree.
    pub ratio: f64,
}

/// Indicator ratios of the prefix nodes `[0, j/N]` under flat weights. They grow
/// without bound as `μ(Q) → 0` exactly when `α < 1/p - 1/q`.
pub fn indicator_degeneracy(n: usize, alpha: f64, p: f64, q: f64) -> Result<Vec<DegeneracyRow>> {
    Exponents::new(p, q, alpha)?;
    let tree = TreeSpace::build_sharpness_tree(n)?;
    let one = SimpleFunction::constant(&tree, 1.0);
    let exponent = alpha + 1.0 / q - 1.0 / p;
    (0..n)
        .map(|id| {
            let chi = SimpleFunction::indicator(&tree, id)?;
            let m = frac_maximal(&chi, alpha)?;
            let mass = tree.mass(id);
            Ok(DegeneracyRow {
                mass,
                predicted: mass.powf(exponent),
                ratio: weighted_lp_norm(&m, &one, q) / weighted_lp_norm(&chi, &one, p),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremal_integrals() {
        let w = ExtremalWeights::new(0.3, 2.0, 3.0).unwrap();
        assert!((w.u_integral(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((w.sigma_integral(0.0, 1.0) - 1.0).abs() < 1e-15);
        let (a, b) = (0.25, 0.5);
        let e = 3.0 * 0.7 / 2.0;
        assert!((w.u_integral(a, b) - (f64::powf(b, e) - f64::powf(a, e))).abs() < 1e-15);
        let r = 0.37;
        assert!((w.sigma_integral(0.0, r) - f64::powf(r, 0.7)).abs() < 1e-15);
        // Additivity over a partition.
        let cuts = [0.0, 0.1, 0.35, 0.6, 1.0];
        for f in [ExtremalWeights::u_integral, ExtremalWeights::v_integral, ExtremalWeights::sigma_integral] {
            let parts: f64 = cuts.windows(2).map(|c| f(&w, c[0], c[1])).sum();
            assert!((parts - f(&w, 0.0, 1.0)).abs() < 1e-12);
        }
        // v by quadrature of its density.
        let v = |t: f64| f64::powf(0.7, -1.0) * t.powf(0.3);
        let numeric = gauss_kronrod_adaptive(v, 0.2, 0.9, 1e-13);
        assert!((numeric - w.v_integral(0.2, 0.9)).abs() < 1e-11);
    }

    #[test]
    fn extremal_pair_masses() {
        let tree = TreeSpace::build_sharpness_tree(8).unwrap();
        let pair = extremal_pair(&tree, 0.0, 2.0, 2.0).unwrap();
        for x in pair.u.values().iter().chain(pair.sigma.values()).chain(pair.v.values()) {
            assert!((x - 1.0).abs() < 1e-12);
        }
        let pair = extremal_pair(&tree, 0.4, 2.0, 3.0).unwrap();
        let w = ExtremalWeights::new(0.4, 2.0, 3.0).unwrap();
        let sigma_nodes = pair.sigma.node_integrals();
        for j in 0..8 {
            let r = tree.nodes()[j].interval.unwrap().end();
            assert!((sigma_nodes[j] - f64::powf(r, 0.6)).abs() < 1e-12);
        }
        let last = *tree.leaves().last().unwrap();
        let i = tree.nodes()[last].interval.unwrap();
        assert!((pair.u.values()[7] * tree.mass(last) - w.u_integral(i.start(), i.end())).abs() < 1e-15);
        assert!(matches!(
            extremal_pair(&TreeSpace::build_uniform_dyadic(2), 0.3, 2.0, 2.0),
            Err(Error::MissingInterval(0))
        ));
    }

    #[test]
    fn f_examples() {
        for b in [0.1, 0.5, 1.0] {
            assert_eq!(fractional_sigma_average(0.0, b, 0.3).unwrap(), 1.0);
        }
        let v = fractional_sigma_average(0.25, 1.0, 0.5).unwrap();
        assert!((v - 0.75f64.powf(-0.5) * 0.5).abs() < 1e-15);
        assert!((v - 0.577_35).abs() < 1e-5);
        assert!(fractional_sigma_average(0.5, 0.5, 0.5).is_err());
        for alpha in [0.1, 0.5, 0.9] {
            for k in 1..20 {
                let b = k as f64 / 20.0;
                for i in 0..k {
                    let a = i as f64 / 20.0;
                    for l in 0..=i {
                        let ell = l as f64 / 20.0;
                        let fa = fractional_sigma_average(a, b, alpha).unwrap();
                        let fl = fractional_sigma_average(ell, b, alpha).unwrap();
                        assert!(fa <= fl + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn technical_lemma() {
        let d = lemma_technical(std::f64::consts::E, 1.0).unwrap();
        assert!((d - (3.0 - std::f64::consts::E)).abs() < 1e-14);
        assert!(lemma_technical(1.0 + 1e-9, 0.7).unwrap().abs() < 1e-15);
        assert!(lemma_technical(1.0, 1.0).is_err());
        for i in 1..=50 {
            let x = 1.0 + 999.0 * (i as f64 / 50.0).powi(3);
            for j in 0..=20 {
                let s = 10f64.powf(-2.0 + 4.0 * j as f64 / 20.0);
                assert!(lemma_technical(x, s).unwrap() >= -1e-12);
                assert!(lemma_technical_slope(x, s).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn jensen_route() {
        for &(p, q) in &[(2.0, 4.0), (1.5, 3.0), (3.0, 3.5)] {
            let a0 = 1.0 / p - 1.0 / q;
            for k in 1..200 {
                let x = 1.0 + 0.05 * k as f64;
                let m0 = jensen_route_margin(x, p, q, a0).unwrap();
                assert!(m0 >= -1e-12 / (x - 1.0));
                let m1 = jensen_route_margin(x, p, q, (a0 + 0.2).min(0.99)).unwrap();
                assert!(m1 >= m0 - 1e-12);
            }
        }
    }

    #[test]
    fn extremal_testing_at_small_n() {
        for &(alpha, p, q) in &[(0.5, 2.0, 2.0), (0.25, 2.0, 4.0), (0.1, 2.0, 2.0)] {
            let tree = TreeSpace::build_sharpness_tree(16).unwrap();
            let rep = verify_extremal_testing(&tree, alpha, p, q).unwrap();
            assert!(rep.constant <= 1.0 + 1e-9);
            for row in &rep.rows {
                if row.is_prefix {
                    assert!((row.ratio - 1.0).abs() < 1e-10);
                    let r = tree.nodes()[row.node].interval.unwrap().end();
                    assert!((row.lhs - r.powf((1.0 - alpha) / p)).abs() < 1e-12);
                } else {
                    assert!(row.ratio <= 1.0 + 1e-12);
                }
            }
            // Same constant from the leaf-averaged weights.
            let pair = extremal_pair(&tree, alpha, p, q).unwrap();
            let l = crate::weights::testing_constant(&pair, alpha, q).unwrap().constant;
            assert!((l - rep.constant).abs() < 1e-10);
        }
    }

    #[test]
    fn lower_envelope() {
        let tree = TreeSpace::build_sharpness_tree(8).unwrap();
        let one = SimpleFunction::constant(&tree, 1.0);
        let env = lower_bound_trial(&tree, &one, 0.5).unwrap();
        for k in 0..8 {
            assert!((env.values()[k] - ((k + 1) as f64 / 8.0).powf(0.5)).abs() < 1e-14);
        }
        let phi = SimpleFunction::new(&tree, vec![0.3, 2.0, 0.1, 5.0, 1.0, 0.0, 0.7, 4.0]).unwrap();
        for alpha in [0.0, 0.5, 0.9] {
            let env = lower_bound_trial(&tree, &phi, alpha).unwrap();
            let m = frac_maximal(&phi, alpha).unwrap();
            for (a, b) in env.values().iter().zip(m.values()) {
                assert!(*a <= b + 1e-14);
            }
        }
        assert!(lower_bound_trial(&TreeSpace::build_uniform_dyadic(2), &SimpleFunction::constant(&TreeSpace::build_uniform_dyadic(2), 1.0), 0.5).is_err());
    }

    #[test]
    fn prefix_ratio_matches_the_tree() {
        let n = 32;
        let (alpha, p, q) = (0.4, 2.0, 3.0);
        let tree = TreeSpace::build_sharpness_tree(n).unwrap();
        let pair = extremal_pair(&tree, alpha, p, q).unwrap();
        let w = ExtremalWeights::new(alpha, p, q).unwrap();
        let eval = PrefixRatio::new(n, &w);
        for gamma in [0.0, 0.3, 0.8, 1.5] {
            let phi: Vec<f64> = (0..n).map(|k| ((k + 1) as f64 / n as f64).powf(-gamma)).collect();
            let f = SimpleFunction::new(&tree, phi.clone()).unwrap();
            let m = frac_maximal(&f, alpha).unwrap();
            let direct = weighted_lp_norm(&m, &pair.u, q) / weighted_lp_norm(&f, &pair.v, p);
            assert!((eval.ratio(&phi) / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_curve_is_monotone_and_bounded() {
        let search = TrialSearch { budget: 300, ..TrialSearch::default() };
        let curve = ratio_experiment(&[4, 16, 64], 0.5, 2.0, 2.0, &search).unwrap();
        assert!(curve.sharp_regime);
        for pair in curve.points.windows(2) {
            assert!(pair[1].best_ratio >= pair[0].best_ratio - 1e-9);
        }
        for pt in &curve.points {
            assert!(pt.best_ratio <= pt.bound + 1e-9);
        }
    }

    #[test]
    fn beta_substitution() {
        let one = StepFunction::constant(1.0, 1.0).unwrap();
        let rep = beta_substitution_check(&one, 0.0, 2.0, 2.0, 1e-11, 10.0).unwrap();
        assert!(rep.identity_error() < 1e-9);
        let rep = beta_substitution_check(&one, 0.5, 2.0, 2.0, 1e-11, 10.0).unwrap();
        assert!(rep.identity_error() < 1e-8, "{rep:?}");
        assert!(rep.norm_error() < 1e-8);
        assert!(rep.dilation_error() < 1e-9);
        let phi = StepFunction::from_pairs(&[(0.2, 3.0), (0.3, 1.0), (0.5, 0.25)]).unwrap();
        let rep = beta_substitution_check(&phi, 0.3, 2.0, 3.0, 1e-11, 10.0).unwrap();
        assert!(rep.identity_error() < 1e-8 * rep.weighted.max(1.0), "{rep:?}");
        assert!(rep.norm_error() < 1e-8 * rep.weighted_norm.max(1.0));
        assert!(rep.dilation_error() < 1e-9);
    }

    #[test]
    fn degeneracy_below_the_sharp_range() {
        let rows = indicator_degeneracy(64, 0.05, 2.0, 4.0).unwrap();
        let small = rows.last().unwrap();
        assert!(small.ratio >= small.predicted * (1.0 - 1e-12));
        assert!(small.ratio > rows[0].ratio * 2.0);
        let sharp = indicator_degeneracy(64, 0.3, 2.0, 4.0).unwrap();
        assert!(sharp.iter().all(|r| r.predicted <= 1.0 + 1e-12));
    }
}
