//! Seeded random instances for property campaigns, with JSON dumps for replay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::maximal::SimpleFunction;
use crate::tree::{TreeDoc, TreeSpace};
use crate::weights::{
    carleson_constant, main_inequality_check_with, operator_norm_lower, testing_constant, CarlesonSequence, InequalityCheck,
    WeightPair,
};

pub const MAX_DEPTH: usize = 6;
pub const MAX_BRANCH: usize = 3;
pub const FUNCTIONS_PER_INSTANCE: usize = 20;
/// Weights are `e^U` with `U` uniform on `[-WEIGHT_LOG_RANGE, WEIGHT_LOG_RANGE]`.
pub const WEIGHT_LOG_RANGE: f64 = 2.0;

/// A random tree, exponents, weights and test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzInstance {
    pub seed: u64,
    pub tree: TreeSpace,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub functions: Vec<Vec<f64>>,
}

fn log_uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-WEIGHT_LOG_RANGE..=WEIGHT_LOG_RANGE).exp()).collect()
}

/// Samples `1 < p <= q <= 6` (with `q = p` about one time in six) and `α ∈ [0, 1)`.
pub fn random_exponents(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let p = rng.gen_range(1.05..=6.0);
    let q = if rng.gen_bool(1.0 / 6.0) { p } else { rng.gen_range(p..=6.0) };
    let alpha = rng.gen_range(0.0..0.999);
    (p, q, alpha)
}

fn random_tree(rng: &mut ChaCha8Rng) -> Result<TreeSpace> {
    let depth = rng.gen_range(1..=MAX_DEPTH);
    let branch = rng.gen_range(2..=MAX_BRANCH);
    TreeSpace::build_random_tree(rng.gen(), depth, branch)
}

/// Mixes dense positive, sparse, signed and indicator-like functions.
fn random_function(rng: &mut ChaCha8Rng, tree: &TreeSpace) -> Vec<f64> {
    let n = tree.leaf_count();
    match rng.gen_range(0..4) {
        0 => log_uniform(rng, n),
        1 => (0..n).map(|_| if rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(0.0..5.0) }).collect(),
        2 => (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        _ => {
            let node = rng.gen_range(0..tree.node_count());
            let span = tree.leaf_span(node);
            let c = rng.gen_range(0.1..10.0);
            (0..n).map(|i| if span.contains(&i) { c } else { 0.0 }).collect()
        }
    }
}

impl FuzzInstance {
    pub fn generate(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q, alpha) = random_exponents(&mut rng);
        let tree = random_tree(&mut rng)?;
        let n = tree.leaf_count();
        let u = log_uniform(&mut rng, n);
        let v = log_uniform(&mut rng, n);
        let functions = (0..FUNCTIONS_PER_INSTANCE).map(|_| random_function(&mut rng, &tree)).collect();
        Ok(Self { seed, tree, p, q, alpha, u, v, functions })
    }

    /// As [`FuzzInstance::generate`] with given exponents and tree depth at most `depth`.
    pub fn with_exponents(seed: u64, p: f64, q: f64, alpha: f64, depth: usize) -> Result<Self> {
        crate::constants::Exponents::new(p, q, alpha)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = TreeSpace::build_random_tree(rng.gen(), depth, MAX_BRANCH)?;
        let n = tree.leaf_count();
        let u = log_uniform(&mut rng, n);
        let v = log_uniform(&mut rng, n);
        let functions = (0..FUNCTIONS_PER_INSTANCE).map(|_| random_function(&mut rng, &tree)).collect();
        Ok(Self { seed, tree, p, q, alpha, u, v, functions })
    }

    pub fn pair(&self) -> Result<WeightPair<'_>> {
        WeightPair::new(
            SimpleFunction::new(&self.tree, self.u.clone())?,
            SimpleFunction::new(&self.tree, self.v.clone())?,
            self.p,
        )
    }

    /// Checks every function and the ascent witness against `C(p, q) L`.
    pub fn run(&self, norm_budget: usize) -> Result<Vec<FuzzRow>> {
        let pair = self.pair()?;
        let l = testing_constant(&pair, self.alpha, self.q)?.constant;
        let mut rows = Vec::with_capacity(self.functions.len() + 1);
        for (k, f) in self.functions.iter().enumerate() {
            let f = SimpleFunction::new(&self.tree, f.clone())?;
            let chk = main_inequality_check_with(&pair, &f, self.alpha, self.q, l)?;
            rows.push(FuzzRow::new(self, k.to_string(), l, chk));
        }
        let best = operator_norm_lower(&pair, self.alpha, self.q, norm_budget, self.seed)?;
        let f = SimpleFunction::new(&self.tree, best.witness)?;
        let chk = main_inequality_check_with(&pair, &f, self.alpha, self.q, l)?;
        rows.push(FuzzRow::new(self, "ascent".into(), l, chk));
        Ok(rows)
    }

    /// Self-contained dump of the instance with one of its functions.
    pub fn case(&self, function: &[f64]) -> FuzzCase {
        FuzzCase {
            seed: self.seed,
            p: self.p,
            q: self.q,
            alpha: self.alpha,
            tree: self.tree.to_doc(),
            u: self.u.clone(),
            v: self.v.clone(),
            f: function.to_vec(),
        }
    }
}

/// One checked function of a fuzz campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzRow {
    pub seed: u64,
    pub function: String,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

impl FuzzRow {
    fn new(inst: &FuzzInstance, function: String, l: f64, chk: InequalityCheck) -> Self {
        Self {
            seed: inst.seed,
            function,
            p: inst.p,
            q: inst.q,
            alpha: inst.alpha,
            l,
            lhs: chk.lhs,
            rhs: chk.rhs,
            ratio: chk.ratio,
            holds: chk.holds(),
        }
    }
}

/// A replayable failing (or interesting) case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzCase {
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub tree: TreeDoc,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
}

impl FuzzCase {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fuzz cases serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::Domain(format!("bad fuzz case: {e}")))
    }

    /// Re-runs the main inequality on the stored data.
    pub fn replay(&self) -> Result<InequalityCheck> {
        let tree = TreeSpace::from_doc(&self.tree)?;
        let pair = WeightPair::new(SimpleFunction::new(&tree, self.u.clone())?, SimpleFunction::new(&tree, self.v.clone())?, self.p)?;
        let f = SimpleFunction::new(&tree, self.f.clone())?;
        crate::weights::main_inequality_check(&pair, &f, self.alpha, self.q)
    }
}

/// A random `σ` and a Carleson sequence normalized to constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonInstance {
    pub seed: u64,
    pub tree: TreeSpace,
    pub p: f64,
    pub q: f64,
    pub sigma: Vec<f64>,
    pub a: Vec<f64>,
    pub test_functions: Vec<Vec<f64>>,
}

impl CarlesonInstance {
    pub fn generate(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
        let (p, q, _) = random_exponents(&mut rng);
        let tree = random_tree(&mut rng)?;
        let sigma = log_uniform(&mut rng, tree.leaf_count());
        let raw: Vec<f64> = (0..tree.node_count())
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0f64).powi(2) })
            .collect();
        let mut a = raw.clone();
        if a.iter().all(|&x| x == 0.0) {
            a[0] = 1.0;
        }
        let s = SimpleFunction::new(&tree, sigma.clone())?;
        let (c, _) = carleson_constant(&CarlesonSequence::new(&tree, a.clone())?, &s, p, q)?;
        let a = a.iter().map(|x| x / c.powf(q)).collect();
        let test_functions = (0..FUNCTIONS_PER_INSTANCE).map(|_| random_function(&mut rng, &tree).iter().map(|x| x.abs()).collect()).collect();
        Ok(Self { seed, tree, p, q, sigma, a, test_functions })
    }

    pub fn sigma(&self) -> Result<SimpleFunction<'_>> {
        SimpleFunction::new(&self.tree, self.sigma.clone())
    }

    pub fn sequence(&self) -> Result<CarlesonSequence> {
        CarlesonSequence::new(&self.tree, self.a.clone())
    }
}
