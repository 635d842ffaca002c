//! One function per subcommand, each returning its tables and a summary.

use fracmax_core::bellman::{
    bellman_cap, bellman_lower, bliss_functional, bliss_inequality_check, BellmanPoint, BellmanSearch, Piece, StepFunction,
};
use fracmax_core::constants::{cpq, cpq_direct};
use fracmax_core::fuzz::FuzzInstance;
use fracmax_core::sharpness::{indicator_degeneracy, ratio_experiment, verify_extremal_testing, TrialSearch};
use fracmax_core::weights::{carleson_constant, carleson_from_linearization, embedding_check, testing_constant};
use fracmax_core::{sharpness_regime, Result, SimpleFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::table::{status, Cell, Table};
use crate::Config;

pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Value,
    /// Extra files `(name, contents)`, such as replayable failing cases.
    pub files: Vec<(String, String)>,
}

impl Report {
    fn new(tables: Vec<Table>, summary: Value) -> Self {
        Self { tables, summary, files: Vec::new() }
    }
}

/// `lhs <= rhs` with relative slack `tol` and an absolute floor.
fn within(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol * rhs.abs().max(lhs.abs()) + 1e-12
}

pub fn constants(c: &Config) -> Result<Report> {
    let mut t = Table::new("constants", &["p", "q", "alpha", "c_pq", "c_pq_gamma", "sharp_regime", "status"]);
    let value = cpq(c.p, c.q)?;
    let direct = cpq_direct(c.p, c.q)?;
    let agrees = direct.map_or(true, |d| (d - value).abs() <= 1e-9 * value);
    t.push(vec![
        c.p.into(),
        c.q.into(),
        c.alpha.into(),
        value.into(),
        direct.map_or(Cell::from(""), Cell::from),
        sharpness_regime(c.p, c.q, c.alpha).into(),
        status(value >= 1.0 && agrees),
    ]);
    Ok(Report::new(vec![t], json!({ "c_pq": value })))
}

pub fn testing(c: &Config) -> Result<Report> {
    let inst = FuzzInstance::with_exponents(c.seed, c.p, c.q, c.alpha, c.depth)?;
    let pair = inst.pair()?;
    let report = testing_constant(&pair, c.alpha, c.q)?;
    let mut nodes = Table::new("nodes", &["node", "mass", "lhs", "rhs", "ratio", "witness"]);
    for n in &report.nodes {
        nodes.push(vec![
            n.node.into(),
            inst.tree.mass(n.node).into(),
            n.lhs.into(),
            n.rhs.into(),
            n.ratio.into(),
            (n.node == report.witness).into(),
        ]);
    }
    let mut checks = Table::new("inequality", &["function", "lhs", "rhs", "ratio", "status"]);
    for row in inst.run(c.budget.unwrap_or(2000))? {
        let ok = within(row.lhs, row.rhs, c.cmp_tol);
        checks.push(vec![row.function.into(), row.lhs.into(), row.rhs.into(), row.ratio.into(), status(ok)]);
    }
    let summary = json!({
        "testing_constant": report.constant,
        "witness": report.witness,
        "c_pq": cpq(c.p, c.q)?,
        "nodes": inst.tree.node_count(),
        "leaves": inst.tree.leaf_count(),
    });
    Ok(Report::new(vec![nodes, checks], summary))
}

pub fn carleson(c: &Config) -> Result<Report> {
    let inst = FuzzInstance::with_exponents(c.seed, c.p, c.q, c.alpha, c.depth)?;
    let pair = inst.pair()?;
    let l = testing_constant(&pair, c.alpha, c.q)?.constant;
    let mut t = Table::new("embedding", &["function", "carleson_constant", "testing_constant", "lhs", "rhs", "ratio", "status"]);
    for (k, f) in inst.functions.iter().enumerate() {
        let f = SimpleFunction::new(&inst.tree, f.iter().map(|x| x.abs()).collect())?;
        let seq = carleson_from_linearization(&pair, &f, c.alpha, c.q)?;
        let (constant, _) = carleson_constant(&seq, &pair.sigma, c.p, c.q)?;
        let normalized = seq.scale(l.powf(-c.q));
        let chk = embedding_check(&normalized, &f, &pair.sigma, c.p, c.q)?;
        let ok = within(constant, l, c.cmp_tol) && within(chk.lhs, chk.rhs, c.cmp_tol);
        t.push(vec![k.into(), constant.into(), l.into(), chk.lhs.into(), chk.rhs.into(), chk.ratio.into(), status(ok)]);
    }
    Ok(Report::new(vec![t], json!({ "testing_constant": l, "c_pq": cpq(c.p, c.q)? })))
}

fn bellman_points(c: &Config) -> Vec<BellmanPoint> {
    if let Some(x) = c.x {
        let s = c.s.unwrap_or(1.0);
        return vec![BellmanPoint::new(x, c.y.unwrap_or(2.0 * x.powf(c.p)), s, c.t.unwrap_or(s.powf(c.q / c.p)))];
    }
    let mut pts = Vec::new();
    for x in [0.5, 1.0, 2.0] {
        for r in [1.0, 1.5, 3.0] {
            pts.push(BellmanPoint::new(x, r * x.powf(c.p), 1.0, 0.5));
        }
    }
    pts
}

pub fn bellman(c: &Config) -> Result<Report> {
    let search = BellmanSearch {
        pieces: c.pieces.unwrap_or(32),
        budget: c.budget.unwrap_or(2000),
        starts: c.starts.unwrap_or(16),
        seed: c.seed,
        tol: c.tol,
        warm_start: None,
    };
    let pts = bellman_points(c);
    let results: Vec<Result<(BellmanPoint, f64, f64, f64, usize)>> = pts
        .par_iter()
        .map(|pt| {
            let est = bellman_lower(pt, c.p, c.q, &search)?;
            Ok((*pt, est.value, est.search_value, bellman_cap(pt, c.p, c.q)?, est.evaluations))
        })
        .collect();
    let mut t = Table::new("bellman", &["x", "y", "s", "t", "value", "search_value", "cap", "evaluations", "status"]);
    for r in results {
        let (pt, value, search_value, cap, evals) = r?;
        let mut ok = value >= 0.0 && value <= cap + 1e-8;
        if pt.y <= pt.x.powf(c.p) * (1.0 + 1e-12) {
            ok &= (value - c.p / c.q * pt.x.powf(c.q) * pt.t).abs() <= 1e-9 * value.max(1.0);
        }
        t.push(vec![
            pt.x.into(),
            pt.y.into(),
            pt.s.into(),
            pt.t.into(),
            value.into(),
            search_value.into(),
            cap.into(),
            evals.into(),
            status(ok),
        ]);
    }
    Ok(Report::new(vec![t], json!({ "search": search })))
}

fn random_step(rng: &mut ChaCha8Rng, max_pieces: usize) -> Result<StepFunction> {
    let n = rng.gen_range(1..=max_pieces.max(1));
    StepFunction::new(
        (0..n)
            .map(|_| Piece {
                length: rng.gen_range(0.05..1.0),
                value: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-3.0f64..3.0).exp() },
            })
            .collect(),
    )
}

pub fn bliss(c: &Config) -> Result<Report> {
    let samples = c.count.unwrap_or(100);
    let max_pieces = c.pieces.unwrap_or(16);
    let rows: Vec<Result<Vec<Cell>>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            rng.set_stream(k as u64);
            let phi = random_step(&mut rng, max_pieces)?;
            let chk = bliss_inequality_check(&phi, c.p, c.q, c.tol)?;
            let t = phi.total_length().powf(c.q / c.p);
            let gain = bliss_functional(&phi.rearrange_decreasing(), t, c.p, c.q, c.tol)? - bliss_functional(&phi, t, c.p, c.q, c.tol)?;
            // Compared as q-th powers, where the quadrature error is absolute.
            let ok = chk.lhs.powf(c.q) <= chk.rhs.powf(c.q) * (1.0 + c.cmp_tol) + c.tol && gain >= -2.0 * c.tol;
            Ok(vec![k.into(), phi.piece_count().into(), chk.lhs.into(), chk.rhs.into(), chk.ratio.into(), gain.into(), status(ok)])
        })
        .collect();
    let mut t = Table::new("bliss", &["sample", "pieces", "lhs", "rhs", "ratio", "rearrangement_gain", "status"]);
    for r in rows {
        t.push(r?);
    }
    Ok(Report::new(vec![t], json!({ "samples": samples, "constant": (c.p / c.q).powf(1.0 / c.q) * cpq(c.p, c.q)? })))
}

pub fn sharpness(c: &Config) -> Result<Report> {
    let sharp = sharpness_regime(c.p, c.q, c.alpha);
    let mut testing = Table::new("testing", &["N", "node", "interval", "is_prefix", "lhs", "rhs", "ratio", "status"]);
    let mut constants = Vec::new();
    for &n in &c.n {
        let tree = fracmax_core::TreeSpace::build_sharpness_tree(n)?;
        let rep = verify_extremal_testing(&tree, c.alpha, c.p, c.q)?;
        constants.push(json!({ "N": n, "testing_constant": rep.constant }));
        for row in rep.rows {
            // Outside the sharp regime the unit bound is not expected.
            let ok = !sharp || within(row.ratio, 1.0, c.cmp_tol);
            testing.push(vec![
                n.into(),
                row.node.into(),
                row.interval.into(),
                row.is_prefix.into(),
                row.lhs.into(),
                row.rhs.into(),
                row.ratio.into(),
                status(ok),
            ]);
        }
    }
    let mut search = TrialSearch::default();
    if let Some(b) = c.budget {
        search.budget = b;
    }
    let curve = ratio_experiment(&c.n, c.alpha, c.p, c.q, &search)?;
    let mut table = Table::new("curve", &["N", "best_ratio", "bound", "gap", "gamma", "status"]);
    for pt in &curve.points {
        table.push(vec![
            pt.n.into(),
            pt.best_ratio.into(),
            pt.bound.into(),
            pt.gap.into(),
            pt.gamma.into(),
            status(within(pt.best_ratio, pt.bound, c.cmp_tol)),
        ]);
    }
    let mut tables = vec![testing, table];
    if !sharp {
        let mut deg = Table::new("degeneracy", &["N", "mass", "predicted", "ratio"]);
        for &n in &c.n {
            for row in indicator_degeneracy(n, c.alpha, c.p, c.q)? {
                deg.push(vec![n.into(), row.mass.into(), row.predicted.into(), row.ratio.into()]);
            }
        }
        tables.push(deg);
    }
    let summary = json!({
        "c_pq": curve.c_pq,
        "sharp_regime": sharp,
        "experimental": !sharp,
        "testing": constants,
    });
    Ok(Report::new(tables, summary))
}

pub fn fuzz(c: &Config) -> Result<Report> {
    let instances = c.count.unwrap_or(50) as u64;
    let budget = c.budget.unwrap_or(400);
    let runs: Vec<Result<(FuzzInstance, Vec<fracmax_core::fuzz::FuzzRow>)>> = (c.seed..c.seed + instances)
        .into_par_iter()
        .map(|seed| {
            let inst = FuzzInstance::generate(seed)?;
            let rows = inst.run(budget)?;
            Ok((inst, rows))
        })
        .collect();
    let mut t = Table::new("fuzz", &["seed", "function", "p", "q", "alpha", "L", "lhs", "rhs", "ratio", "status"]);
    let mut files = Vec::new();
    for run in runs {
        let (inst, rows) = run?;
        for row in rows {
            let ok = within(row.lhs, row.rhs, c.cmp_tol);
            if !ok {
                if let Ok(k) = row.function.parse::<usize>() {
                    files.push((format!("fuzz-case-{}-{k}.json", row.seed), inst.case(&inst.functions[k]).to_json()));
                }
            }
            t.push(vec![
                row.seed.into(),
                row.function.into(),
                row.p.into(),
                row.q.into(),
                row.alpha.into(),
                row.l.into(),
                row.lhs.into(),
                row.rhs.into(),
                row.ratio.into(),
                status(ok),
            ]);
        }
    }
    let mut report = Report::new(vec![t], json!({ "instances": instances, "ascent_budget": budget }));
    report.files = files;
    Ok(report)
}
