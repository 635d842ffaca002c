//! Nelder–Mead direct search with dimension-adapted coefficients.

/// Outcome of a single search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` from `x0` with an axis-aligned initial simplex of edge `step`.
///
/// Points where `f` is `-∞` or NaN count as worst. The search stops after
/// `max_evals` evaluations or once the simplex has collapsed; the sequence of
/// evaluated points does not depend on `max_evals`.
pub fn maximize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> SimplexResult {
    let n = x0.len();
    let nf = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
    let contract = 0.75 - 1.0 / (2.0 * nf);
    let shrink = 1.0 - 1.0 / nf.max(2.0);

    let mut evaluations = 0usize;
    let mut best = SimplexResult { point: x0.to_vec(), value: f64::NEG_INFINITY, evaluations: 0 };
    let mut eval = |x: &[f64], evaluations: &mut usize, best: &mut SimplexResult| -> Option<f64> {
        if *evaluations >= max_evals {
            return None;
        }
        *evaluations += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if v > best.value {
            best.value = v;
            best.point = x.to_vec();
        }
        // Internally minimized.
        Some(-v)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    for x in &simplex {
        match eval(x, &mut evaluations, &mut best) {
            Some(v) => values.push(v),
            None => {
                best.evaluations = evaluations;
                return best;
            }
        }
    }
    if n == 0 {
        best.evaluations = evaluations;
        return best;
    }

    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let (lo, hi, second) = (order[0], order[n], order[n - 1]);

        let diameter = simplex
            .iter()
            .map(|x| x.iter().zip(&simplex[lo]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < 1e-13 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / nf;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[hi]).map(|(c, x)| c + coef * (c - x)).collect()
        };

        let xr = along(reflect);
        let Some(fr) = eval(&xr, &mut evaluations, &mut best) else { break };
        if fr < values[lo] {
            let xe = along(expand);
            let Some(fe) = eval(&xe, &mut evaluations, &mut best) else { break };
            if fe < fr {
                simplex[hi] = xe;
                values[hi] = fe;
            } else {
                simplex[hi] = xr;
                values[hi] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[hi] = xr;
            values[hi] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[hi] {
            let xc = along(reflect * contract);
            let Some(fc) = eval(&xc, &mut evaluations, &mut best) else { break };
            if fc <= fr {
                (Some(xc), fc)
            } else {
                (None, fc)
            }
        } else {
            let xc = along(-contract);
            let Some(fc) = eval(&xc, &mut evaluations, &mut best) else { break };
            if fc < values[hi] {
                (Some(xc), fc)
            } else {
                (None, fc)
            }
        };
        if let Some(xc) = xc {
            simplex[hi] = xc;
            values[hi] = fc;
            continue;
        }
        let anchor = simplex[lo].clone();
        let mut stopped = false;
        for &i in &order[1..] {
            let x: Vec<f64> = anchor.iter().zip(&simplex[i]).map(|(a, x)| a + shrink * (x - a)).collect();
            match eval(&x, &mut evaluations, &mut best) {
                Some(v) => {
                    simplex[i] = x;
                    values[i] = v;
                }
                None => {
                    stopped = true;
                    break;
                }
            }
        }
        if stopped {
            break;
        }
    }
    best.evaluations = evaluations;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_quadratic_peak() {
        let r = maximize(|x| -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], 0.5, 2000);
        assert!((r.point[0] - 1.0).abs() < 1e-5 && (r.point[1] + 2.0).abs() < 1e-5);
        assert!(r.value > -1e-9);
    }

    #[test]
    fn rosenbrock_in_four_dimensions() {
        let rosen = |x: &[f64]| -> f64 {
            -x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum::<f64>()
        };
        let r = maximize(rosen, &[-1.0, 1.0, -1.0, 1.0], 0.5, 20_000);
        assert!(r.value > -1e-6, "{}", r.value);
    }

    #[test]
    fn respects_budget_and_prefix() {
        let f = |x: &[f64]| -x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let mut last = f64::NEG_INFINITY;
        for budget in [1, 3, 10, 40, 200] {
            let r = maximize(f, &[0.0; 5], 1.0, budget);
            assert!(r.evaluations <= budget);
            assert!(r.value >= last);
            last = r.value;
        }
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NEG_INFINITY } else { -(x[0] - 2.0).powi(2) };
        let r = maximize(f, &[0.5], 1.0, 200);
        assert!((r.point[0] - 2.0).abs() < 1e-4);
    }
}
