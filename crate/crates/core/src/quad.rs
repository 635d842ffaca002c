//! One-dimensional quadrature on bounded integrands.

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (plus the centre).
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];

const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const MAX_DEPTH: u32 = 30;

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (estimate, err) = whole;
    // The last clause stops at roundoff level, where `tol` may be unreachable.
    if err <= tol || depth >= MAX_DEPTH || err <= 1e-15 * estimate.abs() || b - a <= f64::EPSILON * a.abs().max(b.abs()) {
        return estimate;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adaptive(f, a, m, left, 0.5 * tol, depth + 1) + adaptive(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, bisecting panels whose error estimate exceeds their share.
pub fn gauss_kronrod_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    adaptive(&f, a, b, whole, tol.max(1e-15), 0)
}

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre_8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..4 {
        let dx = h * GL8_NODES[i];
        acc += GL8_WEIGHTS[i] * (f(c - dx) + f(c + dx));
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * KRONROD_WEIGHTS[..7].iter().sum::<f64>() + KRONROD_WEIGHTS[7];
        let g: f64 = 2.0 * GAUSS7_WEIGHTS[..3].iter().sum::<f64>() + GAUSS7_WEIGHTS[3];
        let l: f64 = 2.0 * GL8_WEIGHTS.iter().sum::<f64>();
        for s in [k, g, l] {
            assert!((s - 2.0).abs() < 1e-14, "{s}");
        }
    }

    #[test]
    fn polynomials_are_exact() {
        // GL8 integrates degree 15 exactly.
        let v = gauss_legendre_8(|x| x.powi(15) + 3.0 * x.powi(8), 0.0, 2.0);
        let exact = 2f64.powi(16) / 16.0 + 3.0 * 2f64.powi(9) / 9.0;
        assert!((v / exact - 1.0).abs() < 1e-14);
        let (k, _) = gk15(&|x: f64| x.powi(20), -1.0, 1.0);
        assert!((k - 2.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_a_kink_and_a_sqrt() {
        let v = gauss_kronrod_adaptive(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
        let v = gauss_kronrod_adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
        let v = gauss_kronrod_adaptive(f64::exp, 0.0, 3.0, 1e-13);
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-11);
        assert_eq!(gauss_kronrod_adaptive(f64::exp, 1.0, 1.0, 1e-9), 0.0);
    }
}
