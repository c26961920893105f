//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use nalgebra::DVector;

// Kronrod abscissae on [-1, 1] (non-negative half), Kronrod and Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod nodes mapped to `[a, b]`, in ascending order.
pub fn gk15_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for i in 0..7 {
        out[i] = c - h * XGK[i];
        out[14 - i] = c + h * XGK[i];
    }
    out[7] = c;
    out
}

/// One GK15 panel from integrand values at [`gk15_nodes`]. Returns the
/// Kronrod estimate and the |K15 − G7| error estimate.
pub fn gk15_panel(values: &[DVector<f64>; 15], a: f64, b: f64) -> (DVector<f64>, f64) {
    let h = 0.5 * (b - a);
    let dim = values[7].len();
    let mut kron = &values[7] * WGK[7];
    let mut gauss = &values[7] * WG[3];
    for i in 0..7 {
        let pair = &values[i] + &values[14 - i];
        kron.axpy(WGK[i], &pair, 1.0);
        if i % 2 == 1 {
            gauss.axpy(WG[i / 2], &pair, 1.0);
        }
    }
    kron *= h;
    gauss *= h;
    debug_assert_eq!(kron.len(), dim);
    let err = (&kron - &gauss).norm();
    (kron, err)
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: DVector<f64>,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive bisection on GK15 panels until every panel meets its share of
/// `abs_tol` or `max_depth` bisections have been made.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> QuadResult
where
    F: FnMut(f64) -> DVector<f64>,
{
    let mut evaluations = 0;
    let mut panel = |lo: f64, hi: f64, evals: &mut usize| {
        let nodes = gk15_nodes(lo, hi);
        let vals: [DVector<f64>; 15] = std::array::from_fn(|i| f(nodes[i]));
        *evals += 15;
        gk15_panel(&vals, lo, hi)
    };
    let (v0, e0) = panel(a, b, &mut evaluations);
    let mut total = DVector::zeros(v0.len());
    let mut error = 0.0;
    let width = b - a;
    let mut stack = vec![(a, b, v0, e0, 0u32)];
    while let Some((lo, hi, val, err, depth)) = stack.pop() {
        let share = abs_tol * (hi - lo) / width;
        if err <= share || depth >= max_depth {
            total += val;
            error += err;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (vl, el) = panel(lo, mid, &mut evaluations);
        let (vr, er) = panel(mid, hi, &mut evaluations);
        stack.push((lo, mid, vl, el, depth + 1));
        stack.push((mid, hi, vr, er, depth + 1));
    }
    QuadResult { value: total, error, evaluations }
}
