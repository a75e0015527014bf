//! Matrix exponential by scaling and squaring with Padé approximants.
//!
//! Follows Higham (2005), "The scaling and squaring method for the matrix
//! exponential revisited": the lowest Padé degree in {3, 5, 7, 9, 13} whose
//! 1-norm threshold covers the input is used, otherwise the matrix is scaled
//! by 2^-s to fit degree 13 and squared back.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn norm_1(a: &Array2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Solve (V - U) X = (V + U) for X.
fn pade_quotient(u: &Array2<C64>, v: &Array2<C64>) -> Array2<C64> {
    let n = u.nrows();
    let p = v + u;
    let q = v - u;
    let qm = DMatrix::from_fn(n, n, |i, j| q[[i, j]]);
    let pm = DMatrix::from_fn(n, n, |i, j| p[[i, j]]);
    let x = qm
        .lu()
        .solve(&pm)
        .expect("Padé denominator is nonsingular for scaled inputs");
    Array2::from_shape_fn((n, n), |(i, j)| x[(i, j)])
}

fn pade_low(a: &Array2<C64>, b: &[f64]) -> Array2<C64> {
    let n = a.nrows();
    let eye = identity(n);
    let a2 = a.dot(a);
    // even powers drive both U and V
    let m = b.len() - 1;
    let mut powers = vec![eye.clone(), a2.clone()];
    while powers.len() < m.div_ceil(2) {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        if 2 * k < m {
            u_inner.scaled_add(C64::new(b[2 * k + 1], 0.0), p);
        }
        if 2 * k <= m {
            v.scaled_add(C64::new(b[2 * k], 0.0), p);
        }
    }
    let u = a.dot(&u_inner);
    pade_quotient(&u, &v)
}

fn pade_13(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let eye = identity(n);
    let c = |x: f64| C64::new(x, 0.0);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let w1 = &a6 * c(B13[13]) + &a4 * c(B13[11]) + &a2 * c(B13[9]);
    let w2 = &a6 * c(B13[7]) + &a4 * c(B13[5]) + &a2 * c(B13[3]) + &eye * c(B13[1]);
    let u = a.dot(&(a6.dot(&w1) + w2));
    let z1 = &a6 * c(B13[12]) + &a4 * c(B13[10]) + &a2 * c(B13[8]);
    let z2 = &a6 * c(B13[6]) + &a4 * c(B13[4]) + &a2 * c(B13[2]) + &eye * c(B13[0]);
    let v = a6.dot(&z1) + z2;
    pade_quotient(&u, &v)
}

/// exp(A) for a square complex matrix.
///
/// Panics if `a` is not square.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let norm = norm_1(a);
    if norm <= THETA_3 {
        return pade_low(a, &B3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &B5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &B7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &B9);
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * C64::new(2f64.powi(-s), 0.0);
    let mut x = pade_13(&scaled);
    for _ in 0..s {
        x = x.dot(&x);
    }
    x
}
