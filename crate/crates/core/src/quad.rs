//! Adaptive Gauss-Kronrod quadrature and bracketed root finding.

use crate::error::{Error, Result};

/// Absolute tolerance used by every value-function and clock integral.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Subdivision budget before giving up.
pub const MAX_SUBDIVISIONS: usize = 10_000;

// 15-point Kronrod nodes on [-1, 1] (non-negative half) with weights, and the
// embedded 7-point Gauss weights at the odd-indexed nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod rule with the 7-point Gauss error estimate.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = r * XK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

/// Integrates `f` over `[a, b]` by bisecting the panel with the largest
/// error estimate until the total estimate is below `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    let mut subdivisions = 0;
    // the negated test also catches a NaN or infinite estimate
    while !(err <= tol && total.is_finite()) {
        if subdivisions >= MAX_SUBDIVISIONS || !err.is_finite() {
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: err,
                subdivisions,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, v, e) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            // cannot split further in floating point
            return Err(Error::QuadratureFailure {
                a,
                b,
                estimate: err,
                subdivisions,
            });
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        total += left.0 + right.0 - v;
        err += left.1 + right.1 - e;
        panels.push((lo, mid, left.0, left.1));
        panels.push((mid, hi, right.0, right.1));
        subdivisions += 1;
        // refresh accumulated sums now and then to stop drift
        if subdivisions % 64 == 0 {
            total = panels.iter().map(|p| p.2).sum();
            err = panels.iter().map(|p| p.3).sum();
        }
    }
    Ok(total)
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL5_X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL5_W: [f64; 3] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Fixed 5-point Gauss-Legendre rule; exact for degree-9 polynomials.
pub fn gauss_legendre5<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = GL5_W[0] * f(c);
    for j in 1..3 {
        s += GL5_W[j] * (f(c - r * GL5_X[j]) + f(c + r * GL5_X[j]));
    }
    s * r
}

/// Root of a continuous `f` with a sign change on `[lo, hi]`, to absolute
/// tolerance `tol` in the argument. Uses bisection.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::InvalidBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton iteration safeguarded by a bracket on an increasing function.
/// `fd` returns `(f(x), f'(x))`; `f(lo) <= 0 <= f(hi)` is required.
pub fn newton_increasing<F: FnMut(f64) -> (f64, f64)>(
    mut fd: F,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    tol: f64,
) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidBracket { lo, hi });
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..100 {
        let (fx, dfx) = fd(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if dfx > 0.0 { x - fx / dfx } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
