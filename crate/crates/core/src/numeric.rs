//! Small numerical helpers shared across modules.

use std::f64::consts::LN_2;

/// `m^q`, evaluated as `m · m^(q-1)` everywhere in the crate so that moment
/// sums computed along different routes round identically.
#[inline]
pub fn mass_pow(m: f64, q: f64) -> f64 {
    m * m.powf(q - 1.0)
}

/// Natural log to base-2 log. Dimension formulas use base 2; the β-circle
/// fiber lives in natural-log units.
#[inline]
pub fn ln_to_log2(x: f64) -> f64 {
    x / LN_2
}

#[inline]
pub fn log2_to_ln(x: f64) -> f64 {
    x * LN_2
}

/// Ordinary least squares fit `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need two points for a fit");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    LinearFit {
        slope,
        intercept,
        max_residual,
    }
}

/// A convergent `p/q` counts as an exact match only if `q²|x - p/q|` is below
/// this, i.e. the next partial quotient exceeds about 10⁴.
const GENERIC_MARGIN: f64 = 1e-4;

/// Continued-fraction search for a rational `p/q` with `q ≤ max_den` and
/// `|x - p/q| < tol`, expanding at most `max_terms` partial quotients.
pub fn rational_approximation(x: f64, max_terms: usize, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    // convergents h/k
    let (mut h_prev, mut h) = (1i128, x.floor() as i128);
    let (mut k_prev, mut k) = (0i128, 1i128);
    let mut frac = x - x.floor();
    for _ in 0..max_terms {
        if k > max_den as i128 {
            return None;
        }
        let err = (x - h as f64 / k as f64).abs();
        // every irrational has convergents with error near 1/k²; only accept
        // a convergent that beats that generic bound by a wide margin
        if err < tol && err * (k as f64) * (k as f64) < GENERIC_MARGIN {
            return Some((h as i64, k as i64));
        }
        if frac == 0.0 {
            return None;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as i128;
        let h_next = a.checked_mul(h)?.checked_add(h_prev)?;
        let k_next = a.checked_mul(k)?.checked_add(k_prev)?;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    None
}

/// Rationality flag used for `log a / log b` and `α / π` checks: continued
/// fraction depth 40, tolerance 1e-12, denominators up to 10⁶.
pub fn looks_rational(x: f64) -> Option<(i64, i64)> {
    rational_approximation(x, 40, 1_000_000, 1e-12)
}
