//! Helpers for potentials stored as natural logarithms.
//!
//! Every lifted engine keeps potentials in log space: exponentiating a sum
//! over `n - 1` groundings overflows `f64` long before the domain sizes of
//! interest. A zero potential is `f64::NEG_INFINITY`.

pub const ZERO: f64 = f64::NEG_INFINITY;

/// `ln(exp(a) + exp(b))`.
pub fn add(a: f64, b: f64) -> f64 {
    if a == ZERO {
        return b;
    }
    if b == ZERO {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(Σ exp(x))` over an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let hi = xs.iter().copied().fold(ZERO, f64::max);
    if hi == ZERO {
        return ZERO;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `ln(exp(x)^k)` with the convention `0^0 = 1`.
pub fn pow(x: f64, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else if x == ZERO {
        ZERO
    } else {
        x * k
    }
}

/// Converts a non-negative linear potential to log space.
pub fn ln(x: f64) -> f64 {
    if x == 0.0 {
        ZERO
    } else {
        x.ln()
    }
}

/// Normalises a log-space vector into probabilities. Returns `None` when
/// every entry is zero.
pub fn normalize(xs: &[f64]) -> Option<Vec<f64>> {
    let z = sum(xs.iter().copied());
    if z == ZERO || !z.is_finite() {
        return None;
    }
    Some(xs.iter().map(|x| (x - z).exp()).collect())
}

/// Relative closeness of two log-space values, compared in linear space.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a == ZERO || b == ZERO {
        return a == b;
    }
    ((a - b).exp() - 1.0).abs() <= rel
}
