//! Histograms over a randvar range and their multinomial multiplicities.
//!
//! A counting randvar over `n` groundings of a PRV with `r` range values takes
//! one histogram `h` per way of distributing `n` over the `r` values. The
//! enumeration order is fixed: lexicographically descending, so for a boolean
//! range `(n,0), (n-1,1), …, (0,n)`.

/// All histograms with `r` buckets summing to `n`.
pub fn histograms(n: u32, r: usize) -> Vec<Vec<u32>> {
    fn rec(rest: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=rest).rev() {
            cur.push(k);
            rec(rest - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    assert!(r >= 1, "a range has at least one value");
    let mut out = Vec::new();
    rec(n, r, &mut Vec::with_capacity(r), &mut out);
    out
}

/// Number of histograms: `C(n + r - 1, r - 1)`.
pub fn histogram_count(n: u32, r: usize) -> usize {
    binomial_u128(n as u64 + r as u64 - 1, r as u64 - 1) as usize
}

/// Position of `h` in [`histograms`] order.
pub fn histogram_index(h: &[u32]) -> usize {
    let n: u32 = h.iter().sum();
    let r = h.len();
    let mut idx = 0usize;
    let mut rest = n;
    for (i, &hi) in h.iter().enumerate().take(r - 1) {
        let slots = r - i - 1;
        // histograms whose i-th bucket exceeds hi come first
        for k in (hi + 1)..=rest {
            idx += histogram_count(rest - k, slots);
        }
        rest -= hi;
    }
    idx
}

/// Exact multinomial coefficient `n! / Π h(v)!`, `None` on overflow.
pub fn multiplicity(h: &[u32]) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut total: u64 = 0;
    for &k in h {
        total += k as u64;
        acc = acc.checked_mul(binomial_checked(total, k as u64)?)?;
    }
    Some(acc)
}

/// `ln` of the multinomial coefficient, exact up to floating rounding.
pub fn ln_multiplicity(h: &[u32]) -> f64 {
    if let Some(m) = multiplicity(h) {
        if m < (1u128 << 100) {
            return (m as f64).ln();
        }
    }
    let n: u32 = h.iter().sum();
    ln_factorial(n) - h.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}

pub fn ln_factorial(n: u32) -> f64 {
    (2..=n as u64).map(|k| (k as f64).ln()).sum()
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if let Some(b) = binomial_checked(n, k) {
        if b < (1u128 << 100) {
            return (b as f64).ln();
        }
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn binomial_checked(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

pub fn binomial_u128(n: u64, k: u64) -> u128 {
    binomial_checked(n, k).expect("binomial overflow")
}

/// Falling factorial `n (n-1) … (n-k+1)`; zero when `k > n`.
pub fn falling(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).map(|i| n - i).product()
}
