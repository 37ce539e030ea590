//! Beta integrals `B(p+1, q+1) = ∫₀¹ t^p (1−t)^q dt = p! q! / (p+q+1)!`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Error-free sum of two doubles as a (high, low) pair.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Double-double addition; plenty for positive binomial coefficients.
#[inline]
fn dd_add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (s, e) = two_sum(a.0, b.0);
    let e = e + a.1 + b.1;
    let hi = s + e;
    (hi, e - (hi - s))
}

/// Triangular table of `∫₀¹ t^p (1−t)^q dt` for `p + q ≤ max_total`.
///
/// Values come from `1 / ((p+q+1)·C(p+q, p))` with the binomials built by
/// Pascal's rule in double-double arithmetic, so every entry is correctly
/// rounded to within an ulp or two.
#[derive(Debug, Clone)]
pub struct BetaTable {
    max_total: usize,
    // row s holds q = 0..=s with p = s − q
    rows: Vec<Vec<f64>>,
}

impl BetaTable {
    pub fn new(max_total: usize) -> Self {
        let mut rows = Vec::with_capacity(max_total + 1);
        let mut binom: Vec<(f64, f64)> = alloc::vec![(1.0, 0.0)];
        for s in 0..=max_total {
            if s > 0 {
                let mut next = Vec::with_capacity(s + 1);
                next.push((1.0, 0.0));
                for i in 1..s {
                    next.push(dd_add(binom[i - 1], binom[i]));
                }
                next.push((1.0, 0.0));
                binom = next;
            }
            let denom = (s + 1) as f64;
            let row = binom
                .iter()
                .map(|&(hi, lo)| {
                    // 1 / (denom·(hi + lo)) with a first-order correction for lo
                    let base = 1.0 / (denom * hi);
                    base * (1.0 - lo / hi)
                })
                .collect();
            rows.push(row);
        }
        Self { max_total, rows }
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    /// `∫₀¹ t^p (1−t)^q dt`; panics when `p + q` exceeds the table.
    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.rows[p + q][q]
    }
}

/// `∫₀¹ t^m (1−t)^n dt` for signed arguments.
pub fn beta_integral(m: i64, n: i64) -> Result<f64> {
    if m < 0 || n < 0 {
        return Err(invalid("beta integral needs non-negative exponents"));
    }
    let (m, n) = (m as usize, n as usize);
    Ok(BetaTable::new(m + n).get(m, n))
}
