//! Log-space binomial kernels.
//!
//! Security bounds in this crate routinely evaluate to 1e-20 and far below,
//! so every probability is carried as a natural logarithm. The binomial pmf
//! and tail here stay accurate in both regimes that matter: deep tails
//! (log values around -1e4) and probabilities within 1e-20 of 1, where the
//! log is computed through the complement instead of a catastrophically
//! cancelling sum.

use std::cell::RefCell;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("count {k} out of range for n = {n}")]
    CountRange { k: u64, n: u64 },
    #[error("exceedance threshold must be at least 1")]
    ZeroThreshold,
    #[error("split {x} + {y} exceeds population {b}")]
    BadSplit { x: u64, y: u64, b: u64 },
}

thread_local! {
    // ln(n!) built incrementally with Kahan compensation; the carried
    // compensation term keeps the absolute error near eps * ln(n!) instead of
    // n * eps * ln(n!), which the 1e-12 relative accuracy target needs.
    static LN_FACTORIAL: RefCell<(Vec<f64>, f64)> = RefCell::new((vec![0.0, 0.0], 0.0));
}

fn ln_factorial(n: u64) -> f64 {
    let n = n as usize;
    LN_FACTORIAL.with(|cell| {
        let (table, comp) = &mut *cell.borrow_mut();
        while table.len() <= n {
            let i = table.len() as f64;
            let sum = *table.last().unwrap();
            let y = i.ln() - *comp;
            let t = sum + y;
            *comp = (t - sum) - y;
            table.push(t);
        }
        table[n]
    })
}

/// ln of the binomial coefficient C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(sum exp(xs)) with a max shift and compensated summation.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let y = (x - hi).exp() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    hi + sum.ln()
}

/// ln(1 - exp(x)) for x <= 0, accurate for x near 0 and near -inf.
pub fn log1m_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

fn check_binom_domain(n: u64, p: f64, k: u64) -> Result<(), NumericsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NumericsError::ProbabilityRange(p));
    }
    if k > n {
        return Err(NumericsError::CountRange { k, n });
    }
    Ok(())
}

/// ln P[Bin(n, p) = k].
pub fn log_binom_pmf(n: u64, p: f64, k: u64) -> Result<f64, NumericsError> {
    check_binom_domain(n, p, k)?;
    if p == 0.0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if p == 1.0 {
        return Ok(if k == n { 0.0 } else { f64::NEG_INFINITY });
    }
    let mut ln = ln_choose(n, k);
    if k > 0 {
        ln += k as f64 * p.ln();
    }
    if k < n {
        ln += (n - k) as f64 * (-p).ln_1p();
    }
    Ok(ln)
}

// Sums ln-pmf values over `lo..=hi` (inclusive), compensated.
fn lse_pmf_range(n: u64, ln_p: f64, ln_q: f64, lo: u64, hi: u64) -> f64 {
    let term = |k: u64| {
        let mut ln = ln_choose(n, k);
        if k > 0 {
            ln += k as f64 * ln_p;
        }
        if k < n {
            ln += (n - k) as f64 * ln_q;
        }
        ln
    };
    let mut max = f64::NEG_INFINITY;
    for k in lo..=hi {
        max = max.max(term(k));
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in lo..=hi {
        let y = (term(k) - max).exp() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    max + sum.ln()
}

/// ln P[Bin(n, p) >= k].
///
/// `k = 0` returns exactly 0.0 (the tail is all of the mass). When the tail
/// is the larger half it is computed as the complement of the lower sum, so
/// values within 1e-300 of 1 keep full relative accuracy in log space.
pub fn log_binom_tail(n: u64, p: f64, k: u64) -> Result<f64, NumericsError> {
    check_binom_domain(n, p, k)?;
    if k == 0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let upper = lse_pmf_range(n, ln_p, ln_q, k, n);
    if upper <= -std::f64::consts::LN_2 {
        Ok(upper.min(0.0))
    } else {
        let lower = lse_pmf_range(n, ln_p, ln_q, 0, k - 1);
        Ok(log1m_exp(lower.min(0.0)))
    }
}

/// ln P[Bin(n, p) <= k].
pub fn log_binom_cdf(n: u64, p: f64, k: u64) -> Result<f64, NumericsError> {
    check_binom_domain(n, p, k)?;
    if k == n {
        return Ok(0.0);
    }
    // P[X <= k] = 1 - P[X >= k + 1]
    Ok(log1m_exp(log_binom_tail(n, p, k + 1)?))
}

/// ln of the union bound `(e * n * h / k)^k * exp(-n * h)` on the probability
/// that any of a family of binomial counts with success masses summing to `h`
/// exceeds `k`. Valid (non-trivial) only while `h <= (k - sqrt(k)) / n`;
/// beyond that the function returns `ln 1 = 0`.
pub fn chernoff_union_bound(n: u64, k: u64, h: f64) -> Result<f64, NumericsError> {
    if k == 0 {
        return Err(NumericsError::ZeroThreshold);
    }
    if !(h >= 0.0) {
        return Err(NumericsError::ProbabilityRange(h));
    }
    let (nf, kf) = (n as f64, k as f64);
    if h > (kf - kf.sqrt()) / nf {
        return Ok(0.0);
    }
    let ln = kf * (1.0 + nf.ln() + h.ln() - kf.ln()) - nf * h;
    Ok(ln.min(0.0))
}

/// Max pointwise gap between the law of `X + Y` — where `X ~ Bin(a, x/b)` and
/// `Y | X ~ Bin(a - X, y/(b - x))` — and the direct `Bin(a, (x+y)/b)`.
///
/// The two-stage and single-stage samplings are the same distribution; this
/// helper exists so tests can confirm the identity numerically.
pub fn binomial_merge_check(a: u64, b: u64, x: u64, y: u64) -> Result<f64, NumericsError> {
    if b == 0 || x + y > b {
        return Err(NumericsError::BadSplit { x, y, b });
    }
    let pmf = |n: u64, p: f64, k: u64| log_binom_pmf(n, p, k).map(f64::exp);
    let p1 = x as f64 / b as f64;
    let p2 = if b == x {
        0.0 // then y = 0: the second stage draws nothing
    } else {
        y as f64 / (b - x) as f64
    };
    let direct_p = (x + y) as f64 / b as f64;
    let mut worst = 0.0f64;
    for k in 0..=a {
        let mut two_stage = 0.0;
        for i in 0..=k {
            two_stage += pmf(a, p1, i)? * pmf(a - i, p2, k - i)?;
        }
        let direct = pmf(a, direct_p, k)?;
        worst = worst.max((two_stage - direct).abs());
    }
    Ok(worst)
}
