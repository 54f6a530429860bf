//! Exact worst-case iteration bounds and the combinatorics behind them.
//!
//! With `N` scenarios, slope number `b` and second-stage row dimension `m`:
//!
//! ```text
//! single      [1 + N(b-1)]^m
//! multi       1 + N(b^m - 1)
//! aggregated  1 + sum_a [1 + |S_a|(b-1)]^m - A
//! upper       1 + A([1 + A_L(b-1)]^m - 1)
//! dynamic     2 + sum_{a=lo..hi} C(N,a)[1 + a(b-1)]^m - sum_{a=lo..hi} S(N,a) - A_0
//! ```

use num_bigint::{BigInt, BigUint};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("{name} = {value} must be at least 1")]
    NonPositive { name: &'static str, value: usize },
    #[error("k = {k} out of range 0..={n}")]
    OutOfRange { n: usize, k: usize },
    #[error("need 1 <= lo <= hi <= N, got lo = {lo}, hi = {hi}, N = {n}")]
    Limits { lo: usize, hi: usize, n: usize },
    #[error("A_0 = {a0} outside 1..={n}")]
    InitialSize { a0: usize, n: usize },
    #[error("size list is empty")]
    EmptySizes,
}

fn positive(name: &'static str, value: usize) -> Result<(), BoundsError> {
    if value == 0 {
        Err(BoundsError::NonPositive { name, value })
    } else {
        Ok(())
    }
}

fn check_nbm(n: usize, b: usize, m: usize) -> Result<(), BoundsError> {
    positive("N", n)?;
    positive("b", b)?;
    positive("m", m)
}

pub fn binomial(n: usize, k: usize) -> Result<BigUint, BoundsError> {
    if k > n {
        return Err(BoundsError::OutOfRange { n, k });
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    Ok(acc)
}

/// Row `n` of the Stirling numbers of the second kind, `S(n, 0..=n)`, by
/// `S(n,k) = k S(n-1,k) + S(n-1,k-1)`.
pub fn stirling2_row(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::from(1u32)];
    for i in 1..=n {
        let mut next = vec![BigUint::from(0u32); i + 1];
        for k in 1..=i {
            let stay = if k < i { &row[k] * BigUint::from(k) } else { BigUint::from(0u32) };
            next[k] = stay + &row[k - 1];
        }
        row = next;
    }
    row
}

pub fn stirling2(n: usize, k: usize) -> Result<BigUint, BoundsError> {
    if k > n {
        return Err(BoundsError::OutOfRange { n, k });
    }
    Ok(stirling2_row(n).swap_remove(k))
}

/// `sum_k S(n, k)`.
pub fn bell(n: usize) -> BigUint {
    stirling2_row(n).into_iter().sum()
}

/// `1 + s(b-1)`.
fn slope_term(s: usize, b: usize, m: usize) -> BigUint {
    (BigUint::from(1u32) + BigUint::from(s) * BigUint::from(b - 1)).pow(m as u32)
}

pub fn bound_single_cut(n: usize, b: usize, m: usize) -> Result<BigUint, BoundsError> {
    check_nbm(n, b, m)?;
    Ok(slope_term(n, b, m))
}

pub fn bound_multi_cut(n: usize, b: usize, m: usize) -> Result<BigUint, BoundsError> {
    check_nbm(n, b, m)?;
    Ok(BigUint::from(1u32) + BigUint::from(n) * (BigUint::from(b).pow(m as u32) - BigUint::from(1u32)))
}

pub fn bound_aggregated(sizes: &[usize], b: usize, m: usize) -> Result<BigUint, BoundsError> {
    if sizes.is_empty() {
        return Err(BoundsError::EmptySizes);
    }
    positive("b", b)?;
    positive("m", m)?;
    let mut total = BigUint::from(1u32);
    for &s in sizes {
        positive("|S_a|", s)?;
        total += slope_term(s, b, m);
    }
    Ok(total - BigUint::from(sizes.len()))
}

pub fn bound_aggregated_upper(a: usize, a_l: usize, b: usize, m: usize) -> Result<BigUint, BoundsError> {
    positive("A", a)?;
    positive("A_L", a_l)?;
    positive("b", b)?;
    positive("m", m)?;
    Ok(BigUint::from(1u32) + BigUint::from(a) * (slope_term(a_l, b, m) - BigUint::from(1u32)))
}

/// Dynamic bound with aggregation levels restricted to `lo..=hi`. Signed,
/// because the Stirling sum can exceed the binomial sum when `b = 1`.
pub fn bound_dynamic_restricted(n: usize, b: usize, m: usize, a0: usize, lo: usize, hi: usize) -> Result<BigInt, BoundsError> {
    check_nbm(n, b, m)?;
    if a0 == 0 || a0 > n {
        return Err(BoundsError::InitialSize { a0, n });
    }
    if lo == 0 || lo > hi || hi > n {
        return Err(BoundsError::Limits { lo, hi, n });
    }
    let stirling = stirling2_row(n);
    let mut total = BigInt::from(2) - BigInt::from(a0);
    for a in lo..=hi {
        total += BigInt::from(binomial(n, a)? * slope_term(a, b, m));
        total -= BigInt::from(stirling[a].clone());
    }
    Ok(total)
}

pub fn bound_dynamic(n: usize, b: usize, m: usize, a0: usize) -> Result<BigInt, BoundsError> {
    bound_dynamic_restricted(n, b, m, a0, 1, n)
}
