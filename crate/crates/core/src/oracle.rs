//! Independent brute-force routines used to cross-check the fast paths.
//!
//! Nothing in here feeds a verdict. Each routine recomputes a quantity by a
//! route that shares no code with the production path it is compared to:
//! character sums for class numbers, an analytic class number formula for
//! real fields, exhaustive p-th-root search for the ramified unit test,
//! layer-by-layer Frobenius orders for the cyclotomic tower and direct
//! Pell search for fundamental units.

use std::f64::consts::PI;

use thiserror::Error;

use crate::arith::{self, kronecker, pow_mod};
use crate::classno::is_fundamental;
use crate::localfield::{LocalContext, ModSqrtElem, Splitting};
use crate::quadratic::{FundUnit, QuadField};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("discriminant {0} outside the oracle's range")]
    Range(i64),
    #[error("oracle only runs for p in {{5, 7}} on a ramified context, got p = {0}")]
    Unsupported(u64),
    #[error("character sum {sum} not divisible by {div}")]
    Inexact { sum: i64, div: i64 },
}

/// `h(D) = (2 - chi(2))^-1 * sum_{0 < a < |D|/2} chi(a)` for fundamental `D < -4`.
pub fn h_charsum(disc: i64) -> Result<u64, OracleError> {
    if disc >= -4 || !is_fundamental(disc) {
        return Err(OracleError::Range(disc));
    }
    let n = -disc;
    let sum: i64 = (1..(n + 1) / 2).map(|a| kronecker(disc, a) as i64).sum();
    let div = 2 - kronecker(disc, 2) as i64;
    if sum % div != 0 {
        return Err(OracleError::Inexact { sum, div });
    }
    Ok((sum / div) as u64)
}

/// `L(1, chi_D)` for fundamental `D > 0` through the finite sum
/// `-D^(-1/2) * sum_{a=1}^{D-1} chi(a) ln sin(pi a / D)`.
pub fn l_one_real(disc: i64) -> Result<f64, OracleError> {
    if disc <= 0 || !is_fundamental(disc) {
        return Err(OracleError::Range(disc));
    }
    let d = disc as f64;
    let s: f64 = (1..disc)
        .map(|a| kronecker(disc, a) as f64 * (PI * a as f64 / d).sin().ln())
        .sum();
    Ok(-s / d.sqrt())
}

/// `h = sqrt(D) L(1, chi) / (2 ln eps)`, unrounded.
pub fn h_real_analytic(disc: i64, unit: &FundUnit) -> Result<f64, OracleError> {
    let l = l_one_real(disc)?;
    Ok((disc as f64).sqrt() * l / (2.0 * unit.elem.ln_abs()))
}

/// Whether some `x = a + b sqrt(m)` (`a mod p^2`, `b mod p`) has
/// `x^p = u` modulo `pi^4`, i.e. with `p^2 | dA` and `p | dB`. Since
/// `U^4` lies inside the p-th powers, this decides p-th powers exactly.
pub fn pth_power_ramified(u: &ModSqrtElem, ctx: &LocalContext) -> Result<bool, OracleError> {
    let p = ctx.p;
    if !matches!(p, 5 | 7) || ctx.kind != Splitting::Ramified {
        return Err(OracleError::Unsupported(p));
    }
    let p2 = p * p;
    let m = ctx.field.radicand();
    let target = ModSqrtElem::new(u.a, u.b, m, p2);
    for a in 0..p2 {
        for b in 0..p {
            let y = ModSqrtElem::new(a, b, m, p2).pow(p);
            if (y.a + p2 - target.a) % p2 == 0 && (y.b + p2 - target.b) % p == 0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Places above `q` in the `n`-th layer: `p^n` over the p-part of the order
/// of `t = q^f` in `(Z/p^(n+1))^x`.
pub fn tower_layer_places(q: u64, f: u32, p: u64, n: u32) -> u64 {
    let modulus = p.pow(n + 1);
    let t = pow_mod(q, f as u64, modulus);
    let ord = arith::mult_order(t as i64, modulus).expect("q prime to p");
    let p_part = p.pow(arith::val_u64(ord, p));
    p.pow(n) / p_part
}

/// Walks up the tower until the place count stops growing below `p^n`.
pub fn tower_places_stabilized(q: u64, f: u32, p: u64) -> u64 {
    let mut prev = tower_layer_places(q, f, p, 1);
    let mut n = 2;
    while p.checked_pow(n + 1).is_some_and(|m| m < (1 << 62)) {
        let cur = tower_layer_places(q, f, p, n);
        if cur == prev && cur < p.pow(n) {
            return cur;
        }
        prev = cur;
        n += 1;
    }
    prev
}

/// Smallest unit `(x + y sqrt(m))/den > 1` found by testing every `y` up to
/// `y_limit`. For `m = 1 mod 4` the search runs on `x^2 - m y^2 = +-4`, so
/// `y` is counted on the `(x + y sqrt(m))/2` scale.
pub fn smallest_unit_up_to(field: &QuadField, y_limit: u128) -> Option<(u128, u128, u8)> {
    let m = field.radicand() as u128;
    let half = field.has_half_integers();
    let k: u128 = if half { 4 } else { 1 };
    for y in 1..=y_limit {
        let t = m * y * y;
        for cand in [t - k, t + k] {
            let x = cand.isqrt();
            if x * x == cand {
                if half {
                    if x % 2 == y % 2 {
                        let den = if x % 2 == 0 { 1 } else { 2 };
                        return Some(if den == 1 { (x / 2, y / 2, 1) } else { (x, y, 2) });
                    }
                } else {
                    return Some((x, y, 1));
                }
            }
        }
    }
    None
}
