//! Class numbers of quadratic fields by counting reduced binary quadratic
//! forms.
//!
//! Imaginary discriminants: the number of reduced positive definite forms
//! is `h`. Real discriminants: reduced indefinite forms fall into cycles
//! under the reduction step `rho`, one cycle per narrow class, so the cycle
//! count is `h+`; the wide `h` follows from the sign of `N(eps)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith;
use crate::quadratic::{self, QuadField};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassNoError {
    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),
    #[error("expected a negative discriminant, got {0}")]
    NotNegative(i64),
    #[error("expected a positive discriminant, got {0}")]
    NotPositive(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enumeration,
    Charsum,
    Cycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassNumberResult {
    pub disc: i64,
    pub h: u64,
    /// Narrow class number; only present for real discriminants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_plus: Option<u64>,
    pub method: Method,
}

impl ClassNumberResult {
    /// Whether the prime `p` divides the class number. For odd `p` this is
    /// the same question for `h` and `h+`.
    pub fn divisible_by(&self, p: u64) -> bool {
        self.h % p == 0
    }
}

/// `(a, b, c)` with `b^2 - 4ac < 0` and `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImagForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl ImagForm {
    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        a > 0 && b.abs() <= a && a <= c && (b >= 0 || (b.abs() != a && a != c))
    }
}

/// `(a, b, c)` with `b^2 - 4ac > 0` not a square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndefForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl IndefForm {
    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    /// `0 < b < sqrt(D)` and `sqrt(D) - b < 2|a| < sqrt(D) + b`, decided
    /// with integer comparisons only.
    pub fn is_reduced(&self) -> bool {
        let d = self.disc();
        if d <= 0 {
            return false;
        }
        let (a2, b) = (2 * self.a.abs(), self.b);
        b > 0 && b * b < d && (a2 + b) * (a2 + b) > d && (a2 <= b || (a2 - b) * (a2 - b) < d)
    }

    /// The reduction step: `(a, b, c) -> (c, b', c')` with `b' = -b mod 2|c|`
    /// and `sqrt(D) - 2|c| < b' < sqrt(D)`.
    pub fn rho(&self) -> IndefForm {
        let d = self.disc();
        let s = (d as u64).isqrt() as i64;
        let m2 = 2 * self.c.abs();
        let b = s - (s + self.b).rem_euclid(m2);
        let c = (b * b - d) / (4 * self.c);
        IndefForm { a: self.c, b, c }
    }
}

pub fn is_fundamental(disc: i64) -> bool {
    match disc.rem_euclid(4) {
        1 => disc != 1 && arith::is_squarefree(disc),
        0 => {
            let m = disc / 4;
            matches!(m.rem_euclid(4), 2 | 3) && arith::is_squarefree(m)
        }
        _ => false,
    }
}

fn field_of(disc: i64) -> QuadField {
    let m = if disc.rem_euclid(4) == 1 { disc } else { disc / 4 };
    quadratic::make_field(m).expect("fundamental discriminants are never squares")
}

/// All reduced positive definite forms of discriminant `disc < 0`.
pub fn reduced_imaginary_forms(disc: i64) -> Vec<ImagForm> {
    let mut forms = Vec::new();
    each_reduced_imaginary(disc, |f| forms.push(f));
    forms
}

fn each_reduced_imaginary(disc: i64, mut visit: impl FnMut(ImagForm)) {
    let n = -disc;
    let a_max = (n as u64 / 3).isqrt() as i64;
    let parity = disc.rem_euclid(2);
    for a in 1..=a_max {
        let four_a = 4 * a;
        let mut b = -a + 1;
        if b.rem_euclid(2) != parity {
            b += 1;
        }
        while b <= a {
            let num = b * b + n;
            if num % four_a == 0 {
                let c = num / four_a;
                if c >= a && !(b < 0 && a == c) {
                    visit(ImagForm { a, b, c });
                }
            }
            b += 2;
        }
    }
}

/// `h(D)` for a fundamental `D < 0`.
pub fn h_imaginary(disc: i64) -> Result<ClassNumberResult, ClassNoError> {
    if disc >= 0 {
        return Err(ClassNoError::NotNegative(disc));
    }
    if !is_fundamental(disc) {
        return Err(ClassNoError::NotFundamental(disc));
    }
    let mut h = 0;
    each_reduced_imaginary(disc, |_| h += 1);
    Ok(ClassNumberResult { disc, h, h_plus: None, method: Method::Enumeration })
}

/// All reduced indefinite forms of discriminant `disc > 0`, sorted.
pub fn reduced_indefinite_forms(disc: i64) -> Vec<IndefForm> {
    let s = (disc as u64).isqrt() as i64;
    let mut forms = Vec::new();
    let mut b = if (s - disc).rem_euclid(2) == 0 { s } else { s - 1 };
    while b > 0 {
        let n = (disc - b * b) / 4;
        let lo = ((s - b) / 2).max(1);
        let hi = (s + b) / 2 + 1;
        for a in lo..=hi {
            if n % a != 0 {
                continue;
            }
            let f = IndefForm { a, b, c: -n / a };
            if f.is_reduced() {
                forms.push(f);
                forms.push(IndefForm { a: -a, b, c: n / a });
            }
        }
        b -= 2;
    }
    forms.sort_unstable();
    forms
}

/// Partitions the reduced forms into `rho`-cycles.
pub fn rho_cycles(disc: i64) -> Vec<Vec<IndefForm>> {
    let forms = reduced_indefinite_forms(disc);
    let index: HashMap<IndefForm, usize> = forms.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut seen = vec![false; forms.len()];
    let mut cycles = Vec::new();
    for start in 0..forms.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push(forms[i]);
            let next = forms[i].rho();
            i = *index
                .get(&next)
                .unwrap_or_else(|| panic!("rho left the reduced set: {next:?}"));
        }
        debug_assert_eq!(i, start, "rho is a permutation of the reduced forms");
        cycles.push(cycle);
    }
    cycles
}

/// `h+(D)` and `h(D)` for a fundamental `D > 0`.
pub fn h_plus_real(disc: i64) -> Result<ClassNumberResult, ClassNoError> {
    if disc <= 0 {
        return Err(ClassNoError::NotPositive(disc));
    }
    if !is_fundamental(disc) {
        return Err(ClassNoError::NotFundamental(disc));
    }
    let h_plus = rho_cycles(disc).len() as u64;
    let norm = quadratic::fundamental_unit_norm(&field_of(disc));
    let h = if norm < 0 { h_plus } else { h_plus / 2 };
    Ok(ClassNumberResult { disc, h, h_plus: Some(h_plus), method: Method::Cycles })
}

/// Dispatches on the sign of the discriminant.
pub fn class_number(disc: i64) -> Result<ClassNumberResult, ClassNoError> {
    if disc < 0 {
        h_imaginary(disc)
    } else {
        h_plus_real(disc)
    }
}
