//! Quadratic fields `Q(sqrt(m))`: discriminants, integral elements,
//! fundamental units and valuations at ramified primes.
//!
//! Elements are carried as `(x + y*sqrt(m)) / den` with `den` in `{1, 2}`,
//! so half-integers of `Z[(1 + sqrt(m))/2]` never force rational arithmetic.
//!
//! Valuations at a ramified odd prime `l` are read off the norm: the prime
//! `L` above `l` is fixed by conjugation and `v_L(l) = 2`, hence
//! `v_L(e) = v_l(N(e))`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, inv_mod, mul_mod, padic_valuation_big, rem_euclid_u64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadError {
    #[error("radicand must be nonzero")]
    ZeroRadicand,
    #[error("{0} is a perfect square")]
    Square(i64),
    #[error("Q(sqrt({0})) is not a real quadratic field")]
    NotReal(i64),
    #[error("({x} + {y}*sqrt({m}))/{den} is not an algebraic integer")]
    NotIntegral { x: String, y: String, m: i64, den: u8 },
    #[error("{0} is not an odd prime dividing the discriminant {1}")]
    NotRamifiedOdd(u64, i64),
    #[error("valuation of zero")]
    ZeroElement,
    #[error("modulus {0} must be odd")]
    EvenModulus(u64),
}

/// A quadratic field given by its squarefree radicand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadField {
    m: i64,
    disc: i64,
}

impl QuadField {
    pub fn radicand(&self) -> i64 {
        self.m
    }

    /// The fundamental discriminant.
    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn is_real(&self) -> bool {
        self.m > 0
    }

    /// True when the ring of integers contains `(1 + sqrt(m))/2`.
    pub fn has_half_integers(&self) -> bool {
        self.m.rem_euclid(4) == 1
    }
}

impl fmt::Display for QuadField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(sqrt({}))", self.m)
    }
}

/// Builds the field of the squarefree core of `m0`.
pub fn make_field(m0: i64) -> Result<QuadField, QuadError> {
    if m0 == 0 {
        return Err(QuadError::ZeroRadicand);
    }
    let m = arith::squarefree_core(m0).expect("nonzero");
    if m == 1 {
        return Err(QuadError::Square(m0));
    }
    let disc = if m.rem_euclid(4) == 1 { m } else { 4 * m };
    Ok(QuadField { m, disc })
}

/// An algebraic integer `(x + y*sqrt(m)) / den` of a quadratic field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadElem {
    field: QuadField,
    x: BigInt,
    y: BigInt,
    den: u8,
}

impl QuadElem {
    pub fn new(
        field: QuadField,
        x: impl Into<BigInt>,
        y: impl Into<BigInt>,
        den: u8,
    ) -> Result<Self, QuadError> {
        let (x, y) = (x.into(), y.into());
        let integral = match den {
            1 => true,
            2 => {
                x.is_even() == y.is_even() && (x.is_even() || field.has_half_integers())
            }
            _ => false,
        };
        if !integral {
            return Err(QuadError::NotIntegral {
                x: x.to_string(),
                y: y.to_string(),
                m: field.m,
                den,
            });
        }
        Ok(Self::normalized(field, x, y, den as u32))
    }

    pub fn from_int(field: QuadField, n: impl Into<BigInt>) -> Self {
        QuadElem { field, x: n.into(), y: BigInt::zero(), den: 1 }
    }

    /// `sqrt(m)` itself.
    pub fn sqrt_m(field: QuadField) -> Self {
        QuadElem { field, x: BigInt::zero(), y: BigInt::one(), den: 1 }
    }

    // den may be 1, 2 or 4 here; integrality guarantees the result fits in {1, 2}.
    fn normalized(field: QuadField, mut x: BigInt, mut y: BigInt, mut den: u32) -> Self {
        while den > 1 && x.is_even() && y.is_even() {
            x >>= 1;
            y >>= 1;
            den /= 2;
        }
        debug_assert!(den <= 2, "non-integral product");
        QuadElem { field, x, y, den: den as u8 }
    }

    pub fn field(&self) -> QuadField {
        self.field
    }

    pub fn x(&self) -> &BigInt {
        &self.x
    }

    pub fn y(&self) -> &BigInt {
        &self.y
    }

    pub fn den(&self) -> u8 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    /// `(N, T)`: the norm and trace down to `Q`.
    pub fn norm_trace(&self) -> (BigInt, BigInt) {
        let d = BigInt::from(self.den);
        let n = (&self.x * &self.x - BigInt::from(self.field.m) * &self.y * &self.y) / (&d * &d);
        let t = (&self.x << 1u32) / d;
        (n, t)
    }

    pub fn norm(&self) -> BigInt {
        self.norm_trace().0
    }

    pub fn conj(&self) -> Self {
        QuadElem { field: self.field, x: self.x.clone(), y: -&self.y, den: self.den }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut acc = QuadElem::from_int(self.field, 1);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Inverse of a unit (`|N| = 1`); `None` otherwise.
    pub fn unit_inverse(&self) -> Option<Self> {
        let n = self.norm();
        if n.is_one() {
            Some(self.conj())
        } else if n == -BigInt::one() {
            Some(-&self.conj())
        } else {
            None
        }
    }

    /// Real value under the embedding `sqrt(m) > 0`. Only meaningful for
    /// real fields; the magnitude must fit an `f64`.
    pub fn to_f64(&self) -> f64 {
        let x = self.x.to_f64().unwrap_or(f64::NAN);
        let y = self.y.to_f64().unwrap_or(f64::NAN);
        (x + y * (self.field.m as f64).sqrt()) / self.den as f64
    }

    /// Natural logarithm of `|self|` for a real field, robust to huge coefficients.
    pub fn ln_abs(&self) -> f64 {
        let bits = self.x.bits().max(self.y.bits());
        let shift = bits.saturating_sub(900);
        let x = (&self.x >> shift).to_f64().unwrap_or(0.0);
        let y = (&self.y >> shift).to_f64().unwrap_or(0.0);
        let v = (x + y * (self.field.m as f64).sqrt()) / self.den as f64;
        v.abs().ln() + shift as f64 * std::f64::consts::LN_2
    }

    /// Image in `O / modulus O` for an odd modulus, as `x + y*sqrt(m)`.
    pub fn residue(&self, modulus: u64) -> Result<(u64, u64), QuadError> {
        if modulus % 2 == 0 {
            return Err(QuadError::EvenModulus(modulus));
        }
        let red = |v: &BigInt| {
            let r = v.mod_floor(&BigInt::from(modulus));
            r.to_u64().expect("reduced below modulus")
        };
        let (mut x, mut y) = (red(&self.x), red(&self.y));
        if self.den == 2 && modulus > 1 {
            let half = inv_mod(2, modulus).expect("odd modulus");
            x = mul_mod(x, half, modulus);
            y = mul_mod(y, half, modulus);
        }
        Ok((x, y))
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.field.m;
        let mut body = String::new();
        if !self.x.is_zero() || self.y.is_zero() {
            body.push_str(&self.x.to_string());
        }
        if !self.y.is_zero() {
            let mag = self.y.abs();
            let surd = if mag.is_one() {
                format!("sqrt({m})")
            } else {
                format!("{mag}*sqrt({m})")
            };
            if body.is_empty() {
                if self.y.is_negative() {
                    body.push('-');
                }
            } else {
                body.push_str(if self.y.is_negative() { " - " } else { " + " });
            }
            body.push_str(&surd);
        }
        if self.den == 2 {
            write!(f, "({body})/2")
        } else {
            f.write_str(&body)
        }
    }
}

impl<'a> Mul<&'a QuadElem> for &'a QuadElem {
    type Output = QuadElem;
    fn mul(self, rhs: &QuadElem) -> QuadElem {
        assert_eq!(self.field, rhs.field, "elements of different fields");
        let m = BigInt::from(self.field.m);
        let x = &self.x * &rhs.x + m * &self.y * &rhs.y;
        let y = &self.x * &rhs.y + &self.y * &rhs.x;
        QuadElem::normalized(self.field, x, y, self.den as u32 * rhs.den as u32)
    }
}

fn add_sub(a: &QuadElem, b: &QuadElem, sign: i32) -> QuadElem {
    assert_eq!(a.field, b.field, "elements of different fields");
    let den = a.den.max(b.den) as u32;
    let sa = BigInt::from(den / a.den as u32);
    let sb = BigInt::from(den / b.den as u32);
    let (x, y) = if sign > 0 {
        (&a.x * &sa + &b.x * &sb, &a.y * &sa + &b.y * &sb)
    } else {
        (&a.x * &sa - &b.x * &sb, &a.y * &sa - &b.y * &sb)
    };
    QuadElem::normalized(a.field, x, y, den)
}

impl<'a> Add<&'a QuadElem> for &'a QuadElem {
    type Output = QuadElem;
    fn add(self, rhs: &QuadElem) -> QuadElem {
        add_sub(self, rhs, 1)
    }
}

impl<'a> Sub<&'a QuadElem> for &'a QuadElem {
    type Output = QuadElem;
    fn sub(self, rhs: &QuadElem) -> QuadElem {
        add_sub(self, rhs, -1)
    }
}

impl Neg for &QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        QuadElem { field: self.field, x: -&self.x, y: -&self.y, den: self.den }
    }
}

/// The fundamental unit of a real quadratic field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundUnit {
    pub elem: QuadElem,
    pub unit_norm: i8,
    /// Length of the continued-fraction period that produced the unit.
    pub period: usize,
}

impl fmt::Display for FundUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.unit_norm > 0 { "+1" } else { "-1" };
        write!(f, "{}, norm {}", self.elem, sign)
    }
}

/// One period of the continued fraction of the reduced number
/// `theta = (p0 + sqrt(m)) / q0` generating the maximal order.
struct Period {
    p0: i64,
    q0: i64,
    quotients: Vec<u64>,
}

fn reduced_period(field: &QuadField) -> Period {
    let m = field.m;
    let s = (m as u64).isqrt() as i64;
    let (p0, q0) = if field.has_half_integers() {
        (if s % 2 == 1 { s } else { s - 1 }, 2)
    } else {
        (s, 1)
    };
    let (mut p, mut q) = (p0, q0);
    let mut quotients = Vec::new();
    loop {
        let a = (p + s) / q;
        quotients.push(a as u64);
        p = a * q - p;
        q = (m - p * p) / q;
        if (p, q) == (p0, q0) {
            break;
        }
    }
    Period { p0, q0, quotients }
}

/// Minimal unit `> 1` of the ring of integers, from the continued fraction
/// of `theta` over one period: `eps = B_{L-1} theta + B_{L-2}`.
pub fn fundamental_unit(field: &QuadField) -> Result<FundUnit, QuadError> {
    if !field.is_real() {
        return Err(QuadError::NotReal(field.m));
    }
    let period = reduced_period(field);
    let (mut b_prev, mut b_cur) = (BigInt::one(), BigInt::zero());
    for &a in &period.quotients {
        let next = &b_cur * a + &b_prev;
        b_prev = std::mem::replace(&mut b_cur, next);
    }
    let x = &b_cur * period.p0 + &b_prev * period.q0;
    let elem = QuadElem::new(*field, x, b_cur, period.q0 as u8)?;
    let unit_norm: i8 = if period.quotients.len() % 2 == 0 { 1 } else { -1 };
    debug_assert_eq!(elem.norm(), BigInt::from(unit_norm));
    Ok(FundUnit { elem, unit_norm, period: period.quotients.len() })
}

/// `N(eps) = (-1)^L` for the period length `L`, without building `eps`.
pub fn fundamental_unit_norm(field: &QuadField) -> i8 {
    assert!(field.is_real(), "norm of the fundamental unit needs a real field");
    if reduced_period(field).quotients.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A unit reduced into `O / modulus O` for odd `modulus`: `x + y*sqrt(m)`
/// with any denominator already folded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitResidue {
    pub m: i64,
    pub modulus: u64,
    pub x: u64,
    pub y: u64,
    pub norm: i8,
}

impl UnitResidue {
    pub fn trace(&self) -> u64 {
        (2 * self.x as u128 % self.modulus as u128) as u64
    }

    /// Reduces to a divisor of the current modulus.
    pub fn reduce(&self, modulus: u64) -> UnitResidue {
        assert!(self.modulus % modulus == 0, "{modulus} does not divide {}", self.modulus);
        UnitResidue { x: self.x % modulus, y: self.y % modulus, modulus, ..*self }
    }
}

impl FundUnit {
    pub fn residue(&self, modulus: u64) -> Result<UnitResidue, QuadError> {
        let (x, y) = self.elem.residue(modulus)?;
        Ok(UnitResidue { m: self.elem.field.m, modulus, x, y, norm: self.unit_norm })
    }
}

/// The fundamental unit reduced modulo an odd `modulus`, computed without
/// ever forming the full-size coefficients.
pub fn fundamental_unit_mod(field: &QuadField, modulus: u64) -> Result<UnitResidue, QuadError> {
    if !field.is_real() {
        return Err(QuadError::NotReal(field.m));
    }
    if modulus % 2 == 0 {
        return Err(QuadError::EvenModulus(modulus));
    }
    let period = reduced_period(field);
    let (mut b_prev, mut b_cur) = (1 % modulus, 0u64);
    for &a in &period.quotients {
        let next = (mul_mod(b_cur, a % modulus, modulus) + b_prev) % modulus;
        b_prev = std::mem::replace(&mut b_cur, next);
    }
    let mut x = (mul_mod(b_cur, rem_euclid_u64(period.p0, modulus), modulus)
        + mul_mod(b_prev, period.q0 as u64 % modulus, modulus))
        % modulus;
    let mut y = b_cur;
    if period.q0 == 2 && modulus > 1 {
        let half = inv_mod(2, modulus).expect("odd modulus");
        x = mul_mod(x, half, modulus);
        y = mul_mod(y, half, modulus);
    }
    let norm = if period.quotients.len() % 2 == 0 { 1 } else { -1 };
    Ok(UnitResidue { m: field.m, modulus, x, y, norm })
}

/// A valuation that is either known exactly or only bounded below, as
/// happens when it is read off a residue modulo `l^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Exact(u32),
    AtLeast(u32),
}

impl Valuation {
    /// True when the valuation is certainly `<= bound`.
    pub fn at_most(&self, bound: u32) -> bool {
        matches!(*self, Valuation::Exact(v) if v <= bound)
    }

    /// Caps an exact value so exact and residue computations compare equal.
    pub fn capped(&self, cap: u32) -> Valuation {
        match *self {
            Valuation::Exact(v) if v >= cap => Valuation::AtLeast(cap),
            Valuation::AtLeast(v) if v >= cap => Valuation::AtLeast(cap),
            other => other,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Valuation::Exact(v) => s.serialize_u32(*v),
            Valuation::AtLeast(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Valuation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Valuation::Exact(v)),
            Raw::Str(s) => s
                .strip_prefix(">=")
                .and_then(|v| v.parse().ok())
                .map(Valuation::AtLeast)
                .ok_or_else(|| serde::de::Error::custom(format!("bad valuation {s:?}"))),
        }
    }
}

/// `v_L(e)` at the prime `L` above an odd ramified prime `l`.
pub fn ramified_valuation(e: &QuadElem, l: u64) -> Result<u32, QuadError> {
    check_ramified_odd(&e.field, l)?;
    if e.is_zero() {
        return Err(QuadError::ZeroElement);
    }
    Ok(padic_valuation_big(&e.norm(), l))
}

fn check_ramified_odd(field: &QuadField, l: u64) -> Result<(), QuadError> {
    if l == 2 || !arith::is_prime(l) || field.disc % l as i64 != 0 {
        return Err(QuadError::NotRamifiedOdd(l, field.disc));
    }
    Ok(())
}

/// `v_L(u^2 - 1)` for a unit known modulo a multiple of `l^3`, reported as
/// `>=3` when the residue cannot tell.
///
/// Uses `N(u^2 - 1) = N(u - 1) N(u + 1) = (N - T + 1)(N + T + 1)`.
pub fn unit_square_minus_one_valuation(
    unit: &UnitResidue,
    field: &QuadField,
    l: u64,
) -> Result<Valuation, QuadError> {
    check_ramified_odd(field, l)?;
    let l3 = l * l * l;
    assert!(unit.modulus % l3 == 0, "residue modulus must be a multiple of l^3");
    let t = unit.trace() % l3;
    let n = rem_euclid_u64(unit.norm as i64, l3);
    let minus = (n + 1 + l3 - t) % l3;
    let plus = (n + 1 + t) % l3;
    let prod = mul_mod(minus, plus, l3);
    if prod == 0 {
        return Ok(Valuation::AtLeast(3));
    }
    Ok(Valuation::Exact(arith::val_u64(prod, l)))
}

/// `v_L(w - 1)` for `w = u^(2(l-1))`, the projection of `u^2` to the
/// principal units at the ramified prime `L`, capped at 3. Equals
/// `v_L(u^2 - 1)` whenever that is at least 1.
///
/// `N(w) = 1`, so `N(w - 1) = 2 - T(w)`; `T(u^k)` follows the Lucas
/// recurrence `V_(k+1) = T V_k - N V_(k-1)` modulo `l^3`.
pub fn principal_unit_valuation(unit: &UnitResidue, field: &QuadField, l: u64) -> Result<Valuation, QuadError> {
    check_ramified_odd(field, l)?;
    let l3 = l * l * l;
    assert!(unit.modulus % l3 == 0, "residue modulus must be a multiple of l^3");
    let t = unit.trace() % l3;
    let n = rem_euclid_u64(unit.norm as i64, l3);
    let (mut v_prev, mut v_cur) = (2 % l3, t);
    for _ in 1..2 * (l - 1) {
        let next = (mul_mod(t, v_cur, l3) + l3 - mul_mod(n, v_prev, l3)) % l3;
        v_prev = std::mem::replace(&mut v_cur, next);
    }
    let d = (2 + l3 - v_cur) % l3;
    if d == 0 {
        return Ok(Valuation::AtLeast(3));
    }
    Ok(Valuation::Exact(arith::val_u64(d, l)))
}

/// Exact `v_L(u^2 - 1)`; `u^2 - 1 = 0` never happens for a unit `> 1`.
pub fn unit_square_minus_one_valuation_exact(unit: &FundUnit, l: u64) -> Result<Valuation, QuadError> {
    let one = QuadElem::from_int(unit.elem.field, 1);
    let e = &(&unit.elem * &unit.elem) - &one;
    ramified_valuation(&e, l).map(Valuation::Exact)
}
