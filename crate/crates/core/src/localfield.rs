//! Completions of quadratic fields at a prime `p >= 5` and at tame primes.
//!
//! Every p-th-power decision is a finite congruence modulo `p^2`:
//!
//! * A unit `u` is a p-th power iff `u^(N-1)` is, where `N` is the size of
//!   the residue field. Raising to `N - 1` kills the Teichmuller part, and
//!   `x -> x^(N-1)` permutes principal units because `N - 1` is prime to `p`.
//! * Unramified (split or inert): `(1 + p^i O)^p = 1 + p^(i+1) O`, so the
//!   principal p-th powers are exactly `1 + p^2 O`.
//! * Ramified (`e = 2`, uniformizer `pi = sqrt(m)`): for `x` in `pi^i O`,
//!   `(1 + x)^p = 1 + p x + ... + x^p` with `v(p x) = i + 2 < v(x^p) = p i`
//!   once `p >= 5`, hence `(U^1)^p = U^3`. Writing `w - 1 = A + B sqrt(m)`,
//!   `w` lies in `U^3` iff `p^2 | A` and `p | B`.
//!
//! The same reasoning covers the quartic field of the family at its prime
//! above `p`: that extension of the real completion is unramified, so
//! `pi`-adic valuations of real elements, and with them the threshold
//! `v_pi(u - 1) < 3`, are unchanged.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, inv_mod, kronecker, mul_mod, padic_valuation_big, pow_mod, rem_euclid_u64};
use crate::quadratic::{QuadElem, QuadField, UnitResidue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalError {
    #[error("p = {0} is not supported; local tests need a prime p >= 5")]
    SmallPrime(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("element is not a unit: norm {0}")]
    NotUnit(String),
    #[error("residue field size {t} must be at least 2 and prime to {p}")]
    BadResidueField { t: u64, p: u64 },
    #[error("q = p = {0}")]
    SamePrime(u64),
    #[error("residue degree {0} must be 1, 2 or 4")]
    BadDegree(u32),
    #[error("residue modulus {have} is not a multiple of p^2 = {need}")]
    Modulus { have: u64, need: u64 },
}

/// How `p` decomposes in the quadratic field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// Square roots `r` and `p^2 - r` of `m` modulo `p^2`, one per place.
    Split { roots: [u64; 2] },
    Inert,
    Ramified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalContext {
    pub p: u64,
    pub field: QuadField,
    pub kind: Splitting,
}

impl LocalContext {
    pub fn p_squared(&self) -> u64 {
        self.p * self.p
    }

    pub fn places(&self) -> usize {
        match self.kind {
            Splitting::Split { .. } => 2,
            _ => 1,
        }
    }
}

fn check_p(p: u64) -> Result<(), LocalError> {
    if p < 5 {
        return Err(LocalError::SmallPrime(p));
    }
    if !arith::is_prime(p) {
        return Err(LocalError::NotPrime(p));
    }
    Ok(())
}

pub fn classify_splitting(field: &QuadField, p: u64) -> Result<LocalContext, LocalError> {
    check_p(p)?;
    let kind = if field.disc() % p as i64 == 0 {
        Splitting::Ramified
    } else if kronecker(field.disc(), p as i64) == 1 {
        let p2 = p * p;
        let m = rem_euclid_u64(field.radicand(), p2);
        let r0 = arith::sqrt_mod_prime(m % p, p).expect("split prime has a root");
        // Hensel: r1 = r0 - (r0^2 - m) / (2 r0) mod p^2
        let f = (mul_mod(r0, r0, p2) + p2 - m) % p2;
        let inv = inv_mod(mul_mod(2, r0, p2), p2).expect("root is a unit");
        let r1 = (r0 + p2 - mul_mod(f, inv, p2)) % p2;
        let (a, b) = (r1.min(p2 - r1), r1.max(p2 - r1));
        Splitting::Split { roots: [a, b] }
    } else {
        Splitting::Inert
    };
    Ok(LocalContext { p, field: *field, kind })
}

/// An element `a + b sqrt(m)` of `O / n O` for odd `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModSqrtElem {
    pub a: u64,
    pub b: u64,
    m: u64,
    modulus: u64,
}

impl ModSqrtElem {
    pub fn new(a: u64, b: u64, radicand: i64, modulus: u64) -> Self {
        ModSqrtElem {
            a: a % modulus,
            b: b % modulus,
            m: rem_euclid_u64(radicand, modulus),
            modulus,
        }
    }

    pub fn one(radicand: i64, modulus: u64) -> Self {
        Self::new(1, 0, radicand, modulus)
    }

    pub fn from_elem(u: &QuadElem, modulus: u64) -> Self {
        let (a, b) = u.residue(modulus).expect("odd modulus");
        Self::new(a, b, u.field().radicand(), modulus)
    }

    pub fn from_residue(u: &UnitResidue, modulus: u64) -> Self {
        let r = u.reduce(modulus);
        Self::new(r.x, r.y, u.m, modulus)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.modulus;
        let a = (mul_mod(self.a, o.a, n) + mul_mod(self.m, mul_mod(self.b, o.b, n), n)) % n;
        let b = (mul_mod(self.a, o.b, n) + mul_mod(self.b, o.a, n)) % n;
        ModSqrtElem { a, b, ..*self }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut acc = ModSqrtElem { a: 1 % self.modulus, b: 0, ..*self };
        let mut base = *self;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn neg(&self) -> Self {
        let n = self.modulus;
        ModSqrtElem { a: (n - self.a) % n, b: (n - self.b) % n, ..*self }
    }

    pub fn conj(&self) -> Self {
        let n = self.modulus;
        ModSqrtElem { b: (n - self.b) % n, ..*self }
    }

    pub fn norm(&self) -> u64 {
        let n = self.modulus;
        let bb = mul_mod(self.m, mul_mod(self.b, self.b, n), n);
        (mul_mod(self.a, self.a, n) + n - bb) % n
    }

    /// Inverse of a residue with norm `+-1`.
    pub fn unit_inverse(&self) -> Option<Self> {
        let n = self.norm();
        if n == 1 {
            Some(self.conj())
        } else if n == self.modulus - 1 {
            Some(self.conj().neg())
        } else {
            None
        }
    }

    fn is_one(&self) -> bool {
        self.a == 1 % self.modulus && self.b == 0
    }
}

fn norm_is_pm_one(u: &ModSqrtElem) -> bool {
    let n = u.norm();
    n == 1 || n == u.modulus - 1
}

/// Decides, place by place above `p`, whether the unit `u` is a p-th power
/// in the completion. Returns one flag for ramified and inert `p`, two for
/// split `p` (ordered like the roots in the context).
pub fn is_pth_power_local(u: &QuadElem, ctx: &LocalContext) -> Result<Vec<bool>, LocalError> {
    check_p(ctx.p)?;
    let n = u.norm();
    if !(n.is_one() || n == -BigInt::one()) {
        return Err(LocalError::NotUnit(n.to_string()));
    }
    Ok(pth_power_flags(&ModSqrtElem::from_elem(u, ctx.p_squared()), ctx))
}

/// Same decision for a unit known only modulo `p^2` (or a multiple).
pub fn is_pth_power_residue(u: &ModSqrtElem, ctx: &LocalContext) -> Result<Vec<bool>, LocalError> {
    check_p(ctx.p)?;
    let p2 = ctx.p_squared();
    if u.modulus % p2 != 0 {
        return Err(LocalError::Modulus { have: u.modulus, need: p2 });
    }
    let u = ModSqrtElem::new(u.a, u.b, ctx.field.radicand(), p2);
    if !norm_is_pm_one(&u) {
        return Err(LocalError::NotUnit(format!("{} (mod {p2})", u.norm())));
    }
    Ok(pth_power_flags(&u, ctx))
}

fn pth_power_flags(u: &ModSqrtElem, ctx: &LocalContext) -> Vec<bool> {
    let p = ctx.p;
    let p2 = p * p;
    match ctx.kind {
        Splitting::Ramified => {
            let w = u.pow(p - 1);
            let a = (w.a + p2 - 1) % p2;
            vec![a % p2 == 0 && w.b % p == 0]
        }
        Splitting::Inert => vec![u.pow(p2 - 1).is_one()],
        Splitting::Split { roots } => roots
            .iter()
            .map(|&r| {
                let image = (u.a + mul_mod(u.b, r, p2)) % p2;
                pow_mod(image, p - 1, p2) == 1
            })
            .collect(),
    }
}

/// Whether a tame local field with residue field of size `t` contains the
/// p-th roots of unity (Hensel: iff `p | t - 1`).
pub fn mu_p_in_local(t: u64, p: u64) -> Result<bool, LocalError> {
    if t < 2 || t % p == 0 {
        return Err(LocalError::BadResidueField { t, p });
    }
    Ok((t - 1) % p == 0)
}

/// Number of places of the cyclotomic `Z_p`-extension above a single prime
/// of residue degree `f` over `q`: with `t = q^f` and `d0` the order of `t`
/// mod `p`, it is `p^max(0, v_p(t^d0 - 1) - 1)`.
///
/// Assumes the base field meets the cyclotomic tower trivially, which holds
/// whenever its degree is prime to `p`.
pub fn tower_places(q: u64, f: u32, p: u64) -> Result<u64, LocalError> {
    check_p(p)?;
    if q == p {
        return Err(LocalError::SamePrime(p));
    }
    if !matches!(f, 1 | 2 | 4) {
        return Err(LocalError::BadDegree(f));
    }
    if !arith::is_prime(q) {
        return Err(LocalError::NotPrime(q));
    }
    let t = BigInt::from(q).pow(f);
    let t_mod_p = (&t % p).to_u64().expect("reduced");
    let d0 = arith::mult_order(t_mod_p as i64, p).expect("q prime to p");
    let v = padic_valuation_big(&(t.pow(d0 as u32) - 1u32), p);
    Ok(p.pow(v.saturating_sub(1)))
}
