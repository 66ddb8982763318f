//! Integer number theory on machine words: primality, factorization,
//! Kronecker symbols, valuations and multiplicative orders.
//!
//! Everything here works on `u64`/`i64`. Products are taken in `u128`, so no
//! routine overflows for inputs inside the 64-bit range.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{0} is not coprime to the modulus {1}")]
    NotCoprime(i64, u64),
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("cannot factor zero")]
    Zero,
    #[error("{0} is not prime")]
    NotPrime(u64),
}

/// A complete factorization of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    /// `(prime, exponent)` pairs with strictly increasing primes.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Multiplies the factorization back out.
    pub fn value(&self) -> u64 {
        self.factors
            .iter()
            .fold(1u64, |acc, &(p, e)| acc * p.pow(e))
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Reduces a signed value into `[0, m)`.
#[inline]
pub fn rem_euclid_u64(a: i64, m: u64) -> u64 {
    (a as i128).rem_euclid(m as i128) as u64
}

pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let g = (a as i128).extended_gcd(&(m as i128));
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.rem_euclid(m as i128) as u64)
}

const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller-Rabin. The first twelve primes as witnesses are
/// known to be sufficient for every `n < 3.3 * 10^24`, hence for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

const TRIAL_LIMIT: u64 = 1_000_000;

/// Factors `|n|` and returns the sign of `n` alongside.
pub fn factor(n: i64) -> Result<(i8, Factorization), ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    let sign = if n < 0 { -1 } else { 1 };
    Ok((sign, factor_u64(n.unsigned_abs())))
}

pub fn factor_u64(n: u64) -> Factorization {
    let mut primes = Vec::new();
    let mut rest = n;
    let mut push = |p: u64, rest: &mut u64| {
        let mut e = 0;
        while *rest % p == 0 {
            *rest /= p;
            e += 1;
        }
        if e > 0 {
            primes.push((p, e));
        }
    };
    push(2, &mut rest);
    let mut d = 3;
    while d <= TRIAL_LIMIT && d * d <= rest {
        push(d, &mut rest);
        d += 2;
    }
    if rest > 1 {
        let mut large = Vec::new();
        split_large(rest, &mut large);
        large.sort_unstable();
        for p in large {
            match primes.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => primes.push((p, 1)),
            }
        }
    }
    Factorization { n, factors: primes }
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_large(d, out);
    split_large(n / d, out);
}

fn pollard_brent(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        while g == 1 {
            x = f(x);
            y = f(f(y));
            g = x.abs_diff(y).gcd(&n);
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

/// Kronecker symbol `(a | n)`.
pub fn kronecker(a: i64, n: i64) -> i8 {
    let mut a = a as i128;
    let mut n = n as i128;
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut result: i8 = 1;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        n >>= twos;
        // (a|2) = +1 for a = +-1 mod 8, -1 for a = +-3 mod 8
        let a8 = a.rem_euclid(8);
        if twos % 2 == 1 && (a8 == 3 || a8 == 5) {
            result = -result;
        }
    }
    // Jacobi symbol for odd positive n.
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let n8 = n % 8;
            if n8 == 3 || n8 == 5 {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// Splits `n = l^v * cofactor` with `l` not dividing the cofactor.
///
/// `n` must be nonzero; for `n = 0` the loop would not terminate, so the
/// function panics instead.
pub fn padic_valuation(n: i64, l: u64) -> (u32, i64) {
    assert!(n != 0, "valuation of zero");
    assert!(l >= 2);
    let l = l as i64;
    let (mut v, mut c) = (0, n);
    while c % l == 0 {
        c /= l;
        v += 1;
    }
    (v, c)
}

/// `v_l(n)` for an arbitrary-precision nonzero integer.
pub fn padic_valuation_big(n: &BigInt, l: u64) -> u32 {
    assert!(!n.is_zero(), "valuation of zero");
    let l = BigInt::from(l);
    let mut c = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = c.div_rem(&l);
        if !r.is_zero() {
            return v;
        }
        c = q;
        v += 1;
    }
}

/// Euler's totient via factorization.
pub fn totient(m: u64) -> u64 {
    factor_u64(m)
        .factors
        .iter()
        .fold(1, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Least `k >= 1` with `a^k = 1 (mod m)`.
pub fn mult_order(a: i64, m: u64) -> Result<u64, ArithError> {
    if m < 2 {
        return Err(ArithError::BadModulus(m));
    }
    let a_red = rem_euclid_u64(a, m);
    if a_red.gcd(&m) != 1 {
        return Err(ArithError::NotCoprime(a, m));
    }
    let mut order = totient(m);
    for &(p, _) in &factor_u64(order).factors {
        while order % p == 0 && pow_mod(a_red, order / p, m) == 1 {
            order /= p;
        }
    }
    Ok(order)
}

/// `v_l(n)` for nonzero `n`.
pub fn val_u64(mut n: u64, l: u64) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    while n % l == 0 {
        n /= l;
        v += 1;
    }
    v
}

/// A square root of `a` modulo an odd prime `p` (Tonelli-Shanks).
pub fn sqrt_mod_prime(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    let (mut q, mut s) = (p - 1, 0);
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let z = (2..p).find(|&z| pow_mod(z, (p - 1) / 2, p) == p - 1)?;
    let mut c = pow_mod(z, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    let mut t = pow_mod(a, q, p);
    let mut m = s;
    while t != 1 {
        let mut i = 1;
        let mut t2 = mul_mod(t, t, p);
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        r = mul_mod(r, b, p);
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        m = i;
    }
    Some(r)
}

pub fn is_square(n: i64) -> bool {
    n >= 0 && {
        let r = (n as u64).isqrt();
        r * r == n as u64
    }
}

/// Squarefree kernel carrying the sign of `n`: `n = core * k^2`.
pub fn squarefree_core(n: i64) -> Result<i64, ArithError> {
    let (sign, f) = factor(n)?;
    let core = f
        .factors
        .iter()
        .filter(|&&(_, e)| e % 2 == 1)
        .fold(1i64, |acc, &(p, _)| acc * p as i64);
    Ok(sign as i64 * core)
}

pub fn is_squarefree(n: i64) -> bool {
    n != 0 && factor_u64(n.unsigned_abs()).is_squarefree()
}
