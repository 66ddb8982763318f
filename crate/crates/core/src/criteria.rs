//! p-rationality of quadratic and biquadratic fields, and the freeness
//! certificate for `K = Q(sqrt(pq), sqrt(-d))`.
//!
//! Quadratic fields: an imaginary field is p-rational when `p` does not
//! divide `h`; a real field when additionally its fundamental unit is not a
//! p-th power at any place above `p`. A biquadratic field (degree prime to
//! odd `p`) is p-rational iff its three quadratic subfields are.
//!
//! For the family, the fundamental unit `eps` of `K+ = Q(sqrt(pq))` stands in
//! for the unit group of `K`: `Z_p (x) E_K` has rank one and `<eps^2>` has
//! index dividing 4 in it, so no p-adic statement changes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, kronecker};
use crate::classno::{self, ClassNumberResult};
use crate::localfield::{self, ModSqrtElem, Splitting};
use crate::quadratic::{self, FundUnit, QuadError, QuadField, UnitResidue, Valuation};

/// How the fundamental unit of a real field is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitMode {
    /// Full-size coefficients.
    #[default]
    Exact,
    /// Coefficients reduced modulo `p^3` and `q^3` along the continued
    /// fraction; valuations of 3 or more come back as `>=3`.
    Residue,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PratError {
    #[error("p = {0} must be a prime >= 5")]
    BadPrime(u64),
    #[error(transparent)]
    Field(#[from] QuadError),
    #[error("Q(sqrt({0}), sqrt({1})) is not biquadratic")]
    Degenerate(i64, i64),
    #[error("radicand product overflows")]
    Overflow,
}

fn check_prime(p: u64) -> Result<(), PratError> {
    if p < 5 || !arith::is_prime(p) {
        return Err(PratError::BadPrime(p));
    }
    Ok(())
}

/// Outcome of the p-th-power test on a fundamental unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCheck {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub norm: i8,
    pub splitting: Splitting,
    /// One flag per place above `p`: is the unit a p-th power there.
    pub pth_power: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubfieldReport {
    pub radicand: i64,
    pub class_number: ClassNumberResult,
    pub p_divides_h: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<UnitCheck>,
    pub p_rational: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PRationalityReport {
    pub p: u64,
    pub radicands: Vec<i64>,
    pub subfields: Vec<SubfieldReport>,
    pub verdict: bool,
}

impl PRationalityReport {
    /// Every named fact the verdict rests on.
    pub fn checks(&self) -> Vec<(String, bool)> {
        let p = self.p;
        let mut out = Vec::new();
        for s in &self.subfields {
            let name = format!("Q(sqrt({}))", s.radicand);
            out.push((
                format!("{p} does not divide h({name}) = {}", s.class_number.h),
                !s.p_divides_h,
            ));
            if let Some(u) = &s.unit {
                for (i, flag) in u.pth_power.iter().enumerate() {
                    let place = if u.pth_power.len() > 1 { format!(" at place {}", i + 1) } else { String::new() };
                    out.push((format!("fundamental unit of {name} is not a {p}th power{place}"), !flag));
                }
            }
        }
        out
    }
}

fn residue_unit(field: &QuadField, modulus: u64, mode: UnitMode) -> Result<(UnitResidue, Option<FundUnit>), PratError> {
    Ok(match mode {
        UnitMode::Exact => {
            let u = quadratic::fundamental_unit(field)?;
            (u.residue(modulus)?, Some(u))
        }
        UnitMode::Residue => (quadratic::fundamental_unit_mod(field, modulus)?, None),
    })
}

/// `Q(sqrt(-d0))` is p-rational iff `p` does not divide its class number.
pub fn prat_imag(d0: u64, p: u64) -> Result<PRationalityReport, PratError> {
    check_prime(p)?;
    let sub = imag_subfield(&quadratic::make_field(-(d0 as i64))?, p);
    Ok(single(p, sub))
}

fn imag_subfield(field: &QuadField, p: u64) -> SubfieldReport {
    let class_number = classno::h_imaginary(field.disc()).expect("field discriminants are fundamental");
    let p_divides_h = class_number.divisible_by(p);
    SubfieldReport { radicand: field.radicand(), class_number, p_divides_h, unit: None, p_rational: !p_divides_h }
}

/// `Q(sqrt(m))`, `m > 1`, is p-rational iff `p` does not divide `h` and the
/// fundamental unit is not a p-th power at any place above `p`.
pub fn prat_real(m: u64, p: u64, mode: UnitMode) -> Result<PRationalityReport, PratError> {
    check_prime(p)?;
    let field = quadratic::make_field(m as i64)?;
    if !field.is_real() {
        return Err(QuadError::NotReal(m as i64).into());
    }
    Ok(single(p, real_subfield(&field, p, mode)?))
}

fn real_subfield(field: &QuadField, p: u64, mode: UnitMode) -> Result<SubfieldReport, PratError> {
    let class_number = classno::h_plus_real(field.disc()).expect("field discriminants are fundamental");
    let p_divides_h = class_number.divisible_by(p);
    let ctx = localfield::classify_splitting(field, p).map_err(|_| PratError::BadPrime(p))?;
    let (res, exact) = residue_unit(field, p * p * p, mode)?;
    let pth_power = localfield::is_pth_power_residue(&ModSqrtElem::from_residue(&res, p * p), &ctx)
        .expect("fundamental unit has norm +-1");
    let unit = UnitCheck {
        unit: exact.map(|u| u.elem.to_string()),
        norm: res.norm,
        splitting: ctx.kind,
        pth_power,
    };
    let p_rational = !p_divides_h && unit.pth_power.iter().all(|&f| !f);
    Ok(SubfieldReport { radicand: field.radicand(), class_number, p_divides_h, unit: Some(unit), p_rational })
}

fn quadratic_subfield(m: i64, p: u64, mode: UnitMode) -> Result<SubfieldReport, PratError> {
    let field = quadratic::make_field(m)?;
    if field.is_real() {
        real_subfield(&field, p, mode)
    } else {
        Ok(imag_subfield(&field, p))
    }
}

fn single(p: u64, sub: SubfieldReport) -> PRationalityReport {
    PRationalityReport { p, radicands: vec![sub.radicand], verdict: sub.p_rational, subfields: vec![sub] }
}

/// Dispatches on the sign of the radicand.
pub fn prat_quadratic(m: i64, p: u64, mode: UnitMode) -> Result<PRationalityReport, PratError> {
    check_prime(p)?;
    Ok(single(p, quadratic_subfield(m, p, mode)?))
}

/// `Q(sqrt(m1), sqrt(m2))` through its subfields `m1`, `m2` and the core of `m1 m2`.
pub fn prat_biquad(m1: i64, m2: i64, p: u64, mode: UnitMode) -> Result<PRationalityReport, PratError> {
    check_prime(p)?;
    let a = quadratic::make_field(m1)?.radicand();
    let b = quadratic::make_field(m2)?.radicand();
    let prod = a.checked_mul(b).ok_or(PratError::Overflow)?;
    let c = match quadratic::make_field(prod) {
        Ok(f) => f.radicand(),
        Err(QuadError::Square(_)) => return Err(PratError::Degenerate(m1, m2)),
        Err(e) => return Err(e.into()),
    };
    let subfields = [a, b, c]
        .into_iter()
        .map(|m| quadratic_subfield(m, p, mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PRationalityReport {
        p,
        radicands: vec![a, b, c],
        verdict: subfields.iter().all(|s| s.p_rational),
        subfields,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("p must be a prime greater than 3, got {0}")]
    BadP(i64),
    #[error("q must be an odd prime, got {0}")]
    BadQ(i64),
    #[error("q must differ from p")]
    SamePrime,
    #[error("q = {q} is not congruent to -1 mod p = {p}")]
    WrongClass { p: i64, q: i64 },
    #[error("d must be a positive integer, got {0}")]
    BadD(i64),
    #[error("d = {0} is not squarefree")]
    NotSquarefree(i64),
    #[error("{prime} divides d = {d}")]
    Divides { prime: i64, d: i64 },
    #[error("-{d} is a quadratic residue mod {prime}")]
    Residue { d: i64, prime: i64 },
    #[error("parameters too large")]
    TooLarge,
}

/// All violated family conditions, in checking order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct InvalidFamily(pub Vec<FamilyError>);

impl fmt::Display for InvalidFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Validated `(p, q, d)`: `p > 3` and `q` odd primes, `q = -1 mod p`, `d`
/// positive squarefree and prime to `pq`, `-d` a non-residue mod `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilyParams {
    p: u64,
    q: u64,
    d: u64,
}

// p*q*d stays below this so every derived radicand and discriminant fits i64
const PARAM_LIMIT: i128 = 1 << 58;

impl FamilyParams {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    /// Radicand of `K+`.
    pub fn k_plus(&self) -> i64 {
        (self.p * self.q) as i64
    }

    /// Radicand of `L1 = Q(sqrt(-dpq))`.
    pub fn l1(&self) -> i64 {
        -((self.d * self.p * self.q) as i64)
    }

    /// Radicand of `L2 = Q(sqrt(-d))`.
    pub fn l2(&self) -> i64 {
        -(self.d as i64)
    }

    /// `p` ramifies in `K+` and stays inert in `Q(sqrt(-d))`.
    pub fn residue_degree_p(&self) -> u32 {
        2
    }

    /// `q` ramifies in `K+` and stays inert in `Q(sqrt(-d))`.
    pub fn residue_degree_q(&self) -> u32 {
        2
    }

    /// `Q(mu_p)` is cyclic of degree `p - 1`; inside a field with Galois
    /// group `(Z/2)^2` that forces `p = 3` and `-3` among the radicands.
    pub fn mu_p_in_k(&self) -> bool {
        self.p == 3 && [self.k_plus(), self.l1(), self.l2()].contains(&-3)
    }
}

pub fn validate_family(p: i64, q: i64, d: i64) -> Result<FamilyParams, InvalidFamily> {
    let mut errs = Vec::new();
    let p_ok = p > 3 && arith::is_prime(p as u64);
    let q_ok = q > 2 && arith::is_prime(q as u64);
    if !p_ok {
        errs.push(FamilyError::BadP(p));
    }
    if !q_ok {
        errs.push(FamilyError::BadQ(q));
    }
    if p_ok && q_ok {
        if p == q {
            errs.push(FamilyError::SamePrime);
        } else if (q + 1) % p != 0 {
            errs.push(FamilyError::WrongClass { p, q });
        }
    }
    if d <= 0 {
        errs.push(FamilyError::BadD(d));
        return Err(InvalidFamily(errs));
    }
    if !arith::is_squarefree(d) {
        errs.push(FamilyError::NotSquarefree(d));
    }
    if p_ok && q_ok && p as i128 * q as i128 * d as i128 >= PARAM_LIMIT {
        errs.push(FamilyError::TooLarge);
    }
    for (prime, ok) in [(p, p_ok), (q, q_ok)] {
        if !ok {
            continue;
        }
        if d % prime == 0 {
            errs.push(FamilyError::Divides { prime, d });
        } else if kronecker(-d, prime) != -1 {
            errs.push(FamilyError::Residue { d, prime });
        }
    }
    if errs.is_empty() {
        Ok(FamilyParams { p: p as u64, q: q as u64, d: d as u64 })
    } else {
        Err(InvalidFamily(errs))
    }
}

/// Evidence that `i_p(E_S)` is a direct summand of the local units at `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectSummand {
    pub v_p_val: Valuation,
    /// `v(eps^(2(p-1)) - 1)` at the prime above `p`, capped at 3: the
    /// valuation of the principal-unit part of `eps^2`.
    pub v_p_principal: Valuation,
    pub v_q_val: Valuation,
    /// Order of `eps^2` in the residue field at the prime above `q`.
    pub eps_sq_order_mod_q: u64,
    pub e_s_generated: bool,
    pub primitive: bool,
}

struct KPlusUnit {
    exact: Option<FundUnit>,
    at_p: UnitResidue,
    at_q: UnitResidue,
}

// q^3 must fit the residue arithmetic; beyond that the exact path is used.
const RESIDUE_Q_LIMIT: u64 = 2_000_000;

fn k_plus_unit(params: &FamilyParams, mode: UnitMode) -> KPlusUnit {
    let field = quadratic::make_field(params.k_plus()).expect("pq is squarefree");
    let (p3, q3) = (params.p.pow(3), params.q.pow(3));
    if mode == UnitMode::Residue && params.q < RESIDUE_Q_LIMIT {
        KPlusUnit {
            exact: None,
            at_p: quadratic::fundamental_unit_mod(&field, p3).expect("real field, odd modulus"),
            at_q: quadratic::fundamental_unit_mod(&field, q3).expect("real field, odd modulus"),
        }
    } else {
        let u = quadratic::fundamental_unit(&field).expect("real field");
        KPlusUnit {
            at_p: u.residue(p3).expect("odd modulus"),
            at_q: u.residue(q3).expect("odd modulus"),
            exact: Some(u),
        }
    }
}

fn direct_summand_from(params: &FamilyParams, unit: &KPlusUnit) -> DirectSummand {
    let field = quadratic::make_field(params.k_plus()).expect("pq is squarefree");
    let (v_p_val, v_q_val) = match &unit.exact {
        Some(u) => (
            quadratic::unit_square_minus_one_valuation_exact(u, params.p).expect("p ramified"),
            quadratic::unit_square_minus_one_valuation_exact(u, params.q).expect("q ramified"),
        ),
        None => (
            quadratic::unit_square_minus_one_valuation(&unit.at_p, &field, params.p).expect("p ramified"),
            quadratic::unit_square_minus_one_valuation(&unit.at_q, &field, params.q).expect("q ramified"),
        ),
    };
    // sqrt(pq) lies in the prime above q, so eps = x there
    let v_p_principal = quadratic::principal_unit_valuation(&unit.at_p, &field, params.p).expect("p ramified");
    let q = params.q;
    let x = unit.at_q.x % q;
    let eps_sq = arith::mul_mod(x, x, q);
    let eps_sq_order_mod_q = arith::mult_order(eps_sq as i64, q).expect("a unit is nonzero mod q");
    DirectSummand {
        v_p_val,
        v_p_principal,
        v_q_val,
        eps_sq_order_mod_q,
        e_s_generated: eps_sq_order_mod_q % params.p != 0,
        primitive: v_p_principal.at_most(2),
    }
}

/// `v(eps^2 - 1)` at the primes above `p` and `q`, and the two conditions
/// they certify: `eps^2` has trivial pro-p image at `q`, and the principal
/// part `w` of `eps^2` has `v(w - 1) <= 2`, which keeps `log w` out of `p`
/// times the principal units (`log` maps `U^1` onto the maximal ideal when
/// `p >= 5` and `e = 2`). When `N(eps) = +1` the principal part has the same
/// valuation as `eps^2 - 1`; when `N(eps) = -1`, `eps^2 = -1` modulo the
/// prime above `p`, so `v_p_val` is 0 and only the principal part is
/// informative.
pub fn direct_summand_check(params: &FamilyParams, mode: UnitMode) -> DirectSummand {
    direct_summand_from(params, &k_plus_unit(params, mode))
}

/// `alpha_v = 1` iff `mu_p` is absent from `K+_v` but present in `K_v`, for
/// the single tame place `v` above `q`.
pub fn alpha_s(params: &FamilyParams) -> u32 {
    let (p, q) = (params.p, params.q);
    let in_k_plus = localfield::mu_p_in_local(q, p).expect("q prime to p");
    let in_k = localfield::mu_p_in_local(q * q, p).expect("q prime to p");
    u32::from(!in_k_plus && in_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedFree,
    NotCertified,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::CertifiedFree => "certified_free",
            Verdict::NotCertified => "not_certified",
        })
    }
}

/// A failed hypothesis. None of these claims that the module is not free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    InvalidParameters { message: String },
    ClassNumberDivisible { radicand: i64, h: u64 },
    UnitIsPthPower { radicand: i64 },
    TowerSplits { s: u64 },
    NotDirectSummand { v_p_principal: Valuation },
    EsNotGenerated { order: u64 },
    MuPInK,
    MuPNotInTamePlace,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::InvalidParameters { message } => write!(f, "invalid parameters: {message}"),
            Reason::ClassNumberDivisible { radicand, h } => {
                write!(f, "p divides h(Q(sqrt({radicand}))) = {h}")
            }
            Reason::UnitIsPthPower { radicand } => {
                write!(f, "fundamental unit of Q(sqrt({radicand})) is a p-th power above p")
            }
            Reason::TowerSplits { s } => write!(f, "s = {s}, expected 1"),
            Reason::NotDirectSummand { v_p_principal } => {
                write!(f, "v_p(eps^(2(p-1)) - 1) is {v_p_principal}, expected at most 2")
            }
            Reason::EsNotGenerated { order } => {
                write!(f, "eps^2 has order {order} mod q, divisible by p")
            }
            Reason::MuPInK => f.write_str("K contains the p-th roots of unity"),
            Reason::MuPNotInTamePlace => f.write_str("the completion at q lacks the p-th roots of unity"),
        }
    }
}

/// Every fact the certificate checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyFacts {
    pub k_plus: SubfieldReport,
    pub l1: SubfieldReport,
    pub l2: SubfieldReport,
    pub p_rational: bool,
    pub fundamental_unit: Option<String>,
    pub unit_norm: i8,
    pub v_p_val: Valuation,
    pub v_p_principal: Valuation,
    pub v_q_val: Valuation,
    pub eps_sq_order_mod_q: u64,
    pub e_s_generated: bool,
    pub direct_summand: bool,
    pub residue_degree_q: u32,
    pub s: u64,
    pub mu_p_in_kq: bool,
    pub alpha_s: u32,
    pub mu_p_in_k: bool,
    /// `p_rational` together with `v_p(eps^2 - 1) = v_q(eps^2 - 1) = 1`:
    /// the conditions the published `(p, q)` table was filtered by. It does
    /// not include `s = 1`.
    pub table_conditions: bool,
}

impl FamilyFacts {
    pub fn meets_table_conditions(&self) -> bool {
        self.p_rational && self.v_p_val == Valuation::Exact(1) && self.v_q_val == Valuation::Exact(1)
    }

    /// The failing hypotheses, in pipeline order.
    pub fn failures(&self) -> Vec<Reason> {
        let mut out = Vec::new();
        for sub in [&self.k_plus, &self.l1, &self.l2] {
            if sub.p_divides_h {
                out.push(Reason::ClassNumberDivisible { radicand: sub.radicand, h: sub.class_number.h });
            }
            if sub.unit.as_ref().is_some_and(|u| u.pth_power.iter().any(|&f| f)) {
                out.push(Reason::UnitIsPthPower { radicand: sub.radicand });
            }
        }
        if self.s != 1 {
            out.push(Reason::TowerSplits { s: self.s });
        }
        if !self.mu_p_in_kq {
            out.push(Reason::MuPNotInTamePlace);
        }
        if !self.direct_summand {
            out.push(Reason::NotDirectSummand { v_p_principal: self.v_p_principal });
        }
        if !self.e_s_generated {
            out.push(Reason::EsNotGenerated { order: self.eps_sq_order_mod_q });
        }
        if self.mu_p_in_k {
            out.push(Reason::MuPInK);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreenessReport {
    pub p: i64,
    pub q: i64,
    pub d: i64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    pub reasons: Vec<Reason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facts: Option<FamilyFacts>,
}

impl FreenessReport {
    pub fn is_invalid_input(&self) -> bool {
        self.reasons.iter().any(|r| matches!(r, Reason::InvalidParameters { .. }))
    }
}

/// Rank of the free module for the family: `r2 = 2` for a totally imaginary quartic.
pub const FAMILY_RANK: u32 = 2;

/// Runs every hypothesis of the freeness theorem for `Q(sqrt(pq), sqrt(-d))`.
pub fn certify_freeness(p: i64, q: i64, d: i64, mode: UnitMode) -> FreenessReport {
    let params = match validate_family(p, q, d) {
        Ok(params) => params,
        Err(e) => {
            return FreenessReport {
                p,
                q,
                d,
                verdict: Verdict::NotCertified,
                rank: None,
                reasons: e.0.iter().map(|e| Reason::InvalidParameters { message: e.to_string() }).collect(),
                facts: None,
            }
        }
    };
    let facts = family_facts(&params, mode);
    let reasons = facts.failures();
    let certified = reasons.is_empty();
    FreenessReport {
        p,
        q,
        d,
        verdict: if certified { Verdict::CertifiedFree } else { Verdict::NotCertified },
        rank: certified.then_some(FAMILY_RANK),
        reasons,
        facts: Some(facts),
    }
}

fn family_facts(params: &FamilyParams, mode: UnitMode) -> FamilyFacts {
    let p = params.p;
    let prat = prat_biquad(params.k_plus(), params.l2(), p, mode).expect("validated family is biquadratic");
    let [k_plus, l2, l1]: [SubfieldReport; 3] = prat.subfields.try_into().expect("three subfields");
    debug_assert_eq!(l1.radicand, params.l1());

    let unit = k_plus_unit(params, mode);
    let ds = direct_summand_from(params, &unit);
    let f = params.residue_degree_q();
    let s = localfield::tower_places(params.q, f, p).expect("q != p, both prime");
    let mu_p_in_kq = localfield::mu_p_in_local(params.q.pow(f), p).expect("q prime to p");
    let mut facts = FamilyFacts {
        p_rational: prat.verdict,
        fundamental_unit: unit.exact.as_ref().map(|u| u.elem.to_string()),
        unit_norm: unit.at_p.norm,
        k_plus,
        l1,
        l2,
        v_p_val: ds.v_p_val,
        v_p_principal: ds.v_p_principal,
        v_q_val: ds.v_q_val,
        eps_sq_order_mod_q: ds.eps_sq_order_mod_q,
        e_s_generated: ds.e_s_generated,
        direct_summand: ds.primitive,
        residue_degree_q: f,
        s,
        mu_p_in_kq,
        alpha_s: alpha_s(params),
        mu_p_in_k: params.mu_p_in_k(),
        table_conditions: false,
    };
    facts.table_conditions = facts.meets_table_conditions();
    facts
}
