//! Exact integer and rational arithmetic: factorization, valuations,
//! Legendre symbols and squarefree representatives modulo squares.
//!
//! Factorization is trial division up to a configurable bound followed by
//! Pollard–Brent rho with deterministic polynomial constants. Primality is
//! deterministic Miller–Rabin below 2^64 and a fixed-witness Miller–Rabin
//! above.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rational number `numerator / denominator` in lowest terms with a
/// positive denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalNumber {
    num: BigInt,
    den: BigInt,
}

impl RationalNumber {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let (mut num, mut den) = (num.into(), den.into());
        if den.is_zero() {
            return Err(Error::Zero("inverse"));
        }
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        let g = num.gcd(&den);
        if !g.is_one() && !g.is_zero() {
            num /= &g;
            den /= &g;
        }
        Ok(Self { num, den })
    }

    pub fn integer(n: impl Into<BigInt>) -> Self {
        Self {
            num: n.into(),
            den: BigInt::one(),
        }
    }

    pub fn numer(&self) -> &BigInt {
        &self.num
    }

    pub fn denom(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.den.is_one()
    }

    pub fn signum(&self) -> i8 {
        match self.num.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            &self.num * &other.den + &other.num * &self.den,
            &self.den * &other.den,
        )
        .expect("nonzero denominators")
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(
            &self.num * &other.den - &other.num * &self.den,
            &self.den * &other.den,
        )
        .expect("nonzero denominators")
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.num * &other.num, &self.den * &other.den).expect("nonzero denominators")
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Self::new(&self.num * &other.den, &self.den * &other.num)
    }
}

impl fmt::Display for RationalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for RationalNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            BigInt::from_str(t.trim()).map_err(|_| Error::Parse(format!("bad integer {t:?}")))
        };
        match s.split_once('/') {
            Some((n, d)) => Self::new(parse(n)?, parse(d)?),
            None => Ok(Self::integer(parse(s)?)),
        }
    }
}

impl From<i64> for RationalNumber {
    fn from(n: i64) -> Self {
        Self::integer(n)
    }
}

/// `sign · ∏ p^e` with every key prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredInteger {
    pub sign: i8,
    pub factors: BTreeMap<BigInt, u32>,
}

impl FactoredInteger {
    pub fn reconstruct(&self) -> BigInt {
        let mut n = BigInt::from(self.sign);
        for (p, &e) in &self.factors {
            n *= num_traits::pow(p.clone(), e as usize);
        }
        n
    }

    pub fn primes(&self) -> impl Iterator<Item = &BigInt> {
        self.factors.keys()
    }
}

/// Budgets for [`factorize_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorConfig {
    /// Trial division bound.
    pub trial_bound: u64,
    /// Total rho iterations allowed per cofactor.
    pub rho_iterations: u64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            trial_bound: 1_000_000,
            rho_iterations: 5_000_000,
        }
    }
}

pub fn factorize(n: &BigInt) -> Result<FactoredInteger> {
    factorize_with(n, &FactorConfig::default())
}

pub fn factorize_with(n: &BigInt, cfg: &FactorConfig) -> Result<FactoredInteger> {
    if n.is_zero() {
        return Err(Error::Zero("factorization"));
    }
    let sign = if n.is_negative() { -1 } else { 1 };
    let mut factors = BTreeMap::new();
    let m = n.magnitude().clone();
    match m.to_u64() {
        Some(small) => factor_u64_into(small, cfg, &mut factors)?,
        None => factor_big_into(m, cfg, &mut factors)?,
    }
    Ok(FactoredInteger { sign, factors })
}

fn push(factors: &mut BTreeMap<BigInt, u32>, p: impl Into<BigInt>, e: u32) {
    *factors.entry(p.into()).or_insert(0) += e;
}

fn factor_u64_into(mut m: u64, cfg: &FactorConfig, out: &mut BTreeMap<BigInt, u32>) -> Result<()> {
    let tz = m.trailing_zeros();
    if tz > 0 {
        push(out, 2u64, tz);
        m >>= tz;
    }
    let mut d = 3u64;
    while d <= cfg.trial_bound && d.saturating_mul(d) <= m {
        if m.is_multiple_of(d) {
            let mut e = 0;
            while m.is_multiple_of(d) {
                m /= d;
                e += 1;
            }
            push(out, d, e);
        }
        d += 2;
    }
    if m > 1 {
        split_u64(m, cfg, out)?;
    }
    Ok(())
}

fn split_u64(m: u64, cfg: &FactorConfig, out: &mut BTreeMap<BigInt, u32>) -> Result<()> {
    if m == 1 {
        return Ok(());
    }
    if is_prime_u64(m) {
        push(out, m, 1);
        return Ok(());
    }
    let f = rho_u64(m, cfg.rho_iterations).ok_or_else(|| Error::FactorBudget(m.to_string()))?;
    split_u64(f, cfg, out)?;
    split_u64(m / f, cfg, out)
}

fn rho_u64(n: u64, budget: u64) -> Option<u64> {
    if n.is_multiple_of(2) {
        return Some(2);
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let mut spent = 0u64;
    for c in 1..u64::MAX {
        let f = |x: u64| ((mulmod(x, x) as u128 + c as u128) % n as u128) as u64;
        let (mut y, mut r, mut q, m) = (2u64, 1u64, 1u64, 128u64);
        let (mut x, mut ys, mut g) = (0u64, 0u64, 1u64);
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = f(y);
                    q = mulmod(q, x.abs_diff(y));
                }
                g = q.gcd(&n);
                k += m;
            }
            r *= 2;
            spent += r;
            if spent > budget {
                return None;
            }
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return Some(g);
        }
    }
    None
}

fn factor_big_into(mut m: BigUint, cfg: &FactorConfig, out: &mut BTreeMap<BigInt, u32>) -> Result<()> {
    let mut d = 2u64;
    while d <= cfg.trial_bound {
        if let Some(small) = m.to_u64() {
            return factor_u64_into(small, &FactorConfig { trial_bound: cfg.trial_bound, ..*cfg }, out);
        }
        let bd = BigUint::from(d);
        if (&m % &bd).is_zero() {
            let mut e = 0;
            while (&m % &bd).is_zero() {
                m /= &bd;
                e += 1;
            }
            push(out, d, e);
        }
        d += if d == 2 { 1 } else { 2 };
    }
    split_big(m, cfg, out)
}

fn split_big(m: BigUint, cfg: &FactorConfig, out: &mut BTreeMap<BigInt, u32>) -> Result<()> {
    if m.is_one() {
        return Ok(());
    }
    if let Some(small) = m.to_u64() {
        return split_u64(small, cfg, out);
    }
    if is_probable_prime(&m) {
        push(out, BigInt::from(m), 1);
        return Ok(());
    }
    let f = rho_big(&m, cfg.rho_iterations).ok_or_else(|| Error::FactorBudget(m.to_string()))?;
    let cof = &m / &f;
    split_big(f, cfg, out)?;
    split_big(cof, cfg, out)
}

fn rho_big(n: &BigUint, budget: u64) -> Option<BigUint> {
    let one = BigUint::one();
    let mut spent = 0u64;
    for c in 1u32..64 {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let (mut y, mut r, mut q, m) = (BigUint::from(2u32), 1u64, BigUint::one(), 128u64);
        let (mut x, mut ys, mut g) = (BigUint::zero(), BigUint::zero(), BigUint::one());
        while g == one {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g == one {
                ys = y.clone();
                for _ in 0..m.min(r - k) {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = (q * diff) % n;
                }
                g = q.gcd(n);
                k += m;
            }
            r *= 2;
            spent += r;
            if spent > budget {
                return None;
            }
        }
        if &g == n {
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if g > one {
                    break;
                }
            }
        }
        if &g != n {
            return Some(g);
        }
    }
    None
}

fn pow_mod_u64(b: u64, mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let (mut r, mut b) = (1 % m, b as u128 % m);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r as u64
}

/// Deterministic for every `u64` (witness set of the first twelve primes).
pub fn is_prime_u64(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller–Rabin with a fixed set of 24 small-prime witnesses.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    const WITNESSES: [u32; 24] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    ];
    for &p in &WITNESSES {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let nm1 = n - &one;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    'witness: for &a in &WITNESSES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn is_prime(n: &BigInt) -> bool {
    !n.is_negative() && is_probable_prime(n.magnitude())
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime_u64(c) {
        c += 1;
    }
    c
}

/// Primes in ascending order starting at `start`.
pub fn primes_from(start: u64) -> impl Iterator<Item = u64> {
    let mut next = start.max(2);
    std::iter::from_fn(move || {
        let p = next_prime(next);
        next = p + 1;
        Some(p)
    })
}

/// `v_p(n)` for nonzero `n`.
pub fn valuation_int(n: &BigInt, p: u64) -> u32 {
    debug_assert!(!n.is_zero());
    if let Some(small) = n.magnitude().to_u64() {
        let mut m = small;
        let mut v = 0;
        while m % p == 0 {
            m /= p;
            v += 1;
        }
        return v;
    }
    let bp = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&bp);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// `v_p(numerator) − v_p(denominator)`.
pub fn valuation(r: &RationalNumber, p: u64) -> Result<i64> {
    if r.is_zero() {
        return Err(Error::Zero("valuation"));
    }
    Ok(valuation_int(r.numer(), p) as i64 - valuation_int(r.denom(), p) as i64)
}

/// Splits `n = p^v · u` with `p ∤ u`.
pub fn split_valuation(n: &BigInt, p: u64) -> (u32, BigInt) {
    let v = valuation_int(n, p);
    if v == 0 {
        return (0, n.clone());
    }
    (v, n / num_traits::pow(BigInt::from(p), v as usize))
}

/// Residue of `n` modulo `m` in `[0, m)`.
pub fn mod_u64(n: &BigInt, m: u64) -> u64 {
    n.mod_floor(&BigInt::from(m))
        .to_u64()
        .expect("residue fits")
}

fn jacobi(mut a: u64, mut n: u64) -> i8 {
    debug_assert!(n % 2 == 1);
    a %= n;
    let mut t = 1i8;
    while a != 0 {
        while a.is_multiple_of(2) {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Legendre symbol `(a/p)` for an odd prime `p`.
pub fn legendre(a: &BigInt, p: u64) -> Result<i8> {
    if p.is_multiple_of(2) || !is_prime_u64(p) {
        return Err(Error::NotOddPrime(p));
    }
    Ok(legendre_unchecked(mod_u64(a, p), p))
}

pub(crate) fn legendre_unchecked(a: u64, p: u64) -> i8 {
    jacobi(a % p, p)
}

/// Euler's criterion `a^((p-1)/2) mod p`, mapped to −1/0/+1.
pub fn euler_criterion(a: &BigInt, p: u64) -> i8 {
    let r = pow_mod_u64(mod_u64(a, p), (p - 1) / 2, p);
    match r {
        0 => 0,
        1 => 1,
        _ => -1,
    }
}

/// Representative `sign · ∏ support` of the class of `r` in `Q^×/(Q^×)²`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SquarefreePart {
    pub sign: i8,
    pub support: BTreeSet<u64>,
}

impl SquarefreePart {
    pub fn value(&self) -> BigInt {
        let mut n = BigInt::from(self.sign);
        for &p in &self.support {
            n *= p;
        }
        n
    }
}

fn prime_u64(p: &BigInt) -> Result<u64> {
    p.to_u64().ok_or_else(|| Error::PrimeTooLarge(p.to_string()))
}

pub fn squarefree_decompose(r: &RationalNumber) -> Result<SquarefreePart> {
    if r.is_zero() {
        return Err(Error::Zero("square class"));
    }
    let mut support = BTreeSet::new();
    for part in [r.numer(), r.denom()] {
        for (p, &e) in &factorize(part)?.factors {
            if e % 2 == 1 {
                support.insert(prime_u64(p)?);
            }
        }
    }
    Ok(SquarefreePart {
        sign: r.signum(),
        support,
    })
}

/// Distinct prime divisors of a nonzero integer, ascending.
pub fn prime_support(n: &BigInt) -> Result<Vec<u64>> {
    factorize(n)?.factors.keys().map(prime_u64).collect()
}

pub fn is_squarefree(n: &BigInt) -> Result<bool> {
    Ok(factorize(n)?.factors.values().all(|&e| e == 1))
}

/// Serde adapters writing integers as JSON numbers when they fit in `i64`
/// and as decimal strings otherwise.
pub mod serde_int {
    use super::*;
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
        match n.to_i64() {
            Some(x) => s.serialize_i64(x),
            None => s.serialize_str(&n.to_string()),
        }
    }

    struct IntVisitor;

    impl Visitor<'_> for IntVisitor {
        type Value = BigInt;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an integer or a decimal string")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BigInt, E> {
            Ok(v.into())
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BigInt, E> {
            Ok(v.into())
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BigInt, E> {
            v.parse().map_err(E::custom)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigInt, D::Error> {
        d.deserialize_any(IntVisitor)
    }

    /// The same encoding for pairs.
    pub mod pairs {
        use super::*;
        use serde::ser::SerializeSeq;

        #[derive(Serialize, Deserialize)]
        struct Pair(
            #[serde(with = "super")] BigInt,
            #[serde(with = "super")] BigInt,
        );

        pub fn serialize<S: Serializer>(
            v: &[(BigInt, BigInt)],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for (a, b) in v {
                seq.serialize_element(&Pair(a.clone(), b.clone()))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<(BigInt, BigInt)>, D::Error> {
            let v: Vec<Pair> = Deserialize::deserialize(d)?;
            Ok(v.into_iter().map(|Pair(a, b)| (a, b)).collect())
        }
    }
}
