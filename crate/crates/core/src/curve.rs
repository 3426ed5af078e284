//! Curve models: `y² = (x − e₁)(x − e₂)(x − e₃)` with integer roots, general
//! Weierstrass models for 2-torsion detection, the bad set Σ and quadratic
//! twists.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{is_local_square, Place};
use crate::zarith::{self, factorize, RationalNumber};

/// `y² = (x − e₁)(x − e₂)(x − e₃)` with integer roots `e₁ < e₂ < e₃`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FullTwoTorsionModel {
    roots: [BigInt; 3],
    /// Odd primes dividing some root difference, ascending.
    odd_bad: Vec<u64>,
}

impl FullTwoTorsionModel {
    pub fn new(roots: [BigInt; 3]) -> Result<Self> {
        let mut roots = roots;
        roots.sort();
        if roots[0] == roots[1] || roots[1] == roots[2] {
            return Err(Error::DegenerateCurve);
        }
        let mut odd_bad = Vec::new();
        for diff in [&roots[1] - &roots[0], &roots[2] - &roots[0], &roots[2] - &roots[1]] {
            for p in zarith::prime_support(&diff)? {
                if p != 2 {
                    odd_bad.push(p);
                }
            }
        }
        odd_bad.sort_unstable();
        odd_bad.dedup();
        Ok(Self { roots, odd_bad })
    }

    pub fn from_i64(e: [i64; 3]) -> Result<Self> {
        Self::new(e.map(BigInt::from))
    }

    pub fn roots(&self) -> &[BigInt; 3] {
        &self.roots
    }

    /// `(e₁ − e₂)(e₁ − e₃)(e₂ − e₃)`.
    pub fn root_difference_product(&self) -> BigInt {
        let [a, b, c] = &self.roots;
        (a - b) * (a - c) * (b - c)
    }

    /// `Δ = 16·((e₁ − e₂)(e₁ − e₃)(e₂ − e₃))²` of this model.
    pub fn discriminant(&self) -> BigInt {
        let p = self.root_difference_product();
        BigInt::from(16) * &p * &p
    }

    pub fn odd_bad_primes(&self) -> &[u64] {
        &self.odd_bad
    }

    /// `f(x) = (x − e₁)(x − e₂)(x − e₃)`.
    pub fn eval(&self, x: &RationalNumber) -> RationalNumber {
        self.roots
            .iter()
            .map(|e| x.sub(&RationalNumber::integer(e.clone())))
            .fold(RationalNumber::integer(1), |acc, t| acc.mul(&t))
    }

    pub fn to_long(&self) -> LongModel {
        // x³ − s₁x² + s₂x − s₃
        let [a, b, c] = &self.roots;
        let s1 = a + b + c;
        let s2 = a * b + a * c + b * c;
        let s3 = a * b * c;
        LongModel::new([
            RationalNumber::integer(0),
            RationalNumber::integer(-s1),
            RationalNumber::integer(0),
            RationalNumber::integer(s2),
            RationalNumber::integer(-s3),
        ])
        .expect("distinct roots give a nonsingular model")
    }

    /// Reduction type at an odd prime from the pattern of roots mod `p`.
    pub fn reduction_at(&self, p: u64) -> Reduction {
        let r: Vec<u64> = self.roots.iter().map(|e| zarith::mod_u64(e, p)).collect();
        let collisions = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .filter(|(i, j)| r[*i] == r[*j])
            .count();
        match collisions {
            0 => Reduction::Good,
            1 => Reduction::Multiplicative,
            _ => Reduction::Additive,
        }
    }
}

impl fmt::Display for FullTwoTorsionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = &self.roots;
        write!(f, "{a},{b},{c}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Good,
    Multiplicative,
    Additive,
}

/// `y² + a₁xy + a₃y = x³ + a₂x² + a₄x + a₆` over Q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongModel {
    a: [RationalNumber; 5],
}

impl LongModel {
    pub fn new(a: [RationalNumber; 5]) -> Result<Self> {
        let m = Self { a };
        if m.discriminant().is_zero() {
            return Err(Error::SingularCurve);
        }
        Ok(m)
    }

    pub fn coefficients(&self) -> &[RationalNumber; 5] {
        &self.a
    }

    /// `(b₂, b₄, b₆, b₈)`.
    fn b_invariants(&self) -> [RationalNumber; 4] {
        let [a1, a2, a3, a4, a6] = &self.a;
        let int = |n: i64| RationalNumber::integer(n);
        let b2 = a1.mul(a1).add(&int(4).mul(a2));
        let b4 = int(2).mul(a4).add(&a1.mul(a3));
        let b6 = a3.mul(a3).add(&int(4).mul(a6));
        let b8 = a1
            .mul(a1)
            .mul(a6)
            .add(&int(4).mul(a2).mul(a6))
            .sub(&a1.mul(a3).mul(a4))
            .add(&a2.mul(a3).mul(a3))
            .sub(&a4.mul(a4));
        [b2, b4, b6, b8]
    }

    pub fn discriminant(&self) -> RationalNumber {
        let [b2, b4, b6, b8] = self.b_invariants();
        let int = |n: i64| RationalNumber::integer(n);
        int(0)
            .sub(&b2.mul(&b2).mul(&b8))
            .sub(&int(8).mul(&b4).mul(&b4).mul(&b4))
            .sub(&int(27).mul(&b6).mul(&b6))
            .add(&int(9).mul(&b2).mul(&b4).mul(&b6))
    }

    /// Coefficients `[c₀, c₁, c₂, c₃]` of the 2-division cubic
    /// `4x³ + b₂x² + 2b₄x + b₆`.
    pub fn two_division_cubic(&self) -> [RationalNumber; 4] {
        let [b2, b4, b6, _] = self.b_invariants();
        [
            b6,
            RationalNumber::integer(2).mul(&b4),
            b2,
            RationalNumber::integer(4),
        ]
    }

    /// Distinct rational roots of the 2-division cubic, ascending.
    pub fn two_torsion_abscissae(&self) -> Result<Vec<RationalNumber>> {
        rational_roots(&self.two_division_cubic())
    }

    /// Converts to a model with integral roots when the 2-division cubic
    /// splits over Q.
    pub fn to_full_two_torsion(&self) -> Result<FullTwoTorsionModel> {
        let roots = self.two_torsion_abscissae()?;
        if roots.len() != 3 {
            return Err(Error::NotFullTwoTorsion(torsion_dim(roots.len())));
        }
        // (2y + a₁x + a₃)² = 4∏(x − rᵢ); X = 4x gives Y² = ∏(X − 4rᵢ), then
        // scale X by D² to clear the common denominator D.
        let scaled: Vec<RationalNumber> = roots
            .iter()
            .map(|r| r.mul(&RationalNumber::integer(4)))
            .collect();
        let d = scaled
            .iter()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let d2 = RationalNumber::integer(&d * &d);
        let ints: Vec<BigInt> = scaled
            .iter()
            .map(|r| {
                let s = r.mul(&d2);
                debug_assert!(s.is_integer());
                s.numer().clone()
            })
            .collect();
        FullTwoTorsionModel::new([ints[0].clone(), ints[1].clone(), ints[2].clone()])
    }
}

impl fmt::Display for LongModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.a.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

fn torsion_dim(rational_roots: usize) -> u32 {
    match rational_roots {
        3 => 2,
        1 => 1,
        _ => 0,
    }
}

/// F2-dimension of `E(Q)[2]`.
pub fn torsion_two_structure(m: &LongModel) -> Result<u32> {
    Ok(torsion_dim(m.two_torsion_abscissae()?.len()))
}

/// All positive divisors of a nonzero integer.
fn divisors(n: &BigInt) -> Result<Vec<BigInt>> {
    let f = factorize(n)?;
    let mut ds = vec![BigInt::one()];
    for (p, &e) in &f.factors {
        let mut next = Vec::with_capacity(ds.len() * (e as usize + 1));
        for d in &ds {
            let mut pk = d.clone();
            for _ in 0..=e {
                next.push(pk.clone());
                pk *= p;
            }
        }
        ds = next;
    }
    ds.sort();
    Ok(ds)
}

fn eval_poly(c: &[BigInt], num: &BigInt, den: &BigInt) -> BigInt {
    // homogenized: Σ cᵢ num^i den^(deg − i)
    let deg = c.len() - 1;
    let mut acc = BigInt::zero();
    for (i, ci) in c.iter().enumerate() {
        acc += ci * num.pow(i as u32) * den.pow((deg - i) as u32);
    }
    acc
}

/// Distinct rational roots of `Σ cᵢ xⁱ` (degree ≤ 3, leading coefficient
/// nonzero), by the rational root test.
pub fn rational_roots(c: &[RationalNumber]) -> Result<Vec<RationalNumber>> {
    let lcm = c.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let mut ints: Vec<BigInt> = c
        .iter()
        .map(|r| r.numer() * (&lcm / r.denom()))
        .collect();
    while ints.last().is_some_and(|x| x.is_zero()) {
        ints.pop();
    }
    let mut roots = Vec::new();
    // strip the root 0
    let mut start = 0;
    while start < ints.len() && ints[start].is_zero() {
        start += 1;
    }
    if start > 0 {
        roots.push(RationalNumber::integer(0));
    }
    let ints = &ints[start..];
    if ints.len() <= 1 {
        return Ok(roots);
    }
    let lead = ints.last().expect("nonempty");
    let dens = divisors(lead)?;
    let nums = divisors(&ints[0])?;
    for q in &dens {
        for p in &nums {
            for num in [p.clone(), -p] {
                if num.gcd(q).is_one() && eval_poly(ints, &num, q).is_zero() {
                    roots.push(RationalNumber::new(num, q.clone())?);
                }
            }
        }
    }
    roots.sort_by(|a, b| (a.numer() * b.denom()).cmp(&(b.numer() * a.denom())));
    roots.dedup();
    Ok(roots)
}

/// `Σ`: `∞`, then 2, then the odd primes dividing `Δ` ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SigmaSet {
    places: Vec<Place>,
}

impl SigmaSet {
    pub fn from_places(mut places: Vec<Place>) -> Self {
        places.extend([Place::Infinite, Place::Finite(2)]);
        places.sort();
        places.dedup();
        Self { places }
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    /// `n = |Σ|`.
    pub fn n(&self) -> usize {
        self.places.len()
    }

    pub fn contains(&self, v: Place) -> bool {
        self.places.binary_search(&v).is_ok()
    }

    pub fn finite_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.places.iter().filter_map(|v| v.prime())
    }

    pub fn union(&self, extra: impl IntoIterator<Item = Place>) -> Self {
        let mut places = self.places.clone();
        places.extend(extra);
        Self::from_places(places)
    }
}

pub fn sigma_set(model: &FullTwoTorsionModel) -> SigmaSet {
    SigmaSet::from_places(model.odd_bad.iter().map(|&p| Place::Finite(p)).collect())
}

/// `Σ` enlarged by extra primes.
pub fn sigma_set_enlarged(model: &FullTwoTorsionModel, extra: &[u64]) -> SigmaSet {
    sigma_set(model).union(extra.iter().map(|&p| Place::Finite(p)))
}

/// Model of `E^d`: roots `d·eᵢ`, re-sorted.
pub fn twist(model: &FullTwoTorsionModel, d: &BigInt) -> Result<FullTwoTorsionModel> {
    if d.is_zero() {
        return Err(Error::Zero("twist"));
    }
    if !zarith::is_squarefree(d)? {
        return Err(Error::NotSquarefree(d.to_string()));
    }
    let [a, b, c] = &model.roots;
    FullTwoTorsionModel::new([a * d, b * d, c * d])
}

/// `dim E(Q_q)[2]` for `q ∉ Σ`.
pub fn place_class(model: &FullTwoTorsionModel, q: u64) -> Result<u32> {
    let v = Place::Finite(q);
    if sigma_set(model).contains(v) {
        return Err(Error::PlaceInSigma(v));
    }
    if !zarith::is_prime_u64(q) {
        return Err(Error::Parse(format!("{q} is not prime")));
    }
    Ok(2)
}

/// Whether `E[4] ⊂ E(Q_q)` at an odd prime of good reduction: every
/// `(eᵢ, 0)` is halvable, i.e. `eᵢ − eⱼ` and `eᵢ − eₖ` are squares in `Q_q`.
pub fn four_torsion_rational_at(model: &FullTwoTorsionModel, q: u64) -> Result<bool> {
    if q == 2 {
        return Err(Error::PlaceInSigma(Place::Finite(2)));
    }
    place_class(model, q)?;
    let v = Place::Finite(q);
    let [a, b, c] = &model.roots;
    Ok([a - b, a - c, b - a, b - c, c - a, c - b]
        .iter()
        .all(|x| is_local_square(x, v)))
}

/// A parsed curve argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CurveInput {
    Full(FullTwoTorsionModel),
    Long(LongModel),
}

impl CurveInput {
    /// The full 2-torsion model, converting long models whose 2-division
    /// cubic splits.
    pub fn full_two_torsion(&self) -> Result<FullTwoTorsionModel> {
        match self {
            CurveInput::Full(m) => Ok(m.clone()),
            CurveInput::Long(m) => m.to_full_two_torsion(),
        }
    }

    pub fn torsion_two_dim(&self) -> Result<u32> {
        match self {
            CurveInput::Full(_) => Ok(2),
            CurveInput::Long(m) => torsion_two_structure(m),
        }
    }
}

impl FromStr for CurveInput {
    type Err = Error;

    /// `"e1,e2,e3"` or `"[a1,a2,a3,a4,a6]"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse(format!("unterminated model {s:?}")))?;
            let coeffs = inner
                .split(',')
                .map(RationalNumber::from_str)
                .collect::<Result<Vec<_>>>()?;
            let a: [RationalNumber; 5] = coeffs
                .try_into()
                .map_err(|_| Error::Parse("long model needs five coefficients".into()))?;
            return Ok(CurveInput::Long(LongModel::new(a)?));
        }
        let roots = s
            .split(',')
            .map(|t| {
                BigInt::from_str(t.trim()).map_err(|_| Error::Parse(format!("bad root {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let roots: [BigInt; 3] = roots
            .try_into()
            .map_err(|_| Error::Parse("expected three roots e1,e2,e3".into()))?;
        Ok(CurveInput::Full(FullTwoTorsionModel::new(roots)?))
    }
}

impl FromStr for FullTwoTorsionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<CurveInput>()?.full_two_torsion()
    }
}

/// Integer square root when `n` is a perfect square.
pub fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}
