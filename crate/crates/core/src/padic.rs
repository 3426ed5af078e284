//! Square classes of `Q_v^×` and the Hilbert symbol, in exact residue
//! coordinates.
//!
//! Coordinates of `Q_v^×/(Q_v^×)²` as bit vectors:
//!
//! | place  | bits | meaning                                          |
//! |--------|------|--------------------------------------------------|
//! | `∞`    | 1    | sign                                             |
//! | odd p  | 2    | valuation parity, unit is a non-residue          |
//! | 2      | 3    | valuation parity, exponents of `−1` and `5`      |
//!
//! A local cohomology class in `H¹(Q_v, E[2])` for split `E[2]` is a pair of
//! square classes; the pairing between two such pairs is
//! `(x₁, y₂)_v · (x₂, y₁)_v`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::f2::BitVec;
use crate::zarith::{self, is_prime_u64, mod_u64, split_valuation, RationalNumber};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Place {
    Infinite,
    Finite(u64),
}

impl Place {
    /// Number of F2 coordinates of `Q_v^×/(Q_v^×)²`.
    pub fn width(self) -> usize {
        match self {
            Place::Infinite => 1,
            Place::Finite(2) => 3,
            Place::Finite(_) => 2,
        }
    }

    pub fn prime(self) -> Option<u64> {
        match self {
            Place::Infinite => None,
            Place::Finite(p) => Some(p),
        }
    }

    pub fn is_odd_prime(self) -> bool {
        matches!(self, Place::Finite(p) if p != 2)
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Infinite => f.write_str("inf"),
            Place::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Place {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "∞" | "infinity" => Ok(Place::Infinite),
            t => {
                let p: u64 = t
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad place {t:?}")))?;
                if !is_prime_u64(p) {
                    return Err(Error::Parse(format!("place {p} is not prime")));
                }
                Ok(Place::Finite(p))
            }
        }
    }
}

impl Serialize for Place {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Place {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Smallest quadratic non-residue modulo an odd prime.
pub fn least_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&a| zarith::legendre_unchecked(a, p) == -1)
        .expect("odd primes have non-residues")
}

/// An element of `Q_v^×/(Q_v^×)²`; also names the local quadratic character
/// cutting out `Q_v(√d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalSquareClass {
    place: Place,
    bits: u8,
}

impl LocalSquareClass {
    pub fn trivial(place: Place) -> Self {
        Self { place, bits: 0 }
    }

    pub fn from_bits(place: Place, bits: u8) -> Self {
        debug_assert!(bits < 1 << place.width());
        Self { place, bits }
    }

    pub fn from_bitvec(place: Place, v: &BitVec) -> Self {
        debug_assert_eq!(v.len(), place.width());
        Self::from_bits(place, v.to_u64() as u8)
    }

    /// The sign character at `∞`.
    pub fn sign() -> Self {
        Self::from_bits(Place::Infinite, 1)
    }

    /// Every class at `place`, in bit order.
    pub fn all(place: Place) -> Vec<Self> {
        (0..1u8 << place.width())
            .map(|b| Self::from_bits(place, b))
            .collect()
    }

    pub fn place(&self) -> Place {
        self.place
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn to_bitvec(&self) -> BitVec {
        BitVec::from_u64(self.bits as u64, self.place.width())
    }

    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    pub fn valuation_parity(&self) -> bool {
        match self.place {
            Place::Infinite => false,
            Place::Finite(_) => self.bits & 1 == 1,
        }
    }

    /// Whether `Q_v(√d)/Q_v` is ramified. At 2 the unramified classes are
    /// those of 1 and 5.
    pub fn is_ramified(&self) -> bool {
        match self.place {
            Place::Infinite => false,
            Place::Finite(2) => self.bits & 0b011 != 0,
            Place::Finite(_) => self.bits & 1 == 1,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.place, other.place);
        Self::from_bits(self.place, self.bits ^ other.bits)
    }

    /// Canonical integer representative: `±1` at ∞, `p^a·u` with `u` 1 or
    /// the least non-residue at odd p, `2^a·(−1)^s·5^t` at 2.
    pub fn representative(&self) -> BigInt {
        let b = self.bits;
        match self.place {
            Place::Infinite => BigInt::from(if b & 1 == 1 { -1 } else { 1 }),
            Place::Finite(2) => {
                let mut n = BigInt::from(if b & 1 == 1 { 2 } else { 1 });
                if b & 2 != 0 {
                    n = -n;
                }
                if b & 4 != 0 {
                    n *= 5;
                }
                n
            }
            Place::Finite(p) => {
                let mut n = BigInt::from(if b & 1 == 1 { p } else { 1 });
                if b & 2 != 0 {
                    n *= least_nonresidue(p);
                }
                n
            }
        }
    }
}

impl fmt::Display for LocalSquareClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.representative())
    }
}

/// Class of a nonzero integer at `v`.
pub fn local_class_int(n: &BigInt, v: Place) -> LocalSquareClass {
    debug_assert!(!n.is_zero());
    match v {
        Place::Infinite => LocalSquareClass::from_bits(v, n.is_negative() as u8),
        Place::Finite(2) => {
            let (val, unit) = split_valuation(n, 2);
            LocalSquareClass::from_bits(v, (val & 1) as u8 | unit_bits_mod8(mod_u64(&unit, 8)))
        }
        Place::Finite(p) => {
            let (val, unit) = split_valuation(n, p);
            let nr = zarith::legendre_unchecked(mod_u64(&unit, p), p) == -1;
            LocalSquareClass::from_bits(v, (val & 1) as u8 | (nr as u8) << 1)
        }
    }
}

/// Unit `u ≡ (−1)^s 5^t (mod 8)` encoded as `s << 1 | t << 2`.
fn unit_bits_mod8(u: u64) -> u8 {
    match u {
        1 => 0b000,
        3 => 0b110,
        5 => 0b100,
        7 => 0b010,
        _ => unreachable!("even residue {u}"),
    }
}

/// Restriction `Q^×/(Q^×)² → Q_v^×/(Q_v^×)²`.
pub fn local_class(r: &RationalNumber, v: Place) -> Result<LocalSquareClass> {
    if r.is_zero() {
        return Err(Error::Zero("square class"));
    }
    // r ≡ numerator · denominator modulo squares
    Ok(local_class_int(&(r.numer() * r.denom()), v))
}

/// Hilbert symbol `(a, b)_v` on square classes.
pub fn hilbert(a: &LocalSquareClass, b: &LocalSquareClass) -> Result<i8> {
    if a.place != b.place {
        return Err(Error::PlaceMismatch(a.place, b.place));
    }
    Ok(if hilbert_bit(a.place, a.bits, b.bits) { -1 } else { 1 })
}

/// Hilbert symbol of two nonzero rationals at `v`.
pub fn hilbert_rational(a: &RationalNumber, b: &RationalNumber, v: Place) -> Result<i8> {
    hilbert(&local_class(a, v)?, &local_class(b, v)?)
}

/// Additive Hilbert symbol: true iff `(a, b)_v = −1`.
fn hilbert_bit(v: Place, a: u8, b: u8) -> bool {
    let bit = |x: u8, i: u8| (x >> i) & 1;
    let e = match v {
        Place::Infinite => a & b & 1,
        Place::Finite(2) => {
            let (va, sa, ta) = (bit(a, 0), bit(a, 1), bit(a, 2));
            let (vb, sb, tb) = (bit(b, 0), bit(b, 1), bit(b, 2));
            (sa & sb) ^ (va & tb) ^ (vb & ta)
        }
        Place::Finite(p) => {
            let (va, na) = (bit(a, 0), bit(a, 1));
            let (vb, nb) = (bit(b, 0), bit(b, 1));
            let eps = ((p - 1) / 2 % 2) as u8;
            (va & vb & eps) ^ (na & vb) ^ (nb & va)
        }
    };
    e == 1
}

/// An element of `H¹(Q_v, E[2]) ≅ (Q_v^×/(Q_v^×)²)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalCocycle {
    pub first: LocalSquareClass,
    pub second: LocalSquareClass,
}

impl LocalCocycle {
    pub fn new(first: LocalSquareClass, second: LocalSquareClass) -> Result<Self> {
        if first.place != second.place {
            return Err(Error::PlaceMismatch(first.place, second.place));
        }
        Ok(Self { first, second })
    }

    pub fn zero(place: Place) -> Self {
        Self {
            first: LocalSquareClass::trivial(place),
            second: LocalSquareClass::trivial(place),
        }
    }

    pub fn place(&self) -> Place {
        self.first.place
    }

    /// First component's bits, then the second's.
    pub fn to_bitvec(&self) -> BitVec {
        self.first.to_bitvec().concat(&self.second.to_bitvec())
    }

    pub fn from_bitvec(place: Place, v: &BitVec) -> Self {
        let w = place.width();
        debug_assert_eq!(v.len(), 2 * w);
        Self {
            first: LocalSquareClass::from_bitvec(place, &v.slice(0, w)),
            second: LocalSquareClass::from_bitvec(place, &v.slice(w, 2 * w)),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            first: self.first.add(&other.first),
            second: self.second.add(&other.second),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.first.is_trivial() && self.second.is_trivial()
    }
}

/// The local Tate pairing in cocycle coordinates, as an element of F2.
pub fn local_pairing(x: &LocalCocycle, y: &LocalCocycle) -> Result<bool> {
    if x.place() != y.place() {
        return Err(Error::PlaceMismatch(x.place(), y.place()));
    }
    let v = x.place();
    Ok(hilbert_bit(v, x.first.bits, y.second.bits) ^ hilbert_bit(v, x.second.bits, y.first.bits))
}

/// [`local_pairing`] on the bit encoding of [`LocalCocycle::to_bitvec`].
pub fn pairing_bits(v: Place, x: &BitVec, y: &BitVec) -> bool {
    let (cx, cy) = (LocalCocycle::from_bitvec(v, x), LocalCocycle::from_bitvec(v, y));
    hilbert_bit(v, cx.first.bits, cy.second.bits) ^ hilbert_bit(v, cx.second.bits, cy.first.bits)
}

/// Dimension of `H¹(Q_v, E[2])` for split `E[2]`.
pub fn cocycle_space_dim(v: Place) -> usize {
    2 * v.width()
}

/// Whether `n` is a nonzero square in `Q_v`.
pub fn is_local_square(n: &BigInt, v: Place) -> bool {
    !n.is_zero() && local_class_int(n, v).is_trivial()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2::rank;
    use proptest::prelude::*;

    fn q(n: i64) -> RationalNumber {
        RationalNumber::integer(n)
    }

    fn cls(n: i64, v: Place) -> LocalSquareClass {
        local_class(&q(n), v).unwrap()
    }

    const TWO: Place = Place::Finite(2);

    #[test]
    fn local_class_examples() {
        // 18 = 2·3², 2 is a non-residue mod 3
        assert_eq!(cls(18, Place::Finite(3)).bits(), 0b10);
        assert_eq!(cls(-4, Place::Infinite).bits(), 1);
        assert!(cls(17, TWO).is_trivial());
        assert_eq!(cls(-1, TWO).bits(), 0b010);
        assert_eq!(cls(5, TWO).bits(), 0b100);
        assert_eq!(cls(-5, TWO).bits(), 0b110);
        assert_eq!(cls(2, TWO).bits(), 0b001);
        let r: RationalNumber = "-9/2".parse().unwrap();
        assert_eq!(local_class(&r, TWO).unwrap(), cls(-2, TWO));
    }

    #[test]
    fn representatives_round_trip() {
        for v in [Place::Infinite, TWO, Place::Finite(3), Place::Finite(7), Place::Finite(17)] {
            for c in LocalSquareClass::all(v) {
                assert_eq!(local_class_int(&c.representative(), v), c, "{v} {c:?}");
            }
        }
    }

    #[test]
    fn hilbert_examples() {
        assert_eq!(hilbert(&cls(-1, Place::Infinite), &cls(-1, Place::Infinite)).unwrap(), -1);
        // z² + x² + y² ≡ 0 (mod 8) has no primitive solution
        let primitive_solution = (0..8i64).any(|x| {
            (0..8i64).any(|y| {
                (0..8i64).any(|z| (x % 2 == 1 || y % 2 == 1 || z % 2 == 1) && (x * x + y * y + z * z) % 8 == 0)
            })
        });
        assert!(!primitive_solution);
        assert_eq!(hilbert(&cls(-1, TWO), &cls(-1, TWO)).unwrap(), -1);
        for v in [Place::Infinite, TWO, Place::Finite(5)] {
            for b in LocalSquareClass::all(v) {
                assert_eq!(hilbert(&LocalSquareClass::trivial(v), &b).unwrap(), 1);
            }
        }
        assert!(hilbert(&cls(3, TWO), &cls(3, Place::Finite(3))).is_err());
    }

    /// Brute-force `(a,b)_p` for odd p: solvability of `z² = a x² + b y²`
    /// with a primitive solution mod p^3 (enough for squarefree a, b).
    fn hilbert_brute(a: i64, b: i64, p: i64) -> i8 {
        let m = p * p * p;
        for x in 0..m {
            for y in 0..m {
                let rhs = (a * x * x + b * y * y).rem_euclid(m);
                for z in 0..m {
                    if x % p == 0 && y % p == 0 && z % p == 0 {
                        continue;
                    }
                    if (z * z).rem_euclid(m) == rhs {
                        return 1;
                    }
                }
            }
        }
        -1
    }

    #[test]
    fn hilbert_matches_brute_force_at_3() {
        let v = Place::Finite(3);
        for a in [1i64, -1, 2, -2, 3, -3, 6, -6] {
            for b in [1i64, -1, 2, 3, 6, -3] {
                assert_eq!(hilbert(&cls(a, v), &cls(b, v)).unwrap(), hilbert_brute(a, b, 3), "({a},{b})_3");
            }
        }
    }

    #[test]
    fn pairing_examples() {
        let v = Place::Finite(7);
        let pc = LocalCocycle::new(cls(7, v), cls(1, v)).unwrap();
        assert!(!local_pairing(&pc, &pc).unwrap());
        let u = least_nonresidue(7) as i64;
        let uc = LocalCocycle::new(cls(1, v), cls(u, v)).unwrap();
        assert!(local_pairing(&pc, &uc).unwrap());
        assert!(!local_pairing(&pc, &LocalCocycle::zero(v)).unwrap());
    }

    #[test]
    fn pairing_nondegenerate_and_alternating() {
        for v in [Place::Infinite, TWO, Place::Finite(3), Place::Finite(5), Place::Finite(13)] {
            let n = cocycle_space_dim(v);
            let basis: Vec<BitVec> = (0..n).map(|i| BitVec::unit(n, i)).collect();
            let gram: Vec<BitVec> = basis
                .iter()
                .map(|x| BitVec::from_bits(&basis.iter().map(|y| pairing_bits(v, x, y)).collect::<Vec<_>>()))
                .collect();
            assert_eq!(rank(&gram), n, "degenerate at {v}");
            for x in 0..1u64 << n {
                let x = BitVec::from_u64(x, n);
                assert!(!pairing_bits(v, &x, &x));
            }
        }
    }

    fn places_of(n: &BigInt) -> Vec<Place> {
        let mut ps = vec![Place::Infinite, TWO];
        for p in zarith::prime_support(n).unwrap() {
            if p != 2 {
                ps.push(Place::Finite(p));
            }
        }
        ps
    }

    proptest! {
        #[test]
        fn product_formula(a in -3000i64..3000, b in -3000i64..3000, c in 1i64..50) {
            prop_assume!(a != 0 && b != 0);
            let ra = RationalNumber::new(a, c).unwrap();
            let rb = q(b);
            let mut prod = 1i8;
            for v in places_of(&BigInt::from(2 * a * b * c)) {
                prod *= hilbert_rational(&ra, &rb, v).unwrap();
            }
            prop_assert_eq!(prod, 1);
        }

        #[test]
        fn symmetric_and_bimultiplicative(a in -500i64..500, b in -500i64..500, c in -500i64..500, idx in 0usize..6) {
            prop_assume!(a != 0 && b != 0 && c != 0);
            let v = [Place::Infinite, TWO, Place::Finite(3), Place::Finite(5), Place::Finite(7), Place::Finite(11)][idx];
            let h = |x: i64, y: i64| hilbert(&cls(x, v), &cls(y, v)).unwrap();
            prop_assert_eq!(h(a, b), h(b, a));
            prop_assert_eq!(h(a * b, c), h(a, c) * h(b, c));
        }
    }
}
