//! Local Kummer images `α_v(χ) ⊂ H¹(Q_v, E[2])` and the norm index `h_v`.
//!
//! A twist by a local class `d_v` is realised on the model with roots
//! `r·eᵢ` where `r` is the canonical representative of `d_v`; its points map
//! to `(class(x − r·e₁), class(x − r·e₂))`, i.e. the twisted curve is read in
//! the same ambient coordinates as `E` under `(eᵢ, 0) ↔ (r·eᵢ, 0)`.
//!
//! Images are generated by the two 2-torsion images plus sampled rational
//! abscissae `x = a / b^(2j)` (`b = p`, or 2 at `∞`) with `f(x)` a square in
//! `Q_v`, until the a-priori dimension is reached.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, RwLock};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::curve::FullTwoTorsionModel;
use crate::error::{Error, Result};
use crate::f2::{self, BitVec, Echelon};
use crate::padic::{local_class_int, pairing_bits, LocalCocycle, LocalSquareClass, Place};

/// Sampling budget per image.
pub const DEFAULT_SAMPLE_BUDGET: usize = 100_000;

/// Largest denominator exponent `j` in `x = a / b^(2j)`.
const MAX_DEPTH: u32 = 4;
const CHUNK: usize = 64;

/// How the twisted curve's cocycles are identified with those of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Convention {
    /// `(class(x − d·e₁), class(x − d·e₂))`.
    #[default]
    Shared,
    /// Both coordinates additionally multiplied by `class(d)`. Wrong; kept
    /// so the test suites can show that it is rejected.
    ScaledByTwist,
}

/// `α_v(d_v)` with an independent basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalImage {
    place: Place,
    basis: Vec<LocalCocycle>,
    vectors: Vec<BitVec>,
}

impl LocalImage {
    fn from_echelon(place: Place, e: &Echelon) -> Self {
        let vectors = e.basis();
        let basis = vectors
            .iter()
            .map(|v| LocalCocycle::from_bitvec(place, v))
            .collect();
        Self {
            place,
            basis,
            vectors,
        }
    }

    pub fn place(&self) -> Place {
        self.place
    }

    pub fn basis(&self) -> &[LocalCocycle] {
        &self.basis
    }

    /// Basis in the bit encoding of [`LocalCocycle::to_bitvec`].
    pub fn vectors(&self) -> &[BitVec] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, c: &LocalCocycle) -> bool {
        self.contains_bits(&c.to_bitvec())
    }

    pub fn contains_bits(&self, v: &BitVec) -> bool {
        Echelon::from_vectors(2 * self.place.width(), &self.vectors).contains(v)
    }

    /// Every pair of basis elements pairs to zero.
    pub fn is_isotropic(&self) -> bool {
        self.vectors
            .iter()
            .all(|x| self.vectors.iter().all(|y| !pairing_bits(self.place, x, y)))
    }

    /// Basis of `self ∩ other`.
    pub fn intersection(&self, other: &LocalImage) -> Vec<LocalCocycle> {
        f2::intersection(&self.vectors, &other.vectors, 2 * self.place.width())
            .iter()
            .map(|v| LocalCocycle::from_bitvec(self.place, v))
            .collect()
    }

    /// Functionals (under the standard dot product) vanishing on the image;
    /// their common kernel is the image.
    pub fn annihilator(&self) -> Vec<BitVec> {
        f2::kernel(&self.vectors, 2 * self.place.width())
    }

    /// Whether every basis element has both components of even valuation.
    pub fn is_unramified(&self) -> bool {
        self.basis
            .iter()
            .all(|c| !c.first.valuation_parity() && !c.second.valuation_parity())
    }
}

/// `dim α_v(d_v)`: `dim E^d(Q_v)[2]`, plus one at 2, minus one at `∞`.
pub fn expected_local_dim(_model: &FullTwoTorsionModel, d_v: &LocalSquareClass, v: Place) -> usize {
    debug_assert_eq!(d_v.place(), v);
    // full rational 2-torsion survives every quadratic twist
    let torsion = 2;
    match v {
        Place::Infinite => torsion - 1,
        Place::Finite(2) => torsion + 1,
        Place::Finite(_) => torsion,
    }
}

type CacheKey = ([BigInt; 3], LocalSquareClass, Convention);

static CACHE: LazyLock<RwLock<HashMap<CacheKey, Arc<LocalImage>>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// `α_v(d_v)`, memoised per (model, class, convention).
pub fn kummer_image(
    model: &FullTwoTorsionModel,
    d_v: &LocalSquareClass,
    v: Place,
) -> Result<Arc<LocalImage>> {
    kummer_image_cached(model, d_v, v, Convention::Shared)
}

pub fn kummer_image_cached(
    model: &FullTwoTorsionModel,
    d_v: &LocalSquareClass,
    v: Place,
    convention: Convention,
) -> Result<Arc<LocalImage>> {
    if d_v.place() != v {
        return Err(Error::PlaceMismatch(v, d_v.place()));
    }
    let key = (model.roots().clone(), *d_v, convention);
    if let Some(img) = CACHE.read().expect("cache lock").get(&key) {
        return Ok(Arc::clone(img));
    }
    let img = Arc::new(kummer_image_with(model, d_v, v, convention, DEFAULT_SAMPLE_BUDGET)?);
    let mut cache = CACHE.write().expect("cache lock");
    Ok(Arc::clone(cache.entry(key).or_insert(img)))
}

/// Uncached computation of `α_v(d_v)` with an explicit sampling budget.
pub fn kummer_image_with(
    model: &FullTwoTorsionModel,
    d_v: &LocalSquareClass,
    v: Place,
    convention: Convention,
    budget: usize,
) -> Result<LocalImage> {
    if d_v.place() != v {
        return Err(Error::PlaceMismatch(v, d_v.place()));
    }
    let expected = expected_local_dim(model, d_v, v);
    let r = d_v.representative();
    let t: Vec<BigInt> = model.roots().iter().map(|e| e * &r).collect();
    let shift = match convention {
        Convention::Shared => None,
        Convention::ScaledByTwist => Some(local_class_int(&r, v)),
    };
    let cocycle = |a: &BigInt, b: &BigInt| -> BitVec {
        let (mut c1, mut c2) = (local_class_int(a, v), local_class_int(b, v));
        if let Some(s) = shift {
            c1 = c1.add(&s);
            c2 = c2.add(&s);
        }
        LocalCocycle { first: c1, second: c2 }.to_bitvec()
    };

    let ambient = 2 * v.width();
    let mut span = Echelon::new(ambient);
    let (d12, d13, d23) = (&t[0] - &t[1], &t[0] - &t[2], &t[1] - &t[2]);
    span.insert(&cocycle(&(&d12 * &d13), &d12));
    let d21 = -&d12;
    span.insert(&cocycle(&d21, &(&d21 * &d23)));
    if span.dim() >= expected {
        return Ok(LocalImage::from_echelon(v, &span));
    }

    let base = v.prime().unwrap_or(2);
    let base_big = BigInt::from(base);
    let mut ladders: Vec<(BigInt, i64)> = (0..=MAX_DEPTH)
        .map(|j| (base_big.pow(2 * j), 0i64))
        .collect();
    let mut spent = 0usize;
    let next_a = |step: &mut i64| {
        // 0, 1, −1, 2, −2, …
        let a = if *step % 2 == 1 { (*step + 1) / 2 } else { -(*step / 2) };
        *step += 1;
        a
    };
    'outer: loop {
        for (j, (s2, step)) in ladders.iter_mut().enumerate() {
            for _ in 0..CHUNK {
                let a = next_a(step);
                if j > 0 && a.rem_euclid(base as i64) == 0 {
                    continue;
                }
                if spent == budget {
                    break 'outer;
                }
                spent += 1;
                // x = a / s2, x − tᵢ ≡ a − tᵢ·s2 modulo squares
                let a = BigInt::from(a);
                let diffs: Vec<BigInt> = t.iter().map(|ti| &a - ti * &*s2).collect();
                if diffs.iter().any(|d| d.is_zero()) {
                    continue;
                }
                let prod = &diffs[0] * &diffs[1] * &diffs[2];
                if !local_class_int(&prod, v).is_trivial() {
                    continue;
                }
                if span.insert(&cocycle(&diffs[0], &diffs[1])) && span.dim() >= expected {
                    return Ok(LocalImage::from_echelon(v, &span));
                }
            }
        }
    }
    Err(Error::SamplingBudget {
        place: v,
        reached: span.dim(),
        expected,
    })
}

/// `h_v(d_v) = dim α_v(1) − dim(α_v(1) ∩ α_v(d_v))`.
pub fn h_v(model: &FullTwoTorsionModel, d_v: &LocalSquareClass, v: Place) -> Result<usize> {
    h_v_with(model, d_v, v, Convention::Shared)
}

pub fn h_v_with(
    model: &FullTwoTorsionModel,
    d_v: &LocalSquareClass,
    v: Place,
    convention: Convention,
) -> Result<usize> {
    if d_v.is_trivial() {
        return Ok(0);
    }
    let base = kummer_image_cached(model, &LocalSquareClass::trivial(v), v, convention)?;
    let twisted = kummer_image_cached(model, d_v, v, convention)?;
    let ambient = 2 * v.width();
    Ok(base.dim() - f2::intersection_dim(base.vectors(), twisted.vectors(), ambient))
}

/// Number of cached images (diagnostics).
pub fn cache_len() -> usize {
    CACHE.read().expect("cache lock").len()
}
