//! 2-Selmer groups of a full-2-torsion model with masked, strict and relaxed
//! local conditions.
//!
//! Cohomology classes supported on `Σ′` are pairs `(d₁, d₂)` of signed
//! squarefree integers with prime support in `Σ′`, encoded as `2|Σ′|` bits
//! over the generators `[−1, p₁, p₂, …]`. Each place `v ∈ Σ′` contributes the
//! rows `λ ∘ res_v` for `λ` spanning the annihilator of the local condition;
//! the group is the kernel of the stacked matrix. Places outside `Σ′` impose
//! nothing: such classes are unramified there and land in `α_q(1)`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::curve::{sigma_set, FullTwoTorsionModel, SigmaSet};
use crate::error::{Error, Result};
use crate::f2::{self, BitVec, Echelon};
use crate::local_descent::{kummer_image_cached, Convention, LocalImage};
use crate::padic::{local_class_int, pairing_bits, LocalCocycle, LocalSquareClass, Place};
use crate::zarith::{is_prime_u64, legendre_unchecked, mod_u64, serde_int, squarefree_decompose, RationalNumber};

pub const SCHEMA_VERSION: u32 = 1;

/// The basis `[−1, p₁, p₂, …]` of `Q(Σ′, 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalClassBasis {
    places: Vec<Place>,
}

impl GlobalClassBasis {
    pub fn new(sigma: &SigmaSet) -> Self {
        Self {
            places: sigma.places().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn generators(&self) -> Vec<BigInt> {
        self.places
            .iter()
            .map(|v| match v {
                Place::Infinite => BigInt::from(-1),
                Place::Finite(p) => BigInt::from(*p),
            })
            .collect()
    }

    pub fn decode(&self, bits: &BitVec) -> BigInt {
        debug_assert_eq!(bits.len(), self.len());
        self.generators()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| bits.get(*i))
            .fold(BigInt::one(), |acc, (_, g)| acc * g)
    }

    /// Coordinates of the square class of `n`; fails if `n` has odd
    /// valuation at a prime outside the basis.
    pub fn encode(&self, n: &BigInt) -> Result<BitVec> {
        let part = squarefree_decompose(&RationalNumber::integer(n.clone()))?;
        let mut bits = BitVec::zeros(self.len());
        if part.sign < 0 {
            bits.set(0, true);
        }
        for p in &part.support {
            let i = self
                .places
                .binary_search(&Place::Finite(*p))
                .map_err(|_| Error::InconsistentSpec(format!("{n} is not supported on the basis")))?;
            bits.set(i, true);
        }
        Ok(bits)
    }
}

/// Local conditions defining a Selmer group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelmerSpec {
    model: FullTwoTorsionModel,
    masks: BTreeMap<Place, LocalSquareClass>,
    strict: BTreeSet<Place>,
    relaxed: BTreeSet<Place>,
    extra_primes: BTreeSet<u64>,
    convention: Convention,
}

impl SelmerSpec {
    pub fn new(model: FullTwoTorsionModel) -> Self {
        Self {
            model,
            masks: BTreeMap::new(),
            strict: BTreeSet::new(),
            relaxed: BTreeSet::new(),
            extra_primes: BTreeSet::new(),
            convention: Convention::Shared,
        }
    }

    /// Replace the condition at `class.place()` by `α_v(class)`.
    pub fn with_mask(mut self, class: LocalSquareClass) -> Self {
        self.masks.insert(class.place(), class);
        self
    }

    pub fn with_masks(self, classes: impl IntoIterator<Item = LocalSquareClass>) -> Self {
        classes.into_iter().fold(self, |s, c| s.with_mask(c))
    }

    /// Require `res_v = 0` at these places.
    pub fn with_strict(mut self, places: impl IntoIterator<Item = Place>) -> Self {
        self.strict.extend(places);
        self
    }

    /// Drop the condition at these places.
    pub fn with_relaxed(mut self, places: impl IntoIterator<Item = Place>) -> Self {
        self.relaxed.extend(places);
        self
    }

    /// Enlarge `Σ′` by good primes carrying the unmasked condition.
    pub fn with_extra_primes(mut self, primes: impl IntoIterator<Item = u64>) -> Self {
        self.extra_primes.extend(primes);
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn without_masks_at(mut self, places: &BTreeSet<Place>) -> Self {
        self.masks.retain(|v, _| !places.contains(v));
        self
    }

    pub fn model(&self) -> &FullTwoTorsionModel {
        &self.model
    }

    pub fn masks(&self) -> &BTreeMap<Place, LocalSquareClass> {
        &self.masks
    }

    pub fn strict(&self) -> &BTreeSet<Place> {
        &self.strict
    }

    pub fn relaxed(&self) -> &BTreeSet<Place> {
        &self.relaxed
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn validate(&self) -> Result<()> {
        for (v, c) in &self.masks {
            if c.place() != *v {
                return Err(Error::PlaceMismatch(*v, c.place()));
            }
        }
        let places = self
            .masks
            .keys()
            .chain(&self.strict)
            .chain(&self.relaxed)
            .copied()
            .chain(self.extra_primes.iter().map(|&p| Place::Finite(p)));
        for v in places {
            if let Place::Finite(p) = v {
                if !is_prime_u64(p) {
                    return Err(Error::InconsistentSpec(format!("{p} is not prime")));
                }
            }
        }
        fn overlap<'a>(mut a: impl Iterator<Item = &'a Place>, b: &BTreeSet<Place>, what: &str) -> Result<()> {
            match a.find(|v| b.contains(v)) {
                Some(v) => Err(Error::InconsistentSpec(format!("place {v} is both {what}"))),
                None => Ok(()),
            }
        }
        overlap(self.masks.keys(), &self.strict, "masked and strict")?;
        overlap(self.masks.keys(), &self.relaxed, "masked and relaxed")?;
        overlap(self.strict.iter(), &self.relaxed, "strict and relaxed")?;
        Ok(())
    }

    /// `Σ′ = Σ ∪ mask places ∪ strict ∪ relaxed ∪ extra primes`.
    pub fn sigma_prime(&self) -> SigmaSet {
        sigma_set(&self.model).union(
            self.masks
                .keys()
                .chain(&self.strict)
                .chain(&self.relaxed)
                .copied()
                .chain(self.extra_primes.iter().map(|&p| Place::Finite(p))),
        )
    }

    fn condition(&self, v: Place) -> Result<Condition> {
        if self.strict.contains(&v) {
            return Ok(Condition::Strict);
        }
        if self.relaxed.contains(&v) {
            return Ok(Condition::Relaxed);
        }
        let class = self.masks.get(&v).copied().unwrap_or(LocalSquareClass::trivial(v));
        Ok(Condition::Image(kummer_image_cached(&self.model, &class, v, self.convention)?))
    }
}

enum Condition {
    Strict,
    Relaxed,
    Image(std::sync::Arc<LocalImage>),
}

/// A computed Selmer group with its basis in reduced echelon order.
#[derive(Debug, Clone)]
pub struct SelmerResult {
    spec: SelmerSpec,
    class_basis: GlobalClassBasis,
    vectors: Vec<BitVec>,
    basis: Vec<(BigInt, BigInt)>,
}

impl SelmerResult {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn spec(&self) -> &SelmerSpec {
        &self.spec
    }

    pub fn sigma_prime(&self) -> &[Place] {
        self.class_basis.places()
    }

    pub fn class_basis(&self) -> &GlobalClassBasis {
        &self.class_basis
    }

    /// Basis as `2|Σ′|`-bit vectors (`d₁` bits then `d₂` bits).
    pub fn vectors(&self) -> &[BitVec] {
        &self.vectors
    }

    /// Basis as pairs of signed squarefree integers.
    pub fn basis(&self) -> &[(BigInt, BigInt)] {
        &self.basis
    }

    pub fn record(&self) -> SelmerRecord {
        SelmerRecord {
            schema: SCHEMA_VERSION,
            curve: self.spec.model.to_string(),
            sigma_prime: self.class_basis.places().to_vec(),
            masks: self
                .spec
                .masks
                .iter()
                .map(|(v, c)| (*v, c.representative().to_string()))
                .collect(),
            strict: self.spec.strict.iter().copied().collect(),
            relaxed: self.spec.relaxed.iter().copied().collect(),
            dim: self.dim(),
            basis: self.basis.clone(),
        }
    }
}

/// Serialized form of a [`SelmerResult`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelmerRecord {
    pub schema: u32,
    pub curve: String,
    pub sigma_prime: Vec<Place>,
    /// Place → integer representative of the mask class.
    pub masks: BTreeMap<Place, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strict: Vec<Place>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relaxed: Vec<Place>,
    pub dim: usize,
    #[serde(with = "serde_int::pairs")]
    pub basis: Vec<(BigInt, BigInt)>,
}

/// `res_v` of the generators, as columns: the `j`-th entry is the cocycle of
/// the `j`-th unit vector of `Q(Σ′,2)²`.
fn restriction_columns(generators: &[BigInt], v: Place) -> Vec<BitVec> {
    let n = generators.len();
    let trivial = LocalSquareClass::trivial(v);
    let classes: Vec<LocalSquareClass> = generators.iter().map(|g| local_class_int(g, v)).collect();
    (0..2 * n)
        .map(|j| {
            let c = if j < n {
                LocalCocycle { first: classes[j], second: trivial }
            } else {
                LocalCocycle { first: trivial, second: classes[j - n] }
            };
            c.to_bitvec()
        })
        .collect()
}

fn restrict(pair: &(BigInt, BigInt), v: Place) -> BitVec {
    LocalCocycle {
        first: local_class_int(&pair.0, v),
        second: local_class_int(&pair.1, v),
    }
    .to_bitvec()
}

pub fn selmer_group(spec: &SelmerSpec) -> Result<SelmerResult> {
    spec.validate()?;
    let sigma = spec.sigma_prime();
    let class_basis = GlobalClassBasis::new(&sigma);
    let generators = class_basis.generators();
    let n = generators.len();

    let mut rows = Vec::new();
    let mut conditions = Vec::with_capacity(n);
    for &v in sigma.places() {
        let cond = spec.condition(v)?;
        let cols = restriction_columns(&generators, v);
        let functionals = match &cond {
            Condition::Relaxed => Vec::new(),
            Condition::Strict => (0..2 * v.width()).map(|k| BitVec::unit(2 * v.width(), k)).collect(),
            Condition::Image(img) => img.annihilator(),
        };
        for lambda in functionals {
            let mut row = BitVec::zeros(2 * n);
            for (j, c) in cols.iter().enumerate() {
                if lambda.dot(c) {
                    row.set(j, true);
                }
            }
            rows.push(row);
        }
        conditions.push((v, cond));
    }

    let vectors = f2::kernel(&rows, 2 * n);
    let basis: Vec<(BigInt, BigInt)> = vectors
        .iter()
        .map(|x| (class_basis.decode(&x.slice(0, n)), class_basis.decode(&x.slice(n, 2 * n))))
        .collect();

    for pair in &basis {
        for (v, cond) in &conditions {
            let r = restrict(pair, *v);
            let ok = match cond {
                Condition::Relaxed => true,
                Condition::Strict => r.is_zero(),
                Condition::Image(img) => img.contains_bits(&r),
            };
            if !ok {
                return Err(Error::Soundness(format!(
                    "basis element ({}, {}) violates the condition at {v}",
                    pair.0, pair.1
                )));
            }
        }
    }

    Ok(SelmerResult {
        spec: spec.clone(),
        class_basis,
        vectors,
        basis,
    })
}

/// `(dim Sel_{2,T}, dim Sel₂^T)`.
pub fn strict_relaxed_dims(spec: &SelmerSpec, t: &BTreeSet<Place>) -> Result<(usize, usize)> {
    check_disjoint(spec, t)?;
    let strict = selmer_group(&spec.clone().with_strict(t.iter().copied()))?;
    let relaxed = selmer_group(&spec.clone().with_relaxed(t.iter().copied()))?;
    Ok((strict.dim(), relaxed.dim()))
}

fn check_disjoint(spec: &SelmerSpec, t: &BTreeSet<Place>) -> Result<()> {
    match t.iter().find(|v| spec.masks.contains_key(v)) {
        Some(v) => Err(Error::InconsistentSpec(format!("place {v} is both masked and in T"))),
        None => Ok(()),
    }
}

/// Outcome of [`duality_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualityReport {
    pub places: Vec<Place>,
    pub dim_strict: usize,
    pub dim: usize,
    pub dim_relaxed: usize,
    /// `Σ_{v∈T} dim α_v(1)`.
    pub local_sum: usize,
    /// Images of `Sel^T` in `⊕ H¹/α` and of `Sel` in `⊕ α` pair to zero.
    pub orthogonal: bool,
    /// Their dimensions add up to `Σ dim α_v`.
    pub complementary: bool,
    pub certificate: Option<String>,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.dim_relaxed - self.dim_strict == self.local_sum && self.orthogonal && self.complementary
    }
}

/// Checks the strict/relaxed dimension identity and the orthogonal
/// complement statement for the restriction images at `T`.
pub fn duality_check(spec: &SelmerSpec, t: &BTreeSet<Place>) -> Result<DualityReport> {
    check_disjoint(spec, t)?;
    let sel = selmer_group(spec)?;
    let strict = selmer_group(&spec.clone().with_strict(t.iter().copied()))?;
    let relaxed = selmer_group(&spec.clone().with_relaxed(t.iter().copied()))?;
    let places: Vec<Place> = t.iter().copied().collect();

    let mut images = Vec::with_capacity(places.len());
    for &v in &places {
        images.push(kummer_image_cached(spec.model(), &LocalSquareClass::trivial(v), v, spec.convention())?);
    }
    let local_sum: usize = images.iter().map(|a| a.dim()).sum();

    // concatenated restriction to ⊕_{v∈T} H¹_v
    let width: usize = places.iter().map(|v| 2 * v.width()).sum();
    let res_t = |pair: &(BigInt, BigInt)| -> BitVec {
        places
            .iter()
            .map(|&v| restrict(pair, v))
            .fold(BitVec::zeros(0), |acc, r| acc.concat(&r))
    };
    let pair_t = |x: &BitVec, y: &BitVec| -> bool {
        let mut off = 0;
        let mut s = false;
        for &v in &places {
            let w = 2 * v.width();
            s ^= pairing_bits(v, &x.slice(off, off + w), &y.slice(off, off + w));
            off += w;
        }
        s
    };
    let alpha_sum: Vec<BitVec> = {
        let mut off = 0;
        let mut out = Vec::new();
        for (img, &v) in images.iter().zip(&places) {
            let w = 2 * v.width();
            for b in img.vectors() {
                out.push(BitVec::zeros(off).concat(b).concat(&BitVec::zeros(width - off - w)));
            }
            off += w;
        }
        out
    };

    let relaxed_res: Vec<BitVec> = relaxed.basis().iter().map(res_t).collect();
    let sel_res: Vec<BitVec> = sel.basis().iter().map(res_t).collect();

    let mut certificate = None;
    'search: for (i, x) in relaxed_res.iter().enumerate() {
        for (j, y) in sel_res.iter().enumerate() {
            if pair_t(x, y) {
                let (a, b) = (&relaxed.basis()[i], &sel.basis()[j]);
                certificate = Some(format!(
                    "<({}, {}), ({}, {})>_T = 1",
                    a.0, a.1, b.0, b.1
                ));
                break 'search;
            }
        }
    }
    let orthogonal = certificate.is_none();

    let alpha_dim = Echelon::from_vectors(width, &alpha_sum).dim();
    let quotient_image = Echelon::from_vectors(width, alpha_sum.iter().chain(&relaxed_res)).dim() - alpha_dim;
    let sub_image = Echelon::from_vectors(width, &sel_res).dim();
    let complementary = quotient_image + sub_image == local_sum;
    if !complementary && certificate.is_none() {
        certificate = Some(format!(
            "image dimensions {quotient_image} + {sub_image} != {local_sum}"
        ));
    }

    Ok(DualityReport {
        places,
        dim_strict: strict.dim(),
        dim: sel.dim(),
        dim_relaxed: relaxed.dim(),
        local_sum,
        orthogonal,
        complementary,
        certificate,
    })
}

/// `(bit of (d₁/q), bit of (d₂/q))`: the restriction of `(d₁, d₂)` to an
/// unramified place, evaluated at Frobenius.
pub fn frobenius_eval(element: &(BigInt, BigInt), q: u64, sigma_prime: &[Place]) -> Result<(bool, bool)> {
    if sigma_prime.contains(&Place::Finite(q)) {
        return Err(Error::PlaceInSigma(Place::Finite(q)));
    }
    if q == 2 || !is_prime_u64(q) {
        return Err(Error::NotOddPrime(q));
    }
    let bit = |d: &BigInt| -> Result<bool> {
        let r = mod_u64(d, q);
        if r == 0 {
            return Err(Error::InconsistentSpec(format!("{q} divides {d}")));
        }
        Ok(legendre_unchecked(r, q) == -1)
    };
    Ok((bit(&element.0)?, bit(&element.1)?))
}

/// Masks found by [`collapse_masks`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collapse {
    pub k: usize,
    /// Basis indices `i` (into `Q(Σ′,2)`) whose Frobenius maps were used.
    pub directions: Vec<usize>,
    pub primes: Vec<u64>,
    pub masks: Vec<LocalSquareClass>,
    pub dim_before: usize,
    pub dim_after: usize,
}

/// Default number of primes examined per direction.
pub const COLLAPSE_PRIME_BUDGET: u64 = 1_000_000;

/// Finds `k` primes `ωᵢ` such that ramified masks at them cut the Selmer
/// group of `spec` down by `2k`.
///
/// The maps `tᵢ(s) = (bit i of d₁, bit i of d₂)` on `Sel` are scanned
/// greedily for `k` indices where the joint image grows by 2; `ωᵢ` is then a
/// prime at which exactly the `i`-th generator is a non-residue, so
/// `res_{ωᵢ}` realises `tᵢ`.
pub fn collapse_masks(spec: &SelmerSpec, k: usize, budget: u64) -> Result<Collapse> {
    let sel = selmer_group(spec)?;
    let n = sel.class_basis().len();
    let generators = sel.class_basis().generators();

    let mut directions = Vec::new();
    let mut prefix: Vec<BitVec> = vec![BitVec::zeros(0); sel.dim()];
    let mut rank = 0;
    for i in 0..n {
        if directions.len() == k {
            break;
        }
        let extended: Vec<BitVec> = sel
            .vectors()
            .iter()
            .zip(&prefix)
            .map(|(x, p)| p.concat(&BitVec::from_bits(&[x.get(i), x.get(n + i)])))
            .collect();
        let r = f2::rank(&extended);
        if r == rank + 2 {
            directions.push(i);
            prefix = extended;
            rank = r;
        }
    }
    if directions.len() < k {
        return Err(Error::NoSurjection { k, rank: directions.len() });
    }

    let mut primes = Vec::with_capacity(k);
    for &i in &directions {
        let mut last = 0;
        let mut found = None;
        for (count, q) in crate::zarith::primes_from(3).enumerate() {
            if count as u64 >= budget {
                break;
            }
            last = q;
            if sel.sigma_prime().contains(&Place::Finite(q)) || primes.contains(&q) {
                continue;
            }
            let flips = generators
                .iter()
                .enumerate()
                .all(|(l, g)| (legendre_unchecked(mod_u64(g, q), q) == -1) == (l == i));
            if flips {
                found = Some(q);
                break;
            }
        }
        match found {
            Some(q) => primes.push(q),
            None => {
                return Err(Error::SearchBudget {
                    what: "collapse prime",
                    budget,
                    last,
                })
            }
        }
    }

    let masks: Vec<LocalSquareClass> = primes
        .iter()
        .map(|&q| LocalSquareClass::from_bits(Place::Finite(q), 0b01))
        .collect();
    let after = selmer_group(&spec.clone().with_masks(masks.iter().copied()))?;
    if after.dim() + 2 * k != sel.dim() {
        return Err(Error::Soundness(format!(
            "collapse at {primes:?} gave dimension {} from {}",
            after.dim(),
            sel.dim()
        )));
    }
    Ok(Collapse {
        k,
        directions,
        primes,
        masks,
        dim_before: sel.dim(),
        dim_after: after.dim(),
    })
}

/// Masks realising the twist by `d` at every place where `d` is locally
/// nontrivial among `Σ ∪ supp(d)`.
pub fn twist_masks(model: &FullTwoTorsionModel, d: &BigInt) -> Result<Vec<LocalSquareClass>> {
    let part = squarefree_decompose(&RationalNumber::integer(d.clone()))?;
    if part.value() != *d {
        return Err(Error::NotSquarefree(d.to_string()));
    }
    let places = sigma_set(model).union(part.support.iter().map(|&p| Place::Finite(p)));
    Ok(places
        .places()
        .iter()
        .map(|&v| local_class_int(d, v))
        .filter(|c| !c.is_trivial())
        .collect())
}
