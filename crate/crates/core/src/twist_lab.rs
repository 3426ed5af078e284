//! Quadratic twist experiments: ranks of twists, the parity identity,
//! characters with prescribed local behaviour, constructive rank +2 / +1
//! searches, and scans over `|d| ≤ B`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{four_torsion_rational_at, sigma_set, twist, FullTwoTorsionModel, Reduction};
use crate::error::{Error, Result};
use crate::local_descent::h_v;
use crate::padic::{local_class_int, LocalSquareClass, Place};
use crate::selmer::{selmer_group, twist_masks, SelmerSpec, SCHEMA_VERSION};
use crate::zarith::{
    is_prime_u64, is_squarefree, legendre_unchecked, mod_u64, primes_from, serde_int, valuation_int,
};

/// Default number of candidate primes examined by the searches.
pub const DEFAULT_PRIME_BUDGET: u64 = 1_000_000;

/// `r₂(E^d)`, computed as the Selmer group of `E` with the local conditions
/// of the twist at `Σ ∪ supp(d)`.
pub fn rank_of_twist(model: &FullTwoTorsionModel, d: &BigInt) -> Result<usize> {
    Ok(twist_selmer_size(model, d)?.0)
}

/// `(r₂(E^d), |Σ′|)`.
fn twist_selmer_size(model: &FullTwoTorsionModel, d: &BigInt) -> Result<(usize, usize)> {
    let sel = selmer_group(&SelmerSpec::new(model.clone()).with_masks(twist_masks(model, d)?))?;
    Ok((sel.dim(), sel.sigma_prime().len()))
}

/// `r₂(E)`.
pub fn base_rank(model: &FullTwoTorsionModel) -> Result<usize> {
    Ok(selmer_group(&SelmerSpec::new(model.clone()))?.dim())
}

fn check_squarefree(d: &BigInt) -> Result<()> {
    if d.is_zero() {
        return Err(Error::Zero("quadratic character"));
    }
    if !is_squarefree(d)? {
        return Err(Error::NotSquarefree(d.to_string()));
    }
    Ok(())
}

/// Both sides of the parity identity for one twist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParityCheck {
    #[serde(with = "serde_int")]
    pub d: BigInt,
    pub r_base: usize,
    pub r_twist: usize,
    /// `(r₂(E) − r₂(E^d)) mod 2`.
    pub lhs: u8,
    /// `Σ_v h_v(d) mod 2` over `v ∈ Σ ∪ supp(d)`.
    pub rhs: u8,
    pub equal: bool,
}

pub fn parity_check(model: &FullTwoTorsionModel, d: &BigInt) -> Result<ParityCheck> {
    check_squarefree(d)?;
    let r_base = base_rank(model)?;
    let r_twist = rank_of_twist(model, d)?;
    let rhs = parity_rhs(model, d)?;
    let lhs = ((r_base + r_twist) % 2) as u8;
    Ok(ParityCheck {
        d: d.clone(),
        r_base,
        r_twist,
        lhs,
        rhs,
        equal: lhs == rhs,
    })
}

fn parity_rhs(model: &FullTwoTorsionModel, d: &BigInt) -> Result<u8> {
    let mut sum = 0;
    for class in twist_masks(model, d)? {
        sum += h_v(model, &class, class.place())?;
    }
    Ok((sum % 2) as u8)
}

/// How the auxiliary prime of [`build_character`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtraPrime {
    /// No auxiliary prime: the prescription must be met by `Σ` and `T` alone.
    #[default]
    Absent,
    /// Smallest admissible prime.
    Search,
    /// Smallest admissible prime `≥` the given bound.
    SearchFrom(u64),
    /// Exactly this prime.
    Fixed(u64),
}

/// Local behaviour of a quadratic character: classes at places of `Σ`
/// (trivial where absent), a set `T ∌ Σ` of primes where it ramifies, and an
/// auxiliary prime.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharPrescription {
    pub at_sigma: BTreeMap<Place, LocalSquareClass>,
    pub ramified: BTreeSet<u64>,
    pub extra: ExtraPrime,
}

impl CharPrescription {
    pub fn with_class(mut self, class: LocalSquareClass) -> Self {
        self.at_sigma.insert(class.place(), class);
        self
    }

    pub fn with_ramified(mut self, primes: impl IntoIterator<Item = u64>) -> Self {
        self.ramified.extend(primes);
        self
    }

    pub fn with_extra(mut self, extra: ExtraPrime) -> Self {
        self.extra = extra;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuiltCharacter {
    #[serde(with = "serde_int")]
    pub d: BigInt,
    pub q: Option<u64>,
    /// Candidate primes examined.
    pub tried: u64,
}

/// Smallest squarefree `d = ±∏S·∏T·q` with the prescribed local classes.
///
/// The sign and the primes `S ⊂ Σ` are read off the prescribed valuations;
/// the unit parts at `Σ` are then matched by the choice of `q`, which by
/// reciprocity amounts to congruence and Legendre conditions on `q`.
pub fn build_character(
    model: &FullTwoTorsionModel,
    pres: &CharPrescription,
    budget: u64,
) -> Result<BuiltCharacter> {
    let sigma = sigma_set(model);
    for (v, c) in &pres.at_sigma {
        if !sigma.contains(*v) {
            return Err(Error::InconsistentPrescription(format!("{v} is not in Σ")));
        }
        if c.place() != *v {
            return Err(Error::PlaceMismatch(*v, c.place()));
        }
    }
    for &t in &pres.ramified {
        if sigma.contains(Place::Finite(t)) {
            return Err(Error::InconsistentPrescription(format!("ramified prime {t} lies in Σ")));
        }
        if !is_prime_u64(t) {
            return Err(Error::InconsistentPrescription(format!("{t} is not prime")));
        }
    }
    let class_at = |v: Place| pres.at_sigma.get(&v).copied().unwrap_or(LocalSquareClass::trivial(v));

    let mut c = BigInt::one();
    if !class_at(Place::Infinite).is_trivial() {
        c = -c;
    }
    for p in sigma.finite_primes() {
        if class_at(Place::Finite(p)).valuation_parity() {
            c *= p;
        }
    }
    for &t in &pres.ramified {
        c *= t;
    }
    let matches = |d: &BigInt| {
        sigma
            .finite_primes()
            .all(|p| local_class_int(d, Place::Finite(p)) == class_at(Place::Finite(p)))
    };
    let excluded = |q: u64| sigma.contains(Place::Finite(q)) || pres.ramified.contains(&q);

    let start = match pres.extra {
        ExtraPrime::Absent => {
            return if matches(&c) {
                Ok(BuiltCharacter { d: c, q: None, tried: 0 })
            } else {
                Err(Error::InconsistentPrescription(
                    "prescription needs an auxiliary prime".into(),
                ))
            };
        }
        ExtraPrime::Fixed(q) => {
            if !is_prime_u64(q) || excluded(q) {
                return Err(Error::InconsistentPrescription(format!("{q} is not an admissible prime")));
            }
            let d = &c * q;
            return if matches(&d) {
                Ok(BuiltCharacter { d, q: Some(q), tried: 1 })
            } else {
                Err(Error::InconsistentPrescription(format!("{q} does not meet the local conditions")))
            };
        }
        ExtraPrime::Search => 3,
        ExtraPrime::SearchFrom(s) => s.max(3),
    };
    let mut last = start;
    for (tried, q) in primes_from(start).enumerate() {
        if tried as u64 >= budget {
            break;
        }
        last = q;
        if excluded(q) {
            continue;
        }
        let d = &c * q;
        if matches(&d) {
            return Ok(BuiltCharacter {
                d,
                q: Some(q),
                tried: tried as u64 + 1,
            });
        }
    }
    Err(Error::SearchBudget {
        what: "character prime",
        budget,
        last,
    })
}

/// A prime `q` with `r₂(E^q) = r₂(E) + 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inc2Witness {
    pub q: u64,
    pub r_before: usize,
    pub r_after: usize,
    /// Modulus `θ = 8·∏ odd p ∈ Σ` with `q ≡ 1 mod θ`.
    pub modulus: u64,
    pub selmer_split: bool,
    pub four_torsion: bool,
    /// Candidates that met every condition yet failed verification.
    pub alarms: Vec<u64>,
    /// Primes `≡ 1 mod θ` examined.
    pub tried: u64,
}

/// Searches `q ≡ 1 mod 8·∏ odd p ∈ Σ` at which every Selmer generator is a
/// square and `E[4]` is rational over `Q_q`, then verifies the rank jump.
pub fn find_inc2(model: &FullTwoTorsionModel, budget: u64) -> Result<Inc2Witness> {
    let sel = selmer_group(&SelmerSpec::new(model.clone()))?;
    let r_before = sel.dim();
    let mut theta: u64 = 8;
    for p in sigma_set(model).finite_primes().filter(|&p| p != 2) {
        theta = theta
            .checked_mul(p)
            .ok_or_else(|| Error::PrimeTooLarge(format!("modulus 8·∏Σ exceeds 64 bits at {p}")))?;
    }
    let generators: Vec<&BigInt> = sel.basis().iter().flat_map(|(a, b)| [a, b]).collect();
    let mut alarms = Vec::new();
    let mut tried = 0u64;
    let mut q = 1u64;
    while tried < budget {
        q = q
            .checked_add(theta)
            .ok_or_else(|| Error::PrimeTooLarge("search ran past 64 bits".into()))?;
        if !is_prime_u64(q) {
            continue;
        }
        tried += 1;
        if !generators.iter().all(|g| legendre_unchecked(mod_u64(g, q), q) == 1) {
            continue;
        }
        if !four_torsion_rational_at(model, q)? {
            continue;
        }
        let r_after = rank_of_twist(model, &BigInt::from(q))?;
        if r_after == r_before + 2 {
            return Ok(Inc2Witness {
                q,
                r_before,
                r_after,
                modulus: theta,
                selmer_split: true,
                four_torsion: true,
                alarms,
                tried,
            });
        }
        log::warn!("soundness alarm: q = {q} meets every condition but gives rank {r_after} from {r_before}");
        alarms.push(q);
    }
    Err(Error::SearchBudget {
        what: "rank +2 prime",
        budget,
        last: q,
    })
}

/// `steps` successive rank +2 twists, each found on the previous twist.
/// Returns the witnesses and the accumulated twist `d = ∏ qᵢ`.
pub fn chain_inc2(model: &FullTwoTorsionModel, steps: usize, budget: u64) -> Result<(Vec<Inc2Witness>, BigInt)> {
    let mut current = model.clone();
    let mut d = BigInt::one();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let w = find_inc2(&current, budget)?;
        current = twist(&current, &BigInt::from(w.q))?;
        d *= w.q;
        out.push(w);
    }
    Ok((out, d))
}

/// A twist `d < 0` with `r₂(E^d) = r₂(E) + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlusOneWitness {
    #[serde(with = "serde_int")]
    pub d: BigInt,
    pub q: u64,
    pub r_before: usize,
    /// Rank with the sign class imposed at `∞` only.
    pub masked_rank: usize,
    pub r_after: usize,
    /// Characters examined.
    pub tried: u64,
}

/// Enumerates characters that are the sign at `∞`, trivial elsewhere on `Σ`
/// and ramified at one auxiliary prime, in ascending order of that prime.
pub fn find_plus_one(model: &FullTwoTorsionModel, budget: u64) -> Result<PlusOneWitness> {
    let r_before = base_rank(model)?;
    let masked_rank = selmer_group(&SelmerSpec::new(model.clone()).with_mask(LocalSquareClass::sign()))?.dim();
    if masked_rank + 1 != r_before {
        return Err(Error::Soundness(format!(
            "sign mask at ∞ gives rank {masked_rank}, expected {}",
            r_before as i64 - 1
        )));
    }
    let mut start = 3;
    let mut tried = 0;
    while tried < budget {
        let pres = CharPrescription::default()
            .with_class(LocalSquareClass::sign())
            .with_extra(ExtraPrime::SearchFrom(start));
        let built = build_character(model, &pres, budget - tried)?;
        tried += 1;
        let q = built.q.expect("searched prime");
        let r_after = rank_of_twist(model, &built.d)?;
        if r_after == r_before + 1 {
            return Ok(PlusOneWitness {
                d: built.d,
                q,
                r_before,
                masked_rank,
                r_after,
                tried,
            });
        }
        start = q + 1;
    }
    Err(Error::SearchBudget {
        what: "rank +1 character",
        budget,
        last: start,
    })
}

/// One scanned twist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistRecord {
    #[serde(with = "serde_int")]
    pub d: BigInt,
    pub rank: usize,
    pub parity_lhs: u8,
    pub parity_rhs: u8,
    /// `|Σ′|`.
    pub sigma_prime: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms: Option<u64>,
}

/// `+1, −1, +2, −2, …` over squarefree `|d|` in `lo..=hi`.
pub fn squarefree_range(lo: u64, hi: u64) -> Vec<BigInt> {
    (lo.max(1)..=hi)
        .filter(|&n| is_squarefree(&BigInt::from(n)).unwrap_or(false))
        .flat_map(|n| [BigInt::from(n), -BigInt::from(n)])
        .collect()
}

/// Evaluates one twist against a precomputed base rank.
pub fn scan_one(model: &FullTwoTorsionModel, r_base: usize, d: &BigInt, timing: bool) -> Result<TwistRecord> {
    let started = Instant::now();
    check_squarefree(d)?;
    let (rank, sigma_prime) = twist_selmer_size(model, d)?;
    let parity_rhs = parity_rhs(model, d)?;
    Ok(TwistRecord {
        d: d.clone(),
        rank,
        parity_lhs: ((r_base + rank) % 2) as u8,
        parity_rhs,
        sigma_prime,
        ms: timing.then(|| started.elapsed().as_millis() as u64),
    })
}

/// Records for squarefree `lo ≤ |d| ≤ hi`, in scan order, computed in
/// parallel.
pub fn scan_block(
    model: &FullTwoTorsionModel,
    r_base: usize,
    lo: u64,
    hi: u64,
    timing: bool,
) -> Vec<(BigInt, Result<TwistRecord>)> {
    squarefree_range(lo, hi)
        .into_par_iter()
        .map(|d| {
            let r = scan_one(model, r_base, &d, timing);
            (d, r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub t_hat_ge_2: bool,
    pub t_hat_le_n_plus_1: bool,
    pub t_hat_le_n: bool,
}

impl BoundChecks {
    pub fn all(&self) -> bool {
        self.t_hat_ge_2 && self.t_hat_le_n_plus_1 && self.t_hat_le_n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanError {
    #[serde(with = "serde_int")]
    pub d: BigInt,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub schema: u32,
    pub curve: String,
    pub bound: u64,
    /// `|Σ|` of the base curve.
    pub n: usize,
    pub records_count: usize,
    pub rank_histogram: BTreeMap<usize, usize>,
    pub t_hat: Option<usize>,
    pub r_max: Option<usize>,
    /// Integers in `[t_hat, r_max]` not attained.
    pub gaps: Vec<usize>,
    /// Parities of the ranks that occur.
    pub parities: Vec<u8>,
    pub parity_failures: Vec<String>,
    pub bound_checks: BoundChecks,
    pub errors: Vec<ScanError>,
}

impl ScanSummary {
    pub fn from_records(
        model: &FullTwoTorsionModel,
        bound: u64,
        records: &[TwistRecord],
        errors: Vec<ScanError>,
    ) -> Self {
        let n = sigma_set(model).n();
        let mut rank_histogram = BTreeMap::new();
        for r in records {
            *rank_histogram.entry(r.rank).or_insert(0) += 1;
        }
        let t_hat = rank_histogram.keys().next().copied();
        let r_max = rank_histogram.keys().next_back().copied();
        let gaps = match (t_hat, r_max) {
            (Some(lo), Some(hi)) => (lo..=hi).filter(|r| !rank_histogram.contains_key(r)).collect(),
            _ => Vec::new(),
        };
        let parities: BTreeSet<u8> = rank_histogram.keys().map(|r| (r % 2) as u8).collect();
        let parity_failures = records
            .iter()
            .filter(|r| r.parity_lhs != r.parity_rhs)
            .map(|r| r.d.to_string())
            .collect();
        let bound_checks = BoundChecks {
            t_hat_ge_2: t_hat.is_some_and(|t| t >= 2),
            t_hat_le_n_plus_1: t_hat.is_some_and(|t| t <= n + 1),
            t_hat_le_n: t_hat.is_some_and(|t| t <= n),
        };
        Self {
            schema: SCHEMA_VERSION,
            curve: model.to_string(),
            bound,
            n,
            records_count: records.len(),
            rank_histogram,
            t_hat,
            r_max,
            gaps,
            parities: parities.into_iter().collect(),
            parity_failures,
            bound_checks,
            errors,
        }
    }

    /// No parity failures, no errors, and every bound check holds.
    pub fn passed(&self) -> bool {
        self.parity_failures.is_empty() && self.errors.is_empty() && self.bound_checks.all()
    }
}

/// Scans all squarefree `0 < |d| ≤ bound`.
pub fn scan(model: &FullTwoTorsionModel, bound: u64, timing: bool) -> Result<(Vec<TwistRecord>, ScanSummary)> {
    let r_base = base_rank(model)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (d, r) in scan_block(model, r_base, 1, bound, timing) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(ScanError { d, message: e.to_string() }),
        }
    }
    let summary = ScanSummary::from_records(model, bound, &records, errors);
    Ok((records, summary))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiplicativeReport {
    pub prime: u64,
    /// `v_p(Δ)`.
    pub delta_valuation: u32,
    /// `h_p` of the nontrivial unramified class.
    pub h_unramified: usize,
    /// `h_p` of the trivial class.
    pub h_trivial: usize,
    /// Expected `h_p(unramified)`: 1 when `v_p(Δ)` is even.
    pub expected: Option<usize>,
    pub consistent: bool,
    /// `v_p(Δ) = 2·v_p(∏(eᵢ − eⱼ)) + v_p(16)` is always even for odd `p`.
    pub odd_valuation_reachable: bool,
}

/// `h_p` of the nontrivial unramified class at an odd prime of
/// multiplicative reduction, against the prediction `h = 1` for even
/// `v_p(Δ)`.
pub fn multiplicative_h_check(model: &FullTwoTorsionModel, p: u64) -> Result<MultiplicativeReport> {
    if p == 2 || !is_prime_u64(p) || model.reduction_at(p) != Reduction::Multiplicative {
        return Err(Error::NotMultiplicative(p));
    }
    let v = Place::Finite(p);
    let delta_valuation = valuation_int(&model.discriminant(), p);
    let h_unramified = h_v(model, &LocalSquareClass::from_bits(v, 0b10), v)?;
    let h_trivial = h_v(model, &LocalSquareClass::trivial(v), v)?;
    let expected = delta_valuation.is_multiple_of(2).then_some(1);
    Ok(MultiplicativeReport {
        prime: p,
        delta_valuation,
        h_unramified,
        h_trivial,
        expected,
        consistent: expected.is_none_or(|e| e == h_unramified) && h_trivial == 0,
        odd_valuation_reachable: false,
    })
}
