//! Seeded randomized checks of the structural identities: the parity
//! formula, strict/relaxed duality, isotropy of local images, the norm index
//! at ramified primes, and the one-place mask bound.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::{sigma_set, FullTwoTorsionModel};
use crate::error::{Error, Result};
use crate::f2;
use crate::local_descent::{h_v_with, kummer_image_cached, Convention};
use crate::padic::{cocycle_space_dim, LocalSquareClass, Place};
use crate::selmer::{duality_check, selmer_group, twist_masks, SelmerSpec};
use crate::zarith::{is_prime_u64, is_squarefree};

/// Curves exercised when none are given.
pub const CORPUS: [[i64; 3]; 3] = [[-1, 0, 1], [0, 1, 2], [0, 5, 1]];

pub fn corpus() -> Vec<FullTwoTorsionModel> {
    CORPUS
        .iter()
        .map(|e| FullTwoTorsionModel::from_i64(*e).expect("corpus curve"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Parity,
    Duality,
    Isotropy,
    Ramhv,
    Babo,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Parity, Suite::Duality, Suite::Isotropy, Suite::Ramhv, Suite::Babo];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Parity => "parity",
            Suite::Duality => "duality",
            Suite::Isotropy => "isotropy",
            Suite::Ramhv => "ramhv",
            Suite::Babo => "babo",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub passed: usize,
    /// The first failing instance, if any.
    pub certificate: Option<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }
}

/// Parameters shared by all suites.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub curves: Vec<FullTwoTorsionModel>,
    pub trials: usize,
    pub seed: u64,
    /// Largest `|d|` drawn by the parity suite.
    pub max_twist: u64,
    /// Primes drawn as auxiliary places lie below this bound.
    pub prime_bound: u64,
    pub convention: Convention,
}

impl SuiteConfig {
    pub fn new(curves: Vec<FullTwoTorsionModel>, trials: usize, seed: u64) -> Self {
        Self {
            curves,
            trials,
            seed,
            max_twist: 10_000,
            prime_bound: 10_000,
            convention: Convention::Shared,
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }
}

pub fn run(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut passed = 0;
    let mut certificate = None;
    for _ in 0..cfg.trials {
        let model = cfg.curves.choose(&mut rng).ok_or(Error::Parse("no curves".into()))?;
        let outcome = match suite {
            Suite::Parity => parity_trial(model, cfg, &mut rng)?,
            Suite::Duality => duality_trial(model, cfg, &mut rng)?,
            Suite::Isotropy => isotropy_trial(model, cfg, &mut rng)?,
            Suite::Ramhv => ramhv_trial(model, cfg, &mut rng)?,
            Suite::Babo => babo_trial(model, cfg, &mut rng)?,
        };
        match outcome {
            None => passed += 1,
            Some(c) if certificate.is_none() => certificate = Some(format!("curve {model}: {c}")),
            Some(_) => {}
        }
    }
    Ok(SuiteReport {
        suite,
        trials: cfg.trials,
        passed,
        certificate,
    })
}

type Trial = Result<Option<String>>;

fn random_squarefree(rng: &mut ChaCha8Rng, bound: u64) -> BigInt {
    loop {
        let n = BigInt::from(rng.gen_range(1..=bound));
        if is_squarefree(&n).unwrap_or(false) {
            return if rng.gen_bool(0.5) { -n } else { n };
        }
    }
}

fn random_prime(rng: &mut ChaCha8Rng, bound: u64, avoid: &[Place]) -> u64 {
    loop {
        let q = rng.gen_range(3..bound);
        if is_prime_u64(q) && !avoid.contains(&Place::Finite(q)) {
            return q;
        }
    }
}

fn random_class(rng: &mut ChaCha8Rng, v: Place) -> LocalSquareClass {
    let all = LocalSquareClass::all(v);
    all[rng.gen_range(0..all.len())]
}

/// Parity of `r₂(E^d) − r₂(E)` against `Σ h_v(d)`.
pub fn parity_instance(model: &FullTwoTorsionModel, d: &BigInt, convention: Convention) -> Trial {
    let base = selmer_group(&SelmerSpec::new(model.clone()).with_convention(convention))?.dim();
    let masks = twist_masks(model, d)?;
    let rank = selmer_group(
        &SelmerSpec::new(model.clone())
            .with_convention(convention)
            .with_masks(masks.iter().copied()),
    )?
    .dim();
    let mut h = 0;
    for c in &masks {
        h += h_v_with(model, c, c.place(), convention)?;
    }
    Ok(((base + rank + h) % 2 == 1).then(|| format!("d = {d}: r₂ {base} → {rank}, Σh = {h}")))
}

fn parity_trial(model: &FullTwoTorsionModel, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Trial {
    let d = random_squarefree(rng, cfg.max_twist);
    parity_instance(model, &d, cfg.convention)
}

fn duality_trial(model: &FullTwoTorsionModel, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Trial {
    let sigma = sigma_set(model);
    let size = rng.gen_range(0..=2);
    let mut t = BTreeSet::new();
    while t.len() < size {
        let v = if rng.gen_bool(0.5) {
            *sigma.places().choose(rng).expect("Σ is nonempty")
        } else {
            Place::Finite(random_prime(rng, 200, &[]))
        };
        t.insert(v);
    }
    // an optional mask at a place of Σ outside T
    let mut spec = SelmerSpec::new(model.clone()).with_convention(cfg.convention);
    let free: Vec<Place> = sigma.places().iter().copied().filter(|v| !t.contains(v)).collect();
    if rng.gen_bool(0.5) {
        if let Some(&v) = free.choose(rng) {
            spec = spec.with_mask(random_class(rng, v));
        }
    }
    let rep = duality_check(&spec, &t)?;
    Ok((!rep.passed()).then(|| {
        format!(
            "T = {:?}, masks = {:?}: strict {}, relaxed {}, Σ dim α = {}, {}",
            t.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            spec.masks().values().map(|c| (c.place().to_string(), c.representative().to_string())).collect::<Vec<_>>(),
            rep.dim_strict,
            rep.dim_relaxed,
            rep.local_sum,
            rep.certificate.unwrap_or_default()
        )
    }))
}

/// `α_v(c)` is isotropic of half the ambient dimension.
pub fn isotropy_instance(model: &FullTwoTorsionModel, c: &LocalSquareClass, convention: Convention) -> Trial {
    let v = c.place();
    let img = kummer_image_cached(model, c, v, convention)?;
    let half = 2 * img.dim() == cocycle_space_dim(v);
    let iso = img.is_isotropic();
    Ok((!(half && iso)).then(|| {
        format!(
            "α_{v}({}) has dim {} of {} and is {}isotropic",
            c.representative(),
            img.dim(),
            cocycle_space_dim(v),
            if iso { "" } else { "not " }
        )
    }))
}

fn isotropy_trial(model: &FullTwoTorsionModel, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Trial {
    let sigma = sigma_set(model);
    let v = if rng.gen_bool(0.5) {
        *sigma.places().choose(rng).expect("Σ is nonempty")
    } else {
        Place::Finite(random_prime(rng, cfg.prime_bound, &[]))
    };
    isotropy_instance(model, &random_class(rng, v), cfg.convention)
}

/// At a good odd `q` and ramified `c`: `α_q(1) ∩ α_q(c) = 0` and `h_q = 2`.
pub fn ramhv_instance(model: &FullTwoTorsionModel, c: &LocalSquareClass, convention: Convention) -> Trial {
    let v = c.place();
    let base = kummer_image_cached(model, &LocalSquareClass::trivial(v), v, convention)?;
    let tw = kummer_image_cached(model, c, v, convention)?;
    let meet = f2::intersection_dim(base.vectors(), tw.vectors(), cocycle_space_dim(v));
    let h = h_v_with(model, c, v, convention)?;
    Ok((meet != 0 || h != 2).then(|| format!("q = {v}, class {}: intersection dim {meet}, h = {h}", c.representative())))
}

fn ramhv_trial(model: &FullTwoTorsionModel, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Trial {
    let q = random_prime(rng, cfg.prime_bound, sigma_set(model).places());
    let v = Place::Finite(q);
    let c = LocalSquareClass::from_bits(v, if rng.gen_bool(0.5) { 0b01 } else { 0b11 });
    ramhv_instance(model, &c, cfg.convention)
}

fn babo_trial(model: &FullTwoTorsionModel, cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Trial {
    let sigma = sigma_set(model);
    let q = if rng.gen_bool(0.5) {
        *sigma.places().choose(rng).expect("Σ is nonempty")
    } else {
        Place::Finite(random_prime(rng, 200, &[]))
    };
    let mut spec = SelmerSpec::new(model.clone()).with_convention(cfg.convention);
    for &v in sigma.places() {
        if v != q && rng.gen_bool(0.5) {
            spec = spec.with_mask(random_class(rng, v));
        }
    }
    let (a, b) = (random_class(rng, q), random_class(rng, q));
    let x = selmer_group(&spec.clone().with_mask(a))?.dim();
    let y = selmer_group(&spec.with_mask(b))?.dim();
    let alpha = kummer_image_cached(model, &LocalSquareClass::trivial(q), q, cfg.convention)?.dim();
    Ok((x.abs_diff(y) > alpha).then(|| {
        format!(
            "at {q}: classes {} and {} give ranks {x} and {y}, dim α = {alpha}",
            a.representative(),
            b.representative()
        )
    }))
}
