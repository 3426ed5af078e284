use thiserror::Error;

use crate::padic::Place;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("zero has no {0}")]
    Zero(&'static str),

    #[error("factorization budget exceeded while factoring {0}")]
    FactorBudget(String),

    #[error("prime factor {0} does not fit in 64 bits")]
    PrimeTooLarge(String),

    #[error("{0} is not squarefree")]
    NotSquarefree(String),

    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("roots are not pairwise distinct")]
    DegenerateCurve,

    #[error("curve has zero discriminant")]
    SingularCurve,

    #[error("not full 2-torsion (dim E(Q)[2] = {0})")]
    NotFullTwoTorsion(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("place {0} lies in the bad set Σ")]
    PlaceInSigma(Place),

    #[error("place {0} does not match the class's place {1}")]
    PlaceMismatch(Place, Place),

    #[error("sampling budget exhausted at {place}: reached dim {reached} of {expected}")]
    SamplingBudget {
        place: Place,
        reached: usize,
        expected: usize,
    },

    #[error("inconsistent Selmer spec: {0}")]
    InconsistentSpec(String),

    #[error("inconsistent character prescription: {0}")]
    InconsistentPrescription(String),

    #[error("{what}: search budget of {budget} primes exceeded (last candidate {last})")]
    SearchBudget {
        what: &'static str,
        budget: u64,
        last: u64,
    },

    #[error("restriction maps do not surject onto {k} copies of F2^2 (only {rank} found)")]
    NoSurjection { k: usize, rank: usize },

    #[error("{0} is not a prime of multiplicative reduction")]
    NotMultiplicative(u64),

    #[error("soundness alarm: {0}")]
    Soundness(String),
}
