//! Degree-truncated free bigraded algebras, commuting pairs of local
//! systems over them, and linear Hirsch extensions.

use thiserror::Error;

use crate::bicomplex::BicomplexError;

pub mod algebra;
pub mod extension;

pub use algebra::{free_cbba, wedge_power, CbbaMap, Elem, Generator, GeneratorSpec, Monomial, TruncatedCbba};
pub use extension::{
    conjugate_extension, d_squared_defects, extensions_isomorphic, k_invariant, obstruction_extend,
    projective_base, projective_extension, projective_total_space, push_forward, total_algebra, twisted_apply,
    twisted_hom, twisted_homotopy, twisted_pair_fixture, untwisted_homotopy, validate_system, Equation,
    HirschExtension, IsoOutcome, KInvariant, LocalSystemPair, ObstructionResult, RelativeAutomorphism,
    SystemDiagnostic, TwistedHomComplex, Twisting, VBasis,
};

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HirschError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("d^2 != 0 on generator `{generator}`: {identity}")]
    DSquared { generator: String, identity: String },
    #[error("invalid local system: {}", join(.0))]
    InvalidSystem(Vec<SystemDiagnostic>),
    #[error("invalid extension: {}", join(.0))]
    InvalidExtension(Vec<SystemDiagnostic>),
    #[error("invalid cbba map: {0}")]
    InvalidMap(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Bicomplex(#[from] BicomplexError),
}
