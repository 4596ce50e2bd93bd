//! Exact arithmetic for the monoid of injective endomorphisms of `ℤ_pⁿ` and
//! the operator calculus it indexes.
//!
//! The crate is organized around six layers:
//!
//! * [`padic`] — matrices over `ℤ_p` at fixed precision: Smith and Hermite
//!   normal forms, volume, adjoint, and certified gcd/lcm/Bezout data.
//! * [`lattice`] — the subgroup lattice of `(ℤ/pˡ)ⁿ`: enumeration,
//!   rank/cotype invariants, `GL_n`-orbits, double cosets, and the
//!   level-restriction map θ.
//! * [`burnside`] — Burnside rings of finite abelian p-groups with
//!   restriction, induction, and fixed-point functors, a brute-force
//!   permutation-set oracle, and truncated Frobenius-coequalizer
//!   computations.
//! * [`splitting`] — the stable-splitting matrix calculus over `ℤ[η]/(2η)`:
//!   subset-indexed matrices, transfer matrices, and the differential index
//!   algebra.
//! * [`rewrite`] — typed words in scalars, `R_α`, `F^α`, `V_α`, `d_v`;
//!   normalization to a canonical linear combination and semantic evaluation
//!   on Burnside rings.
//! * [`segal`] — rank/cotype moduli of toral subgroups, orbit towers, and
//!   the homotopy-group assembly bookkeeping built on top of them.
//!
//! The [`verify`] module packages the randomized and exhaustive consistency
//! suites that the CLI exposes as `witt-torus verify <suite>`.

pub mod burnside;
pub mod lattice;
pub mod padic;
pub mod rewrite;
pub mod segal;
pub mod splitting;
pub mod verify;

#[cfg(doctest)]
mod book_doctests;

use thiserror::Error;

/// Errors shared by every layer of the crate.
///
/// Mathematical failures (precision, budgets, undecided searches) are kept
/// separate from usage failures (parsing, dimension mismatches) so the CLI
/// can map them to distinct exit codes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("invalid precision {0}: need 1 <= N and p^N < 2^63")]
    InvalidPrecision(u32),
    #[error("precision exhausted: every pivot candidate is 0 mod p^{0}")]
    PrecisionExhausted(u32),
    #[error("matrix is not injective")]
    NotInjective,
    #[error("operation requires a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("level {got} too small, need at least {needed}")]
    LevelTooSmall { needed: u32, got: u32 },
    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("matrix is not diagonal with p-power entries")]
    NotDiagonal,
    #[error("type mismatch at generator {position}: {reason}")]
    TypeMismatch { position: usize, reason: String },
    #[error("membership search undecided within word-length bound {0}")]
    BoundExceeded(u32),
    #[error("homotopy table has no entry for k={k}, degree={degree}")]
    MissingTableEntry { k: u32, degree: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
