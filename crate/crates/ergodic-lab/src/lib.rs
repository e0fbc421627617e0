//! A laboratory for multi-parameter ergodic averages on finite cyclic grids.
//!
//! The library models commuting shift systems on `Z_{N_1} x ... x Z_{N_D}`,
//! computes box averages and the discrete strong maximal operator with a
//! sliding-window engine (plus a brute-force oracle), analyses the integer
//! rank and reduction structure of the shift family, implements the
//! parallelepiped decomposition geometry behind the rank-dependent
//! `L log^{d-1} L` weak-type bound, and runs the empirical verification
//! sweeps exposed by the `ergodic-lab` CLI.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values;
// rewriting them through partial_cmp would lose that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops over parallel rows/columns stay index loops
#![allow(clippy::needless_range_loop)]

pub mod averaging;
pub mod cli;
pub mod geometry;
pub mod lattice;
pub mod space;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes:
/// domain/mismatch errors are validation failures (2), `Guard` is a
/// wrap-around violation (3), `Degenerate` is a numerical degeneracy (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error(
        "wrap-around aliasing: window reach {reach} must stay below the smallest modulus {modulus}"
    )]
    Guard { reach: i128, modulus: u64 },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Mismatch(_) => 2,
            Error::Guard { .. } => 3,
            Error::Degenerate(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
