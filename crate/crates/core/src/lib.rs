//! Discrete-time quantum walks with space-time dependent SU(2) coins, the
//! Dirac-like equations they tend to as the lattice is refined, and numerical
//! checks of the limit's conservation and symmetry properties.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses the closed-form angle fields `theta_bar(t, x)`, ...
//! * [`lattice`] holds spinor fields on a periodic lattice.
//! * [`coin`] builds SU(2) coins and scaled walk families (jets).
//! * [`dqw`] runs the walk.
//! * [`continuum`] integrates the limit equations and evaluates
//!   Klein-Gordon residuals.
//! * [`symmetry`] implements the connection family `D(B)` and its checks.
//! * [`harness`] runs convergence studies.
//! * [`scenario`] and [`cli`] drive everything from a config file.

pub mod cli;
pub mod coin;
pub mod continuum;
pub mod dqw;
pub mod expr;
pub mod harness;
pub mod lattice;
pub mod scenario;
pub mod symmetry;

use thiserror::Error;

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Lattice(#[from] lattice::LatticeError),
    #[error(transparent)]
    Coin(#[from] coin::CoinError),
    #[error(transparent)]
    Continuum(#[from] continuum::ContinuumError),
    #[error(transparent)]
    Symmetry(#[from] symmetry::SymmetryError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/walks.md")]
    mod walks {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/continuum.md")]
    mod continuum {}
    #[doc = include_str!("../../../book/src/symmetry.md")]
    mod symmetry {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
