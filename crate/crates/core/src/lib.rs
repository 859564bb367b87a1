//! Concurrent game structures where agents set propositional variables,
//! with exclusive or shared control, an ATL* model checker under memoryless
//! strategies, and a reduction from shared to exclusive control.

pub mod checker;
pub mod cli;
pub mod error;
pub mod formulas;
pub mod games;
pub mod random;
pub mod reduction;
pub mod structures;

pub use error::{Error, Result};

/// Resource guards shared by the checker, the reduction and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest atom universe accepted for explicit construction.
    pub max_atoms: usize,
    /// Largest number of memoryless strategies a single coalition
    /// subformula may enumerate.
    pub max_strategies: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_atoms: structures::DEFAULT_ATOM_CAP,
            max_strategies: 10_000_000,
        }
    }
}
