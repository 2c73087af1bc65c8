//! Static TU games: coalitions, characteristic functions, allocations, the
//! ε-core and the least core.

mod coalition;
mod game;
mod least_core;
pub mod simplex;

pub use coalition::{Coalition, Members, MAX_PLAYERS};
pub use game::{convex_combine, core_membership, core_violation, Allocation, Game, TOL_FEAS};
pub use least_core::{least_core, LeastCoreReport, MAX_LP_PLAYERS};
