//! Stable core: deviation values, the aggregate fixed-point machinery and the
//! characterization experiments built on it.

mod aggregate;

pub use aggregate::{
    fixed_point, induced_game, iterate_u, limit, AggregateDynamic, AggregateMap, FixedPointReport,
    InducedGame, MAX_ITERATIONS, TOL_FP,
};

mod membership;

pub use membership::{stable_core_membership, StableEntry, StableOptions, StableReport};

mod criteria;

pub use criteria::{
    constant_worth_criterion, stationary_search, theorem2_experiment, window_find,
    ConstantWorthReport, StationarySearch, Theorem2Report,
};
