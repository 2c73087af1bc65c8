//! The Markov dynamic: states, transitions, trajectories and discounted values.

mod discount;
pub mod families;
mod grid;
mod sequence;
mod spec;
mod value;

pub use discount::{present_value, DiscountSpec, Stream};
pub use grid::Grid;
pub use sequence::{
    n_path, simulate, AllocationSequence, Decision, NPath, Schedule, Trajectory, TrajectoryStep,
};
pub use spec::{DynamicSpec, InitialSubgames, State, Transition};
pub use value::{
    initial_optimal_value, optimal_value, ValueEstimate, ValueMethod, ValueSolver,
    DEFAULT_MAX_STATES,
};
