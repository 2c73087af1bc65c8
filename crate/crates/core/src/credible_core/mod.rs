//! Credible core: Markov allocation policies whose continuations stay stable after
//! every history, and the one-deviation principle that reduces the check to single periods.

mod check;
mod policy;

pub use check::{
    credible_core_check, one_deviation_check, theorem3_equivalence, CredibleOptions,
    CredibleReport, DeviationReport, HistoryStep, Theorem3Report,
};
pub use policy::{allocate_initial, continuation, Continuation, Policy};
