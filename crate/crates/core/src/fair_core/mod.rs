//! Fair core: discounted shares against discounted worths along the `N`-path,
//! and the convexification certificates that characterize its non-emptiness.

mod convex;
mod membership;
mod search;

pub use convex::{
    convexification_contains, efficient_fair_certificate_search, period_partition,
    synthesize_fair_sequence, theorem1_certificate_search, ConvexCertificate, Split,
};
pub use membership::{efficiency_check, fair_core_membership, EfficiencyReport, FairEntry, FairReport};
pub use search::{periodic_fair_search, PeriodicSearch};
