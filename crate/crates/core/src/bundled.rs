//! Example specs shipped with the crate.

use crate::error::Result;
use crate::spec_io::SpecFile;

/// `(name, JSON)` for every top-level example.
pub const EXAMPLES: &[(&str, &str)] = &[
    ("alternating_u1u2", include_str!("../specs/alternating_u1u2.json")),
    ("cyclic_splits", include_str!("../specs/cyclic_splits.json")),
    ("damped_majority", include_str!("../specs/damped_majority.json")),
    ("efficiency_e1", include_str!("../specs/efficiency_e1.json")),
    ("inflating", include_str!("../specs/inflating.json")),
    ("majority3", include_str!("../specs/majority3.json")),
    ("majority_control", include_str!("../specs/majority_control.json")),
    ("market_small", include_str!("../specs/market_small.json")),
    ("uniform_preserving", include_str!("../specs/uniform_preserving.json")),
];

/// Dynamics with a constant grand worth.
pub const CONSTANT_WORTH: &[(&str, &str)] = &[
    ("cw01_static_majority", include_str!("../specs/constant_worth/cw01_static_majority.json")),
    ("cw02_static_additive", include_str!("../specs/constant_worth/cw02_static_additive.json")),
    ("cw03_static_weak_pairs", include_str!("../specs/constant_worth/cw03_static_weak_pairs.json")),
    ("cw04_static_strong_pairs", include_str!("../specs/constant_worth/cw04_static_strong_pairs.json")),
    ("cw05_damped_majority", include_str!("../specs/constant_worth/cw05_damped_majority.json")),
    ("cw06_aggregate_constant_weak", include_str!("../specs/constant_worth/cw06_aggregate_constant_weak.json")),
    ("cw07_aggregate_constant_strong", include_str!("../specs/constant_worth/cw07_aggregate_constant_strong.json")),
    ("cw08_aggregate_decay", include_str!("../specs/constant_worth/cw08_aggregate_decay.json")),
    ("cw09_aggregate_pair_drift", include_str!("../specs/constant_worth/cw09_aggregate_pair_drift.json")),
    ("cw10_aggregate_strong_player", include_str!("../specs/constant_worth/cw10_aggregate_strong_player.json")),
];

/// Looks up a bundled spec by name in both lists.
pub fn find(name: &str) -> Option<&'static str> {
    EXAMPLES
        .iter()
        .chain(CONSTANT_WORTH)
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn load(name: &str) -> Result<SpecFile> {
    let text = find(name).ok_or_else(|| crate::Error::input(format!("no bundled spec named {name:?}")))?;
    SpecFile::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_spec_parses() {
        for (name, text) in EXAMPLES.iter().chain(CONSTANT_WORTH) {
            let f = SpecFile::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            f.dynamic().unwrap_or_else(|e| panic!("{name}: {e}"));
            f.sequence().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(CONSTANT_WORTH.len(), 10);
    }
}
