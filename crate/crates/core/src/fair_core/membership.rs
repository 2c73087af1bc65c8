//! Fair-core and efficiency checks of a given sequence.

use serde::Serialize;

use crate::dynamics::{
    initial_optimal_value, n_path, AllocationSequence, DiscountSpec, DynamicSpec, Grid,
};
use crate::error::Result;
use crate::game_core::Coalition;

/// Per-coalition comparison of discounted shares and worths.
#[derive(Clone, Debug, Serialize)]
pub struct FairEntry {
    pub coalition: String,
    #[serde(skip)]
    pub set: Coalition,
    /// `x_*(S, δ)`.
    pub share: f64,
    /// `(1−δ) Σ δ^{t−1} v_t(S)`.
    pub worth: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FairReport {
    pub member: bool,
    pub eps: f64,
    pub delta: f64,
    /// Discounted average allocation `x_*`.
    pub average: Vec<f64>,
    /// Bound on the effect of truncation, subtracted from every slack before comparing.
    pub tail: f64,
    pub worst: Option<FairEntry>,
    pub entries: Vec<FairEntry>,
}

/// `x_*(S) ≥ (1−δ) Σ_t δ^{t−1} V(N; x_{t−1})(S) − eps` for every `S ⊆ N`.
pub fn fair_core_membership(
    spec: &DynamicSpec,
    seq: &AllocationSequence,
    ds: &DiscountSpec,
    eps: f64,
) -> Result<FairReport> {
    let path = n_path(spec, seq, ds)?;
    let d = ds.delta;
    let (average, _) = path.allocations.discounted_from(1, d);
    let (worths, _) = path.games.discounted_from(1, d);
    let grand = spec.grand();
    let tail = match path.truncated_at {
        None => 0.0,
        Some(l) => d.powi(l as i32) * path.max_abs * (grand.len() as f64 + 1.0),
    };
    let entries: Vec<FairEntry> = (1..worths.len())
        .map(|m| {
            let s = grand.from_local_mask(m);
            let share: f64 = s.members().map(|i| average[i]).sum();
            FairEntry {
                coalition: s.label(),
                set: s,
                share,
                worth: worths[m],
                slack: share - worths[m],
            }
        })
        .collect();
    let worst = entries
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .cloned();
    let member = worst
        .as_ref()
        .map_or(true, |w| w.slack - tail >= -eps - 1e-9);
    Ok(FairReport {
        member,
        eps,
        delta: d,
        average,
        tail,
        worst,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EfficiencyReport {
    pub efficient: bool,
    /// `x_*(N, δ)`.
    pub share: f64,
    /// Grid estimate of `v_*(N, δ)`.
    pub optimum: f64,
    /// Numeric allowance used in the comparison.
    pub tolerance: f64,
}

/// `x_*(N, δ) ≥ v_*(N, δ)` up to the reported numeric error.
pub fn efficiency_check(
    spec: &DynamicSpec,
    seq: &AllocationSequence,
    ds: &DiscountSpec,
    grid: Grid,
) -> Result<EfficiencyReport> {
    let path = n_path(spec, seq, ds)?;
    let (average, _) = path.allocations.discounted_from(1, ds.delta);
    let share: f64 = average.iter().sum();
    let est = initial_optimal_value(spec, spec.grand(), ds, grid)?;
    let truncation = match path.truncated_at {
        None => 0.0,
        Some(l) => ds.delta.powi(l as i32) * path.max_abs * spec.players() as f64,
    };
    let tolerance = 1e-9 + est.truncation_error + truncation;
    Ok(EfficiencyReport {
        efficient: share >= est.value - tolerance,
        share,
        optimum: est.value,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{static_spec, uniform_preserving_spec};
    use crate::game_core::Game;

    #[test]
    fn core_allocation_each_step_is_fair() {
        let spec = static_spec(Game::additive(&[0.2, 0.3, 0.5]));
        let seq = AllocationSequence::constant(vec![0.2, 0.3, 0.5]);
        let ds = DiscountSpec::new(0.9, 1e-8, 1.0).unwrap();
        let r = fair_core_membership(&spec, &seq, &ds, 0.0).unwrap();
        assert!(r.member);
    }

    #[test]
    fn e1_then_zero_is_fair_but_wasteful() {
        let spec = uniform_preserving_spec(3);
        let seq = AllocationSequence::periodic(vec![vec![1.0, 0.0, 0.0]], vec![vec![0.0; 3]]).unwrap();
        let ds = DiscountSpec::new(0.9, 1e-8, 1.0).unwrap();
        assert!(fair_core_membership(&spec, &seq, &ds, 0.0).unwrap().member);
        let e = efficiency_check(&spec, &seq, &ds, Grid::new(3).unwrap()).unwrap();
        assert!(!e.efficient);
        assert!((e.share - 0.1).abs() < 1e-12);
        assert!((e.optimum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_eps() {
        let spec = static_spec(Game::majority(3, 1.0));
        let seq = AllocationSequence::constant(vec![1.0 / 3.0; 3]);
        let ds = DiscountSpec::new(0.9, 1e-8, 1.0).unwrap();
        let mut last = false;
        for eps in [0.0, 0.1, 0.3, 0.34, 0.5] {
            let m = fair_core_membership(&spec, &seq, &ds, eps).unwrap().member;
            assert!(m || !last);
            last = m;
        }
        assert!(last);
    }
}
