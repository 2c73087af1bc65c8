//! Checking a sequence of `N`-allocations against every coalition's deviations.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    n_path, AllocationSequence, DiscountSpec, DynamicSpec, Grid, State, ValueSolver,
    DEFAULT_MAX_STATES,
};
use crate::error::Result;
use crate::game_core::Coalition;

/// Knobs for [`stable_core_membership`].
#[derive(Clone, Copy, Debug)]
pub struct StableOptions {
    /// Grid for the deviating coalition's own allocations.
    pub grid: Grid,
    /// Also check coalitions that never join, i.e. `x_*(S) ≥ v_*(S) − eps`.
    pub include_start: bool,
    /// Cap on the number of deviation times checked.
    pub h_check: Option<usize>,
    pub max_states: usize,
}

impl Default for StableOptions {
    fn default() -> Self {
        Self {
            grid: Grid::default(),
            include_start: true,
            h_check: None,
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

/// One coalition at one deviation time. `h = 0` means deviating before play.
#[derive(Clone, Debug, Serialize)]
pub struct StableEntry {
    pub coalition: String,
    #[serde(skip)]
    pub set: Coalition,
    pub h: usize,
    /// `x^h_*(S)`.
    pub share: f64,
    /// `v^h_*(S)`.
    pub deviation_value: f64,
    /// `share − deviation_value`.
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StableReport {
    pub member: bool,
    pub eps: f64,
    pub delta: f64,
    /// Deviation times `1..=checked_h` were examined.
    pub checked_h: usize,
    /// Shares computed from a truncated path.
    pub truncated: bool,
    pub worst: Option<StableEntry>,
    pub entries: Vec<StableEntry>,
}

impl StableReport {
    /// Largest `v^h_* − x^h_*` over the checked entries.
    pub fn max_violation(&self) -> f64 {
        self.worst.as_ref().map_or(f64::NEG_INFINITY, |e| -e.slack)
    }
}

/// Whether `seq` is in the `eps`-stable core: for all `S` and checked `h`,
/// `x^h_*(S) ≥ (1−δ) x_h(S) + δ W_S(x_h|_S) − eps`, with `W_S` the optimal value of
/// `S` playing alone from `V(S; x_h|_S)`.
pub fn stable_core_membership(
    spec: &DynamicSpec,
    seq: &AllocationSequence,
    ds: &DiscountSpec,
    eps: f64,
    opts: StableOptions,
) -> Result<StableReport> {
    let path = n_path(spec, seq, ds)?;
    let d = ds.delta;
    let n = spec.players();
    let len = path.distinct_len();
    let mut hmax = match path.truncated_at {
        None => len,
        Some(l) => {
            // keep only times whose unseen tail is below eps/2
            let mut h = l;
            while h > 0 && d.powi((l - h + 1) as i32) * path.max_abs * n as f64 > eps / 2.0 {
                h -= 1;
            }
            h
        }
    };
    if let Some(c) = opts.h_check {
        hmax = hmax.min(c);
    }
    let shares: Vec<Vec<f64>> = (1..=hmax.max(1))
        .map(|h| path.allocations.discounted_from(h, d).0)
        .collect();
    let coalitions: Vec<Coalition> = spec.grand().subsets().filter(|s| !s.is_empty()).collect();
    let per: Vec<Result<Vec<StableEntry>>> = coalitions
        .par_iter()
        .map(|&s| {
            let mut solver =
                ValueSolver::new(spec, s, *ds, opts.grid)?.with_max_states(opts.max_states);
            let total = |v: &[f64]| s.members().map(|i| v[i]).sum::<f64>();
            let mut out = Vec::new();
            if opts.include_start {
                let (g, aux) = spec.initial_game(s)?;
                let v = solver.value_of_game(&g, &aux)?.value;
                out.push(entry(s, 0, total(&shares[0]), v));
            }
            for h in 1..=hmax {
                let st = &path.states[h - 1];
                let now = st.allocation.total(s);
                let entry_state = State::new(st.allocation.restrict(s)?, st.aux.clone());
                let w = solver.value_after(&entry_state)?.value;
                out.push(entry(s, h, total(&shares[h - 1]), (1.0 - d) * now + d * w));
            }
            Ok(out)
        })
        .collect();
    let mut entries = Vec::new();
    for r in per {
        entries.extend(r?);
    }
    let worst = entries
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .cloned();
    let member = worst.as_ref().map_or(true, |w| w.slack >= -eps - 1e-9);
    Ok(StableReport {
        member,
        eps,
        delta: d,
        checked_h: hmax,
        truncated: path.truncated_at.is_some(),
        worst,
        entries,
    })
}

fn entry(s: Coalition, h: usize, share: f64, value: f64) -> StableEntry {
    StableEntry {
        coalition: s.label(),
        set: s,
        h,
        share,
        deviation_value: value,
        slack: share - value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{damped_majority_spec, static_spec};
    use crate::game_core::{least_core, Game};

    #[test]
    fn damped_majority_uniform_split_is_stable() {
        let spec = damped_majority_spec(1);
        let seq = AllocationSequence::constant(vec![1.0 / 3.0; 3]);
        for delta in [0.5, 0.9, 0.99] {
            let ds = DiscountSpec::new(delta, 1e-6, 1.0).unwrap();
            let r = stable_core_membership(&spec, &seq, &ds, 0.01, StableOptions::default()).unwrap();
            assert!(r.member, "delta {delta}: {:?}", r.worst);
        }
    }

    #[test]
    fn static_game_with_empty_core_fails_below_gap() {
        let g = Game::majority(3, 1.0);
        let gap = least_core(&g, 0.0).unwrap().epsilon_star;
        let spec = static_spec(g);
        let seq = AllocationSequence::constant(vec![1.0 / 3.0; 3]);
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let r = stable_core_membership(&spec, &seq, &ds, gap - 0.01, StableOptions::default()).unwrap();
        assert!(!r.member);
        // the uniform split violates pairs by exactly the least-core gap
        assert!((r.max_violation() - gap).abs() < 1e-6);
        let r = stable_core_membership(&spec, &seq, &ds, gap + 0.01, StableOptions::default()).unwrap();
        assert!(r.member);
    }

    #[test]
    fn additive_static_game_is_tight() {
        let spec = static_spec(Game::additive(&[0.5, 0.5]));
        let seq = AllocationSequence::constant(vec![0.5, 0.5]);
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let r = stable_core_membership(&spec, &seq, &ds, 0.0, StableOptions::default()).unwrap();
        assert!(r.member);
        assert!(r.entries.iter().all(|e| e.slack.abs() < 1e-9));
    }
}
