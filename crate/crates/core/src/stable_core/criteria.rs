//! Window finding, stationary searches and the two non-emptiness tests built on them.

use rayon::prelude::*;
use serde::Serialize;

use super::aggregate::{induced_game, AggregateDynamic};
use super::membership::{stable_core_membership, StableOptions};
use crate::dynamics::{
    initial_optimal_value, AllocationSequence, DiscountSpec, DynamicSpec, Grid, State,
};
use crate::error::{Error, Result};
use crate::game_core::{core_violation, least_core, Allocation, Coalition, Game};

/// First `h` (1-based) with `a_h > a_acc − γ` and `a_*^{h,δ} < a_acc + γ`.
///
/// Only the given prefix of the sequence is known, so the tail average is bounded
/// above by the truncated sum plus `δ^{L−h+1}·max|a|`.
pub fn window_find(a: &[f64], delta: f64, a_acc: f64, gamma: f64) -> Result<usize> {
    if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("sequence must be nonempty and finite"));
    }
    if !(delta > 0.0 && delta < 1.0) || !(gamma > 0.0) {
        return Err(Error::input("need 0 < delta < 1 and gamma > 0"));
    }
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l = a.len();
    let mut tail = vec![0.0; l + 1];
    for h in (0..l).rev() {
        tail[h] = a[h] + delta * tail[h + 1];
    }
    for h in 0..l {
        let upper = (1.0 - delta) * tail[h] + delta.powi((l - h) as i32) * m;
        if a[h] > a_acc - gamma && upper < a_acc + gamma {
            return Ok(h + 1);
        }
    }
    Err(Error::SearchExhausted(format!(
        "no window within {l} periods for accumulation point {a_acc} and gamma {gamma}"
    )))
}

/// Best stationary grid sequence found by [`stationary_search`].
#[derive(Clone, Debug, Serialize)]
pub struct StationarySearch {
    pub found: bool,
    pub eps: f64,
    pub best: Vec<f64>,
    /// Largest violation of the best sequence.
    pub violation: f64,
    pub candidates: usize,
}

/// Checks every constant sequence `x, x, …` with `x` on the grid of allocations of `v_1`.
pub fn stationary_search(
    spec: &DynamicSpec,
    ds: &DiscountSpec,
    eps: f64,
    grid: Grid,
    opts: StableOptions,
) -> Result<StationarySearch> {
    let points = grid.allocations(spec.initial(), spec.floor())?;
    let results: Vec<Result<(f64, Vec<f64>)>> = points
        .into_par_iter()
        .map(|x| {
            let seq = AllocationSequence::constant(x.clone());
            let r = stable_core_membership(spec, &seq, ds, eps, opts)?;
            Ok((r.max_violation(), x))
        })
        .collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut candidates = 0;
    for r in results {
        let (v, x) = match r {
            Ok(ok) => ok,
            // stationary sequences that are infeasible later on are skipped
            Err(Error::Simulation { .. }) => continue,
            Err(e) => return Err(e),
        };
        candidates += 1;
        if v < best.0 {
            best = (v, x);
        }
    }
    Ok(StationarySearch {
        found: best.0 <= eps + 1e-9,
        eps,
        best: best.1,
        violation: best.0,
        candidates,
    })
}

/// Verdicts of the aggregate equivalence experiment.
#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Report {
    pub eps: f64,
    pub delta: f64,
    /// `v_1(N)` before normalization.
    pub scale: f64,
    /// `min_x ε*(u_x)` over grid `x` (normalized units).
    pub a_value: f64,
    pub a_witness: Vec<f64>,
    /// `min_x max_T (u_x(T) − x(T))`: how far the best grid `x` is from the core of its own `u_x`.
    pub a_self_value: f64,
    /// The `ε`-core of some `u_x` is nonempty.
    pub a: bool,
    /// Smallest stable violation of a stationary grid sequence.
    pub b_value: f64,
    pub b_witness: Vec<f64>,
    /// Some stationary grid sequence is `ε`-stable.
    pub b: bool,
    /// `a ⇒ b` within `5ε` and `b ⇒ a` within `5ε`.
    pub agree: bool,
}

/// Compares the `ε`-core of `u_x` over grid `x` (A) against `ε`-stable stationary
/// grid sequences (B). Deviation times `h ≥ 1` are checked for B.
pub fn theorem2_experiment(
    ad: &AggregateDynamic,
    ds: &DiscountSpec,
    eps: f64,
    grid: Grid,
) -> Result<Theorem2Report> {
    let (nad, scale) = ad.normalized();
    let n = nad.players();
    let grand = Coalition::grand(n);
    for t in grand.subsets().filter(|t| !t.is_empty()) {
        nad.check_monotone(t)?;
    }
    let top = nad.step(grand, 1.0)?;
    if (top - 1.0).abs() > 1e-9 {
        return Err(Error::Hypothesis(format!(
            "V(N; x)(N) must equal v_1(N) when x(N) = v_1(N); got {top} after normalization"
        )));
    }
    let points = grid.points(n, 1.0, 0.0)?;
    let a_results: Vec<Result<(f64, f64, Vec<f64>)>> = points
        .par_iter()
        .map(|x| {
            let xa = Allocation::new(grand, x.clone(), 0.0)?;
            let u = induced_game(&nad, &xa)?.game;
            let lc = least_core(&u, 0.0)?;
            Ok((lc.epsilon_star, core_violation(&u, &xa)?, x.clone()))
        })
        .collect();
    let mut a_value = f64::INFINITY;
    let mut a_self_value = f64::INFINITY;
    let mut a_witness = Vec::new();
    for r in a_results {
        let (e, own, x) = r?;
        if e < a_value {
            a_value = e;
            a_witness = x;
        }
        a_self_value = a_self_value.min(own);
    }
    let spec = nad.spec(0.0)?;
    let opts = StableOptions {
        grid,
        include_start: false,
        ..StableOptions::default()
    };
    let b = stationary_search(&spec, ds, eps, grid, opts)?;
    let a_ok = a_value <= eps;
    let b_ok = b.violation <= eps;
    let agree = (!a_ok || b.violation <= 5.0 * eps) && (!b_ok || a_value <= 5.0 * eps);
    Ok(Theorem2Report {
        eps,
        delta: ds.delta,
        scale,
        a_value,
        a_witness,
        a_self_value,
        a: a_ok,
        b_value: b.violation,
        b_witness: b.best,
        b: b_ok,
        agree,
    })
}

/// The game `v_*(·, δ)` and the non-emptiness prediction drawn from its least core.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantWorthReport {
    pub delta: f64,
    pub v_star: Game,
    pub epsilon_star: f64,
    pub witness: Vec<f64>,
    /// The core of `v_*` is nonempty.
    pub core_nonempty: bool,
}

impl ConstantWorthReport {
    /// Predicted non-emptiness of the `eps`-stable core.
    pub fn predicts(&self, eps: f64) -> bool {
        self.epsilon_star <= eps + 1e-9
    }
}

/// For dynamics whose grand worth never changes: least core of `v_*(·, δ)`.
pub fn constant_worth_criterion(
    spec: &DynamicSpec,
    ds: &DiscountSpec,
    grid: Grid,
) -> Result<ConstantWorthReport> {
    let v1 = spec.initial();
    let target = v1.grand_worth();
    let tol = 1e-9 * (1.0 + target.abs());
    for x in grid.allocations(v1, spec.floor())? {
        let state = State::new(
            Allocation::new(spec.grand(), x, spec.floor())?,
            spec.initial_aux().to_vec(),
        );
        let (g, _) = spec.transition(&state)?;
        if (g.grand_worth() - target).abs() > tol {
            return Err(Error::Hypothesis(format!(
                "grand worth changes from {target} to {} after {:?}",
                g.grand_worth(),
                state.allocation.payoffs()
            )));
        }
    }
    let coalitions: Vec<Coalition> = spec.grand().subsets().collect();
    let values: Vec<Result<f64>> = coalitions
        .par_iter()
        .map(|&s| {
            if s.is_empty() {
                Ok(0.0)
            } else if s == spec.grand() {
                Ok(target)
            } else {
                Ok(initial_optimal_value(spec, s, ds, grid)?.value)
            }
        })
        .collect();
    let worth = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let v_star = Game::from_table(spec.grand(), worth)?;
    let lc = least_core(&v_star, spec.floor())?;
    Ok(ConstantWorthReport {
        delta: ds.delta,
        epsilon_star: lc.epsilon_star,
        core_nonempty: lc.epsilon_star <= 1e-9,
        witness: lc.witness.payoffs().to_vec(),
        v_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{damped_majority_spec, static_spec};
    use crate::stable_core::AggregateMap;

    #[test]
    fn window_on_constant_sequence_is_immediate() {
        assert_eq!(window_find(&[0.7; 500], 0.99, 0.7, 0.01).unwrap(), 1);
    }

    #[test]
    fn window_on_alternating_sequence() {
        let a: Vec<f64> = (1..=3000).map(|t| if t % 2 == 1 { 0.0 } else { 1.0 }).collect();
        let h = window_find(&a, 0.99, 0.5, 0.1).unwrap();
        assert_eq!(a[h - 1], 1.0);
    }

    #[test]
    fn window_on_harmonic_sequence() {
        let a: Vec<f64> = (1..=3000).map(|t| 1.0 / t as f64).collect();
        // direct summation puts the first qualifying time at 45
        assert_eq!(window_find(&a, 0.99, 0.0, 0.01).unwrap(), 45);
        assert!(window_find(&a[..50], 0.99, 0.0, 0.01).is_err());
    }

    #[test]
    fn static_identity_dynamic_agrees() {
        let ad = AggregateDynamic::from_fn(3, 1.0, |_| AggregateMap::Identity).unwrap();
        let ds = DiscountSpec::new(0.95, 1e-6, 1.0).unwrap();
        let r = theorem2_experiment(&ad, &ds, 0.05, Grid::new(10).unwrap()).unwrap();
        assert!(r.a && r.b && r.agree, "{r:?}");
    }

    #[test]
    fn non_normalized_grand_map_rejected() {
        let ad = AggregateDynamic::from_fn(2, 1.0, |_| AggregateMap::Affine {
            slope: 0.5,
            intercept: 0.0,
            cap: None,
        })
        .unwrap();
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        assert!(matches!(
            theorem2_experiment(&ad, &ds, 0.05, Grid::default()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn constant_worth_static_game_gives_stage_game() {
        let g = Game::majority(3, 1.0);
        let spec = static_spec(g.clone());
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let r = constant_worth_criterion(&spec, &ds, Grid::default()).unwrap();
        assert!(r.v_star.distance(&g) < 1e-9);
        assert!((r.epsilon_star - 1.0 / 3.0).abs() < 1e-6);
        assert!(!r.core_nonempty);
    }

    #[test]
    fn constant_worth_damped_majority() {
        let spec = damped_majority_spec(1);
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let r = constant_worth_criterion(&spec, &ds, Grid::default()).unwrap();
        assert_eq!(r.v_star.worth(Coalition::singleton(1)), 0.0);
        assert!((r.v_star.grand_worth() - 1.0).abs() < 1e-12);
        assert!(r.core_nonempty);
    }
}
