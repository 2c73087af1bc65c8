//! Markov allocation policies and the continuation streams they generate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DiscountSpec, DynamicSpec, State};
use crate::error::{Error, Result};
use crate::game_core::{least_core, Allocation, Game};

/// Allocation rule applied to the game that follows a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Fixed payoffs for the grand coalition, equal split for every other coalition.
    Constant { payoffs: Vec<f64> },
    /// Equal split.
    Uniform,
    /// Everything above the floor goes to the member after the current top earner.
    Cyclic,
    /// The least-core witness of the game.
    GreedyCore,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Constant { .. } => "constant",
            Policy::Uniform => "uniform",
            Policy::Cyclic => "cyclic",
            Policy::GreedyCore => "greedy-core",
        }
    }

    /// `σ(state)`: an allocation of `game`, the stage game that follows `state`.
    pub fn allocate(&self, spec: &DynamicSpec, state: &State, game: &Game) -> Result<Allocation> {
        let s = game.grand();
        let k = s.len();
        let floor = spec.floor();
        let w = game.grand_worth();
        let payoffs = match self {
            Policy::Constant { payoffs } if s == spec.grand() => payoffs.clone(),
            Policy::Constant { .. } | Policy::Uniform => vec![w / k as f64; k],
            Policy::Cyclic => {
                let prev = &state.allocation;
                let mut out = vec![floor; k];
                let top = if prev.coalition() == s {
                    prev.payoffs()
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                        .0
                } else {
                    k - 1
                };
                out[(top + 1) % k] = w - floor * (k - 1) as f64;
                out
            }
            Policy::GreedyCore => least_core(game, floor)?.witness.into_payoffs(),
        };
        Allocation::of(game, payoffs, floor).map_err(|e| Error::Policy {
            step: 0,
            reason: format!("{} policy: {e}", self.name()),
        })
    }
}

/// `(x_1, aux_1)` with `x_1 = σ(v_1)`, using the equal split of `v_1(N)` as the prior state.
pub fn allocate_initial(spec: &DynamicSpec, policy: &Policy) -> Result<State> {
    let v1 = spec.initial();
    let n = spec.players();
    let prior = Allocation::new(spec.grand(), vec![v1.grand_worth() / n as f64; n], spec.floor())?;
    let prior = State::new(prior, spec.initial_aux().to_vec());
    let x1 = policy.allocate(spec, &prior, v1)?;
    Ok(State::new(x1, spec.initial_aux().to_vec()))
}

/// `C_σ` from a state: `x_{t+1} = σ(x_t)`, `x_{t+2} = σ(x_{t+1})`, …
#[derive(Clone, Debug)]
pub struct Continuation {
    /// States `(x_{t+k}, aux)` for `k = 1..=len`.
    pub states: Vec<State>,
    /// Stage games played at `t+1, t+2, …`.
    pub games: Vec<Game>,
}

impl Continuation {
    /// `(1−δ) Σ_{k≥1} δ^{k−1} x_{t+k}` per member of the coalition.
    pub fn discounted(&self, delta: f64) -> Vec<f64> {
        let k = self.states.first().map_or(0, |s| s.allocation.payoffs().len());
        let mut acc = vec![0.0; k];
        for st in self.states.iter().rev() {
            for (a, x) in acc.iter_mut().zip(st.allocation.payoffs()) {
                *a = x + delta * *a;
            }
        }
        acc.iter().map(|a| a * (1.0 - delta)).collect()
    }
}

/// Runs the policy for `ds.horizon` periods from `state`, keeping its coalition.
pub fn continuation(
    spec: &DynamicSpec,
    policy: &Policy,
    state: &State,
    ds: &DiscountSpec,
) -> Result<Continuation> {
    let mut states = Vec::with_capacity(ds.horizon);
    let mut games = Vec::with_capacity(ds.horizon);
    let mut cur = state.clone();
    for step in 1..=ds.horizon {
        let (game, aux) = spec.transition(&cur)?;
        let x = policy.allocate(spec, &cur, &game).map_err(|e| match e {
            Error::Policy { reason, .. } => Error::Policy { step, reason },
            other => other,
        })?;
        cur = State::new(x, aux);
        states.push(cur.clone());
        games.push(game);
    }
    Ok(Continuation { states, games })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{cyclic_splits_spec, p_minus, static_spec};
    use crate::game_core::Coalition;

    #[test]
    fn constant_policy_on_static_game() {
        let g = Game::additive(&[0.3, 0.7]);
        let spec = static_spec(g.clone());
        let p = Policy::Constant { payoffs: vec![0.3, 0.7] };
        let st = State::new(Allocation::of(&g, vec![0.3, 0.7], 0.0).unwrap(), vec![]);
        let ds = DiscountSpec::with_horizon(0.9, 5, 1.0).unwrap();
        let c = continuation(&spec, &p, &st, &ds).unwrap();
        assert!(c.states.iter().all(|s| s.allocation.payoffs() == [0.3, 0.7]));
    }

    #[test]
    fn cyclic_policy_walks_p_minus_games() {
        let spec = cyclic_splits_spec();
        let st = State::new(
            Allocation::new(Coalition::grand(3), vec![1.0, 0.0, 0.0], 0.0).unwrap(),
            vec![],
        );
        let ds = DiscountSpec::with_horizon(0.9, 4, 1.0).unwrap();
        let c = continuation(&spec, &Policy::Cyclic, &st, &ds).unwrap();
        for (k, g) in c.games.iter().enumerate() {
            assert!(g.distance(&p_minus(k % 3)) < 1e-12, "step {k}");
        }
        assert_eq!(c.states[0].allocation.payoffs(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_constant_policy_names_step() {
        let g = Game::additive(&[0.5, 0.5]);
        let spec = static_spec(g.clone());
        let p = Policy::Constant { payoffs: vec![0.9, 0.9] };
        let st = State::new(Allocation::of(&g, vec![0.5, 0.5], 0.0).unwrap(), vec![]);
        let ds = DiscountSpec::with_horizon(0.9, 3, 1.0).unwrap();
        assert!(matches!(
            continuation(&spec, &p, &st, &ds),
            Err(Error::Policy { step: 1, .. })
        ));
    }
}
