//! Built-in transitions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::spec::{DynamicSpec, State, Transition};
use crate::error::{Error, Result};
use crate::game_core::{Coalition, Game};

/// Three-player "triangle" game on players 0,1,2 with player 3 a dummy:
/// pairs worth 3, the triple worth 4.
pub fn triangle_u1() -> Game {
    Game::from_fn(Coalition::grand(4), |t| {
        match (t & Coalition::from_members([0, 1, 2])).len() {
            2 => 3.0,
            3 => 4.0,
            _ => 0.0,
        }
    })
}

/// [`triangle_u1`] with players 0 and 3 exchanged.
pub fn triangle_u2() -> Game {
    triangle_u1().permuted(&[3, 1, 2, 0])
}

/// Additive game on three players with `1/2` for everyone except `i`.
pub fn p_minus(i: usize) -> Game {
    let mut w = [0.5; 3];
    w[i] = 0.0;
    Game::additive(&w)
}

/// Game worth `worth` on `grand` itself and zero elsewhere.
pub fn unanimity(grand: Coalition, worth: f64) -> Game {
    Game::from_fn(grand, |t| if t == grand { worth } else { 0.0 })
}

/// Payoff vector over `n` global players, zero where the state's coalition has no member.
fn padded(state: &State, n: usize) -> Vec<f64> {
    (0..n).map(|i| state.allocation.get(i).unwrap_or(0.0)).collect()
}

/// Repeated static game: `V(S; x) = game|_S`.
#[derive(Debug, Clone)]
pub struct StaticGame {
    pub game: Game,
}

impl Transition for StaticGame {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        Ok((self.game.restrict(state.coalition())?, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "static"
    }
}

/// Four-player dynamic alternating between the triangle games.
///
/// `V(N; x) = λ u2 + (1−λ) u1` with `λ = clamp((x_0 − x_3 + 1)/2, 0, 1)`, so
/// `(1, 3/2, 3/2, 0) ↦ u2` and `(0, 3/2, 3/2, 1) ↦ u1`. Sub-coalitions play the
/// restriction of the same blend.
#[derive(Debug, Clone, Default)]
pub struct AlternatingTriangles;

impl Transition for AlternatingTriangles {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let x = padded(state, 4);
        let lambda = ((x[0] - x[3] + 1.0) / 2.0).clamp(0.0, 1.0);
        let blend = Game::from_fn(Coalition::grand(4), |t| {
            lambda * triangle_u2().worth(t) + (1.0 - lambda) * triangle_u1().worth(t)
        });
        Ok((blend.restrict(state.coalition())?, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "alternating_triangles"
    }
}

/// Worth is preserved only by equal splits: `V(S; x) = x(S) · u_S` when `x` is
/// uniform (within `1e-9`), else the zero game.
#[derive(Debug, Clone, Default)]
pub struct UniformPreserving;

impl Transition for UniformPreserving {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let s = state.coalition();
        let p = state.allocation.payoffs();
        let uniform = p.iter().all(|v| (v - p[0]).abs() <= 1e-9);
        let g = if uniform {
            unanimity(s, state.allocation.sum())
        } else {
            Game::zero(s)
        };
        Ok((g, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "uniform_preserving"
    }
}

/// Majority game scaled by the last total on `N = {0, .., 2k}`; after a split,
/// `V(S; x)(T) = 2^{−|T|} · x(S) · [|T| ≥ k+1]`.
#[derive(Debug, Clone)]
pub struct DampedMajority {
    pub k: usize,
}

impl DampedMajority {
    pub fn players(&self) -> usize {
        2 * self.k + 1
    }
}

impl Transition for DampedMajority {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let s = state.coalition();
        let total = state.allocation.sum();
        let quorum = self.k + 1;
        let full = s == Coalition::grand(self.players());
        let g = Game::from_fn(s, |t| {
            if t.len() < quorum {
                0.0
            } else if full {
                total
            } else {
                total * 0.5f64.powi(t.len() as i32)
            }
        });
        Ok((g, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "damped_majority"
    }
}

/// Three-player dynamic where pushing everything to one player turns the next
/// game into an additive game excluding that player.
///
/// `V(N; e_i) = p_{−i}`; when every coordinate is at most `4/5` the next game is
/// simple majority; in between the two are blended linearly in the largest
/// coordinate. The grand worth is always 1. Sub-coalitions play the restriction
/// of the rule applied to the zero-padded allocation.
#[derive(Debug, Clone, Default)]
pub struct CyclicSplits;

impl CyclicSplits {
    pub fn game_for(x: &[f64]) -> Game {
        let (imax, xmax) = x
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let lambda = ((xmax - 0.8) / 0.2).clamp(0.0, 1.0);
        let maj = Game::majority(3, 1.0);
        if lambda == 0.0 {
            return maj;
        }
        let p = p_minus(imax);
        Game::from_fn(Coalition::grand(3), |t| {
            lambda * p.worth(t) + (1.0 - lambda) * maj.worth(t)
        })
    }
}

impl Transition for CyclicSplits {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let g = Self::game_for(&padded(state, 3));
        Ok((g.restrict(state.coalition())?, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "cyclic_splits"
    }
}

/// One tabulated entry: an allocation over `N` and the game it leads to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub allocation: Vec<f64>,
    pub game: Game,
}

/// Transition given by a table over `N`; the nearest entry (Euclidean, ties to
/// the first) decides the next game, and sub-coalitions use its restriction.
#[derive(Debug, Clone)]
pub struct Tabulated {
    n: usize,
    entries: Vec<TableEntry>,
}

impl Tabulated {
    pub fn new(n: usize, entries: Vec<TableEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("tabulated transition needs at least one entry"));
        }
        let grand = Coalition::grand(n);
        for e in &entries {
            if e.allocation.len() != n || e.game.grand() != grand {
                return Err(Error::input("tabulated entry does not match the player count"));
            }
        }
        Ok(Self { n, entries })
    }
}

impl Transition for Tabulated {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let x = padded(state, self.n);
        let dist = |e: &TableEntry| -> f64 {
            e.allocation.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum()
        };
        let mut best = &self.entries[0];
        let mut best_d = dist(best);
        for e in &self.entries[1..] {
            let d = dist(e);
            if d < best_d {
                best = e;
                best_d = d;
            }
        }
        Ok((best.game.restrict(state.coalition())?, state.aux.clone()))
    }

    fn name(&self) -> &str {
        "tabulated"
    }
}

/// The alternating triangle-game example with `v_1 = u1`.
pub fn alternating_spec() -> DynamicSpec {
    DynamicSpec::new(triangle_u1(), Arc::new(AlternatingTriangles), 0.0).expect("valid spec")
}

/// Unanimity start with worth preserved only by equal splits.
pub fn uniform_preserving_spec(n: usize) -> DynamicSpec {
    DynamicSpec::new(unanimity(Coalition::grand(n), 1.0), Arc::new(UniformPreserving), 0.0)
        .expect("valid spec")
}

/// Damped-majority example on `2k+1` players starting from simple majority.
pub fn damped_majority_spec(k: usize) -> DynamicSpec {
    let t = DampedMajority { k };
    DynamicSpec::new(Game::majority(t.players(), 1.0), Arc::new(t), 0.0).expect("valid spec")
}

/// Cyclic-splits example starting from simple majority.
pub fn cyclic_splits_spec() -> DynamicSpec {
    DynamicSpec::new(Game::majority(3, 1.0), Arc::new(CyclicSplits), 0.0).expect("valid spec")
}

/// Repeated static game.
pub fn static_spec(game: Game) -> DynamicSpec {
    DynamicSpec::new(game.clone(), Arc::new(StaticGame { game }), 0.0).expect("valid spec")
}
