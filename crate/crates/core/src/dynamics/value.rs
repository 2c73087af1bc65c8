//! Optimal discounted worth of a coalition playing on its own (`v_*`).
//!
//! Once a coalition `S` is the grand coalition, its stage share is always the
//! grand worth `V(S; x)(S)` of the current game, so only the choice of
//! allocation matters, through the next game it induces. The optimum is
//! computed by value iteration on the grid-restricted state graph reachable
//! from the query, truncated at `ds.horizon` steps; families whose worths
//! depend only on aggregates follow a single deterministic orbit instead.

use std::collections::HashMap;

use serde::Serialize;

use super::discount::DiscountSpec;
use super::grid::Grid;
use super::spec::{DynamicSpec, State};
use crate::error::{Error, Result};
use crate::game_core::{Allocation, Coalition, Game};

/// Default cap on explored states per coalition.
pub const DEFAULT_MAX_STATES: usize = 400_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMethod {
    Orbit,
    GridDp,
}

/// An optimal value with its error budget.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ValueEstimate {
    /// `max (1−δ) Σ_{t≥1} δ^{t−1} w_t` over grid-feasible continuations.
    pub value: f64,
    /// Bound on the effect of truncating at the horizon.
    pub truncation_error: f64,
    /// Grid resolution; the discretization error is at most a Lipschitz constant times this.
    pub grid_step: f64,
    pub method: ValueMethod,
    pub states: usize,
}

fn qkey(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x * 1e9).round() as i64).collect()
}

struct Node {
    worth: f64,
    group: usize,
}

struct Group {
    total: f64,
    aux: Vec<f64>,
    members: Vec<usize>,
    leaf: bool,
    depth: usize,
}

/// Incremental solver for one coalition; reuses its state graph across queries.
pub struct ValueSolver<'a> {
    spec: &'a DynamicSpec,
    coalition: Coalition,
    ds: DiscountSpec,
    grid: Grid,
    max_states: usize,
    nodes: Vec<Node>,
    node_index: HashMap<(Vec<i64>, Vec<i64>), usize>,
    groups: Vec<Group>,
    group_index: HashMap<(i64, Vec<i64>), usize>,
    node_values: Vec<f64>,
    group_values: Vec<f64>,
    max_worth: f64,
    dirty: bool,
}

impl<'a> ValueSolver<'a> {
    pub fn new(spec: &'a DynamicSpec, coalition: Coalition, ds: DiscountSpec, grid: Grid) -> Result<Self> {
        if coalition.is_empty() || !coalition.is_subset_of(spec.grand()) {
            return Err(Error::input(format!("{coalition} is not a nonempty subset of N")));
        }
        Ok(Self {
            spec,
            coalition,
            ds,
            grid,
            max_states: DEFAULT_MAX_STATES,
            nodes: Vec::new(),
            node_index: HashMap::new(),
            groups: Vec::new(),
            group_index: HashMap::new(),
            node_values: Vec::new(),
            group_values: Vec::new(),
            max_worth: 0.0,
            dirty: false,
        })
    }

    pub fn with_max_states(mut self, max_states: usize) -> Self {
        self.max_states = max_states;
        self
    }

    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    /// Value when the coalition is about to play `game` (whose aux is `aux`).
    pub fn value_of_game(&mut self, game: &Game, aux: &[f64]) -> Result<ValueEstimate> {
        self.check_game(game)?;
        let w = game.grand_worth();
        if let Some(ad) = self.spec.aggregate() {
            return self.orbit(w, |c| ad.step(self.coalition, c));
        }
        let g = self.group(w, aux.to_vec(), 0)?;
        self.expand()?;
        self.solve();
        let d = self.ds.delta;
        Ok(self.estimate((1.0 - d) * w + d * self.group_values[g]))
    }

    /// Value after the state `entry` (an allocation fragment over the coalition): the first game is `V(S; entry)`.
    pub fn value_after(&mut self, entry: &State) -> Result<ValueEstimate> {
        if entry.coalition() != self.coalition {
            return Err(Error::input(format!(
                "entry over {} used for coalition {}",
                entry.coalition(),
                self.coalition
            )));
        }
        if let Some(ad) = self.spec.aggregate() {
            let c = entry.allocation.sum();
            let first = ad.step(self.coalition, c)?;
            return self.orbit(first, |c| ad.step(self.coalition, c));
        }
        let id = self.node(entry.allocation.payoffs(), &entry.aux, 0)?;
        self.expand()?;
        self.solve();
        Ok(self.estimate(self.node_values[id]))
    }

    fn check_game(&self, game: &Game) -> Result<()> {
        if game.grand() != self.coalition {
            return Err(Error::input(format!(
                "game over {} used for coalition {}",
                game.grand(),
                self.coalition
            )));
        }
        Ok(())
    }

    fn estimate(&self, value: f64) -> ValueEstimate {
        ValueEstimate {
            value,
            truncation_error: self.ds.delta.powi(self.ds.horizon as i32) * self.max_worth,
            grid_step: self.grid.resolution(),
            method: ValueMethod::GridDp,
            states: self.nodes.len(),
        }
    }

    fn orbit(&self, first: f64, step: impl Fn(f64) -> Result<f64>) -> Result<ValueEstimate> {
        let d = self.ds.delta;
        let mut w = first;
        let mut acc = 0.0;
        let mut disc = 1.0;
        let mut max_w = w.abs();
        for t in 1..=self.ds.horizon {
            acc += disc * w;
            disc *= d;
            if t < self.ds.horizon {
                w = step(w)?;
                max_w = max_w.max(w.abs());
            }
        }
        // stationary continuation beyond the horizon
        let value = (1.0 - d) * acc + disc * w;
        Ok(ValueEstimate {
            value,
            truncation_error: disc * max_w,
            grid_step: 0.0,
            method: ValueMethod::Orbit,
            states: self.ds.horizon,
        })
    }

    fn group(&mut self, total: f64, aux: Vec<f64>, depth: usize) -> Result<usize> {
        let key = ((total * 1e9).round() as i64, qkey(&aux));
        if let Some(&g) = self.group_index.get(&key) {
            if self.groups[g].depth > depth {
                self.groups[g].depth = depth;
            }
            return Ok(g);
        }
        self.max_worth = self.max_worth.max(total.abs());
        let id = self.groups.len();
        self.groups.push(Group {
            total,
            aux,
            members: Vec::new(),
            leaf: true,
            depth,
        });
        self.group_values.push(total);
        self.group_index.insert(key, id);
        self.dirty = true;
        Ok(id)
    }

    fn node(&mut self, payoffs: &[f64], aux: &[f64], depth: usize) -> Result<usize> {
        let key = (qkey(payoffs), qkey(aux));
        if let Some(&id) = self.node_index.get(&key) {
            return Ok(id);
        }
        if self.nodes.len() >= self.max_states {
            return Err(Error::Budget {
                reason: format!("value iteration for {} exceeded the state cap", self.coalition),
                explored: self.nodes.len(),
            });
        }
        let alloc = Allocation::new(self.coalition, payoffs.to_vec(), self.spec.floor())?;
        let (game, next_aux) = self.spec.transition(&State::new(alloc, aux.to_vec()))?;
        let worth = game.grand_worth();
        let group = self.group(worth, next_aux, depth + 1)?;
        let id = self.nodes.len();
        self.nodes.push(Node { worth, group });
        self.node_values.push(worth);
        self.node_index.insert(key, id);
        self.dirty = true;
        Ok(id)
    }

    /// Expands every unexpanded group within the horizon.
    fn expand(&mut self) -> Result<()> {
        let k = self.coalition.len();
        let mut g = 0;
        while g < self.groups.len() {
            if self.groups[g].leaf && self.groups[g].depth < self.ds.horizon {
                let total = self.groups[g].total;
                let aux = self.groups[g].aux.clone();
                let depth = self.groups[g].depth;
                let points = self.grid.points(k, total, self.spec.floor())?;
                let mut members = Vec::with_capacity(points.len());
                for p in points {
                    members.push(self.node(&p, &aux, depth)?);
                }
                self.groups[g].members = members;
                self.groups[g].leaf = false;
                self.dirty = true;
            }
            g += 1;
        }
        Ok(())
    }

    fn solve(&mut self) {
        if !self.dirty {
            return;
        }
        let d = self.ds.delta;
        let cap = ((1e-13f64).ln() / d.ln()).ceil() as usize + 10;
        for _ in 0..cap {
            let mut change = 0.0f64;
            for (gi, g) in self.groups.iter().enumerate() {
                if g.leaf {
                    continue;
                }
                let best = g
                    .members
                    .iter()
                    .map(|&m| self.node_values[m])
                    .fold(f64::NEG_INFINITY, f64::max);
                change = change.max((best - self.group_values[gi]).abs());
                self.group_values[gi] = best;
            }
            for (ni, n) in self.nodes.iter().enumerate() {
                let v = (1.0 - d) * n.worth + d * self.group_values[n.group];
                change = change.max((v - self.node_values[ni]).abs());
                self.node_values[ni] = v;
            }
            if change <= 1e-13 * (1.0 + self.max_worth) {
                break;
            }
        }
        self.dirty = false;
    }
}

/// `v_*` of `s` from the state `entry` (over `s`): first game `V(S; entry)`.
pub fn optimal_value(
    spec: &DynamicSpec,
    s: Coalition,
    entry: &State,
    ds: &DiscountSpec,
    grid: Grid,
) -> Result<ValueEstimate> {
    ValueSolver::new(spec, s, *ds, grid)?.value_after(entry)
}

/// `v_*(S, δ)` from the start of play: `S` plays `v_1^S` at time 1.
pub fn initial_optimal_value(
    spec: &DynamicSpec,
    s: Coalition,
    ds: &DiscountSpec,
    grid: Grid,
) -> Result<ValueEstimate> {
    let (g, aux) = spec.initial_game(s)?;
    ValueSolver::new(spec, s, *ds, grid)?.value_of_game(&g, &aux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{damped_majority_spec, static_spec, uniform_preserving_spec};
    use crate::game_core::Game;

    #[test]
    fn constant_worth_gives_constant_value() {
        let spec = static_spec(Game::majority(3, 1.0));
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let n = Coalition::grand(3);
        let entry = State::new(Allocation::new(n, vec![0.2, 0.3, 0.5], 0.0).unwrap(), vec![]);
        let v = optimal_value(&spec, n, &entry, &ds, Grid::default()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn damped_singleton_is_worthless() {
        let spec = damped_majority_spec(1);
        let ds = DiscountSpec::new(0.9, 1e-6, 1.0).unwrap();
        let s = Coalition::singleton(0);
        let entry = State::new(Allocation::new(s, vec![1.0 / 3.0], 0.0).unwrap(), vec![]);
        let v = optimal_value(&spec, s, &entry, &ds, Grid::default()).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn damped_pair_follows_geometric_orbit() {
        // entry share 2/3; worths (2/3)/4, (2/3)/16, ...
        let spec = damped_majority_spec(1);
        let d = 0.9;
        let ds = DiscountSpec::new(d, 1e-9, 1.0).unwrap();
        let s = Coalition::from_members([0, 1]);
        let entry = State::new(Allocation::new(s, vec![1.0 / 3.0; 2], 0.0).unwrap(), vec![]);
        let v = optimal_value(&spec, s, &entry, &ds, Grid::default()).unwrap();
        let expected = (1.0 - d) * (2.0 / 3.0) * 0.25 / (1.0 - d * 0.25);
        assert!((v.value - expected).abs() < 1e-8, "{} vs {expected}", v.value);
    }

    #[test]
    fn uniform_preserving_optimum_keeps_the_cake() {
        let spec = uniform_preserving_spec(3);
        let ds = DiscountSpec::new(0.9, 1e-8, 1.0).unwrap();
        let v = initial_optimal_value(&spec, Coalition::grand(3), &ds, Grid::new(3).unwrap()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-7, "{}", v.value);
    }
}
