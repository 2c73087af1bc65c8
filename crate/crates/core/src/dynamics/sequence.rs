use std::fmt::Write as _;

use serde::Serialize;

use super::discount::{DiscountSpec, Stream};
use super::spec::{DynamicSpec, State};
use crate::error::{Error, Result};
use crate::game_core::{Allocation, Coalition, Game};

/// A sequence of `N`-allocations: explicit prefix then an optional repeating cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllocationSequence {
    stream: Stream,
}

impl AllocationSequence {
    pub fn periodic(prefix: Vec<Vec<f64>>, cycle: Vec<Vec<f64>>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::input("periodic sequence needs a nonempty cycle"));
        }
        Ok(Self {
            stream: Stream::periodic(prefix, cycle),
        })
    }

    pub fn constant(x: Vec<f64>) -> Self {
        Self {
            stream: Stream::periodic(Vec::new(), vec![x]),
        }
    }

    /// A sequence known only for `values.len()` periods.
    pub fn finite(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("empty allocation sequence"));
        }
        Ok(Self {
            stream: Stream::finite(values),
        })
    }

    pub fn at(&self, t: usize) -> Option<&[f64]> {
        self.stream.at(t)
    }

    pub fn stream(&self) -> &Stream {
        &self.stream
    }

    pub fn is_periodic(&self) -> bool {
        self.stream.is_periodic()
    }
}

/// The `N`-only path a sequence induces: its stage games and states.
#[derive(Clone, Debug)]
pub struct NPath {
    /// Allocation stream over `N`.
    pub allocations: Stream,
    /// Worth tables (local masks over `N`) of the stage games, `games[t-1]` played at time `t`.
    pub games: Stream,
    /// `states[t-1] = (x_t, aux_t)` for every distinct time.
    pub states: Vec<State>,
    /// Periods summed when the path is truncated; `None` when sums are exact.
    pub truncated_at: Option<usize>,
    /// Largest absolute worth or payoff seen.
    pub max_abs: f64,
}

impl NPath {
    pub fn game_at(&self, t: usize, grand: Coalition) -> Game {
        Game::from_table(grand, self.games.at(t).expect("time within path").to_vec())
            .expect("stored tables are valid")
    }

    /// Number of distinct times worth checking.
    pub fn distinct_len(&self) -> usize {
        self.states.len()
    }
}

/// Builds the stage games of an `N`-only sequence, validating each allocation.
///
/// Periodic sequences of families without auxiliary state are handled exactly;
/// everything else is unrolled up to `ds.horizon` periods (or the sequence length).
pub fn n_path(spec: &DynamicSpec, seq: &AllocationSequence, ds: &DiscountSpec) -> Result<NPath> {
    let exact = seq.is_periodic() && !spec.uses_aux();
    let len = if exact {
        seq.stream().distinct_len() + 1
    } else if seq.is_periodic() {
        ds.horizon
    } else {
        seq.stream().prefix.len()
    };
    let mut games: Vec<Vec<f64>> = Vec::with_capacity(len);
    let mut states: Vec<State> = Vec::with_capacity(len);
    let mut max_abs = 0.0f64;
    let mut game = spec.initial().clone();
    let mut aux = spec.initial_aux().to_vec();
    for t in 1..=len {
        let x = seq.at(t).expect("within known length").to_vec();
        let alloc = Allocation::of(&game, x, spec.floor()).map_err(|e| Error::Simulation {
            step: t,
            reason: e.to_string(),
        })?;
        max_abs = max_abs
            .max(game.max_abs_worth())
            .max(alloc.payoffs().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        games.push(game.table().to_vec());
        let state = State::new(alloc, std::mem::take(&mut aux));
        if t < len {
            let (g, a) = spec.transition(&state).map_err(|e| at_step(e, t + 1))?;
            game = g;
            aux = a;
        }
        states.push(state);
    }
    let (games, allocations, truncated_at) = if exact {
        // games from time P+2 on repeat with the allocation cycle
        let p = seq.stream().prefix.len();
        let cycle = games.split_off(p + 1);
        (
            Stream::periodic(games, cycle),
            seq.stream().clone(),
            None,
        )
    } else {
        let allocs = states
            .iter()
            .map(|s| s.allocation.payoffs().to_vec())
            .collect();
        (Stream::finite(games), Stream::finite(allocs), Some(len))
    };
    if exact {
        states.pop();
    }
    Ok(NPath {
        allocations,
        games,
        states,
        truncated_at,
        max_abs,
    })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Simulation { reason, .. } => Error::Simulation { step, reason },
        other => other,
    }
}

/// What a schedule does at a step.
#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    /// Allocate the current stage game.
    Allocate(Vec<f64>),
    /// The given sub-coalition splits off; the schedule is asked again for its game.
    Split(Coalition),
}

/// Chooses allocations (or splits) step by step during [`simulate`].
pub trait Schedule {
    fn decide(&mut self, t: usize, game: &Game, prev: Option<&State>) -> Decision;
}

impl<F> Schedule for F
where
    F: FnMut(usize, &Game, Option<&State>) -> Decision,
{
    fn decide(&mut self, t: usize, game: &Game, prev: Option<&State>) -> Decision {
        self(t, game, prev)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryStep {
    pub t: usize,
    pub game: Game,
    pub state: State,
}

/// A realized history: coalitions shrink over time, each allocation is an allocation of its stage game.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn coalitions(&self) -> Vec<Coalition> {
        self.steps.iter().map(|s| s.state.coalition()).collect()
    }

    pub fn games(&self) -> impl Iterator<Item = &Game> {
        self.steps.iter().map(|s| &s.game)
    }

    /// Per-step share of `t` (sum over members present).
    pub fn shares(&self, t: Coalition) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.state.allocation.total(t & s.state.coalition()))
            .collect()
    }

    /// CSV with columns `t, coalition, x_0..x_{n-1}` and optionally one worth column per coalition.
    pub fn to_csv(&self, n: usize, with_worths: bool) -> String {
        let grand = Coalition::grand(n);
        let mut out = String::from("t,coalition");
        for i in 0..n {
            let _ = write!(out, ",x_{i}");
        }
        let subsets: Vec<Coalition> = grand.subsets().skip(1).collect();
        if with_worths {
            for s in &subsets {
                let _ = write!(out, ",w_{}", s.label().replace(',', "_"));
            }
        }
        out.push('\n');
        for step in &self.steps {
            let c = step.state.coalition();
            let _ = write!(out, "{},\"{}\"", step.t, c.label());
            for i in 0..n {
                match step.state.allocation.get(i) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            if with_worths {
                for s in &subsets {
                    if s.is_subset_of(c) {
                        let _ = write!(out, ",{}", step.game.worth(*s));
                    } else {
                        out.push(',');
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the dynamic for `ds.horizon` periods under `schedule`.
pub fn simulate(
    spec: &DynamicSpec,
    schedule: &mut dyn Schedule,
    ds: &DiscountSpec,
) -> Result<Trajectory> {
    let mut steps: Vec<TrajectoryStep> = Vec::with_capacity(ds.horizon);
    for t in 1..=ds.horizon {
        let prev = steps.last().map(|s| &s.state);
        let current = prev.map_or(spec.grand(), |s| s.coalition());
        let (mut game, mut aux) = match prev {
            None => (spec.initial().clone(), spec.initial_aux().to_vec()),
            Some(p) => spec.transition(p).map_err(|e| at_step(e, t))?,
        };
        let mut decision = schedule.decide(t, &game, prev);
        if let Decision::Split(s) = decision {
            if !s.is_proper_subset_of(current) || s.is_empty() {
                return Err(Error::Simulation {
                    step: t,
                    reason: format!("split to {s} is not a nonempty proper subset of {current}"),
                });
            }
            (game, aux) = match prev {
                None => spec.initial_game(s)?,
                Some(p) => spec.transition_to(p, s).map_err(|e| at_step(e, t))?,
            };
            decision = schedule.decide(t, &game, prev);
        }
        let payoffs = match decision {
            Decision::Allocate(p) => p,
            Decision::Split(s) => {
                return Err(Error::Simulation {
                    step: t,
                    reason: format!("second split to {s} in the same period"),
                })
            }
        };
        let alloc = Allocation::of(&game, payoffs, spec.floor()).map_err(|e| Error::Simulation {
            step: t,
            reason: e.to_string(),
        })?;
        steps.push(TrajectoryStep {
            t,
            game,
            state: State::new(alloc, aux),
        });
    }
    Ok(Trajectory { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::families::{
        alternating_spec, cyclic_splits_spec, p_minus, static_spec, triangle_u1, triangle_u2,
    };

    #[test]
    fn constant_dynamic_fixed_point() {
        let spec = static_spec(Game::majority(3, 1.0));
        let ds = DiscountSpec::with_horizon(0.9, 12, 1.0).unwrap();
        let mut sched = |_t: usize, _g: &Game, _p: Option<&State>| Decision::Allocate(vec![1.0 / 3.0; 3]);
        let tr = simulate(&spec, &mut sched, &ds).unwrap();
        assert_eq!(tr.steps.len(), 12);
        assert!(tr.games().all(|g| g == &Game::majority(3, 1.0)));
    }

    #[test]
    fn alternating_games() {
        let spec = alternating_spec();
        let ds = DiscountSpec::with_horizon(0.99, 8, 4.0).unwrap();
        let mut sched = |t: usize, _g: &Game, _p: Option<&State>| {
            Decision::Allocate(if t % 2 == 1 {
                vec![1.0, 1.5, 1.5, 0.0]
            } else {
                vec![0.0, 1.5, 1.5, 1.0]
            })
        };
        let tr = simulate(&spec, &mut sched, &ds).unwrap();
        for (k, g) in tr.games().enumerate() {
            let expected = if k % 2 == 0 { triangle_u1() } else { triangle_u2() };
            assert!(g.distance(&expected) < 1e-12, "step {}", k + 1);
        }
    }

    #[test]
    fn cyclic_unit_vectors() {
        let spec = cyclic_splits_spec();
        let ds = DiscountSpec::with_horizon(0.9, 7, 1.0).unwrap();
        let mut sched = |t: usize, _g: &Game, _p: Option<&State>| {
            let mut e = vec![0.0; 3];
            e[(t - 1) % 3] = 1.0;
            Decision::Allocate(e)
        };
        let tr = simulate(&spec, &mut sched, &ds).unwrap();
        for (k, g) in tr.games().enumerate().skip(1) {
            assert!(g.distance(&p_minus((k - 1) % 3)) < 1e-12);
        }
    }

    #[test]
    fn infeasible_allocation_names_step() {
        let spec = static_spec(Game::majority(3, 1.0));
        let ds = DiscountSpec::with_horizon(0.9, 5, 1.0).unwrap();
        let mut sched = |t: usize, _g: &Game, _p: Option<&State>| {
            Decision::Allocate(if t == 3 { vec![1.0, 1.0, 0.0] } else { vec![1.0, 0.0, 0.0] })
        };
        match simulate(&spec, &mut sched, &ds) {
            Err(Error::Simulation { step, .. }) => assert_eq!(step, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_shrinks_coalition() {
        let spec = static_spec(Game::majority(3, 1.0));
        let ds = DiscountSpec::with_horizon(0.9, 6, 1.0).unwrap();
        let pair = Coalition::from_members([0, 1]);
        let mut sched = |t: usize, g: &Game, _p: Option<&State>| {
            if t == 3 && g.players() == 3 {
                Decision::Split(pair)
            } else {
                let k = g.players();
                Decision::Allocate(vec![g.grand_worth() / k as f64; k])
            }
        };
        let tr = simulate(&spec, &mut sched, &ds).unwrap();
        let cs = tr.coalitions();
        assert!(cs.windows(2).all(|w| w[1].is_subset_of(w[0])));
        assert_eq!(cs[5], pair);
        let csv = tr.to_csv(3, true);
        assert!(csv.lines().next().unwrap().starts_with("t,coalition,x_0"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn periodic_path_is_exact() {
        let spec = alternating_spec();
        let seq = AllocationSequence::periodic(
            vec![],
            vec![vec![1.0, 1.5, 1.5, 0.0], vec![0.0, 1.5, 1.5, 1.0]],
        )
        .unwrap();
        let ds = DiscountSpec::with_horizon(0.99, 100, 4.0).unwrap();
        let path = n_path(&spec, &seq, &ds).unwrap();
        assert!(path.truncated_at.is_none());
        let grand = Coalition::grand(4);
        assert!(path.game_at(1, grand).distance(&triangle_u1()) < 1e-12);
        assert!(path.game_at(2, grand).distance(&triangle_u2()) < 1e-12);
        assert!(path.game_at(5, grand).distance(&triangle_u1()) < 1e-12);
    }
}
