use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_core::{Allocation, Coalition, Game};
use crate::stable_core::AggregateDynamic;

/// The system state `(S; x^S)` plus any auxiliary quantities a family carries
/// (for example firm productivity scales). `aux` is indexed by global player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub allocation: Allocation,
    pub aux: Vec<f64>,
}

impl State {
    pub fn new(allocation: Allocation, aux: Vec<f64>) -> Self {
        Self { allocation, aux }
    }

    pub fn coalition(&self) -> Coalition {
        self.allocation.coalition()
    }
}

/// The dynamic `V`: maps the last state to the next stage game over the same coalition.
pub trait Transition: Send + Sync + fmt::Debug {
    /// Stage game `V(S; x^S)` over `state.coalition()` and the next auxiliary vector.
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)>;

    /// Present when every worth `V(S;x)(T)` depends only on the aggregate `x(T)`.
    fn aggregate(&self) -> Option<&AggregateDynamic> {
        None
    }

    /// Whether `next` reads or changes `aux`. Families that do not are Markov in the allocation alone.
    fn uses_aux(&self) -> bool {
        false
    }

    fn name(&self) -> &str;
}

/// How the time-1 game of a coalition that splits before play starts is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSubgames {
    /// `v_1^S` is produced by the dynamic from the pre-play allocation: `V(S; x_0|_S)`.
    #[default]
    Distinct,
    /// `v_1^S` is `v_1^N` restricted to `S`.
    Restricted,
}

/// Initial game, transition and allocation floor of a dynamic cooperative game.
#[derive(Clone)]
pub struct DynamicSpec {
    initial: Game,
    transition: Arc<dyn Transition>,
    floor: f64,
    initial_aux: Vec<f64>,
    pre_play: Vec<f64>,
    initial_subgames: InitialSubgames,
}

impl fmt::Debug for DynamicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicSpec")
            .field("n", &self.players())
            .field("family", &self.transition.name())
            .field("floor", &self.floor)
            .field("initial_subgames", &self.initial_subgames)
            .finish()
    }
}

impl DynamicSpec {
    pub fn new(initial: Game, transition: Arc<dyn Transition>, floor: f64) -> Result<Self> {
        let n = initial.players();
        if initial.grand() != Coalition::grand(n) {
            return Err(Error::input("initial game must be over {0, .., n-1}"));
        }
        if initial.grand_worth() < n as f64 * floor - 1e-9 {
            return Err(Error::Config(format!(
                "floor {floor} exceeds the per-player share of v_1(N) = {}",
                initial.grand_worth()
            )));
        }
        let pre_play = vec![initial.grand_worth() / n as f64; n];
        Ok(Self {
            initial,
            transition,
            floor,
            initial_aux: Vec::new(),
            pre_play,
            initial_subgames: InitialSubgames::default(),
        })
    }

    pub fn with_initial_aux(mut self, aux: Vec<f64>) -> Self {
        self.initial_aux = aux;
        self
    }

    pub fn with_initial_subgames(mut self, mode: InitialSubgames) -> Self {
        self.initial_subgames = mode;
        self
    }

    /// Pre-play allocation `x_0` used by [`InitialSubgames::Distinct`]. Defaults to the equal split of `v_1(N)`.
    pub fn with_pre_play(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.players() {
            return Err(Error::input("pre-play allocation has the wrong length"));
        }
        self.pre_play = x0;
        Ok(self)
    }

    pub fn players(&self) -> usize {
        self.initial.players()
    }

    pub fn grand(&self) -> Coalition {
        self.initial.grand()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn initial(&self) -> &Game {
        &self.initial
    }

    pub fn initial_aux(&self) -> &[f64] {
        &self.initial_aux
    }

    pub fn initial_subgames(&self) -> InitialSubgames {
        self.initial_subgames
    }

    pub fn family(&self) -> &str {
        self.transition.name()
    }

    pub fn aggregate(&self) -> Option<&AggregateDynamic> {
        self.transition.aggregate()
    }

    pub fn uses_aux(&self) -> bool {
        self.transition.uses_aux()
    }

    /// `V(S; x^S)`, validated against the state's coalition.
    pub fn transition(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let (game, aux) = self.transition.next(state)?;
        if game.grand() != state.coalition() {
            return Err(Error::Simulation {
                step: 0,
                reason: format!(
                    "transition returned a game over {} for state over {}",
                    game.grand(),
                    state.coalition()
                ),
            });
        }
        if let Some((m, w)) = game.table().iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(Error::Divergence {
                coalition: game.grand().from_local_mask(m),
                reason: format!("non-finite worth {w}"),
            });
        }
        Ok((game, aux))
    }

    /// Stage game of `s ⊆ state.coalition()` after the state, i.e. `V(S; x|_S)`.
    pub fn transition_to(&self, state: &State, s: Coalition) -> Result<(Game, Vec<f64>)> {
        if s == state.coalition() {
            return self.transition(state);
        }
        let restricted = State::new(state.allocation.restrict(s)?, state.aux.clone());
        self.transition(&restricted)
    }

    /// Time-1 game `v_1^S` of coalition `s` and its auxiliary vector.
    pub fn initial_game(&self, s: Coalition) -> Result<(Game, Vec<f64>)> {
        if !s.is_subset_of(self.grand()) || s.is_empty() {
            return Err(Error::input(format!("{s} is not a nonempty subset of N")));
        }
        if s == self.grand() {
            return Ok((self.initial.clone(), self.initial_aux.clone()));
        }
        match self.initial_subgames {
            InitialSubgames::Restricted => Ok((self.initial.restrict(s)?, self.initial_aux.clone())),
            InitialSubgames::Distinct => {
                let x0 = Allocation::new(self.grand(), self.pre_play.clone(), self.floor)?;
                let state = State::new(x0.restrict(s)?, self.initial_aux.clone());
                // the pre-play step does not advance auxiliary quantities
                let (g, _) = self.transition(&state)?;
                Ok((g, self.initial_aux.clone()))
            }
        }
    }

    /// Checked allocation of `game` under this spec's floor.
    pub fn allocation(&self, game: &Game, payoffs: Vec<f64>) -> Result<Allocation> {
        Allocation::of(game, payoffs, self.floor)
    }
}
