//! Repeated market game with a consortium-size externality.
//!
//! Firm `i` turns a factor basket `y` into `s^i_t · u^i(y)` units of output, where `u^i` is
//! piecewise linear and concave. Every period each firm brings the same endowment `y^i`,
//! and a coalition `T` may pool its baskets. After a period in consortium `S` the scales move by
//! `s^i_{t+1} = e(|S|) γ^{1/(1+x^i_t)} s^i_t`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicSpec, State, Transition};
use crate::error::{Error, Result};
use crate::game_core::simplex::{LinearProgram, Relation};
use crate::game_core::{Coalition, Game};

/// One affine piece `⟨slope, y⟩ + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

/// `u(y) = min_k (⟨a_k, y⟩ + c_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub pieces: Vec<Piece>,
}

impl Utility {
    /// `⟨w, y⟩`.
    pub fn linear(w: Vec<f64>) -> Self {
        Self {
            pieces: vec![Piece {
                slope: w,
                intercept: 0.0,
            }],
        }
    }

    /// `min(⟨w, y⟩, cap)`.
    pub fn capped(w: Vec<f64>, cap: f64) -> Self {
        let l = w.len();
        Self {
            pieces: vec![
                Piece {
                    slope: w,
                    intercept: 0.0,
                },
                Piece {
                    slope: vec![0.0; l],
                    intercept: cap,
                },
            ],
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.slope.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + p.intercept)
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self, l: usize, firm: usize) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::input(format!("firm {firm}: utility has no pieces")));
        }
        for p in &self.pieces {
            if p.slope.len() != l {
                return Err(Error::input(format!(
                    "firm {firm}: slope has {} entries, expected {l}",
                    p.slope.len()
                )));
            }
            if !p.intercept.is_finite() || p.slope.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::input(format!(
                    "firm {firm}: slopes must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// Externality multiplier `e(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Externality {
    /// `1 + η (k − 1)`.
    Linear { eta: f64 },
    /// `values[k − 1]`.
    Table { values: Vec<f64> },
}

impl Default for Externality {
    fn default() -> Self {
        Externality::Linear { eta: 0.1 }
    }
}

impl Externality {
    pub fn eval(&self, k: usize) -> f64 {
        match self {
            Externality::Linear { eta } => 1.0 + eta * (k as f64 - 1.0),
            Externality::Table { values } => values[k - 1],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let vals: Vec<f64> = match self {
            Externality::Table { values } if values.len() < n => {
                return Err(Error::input(format!(
                    "externality table needs {n} values, got {}",
                    values.len()
                )))
            }
            _ => (1..=n).map(|k| self.eval(k)).collect(),
        };
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::input("externality values must be positive"));
        }
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::input("externality must be nondecreasing in k"));
        }
        Ok(())
    }
}

fn default_floor() -> f64 {
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    /// `y^i`, one basket of `ℓ` factors per firm.
    pub endowments: Vec<Vec<f64>>,
    /// `u^i_1`.
    pub utilities: Vec<Utility>,
    #[serde(default)]
    pub externality: Externality,
    pub gamma: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// `s^i_1`; all ones when absent.
    #[serde(default)]
    pub initial_scales: Option<Vec<f64>>,
}

impl MarketSpec {
    pub fn firms(&self) -> usize {
        self.endowments.len()
    }

    pub fn factors(&self) -> usize {
        self.endowments.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.firms();
        let l = self.factors();
        if n == 0 || n > 16 {
            return Err(Error::input(format!("market needs 1..=16 firms, got {n}")));
        }
        if l == 0 {
            return Err(Error::input("market needs at least one factor"));
        }
        if self.utilities.len() != n {
            return Err(Error::input(format!(
                "{} utilities for {n} firms",
                self.utilities.len()
            )));
        }
        for (i, y) in self.endowments.iter().enumerate() {
            if y.len() != l || y.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::input(format!(
                    "firm {i}: endowment must have {l} nonnegative entries"
                )));
            }
        }
        for (i, u) in self.utilities.iter().enumerate() {
            u.validate(l, i)?;
        }
        self.externality.validate(n)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::input(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.floor > -1.0) {
            return Err(Error::input("floor must exceed -1 so that 1 + x stays positive"));
        }
        if let Some(s) = &self.initial_scales {
            if s.len() != n || s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::input("initial scales must be n positive numbers"));
            }
        }
        Ok(())
    }

    pub fn scales(&self) -> Vec<f64> {
        self.initial_scales
            .clone()
            .unwrap_or_else(|| vec![1.0; self.firms()])
    }

    /// `s^i_{t+1}` for a firm that received `x` inside a consortium of `k` firms.
    pub fn next_scale(&self, k: usize, x: f64, s: f64) -> f64 {
        self.externality.eval(k) * self.gamma.powf(1.0 / (1.0 + x)) * s
    }
}

/// `max Σ_{i∈T} s^i u^i(z^i)` subject to `Σ z^i = Σ y^i`, `z ≥ 0`.
pub fn pooled_output(ms: &MarketSpec, scales: &[f64], t: Coalition) -> Result<f64> {
    let members: Vec<usize> = t.members().collect();
    let p = members.len();
    if p == 0 {
        return Ok(0.0);
    }
    if p == 1 {
        let i = members[0];
        return Ok(scales[i] * ms.utilities[i].eval(&ms.endowments[i]));
    }
    let l = ms.factors();
    // variables: z (p·ℓ), w⁺ (p), w⁻ (p)
    let nz = p * l;
    let width = nz + 2 * p;
    let mut obj = vec![0.0; width];
    for (r, &i) in members.iter().enumerate() {
        obj[nz + r] = -scales[i];
        obj[nz + p + r] = scales[i];
    }
    let mut lp = LinearProgram::minimize(obj);
    for (r, &i) in members.iter().enumerate() {
        for piece in &ms.utilities[i].pieces {
            let mut row = vec![0.0; width];
            for j in 0..l {
                row[r * l + j] = -piece.slope[j];
            }
            row[nz + r] = 1.0;
            row[nz + p + r] = -1.0;
            lp.add(row, Relation::Le, piece.intercept);
        }
    }
    for j in 0..l {
        let mut row = vec![0.0; width];
        for r in 0..p {
            row[r * l + j] = 1.0;
        }
        let total: f64 = members.iter().map(|&i| ms.endowments[i][j]).sum();
        lp.add(row, Relation::Eq, total);
    }
    let (_, value) = lp
        .solve()
        .map_err(|e| Error::Solver(format!("market LP for {t}: {e}")))?
        .optimal()
        .ok_or_else(|| Error::Solver(format!("market LP for {t} has no optimum")))?;
    Ok(-value)
}

/// Stage game `v^S_t` over `s` with firm scales `scales` (indexed by firm).
pub fn stage_market_game(ms: &MarketSpec, scales: &[f64], s: Coalition) -> Result<Game> {
    if scales.len() != ms.firms() || scales.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("scales must be n positive numbers"));
    }
    if !s.is_subset_of(Coalition::grand(ms.firms())) {
        return Err(Error::input(format!("{s} is not a set of firms")));
    }
    let masks = 1usize << s.len();
    let table = (0..masks)
        .into_par_iter()
        .map(|m| pooled_output(ms, scales, s.from_local_mask(m)))
        .collect::<Result<Vec<f64>>>()?;
    Game::from_table(s, table)
}

/// Transition of the market family. `aux` holds the current scales `s^i_t`.
#[derive(Clone, Debug)]
pub struct MarketDynamic {
    spec: MarketSpec,
}

impl MarketDynamic {
    pub fn new(spec: MarketSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &MarketSpec {
        &self.spec
    }

    /// Scales after the state's period.
    pub fn advance(&self, state: &State) -> Result<Vec<f64>> {
        let s = state.coalition();
        let k = s.len();
        let mut next = state.aux.clone();
        if next.len() != self.spec.firms() {
            return Err(Error::Simulation {
                step: 0,
                reason: format!("state carries {} scales for {} firms", next.len(), self.spec.firms()),
            });
        }
        for (i, x) in s.members().zip(state.allocation.payoffs()) {
            if 1.0 + x <= 0.0 {
                return Err(Error::Simulation {
                    step: 0,
                    reason: format!("allocation {x} of firm {i} leaves 1 + x nonpositive"),
                });
            }
            next[i] = self.spec.next_scale(k, *x, next[i]);
            if !next[i].is_finite() || next[i] <= 0.0 {
                return Err(Error::Divergence {
                    coalition: s,
                    reason: format!("scale of firm {i} became {}", next[i]),
                });
            }
        }
        Ok(next)
    }
}

impl Transition for MarketDynamic {
    fn next(&self, state: &State) -> Result<(Game, Vec<f64>)> {
        let scales = self.advance(state)?;
        let game = stage_market_game(&self.spec, &scales, state.coalition())?;
        Ok((game, scales))
    }

    fn uses_aux(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "market"
    }
}

/// Dynamic spec whose first stage is the market game of all firms at the initial scales.
pub fn market_dynamic(ms: &MarketSpec) -> Result<DynamicSpec> {
    let dynamic = MarketDynamic::new(ms.clone())?;
    let scales = ms.scales();
    let initial = stage_market_game(ms, &scales, Coalition::grand(ms.firms()))?;
    Ok(DynamicSpec::new(initial, Arc::new(dynamic), ms.floor)?.with_initial_aux(scales))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::Allocation;

    fn two_firm_trade() -> MarketSpec {
        MarketSpec {
            endowments: vec![vec![2.0], vec![0.0]],
            utilities: vec![Utility::capped(vec![1.0], 1.0), Utility::capped(vec![1.0], 1.0)],
            externality: Externality::Linear { eta: 0.1 },
            gamma: 0.8,
            floor: 0.0,
            initial_scales: None,
        }
    }

    #[test]
    fn trade_doubles_output() {
        let ms = two_firm_trade();
        for scale in [1.0, 2.5] {
            let g = stage_market_game(&ms, &[scale, scale], Coalition::grand(2)).unwrap();
            assert!((g.grand_worth() - 2.0 * scale).abs() < 1e-9);
            let split = g.worth(Coalition::singleton(0)) + g.worth(Coalition::singleton(1));
            assert!((split - scale).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_utilities_have_no_gains_from_trade() {
        let w = vec![0.5, 2.0];
        let ms = MarketSpec {
            endowments: vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 1.0]],
            utilities: vec![Utility::linear(w.clone()); 3],
            externality: Externality::default(),
            gamma: 0.5,
            floor: 0.0,
            initial_scales: None,
        };
        let g = stage_market_game(&ms, &[1.5; 3], Coalition::grand(3)).unwrap();
        for t in Coalition::grand(3).subsets() {
            let expect: f64 = t
                .members()
                .map(|i| 1.5 * ms.endowments[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            assert!((g.worth(t) - expect).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn splinter_grows_slower() {
        let ms = two_firm_trade();
        for x in [0.0, 0.3, 1.0] {
            let two = 1.1 * 0.8f64.powf(1.0 / (1.0 + x));
            let three = 1.2 * 0.8f64.powf(1.0 / (1.0 + x));
            assert!((ms.next_scale(2, x, 1.0) - two).abs() < 1e-12);
            assert!(ms.next_scale(2, x, 1.0) < ms.next_scale(3, x, 1.0));
            assert!((ms.next_scale(3, x, 1.0) - three).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_updates_scales_of_members_only() {
        let mut ms = two_firm_trade();
        ms.endowments.push(vec![1.0]);
        ms.utilities.push(Utility::linear(vec![1.0]));
        let spec = market_dynamic(&ms).unwrap();
        assert!(spec.uses_aux());
        let s = Coalition::from_members([0, 2]);
        let alloc = Allocation::new(s, vec![1.0, 0.5], 0.0).unwrap();
        let (g, aux) = spec.transition(&State::new(alloc, vec![1.0; 3])).unwrap();
        assert_eq!(g.grand(), s);
        assert!((aux[0] - 1.1 * 0.8f64.powf(0.5)).abs() < 1e-12);
        assert_eq!(aux[1], 1.0);
        assert!((aux[2] - 1.1 * 0.8f64.powf(1.0 / 1.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut ms = two_firm_trade();
        ms.gamma = 1.0;
        assert!(ms.validate().is_err());
        let mut ms = two_firm_trade();
        ms.externality = Externality::Linear { eta: -0.5 };
        assert!(ms.validate().is_err());
        let mut ms = two_firm_trade();
        ms.utilities[0].pieces[0].slope = vec![-1.0];
        assert!(ms.validate().is_err());
    }
}
